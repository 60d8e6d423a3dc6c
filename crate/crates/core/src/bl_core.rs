//! Brascamp-Lieb data and weight computation.
//!
//! A datum is a tuple of surjections π_j : ℝⁿ → ℝ^{n_j} with rational
//! exponents p_j satisfying the scaling condition Σ p_j n_j = n. The
//! reciprocal constant is computed two ways:
//!
//! 1. the Gaussian determinant quotient
//!    `[det(Σ p_j π_jᵀ X_j π_j) / Π det(X_j)^{p_j}]^{1/2}` over SPD
//!    parameters `X_j`, and
//! 2. the minimum-vector form
//!    `inf Π n_j^{-p_j n_j / 2} |||A_j π_j Aᵀ|||^{p_j n_j}` over
//!    unit-determinant matrices,
//!
//! together with an alternating minimizer whose block updates are exact
//! argmins in closed form. Agreement of the two formulations at the
//! converged witness is one of the main consistency checks of this crate.

use crate::linops::{self, DenseMatrix, LinopsError};
use crate::rational::{weighted_sum_equals, Ratio};
use crate::tol;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;

#[derive(Debug)]
pub enum BlError {
    ScalingCondition { lhs: String, n: usize },
    BadExponent { index: usize, value: Ratio },
    BadDimension { index: usize, dim: usize, ambient: usize },
    MapShape { index: usize, expected: (usize, usize), got: (usize, usize) },
    DeterminantConstraint { which: String, det: f64 },
    NotSpd { index: usize, detail: LinopsError },
    Linops(LinopsError),
    ExponentOutOfRange { p: Ratio },
}

impl fmt::Display for BlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlError::ScalingCondition { lhs, n } => {
                write!(f, "scaling condition violated: sum p_j n_j = {lhs}, expected {n}")
            }
            BlError::BadExponent { index, value } => {
                write!(f, "exponent {index} = {value} outside (0, 1]")
            }
            BlError::BadDimension { index, dim, ambient } => {
                write!(f, "dimension {index} = {dim} invalid for ambient {ambient}")
            }
            BlError::MapShape { index, expected, got } => write!(
                f,
                "map {index} has shape {}x{}, expected {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            BlError::DeterminantConstraint { which, det } => {
                write!(f, "{which} determinant {det} violates unit constraint")
            }
            BlError::NotSpd { index, detail } => write!(f, "parameter {index}: {detail}"),
            BlError::Linops(e) => write!(f, "{e}"),
            BlError::ExponentOutOfRange { p } => {
                write!(f, "equal exponent p = {p} lies outside (0, 1]")
            }
        }
    }
}

impl std::error::Error for BlError {}

impl From<LinopsError> for BlError {
    fn from(e: LinopsError) -> Self {
        BlError::Linops(e)
    }
}

/// A Brascamp-Lieb datum: ambient dimension, exponents, and linear maps.
#[derive(Debug, Clone, PartialEq)]
pub struct BLDatum {
    n: usize,
    dims: Vec<usize>,
    exps: Vec<Ratio>,
    maps: Vec<DenseMatrix>,
}

impl BLDatum {
    pub fn new(
        n: usize,
        dims: Vec<usize>,
        exps: Vec<Ratio>,
        maps: Vec<DenseMatrix>,
    ) -> Result<Self, BlError> {
        assert_eq!(dims.len(), exps.len());
        assert_eq!(dims.len(), maps.len());
        for (j, &nj) in dims.iter().enumerate() {
            if nj == 0 || nj > n {
                return Err(BlError::BadDimension { index: j, dim: nj, ambient: n });
            }
        }
        for (j, p) in exps.iter().enumerate() {
            if !p.in_unit_interval() {
                return Err(BlError::BadExponent { index: j, value: *p });
            }
        }
        for (j, m) in maps.iter().enumerate() {
            if m.rows() != dims[j] || m.cols() != n {
                return Err(BlError::MapShape {
                    index: j,
                    expected: (dims[j], n),
                    got: (m.rows(), m.cols()),
                });
            }
        }
        let terms: Vec<(Ratio, i64)> =
            exps.iter().zip(&dims).map(|(p, &nj)| (*p, nj as i64)).collect();
        if !weighted_sum_equals(&terms, n as i64) {
            let lhs: f64 = terms.iter().map(|(p, w)| p.to_f64() * *w as f64).sum();
            return Err(BlError::ScalingCondition { lhs: format!("{lhs}"), n });
        }
        Ok(BLDatum { n, dims, exps, maps })
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn exps(&self) -> &[Ratio] {
        &self.exps
    }

    pub fn maps(&self) -> &[DenseMatrix] {
        &self.maps
    }

    /// The 2-map Fubini datum on ℝ² (coordinate projections, p = 1).
    pub fn loomis_whitney_2d() -> Self {
        let p = Ratio::new(1, 1);
        BLDatum::new(
            2,
            vec![1, 1],
            vec![p, p],
            vec![
                DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
                DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Coordinate-plane projections ℝ³ → ℝ² with p_j = 1/2.
    pub fn loomis_whitney_3d() -> Self {
        let p = Ratio::new(1, 2);
        let drop = |axis: usize| {
            DenseMatrix::from_fn(2, 3, |i, j| {
                let keep = [(0..3).filter(|&c| c != axis).collect::<Vec<_>>()];
                if j == keep[0][i] {
                    1.0
                } else {
                    0.0
                }
            })
        };
        BLDatum::new(3, vec![2, 2, 2], vec![p, p, p], vec![drop(0), drop(1), drop(2)]).unwrap()
    }
}

impl Serialize for BLDatum {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut s = ser.serialize_struct("BLDatum", 5)?;
        s.serialize_field("n", &self.n)?;
        s.serialize_field("m", &self.maps.len())?;
        s.serialize_field("dims", &self.dims)?;
        s.serialize_field("exps", &self.exps)?;
        let maps: Vec<&[f64]> = self.maps.iter().map(|m| m.entries()).collect();
        s.serialize_field("maps", &maps)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for BLDatum {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            m: usize,
            dims: Vec<usize>,
            exps: Vec<Ratio>,
            maps: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(de)?;
        if raw.dims.len() != raw.m || raw.exps.len() != raw.m || raw.maps.len() != raw.m {
            return Err(serde::de::Error::custom("field lengths disagree with m"));
        }
        let maps = raw
            .dims
            .iter()
            .zip(raw.maps)
            .map(|(&nj, entries)| DenseMatrix::new(nj, raw.n, entries))
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        BLDatum::new(raw.n, raw.dims, raw.exps, maps).map_err(serde::de::Error::custom)
    }
}

/// Equal-exponent datum: m maps of shape (n-k) × n with p = n / (m(n-k)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualExpDatum {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub maps: Vec<DenseMatrix>,
}

impl EqualExpDatum {
    pub fn new(n: usize, k: usize, maps: Vec<DenseMatrix>) -> Result<Self, BlError> {
        if k == 0 || k >= n {
            return Err(BlError::BadDimension { index: 0, dim: k, ambient: n });
        }
        for (j, m) in maps.iter().enumerate() {
            if m.rows() != n - k || m.cols() != n {
                return Err(BlError::MapShape {
                    index: j,
                    expected: (n - k, n),
                    got: (m.rows(), m.cols()),
                });
            }
        }
        Ok(EqualExpDatum { n, k, m: maps.len(), maps })
    }

    /// The common exponent p = n / (m (n - k)).
    pub fn exponent(&self) -> Ratio {
        Ratio::new(self.n as i64, (self.m * (self.n - self.k)) as i64)
    }

    pub fn to_bl_datum(&self) -> Result<BLDatum, BlError> {
        let p = self.exponent();
        if !p.in_unit_interval() {
            return Err(BlError::ExponentOutOfRange { p });
        }
        BLDatum::new(
            self.n,
            vec![self.n - self.k; self.m],
            vec![p; self.m],
            self.maps.clone(),
        )
    }
}

/// Outcome of a weight computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BLResult {
    /// The estimated reciprocal constant (or its 1/p-th power for
    /// weight-root computations).
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative objective change at the stopping iteration.
    pub residual: f64,
    /// Optimizing matrices (A_1, ..., A_m, A), unit determinant.
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub a_list: Vec<DenseMatrix>,
    pub a: DenseMatrix,
}

/// Per-iteration diagnostics of the alternating solver.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    /// Min-vector objective after each A_j update.
    pub objectives: Vec<f64>,
    /// The min-vector objective recorded after every half step. The A_j
    /// half step is its exact argmin; the A half step minimizes a tight
    /// majorant (the log-linearization of the product at the current
    /// norms), so the sequence never increases.
    pub lyapunov: Vec<f64>,
    /// True when a rank-deficient Gram matrix was regularized.
    pub regularized: bool,
    /// True when the kernel-limit branch of the A update was taken.
    pub kernel_branch: bool,
}

/// Gaussian determinant quotient at SPD parameters X_j = A_jᵀA_j.
pub fn gaussian_objective(d: &BLDatum, spd_params: &[DenseMatrix]) -> Result<f64, BlError> {
    if spd_params.len() != d.num_maps() {
        return Err(BlError::MapShape {
            index: spd_params.len(),
            expected: (d.num_maps(), 0),
            got: (spd_params.len(), 0),
        });
    }
    let mut central = DenseMatrix::zeros(d.n, d.n);
    let mut log_denominator = 0.0;
    for (j, x) in spd_params.iter().enumerate() {
        let nj = d.dims[j];
        if x.rows() != nj || x.cols() != nj {
            return Err(BlError::MapShape {
                index: j,
                expected: (nj, nj),
                got: (x.rows(), x.cols()),
            });
        }
        let (vals, _) = linops::eigh(x).map_err(|e| BlError::NotSpd { index: j, detail: e })?;
        let max = vals.iter().fold(0.0f64, |a, v| a.max(*v));
        if vals[0] <= tol::ABS * max {
            return Err(BlError::NotSpd {
                index: j,
                detail: LinopsError::NotPositiveDefinite { min_eigenvalue: vals[0] },
            });
        }
        let p = d.exps[j].to_f64();
        log_denominator += p * vals.iter().map(|v| v.ln()).sum::<f64>();
        let xpi = x.matmul(&d.maps[j])?;
        let term = d.maps[j].transpose().matmul(&xpi)?.scale(p);
        central = central.add(&term)?;
    }
    let det_central = linops::det(&central)?;
    if det_central <= 0.0 {
        return Ok(0.0);
    }
    Ok((0.5 * (det_central.ln() - log_denominator)).exp())
}

/// Min-vector objective Π n_j^{-p_j n_j/2} |||A_j π_j Aᵀ|||^{p_j n_j}.
///
/// Requires unit determinants on all arguments (within 1e-6).
pub fn min_vector_objective(
    d: &BLDatum,
    a_list: &[DenseMatrix],
    a: &DenseMatrix,
) -> Result<f64, BlError> {
    for (j, aj) in a_list.iter().enumerate() {
        let dj = linops::det(aj)?;
        if (dj - 1.0).abs() > 1e-6 {
            return Err(BlError::DeterminantConstraint { which: format!("A_{j}"), det: dj });
        }
    }
    let da = linops::det(a)?;
    if (da - 1.0).abs() > 1e-6 {
        return Err(BlError::DeterminantConstraint { which: "A".into(), det: da });
    }
    let at = a.transpose();
    let mut log_obj = 0.0;
    for j in 0..d.num_maps() {
        let nj = d.dims[j] as f64;
        let pn = d.exps[j].to_f64() * nj;
        let norm = linops::hs_norm(&a_list[j].matmul(&d.maps[j])?.matmul(&at)?);
        if norm == 0.0 {
            return Ok(0.0);
        }
        log_obj += pn * (norm.ln() - 0.5 * nj.ln());
    }
    Ok(log_obj.exp())
}

/// Alternating minimization of the min-vector functional.
///
/// For fixed A, the optimal unit-determinant A_j satisfies
/// `A_jᵀA_j = det(G_j)^{1/n_j} G_j^{-1}` with `G_j = π_j Aᵀ A π_jᵀ` (the
/// closed form follows from AM-GM equality). For fixed A_j the optimal A is
/// `M^{-1/2} (det M)^{1/(2n)}` with `M = Σ p_j π_jᵀ X_j π_jᵀ`; when M is
/// numerically singular the kernel-limit update
/// `t^{1/l} P + t^{-1/(n-l)} (I - P)` is applied with growing t, which
/// drives semi-stable data towards weight zero.
pub fn bl_constant_alternating(
    d: &BLDatum,
    max_iters: usize,
    tol_stop: f64,
) -> Result<(BLResult, SolveTrace), BlError> {
    assert!(tol_stop > 0.0, "tolerance must be positive");
    let n = d.n;
    let m = d.num_maps();
    let mut a = DenseMatrix::identity(n);
    let mut trace = SolveTrace::default();
    let mut obj_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut kernel_t = 4.0f64;
    let mut steep_decreases = 0u32;
    let mut a_list: Vec<DenseMatrix> = Vec::new();

    for iter in 0..max_iters {
        iterations = iter + 1;
        let at = a.transpose();
        // A_j update (exact argmin per map).
        a_list.clear();
        let mut ginv_list = Vec::with_capacity(m);
        let mut objective_log = 0.0;
        for j in 0..m {
            let nj = d.dims[j];
            let b = d.maps[j].matmul(&at)?;
            let mut g = b.matmul(&b.transpose())?;
            let (vals, _) = linops::eigh(&g)?;
            let trace_g: f64 = vals.iter().sum();
            if vals[0] <= 1e-12 * trace_g.max(1e-300) {
                // Rank-deficient Gram matrix: regularize and continue.
                let eps = 1e-12 * trace_g.max(1e-30);
                for i in 0..nj {
                    g.set(i, i, g.get(i, i) + eps);
                }
                trace.regularized = true;
            }
            let (vals, vecs) = linops::eigh(&g)?;
            let log_det_g: f64 = vals.iter().map(|v| v.ln()).sum();
            let gj = (log_det_g / nj as f64).exp();
            // A_j = X_j^{1/2} with X_j = det(G)^{1/nj} G^{-1}; the scale
            // correction for the A step keeps the raw G^{-1}.
            let mut ginv = DenseMatrix::zeros(nj, nj);
            let mut a_j = DenseMatrix::zeros(nj, nj);
            for t in 0..nj {
                let wi = 1.0 / vals[t];
                let wa = (gj * wi).sqrt();
                for r in 0..nj {
                    let vr = vecs.get(r, t);
                    for c in 0..nj {
                        let vc = vecs.get(c, t);
                        ginv.set(r, c, ginv.get(r, c) + wi * vr * vc);
                        a_j.set(r, c, a_j.get(r, c) + wa * vr * vc);
                    }
                }
            }
            let p = d.exps[j].to_f64();
            objective_log += 0.5 * p * log_det_g;
            ginv_list.push(ginv);
            a_list.push(a_j);
        }
        let objective = objective_log.exp();
        trace.objectives.push(objective);
        trace.lyapunov.push(objective);

        // Stopping and semi-stability bookkeeping.
        if obj_prev.is_finite() {
            residual = (objective - obj_prev).abs() / obj_prev.abs().max(1e-300);
            if obj_prev > 0.0 && (obj_prev - objective) / obj_prev > 0.5 {
                steep_decreases += 1;
            } else {
                steep_decreases = 0;
            }
            if residual < tol_stop {
                converged = true;
                obj_prev = objective;
                break;
            }
        }
        obj_prev = objective;
        if objective < 1e-8 || steep_decreases >= 10 {
            converged = false;
            break;
        }

        // A update: M is assembled from the GL-scaled parameters G_j^{-1}
        // (the log-linearization weights of the product objective), so the
        // closed-form minimizer never increases the objective.
        let mut central = DenseMatrix::zeros(n, n);
        for j in 0..m {
            let xpi = ginv_list[j].matmul(&d.maps[j])?;
            let term = d.maps[j].transpose().matmul(&xpi)?.scale(d.exps[j].to_f64());
            central = central.add(&term)?;
        }
        let (vals, vecs) = linops::eigh(&central)?;
        let max_eig = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let small: Vec<usize> =
            (0..n).filter(|&i| vals[i] <= 1e-14 * max_eig.max(1e-300)).collect();
        if small.is_empty() {
            // A = M^{-1/2} (det M)^{1/(2n)}
            let log_det: f64 = vals.iter().map(|v| v.ln()).sum();
            let scale = (log_det / (2.0 * n as f64)).exp();
            let mut next = DenseMatrix::zeros(n, n);
            for t in 0..n {
                let w = scale / vals[t].sqrt();
                for r in 0..n {
                    let vr = vecs.get(r, t);
                    for c in 0..n {
                        next.set(r, c, next.get(r, c) + w * vr * vecs.get(c, t));
                    }
                }
            }
            a = next;
        } else {
            // Kernel-limit branch: expand kernel directions, contract the
            // rest, with a scale that grows every time the branch fires.
            trace.kernel_branch = true;
            let l = small.len();
            let t_k = kernel_t;
            kernel_t *= 4.0;
            let w_ker = t_k.powf(1.0 / l as f64);
            let w_rest = t_k.powf(-1.0 / (n - l) as f64);
            let mut next = DenseMatrix::zeros(n, n);
            for t in 0..n {
                let w = if small.contains(&t) { w_ker } else { w_rest };
                for r in 0..n {
                    let vr = vecs.get(r, t);
                    for c in 0..n {
                        next.set(r, c, next.get(r, c) + w * vr * vecs.get(c, t));
                    }
                }
            }
            a = next;
        }
        // Post-step objective at the new A with the old A_j's.
        let at_new = a.transpose();
        let mut post_log = 0.0;
        for j in 0..m {
            let nj = d.dims[j] as f64;
            let pn = d.exps[j].to_f64() * nj;
            let norm = linops::hs_norm(&a_list[j].matmul(&d.maps[j])?.matmul(&at_new)?);
            post_log += pn * (norm.max(1e-300).ln() - 0.5 * nj.ln());
        }
        trace.lyapunov.push(post_log.exp());
    }

    let result = BLResult {
        value: obj_prev,
        iterations,
        converged,
        residual,
        witness: Some(Witness { a_list: a_list.clone(), a: a.clone() }),
    };
    Ok((result, trace))
}

/// Independent estimate of the reciprocal constant by fixed-point
/// iteration on the Gaussian parameters: `X_j ← (π_j M⁻¹ π_jᵀ)⁻¹` with
/// `M = Σ p_j π_jᵀ X_j π_j`, jointly rescaled each round so det M = 1.
/// Shares no state with the min-vector alternation, so agreement of the
/// two values cross-checks both formulations.
pub fn bl_constant_gaussian(
    d: &BLDatum,
    max_iters: usize,
    tol_stop: f64,
) -> Result<BLResult, BlError> {
    let n = d.n;
    let m = d.num_maps();
    let mut x_list: Vec<DenseMatrix> = d.dims.iter().map(|&nj| DenseMatrix::identity(nj)).collect();
    let mut obj_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..max_iters {
        iterations = iter + 1;
        let mut central = DenseMatrix::zeros(n, n);
        for j in 0..m {
            let xpi = x_list[j].matmul(&d.maps[j])?;
            let term = d.maps[j].transpose().matmul(&xpi)?.scale(d.exps[j].to_f64());
            central = central.add(&term)?;
        }
        let (vals, vecs) = linops::eigh(&central)?;
        let max_eig = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if vals[0] <= 1e-14 * max_eig.max(1e-300) {
            // Common near-kernel: the constant is infinite (weight zero).
            return Ok(BLResult {
                value: 0.0,
                iterations,
                converged: false,
                residual,
                witness: None,
            });
        }
        let log_det_m: f64 = vals.iter().map(|v| v.ln()).sum();
        let mut log_den = 0.0;
        for (j, x) in x_list.iter().enumerate() {
            let (xv, _) = linops::eigh(x)?;
            log_den += d.exps[j].to_f64() * xv.iter().map(|v| v.ln()).sum::<f64>();
        }
        let objective = (0.5 * (log_det_m - log_den)).exp();
        if obj_prev.is_finite() {
            residual = (objective - obj_prev).abs() / obj_prev.abs().max(1e-300);
            if residual < tol_stop {
                converged = true;
                obj_prev = objective;
                break;
            }
        }
        obj_prev = objective;
        if objective < 1e-8 {
            converged = false;
            break;
        }
        // M^{-1} via the eigendecomposition, then the per-map update with a
        // joint rescale keeping det M near one.
        let mut m_inv = DenseMatrix::zeros(n, n);
        for t in 0..n {
            let w = 1.0 / vals[t];
            for r in 0..n {
                let vr = vecs.get(r, t);
                for c in 0..n {
                    m_inv.set(r, c, m_inv.get(r, c) + w * vr * vecs.get(c, t));
                }
            }
        }
        let joint = (-log_det_m / n as f64).exp();
        let mut degenerate = false;
        for j in 0..m {
            let g = d.maps[j].matmul(&m_inv)?.matmul(&d.maps[j].transpose())?;
            let sym = DenseMatrix::from_fn(g.rows(), g.cols(), |r, c| {
                0.5 * (g.get(r, c) + g.get(c, r))
            });
            match linops::spd_power(&sym, -1.0) {
                Ok(inv) => x_list[j] = inv.scale(joint),
                Err(LinopsError::NotPositiveDefinite { .. }) => {
                    // Collapsing marginal: semi-stable data, weight zero.
                    degenerate = true;
                    break;
                }
                Err(e) => return Err(BlError::NotSpd { index: j, detail: e }),
            }
        }
        if degenerate {
            converged = false;
            break;
        }
    }
    Ok(BLResult { value: obj_prev, iterations, converged, residual, witness: None })
}

/// Weight root W^{1/p} for an equal-exponent datum, computed by delegating
/// to the alternating solver; the returned value is the reciprocal
/// constant raised to 1/p = m(n-k)/n.
pub fn bl_weight_root(
    d: &EqualExpDatum,
    max_iters: usize,
    tol_stop: f64,
) -> Result<(BLResult, SolveTrace), BlError> {
    let datum = d.to_bl_datum()?;
    let (mut res, trace) = bl_constant_alternating(&datum, max_iters, tol_stop)?;
    let inv_p = (d.m * (d.n - d.k)) as f64 / d.n as f64;
    res.value = res.value.powf(inv_p);
    Ok((res, trace))
}

/// Result of a scaling-identity check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingCheck {
    /// Relative discrepancy between the two sides.
    pub discrepancy: f64,
    /// Whether both weight solves converged; the identity is only
    /// meaningful on converged instances.
    pub both_converged: bool,
}

/// Relative discrepancy of the composition identity
/// `W^{1/p}({M_j π_j}) = W^{1/p}({π_j}) · Π |det M_j|`.
pub fn check_scaling_identity(
    d: &EqualExpDatum,
    m_list: &[DenseMatrix],
    max_iters: usize,
    tol_stop: f64,
) -> Result<ScalingCheck, BlError> {
    assert_eq!(m_list.len(), d.m);
    let mut det_product = 1.0;
    let mut transformed = Vec::with_capacity(d.m);
    for (j, mj) in m_list.iter().enumerate() {
        let dm = linops::det(mj)?;
        if dm.abs() <= tol::ABS {
            return Err(BlError::DeterminantConstraint { which: format!("M_{j}"), det: dm });
        }
        det_product *= dm.abs();
        transformed.push(mj.matmul(&d.maps[j])?);
    }
    let base = bl_weight_root(d, max_iters, tol_stop)?.0;
    let lifted = EqualExpDatum::new(d.n, d.k, transformed)?;
    let lhs = bl_weight_root(&lifted, max_iters, tol_stop)?.0;
    let rhs = base.value * det_product;
    Ok(ScalingCheck {
        discrepancy: (lhs.value - rhs).abs() / lhs.value.abs().max(rhs.abs()).max(1e-300),
        both_converged: base.converged && lhs.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn solve(d: &BLDatum) -> (BLResult, SolveTrace) {
        bl_constant_alternating(d, 4000, 1e-11).unwrap()
    }

    #[test]
    fn scaling_condition_is_rejected() {
        let p = Ratio::new(1, 2);
        let err = BLDatum::new(
            2,
            vec![1, 1],
            vec![p, p],
            vec![
                DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
                DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap(),
            ],
        );
        assert!(matches!(err, Err(BlError::ScalingCondition { .. })));
    }

    #[test]
    fn gaussian_objective_fubini_case() {
        let d = BLDatum::loomis_whitney_2d();
        let x = vec![DenseMatrix::identity(1), DenseMatrix::identity(1)];
        assert!((gaussian_objective(&d, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_objective_scale_invariant() {
        let d = BLDatum::loomis_whitney_3d();
        let mut rng = stream_rng(5, 0);
        let x: Vec<DenseMatrix> = (0..3)
            .map(|_| {
                let a = DenseMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
                let mut g = a.matmul(&a.transpose()).unwrap();
                g.set(0, 0, g.get(0, 0) + 0.3);
                g.set(1, 1, g.get(1, 1) + 0.3);
                g
            })
            .collect();
        let base = gaussian_objective(&d, &x).unwrap();
        let scaled: Vec<DenseMatrix> = x.iter().map(|m| m.scale(3.7)).collect();
        let after = gaussian_objective(&d, &scaled).unwrap();
        assert!(tol::rel_diff(base, after) < 1e-10);
    }

    #[test]
    fn gaussian_objective_loomis_whitney_3d_identity() {
        let d = BLDatum::loomis_whitney_3d();
        let x = vec![DenseMatrix::identity(2); 3];
        assert!((gaussian_objective(&d, &x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_vector_objective_identity_values() {
        let d2 = BLDatum::loomis_whitney_2d();
        let v = min_vector_objective(
            &d2,
            &[DenseMatrix::identity(1), DenseMatrix::identity(1)],
            &DenseMatrix::identity(2),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-12);

        let d3 = BLDatum::loomis_whitney_3d();
        let v3 = min_vector_objective(
            &d3,
            &[DenseMatrix::identity(2), DenseMatrix::identity(2), DenseMatrix::identity(2)],
            &DenseMatrix::identity(3),
        )
        .unwrap();
        assert!((v3 - 1.0).abs() < 1e-12, "got {v3}");
    }

    #[test]
    fn min_vector_objective_degenerate_direction_vanishes() {
        // Two copies of the same projection: stretching the common kernel
        // direction drives the objective to zero.
        let p = Ratio::new(1, 1);
        let pi = DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let d = BLDatum::new(2, vec![1, 1], vec![p, p], vec![pi.clone(), pi]).unwrap();
        let id1 = DenseMatrix::identity(1);
        let mut prev = f64::INFINITY;
        for &t in &[1.0, 8.0, 64.0] {
            let a = DenseMatrix::diag(&[1.0 / t, t]);
            let v = min_vector_objective(&d, &[id1.clone(), id1.clone()], &a).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn min_vector_objective_rejects_bad_determinant() {
        let d = BLDatum::loomis_whitney_2d();
        let a = DenseMatrix::diag(&[2.0, 1.0]);
        let r = min_vector_objective(&d, &[DenseMatrix::identity(1), DenseMatrix::identity(1)], &a);
        assert!(matches!(r, Err(BlError::DeterminantConstraint { .. })));
    }

    #[test]
    fn alternating_loomis_whitney_2d() {
        let (res, _) = solve(&BLDatum::loomis_whitney_2d());
        assert!(res.converged);
        assert!((res.value - 1.0).abs() < 1e-6, "value {}", res.value);
    }

    #[test]
    fn alternating_loomis_whitney_3d_matches_sampled_infimum() {
        let d = BLDatum::loomis_whitney_3d();
        // Sampled oracle: the Gaussian objective over random SPD triples
        // never dips below 1, and equals 1 at the identity.
        let mut rng = stream_rng(77, 0);
        let mut min_seen = f64::INFINITY;
        for _ in 0..200 {
            let x: Vec<DenseMatrix> = (0..3)
                .map(|_| {
                    let a = DenseMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
                    let mut g = a.matmul(&a.transpose()).unwrap();
                    g.set(0, 0, g.get(0, 0) + 0.2);
                    g.set(1, 1, g.get(1, 1) + 0.2);
                    g
                })
                .collect();
            min_seen = min_seen.min(gaussian_objective(&d, &x).unwrap());
        }
        assert!(min_seen >= 1.0 - 1e-9, "sampled objective dipped to {min_seen}");
        let (res, _) = solve(&d);
        assert!(res.converged);
        assert!((res.value - 1.0).abs() < 1e-6, "value {}", res.value);
    }

    #[test]
    fn alternating_degenerate_datum_flags_semistable() {
        let p = Ratio::new(1, 1);
        let pi = DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let d = BLDatum::new(2, vec![1, 1], vec![p, p], vec![pi.clone(), pi]).unwrap();
        let (res, trace) = bl_constant_alternating(&d, 200, 1e-11).unwrap();
        assert!(!res.converged);
        assert!(res.value < 1e-3, "value {}", res.value);
        assert!(trace.kernel_branch);
    }

    #[test]
    fn alternating_objective_never_increases() {
        let mut rng = stream_rng(41, 0);
        let maps: Vec<DenseMatrix> = (0..3)
            .map(|_| DenseMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let generic = EqualExpDatum::new(3, 1, maps).unwrap().to_bl_datum().unwrap();
        for d in [BLDatum::loomis_whitney_3d(), generic] {
            let (res, trace) = solve(&d);
            assert!(res.converged);
            for w in trace.lyapunov.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn geometric_data_identity_is_fixed_point() {
        for d in [BLDatum::loomis_whitney_2d(), BLDatum::loomis_whitney_3d()] {
            let (res, trace) = solve(&d);
            for obj in &trace.objectives {
                assert!((obj - 1.0).abs() < 1e-9, "objective drifted to {obj}");
            }
            assert!((res.value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn witness_has_unit_determinants() {
        let (res, _) = solve(&BLDatum::loomis_whitney_3d());
        let w = res.witness.unwrap();
        for aj in &w.a_list {
            assert!((linops::det(aj).unwrap() - 1.0).abs() < 1e-6);
        }
        assert!((linops::det(&w.a).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn weight_root_fubini_and_degenerate() {
        let fubini = EqualExpDatum::new(
            2,
            1,
            vec![
                DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
                DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let (res, _) = bl_weight_root(&fubini, 2000, 1e-11).unwrap();
        assert!((res.value - 1.0).abs() < 1e-6);

        let pi = DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let degen = EqualExpDatum::new(2, 1, vec![pi.clone(), pi]).unwrap();
        let (res, _) = bl_weight_root(&degen, 200, 1e-11).unwrap();
        assert!(res.value < 1e-3);
    }

    #[test]
    fn weight_root_loomis_whitney_3d_planes() {
        let lw = BLDatum::loomis_whitney_3d();
        let d = EqualExpDatum::new(3, 1, lw.maps().to_vec()).unwrap();
        let (res, _) = bl_weight_root(&d, 2000, 1e-11).unwrap();
        assert!((res.value - 1.0).abs() < 1e-6, "value {}", res.value);
    }

    #[test]
    fn scaling_identity_examples() {
        let fubini = EqualExpDatum::new(
            2,
            1,
            vec![
                DenseMatrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
                DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        let id = vec![DenseMatrix::identity(1), DenseMatrix::identity(1)];
        let check = check_scaling_identity(&fubini, &id, 2000, 1e-11).unwrap();
        assert!(check.both_converged);
        assert!(check.discrepancy < 1e-9, "identity transforms should give zero, got {}", check.discrepancy);

        let m_list = vec![
            DenseMatrix::new(1, 1, vec![2.0]).unwrap(),
            DenseMatrix::new(1, 1, vec![3.0]).unwrap(),
        ];
        let check = check_scaling_identity(&fubini, &m_list, 2000, 1e-11).unwrap();
        assert!(check.discrepancy <= 1e-4, "discrepancy {}", check.discrepancy);
        // Left side is 6 directly.
        let lifted = EqualExpDatum::new(
            2,
            1,
            vec![
                DenseMatrix::new(1, 2, vec![2.0, 0.0]).unwrap(),
                DenseMatrix::new(1, 2, vec![0.0, 3.0]).unwrap(),
            ],
        )
        .unwrap();
        let (res, _) = bl_weight_root(&lifted, 2000, 1e-11).unwrap();
        assert!((res.value - 6.0).abs() < 1e-4, "value {}", res.value);
    }

    #[test]
    fn scaling_identity_random_instance() {
        let mut rng = stream_rng(11, 0);
        let maps: Vec<DenseMatrix> = (0..3)
            .map(|_| DenseMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let d = EqualExpDatum::new(3, 1, maps).unwrap();
        let m_list: Vec<DenseMatrix> = (0..3)
            .map(|_| {
                let mut m = DenseMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.4..0.4));
                m.set(0, 0, m.get(0, 0) + 1.2);
                m.set(1, 1, m.get(1, 1) + 1.2);
                m
            })
            .collect();
        let check = check_scaling_identity(&d, &m_list, 4000, 1e-11).unwrap();
        assert!(check.both_converged);
        assert!(check.discrepancy <= 1e-4, "discrepancy {}", check.discrepancy);
    }

    #[test]
    fn gaussian_objective_at_witness_matches_value() {
        // The Gaussian determinant quotient, evaluated at the GL-scaled
        // witness parameters G_j^{-1} recovered from the witness A, equals
        // the min-vector value at the witness.
        let mut rng = stream_rng(29, 0);
        let maps: Vec<DenseMatrix> = (0..3)
            .map(|_| DenseMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let d = EqualExpDatum::new(3, 1, maps).unwrap().to_bl_datum().unwrap();
        let (res, _) = bl_constant_alternating(&d, 6000, 1e-13).unwrap();
        assert!(res.converged);
        let w = res.witness.as_ref().unwrap();
        let ata = w.a.transpose().matmul(&w.a).unwrap();
        let params: Vec<DenseMatrix> = d
            .maps()
            .iter()
            .map(|pi| {
                let g = pi.matmul(&ata).unwrap().matmul(&pi.transpose()).unwrap();
                let sym = DenseMatrix::from_fn(g.rows(), g.cols(), |r, c| {
                    0.5 * (g.get(r, c) + g.get(c, r))
                });
                linops::spd_power(&sym, -1.0).unwrap()
            })
            .collect();
        let gauss = gaussian_objective(&d, &params).unwrap();
        let minvec = min_vector_objective(&d, &w.a_list, &w.a).unwrap();
        assert!(
            tol::rel_diff(gauss * gauss, minvec * minvec) <= 1e-4,
            "{} vs {}",
            gauss * gauss,
            minvec * minvec
        );
    }

    #[test]
    fn gaussian_iteration_matches_alternation() {
        let lw = BLDatum::loomis_whitney_3d();
        let g = bl_constant_gaussian(&lw, 2000, 1e-12).unwrap();
        assert!(g.converged);
        assert!((g.value - 1.0).abs() < 1e-6, "value {}", g.value);

        let mut rng = stream_rng(23, 0);
        let maps: Vec<DenseMatrix> = (0..3)
            .map(|_| DenseMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let d = EqualExpDatum::new(3, 1, maps).unwrap().to_bl_datum().unwrap();
        let (alt, _) = bl_constant_alternating(&d, 6000, 1e-13).unwrap();
        let g = bl_constant_gaussian(&d, 6000, 1e-13).unwrap();
        assert!(alt.converged && g.converged);
        assert!(
            tol::rel_diff(alt.value, g.value) <= 1e-6,
            "alternating {} vs gaussian {}",
            alt.value,
            g.value
        );
    }

    #[test]
    fn equal_exp_datum_rejects_exponent_above_one() {
        // n = 3, k = 1, one map: p = 3/2 lies outside (0, 1].
        let d = EqualExpDatum::new(3, 1, vec![DenseMatrix::zeros(2, 3)]).unwrap();
        assert!(matches!(d.to_bl_datum(), Err(BlError::ExponentOutOfRange { .. })));
    }

    #[test]
    fn datum_json_round_trip() {
        let d = BLDatum::loomis_whitney_3d();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"exps\":[[\"1\",\"2\"]"));
        let back: BLDatum = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
