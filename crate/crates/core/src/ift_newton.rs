//! Certified Newton iteration and normalized defining functions.
//!
//! The solver iterates `x_{j+1} = x_j − R Φ(x_j)` under a sampled
//! contraction bound `‖DΦ_x R − I‖ ≤ c < 1` (ℓ∞→ℓ∞ norm) and certifies the
//! geometric residual decay `|Φ(x_j)| ≤ cʲ |Φ(x₀)|` together with the
//! displacement bound `|x − x₀| ≤ ‖R‖ (1−c)⁻¹ |Φ(x₀)|`. On top of it, the
//! zero set of Φ is shown to contain a graph over a box in the orthogonal
//! complement of range(R), giving an explicit lower bound on its
//! k-dimensional measure. Incidence relations can be renormalized so the
//! forward derivative has orthonormal rows on the zero set.

use crate::linops::{self, DenseMatrix, LinopsError};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug)]
pub enum IftError {
    Precondition { residual: f64, limit: f64 },
    DecayViolated { iteration: usize, residual: f64, allowed: f64 },
    MaxIterations { residual: f64 },
    ContractionTooLarge { sampled: f64, declared: f64 },
    GridNodeFailed { node: Vec<f64>, reason: String },
    NearSingularNormalMatrix { det: f64 },
    OrthonormalityFailed { residual: f64 },
    DeterminantRatioFailed { lhs: f64, rhs: f64 },
    RankDeficient,
    Linops(LinopsError),
}

impl fmt::Display for IftError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IftError::Precondition { residual, limit } => {
                write!(f, "initial residual {residual:e} is not below the limit {limit:e}")
            }
            IftError::DecayViolated { iteration, residual, allowed } => write!(
                f,
                "residual {residual:e} at iteration {iteration} exceeds the certified {allowed:e}"
            ),
            IftError::MaxIterations { residual } => {
                write!(f, "iteration budget exhausted at residual {residual:e}")
            }
            IftError::ContractionTooLarge { sampled, declared } => {
                write!(f, "sampled contraction {sampled} exceeds declared bound {declared}")
            }
            IftError::GridNodeFailed { node, reason } => {
                write!(f, "fiber solve failed at node {node:?}: {reason}")
            }
            IftError::NearSingularNormalMatrix { det } => {
                write!(f, "normal matrix nearly singular (det {det:e})")
            }
            IftError::OrthonormalityFailed { residual } => {
                write!(f, "row Gram residual {residual:e} after normalization")
            }
            IftError::DeterminantRatioFailed { lhs, rhs } => {
                write!(f, "determinant ratio identity failed: {lhs} vs {rhs}")
            }
            IftError::RankDeficient => write!(f, "transverse matrix is rank deficient"),
            IftError::Linops(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IftError {}

impl From<LinopsError> for IftError {
    fn from(e: LinopsError) -> Self {
        IftError::Linops(e)
    }
}

pub type VectorMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>;
pub type JacobianMap = Box<dyn Fn(&[f64]) -> DenseMatrix + Sync>;
pub type PairMap = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Sync>;
pub type PairJacobian = Box<dyn Fn(&[f64], &[f64]) -> DenseMatrix + Sync>;

fn vec_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Root-finding problem: a map Φ : ℝⁿ → ℝ^{n−k} with derivative, a center
/// and box radius, the quasi-inverse R, and the contraction and transverse
/// bounds c and C.
pub struct NewtonProblem {
    pub phi: VectorMap,
    pub dphi: JacobianMap,
    pub x0: Vec<f64>,
    pub r: f64,
    pub big_r: DenseMatrix,
    pub c: f64,
    pub transverse_bound: f64,
}

impl NewtonProblem {
    /// Max of `‖DΦ_x R − I‖` over a sample grid of `Q_{x0, r}`; the
    /// declared c is a hypothesis, spot-checked rather than proven.
    pub fn sampled_contraction(&self, grid_per_axis: usize) -> f64 {
        let n = self.x0.len();
        let g = grid_per_axis.max(2);
        let codim = self.big_r.cols();
        let id = DenseMatrix::identity(codim);
        let total = g.pow(n as u32).min(100_000);
        let mut worst = 0.0f64;
        for flat in 0..total {
            let mut rem = flat;
            let mut x = self.x0.clone();
            for i in 0..n {
                let step = rem % g;
                rem /= g;
                x[i] += self.r * (2.0 * step as f64 / (g - 1) as f64 - 1.0);
            }
            let d = (self.dphi)(&x);
            let prod = d.matmul(&self.big_r).expect("shapes");
            let mut diff = prod;
            for i in 0..codim {
                diff.set(i, i, diff.get(i, i) - id.get(i, i));
            }
            worst = worst.max(diff.inf_op_norm());
        }
        worst
    }

    /// Errors when the sampled contraction exceeds the declared c.
    pub fn validate(&self, grid_per_axis: usize) -> Result<f64, IftError> {
        let sampled = self.sampled_contraction(grid_per_axis);
        if sampled > self.c + 1e-12 {
            return Err(IftError::ContractionTooLarge { sampled, declared: self.c });
        }
        Ok(sampled)
    }
}

/// Certificate accompanying a successful solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonCertificate {
    /// |Φ(x_j)| for every iterate, including the start.
    pub residuals: Vec<f64>,
    /// The contraction constant used in the decay certificate.
    pub contraction: f64,
    /// Certified displacement bound ‖R‖(1−c)⁻¹|Φ(x₀)|.
    pub distance_bound: f64,
    /// Achieved displacement |x − x₀|.
    pub distance: f64,
}

/// Iterates `x_{j+1} = x_j − R Φ(x_j)` until |Φ| ≤ tol, certifying the
/// geometric decay at the declared contraction constant on the way.
pub fn newton_solve(
    p: &NewtonProblem,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, NewtonCertificate), IftError> {
    solve_from(&p.phi, &p.big_r, p.c, &p.x0, p.r, max_iters, tol)
}

fn solve_from(
    phi: &VectorMap,
    big_r: &DenseMatrix,
    c: f64,
    x0: &[f64],
    r: f64,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<f64>, NewtonCertificate), IftError> {
    let norm_r = big_r.inf_op_norm();
    let initial = vec_inf(&phi(x0));
    let limit = r / norm_r * (1.0 - c);
    // Negated comparison on purpose: a NaN residual must fail the check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(initial < limit) {
        return Err(IftError::Precondition { residual: initial, limit });
    }
    let mut x = x0.to_vec();
    let mut residuals = vec![initial];
    let mut value = phi(&x);
    for iter in 0..max_iters {
        let current = vec_inf(&value);
        if current <= tol {
            let distance = x
                .iter()
                .zip(x0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let distance_bound = norm_r / (1.0 - c) * initial;
            if distance > distance_bound * (1.0 + 1e-9) + 1e-15 {
                return Err(IftError::DecayViolated {
                    iteration: iter,
                    residual: distance,
                    allowed: distance_bound,
                });
            }
            return Ok((
                x,
                NewtonCertificate {
                    residuals,
                    contraction: c,
                    distance_bound,
                    distance,
                },
            ));
        }
        let step = big_r.matvec(&value)?;
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= si;
        }
        value = phi(&x);
        let next = vec_inf(&value);
        residuals.push(next);
        let allowed = (c + 1e-9).powi(iter as i32 + 1) * initial + 1e-15;
        if next > allowed {
            return Err(IftError::DecayViolated { iteration: iter + 1, residual: next, allowed });
        }
    }
    Err(IftError::MaxIterations { residual: vec_inf(&value) })
}

/// Orthonormal basis of the orthogonal complement of the column space of
/// `big_r`.
fn complement_basis(big_r: &DenseMatrix) -> Result<Vec<Vec<f64>>, IftError> {
    let n = big_r.rows();
    let codim = big_r.cols();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let push_orthogonalized = |v: &[f64], basis: &mut Vec<Vec<f64>>| -> bool {
        let mut w = v.to_vec();
        for b in basis.iter() {
            let proj: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= proj * bi;
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 {
            for wi in w.iter_mut() {
                *wi /= norm;
            }
            basis.push(w);
            true
        } else {
            false
        }
    };
    // Column space first.
    for j in 0..codim {
        let col: Vec<f64> = (0..n).map(|i| big_r.get(i, j)).collect();
        if !push_orthogonalized(&col, &mut basis) {
            return Err(IftError::RankDeficient);
        }
    }
    let range_dim = basis.len();
    for j in 0..n {
        let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        push_orthogonalized(&e, &mut basis);
    }
    Ok(basis.split_off(range_dim))
}

/// Lower-bounds the k-dimensional measure of the zero set inside the box by
/// solving a Newton problem at every node of a grid over a box in the
/// complement of range(R) and cell-counting the parameter box. With every
/// node solving, the measure is `(2ρ)ᵏ` for the admissible half-width
/// `ρ = r · min(1/2, (1−c)/(6 C ‖R‖))`, which dominates the certified
/// bound `rᵏ min(1/2, (1−c)/(6C‖R‖))ᵏ`.
pub fn fiber_measure_lower_bound(p: &NewtonProblem, grid: usize) -> Result<f64, IftError> {
    let norm_r = p.big_r.inf_op_norm();
    let initial = vec_inf(&(p.phi)(&p.x0));
    let limit = p.r / 3.0 / norm_r * (1.0 - p.c);
    // Negated comparison on purpose: a NaN residual must fail the check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(initial < limit) {
        return Err(IftError::Precondition { residual: initial, limit });
    }
    let basis = complement_basis(&p.big_r)?;
    let k = basis.len();
    let half_width = if p.transverse_bound <= 0.0 {
        0.5
    } else {
        (0.5f64).min((1.0 - p.c) / (6.0 * p.transverse_bound * norm_r))
    };
    let rho = p.r * half_width;
    let g = grid.max(2);
    let total = g.pow(k as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut center = p.x0.clone();
        let mut node = Vec::with_capacity(k);
        for b in &basis {
            let step = rem % g;
            rem /= g;
            let s = rho * (2.0 * step as f64 / (g - 1) as f64 - 1.0);
            node.push(s);
            for (ci, bi) in center.iter_mut().zip(b) {
                *ci += s * bi;
            }
        }
        solve_from(&p.phi, &p.big_r, p.c, &center, p.r / 2.0, 400, 1e-11 * (1.0 + initial))
            .map_err(|e| IftError::GridNodeFailed { node: node.clone(), reason: e.to_string() })?;
    }
    let measure = (2.0 * rho).powi(k as i32);
    debug_assert!(measure >= (p.r * half_width).powi(k as i32) * (1.0 - 1e-12));
    Ok(measure)
}

/// Certified lower bound `rᵏ · min(1/2, (1−c)/(6C‖R‖))ᵏ` that
/// [`fiber_measure_lower_bound`] must dominate.
pub fn fiber_measure_certified_bound(p: &NewtonProblem, k: usize) -> f64 {
    let norm_r = p.big_r.inf_op_norm();
    let half_width = if p.transverse_bound <= 0.0 {
        0.5
    } else {
        (0.5f64).min((1.0 - p.c) / (6.0 * p.transverse_bound * norm_r))
    };
    (p.r * half_width).powi(k as i32)
}

/// An incidence relation given by a defining function with analytic
/// derivatives in both argument groups.
pub struct IncidenceModel {
    pub ambient: usize,
    pub codim: usize,
    pub degree: usize,
    pub rho: PairMap,
    pub d_x: PairJacobian,
    pub d_y: PairJacobian,
}

impl IncidenceModel {
    /// Moment-curve incidence: ρ_i = x_{i+1} − y_{i+1} + (y₁ − x₁)^{i+1}.
    pub fn moment_curve(n: usize) -> Self {
        assert!(n >= 2);
        IncidenceModel {
            ambient: n,
            codim: n - 1,
            degree: n,
            rho: Box::new(move |x: &[f64], y: &[f64]| {
                (1..n)
                    .map(|i| x[i] - y[i] + (y[0] - x[0]).powi(i as i32 + 1))
                    .collect()
            }),
            d_x: Box::new(move |x: &[f64], y: &[f64]| {
                DenseMatrix::from_fn(n - 1, n, |i, j| {
                    if j == 0 {
                        -(i as f64 + 2.0) * (y[0] - x[0]).powi(i as i32 + 1)
                    } else if j == i + 1 {
                        1.0
                    } else {
                        0.0
                    }
                })
            }),
            d_y: Box::new(move |x: &[f64], y: &[f64]| {
                DenseMatrix::from_fn(n - 1, n, |i, j| {
                    if j == 0 {
                        (i as f64 + 2.0) * (y[0] - x[0]).powi(i as i32 + 1)
                    } else if j == i + 1 {
                        -1.0
                    } else {
                        0.0
                    }
                })
            }),
        }
    }

    /// Quadratic-model incidence:
    /// ρ_j = −y_{k+j} + x_{k+j} + ½ Σ_i λ_{ji} (y_i − x_i)².
    pub fn quadratic(model: crate::nonconc::QuadraticModel) -> Self {
        let (n, k, c) = (model.n, model.k, model.c);
        let lam = model.lambda.clone();
        let lam_x = lam.clone();
        let lam_y = lam.clone();
        IncidenceModel {
            ambient: n,
            codim: c,
            degree: 2,
            rho: Box::new(move |x: &[f64], y: &[f64]| {
                (0..c)
                    .map(|j| {
                        let quad: f64 = (0..k)
                            .map(|i| lam.get(j, i) * (y[i] - x[i]) * (y[i] - x[i]))
                            .sum();
                        -y[k + j] + x[k + j] + 0.5 * quad
                    })
                    .collect()
            }),
            d_x: Box::new(move |x: &[f64], y: &[f64]| {
                DenseMatrix::from_fn(c, n, |j, col| {
                    if col < k {
                        lam_x.get(j, col) * (x[col] - y[col])
                    } else if col - k == j {
                        1.0
                    } else {
                        0.0
                    }
                })
            }),
            d_y: Box::new(move |x: &[f64], y: &[f64]| {
                DenseMatrix::from_fn(c, n, |j, col| {
                    if col < k {
                        lam_y.get(j, col) * (y[col] - x[col])
                    } else if col - k == j {
                        -1.0
                    } else {
                        0.0
                    }
                })
            }),
        }
    }

    /// Maximal-codimension incidence: ρ_{ij} = −y''_{ij} + x''_{ij} + x'_i y'_j.
    pub fn max_codim(k: usize) -> Self {
        assert!(k >= 1);
        let n = k + k * k;
        IncidenceModel {
            ambient: n,
            codim: k * k,
            degree: 2,
            rho: Box::new(move |x: &[f64], y: &[f64]| {
                let mut out = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        out.push(-y[k + i * k + j] + x[k + i * k + j] + x[i] * y[j]);
                    }
                }
                out
            }),
            d_x: Box::new(move |_x: &[f64], y: &[f64]| {
                DenseMatrix::from_fn(k * k, n, |r, col| {
                    let (i, j) = (r / k, r % k);
                    if col < k {
                        if col == i {
                            y[j]
                        } else {
                            0.0
                        }
                    } else if col - k == r {
                        1.0
                    } else {
                        0.0
                    }
                })
            }),
            d_y: Box::new(move |x: &[f64], _y: &[f64]| {
                DenseMatrix::from_fn(k * k, n, |r, col| {
                    let (i, j) = (r / k, r % k);
                    if col < k {
                        if col == j {
                            x[i]
                        } else {
                            0.0
                        }
                    } else if col - k == r {
                        -1.0
                    } else {
                        0.0
                    }
                })
            }),
        }
    }
}

/// Central-difference Jacobian for maps without analytic derivatives.
pub fn central_difference_jacobian(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    scale: f64,
) -> DenseMatrix {
    let h = 1e-6 * scale.max(1.0);
    let base = f(x);
    let rows = base.len();
    let cols = x.len();
    DenseMatrix::from_fn(rows, cols, |i, j| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        (f(&xp)[i] - f(&xm)[i]) / (2.0 * h)
    })
}

/// Output of the normalization: value of the renormalized map and its
/// forward derivative.
#[derive(Debug, Clone)]
pub struct NormalizedDf {
    pub value: Vec<f64>,
    pub d_x: DenseMatrix,
}

/// Renormalizes ρ by the inverse square root of its forward normal matrix:
/// `ρ̃ = (D_xρ D_xρᵀ)^{-1/2} ρ`. On the zero set the rows of D_x ρ̃ are
/// orthonormal and the backward/forward determinant ratio is preserved;
/// both facts are verified numerically when |ρ| ≤ 1e-10.
pub fn normalize_defining_function(
    model: &IncidenceModel,
    x: &[f64],
    y: &[f64],
) -> Result<NormalizedDf, IftError> {
    let dx = (model.d_x)(x, y);
    let normal = dx.matmul(&dx.transpose())?;
    let det_normal = linops::det(&normal)?;
    if det_normal <= 1e-12 {
        return Err(IftError::NearSingularNormalMatrix { det: det_normal });
    }
    let s = linops::spd_inverse_sqrt(&normal)?;
    let value_raw = (model.rho)(x, y);
    let value = s.matvec(&value_raw)?;
    let d_x = s.matmul(&dx)?;
    if vec_inf(&value_raw) <= 1e-10 {
        // Orthonormal rows.
        let gram = d_x.matmul(&d_x.transpose())?;
        let mut worst = 0.0f64;
        for i in 0..gram.rows() {
            for j in 0..gram.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(i, j) - target).abs());
            }
        }
        if worst > 1e-8 {
            return Err(IftError::OrthonormalityFailed { residual: worst });
        }
        // Determinant ratio identity.
        let dy = (model.d_y)(x, y);
        let back = linops::det(&dy.matmul(&dy.transpose())?)?;
        let lhs = back / det_normal;
        let dyt = s.matmul(&dy)?;
        let rhs = linops::det(&dyt.matmul(&dyt.transpose())?)?;
        if (lhs - rhs).abs() > 1e-8 * lhs.abs().max(rhs.abs()).max(1.0) {
            return Err(IftError::DeterminantRatioFailed { lhs, rhs });
        }
    }
    Ok(NormalizedDf { value, d_x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn parabola_problem(x0: Vec<f64>) -> NewtonProblem {
        NewtonProblem {
            phi: Box::new(|x: &[f64]| vec![x[1] - x[0] * x[0]]),
            dphi: Box::new(|x: &[f64]| {
                DenseMatrix::new(1, 2, vec![-2.0 * x[0], 1.0]).unwrap()
            }),
            x0,
            r: 1.0,
            big_r: DenseMatrix::new(2, 1, vec![0.0, 1.0]).unwrap(),
            c: 0.0,
            transverse_bound: 4.0,
        }
    }

    #[test]
    fn one_step_on_affine_direction() {
        let p = parabola_problem(vec![1.0, 0.9]);
        let (root, cert) = newton_solve(&p, 10, 1e-14).unwrap();
        assert!((root[0] - 1.0).abs() < 1e-15);
        assert!((root[1] - 1.0).abs() < 1e-12);
        assert_eq!(cert.residuals.len(), 2);
        assert!(cert.distance <= cert.distance_bound * (1.0 + 1e-9));
    }

    #[test]
    fn scalar_problem_one_step() {
        let a = 0.7;
        let p = NewtonProblem {
            phi: Box::new(move |x: &[f64]| vec![x[0] - a]),
            dphi: Box::new(|_| DenseMatrix::identity(1)),
            x0: vec![0.3],
            r: 1.0,
            big_r: DenseMatrix::identity(1),
            c: 0.0,
            transverse_bound: 0.0,
        };
        let (root, _) = newton_solve(&p, 5, 1e-15).unwrap();
        assert!((root[0] - a).abs() < 1e-15);
    }

    #[test]
    fn transcendental_problem_certifies_decay() {
        // Φ(x, y) = y − sin(x y) − 0.3 near (0.4, 0.52), with R the scaled
        // transpose of the derivative at the start.
        let phi = |x: &[f64]| vec![x[1] - (x[0] * x[1]).sin() - 0.3];
        let dphi = |x: &[f64]| {
            DenseMatrix::new(
                1,
                2,
                vec![-x[1] * (x[0] * x[1]).cos(), 1.0 - x[0] * (x[0] * x[1]).cos()],
            )
            .unwrap()
        };
        let x0 = vec![0.4, 0.52];
        let d0 = dphi(&x0);
        let gram = d0.matmul(&d0.transpose()).unwrap().get(0, 0);
        let big_r = d0.transpose().scale(1.0 / gram);
        let p = NewtonProblem {
            phi: Box::new(phi),
            dphi: Box::new(dphi),
            x0,
            r: 0.2,
            big_r,
            c: 0.5,
            transverse_bound: 2.0,
        };
        let sampled = p.validate(9).unwrap();
        assert!(sampled <= 0.5, "sampled contraction {sampled}");
        let (root, cert) = newton_solve(&p, 60, 1e-12).unwrap();
        assert!(vec_inf(&(p.phi)(&root)) <= 1e-12);
        let initial = cert.residuals[0];
        for (j, res) in cert.residuals.iter().enumerate() {
            assert!(
                *res <= (p.c + 1e-9).powi(j as i32) * initial + 1e-15,
                "decay violated at {j}: {res}"
            );
        }
    }

    #[test]
    fn precondition_is_enforced() {
        let p = parabola_problem(vec![1.0, 10.0]);
        assert!(matches!(newton_solve(&p, 10, 1e-12), Err(IftError::Precondition { .. })));
    }

    #[test]
    fn fiber_measure_flat_zero_set() {
        // Φ(x, y) = y: the zero set is the axis; parameter box is the full
        // half-width 1/2 segment, so the cell-counted measure is 1.
        let p = NewtonProblem {
            phi: Box::new(|x: &[f64]| vec![x[1]]),
            dphi: Box::new(|_| DenseMatrix::new(1, 2, vec![0.0, 1.0]).unwrap()),
            x0: vec![0.0, 0.0],
            r: 1.0,
            big_r: DenseMatrix::new(2, 1, vec![0.0, 1.0]).unwrap(),
            c: 0.0,
            transverse_bound: 0.0,
        };
        let measure = fiber_measure_lower_bound(&p, 9).unwrap();
        assert!((measure - 1.0).abs() < 1e-12);
        assert!(measure >= fiber_measure_certified_bound(&p, 1));
    }

    #[test]
    fn fiber_measure_parabola() {
        let p = parabola_problem(vec![0.0, 0.0]);
        let measure = fiber_measure_lower_bound(&p, 9).unwrap();
        let bound = fiber_measure_certified_bound(&p, 1);
        assert!(measure >= bound, "measure {measure} below bound {bound}");
    }

    #[test]
    fn certified_bound_scales_with_radius() {
        let p1 = parabola_problem(vec![0.0, 0.0]);
        let mut p2 = parabola_problem(vec![0.0, 0.0]);
        p2.r = 0.5;
        let b1 = fiber_measure_certified_bound(&p1, 1);
        let b2 = fiber_measure_certified_bound(&p2, 1);
        assert!((b1 / b2 - 2.0).abs() < 1e-12);
    }

    fn zero_point_of(model: &IncidenceModel, graph: impl Fn(&[f64]) -> Vec<f64>, x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let y = graph(&x);
        let res = (model.rho)(&x, &y);
        assert!(vec_inf(&res) <= 1e-12, "not a zero point: {res:?}");
        (x, y)
    }

    #[test]
    fn normalization_on_model_zero_points() {
        let mut rng = stream_rng(31, 0);
        // Moment curve in dimension 3.
        let model = IncidenceModel::moment_curve(3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: f64 = rng.gen_range(-1.0..1.0);
            let (x, y) = zero_point_of(
                &model,
                |x| vec![x[0] + t, x[1] + t * t, x[2] + t * t * t],
                x,
            );
            normalize_defining_function(&model, &x, &y).unwrap();
        }
        // Quadratic model with generic coefficients.
        let qm = crate::nonconc::QuadraticModel::new(
            3,
            2,
            DenseMatrix::new(1, 2, vec![1.0, 0.6]).unwrap(),
        )
        .unwrap();
        let lam = qm.lambda.clone();
        let model = IncidenceModel::quadratic(qm);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (x, y) = zero_point_of(
                &model,
                |x| {
                    vec![
                        x[0] + t[0],
                        x[1] + t[1],
                        x[2] + 0.5 * (lam.get(0, 0) * t[0] * t[0] + lam.get(0, 1) * t[1] * t[1]),
                    ]
                },
                x,
            );
            normalize_defining_function(&model, &x, &y).unwrap();
        }
        // Maximal codimension, k = 1.
        let model = IncidenceModel::max_codim(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: f64 = rng.gen_range(-1.0..1.0);
            let (x, y) = zero_point_of(
                &model,
                |x| {
                    let y0 = x[0] + t;
                    vec![y0, x[1] + x[0] * y0]
                },
                x,
            );
            normalize_defining_function(&model, &x, &y).unwrap();
        }
    }

    #[test]
    fn normalization_is_scale_invariant_at_zeros() {
        // Scaling ρ by 5 leaves ρ̃ unchanged at zero points.
        let n = 3;
        let base = IncidenceModel::moment_curve(n);
        let scaled = IncidenceModel {
            ambient: n,
            codim: n - 1,
            degree: n,
            rho: {
                let inner = IncidenceModel::moment_curve(n);
                Box::new(move |x: &[f64], y: &[f64]| {
                    (inner.rho)(x, y).iter().map(|v| 5.0 * v).collect()
                })
            },
            d_x: {
                let inner = IncidenceModel::moment_curve(n);
                Box::new(move |x: &[f64], y: &[f64]| (inner.d_x)(x, y).scale(5.0))
            },
            d_y: {
                let inner = IncidenceModel::moment_curve(n);
                Box::new(move |x: &[f64], y: &[f64]| (inner.d_y)(x, y).scale(5.0))
            },
        };
        let t = 0.37;
        let x = vec![0.1, -0.4, 0.8];
        let y = vec![x[0] + t, x[1] + t * t, x[2] + t * t * t];
        let a = normalize_defining_function(&base, &x, &y).unwrap();
        let b = normalize_defining_function(&scaled, &x, &y).unwrap();
        for i in 0..a.d_x.rows() {
            for j in 0..a.d_x.cols() {
                assert!((a.d_x.get(i, j) - b.d_x.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normalization_is_identity_when_rows_already_orthonormal() {
        // At t = 0 the moment-curve forward derivative is [0 | -I] up to
        // signs, whose rows are orthonormal; the renormalized map equals
        // the original at zero points.
        let model = IncidenceModel::moment_curve(3);
        let x = vec![0.2, -0.1, 0.5];
        let y = x.clone(); // t = 0 zero point
        let res = normalize_defining_function(&model, &x, &y).unwrap();
        let raw = (model.rho)(&x, &y);
        for (a, b) in res.value.iter().zip(&raw) {
            assert!((a - b).abs() < 1e-12);
        }
        let draw = (model.d_x)(&x, &y);
        for i in 0..draw.rows() {
            for j in 0..draw.cols() {
                assert!((res.d_x.get(i, j) - draw.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn normalization_rejects_singular_normal_matrix() {
        let degenerate = IncidenceModel {
            ambient: 2,
            codim: 1,
            degree: 1,
            rho: Box::new(|_, _| vec![0.0]),
            d_x: Box::new(|_, _| DenseMatrix::zeros(1, 2)),
            d_y: Box::new(|_, _| DenseMatrix::zeros(1, 2)),
        };
        assert!(matches!(
            normalize_defining_function(&degenerate, &[0.0, 0.0], &[0.0, 0.0]),
            Err(IftError::NearSingularNormalMatrix { .. })
        ));
    }

    #[test]
    fn central_differences_match_analytic_jacobian() {
        let model = IncidenceModel::moment_curve(3);
        let x = vec![0.2, 0.1, -0.3];
        let y = vec![0.5, 0.2, 0.4];
        let analytic = (model.d_x)(&x, &y);
        let f = |xv: &[f64]| (model.rho)(xv, &y);
        let numeric = central_difference_jacobian(&f, &x, 1.0);
        for i in 0..analytic.rows() {
            for j in 0..analytic.cols() {
                assert!((analytic.get(i, j) - numeric.get(i, j)).abs() < 1e-6);
            }
        }
    }
}
