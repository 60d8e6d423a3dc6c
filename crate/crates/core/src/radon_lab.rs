//! Discretized model averaging operators and exponent experiments.
//!
//! Three families of graph-type averaging operators are provided: the
//! moment curve in ℝⁿ, quadratic submanifolds of codimension c = n−k, and
//! the maximal-codimension quadratic family in ℝ^{k+k²}. For each, the
//! module estimates `T χ_E` pointwise by Monte Carlo, runs dyadic sweeps of
//! anisotropic boxes adapted to the graph's curvature, and reports the
//! ratio `‖T χ_E‖_q / |E|^{1/p}`, whose stability across scales witnesses
//! sharpness of the exponent pair. All sampling is reproducible from a
//! single seed and independent of worker count.

use crate::bl_core::{bl_weight_root, EqualExpDatum};
use crate::linops::{self, DenseMatrix};
use crate::nonconc::QuadraticModel;
use crate::rng::{pairwise_sum, stream_rng, substream};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug)]
pub enum RadonError {
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    BadDeltas(String),
    TooFewSamples { which: &'static str, got: usize },
    PointOutsideDomain,
    Solver(String),
}

impl fmt::Display for RadonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadonError::DimensionMismatch { what, expected, got } => {
                write!(f, "{what}: expected dimension {expected}, got {got}")
            }
            RadonError::BadDeltas(s) => write!(f, "invalid delta sequence: {s}"),
            RadonError::TooFewSamples { which, got } => {
                write!(f, "{which} sample count {got} below the minimum")
            }
            RadonError::PointOutsideDomain => write!(f, "evaluation point outside domain box"),
            RadonError::Solver(s) => write!(f, "weight solver failed: {s}"),
        }
    }
}

impl std::error::Error for RadonError {}

/// Which model family an operator averages over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OperatorKind {
    MomentCurve { n: usize },
    Quadratic(QuadraticModel),
    MaxCodim { k: usize },
}

impl OperatorKind {
    pub fn ambient_dim(&self) -> usize {
        match self {
            OperatorKind::MomentCurve { n } => *n,
            OperatorKind::Quadratic(m) => m.n,
            OperatorKind::MaxCodim { k } => k + k * k,
        }
    }

    pub fn parameter_dim(&self) -> usize {
        match self {
            OperatorKind::MomentCurve { .. } => 1,
            OperatorKind::Quadratic(m) => m.k,
            OperatorKind::MaxCodim { k } => *k,
        }
    }

    /// The sharp restricted-type exponent pair (p, q) for this family.
    pub fn sharp_exponents(&self) -> (f64, f64) {
        match self {
            OperatorKind::MomentCurve { n } => {
                let nf = *n as f64;
                ((nf + 1.0) / 2.0, nf * (nf + 1.0) / (2.0 * (nf - 1.0)))
            }
            OperatorKind::Quadratic(m) => {
                let (n, k) = (m.n as f64, m.k as f64);
                ((2.0 * n - k) / n, (2.0 * n - k) / (n - k))
            }
            OperatorKind::MaxCodim { k } => {
                let k = *k as f64;
                ((2.0 * k + 1.0) / (k + 1.0), (2.0 * k + 1.0) / k)
            }
        }
    }

    /// Graph point reached from `x` at parameter `t`.
    pub fn graph(&self, x: &[f64], t: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            OperatorKind::MomentCurve { n } => {
                let s = t[0];
                let mut power = 1.0;
                for i in 0..*n {
                    power *= s;
                    out.push(x[i] + power);
                }
            }
            OperatorKind::Quadratic(m) => {
                for i in 0..m.k {
                    out.push(x[i] + t[i]);
                }
                for j in 0..m.c {
                    let mut q = 0.0;
                    for i in 0..m.k {
                        q += m.lambda.get(j, i) * t[i] * t[i];
                    }
                    out.push(x[m.k + j] + 0.5 * q);
                }
            }
            OperatorKind::MaxCodim { k } => {
                for i in 0..*k {
                    out.push(x[i] + t[i]);
                }
                for i in 0..*k {
                    for j in 0..*k {
                        out.push(x[k + i * k + j] + x[i] * (t[j] + x[j]));
                    }
                }
            }
        }
    }
}

/// A model operator together with its domain and parameter boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOperator {
    pub kind: OperatorKind,
    pub domain_box: Vec<(f64, f64)>,
    pub t_box: Vec<(f64, f64)>,
}

impl ModelOperator {
    pub fn new(
        kind: OperatorKind,
        domain_box: Vec<(f64, f64)>,
        t_box: Vec<(f64, f64)>,
    ) -> Result<Self, RadonError> {
        if domain_box.len() != kind.ambient_dim() {
            return Err(RadonError::DimensionMismatch {
                what: "domain box",
                expected: kind.ambient_dim(),
                got: domain_box.len(),
            });
        }
        if t_box.len() != kind.parameter_dim() {
            return Err(RadonError::DimensionMismatch {
                what: "parameter box",
                expected: kind.parameter_dim(),
                got: t_box.len(),
            });
        }
        Ok(ModelOperator { kind, domain_box, t_box })
    }

    /// Unit parameter window [0,1]^k and a matching domain box.
    pub fn with_unit_boxes(kind: OperatorKind) -> Self {
        let nd = kind.ambient_dim();
        let kd = kind.parameter_dim();
        ModelOperator {
            kind,
            domain_box: vec![(-2.0, 2.0); nd],
            t_box: vec![(0.0, 1.0); kd],
        }
    }
}

fn box_volume(b: &[(f64, f64)]) -> f64 {
    b.iter().map(|(lo, hi)| hi - lo).product()
}

fn sample_box(b: &[(f64, f64)], rng: &mut impl Rng, out: &mut Vec<f64>) {
    out.clear();
    for (lo, hi) in b {
        out.push(rng.gen_range(*lo..*hi));
    }
}

/// Monte Carlo estimate of the parameter measure of
/// `{t in t_box : graph(x, t) ∈ E}`, with its standard error. The graph
/// measure is the parameter measure itself, so no density correction
/// appears.
pub fn apply_t<F: Fn(&[f64]) -> bool>(
    op: &ModelOperator,
    indicator: F,
    x: &[f64],
    samples_t: usize,
    seed: u64,
) -> Result<(f64, f64), RadonError> {
    if x.len() != op.kind.ambient_dim() {
        return Err(RadonError::DimensionMismatch {
            what: "point",
            expected: op.kind.ambient_dim(),
            got: x.len(),
        });
    }
    if samples_t == 0 {
        return Err(RadonError::TooFewSamples { which: "samples_t", got: 0 });
    }
    if !in_box(&op.domain_box, x) {
        return Err(RadonError::PointOutsideDomain);
    }
    let vol = box_volume(&op.t_box);
    let mut rng = stream_rng(seed, 0);
    let mut t = Vec::with_capacity(op.t_box.len());
    let mut y = Vec::with_capacity(x.len());
    let mut hits = 0usize;
    for _ in 0..samples_t {
        sample_box(&op.t_box, &mut rng, &mut t);
        op.kind.graph(x, &t, &mut y);
        if indicator(&y) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples_t as f64;
    let var = p * (1.0 - p) / (samples_t.max(2) - 1) as f64;
    Ok((vol * p, vol * var.sqrt()))
}

/// A dyadic sweep over anisotropic boxes for one operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnappExperiment {
    pub operator: ModelOperator,
    /// Exponent pair (p, q); the ratio denominators use |E|^{1/p}.
    pub exponents: (f64, f64),
    pub deltas: Vec<f64>,
    pub samples_x: usize,
    pub samples_t: usize,
    pub seed: u64,
}

impl KnappExperiment {
    /// Standard experiment at the family's sharp exponents.
    pub fn standard(kind: OperatorKind, deltas: usize, samples_x: usize, seed: u64) -> Self {
        let exponents = kind.sharp_exponents();
        let operator = ModelOperator::with_unit_boxes(kind);
        KnappExperiment {
            operator,
            exponents,
            deltas: (1..=deltas).map(|i| 2f64.powi(-(i as i32))).collect(),
            samples_x,
            samples_t: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), RadonError> {
        let mut prev = 1.0;
        if self.deltas.is_empty() {
            return Err(RadonError::BadDeltas("empty".into()));
        }
        for &d in &self.deltas {
            if !(0.0 < d && d < 1.0 && d < prev) {
                return Err(RadonError::BadDeltas(format!(
                    "sequence must be strictly decreasing in (0,1); found {d} after {prev}"
                )));
            }
            prev = d;
        }
        if self.samples_x < 1000 {
            return Err(RadonError::TooFewSamples { which: "samples_x", got: self.samples_x });
        }
        if self.samples_t == 0 {
            return Err(RadonError::TooFewSamples { which: "samples_t", got: 0 });
        }
        Ok(())
    }
}

/// Per-delta record of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub delta: f64,
    pub norm_estimate: f64,
    pub stderr: f64,
    pub set_measure: f64,
    pub ratio: f64,
}

/// Sweep output; `power` is the denominator exponent actually used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadonExperimentResult {
    pub records: Vec<DeltaRecord>,
    pub power: f64,
    pub q: f64,
    /// Set when the exponent pair disagrees with the model family's sharp
    /// pair; the sweep proceeds anyway.
    pub warning: Option<String>,
}

impl RadonExperimentResult {
    /// Ratios recomputed against |E|^power, e.g. for perturbed exponents.
    pub fn ratios_with_power(&self, power: f64) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.norm_estimate / r.set_measure.powf(power))
            .collect()
    }
}

/// Geometry of one sweep scale: the target box, the x-box containing the
/// support, and the parameter window.
struct ScaleGeometry {
    e_box: Vec<(f64, f64)>,
    x_box: Vec<(f64, f64)>,
    t_window: Vec<(f64, f64)>,
}

fn scale_geometry(op: &ModelOperator, delta: f64) -> ScaleGeometry {
    let t_window: Vec<(f64, f64)> =
        op.t_box.iter().map(|(lo, hi)| (lo * delta, hi * delta)).collect();
    match &op.kind {
        OperatorKind::MomentCurve { n } => {
            let e_box: Vec<(f64, f64)> =
                (1..=*n).map(|i| (0.0, delta.powi(i as i32))).collect();
            let x_box: Vec<(f64, f64)> = (1..=*n)
                .map(|i| {
                    let side = delta.powi(i as i32);
                    (-side, side)
                })
                .collect();
            ScaleGeometry { e_box, x_box, t_window }
        }
        OperatorKind::Quadratic(m) => {
            let c_lambda = 0.5 * m.lambda.max_abs();
            let mut e_box = vec![(0.0, delta); m.k];
            let mut x_box = vec![(-delta, delta); m.k];
            for j in 0..m.c {
                let pos: f64 =
                    (0..m.k).map(|i| m.lambda.get(j, i).max(0.0)).sum::<f64>() * 0.5 * delta * delta;
                let neg: f64 = (0..m.k)
                    .map(|i| (-m.lambda.get(j, i)).max(0.0))
                    .sum::<f64>()
                    * 0.5
                    * delta
                    * delta;
                let thick = c_lambda * delta * delta;
                e_box.push((0.0, thick));
                x_box.push((-pos, thick + neg));
            }
            ScaleGeometry { e_box, x_box, t_window }
        }
        OperatorKind::MaxCodim { k } => {
            let mut e_box = vec![(0.0, delta); *k];
            let mut x_box = vec![(-delta, delta); *k];
            let thick = 4.0 * delta * delta;
            for _ in 0..(k * k) {
                e_box.push((0.0, thick));
                x_box.push((-2.0 * delta * delta, thick + 2.0 * delta * delta));
            }
            ScaleGeometry { e_box, x_box, t_window }
        }
    }
}

fn in_box(b: &[(f64, f64)], y: &[f64]) -> bool {
    b.iter().zip(y).all(|((lo, hi), v)| *lo <= *v && *v <= *hi)
}

/// Runs the dyadic sweep. Each scale restricts the parameter window to
/// `delta · t_box` (the contributing window for the adapted box) and
/// samples x over a box that contains the full support of the localized
/// average, so truncation introduces no error.
///
/// For integer q the q-th moment is estimated without bias by averaging
/// products of q independent hits per x sample; `samples_t` controls how
/// many independent q-groups each x sample uses.
pub fn knapp_sweep(exp: &KnappExperiment) -> Result<RadonExperimentResult, RadonError> {
    exp.validate()?;
    let (p_exp, q) = exp.exponents;
    let power = 1.0 / p_exp;
    let kind = &exp.operator.kind;
    let sharp = kind.sharp_exponents();
    let warning = if (p_exp - sharp.0).abs() > 1e-9 || (q - sharp.1).abs() > 1e-9 {
        Some(format!(
            "exponent pair ({p_exp}, {q}) differs from the family's sharp pair ({}, {})",
            sharp.0, sharp.1
        ))
    } else {
        None
    };
    let q_int = if (q - q.round()).abs() < 1e-9 { Some(q.round() as usize) } else { None };
    let mut records = Vec::with_capacity(exp.deltas.len());
    for (di, &delta) in exp.deltas.iter().enumerate() {
        let geo = scale_geometry(&exp.operator, delta);
        let vol_x = box_volume(&geo.x_box);
        let vol_t = box_volume(&geo.t_window);
        let set_measure = box_volume(&geo.e_box);
        let groups = match q_int {
            Some(qi) => (exp.samples_t / qi.max(1)).max(1),
            None => 1,
        };
        // Per-sample q-th moment values, computed independently per index
        // and combined by pairwise summation: deterministic for any worker
        // count.
        let values: Vec<f64> = (0..exp.samples_x)
            .into_par_iter()
            .map(|sx| {
                let mut rng =
                    stream_rng(exp.seed, substream(0xAB00 + di as u64, sx as u64));
                let mut x = Vec::with_capacity(geo.x_box.len());
                let mut t = Vec::with_capacity(geo.t_window.len());
                let mut y = Vec::with_capacity(geo.x_box.len());
                sample_box(&geo.x_box, &mut rng, &mut x);
                match q_int {
                    Some(qi) => {
                        let mut acc = 0.0;
                        for _ in 0..groups {
                            let mut prod = 1.0;
                            for _ in 0..qi {
                                sample_box(&geo.t_window, &mut rng, &mut t);
                                kind.graph(&x, &t, &mut y);
                                if !in_box(&geo.e_box, &y) {
                                    prod = 0.0;
                                    break;
                                }
                            }
                            acc += prod;
                        }
                        acc / groups as f64
                    }
                    None => {
                        let mut hits = 0usize;
                        for _ in 0..exp.samples_t {
                            sample_box(&geo.t_window, &mut rng, &mut t);
                            kind.graph(&x, &t, &mut y);
                            if in_box(&geo.e_box, &y) {
                                hits += 1;
                            }
                        }
                        (hits as f64 / exp.samples_t as f64).powf(q)
                    }
                }
            })
            .collect();
        let mean = pairwise_sum(&values) / exp.samples_x as f64;
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        let mean_sq = pairwise_sum(&sq) / exp.samples_x as f64;
        let var = (mean_sq - mean * mean).max(0.0) / exp.samples_x as f64;
        // ∫ |Tχ|^q ≈ vol_x * vol_t^q * mean.
        let moment = vol_x * vol_t.powf(q) * mean;
        let norm = moment.max(0.0).powf(1.0 / q);
        let stderr = if mean > 0.0 {
            norm * var.sqrt() / (q * mean)
        } else {
            0.0
        };
        let ratio = norm / set_measure.powf(power);
        records.push(DeltaRecord { delta, norm_estimate: norm, stderr, set_measure, ratio });
    }
    Ok(RadonExperimentResult { records, power, q, warning })
}

/// The c × n matrix `[I_c | (x_i − y_i) λ columns]`: identity on the left,
/// column c+i equal to (x_i − y_i) times column i of λ. Only the first k
/// coordinates of x and y enter; the column ordering (codimension block
/// first) matches the collapsed-invariant convention.
pub fn left_derivative_matrix(
    model: &QuadraticModel,
    x: &[f64],
    y: &[f64],
) -> Result<DenseMatrix, RadonError> {
    if x.len() < model.k || y.len() < model.k {
        return Err(RadonError::DimensionMismatch {
            what: "point",
            expected: model.k,
            got: x.len().min(y.len()),
        });
    }
    let (c, n) = (model.c, model.n);
    Ok(DenseMatrix::from_fn(c, n, |j, col| {
        if col < c {
            if col == j {
                1.0
            } else {
                0.0
            }
        } else {
            let i = col - c;
            (x[i] - y[i]) * model.lambda.get(j, i)
        }
    }))
}

/// Probes the nonconcentration hypothesis at a point: estimates the sup of
/// the weight root over n-tuples of fiber samples (dispersion-greedy tuple
/// plus seeded random tuples) and returns it alongside the comparison
/// value `(Σ weights)^s`. The caller decides what to assert; searches are
/// not exhaustive.
pub fn hypothesis_probe(
    model: &QuadraticModel,
    x: &[f64],
    fiber: &[(Vec<f64>, f64)],
    s: f64,
    seed: u64,
) -> Result<(f64, f64), RadonError> {
    if fiber.is_empty() {
        return Err(RadonError::TooFewSamples { which: "fiber", got: 0 });
    }
    let m = model.n;
    let total_weight: f64 = fiber.iter().map(|(_, w)| w).sum();
    let bound = total_weight.powf(s);
    let map_at = |t: &[f64]| -> Result<DenseMatrix, RadonError> {
        // Fiber point y has first-k coordinates x' + t.
        let mut y = x.to_vec();
        for i in 0..model.k {
            y[i] += t[i];
        }
        left_derivative_matrix(model, x, &y)
    };
    let evaluate = |tuple: &[usize]| -> Result<f64, RadonError> {
        let maps = tuple
            .iter()
            .map(|&i| map_at(&fiber[i].0))
            .collect::<Result<Vec<_>, _>>()?;
        let datum = EqualExpDatum::new(model.n, model.k, maps)
            .map_err(|e| RadonError::Solver(e.to_string()))?;
        let (res, _) =
            bl_weight_root(&datum, 600, 1e-9).map_err(|e| RadonError::Solver(e.to_string()))?;
        Ok(res.value)
    };
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    // Dispersion-greedy tuple: start from the heaviest point, repeatedly
    // add the sample farthest from the chosen set.
    let mut greedy: Vec<usize> = Vec::with_capacity(m);
    let start = fiber
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    greedy.push(start);
    while greedy.len() < m {
        let next = (0..fiber.len())
            .max_by(|&a, &b| {
                let da = greedy.iter().map(|&g| dist(&fiber[a].0, &fiber[g].0)).fold(f64::INFINITY, f64::min);
                let db = greedy.iter().map(|&g| dist(&fiber[b].0, &fiber[g].0)).fold(f64::INFINITY, f64::min);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap_or(0);
        greedy.push(next);
    }
    let mut best = evaluate(&greedy)?;
    let mut rng = stream_rng(seed, 0x9B0);
    for _ in 0..40 {
        let tuple: Vec<usize> = (0..m).map(|_| rng.gen_range(0..fiber.len())).collect();
        best = best.max(evaluate(&tuple)?);
    }
    Ok((best, bound))
}

/// Relative discrepancy of `det(I + BᵀB) = det(I + BBᵀ)`.
pub fn measure_identity_check(b: &DenseMatrix) -> f64 {
    let bt = b.transpose();
    let k = b.cols();
    let c = b.rows();
    let mut left = bt.matmul(b).expect("shapes");
    for i in 0..k {
        left.set(i, i, left.get(i, i) + 1.0);
    }
    let mut right = b.matmul(&bt).expect("shapes");
    for i in 0..c {
        right.set(i, i, right.get(i, i) + 1.0);
    }
    let dl = linops::det(&left).expect("square");
    let dr = linops::det(&right).expect("square");
    (dl - dr).abs() / dl.abs().max(dr.abs()).max(1.0)
}
