//! Block-determinant invariant polynomials of map tuples.
//!
//! A [`BlockPolySpec`] describes an `ns × ns` matrix assembled from scalar
//! multiples of the maps π_j placed on a block grid: block rows of height
//! n−k carry a single map each, block columns have width n, every block row
//! has at most n−k nonzero entries and every block column at most n. The
//! determinant Φ of such a matrix is homogeneous in each π_j and invariant
//! under unit-determinant changes of basis on both sides, and its value
//! controls the equal-exponent weight root from below:
//!
//! `W^{1/p} ≥ (n−k)^{−m(n−k)/2} · |||Φ|||^{−(n−k)/d} · |Φ|^{(n−k)/d}`.
//!
//! Three concrete families are provided (moment-curve, quadratic-model, and
//! maximal-codimension layouts), along with invariance checkers, a norm
//! estimator, and the alternating-contraction / polarization identity, the
//! combinatorial engine behind the block structure.

use crate::linops::{self, DenseMatrix, LinopsError};
use crate::nonconc::QuadraticModel;
use crate::rng::{stream_rng, substream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use std::fmt;

#[derive(Debug)]
pub enum PolyError {
    BadLayout(String),
    PlacementOutOfRange { index: usize },
    DuplicatePlacement { row: usize, col: usize },
    RowMapConflict { row: usize },
    RowWithoutPlacement { row: usize },
    RowCountMismatch { map: usize, rows: usize, expected: usize },
    TooManyInRow { row: usize, count: usize, limit: usize },
    TooManyInCol { col: usize, count: usize, limit: usize },
    MapShape { index: usize, expected: (usize, usize), got: (usize, usize) },
    ZeroNorm,
    OversizeIndexSet { len: usize },
    InvalidPartition(String),
    Linops(LinopsError),
}

impl fmt::Display for PolyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolyError::BadLayout(s) => write!(f, "invalid block layout: {s}"),
            PolyError::PlacementOutOfRange { index } => {
                write!(f, "placement {index} out of range")
            }
            PolyError::DuplicatePlacement { row, col } => {
                write!(f, "duplicate placement at block ({row}, {col})")
            }
            PolyError::RowMapConflict { row } => {
                write!(f, "block row {row} references more than one map")
            }
            PolyError::RowWithoutPlacement { row } => {
                write!(f, "block row {row} has no placement")
            }
            PolyError::RowCountMismatch { map, rows, expected } => {
                write!(f, "map {map} occupies {rows} block rows, expected {expected}")
            }
            PolyError::TooManyInRow { row, count, limit } => {
                write!(f, "block row {row} has {count} nonzero entries (limit {limit})")
            }
            PolyError::TooManyInCol { col, count, limit } => {
                write!(f, "block column {col} has {count} nonzero entries (limit {limit})")
            }
            PolyError::MapShape { index, expected, got } => write!(
                f,
                "map {index} has shape {}x{}, expected {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            PolyError::ZeroNorm => write!(f, "norm bound must be positive"),
            PolyError::OversizeIndexSet { len } => {
                write!(f, "index set of size {len} exceeds the enumeration budget of 8")
            }
            PolyError::InvalidPartition(s) => write!(f, "invalid partition: {s}"),
            PolyError::Linops(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PolyError {}

impl From<LinopsError> for PolyError {
    fn from(e: LinopsError) -> Self {
        PolyError::Linops(e)
    }
}

/// One block entry: `coeff · π_{map_index}` at block position (row, col).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub map_index: usize,
    pub block_row: usize,
    pub block_col: usize,
    pub coeff: f64,
}

/// Block layout plus scalar coefficients of an invariant determinant
/// polynomial on m maps of shape (n−k) × n.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPolySpec {
    n: usize,
    k: usize,
    m: usize,
    s: usize,
    placements: Vec<Placement>,
}

impl BlockPolySpec {
    pub fn new(
        n: usize,
        k: usize,
        m: usize,
        s: usize,
        placements: Vec<Placement>,
    ) -> Result<Self, PolyError> {
        if k >= n || m == 0 || s == 0 {
            return Err(PolyError::BadLayout(format!("n={n}, k={k}, m={m}, s={s}")));
        }
        let height = n - k;
        if !(n * s).is_multiple_of(height) {
            return Err(PolyError::BadLayout(format!(
                "total size {} not divisible by block height {height}",
                n * s
            )));
        }
        let block_rows = n * s / height;
        if !block_rows.is_multiple_of(m) {
            return Err(PolyError::BadLayout(format!(
                "{block_rows} block rows cannot split evenly over {m} maps"
            )));
        }
        let rows_per_map = block_rows / m;

        let mut row_map: Vec<Option<usize>> = vec![None; block_rows];
        let mut row_nonzero = vec![0usize; block_rows];
        let mut col_nonzero = vec![0usize; s];
        let mut seen = std::collections::HashSet::new();
        for (idx, p) in placements.iter().enumerate() {
            if p.map_index >= m || p.block_row >= block_rows || p.block_col >= s {
                return Err(PolyError::PlacementOutOfRange { index: idx });
            }
            if !seen.insert((p.block_row, p.block_col)) {
                return Err(PolyError::DuplicatePlacement { row: p.block_row, col: p.block_col });
            }
            match row_map[p.block_row] {
                None => row_map[p.block_row] = Some(p.map_index),
                Some(m0) if m0 == p.map_index => {}
                Some(_) => return Err(PolyError::RowMapConflict { row: p.block_row }),
            }
            if p.coeff != 0.0 {
                row_nonzero[p.block_row] += 1;
                col_nonzero[p.block_col] += 1;
            }
        }
        let mut rows_of_map = vec![0usize; m];
        for (row, assigned) in row_map.iter().enumerate() {
            match assigned {
                None => return Err(PolyError::RowWithoutPlacement { row }),
                Some(j) => rows_of_map[*j] += 1,
            }
        }
        for (j, &count) in rows_of_map.iter().enumerate() {
            if count != rows_per_map {
                return Err(PolyError::RowCountMismatch {
                    map: j,
                    rows: count,
                    expected: rows_per_map,
                });
            }
        }
        for (row, &count) in row_nonzero.iter().enumerate() {
            if count > height {
                return Err(PolyError::TooManyInRow { row, count, limit: height });
            }
        }
        for (col, &count) in col_nonzero.iter().enumerate() {
            if count > n {
                return Err(PolyError::TooManyInCol { col, count, limit: n });
            }
        }
        Ok(BlockPolySpec { n, k, m, s, placements })
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn codim_complement(&self) -> usize {
        self.k
    }

    /// Common block height n − k.
    pub fn map_rows(&self) -> usize {
        self.n - self.k
    }

    pub fn num_maps(&self) -> usize {
        self.m
    }

    pub fn copies(&self) -> usize {
        self.s
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn block_rows(&self) -> usize {
        self.n * self.s / (self.n - self.k)
    }

    /// Homogeneity degree in each map: block height times the number of
    /// block rows carrying that map. Derived, never caller-supplied.
    pub fn degrees(&self) -> Vec<usize> {
        let mut rows_of_map = vec![std::collections::HashSet::new(); self.m];
        for p in &self.placements {
            rows_of_map[p.map_index].insert(p.block_row);
        }
        rows_of_map.iter().map(|rows| rows.len() * (self.n - self.k)).collect()
    }

    /// The common degree (the layouts produced here always have one).
    pub fn common_degree(&self) -> usize {
        let degs = self.degrees();
        debug_assert!(degs.iter().all(|&d| d == degs[0]));
        degs[0]
    }
}

impl Serialize for BlockPolySpec {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut s = ser.serialize_struct("BlockPolySpec", 5)?;
        s.serialize_field("n", &self.n)?;
        s.serialize_field("k", &self.k)?;
        s.serialize_field("m", &self.m)?;
        s.serialize_field("s", &self.s)?;
        let rows: Vec<(usize, usize, usize, f64)> = self
            .placements
            .iter()
            .map(|p| (p.map_index, p.block_row, p.block_col, p.coeff))
            .collect();
        s.serialize_field("placements", &rows)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for BlockPolySpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            k: usize,
            m: usize,
            s: usize,
            placements: Vec<(usize, usize, usize, f64)>,
        }
        let raw = Raw::deserialize(de)?;
        let placements = raw
            .placements
            .into_iter()
            .map(|(map_index, block_row, block_col, coeff)| Placement {
                map_index,
                block_row,
                block_col,
                coeff,
            })
            .collect();
        BlockPolySpec::new(raw.n, raw.k, raw.m, raw.s, placements)
            .map_err(serde::de::Error::custom)
    }
}

/// Evaluation record: the polynomial value, a norm estimate, and the
/// certified weight lower bound derived from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyEval {
    pub value: f64,
    pub norm_estimate: f64,
    pub lower_bound: f64,
}

fn check_maps(spec: &BlockPolySpec, maps: &[DenseMatrix]) -> Result<(), PolyError> {
    if maps.len() != spec.m {
        return Err(PolyError::MapShape {
            index: maps.len(),
            expected: (spec.m, 0),
            got: (maps.len(), 0),
        });
    }
    let height = spec.map_rows();
    for (j, m) in maps.iter().enumerate() {
        if m.rows() != height || m.cols() != spec.n {
            return Err(PolyError::MapShape {
                index: j,
                expected: (height, spec.n),
                got: (m.rows(), m.cols()),
            });
        }
    }
    Ok(())
}

/// Builds the ns × ns block matrix from the placements.
pub fn assemble(spec: &BlockPolySpec, maps: &[DenseMatrix]) -> Result<DenseMatrix, PolyError> {
    check_maps(spec, maps)?;
    let height = spec.map_rows();
    let size = spec.n * spec.s;
    let mut out = DenseMatrix::zeros(size, size);
    for p in &spec.placements {
        if p.coeff == 0.0 {
            continue;
        }
        let block = maps[p.map_index].scale(p.coeff);
        out.set_block(p.block_row * height, p.block_col * spec.n, &block);
    }
    Ok(out)
}

/// Determinant of the assembled matrix.
pub fn eval_phi(spec: &BlockPolySpec, maps: &[DenseMatrix]) -> Result<f64, PolyError> {
    Ok(linops::det(&assemble(spec, maps)?)?)
}

/// ASCII zero pattern of a matrix ('#' nonzero, '.' zero).
pub fn zero_pattern(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.push(if m.get(i, j) != 0.0 { '#' } else { '.' });
        }
        out.push('\n');
    }
    out
}

/// One curvature matrix of the moment-curve family: the (n−1) × n matrix
/// with first column (2t, −3t², ..., (−1)ⁿ n tⁿ⁻¹) and the identity to the
/// right.
pub fn moment_curve_pi(t: f64, n: usize) -> DenseMatrix {
    assert!(n >= 2);
    DenseMatrix::from_fn(n - 1, n, |i, j| {
        if j == 0 {
            let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * (i as f64 + 2.0) * t.powi(i as i32 + 1)
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Moment-curve layout: diagonal blocks carrying maps 0..n−2 and a full
/// bottom block row carrying map n−1. The determinant reduces to
/// ±n! · Π_{i<j} (t_i − t_j) when evaluated on [`moment_curve_pi`] maps.
pub fn moment_curve_spec(n: usize) -> BlockPolySpec {
    assert!(n >= 2);
    let mut placements = Vec::new();
    for i in 0..(n - 1) {
        placements.push(Placement { map_index: i, block_row: i, block_col: i, coeff: 1.0 });
    }
    for j in 0..(n - 1) {
        placements.push(Placement { map_index: n - 1, block_row: n - 1, block_col: j, coeff: 1.0 });
    }
    BlockPolySpec::new(n, 1, n, n - 1, placements).expect("layout is valid by construction")
}

/// Maps for the moment-curve family at parameters `ts`.
pub fn moment_curve_maps(ts: &[f64]) -> Vec<DenseMatrix> {
    let n = ts.len();
    ts.iter().map(|&t| moment_curve_pi(t, n)).collect()
}

/// Quadratic-model layout on m = n maps of shape c × n. Block row i < k
/// carries map i on the block columns its diagonal span meets; block row
/// k + j carries map k + j on block column j.
pub fn quadratic_model_spec(model: &QuadraticModel) -> Result<BlockPolySpec, PolyError> {
    let (n, k, c) = (model.n, model.k, model.c);
    let mut placements = Vec::new();
    for i in 0..k {
        for j in 0..c {
            let cross = i * c < (j + 1) * k && j * k < (i + 1) * c;
            if cross {
                placements.push(Placement {
                    map_index: i,
                    block_row: i,
                    block_col: j,
                    coeff: 1.0,
                });
            }
        }
    }
    for j in 0..c {
        placements.push(Placement { map_index: k + j, block_row: k + j, block_col: j, coeff: 1.0 });
    }
    BlockPolySpec::new(n, k, n, c, placements)
}

/// One map of the maximal-codimension family: the k² × (k + k²) matrix
/// `[G(y) | I]` where G places the column vector y on the k×1 block
/// diagonal.
pub fn max_codim_pi(y: &[f64]) -> DenseMatrix {
    let k = y.len();
    let n = k + k * k;
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
}

/// Maximal-codimension layout: k diagonal blocks plus a full bottom row,
/// on k+1 maps of shape k² × (k + k²). The determinant collapses to
/// ±det[y_{k+1}−y_1 ... y_{k+1}−y_k]^k on [`max_codim_pi`] maps.
pub fn max_codim_spec(k: usize) -> BlockPolySpec {
    assert!(k >= 1);
    let n = k + k * k;
    let mut placements = Vec::new();
    for i in 0..k {
        placements.push(Placement { map_index: i, block_row: i, block_col: i, coeff: 1.0 });
    }
    for j in 0..k {
        placements.push(Placement { map_index: k, block_row: k, block_col: j, coeff: 1.0 });
    }
    BlockPolySpec::new(n, k, k + 1, k, placements).expect("layout is valid by construction")
}

/// Max relative violation of multihomogeneity: Φ({λ_j π_j}) against
/// Π λ_j^{d_j} · Φ({π_j}).
pub fn check_homogeneity(
    spec: &BlockPolySpec,
    maps: &[DenseMatrix],
    scalars: &[f64],
) -> Result<f64, PolyError> {
    assert_eq!(scalars.len(), maps.len());
    let base = eval_phi(spec, maps)?;
    let scaled: Vec<DenseMatrix> =
        maps.iter().zip(scalars).map(|(m, &s)| m.scale(s)).collect();
    let lhs = eval_phi(spec, &scaled)?;
    let degs = spec.degrees();
    let factor: f64 = scalars
        .iter()
        .zip(&degs)
        .map(|(&s, &d)| s.powi(d as i32))
        .product();
    let rhs = factor * base;
    let scale = lhs.abs().max(rhs.abs());
    if scale <= f64::MIN_POSITIVE {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / scale)
}

/// Random orthogonal matrix via Gram-Schmidt, determinant +1.
fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    loop {
        let raw = DenseMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let mut cols: Vec<Vec<f64>> = (0..dim)
            .map(|j| (0..dim).map(|i| raw.get(i, j)).collect())
            .collect();
        let mut ok = true;
        for j in 0..dim {
            for prev in 0..j {
                let proj: f64 = (0..dim).map(|i| cols[j][i] * cols[prev][i]).sum();
                for i in 0..dim {
                    cols[j][i] -= proj * cols[prev][i];
                }
            }
            let norm: f64 = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for x in cols[j].iter_mut() {
                *x /= norm;
            }
        }
        if !ok {
            continue;
        }
        let mut q = DenseMatrix::from_fn(dim, dim, |i, j| cols[j][i]);
        if linops::det(&q).unwrap_or(0.0) < 0.0 {
            for i in 0..dim {
                let v = q.get(i, 0);
                q.set(i, 0, -v);
            }
        }
        return q;
    }
}

/// Random well-conditioned unit-determinant matrix.
pub fn random_sl(dim: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    if dim == 1 {
        return DenseMatrix::identity(1);
    }
    let q1 = random_rotation(dim, rng);
    let q2 = random_rotation(dim, rng);
    let mut logs: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let mean = logs.iter().sum::<f64>() / dim as f64;
    for l in logs.iter_mut() {
        *l -= mean;
    }
    let d = DenseMatrix::diag(&logs.iter().map(|l| l.exp()).collect::<Vec<_>>());
    q1.matmul(&d).unwrap().matmul(&q2).unwrap()
}

/// Max relative violation of Φ({A_j π_j Aᵀ}) = Φ({π_j}) over 50 seeded
/// draws of unit-determinant (A_1, ..., A_m, A).
pub fn check_sl_invariance(
    spec: &BlockPolySpec,
    maps: &[DenseMatrix],
    seed: u64,
) -> Result<f64, PolyError> {
    check_maps(spec, maps)?;
    let base = eval_phi(spec, maps)?;
    let height = spec.map_rows();
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let mut rng = stream_rng(seed, substream(0x51, trial));
        let a = random_sl(spec.n, &mut rng);
        let at = a.transpose();
        let transformed: Vec<DenseMatrix> = maps
            .iter()
            .map(|pi| {
                let aj = random_sl(height, &mut rng);
                aj.matmul(pi).unwrap().matmul(&at).unwrap()
            })
            .collect();
        let lhs = eval_phi(spec, &transformed)?;
        let scale = base.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((lhs - base).abs() / scale);
    }
    Ok(worst)
}

/// Lower estimate of the polynomial's sup over tuples of Hilbert-Schmidt
/// unit-ball maps, by seeded random search interleaved with hill-climbing
/// polish of the running best. The schedule is a prefix: a larger budget
/// replays the smaller one exactly and then continues, so the estimate is
/// monotone in the budget.
pub fn estimate_phi_norm(spec: &BlockPolySpec, seed: u64, budget: usize) -> f64 {
    let height = spec.map_rows();
    let n = spec.n;
    let m = spec.m;
    let normalize = |mat: &DenseMatrix| -> Option<DenseMatrix> {
        let norm = linops::hs_norm(mat);
        if norm <= 0.0 {
            None
        } else {
            Some(mat.scale(1.0 / norm))
        }
    };
    let mut best_val = 0.0f64;
    let mut best_tuple: Option<Vec<DenseMatrix>> = None;
    for step in 0..budget {
        let mut rng = stream_rng(seed, substream(0x40F2, step as u64));
        let polish = best_tuple.is_some() && step % 5 == 4;
        let tuple: Vec<DenseMatrix> = if polish {
            let sigma = 0.5 / (1.0 + step as f64 / 500.0);
            best_tuple
                .as_ref()
                .unwrap()
                .iter()
                .map(|mat| {
                    let bumped = DenseMatrix::from_fn(height, n, |i, j| {
                        mat.get(i, j) + sigma * rng.gen_range(-1.0..1.0)
                    });
                    normalize(&bumped).unwrap_or_else(|| mat.clone())
                })
                .collect()
        } else {
            let mut tuple = Vec::with_capacity(m);
            for _ in 0..m {
                let raw = DenseMatrix::from_fn(height, n, |_, _| rng.gen_range(-1.0..1.0));
                match normalize(&raw) {
                    Some(t) => tuple.push(t),
                    None => tuple.push(DenseMatrix::from_fn(height, n, |i, j| {
                        if j == i {
                            1.0 / (height as f64).sqrt()
                        } else {
                            0.0
                        }
                    })),
                }
            }
            tuple
        };
        if let Ok(v) = eval_phi(spec, &tuple) {
            if v.abs() > best_val {
                best_val = v.abs();
                best_tuple = Some(tuple);
            }
        }
    }
    best_val
}

/// Certified upper bound on the sup-norm of Φ over unit-ball tuples, by
/// Hadamard's inequality: every scalar column of the assembled matrix has
/// ℓ² norm at most sqrt(Σ coeff²) over the placements meeting its block
/// column.
pub fn phi_norm_upper_bound(spec: &BlockPolySpec) -> f64 {
    let mut col_sq = vec![0.0f64; spec.s];
    for p in &spec.placements {
        col_sq[p.block_col] += p.coeff * p.coeff;
    }
    col_sq
        .iter()
        .map(|&sq| sq.sqrt().powi(spec.n as i32))
        .product()
}

/// Right-hand side of the weight lower bound
/// `(n−k)^{−m(n−k)/2} · phi_norm^{−(n−k)/d} · |Φ|^{(n−k)/d}`.
///
/// Passing an over-estimate of the norm keeps the returned value a true
/// lower bound for the weight root; see [`phi_norm_upper_bound`].
pub fn weight_lower_bound(
    spec: &BlockPolySpec,
    maps: &[DenseMatrix],
    phi_norm: f64,
) -> Result<f64, PolyError> {
    if phi_norm <= 0.0 {
        return Err(PolyError::ZeroNorm);
    }
    let phi = eval_phi(spec, maps)?.abs();
    if phi == 0.0 {
        return Ok(0.0);
    }
    let height = spec.map_rows() as f64;
    let m = spec.m as f64;
    let d = spec.common_degree() as f64;
    let prefactor = height.powf(-m * height / 2.0);
    Ok(prefactor * (phi / phi_norm).powf(height / d))
}

/// Full evaluation record for a spec and maps; the lower bound uses the
/// certified norm upper bound so that it is a genuine lower bound.
pub fn evaluate(
    spec: &BlockPolySpec,
    maps: &[DenseMatrix],
    seed: u64,
    budget: usize,
) -> Result<PolyEval, PolyError> {
    let value = eval_phi(spec, maps)?;
    let norm_estimate = estimate_phi_norm(spec, seed, budget);
    let lower_bound = weight_lower_bound(spec, maps, phi_norm_upper_bound(spec))?;
    Ok(PolyEval { value, norm_estimate, lower_bound })
}

/// Instance of the alternating-contraction identity: an indexed family of
/// matrices and the row/column partitions of the index set.
#[derive(Debug, Clone)]
pub struct ContractionProblem {
    /// One matrix per index; the matrix at λ has shape
    /// (|row cell of λ|) × (|column cell of λ|).
    pub family: Vec<DenseMatrix>,
    /// Row partition (cells of map-compatible sizes).
    pub row_cells: Vec<Vec<usize>>,
    /// Column partition (cells of ambient size).
    pub col_cells: Vec<Vec<usize>>,
}

struct CellIndex {
    cell_of: Vec<usize>,
    pos_in: Vec<usize>,
    cells: Vec<Vec<usize>>,
}

fn index_partition(cells: &[Vec<usize>], len: usize) -> Result<CellIndex, PolyError> {
    let mut cell_of = vec![usize::MAX; len];
    let mut pos_in = vec![usize::MAX; len];
    let mut sorted_cells = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let mut sorted = cell.clone();
        sorted.sort_unstable();
        for (pos, &idx) in sorted.iter().enumerate() {
            if idx >= len {
                return Err(PolyError::InvalidPartition(format!("index {idx} out of range")));
            }
            if cell_of[idx] != usize::MAX {
                return Err(PolyError::InvalidPartition(format!("index {idx} appears twice")));
            }
            cell_of[idx] = ci;
            pos_in[idx] = pos;
        }
        sorted_cells.push(sorted);
    }
    if cell_of.contains(&usize::MAX) {
        return Err(PolyError::InvalidPartition("partition does not cover the index set".into()));
    }
    Ok(CellIndex { cell_of, pos_in, cells: sorted_cells })
}

/// All permutations of 0..k with signs (sign from the inversion count).
fn permutations_with_sign(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn inversion_sign(p: &[usize]) -> f64 {
        let mut inv = 0usize;
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                if p[i] > p[j] {
                    inv += 1;
                }
            }
        }
        if inv.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
    fn rec(items: &mut Vec<usize>, start: usize, out: &mut Vec<(Vec<usize>, f64)>) {
        if start == items.len() {
            out.push((items.clone(), inversion_sign(items)));
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            rec(items, start + 1, out);
            items.swap(start, i);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..k).collect(), 0, &mut out);
    out
}

/// Partition-preserving permutations of the whole index set, with signs.
fn cell_permutations(index: &CellIndex, len: usize) -> Vec<(Vec<usize>, f64)> {
    let per_cell: Vec<Vec<(Vec<usize>, f64)>> = index
        .cells
        .iter()
        .map(|cell| permutations_with_sign(cell.len()))
        .collect();
    let mut result: Vec<(Vec<usize>, f64)> = vec![((0..len).collect(), 1.0)];
    for (cell, perms) in index.cells.iter().zip(&per_cell) {
        let mut next = Vec::with_capacity(result.len() * perms.len());
        for (base, base_sign) in &result {
            for (perm, sign) in perms {
                let mut sigma = base.clone();
                for (local, &target) in perm.iter().enumerate() {
                    sigma[cell[local]] = cell[target];
                }
                next.push((sigma, base_sign * sign));
            }
        }
        result = next;
    }
    result
}

/// Evaluates the alternating contraction two ways and returns the absolute
/// difference: (a) the double sum over partition-preserving permutation
/// pairs of signed entry products, and (b) the full mixed derivative of
/// `det Σ_λ t_λ π_λ` over the block-extended matrices, taken exactly by
/// inclusion-exclusion over subsets of the index set.
pub fn contraction_identity_check(problem: &ContractionProblem) -> Result<f64, PolyError> {
    let len = problem.family.len();
    if len > 8 {
        return Err(PolyError::OversizeIndexSet { len });
    }
    let rows = index_partition(&problem.row_cells, len)?;
    let cols = index_partition(&problem.col_cells, len)?;
    for (lambda, mat) in problem.family.iter().enumerate() {
        let expect = (rows.cells[rows.cell_of[lambda]].len(), cols.cells[cols.cell_of[lambda]].len());
        if (mat.rows(), mat.cols()) != expect {
            return Err(PolyError::MapShape {
                index: lambda,
                expected: expect,
                got: (mat.rows(), mat.cols()),
            });
        }
    }

    // (a) double permutation enumeration.
    let sigmas = cell_permutations(&rows, len);
    let taus = cell_permutations(&cols, len);
    let mut direct = 0.0;
    for (sigma, s_sign) in &sigmas {
        for (tau, t_sign) in &taus {
            let mut prod = 1.0;
            for lambda in 0..len {
                let r = rows.pos_in[sigma[lambda]];
                let c = cols.pos_in[tau[lambda]];
                prod *= problem.family[lambda].get(r, c);
                if prod == 0.0 {
                    break;
                }
            }
            direct += s_sign * t_sign * prod;
        }
    }

    // (b) polarization: extended matrices and inclusion-exclusion.
    let extended: Vec<DenseMatrix> = (0..len)
        .map(|lambda| {
            DenseMatrix::from_fn(len, len, |lp, lpp| {
                if rows.cell_of[lp] == rows.cell_of[lambda]
                    && cols.cell_of[lpp] == cols.cell_of[lambda]
                {
                    problem.family[lambda].get(rows.pos_in[lp], cols.pos_in[lpp])
                } else {
                    0.0
                }
            })
        })
        .collect();
    let mut polarized = 0.0;
    for mask in 0u32..(1 << len) {
        let mut sum = DenseMatrix::zeros(len, len);
        let mut bits = 0;
        for lambda in 0..len {
            if mask & (1 << lambda) != 0 {
                bits += 1;
                sum = sum.add(&extended[lambda])?;
            }
        }
        let sign = if (len - bits).is_multiple_of(2) { 1.0 } else { -1.0 };
        polarized += sign * linops::det(&sum)?;
    }

    Ok((direct - polarized).abs())
}
