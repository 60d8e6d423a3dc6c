//! Command-line front end: seeded reproducible experiments with CSV/JSON
//! artifacts and a regression comparator.
//!
//! Exit codes: 0 success, 1 usage errors, 2 numerical-failure diagnostics.

mod builtins;
mod manifest;
mod output;
mod regress;

use clap::{Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use builtins::{
    datum_by_name, equal_exp_by_name, family_by_name, kind_by_name, parse_count, parse_floats,
    parse_matrix,
};
use output::{csv_body, fmt_num, write_artifact};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn numerical(e: impl fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "radonbl",
    version,
    about = "Numerical laboratory for multilinear weights, invariant determinants, and model averaging operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Brascamp-Lieb weight computations.
    Bl {
        #[command(subcommand)]
        op: BlOp,
    },
    /// Invariant determinant polynomials.
    Poly {
        #[command(subcommand)]
        op: PolyOp,
    },
    /// Nonconcentration constructions.
    Nonconc {
        #[command(subcommand)]
        op: NonconcOp,
    },
    /// Model averaging operators.
    Radon {
        #[command(subcommand)]
        op: RadonOp,
    },
    /// Certified Newton iteration and defining-function normalization.
    Ift {
        #[command(subcommand)]
        op: IftOp,
    },
    /// Runs a JSON experiment manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compares two artifacts within a relative tolerance.
    Regress {
        baseline: PathBuf,
        current: PathBuf,
        #[arg(long, default_value = "1e-12")]
        rtol: String,
    },
}

#[derive(Subcommand)]
enum BlOp {
    /// Computes the reciprocal constant of a named datum.
    Compute {
        #[arg(long)]
        datum: String,
        #[arg(long, default_value_t = 6000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verifies the composition identity under invertible map changes.
    VerifyScaling {
        #[arg(long)]
        datum: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PolyOp {
    /// Evaluates a block spec (JSON file) on maps (JSON file).
    Eval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        maps: PathBuf,
        /// Print the assembled zero pattern as ASCII art.
        #[arg(long)]
        pattern: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Moment-curve determinant at given parameters.
    Vandermonde {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: String,
    },
    /// Max relative violation of unit-determinant invariance for a family.
    Invariance {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Contraction vs polarization difference on a seeded instance.
    Contraction {
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum NonconcOp {
    /// Subset construction on a seeded random space.
    Convprop {
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separated points of an interval union ("a:b,c:d").
    Separate {
        #[arg(long)]
        intervals: String,
        #[arg(long)]
        count: usize,
    },
    /// Product of periodic minors of a coefficient matrix.
    DensityK {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Row-major matrix: rows ';'-separated, entries ','-separated.
        #[arg(long)]
        lambda: String,
    },
    /// Mixed-derivative identity discrepancy.
    DerivativeId {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        lambda: String,
        /// Upper-triangular direction matrix.
        #[arg(long)]
        u: String,
        #[arg(long, default_value = "")]
        base: String,
    },
}

#[derive(Subcommand)]
enum RadonOp {
    /// Pointwise average of a scale-delta box indicator.
    Apply {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value = "1e4")]
        samples: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dyadic ratio sweep at the model's sharp exponent pair.
    Knapp {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<String>,
        /// "auto" uses the family exponent; otherwise an explicit q.
        #[arg(long, default_value = "auto")]
        q: String,
        #[arg(long, default_value_t = 6)]
        deltas: usize,
        #[arg(long, default_value = "1e5")]
        samples: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IftOp {
    /// Certified Newton solve on a named zero set.
    Solve {
        #[arg(long)]
        model: String,
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Grid lower bound for the zero-set measure.
    Fiber {
        #[arg(long)]
        model: String,
        #[arg(long)]
        x0: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 9)]
        grid: usize,
    },
    /// Renormalized defining function at a zero point.
    Normalize {
        #[arg(long)]
        model: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        t: String,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// RADONBL_THREADS caps worker-thread parallelism.
fn configure_threads() {
    if let Ok(v) = std::env::var("RADONBL_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Bl { op } => bl_command(op),
        Command::Poly { op } => poly_command(op),
        Command::Nonconc { op } => nonconc_command(op),
        Command::Radon { op } => radon_command(op),
        Command::Ift { op } => ift_command(op),
        Command::Run { manifest } => manifest::run_manifest_file(&manifest),
        Command::Regress { baseline, current, rtol } => {
            let rtol = parse_rtol(&rtol)?;
            regress::regress(&baseline, &current, rtol)?;
            println!("regress: files agree within rtol {rtol:e}");
            Ok(())
        }
    }
}

fn parse_rtol(s: &str) -> Result<f64, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("cannot parse rtol '{s}'"))),
    }
}

pub fn bl_compute(
    datum_name: &str,
    max_iters: usize,
    tol: f64,
    out: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let datum = datum_by_name(datum_name)?;
    let (res, _) = radonbl::bl_core::bl_constant_alternating(&datum, max_iters, tol)
        .map_err(numerical)?;
    println!(
        "bl compute {datum_name}: value {} converged {} iterations {}",
        fmt_num(res.value),
        res.converged,
        res.iterations
    );
    if let Some(path) = out {
        let body = serde_json::json!({
            "datum": datum_name,
            "value": fmt_num(res.value),
            "iterations": res.iterations,
            "converged": res.converged,
            "residual": fmt_num(res.residual),
        });
        write_artifact(path, "bl compute", &serde_json::to_string_pretty(&body).unwrap())?;
    }
    if !res.converged {
        return Err(CliError::Numerical(format!(
            "solver flagged semi-stable data (value {})",
            fmt_num(res.value)
        )));
    }
    Ok(())
}

fn bl_command(op: BlOp) -> Result<(), CliError> {
    match op {
        BlOp::Compute { datum, max_iters, tol, seed: _, out } => {
            bl_compute(&datum, max_iters, tol, out.as_deref())
        }
        BlOp::VerifyScaling { datum, seed, out } => {
            let d = equal_exp_by_name(&datum)?;
            use rand::Rng;
            let mut rng = radonbl::rng::stream_rng(seed, 0x5C);
            let dim = d.n - d.k;
            let m_list: Vec<radonbl::linops::DenseMatrix> = (0..d.m)
                .map(|_| {
                    let mut mat = radonbl::linops::DenseMatrix::from_fn(dim, dim, |_, _| {
                        rng.gen_range(-0.35..0.35)
                    });
                    for i in 0..dim {
                        mat.set(i, i, mat.get(i, i) + 1.3);
                    }
                    mat
                })
                .collect();
            let check = radonbl::bl_core::check_scaling_identity(&d, &m_list, 6000, 1e-12)
                .map_err(numerical)?;
            println!(
                "bl verify-scaling {datum}: discrepancy {} converged {}",
                fmt_num(check.discrepancy),
                check.both_converged
            );
            if let Some(path) = out {
                let body = serde_json::json!({
                    "datum": datum,
                    "seed": seed,
                    "discrepancy": fmt_num(check.discrepancy),
                    "both_converged": check.both_converged,
                });
                write_artifact(
                    &path,
                    "bl verify-scaling",
                    &serde_json::to_string_pretty(&body).unwrap(),
                )?;
            }
            if check.both_converged && check.discrepancy > 1e-4 {
                return Err(CliError::Numerical(format!(
                    "scaling identity violated: {}",
                    fmt_num(check.discrepancy)
                )));
            }
            Ok(())
        }
    }
}

fn poly_command(op: PolyOp) -> Result<(), CliError> {
    use radonbl::invariant_poly as poly;
    match op {
        PolyOp::Eval { spec, maps, pattern, out } => {
            let spec_text = std::fs::read_to_string(&spec)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", spec.display())))?;
            let spec: poly::BlockPolySpec =
                serde_json::from_str(&spec_text).map_err(|e| CliError::Usage(e.to_string()))?;
            let maps_text = std::fs::read_to_string(&maps)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", maps.display())))?;
            let raw: Vec<Vec<f64>> =
                serde_json::from_str(&maps_text).map_err(|e| CliError::Usage(e.to_string()))?;
            let height = spec.map_rows();
            let maps: Vec<radonbl::linops::DenseMatrix> = raw
                .into_iter()
                .map(|entries| {
                    radonbl::linops::DenseMatrix::new(height, spec.ambient(), entries)
                        .map_err(|e| CliError::Usage(e.to_string()))
                })
                .collect::<Result<_, _>>()?;
            let value = poly::eval_phi(&spec, &maps).map_err(numerical)?;
            println!("poly eval: {}", fmt_num(value));
            if pattern {
                let assembled = poly::assemble(&spec, &maps).map_err(numerical)?;
                print!("{}", poly::zero_pattern(&assembled));
            }
            if let Some(path) = out {
                let body = serde_json::json!({ "value": fmt_num(value) });
                write_artifact(&path, "poly eval", &serde_json::to_string_pretty(&body).unwrap())?;
            }
            Ok(())
        }
        PolyOp::Vandermonde { n, t } => {
            let ts = parse_floats(&t)?;
            if ts.len() != n {
                return Err(CliError::Usage(format!("expected {n} parameters, got {}", ts.len())));
            }
            let spec = poly::moment_curve_spec(n);
            let value =
                poly::eval_phi(&spec, &poly::moment_curve_maps(&ts)).map_err(numerical)?;
            println!("{}", value.abs());
            Ok(())
        }
        PolyOp::Invariance { family, seed } => {
            let (spec, maps) = family_by_name(&family, seed)?;
            let violation = poly::check_sl_invariance(&spec, &maps, seed).map_err(numerical)?;
            println!("poly invariance {family}: max violation {}", fmt_num(violation));
            if violation > 1e-8 {
                return Err(CliError::Numerical(format!("violation {violation:e} above 1e-8")));
            }
            Ok(())
        }
        PolyOp::Contraction { size, seed } => {
            use rand::Rng;
            if size == 0 || size > 8 {
                return Err(CliError::Usage("size must lie in 1..=8".into()));
            }
            // One row cell; column cells split as evenly as possible.
            let mut rng = radonbl::rng::stream_rng(seed, 0xC0);
            let half = size.div_ceil(2);
            let row_cells = vec![(0..size).collect::<Vec<_>>()];
            let col_cells: Vec<Vec<usize>> = if size == 1 {
                vec![vec![0]]
            } else {
                vec![(0..half).collect(), (half..size).collect()]
            };
            let family: Vec<radonbl::linops::DenseMatrix> = (0..size)
                .map(|l| {
                    let cols = col_cells.iter().find(|c| c.contains(&l)).unwrap().len();
                    radonbl::linops::DenseMatrix::from_fn(size, cols, |_, _| {
                        rng.gen_range(-1.0..1.0)
                    })
                })
                .collect();
            let problem = poly::ContractionProblem { family, row_cells, col_cells };
            let diff = poly::contraction_identity_check(&problem).map_err(numerical)?;
            println!("poly contraction size {size}: difference {}", fmt_num(diff));
            if diff > 1e-9 {
                return Err(CliError::Numerical(format!("difference {diff:e} above 1e-9")));
            }
            Ok(())
        }
    }
}

fn nonconc_command(op: NonconcOp) -> Result<(), CliError> {
    use radonbl::nonconc as nc;
    match op {
        NonconcOp::Convprop { points, d, delta, seed, out } => {
            use rand::Rng;
            if d == 0 || d > 4 {
                return Err(CliError::Usage("d must lie in 1..=4".into()));
            }
            let mut rng = radonbl::rng::stream_rng(seed, 0xCE);
            let pts: Vec<Vec<f64>> = (0..points)
                .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
                .collect();
            let weights: Vec<f64> = (0..points).map(|_| rng.gen_range(0.1..1.0)).collect();
            let feats: [fn(&[f64]) -> f64; 4] =
                [|_p| 1.0, |p| p[0], |p| p[1], |p| p[0] * p[1]];
            let basis = radonbl::linops::DenseMatrix::from_fn(points, d, |i, j| feats[j](&pts[i]));
            let space = nc::SampleSpace::new(pts, weights, basis).map_err(numerical)?;
            let cert = nc::convprop_construct_seeded(&space, delta, seed).map_err(numerical)?;
            let ok = nc::check_certificate(&space, &cert);
            println!(
                "nonconc convprop: retained {}/{} points, j0 {}, invariants {}",
                cert.selected_indices.len(),
                points,
                cert.j0,
                if ok { "hold" } else { "VIOLATED" }
            );
            for (i, f) in cert.witness_functions.iter().enumerate() {
                let cells: Vec<String> = f.iter().map(|v| fmt_num(*v)).collect();
                println!("  witness {}: [{}]", i + 1, cells.join(", "));
            }
            if let Some(path) = out {
                write_artifact(
                    &path,
                    "nonconc convprop",
                    &serde_json::to_string_pretty(&cert).unwrap(),
                )?;
            }
            if !ok {
                return Err(CliError::Numerical("certificate invariants violated".into()));
            }
            Ok(())
        }
        NonconcOp::Separate { intervals, count } => {
            let pairs: Vec<(f64, f64)> = intervals
                .split(',')
                .map(|tok| {
                    let parts: Vec<&str> = tok.split(':').collect();
                    if parts.len() != 2 {
                        return Err(CliError::Usage(format!("bad interval '{tok}'")));
                    }
                    let a = parts[0].trim().parse::<f64>();
                    let b = parts[1].trim().parse::<f64>();
                    match (a, b) {
                        (Ok(a), Ok(b)) => Ok((a, b)),
                        _ => Err(CliError::Usage(format!("bad interval '{tok}'"))),
                    }
                })
                .collect::<Result<_, _>>()?;
            let union = nc::IntervalUnion::new(pairs).map_err(numerical)?;
            let pts = nc::separated_points(&union, count).map_err(numerical)?;
            let cells: Vec<String> = pts.iter().map(|v| fmt_num(*v)).collect();
            println!("nonconc separate: [{}]", cells.join(", "));
            println!("  guaranteed gap {}", fmt_num(union.measure() / (2 * count - 1) as f64));
            Ok(())
        }
        NonconcOp::DensityK { n, k, lambda } => {
            let lam = parse_matrix(&lambda)?;
            let model = nc::QuadraticModel::new(n, k, lam)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let minors = nc::minor_condition(&model);
            let k_val = nc::density_k(&model);
            let cells: Vec<String> = minors.iter().map(|v| fmt_num(*v)).collect();
            println!("nonconc density-k: K {} minors [{}]", fmt_num(k_val), cells.join(", "));
            Ok(())
        }
        NonconcOp::DerivativeId { n, k, lambda, u, base } => {
            let lam = parse_matrix(&lambda)?;
            let model = nc::QuadraticModel::new(n, k, lam)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let u = parse_matrix(&u)?;
            let base = if base.is_empty() { vec![0.0; k] } else { parse_floats(&base)? };
            let disc = nc::derivative_identity_check(&model, &u, &base).map_err(numerical)?;
            println!("nonconc derivative-id: discrepancy {}", fmt_num(disc));
            if disc > 1e-8 {
                return Err(CliError::Numerical(format!("discrepancy {disc:e} above 1e-8")));
            }
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)] // CLI flag plumbing
pub fn radon_knapp(
    model: &str,
    n: Option<usize>,
    k: Option<usize>,
    lambda: Option<&str>,
    q: &str,
    deltas: usize,
    samples: usize,
    seed: u64,
    out: Option<&std::path::Path>,
) -> Result<(), CliError> {
    use radonbl::radon_lab::{knapp_sweep, KnappExperiment};
    let kind = kind_by_name(model, n, k, lambda)?;
    let mut exp = KnappExperiment::standard(kind, deltas, samples, seed);
    if q != "auto" {
        let q_val: f64 =
            q.parse().map_err(|_| CliError::Usage(format!("cannot parse q '{q}'")))?;
        exp.exponents.1 = q_val;
    }
    exp.samples_t = exp.exponents.1.round().max(1.0) as usize;
    let result = knapp_sweep(&exp).map_err(numerical)?;
    if let Some(w) = &result.warning {
        eprintln!("warning: {w}");
    }
    let rows: Vec<Vec<f64>> = result
        .records
        .iter()
        .map(|r| vec![r.delta, r.norm_estimate, r.stderr, r.set_measure, r.ratio])
        .collect();
    let ratios: Vec<f64> = result.records.iter().map(|r| r.ratio).collect();
    let max = ratios.iter().cloned().fold(0.0f64, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    println!(
        "radon knapp {model}: {} scales, ratio band [{}, {}] (q {}, power {})",
        rows.len(),
        fmt_num(min),
        fmt_num(max),
        result.q,
        fmt_num(result.power)
    );
    if let Some(path) = out {
        let body = csv_body(&["delta", "norm_estimate", "stderr", "set_measure", "ratio"], &rows);
        write_artifact(path, "radon knapp", &body)?;
        // Reproduction manifest next to the CSV.
        let manifest = serde_json::json!({
            "command": "radon",
            "parameters": {
                "op": "knapp",
                "model": model,
                "q": q,
                "deltas": deltas.to_string(),
                "samples": samples.to_string(),
            },
            "seed": seed,
            "output_path": path.to_string_lossy(),
        });
        let mpath = path.with_extension("manifest.json");
        std::fs::write(&mpath, serde_json::to_string_pretty(&manifest).unwrap())
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", mpath.display())))?;
    }
    Ok(())
}

fn radon_command(op: RadonOp) -> Result<(), CliError> {
    use radonbl::radon_lab::{apply_t, ModelOperator};
    match op {
        RadonOp::Apply { model, n, k, lambda, x, delta, samples, seed } => {
            let kind = kind_by_name(&model, n, k, lambda.as_deref())?;
            let op = ModelOperator::with_unit_boxes(kind);
            let x = parse_floats(&x)?;
            let samples = parse_count(&samples)?;
            let d2 = delta * delta;
            let kd = op.kind.parameter_dim();
            let nd = op.kind.ambient_dim();
            let indicator = move |y: &[f64]| {
                y.iter().take(kd).all(|v| (0.0..=delta).contains(v))
                    && y.iter().skip(kd).take(nd - kd).all(|v| (0.0..=d2).contains(v))
            };
            let (est, err) = apply_t(&op, indicator, &x, samples, seed).map_err(numerical)?;
            println!("radon apply {model}: estimate {} stderr {}", fmt_num(est), fmt_num(err));
            Ok(())
        }
        RadonOp::Knapp { model, n, k, lambda, q, deltas, samples, seed, out } => {
            let samples = parse_count(&samples)?;
            radon_knapp(&model, n, k, lambda.as_deref(), &q, deltas, samples, seed, out.as_deref())
        }
    }
}

fn ift_command(op: IftOp) -> Result<(), CliError> {
    use radonbl::ift_newton as ift;

    // Named zero-finding problems in the fiber variable.
    let build = |model: &str, x0: Vec<f64>, r: f64, c: f64| -> Result<ift::NewtonProblem, CliError> {
        let incidence = incidence_by_name(model)?;
        let dim = incidence.ambient;
        if x0.len() != dim {
            return Err(CliError::Usage(format!("x0 must have dimension {dim}")));
        }
        let base = vec![0.0; dim];
        let d0 = (incidence.d_y)(&base, &x0);
        let gram = d0.matmul(&d0.transpose()).map_err(numerical)?;
        let gram_inv = radonbl::linops::inverse(&gram).map_err(numerical)?;
        let big_r = d0.transpose().matmul(&gram_inv).map_err(numerical)?;
        let rho = incidence.rho;
        let d_y = incidence.d_y;
        let base2 = base.clone();
        Ok(ift::NewtonProblem {
            phi: Box::new(move |y: &[f64]| rho(&base, y)),
            dphi: Box::new(move |y: &[f64]| d_y(&base2, y)),
            x0,
            r,
            big_r,
            c,
            transverse_bound: 4.0,
        })
    };

    match op {
        IftOp::Solve { model, x0, r, c, report } => {
            let x0 = parse_floats(&x0)?;
            let p = build(&model, x0, r, c)?;
            let sampled = p.sampled_contraction(7);
            if sampled > p.c {
                return Err(CliError::Numerical(format!(
                    "sampled contraction {sampled} exceeds declared {}",
                    p.c
                )));
            }
            let (root, cert) = ift::newton_solve(&p, 200, 1e-12).map_err(numerical)?;
            let cells: Vec<String> = root.iter().map(|v| fmt_num(*v)).collect();
            println!(
                "ift solve {model}: root [{}] after {} steps, displacement {} <= {}",
                cells.join(", "),
                cert.residuals.len() - 1,
                fmt_num(cert.distance),
                fmt_num(cert.distance_bound)
            );
            if let Some(path) = report {
                write_artifact(
                    &path,
                    "ift solve",
                    &serde_json::to_string_pretty(&cert).unwrap(),
                )?;
            }
            Ok(())
        }
        IftOp::Fiber { model, x0, r, grid } => {
            let x0 = parse_floats(&x0)?;
            let p = build(&model, x0, r, 0.5)?;
            let measure = ift::fiber_measure_lower_bound(&p, grid).map_err(numerical)?;
            let k = p.x0.len() - p.big_r.cols();
            let bound = ift::fiber_measure_certified_bound(&p, k);
            println!(
                "ift fiber {model}: cell-counted measure {} >= certified {}",
                fmt_num(measure),
                fmt_num(bound)
            );
            Ok(())
        }
        IftOp::Normalize { model, x, t } => {
            let incidence = incidence_by_name(&model)?;
            let x = parse_floats(&x)?;
            let t = parse_floats(&t)?;
            let y = graph_point_by_name(&model, &x, &t)?;
            let normalized =
                ift::normalize_defining_function(&incidence, &x, &y).map_err(numerical)?;
            let cells: Vec<String> = normalized.value.iter().map(|v| fmt_num(*v)).collect();
            println!("ift normalize {model}: value [{}] rows orthonormal", cells.join(", "));
            Ok(())
        }
    }
}

fn incidence_by_name(model: &str) -> Result<radonbl::ift_newton::IncidenceModel, CliError> {
    use radonbl::ift_newton::IncidenceModel;
    use radonbl::nonconc::QuadraticModel;
    match model {
        "parabola" => Ok(IncidenceModel::quadratic(QuadraticModel::parabola())),
        "moment-curve-n2" => Ok(IncidenceModel::moment_curve(2)),
        "moment-curve-n3" => Ok(IncidenceModel::moment_curve(3)),
        "moment-curve-n4" => Ok(IncidenceModel::moment_curve(4)),
        "max-codim-k1" => Ok(IncidenceModel::max_codim(1)),
        other => Err(CliError::Usage(format!("unknown incidence model '{other}'"))),
    }
}

fn graph_point_by_name(model: &str, x: &[f64], t: &[f64]) -> Result<Vec<f64>, CliError> {
    use radonbl::radon_lab::OperatorKind;
    let kind = match model {
        "parabola" => OperatorKind::Quadratic(radonbl::nonconc::QuadraticModel::parabola()),
        "moment-curve-n2" => OperatorKind::MomentCurve { n: 2 },
        "moment-curve-n3" => OperatorKind::MomentCurve { n: 3 },
        "moment-curve-n4" => OperatorKind::MomentCurve { n: 4 },
        "max-codim-k1" => OperatorKind::MaxCodim { k: 1 },
        other => return Err(CliError::Usage(format!("unknown model '{other}'"))),
    };
    if x.len() != kind.ambient_dim() || t.len() != kind.parameter_dim() {
        return Err(CliError::Usage(format!(
            "expected x dimension {} and t dimension {}",
            kind.ambient_dim(),
            kind.parameter_dim()
        )));
    }
    let mut y = Vec::new();
    kind.graph(x, t, &mut y);
    Ok(y)
}
