//! Named built-in data and models.

use radonbl::bl_core::{BLDatum, EqualExpDatum};
use radonbl::invariant_poly::{
    max_codim_pi, max_codim_spec, moment_curve_maps, moment_curve_spec, quadratic_model_spec,
    BlockPolySpec,
};
use radonbl::linops::DenseMatrix;
use radonbl::nonconc::QuadraticModel;
use radonbl::radon_lab::{left_derivative_matrix, OperatorKind};

use crate::CliError;

pub fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// Parses a comma-separated list of reals.
pub fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse number '{tok}'")))
        })
        .collect()
}

/// Parses a row-major matrix: rows separated by ';', entries by ','.
pub fn parse_matrix(s: &str) -> Result<DenseMatrix, CliError> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(parse_floats)
        .collect::<Result<Vec<_>, _>>()?;
    DenseMatrix::from_rows(&rows).map_err(|e| CliError::Usage(format!("bad matrix: {e}")))
}

/// Parses counts that may be written in scientific notation (1e5).
pub fn parse_count(s: &str) -> Result<usize, CliError> {
    let v: f64 = s
        .parse()
        .map_err(|_| CliError::Usage(format!("cannot parse count '{s}'")))?;
    if !(v.is_finite() && v >= 0.0) {
        return usage(format!("count '{s}' out of range"));
    }
    Ok(v.round() as usize)
}

/// Built-in Brascamp-Lieb data by name.
pub fn datum_by_name(name: &str) -> Result<BLDatum, CliError> {
    match name {
        "loomis-whitney-2d" => Ok(BLDatum::loomis_whitney_2d()),
        "loomis-whitney-3d" => Ok(BLDatum::loomis_whitney_3d()),
        "moment-curve-n2" | "moment-curve-n3" | "moment-curve-n4" => {
            let n = name.trim_start_matches("moment-curve-n").parse::<usize>().unwrap();
            let ts: Vec<f64> = (0..n).map(|i| i as f64).collect();
            EqualExpDatum::new(n, 1, moment_curve_maps(&ts))
                .and_then(|d| d.to_bl_datum())
                .map_err(|e| CliError::Numerical(e.to_string()))
        }
        "parabola" => {
            let model = QuadraticModel::parabola();
            let maps = [0.0, 1.0]
                .iter()
                .map(|&t| left_derivative_matrix(&model, &[0.0, 0.0], &[t, 0.0]).unwrap())
                .collect();
            EqualExpDatum::new(2, 1, maps)
                .and_then(|d| d.to_bl_datum())
                .map_err(|e| CliError::Numerical(e.to_string()))
        }
        "max-codim-k1" => {
            let maps = vec![max_codim_pi(&[0.0]), max_codim_pi(&[1.0])];
            EqualExpDatum::new(2, 1, maps)
                .and_then(|d| d.to_bl_datum())
                .map_err(|e| CliError::Numerical(e.to_string()))
        }
        other => usage(format!("unknown datum '{other}'")),
    }
}

/// The equal-exponent view of a named datum, for weight computations.
pub fn equal_exp_by_name(name: &str) -> Result<EqualExpDatum, CliError> {
    let datum = datum_by_name(name)?;
    let n = datum.ambient();
    let dims = datum.dims();
    let k = n - dims[0];
    if dims.iter().any(|&d| d != n - k) {
        return usage(format!("datum '{name}' does not have equal map dimensions"));
    }
    EqualExpDatum::new(n, k, datum.maps().to_vec()).map_err(|e| CliError::Numerical(e.to_string()))
}

/// Built-in operator kinds by name, with optional explicit parameters.
pub fn kind_by_name(
    model: &str,
    n: Option<usize>,
    k: Option<usize>,
    lambda: Option<&str>,
) -> Result<OperatorKind, CliError> {
    match model {
        "parabola" => Ok(OperatorKind::Quadratic(QuadraticModel::parabola())),
        "quadratic" => {
            let n = n.ok_or_else(|| CliError::Usage("--n required for quadratic".into()))?;
            let k = k.ok_or_else(|| CliError::Usage("--k required for quadratic".into()))?;
            let lam = match lambda {
                Some(s) => {
                    let raw = parse_matrix(s)?;
                    if raw.rows() == 1 && n - k != 1 && raw.cols() == n - k {
                        // Accept a single comma list for a column vector.
                        DenseMatrix::from_fn(n - k, k, |i, _| raw.get(0, i))
                    } else {
                        raw
                    }
                }
                None => DenseMatrix::from_fn(n - k, k, |_, _| 1.0),
            };
            let model = QuadraticModel::new(n, k, lam)
                .map_err(|e| CliError::Usage(format!("bad quadratic model: {e}")))?;
            Ok(OperatorKind::Quadratic(model))
        }
        "moment-curve-n2" => Ok(OperatorKind::MomentCurve { n: 2 }),
        "moment-curve-n3" => Ok(OperatorKind::MomentCurve { n: 3 }),
        "moment-curve-n4" => Ok(OperatorKind::MomentCurve { n: 4 }),
        "moment" | "moment-curve" => {
            let n = n.ok_or_else(|| CliError::Usage("--n required for moment curve".into()))?;
            Ok(OperatorKind::MomentCurve { n })
        }
        "max-codim-k1" => Ok(OperatorKind::MaxCodim { k: 1 }),
        "max-codim" => {
            let k = k.ok_or_else(|| CliError::Usage("--k required for max-codim".into()))?;
            Ok(OperatorKind::MaxCodim { k })
        }
        other => usage(format!("unknown model '{other}'")),
    }
}

/// Named polynomial families for invariance checks.
pub fn family_by_name(name: &str, seed: u64) -> Result<(BlockPolySpec, Vec<DenseMatrix>), CliError> {
    use radonbl::rng::stream_rng;
    use rand::Rng;
    let mut rng = stream_rng(seed, 0xFA);
    match name {
        "moment-curve-n2" | "moment-curve-n3" | "moment-curve-n4" => {
            let n = name.trim_start_matches("moment-curve-n").parse::<usize>().unwrap();
            let ts: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
            Ok((moment_curve_spec(n), moment_curve_maps(&ts)))
        }
        "parabola" | "quadratic-n3-k2" => {
            let (n, k) = if name == "parabola" { (2, 1) } else { (3, 2) };
            let lam = DenseMatrix::from_fn(n - k, k, |_, _| rng.gen_range(0.4..1.6));
            let model = QuadraticModel::new(n, k, lam)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let spec =
                quadratic_model_spec(&model).map_err(|e| CliError::Numerical(e.to_string()))?;
            let maps = (0..n)
                .map(|_| {
                    let mut y = vec![0.0; n];
                    for item in y.iter_mut().take(k) {
                        *item = rng.gen_range(-1.0..1.0);
                    }
                    left_derivative_matrix(&model, &vec![0.0; n], &y).unwrap()
                })
                .collect();
            Ok((spec, maps))
        }
        "max-codim-k1" | "max-codim-k2" => {
            let k = if name.ends_with("k1") { 1 } else { 2 };
            let maps = (0..=k)
                .map(|_| {
                    let y: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.5..1.5)).collect();
                    max_codim_pi(&y)
                })
                .collect();
            Ok((max_codim_spec(k), maps))
        }
        other => usage(format!("unknown family '{other}'")),
    }
}
