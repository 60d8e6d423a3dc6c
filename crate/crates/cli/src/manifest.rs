//! JSON experiment manifests: a typed command name, a flat string
//! parameter map with per-command key validation, a seed (default 0), and
//! the artifact path.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::builtins::{parse_count, parse_floats};
use crate::output::{fmt_num, write_artifact};
use crate::{bl_compute, numerical, radon_knapp, CliError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: u64,
    pub output_path: String,
}

pub fn run_manifest_file(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad manifest: {e}")))?;
    run(&manifest)
}

fn check_keys(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<(), CliError> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown parameter key '{key}' (allowed: {allowed:?})"
            )));
        }
    }
    Ok(())
}

fn get<'a>(params: &'a BTreeMap<String, String>, key: &str) -> Option<&'a str> {
    params.get(key).map(|s| s.as_str())
}

/// Executes a manifest, writing its artifact and printing a one-line
/// summary.
pub fn run(manifest: &Manifest) -> Result<(), CliError> {
    let out = PathBuf::from(&manifest.output_path);
    let params = &manifest.parameters;
    match manifest.command.as_str() {
        "bl" => {
            check_keys(params, &["op", "datum", "max_iters", "tol"])?;
            let op = get(params, "op").unwrap_or("compute");
            let datum = get(params, "datum")
                .ok_or_else(|| CliError::Usage("bl manifest needs 'datum'".into()))?;
            match op {
                "compute" => {
                    let max_iters = match get(params, "max_iters") {
                        Some(s) => parse_count(s)?,
                        None => 6000,
                    };
                    let tol = match get(params, "tol") {
                        Some(s) => s
                            .parse()
                            .map_err(|_| CliError::Usage(format!("bad tol '{s}'")))?,
                        None => 1e-12,
                    };
                    bl_compute(datum, max_iters, tol, Some(&out))
                }
                other => Err(CliError::Usage(format!("unknown bl op '{other}'"))),
            }
        }
        "poly" => {
            check_keys(params, &["op", "n", "t"])?;
            match get(params, "op").unwrap_or("vandermonde") {
                "vandermonde" => {
                    let n: usize = get(params, "n")
                        .ok_or_else(|| CliError::Usage("poly manifest needs 'n'".into()))?
                        .parse()
                        .map_err(|_| CliError::Usage("bad n".into()))?;
                    let ts = parse_floats(
                        get(params, "t")
                            .ok_or_else(|| CliError::Usage("poly manifest needs 't'".into()))?,
                    )?;
                    if ts.len() != n {
                        return Err(CliError::Usage(format!(
                            "expected {n} parameters, got {}",
                            ts.len()
                        )));
                    }
                    use radonbl::invariant_poly::{eval_phi, moment_curve_maps, moment_curve_spec};
                    let spec = moment_curve_spec(n);
                    let value = eval_phi(&spec, &moment_curve_maps(&ts)).map_err(numerical)?;
                    println!("poly vandermonde: {}", value.abs());
                    let body = serde_json::json!({ "n": n, "value": fmt_num(value.abs()) });
                    write_artifact(
                        &out,
                        "poly vandermonde",
                        &serde_json::to_string_pretty(&body).unwrap(),
                    )
                }
                other => Err(CliError::Usage(format!("unknown poly op '{other}'"))),
            }
        }
        "nonconc" => {
            check_keys(params, &["op", "points", "d", "delta"])?;
            match get(params, "op").unwrap_or("convprop") {
                "convprop" => {
                    use rand::Rng;
                    let points = match get(params, "points") {
                        Some(s) => parse_count(s)?,
                        None => 200,
                    };
                    let d: usize = get(params, "d").unwrap_or("2").parse().unwrap_or(2);
                    let delta: f64 = get(params, "delta").unwrap_or("0.25").parse().unwrap_or(0.25);
                    let mut rng = radonbl::rng::stream_rng(manifest.seed, 0xCE);
                    let pts: Vec<Vec<f64>> = (0..points)
                        .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
                        .collect();
                    let weights: Vec<f64> =
                        (0..points).map(|_| rng.gen_range(0.1..1.0)).collect();
                    let feats: [fn(&[f64]) -> f64; 4] =
                        [|_p| 1.0, |p| p[0], |p| p[1], |p| p[0] * p[1]];
                    let basis = radonbl::linops::DenseMatrix::from_fn(points, d.clamp(1, 4), |i, j| {
                        feats[j](&pts[i])
                    });
                    let space =
                        radonbl::nonconc::SampleSpace::new(pts, weights, basis).map_err(numerical)?;
                    let cert = radonbl::nonconc::convprop_construct_seeded(
                        &space,
                        delta,
                        manifest.seed,
                    )
                    .map_err(numerical)?;
                    println!(
                        "nonconc convprop: retained {}/{} points",
                        cert.selected_indices.len(),
                        points
                    );
                    write_artifact(
                        &out,
                        "nonconc convprop",
                        &serde_json::to_string_pretty(&cert).unwrap(),
                    )
                }
                other => Err(CliError::Usage(format!("unknown nonconc op '{other}'"))),
            }
        }
        "radon" => {
            check_keys(params, &["op", "model", "n", "k", "lambda", "q", "deltas", "samples"])?;
            match get(params, "op").unwrap_or("knapp") {
                "knapp" => {
                    let model = get(params, "model").unwrap_or("parabola");
                    let n = match get(params, "n") {
                        Some(s) => {
                            Some(s.parse().map_err(|_| CliError::Usage("bad n".into()))?)
                        }
                        None => None,
                    };
                    let k = match get(params, "k") {
                        Some(s) => {
                            Some(s.parse().map_err(|_| CliError::Usage("bad k".into()))?)
                        }
                        None => None,
                    };
                    let deltas = match get(params, "deltas") {
                        Some(s) => parse_count(s)?,
                        None => 6,
                    };
                    let samples = match get(params, "samples") {
                        Some(s) => parse_count(s)?,
                        None => 25_000,
                    };
                    radon_knapp(
                        model,
                        n,
                        k,
                        get(params, "lambda"),
                        get(params, "q").unwrap_or("auto"),
                        deltas,
                        samples,
                        manifest.seed,
                        Some(&out),
                    )
                }
                other => Err(CliError::Usage(format!("unknown radon op '{other}'"))),
            }
        }
        "ift" => {
            check_keys(params, &["op", "model", "x", "t"])?;
            match get(params, "op").unwrap_or("normalize") {
                "normalize" => {
                    let model = get(params, "model").unwrap_or("parabola");
                    let x = parse_floats(get(params, "x").unwrap_or("0,0"))?;
                    let t = parse_floats(get(params, "t").unwrap_or("0.5"))?;
                    let incidence = crate::incidence_by_name(model)?;
                    let y = crate::graph_point_by_name(model, &x, &t)?;
                    let res = radonbl::ift_newton::normalize_defining_function(&incidence, &x, &y)
                        .map_err(numerical)?;
                    println!("ift normalize {model}: {} components", res.value.len());
                    let vals: Vec<String> = res.value.iter().map(|v| fmt_num(*v)).collect();
                    let body = serde_json::json!({ "model": model, "value": vals });
                    write_artifact(
                        &out,
                        "ift normalize",
                        &serde_json::to_string_pretty(&body).unwrap(),
                    )
                }
                other => Err(CliError::Usage(format!("unknown ift op '{other}'"))),
            }
        }
        other => Err(CliError::Usage(format!("unknown manifest command '{other}'"))),
    }
}
