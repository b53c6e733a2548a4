//! Command implementations. Each resolves its parameters, runs the library
//! routines, and produces a single report; row-level data can additionally
//! be written as CSV where it exists.

use std::path::PathBuf;

use serde_json::{json, Value};
use stochwalk::apps::{
    beta_params, exchange_stationary_test, polling_stationary_test, simplices_run, AffineFrame,
    BetaSource,
};
use stochwalk::characterization::{
    charfn_check, check_dirichlet_fixed_point, check_gamma_fixed_point, check_pushforward,
    default_u_grid, dirichlet_moment, estimate_limit_params, MOMENT_Z_THRESHOLD,
};
use stochwalk::products::{iterate_until_converged, positivity_time};
use stochwalk::rng::{par_samples, RngStream};
use stochwalk::sampling::{sample_dirichlet, sample_gamma_vector, Ensemble};
use stochwalk::stats::{ks_test, moment_battery, reg_inc_beta, TestReport};
use stochwalk::types::{ParamMatrix, ParamVector};

use crate::config::{CliError, EnsembleSpec};
use crate::report::{write_csv, Report};

fn collect<T>(outs: Vec<stochwalk::Result<T>>) -> Result<Vec<T>, CliError> {
    outs.into_iter()
        .map(|r| r.map_err(CliError::from))
        .collect()
}

/// Moment battery (order <= 2) plus per-coordinate KS against the Beta
/// marginals, with the KS level split evenly across tested coordinates.
/// Zero-parameter coordinates are degenerate at 0 and are skipped.
fn dirichlet_gof(
    prefix: &str,
    rows: &[Vec<f64>],
    t: &ParamVector,
    level: f64,
) -> Result<(Vec<TestReport>, bool), CliError> {
    let moments = moment_battery(
        &format!("{prefix}/moments"),
        rows,
        |k| dirichlet_moment(t, k),
        2,
        MOMENT_Z_THRESHOLD,
    )?;
    let mut pass = moments.pass;
    let mut reports = vec![moments];
    let total = t.total();
    let eligible: Vec<usize> = (0..t.len())
        .filter(|&j| t.entries()[j] > 0.0 && total - t.entries()[j] > 0.0)
        .collect();
    let per_coord = level / eligible.len().max(1) as f64;
    for j in eligible {
        let tj = t.entries()[j];
        let xs: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let ks = ks_test(
            &format!("{prefix}/ks_marginal_{}", j + 1),
            &xs,
            |x| reg_inc_beta(tj, total - tj, x),
            per_coord,
        )?;
        pass &= ks.pass;
        reports.push(ks);
    }
    Ok((reports, pass))
}

fn max_rel_err(fit: &ParamVector, target: &ParamVector) -> f64 {
    fit.entries()
        .iter()
        .zip(target.entries())
        .map(|(h, t)| (h - t).abs() / t)
        .fold(0.0f64, f64::max)
}

fn entries_json(v: &Option<ParamVector>) -> Value {
    match v {
        Some(p) => json!(p.entries()),
        None => Value::Null,
    }
}

pub struct LimitArgs {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub replicates: usize,
    pub epsilon: f64,
    pub max_n: usize,
    pub level: f64,
    pub target: Option<Vec<f64>>,
    pub csv: Option<PathBuf>,
}

/// Replicated left products to convergence; fits the limit row law and runs
/// the goodness-of-fit battery against the target (or the fit itself).
pub fn cmd_limit(a: &LimitArgs) -> Result<Report, CliError> {
    let e = a.spec.build()?;
    let d = e.dim()?;
    if a.replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    let target = match &a.target {
        Some(v) => {
            if v.len() != d {
                return Err(CliError::Usage(format!(
                    "--t has {} entries for dimension {d}",
                    v.len()
                )));
            }
            Some(ParamVector::strict(v.clone())?)
        }
        None => None,
    };

    let root = RngStream::new(a.seed, 0);
    let runs: Vec<(bool, usize, Vec<f64>)> =
        collect(par_samples(&root, a.replicates, |_, s| {
            let tr = iterate_until_converged(&e, a.epsilon, a.max_n, s)?;
            Ok((tr.converged, tr.steps, tr.final_matrix.row(0).to_vec()))
        }))?;

    let n_conv = runs.iter().filter(|r| r.0).count();
    let fraction = n_conv as f64 / a.replicates as f64;
    let mean_steps = runs.iter().map(|r| r.1 as f64).sum::<f64>() / a.replicates as f64;
    let max_steps = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let rows: Vec<Vec<f64>> = runs
        .iter()
        .filter(|r| r.0)
        .map(|r| r.2.clone())
        .collect();

    let (t_hat, fit_error) = if rows.len() >= 1000 {
        match estimate_limit_params(&rows) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (
            None,
            Some(format!("need 1000 converged rows, got {}", rows.len())),
        )
    };
    let reference = target.clone().or_else(|| t_hat.clone());
    let (tests, tests_pass) = match &reference {
        Some(t) if rows.len() >= 1000 => dirichlet_gof("limit", &rows, t, a.level)?,
        _ => (Vec::new(), false),
    };
    let rel_err = match (&t_hat, &target) {
        (Some(h), Some(t)) => Some(max_rel_err(h, t)),
        _ => None,
    };
    let pass = fraction >= 0.99 && tests_pass;

    if let Some(path) = &a.csv {
        let mut header: Vec<String> = ["replicate", "converged", "steps"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=d).map(|j| format!("x_{j}")));
        let table: Vec<Vec<String>> = runs
            .iter()
            .enumerate()
            .map(|(i, (c, steps, row))| {
                let mut rec = vec![
                    i.to_string(),
                    u8::from(*c).to_string(),
                    steps.to_string(),
                ];
                rec.extend(row.iter().map(|v| v.to_string()));
                rec
            })
            .collect();
        write_csv(path, &header, &table)?;
    }

    let config = json!({
        "ensemble": a.spec,
        "replicates": a.replicates,
        "epsilon": a.epsilon,
        "max_n": a.max_n,
        "level": a.level,
        "target": entries_json(&target),
    });
    let results = json!({
        "converged": n_conv,
        "converged_fraction": fraction,
        "mean_steps": mean_steps,
        "max_steps": max_steps,
        "t_hat": entries_json(&t_hat),
        "fit_error": fit_error,
        "max_rel_err": rel_err,
        "tests": tests,
        "tests_pass": tests_pass,
    });
    Ok(Report::new("limit", a.seed, config, results, pass))
}

pub struct CheckArgs {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub t: Vec<f64>,
    pub n: usize,
    pub level: f64,
    pub max_m: usize,
    pub trials: usize,
}

/// Verifies the two conditions behind the rank-one limit: the gamma
/// distributional fixed point for the candidate t, and positivity of some
/// finite product. Also runs the Dirichlet-side fixed point and the
/// characteristic-function identity as corroboration.
pub fn cmd_check(a: &CheckArgs) -> Result<Report, CliError> {
    let e = a.spec.build()?;
    let t = ParamVector::strict(a.t.clone())?;
    let root = RngStream::new(a.seed, 0);

    let gamma_fp = check_gamma_fixed_point(&e, &t, a.n, a.level, &root.derive(1))?;
    let dirichlet_fp = check_dirichlet_fixed_point(&e, &t, a.n, a.level, &root.derive(2))?;
    let charfn = charfn_check(&e, &t, &default_u_grid(t.len()), a.n, &root.derive(3))?;
    let positivity = positivity_time(&e, a.max_m, a.trials, &root.derive(4))?;

    let fixed_point_pass = gamma_fp.pass;
    let positivity_pass = positivity.m_star.is_some();
    let conditions_pass = fixed_point_pass && positivity_pass;
    let pass = conditions_pass && dirichlet_fp.pass && charfn.pass;

    let config = json!({
        "ensemble": a.spec,
        "t": t.entries(),
        "n": a.n,
        "level": a.level,
        "max_m": a.max_m,
        "trials": a.trials,
    });
    let results = json!({
        "gamma_fixed_point": gamma_fp,
        "dirichlet_fixed_point": dirichlet_fp,
        "charfn": charfn,
        "positivity": positivity,
        "fixed_point_pass": fixed_point_pass,
        "positivity_pass": positivity_pass,
        "conditions_pass": conditions_pass,
    });
    Ok(Report::new("check", a.seed, config, results, pass))
}

pub struct PushforwardArgs {
    pub alpha: Vec<Vec<f64>>,
    pub seed: u64,
    pub t: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub n: usize,
    pub level: f64,
}

/// Tests Y X against the Dirichlet law with the declared column parameters,
/// on both the Dirichlet and the gamma side. t and s default to the row and
/// column sums of alpha; overriding them deliberately misdeclares the law.
pub fn cmd_pushforward(a: &PushforwardArgs) -> Result<Report, CliError> {
    let am = ParamMatrix::new(&a.alpha)?;
    let (row_sums, col_sums) = am.row_col_sums();
    let t = ParamVector::strict(a.t.clone().unwrap_or(row_sums))?;
    let s = ParamVector::extended(a.s.clone().unwrap_or(col_sums))?;
    let e = Ensemble::dirichlet(am)?;

    let root = RngStream::new(a.seed, 0);
    let (dirichlet_side, gamma_side) = check_pushforward(&e, &t, &s, a.n, a.level, &root)?;
    let agree = dirichlet_side.pass == gamma_side.pass;
    let pass = dirichlet_side.pass && gamma_side.pass;

    let config = json!({
        "alpha": a.alpha,
        "t": t.entries(),
        "s": s.entries(),
        "n": a.n,
        "level": a.level,
    });
    let results = json!({
        "dirichlet_side": dirichlet_side,
        "gamma_side": gamma_side,
        "agree": agree,
    });
    Ok(Report::new("pushforward", a.seed, config, results, pass))
}

pub struct ExchangeArgs {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub t: Vec<f64>,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: Option<usize>,
    pub level: f64,
}

/// Long-run test of the exchange chain against its claimed stationary law.
pub fn cmd_exchange(a: &ExchangeArgs) -> Result<Report, CliError> {
    let e = a.spec.build()?;
    let d = e.dim()?;
    let t = ParamVector::strict(a.t.clone())?;
    let thin = a.thin.unwrap_or(20 * d);
    let mut rng = RngStream::new(a.seed, 0);
    let report = exchange_stationary_test(&e, &t, a.burn_in, a.samples, thin, a.level, &mut rng)?;
    let pass = report.pass;

    let config = json!({
        "ensemble": a.spec,
        "t": t.entries(),
        "burn_in": a.burn_in,
        "samples": a.samples,
        "thin": thin,
        "level": a.level,
    });
    let results = json!({ "report": report });
    Ok(Report::new("exchange", a.seed, config, results, pass))
}

pub struct SimplicesArgs {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub frame: Option<Vec<Vec<f64>>>,
    pub replicates: usize,
    pub epsilon: f64,
    pub max_n: usize,
    pub target: Option<Vec<f64>>,
    pub level: f64,
    pub csv: Option<PathBuf>,
}

/// Replicated nested-simplex cascades: fits the limit point's barycentric
/// law and checks that every cartesian limit reconstructs from it.
pub fn cmd_simplices(a: &SimplicesArgs) -> Result<Report, CliError> {
    let e = a.spec.build()?;
    let d = e.dim()?;
    if a.replicates == 0 {
        return Err(CliError::Usage("--replicates must be positive".into()));
    }
    let frame = match &a.frame {
        Some(rows) => AffineFrame::new(rows.clone())?,
        None => AffineFrame::standard(d),
    };
    let target = match &a.target {
        Some(v) => Some(ParamVector::strict(v.clone())?),
        None => None,
    };

    let root = RngStream::new(a.seed, 0);
    let runs: Vec<(bool, usize, Vec<f64>, Vec<f64>, f64)> =
        collect(par_samples(&root, a.replicates, |_, s| {
            let r = simplices_run(&frame, &e, a.epsilon, a.max_n, s)?;
            let rebuilt = frame.to_cartesian(r.barycentric.entries())?;
            let recon = rebuilt
                .iter()
                .zip(&r.point)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            Ok((
                r.converged,
                r.steps,
                r.barycentric.into_entries(),
                r.point,
                recon,
            ))
        }))?;

    let n_conv = runs.iter().filter(|r| r.0).count();
    let fraction = n_conv as f64 / a.replicates as f64;
    let recon_max = runs.iter().map(|r| r.4).fold(0.0f64, f64::max);
    let rows: Vec<Vec<f64>> = runs
        .iter()
        .filter(|r| r.0)
        .map(|r| r.2.clone())
        .collect();

    let (t_hat, fit_error) = if rows.len() >= 1000 {
        match estimate_limit_params(&rows) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (
            None,
            Some(format!("need 1000 converged cascades, got {}", rows.len())),
        )
    };
    let reference = target.clone().or_else(|| t_hat.clone());
    let (tests, tests_pass) = match &reference {
        Some(t) if rows.len() >= 1000 => dirichlet_gof("simplices", &rows, t, a.level)?,
        _ => (Vec::new(), false),
    };
    let rel_err = match (&t_hat, &target) {
        (Some(h), Some(t)) => Some(max_rel_err(h, t)),
        _ => None,
    };
    let pass = fraction >= 0.99 && tests_pass && recon_max <= 1e-8;

    if let Some(path) = &a.csv {
        let mut header: Vec<String> = ["replicate", "converged", "steps"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=d).map(|j| format!("b_{j}")));
        header.extend((1..d).map(|j| format!("p_{j}")));
        let table: Vec<Vec<String>> = runs
            .iter()
            .enumerate()
            .map(|(i, (c, steps, bary, point, _))| {
                let mut rec = vec![
                    i.to_string(),
                    u8::from(*c).to_string(),
                    steps.to_string(),
                ];
                rec.extend(bary.iter().map(|v| v.to_string()));
                rec.extend(point.iter().map(|v| v.to_string()));
                rec
            })
            .collect();
        write_csv(path, &header, &table)?;
    }

    let config = json!({
        "ensemble": a.spec,
        "frame": frame.vertices(),
        "replicates": a.replicates,
        "epsilon": a.epsilon,
        "max_n": a.max_n,
        "level": a.level,
        "target": entries_json(&target),
    });
    let results = json!({
        "converged": n_conv,
        "converged_fraction": fraction,
        "reconstruction_max": recon_max,
        "t_hat": entries_json(&t_hat),
        "fit_error": fit_error,
        "max_rel_err": rel_err,
        "tests": tests,
        "tests_pass": tests_pass,
    });
    Ok(Report::new("simplices", a.seed, config, results, pass))
}

pub struct PollingArgs {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub r: usize,
    pub beta: Option<Vec<f64>>,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: Option<usize>,
    pub level: f64,
}

/// Stationarity test for the residue-r polling subchain against the
/// windowed column-sum parameters (or an explicit override).
pub fn cmd_polling(a: &PollingArgs) -> Result<Report, CliError> {
    let e = a.spec.build()?;
    let d = e.dim()?;
    if a.r < 1 || a.r > d {
        return Err(CliError::Usage(format!("--r must be in 1..={d}")));
    }
    let thin = a.thin.unwrap_or(10);
    let source = match &a.beta {
        Some(v) => BetaSource::Explicit(ParamVector::extended(v.clone())?),
        None => match a.spec.alpha() {
            Some(am) => BetaSource::Alpha(am),
            None => {
                return Err(CliError::Usage(
                    "ensemble rows are not independent Dirichlet draws; pass --beta explicitly"
                        .into(),
                ))
            }
        },
    };
    let beta_used: Vec<f64> = match &source {
        BetaSource::Alpha(am) => beta_params(am, a.r)?.entries().to_vec(),
        BetaSource::Explicit(v) => v.entries().to_vec(),
    };

    let mut rng = RngStream::new(a.seed, 0);
    let report =
        polling_stationary_test(&e, &source, a.r, a.burn_in, a.samples, thin, a.level, &mut rng)?;
    let pass = report.pass;

    let config = json!({
        "ensemble": a.spec,
        "r": a.r,
        "burn_in": a.burn_in,
        "samples": a.samples,
        "thin": thin,
        "level": a.level,
    });
    let results = json!({
        "beta": beta_used,
        "report": report,
    });
    Ok(Report::new("polling", a.seed, config, results, pass))
}

pub struct SampleArgs {
    pub spec: Option<EnsembleSpec>,
    pub seed: u64,
    pub t: Option<Vec<f64>>,
    pub n: usize,
    pub what: Option<String>,
    pub epsilon: f64,
    pub max_n: usize,
    pub csv: Option<PathBuf>,
}

/// Dumps raw draws: ensemble matrices, Dirichlet or gamma vectors, or
/// converged limit rows.
pub fn cmd_sample(a: &SampleArgs) -> Result<Report, CliError> {
    let what = match &a.what {
        Some(w) => w.clone(),
        None if a.spec.is_some() => "matrices".to_string(),
        None if a.t.is_some() => "dirichlet".to_string(),
        None => return Err(CliError::Usage("sample needs --ensemble or --t".into())),
    };
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let need_spec = || {
        a.spec
            .clone()
            .ok_or_else(|| CliError::Usage(format!("sample --what {what} needs an ensemble")))
    };
    let need_t = || {
        a.t.clone()
            .ok_or_else(|| CliError::Usage(format!("sample --what {what} needs --t")))
            .and_then(|v| ParamVector::extended(v).map_err(CliError::from))
    };

    let root = RngStream::new(a.seed, 0);
    let mut csv_table: Option<(Vec<String>, Vec<Vec<String>>)> = None;
    let (draws, spec_json) = match what.as_str() {
        "matrices" => {
            let spec = need_spec()?;
            let e = spec.build()?;
            let cols = e.cols();
            let ms = collect(par_samples(&root, a.n, |_, s| e.sample(s)))?;
            if a.csv.is_some() {
                let mut header: Vec<String> =
                    vec!["replicate".to_string(), "row".to_string()];
                header.extend((1..=cols).map(|j| format!("c_{j}")));
                let mut table = Vec::new();
                for (i, m) in ms.iter().enumerate() {
                    for r in 0..m.rows() {
                        let mut rec = vec![i.to_string(), r.to_string()];
                        rec.extend(m.row(r).iter().map(|v| v.to_string()));
                        table.push(rec);
                    }
                }
                csv_table = Some((header, table));
            }
            (json!(ms), json!(spec))
        }
        "dirichlet" | "gamma" => {
            let t = need_t()?;
            let rows: Vec<Vec<f64>> = collect(par_samples(&root, a.n, |_, s| {
                if what == "dirichlet" {
                    Ok(sample_dirichlet(&t, s)?.into_entries())
                } else {
                    Ok(sample_gamma_vector(&t, s)?.into_entries())
                }
            }))?;
            if a.csv.is_some() {
                let mut header = vec!["replicate".to_string()];
                header.extend((1..=t.len()).map(|j| format!("x_{j}")));
                let table = rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let mut rec = vec![i.to_string()];
                        rec.extend(row.iter().map(|v| v.to_string()));
                        rec
                    })
                    .collect();
                csv_table = Some((header, table));
            }
            (json!(rows), json!(t.entries()))
        }
        "limit-rows" => {
            let spec = need_spec()?;
            let e = spec.build()?;
            let d = e.dim()?;
            let runs: Vec<(bool, usize, Vec<f64>)> =
                collect(par_samples(&root, a.n, |_, s| {
                    let tr = iterate_until_converged(&e, a.epsilon, a.max_n, s)?;
                    Ok((tr.converged, tr.steps, tr.final_matrix.row(0).to_vec()))
                }))?;
            if a.csv.is_some() {
                let mut header: Vec<String> = ["replicate", "converged", "steps"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                header.extend((1..=d).map(|j| format!("x_{j}")));
                let table = runs
                    .iter()
                    .enumerate()
                    .map(|(i, (c, steps, row))| {
                        let mut rec = vec![
                            i.to_string(),
                            u8::from(*c).to_string(),
                            steps.to_string(),
                        ];
                        rec.extend(row.iter().map(|v| v.to_string()));
                        rec
                    })
                    .collect();
                csv_table = Some((header, table));
            }
            let objs: Vec<Value> = runs
                .iter()
                .map(|(c, steps, row)| json!({"converged": c, "steps": steps, "row": row}))
                .collect();
            (json!(objs), json!(spec))
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown --what {other:?} (expected matrices, dirichlet, gamma, or limit-rows)"
            )))
        }
    };

    if let (Some(path), Some((header, table))) = (&a.csv, &csv_table) {
        write_csv(path, header, table)?;
    }

    let config = json!({
        "source": spec_json,
        "what": what,
        "n": a.n,
    });
    let results = json!({ "draws": draws });
    Ok(Report::new("sample", a.seed, config, results, true))
}
