//! Statistical verification of the distributional fixed-point properties of
//! random stochastic matrices and identification of Dirichlet limit laws.
//!
//! The central objects are a matrix law X and a shape vector t. The gamma
//! fixed-point check asks whether V X has the same law as V for V with
//! independent gamma components of shapes t; the Dirichlet fixed-point check
//! asks the same for a Dirichlet vector Y; the pushforward check compares
//! Y X (resp. V X) against a declared target law on the output coordinates.
//! "Same law" is operationalized as a battery: mixed moments of order <= 2
//! within 4 standard errors, per-coordinate Kolmogorov-Smirnov tests, and a
//! two-sample energy-distance permutation test.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{par_samples, RngStream};
use crate::sampling::{sample_dirichlet, sample_gamma_vector, Ensemble};
use crate::stats::{
    energy_distance_test, ks_test, moment_battery, reg_inc_beta, reg_inc_gamma, TestReport,
};
use crate::types::{vec_mat_product, ParamVector};

/// Cap on per-group size for battery-level energy tests; larger sample sets
/// are thinned by a deterministic stride before the O(n^2) statistic.
pub const ENERGY_SUBSAMPLE: usize = 512;
/// Permutations for battery-level energy tests.
pub const ENERGY_PERMUTATIONS: usize = 200;
/// Moment-test threshold in standard errors.
pub const MOMENT_Z_THRESHOLD: f64 = 4.0;

fn pochhammer(a: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a + f64::from(i)))
}

/// Exact mixed moment E[prod_j Y_j^{k_j}] of the Dirichlet law with
/// parameters `t`, for an integer multi-index `k`.
pub fn dirichlet_moment(t: &ParamVector, k: &[u32]) -> Result<f64> {
    if k.len() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "multi-index length {} vs parameter length {}",
            k.len(),
            t.len()
        )));
    }
    let mut num = 1.0;
    for (j, (&tj, &kj)) in t.entries().iter().zip(k).enumerate() {
        if kj > 0 && tj == 0.0 {
            return Err(Error::ZeroParamWithPositiveOrder(j));
        }
        num *= pochhammer(tj, kj);
    }
    let order: u32 = k.iter().sum();
    Ok(num / pochhammer(t.total(), order))
}

/// Exact mixed moment E[prod_j V_j^{k_j}] of independent gamma components
/// with shapes `t`.
pub fn gamma_moment(t: &ParamVector, k: &[u32]) -> Result<f64> {
    if k.len() != t.len() {
        return Err(Error::DimensionMismatch(format!(
            "multi-index length {} vs parameter length {}",
            k.len(),
            t.len()
        )));
    }
    let mut prod = 1.0;
    for (j, (&tj, &kj)) in t.entries().iter().zip(k).enumerate() {
        if kj > 0 && tj == 0.0 {
            return Err(Error::ZeroParamWithPositiveOrder(j));
        }
        prod *= pochhammer(tj, kj);
    }
    Ok(prod)
}

/// Which target family a battery tests against.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Law {
    Dirichlet,
    Gamma,
}

pub(crate) struct Battery {
    pub reports: Vec<TestReport>,
    pub pass: bool,
}

/// Oracle moment for the target law, treating zero-parameter coordinates as
/// identically zero (their moments vanish).
fn target_moment(law: Law, t: &ParamVector, k: &[u32]) -> Result<f64> {
    let degenerate = t
        .entries()
        .iter()
        .zip(k)
        .any(|(&tj, &kj)| kj > 0 && tj == 0.0);
    if degenerate {
        return Ok(0.0);
    }
    match law {
        Law::Dirichlet => dirichlet_moment(t, k),
        Law::Gamma => gamma_moment(t, k),
    }
}

/// Distribution-equality battery against the target law with parameters `t`:
/// mixed moments of order <= 2 at 4 SE, per-coordinate KS at level/(number of
/// KS components), and, when a reference sample is supplied, an energy test
/// at `level` on stride-subsampled groups.
pub(crate) fn distribution_battery(
    prefix: &str,
    samples: &[Vec<f64>],
    t: &ParamVector,
    law: Law,
    level: f64,
    energy: Option<(&[Vec<f64>], RngStream)>,
) -> Result<Battery> {
    let mut reports = Vec::new();
    reports.push(moment_battery(
        &format!("{prefix}/moments"),
        samples,
        |k| target_moment(law, t, k),
        2,
        MOMENT_Z_THRESHOLD,
    )?);

    let total = t.total();
    let ks_coords: Vec<usize> = (0..t.len())
        .filter(|&j| {
            let tj = t.entries()[j];
            tj > 0.0 && (matches!(law, Law::Gamma) || total - tj > 0.0)
        })
        .collect();
    let ks_level = level / ks_coords.len().max(1) as f64;
    for &j in &ks_coords {
        let tj = t.entries()[j];
        let marginal: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let report = match law {
            Law::Dirichlet => ks_test(
                &format!("{prefix}/ks_marginal_{}", j + 1),
                &marginal,
                |x| reg_inc_beta(tj, total - tj, x),
                ks_level,
            )?,
            Law::Gamma => ks_test(
                &format!("{prefix}/ks_marginal_{}", j + 1),
                &marginal,
                |x| reg_inc_gamma(tj, x),
                ks_level,
            )?,
        };
        reports.push(report);
    }

    if let Some((reference, stream)) = energy {
        let xs = stride_subsample(samples, ENERGY_SUBSAMPLE);
        let ys = stride_subsample(reference, ENERGY_SUBSAMPLE);
        reports.push(energy_distance_test(
            &format!("{prefix}/energy"),
            &xs,
            &ys,
            ENERGY_PERMUTATIONS,
            level,
            &stream,
        )?);
    }

    let pass = reports.iter().all(|r| r.pass);
    Ok(Battery { reports, pass })
}

/// Deterministic stride subsample of at most `cap` rows.
fn stride_subsample(samples: &[Vec<f64>], cap: usize) -> Vec<Vec<f64>> {
    let n = samples.len();
    if n <= cap {
        return samples.to_vec();
    }
    (0..cap).map(|i| samples[i * n / cap].clone()).collect()
}

/// Folds a battery into one aggregated report: statistic = max moment |z|,
/// `details` carries every component's headline number, pass = all pass.
pub(crate) fn flatten_battery(
    name: &str,
    battery: &Battery,
    n: usize,
    seed: [u64; 2],
    extra: Vec<(String, f64)>,
) -> TestReport {
    let mut details = std::collections::BTreeMap::new();
    let mut statistic = 0.0;
    for report in &battery.reports {
        let component = report
            .name
            .rsplit('/')
            .next()
            .unwrap_or(&report.name)
            .to_string();
        if component == "moments" {
            statistic = report.statistic;
            details.insert("moments_z_max".into(), report.statistic);
        } else if component.starts_with("ks_marginal_") {
            details.insert(format!("{component}_p"), report.threshold_or_pvalue);
        } else if component == "energy" {
            details.insert("energy_p".into(), report.threshold_or_pvalue);
            details.insert("energy_stat".into(), report.statistic);
        }
        details.insert(format!("{component}_pass"), f64::from(u8::from(report.pass)));
    }
    for (k, v) in extra {
        details.insert(k, v);
    }
    TestReport {
        name: name.into(),
        statistic,
        threshold_or_pvalue: MOMENT_Z_THRESHOLD,
        n: vec![n],
        seed: seed.to_vec(),
        pass: battery.pass,
        details,
    }
}

/// Verdict of the gamma fixed-point check for one candidate shape vector.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointVerdict {
    pub t: ParamVector,
    pub tests: Vec<TestReport>,
    pub pass: bool,
}

fn require_square_matching(e: &Ensemble, t: &ParamVector) -> Result<usize> {
    let d = e.dim()?;
    if t.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "parameter vector has length {}, ensemble dimension is {d}",
            t.len()
        )));
    }
    Ok(d)
}

fn require_strictly_positive(t: &ParamVector) -> Result<()> {
    match t.entries().iter().copied().find(|&v| v <= 0.0) {
        Some(v) => Err(Error::NonPositiveShape(v)),
        None => Ok(()),
    }
}

/// Tests whether V X has the same law as V for V with independent gamma
/// components of shapes `t`, drawn independently of X.
///
/// Draws `n_samples` pairs, forms V X, and runs the gamma-law battery
/// (moments, per-coordinate KS against the gamma CDF, energy distance against
/// fresh gamma vectors).
pub fn check_gamma_fixed_point(
    e: &Ensemble,
    t: &ParamVector,
    n_samples: usize,
    level: f64,
    rng: &RngStream,
) -> Result<FixedPointVerdict> {
    require_square_matching(e, t)?;
    require_strictly_positive(t)?;
    let vx: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(0), n_samples, |_, s| {
        let v = sample_gamma_vector(t, s)?;
        let x = e.sample(s)?;
        vec_mat_product(v.entries(), &x)
    }))?;
    let fresh: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(1), n_samples, |_, s| {
        Ok(sample_gamma_vector(t, s)?.into_entries())
    }))?;
    let battery = distribution_battery(
        "gamma_fixed_point",
        &vx,
        t,
        Law::Gamma,
        level,
        Some((&fresh, rng.derive(2))),
    )?;
    Ok(FixedPointVerdict {
        t: t.clone(),
        tests: battery.reports,
        pass: battery.pass,
    })
}

/// Tests whether Y X has the same law as Y for Y Dirichlet with parameters
/// `t`, independent of X: Dirichlet moment battery plus per-coordinate KS
/// against Beta(t_j, t_total - t_j), aggregated into one report.
pub fn check_dirichlet_fixed_point(
    e: &Ensemble,
    t: &ParamVector,
    n_samples: usize,
    level: f64,
    rng: &RngStream,
) -> Result<TestReport> {
    require_square_matching(e, t)?;
    require_strictly_positive(t)?;
    let yx: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(0), n_samples, |_, s| {
        let y = sample_dirichlet(t, s)?;
        let x = e.sample(s)?;
        vec_mat_product(y.entries(), &x)
    }))?;
    let battery = distribution_battery("dirichlet_fixed_point", &yx, t, Law::Dirichlet, level, None)?;
    Ok(flatten_battery(
        "dirichlet_fixed_point",
        &battery,
        n_samples,
        rng.ids(),
        vec![],
    ))
}

/// Pushforward check: for Y Dirichlet(t) and V gamma(t) on the row side,
/// tests Y X against Dirichlet(s) and V X against gamma(s) on the column
/// side. The two verdicts exercise the equivalence of the two statements.
///
/// The ensemble may be rectangular r x c with |t| = r and |s| = c; the totals
/// must agree within 1e-9 (mass is conserved by stochastic matrices).
pub fn check_pushforward(
    e: &Ensemble,
    t: &ParamVector,
    s: &ParamVector,
    n_samples: usize,
    level: f64,
    rng: &RngStream,
) -> Result<(TestReport, TestReport)> {
    if t.len() != e.rows() || s.len() != e.cols() {
        return Err(Error::DimensionMismatch(format!(
            "pushforward needs |t| = {} rows and |s| = {} cols, got |t|={}, |s|={}",
            e.rows(),
            e.cols(),
            t.len(),
            s.len()
        )));
    }
    require_strictly_positive(t)?;
    if (t.total() - s.total()).abs() > 1e-9 {
        return Err(Error::SumMismatch(t.total(), s.total()));
    }

    let yx: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(0), n_samples, |_, st| {
        let y = sample_dirichlet(t, st)?;
        let x = e.sample(st)?;
        vec_mat_product(y.entries(), &x)
    }))?;
    let dir_ref: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(1), n_samples, |_, st| {
        Ok(sample_dirichlet(s, st)?.into_entries())
    }))?;
    let dir_battery = distribution_battery(
        "pushforward_dirichlet",
        &yx,
        s,
        Law::Dirichlet,
        level,
        Some((&dir_ref, rng.derive(2))),
    )?;

    let vx: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(3), n_samples, |_, st| {
        let v = sample_gamma_vector(t, st)?;
        let x = e.sample(st)?;
        vec_mat_product(v.entries(), &x)
    }))?;
    let gam_ref: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(4), n_samples, |_, st| {
        Ok(sample_gamma_vector(s, st)?.into_entries())
    }))?;
    let gam_battery = distribution_battery(
        "pushforward_gamma",
        &vx,
        s,
        Law::Gamma,
        level,
        Some((&gam_ref, rng.derive(5))),
    )?;

    Ok((
        flatten_battery(
            "pushforward_dirichlet_side",
            &dir_battery,
            n_samples,
            rng.ids(),
            vec![],
        ),
        flatten_battery(
            "pushforward_gamma_side",
            &gam_battery,
            n_samples,
            rng.ids(),
            vec![],
        ),
    ))
}

fn collect_results<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}

/// Method-of-moments fit of Dirichlet parameters from simplex samples.
///
/// Per coordinate, Var = m(1-m)/(T+1) is solved for the concentration T;
/// the per-coordinate estimates are aggregated by median for robustness, and
/// t_j = m_j * T.
pub fn estimate_limit_params(rows: &[Vec<f64>]) -> Result<ParamVector> {
    let n = rows.len();
    if n < 1000 {
        return Err(Error::TooFewSamples { need: 1000, got: n });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(
            "limit rows have differing lengths".into(),
        ));
    }
    let nf = n as f64;
    let mut concentrations = Vec::with_capacity(d);
    let mut means = Vec::with_capacity(d);
    for j in 0..d {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in rows {
            sum += r[j];
            sumsq += r[j] * r[j];
        }
        let mean = sum / nf;
        let var = (sumsq - nf * mean * mean).max(0.0) / (nf - 1.0);
        if var == 0.0 {
            return Err(Error::DegenerateSample(format!(
                "coordinate {} has zero variance",
                j + 1
            )));
        }
        means.push(mean);
        concentrations.push(mean * (1.0 - mean) / var - 1.0);
    }
    concentrations.sort_by(|a, b| a.partial_cmp(b).expect("finite concentrations"));
    let mid = concentrations.len() / 2;
    let total = if concentrations.len() % 2 == 1 {
        concentrations[mid]
    } else {
        0.5 * (concentrations[mid - 1] + concentrations[mid])
    };
    if !(total > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "implied concentration {total} is not positive"
        )));
    }
    ParamVector::strict(means.into_iter().map(|m| m * total).collect())
}

/// Monte Carlo check of the characteristic function of V X against the
/// product form prod_j (1 - i u_j)^(-t_j) on a grid of u vectors.
///
/// Passes when at every grid point both the real and imaginary parts of the
/// empirical mean of exp(i u . V X) are within 4 Monte Carlo standard errors
/// of the target.
pub fn charfn_check(
    e: &Ensemble,
    t: &ParamVector,
    u_grid: &[Vec<f64>],
    n_samples: usize,
    rng: &RngStream,
) -> Result<TestReport> {
    let d = require_square_matching(e, t)?;
    require_strictly_positive(t)?;
    for u in u_grid {
        if u.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "grid point has length {}, expected {d}",
                u.len()
            )));
        }
    }
    let vx: Vec<Vec<f64>> = collect_results(par_samples(&rng.derive(0), n_samples, |_, s| {
        let v = sample_gamma_vector(t, s)?;
        let x = e.sample(s)?;
        vec_mat_product(v.entries(), &x)
    }))?;

    let nf = n_samples as f64;
    let mut details = std::collections::BTreeMap::new();
    let mut max_z = 0.0f64;
    for (p, u) in u_grid.iter().enumerate() {
        let mut sum_re = 0.0;
        let mut sum_im = 0.0;
        let mut sumsq_re = 0.0;
        let mut sumsq_im = 0.0;
        for w in &vx {
            let dot: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
            let (sin, cos) = dot.sin_cos();
            sum_re += cos;
            sum_im += sin;
            sumsq_re += cos * cos;
            sumsq_im += sin * sin;
        }
        let mean_re = sum_re / nf;
        let mean_im = sum_im / nf;
        let se_re = (((sumsq_re - nf * mean_re * mean_re).max(0.0) / (nf - 1.0)) / nf).sqrt();
        let se_im = (((sumsq_im - nf * mean_im * mean_im).max(0.0) / (nf - 1.0)) / nf).sqrt();

        let target = u
            .iter()
            .zip(t.entries())
            .map(|(&uj, &tj)| Complex64::new(1.0, -uj).powf(-tj))
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);

        let z_of = |diff: f64, se: f64| {
            if se > 0.0 {
                diff.abs() / se
            } else if diff.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let z_re = z_of(mean_re - target.re, se_re);
        let z_im = z_of(mean_im - target.im, se_im);
        max_z = max_z.max(z_re).max(z_im);
        let label = p + 1;
        details.insert(format!("z_re_{label}"), z_re);
        details.insert(format!("z_im_{label}"), z_im);
        details.insert(format!("target_re_{label}"), target.re);
        details.insert(format!("target_im_{label}"), target.im);
    }
    Ok(TestReport {
        name: "charfn".into(),
        statistic: max_z,
        threshold_or_pvalue: MOMENT_Z_THRESHOLD,
        n: vec![n_samples],
        seed: rng.ids().to_vec(),
        pass: max_z <= MOMENT_Z_THRESHOLD,
        details,
    })
}

/// A deterministic 5-point grid of frequency vectors for `charfn_check`.
/// For d = 3 it contains (0.5, -0.3, 0.2) exactly.
pub fn default_u_grid(d: usize) -> Vec<Vec<f64>> {
    let base = [0.5, -0.3, 0.2];
    let cyclic: Vec<f64> = (0..d).map(|j| base[j % 3]).collect();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let alternating: Vec<f64> = (0..d)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * 0.6 / (j + 1) as f64
        })
        .collect();
    vec![
        vec![0.0; d],
        cyclic,
        e1,
        vec![0.3; d],
        alternating,
    ]
}
