//! Experiment configuration: ensemble specs, JSON config files, and flag
//! parsing. Flags override config fields; the seed falls back to the
//! STOCHWALK_SEED environment variable and then to 0.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stochwalk::sampling::{cyclic_alpha, Ensemble};
use stochwalk::types::{ParamMatrix, StochasticMatrix, INPUT_TOL};

/// Errors that abort a run before any verdict is reached. All map to exit
/// code 2; statistical failures are reported in the output, not raised.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(stochwalk::Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<stochwalk::Error> for CliError {
    fn from(e: stochwalk::Error) -> Self {
        CliError::Core(e)
    }
}

/// Declarative ensemble description. It is echoed verbatim into every
/// report, so a run can be reproduced from its output alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    Cyclic {
        d: usize,
    },
    Leader {
        d: usize,
    },
    Identity {
        d: usize,
    },
    Dirichlet {
        alpha: Vec<Vec<f64>>,
    },
    ExplicitMixture {
        weights: Vec<f64>,
        matrices: Vec<Vec<Vec<f64>>>,
    },
    Composite {
        parts: Vec<EnsembleSpec>,
    },
}

impl EnsembleSpec {
    pub fn build(&self) -> Result<Ensemble, CliError> {
        let e = match self {
            EnsembleSpec::Cyclic { d } => Ensemble::cyclic(*d)?,
            EnsembleSpec::Leader { d } => Ensemble::leader(*d)?,
            EnsembleSpec::Identity { d } => Ensemble::identity(*d),
            EnsembleSpec::Dirichlet { alpha } => Ensemble::dirichlet(ParamMatrix::new(alpha)?)?,
            EnsembleSpec::ExplicitMixture { weights, matrices } => {
                if weights.len() != matrices.len() {
                    return Err(CliError::Usage(format!(
                        "explicit_mixture has {} weights for {} matrices",
                        weights.len(),
                        matrices.len()
                    )));
                }
                let mut parts = Vec::with_capacity(weights.len());
                for (w, raw) in weights.iter().zip(matrices) {
                    parts.push((*w, StochasticMatrix::validate(raw, INPUT_TOL)?));
                }
                Ensemble::mixture(parts)?
            }
            EnsembleSpec::Composite { parts } => {
                let built: Result<Vec<_>, _> = parts.iter().map(EnsembleSpec::build).collect();
                Ensemble::composite(built?)?
            }
        };
        Ok(e)
    }

    /// Row-parameter matrix for ensembles whose rows are independent
    /// Dirichlet draws; None when the ensemble has no such matrix.
    pub fn alpha(&self) -> Option<ParamMatrix> {
        match self {
            EnsembleSpec::Cyclic { d } => Some(cyclic_alpha(*d)),
            EnsembleSpec::Dirichlet { alpha } => ParamMatrix::new(alpha).ok(),
            _ => None,
        }
    }
}

/// Flag-shaped fields accepted in a JSON config document. Unknown fields are
/// rejected so typos fail loudly instead of silently running defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub level: Option<f64>,
    pub ensemble: Option<EnsembleSpec>,
    pub t: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub alpha: Option<Vec<Vec<f64>>>,
    pub frame: Option<Vec<Vec<f64>>>,
    pub replicates: Option<usize>,
    pub n: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_n: Option<usize>,
    pub max_m: Option<usize>,
    pub trials: Option<usize>,
    pub burn_in: Option<usize>,
    pub samples: Option<usize>,
    pub thin: Option<usize>,
    pub r: Option<usize>,
    pub what: Option<String>,
}

pub fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Comma-separated numbers or a JSON array.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    let t = s.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).map_err(|e| CliError::Usage(format!("bad list {t:?}: {e}")));
    }
    t.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number {:?} in {t:?}", p.trim())))
        })
        .collect()
}

/// Matrix rows as inline JSON, `file:<path>` to a JSON document, or the
/// `ones<R>x<C>` shorthand for an all-ones matrix.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let t = s.trim();
    if let Some(path) = t.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("read {path}: {e}")))?;
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("matrix in {path}: {e}")));
    }
    if let Some(dims) = t.strip_prefix("ones") {
        if let Some((r, c)) = dims.split_once('x') {
            if let (Ok(r), Ok(c)) = (r.parse::<usize>(), c.parse::<usize>()) {
                return Ok(vec![vec![1.0; c]; r]);
            }
        }
    }
    serde_json::from_str(t).map_err(|e| CliError::Usage(format!("bad matrix {t:?}: {e}")))
}

/// Ensemble from `--ensemble` and its companion flags. `file:<path>` loads a
/// serialized spec; the named kinds take `--d` or `--a`.
pub fn ensemble_from_flags(
    kind: &str,
    d: Option<usize>,
    a: Option<&str>,
) -> Result<EnsembleSpec, CliError> {
    let k = kind.trim();
    if let Some(path) = k.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("read {path}: {e}")))?;
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("ensemble spec in {path}: {e}")));
    }
    let need_d = || d.ok_or_else(|| CliError::Usage(format!("--ensemble {k} needs --d")));
    match k {
        "cyclic" => Ok(EnsembleSpec::Cyclic { d: need_d()? }),
        "leader" => Ok(EnsembleSpec::Leader { d: need_d()? }),
        "identity" => Ok(EnsembleSpec::Identity { d: need_d()? }),
        "dirichlet" => {
            let a = a.ok_or_else(|| CliError::Usage("--ensemble dirichlet needs --a".into()))?;
            Ok(EnsembleSpec::Dirichlet {
                alpha: parse_matrix(a)?,
            })
        }
        other => Err(CliError::Usage(format!(
            "unknown ensemble {other:?} (expected cyclic, leader, identity, dirichlet, or file:<path>)"
        ))),
    }
}

/// Precedence: flag, then config field, then STOCHWALK_SEED, then 0.
pub fn resolve_seed(flag: Option<u64>, cfg: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(cfg) {
        return Ok(s);
    }
    match std::env::var("STOCHWALK_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("STOCHWALK_SEED must be an unsigned integer, got {v:?}"))
        }),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_parse_from_both_syntaxes() {
        assert_eq!(parse_list("2,2,2").unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(parse_list(" 0.5, 1 ").unwrap(), vec![0.5, 1.0]);
        assert_eq!(parse_list("[1.5,2.5]").unwrap(), vec![1.5, 2.5]);
        assert!(parse_list("1,x").is_err());
    }

    #[test]
    fn matrix_shorthand_and_json() {
        assert_eq!(parse_matrix("ones2x3").unwrap(), vec![vec![1.0; 3]; 2]);
        assert_eq!(
            parse_matrix("[[1,2],[3,1]]").unwrap(),
            vec![vec![1.0, 2.0], vec![3.0, 1.0]]
        );
        assert!(parse_matrix("onesAxB").is_err());
        assert!(parse_matrix("file:/no/such/file.json").is_err());
    }

    #[test]
    fn ensemble_specs_build_and_roundtrip() {
        let spec = ensemble_from_flags("cyclic", Some(3), None).unwrap();
        let e = spec.build().unwrap();
        assert_eq!(e.dim().unwrap(), 3);
        let text = serde_json::to_string(&spec).unwrap();
        let back: EnsembleSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap().dim().unwrap(), 3);

        assert!(ensemble_from_flags("cyclic", None, None).is_err());
        assert!(ensemble_from_flags("dirichlet", Some(2), None).is_err());
        assert!(ensemble_from_flags("nope", Some(2), None).is_err());

        let mix: EnsembleSpec = serde_json::from_str(
            r#"{"kind":"explicit_mixture","weights":[1.0],"matrices":[[[1.0,0.0],[0.0,1.0]]]}"#,
        )
        .unwrap();
        assert_eq!(mix.build().unwrap().dim().unwrap(), 2);
    }

    #[test]
    fn cyclic_spec_exposes_its_alpha_matrix() {
        let spec = EnsembleSpec::Cyclic { d: 3 };
        let am = spec.alpha().unwrap();
        assert_eq!(am.get(0, 0), 1.0);
        assert_eq!(am.get(0, 1), 1.0);
        assert_eq!(am.get(0, 2), 0.0);
        assert!(EnsembleSpec::Leader { d: 3 }.alpha().is_none());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let err = serde_json::from_str::<FileConfig>(r#"{"replcates": 10}"#);
        assert!(err.is_err());
        let ok: FileConfig = serde_json::from_str(r#"{"replicates": 10, "seed": 7}"#).unwrap();
        assert_eq!(ok.replicates, Some(10));
        assert_eq!(ok.seed, Some(7));
    }

    #[test]
    fn seed_precedence_without_env() {
        assert_eq!(resolve_seed(Some(5), Some(9)).unwrap(), 5);
        assert_eq!(resolve_seed(None, Some(9)).unwrap(), 9);
    }
}
