//! Experiment configuration files (TOML, unknown keys rejected).

use std::path::{Path, PathBuf};

use mcx_core::arithmetic::liouville_alpha;
use mcx_core::iet::{parse_rational, GapMode};
use mcx_core::rng;
use mcx_core::scaling::{geometric_grid, Gauge};
use mcx_core::systems::{Isometry2, PwIsometry, LAMBDA_INFINITY};
use mcx_core::{ConjugacySpec, IetSpec, MapRule, MeasureSpec, SystemDescriptor};
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BkSeries,
    ComplexityCurve,
    Exponents,
    IetScan,
    Appendix,
    EntranceTime,
    ConjugacyCheck,
    PesinCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BkSeries => "bk_series",
            Self::ComplexityCurve => "complexity_curve",
            Self::Exponents => "exponents",
            Self::IetScan => "iet_scan",
            Self::Appendix => "appendix",
            Self::EntranceTime => "entrance_time",
            Self::ConjugacyCheck => "conjugacy_check",
            Self::PesinCheck => "pesin_check",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub system: SystemConfig,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: String,
    pub gamma: Option<f64>,
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
    /// IET lengths as decimals or `"p/q"` strings.
    pub lengths: Option<Vec<toml::Value>>,
    pub permutation: Option<Vec<usize>>,
    /// Uniform perturbation of every IET length but the last, drawn from the seed.
    pub jitter: Option<f64>,
    pub alpha: Option<f64>,
    /// Number of series terms for the appendix rotation number.
    pub alpha_terms: Option<usize>,
    pub beta: Option<f64>,
    #[serde(default)]
    pub factorized: bool,
    pub atoms: Option<Vec<Vec<[f64; 2]>>>,
    pub isometries: Option<Vec<Isometry2>>,
    /// `"lebesgue"` or `"empirical"`.
    pub measure: Option<String>,
    pub transient: Option<usize>,
    pub conjugacy: Option<ConjugacySpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<usize>),
    Geometric { min: usize, max: usize, ratio: Option<f64> },
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<usize>, RunError> {
        match self {
            GridSpec::List(v) => {
                if v.is_empty() || v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(RunError::Validation("params.n_grid must be strictly increasing".into()));
                }
                Ok(v.clone())
            }
            GridSpec::Geometric { min, max, ratio } => {
                Ok(geometric_grid(*min, *max, ratio.unwrap_or(std::f64::consts::SQRT_2))?)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum RadiusSpec {
    List(Vec<f64>),
    Geometric { min: f64, max: f64, count: usize },
}

impl RadiusSpec {
    pub fn values(&self) -> Result<Vec<f64>, RunError> {
        let v = match self {
            RadiusSpec::List(v) => v.clone(),
            RadiusSpec::Geometric { min, max, count } => {
                if !(*min > 0.0 && min < max && *count >= 2) {
                    return Err(RunError::Validation("params.radii needs 0 < min < max and count >= 2".into()));
                }
                let step = (max / min).ln() / (*count - 1) as f64;
                (0..*count).map(|i| max * (-(i as f64) * step).exp()).collect()
            }
        };
        if v.len() < 2 || v.iter().any(|r| !(*r > 0.0)) {
            return Err(RunError::Validation("params.radii needs at least two positive radii".into()));
        }
        Ok(v)
    }
}

/// Measure estimator for Brin–Katok series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BkScheme {
    /// One sample of the ε-ball (or of the measure) for the whole grid.
    #[default]
    Plain,
    /// Successively smaller proposal boxes; Lebesgue systems only.
    Nested,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub epsilon: Option<Vec<f64>>,
    pub eps_prime: Option<f64>,
    pub n_grid: Option<GridSpec>,
    pub samples: Option<usize>,
    pub gauges: Option<Vec<String>>,
    pub window: Option<usize>,
    /// Explicit start points.
    pub start: Option<Vec<Vec<f64>>>,
    /// Number of seeded typical start points, used when `start` is absent.
    pub starts: Option<usize>,
    pub target: Option<Vec<f64>>,
    pub radii: Option<RadiusSpec>,
    pub horizon: Option<u64>,
    pub n_max: Option<usize>,
    pub gap_mode: Option<GapMode>,
    pub p_floor: Option<f64>,
    pub approach_alphas: Option<Vec<f64>>,
    pub approach_n_max: Option<usize>,
    /// Appendix: depth at which the ratio is read off.
    pub probe_n: Option<usize>,
    /// Appendix: depth range `[lo, hi)` for the minimum ratio.
    pub min_range: Option<[usize; 2]>,
    pub precision_bits: Option<u64>,
    pub type_range: Option<[u64; 2]>,
    pub orientations: Option<usize>,
    pub probes: Option<usize>,
    /// Also run the series at the image point `T(x)`.
    #[serde(default)]
    pub invariance: bool,
    #[serde(default)]
    pub scheme: BkScheme,
    pub min_occupancy: Option<f64>,
    pub max_pairs: Option<usize>,
}

fn missing(field: &str, kind: &str) -> RunError {
    RunError::Validation(format!("missing field `{field}` required for {kind}"))
}

impl SystemConfig {
    fn need<T: Copy>(&self, v: Option<T>, field: &str) -> Result<T, RunError> {
        v.ok_or_else(|| missing(&format!("system.{field}"), &self.kind))
    }

    fn iet_spec(&self, seed: u64) -> Result<IetSpec, RunError> {
        let raw = self.lengths.as_ref().ok_or_else(|| missing("system.lengths", &self.kind))?;
        let perm = self.permutation.as_ref().ok_or_else(|| missing("system.permutation", &self.kind))?;
        let strings: Vec<Option<String>> = raw.iter().map(|v| v.as_str().map(str::to_string)).collect();
        if strings.iter().all(Option::is_some) && self.jitter.is_none() {
            let exact = strings.into_iter().map(|s| parse_rational(&s.unwrap())).collect::<Result<Vec<_>, _>>()?;
            return Ok(IetSpec::from_rationals(exact, perm)?);
        }
        let mut lengths: Vec<f64> = raw
            .iter()
            .map(|v| match v {
                toml::Value::Float(f) => Ok(*f),
                toml::Value::Integer(i) => Ok(*i as f64),
                toml::Value::String(s) => {
                    let r = parse_rational(s)?;
                    Ok(r.to_f64().unwrap_or(f64::NAN))
                }
                _ => Err(RunError::Validation("system.lengths entries must be numbers or \"p/q\" strings".into())),
            })
            .collect::<Result<_, RunError>>()?;
        if let Some(j) = self.jitter {
            let mut r = rng::sequential(seed, rng::stream::TOY);
            let k = lengths.len();
            for l in &mut lengths[..k - 1] {
                *l += r.gen::<f64>() * j;
            }
            lengths[k - 1] = 1.0 - lengths[..k - 1].iter().sum::<f64>();
        }
        Ok(IetSpec::new(lengths, perm)?)
    }

    /// Builds the descriptor; `seed` drives any randomized parameters.
    pub fn build(&self, seed: u64) -> Result<SystemDescriptor, RunError> {
        let rule = match self.kind.as_str() {
            "rotation" => MapRule::Rotation { gamma: self.need(self.gamma, "gamma")? },
            "doubling" => MapRule::Doubling,
            "identity" => MapRule::Identity { dim: self.dim.unwrap_or(1) },
            "logistic" => MapRule::Logistic { lambda: self.lambda.unwrap_or(LAMBDA_INFINITY) },
            "iet" => MapRule::Iet(self.iet_spec(seed)?),
            "casati_prosen" => MapRule::CasatiProsen {
                alpha: self.need(self.alpha, "alpha")?,
                beta: self.need(self.beta, "beta")?,
                factorized: self.factorized,
            },
            "appendix_torus" => {
                let alpha = match (self.alpha, self.alpha_terms) {
                    (Some(a), None) => a,
                    (None, Some(k)) => liouville_alpha(k, 128)?.to_f64(),
                    (None, None) => return Err(missing("system.alpha_terms", &self.kind)),
                    (Some(_), Some(_)) => {
                        return Err(RunError::Validation("give only one of system.alpha, system.alpha_terms".into()))
                    }
                };
                MapRule::AppendixTorus { alpha }
            }
            "pw_isometry_2d" => {
                let atoms = self.atoms.clone().ok_or_else(|| missing("system.atoms", &self.kind))?;
                let isos = self.isometries.clone().ok_or_else(|| missing("system.isometries", &self.kind))?;
                MapRule::PwIsometry2d(PwIsometry::new(atoms, isos)?)
            }
            other => return Err(RunError::Validation(format!("unknown system kind `{other}`"))),
        };
        let default_measure = if matches!(rule, MapRule::Logistic { .. }) { "empirical" } else { "lebesgue" };
        let measure = match self.measure.as_deref().unwrap_or(default_measure) {
            "lebesgue" => MeasureSpec::Lebesgue,
            "empirical" => MeasureSpec::Empirical { transient: self.transient.unwrap_or(10_000) },
            other => return Err(RunError::Validation(format!("unknown measure `{other}`"))),
        };
        let mut sys = SystemDescriptor::new(rule, measure);
        if let Some(phi) = self.conjugacy {
            sys = sys.conjugated(phi);
        }
        Ok(sys)
    }
}

impl Params {
    pub fn epsilons(&self, kind: &str) -> Result<Vec<f64>, RunError> {
        let e = self.epsilon.clone().ok_or_else(|| missing("params.epsilon", kind))?;
        if e.is_empty() {
            return Err(missing("params.epsilon", kind));
        }
        Ok(e)
    }

    pub fn grid(&self, kind: &str) -> Result<Vec<usize>, RunError> {
        self.n_grid.as_ref().ok_or_else(|| missing("params.n_grid", kind))?.values()
    }

    pub fn samples(&self, kind: &str) -> Result<usize, RunError> {
        self.samples.ok_or_else(|| missing("params.samples", kind))
    }

    pub fn eps_prime(&self, kind: &str) -> Result<f64, RunError> {
        self.eps_prime.ok_or_else(|| missing("params.eps_prime", kind))
    }

    pub fn gauges(&self) -> Result<Vec<Gauge>, RunError> {
        match &self.gauges {
            None => Ok(vec![Gauge::Identity]),
            Some(g) => Ok(g.iter().map(|s| Gauge::parse(s)).collect::<Result<_, _>>()?),
        }
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or(mcx_core::scaling::DEFAULT_WINDOW)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), RunError> {
        let bytes = std::fs::read(path).map_err(|e| RunError::Validation(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| RunError::Validation(e.to_string()))?;
        let mut cfg: Self = toml::from_str(text).map_err(|e| RunError::Validation(e.to_string()))?;
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok((cfg, bytes))
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.name())
    }
}
