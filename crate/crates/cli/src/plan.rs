//! Typed, validated parameters per experiment kind, built before any compute.

use mcx_core::covering::CurveOptions;
use mcx_core::exponents::{ExponentOptions, InscribedOptions};
use mcx_core::iet::{GapMode, P_TILDE_FLOOR};
use mcx_core::scaling::Gauge;
use mcx_core::{IetSpec, MapRule, Point, SystemDescriptor};

use crate::config::{BkScheme, ExperimentConfig, ExperimentKind, Params};
use crate::RunError;

#[derive(Clone, Debug)]
pub struct BkPlan {
    pub starts: Vec<Point>,
    pub eps: Vec<f64>,
    pub gauges: Vec<Gauge>,
    pub grid: Vec<usize>,
    pub samples: usize,
    pub window: usize,
    /// Radii for the piecewise-isometry dimension bound.
    pub radii: Option<Vec<f64>>,
    pub invariance: bool,
    pub scheme: BkScheme,
}

#[derive(Clone, Debug)]
pub struct CurvePlan {
    pub eps: Vec<f64>,
    pub eps_prime: f64,
    pub gauges: Vec<Gauge>,
    pub grid: Vec<usize>,
    pub samples: usize,
    pub window: usize,
    pub options: CurveOptions,
    /// Start point for the companion Brin–Katok series.
    pub start: Option<Point>,
    pub scheme: BkScheme,
}

#[derive(Clone, Debug)]
pub struct ExponentPlan {
    pub starts: Vec<Point>,
    pub eps: Vec<f64>,
    pub gauge: Gauge,
    pub grid: Vec<usize>,
    pub samples: usize,
    pub options: ExponentOptions,
}

#[derive(Clone, Debug)]
pub struct IetPlan {
    pub iet: IetSpec,
    pub n_max: usize,
    pub mode: GapMode,
    pub floor: f64,
    pub approach: Option<(Point, Vec<f64>, usize)>,
    pub curve: Option<CurvePlan>,
}

#[derive(Clone, Debug)]
pub struct AppendixPlan {
    pub alpha_terms: usize,
    pub starts: Vec<Point>,
    pub eps: f64,
    pub grid: Vec<usize>,
    pub samples: usize,
    pub probe_n: usize,
    pub min_range: [usize; 2],
    pub precision_bits: u64,
    pub type_range: [u64; 2],
}

#[derive(Clone, Debug)]
pub struct EntrancePlan {
    pub start: Point,
    pub target: Point,
    pub radii: Vec<f64>,
    pub horizon: u64,
}

#[derive(Clone, Debug)]
pub enum Task {
    Bk(BkPlan),
    Curve(CurvePlan),
    Exponents(ExponentPlan),
    Pesin(ExponentPlan),
    Iet(IetPlan),
    Appendix(AppendixPlan),
    Entrance(EntrancePlan),
    Conjugacy { plain: SystemDescriptor, curve: CurvePlan },
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub system: SystemDescriptor,
    pub task: Task,
}

fn need<T: Clone>(v: &Option<T>, field: &str, kind: &str) -> Result<T, RunError> {
    v.clone().ok_or_else(|| RunError::Validation(format!("missing field `params.{field}` required for {kind}")))
}

fn point(sys: &SystemDescriptor, c: &[f64], field: &str) -> Result<Point, RunError> {
    if c.len() != sys.dim() {
        return Err(RunError::Validation(format!(
            "params.{field} has {} coordinates, system `{}` has dimension {}",
            c.len(),
            sys.name,
            sys.dim()
        )));
    }
    let p = Point::from_slice(c);
    let p = if sys.snaps_to_dyadic_grid() { p.snapped() } else { p };
    sys.check(&p)?;
    Ok(p)
}

/// Explicit start points, or `starts` seeded typical points of the measure.
fn starts(sys: &SystemDescriptor, p: &Params, seed: u64, kind: &str) -> Result<Vec<Point>, RunError> {
    match (&p.start, p.starts) {
        (Some(list), None) => list.iter().map(|c| point(sys, c, "start")).collect(),
        (None, Some(k)) if k > 0 => Ok(sys.sample_measure(k, seed.wrapping_add(mcx_core::rng::stream::START))?),
        (Some(_), Some(_)) => Err(RunError::Validation("give only one of params.start, params.starts".into())),
        _ => Err(RunError::Validation(format!("missing field `params.start` required for {kind}"))),
    }
}

fn scheme(p: &Params, sys: &SystemDescriptor) -> Result<BkScheme, RunError> {
    if p.scheme == BkScheme::Nested && !sys.is_lebesgue() {
        return Err(RunError::Validation("params.scheme = \"nested\" needs a system with Lebesgue measure".into()));
    }
    Ok(p.scheme)
}

fn curve_plan(p: &Params, sys: &SystemDescriptor, kind: &str) -> Result<CurvePlan, RunError> {
    let mut options = CurveOptions::default();
    if let Some(o) = p.min_occupancy {
        options.min_occupancy = o;
    }
    if let Some(m) = p.max_pairs {
        options.max_pairs = m;
    }
    let start = match &p.start {
        None => None,
        Some(list) if list.len() == 1 => Some(point(sys, &list[0], "start")?),
        Some(_) => return Err(RunError::Validation(format!("params.start takes one point for {kind}"))),
    };
    Ok(CurvePlan {
        eps: p.epsilons(kind)?,
        eps_prime: p.eps_prime(kind)?,
        gauges: p.gauges()?,
        grid: p.grid(kind)?,
        samples: p.samples(kind)?,
        window: p.window(),
        options,
        start,
        scheme: scheme(p, sys)?,
    })
}

fn exponent_plan(p: &Params, sys: &SystemDescriptor, seed: u64, kind: &str) -> Result<ExponentPlan, RunError> {
    let gauges = p.gauges()?;
    if gauges.len() != 1 {
        return Err(RunError::Validation(format!("params.gauges takes exactly one gauge for {kind}")));
    }
    let mut inscribed = InscribedOptions::default();
    if let Some(o) = p.orientations {
        inscribed.orientations = o;
    }
    if let Some(pr) = p.probes {
        inscribed.probes = pr;
    }
    Ok(ExponentPlan {
        starts: starts(sys, p, seed, kind)?,
        eps: p.epsilons(kind)?,
        gauge: gauges[0],
        grid: p.grid(kind)?,
        samples: p.samples(kind)?,
        options: ExponentOptions { inscribed, window: p.window() },
    })
}

fn iet_of(sys: &SystemDescriptor) -> Result<IetSpec, RunError> {
    match &sys.rule {
        MapRule::Iet(iet) => Ok(iet.clone()),
        MapRule::Rotation { gamma } => Ok(IetSpec::rotation(*gamma)?),
        other => {
            Err(RunError::Validation(format!("iet_scan needs an iet or rotation system, got `{}`", other.kind_name())))
        }
    }
}

impl Plan {
    /// Validates the configuration and resolves every parameter; no dynamics are run
    /// beyond drawing seeded start points.
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        let seed = cfg.seed;
        let system = cfg.system.build(seed)?;
        let p = &cfg.params;
        let kind = cfg.kind.name();
        let task = match cfg.kind {
            ExperimentKind::BkSeries => Task::Bk(BkPlan {
                starts: starts(&system, p, seed, kind)?,
                eps: p.epsilons(kind)?,
                gauges: p.gauges()?,
                grid: p.grid(kind)?,
                samples: p.samples(kind)?,
                window: p.window(),
                radii: p.radii.as_ref().map(|r| r.values()).transpose()?,
                invariance: p.invariance,
                scheme: scheme(p, &system)?,
            }),
            ExperimentKind::ComplexityCurve => Task::Curve(curve_plan(p, &system, kind)?),
            ExperimentKind::Exponents => Task::Exponents(exponent_plan(p, &system, seed, kind)?),
            ExperimentKind::PesinCheck => Task::Pesin(exponent_plan(p, &system, seed, kind)?),
            ExperimentKind::IetScan => {
                let iet = iet_of(&system)?;
                let approach = match &p.approach_alphas {
                    None => None,
                    Some(alphas) => {
                        let start = need(&p.start, "start", kind)?;
                        if start.len() != 1 {
                            return Err(RunError::Validation("params.start takes one point for iet_scan".into()));
                        }
                        let n = need(&p.approach_n_max, "approach_n_max", kind)?;
                        Some((point(&system, &start[0], "start")?, alphas.clone(), n))
                    }
                };
                let curve = if p.epsilon.is_some() { Some(curve_plan(p, &system, kind)?) } else { None };
                Task::Iet(IetPlan {
                    iet,
                    n_max: need(&p.n_max, "n_max", kind)?,
                    mode: p.gap_mode.unwrap_or_default(),
                    floor: p.p_floor.unwrap_or(P_TILDE_FLOOR),
                    approach,
                    curve,
                })
            }
            ExperimentKind::Appendix => {
                let alpha_terms = cfg.system.alpha_terms.ok_or_else(|| {
                    RunError::Validation("missing field `system.alpha_terms` required for appendix".into())
                })?;
                let eps = p.epsilons(kind)?;
                if eps.len() != 1 {
                    return Err(RunError::Validation("params.epsilon takes one value for appendix".into()));
                }
                let probe_n = need(&p.probe_n, "probe_n", kind)?;
                let mut grid = p.grid(kind)?;
                if !grid.contains(&probe_n) {
                    grid.push(probe_n);
                    grid.sort_unstable();
                }
                Task::Appendix(AppendixPlan {
                    alpha_terms,
                    starts: starts(&system, p, seed, kind)?,
                    eps: eps[0],
                    grid,
                    samples: p.samples(kind)?,
                    probe_n,
                    min_range: need(&p.min_range, "min_range", kind)?,
                    precision_bits: p.precision_bits.unwrap_or(256),
                    type_range: p.type_range.unwrap_or([64, 100_000]),
                })
            }
            ExperimentKind::EntranceTime => {
                let start = need(&p.start, "start", kind)?;
                if start.len() != 1 {
                    return Err(RunError::Validation("params.start takes one point for entrance_time".into()));
                }
                Task::Entrance(EntrancePlan {
                    start: point(&system, &start[0], "start")?,
                    target: point(&system, &need(&p.target, "target", kind)?, "target")?,
                    radii: need(&p.radii, "radii", kind)?.values()?,
                    horizon: need(&p.horizon, "horizon", kind)?,
                })
            }
            ExperimentKind::ConjugacyCheck => {
                if system.conjugacy.is_none() {
                    return Err(RunError::Validation(
                        "missing field `system.conjugacy` required for conjugacy_check".into(),
                    ));
                }
                let plain =
                    SystemDescriptor { conjugacy: None, name: system.rule.kind_name().to_string(), ..system.clone() };
                Task::Conjugacy { curve: curve_plan(p, &plain, kind)?, plain }
            }
        };
        Ok(Self { name: cfg.name().to_string(), kind: cfg.kind, seed, system, task })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(text: &str) -> Result<Plan, RunError> {
        Plan::new(&toml::from_str::<ExperimentConfig>(text).unwrap())
    }

    const BK: &str = "kind = \"bk_series\"\n[params]\nepsilon = [0.05]\nn_grid = [2, 4]\nsamples = 1000\n";

    #[test]
    fn nested_scheme_needs_lebesgue() {
        let ok = format!("{BK}scheme = \"nested\"\nstart = [[0.3]]\n[system]\nkind = \"doubling\"\n");
        assert!(matches!(plan(&ok).unwrap().task, Task::Bk(BkPlan { scheme: BkScheme::Nested, .. })));
        let bad = format!("{BK}scheme = \"nested\"\nstarts = 2\n[system]\nkind = \"logistic\"\n");
        assert!(matches!(plan(&bad), Err(RunError::Validation(_))));
    }

    #[test]
    fn starts_are_exclusive_and_checked() {
        let both = format!("{BK}start = [[0.3]]\nstarts = 2\n[system]\nkind = \"doubling\"\n");
        assert!(plan(&both).is_err());
        let wrong_dim = format!("{BK}start = [[0.3, 0.4]]\n[system]\nkind = \"doubling\"\n");
        assert!(plan(&wrong_dim).unwrap_err().to_string().contains("dimension"));
        let seeded = format!("{BK}starts = 3\n[system]\nkind = \"doubling\"\n");
        let Task::Bk(a) = plan(&seeded).unwrap().task else { panic!() };
        let Task::Bk(b) = plan(&seeded).unwrap().task else { panic!() };
        assert_eq!(a.starts.len(), 3);
        assert_eq!(a.starts, b.starts);
    }

    #[test]
    fn appendix_grid_gains_the_probe_depth() {
        let text = "kind = \"appendix\"\n[system]\nkind = \"appendix_torus\"\nalpha_terms = 2\n[params]\n\
                    epsilon = [0.05]\nn_grid = [1000, 2000]\nsamples = 1000\nstarts = 2\nprobe_n = 1500\nmin_range = [1000, 2000]\n";
        let Task::Appendix(a) = plan(text).unwrap().task else { panic!() };
        assert_eq!(a.grid, vec![1000, 1500, 2000]);
        assert_eq!(a.alpha_terms, 2);
    }

    #[test]
    fn conjugacy_check_requires_a_conjugacy() {
        let text = "kind = \"conjugacy_check\"\n[system]\nkind = \"doubling\"\n[params]\nepsilon = [0.05]\n\
                    eps_prime = 0.1\nn_grid = [2, 4]\nsamples = 1000\n";
        assert!(plan(text).unwrap_err().to_string().contains("system.conjugacy"));
    }
}
