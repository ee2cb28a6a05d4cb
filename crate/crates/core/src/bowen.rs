//! Bowen sets, Monte-Carlo estimates of their measure and Brin–Katok ratio series.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scaling::{fit_slope, tail_proxies, Gauge, SlopeFit, TailProxies};
use crate::systems::{CoordKind, DiscontinuitySet, Point, SystemDescriptor};

/// Minimum sample size accepted by the measure estimators.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BowenQuery {
    pub x: Point,
    pub n: usize,
    pub eps: f64,
}

impl BowenQuery {
    pub fn new(x: Point, n: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(invalid("epsilon", format!("{eps} must lie in (0, 1/2)")));
        }
        Ok(Self { x, n, eps })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Fraction of a sample of the invariant measure.
    Global,
    /// Conditional fraction of a uniform sample of the ε-cube, times its volume.
    BallImportance,
    /// Fraction of a uniform sample of an oriented box enclosing the companions
    /// of a shallower depth, times the box volume.
    Nested,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub count: usize,
    pub samples: usize,
    pub scheme: Scheme,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// No companion was found; raise `M` or lower `n`.
    pub underflow: bool,
}

impl MeasureEstimate {
    fn new(count: usize, samples: usize, scale: f64, scheme: Scheme) -> Self {
        let (lo, hi) = wilson(count, samples);
        Self {
            value: scale * count as f64 / samples as f64,
            count,
            samples,
            scheme,
            ci_lo: scale * lo,
            ci_hi: scale * hi,
            underflow: count == 0,
        }
    }
}

/// Wilson score interval at 95% for `k` successes out of `m`.
pub fn wilson(k: usize, m: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054_f64;
    let (k, m) = (k as f64, m as f64);
    let p = k / m;
    let denom = 1.0 + z * z / m;
    let centre = (p + z * z / (2.0 * m)) / denom;
    let half = z * (p * (1.0 - p) / m + z * z / (4.0 * m * m)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Membership of `y` in `B(n, x, eps)` under the sup-over-time metric.
pub fn bowen_contains(sys: &SystemDescriptor, q: &BowenQuery, y: &Point) -> Result<bool> {
    Ok(sys.sup_orbit_distance(&q.x, y, q.n, q.eps)? <= q.eps)
}

/// Uniform sample of the sup-ball `B(x, eps)` clipped to the domain, with its volume.
pub fn ball_sample(sys: &SystemDescriptor, x: &Point, eps: f64, m: usize, seed: u64) -> (Vec<Point>, f64) {
    let mut bounds = Vec::with_capacity(x.dim());
    let mut volume = 1.0;
    for (i, kind) in sys.metric.coords.iter().enumerate() {
        let c = x.coords()[i];
        let (lo, hi) = match kind {
            CoordKind::Circle => (c - eps, c + eps),
            CoordKind::Interval => ((c - eps).max(0.0), (c + eps).min(1.0)),
        };
        volume *= hi - lo;
        bounds.push((lo, hi, *kind));
    }
    let snap = sys.snaps_to_dyadic_grid();
    let pts = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::indexed(seed, rng::stream::BALL, i);
            let mut c = [0.0; 2];
            for (k, &(lo, hi, kind)) in bounds.iter().enumerate() {
                let v = lo + (hi - lo) * r.gen::<f64>();
                c[k] = match kind {
                    CoordKind::Circle => v - v.floor(),
                    CoordKind::Interval => v.clamp(0.0, 1.0),
                };
                if c[k] >= 1.0 && kind == CoordKind::Circle {
                    c[k] = 0.0;
                }
            }
            let p = Point::from_slice(&c[..bounds.len()]);
            if snap {
                p.snapped()
            } else {
                p
            }
        })
        .collect();
    (pts, volume)
}

/// Separation time of every sample point from the orbit of `x`, capped at `n_max + 1`.
pub fn separation_times(
    sys: &SystemDescriptor,
    x: &Point,
    eps: f64,
    n_max: usize,
    sample: &[Point],
) -> Result<Vec<usize>> {
    let orbit = sys.orbit_segment(x, n_max)?;
    Ok(sample.par_iter().map(|y| sys.separation_time(&orbit, y, eps)).collect())
}

/// Counts of separation times exceeding each grid value.
pub(crate) fn survivor_counts(times: &[usize], grid: &[usize]) -> Vec<usize> {
    let cap = grid.last().copied().unwrap_or(0) + 2;
    let mut hist = vec![0usize; cap + 1];
    for &s in times {
        hist[s.min(cap)] += 1;
    }
    // above[t] = #{s >= t}
    let mut above = vec![0usize; cap + 2];
    for t in (0..=cap).rev() {
        above[t] = above[t + 1] + hist[t];
    }
    grid.iter().map(|&n| above[n + 1]).collect()
}

fn scheme_for(sys: &SystemDescriptor) -> Scheme {
    if sys.is_lebesgue() {
        Scheme::BallImportance
    } else {
        Scheme::Global
    }
}

/// Sample and scale used for the estimate around `x`.
fn estimation_sample(
    sys: &SystemDescriptor,
    x: &Point,
    eps: f64,
    m: usize,
    seed: u64,
) -> Result<(Vec<Point>, f64, Scheme)> {
    sys.check(x)?;
    if m < MIN_SAMPLES {
        return Err(invalid("M", format!("sample size {m} is below {MIN_SAMPLES}")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid("epsilon", format!("{eps} must lie in (0, 1/2)")));
    }
    Ok(match scheme_for(sys) {
        Scheme::BallImportance | Scheme::Nested => {
            let (pts, vol) = ball_sample(sys, x, eps, m, seed);
            (pts, vol, Scheme::BallImportance)
        }
        Scheme::Global => (sys.sample_measure(m, seed)?, 1.0, Scheme::Global),
    })
}

pub fn bowen_measure(sys: &SystemDescriptor, q: &BowenQuery, m: usize, seed: u64) -> Result<MeasureEstimate> {
    let (sample, scale, scheme) = estimation_sample(sys, &q.x, q.eps, m, seed)?;
    let times = separation_times(sys, &q.x, q.eps, q.n, &sample)?;
    let k = times.iter().filter(|&&s| s > q.n).count();
    Ok(MeasureEstimate::new(k, m, scale, scheme))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BkPoint {
    pub n: usize,
    pub f_of_n: f64,
    pub estimate: MeasureEstimate,
    /// `-log₂(μ̂(B(n,x,ε)) / μ̂(B(x,ε))) / f(n)`; `None` when censored.
    pub ratio: Option<f64>,
    /// `-log₂ μ̂(B(n,x,ε)) / f(n)` without the ball normalization.
    pub raw_ratio: Option<f64>,
    /// Proposal level of the estimate; 0 is the ε-cube or the global sample.
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BkSeries {
    pub gauge: Gauge,
    pub eps: f64,
    /// Estimate of the plain ε-ball `B(x, ε)`.
    pub ball: MeasureEstimate,
    pub points: Vec<BkPoint>,
}

impl BkSeries {
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.ratio).collect()
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f_of_n).collect()
    }

    /// `-log₂(μ̂(B(n))/μ̂(B(x,ε)))` per grid point, NaN when censored.
    pub fn decay_bits(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| if p.estimate.count == 0 { f64::NAN } else { -(p.estimate.value / self.ball.value).log2() })
            .collect()
    }

    /// Least-squares slope of the decay against `f(n)` over all uncensored points.
    pub fn slope(&self) -> Result<SlopeFit> {
        fit_slope(&self.f_values(), &self.decay_bits(), 0..self.points.len())
    }

    /// Slope over the last `w` grid points.
    pub fn tail_slope(&self, w: usize) -> Result<SlopeFit> {
        let len = self.points.len();
        fit_slope(&self.f_values(), &self.decay_bits(), len.saturating_sub(w)..len)
    }

    pub fn tail(&self, w: usize) -> Result<TailProxies> {
        tail_proxies(&self.ratios(), w)
    }

    pub fn censored(&self) -> usize {
        self.points.iter().filter(|p| p.ratio.is_none()).count()
    }
}

/// Brin–Katok ratio series on one fixed sample, so companion sets are nested in `n`.
pub fn bk_series(
    sys: &SystemDescriptor,
    x: &Point,
    eps: f64,
    gauge: Gauge,
    n_grid: &[usize],
    m: usize,
    seed: u64,
) -> Result<BkSeries> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid", "grid must be non-empty and strictly increasing"));
    }
    let (sample, scale, scheme) = estimation_sample(sys, x, eps, m, seed)?;
    let n_max = *n_grid.last().unwrap();
    let times = separation_times(sys, x, eps, n_max, &sample)?;
    let ball_count = times.iter().filter(|&&s| s > 0).count();
    if ball_count == 0 {
        return Err(Error::Resolution(format!("no sample point lies within {eps} of the centre; raise M")));
    }
    let ball = MeasureEstimate::new(ball_count, m, scale, scheme);
    let counts = survivor_counts(&times, n_grid);
    let points = n_grid
        .iter()
        .zip(counts)
        .map(|(&n, k)| bk_point(n, MeasureEstimate::new(k, m, scale, scheme), gauge, &ball, 0))
        .collect();
    Ok(BkSeries { gauge, eps, ball, points })
}

fn bk_point(n: usize, estimate: MeasureEstimate, gauge: Gauge, ball: &MeasureEstimate, level: usize) -> BkPoint {
    let f = gauge.eval(n as f64);
    let usable = estimate.count > 0 && f > 0.0;
    BkPoint {
        n,
        f_of_n: f,
        estimate,
        ratio: usable.then(|| -(estimate.value / ball.value).log2() / f),
        raw_ratio: usable.then(|| -estimate.value.log2() / f),
        level,
    }
}

/// A level hands over to a smaller box once its companions drop below this fraction of the sample.
pub const NESTED_SWITCH_FRACTION: f64 = 1.0 / 32.0;
/// Fewest companions a box is fitted to.
pub const NESTED_MIN_CLOUD: usize = 64;
const NESTED_GROW: f64 = 2.0;
/// Companions of the next level must stay within this fraction of the box half-widths.
const NESTED_EDGE: f64 = 0.75;
const NESTED_RETRIES: usize = 4;

/// Oriented box in the displacement chart centred at the base point.
#[derive(Clone, Copy, Debug)]
struct LevelBox {
    centre: [f64; 2],
    axes: [[f64; 2]; 2],
    half: [f64; 2],
    dim: usize,
}

impl LevelBox {
    fn around(cloud: &[[f64; 2]], dim: usize, grow: f64) -> Self {
        let axes = if dim == 2 {
            let a = crate::exponents::min_enclosing_sides(cloud).angle.unwrap_or(0.0);
            [[a.cos(), a.sin()], [-a.sin(), a.cos()]]
        } else {
            [[1.0, 0.0], [0.0, 1.0]]
        };
        let mut centre = [0.0; 2];
        let mut half = [0.0; 2];
        for k in 0..dim {
            let (lo, hi) = cloud
                .iter()
                .map(|d| d[0] * axes[k][0] + d[1] * axes[k][1])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let mid = 0.5 * (lo + hi);
            half[k] = (grow * 0.5 * (hi - lo)).max(f64::EPSILON);
            centre[0] += mid * axes[k][0];
            centre[1] += mid * axes[k][1];
        }
        Self { centre, axes, half, dim }
    }

    fn volume(&self) -> f64 {
        self.half[..self.dim].iter().map(|h| 2.0 * h).product()
    }

    fn draw(&self, r: &mut impl Rng) -> [f64; 2] {
        let mut d = self.centre;
        for k in 0..self.dim {
            let u = r.gen_range(-1.0..1.0) * self.half[k];
            d[0] += u * self.axes[k][0];
            d[1] += u * self.axes[k][1];
        }
        d
    }

    /// Largest box coordinate of `d`, in units of the half-widths.
    fn reach(&self, d: &[f64; 2]) -> f64 {
        let rel = [d[0] - self.centre[0], d[1] - self.centre[1]];
        (0..self.dim)
            .map(|k| (rel[0] * self.axes[k][0] + rel[1] * self.axes[k][1]).abs() / self.half[k])
            .fold(0.0, f64::max)
    }
}

/// `x + d` in the domain, `None` when it leaves an interval coordinate.
fn displaced(sys: &SystemDescriptor, x: &Point, d: &[f64; 2]) -> Option<Point> {
    let mut c = [0.0; 2];
    for (i, kind) in sys.metric.coords.iter().enumerate() {
        let v = x.coords()[i] + d[i];
        c[i] = match kind {
            CoordKind::Circle => crate::systems::wrap(v),
            CoordKind::Interval if (0.0..=1.0).contains(&v) => v,
            CoordKind::Interval => return None,
        };
    }
    let p = Point::from_slice(&c[..sys.dim()]);
    Some(if sys.snaps_to_dyadic_grid() { p.snapped() } else { p })
}

type Tagged = Vec<(usize, [f64; 2])>;

struct LevelCtx<'a> {
    sys: &'a SystemDescriptor,
    x: &'a Point,
    orbit: &'a [Point],
    eps: f64,
    m: usize,
    seed: u64,
}

/// Fresh sample of a box around `cloud`, widened until the depth-`n` companions stay clear of its edges.
fn next_level(ctx: &LevelCtx, n: usize, cloud: &[[f64; 2]], level: u64, prev_volume: f64) -> Option<(f64, Tagged)> {
    let mut grow = NESTED_GROW;
    for _ in 0..NESTED_RETRIES {
        let b = LevelBox::around(cloud, ctx.sys.dim(), grow);
        let volume = b.volume();
        if !(volume > 0.0 && volume < prev_volume) {
            return None;
        }
        let tagged: Tagged = (0..ctx.m as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::indexed(ctx.seed.wrapping_add(level), rng::stream::NESTED, i);
                let d = b.draw(&mut r);
                match displaced(ctx.sys, ctx.x, &d) {
                    Some(y) => {
                        (ctx.sys.separation_time(ctx.orbit, &y, ctx.eps), ctx.sys.metric.displacement(ctx.x, &y))
                    }
                    None => (0, d),
                }
            })
            .collect();
        let edge = tagged.iter().filter(|t| t.0 > n).map(|t| b.reach(&t.1)).fold(0.0, f64::max);
        if edge <= NESTED_EDGE {
            return Some((volume, tagged));
        }
        grow *= 2.0;
    }
    None
}

/// Brin–Katok series for Lebesgue systems that reaches far smaller Bowen sets than
/// [`bk_series`] at the same `m`.
///
/// Starts from the ε-cube sample; whenever the companions at a grid depth fall below
/// [`NESTED_SWITCH_FRACTION`] of the sample, a new sample of size `m` is drawn from an
/// oriented box enclosing them and deeper grid points are estimated from it. Nesting of
/// Bowen sets in `n` keeps each box a superset of every deeper set, provided the box
/// contains the set it was fitted to; that is checked by requiring the new companions
/// to stay away from the box edges, widening the box otherwise. Grid points past a
/// failed check keep the previous level.
///
/// Each level only resolves a few decades below its box, so consecutive grid depths
/// must not shrink the measure by much more than the switch fraction.
pub fn bk_series_nested(
    sys: &SystemDescriptor,
    x: &Point,
    eps: f64,
    gauge: Gauge,
    n_grid: &[usize],
    m: usize,
    seed: u64,
) -> Result<BkSeries> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid", "grid must be non-empty and strictly increasing"));
    }
    if !sys.is_lebesgue() {
        return Err(invalid("scheme", "nested estimates need a Lebesgue system"));
    }
    let (sample, scale, scheme) = estimation_sample(sys, x, eps, m, seed)?;
    let n_max = *n_grid.last().unwrap();
    let orbit = sys.orbit_segment(x, n_max)?;
    let mut tagged: Tagged =
        sample.par_iter().map(|y| (sys.separation_time(&orbit, y, eps), sys.metric.displacement(x, y))).collect();
    let ball_count = tagged.iter().filter(|t| t.0 > 0).count();
    if ball_count == 0 {
        return Err(Error::Resolution(format!("no sample point lies within {eps} of the centre; raise M")));
    }
    let ball = MeasureEstimate::new(ball_count, m, scale, scheme);
    let ctx = LevelCtx { sys, x, orbit: &orbit, eps, m, seed };
    let (mut volume, mut scheme, mut level, mut frozen) = (scale, scheme, 0usize, false);
    let mut points = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let k = tagged.iter().filter(|t| t.0 > n).count();
        points.push(bk_point(n, MeasureEstimate::new(k, m, volume, scheme), gauge, &ball, level));
        let last = i + 1 == n_grid.len();
        if frozen || last || k as f64 >= NESTED_SWITCH_FRACTION * m as f64 || k < NESTED_MIN_CLOUD {
            continue;
        }
        let cloud: Vec<[f64; 2]> = tagged.iter().filter(|t| t.0 > n).map(|t| t.1).collect();
        match next_level(&ctx, n, &cloud, level as u64 + 1, volume) {
            Some((v, t)) => {
                log::debug!("nested level {} at n={n}: box volume {v:e}", level + 1);
                tagged = t;
                volume = v;
                scheme = Scheme::Nested;
                level += 1;
            }
            None => {
                log::warn!("nested box check failed at n={n}; deeper points keep level {level}");
                frozen = true;
            }
        }
    }
    Ok(BkSeries { gauge, eps, ball, points })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub dimension: f64,
    pub fit: SlopeFit,
    /// Radii dropped because no sample point fell inside.
    pub censored: usize,
}

fn neighbourhood_dimension(radii: &[f64], counts: &[usize], m: usize, sliding_min: bool) -> Result<DimensionEstimate> {
    if radii.len() < 3 {
        return Err(invalid("r_grid", "need at least three radii"));
    }
    let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |a, &r| (a.0.min(r), a.1.max(r)));
    if !(lo > 0.0) || hi / lo < 99.9 {
        return Err(invalid("r_grid", "radii must be positive and span at least two decades"));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.log2()).collect();
    let ys: Vec<f64> = counts.iter().map(|&k| if k == 0 { f64::NAN } else { (k as f64 / m as f64).log2() }).collect();
    let censored = counts.iter().filter(|&&k| k == 0).count();
    if censored > 0 {
        log::warn!("{censored} radii have no sample point inside; fitting window shrunk");
    }
    let full = fit_slope(&xs, &ys, 0..xs.len())?;
    if !sliding_min {
        return Ok(DimensionEstimate { dimension: full.slope, fit: full, censored });
    }
    let w = (xs.len() / 2).max(3);
    let mut best = full;
    for s in 0..=xs.len() - w {
        if let Ok(f) = fit_slope(&xs, &ys, s..s + w) {
            if f.slope < best.slope {
                best = f;
            }
        }
    }
    Ok(DimensionEstimate { dimension: best.slope, fit: best, censored })
}

/// Slope of `log₂ μ̂(B_r(x))` against `log₂ r`, from one sample of the measure.
pub fn local_dimension(
    sys: &SystemDescriptor,
    x: &Point,
    r_grid: &[f64],
    m: usize,
    seed: u64,
) -> Result<DimensionEstimate> {
    sys.check(x)?;
    let sample = sys.sample_measure(m, seed)?;
    let dists: Vec<f64> = sample.par_iter().map(|y| sys.metric.distance(x, y)).collect();
    let counts = count_within(&dists, r_grid);
    neighbourhood_dimension(r_grid, &counts, m, false)
}

/// Liminf proxy for the lower dimension of the `r`-neighbourhoods of `target`:
/// the smallest slope over sliding half-length windows.
pub fn set_lower_dimension(
    sys: &SystemDescriptor,
    target: &DiscontinuitySet,
    r_grid: &[f64],
    m: usize,
    seed: u64,
) -> Result<DimensionEstimate> {
    if target.is_empty() {
        return Err(invalid("Y", "target set is empty"));
    }
    let sample = sys.sample_measure(m, seed)?;
    let dists: Vec<f64> = sample.par_iter().map(|y| target.distance(&sys.metric, y)).collect();
    let counts = count_within(&dists, r_grid);
    neighbourhood_dimension(r_grid, &counts, m, true)
}

fn count_within(dists: &[f64], radii: &[f64]) -> Vec<usize> {
    let mut sorted = dists.to_vec();
    sorted.sort_by(f64::total_cmp);
    radii.iter().map(|&r| sorted.partition_point(|&d| d <= r)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiBound {
    pub local_dimension: Option<f64>,
    pub set_dimension: Option<f64>,
    /// Predicted upper bound on the log-gauge complexity.
    pub bound: f64,
    /// Measured log-gauge tail slope of the Brin–Katok series.
    pub measured: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiGrids {
    pub r_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub eps: f64,
    pub window: usize,
}

/// Upper bound `d_μ(x) / d̲_μ(Y)` for a piecewise isometry with atom boundary `Y`,
/// next to the measured log-gauge slope.
pub fn pi_complexity_bound(sys: &SystemDescriptor, x: &Point, grids: &PiGrids, m: usize, seed: u64) -> Result<PiBound> {
    let bk = bk_series(sys, x, grids.eps, Gauge::Log2, &grids.n_grid, m, seed)?;
    let measured = bk.tail_slope(grids.window)?.slope;
    let target = sys.discontinuities();
    if target.is_empty() {
        // Bowen sets of a global isometry are balls.
        return Ok(PiBound { local_dimension: None, set_dimension: None, bound: 0.0, measured });
    }
    let d_x = local_dimension(sys, x, &grids.r_grid, m, seed)?.dimension;
    let d_y = set_lower_dimension(sys, &target, &grids.r_grid, m, seed ^ 1)?.dimension;
    if d_y.abs() < 1e-9 {
        return Err(Error::Undefined("lower dimension of the boundary set is zero".into()));
    }
    Ok(PiBound { local_dimension: Some(d_x), set_dimension: Some(d_y), bound: d_x / d_y, measured })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iet::IetSpec;
    use crate::scaling::sqrt2_grid;
    use crate::systems::GOLDEN;

    #[test]
    fn contains_examples() {
        let rot = SystemDescriptor::rotation(GOLDEN);
        let q = BowenQuery::new(Point::new1(0.3), 1_000_000, 0.05).unwrap();
        assert!(bowen_contains(&rot, &q, &Point::new1(0.34)).unwrap());

        let d = SystemDescriptor::doubling();
        let q = BowenQuery::new(Point::new1(0.0), 3, 0.05).unwrap();
        assert!(!bowen_contains(&d, &q, &Point::new1(0.01)).unwrap());
        let q2 = BowenQuery { n: 2, ..q };
        assert!(bowen_contains(&d, &q2, &Point::new1(0.01)).unwrap());

        for sys in [rot, d] {
            let q = BowenQuery::new(Point::new1(0.77), 500, 0.001).unwrap();
            assert!(bowen_contains(&sys, &q, &Point::new1(0.77)).unwrap());
        }
    }

    #[test]
    fn measure_examples() {
        let rot = SystemDescriptor::rotation(GOLDEN);
        for n in [0, 10, 10_000] {
            let q = BowenQuery::new(Point::new1(0.3), n, 0.05).unwrap();
            let e = bowen_measure(&rot, &q, 10_000, 1).unwrap();
            assert!((e.value - 0.1).abs() < 0.005);
        }
        let id = SystemDescriptor::identity(2);
        let q = BowenQuery::new(Point::new2(0.3, 0.9), 7, 0.05).unwrap();
        let e = bowen_measure(&id, &q, 10_000, 1).unwrap();
        assert!((e.value - 0.01).abs() < 1e-12);
    }

    /// Exact Bowen interval for the doubling map: `y` is a companion of `x`
    /// iff `|2^i (y-x)|` stays within `eps` on the circle, which for a small
    /// `eps` and no wrap means `|y - x| <= eps 2^-n`.
    #[test]
    fn doubling_measure_matches_interval_oracle() {
        let d = SystemDescriptor::doubling();
        let (eps, n, m) = (0.01, 8, 1_000_000);
        let q = BowenQuery::new(Point::new1(0.3), n, eps).unwrap();
        let e = bowen_measure(&d, &q, m, 5).unwrap();
        let exact = 2.0 * eps * 2f64.powi(-(n as i32));
        assert!((exact - 7.8e-5).abs() < 1e-6);
        let p = exact / (2.0 * eps);
        let sigma = 2.0 * eps * (p * (1.0 - p) / m as f64).sqrt();
        assert!((e.value - exact).abs() <= 3.0 * sigma, "{} vs {exact}", e.value);
        assert!(e.ci_lo <= e.value && e.value <= e.ci_hi);
    }

    #[test]
    fn nested_series_follows_interval_oracle_past_plain_resolution() {
        let d = SystemDescriptor::doubling();
        let (eps, m) = (0.01, 20_000);
        let grid: Vec<usize> = (2..=20).map(|i| 2 * i).collect();
        let s = bk_series_nested(&d, &Point::new1(0.3), eps, Gauge::Identity, &grid, m, 11).unwrap();
        assert!(s.points.last().unwrap().level > 0);
        for p in &s.points {
            let exact = 2.0 * eps * 2f64.powi(-(p.n as i32));
            let rel = (p.estimate.value - exact).abs() / exact;
            assert!(rel < 0.25, "n={} {} vs {exact}", p.n, p.estimate.value);
            assert!((p.ratio.unwrap() - 1.0).abs() < 0.1);
        }
        let plain = bk_series(&d, &Point::new1(0.3), eps, Gauge::Identity, &grid, m, 11).unwrap();
        assert!(plain.points.last().unwrap().ratio.is_none());
    }

    #[test]
    fn nested_and_plain_agree_where_both_resolve() {
        let sys = SystemDescriptor::casati_prosen(GOLDEN, 2f64.sqrt() - 1.0);
        let x = Point::new2(0.31, 0.58);
        let grid = sqrt2_grid(16, 256).unwrap();
        let a = bk_series(&sys, &x, 0.05, Gauge::Log2, &grid, 400_000, 3).unwrap();
        let b = bk_series_nested(&sys, &x, 0.05, Gauge::Log2, &grid, 400_000, 3).unwrap();
        assert!(b.points.iter().any(|p| p.level > 0));
        for (p, q) in a.points.iter().zip(&b.points) {
            if p.estimate.count >= 200 {
                let rel = (p.estimate.value - q.estimate.value).abs() / p.estimate.value;
                assert!(rel < 0.3, "n={} plain {} nested {}", p.n, p.estimate.value, q.estimate.value);
            }
        }
    }

    #[test]
    fn nested_needs_lebesgue_measure() {
        let sys = SystemDescriptor::logistic(3.7, 100);
        assert!(bk_series_nested(&sys, &Point::new1(0.4), 0.05, Gauge::Log2, &[4, 8], 2000, 1).is_err());
    }

    #[test]
    fn zero_count_is_flagged() {
        let d = SystemDescriptor::doubling();
        let q = BowenQuery::new(Point::new1(0.3), 40, 0.001).unwrap();
        let e = bowen_measure(&d, &q, 1000, 1).unwrap();
        assert!(e.underflow && e.value == 0.0);
        let s = bk_series(&d, &Point::new1(0.3), 0.001, Gauge::Identity, &[5, 40], 1000, 1).unwrap();
        assert!(s.points[0].ratio.is_some() && s.points[1].ratio.is_none());
    }

    #[test]
    fn doubling_identity_ratios_near_one() {
        let d = SystemDescriptor::doubling();
        let grid: Vec<usize> = (5..=15).collect();
        let s = bk_series(&d, &Point::new1(0.3), 1e-3, Gauge::Identity, &grid, 200_000, 2).unwrap();
        for p in &s.points[3..] {
            let r = p.ratio.unwrap();
            assert!((r - 1.0).abs() < 0.1, "n={} r={r}", p.n);
        }
        assert!((s.slope().unwrap().slope - 1.0).abs() < 0.1);
    }

    #[test]
    fn rotation_log_ratios_vanish() {
        let rot = SystemDescriptor::rotation(GOLDEN);
        let grid = sqrt2_grid(2, 1 << 14).unwrap();
        let s = bk_series(&rot, &Point::new1(0.4), 0.05, Gauge::Log2, &grid, 10_000, 3).unwrap();
        assert!(s.points.iter().all(|p| p.ratio == Some(0.0)));
        assert!(s.points.iter().all(|p| p.estimate.count == s.ball.count));
    }

    #[test]
    fn companions_are_nested_in_n_and_eps() {
        let iet = IetSpec::new(vec![0.2398, 0.4721, 1.0 - 0.2398 - 0.4721], &[3, 2, 1]).unwrap();
        for sys in [SystemDescriptor::doubling(), SystemDescriptor::iet(iet)] {
            let x = Point::new1(0.41);
            let (sample, _) = ball_sample(&sys, &x, 0.05, 5000, 4);
            let t_big = separation_times(&sys, &x, 0.05, 64, &sample).unwrap();
            let t_small = separation_times(&sys, &x, 0.02, 64, &sample).unwrap();
            let grid: Vec<usize> = (0..64).collect();
            let c = survivor_counts(&t_big, &grid);
            assert!(c.windows(2).all(|w| w[0] >= w[1]));
            for (a, b) in t_small.iter().zip(&t_big) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn separation_times_agree_with_membership_oracle() {
        let sys = SystemDescriptor::casati_prosen(GOLDEN, 2f64.sqrt() - 1.0);
        let x = Point::new2(0.2, 0.7);
        let (sample, _) = ball_sample(&sys, &x, 0.05, 2000, 9);
        let times = separation_times(&sys, &x, 0.05, 30, &sample).unwrap();
        for (y, &s) in sample.iter().zip(&times) {
            for n in [0, 5, 17, 30] {
                let q = BowenQuery::new(x, n, 0.05).unwrap();
                assert_eq!(bowen_contains(&sys, &q, y).unwrap(), s > n);
            }
        }
    }

    #[test]
    fn monte_carlo_intervals_are_honest() {
        let d = SystemDescriptor::doubling();
        let q = BowenQuery::new(Point::new1(0.3), 6, 0.02).unwrap();
        let mut hits = 0;
        for t in 0..20u64 {
            let a = bowen_measure(&d, &q, 5000, 100 + 2 * t).unwrap();
            let b = bowen_measure(&d, &q, 5000, 101 + 2 * t).unwrap();
            if a.ci_lo <= b.ci_hi && b.ci_lo <= a.ci_hi {
                hits += 1;
            }
        }
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn wilson_contains_point_estimate() {
        for (k, m) in [(0, 10), (10, 10), (3, 1000), (500, 1000)] {
            let (lo, hi) = wilson(k, m);
            let p = k as f64 / m as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
    }

    #[test]
    fn dimension_examples() {
        let radii: Vec<f64> = (0..7).map(|i| 0.2 * 0.5f64.powi(i)).collect();
        let t2 = SystemDescriptor::identity(2);
        let d = local_dimension(&t2, &Point::new2(0.5, 0.5), &radii[..5], 1_000_000, 1);
        assert!(d.is_err(), "radii spanning less than two decades are rejected");

        let radii: Vec<f64> = (0..8).map(|i| 0.2 * 0.5f64.powi(i)).collect();
        let d = local_dimension(&t2, &Point::new2(0.5, 0.5), &radii, 1_000_000, 1).unwrap();
        assert!((d.dimension - 2.0).abs() < 0.1, "{}", d.dimension);
        let i1 = SystemDescriptor::identity(1);
        let d = local_dimension(&i1, &Point::new1(0.5), &radii, 200_000, 1).unwrap();
        assert!((d.dimension - 1.0).abs() < 0.1);

        let cp = SystemDescriptor::casati_prosen(0.3, 0.1);
        let y = cp.discontinuities();
        let d = set_lower_dimension(&t2, &y, &radii, 200_000, 2).unwrap();
        assert!((d.dimension - 1.0).abs() < 0.1, "{}", d.dimension);

        let y = DiscontinuitySet { points: vec![Point::new2(0.5, 0.5)], ..Default::default() };
        let d = set_lower_dimension(&t2, &y, &radii, 1_000_000, 3).unwrap();
        assert!((d.dimension - 2.0).abs() < 0.1, "{}", d.dimension);

        let iet = IetSpec::new(vec![0.3, 0.5, 0.2], &[3, 1, 2]).unwrap();
        let sys = SystemDescriptor::iet(iet);
        let d = set_lower_dimension(&sys, &sys.discontinuities(), &radii, 200_000, 4).unwrap();
        assert!((d.dimension - 1.0).abs() < 0.1);
    }

    #[test]
    fn rotation_bound_is_zero() {
        let rot = SystemDescriptor::rotation(GOLDEN);
        let grids =
            PiGrids { r_grid: vec![0.1, 0.01, 0.001], n_grid: sqrt2_grid(8, 1024).unwrap(), eps: 0.05, window: 8 };
        let b = pi_complexity_bound(&rot, &Point::new1(0.3), &grids, 2000, 1).unwrap();
        assert_eq!(b.bound, 0.0);
        assert_eq!(b.measured, 0.0);
    }
}
