//! Side exponents of Bowen sets from optimal enclosing and inscribed rectangles.

use rayon::prelude::*;
use serde::Serialize;

use crate::bowen::{ball_sample, bk_series, BkSeries};
use crate::error::{invalid, Error, Result};
use crate::scaling::{fit_slope, tail_proxies, Gauge, TailProxies};
use crate::systems::{Point, SystemDescriptor};

/// Fewest companions accepted for a geometric fit.
pub const MIN_COMPANIONS: usize = 30;

/// Orientations that reach the minimal width within this tolerance compete for the second side.
pub const WIDTH_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RectKind {
    Enclosing,
    Inscribed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RectSides {
    pub kind: RectKind,
    /// Narrow side first.
    pub sides: Vec<f64>,
    /// Direction of the second side in radians, `[0, π)`; `None` in one dimension.
    pub angle: Option<f64>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Counter-clockwise convex hull without collinear vertices (monotone chain).
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn norm_angle(a: f64) -> f64 {
    let r = a.rem_euclid(std::f64::consts::PI);
    if r >= std::f64::consts::PI - 1e-15 {
        0.0
    } else {
        r
    }
}

/// Minimal width of the hull (first side) and, among orientations within
/// [`WIDTH_TOLERANCE`] of it, the smallest extent along the edge (second side).
pub fn min_enclosing_sides(cloud: &[[f64; 2]]) -> RectSides {
    let hull = convex_hull(cloud);
    let rect =
        |sides: Vec<f64>, angle: f64| RectSides { kind: RectKind::Enclosing, sides, angle: Some(norm_angle(angle)) };
    match hull.len() {
        0 | 1 => return rect(vec![0.0, 0.0], 0.0),
        2 => {
            let d = [hull[1][0] - hull[0][0], hull[1][1] - hull[0][1]];
            return rect(vec![0.0, dot(d, d).sqrt()], d[1].atan2(d[0]));
        }
        _ => {}
    }
    let h = hull.len();
    let at = |i: usize| hull[i % h];
    // Rotating calipers: antipodal vertex `j`, extreme vertices along the edge `k` (max) and `l` (min).
    let (mut j, mut k, mut l) = (1usize, 1usize, 0usize);
    let mut best: Option<(f64, f64, f64)> = None;
    let mut cands = Vec::with_capacity(h);
    for i in 0..h {
        let (a, b) = (at(i), at(i + 1));
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let u = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        if i == 0 {
            j = 1;
            k = 1;
        }
        while cross(a, b, at(j + 1)) > cross(a, b, at(j)) {
            j += 1;
        }
        while dot(u, at(k + 1)) > dot(u, at(k)) {
            k += 1;
        }
        if i == 0 {
            l = j;
        }
        while dot(u, at(l + 1)) < dot(u, at(l)) {
            l += 1;
        }
        let width = cross(a, b, at(j)) / len;
        let extent = dot(u, at(k)) - dot(u, at(l));
        cands.push((width, extent, u[1].atan2(u[0])));
    }
    let l1 = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    for &c in &cands {
        if c.0 <= l1 + WIDTH_TOLERANCE && best.map_or(true, |b| c.1 < b.1) {
            best = Some(c);
        }
    }
    let (_, l2, angle) = best.expect("hull has edges");
    rect(vec![l1, l2.max(l1)], angle)
}

/// Ball-importance sample of `B(x, eps)` restricted to companions at depth
/// `n`, as displacements from `x` in the chart centred at `x`.
pub fn companion_cloud(
    sys: &SystemDescriptor,
    x: &Point,
    n: usize,
    eps: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    let clouds = companion_clouds(sys, x, &[n], eps, m, seed)?;
    let cloud = clouds.into_iter().next().unwrap();
    if cloud.len() < MIN_COMPANIONS {
        return Err(Error::Resolution(format!(
            "{} companions at depth {n}; at least {MIN_COMPANIONS} are needed",
            cloud.len()
        )));
    }
    Ok(cloud)
}

/// Companion clouds on one fixed sample for every depth of `grid`.
fn companion_clouds(
    sys: &SystemDescriptor,
    x: &Point,
    grid: &[usize],
    eps: f64,
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<[f64; 2]>>> {
    if !sys.is_lebesgue() {
        return Err(invalid("system", "rectangle exponents need a Lebesgue system"));
    }
    sys.check(x)?;
    let n_max = grid.iter().copied().max().unwrap_or(0);
    let orbit = sys.orbit_segment(x, n_max)?;
    let (sample, _) = ball_sample(sys, x, eps, m, seed);
    let tagged: Vec<(usize, [f64; 2])> =
        sample.par_iter().map(|y| (sys.separation_time(&orbit, y, eps), sys.metric.displacement(x, y))).collect();
    Ok(grid.iter().map(|&n| tagged.iter().filter(|(s, _)| *s > n).map(|(_, d)| *d).collect()).collect())
}

/// Largest accepted value in `[0, hi]` by bisection; `accept(0)` is assumed.
fn bisect(hi: f64, iters: usize, accept: impl Fn(f64) -> bool) -> f64 {
    if accept(hi) {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if accept(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InscribedOptions {
    /// Orientations tried over `[0, π)`.
    pub orientations: usize,
    /// Probe points per side of the candidate rectangle.
    pub probes: usize,
    pub iterations: usize,
}

impl Default for InscribedOptions {
    fn default() -> Self {
        Self { orientations: 32, probes: 16, iterations: 30 }
    }
}

/// Rectangle centred at `x` and contained in `B(n, x, eps)` at probe resolution.
///
/// For each orientation the largest square is found first, which fixes the
/// narrow side; the other side then grows with the narrow side held fixed.
/// The orientation with the largest area wins, lowest index on ties.
pub fn max_inscribed_sides(
    sys: &SystemDescriptor,
    x: &Point,
    n: usize,
    eps: f64,
    opts: &InscribedOptions,
) -> Result<RectSides> {
    sys.check(x)?;
    if opts.probes < 2 || opts.orientations == 0 {
        return Err(invalid("probes", "need at least two probes per side and one orientation"));
    }
    let orbit = sys.orbit_segment(x, n)?;
    let member = |c: [f64; 2]| -> bool {
        let p = if sys.dim() == 1 { Point::new1(c[0]) } else { Point::new2(c[0], c[1]) };
        let mut q = [0.0; 2];
        for (i, kind) in sys.metric.coords.iter().enumerate() {
            q[i] = match kind {
                crate::systems::CoordKind::Circle => {
                    let v = p.coords()[i];
                    let r = v - v.floor();
                    if r >= 1.0 {
                        0.0
                    } else {
                        r
                    }
                }
                crate::systems::CoordKind::Interval => {
                    let v = p.coords()[i];
                    if !(0.0..=1.0).contains(&v) {
                        return false;
                    }
                    v
                }
            };
        }
        let y = Point::from_slice(&q[..sys.dim()]);
        sys.separation_time(&orbit, &y, eps) > n
    };
    let ticks: Vec<f64> = (0..opts.probes).map(|i| i as f64 / (opts.probes - 1) as f64 - 0.5).collect();
    if sys.dim() == 1 {
        let probes = opts.probes * opts.probes;
        let accept =
            |side: f64| (0..probes).all(|i| member([x.x() + side * (i as f64 / (probes - 1) as f64 - 0.5), 0.0]));
        let side = bisect(2.0 * eps, opts.iterations, accept);
        return Ok(RectSides { kind: RectKind::Inscribed, sides: vec![side], angle: None });
    }
    let results: Vec<(f64, f64, f64)> = (0..opts.orientations)
        .into_par_iter()
        .map(|k| {
            let theta = std::f64::consts::PI * k as f64 / opts.orientations as f64;
            let (s, c) = theta.sin_cos();
            // `u` carries the second side, `v` the narrow one.
            let accept = |narrow: f64, long: f64| {
                ticks.iter().all(|&a| {
                    ticks.iter().all(|&b| {
                        let (du, dv) = (a * long, b * narrow);
                        member([x.x() + du * c - dv * s, x.y() + du * s + dv * c])
                    })
                })
            };
            let narrow = bisect(2.0 * eps, opts.iterations, |w| accept(w, w));
            let long = narrow
                + bisect(2.0 * std::f64::consts::SQRT_2 * eps - narrow, opts.iterations, |e| {
                    accept(narrow, narrow + e)
                });
            (narrow, long, theta)
        })
        .collect();
    let best = results
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| (a.0 * a.1).total_cmp(&(b.0 * b.1)).then(j.cmp(i)))
        .map(|(_, r)| *r)
        .unwrap();
    Ok(RectSides { kind: RectKind::Inscribed, sides: vec![best.0, best.1], angle: Some(best.2) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentPoint {
    pub n: usize,
    pub f_of_n: f64,
    pub companions: usize,
    pub enclosing: RectSides,
    pub inscribed: RectSides,
    /// `-log₂(l_i / 2ε) / f(n)` per side.
    pub enclosing_ratios: Vec<Option<f64>>,
    /// `-log₂(L_i / 2ε) / f(n)` per side.
    pub inscribed_ratios: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentSeries {
    pub gauge: Gauge,
    pub eps: f64,
    pub points: Vec<ExponentPoint>,
    /// Depths dropped because too few companions remained.
    pub truncated: usize,
    pub enclosing_tail: Vec<TailProxies>,
    pub inscribed_tail: Vec<TailProxies>,
}

impl ExponentSeries {
    /// Least-squares decay slope of side `i` against `f(n)`.
    pub fn side_slope(&self, kind: RectKind, i: usize) -> Result<f64> {
        let xs: Vec<f64> = self.points.iter().map(|p| p.f_of_n).collect();
        let ys: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                let s = match kind {
                    RectKind::Enclosing => p.enclosing.sides[i],
                    RectKind::Inscribed => p.inscribed.sides[i],
                };
                if s > 0.0 {
                    -(s / (2.0 * self.eps)).log2()
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(fit_slope(&xs, &ys, 0..xs.len())?.slope)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentOptions {
    pub inscribed: InscribedOptions,
    pub window: usize,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        Self { inscribed: InscribedOptions::default(), window: crate::scaling::DEFAULT_WINDOW }
    }
}

fn side_ratios(sides: &[f64], eps: f64, f: f64) -> Vec<Option<f64>> {
    sides.iter().map(|&s| (s > 0.0 && f > 0.0).then(|| -(s / (2.0 * eps)).log2() / f)).collect()
}

pub fn exponent_series(
    sys: &SystemDescriptor,
    x: &Point,
    eps: f64,
    gauge: Gauge,
    t_grid: &[usize],
    m: usize,
    seed: u64,
    opts: &ExponentOptions,
) -> Result<ExponentSeries> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid", "grid must be non-empty and strictly increasing"));
    }
    let clouds = companion_clouds(sys, x, t_grid, eps, m, seed)?;
    let dim = sys.dim();
    let mut points = Vec::new();
    for (&n, cloud) in t_grid.iter().zip(&clouds) {
        if cloud.len() < MIN_COMPANIONS {
            log::warn!("grid truncated at depth {n}: {} companions", cloud.len());
            break;
        }
        let enclosing = if dim == 1 {
            let (lo, hi) = cloud.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p[0]), a.1.max(p[0])));
            RectSides { kind: RectKind::Enclosing, sides: vec![hi - lo], angle: None }
        } else {
            min_enclosing_sides(cloud)
        };
        let inscribed = max_inscribed_sides(sys, x, n, eps, &opts.inscribed)?;
        let f = gauge.eval(n as f64);
        points.push(ExponentPoint {
            n,
            f_of_n: f,
            companions: cloud.len(),
            enclosing_ratios: side_ratios(&enclosing.sides, eps, f),
            inscribed_ratios: side_ratios(&inscribed.sides, eps, f),
            enclosing,
            inscribed,
        });
    }
    let truncated = t_grid.len() - points.len();
    let w = opts.window.min(points.len());
    if w < 3 {
        return Err(Error::Resolution(format!("only {} depths have enough companions", points.len())));
    }
    let tails = |pick: fn(&ExponentPoint) -> &Vec<Option<f64>>| -> Result<Vec<TailProxies>> {
        (0..dim).map(|i| tail_proxies(&points.iter().map(|p| pick(p)[i]).collect::<Vec<_>>(), w)).collect()
    };
    let enclosing_tail = tails(|p| &p.enclosing_ratios)?;
    let inscribed_tail = tails(|p| &p.inscribed_ratios)?;
    Ok(ExponentSeries { gauge, eps, points, truncated, enclosing_tail, inscribed_tail })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PesinReport {
    /// Sum over sides of the inscribed-side limsup proxies.
    pub upper: f64,
    /// Sum over sides of the enclosing-side liminf proxies.
    pub lower: f64,
    /// Least-squares decay slope of the Brin–Katok series on the same grid.
    pub bk_slope: f64,
    pub exponents: ExponentSeries,
    pub bk: BkSeries,
}

impl PesinReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.upper + tol >= self.bk_slope && self.bk_slope >= self.lower - tol
    }
}

pub fn pesin_check(
    sys: &SystemDescriptor,
    x: &Point,
    eps: f64,
    gauge: Gauge,
    t_grid: &[usize],
    m: usize,
    seed: u64,
    opts: &ExponentOptions,
) -> Result<PesinReport> {
    let exponents = exponent_series(sys, x, eps, gauge, t_grid, m, seed, opts)?;
    let used: Vec<usize> = exponents.points.iter().map(|p| p.n).collect();
    let bk = bk_series(sys, x, eps, gauge, &used, m, seed)?;
    let bk_slope = bk.slope()?.slope;
    let upper = exponents.inscribed_tail.iter().map(|t| t.limsup).sum();
    let lower = exponents.enclosing_tail.iter().map(|t| t.liminf).sum();
    Ok(PesinReport { upper, lower, bk_slope, exponents, bk })
}
