//! Dynamical systems on the circle, the interval and the 2-torus.
//!
//! A [`SystemDescriptor`] bundles a map, the sup metric it is measured with
//! and the invariant measure used for sampling. Every built-in keeps points
//! inside `[0,1)^d` (the logistic map uses the closed interval).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::iet::IetSpec;
use crate::rng;

/// Default parameter for the logistic map at the period-doubling accumulation point.
pub const LAMBDA_INFINITY: f64 = 3.569_945_672_0;

const TWO_53: f64 = 9_007_199_254_740_992.0;

/// Golden mean conjugate, `(sqrt(5) - 1) / 2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: [f64; 2],
    dim: u8,
}

impl Point {
    pub fn new1(x: f64) -> Self {
        Self { coords: [x, 0.0], dim: 1 }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Self { coords: [x, y], dim: 2 }
    }

    pub fn from_slice(c: &[f64]) -> Self {
        match c {
            [x] => Self::new1(*x),
            [x, y] => Self::new2(*x, *y),
            _ => panic!("points have one or two coordinates, got {}", c.len()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    /// Rounds every coordinate down to a multiple of `2^-53`.
    pub fn snapped(&self) -> Self {
        let s = |v: f64| (v * TWO_53).floor() / TWO_53;
        Self { coords: [s(self.coords[0]), s(self.coords[1])], dim: self.dim }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordKind {
    /// `[0,1)` with the wrap-around distance `min(|a-b|, 1-|a-b|)`.
    Circle,
    /// `[0,1]` with the absolute difference.
    Interval,
}

/// Per-coordinate distances combined by `max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub coords: Vec<CoordKind>,
}

impl MetricSpec {
    pub fn circle(dim: usize) -> Self {
        Self { coords: vec![CoordKind::Circle; dim] }
    }

    pub fn interval() -> Self {
        Self { coords: vec![CoordKind::Interval] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coord_distance(&self, i: usize, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self.coords[i] {
            CoordKind::Circle => d.min(1.0 - d),
            CoordKind::Interval => d,
        }
    }

    #[inline]
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        let mut m = self.coord_distance(0, a.coords[0], b.coords[0]);
        if self.coords.len() == 2 {
            m = m.max(self.coord_distance(1, a.coords[1], b.coords[1]));
        }
        m
    }

    /// Signed displacement `b - a` in the chart centred at `a`.
    pub fn displacement(&self, a: &Point, b: &Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, kind) in self.coords.iter().enumerate() {
            let mut d = b.coords[i] - a.coords[i];
            if *kind == CoordKind::Circle {
                d -= d.round();
            }
            out[i] = d;
        }
        out
    }
}

#[inline]
pub(crate) fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `x + g mod 1` for `x, g` in `[0,1)`, exact whenever both are multiples of `2^-53`.
#[inline]
pub(crate) fn rotate(x: f64, g: f64) -> f64 {
    if x >= 1.0 - g {
        x - (1.0 - g)
    } else {
        x + g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry2 {
    /// Rotation about the origin, radians.
    pub angle: f64,
    pub translation: [f64; 2],
}

impl Isometry2 {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * p[0] - s * p[1] + self.translation[0], s * p[0] + c * p[1] + self.translation[1]]
    }
}

/// A piecewise isometry of the torus with polygonal atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwIsometry {
    pub atoms: Vec<Vec<[f64; 2]>>,
    pub isometries: Vec<Isometry2>,
}

impl PwIsometry {
    pub fn new(atoms: Vec<Vec<[f64; 2]>>, isometries: Vec<Isometry2>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != isometries.len() {
            return Err(invalid("atoms", "need one isometry per atom and at least one atom"));
        }
        if atoms.iter().any(|a| a.len() < 3) {
            return Err(invalid("atoms", "each atom needs at least three vertices"));
        }
        Ok(Self { atoms, isometries })
    }

    pub fn atom_of(&self, p: [f64; 2]) -> Option<usize> {
        self.atoms.iter().position(|poly| polygon_contains(poly, p))
    }

    fn edges(&self) -> Vec<([f64; 2], [f64; 2])> {
        let mut out = Vec::new();
        for poly in &self.atoms {
            for k in 0..poly.len() {
                out.push((poly[k], poly[(k + 1) % poly.len()]));
            }
        }
        out
    }
}

/// Crossing-number test with half-open edges, so atoms sharing an edge
/// partition it between them.
pub(crate) fn polygon_contains(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapRule {
    Rotation {
        gamma: f64,
    },
    Doubling,
    Identity {
        dim: usize,
    },
    Logistic {
        lambda: f64,
    },
    Iet(IetSpec),
    /// `(q,p) -> (q+p+beta, p+alpha*theta(q))`; `factorized` switches to the
    /// `B∘R∘G` composition whose q-update also carries `alpha*theta(q)`.
    CasatiProsen {
        alpha: f64,
        beta: f64,
        factorized: bool,
    },
    /// Vertical cut by `±1/4` on the two arcs bounded by `1/2` and `1/2 - alpha`,
    /// followed by the rotation `x -> x + alpha`.
    AppendixTorus {
        alpha: f64,
    },
    PwIsometry2d(PwIsometry),
}

impl MapRule {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MapRule::Rotation { .. } => "rotation",
            MapRule::Doubling => "doubling",
            MapRule::Identity { .. } => "identity",
            MapRule::Logistic { .. } => "logistic",
            MapRule::Iet(_) => "iet",
            MapRule::CasatiProsen { .. } => "casati_prosen",
            MapRule::AppendixTorus { .. } => "appendix_torus",
            MapRule::PwIsometry2d(_) => "pw_isometry_2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MapRule::Identity { dim } => *dim,
            MapRule::CasatiProsen { .. } | MapRule::AppendixTorus { .. } | MapRule::PwIsometry2d(_) => 2,
            _ => 1,
        }
    }

    fn default_metric(&self) -> MetricSpec {
        match self {
            MapRule::Logistic { .. } | MapRule::Iet(_) => MetricSpec::interval(),
            other => MetricSpec::circle(other.dim()),
        }
    }

    #[inline]
    fn apply(&self, p: &Point) -> Point {
        match self {
            MapRule::Rotation { gamma } => Point::new1(rotate(p.x(), *gamma)),
            MapRule::Doubling => {
                let v = 2.0 * p.x();
                Point::new1(if v >= 1.0 { v - 1.0 } else { v })
            }
            MapRule::Identity { .. } => *p,
            MapRule::Logistic { lambda } => Point::new1(lambda * p.x() * (1.0 - p.x())),
            MapRule::Iet(iet) => Point::new1(iet.apply(p.x())),
            MapRule::CasatiProsen { alpha, beta, factorized } => {
                let (q, m) = (p.x(), p.y());
                let kick = if q < 0.5 { -alpha } else { *alpha };
                let dq = if *factorized { m + beta + kick } else { m + beta };
                Point::new2(wrap(q + dq), wrap(m + kick))
            }
            MapRule::AppendixTorus { alpha } => {
                let (x, y) = (p.x(), p.y());
                let lo = 0.5 - alpha;
                let y = if x >= lo && x < 0.5 { rotate(y, 0.75) } else { rotate(y, 0.25) };
                Point::new2(rotate(x, *alpha), y)
            }
            MapRule::PwIsometry2d(pw) => {
                let c = [p.x(), p.y()];
                // Points on the outer boundary are assigned to the last atom.
                let k = pw.atom_of(c).unwrap_or(pw.atoms.len() - 1);
                let q = pw.isometries[k].apply(c);
                Point::new2(wrap(q[0]), wrap(q[1]))
            }
        }
    }
}

/// Coordinatewise conjugacy `phi` applied to every coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConjugacySpec {
    /// `x -> x^k`, inverse `x -> x^(1/k)`.
    Power { k: f64 },
    /// `x -> x + c mod 1`.
    Rotation { c: f64 },
}

impl ConjugacySpec {
    pub fn forward(&self, p: &Point) -> Point {
        self.map(p, false)
    }

    pub fn inverse(&self, p: &Point) -> Point {
        self.map(p, true)
    }

    fn map(&self, p: &Point, inv: bool) -> Point {
        let f = |v: f64| match *self {
            ConjugacySpec::Power { k } => {
                let e = if inv { 1.0 / k } else { k };
                let r = v.powf(e);
                if r >= 1.0 {
                    0.0
                } else {
                    r
                }
            }
            ConjugacySpec::Rotation { c } => wrap(if inv { v - c } else { v + c }),
        };
        let c = p.coords();
        if c.len() == 1 {
            Point::new1(f(c[0]))
        } else {
            Point::new2(f(c[0]), f(c[1]))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Uniform measure on the domain.
    Lebesgue,
    /// Orbit samples `T^{B+1}(x0), ..., T^{B+M}(x0)` after a transient of `B` steps.
    Empirical { transient: usize },
}

/// Boundary set of a piecewise-defined map, with exact sup-metric distance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiscontinuitySet {
    pub points: Vec<Point>,
    /// Circles `{x = c}` on the torus.
    pub vertical: Vec<f64>,
    /// Segments in torus coordinates.
    pub segments: Vec<([f64; 2], [f64; 2])>,
}

impl DiscontinuitySet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.vertical.is_empty() && self.segments.is_empty()
    }

    pub fn distance(&self, metric: &MetricSpec, p: &Point) -> f64 {
        let mut best = f64::INFINITY;
        for q in &self.points {
            best = best.min(metric.distance(p, q));
        }
        for &c in &self.vertical {
            best = best.min(metric.coord_distance(0, p.x(), c));
        }
        for &(a, b) in &self.segments {
            for sx in [-1.0, 0.0, 1.0] {
                for sy in [-1.0, 0.0, 1.0] {
                    best = best.min(sup_segment_distance([p.x() + sx, p.y() + sy], a, b));
                }
            }
        }
        best
    }
}

/// `min_t max(|u - t a|, |v - t b|)` over `t ∈ [0,1]`; the objective is convex
/// and piecewise linear, so its minimum sits on one of the breakpoints.
fn sup_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (u, v) = (p[0] - a[0], p[1] - a[1]);
    let (da, db) = (b[0] - a[0], b[1] - a[1]);
    let f = |t: f64| (u - t * da).abs().max((v - t * db).abs());
    let mut cands = vec![0.0, 1.0];
    for (num, den) in [(u, da), (v, db), (u - v, da - db), (u + v, da + db)] {
        if den.abs() > 1e-300 {
            cands.push(num / den);
        }
    }
    cands.into_iter().map(|t| f(t.clamp(0.0, 1.0))).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDescriptor {
    pub name: String,
    pub rule: MapRule,
    pub metric: MetricSpec,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub conjugacy: Option<ConjugacySpec>,
}

impl SystemDescriptor {
    pub fn new(rule: MapRule, measure: MeasureSpec) -> Self {
        Self { name: rule.kind_name().to_string(), metric: rule.default_metric(), rule, measure, conjugacy: None }
    }

    pub fn rotation(gamma: f64) -> Self {
        Self::new(MapRule::Rotation { gamma: wrap(gamma) }, MeasureSpec::Lebesgue)
    }

    pub fn doubling() -> Self {
        Self::new(MapRule::Doubling, MeasureSpec::Lebesgue)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(MapRule::Identity { dim }, MeasureSpec::Lebesgue)
    }

    pub fn logistic(lambda: f64, transient: usize) -> Self {
        Self::new(MapRule::Logistic { lambda }, MeasureSpec::Empirical { transient })
    }

    pub fn iet(spec: IetSpec) -> Self {
        Self::new(MapRule::Iet(spec), MeasureSpec::Lebesgue)
    }

    pub fn casati_prosen(alpha: f64, beta: f64) -> Self {
        Self::new(MapRule::CasatiProsen { alpha, beta, factorized: false }, MeasureSpec::Lebesgue)
    }

    pub fn appendix_torus(alpha: f64) -> Self {
        Self::new(MapRule::AppendixTorus { alpha }, MeasureSpec::Lebesgue)
    }

    pub fn pw_isometry(pw: PwIsometry) -> Self {
        Self::new(MapRule::PwIsometry2d(pw), MeasureSpec::Lebesgue)
    }

    /// The system `phi ∘ T ∘ phi^-1` with the pushed-forward measure.
    pub fn conjugated(mut self, phi: ConjugacySpec) -> Self {
        self.name = format!("{}_conjugated", self.name);
        self.conjugacy = Some(phi);
        self
    }

    pub fn with_measure(mut self, measure: MeasureSpec) -> Self {
        self.measure = measure;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// True when sampling is uniform on the domain, so volumes are known.
    pub fn is_lebesgue(&self) -> bool {
        self.measure == MeasureSpec::Lebesgue && self.conjugacy.is_none()
    }

    /// Appendix orbits stay on the `2^-53` grid when `alpha` is dyadic.
    pub fn snaps_to_dyadic_grid(&self) -> bool {
        matches!(self.rule, MapRule::AppendixTorus { .. })
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim()
            && p.coords().iter().zip(&self.metric.coords).all(|(&v, k)| match k {
                CoordKind::Circle => (0.0..1.0).contains(&v),
                CoordKind::Interval => (0.0..=1.0).contains(&v),
            })
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(p.coords().to_vec(), self.name.clone()))
        }
    }

    /// One application of the map without the domain check.
    #[inline]
    pub fn apply(&self, p: &Point) -> Point {
        match &self.conjugacy {
            None => self.rule.apply(p),
            Some(phi) => phi.forward(&self.rule.apply(&phi.inverse(p))),
        }
    }

    pub fn step(&self, p: &Point) -> Result<Point> {
        self.check(p)?;
        Ok(self.apply(p))
    }

    pub fn orbit_segment(&self, x: &Point, n: usize) -> Result<Vec<Point>> {
        self.check(x)?;
        let mut out = Vec::with_capacity(n + 1);
        let mut p = *x;
        out.push(p);
        for _ in 0..n {
            p = self.apply(&p);
            out.push(p);
        }
        Ok(out)
    }

    /// `max_{0<=i<=n} d(T^i x, T^i y)`; may stop early and return any value
    /// above `cutoff` once the running maximum exceeds it.
    pub fn sup_orbit_distance(&self, x: &Point, y: &Point, n: usize, cutoff: f64) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        let (mut a, mut b) = (*x, *y);
        let mut m = self.metric.distance(&a, &b);
        for _ in 0..n {
            if m > cutoff {
                return Ok(m);
            }
            a = self.apply(&a);
            b = self.apply(&b);
            m = m.max(self.metric.distance(&a, &b));
        }
        Ok(m)
    }

    /// First time `t` in `0..orbit.len()` with `d(orbit[t], T^t y) > eps`, or
    /// `orbit.len()` when `y` shadows the whole segment. `y` is a Bowen
    /// companion of `orbit[0]` at depth `n` iff the result exceeds `n`.
    #[inline]
    pub fn separation_time(&self, orbit: &[Point], y: &Point, eps: f64) -> usize {
        let mut b = *y;
        for (t, a) in orbit.iter().enumerate() {
            if t > 0 {
                b = self.apply(&b);
            }
            if self.metric.distance(a, &b) > eps {
                return t;
            }
        }
        orbit.len()
    }

    /// Separation time between two cached orbits.
    #[inline]
    pub fn separation_time_cached(&self, a: &[Point], b: &[Point], eps: f64) -> usize {
        a.iter().zip(b).position(|(p, q)| self.metric.distance(p, q) > eps).unwrap_or(a.len().min(b.len()))
    }

    pub fn sample_measure(&self, m: usize, seed: u64) -> Result<Vec<Point>> {
        if m == 0 {
            return Err(invalid("M", "sample size must be at least 1"));
        }
        let inner = match self.measure {
            MeasureSpec::Lebesgue => (0..m as u64)
                .map(|i| {
                    let mut r = rng::indexed(seed, rng::stream::MEASURE, i);
                    self.uniform_point(&mut r)
                })
                .collect::<Vec<_>>(),
            MeasureSpec::Empirical { transient } => {
                let mut r = rng::sequential(seed, rng::stream::MEASURE);
                let inner_sys = SystemDescriptor { conjugacy: None, ..self.clone() };
                let mut p = inner_sys.uniform_point(&mut r);
                for _ in 0..=transient {
                    p = self.rule.apply(&p);
                }
                let mut out = Vec::with_capacity(m);
                out.push(p);
                for _ in 1..m {
                    p = self.rule.apply(&p);
                    out.push(p);
                }
                out
            }
        };
        let inner = if self.snaps_to_dyadic_grid() { inner.iter().map(Point::snapped).collect() } else { inner };
        Ok(match &self.conjugacy {
            None => inner,
            Some(phi) => inner.iter().map(|p| phi.forward(p)).collect(),
        })
    }

    pub(crate) fn uniform_point<R: Rng>(&self, r: &mut R) -> Point {
        if self.dim() == 1 {
            Point::new1(r.gen::<f64>())
        } else {
            let x = r.gen::<f64>();
            Point::new2(x, r.gen::<f64>())
        }
    }

    pub fn discontinuities(&self) -> DiscontinuitySet {
        let mut set = DiscontinuitySet::default();
        match &self.rule {
            MapRule::Iet(iet) => {
                set.points = iet.discontinuities().into_iter().map(Point::new1).collect();
            }
            MapRule::CasatiProsen { .. } => set.vertical = vec![0.0, 0.5],
            MapRule::AppendixTorus { alpha } => set.vertical = vec![0.5, wrap(0.5 - alpha)],
            MapRule::PwIsometry2d(pw) => set.segments = pw.edges(),
            _ => {}
        }
        set
    }
}

/// Short table of the built-in systems, one row per entry:
/// `(name, dimension, parameters)`.
pub fn builtin_systems() -> Vec<(&'static str, usize, &'static str)> {
    vec![
        ("rotation", 1, "gamma: rotation number; x -> x + gamma mod 1"),
        ("doubling", 1, "(none); x -> 2x mod 1"),
        ("identity", 1, "dim: 1 or 2; x -> x"),
        ("logistic", 1, "lambda (default 3.5699456720); x -> lambda x (1-x), empirical measure"),
        ("iet", 1, "lengths (decimals or \"p/q\"), permutation (1-based output slots)"),
        ("casati_prosen", 2, "alpha, beta, factorized; (q,p) -> (q+p+beta, p+alpha theta(q))"),
        ("appendix_torus", 2, "alpha or alpha_terms; cut by ±1/4 then rotate x by alpha"),
        ("pw_isometry_2d", 2, "atoms (polygons), isometries (angle, translation)"),
    ]
}
