//! Interval exchange transformations and their discontinuity structure.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::systems::{DiscontinuitySet, Point, SystemDescriptor};

/// Floating-point points closer than this are treated as one colliding point.
pub const COLLISION_GUARD: f64 = 1e-13;

/// Default floor below which a scan does not count as evidence for property P̃.
pub const P_TILDE_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "IetRaw", into = "IetRaw")]
pub struct IetSpec {
    lengths: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    /// `slots[j]` is the zero-based output position of input interval `j`.
    slots: Vec<usize>,
    left: Vec<f64>,
    shift: Vec<f64>,
    out_left: Vec<f64>,
    inverse: Vec<usize>,
}

impl PartialEq for IetSpec {
    fn eq(&self, other: &Self) -> bool {
        self.lengths == other.lengths && self.slots == other.slots && self.exact == other.exact
    }
}

#[derive(Serialize, Deserialize)]
struct IetRaw {
    lengths: Vec<f64>,
    /// One-based output slots.
    permutation: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<Vec<String>>,
}

impl TryFrom<IetRaw> for IetSpec {
    type Error = Error;

    fn try_from(raw: IetRaw) -> Result<Self> {
        match raw.exact {
            Some(ex) => {
                let parsed = ex.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
                IetSpec::from_rationals(parsed, &raw.permutation)
            }
            None => IetSpec::new(raw.lengths, &raw.permutation),
        }
    }
}

impl From<IetSpec> for IetRaw {
    fn from(s: IetSpec) -> Self {
        IetRaw {
            permutation: s.permutation(),
            exact: s.exact.as_ref().map(|v| v.iter().map(|r| r.to_string()).collect()),
            lengths: s.lengths,
        }
    }
}

/// Parses `"p/q"` or a plain integer into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || invalid("lengths", format!("cannot parse `{s}` as a rational"));
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl IetSpec {
    /// Builds an IET from floating lengths and a one-based permutation of output slots.
    pub fn new(lengths: Vec<f64>, permutation: &[usize]) -> Result<Self> {
        if lengths.len() < 2 {
            return Err(invalid("lengths", "an IET needs at least two intervals"));
        }
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(invalid("lengths", "interval lengths must be positive"));
        }
        let total: f64 = lengths.iter().sum();
        if (total - 1.0).abs() > 1e-15 * lengths.len() as f64 {
            return Err(invalid("lengths", format!("lengths sum to {total}, expected 1")));
        }
        let slots = check_permutation(permutation, lengths.len())?;
        Ok(Self::build(lengths, None, slots))
    }

    /// Exact-mode IET; lengths must sum to exactly 1.
    pub fn from_rationals(lengths: Vec<BigRational>, permutation: &[usize]) -> Result<Self> {
        if lengths.len() < 2 {
            return Err(invalid("lengths", "an IET needs at least two intervals"));
        }
        if lengths.iter().any(|l| !l.is_positive()) {
            return Err(invalid("lengths", "interval lengths must be positive"));
        }
        let total = lengths.iter().fold(BigRational::zero(), |a, b| a + b);
        if !total.is_one() {
            return Err(invalid("lengths", format!("exact lengths sum to {total}, expected 1")));
        }
        let slots = check_permutation(permutation, lengths.len())?;
        let float = lengths.iter().map(to_f64).collect();
        Ok(Self::build(float, Some(lengths), slots))
    }

    /// The 2-IET `(1-gamma, gamma)` swapped, which is rotation by `gamma`.
    pub fn rotation(gamma: f64) -> Result<Self> {
        Self::new(vec![1.0 - gamma, gamma], &[2, 1])
    }

    pub fn rotation_exact(gamma: BigRational) -> Result<Self> {
        Self::from_rationals(vec![BigRational::one() - &gamma, gamma], &[2, 1])
    }

    fn build(lengths: Vec<f64>, exact: Option<Vec<BigRational>>, slots: Vec<usize>) -> Self {
        let m = lengths.len();
        let mut inverse = vec![0; m];
        for (j, &s) in slots.iter().enumerate() {
            inverse[s] = j;
        }
        let mut left = vec![0.0; m];
        for j in 1..m {
            left[j] = left[j - 1] + lengths[j - 1];
        }
        let mut out_left = vec![0.0; m];
        for s in 1..m {
            out_left[s] = out_left[s - 1] + lengths[inverse[s - 1]];
        }
        let shift = (0..m).map(|j| out_left[slots[j]] - left[j]).collect();
        Self { lengths, exact, slots, left, shift, out_left, inverse }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn intervals(&self) -> usize {
        self.lengths.len()
    }

    /// One-based permutation, as it appears in configuration files.
    pub fn permutation(&self) -> Vec<usize> {
        self.slots.iter().map(|s| s + 1).collect()
    }

    /// Interior cut points of the domain partition.
    pub fn discontinuities(&self) -> Vec<f64> {
        self.left[1..].to_vec()
    }

    #[inline]
    fn atom(&self, x: f64) -> usize {
        self.left.partition_point(|&l| l <= x).saturating_sub(1)
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let y = x + self.shift[self.atom(x)];
        y.clamp(0.0, 1.0 - f64::EPSILON / 2.0)
    }

    pub fn apply_inverse(&self, y: f64) -> f64 {
        let s = self.out_left.partition_point(|&l| l <= y).saturating_sub(1);
        let x = y - self.shift[self.inverse[s]];
        x.clamp(0.0, 1.0 - f64::EPSILON / 2.0)
    }

    fn exact_tables(&self) -> Option<(Vec<BigRational>, Vec<BigRational>)> {
        let ex = self.exact.as_ref()?;
        let m = ex.len();
        let mut left = vec![BigRational::zero(); m];
        for j in 1..m {
            left[j] = &left[j - 1] + &ex[j - 1];
        }
        let mut out_left = vec![BigRational::zero(); m];
        for s in 1..m {
            out_left[s] = &out_left[s - 1] + &ex[self.inverse[s - 1]];
        }
        let shift = (0..m).map(|j| &out_left[self.slots[j]] - &left[j]).collect();
        Some((out_left, shift))
    }
}

fn check_permutation(p: &[usize], m: usize) -> Result<Vec<usize>> {
    if p.len() != m {
        return Err(invalid("permutation", format!("expected {m} entries, got {}", p.len())));
    }
    let mut seen = vec![false; m];
    for &v in p {
        if v == 0 || v > m || seen[v - 1] {
            return Err(invalid("permutation", format!("{p:?} is not a permutation of 1..={m}")));
        }
        seen[v - 1] = true;
    }
    Ok(p.iter().map(|v| v - 1).collect())
}

/// Discontinuity set of `T^n` together with collision bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerDiscontinuities {
    pub n: usize,
    pub points: Vec<f64>,
    /// Number of backward images that landed on an already present point.
    pub collisions: usize,
}

/// Iterates the interior cut points backwards, yielding `T^{-i}(d)` for
/// `i = 0, 1, ...` one generation at a time.
enum Backward {
    Float { iet: IetSpec, current: Vec<f64> },
    Exact { out_left: Vec<BigRational>, shift: Vec<BigRational>, inverse: Vec<usize>, current: Vec<BigRational> },
}

impl Backward {
    fn new(iet: &IetSpec) -> Self {
        match iet.exact_tables() {
            Some((out_left, shift)) => {
                let ex = iet.exact.as_ref().unwrap();
                let mut cur = Vec::new();
                let mut acc = BigRational::zero();
                for l in &ex[..ex.len() - 1] {
                    acc += l;
                    cur.push(acc.clone());
                }
                Backward::Exact { out_left, shift, inverse: iet.inverse.clone(), current: cur }
            }
            None => Backward::Float { iet: iet.clone(), current: iet.discontinuities() },
        }
    }

    /// Current generation as floats, then advance one backward step.
    fn next_generation(&mut self) -> Vec<f64> {
        match self {
            Backward::Float { iet, current } => {
                let out = current.clone();
                for p in current.iter_mut() {
                    *p = iet.apply_inverse(*p);
                }
                out
            }
            Backward::Exact { out_left, shift, inverse, current } => {
                let out = current.iter().map(to_f64).collect();
                for p in current.iter_mut() {
                    let s = out_left.partition_point(|l| *l <= *p).saturating_sub(1);
                    *p = &*p - &shift[inverse[s]];
                }
                out
            }
        }
    }
}

/// Sorted point set with running minimum gap, grown one point at a time.
struct GapTracker {
    set: BTreeSet<u64>,
    circular: bool,
    min_gap: f64,
    collisions: usize,
}

impl GapTracker {
    fn new(circular: bool) -> Self {
        let mut set = BTreeSet::new();
        if !circular {
            set.insert(0f64.to_bits());
            set.insert(1f64.to_bits());
        }
        Self { set, circular, min_gap: f64::INFINITY, collisions: 0 }
    }

    fn insert(&mut self, x: f64) {
        let key = x.to_bits();
        let below = self.set.range(..=key).next_back().map(|&b| f64::from_bits(b));
        let above = self.set.range(key..).next().map(|&b| f64::from_bits(b));
        let mut near = below.map_or(f64::INFINITY, |b| x - b).min(above.map_or(f64::INFINITY, |a| a - x));
        if self.circular && !self.set.is_empty() {
            let first = f64::from_bits(*self.set.iter().next().unwrap());
            let last = f64::from_bits(*self.set.iter().next_back().unwrap());
            if below.is_none() {
                near = near.min(x + 1.0 - last);
            }
            if above.is_none() {
                near = near.min(first + 1.0 - x);
            }
        }
        if near <= COLLISION_GUARD {
            self.collisions += 1;
            self.min_gap = 0.0;
            return;
        }
        self.min_gap = self.min_gap.min(near);
        self.set.insert(key);
    }

    fn points(&self) -> Vec<f64> {
        self.set.iter().map(|&b| f64::from_bits(b)).filter(|&p| self.circular || (p > 0.0 && p < 1.0)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    /// Gaps on the circle, including the wrap-around gap.
    #[default]
    Circular,
    /// Gaps on `[0,1]` with the endpoints `0` and `1` added to the set.
    Interval,
}

/// The union over `i < n` of `T^{-i}` applied to the cut points of `T`.
pub fn iet_power_discontinuities(iet: &IetSpec, n: usize) -> Result<PowerDiscontinuities> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let mut back = Backward::new(iet);
    let mut tracker = GapTracker::new(true);
    for _ in 0..n {
        for p in back.next_generation() {
            tracker.insert(p);
        }
    }
    Ok(PowerDiscontinuities { n, points: tracker.points(), collisions: tracker.collisions })
}

/// Report for one depth `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub n: usize,
    pub points: Vec<f64>,
    pub delta: f64,
    /// `delta * n`.
    pub c_n: f64,
    pub collided: bool,
}

pub fn gap_report(iet: &IetSpec, n: usize, mode: GapMode) -> Result<GapReport> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let mut back = Backward::new(iet);
    let mut tracker = GapTracker::new(mode == GapMode::Circular);
    for _ in 0..n {
        for p in back.next_generation() {
            tracker.insert(p);
        }
    }
    let delta = if tracker.min_gap.is_finite() { tracker.min_gap } else { 1.0 };
    Ok(GapReport { n, points: tracker.points(), delta, c_n: delta * n as f64, collided: tracker.collisions > 0 })
}

/// Minimum gap between the discontinuities of `T^n`; zero after a collision.
pub fn delta(iet: &IetSpec, n: usize, mode: GapMode) -> Result<f64> {
    Ok(gap_report(iet, n, mode)?.delta)
}

/// `delta(n)` for every `n` in `1..=n_max`, in one incremental pass.
pub fn delta_sequence(iet: &IetSpec, n_max: usize, mode: GapMode) -> Vec<f64> {
    let mut back = Backward::new(iet);
    let mut tracker = GapTracker::new(mode == GapMode::Circular);
    let mut out = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        for p in back.next_generation() {
            tracker.insert(p);
        }
        out.push(if tracker.min_gap.is_finite() { tracker.min_gap } else { 1.0 });
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PScan {
    /// `(n_k, delta(n_k) * n_k)`, the best depth in each dyadic block `[2^j, 2^{j+1})`.
    pub records: Vec<(usize, f64)>,
    /// Largest `C` with `delta(n_k) >= C / n_k` along the records.
    pub c_star: f64,
    /// True when `c_star` falls below the floor, so the scan gives no evidence.
    pub not_evidenced: bool,
    pub first_collision: Option<usize>,
}

/// Scans `delta(n) * n` up to `n_max` for evidence of property P̃.
///
/// Property P̃ only asks for infinitely many good depths, so each dyadic
/// block from `2^4` on contributes its best depth and the constant is the
/// weakest of those block maxima.
pub fn property_p_scan(iet: &IetSpec, n_max: usize, mode: GapMode, floor: f64) -> Result<PScan> {
    if n_max < 16 {
        return Err(invalid("n_max", "must be at least 16"));
    }
    let deltas = delta_sequence(iet, n_max, mode);
    let first_collision = deltas.iter().position(|&d| d == 0.0).map(|i| i + 1);
    let mut records = Vec::new();
    let mut lo = 16;
    while lo <= n_max {
        let hi = (2 * lo - 1).min(n_max);
        let best =
            (lo..=hi).map(|n| (n, deltas[n - 1] * n as f64)).fold((lo, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        records.push(best);
        lo *= 2;
    }
    let c_star = records.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(PScan { records, c_star, not_evidenced: c_star < floor, first_collision })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproachClass {
    Grows,
    Bounded,
    Decays,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApproachReport {
    pub alpha: f64,
    /// `(n, m(n), n^alpha * m(n))` on a roughly geometric subset of depths.
    pub samples: Vec<(usize, f64, f64)>,
    pub first_decade_median: f64,
    pub last_decade_median: f64,
    pub class: ApproachClass,
}

/// Running closest approach of the orbit of `x` to `target`.
///
/// The scaled sequence `n^alpha * m(n)` is classified by comparing its
/// median over `n ∈ [10, 100]` with its median over the last decade.
pub fn approach_rate(
    sys: &SystemDescriptor,
    x: &Point,
    target: &DiscontinuitySet,
    n_max: usize,
    alpha: f64,
) -> Result<ApproachReport> {
    if n_max < 1000 {
        return Err(invalid("n_max", "must be at least 1000"));
    }
    if target.is_empty() {
        return Err(invalid("target", "target set is empty"));
    }
    sys.check(x)?;
    let last_lo = n_max / 10;
    let mut first = Vec::with_capacity(91);
    let mut last = Vec::with_capacity(n_max - last_lo + 1);
    let mut samples = Vec::new();
    let mut next_sample = 1usize;
    let mut p = *x;
    let mut m = f64::INFINITY;
    for n in 0..=n_max {
        let d = target.distance(&sys.metric, &p);
        if d == 0.0 {
            return Err(Error::ExactHit(n));
        }
        m = m.min(d);
        if n >= 1 {
            let scaled = (n as f64).powf(alpha) * m;
            if (10..=100).contains(&n) {
                first.push(scaled);
            }
            if n >= last_lo {
                last.push(scaled);
            }
            if n == next_sample || n == n_max {
                samples.push((n, m, scaled));
                next_sample = (next_sample + 1).max((next_sample as f64 * 1.05) as usize);
            }
        }
        p = sys.apply(&p);
    }
    let (a, b) = (median(&mut first), median(&mut last));
    let class = if b > 10.0 * a {
        ApproachClass::Grows
    } else if b < a / 10.0 {
        ApproachClass::Decays
    } else {
        ApproachClass::Bounded
    };
    Ok(ApproachReport { alpha, samples, first_decade_median: a, last_decade_median: b, class })
}

fn median(v: &mut [f64]) -> f64 {
    let k = v.len() / 2;
    *v.select_nth_unstable_by(k, f64::total_cmp).1
}
