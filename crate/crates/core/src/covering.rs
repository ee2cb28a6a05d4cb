//! Cover numbers by Bowen sets: greedy estimates over a sample and an exact oracle.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scaling::{fit_slope, local_slopes, tail_proxies, Gauge, SlopeFit, TailProxies};
use crate::systems::{CoordKind, Point, SystemDescriptor};

/// Mean number of covered sample points per chosen centre below which the
/// sample is too sparse to resolve the Bowen sets at that depth.
pub const DEFAULT_MIN_OCCUPANCY: f64 = 8.0;

/// Upper limit on stored companion pairs (each entry is 8 bytes).
pub const DEFAULT_MAX_PAIRS: usize = 150_000_000;

/// Orbits of the whole sample are cached when they fit in this many points.
pub const ORBIT_CACHE_POINTS: usize = 1 << 23;

const SELF: u32 = u32::MAX;

/// Uniform cell grid with cells no smaller than `eps`, so every point within
/// `eps` of a query lies in one of the adjacent cells.
pub(crate) struct NeighborIndex {
    k: usize,
    dim: usize,
    kinds: Vec<CoordKind>,
    start: Vec<usize>,
    items: Vec<u32>,
}

impl NeighborIndex {
    pub(crate) fn new(sys: &SystemDescriptor, pts: &[Point], eps: f64) -> Self {
        Self::with_kinds(sys.metric.coords.clone(), pts, eps)
    }

    fn with_kinds(kinds: Vec<CoordKind>, pts: &[Point], eps: f64) -> Self {
        let dim = kinds.len();
        let k = ((1.0 / eps).floor() as usize).clamp(1, if dim == 1 { 1 << 22 } else { 1 << 11 });
        let cells = k.pow(dim as u32);
        let ids: Vec<usize> = pts.iter().map(|p| Self::cell_of(k, p)).collect();
        let mut start = vec![0usize; cells + 1];
        for &c in &ids {
            start[c + 1] += 1;
        }
        for c in 0..cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; pts.len()];
        for (i, &c) in ids.iter().enumerate() {
            items[fill[c]] = i as u32;
            fill[c] += 1;
        }
        Self { k, dim, kinds, start, items }
    }

    fn coord_cell(k: usize, v: f64) -> usize {
        ((v * k as f64) as usize).min(k - 1)
    }

    fn cell_of(k: usize, p: &Point) -> usize {
        let c = p.coords();
        let mut id = Self::coord_cell(k, c[0]);
        if c.len() == 2 {
            id = id * k + Self::coord_cell(k, c[1]);
        }
        id
    }

    fn axis_cells(&self, axis: usize, v: f64) -> Vec<usize> {
        let k = self.k as isize;
        let c = Self::coord_cell(self.k, v) as isize;
        let mut out: Vec<usize> = (c - 1..=c + 1)
            .filter_map(|d| match self.kinds[axis] {
                CoordKind::Circle => Some(d.rem_euclid(k) as usize),
                CoordKind::Interval => (0..k).contains(&d).then_some(d as usize),
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Calls `f` with every indexed point in the cells adjacent to `p`.
    pub(crate) fn for_candidates(&self, p: &Point, mut f: impl FnMut(u32)) {
        let xs = self.axis_cells(0, p.x());
        let ys = if self.dim == 2 { self.axis_cells(1, p.y()) } else { vec![0] };
        for &cx in &xs {
            for &cy in &ys {
                let id = if self.dim == 2 { cx * self.k + cy } else { cx };
                for &j in &self.items[self.start[id]..self.start[id + 1]] {
                    f(j);
                }
            }
        }
    }
}

/// First time the orbits of `a` and `b` are more than `eps` apart, stepping both; capped at `cap`.
#[inline]
pub fn pair_separation(sys: &SystemDescriptor, a: &Point, b: &Point, eps: f64, cap: usize) -> usize {
    let (mut p, mut q) = (*a, *b);
    for t in 0..cap {
        if sys.metric.distance(&p, &q) > eps {
            return t;
        }
        p = sys.apply(&p);
        q = sys.apply(&q);
    }
    cap
}

/// Companion pairs of a fixed sample with their separation times.
///
/// `j` belongs to the Bowen set of sample point `i` at depth `n` iff their
/// separation time exceeds `n`, so one table serves every depth in
/// `floor..=n_max`. Rows are sorted by decreasing separation time and
/// contain `i` itself.
pub struct PairTable {
    m: usize,
    floor: usize,
    n_max: usize,
    offsets: Vec<usize>,
    entries: Vec<(u32, u32)>,
}

/// Rows of companion pairs found through the neighbour grid, `j > i` only.
fn candidate_rows(
    sys: &SystemDescriptor,
    sample: &[Point],
    eps: f64,
    floor: usize,
    cap: usize,
) -> Vec<Vec<(u32, u32)>> {
    let m = sample.len();
    // A companion at depth `floor` is within eps at time 0 and at time `floor`, so
    // one-dimensional samples are indexed by the pair (x, T^floor x).
    let lifted: Option<Vec<Point>> = (sys.dim() == 1 && floor > 0).then(|| {
        sample
            .par_iter()
            .map(|p| {
                let q = (0..floor).fold(*p, |q, _| sys.apply(&q));
                Point::new2(p.x(), q.x())
            })
            .collect()
    });
    let index = match &lifted {
        Some(l) => NeighborIndex::with_kinds(vec![sys.metric.coords[0]; 2], l, eps),
        None => NeighborIndex::new(sys, sample, eps),
    };
    let cache: Option<Vec<Point>> = (m.saturating_mul(cap) <= ORBIT_CACHE_POINTS).then(|| {
        sample.par_iter().flat_map_iter(|p| std::iter::successors(Some(*p), |q| Some(sys.apply(q))).take(cap)).collect()
    });
    let rows: Vec<Vec<(u32, u32)>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let a = &sample[i];
            let key = lifted.as_ref().map_or(a, |l| &l[i]);
            let mut row = Vec::new();
            index.for_candidates(key, |j| {
                if (j as usize) <= i {
                    return;
                }
                let b = &sample[j as usize];
                if sys.metric.distance(a, b) > eps {
                    return;
                }
                let s = match &cache {
                    Some(orbits) => {
                        let j = j as usize;
                        sys.separation_time_cached(
                            &orbits[i * cap..(i + 1) * cap],
                            &orbits[j * cap..(j + 1) * cap],
                            eps,
                        )
                    }
                    None => pair_separation(sys, a, b, eps, cap),
                };
                if s > floor {
                    row.push((j, s as u32));
                }
            });
            row
        })
        .collect();
    rows
}

/// Fast path for a sample that is itself one orbit segment, as an empirical
/// measure produces: the pair `(i, i + d)` at time `t` is `(x_{i+t}, x_{i+d+t})`,
/// so one backward scan per lag `d` gives every separation time with that lag.
fn orbit_sample_rows(
    sys: &SystemDescriptor,
    sample: &[Point],
    eps: f64,
    floor: usize,
    cap: usize,
) -> Option<Vec<Vec<(u32, u32)>>> {
    let m = sample.len();
    if m < 2 || !sample.windows(2).all(|w| sys.apply(&w[0]) == w[1]) {
        return None;
    }
    let mut orbit = sample.to_vec();
    orbit.reserve(cap);
    for _ in 0..cap {
        let next = sys.apply(orbit.last().unwrap());
        orbit.push(next);
    }
    let per_lag: Vec<Vec<(u32, u32, u32)>> = (1..m)
        .into_par_iter()
        .map(|d| {
            // Index of the first time a pair with this lag is more than eps apart, scanning backward.
            let len = m - d + cap - 1;
            let mut found = Vec::new();
            let mut next_bad = usize::MAX;
            for k in (0..len).rev() {
                if sys.metric.distance(&orbit[k], &orbit[k + d]) > eps {
                    next_bad = k;
                }
                if k < m - d {
                    let s = next_bad.saturating_sub(k).min(cap);
                    if s > floor {
                        found.push((k as u32, (k + d) as u32, s as u32));
                    }
                }
            }
            found
        })
        .collect();
    let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m];
    for lag in per_lag {
        for (i, j, s) in lag {
            rows[i as usize].push((j, s));
        }
    }
    Some(rows)
}

impl PairTable {
    pub fn build(
        sys: &SystemDescriptor,
        sample: &[Point],
        eps: f64,
        floor: usize,
        n_max: usize,
        max_pairs: usize,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(invalid("epsilon", format!("{eps} must lie in (0, 1/2)")));
        }
        if n_max >= u32::MAX as usize - 1 {
            return Err(invalid("n", "depth too large"));
        }
        let m = sample.len();
        let cap = n_max + 1;
        let rows = match orbit_sample_rows(sys, sample, eps, floor, cap) {
            Some(rows) => rows,
            None => candidate_rows(sys, sample, eps, floor, cap),
        };
        let pairs: usize = rows.iter().map(Vec::len).sum();
        if 2 * pairs + m > max_pairs {
            return Err(Error::SizeGuard(format!(
                "{pairs} companion pairs exceed the cap of {max_pairs} entries; lower M or raise the cap"
            )));
        }
        let mut deg = vec![1usize; m];
        for (i, row) in rows.iter().enumerate() {
            deg[i] += row.len();
            for &(j, _) in row {
                deg[j as usize] += 1;
            }
        }
        let mut offsets = vec![0usize; m + 1];
        for i in 0..m {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut entries = vec![(0u32, 0u32); offsets[m]];
        for i in 0..m {
            entries[fill[i]] = (i as u32, SELF);
            fill[i] += 1;
        }
        for (i, row) in rows.into_iter().enumerate() {
            for (j, s) in row {
                entries[fill[i]] = (j, s);
                fill[i] += 1;
                entries[fill[j as usize]] = (i as u32, s);
                fill[j as usize] += 1;
            }
        }
        let mut rest = entries.as_mut_slice();
        let mut chunks = Vec::with_capacity(m);
        for i in 0..m {
            let (head, tail) = rest.split_at_mut(deg[i]);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().for_each(|row| row.sort_unstable_by_key(|&(j, s)| (Reverse(s), j)));
        Ok(Self { m, floor, n_max, offsets, entries })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Members of the Bowen set of sample point `i` at depth `n`.
    pub fn members(&self, i: usize, n: usize) -> &[(u32, u32)] {
        debug_assert!(n >= self.floor && n <= self.n_max);
        let row = &self.entries[self.offsets[i]..self.offsets[i + 1]];
        let k = row.partition_point(|&(_, s)| s as usize > n);
        &row[..k]
    }

    pub fn stored_pairs(&self) -> usize {
        (self.entries.len() - self.m) / 2
    }
}

/// Lazy greedy set cover; ties go to the lowest index.
fn greedy_select<'a>(m: usize, need: usize, members: impl Fn(usize) -> &'a [(u32, u32)]) -> (Vec<usize>, usize) {
    let mut covered = vec![false; m];
    let mut n_cov = 0usize;
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = (0..m).map(|i| (members(i).len(), Reverse(i))).collect();
    let mut centers = Vec::new();
    while n_cov < need {
        let Some((g, Reverse(i))) = heap.pop() else { break };
        let fresh = members(i).iter().filter(|&&(j, _)| !covered[j as usize]).count();
        if fresh < g {
            if fresh > 0 {
                heap.push((fresh, Reverse(i)));
            }
            continue;
        }
        for &(j, _) in members(i) {
            if !covered[j as usize] {
                covered[j as usize] = true;
                n_cov += 1;
            }
        }
        centers.push(i);
    }
    (centers, n_cov)
}

fn needed(m: usize, target: f64) -> usize {
    ((target * m as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverResult {
    pub centers: Vec<usize>,
    pub count: usize,
    pub covered: usize,
    pub covered_fraction: f64,
    pub n: usize,
    pub eps: f64,
    pub eps_prime: f64,
    pub sample_size: usize,
    /// Mean covered points per centre fell below the occupancy threshold.
    pub sample_saturated: bool,
}

impl CoverResult {
    pub fn occupancy(&self) -> f64 {
        self.covered as f64 / self.count.max(1) as f64
    }
}

fn check_eps_prime(eps_prime: f64) -> Result<()> {
    if eps_prime > 0.0 && eps_prime <= 0.5 {
        Ok(())
    } else {
        Err(invalid("eps_prime", format!("{eps_prime} must lie in (0, 1/2]")))
    }
}

fn cover_at(table: &PairTable, n: usize, eps: f64, eps_prime: f64, min_occupancy: f64) -> CoverResult {
    let m = table.len();
    let (centers, covered) = greedy_select(m, needed(m, 1.0 - eps_prime), |i| table.members(i, n));
    assert!(covered as f64 >= (1.0 - eps_prime) * m as f64 - 1e-9, "every point covers itself");
    let count = centers.len();
    CoverResult {
        count,
        covered,
        covered_fraction: covered as f64 / m as f64,
        n,
        eps,
        eps_prime,
        sample_size: m,
        sample_saturated: (covered as f64) < min_occupancy * count as f64,
        centers,
    }
}

/// Greedy cover of `sample` by Bowen sets `B(n, x_i, eps)` centred at sample points.
pub fn greedy_cover(
    sys: &SystemDescriptor,
    sample: &[Point],
    n: usize,
    eps: f64,
    eps_prime: f64,
) -> Result<CoverResult> {
    check_eps_prime(eps_prime)?;
    if sample.is_empty() {
        return Err(invalid("M", "sample is empty"));
    }
    let table = PairTable::build(sys, sample, eps, n, n, DEFAULT_MAX_PAIRS)?;
    Ok(cover_at(&table, n, eps, eps_prime, DEFAULT_MIN_OCCUPANCY))
}

/// Number of sample points inside the union of the chosen Bowen sets, by direct replay.
pub fn replay_coverage(
    sys: &SystemDescriptor,
    sample: &[Point],
    centers: &[usize],
    n: usize,
    eps: f64,
) -> Result<usize> {
    for p in sample {
        sys.check(p)?;
    }
    Ok(sample
        .par_iter()
        .filter(|y| centers.iter().any(|&c| sys.sup_orbit_distance(&sample[c], y, n, eps).map_or(false, |d| d <= eps)))
        .count())
}

/// Greedy cover on an explicit membership matrix (`matrix[i][j]`: centre `i` covers point `j`).
pub fn greedy_cover_matrix(matrix: &[Vec<bool>], target: f64) -> Result<Vec<usize>> {
    let m = check_matrix(matrix, usize::MAX)?;
    let rows: Vec<Vec<(u32, u32)>> =
        matrix.iter().map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| (j as u32, 0)).collect()).collect();
    let (centers, covered) = greedy_select(m, needed(m, target), |i| rows[i].as_slice());
    if covered < needed(m, target) {
        return Err(Error::Undefined("the target fraction is not reachable".into()));
    }
    Ok(centers)
}

fn check_matrix(matrix: &[Vec<bool>], max: usize) -> Result<usize> {
    let m = matrix.len();
    if m == 0 {
        return Err(invalid("matrix", "empty membership matrix"));
    }
    if m > max {
        return Err(Error::SizeGuard(format!("exact cover supports at most {max} points, got {m}")));
    }
    if matrix.iter().any(|r| r.len() != m) {
        return Err(invalid("matrix", "membership matrix must be square"));
    }
    Ok(m)
}

/// True minimum number of centres whose rows cover at least `target` of the points.
pub fn exact_cover_count(matrix: &[Vec<bool>], target: f64) -> Result<usize> {
    let m = check_matrix(matrix, 24)?;
    let need = needed(m, target) as u32;
    let rows: Vec<u32> = matrix
        .iter()
        .map(|r| r.iter().enumerate().fold(0u32, |acc, (j, &b)| if b { acc | 1 << j } else { acc }))
        .collect();
    if rows.iter().fold(0u32, |a, r| a | r).count_ones() < need {
        return Err(Error::Undefined("the target fraction is not reachable".into()));
    }
    if need == 0 {
        return Ok(0);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| Reverse(rows[i].count_ones()));
    let sorted: Vec<u32> = order.iter().map(|&i| rows[i]).collect();
    let best_pop = sorted[0].count_ones();
    fn search(rows: &[u32], start: usize, left: u32, mask: u32, need: u32, best_pop: u32) -> bool {
        let have = mask.count_ones();
        if have >= need {
            return true;
        }
        if left == 0 || have + left * best_pop < need {
            return false;
        }
        (start..rows.len()).any(|i| {
            let next = mask | rows[i];
            next != mask && search(rows, i + 1, left - 1, next, need, best_pop)
        })
    }
    for k in 1..=m as u32 {
        if search(&sorted, 0, k, 0, need, best_pop) {
            return Ok(k as usize);
        }
    }
    unreachable!("the full set of centres reaches the target")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub f_of_n: f64,
    pub cover: CoverResult,
    /// `log₂ N̂ / f(n)`; `None` when `f(n) <= 0`.
    pub ratio: Option<f64>,
    /// `N̂` did not change since the previous grid point.
    pub plateau: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexityCurve {
    pub gauge: Gauge,
    pub eps: f64,
    pub eps_prime: f64,
    pub sample_size: usize,
    pub points: Vec<CurvePoint>,
}

impl ComplexityCurve {
    pub fn counts(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.cover.count).collect()
    }

    pub fn f_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f_of_n).collect()
    }

    /// `log₂ N̂` per grid point, NaN where the sample is saturated.
    pub fn log_counts(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| if p.cover.sample_saturated { f64::NAN } else { (p.cover.count as f64).log2() })
            .collect()
    }

    pub fn resolved(&self) -> usize {
        self.points.iter().filter(|p| !p.cover.sample_saturated).count()
    }

    /// Least-squares slope of `log₂ N̂` against `f(n)` over the resolved points.
    pub fn slope(&self) -> Result<SlopeFit> {
        fit_slope(&self.f_values(), &self.log_counts(), 0..self.points.len())
    }

    pub fn local_slopes(&self) -> Vec<f64> {
        local_slopes(&self.f_values(), &self.log_counts(), 0..self.points.len())
    }

    pub fn tail(&self, w: usize) -> Result<TailProxies> {
        let r: Vec<Option<f64>> =
            self.points.iter().map(|p| if p.cover.sample_saturated { None } else { p.ratio }).collect();
        tail_proxies(&r, w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveOptions {
    pub min_occupancy: f64,
    pub max_pairs: usize,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self { min_occupancy: DEFAULT_MIN_OCCUPANCY, max_pairs: DEFAULT_MAX_PAIRS }
    }
}

/// Greedy covers at every grid depth on one fixed sample.
pub fn complexity_curve(
    sys: &SystemDescriptor,
    m: usize,
    n_grid: &[usize],
    eps: f64,
    eps_prime: f64,
    gauge: Gauge,
    seed: u64,
) -> Result<ComplexityCurve> {
    let sample = sys.sample_measure(m, seed)?;
    complexity_curve_on(sys, &sample, n_grid, eps, eps_prime, gauge, &CurveOptions::default())
}

pub fn complexity_curve_on(
    sys: &SystemDescriptor,
    sample: &[Point],
    n_grid: &[usize],
    eps: f64,
    eps_prime: f64,
    gauge: Gauge,
    opts: &CurveOptions,
) -> Result<ComplexityCurve> {
    check_eps_prime(eps_prime)?;
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid", "grid must be non-empty and strictly increasing"));
    }
    let table = PairTable::build(sys, sample, eps, n_grid[0], *n_grid.last().unwrap(), opts.max_pairs)?;
    log::info!("pair table: {} points, {} companion pairs", table.len(), table.stored_pairs());
    let mut points: Vec<CurvePoint> = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let cover = cover_at(&table, n, eps, eps_prime, opts.min_occupancy);
        let f = gauge.eval(n as f64);
        let plateau = points.last().map_or(false, |p| p.cover.count == cover.count);
        let ratio = (f > 0.0).then(|| (cover.count as f64).log2() / f);
        points.push(CurvePoint { n, f_of_n: f, cover, ratio, plateau });
    }
    Ok(ComplexityCurve { gauge, eps, eps_prime, sample_size: sample.len(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::systems::GOLDEN;
    use rand::Rng;

    fn brute_exact(matrix: &[Vec<bool>], target: f64) -> usize {
        let m = matrix.len();
        let need = needed(m, target);
        (0u32..1 << m)
            .filter(|s| {
                let mut cov = vec![false; m];
                for i in 0..m {
                    if s >> i & 1 == 1 {
                        for j in 0..m {
                            cov[j] |= matrix[i][j];
                        }
                    }
                }
                cov.iter().filter(|&&b| b).count() >= need
            })
            .map(|s| s.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn exact_examples() {
        let id: Vec<Vec<bool>> = (0..4).map(|i| (0..4).map(|j| i == j).collect()).collect();
        assert_eq!(exact_cover_count(&id, 1.0).unwrap(), 4);
        let mut one = id.clone();
        one[0] = vec![true; 4];
        assert_eq!(exact_cover_count(&one, 1.0).unwrap(), 1);
        let big = vec![vec![true; 25]; 25];
        assert!(matches!(exact_cover_count(&big, 1.0), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut r = rng::sequential(17, 0);
        for _ in 0..30 {
            let m = r.gen_range(2..=12);
            let pts: Vec<(f64, f64)> = (0..m).map(|_| (r.gen(), r.gen())).collect();
            let rad: f64 = r.gen_range(0.1..0.5);
            let mat: Vec<Vec<bool>> = pts
                .iter()
                .map(|a| pts.iter().map(|b| (a.0 - b.0).abs().max((a.1 - b.1).abs()) <= rad).collect())
                .collect();
            for t in [0.5, 0.75, 1.0] {
                assert_eq!(exact_cover_count(&mat, t).unwrap(), brute_exact(&mat, t));
            }
        }
    }

    #[test]
    fn orbit_sample_path_matches_neighbour_path() {
        let sys = SystemDescriptor::logistic(crate::systems::LAMBDA_INFINITY, 500);
        let sample = sys.sample_measure(600, 3).unwrap();
        let mut fast = orbit_sample_rows(&sys, &sample, 0.02, 4, 65).unwrap();
        let mut slow = candidate_rows(&sys, &sample, 0.02, 4, 65);
        for r in fast.iter_mut().chain(slow.iter_mut()) {
            r.sort_unstable();
        }
        assert_eq!(fast, slow);
        assert!(fast.iter().map(Vec::len).sum::<usize>() > 1000);
        // A shuffled sample is not an orbit segment.
        let mut shuffled = sample.clone();
        shuffled.swap(0, 1);
        assert!(orbit_sample_rows(&sys, &shuffled, 0.02, 4, 65).is_none());
    }

    fn regular(m: usize) -> Vec<Point> {
        (0..m).map(|i| Point::new1(i as f64 / m as f64)).collect()
    }

    #[test]
    fn identity_circle_needs_nine_arcs() {
        let id = SystemDescriptor::identity(1);
        let sample = regular(20_000);
        for n in [0, 7, 50] {
            let c = greedy_cover(&id, &sample, n, 0.05, 0.1).unwrap();
            assert_eq!(c.count, 9, "n={n}");
            assert!(c.covered_fraction >= 0.9);
        }
    }

    #[test]
    fn rotation_cover_does_not_grow() {
        let rot = SystemDescriptor::rotation(GOLDEN);
        let sample = regular(1_024);
        let c0 = greedy_cover(&rot, &sample, 0, 0.05, 0.1).unwrap();
        let c1 = greedy_cover(&rot, &sample, 10_000, 0.05, 0.1).unwrap();
        assert_eq!(c0.count, 9);
        assert_eq!(c0.centers, c1.centers);
    }

    #[test]
    fn certificate_replays() {
        let d = SystemDescriptor::doubling();
        let sample = d.sample_measure(3_000, 5).unwrap();
        let c = greedy_cover(&d, &sample, 4, 0.02, 0.2).unwrap();
        assert_eq!(replay_coverage(&d, &sample, &c.centers, 4, 0.02).unwrap(), c.covered);
        assert!(c.covered_fraction >= 0.8);
    }

    #[test]
    fn table_matches_membership_oracle() {
        let cp = SystemDescriptor::casati_prosen(GOLDEN, 2f64.sqrt() - 1.0);
        let sample = cp.sample_measure(1_500, 6).unwrap();
        let table = PairTable::build(&cp, &sample, 0.1, 0, 20, DEFAULT_MAX_PAIRS).unwrap();
        for i in (0..sample.len()).step_by(37) {
            for n in [0, 3, 20] {
                let mut got: Vec<u32> = table.members(i, n).iter().map(|e| e.0).collect();
                got.sort_unstable();
                let want: Vec<u32> = (0..sample.len() as u32)
                    .filter(|&j| cp.sup_orbit_distance(&sample[i], &sample[j as usize], n, 0.1).unwrap() <= 0.1)
                    .collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn greedy_within_log_factor_of_exact() {
        let mut r = rng::sequential(19, 0);
        for _ in 0..20 {
            let m = 20;
            let pts: Vec<f64> = (0..m).map(|_| r.gen()).collect();
            let rad = r.gen_range(0.02..0.2);
            let mat: Vec<Vec<bool>> = pts.iter().map(|a| pts.iter().map(|b| (a - b).abs() <= rad).collect()).collect();
            let g = greedy_cover_matrix(&mat, 1.0).unwrap().len();
            let e = exact_cover_count(&mat, 1.0).unwrap();
            assert!(e <= g && g as f64 <= e as f64 * (1.0 + (m as f64).ln()));
        }
    }

    #[test]
    fn doubling_curve_grows_one_bit_per_step() {
        let d = SystemDescriptor::doubling();
        let grid: Vec<usize> = (2..=8).collect();
        let c = complexity_curve(&d, 100_000, &grid, 0.01, 0.1, Gauge::Identity, 7).unwrap();
        let counts = c.counts();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        let fit = c.slope().unwrap();
        assert!((fit.slope - 1.0).abs() < 0.15, "{fit:?} {counts:?}");
    }

    #[test]
    fn saturation_is_flagged() {
        let d = SystemDescriptor::doubling();
        let c = complexity_curve(&d, 5_000, &[2, 12], 0.01, 0.1, Gauge::Identity, 7).unwrap();
        assert!(!c.points[0].cover.sample_saturated);
        assert!(c.points[1].cover.sample_saturated);
    }
}
