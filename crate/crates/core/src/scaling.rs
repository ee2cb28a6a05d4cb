//! Gauges, least-squares slope fits and tail proxies for ratio series.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default tail window.
pub const DEFAULT_WINDOW: usize = 8;

/// Monotone comparison scale `f(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    Identity,
    Log2,
    Power { alpha: f64 },
}

impl Gauge {
    pub fn power(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(Gauge::Power { alpha })
        } else {
            Err(invalid("alpha", "power gauge exponent must be positive"))
        }
    }

    /// The three built-in gauges, with the power gauge at `alpha = 0.5`.
    pub fn all() -> [Gauge; 3] {
        [Gauge::Identity, Gauge::Log2, Gauge::Power { alpha: 0.5 }]
    }

    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            Gauge::Identity => n,
            Gauge::Log2 => n.log2(),
            Gauge::Power { alpha } => n.powf(alpha),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Gauge::Identity => "identity".into(),
            Gauge::Log2 => "log2".into(),
            Gauge::Power { alpha } => format!("power({alpha})"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" | "id" => Ok(Gauge::Identity),
            "log" | "log2" => Ok(Gauge::Log2),
            _ => {
                let inner = s
                    .strip_prefix("power(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| invalid("gauge", format!("unknown gauge `{s}`")))?;
                let alpha = inner
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| invalid("gauge", format!("bad power exponent `{inner}`")))?;
                Gauge::power(alpha)
            }
        }
    }
}

/// Geometric grid `n_min, n_min*ratio, ...` rounded to distinct integers, always ending at `n_max`.
pub fn geometric_grid(n_min: usize, n_max: usize, ratio: f64) -> Result<Vec<usize>> {
    if n_min == 0 || n_max < n_min {
        return Err(invalid("n_grid", format!("need 1 <= n_min <= n_max, got {n_min}..{n_max}")));
    }
    if !(ratio > 1.0) {
        return Err(invalid("n_grid", "grid ratio must exceed 1"));
    }
    let mut out = Vec::new();
    let mut v = n_min as f64;
    while v.round() as usize <= n_max {
        let k = v.round() as usize;
        if out.last() != Some(&k) {
            out.push(k);
        }
        v *= ratio;
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    Ok(out)
}

/// The default `sqrt(2)` grid.
pub fn sqrt2_grid(n_min: usize, n_max: usize) -> Result<Vec<usize>> {
    geometric_grid(n_min, n_max, std::f64::consts::SQRT_2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: Range<usize>,
    pub points: usize,
}

/// Ordinary least squares of `ys` on `xs` over `window`, skipping NaN entries.
pub fn fit_slope(xs: &[f64], ys: &[f64], window: Range<usize>) -> Result<SlopeFit> {
    if xs.len() != ys.len() || window.end > xs.len() || window.start > window.end {
        return Err(invalid("window", "window does not fit the series"));
    }
    let pts: Vec<(f64, f64)> =
        window.clone().map(|i| (xs[i], ys[i])).filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!("only {} usable points", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0).powi(2) * k {
        return Err(Error::DegenerateFit("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(SlopeFit { slope, intercept, r2, points: pts.len(), window })
}

/// Fit over every usable point.
pub fn fit_all(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    fit_slope(xs, ys, 0..xs.len())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailProxies {
    pub limsup: f64,
    pub liminf: f64,
    /// Number of uncensored points actually used.
    pub used: usize,
    /// True when censored points inside the window reduced it.
    pub shrunk: bool,
}

/// Max and min of the last `w` grid points; `None` marks a censored point.
pub fn tail_proxies(series: &[Option<f64>], w: usize) -> Result<TailProxies> {
    if w < 3 {
        return Err(invalid("W", "tail window must be at least 3"));
    }
    if series.len() < w {
        return Err(invalid("W", format!("series has {} points, window needs {w}", series.len())));
    }
    let tail: Vec<f64> = series[series.len() - w..].iter().flatten().copied().collect();
    if tail.is_empty() {
        return Err(Error::Resolution("every point in the tail window is censored".into()));
    }
    let shrunk = tail.len() < w;
    if shrunk {
        log::warn!("tail window shrunk from {w} to {} uncensored points", tail.len());
    }
    Ok(TailProxies {
        limsup: tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        liminf: tail.iter().copied().fold(f64::INFINITY, f64::min),
        used: tail.len(),
        shrunk,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeFit {
    pub gauge: Gauge,
    pub fit: SlopeFit,
    /// Slopes over the first and second half of the window.
    pub half_slopes: (f64, f64),
    /// The slope keeps climbing as the window moves right.
    pub drifts_upward: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingClass {
    /// No gauge sees growth.
    Bounded,
    Gauge(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeScan {
    pub fits: Vec<GaugeFit>,
    pub class: ScalingClass,
}

impl GaugeScan {
    pub fn best(&self) -> Option<&GaugeFit> {
        match self.class {
            ScalingClass::Gauge(i) => Some(&self.fits[i]),
            ScalingClass::Bounded => None,
        }
    }
}

/// Refits `ys` (log₂ counts or −log₂ measures) against every gauge.
///
/// The series is `bounded` when its total variation over the grid is below
/// `bounded_bits`; otherwise the gauge with the highest R² wins.
pub fn gauge_scan(ns: &[usize], ys: &[f64], gauges: &[Gauge], bounded_bits: f64) -> Result<GaugeScan> {
    let mut fits = Vec::with_capacity(gauges.len());
    for &g in gauges {
        let xs: Vec<f64> = ns.iter().map(|&n| g.eval(n as f64)).collect();
        let fit = fit_all(&xs, ys)?;
        let mid = xs.len() / 2;
        let first = fit_slope(&xs, ys, 0..mid + 1).map(|f| f.slope).unwrap_or(f64::NAN);
        let second = fit_slope(&xs, ys, mid..xs.len()).map(|f| f.slope).unwrap_or(f64::NAN);
        let drifts_upward = second > 1.5 * first.max(0.0) + 0.1;
        fits.push(GaugeFit { gauge: g, fit, half_slopes: (first, second), drifts_upward });
    }
    let finite: Vec<f64> = ys.iter().copied().filter(|v| v.is_finite()).collect();
    let spread =
        finite.iter().copied().fold(f64::NEG_INFINITY, f64::max) - finite.iter().copied().fold(f64::INFINITY, f64::min);
    let class = if spread < bounded_bits {
        ScalingClass::Bounded
    } else {
        let i = (0..fits.len()).max_by(|&a, &b| fits[a].fit.r2.total_cmp(&fits[b].fit.r2).then(b.cmp(&a))).unwrap_or(0);
        ScalingClass::Gauge(i)
    };
    Ok(GaugeScan { fits, class })
}

/// Slopes of consecutive differences `Δy / Δx` over `window`, skipping NaN entries.
pub fn local_slopes(xs: &[f64], ys: &[f64], window: Range<usize>) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = window.map(|i| (xs[i], ys[i])).filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    pts.windows(2).filter(|w| w[1].0 > w[0].0).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tail_examples() {
        let s = vec![Some(0.5); 10];
        let t = tail_proxies(&s, 8).unwrap();
        assert_eq!((t.limsup, t.liminf), (0.5, 0.5));

        let s: Vec<Option<f64>> = (8..=64).map(|n| Some(1.0 + 1.0 / n as f64)).collect();
        let t = tail_proxies(&s, 4).unwrap();
        assert!((t.limsup - (1.0 + 1.0 / 61.0)).abs() < 1e-12);
        assert!((t.limsup - 1.016).abs() < 1e-3 && (t.liminf - 1.0).abs() < 0.02);
    }

    #[test]
    fn censored_points_shrink_window() {
        let mut s = vec![Some(1.0); 10];
        s[9] = None;
        s[8] = Some(3.0);
        let t = tail_proxies(&s, 4).unwrap();
        assert!(t.shrunk && t.used == 3 && t.limsup == 3.0);
        assert!(tail_proxies(&[None, None, None], 3).is_err());
    }

    #[test]
    fn exact_line_fit() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let f = fit_all(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        assert!(matches!(fit_all(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn linear_data_prefers_identity_and_log_slope_drifts() {
        let ns = sqrt2_grid(4, 4096).unwrap();
        let ys: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let scan = gauge_scan(&ns, &ys, &Gauge::all(), 1.0).unwrap();
        assert_eq!(scan.class, ScalingClass::Gauge(0));
        assert!(scan.fits[1].drifts_upward);
        assert!(!scan.fits[0].drifts_upward);
    }

    #[test]
    fn logarithmic_data_prefers_log_gauge() {
        let ns = sqrt2_grid(4, 4096).unwrap();
        let ys: Vec<f64> = ns.iter().map(|&n| (n as f64).log2() + 3.0).collect();
        let scan = gauge_scan(&ns, &ys, &Gauge::all(), 1.0).unwrap();
        assert_eq!(scan.class, ScalingClass::Gauge(1));
    }

    #[test]
    fn constant_data_is_bounded() {
        let ns = sqrt2_grid(4, 4096).unwrap();
        let ys = vec![3.0; ns.len()];
        let scan = gauge_scan(&ns, &ys, &Gauge::all(), 1.0).unwrap();
        assert_eq!(scan.class, ScalingClass::Bounded);
        assert!(scan.fits.iter().all(|f| f.fit.slope.abs() < 1e-12));
    }

    #[test]
    fn grid_is_geometric_and_distinct() {
        let g = sqrt2_grid(5, 15).unwrap();
        assert_eq!(g, vec![5, 7, 10, 14, 15]);
        let g = sqrt2_grid(1, 1 << 14).unwrap();
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*g.last().unwrap(), 1 << 14);
    }

    #[test]
    fn gauge_parsing() {
        assert_eq!(Gauge::parse("log2").unwrap(), Gauge::Log2);
        assert_eq!(Gauge::parse("power(0.5)").unwrap(), Gauge::Power { alpha: 0.5 });
        assert!(Gauge::parse("power(-1)").is_err());
        assert!(Gauge::parse("cubic").is_err());
    }

    proptest! {
        #[test]
        fn slope_is_affine_equivariant(
            ys in prop::collection::vec(-100.0f64..100.0, 5..30),
            c in -10.0f64..10.0,
            b in -10.0f64..10.0,
        ) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| (i as f64).sqrt()).collect();
            let f = fit_all(&xs, &ys).unwrap();
            let scaled: Vec<f64> = ys.iter().map(|y| c * y + b).collect();
            let g = fit_all(&xs, &scaled).unwrap();
            prop_assert!((g.slope - c * f.slope).abs() <= 1e-9 * (1.0 + f.slope.abs() * c.abs()));
            prop_assert!((0.0..=1.0).contains(&f.r2));
        }

        #[test]
        fn proxies_bracket_subwindows(
            ys in prop::collection::vec(-5.0f64..5.0, 8..40),
            w in 3usize..8,
        ) {
            let s: Vec<Option<f64>> = ys.iter().copied().map(Some).collect();
            let big = tail_proxies(&s, 8).unwrap();
            let small = tail_proxies(&s, w).unwrap();
            prop_assert!(big.liminf <= small.liminf && small.liminf <= small.limsup && small.limsup <= big.limsup);
        }

        #[test]
        fn gauges_are_monotone(a in 1.0f64..1e6, d in 1e-3f64..1e3) {
            for g in Gauge::all() {
                prop_assert!(g.eval(a + d) > g.eval(a));
            }
        }
    }
}
