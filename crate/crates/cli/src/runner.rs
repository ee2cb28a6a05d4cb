//! Executes a validated plan and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mcx_core::arithmetic::entrance_time_curve;
use mcx_core::arithmetic::{continued_fraction, liouville_alpha, type_estimate};
use mcx_core::bowen::{bk_series, bk_series_nested, pi_complexity_bound, BkSeries, PiGrids};
use mcx_core::covering::{complexity_curve_on, ComplexityCurve};
use mcx_core::exponents::{exponent_series, pesin_check, ExponentSeries};
use mcx_core::iet::{approach_rate, gap_report, property_p_scan, ApproachClass};
use mcx_core::scaling::{fit_slope, gauge_scan, local_slopes, Gauge, ScalingClass};
use mcx_core::{Point, SystemDescriptor};

use crate::config::{BkScheme, ExperimentConfig};
use crate::output::{fmt_num, write_all, OutputChecksum, PlotSeries, Row, RunManifest, RunOutput, Table};
use crate::plan::{AppendixPlan, BkPlan, CurvePlan, EntrancePlan, ExponentPlan, IetPlan, Plan, Task};
use crate::RunError;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// Output directory; overrides the `OUTPUT_DIR` variable and the config.
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub output: RunOutput,
}

fn point_label(p: &Point) -> String {
    p.coords().iter().map(|c| fmt_num(*c)).collect::<Vec<_>>().join(":")
}

fn label(x: Option<&Point>, eps: f64, gauge: Option<Gauge>) -> String {
    let mut s = format!("eps={}", fmt_num(eps));
    if let Some(g) = gauge {
        s.push_str(&format!(" gauge={}", g.name()));
    }
    if let Some(x) = x {
        s.push_str(&format!(" x={}", point_label(x)));
    }
    s
}

fn bk_rows(out: &mut Vec<Row>, system: &str, bk: &BkSeries) {
    for p in &bk.points {
        let mut flags = Vec::new();
        if p.estimate.underflow {
            flags.push("underflow".to_string());
        }
        if p.ratio.is_none() {
            flags.push("censored".to_string());
        }
        if p.level > 0 {
            flags.push(format!("level={}", p.level));
        }
        out.push(Row {
            experiment: "bk_series".into(),
            system: system.into(),
            epsilon: Some(bk.eps),
            eps_prime: None,
            n: p.n as u64,
            f_of_n: p.f_of_n,
            value: p.estimate.value,
            ratio: p.ratio,
            ci: Some((p.estimate.ci_lo, p.estimate.ci_hi)),
            flags,
        });
    }
}

fn bk_fits(out: &mut RunOutput, series: &str, bk: &BkSeries, window: usize) {
    if let Ok(f) = bk.slope() {
        out.fit(series, "slope", f.slope);
        out.fit(series, "r2", f.r2);
    }
    if let Ok(f) = bk.tail_slope(window) {
        out.fit(series, "tail_slope", f.slope);
    }
    if let Ok(t) = bk.tail(window.min(bk.points.len())) {
        out.fit(series, "limsup", t.limsup);
        out.fit(series, "liminf", t.liminf);
    }
    let max_abs = bk.ratios().iter().flatten().map(|r| r.abs()).fold(0.0, f64::max);
    out.fit(series, "max_abs_ratio", max_abs);
    out.fit(series, "censored", bk.censored() as f64);
    out.plot.push(PlotSeries {
        label: series.to_string(),
        points: bk.points.iter().filter_map(|p| p.ratio.map(|r| (p.n as f64, r))).collect(),
    });
}

fn curve_rows(out: &mut Vec<Row>, system: &str, curve: &ComplexityCurve, gauge: Gauge) {
    for p in &curve.points {
        let f = gauge.eval(p.n as f64);
        let mut flags = Vec::new();
        if p.cover.sample_saturated {
            flags.push("saturated".to_string());
        }
        if p.plateau {
            flags.push("plateau".to_string());
        }
        out.push(Row {
            experiment: "complexity_curve".into(),
            system: system.into(),
            epsilon: Some(curve.eps),
            eps_prime: Some(curve.eps_prime),
            n: p.n as u64,
            f_of_n: f,
            value: p.cover.count as f64,
            ratio: (f > 0.0).then(|| (p.cover.count as f64).log2() / f),
            ci: None,
            flags,
        });
    }
}

/// Grid indices spanning the last `w` resolved points of a curve.
fn curve_window(curve: &ComplexityCurve, w: usize) -> std::ops::Range<usize> {
    let resolved: Vec<usize> =
        curve.points.iter().enumerate().filter(|(_, p)| !p.cover.sample_saturated).map(|(i, _)| i).collect();
    match resolved.len() {
        0 => 0..0,
        k => resolved[k.saturating_sub(w)]..resolved[k - 1] + 1,
    }
}

/// Slope and R² of `log₂ N̂` against the gauge over `window`.
fn curve_slope(curve: &ComplexityCurve, gauge: Gauge, window: std::ops::Range<usize>) -> Option<(f64, f64)> {
    let xs: Vec<f64> = curve.points.iter().map(|p| gauge.eval(p.n as f64)).collect();
    fit_slope(&xs, &curve.log_counts(), window).ok().map(|f| (f.slope, f.r2))
}

fn run_curves(
    out: &mut RunOutput,
    sys: &SystemDescriptor,
    plan: &CurvePlan,
    seed: u64,
    bk_table: &mut Vec<Row>,
) -> Result<Vec<ComplexityCurve>, RunError> {
    let sample = sys.sample_measure(plan.samples, seed)?;
    let mut curves = Vec::new();
    for &eps in &plan.eps {
        let curve = complexity_curve_on(sys, &sample, &plan.grid, eps, plan.eps_prime, Gauge::Identity, &plan.options)?;
        if curve.resolved() == 0 {
            return Err(RunError::Resolution(format!("every grid point is saturated at eps={eps}; raise samples")));
        }
        let counts = curve.counts();
        for &g in &plan.gauges {
            let series = format!("{} {}", sys.name, label(None, eps, Some(g)));
            curve_rows(&mut out.rows, &sys.name, &curve, g);
            if let Some((slope, r2)) = curve_slope(&curve, g, curve_window(&curve, plan.window)) {
                out.fit(&series, "slope", slope);
                out.fit(&series, "r2", r2);
            }
            if let Some((slope, _)) = curve_slope(&curve, g, 0..curve.points.len()) {
                out.fit(&series, "slope_all", slope);
            }
            out.plot.push(PlotSeries {
                label: series,
                points: curve
                    .points
                    .iter()
                    .filter(|p| !p.cover.sample_saturated && g.eval(p.n as f64) > 0.0)
                    .map(|p| (p.n as f64, (p.cover.count as f64).log2() / g.eval(p.n as f64)))
                    .collect(),
            });
        }
        let series = format!("{} {}", sys.name, label(None, eps, None));
        out.fit(&series, "resolved", curve.resolved() as f64);
        out.fit(&series, "constant", (counts.iter().all(|&c| c == counts[0])) as u8 as f64);
        out.fit(&series, "count_first", counts[0] as f64);
        out.fit(&series, "count_last", *counts.last().unwrap() as f64);
        if plan.gauges.len() > 1 {
            let resolved: Vec<usize> = curve.points.iter().filter(|p| !p.cover.sample_saturated).map(|p| p.n).collect();
            let ys: Vec<f64> = curve.log_counts().into_iter().filter(|v| v.is_finite()).collect();
            if let Ok(scan) = gauge_scan(&resolved, &ys, &plan.gauges, 1.0) {
                let class = match scan.class {
                    ScalingClass::Bounded => -1.0,
                    ScalingClass::Gauge(i) => i as f64,
                };
                out.fit(&series, "gauge_class", class);
            }
        }
        if let Some(x) = &plan.start {
            sandwich(out, sys, x, &curve, plan, seed, bk_table)?;
        }
        curves.push(curve);
    }
    Ok(curves)
}

/// Brin–Katok series at `x` on the covering grid, with local-slope proxies over
/// the resolved part of the covering curve.
fn sandwich(
    out: &mut RunOutput,
    sys: &SystemDescriptor,
    x: &Point,
    curve: &ComplexityCurve,
    plan: &CurvePlan,
    seed: u64,
    bk_table: &mut Vec<Row>,
) -> Result<(), RunError> {
    for &g in &plan.gauges {
        let bk = match plan.scheme {
            BkScheme::Plain => bk_series(sys, x, curve.eps, g, &plan.grid, plan.samples, seed)?,
            BkScheme::Nested => bk_series_nested(sys, x, curve.eps, g, &plan.grid, plan.samples, seed)?,
        };
        bk_rows(bk_table, &sys.name, &bk);
        let series = format!("{} bk {}", sys.name, label(Some(x), curve.eps, Some(g)));
        let max_abs = bk.ratios().iter().flatten().map(|r| r.abs()).fold(0.0, f64::max);
        out.fit(&series, "max_abs_ratio", max_abs);
        if let Ok(f) = bk.slope() {
            out.fit(&series, "slope", f.slope);
        }
        let window = curve_window(curve, plan.window);
        if !window.is_empty() {
            let xs: Vec<f64> = plan.grid.iter().map(|&n| g.eval(n as f64)).collect();
            let local = local_slopes(&xs, &bk.decay_bits(), window);
            let finite: Vec<f64> = local.into_iter().filter(|v| v.is_finite()).collect();
            if !finite.is_empty() {
                out.fit(&series, "local_slope_min", finite.iter().copied().fold(f64::INFINITY, f64::min));
                out.fit(&series, "local_slope_max", finite.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
    Ok(())
}

fn run_bk(out: &mut RunOutput, sys: &SystemDescriptor, plan: &BkPlan, seed: u64) -> Result<(), RunError> {
    let series_at = |x: &Point, eps: f64, g: Gauge| match plan.scheme {
        BkScheme::Plain => bk_series(sys, x, eps, g, &plan.grid, plan.samples, seed),
        BkScheme::Nested => bk_series_nested(sys, x, eps, g, &plan.grid, plan.samples, seed),
    };
    for x in &plan.starts {
        for &eps in &plan.eps {
            for &g in &plan.gauges {
                let bk = series_at(x, eps, g)?;
                bk_rows(&mut out.rows, &sys.name, &bk);
                let series = label(Some(x), eps, Some(g));
                bk_fits(out, &series, &bk, plan.window);
                if plan.invariance {
                    // Same seed at the image point.
                    let bk_t = series_at(&sys.apply(x), eps, g)?;
                    if let (Ok(a), Ok(b)) = (bk.tail_slope(plan.window), bk_t.tail_slope(plan.window)) {
                        out.fit(&series, "image_tail_slope", b.slope);
                        out.fit(&series, "invariance_gap", (a.slope - b.slope).abs());
                    }
                }
            }
            if let Some(radii) = &plan.radii {
                let grids = PiGrids { r_grid: radii.clone(), n_grid: plan.grid.clone(), eps, window: plan.window };
                let pi = pi_complexity_bound(sys, x, &grids, plan.samples, seed)?;
                let series = label(Some(x), eps, None);
                out.fit(&series, "pi_bound", pi.bound);
                out.fit(&series, "pi_measured", pi.measured);
                if let (Some(dx), Some(dy)) = (pi.local_dimension, pi.set_dimension) {
                    out.fit(&series, "local_dimension", dx);
                    out.fit(&series, "boundary_dimension", dy);
                }
            }
        }
    }
    Ok(())
}

fn exponent_rows(rows: &mut Vec<Vec<String>>, x: &Point, ser: &ExponentSeries) {
    for p in &ser.points {
        for (kind, sides, ratios) in [
            ("enclosing", &p.enclosing.sides, &p.enclosing_ratios),
            ("inscribed", &p.inscribed.sides, &p.inscribed_ratios),
        ] {
            for (i, (s, r)) in sides.iter().zip(ratios).enumerate() {
                rows.push(vec![
                    point_label(x),
                    fmt_num(ser.eps),
                    p.n.to_string(),
                    fmt_num(p.f_of_n),
                    kind.to_string(),
                    (i + 1).to_string(),
                    fmt_num(*s),
                    r.map(fmt_num).unwrap_or_default(),
                    p.companions.to_string(),
                ]);
            }
        }
    }
}

const SIDES_HEADER: [&str; 9] =
    ["start", "epsilon", "n", "f_of_n", "rectangle", "side", "length", "ratio_bits", "companions"];

fn exponent_fits(out: &mut RunOutput, series: &str, ser: &ExponentSeries) {
    for (i, t) in ser.enclosing_tail.iter().enumerate() {
        out.fit(series, format!("enclosing_{}_liminf", i + 1), t.liminf);
        out.fit(series, format!("enclosing_{}_limsup", i + 1), t.limsup);
    }
    for (i, t) in ser.inscribed_tail.iter().enumerate() {
        out.fit(series, format!("inscribed_{}_liminf", i + 1), t.liminf);
        out.fit(series, format!("inscribed_{}_limsup", i + 1), t.limsup);
    }
    out.fit(series, "truncated", ser.truncated as f64);
}

fn run_exponents(
    out: &mut RunOutput,
    sys: &SystemDescriptor,
    plan: &ExponentPlan,
    seed: u64,
    pesin: bool,
) -> Result<(), RunError> {
    let mut sides = Vec::new();
    for x in &plan.starts {
        for &eps in &plan.eps {
            let series = label(Some(x), eps, Some(plan.gauge));
            let ser = if pesin {
                let rep = pesin_check(sys, x, eps, plan.gauge, &plan.grid, plan.samples, seed, &plan.options)?;
                bk_rows(&mut out.rows, &sys.name, &rep.bk);
                out.fit(&series, "upper", rep.upper);
                out.fit(&series, "lower", rep.lower);
                out.fit(&series, "bk_slope", rep.bk_slope);
                out.fit(&series, "holds_0.5", rep.holds(0.5) as u8 as f64);
                rep.exponents
            } else {
                exponent_series(sys, x, eps, plan.gauge, &plan.grid, plan.samples, seed, &plan.options)?
            };
            exponent_rows(&mut sides, x, &ser);
            exponent_fits(out, &series, &ser);
            for i in 0..ser.enclosing_tail.len() {
                out.plot.push(PlotSeries {
                    label: format!("{series} enclosing {}", i + 1),
                    points: ser.points.iter().filter_map(|p| p.enclosing_ratios[i].map(|r| (p.n as f64, r))).collect(),
                });
                out.plot.push(PlotSeries {
                    label: format!("{series} inscribed {}", i + 1),
                    points: ser.points.iter().filter_map(|p| p.inscribed_ratios[i].map(|r| (p.n as f64, r))).collect(),
                });
            }
        }
    }
    out.tables.push(Table { file: "sides.csv".into(), header: SIDES_HEADER.map(String::from).to_vec(), rows: sides });
    Ok(())
}

fn run_iet(out: &mut RunOutput, sys: &SystemDescriptor, plan: &IetPlan, seed: u64) -> Result<(), RunError> {
    let scan = property_p_scan(&plan.iet, plan.n_max, plan.mode, plan.floor)?;
    for &(n, c) in &scan.records {
        let rep = gap_report(&plan.iet, n, plan.mode)?;
        out.rows.push(Row {
            experiment: "iet_scan".into(),
            system: sys.name.clone(),
            epsilon: None,
            eps_prime: None,
            n: n as u64,
            f_of_n: n as f64,
            value: rep.delta,
            ratio: Some(c),
            ci: None,
            flags: if rep.collided { vec!["collided".into()] } else { vec![] },
        });
    }
    out.fit("p_scan", "c_star", scan.c_star);
    out.fit("p_scan", "not_evidenced", scan.not_evidenced as u8 as f64);
    out.fit("p_scan", "first_collision", scan.first_collision.map_or(-1.0, |n| n as f64));
    out.plot.push(PlotSeries {
        label: "delta(n)*n".into(),
        points: scan.records.iter().map(|&(n, c)| (n as f64, c)).collect(),
    });
    if let Some((x, alphas, n_max)) = &plan.approach {
        let target = SystemDescriptor::iet(plan.iet.clone()).discontinuities();
        let mut rows = Vec::new();
        for &a in alphas {
            let rep = approach_rate(sys, x, &target, *n_max, a)?;
            let series = format!("approach alpha={}", fmt_num(a));
            out.fit(&series, "first_decade_median", rep.first_decade_median);
            out.fit(&series, "last_decade_median", rep.last_decade_median);
            let class = match rep.class {
                ApproachClass::Grows => 1.0,
                ApproachClass::Bounded => 0.0,
                ApproachClass::Decays => -1.0,
            };
            out.fit(&series, "class", class);
            for (n, m, s) in rep.samples {
                rows.push(vec![fmt_num(a), n.to_string(), fmt_num(m), fmt_num(s)]);
            }
        }
        out.tables.push(Table {
            file: "approach.csv".into(),
            header: ["alpha", "n", "min_distance", "scaled"].map(String::from).to_vec(),
            rows,
        });
    }
    if let Some(curve) = &plan.curve {
        let mut inner = RunOutput::new("N_hat");
        let mut bk = Vec::new();
        run_curves(&mut inner, sys, curve, seed, &mut bk)?;
        out.fits.extend(inner.fits);
        out.plot.extend(inner.plot);
        out.tables.push(row_table("curve.csv", "N_hat", inner.rows)?);
        if !bk.is_empty() {
            out.tables.push(row_table("bk.csv", "mu_hat", bk)?);
        }
    }
    Ok(())
}

/// A table in the `results.csv` layout.
fn row_table(file: &str, value_column: &'static str, rows: Vec<Row>) -> Result<Table, RunError> {
    let mut tmp = RunOutput::new(value_column);
    tmp.rows = rows;
    let bytes = tmp.results_csv()?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.map(|r| r.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
    Ok(Table { file: file.into(), header, rows })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn run_appendix(out: &mut RunOutput, sys: &SystemDescriptor, plan: &AppendixPlan, seed: u64) -> Result<(), RunError> {
    let alpha = liouville_alpha(plan.alpha_terms, plan.precision_bits)?;
    let mut arith = vec![vec!["alpha".to_string(), alpha.value.to_string()]];
    arith.push(vec!["alpha_decimal".into(), fmt_num(alpha.to_f64())]);
    arith.push(vec!["error_bits".into(), alpha.error_bits.map_or("exact".into(), |b| b.to_string())]);
    arith.push(vec!["truncated".into(), alpha.truncated.to_string()]);
    let exact = mcx_core::arithmetic::HighPrecReal::exact(alpha.value.clone(), plan.precision_bits);
    let cf = continued_fraction(&exact, 64)?;
    arith.push(vec![
        "continued_fraction".into(),
        cf.quotients.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" "),
    ]);
    let ty = type_estimate(&alpha, plan.type_range[0], plan.type_range[1])?;
    arith.push(vec!["type_estimate".into(), fmt_num(ty.nu)]);
    arith.push(vec!["type_argmax".into(), ty.argmax.to_string()]);
    out.fit("arithmetic", "type_estimate", ty.nu);
    out.tables.push(Table {
        file: "arithmetic.csv".into(),
        header: vec!["quantity".into(), "value".into()],
        rows: arith,
    });

    let mut probe = Vec::new();
    let mut minima = Vec::new();
    for (k, x) in plan.starts.iter().enumerate() {
        let bk = bk_series(sys, x, plan.eps, Gauge::Log2, &plan.grid, plan.samples, seed.wrapping_add(k as u64))?;
        bk_rows(&mut out.rows, &sys.name, &bk);
        let series = label(Some(x), plan.eps, Some(Gauge::Log2));
        let at = bk.points.iter().find(|p| p.n == plan.probe_n).and_then(|p| p.ratio);
        // A censored probe means the Bowen set emptied: the ratio is unbounded there.
        let at = at.unwrap_or(f64::INFINITY);
        out.fit(&series, "probe_ratio", at);
        probe.push(at);
        let min = bk
            .points
            .iter()
            .filter(|p| p.n >= plan.min_range[0] && p.n < plan.min_range[1])
            .filter_map(|p| p.ratio)
            .fold(f64::INFINITY, f64::min);
        out.fit(&series, "min_ratio", min);
        minima.push(min);
        out.plot.push(PlotSeries {
            label: series,
            points: bk.points.iter().filter_map(|p| p.ratio.map(|r| (p.n as f64, r))).collect(),
        });
    }
    out.fit("appendix", "median_probe_ratio", median(&mut probe));
    out.fit("appendix", "median_min_ratio", median(&mut minima));
    Ok(())
}

fn run_entrance(out: &mut RunOutput, sys: &SystemDescriptor, plan: &EntrancePlan) -> Result<(), RunError> {
    let curve = entrance_time_curve(sys, &plan.start, &plan.target, &plan.radii, plan.horizon)?;
    for e in &curve.records {
        let f = -e.r.log2();
        out.rows.push(Row {
            experiment: "entrance_time".into(),
            system: sys.name.clone(),
            epsilon: Some(e.r),
            eps_prime: None,
            n: e.tau.unwrap_or(0),
            f_of_n: f,
            value: e.tau.map_or(f64::NAN, |t| t as f64),
            ratio: e.tau.map(|t| (t as f64).log2() / f),
            ci: None,
            flags: if e.tau.is_none() { vec!["censored".into()] } else { vec![] },
        });
    }
    if let Some(f) = &curve.fit {
        out.fit("entrance", "slope", f.slope);
        out.fit("entrance", "r2", f.r2);
    }
    out.fit("entrance", "limsup_ratio", curve.limsup_ratio);
    out.fit("entrance", "censored", curve.censored as f64);
    out.plot_y_label = "log tau / -log r".into();
    out.plot.push(PlotSeries {
        label: "entrance ratio vs tau".into(),
        points: curve
            .records
            .iter()
            .filter_map(|e| e.tau.map(|t| (t as f64, (t as f64).log2() / -e.r.log2())))
            .collect(),
    });
    Ok(())
}

fn run_conjugacy(
    out: &mut RunOutput,
    conj: &SystemDescriptor,
    plain: &SystemDescriptor,
    plan: &CurvePlan,
    seed: u64,
) -> Result<(), RunError> {
    let mut bk = Vec::new();
    let a = run_curves(out, plain, plan, seed, &mut bk)?;
    let b = run_curves(out, conj, plan, seed, &mut bk)?;
    for ((ca, cb), &eps) in a.iter().zip(&b).zip(&plan.eps) {
        for &g in &plan.gauges {
            let (wa, wb) = (curve_window(ca, plan.window), curve_window(cb, plan.window));
            if let (Some(sa), Some(sb)) = (curve_slope(ca, g, wa), curve_slope(cb, g, wb)) {
                let series = format!("conjugacy {}", label(None, eps, Some(g)));
                out.fit(&series, "slope_plain", sa.0);
                out.fit(&series, "slope_conjugated", sb.0);
                out.fit(&series, "difference", (sa.0 - sb.0).abs());
            }
        }
    }
    if !bk.is_empty() {
        out.tables.push(row_table("bk.csv", "mu_hat", bk)?);
    }
    Ok(())
}

/// Runs the computation in memory; nothing is written.
pub fn execute(plan: &Plan) -> Result<RunOutput, RunError> {
    let sys = &plan.system;
    let seed = plan.seed;
    let out = match &plan.task {
        Task::Bk(p) => {
            let mut out = RunOutput::new("mu_hat");
            run_bk(&mut out, sys, p, seed)?;
            out
        }
        Task::Curve(p) => {
            let mut out = RunOutput::new("N_hat");
            let mut bk = Vec::new();
            run_curves(&mut out, sys, p, seed, &mut bk)?;
            if !bk.is_empty() {
                out.tables.push(row_table("bk.csv", "mu_hat", bk)?);
            }
            out
        }
        Task::Exponents(p) => {
            let mut out = RunOutput::new("mu_hat");
            run_exponents(&mut out, sys, p, seed, false)?;
            out
        }
        Task::Pesin(p) => {
            let mut out = RunOutput::new("mu_hat");
            run_exponents(&mut out, sys, p, seed, true)?;
            out
        }
        Task::Iet(p) => {
            let mut out = RunOutput::new("delta");
            run_iet(&mut out, sys, p, seed)?;
            out
        }
        Task::Appendix(p) => {
            let mut out = RunOutput::new("mu_hat");
            run_appendix(&mut out, sys, p, seed)?;
            out
        }
        Task::Entrance(p) => {
            let mut out = RunOutput::new("tau");
            run_entrance(&mut out, sys, p)?;
            out
        }
        Task::Conjugacy { plain, curve } => {
            let mut out = RunOutput::new("N_hat");
            run_conjugacy(&mut out, sys, plain, curve, seed)?;
            out
        }
    };
    Ok(out)
}

fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions, name: &str) -> PathBuf {
    if let Some(o) = &opts.output {
        return o.clone();
    }
    if let Ok(d) = std::env::var("OUTPUT_DIR") {
        if !d.is_empty() {
            return Path::new(&d).join(name);
        }
    }
    cfg.output.clone().unwrap_or_else(|| Path::new("results").join(name))
}

/// Loads, validates, runs and writes one configuration.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport, RunError> {
    let (mut cfg, bytes) = ExperimentConfig::load(path)?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let plan = Plan::new(&cfg)?;
    let dir = output_dir(&cfg, opts, &plan.name);
    let workers = opts.workers.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Validation(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let output = pool.install(|| execute(&plan))?;
    let artifacts = output.artifacts()?;
    let mut manifest = RunManifest {
        experiment: plan.name.clone(),
        kind: plan.kind.name().to_string(),
        config_sha256: crate::output::sha256_hex(&bytes),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: Vec::<OutputChecksum>::new(),
    };
    let written = write_all(&dir, &artifacts, &mut manifest)?;
    log::info!("wrote {} files to {}", written.len(), dir.display());
    Ok(RunReport { dir, manifest, output })
}
