//! Acceptance criteria: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Each criterion runs its bundled config from `configs/` in memory. Runtime budgets
//! are checked against wall time on the current machine.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use mcx_cli::{execute, run_file, ExperimentConfig, Plan, RunOptions, RunOutput};
use mcx_core::covering::{exact_cover_count, greedy_cover_matrix, pair_separation};
use mcx_core::exponents::min_enclosing_sides;
use mcx_core::rng;
use mcx_core::{Point, SystemDescriptor};
use rand::Rng;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.cfg"))
}

/// Runs a bundled config once; later criteria reuse the output.
fn run(name: &str) -> Result<Arc<RunOutput>, String> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<RunOutput>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(out) = cache.lock().unwrap().get(name) {
        return Ok(out.clone());
    }
    let (cfg, _) = ExperimentConfig::load(&config(name)).map_err(|e| format!("{name}: {e}"))?;
    let plan = Plan::new(&cfg).map_err(|e| format!("{name}: {e}"))?;
    let out = Arc::new(execute(&plan).map_err(|e| format!("{name}: {e}"))?);
    cache.lock().unwrap().insert(name.to_string(), out.clone());
    Ok(out)
}

/// First fit whose series starts with `prefix`.
fn fit(out: &RunOutput, prefix: &str, quantity: &str) -> Result<f64, String> {
    out.fits
        .iter()
        .find(|f| f.series.starts_with(prefix) && f.quantity == quantity)
        .map(|f| f.value)
        .ok_or_else(|| format!("no fit `{quantity}` for series `{prefix}`"))
}

fn fits<'a>(out: &'a RunOutput, quantity: &'a str) -> impl Iterator<Item = (&'a str, f64)> + 'a {
    out.fits.iter().filter(move |f| f.quantity == quantity).map(|f| (f.series.as_str(), f.value))
}

struct Check {
    pass: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { pass: true, notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes.push(if ok { note } else { format!("!{note}") });
    }

    fn within(&mut self, what: &str, v: f64, lo: f64, hi: f64) {
        self.expect(v >= lo && v <= hi, format!("{what}={v:.4} in [{lo}, {hi}]"));
    }
}

fn ac1(c: &mut Check) -> Result<(), String> {
    let out = run("ac1_doubling")?;
    let bk = fit(&out, "doubling bk eps=0.001 gauge=identity", "slope")?;
    c.within("bk_slope", bk, 0.9, 1.1);
    let cover = fit(&out, "doubling eps=0.001 gauge=identity", "slope")?;
    c.within("cover_slope", cover, 0.85, 1.15);
    Ok(())
}

fn ac2(c: &mut Check) -> Result<(), String> {
    for name in ["ac2_rotation", "ac2_identity"] {
        let out = run(name)?;
        let constant = fits(&out, "constant").map(|(_, v)| v).collect::<Vec<_>>();
        c.expect(!constant.is_empty() && constant.iter().all(|&v| v == 1.0), format!("{name} N_hat constant"));
        let gauges = fits(&out, "max_abs_ratio").count();
        let worst = fits(&out, "max_abs_ratio").map(|(_, v)| v).fold(0.0, f64::max);
        c.expect(gauges == 3, format!("{name} gauges={gauges}"));
        c.within(&format!("{name} max|r|"), worst, 0.0, 0.05);
    }
    Ok(())
}

fn ac3(c: &mut Check) -> Result<(), String> {
    let out = run("iet_typical")?;
    c.within("c_star", fit(&out, "p_scan", "c_star")?, 0.01, f64::INFINITY);
    c.within("log_slope", fit(&out, "iet eps=0.01 gauge=log2", "slope")?, 0.7, 1.3);
    c.within("r2", fit(&out, "iet eps=0.01 gauge=log2", "r2")?, 0.9, 1.0);
    Ok(())
}

fn ac4(c: &mut Check) -> Result<(), String> {
    let out = run("ac4_casati_prosen")?;
    let n_max = out.rows.iter().map(|r| r.n).max().unwrap_or(0);
    c.expect(n_max == 8192, format!("n_max={n_max}"));
    for eps in ["0.05", "0.02"] {
        let tail = fit(&out, &format!("eps={eps} gauge=log2"), "tail_slope")?;
        c.within(&format!("tail_slope(eps={eps})"), tail, 0.5, 3.5);
    }
    Ok(())
}

fn ac5(c: &mut Check) -> Result<(), String> {
    let out = run("feigenbaum")?;
    for eps in [0.02, 0.005] {
        let at = |n: u64| {
            out.rows
                .iter()
                .find(|r| r.epsilon == Some(eps) && r.n == n && r.experiment == "complexity_curve")
                .map(|r| r.value)
        };
        match (at(1 << 10), at(1 << 14)) {
            (Some(a), Some(b)) => c.expect(a == b, format!("N_hat(eps={eps}) {a} vs {b}")),
            _ => c.expect(false, format!("eps={eps} missing n=2^10 or 2^14")),
        }
    }
    Ok(())
}

fn ac6(c: &mut Check) -> Result<(), String> {
    let out = run("ac6_appendix")?;
    let starts = fits(&out, "probe_ratio").count();
    c.expect(starts == 20, format!("starts={starts}"));
    c.within("median_probe_ratio", fit(&out, "appendix", "median_probe_ratio")?, 0.7, f64::INFINITY);
    c.within("median_min_ratio", fit(&out, "appendix", "median_min_ratio")?, f64::NEG_INFINITY, 0.3);
    Ok(())
}

/// Covering slope against the local Brin–Katok slopes over the same window.
fn sandwich(c: &mut Check, out: &RunOutput, tag: &str) -> Result<(), String> {
    let mut seen = 0;
    for (series, lo) in fits(out, "local_slope_min") {
        let hi = fit(out, series, "local_slope_max")?;
        let curve = series.replacen(" bk ", " ", 1);
        let curve = curve.split(" x=").next().unwrap_or_default();
        let cover = fit(out, curve, "slope")?;
        seen += 1;
        c.expect(
            lo - 0.2 <= cover && cover <= hi + 0.2,
            format!("{tag}: {lo:.3}-0.2 <= cover {cover:.3} <= {hi:.3}+0.2"),
        );
    }
    c.expect(seen > 0, format!("{tag}: {seen} sandwich series"));
    Ok(())
}

fn ac7(c: &mut Check) -> Result<(), String> {
    for (name, tag) in [
        ("ac1_doubling", "doubling"),
        ("ac2_rotation", "rotation"),
        ("ac2_identity", "identity"),
        ("iet_typical", "iet"),
        ("ac7_casati_prosen", "casati_prosen"),
    ] {
        sandwich(c, &*run(name)?, tag)?;
    }
    for name in ["ac7_invariance_doubling", "ac7_invariance_iet"] {
        let out = run(name)?;
        let gap = fits(&out, "invariance_gap").map(|(_, v)| v).next().ok_or(format!("{name}: no invariance gap"))?;
        c.within(&format!("{name} gap"), gap, 0.0, 0.1);
    }
    let out = run("ac7_conjugacy")?;
    c.within("conjugacy_difference", fit(&out, "conjugacy", "difference")?, 0.0, 0.2);
    Ok(())
}

fn ac8(c: &mut Check) -> Result<(), String> {
    let doubling = SystemDescriptor::doubling();
    let mut ok_ratio = 0;
    let mut ok_nested = 0;
    for inst in 0..50u64 {
        let mut r = rng::indexed(8, rng::stream::TOY, inst);
        let m = r.gen_range(6..=20usize);
        let eps = r.gen_range(0.02..0.2);
        let pts: Vec<Point> = (0..m).map(|_| Point::new1(r.gen::<f64>())).collect();
        let sep: Vec<Vec<usize>> =
            pts.iter().map(|a| pts.iter().map(|b| pair_separation(&doubling, a, b, eps, 16)).collect()).collect();
        let matrix =
            |n: usize| -> Vec<Vec<bool>> { sep.iter().map(|row| row.iter().map(|&s| s > n).collect()).collect() };
        let target = 0.9;
        let mut prev = 0;
        let mut nested = true;
        let mut bounded = true;
        for n in 0..6 {
            let mat = matrix(n);
            let exact = exact_cover_count(&mat, target).map_err(|e| e.to_string())?;
            let greedy = greedy_cover_matrix(&mat, target).map_err(|e| e.to_string())?.len();
            let bound = exact as f64 * (1.0 + (m as f64).ln());
            bounded &= greedy >= exact && greedy as f64 <= bound;
            nested &= exact >= prev;
            prev = exact;
        }
        ok_ratio += bounded as usize;
        ok_nested += nested as usize;
    }
    c.expect(ok_ratio == 50, format!("greedy within [exact, exact(1+ln M)] on {ok_ratio}/50"));
    c.expect(ok_nested == 50, format!("exact monotone in depth on {ok_nested}/50"));

    let mut worst = 0.0f64;
    for inst in 0..100u64 {
        let mut r = rng::indexed(81, rng::stream::TOY, inst);
        let k = r.gen_range(3..40);
        let pts: Vec<[f64; 2]> = (0..k).map(|_| [r.gen_range(-1.0..1.0), r.gen_range(-0.3..0.3)]).collect();
        let calipers = min_enclosing_sides(&pts).sides[0];
        worst = worst.max((calipers - brute_width(&pts, 3600)).abs());
    }
    c.expect(worst <= 1e-6, format!("calipers vs grid max diff {worst:.2e} <= 1e-6"));
    Ok(())
}

/// Orientation grid with ternary refinement around the best cell.
fn brute_width(pts: &[[f64; 2]], grid: usize) -> f64 {
    let width = |t: f64| {
        let (s, co) = t.sin_cos();
        let ps = pts.iter().map(|p| -s * p[0] + co * p[1]);
        let (lo, hi) = ps.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    let step = std::f64::consts::PI / grid as f64;
    let k = (0..grid).min_by(|&a, &b| width(a as f64 * step).total_cmp(&width(b as f64 * step))).unwrap();
    let (mut lo, mut hi) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if width(m1) < width(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    width(0.5 * (lo + hi))
}

fn ac9(c: &mut Check) -> Result<(), String> {
    let out = run("ac9_approach")?;
    let first = |a: &str| fit(&out, &format!("approach alpha={a}"), "first_decade_median");
    let last = |a: &str| fit(&out, &format!("approach alpha={a}"), "last_decade_median");
    let up = last("1.5")? / first("1.5")?;
    let down = first("0.5")? / last("0.5")?;
    c.within("alpha=1.5 last/first", up, 10.0, f64::INFINITY);
    c.within("alpha=0.5 first/last", down, 10.0, f64::INFINITY);
    Ok(())
}

fn ac10(c: &mut Check) -> Result<(), String> {
    for name in ["ac10_pesin_doubling", "ac10_pesin_casati_prosen"] {
        let out = run(name)?;
        let (upper, lower, bk) = (fit(&out, "", "upper")?, fit(&out, "", "lower")?, fit(&out, "", "bk_slope")?);
        c.expect(
            upper + 0.5 >= bk && bk >= lower - 0.5,
            format!("{name}: {upper:.3}+0.5 >= bk {bk:.3} >= {lower:.3}-0.5"),
        );
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
        .collect();
    files.sort();
    Ok(files)
}

fn ac11(c: &mut Check) -> Result<(), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    for name in ["ac2_rotation", "ac9_approach", "ac10_pesin_casati_prosen", "ac7_invariance_iet", "ac6_appendix"] {
        let mut outputs = Vec::new();
        for workers in [1, 8] {
            let dir = tmp.path().join(format!("{name}-{workers}"));
            let opts = RunOptions { workers: Some(workers), seed: None, output: Some(dir.clone()) };
            run_file(&config(name), &opts).map_err(|e| format!("{name}: {e}"))?;
            outputs.push(csv_files(&dir)?);
        }
        let same = !outputs[0].is_empty() && outputs[0] == outputs[1];
        c.expect(same, format!("{name}: {} csv files identical", outputs[0].len()));
    }
    Ok(())
}

type Criterion = (&'static str, u64, fn(&mut Check) -> Result<(), String>);

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC1", 120, ac1),
        ("AC2", 60, ac2),
        ("AC3", 900, ac3),
        ("AC4", 1200, ac4),
        ("AC5", 600, ac5),
        ("AC6", 1800, ac6),
        ("AC7", 1800, ac7),
        ("AC8", 60, ac8),
        ("AC9", 60, ac9),
        ("AC10", 900, ac10),
        ("AC11", 1800, ac11),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (id, budget, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let mut c = Check::new();
        if let Err(e) = f(&mut c) {
            c.expect(false, format!("error: {e}"));
        }
        let took = start.elapsed();
        c.expect(took <= Duration::from_secs(budget), format!("{:.1}s of {budget}s", took.as_secs_f64()));
        if !c.pass {
            failed += 1;
        }
        println!("{id} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.notes.join("; "));
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
