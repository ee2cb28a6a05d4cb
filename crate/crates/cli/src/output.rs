//! Result tables, plots and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::RunError;

/// Column names of `results.csv`; the seventh is `N_hat` or `mu_hat` depending on the experiment.
pub fn results_header(value_column: &str) -> [&str; 11] {
    [
        "experiment",
        "system",
        "epsilon",
        "eps_prime",
        "n",
        "f_of_n",
        value_column,
        "ratio_bits",
        "ci_lo",
        "ci_hi",
        "flags",
    ]
}

/// Decimal rendering with 12 significant digits; empty for missing values.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..12).contains(&exp) {
        let s = format!("{v:.11e}");
        let (mant, e) = s.split_once('e').unwrap();
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        return format!("{mant}e{e}");
    }
    let decimals = (11 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub system: String,
    pub epsilon: Option<f64>,
    pub eps_prime: Option<f64>,
    pub n: u64,
    pub f_of_n: f64,
    pub value: f64,
    pub ratio: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub flags: Vec<String>,
}

impl Row {
    fn record(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.system.clone(),
            fmt_opt(self.epsilon),
            fmt_opt(self.eps_prime),
            self.n.to_string(),
            fmt_num(self.f_of_n),
            fmt_num(self.value),
            fmt_opt(self.ratio),
            fmt_opt(self.ci.map(|c| c.0)),
            fmt_opt(self.ci.map(|c| c.1)),
            self.flags.join(";"),
        ]
    }
}

/// A named scalar derived from the rows: a slope, a proxy, a verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub series: String,
    pub quantity: String,
    pub value: f64,
}

/// An extra table with its own header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub value_column: &'static str,
    pub rows: Vec<Row>,
    pub fits: Vec<Fit>,
    pub tables: Vec<Table>,
    pub plot: Vec<PlotSeries>,
    pub plot_y_label: String,
}

impl RunOutput {
    pub fn new(value_column: &'static str) -> Self {
        Self {
            value_column,
            rows: Vec::new(),
            fits: Vec::new(),
            tables: Vec::new(),
            plot: Vec::new(),
            plot_y_label: "ratio (bits)".into(),
        }
    }

    pub fn fit(&mut self, series: impl Into<String>, quantity: impl Into<String>, value: f64) {
        self.fits.push(Fit { series: series.into(), quantity: quantity.into(), value });
    }

    /// Looks up a fit by series and quantity.
    pub fn get(&self, series: &str, quantity: &str) -> Option<f64> {
        self.fits.iter().find(|f| f.series == series && f.quantity == quantity).map(|f| f.value)
    }

    /// All values of `quantity` across series, in insertion order.
    pub fn all(&self, quantity: &str) -> Vec<f64> {
        self.fits.iter().filter(|f| f.quantity == quantity).map(|f| f.value).collect()
    }

    pub fn results_csv(&self) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(results_header(self.value_column))?;
        for r in &self.rows {
            w.write_record(r.record())?;
        }
        w.into_inner().map_err(|e| RunError::Io(e.into_error()))
    }

    pub fn fits_csv(&self) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "quantity", "value"])?;
        for f in &self.fits {
            w.write_record([f.series.as_str(), f.quantity.as_str(), &fmt_num(f.value)])?;
        }
        w.into_inner().map_err(|e| RunError::Io(e.into_error()))
    }

    fn table_csv(t: &Table) -> Result<Vec<u8>, RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| RunError::Io(e.into_error()))
    }

    /// Every artifact as `(file name, bytes)`, in a fixed order.
    pub fn artifacts(&self) -> Result<Vec<(String, Vec<u8>)>, RunError> {
        let mut out =
            vec![("results.csv".to_string(), self.results_csv()?), ("fits.csv".to_string(), self.fits_csv()?)];
        for t in &self.tables {
            out.push((t.file.clone(), Self::table_csv(t)?));
        }
        out.push(("ratios.svg".to_string(), render_svg(&self.plot, &self.plot_y_label).into_bytes()));
        Ok(out)
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line plot against `log2 n`.
pub fn render_svg(series: &[PlotSeries], y_label: &str) -> String {
    let (w, h, ml, mr, mt, mb) = (720.0, 440.0, 70.0, 200.0, 20.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0 > 0.0 && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        let lx = x.log2();
        x0 = x0.min(lx);
        x1 = x1.max(lx);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| ml + (x.log2() - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * (h - mt - mb);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bx, by) = (h - mb, w - mr);
    let _ = writeln!(s, r#"<path d="M{ml},{mt} L{ml},{bx} L{by},{bx}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let px = ml + (w - ml - mr) * k as f64 / 4.0;
        let py = sy(fy);
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            bx + 16.0,
            fmt_num((fx.exp2() * 100.0).round() / 100.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{}</text>"#,
            ml - 6.0,
            fmt_num((fy * 1000.0).round() / 1000.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n (log scale)</text>"#,
        (ml + by) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{y_label}</text>"#,
        (mt + bx) / 2.0,
        (mt + bx) / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0 > 0.0 && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = mt + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{}</text>"#, by + 10.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub kind: String,
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputChecksum>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputChecksum {
    pub file: String,
    pub sha256: String,
}

/// Writes every artifact and the manifest; anything written is removed again on failure.
pub fn write_all(
    dir: &Path,
    artifacts: &[(String, Vec<u8>)],
    manifest: &mut RunManifest,
) -> Result<Vec<PathBuf>, RunError> {
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in artifacts {
            let path = dir.join(name);
            std::fs::write(&path, bytes)?;
            written.push(path);
            manifest.outputs.push(OutputChecksum { file: name.clone(), sha256: sha256_hex(bytes) });
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_vec_pretty(manifest).map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::write(&path, json)?;
        written.push(path);
        Ok::<(), std::io::Error>(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            remove_partial(&written);
            Err(RunError::Io(e))
        }
    }
}

pub fn remove_partial(paths: &[PathBuf]) {
    for p in paths {
        let _ = std::fs::remove_file(p);
    }
}
