//! Writing a run's outputs to a directory.
//!
//! ```text
//! report.json          the RunReport
//! metrics.csv          t,metric,value (scalars have an empty t)
//! events.jsonl         one JSON object per line
//! snapshots/<name>.pwf binary fields
//! paths/<name>.pwf     increment paths
//! trajectories.csv     Bohmian trajectories, when present
//! plots/<metric>.svg   one line plot per series
//! ```
//!
//! Everything except `report.json` can be switched off through [`Emit`].

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{MetricSeries, RunOutput, RunReport, Snapshot};
use crate::numerics::snapshot::{write_complex, write_density, write_path};

/// Optional artifact families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    /// `metrics.csv` and `trajectories.csv`.
    Csv,
    Jsonl,
    /// `snapshots/` and `paths/`.
    Snapshots,
    Svg,
}

impl Emit {
    pub const ALL: [Emit; 4] = [Emit::Csv, Emit::Jsonl, Emit::Snapshots, Emit::Svg];
}

pub fn write_run(dir: &Path, out: &RunOutput, emit: &[Emit]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), out.report.to_json())?;
    if emit.contains(&Emit::Csv) {
        write_metrics_csv(
            &mut BufWriter::new(File::create(dir.join("metrics.csv"))?),
            &out.report,
        )?;
        if let Some(traj) = &out.artifacts.trajectories {
            let mut w = BufWriter::new(File::create(dir.join("trajectories.csv"))?);
            traj.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    if emit.contains(&Emit::Jsonl) {
        let mut events = BufWriter::new(File::create(dir.join("events.jsonl"))?);
        for e in &out.artifacts.events {
            writeln!(events, "{e}")?;
        }
        events.flush()?;
    }
    if emit.contains(&Emit::Svg) {
        write_plots(&dir.join("plots"), &out.report)?;
    }
    if !emit.contains(&Emit::Snapshots) {
        return Ok(());
    }
    // both directories exist even when empty, so the layout is fixed
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    for (name, s) in &out.artifacts.snapshots {
        let mut w = BufWriter::new(File::create(snaps.join(format!("{name}.pwf")))?);
        match s {
            Snapshot::Density { t, field } => write_density(&mut w, field, *t)?,
            Snapshot::Complex { t, field } => write_complex(&mut w, field, *t)?,
        }
        w.flush()?;
    }
    let paths = dir.join("paths");
    fs::create_dir_all(&paths)?;
    for (name, p) in &out.artifacts.paths {
        let mut w = BufWriter::new(File::create(paths.join(format!("{name}.pwf")))?);
        write_path(&mut w, p)?;
        w.flush()?;
    }
    Ok(())
}

pub fn write_metrics_csv<W: Write>(w: &mut W, report: &RunReport) -> Result<()> {
    writeln!(w, "t,metric,value")?;
    for (name, v) in &report.scalars {
        writeln!(w, ",{name},{v:e}")?;
    }
    for m in &report.metrics {
        for (t, v) in m.t.iter().zip(&m.values) {
            writeln!(w, "{t},{},{v:e}", m.name)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One SVG per series with at least two points.
pub fn write_plots(dir: &Path, report: &RunReport) -> Result<()> {
    let plottable: Vec<&MetricSeries> = report.metrics.iter().filter(|m| m.t.len() >= 2).collect();
    if plottable.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    for m in plottable {
        fs::write(dir.join(format!("{}.svg", m.name)), line_plot(m))?;
    }
    Ok(())
}

/// A bare line plot with the axis ranges printed in the corners.
pub fn line_plot(m: &MetricSeries) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let points: Vec<(f64, f64)> =
        m.t.iter()
            .zip(&m.values)
            .filter(|(t, v)| t.is_finite() && v.is_finite())
            .map(|(t, v)| (*t, *v))
            .collect();
    let range = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-300 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (t0, t1) = range(&mut points.iter().map(|p| p.0));
    let (v0, v1) = range(&mut points.iter().map(|p| p.1));
    let sx = |t: f64| PAD + (t - t0) / (t1 - t0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - v0) / (v1 - v0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="{}">{}</text>"#,
        PAD - 16.0,
        escape(&m.name)
    );
    let _ = writeln!(svg, r#"<text x="4" y="{}">{v1:.4e}</text>"#, PAD + 4.0);
    let _ = writeln!(svg, r#"<text x="4" y="{}">{v0:.4e}</text>"#, H - PAD);
    let _ = writeln!(svg, r#"<text x="{PAD}" y="{}">{t0}</text>"#, H - PAD + 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{t1}</text>"#,
        W - PAD,
        H - PAD + 16.0
    );
    let coords: Vec<String> = points
        .iter()
        .map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##,
        coords.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Artifacts, SeedManifest};

    #[test]
    fn metrics_csv_has_scalars_then_series() {
        let mut r = RunReport::new("e", "s", String::new(), SeedManifest::new(0));
        r.scalar("norm", 1.0);
        r.series("l1", vec![0.0, 0.5], vec![0.1, 0.2]);
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,metric,value");
        assert_eq!(lines[1], ",norm,1e0");
        assert_eq!(lines[3], "0.5,l1,2e-1");
    }

    #[test]
    fn plot_survives_constant_and_nan_series() {
        let m = MetricSeries {
            name: "a<b".into(),
            t: vec![0.0, 1.0, 2.0],
            values: vec![3.0, f64::NAN, 3.0],
        };
        let svg = line_plot(&m);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn run_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = RunReport::new("e", "s", String::new(), SeedManifest::new(0));
        report.series("x", vec![0.0, 1.0], vec![1.0, 2.0]);
        let out = RunOutput {
            report,
            artifacts: Artifacts {
                events: vec![serde_json::json!({"t": 0.5})],
                ..Artifacts::default()
            },
        };
        write_run(dir.path(), &out, &Emit::ALL).unwrap();
        for f in [
            "report.json",
            "metrics.csv",
            "events.jsonl",
            "plots/x.svg",
            "snapshots",
            "paths",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(
            fs::read_to_string(dir.path().join("events.jsonl")).unwrap(),
            "{\"t\":0.5}\n"
        );

        let bare = tempfile::tempdir().unwrap();
        write_run(bare.path(), &out, &[]).unwrap();
        let names: Vec<_> = fs::read_dir(bare.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec!["report.json"]);
    }
}
