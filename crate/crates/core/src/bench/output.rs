//! Result directory writers. Data files come first; plots are written last
//! and a failed plot only logs a warning.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::write_file;
use crate::metrics::{MetricReport, WelchResult};
use crate::plot::{bar_chart, line_chart, Series};

use super::compare::{head_to_head_csv, per_file_head_to_head, scorer_view};
use super::dilution::DilutionReport;

fn scorers(report: &MetricReport) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in &report.records {
        if !names.contains(&r.scorer) {
            names.push(r.scorer.clone());
        }
    }
    names
}

fn plot_file(dir: &Path, name: &str, svg: String, written: &mut Vec<PathBuf>) {
    let path = dir.join("plots").join(name);
    match write_file(&path, svg) {
        Ok(()) => written.push(path),
        Err(e) => log::warn!("plot {name} not written: {e}"),
    }
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `report.json`, `metrics.csv`, `curves.csv`, `per_file.csv`,
/// `head_to_head.csv` (two or more scorers) and `plots/*.svg`.
pub fn write_benchmark_outputs(dir: &Path, report: &MetricReport) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("report.json", report.to_json()?)?;
    put("metrics.csv", report.records_csv()?)?;
    put("curves.csv", report.curves_csv()?)?;
    let per_file = MetricReport {
        records: report
            .records
            .iter()
            .filter(|r| r.partition.starts_with("file="))
            .cloned()
            .collect(),
        ..Default::default()
    };
    let per_file_csv = if per_file.records.is_empty() {
        "benchmark,scorer,partition,metric,value,n\n".to_string()
    } else {
        per_file.records_csv()?
    };
    put("per_file.csv", per_file_csv)?;

    let names = scorers(report);
    if names.len() >= 2 && !per_file.records.is_empty() {
        let mut body = String::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let rows = per_file_head_to_head(&scorer_view(report, a), &scorer_view(report, b))?;
                let csv = head_to_head_csv(a, b, &rows)?;
                if body.is_empty() {
                    body = csv;
                } else {
                    body.push_str(csv.split_once('\n').map_or("", |x| x.1));
                }
            }
        }
        put("head_to_head.csv", body)?;
    }

    let mut partitions: Vec<&str> = Vec::new();
    for c in &report.curves {
        if !partitions.contains(&c.partition.as_str()) {
            partitions.push(&c.partition);
        }
    }
    for p in partitions {
        let mut series = Vec::new();
        for s in &names {
            let pts: Vec<_> = report
                .curves
                .iter()
                .filter(|c| &c.scorer == s && c.partition == p)
                .collect();
            if pts.is_empty() {
                continue;
            }
            series.push(Series {
                name: format!("{s} true"),
                points: pts
                    .iter()
                    .map(|c| (c.threshold, c.true_hits as f64))
                    .collect(),
            });
            series.push(Series {
                name: format!("{s} spurious"),
                points: pts
                    .iter()
                    .map(|c| (c.threshold, c.spurious_hits as f64))
                    .collect(),
            });
        }
        let svg = line_chart(
            &format!("Hits vs threshold ({p})"),
            "score threshold",
            "hits",
            &series,
        );
        plot_file(
            dir,
            &format!("threshold_{}.svg", safe_name(p)),
            svg,
            &mut written,
        );
    }
    let roc_all: Vec<Series> = report
        .roc
        .iter()
        .filter(|r| r.partition == "all")
        .map(|r| Series {
            name: format!("{} (AUC {:.3})", r.scorer, r.auc),
            points: r.points.clone(),
        })
        .collect();
    if !roc_all.is_empty() {
        let svg = line_chart("ROC", "false positive rate", "true positive rate", &roc_all);
        plot_file(dir, "roc.svg", svg, &mut written);
    }
    Ok(written)
}

/// Plain notation unless the magnitude calls for an exponent.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-6..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn dilution_csv(reports: &[(String, DilutionReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scorer",
        "dilution",
        "n_queries",
        "threshold",
        "true_hits",
        "spurious_hits",
        "precision",
        "true_hit_rate",
        "f1",
        "consistent",
        "unique",
    ])?;
    for (name, rep) in reports {
        for l in &rep.levels {
            w.write_record([
                name.clone(),
                l.dilution.clone(),
                l.n_queries.to_string(),
                l.threshold.to_string(),
                l.true_hits.to_string(),
                l.spurious_hits.to_string(),
                l.precision.to_string(),
                l.true_hit_rate.to_string(),
                l.f1.to_string(),
                l.consistent.to_string(),
                l.unique.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(
        w.into_inner()
            .map_err(|e| crate::error::Error::invalid(e.to_string()))?,
    )
    .expect("csv output is utf-8"))
}

/// Writes `dilution.json`, `dilution.csv`, `welch.csv` (when comparisons
/// are given) and per-dilution bar charts.
pub fn write_dilution_outputs(
    dir: &Path,
    reports: &[(String, DilutionReport)],
    welch: &[(
        String,
        String,
        String,
        std::result::Result<WelchResult, String>,
    )],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let json: serde_json::Value = serde_json::json!({
        "reports": reports.iter().map(|(n, r)| serde_json::json!({"scorer": n, "report": r})).collect::<Vec<_>>(),
        "welch": welch.iter().map(|(a, b, d, r)| match r {
            Ok(w) => serde_json::json!({"scorer_a": a, "scorer_b": b, "dilution": d, "t": w.t, "dof": w.dof, "p": w.p}),
            Err(e) => serde_json::json!({"scorer_a": a, "scorer_b": b, "dilution": d, "error": e}),
        }).collect::<Vec<_>>(),
    });
    let path = dir.join("dilution.json");
    write_file(&path, serde_json::to_string_pretty(&json)? + "\n")?;
    written.push(path);
    let path = dir.join("dilution.csv");
    write_file(&path, dilution_csv(reports)?)?;
    written.push(path);
    if !welch.is_empty() {
        let mut body = String::from("scorer_a,scorer_b,dilution,t,dof,p,error\n");
        for (a, b, d, r) in welch {
            match r {
                Ok(w) => body.push_str(&format!(
                    "{a},{b},{d},{},{},{},\n",
                    num(w.t),
                    num(w.dof),
                    num(w.p)
                )),
                Err(e) => body.push_str(&format!("{a},{b},{d},,,,\"{}\"\n", e.replace('"', "'"))),
            }
        }
        let path = dir.join("welch.csv");
        write_file(&path, body)?;
        written.push(path);
    }
    if let Some((_, first)) = reports.first() {
        let cats: Vec<String> = first.levels.iter().map(|l| l.dilution.clone()).collect();
        for (metric, label) in [
            ("true_hits", "true hits"),
            ("spurious_hits", "spurious hits"),
            ("f1", "F1"),
        ] {
            let series: Vec<(String, Vec<f64>)> = reports
                .iter()
                .map(|(n, r)| {
                    let vals = r
                        .levels
                        .iter()
                        .map(|l| match metric {
                            "true_hits" => l.true_hits as f64,
                            "spurious_hits" => l.spurious_hits as f64,
                            _ => l.f1,
                        })
                        .collect();
                    (n.clone(), vals)
                })
                .collect();
            let svg = bar_chart(&format!("{label} by dilution"), label, &cats, &series);
            plot_file(dir, &format!("dilution_{metric}.svg"), svg, &mut written);
        }
    }
    Ok(written)
}
