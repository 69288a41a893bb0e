//! CSV tables and self-contained SVG figures from stored runs.
//!
//! Layout under the output directory, one folder per setting:
//! `curves/<dataset>__<learner>__<strategy>.csv`, `curves/<dataset>.svg`,
//! `heatmap.csv`, `heatmap_nosig.csv`, `lose_heatmap.csv`,
//! `lose_heatmap_nosig.csv`, `win_matrix_<learner>.csv` (each with an SVG
//! twin) and `summary.txt` listing skipped datasets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use alp_core::eval::{heatmap, lose_heatmap, win_matrix, Heatmap, ResultKey, ResultTable, WinMatrix};
use alp_core::pipeline::{Metric, RunRecord, RunStatus};

use crate::data::load::store_key;
use crate::error::{Error, IoContext, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    Binary,
    Multiclass,
}

impl ClassFilter {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ClassFilter::All),
            "binary" => Ok(ClassFilter::Binary),
            "multiclass" => Ok(ClassFilter::Multiclass),
            other => Err(Error::Usage(format!(
                "--classes must be all, binary or multiclass, got `{other}`"
            ))),
        }
    }

    pub fn keeps(self, n_classes: usize) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Binary => n_classes == 2,
            ClassFilter::Multiclass => n_classes > 2,
        }
    }
}

/// Per-seed statistic compared across ALPs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Statistic {
    Aubc,
    Final,
}

impl Statistic {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "aubc" => Ok(Statistic::Aubc),
            "final" => Ok(Statistic::Final),
            other => Err(Error::Usage(format!(
                "--statistic must be aubc or final, got `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ReportOptions {
    pub metric: Metric,
    pub statistic: Statistic,
    pub classes: ClassFilter,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Accuracy,
            statistic: Statistic::Aubc,
            classes: ClassFilter::All,
        }
    }
}

fn write_file(path: &Path, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).at(parent)?;
    }
    std::fs::write(path, contents).at(path)?;
    written.push(path.to_path_buf());
    Ok(())
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean curve over seeds: (iteration, mean labeled size, mean, std, seeds).
type CurveRow = (usize, f64, f64, f64, usize);

fn aggregate_curve(runs: &[&RunRecord], metric: Metric) -> Vec<CurveRow> {
    let len = runs.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let logs: Vec<_> = runs.iter().filter_map(|r| r.iterations.get(t)).collect();
            let values: Vec<f64> = logs.iter().map(|l| metric.of(l)).collect();
            let sizes: Vec<f64> = logs.iter().map(|l| l.labeled_size as f64).collect();
            let (m, s) = mean_std(&values);
            (t, mean_std(&sizes).0, m, s, logs.len())
        })
        .collect()
}

fn curve_csv(rows: &[CurveRow], seeds: usize) -> String {
    if seeds == 1 {
        let header = ["iteration", "labeled_size", "value"].map(String::from);
        let body: Vec<Vec<String>> = rows.iter().map(|r| vec![r.0.to_string(), num(r.1), num(r.2)]).collect();
        csv_text(&header, &body)
    } else {
        let header = ["iteration", "labeled_size", "mean", "std", "seeds"].map(String::from);
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.0.to_string(), num(r.1), num(r.2), num(r.3), r.4.to_string()])
            .collect();
        csv_text(&header, &body)
    }
}

fn heatmap_csv(h: &Heatmap) -> String {
    let mut header = vec!["learner".to_string()];
    header.extend(h.strategies.iter().cloned());
    let rows: Vec<Vec<String>> = h
        .learners
        .iter()
        .zip(&h.counts)
        .map(|(l, c)| {
            std::iter::once(l.clone())
                .chain(c.iter().map(|v| v.to_string()))
                .collect()
        })
        .collect();
    csv_text(&header, &rows)
}

fn win_csv(w: &WinMatrix) -> String {
    let mut header = vec!["strategy".to_string()];
    header.extend(w.strategies.iter().cloned());
    let rows: Vec<Vec<String>> = w
        .strategies
        .iter()
        .zip(&w.wins)
        .map(|(s, r)| std::iter::once(s.clone()).chain(r.iter().map(|v| num(*v))).collect())
        .collect();
    csv_text(&header, &rows)
}

fn xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Cell grid with row/column labels; `shade` in [0, 1].
fn grid_svg(title: &str, rows: &[String], cols: &[String], cell: impl Fn(usize, usize) -> (String, f64)) -> String {
    let (cw, ch, left, top) = (70.0, 28.0, 150.0, 120.0);
    let width = left + cw * cols.len() as f64 + 20.0;
    let height = top + ch * rows.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(s, r#"<text x="10" y="18" font-size="14">{}</text>"#, xml(title));
    for (j, c) in cols.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let _ = write!(
            s,
            r#"<text transform="translate({x},{}) rotate(-45)">{}</text>"#,
            top - 6.0,
            xml(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + ch * i as f64;
        let _ = write!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + ch * 0.65,
            xml(r)
        );
        for j in 0..cols.len() {
            let (label, shade) = cell(i, j);
            let level = (255.0 - 200.0 * shade.clamp(0.0, 1.0)).round() as u8;
            let x = left + cw * j as f64;
            let _ = write!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="rgb({level},{level},255)" stroke="white"/><text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x + cw / 2.0,
                y + ch * 0.65,
                xml(&label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn heatmap_svg(title: &str, h: &Heatmap) -> String {
    let max = h.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    grid_svg(title, &h.learners, &h.strategies, |i, j| {
        (h.counts[i][j].to_string(), h.counts[i][j] as f64 / max)
    })
}

fn win_svg(title: &str, w: &WinMatrix) -> String {
    grid_svg(title, &w.strategies, &w.strategies, |i, j| {
        (format!("{:.2}", w.wins[i][j]), w.wins[i][j])
    })
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn curves_svg(title: &str, series: &[(String, Vec<CurveRow>)], metric: Metric) -> String {
    let (w, h, left, top, right, bottom) = (640.0, 400.0, 60.0, 30.0, 200.0, 40.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let points = series.iter().flat_map(|(_, rows)| rows.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for r in points {
        x0 = x0.min(r.1);
        x1 = x1.max(r.1);
        y0 = y0.min(r.2);
        y1 = y1.max(r.2);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1e-3;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(s, r#"<text x="{left}" y="18" font-size="14">{}</text>"#, xml(title));
    let _ = write!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = write!(
        s,
        r#"<text x="{left}" y="{}">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        top + ph + 15.0,
        num(x0),
        left + pw,
        top + ph + 15.0,
        num(x1)
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text><text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
        left - 4.0,
        top + ph,
        y0,
        left - 4.0,
        top + 10.0,
        y1
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">labeled pool size</text><text transform="translate(14,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 8.0,
        top + ph / 2.0,
        metric.name()
    );
    for (k, (name, rows)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = rows.iter().map(|r| format!("{:.2},{:.2}", px(r.1), py(r.2))).collect();
        let _ = write!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 * k as f64 + 10.0;
        let _ = write!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 35.0,
            ly + 4.0,
            xml(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Renders every artifact for `records` into `out`; returns the files written.
pub fn render_report(records: &[RunRecord], out: &Path, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    let usable: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.status == RunStatus::Completed && !r.iterations.is_empty() && opts.classes.keeps(r.n_classes))
        .collect();
    if usable.is_empty() {
        return Err(Error::Usage("no completed runs match the report filters".into()));
    }
    // setting -> dataset -> (learner, strategy) -> seed-ordered runs
    type Alp = (String, String);
    let mut by_setting: BTreeMap<String, BTreeMap<String, BTreeMap<Alp, Vec<&RunRecord>>>> = BTreeMap::new();
    for r in &usable {
        by_setting
            .entry(r.scenario.setting.label().to_string())
            .or_default()
            .entry(store_key(&r.scenario.dataset_ref))
            .or_default()
            .entry((r.learner.label.clone(), r.strategy.name.clone()))
            .or_default()
            .push(r);
    }
    let mut written = Vec::new();
    for (setting, datasets) in &mut by_setting {
        let dir = out.join(store_key(setting));
        let mut table = ResultTable::new();
        for (dataset, alps) in datasets.iter_mut() {
            let mut series = Vec::new();
            for ((learner, strategy), runs) in alps.iter_mut() {
                runs.sort_by_key(|r| (r.scenario.split_seed, r.scenario.pipeline_seed));
                let rows = aggregate_curve(runs, opts.metric);
                write_file(
                    &dir.join("curves").join(format!("{dataset}__{learner}__{strategy}.csv")),
                    &curve_csv(&rows, runs.len()),
                    &mut written,
                )?;
                series.push((format!("{learner} + {strategy}"), rows));
                let values = runs
                    .iter()
                    .map(|r| match opts.statistic {
                        Statistic::Aubc => r.aubc(opts.metric).map_err(Error::from),
                        Statistic::Final => r
                            .final_value(opts.metric)
                            .ok_or_else(|| Error::Usage("run without iterations".into())),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                table.insert(ResultKey::new(learner, strategy, dataset), values);
            }
            write_file(
                &dir.join("curves").join(format!("{dataset}.svg")),
                &curves_svg(&format!("{dataset} ({setting})"), &series, opts.metric),
                &mut written,
            )?;
        }
        let mut summary = String::new();
        let maps = [
            ("heatmap", heatmap(&table, true)),
            ("heatmap_nosig", heatmap(&table, false)),
            ("lose_heatmap", lose_heatmap(&table, true)),
            ("lose_heatmap_nosig", lose_heatmap(&table, false)),
        ];
        for (name, h) in &maps {
            write_file(&dir.join(format!("{name}.csv")), &heatmap_csv(h), &mut written)?;
            write_file(
                &dir.join(format!("{name}.svg")),
                &heatmap_svg(&format!("{name} ({setting}, D={})", h.datasets_used.len()), h),
                &mut written,
            )?;
            for (d, why) in &h.skipped {
                let _ = writeln!(summary, "{name}: skipped {d}: {why}");
            }
        }
        let learners: std::collections::BTreeSet<&String> = table.keys().map(|k| &k.learner).collect();
        for learner in learners {
            let w = win_matrix(&table, learner);
            let stem = format!("win_matrix_{}", store_key(learner));
            write_file(&dir.join(format!("{stem}.csv")), &win_csv(&w), &mut written)?;
            write_file(
                &dir.join(format!("{stem}.svg")),
                &win_svg(&format!("{learner} ({setting}, D={})", w.datasets_used.len()), &w),
                &mut written,
            )?;
            for (d, why) in &w.skipped {
                let _ = writeln!(summary, "{stem}: skipped {d}: {why}");
            }
        }
        if summary.is_empty() {
            summary.push_str("no datasets skipped\n");
        }
        write_file(&dir.join("summary.txt"), &summary, &mut written)?;
    }
    Ok(written)
}
