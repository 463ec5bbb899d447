use std::path::{Path, PathBuf};

use super::run::{aggregate, group_records, read_file, write_file, RunLayout};
use super::HarnessError;
use crate::adversarial::AttackReport;
use crate::metrics::{fit_decay, project_full_purification, spearman, MetricsError, Projection, TrendFit};

/// A parsed CSV file with named columns. Fields never contain commas.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str, path: &Path) -> Result<Self, HarnessError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| HarnessError::Audit {
                file: path.to_path_buf(),
                reason: "empty file".into(),
            })?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(HarnessError::Audit {
                    file: path.to_path_buf(),
                    reason: format!("row {} has {} fields, header has {}", i + 1, row.len(), header.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize, HarnessError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Column {
                file: self.path.clone(),
                column: name.to_string(),
            })
    }

    /// Values of a numeric column; empty fields become `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>, HarnessError> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let field = &row[c];
                if field.is_empty() {
                    return Ok(None);
                }
                field.parse::<f64>().map(Some).map_err(|_| HarnessError::Audit {
                    file: self.path.clone(),
                    reason: format!("row {}: column '{name}' holds '{field}'", i + 1),
                })
            })
            .collect()
    }

    /// Like [`CsvTable::numbers`] but rejects empty fields.
    pub fn required(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        self.numbers(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| HarnessError::Audit {
                    file: self.path.clone(),
                    reason: format!("row {}: column '{name}' is empty", i + 1),
                })
            })
            .collect()
    }
}

pub fn read_csv_table(path: &Path) -> Result<CsvTable, HarnessError> {
    CsvTable::parse(&read_file(path)?, path)
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MetricsEntry {
    pub eps: f64,
    pub n: usize,
    pub seed: u64,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub post_acc: f64,
    pub rel_error: Option<f64>,
    pub ece: f64,
}

pub(crate) fn parse_metrics(text: &str, path: &Path) -> Result<Vec<MetricsEntry>, HarnessError> {
    let t = CsvTable::parse(text, path)?;
    let eps = t.required("eps")?;
    let n = t.required("n")?;
    let seed = t.required("seed")?;
    let clean = t.required("clean_acc")?;
    let adv = t.required("adv_acc")?;
    let post = t.required("post_acc")?;
    let rel = t.numbers("rel_error")?;
    let ece = t.required("ece")?;
    Ok((0..t.rows.len())
        .map(|i| MetricsEntry {
            eps: eps[i],
            n: n[i] as usize,
            seed: seed[i] as u64,
            clean_acc: clean[i],
            adv_acc: adv[i],
            post_acc: post[i],
            rel_error: rel[i],
            ece: ece[i],
        })
        .collect())
}

/// Decay fits of the seed-averaged relative and absolute post error against
/// `n`, one per eps. A failed fit carries the reason shown in its `n_star`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EpsFit {
    pub eps: f64,
    pub relative: Result<TrendFit, String>,
    pub absolute: Result<TrendFit, String>,
}

fn sorted_unique<T: PartialOrd + Copy>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.dedup_by(|a, b| a == b);
    v
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Rows of one `(eps, n)` cell across seeds.
fn cell(rows: &[MetricsEntry], eps: f64, n: usize) -> Vec<&MetricsEntry> {
    rows.iter().filter(|r| r.eps == eps && r.n == n).collect()
}

fn fit_reason(e: MetricsError) -> String {
    match e {
        MetricsError::Degenerate => "insufficient n points".into(),
        MetricsError::NonPositive { .. } => "zero post error".into(),
        other => other.to_string(),
    }
}

fn fit_series(points: &[(f64, Option<f64>)]) -> Result<TrendFit, String> {
    if points.iter().any(|(_, e)| e.is_none()) {
        return Err("relative error undefined".into());
    }
    let ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    let es: Vec<f64> = points.iter().map(|p| p.1.unwrap_or(0.0)).collect();
    if ns.len() < 2 {
        return Err("insufficient n points".into());
    }
    fit_decay(&ns, &es).map_err(fit_reason)
}

pub(crate) fn decay_fits(rows: &[MetricsEntry]) -> Vec<EpsFit> {
    let eps_grid = sorted_unique(rows.iter().map(|r| r.eps).collect());
    eps_grid
        .into_iter()
        .map(|eps| {
            let ns = sorted_unique(rows.iter().filter(|r| r.eps == eps).map(|r| r.n).collect());
            let mut rel = Vec::new();
            let mut abs = Vec::new();
            for n in ns {
                let c = cell(rows, eps, n);
                let r: Option<Vec<f64>> = c.iter().map(|r| r.rel_error).collect();
                rel.push((n as f64, r.map(|v| mean(&v))));
                let e: Vec<f64> = c.iter().map(|r| 1.0 - r.post_acc).collect();
                abs.push((n as f64, Some(mean(&e))));
            }
            EpsFit {
                eps,
                relative: fit_series(&rel),
                absolute: fit_series(&abs),
            }
        })
        .collect()
}

fn n_star(fit: &Result<TrendFit, String>) -> String {
    match fit {
        Ok(f) => match project_full_purification(f) {
            Projection::Steps(n) => n.to_string(),
            Projection::NoPurification => "no projected purification".into(),
        },
        Err(reason) => reason.clone(),
    }
}

fn fit_fields(fit: &Result<TrendFit, String>) -> (String, String, String) {
    match fit {
        Ok(f) => (f.slope.to_string(), f.intercept.to_string(), f.residual.to_string()),
        Err(_) => (String::new(), String::new(), String::new()),
    }
}

/// `eps,slope,intercept,n_star` for the relative (or absolute) error fits.
pub(crate) fn fits_csv(fits: &[EpsFit], absolute: bool) -> String {
    let mut out = String::from("eps,slope,intercept,n_star\n");
    for f in fits {
        let fit = if absolute { &f.absolute } else { &f.relative };
        let (slope, intercept, _) = fit_fields(fit);
        out.push_str(&format!("{},{slope},{intercept},{}\n", f.eps, n_star(fit)));
    }
    out
}

/// What [`emit_report`] wrote and the trend statistics it found.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub tables: Vec<PathBuf>,
    /// Metrics rows checked against per-image reports.
    pub audited_rows: usize,
    /// Spearman correlation of seed-mean post error with `n`, per eps.
    pub error_trend: Vec<(f64, Option<f64>)>,
    /// Spearman correlation of seed-mean ECE with `n`, per eps.
    pub ece_trend: Vec<(f64, Option<f64>)>,
    /// `(eps, n_star text)` from the relative error fits.
    pub projection: Vec<(f64, String)>,
}

impl ReportSummary {
    /// Mean of the per-eps correlations over `eps > 0`; `None` if any is
    /// undefined or there are none.
    pub fn mean_trend(trend: &[(f64, Option<f64>)]) -> Option<f64> {
        let vals: Option<Vec<f64>> = trend.iter().filter(|(e, _)| *e > 0.0).map(|(_, s)| *s).collect();
        let vals = vals?;
        if vals.is_empty() {
            None
        } else {
            Some(mean(&vals))
        }
    }
}

fn audit_mismatch(file: &Path, what: String) -> HarnessError {
    HarnessError::Audit {
        file: file.to_path_buf(),
        reason: what,
    }
}

/// Recomputes every `metrics.csv` row from the per-image attack report of its
/// seed, when that report is present, and demands exact agreement.
fn audit_metrics(layout: &RunLayout, rows: &[MetricsEntry]) -> Result<usize, HarnessError> {
    let seeds = sorted_unique(rows.iter().map(|r| r.seed).collect());
    let mut audited = 0;
    for seed in seeds {
        let path = layout.attack_report(seed);
        if !path.exists() {
            continue;
        }
        let report = AttackReport::from_csv(&read_file(&path)?)?;
        let groups = group_records(&report.records);
        let expected: Vec<&MetricsEntry> = rows.iter().filter(|r| r.seed == seed).collect();
        if groups.len() != expected.len() {
            return Err(audit_mismatch(
                &layout.metrics(),
                format!(
                    "seed {seed}: {} metric rows but {} cells in {}",
                    expected.len(),
                    groups.len(),
                    path.display()
                ),
            ));
        }
        for ((eps, n), records) in groups {
            let (clean, adv, post, rel, ece) = aggregate(&records)?;
            let row = expected.iter().find(|r| r.eps == eps && r.n == n).ok_or_else(|| {
                audit_mismatch(&layout.metrics(), format!("seed {seed}: no row for eps={eps}, n={n}"))
            })?;
            let checks = [
                ("clean_acc", Some(clean), Some(row.clean_acc)),
                ("adv_acc", Some(adv), Some(row.adv_acc)),
                ("post_acc", Some(post), Some(row.post_acc)),
                ("rel_error", rel, row.rel_error),
                ("ece", Some(ece), Some(row.ece)),
            ];
            for (name, want, got) in checks {
                if want != got {
                    return Err(audit_mismatch(
                        &layout.metrics(),
                        format!("seed {seed}, eps={eps}, n={n}: {name} is {got:?}, per-image rows give {want:?}"),
                    ));
                }
            }
            audited += 1;
        }
    }
    Ok(audited)
}

/// Checks `bpda.csv` against the per-image adaptive attack reports.
fn audit_bpda(layout: &RunLayout) -> Result<usize, HarnessError> {
    let path = layout.bpda_summary();
    if !path.exists() {
        return Ok(0);
    }
    let t = read_csv_table(&path)?;
    let n = t.required("n")?;
    let seed = t.required("seed")?;
    let acc = t.required("bpda_post_acc")?;
    let mut audited = 0;
    for i in 0..t.rows.len() {
        let report_path = layout.bpda_report(seed[i] as u64);
        if !report_path.exists() {
            continue;
        }
        let report = AttackReport::from_csv(&read_file(&report_path)?)?;
        let records: Vec<_> = report
            .records
            .into_iter()
            .filter(|r| r.n_train_sgld == n[i] as usize)
            .collect();
        let recomputed = AttackReport { records }.post_accuracy();
        if recomputed != acc[i] {
            return Err(audit_mismatch(
                &path,
                format!(
                    "row {}: bpda_post_acc is {}, per-image rows give {recomputed}",
                    i + 1,
                    acc[i]
                ),
            ));
        }
        audited += 1;
    }
    Ok(audited)
}

fn plan_header(layout: &RunLayout) -> String {
    let Ok(text) = std::fs::read_to_string(layout.plan()) else {
        return String::new();
    };
    let keys = [
        "name",
        "master_seed",
        "seeds",
        "images",
        "subset_seed",
        "n_sweep",
        "eps_255",
        "trials",
        "langevin_steps",
    ];
    let mut out = String::new();
    let mut section = String::new();
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('[') {
            section = line.trim_matches(|c| c == '[' || c == ']').to_string();
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            if keys.contains(&k.trim()) && section != "bpda" {
                let name = if section.is_empty() {
                    k.trim().to_string()
                } else {
                    format!("{section}.{}", k.trim())
                };
                out.push_str(&format!("{name}: {}\n", v.trim()));
            }
        }
    }
    out
}

/// Writes the summary tables of a run directory:
///
/// - `table_accuracy_vs_eps.csv`: clean, adversarial and purified accuracy per `(eps, n)`
/// - `table_error_vs_n.csv`, `table_rel_error_vs_n.csv`: post error with the fitted line
/// - `table_ece_vs_n.csv`: calibration error per `(eps, n)`
/// - `table_projection.csv`: one row per eps with the projected full-purification budget
/// - `summary.txt`: run header, trend correlations and adaptive attack results
///
/// Every metrics row is first audited against its per-image report.
pub fn emit_report(dir: &Path) -> Result<ReportSummary, HarnessError> {
    let layout = RunLayout::new(dir);
    let metrics_path = layout.metrics();
    let text = read_file(&metrics_path)?;
    let rows = parse_metrics(&text, &metrics_path)?;
    let audited = audit_metrics(&layout, &rows)? + audit_bpda(&layout)?;
    let fits = decay_fits(&rows);
    let eps_grid = sorted_unique(rows.iter().map(|r| r.eps).collect());

    let mut acc = String::from("eps,n,clean_acc,adv_acc,post_acc,post_acc_std,seeds\n");
    let mut err = String::from("eps,n,error,error_std,fitted\n");
    let mut rel = String::from("eps,n,rel_error,fitted\n");
    let mut ece_t = String::from("eps,n,ece,ece_std\n");
    let mut error_trend = Vec::new();
    let mut ece_trend = Vec::new();
    for (eps, fit) in eps_grid.iter().zip(&fits) {
        let ns = sorted_unique(rows.iter().filter(|r| r.eps == *eps).map(|r| r.n).collect());
        let mut err_means = Vec::new();
        let mut ece_means = Vec::new();
        for &n in &ns {
            let c = cell(&rows, *eps, n);
            let col = |f: fn(&MetricsEntry) -> f64| c.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let post = col(|r| r.post_acc);
            let errors: Vec<f64> = post.iter().map(|p| 1.0 - p).collect();
            let eces = col(|r| r.ece);
            let fitted =
                |f: &Result<TrendFit, String>| f.as_ref().map(|f| f.predict(n as f64).to_string()).unwrap_or_default();
            acc.push_str(&format!(
                "{eps},{n},{},{},{},{},{}\n",
                mean(&col(|r| r.clean_acc)),
                mean(&col(|r| r.adv_acc)),
                mean(&post),
                std_dev(&post),
                c.len()
            ));
            err.push_str(&format!(
                "{eps},{n},{},{},{}\n",
                mean(&errors),
                std_dev(&errors),
                fitted(&fit.absolute)
            ));
            let rel_vals: Option<Vec<f64>> = c.iter().map(|r| r.rel_error).collect();
            rel.push_str(&format!(
                "{eps},{n},{},{}\n",
                rel_vals.map(|v| mean(&v).to_string()).unwrap_or_default(),
                fitted(&fit.relative)
            ));
            ece_t.push_str(&format!("{eps},{n},{},{}\n", mean(&eces), std_dev(&eces)));
            err_means.push(mean(&errors));
            ece_means.push(mean(&eces));
        }
        let nf: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
        error_trend.push((*eps, spearman(&nf, &err_means)));
        ece_trend.push((*eps, spearman(&nf, &ece_means)));
    }

    let mut proj = String::from("eps,slope,intercept,residual,n_star\n");
    let mut projection = Vec::new();
    for f in &fits {
        let (slope, intercept, residual) = fit_fields(&f.relative);
        let star = n_star(&f.relative);
        proj.push_str(&format!("{},{slope},{intercept},{residual},{star}\n", f.eps));
        projection.push((f.eps, star));
    }

    let mut summary = plan_header(&layout);
    summary.push_str(&format!("audited rows: {audited}\n"));
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into());
    for ((eps, e), (_, c)) in error_trend.iter().zip(&ece_trend) {
        summary.push_str(&format!(
            "eps {eps}: spearman(n, error) {}, spearman(n, ece) {}\n",
            fmt(*e),
            fmt(*c)
        ));
    }
    summary.push_str(&format!(
        "mean over eps > 0: spearman(n, error) {}, spearman(n, ece) {}\n",
        fmt(ReportSummary::mean_trend(&error_trend)),
        fmt(ReportSummary::mean_trend(&ece_trend))
    ));
    if layout.bpda_summary().exists() {
        let t = read_csv_table(&layout.bpda_summary())?;
        let (n, s) = (t.required("n")?, t.required("seed")?);
        let (pgd, bpda) = (t.required("pgd_post_acc")?, t.required("bpda_post_acc")?);
        for i in 0..t.rows.len() {
            summary.push_str(&format!(
                "adaptive attack n={} seed={}: post accuracy {} (plain attack {})\n",
                n[i], s[i], bpda[i], pgd[i]
            ));
        }
    }

    let outputs = [
        ("table_accuracy_vs_eps.csv", acc),
        ("table_error_vs_n.csv", err),
        ("table_rel_error_vs_n.csv", rel),
        ("table_ece_vs_n.csv", ece_t),
        ("table_projection.csv", proj),
        ("summary.txt", summary),
    ];
    let mut tables = Vec::new();
    for (name, body) in outputs {
        let path = dir.join(name);
        write_file(&path, &body)?;
        tables.push(path);
    }
    Ok(ReportSummary {
        tables,
        audited_rows: audited,
        error_trend,
        ece_trend,
        projection,
    })
}
