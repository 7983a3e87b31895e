use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Category, Scenario, ScenarioResult};
use crate::error::{Error, Result};
use crate::metrics::{self, format_percent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Plotdata,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Plotdata];
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plotdata" | "plot" | "tsv" => Ok(ReportFormat::Plotdata),
            other => Err(Error::InvalidConfig(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub row: usize,
    pub label: String,
    pub secret: String,
    pub category: Category,
    pub n: usize,
    pub density: f64,
    pub complexity: f64,
    pub scenario: Scenario,
    pub backend: Option<String>,
    pub provenance: String,
    pub seed: Option<u64>,
    pub shots: u64,
    pub p_success: f64,
    pub hellinger: f64,
    pub fidelity: Option<f64>,
    /// Noisy-emulation minus hardware success, on hardware rows that have a
    /// noisy counterpart.
    pub gap: Option<f64>,
}

/// One aggregate value; `value` is `None` when the statistic is undefined
/// for the data at hand (e.g. a correlation with zero variance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub metric: String,
    pub scope: String,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates(pub Vec<Aggregate>);

impl Aggregates {
    pub fn get(&self, metric: &str, scope: &str) -> Option<f64> {
        self.0.iter().find(|a| a.metric == metric && a.scope == scope).and_then(|a| a.value)
    }

    fn push(&mut self, metric: &str, scope: impl Into<String>, value: Option<f64>) {
        self.0.push(Aggregate {
            metric: metric.to_string(),
            scope: scope.into(),
            value,
        });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Aggregates,
}

fn device(r: &ReportRow) -> String {
    r.backend.clone().unwrap_or_else(|| "unknown".into())
}

fn corr(points: &[(f64, f64)]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    metrics::pearson_r(&x, &y).ok()
}

impl BenchmarkReport {
    pub fn build(results: &[ScenarioResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::InvalidConfig("report needs at least one result".into()));
        }
        let noisy_p: BTreeMap<&str, f64> = results
            .iter()
            .filter(|r| r.scenario == Scenario::Noisy)
            .map(|r| (r.pattern.label.as_str(), r.success_probability()))
            .collect();
        let mut rows = Vec::with_capacity(results.len());
        for (i, r) in results.iter().enumerate() {
            let p = &r.pattern;
            let gap = match (r.scenario, noisy_p.get(p.label.as_str())) {
                (Scenario::HardwareIngested, Some(&emu)) => Some(metrics::performance_gap(emu, r.success_probability())?),
                _ => None,
            };
            rows.push(ReportRow {
                row: i + 1,
                label: p.label.clone(),
                secret: p.secret.to_string(),
                category: p.category,
                n: p.num_qubits(),
                density: p.density(),
                complexity: p.complexity(),
                scenario: r.scenario,
                backend: r.backend.clone(),
                provenance: r.provenance.clone(),
                seed: r.seed,
                shots: r.counts.total(),
                p_success: r.metrics.success_probability,
                hellinger: r.metrics.hellinger,
                fidelity: r.fidelity,
                gap,
            });
        }
        let aggregates = Self::aggregate(&rows);
        Ok(Self { rows, aggregates })
    }

    /// Everything here is a function of `rows` alone.
    pub fn aggregate(rows: &[ReportRow]) -> Aggregates {
        let mut agg = Aggregates::default();
        let scenarios: BTreeSet<Scenario> = rows.iter().map(|r| r.scenario).collect();
        for &s in &scenarios {
            let ps: Vec<f64> = rows.iter().filter(|r| r.scenario == s).map(|r| r.p_success).collect();
            agg.push("mean_p_success", s.name(), metrics::mean(&ps).ok());
        }
        for &s in &scenarios {
            let hs: Vec<f64> = rows.iter().filter(|r| r.scenario == s).map(|r| r.hellinger).collect();
            agg.push("mean_hellinger", s.name(), metrics::mean(&hs).ok());
        }
        let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
        if !gaps.is_empty() {
            agg.push("mean_gap", "hardware_ingested", metrics::mean(&gaps).ok());
        }
        if let (Some(e), Some(h)) = (agg.get("mean_p_success", "noisy"), agg.get("mean_p_success", "hardware_ingested")) {
            agg.push("mean_success_gap", "noisy-hardware_ingested", Some(e - h));
        }
        for &s in &scenarios {
            for c in Category::ALL {
                let ps: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.scenario == s && r.category == c)
                    .map(|r| r.p_success)
                    .collect();
                if !ps.is_empty() {
                    agg.push("category_mean_p_success", format!("{}/{}", s.name(), c.name()), metrics::mean(&ps).ok());
                }
            }
        }
        for &s in &scenarios {
            let with_f: Vec<&ReportRow> = rows.iter().filter(|r| r.scenario == s && r.fidelity.is_some()).collect();
            if with_f.len() >= 2 {
                let df: Vec<(f64, f64)> = with_f.iter().map(|r| (r.density, r.fidelity.unwrap())).collect();
                let fp: Vec<(f64, f64)> = with_f.iter().map(|r| (r.fidelity.unwrap(), r.p_success)).collect();
                agg.push("r_density_fidelity", s.name(), corr(&df));
                agg.push("r_fidelity_p_success", s.name(), corr(&fp));
            }
        }
        let cg: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.gap.map(|g| (r.complexity, g))).collect();
        if cg.len() >= 2 {
            agg.push("r_complexity_gap", "hardware_ingested", corr(&cg));
        }
        if let Some(w) = kendall_across_devices(rows) {
            agg.push("kendalls_w", "hardware_ingested", Some(w));
        }
        agg
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "row", "label", "secret", "category", "n", "density", "complexity", "scenario", "backend", "provenance", "seed",
            "shots", "p_success", "hellinger", "fidelity", "gap",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.row.to_string(),
                r.label.clone(),
                r.secret.clone(),
                r.category.to_string(),
                r.n.to_string(),
                format!("{:.4}", r.density),
                format!("{:.1}", r.complexity),
                r.scenario.to_string(),
                r.backend.clone().unwrap_or_default(),
                r.provenance.clone(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.shots.to_string(),
                format_percent(r.p_success),
                format!("{:.3}", r.hellinger),
                opt(r.fidelity, 3),
                opt(r.gap, 1),
            ])
            .map_err(csv_err)?;
        }
        let mut out = String::from_utf8(w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?)
            .expect("csv output is utf-8");
        out.push('\n');
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "scope", "value"]).map_err(csv_err)?;
        for a in &self.aggregates.0 {
            w.write_record([a.metric.clone(), a.scope.clone(), opt(a.value, 4)]).map_err(csv_err)?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?).expect("utf-8"));
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization") + "\n"
    }

    /// Per-figure series as tab-separated text, keyed by file name.
    pub fn plotdata(&self) -> BTreeMap<&'static str, String> {
        let mut files = BTreeMap::new();

        let mut s = String::from("scenario\tcategory\tmean_p_success\tcount\n");
        let mut groups: BTreeMap<(Scenario, Category), Vec<f64>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((r.scenario, r.category)).or_default().push(r.p_success);
        }
        for ((sc, cat), ps) in &groups {
            let m = ps.iter().sum::<f64>() / ps.len() as f64;
            let _ = writeln!(s, "{sc}\t{cat}\t{m:.4}\t{}", ps.len());
        }
        files.insert("category_means.tsv", s);

        let mut s = String::new();
        for sc in [Scenario::Ideal, Scenario::Noisy, Scenario::HardwareIngested] {
            if let Some(r) = self.aggregates.get("r_density_fidelity", sc.name()) {
                let _ = writeln!(s, "# r_density_fidelity[{sc}] = {r:.4}");
            }
        }
        s.push_str("label\tscenario\tbackend\tn\tdensity\tfidelity\tp_success\n");
        for r in self.rows.iter().filter(|r| r.fidelity.is_some()) {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.4}",
                r.label,
                r.scenario,
                device(r),
                r.n,
                r.density,
                r.fidelity.unwrap(),
                r.p_success
            );
        }
        files.insert("density_fidelity.tsv", s);

        let mut s = String::new();
        if let Some(r) = self.aggregates.get("r_complexity_gap", "hardware_ingested") {
            let _ = writeln!(s, "# r_complexity_gap = {r:.4}");
        }
        s.push_str("label\tbackend\tcomplexity\tgap\n");
        for r in &self.rows {
            if let Some(g) = r.gap {
                let _ = writeln!(s, "{}\t{}\t{:.1}\t{:.4}", r.label, device(r), r.complexity, g);
            }
        }
        files.insert("gap_complexity.tsv", s);
        files
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

/// W over devices (raters) ranking the patterns every device has data for,
/// highest success first.
fn kendall_across_devices(rows: &[ReportRow]) -> Option<f64> {
    let mut by_device: BTreeMap<String, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.scenario == Scenario::HardwareIngested) {
        by_device.entry(device(r)).or_default().insert(r.label.as_str(), r.p_success);
    }
    if by_device.len() < 2 {
        return None;
    }
    let mut common: Option<BTreeSet<&str>> = None;
    for m in by_device.values() {
        let keys: BTreeSet<&str> = m.keys().copied().collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).copied().collect(),
        });
    }
    let common: Vec<&str> = common?.into_iter().collect();
    if common.len() < 2 {
        return None;
    }
    let rankings: Vec<Vec<f64>> = by_device
        .values()
        .map(|m| metrics::average_ranks(&common.iter().map(|l| m[l]).collect::<Vec<_>>(), true))
        .collect();
    metrics::kendalls_w(&rankings).ok()
}

fn safe_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes `results.csv`, `results.json` or `plotdata/*.tsv` under `out_dir`.
/// JSON output also stores every tomography result under `qst/`.
pub fn generate_report(results: &[ScenarioResult], format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let report = BenchmarkReport::build(results)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => write(out_dir.join("results.csv"), &report.to_csv()?, &mut written)?,
        ReportFormat::Json => {
            write(out_dir.join("results.json"), &report.to_json(), &mut written)?;
            for (row, r) in report.rows.iter().zip(results) {
                if let Some(t) = &r.tomography {
                    let name = format!("{:02}_{}_{}.json", row.row, safe_name(&row.label), row.scenario);
                    write(out_dir.join("qst").join(name), &t.to_json(), &mut written)?;
                }
            }
        }
        ReportFormat::Plotdata => {
            for (name, body) in report.plotdata() {
                write(out_dir.join("plotdata").join(name), &body, &mut written)?;
            }
        }
    }
    Ok(written)
}
