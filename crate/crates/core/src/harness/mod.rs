//! The 11-pattern benchmark suite, scenario execution, hardware ingestion and
//! reproducibility checks.

mod manifest;
mod report;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{build_bv_circuit, OracleStyle, SecretString};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport};
use crate::noise::{build_noise_model, CalibrationSnapshot, NoiseModel, NoiseOptions};
use crate::simulator::{derive_seed, run_ideal, run_noisy, CountsDistribution, ExecutionConfig, DEFAULT_SHOTS};
use crate::tomography::{run_qst, TomographyResult, MAX_QST_QUBITS};

pub use manifest::{Manifest, ResolvedManifest};
pub use report::{generate_report, Aggregates, BenchmarkReport, ReportFormat, ReportRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Baseline,
    Sensitivity,
    Alternating,
    Symmetric,
    Mirror,
    MediumDensity,
    HighDensity,
    VeryHighDensity,
}

fn halves(s: &str) -> Option<(&str, &str)> {
    (s.len() >= 2 && s.len().is_multiple_of(2)).then(|| s.split_at(s.len() / 2))
}

/// Registers at least this wide count as "very high" rather than "high" density.
const VERY_HIGH_MIN_QUBITS: usize = 10;

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Baseline,
        Category::Sensitivity,
        Category::Alternating,
        Category::Symmetric,
        Category::Mirror,
        Category::MediumDensity,
        Category::HighDensity,
        Category::VeryHighDensity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Baseline => "baseline",
            Category::Sensitivity => "sensitivity",
            Category::Alternating => "alternating",
            Category::Symmetric => "symmetric",
            Category::Mirror => "mirror",
            Category::MediumDensity => "medium_density",
            Category::HighDensity => "high_density",
            Category::VeryHighDensity => "very_high_density",
        }
    }

    /// Structural predicate a secret must satisfy to carry this category.
    pub fn admits(self, s: &SecretString) -> bool {
        let bits = s.as_str();
        let density = s.density();
        match self {
            Category::Baseline => s.hamming_weight() == 0,
            Category::Sensitivity => s.hamming_weight() == 1,
            Category::Alternating => bits.len() >= 2 && bits.as_bytes().windows(2).all(|w| w[0] != w[1]),
            Category::Symmetric => halves(bits).is_some_and(|(a, b)| a == b),
            Category::Mirror => halves(bits).is_some_and(|(a, b)| a.chars().rev().eq(b.chars())),
            Category::MediumDensity => (0.25..=2.0 / 3.0 + 1e-12).contains(&density),
            Category::HighDensity => density > 2.0 / 3.0 + 1e-12 && s.len() < VERY_HIGH_MIN_QUBITS,
            Category::VeryHighDensity => density > 2.0 / 3.0 + 1e-12 && s.len() >= VERY_HIGH_MIN_QUBITS,
        }
    }

    /// First admitting category in a fixed priority order; used for patterns
    /// outside the built-in suite.
    pub fn infer(s: &SecretString) -> Category {
        [
            Category::Baseline,
            Category::Sensitivity,
            Category::HighDensity,
            Category::VeryHighDensity,
            Category::Alternating,
            Category::Mirror,
            Category::Symmetric,
        ]
        .into_iter()
        .find(|c| c.admits(s))
        .unwrap_or(Category::MediumDensity)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestPattern {
    pub secret: SecretString,
    pub category: Category,
    pub label: String,
}

impl TestPattern {
    pub fn new(secret: &str, category: Category, label: impl Into<String>) -> Result<Self> {
        let secret = SecretString::new(secret)?;
        if !category.admits(&secret) {
            return Err(Error::InvalidConfig(format!("{secret} does not fit category {category}")));
        }
        Ok(Self {
            secret,
            category,
            label: label.into(),
        })
    }

    /// Pattern with an inferred category, labelled by its bits.
    pub fn adhoc(secret: &SecretString) -> Self {
        Self {
            secret: secret.clone(),
            category: Category::infer(secret),
            label: secret.to_string(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.secret.len()
    }

    pub fn density(&self) -> f64 {
        self.secret.density()
    }

    /// Qubit count × density (equals the Hamming weight).
    pub fn complexity(&self) -> f64 {
        self.num_qubits() as f64 * self.density()
    }
}

/// Label of the repeated 111111 run.
pub const VALIDATION_LABEL: &str = "111111-validation";

/// The fixed 11-row benchmark suite, in table order.
pub fn builtin_suite() -> Vec<TestPattern> {
    use Category::*;
    [
        ("000000", Baseline, "000000"),
        ("000001", Sensitivity, "000001"),
        ("101010", Alternating, "101010"),
        ("011011", Symmetric, "011011"),
        ("10011001", Mirror, "10011001"),
        ("011101", MediumDensity, "011101"),
        ("100100", MediumDensity, "100100"),
        ("1111", HighDensity, "1111"),
        ("111111", HighDensity, "111111"),
        ("1111111111", VeryHighDensity, "1111111111"),
        ("111111", HighDensity, VALIDATION_LABEL),
    ]
    .into_iter()
    .map(|(s, c, l)| TestPattern::new(s, c, l).expect("built-in pattern"))
    .collect()
}

/// SHA-256 of the suite's canonical JSON.
pub fn suite_fingerprint(suite: &[TestPattern]) -> String {
    let json = serde_json::to_string(suite).expect("suite serialization");
    hex::encode(Sha256::digest(json.as_bytes()))
}

pub fn find_pattern<'a>(suite: &'a [TestPattern], label: &str) -> Option<&'a TestPattern> {
    suite.iter().find(|p| p.label == label)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Ideal,
    Noisy,
    HardwareIngested,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Ideal => "ideal",
            Scenario::Noisy => "noisy",
            Scenario::HardwareIngested => "hardware_ingested",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(Scenario::Ideal),
            "noisy" => Ok(Scenario::Noisy),
            "hardware" | "hardware_ingested" => Ok(Scenario::HardwareIngested),
            other => Err(Error::InvalidConfig(format!("unknown scenario {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub pattern: TestPattern,
    pub scenario: Scenario,
    pub counts: CountsDistribution,
    pub metrics: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    /// Snapshot id for noisy runs, ingest file id for hardware data.
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub tomography: Option<TomographyResult>,
}

impl ScenarioResult {
    /// Wraps externally produced counts. Hardware results may not carry a seed.
    pub fn from_counts(
        pattern: TestPattern,
        scenario: Scenario,
        counts: CountsDistribution,
        provenance: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if scenario == Scenario::HardwareIngested && seed.is_some() {
            return Err(Error::InvalidConfig("hardware results carry no simulation seed".into()));
        }
        let metrics = MetricReport::compute(&counts, &pattern.secret)?;
        Ok(Self {
            pattern,
            scenario,
            counts,
            metrics,
            fidelity: None,
            provenance: provenance.into(),
            backend: None,
            seed,
            tomography: None,
        })
    }

    pub fn success_probability(&self) -> f64 {
        self.metrics.success_probability
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serialization")
    }
}

/// A calibration snapshot together with the model built from it.
#[derive(Clone, Debug)]
pub struct NoiseContext {
    pub model: NoiseModel,
    pub snapshot_id: String,
}

impl NoiseContext {
    pub fn from_snapshot(snap: &CalibrationSnapshot, options: NoiseOptions) -> Result<Self> {
        Ok(Self {
            model: build_noise_model(snap, options)?,
            snapshot_id: snapshot_id(snap),
        })
    }
}

/// `backend@timestamp#<first 12 hex digits of the snapshot's SHA-256>`.
pub fn snapshot_id(snap: &CalibrationSnapshot) -> String {
    let digest = hex::encode(Sha256::digest(snap.to_json().as_bytes()));
    format!("{}@{}#{}", snap.backend_name, snap.timestamp, &digest[..12])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub shots: u64,
    /// Base seed; every job derives its own from it.
    pub seed: u64,
    pub oracle: OracleStyle,
    /// Run tomography with this many shots when the pattern has ≤ 6 qubits.
    pub qst_shots: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS,
            seed: 0,
            oracle: OracleStyle::Cnot,
            qst_shots: None,
        }
    }
}

/// Seed of the (pattern, scenario) job.
pub fn job_seed(base: u64, pattern: &TestPattern, scenario: Scenario) -> u64 {
    derive_seed(base, &format!("{}/{}", pattern.label, scenario))
}

/// Simulated scenario for one pattern; `noise` is required for [`Scenario::Noisy`].
pub fn run_scenario(
    p: &TestPattern,
    scenario: Scenario,
    noise: Option<&NoiseContext>,
    opts: &RunOptions,
) -> Result<ScenarioResult> {
    let circuit = build_bv_circuit(&p.secret, opts.oracle)?;
    let seed = job_seed(opts.seed, p, scenario);
    let (counts, provenance, model) = match scenario {
        Scenario::Ideal => (
            run_ideal(&circuit, &ExecutionConfig::ideal(opts.shots, seed)?)?,
            "ideal".to_string(),
            None,
        ),
        Scenario::Noisy => {
            let ctx = noise.ok_or_else(|| Error::Snapshot("noisy scenario needs a calibration snapshot".into()))?;
            (
                run_noisy(&circuit, &ctx.model, &ExecutionConfig::noisy(opts.shots, seed)?)?,
                ctx.snapshot_id.clone(),
                Some(&ctx.model),
            )
        }
        Scenario::HardwareIngested => {
            return Err(Error::InvalidConfig(
                "hardware results come from ingest files, not simulation".into(),
            ))
        }
    };
    let mut result = ScenarioResult::from_counts(p.clone(), scenario, counts, provenance, Some(seed))?;
    if let Some(qst_shots) = opts.qst_shots {
        if p.num_qubits() <= MAX_QST_QUBITS {
            let tomo = run_qst(&circuit, model, qst_shots, derive_seed(seed, "qst"))?;
            result.fidelity = Some(tomo.fidelity);
            result.tomography = Some(tomo);
        }
    }
    Ok(result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestFile {
    pattern: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    backend_name: Option<String>,
    #[serde(default)]
    fidelity: Option<f64>,
    /// SHA-256 (hex) of the canonical counts JSON, if the producer recorded one.
    #[serde(default)]
    sha256: Option<String>,
    n_bits: usize,
    shots: u64,
    counts: std::collections::BTreeMap<String, u64>,
}

/// Parses a hardware counts file. `suite` resolves the row the data belongs
/// to (by `label`, else the first pattern with matching bits).
pub fn ingest_hardware_text(text: &str, file_id: &str, suite: &[TestPattern]) -> Result<ScenarioResult> {
    let f: IngestFile = serde_json::from_str(text)?;
    let secret = SecretString::new(&f.pattern)?;
    if f.n_bits != secret.len() {
        return Err(Error::InvalidCounts(format!(
            "n_bits = {} but pattern {} has {} bits",
            f.n_bits,
            secret,
            secret.len()
        )));
    }
    let counts: CountsDistribution = serde_json::from_value(serde_json::json!({
        "n_bits": f.n_bits,
        "shots": f.shots,
        "counts": f.counts,
    }))?;
    if let Some(expected) = &f.sha256 {
        let actual = hex::encode(Sha256::digest(counts.to_json().as_bytes()));
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(Error::InvalidCounts(format!("checksum mismatch: file says {expected}, counts hash to {actual}")));
        }
    }
    let pattern = match &f.label {
        Some(l) => find_pattern(suite, l)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("unknown pattern label {l:?}")))?,
        None => suite
            .iter()
            .find(|p| p.secret == secret)
            .cloned()
            .unwrap_or_else(|| TestPattern::adhoc(&secret)),
    };
    if pattern.secret != secret {
        return Err(Error::InvalidConfig(format!(
            "label {} is pattern {}, file has {}",
            pattern.label, pattern.secret, secret
        )));
    }
    if let Some(fid) = f.fidelity {
        if !(0.0..=1.0).contains(&fid) {
            return Err(Error::InvalidProbability {
                name: "fidelity",
                value: fid,
            });
        }
    }
    let mut result = ScenarioResult::from_counts(pattern, Scenario::HardwareIngested, counts, format!("ingest:{file_id}"), None)?;
    result.fidelity = f.fidelity;
    result.backend = f.backend_name;
    Ok(result)
}

pub fn ingest_hardware_counts(path: impl AsRef<Path>, suite: &[TestPattern]) -> Result<ScenarioResult> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::InvalidCounts(e.to_string()))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let digest = hex::encode(Sha256::digest(&bytes));
    ingest_hardware_text(&text, &format!("{name}#{}", &digest[..12]), suite)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pattern: TestPattern,
    pub scenario: Scenario,
    pub seeds: Vec<u64>,
    pub success: Vec<f64>,
    pub mean: f64,
    /// max − min, in percentage points.
    pub spread: f64,
}

/// Repeats one scenario with independent sampling seeds.
pub fn run_validation(
    p: &TestPattern,
    scenario: Scenario,
    noise: Option<&NoiseContext>,
    n_repeats: usize,
    opts: &RunOptions,
) -> Result<ValidationReport> {
    if n_repeats < 2 {
        return Err(Error::InvalidConfig("validation needs at least two repeats".into()));
    }
    let base_seeds: Vec<u64> = (0..n_repeats).map(|i| derive_seed(opts.seed, &format!("validation:{i}"))).collect();
    let mut seeds = Vec::with_capacity(n_repeats);
    let mut success = Vec::with_capacity(n_repeats);
    for &base in &base_seeds {
        let r = run_scenario(p, scenario, noise, &RunOptions { seed: base, qst_shots: None, ..*opts })?;
        seeds.push(r.seed.expect("simulated"));
        success.push(r.success_probability());
    }
    let lo = success.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = success.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ValidationReport {
        pattern: p.clone(),
        scenario,
        seeds,
        mean: metrics::mean(&success)?,
        spread: hi - lo,
        success,
    })
}

/// Runs every (pattern, scenario) job, in parallel when `jobs > 1`. Results
/// come back in (pattern, scenario) order regardless of scheduling.
pub fn run_suite(
    patterns: &[TestPattern],
    scenarios: &[Scenario],
    noise: Option<&NoiseContext>,
    opts: &RunOptions,
    jobs: usize,
) -> Result<Vec<ScenarioResult>> {
    let work: Vec<(&TestPattern, Scenario)> = patterns
        .iter()
        .flat_map(|p| scenarios.iter().map(move |&s| (p, s)))
        .collect();
    let run = || -> Result<Vec<ScenarioResult>> {
        work.par_iter()
            .map(|(p, s)| {
                log::info!("running {} / {}", p.label, s);
                run_scenario(p, *s, noise, opts)
            })
            .collect()
    };
    if jobs <= 1 {
        work.iter().map(|(p, s)| run_scenario(p, *s, noise, opts)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::UniformDevice;

    #[test]
    fn suite_shape() {
        let suite = builtin_suite();
        assert_eq!(suite.len(), 11);
        let ten = find_pattern(&suite, "1111111111").unwrap();
        assert_eq!(ten.density(), 1.0);
        let mirror = find_pattern(&suite, "10011001").unwrap();
        assert_eq!(mirror.category, Category::Mirror);
        assert_eq!(suite.iter().filter(|p| p.secret.as_str() == "111111").count(), 2);
        for p in &suite {
            assert!(p.category.admits(&p.secret), "{}", p.label);
        }
    }

    #[test]
    fn suite_is_pinned() {
        assert_eq!(
            suite_fingerprint(&builtin_suite()),
            "93d4a51e734bfb2c761f3a9ffa29e3af16dbf351f8b019ee8b16de82aace29a7"
        );
    }

    #[test]
    fn category_predicates() {
        let s = |b: &str| SecretString::new(b).unwrap();
        assert!(Category::Alternating.admits(&s("101010")));
        assert!(!Category::Alternating.admits(&s("100100")));
        assert!(Category::Mirror.admits(&s("10011001")));
        assert!(!Category::Mirror.admits(&s("011011")));
        assert!(Category::Symmetric.admits(&s("011011")));
        assert!(TestPattern::new("011011", Category::Alternating, "x").is_err());
        assert_eq!(Category::infer(&s("10011001")), Category::Mirror);
        assert_eq!(Category::infer(&s("0000")), Category::Baseline);
        assert_eq!(Category::infer(&s("1111111111")), Category::VeryHighDensity);
    }

    #[test]
    fn ideal_and_zero_noise_agree() {
        let suite = builtin_suite();
        let snap = CalibrationSnapshot::uniform(11, UniformDevice::noiseless()).unwrap();
        let ctx = NoiseContext::from_snapshot(&snap, NoiseOptions::default()).unwrap();
        let opts = RunOptions {
            shots: 500,
            ..RunOptions::default()
        };
        let p = find_pattern(&suite, "011101").unwrap();
        let ideal = run_scenario(p, Scenario::Ideal, None, &opts).unwrap();
        let noisy = run_scenario(p, Scenario::Noisy, Some(&ctx), &opts).unwrap();
        assert_eq!(ideal.success_probability(), 100.0);
        assert_eq!(ideal.counts, noisy.counts);
        assert!(run_scenario(p, Scenario::Noisy, None, &opts).is_err());
    }

    #[test]
    fn ingest_valid_and_invalid() {
        let suite = builtin_suite();
        let good = r#"{"pattern":"000000","backend_name":"dev_a","n_bits":6,"shots":1000,
                       "counts":{"000000":683,"000001":317}}"#;
        let r = ingest_hardware_text(good, "a.json", &suite).unwrap();
        assert!((r.success_probability() - 68.3).abs() < 1e-9);
        assert_eq!(r.seed, None);
        assert_eq!(r.scenario, Scenario::HardwareIngested);
        assert_eq!(r.backend.as_deref(), Some("dev_a"));

        let bad_total = good.replace("1000", "999");
        assert!(ingest_hardware_text(&bad_total, "b", &suite).is_err());
        let bad_width = good.replace("\"n_bits\":6", "\"n_bits\":5");
        assert!(ingest_hardware_text(&bad_width, "c", &suite).is_err());
        let bad_sum = good.replace("\"shots\":1000", "\"shots\":1000,\"sha256\":\"00\"");
        assert!(ingest_hardware_text(&bad_sum, "d", &suite).is_err());
        let validation = good.replace("\"pattern\":\"000000\"", "\"pattern\":\"000000\",\"label\":\"111111-validation\"");
        assert!(ingest_hardware_text(&validation, "e", &suite).is_err());
    }

    #[test]
    fn validation_repeats() {
        let suite = builtin_suite();
        let p = find_pattern(&suite, "1111").unwrap();
        let opts = RunOptions {
            shots: 200,
            ..RunOptions::default()
        };
        let v = run_validation(p, Scenario::Ideal, None, 3, &opts).unwrap();
        assert!(v.success.iter().all(|&x| x == 100.0));
        assert_eq!(v.spread, 0.0);
        assert!(run_validation(p, Scenario::Ideal, None, 1, &opts).is_err());
        let again = run_validation(p, Scenario::Ideal, None, 3, &opts).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn parallel_matches_sequential() {
        let suite: Vec<TestPattern> = builtin_suite().into_iter().take(4).collect();
        let snap = CalibrationSnapshot::uniform(7, UniformDevice::reference()).unwrap();
        let ctx = NoiseContext::from_snapshot(&snap, NoiseOptions::default()).unwrap();
        let opts = RunOptions {
            shots: 1000,
            seed: 9,
            ..RunOptions::default()
        };
        let scen = [Scenario::Ideal, Scenario::Noisy];
        let a = run_suite(&suite, &scen, Some(&ctx), &opts, 1).unwrap();
        let b = run_suite(&suite, &scen, Some(&ctx), &opts, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.counts, y.counts);
            assert_eq!(x.seed, y.seed);
        }
    }
}
