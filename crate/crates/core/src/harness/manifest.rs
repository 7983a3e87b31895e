use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    builtin_suite, find_pattern, generate_report, ingest_hardware_counts, run_suite, run_validation, NoiseContext,
    ReportFormat, RunOptions, Scenario, ScenarioResult, TestPattern, VALIDATION_LABEL,
};
use crate::circuit::{OracleStyle, SecretString};
use crate::error::{Error, Result};
use crate::noise::{CalibrationSnapshot, NoiseOptions};
use crate::simulator::DEFAULT_SHOTS;

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

/// Suite run description. Relative paths are resolved against the
/// manifest's own directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Suite labels or raw bitstrings; the whole built-in suite when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<String>>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub oracle: OracleStyle,
    /// Simulated scenarios; `ideal`, plus `noisy` when a snapshot is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<Scenario>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ingest: Vec<PathBuf>,
    /// Every `*.json` file in this directory is ingested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qst_shots: Option<u64>,
    #[serde(default)]
    pub idle_decay: bool,
    /// Repeats of the validation pattern written to `validation.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// A manifest with every default filled in, every path absolute and the
/// ingest directory expanded. This is what gets written next to the results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedManifest {
    pub patterns: Vec<TestPattern>,
    pub shots: u64,
    pub seed: u64,
    pub oracle: OracleStyle,
    pub scenarios: Vec<Scenario>,
    pub snapshot: Option<PathBuf>,
    pub ingest: Vec<PathBuf>,
    pub qst_shots: Option<u64>,
    pub idle_decay: bool,
    pub validation_repeats: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// `seed` is used only when the manifest does not fix one.
    pub fn resolve(&self, base_dir: &Path, seed: u64) -> Result<ResolvedManifest> {
        let at = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let suite = builtin_suite();
        let patterns = match &self.patterns {
            None => suite.clone(),
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidConfig("manifest selects no patterns".into()));
                }
                list.iter()
                    .map(|s| match find_pattern(&suite, s) {
                        Some(p) => Ok(p.clone()),
                        None => Ok(TestPattern::adhoc(&SecretString::new(s)?)),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let snapshot = self.snapshot.as_deref().map(at);
        let scenarios = match &self.scenarios {
            Some(s) => s.clone(),
            None if snapshot.is_some() => vec![Scenario::Ideal, Scenario::Noisy],
            None => vec![Scenario::Ideal],
        };
        if scenarios.contains(&Scenario::HardwareIngested) {
            return Err(Error::InvalidConfig(
                "hardware_ingested is not a simulated scenario; list files under ingest/ingest_dir".into(),
            ));
        }
        if scenarios.contains(&Scenario::Noisy) && snapshot.is_none() {
            return Err(Error::Snapshot("noisy scenario needs a snapshot".into()));
        }
        if self.shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        let mut ingest: Vec<PathBuf> = self.ingest.iter().map(|p| at(p)).collect();
        if let Some(dir) = &self.ingest_dir {
            let dir = at(dir);
            let mut found = Vec::new();
            for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
                let p = entry.map_err(|e| Error::io(&dir, e))?.path();
                if p.extension().is_some_and(|e| e == "json") {
                    found.push(p);
                }
            }
            found.sort();
            ingest.extend(found);
        }
        Ok(ResolvedManifest {
            patterns,
            shots: self.shots,
            seed: self.seed.unwrap_or(seed),
            oracle: self.oracle,
            scenarios,
            snapshot,
            ingest,
            qst_shots: self.qst_shots,
            idle_decay: self.idle_decay,
            validation_repeats: self.validation_repeats,
            out_dir: self.out_dir.as_deref().map(at),
        })
    }
}

impl ResolvedManifest {
    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            shots: self.shots,
            seed: self.seed,
            oracle: self.oracle,
            qst_shots: self.qst_shots,
        }
    }

    pub fn noise_context(&self) -> Result<Option<NoiseContext>> {
        self.snapshot
            .as_ref()
            .map(|p| {
                let snap = CalibrationSnapshot::load(p)?;
                NoiseContext::from_snapshot(
                    &snap,
                    NoiseOptions {
                        idle_decay: self.idle_decay,
                    },
                )
            })
            .transpose()
    }

    /// Simulated results in (pattern, scenario) order, then ingested ones in
    /// file order.
    pub fn execute(&self, jobs: usize) -> Result<Vec<ScenarioResult>> {
        let noise = self.noise_context()?;
        let mut results = run_suite(&self.patterns, &self.scenarios, noise.as_ref(), &self.run_options(), jobs)?;
        let suite = builtin_suite();
        for path in &self.ingest {
            results.push(ingest_hardware_counts(path, &suite)?);
        }
        Ok(results)
    }

    /// Runs the manifest and writes the full report tree plus the resolved
    /// manifest itself.
    pub fn run_to(&self, out_dir: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
        let results = self.execute(jobs)?;
        let mut written = Vec::new();
        for f in ReportFormat::ALL {
            written.extend(generate_report(&results, f, out_dir)?);
        }
        if let Some(n) = self.validation_repeats {
            let suite = builtin_suite();
            let p = find_pattern(&suite, VALIDATION_LABEL).expect("validation pattern");
            let noise = self.noise_context()?;
            let scenario = if noise.is_some() { Scenario::Noisy } else { Scenario::Ideal };
            let v = run_validation(p, scenario, noise.as_ref(), n, &self.run_options())?;
            let path = out_dir.join("validation.json");
            fs::write(&path, serde_json::to_string_pretty(&v)? + "\n").map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        let path = out_dir.join("manifest.resolved.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}
