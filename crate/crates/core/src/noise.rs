//! Calibration snapshots and the noise channels derived from them.
//!
//! Every gate is followed by a depolarizing channel sized from its reported
//! error rate and then by thermal relaxation (zero temperature) of the qubits
//! it touches for the gate duration. Readout is modelled separately as a
//! per-qubit column-stochastic confusion matrix.
//!
//! Snapshot files carry units in their field names (`t1_us`, `duration_ns`,
//! `frequency_ghz`); in memory everything is SI.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::quantum::{gates, CMatrix, KrausChannel, ONE, ZERO};

/// Placeholder durations used when a snapshot omits them.
pub const DEFAULT_1Q_DURATION: f64 = 60e-9;
pub const DEFAULT_2Q_DURATION: f64 = 533e-9;
pub const DEFAULT_READOUT_LENGTH: f64 = 1.4e-6;

/// Gate identity for calibration lookup (angle-free).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateTag {
    H,
    X,
    S,
    Sdg,
    #[serde(rename = "sx")]
    SX,
    #[serde(rename = "sxdg")]
    SXdg,
    #[serde(rename = "rz")]
    RZ,
    Id,
    #[serde(rename = "cx", alias = "cnot")]
    CNOT,
    #[serde(rename = "ecr")]
    ECR,
}

impl GateTag {
    pub const ALL: [GateTag; 10] = [
        GateTag::H,
        GateTag::X,
        GateTag::S,
        GateTag::Sdg,
        GateTag::SX,
        GateTag::SXdg,
        GateTag::RZ,
        GateTag::Id,
        GateTag::CNOT,
        GateTag::ECR,
    ];

    pub fn of(kind: GateKind) -> Option<GateTag> {
        Some(match kind {
            GateKind::H => GateTag::H,
            GateKind::X => GateTag::X,
            GateKind::S => GateTag::S,
            GateKind::Sdg => GateTag::Sdg,
            GateKind::SX => GateTag::SX,
            GateKind::SXdg => GateTag::SXdg,
            GateKind::RZ(_) => GateTag::RZ,
            GateKind::Id => GateTag::Id,
            GateKind::CNOT => GateTag::CNOT,
            GateKind::ECR => GateTag::ECR,
            GateKind::Measure => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            GateTag::CNOT | GateTag::ECR => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateTag::H => "h",
            GateTag::X => "x",
            GateTag::S => "s",
            GateTag::Sdg => "sdg",
            GateTag::SX => "sx",
            GateTag::SXdg => "sxdg",
            GateTag::RZ => "rz",
            GateTag::Id => "id",
            GateTag::CNOT => "cx",
            GateTag::ECR => "ecr",
        }
    }

    /// Calibration entries consulted, in order, for a logical gate.
    /// Non-native gates borrow the calibration of the native pulse that realises them.
    fn lookup_chain(self) -> &'static [GateTag] {
        match self {
            GateTag::H => &[GateTag::H, GateTag::SX],
            GateTag::X => &[GateTag::X],
            GateTag::S => &[GateTag::S, GateTag::RZ],
            GateTag::Sdg => &[GateTag::Sdg, GateTag::RZ],
            GateTag::SX => &[GateTag::SX],
            GateTag::SXdg => &[GateTag::SXdg, GateTag::SX],
            GateTag::RZ => &[GateTag::RZ],
            GateTag::Id => &[GateTag::Id],
            GateTag::CNOT => &[GateTag::CNOT, GateTag::ECR],
            GateTag::ECR => &[GateTag::ECR, GateTag::CNOT],
        }
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QubitCalibration {
    /// Seconds.
    pub t1: f64,
    /// Seconds.
    pub t2: f64,
    /// Hz, metadata only.
    pub frequency: f64,
    /// Hz, metadata only.
    pub anharmonicity: f64,
    pub readout_error: f64,
    /// P(measure 0 | prepared 1).
    pub prob_meas0_prep1: f64,
    /// P(measure 1 | prepared 0).
    pub prob_meas1_prep0: f64,
    /// Seconds.
    pub readout_length: f64,
}

impl QubitCalibration {
    /// Symmetric readout error, no frequency metadata.
    pub fn new(t1: f64, t2: f64, readout_error: f64) -> Self {
        Self {
            t1,
            t2,
            frequency: 0.0,
            anharmonicity: 0.0,
            readout_error,
            prob_meas0_prep1: readout_error,
            prob_meas1_prep0: readout_error,
            readout_length: DEFAULT_READOUT_LENGTH,
        }
    }

    pub fn validate(&self, qubit: usize) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(Error::Snapshot(format!("qubit {qubit}: T1 must be positive")));
        }
        if !(self.t2 > 0.0 && self.t2.is_finite()) {
            return Err(Error::Snapshot(format!("qubit {qubit}: T2 must be positive")));
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::UnphysicalCoherence {
                qubit: Some(qubit),
                t2: self.t2,
                two_t1: 2.0 * self.t1,
            });
        }
        check_probability("readout_error", self.readout_error)?;
        check_probability("prob_meas0_prep1", self.prob_meas0_prep1)?;
        check_probability("prob_meas1_prep0", self.prob_meas1_prep0)?;
        if self.readout_length < 0.0 {
            return Err(Error::Snapshot(format!("qubit {qubit}: negative readout length")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateCalibration {
    pub kind: GateTag,
    pub qubits: Vec<usize>,
    pub error_rate: f64,
    /// Seconds.
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSnapshot {
    pub backend_name: String,
    pub timestamp: String,
    pub qubits: Vec<QubitCalibration>,
    pub gates: Vec<GateCalibration>,
}

/// Parameters for a homogeneous device.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformDevice {
    pub t1: f64,
    pub t2: f64,
    pub error_1q: f64,
    pub error_2q: f64,
    pub readout_error: f64,
    pub duration_1q: f64,
    pub duration_2q: f64,
}

impl UniformDevice {
    /// T1 = 250 µs, T2 = 150 µs, 1q error 3e-4, 2q error 8e-3, readout 3%.
    pub fn reference() -> Self {
        Self {
            t1: 250e-6,
            t2: 150e-6,
            error_1q: 3e-4,
            error_2q: 8e-3,
            readout_error: 0.03,
            duration_1q: DEFAULT_1Q_DURATION,
            duration_2q: DEFAULT_2Q_DURATION,
        }
    }

    /// Zero error rates and zero durations: the model reduces to ideal execution.
    pub fn noiseless() -> Self {
        Self {
            t1: 250e-6,
            t2: 150e-6,
            error_1q: 0.0,
            error_2q: 0.0,
            readout_error: 0.0,
            duration_1q: 0.0,
            duration_2q: 0.0,
        }
    }
}

impl CalibrationSnapshot {
    pub fn new(
        backend_name: impl Into<String>,
        timestamp: impl Into<String>,
        qubits: Vec<QubitCalibration>,
        gates: Vec<GateCalibration>,
    ) -> Result<Self> {
        let snap = Self {
            backend_name: backend_name.into(),
            timestamp: timestamp.into(),
            qubits,
            gates,
        };
        snap.validate()?;
        Ok(snap)
    }

    /// All-to-all device with the native set (id, rz, sx, x, ecr) calibrated everywhere.
    pub fn uniform(num_qubits: usize, device: UniformDevice) -> Result<Self> {
        let qubits = (0..num_qubits)
            .map(|_| QubitCalibration::new(device.t1, device.t2, device.readout_error))
            .collect();
        let mut gates = Vec::new();
        for q in 0..num_qubits {
            for kind in [GateTag::Id, GateTag::SX, GateTag::X] {
                gates.push(GateCalibration {
                    kind,
                    qubits: vec![q],
                    error_rate: device.error_1q,
                    duration: device.duration_1q,
                });
            }
            gates.push(GateCalibration {
                kind: GateTag::RZ,
                qubits: vec![q],
                error_rate: 0.0,
                duration: 0.0,
            });
        }
        for a in 0..num_qubits {
            for b in 0..num_qubits {
                if a != b {
                    gates.push(GateCalibration {
                        kind: GateTag::ECR,
                        qubits: vec![a, b],
                        error_rate: device.error_2q,
                        duration: device.duration_2q,
                    });
                }
            }
        }
        Self::new("uniform", "1970-01-01T00:00:00Z", qubits, gates)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, q) in self.qubits.iter().enumerate() {
            q.validate(i)?;
        }
        for g in &self.gates {
            if g.qubits.len() != g.kind.arity() {
                return Err(Error::Snapshot(format!(
                    "gate {} expects {} qubit(s), got {:?}",
                    g.kind.name(),
                    g.kind.arity(),
                    g.qubits
                )));
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.qubits.len()) {
                return Err(Error::MissingQubit(q));
            }
            if g.qubits.len() == 2 && g.qubits[0] == g.qubits[1] {
                return Err(Error::DuplicateTarget(g.qubits[0]));
            }
            if !(0.0..1.0).contains(&g.error_rate) {
                return Err(Error::InvalidProbability {
                    name: "gate error",
                    value: g.error_rate,
                });
            }
            if !(g.duration >= 0.0 && g.duration.is_finite()) {
                return Err(Error::Snapshot(format!(
                    "gate {} on {:?}: negative duration",
                    g.kind.name(),
                    g.qubits
                )));
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    fn find(&self, tag: GateTag, qubits: &[usize]) -> Option<&GateCalibration> {
        let exact = self.gates.iter().find(|g| g.kind == tag && g.qubits == qubits);
        exact.or_else(|| {
            (qubits.len() == 2).then_some(())?;
            self.gates
                .iter()
                .find(|g| g.kind == tag && g.qubits[0] == qubits[1] && g.qubits[1] == qubits[0])
        })
    }

    /// Calibration for a logical gate, following the native-gate fallback chain.
    pub fn lookup(&self, tag: GateTag, qubits: &[usize]) -> Option<&GateCalibration> {
        tag.lookup_chain().iter().find_map(|&t| self.find(t, qubits))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SnapshotFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SnapshotFile::from(self)).expect("snapshot serialization")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    backend_name: String,
    #[serde(default)]
    timestamp: String,
    qubits: Vec<QubitRecord>,
    #[serde(default)]
    gates: Vec<GateRecord>,
}

#[derive(Serialize, Deserialize)]
struct QubitRecord {
    t1_us: f64,
    t2_us: f64,
    readout_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prob_meas0_prep1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prob_meas1_prep0: Option<f64>,
    #[serde(default)]
    frequency_ghz: f64,
    #[serde(default)]
    anharmonicity_ghz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    readout_length_ns: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    kind: GateTag,
    qubits: Vec<usize>,
    error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_ns: Option<f64>,
}

impl TryFrom<SnapshotFile> for CalibrationSnapshot {
    type Error = Error;

    fn try_from(f: SnapshotFile) -> Result<Self> {
        let qubits = f
            .qubits
            .into_iter()
            .map(|q| QubitCalibration {
                t1: q.t1_us * 1e-6,
                t2: q.t2_us * 1e-6,
                frequency: q.frequency_ghz * 1e9,
                anharmonicity: q.anharmonicity_ghz * 1e9,
                readout_error: q.readout_error,
                prob_meas0_prep1: q.prob_meas0_prep1.unwrap_or(q.readout_error),
                prob_meas1_prep0: q.prob_meas1_prep0.unwrap_or(q.readout_error),
                readout_length: q.readout_length_ns.map_or(DEFAULT_READOUT_LENGTH, |ns| ns * 1e-9),
            })
            .collect();
        let gates = f
            .gates
            .into_iter()
            .map(|g| GateCalibration {
                kind: g.kind,
                duration: g.duration_ns.map_or(
                    if g.kind.arity() == 2 {
                        DEFAULT_2Q_DURATION
                    } else if g.kind == GateTag::RZ {
                        0.0
                    } else {
                        DEFAULT_1Q_DURATION
                    },
                    |ns| ns * 1e-9,
                ),
                qubits: g.qubits,
                error_rate: g.error,
            })
            .collect();
        CalibrationSnapshot::new(f.backend_name, f.timestamp, qubits, gates)
    }
}

impl From<&CalibrationSnapshot> for SnapshotFile {
    fn from(s: &CalibrationSnapshot) -> Self {
        SnapshotFile {
            backend_name: s.backend_name.clone(),
            timestamp: s.timestamp.clone(),
            qubits: s
                .qubits
                .iter()
                .map(|q| QubitRecord {
                    t1_us: q.t1 * 1e6,
                    t2_us: q.t2 * 1e6,
                    readout_error: q.readout_error,
                    prob_meas0_prep1: Some(q.prob_meas0_prep1),
                    prob_meas1_prep0: Some(q.prob_meas1_prep0),
                    frequency_ghz: q.frequency * 1e-9,
                    anharmonicity_ghz: q.anharmonicity * 1e-9,
                    readout_length_ns: Some(q.readout_length * 1e9),
                })
                .collect(),
            gates: s
                .gates
                .iter()
                .map(|g| GateRecord {
                    kind: g.kind,
                    qubits: g.qubits.clone(),
                    error: g.error_rate,
                    duration_ns: Some(g.duration * 1e9),
                })
                .collect(),
        }
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn nonzero(ops: Vec<CMatrix>) -> Vec<CMatrix> {
    let kept: Vec<CMatrix> = ops.into_iter().filter(|k| k.frobenius_norm() > 0.0).collect();
    kept
}

/// Amplitude damping with decay probability `gamma`.
pub fn amplitude_damping_channel(gamma: f64) -> Result<KrausChannel> {
    check_probability("gamma", gamma)?;
    let k0 = CMatrix::from_rows([[ONE, ZERO], [ZERO, real((1.0 - gamma).sqrt())]]);
    let k1 = CMatrix::from_rows([[ZERO, real(gamma.sqrt())], [ZERO, ZERO]]);
    KrausChannel::new(nonzero(vec![k0, k1]))
}

/// Phase damping that scales coherences by `1 − p`: `{√(1−p/2)·I, √(p/2)·Z}`.
pub fn dephasing_channel(p: f64) -> Result<KrausChannel> {
    check_probability("dephasing", p)?;
    let k0 = CMatrix::identity(2).scale(real((1.0 - p / 2.0).sqrt()));
    let k1 = gates::z().matrix().scale(real((p / 2.0).sqrt()));
    KrausChannel::new(nonzero(vec![k0, k1]))
}

/// Zero-temperature relaxation for `duration` seconds: populations decay with
/// T1 and coherences with T2.
pub fn thermal_relaxation_channel(t1: f64, t2: f64, duration: f64) -> Result<KrausChannel> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::Snapshot(format!("T1 = {t1}, T2 = {t2} must be positive")));
    }
    if duration.is_nan() || duration < 0.0 {
        return Err(Error::InvalidConfig(format!("duration {duration} must be >= 0")));
    }
    if t2 > 2.0 * t1 {
        return Err(Error::UnphysicalCoherence {
            qubit: None,
            t2,
            two_t1: 2.0 * t1,
        });
    }
    let p_amp = 1.0 - (-duration / t1).exp();
    let pure_dephasing_rate = (1.0 / t2 - 1.0 / (2.0 * t1)).max(0.0);
    let p_phase = 1.0 - (-duration * pure_dephasing_rate).exp();
    dephasing_channel(p_phase)?.after(&amplitude_damping_channel(p_amp)?)
}

/// Depolarizing strength λ for a reported gate error, using average gate
/// fidelity `F̄ = 1 − λ(d−1)/d`.
pub fn depolarizing_lambda(error_rate: f64, num_qubits: usize) -> f64 {
    let d = (1usize << num_qubits) as f64;
    error_rate * d / (d - 1.0)
}

fn pauli_strings(num_qubits: usize) -> Vec<CMatrix> {
    let singles = [CMatrix::identity(2), gates::x().matrix().clone(), gates::y().matrix().clone(), gates::z().matrix().clone()];
    let mut out = vec![CMatrix::identity(1)];
    for _ in 0..num_qubits {
        out = out
            .iter()
            .flat_map(|p| singles.iter().map(move |s| p.kron(s)))
            .collect();
    }
    out
}

/// `ρ → (1−λ)ρ + λ·I/d` on one or two qubits.
pub fn depolarizing_channel(error_rate: f64, num_qubits: usize) -> Result<KrausChannel> {
    if !(1..=2).contains(&num_qubits) {
        return Err(Error::InvalidConfig(format!(
            "depolarizing channel supports 1 or 2 qubits, got {num_qubits}"
        )));
    }
    check_probability("error_rate", error_rate)?;
    let lambda = depolarizing_lambda(error_rate, num_qubits);
    let d2 = (1usize << (2 * num_qubits)) as f64;
    let lambda_max = d2 / (d2 - 1.0);
    if lambda > lambda_max + 1e-12 {
        return Err(Error::InvalidProbability {
            name: "depolarizing error_rate",
            value: error_rate,
        });
    }
    let lambda = lambda.min(lambda_max);
    if lambda == 0.0 {
        return Ok(KrausChannel::identity(num_qubits));
    }
    let paulis = pauli_strings(num_qubits);
    let id_weight = (1.0 - lambda * (d2 - 1.0) / d2).max(0.0).sqrt();
    let other_weight = (lambda / d2).sqrt();
    let ops = paulis
        .iter()
        .enumerate()
        .map(|(i, p)| p.scale(real(if i == 0 { id_weight } else { other_weight })))
        .collect();
    KrausChannel::new(nonzero(ops))
}

/// Column-stochastic `M[measured][prepared]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfusionMatrix(pub [[f64; 2]; 2]);

impl ConfusionMatrix {
    pub const IDENTITY: ConfusionMatrix = ConfusionMatrix([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(p0_given_1: f64, p1_given_0: f64) -> Result<Self> {
        check_probability("P(0|1)", p0_given_1)?;
        check_probability("P(1|0)", p1_given_0)?;
        Ok(Self([[1.0 - p1_given_0, p0_given_1], [p1_given_0, 1.0 - p0_given_1]]))
    }

    pub fn symmetric(flip: f64) -> Result<Self> {
        Self::new(flip, flip)
    }

    /// Mean assignment error `(P(0|1) + P(1|0)) / 2`.
    pub fn symmetrized_error(&self) -> f64 {
        (self.0[0][1] + self.0[1][0]) / 2.0
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

pub fn readout_confusion(q: &QubitCalibration) -> Result<ConfusionMatrix> {
    ConfusionMatrix::new(q.prob_meas0_prep1, q.prob_meas1_prep0)
}

/// Pushes a distribution over `qubits.len()` measured bits (first bit
/// high-order) through the per-qubit confusion matrices.
pub fn apply_readout(probs: &[f64], confusion: &[ConfusionMatrix]) -> Vec<f64> {
    let width = confusion.len();
    debug_assert_eq!(probs.len(), 1 << width);
    let mut p = probs.to_vec();
    for (pos, m) in confusion.iter().enumerate() {
        if m.is_identity() {
            continue;
        }
        let mask = 1usize << (width - 1 - pos);
        for i in 0..p.len() {
            if i & mask == 0 {
                let (a, b) = (p[i], p[i | mask]);
                p[i] = m.0[0][0] * a + m.0[0][1] * b;
                p[i | mask] = m.0[1][0] * a + m.0[1][1] * b;
            }
        }
    }
    p
}

/// A channel applied to specific register qubits after a gate.
#[derive(Clone, Debug)]
pub struct AppliedChannel {
    pub channel: KrausChannel,
    pub qubits: Vec<usize>,
}

#[derive(Clone, Debug, Hash, PartialEq, Eq)]
struct GateSite {
    tag: GateTag,
    qubits: Vec<usize>,
}

#[derive(Clone, Debug)]
struct SiteNoise {
    depolarizing: Option<AppliedChannel>,
    relaxation: Vec<AppliedChannel>,
    duration: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NoiseOptions {
    /// Qubits not touched by a gate also relax for its duration.
    pub idle_decay: bool,
}

/// Per-gate channel assignments plus readout confusion.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    num_qubits: usize,
    sites: HashMap<GateSite, SiteNoise>,
    readout: Vec<ConfusionMatrix>,
    coherence: Option<Vec<(f64, f64)>>,
    options: NoiseOptions,
    /// Unknown gate sites are errors (calibrated models) or noiseless (hand-built ones).
    strict: bool,
}

impl NoiseModel {
    pub fn noiseless(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            sites: HashMap::new(),
            readout: vec![ConfusionMatrix::IDENTITY; num_qubits],
            coherence: None,
            options: NoiseOptions::default(),
            strict: false,
        }
    }

    /// Assigns the channels returned by `noise` to every gate kind on every
    /// qubit (1q kinds) and ordered qubit pair (2q kinds).
    pub fn from_fn<F>(num_qubits: usize, mut noise: F) -> Result<Self>
    where
        F: FnMut(GateTag, &[usize]) -> Result<Vec<AppliedChannel>>,
    {
        let mut model = Self::noiseless(num_qubits);
        for site in all_sites(num_qubits) {
            let channels = noise(site.tag, &site.qubits)?;
            for ch in &channels {
                validate_channel_targets(num_qubits, ch)?;
            }
            model.sites.insert(
                site,
                SiteNoise {
                    depolarizing: None,
                    relaxation: channels,
                    duration: 0.0,
                },
            );
        }
        Ok(model)
    }

    /// Uniform depolarizing noise on every gate.
    pub fn depolarizing(num_qubits: usize, error_1q: f64, error_2q: f64) -> Result<Self> {
        let ch1 = depolarizing_channel(error_1q, 1)?;
        let ch2 = depolarizing_channel(error_2q, 2)?;
        Self::from_fn(num_qubits, |tag, qubits| {
            let channel = if tag.arity() == 2 { ch2.clone() } else { ch1.clone() };
            Ok(vec![AppliedChannel {
                channel,
                qubits: qubits.to_vec(),
            }])
        })
    }

    pub fn with_readout(mut self, readout: Vec<ConfusionMatrix>) -> Result<Self> {
        if readout.len() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                actual: readout.len(),
            });
        }
        self.readout = readout;
        Ok(self)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn options(&self) -> NoiseOptions {
        self.options
    }

    pub fn readout(&self) -> &[ConfusionMatrix] {
        &self.readout
    }

    /// Confusion matrices of `qubits`, in order.
    pub fn readout_for(&self, qubits: &[usize]) -> Result<Vec<ConfusionMatrix>> {
        qubits
            .iter()
            .map(|&q| self.readout.get(q).copied().ok_or(Error::MissingQubit(q)))
            .collect()
    }

    /// Channels to apply after `gate`, in application order.
    pub fn channels_for(&self, gate: &Gate) -> Result<Vec<AppliedChannel>> {
        let Some(tag) = GateTag::of(gate.kind()) else {
            return Ok(Vec::new());
        };
        if let Some(&q) = gate.targets().iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::MissingQubit(q));
        }
        let site = GateSite {
            tag,
            qubits: gate.targets().to_vec(),
        };
        let Some(noise) = self.sites.get(&site) else {
            if self.strict {
                return Err(Error::MissingCalibration {
                    gate: tag.name().to_string(),
                    qubits: gate.targets().to_vec(),
                });
            }
            return Ok(Vec::new());
        };
        let mut out: Vec<AppliedChannel> = noise.depolarizing.iter().cloned().collect();
        let duration = gate.duration().unwrap_or(noise.duration);
        match (&self.coherence, gate.duration()) {
            (Some(coh), Some(d)) if d != noise.duration => {
                for &q in gate.targets() {
                    out.push(self.relaxation_for(coh, q, d)?);
                }
            }
            _ => out.extend(noise.relaxation.iter().cloned()),
        }
        if self.options.idle_decay && duration > 0.0 {
            if let Some(coh) = &self.coherence {
                for q in (0..self.num_qubits).filter(|q| !gate.targets().contains(q)) {
                    out.push(self.relaxation_for(coh, q, duration)?);
                }
            }
        }
        Ok(out)
    }

    fn relaxation_for(&self, coh: &[(f64, f64)], qubit: usize, duration: f64) -> Result<AppliedChannel> {
        let (t1, t2) = coh[qubit];
        Ok(AppliedChannel {
            channel: thermal_relaxation_channel(t1, t2, duration)?,
            qubits: vec![qubit],
        })
    }

    /// Fails with the first gate the model has no calibration for.
    pub fn check_covers(&self, circuit: &Circuit) -> Result<()> {
        if circuit.num_qubits() > self.num_qubits {
            return Err(Error::MissingQubit(self.num_qubits));
        }
        for g in circuit.gates() {
            self.channels_for(g)?;
        }
        Ok(())
    }
}

fn validate_channel_targets(num_qubits: usize, ch: &AppliedChannel) -> Result<()> {
    if ch.channel.num_qubits() != ch.qubits.len() {
        return Err(Error::DimensionMismatch {
            expected: ch.qubits.len(),
            actual: ch.channel.num_qubits(),
        });
    }
    if let Some(&q) = ch.qubits.iter().find(|&&q| q >= num_qubits) {
        return Err(Error::QubitOutOfRange { qubit: q, num_qubits });
    }
    Ok(())
}

fn all_sites(num_qubits: usize) -> impl Iterator<Item = GateSite> {
    GateTag::ALL.into_iter().flat_map(move |tag| {
        let sites: Vec<GateSite> = if tag.arity() == 1 {
            (0..num_qubits).map(|q| GateSite { tag, qubits: vec![q] }).collect()
        } else {
            (0..num_qubits)
                .flat_map(|a| (0..num_qubits).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| GateSite {
                    tag,
                    qubits: vec![a, b],
                })
                .collect()
        };
        sites
    })
}

/// Noise model for a calibration snapshot. Gate sites the snapshot cannot
/// resolve are left out and reported when a circuit uses them.
pub fn build_noise_model(snap: &CalibrationSnapshot, options: NoiseOptions) -> Result<NoiseModel> {
    snap.validate()?;
    let n = snap.num_qubits();
    let coherence: Vec<(f64, f64)> = snap.qubits.iter().map(|q| (q.t1, q.t2)).collect();
    let mut channel_cache: HashMap<(usize, u64), KrausChannel> = HashMap::new();
    let mut depol_cache: HashMap<(usize, u64), KrausChannel> = HashMap::new();
    let mut sites = HashMap::new();
    for site in all_sites(n) {
        let Some(cal) = snap.lookup(site.tag, &site.qubits) else {
            continue;
        };
        let arity = site.qubits.len();
        let depolarizing = if cal.error_rate > 0.0 {
            let key = (arity, cal.error_rate.to_bits());
            let ch = match depol_cache.get(&key) {
                Some(ch) => ch.clone(),
                None => {
                    let ch = depolarizing_channel(cal.error_rate, arity)?;
                    depol_cache.insert(key, ch.clone());
                    ch
                }
            };
            Some(AppliedChannel {
                channel: ch,
                qubits: site.qubits.clone(),
            })
        } else {
            None
        };
        let mut relaxation = Vec::new();
        if cal.duration > 0.0 {
            for &q in &site.qubits {
                let key = (q, cal.duration.to_bits());
                let ch = match channel_cache.get(&key) {
                    Some(ch) => ch.clone(),
                    None => {
                        let (t1, t2) = coherence[q];
                        let ch = thermal_relaxation_channel(t1, t2, cal.duration).map_err(|e| match e {
                            Error::UnphysicalCoherence { t2, two_t1, .. } => Error::UnphysicalCoherence {
                                qubit: Some(q),
                                t2,
                                two_t1,
                            },
                            other => other,
                        })?;
                        channel_cache.insert(key, ch.clone());
                        ch
                    }
                };
                relaxation.push(AppliedChannel {
                    channel: ch,
                    qubits: vec![q],
                });
            }
        }
        sites.insert(
            site,
            SiteNoise {
                depolarizing,
                relaxation,
                duration: cal.duration,
            },
        );
    }
    let readout = snap
        .qubits
        .iter()
        .map(readout_confusion)
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseModel {
        num_qubits: n,
        sites,
        readout,
        coherence: Some(coherence),
        options,
        strict: true,
    })
}
