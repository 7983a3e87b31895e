//! Gate set, circuit IR and Bernstein-Vazirani circuit construction.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quantum::{gates, CMatrix, Unitary, I, ONE, ZERO};

/// Largest data register for which a full oracle unitary is built.
pub const MAX_ORACLE_QUBITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateKind {
    H,
    X,
    S,
    Sdg,
    SX,
    SXdg,
    RZ(f64),
    Id,
    CNOT,
    ECR,
    Measure,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::CNOT | GateKind::ECR => 2,
            _ => 1,
        }
    }

    /// Upper-case mnemonic used in circuit JSON.
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::S => "S",
            GateKind::Sdg => "SDG",
            GateKind::SX => "SX",
            GateKind::SXdg => "SXDG",
            GateKind::RZ(_) => "RZ",
            GateKind::Id => "ID",
            GateKind::CNOT => "CNOT",
            GateKind::ECR => "ECR",
            GateKind::Measure => "MEASURE",
        }
    }

    /// Parses a mnemonic case-insensitively; `CX` is accepted for CNOT.
    pub fn parse(name: &str, theta: Option<f64>) -> Result<Self> {
        let kind = match name.to_ascii_uppercase().as_str() {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "S" => GateKind::S,
            "SDG" => GateKind::Sdg,
            "SX" => GateKind::SX,
            "SXDG" => GateKind::SXdg,
            "RZ" => GateKind::RZ(
                theta.ok_or_else(|| Error::InvalidGate("RZ requires an angle".into()))?,
            ),
            "ID" => GateKind::Id,
            "CNOT" | "CX" => GateKind::CNOT,
            "ECR" => GateKind::ECR,
            "MEASURE" => GateKind::Measure,
            other => return Err(Error::InvalidGate(format!("unknown gate kind {other:?}"))),
        };
        Ok(kind)
    }

    /// Gate matrix with `targets[0]` as the high-order local bit; `None` for measurement.
    pub fn unitary(&self) -> Option<Unitary> {
        Some(match *self {
            GateKind::H => gates::h(),
            GateKind::X => gates::x(),
            GateKind::S => gates::s(),
            GateKind::Sdg => gates::sdg(),
            GateKind::SX => gates::sx(),
            GateKind::SXdg => gates::sxdg(),
            GateKind::RZ(theta) => gates::rz(theta),
            GateKind::Id => gates::id(),
            GateKind::CNOT => gates::cnot(),
            GateKind::ECR => ecr_register_order(),
            GateKind::Measure => return None,
        })
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::RZ(theta) => write!(f, "RZ({theta})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GateRepr", into = "GateRepr")]
pub struct Gate {
    kind: GateKind,
    targets: Vec<usize>,
    /// Seconds; `None` means "use the calibrated duration".
    duration: Option<f64>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: &[usize]) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::InvalidGate(format!(
                "{kind} takes {} target(s), got {}",
                kind.arity(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::DuplicateTarget(targets[0]));
        }
        if let GateKind::RZ(theta) = kind {
            if !theta.is_finite() {
                return Err(Error::InvalidGate("RZ angle must be finite".into()));
            }
        }
        Ok(Self {
            kind,
            targets: targets.to_vec(),
            duration: None,
        })
    }

    pub fn with_duration(mut self, seconds: f64) -> Result<Self> {
        if !(seconds >= 0.0 && seconds.is_finite()) {
            return Err(Error::InvalidGate(format!("duration {seconds} must be >= 0")));
        }
        self.duration = Some(seconds);
        Ok(self)
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn duration(&self) -> Option<f64> {
        self.duration
    }

    pub fn is_measurement(&self) -> bool {
        self.kind == GateKind::Measure
    }
}

#[derive(Serialize, Deserialize)]
struct GateRepr {
    kind: String,
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_s: Option<f64>,
}

impl TryFrom<GateRepr> for Gate {
    type Error = Error;

    fn try_from(r: GateRepr) -> Result<Self> {
        let gate = Gate::new(GateKind::parse(&r.kind, r.theta)?, &r.targets)?;
        match r.duration_s {
            Some(d) => gate.with_duration(d),
            None => Ok(gate),
        }
    }
}

impl From<Gate> for GateRepr {
    fn from(g: Gate) -> Self {
        let theta = match g.kind {
            GateKind::RZ(t) => Some(t),
            _ => None,
        };
        GateRepr {
            kind: g.kind.name().to_string(),
            targets: g.targets,
            theta,
            duration_s: g.duration,
        }
    }
}

/// Ordered gate list on `n` data qubits plus an optional ancilla (qubit `n`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRepr", into = "CircuitRepr")]
pub struct Circuit {
    num_data_qubits: usize,
    has_ancilla: bool,
    gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct CircuitRepr {
    n: usize,
    ancilla: bool,
    gates: Vec<Gate>,
}

impl TryFrom<CircuitRepr> for Circuit {
    type Error = Error;

    fn try_from(r: CircuitRepr) -> Result<Self> {
        let mut c = Circuit::new(r.n, r.ancilla)?;
        for g in r.gates {
            c.push(g)?;
        }
        Ok(c)
    }
}

impl From<Circuit> for CircuitRepr {
    fn from(c: Circuit) -> Self {
        CircuitRepr {
            n: c.num_data_qubits,
            ancilla: c.has_ancilla,
            gates: c.gates,
        }
    }
}

impl Circuit {
    pub fn new(num_data_qubits: usize, has_ancilla: bool) -> Result<Self> {
        if num_data_qubits == 0 {
            return Err(Error::InvalidCircuit("at least one data qubit required".into()));
        }
        Ok(Self {
            num_data_qubits,
            has_ancilla,
            gates: Vec::new(),
        })
    }

    pub fn num_data_qubits(&self) -> usize {
        self.num_data_qubits
    }

    pub fn has_ancilla(&self) -> bool {
        self.has_ancilla
    }

    pub fn num_qubits(&self) -> usize {
        self.num_data_qubits + usize::from(self.has_ancilla)
    }

    pub fn ancilla(&self) -> Option<usize> {
        self.has_ancilla.then_some(self.num_data_qubits)
    }

    pub fn data_qubits(&self) -> Vec<usize> {
        (0..self.num_data_qubits).collect()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        for &t in gate.targets() {
            if t >= self.num_qubits() {
                return Err(Error::QubitOutOfRange {
                    qubit: t,
                    num_qubits: self.num_qubits(),
                });
            }
        }
        let measured_already = self.gates.iter().any(Gate::is_measurement);
        if measured_already && !gate.is_measurement() {
            return Err(Error::InvalidCircuit(format!(
                "{} after measurement; measurements must be terminal",
                gate.kind()
            )));
        }
        if gate.is_measurement() && self.measured_qubits_explicit().contains(&gate.targets()[0]) {
            return Err(Error::InvalidCircuit(format!(
                "qubit {} measured twice",
                gate.targets()[0]
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn add(&mut self, kind: GateKind, targets: &[usize]) -> Result<&mut Self> {
        self.push(Gate::new(kind, targets)?)?;
        Ok(self)
    }

    fn measured_qubits_explicit(&self) -> Vec<usize> {
        self.gates
            .iter()
            .filter(|g| g.is_measurement())
            .map(|g| g.targets()[0])
            .collect()
    }

    /// Qubits read out at the end, ascending; every qubit when no measurement is present.
    pub fn measured_qubits(&self) -> Vec<usize> {
        let mut q = self.measured_qubits_explicit();
        if q.is_empty() {
            return (0..self.num_qubits()).collect();
        }
        q.sort_unstable();
        q
    }

    pub fn unitary_gates(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| !g.is_measurement())
    }

    pub fn without_measurements(&self) -> Circuit {
        Circuit {
            num_data_qubits: self.num_data_qubits,
            has_ancilla: self.has_ancilla,
            gates: self.unitary_gates().cloned().collect(),
        }
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind().arity() == 2).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Full unitary of the non-measurement gates (verification only).
    pub fn unitary(&self) -> Result<Unitary> {
        let m = self.num_qubits();
        if m > MAX_ORACLE_QUBITS + 1 {
            return Err(Error::RegisterTooLarge {
                qubits: m,
                limit: MAX_ORACLE_QUBITS + 1,
            });
        }
        let mut u = CMatrix::identity(1 << m);
        for g in self.unitary_gates() {
            let gu = g.kind().unitary().expect("non-measurement gate");
            crate::quantum::left_multiply(&mut u, m, &gu, g.targets());
        }
        Ok(Unitary::new_unchecked(u))
    }
}

/// Hidden bitstring `s = s₀s₁…s_{n−1}`; `s₀` is qubit 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SecretString(String);

impl SecretString {
    pub fn new(bits: &str) -> Result<Self> {
        if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::InvalidSecret(bits.to_string()));
        }
        Ok(Self(bits.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0.as_bytes()[i] == b'1'
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.bytes().enumerate().filter(|(_, b)| *b == b'1').map(|(i, _)| i)
    }

    pub fn hamming_weight(&self) -> usize {
        self.ones().count()
    }

    pub fn density(&self) -> f64 {
        self.hamming_weight() as f64 / self.len() as f64
    }

    /// Basis index of `|s⟩` on an `n`-qubit register.
    pub fn index(&self) -> usize {
        crate::quantum::bitstring_to_index(&self.0).expect("validated bitstring")
    }
}

impl fmt::Display for SecretString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SecretString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        SecretString::new(&s)
    }
}

impl From<SecretString> for String {
    fn from(s: SecretString) -> Self {
        s.0
    }
}

impl std::str::FromStr for SecretString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SecretString::new(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleStyle {
    /// One CNOT per set bit, control = data qubit, target = ancilla.
    #[default]
    Cnot,
    /// Each CNOT rewritten as S†(c) · √X†(t) · ECR(c,t) · X(c).
    Ecr,
}

impl std::str::FromStr for OracleStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnot" | "cx" => Ok(OracleStyle::Cnot),
            "ecr" => Ok(OracleStyle::Ecr),
            other => Err(Error::InvalidConfig(format!("unknown oracle style {other:?}"))),
        }
    }
}

/// Global phase picked up by each CNOT when realised with the ECR rewrite:
/// `CNOT = e^{iπ/4} · X(c) · ECR · (S† ⊗ √X†)`.
pub const ECR_CNOT_PHASE: f64 = std::f64::consts::FRAC_PI_4;

fn push_oracle(c: &mut Circuit, s: &SecretString, style: OracleStyle, ancilla: usize) -> Result<()> {
    for i in s.ones() {
        match style {
            OracleStyle::Cnot => {
                c.add(GateKind::CNOT, &[i, ancilla])?;
            }
            OracleStyle::Ecr => {
                c.add(GateKind::Sdg, &[i])?
                    .add(GateKind::SXdg, &[ancilla])?
                    .add(GateKind::ECR, &[i, ancilla])?
                    .add(GateKind::X, &[i])?;
            }
        }
    }
    Ok(())
}

/// Oracle gates only, on `n` data qubits plus ancilla.
pub fn oracle_circuit(s: &SecretString, style: OracleStyle) -> Result<Circuit> {
    let n = s.len();
    let mut c = Circuit::new(n, true)?;
    push_oracle(&mut c, s, style, n)?;
    Ok(c)
}

/// X(ancilla), H on every qubit, oracle, H on the data register, measure data.
pub fn build_bv_circuit(s: &SecretString, style: OracleStyle) -> Result<Circuit> {
    let n = s.len();
    let ancilla = n;
    let mut c = Circuit::new(n, true)?;
    c.add(GateKind::X, &[ancilla])?;
    for q in 0..=n {
        c.add(GateKind::H, &[q])?;
    }
    push_oracle(&mut c, s, style, ancilla)?;
    for q in 0..n {
        c.add(GateKind::H, &[q])?;
    }
    for q in 0..n {
        c.add(GateKind::Measure, &[q])?;
    }
    Ok(c)
}

/// Permutation unitary `|x⟩|y⟩ → |x⟩|y ⊕ s·x⟩` on `n + 1` qubits, ancilla last.
pub fn oracle_unitary(s: &SecretString) -> Result<Unitary> {
    let n = s.len();
    if n > MAX_ORACLE_QUBITS {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            limit: MAX_ORACLE_QUBITS,
        });
    }
    let s_mask = s.index();
    let dim = 1usize << (n + 1);
    let mut u = CMatrix::zeros(dim);
    for input in 0..dim {
        let (x, y) = (input >> 1, input & 1);
        let f = ((x & s_mask).count_ones() & 1) as usize;
        let output = (x << 1) | (y ^ f);
        u[(output, input)] = ONE;
    }
    Ok(Unitary::new_unchecked(u))
}

/// Echoed cross-resonance gate, `(IX − XY)/√2`, exactly as conventionally
/// printed: the basis index is `2·b + a` for operands `(a, b)`, i.e. the first
/// operand is the low-order bit.
pub fn ecr_matrix() -> Unitary {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let i = I * FRAC_1_SQRT_2;
    Unitary::new_unchecked(CMatrix::from_rows([
        [ZERO, r, ZERO, i],
        [r, ZERO, -i, ZERO],
        [ZERO, i, ZERO, r],
        [-i, ZERO, r, ZERO],
    ]))
}

/// The same gate in this crate's ordering (first operand high-order).
fn ecr_register_order() -> Unitary {
    let swap = gates::swap();
    swap.compose(&ecr_matrix()).compose(&swap)
}
