//! Circuit generation for the reference and interleaved protocols of each
//! twirling group, plus XRB purity sequences.
//!
//! Every circuit is a pure function of `(spec, depth, label, index)`: its
//! random gates come from a counter-based stream keyed by those values.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channels::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::groups::{
    self, clifford2_index, hadamard, kak_decompose, phase_s, sample_clifford1, sample_clifford2, sample_haar_su4,
    sample_pauli_layer, Decomposition, Tableau, TwirlGroupKind, C1,
};
use crate::noise::GateRole;
use crate::pauli::{CMat, Pauli, PauliString, PhasedPauli};
use crate::rng::{stream, Domain, Stream};

/// Number of Pauli input states for the Pauli protocol.
pub const PAULI_STATES: usize = 15;

/// Where a two-qubit gate came from, which fixes how it compiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoQubitSource {
    /// Class-form Clifford index.
    Clifford(usize),
    /// Arbitrary unitary, compiled with KAK.
    Haar,
    /// Native gate, errored once as a whole.
    Native,
}

#[derive(Debug, Clone)]
pub enum GateBody {
    /// Single-qubit gates on qubits 0 and 1.
    Local([CMat; 2]),
    TwoQubit { unitary: UnitaryMatrix, source: TwoQubitSource },
}

#[derive(Debug, Clone)]
pub struct Gate {
    pub role: GateRole,
    pub body: GateBody,
}

impl Gate {
    pub fn local(role: GateRole, a: CMat, b: CMat) -> Self {
        Gate { role, body: GateBody::Local([a, b]) }
    }

    pub fn two_qubit(role: GateRole, unitary: UnitaryMatrix, source: TwoQubitSource) -> Self {
        Gate { role, body: GateBody::TwoQubit { unitary, source } }
    }

    pub fn ideal(&self) -> CMat {
        match &self.body {
            GateBody::Local([a, b]) => a.kronecker(b),
            GateBody::TwoQubit { unitary, .. } => unitary.matrix().clone(),
        }
    }

    /// CNOT circuit used under compiled placement; `None` for native gates.
    pub fn decomposition(&self) -> Option<Result<Decomposition>> {
        match &self.body {
            GateBody::TwoQubit { source: TwoQubitSource::Clifford(i), .. } => {
                Some(Ok(groups::clifford2_class_circuit(*i)))
            }
            GateBody::TwoQubit { source: TwoQubitSource::Haar, unitary } => Some(kak_decompose(unitary)),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        let mat = |m: &CMat| -> Value {
            let rows: Vec<Vec<[f64; 2]>> =
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
            json!(rows)
        };
        let role = serde_json::to_value(self.role).expect("serializable");
        match &self.body {
            GateBody::Local([a, b]) => json!({"role": role, "kind": "local", "qubit0": mat(a), "qubit1": mat(b)}),
            GateBody::TwoQubit { unitary, source } => {
                let (kind, index) = match source {
                    TwoQubitSource::Clifford(i) => ("clifford", Some(*i)),
                    TwoQubitSource::Haar => ("haar", None),
                    TwoQubitSource::Native => ("native", None),
                };
                let mut v = json!({"role": role, "kind": kind, "matrix": mat(unitary.matrix())});
                if let Some(i) = index {
                    let t = Tableau::from_unitary(unitary.matrix()).expect("Clifford");
                    let sym: Vec<Vec<u8>> =
                        (0..4).map(|r| (0..4).map(|c| t.symplectic_matrix()[(r, c)]).collect()).collect();
                    v["clifford_index"] = json!(i);
                    v["tableau"] = json!({"symplectic": sym, "phases": t.phase_bits()});
                }
                v
            }
        }
    }
}

/// Final readout of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    /// Probability of returning to `|00⟩`.
    Survival,
    /// Probability of `|0⟩` on each qubit separately.
    PerQubitSurvival,
    /// Parity on the support of `observable` (already rotated to Z), times `sign`.
    Pauli { observable: PauliString, sign: i8 },
    /// Expectations of all 15 non-identity Paulis.
    Tomography,
}

#[derive(Debug, Clone)]
pub struct CircuitInstance {
    pub group: TwirlGroupKind,
    pub interleaved: bool,
    pub depth: usize,
    pub index: usize,
    /// Input Pauli for the Pauli protocol.
    pub input: Option<PauliString>,
    /// All gates in application order, including preparation and closure.
    pub gates: Vec<Gate>,
    pub measurement: Measurement,
    /// Noiseless value of the recorded quantity.
    pub ideal_outcome: f64,
}

impl CircuitInstance {
    pub fn to_json(&self, seed: u64) -> Value {
        let measurement = match &self.measurement {
            Measurement::Survival => json!({"kind": "survival"}),
            Measurement::PerQubitSurvival => json!({"kind": "per_qubit_survival"}),
            Measurement::Pauli { observable, sign } => {
                json!({"kind": "pauli", "observable": observable.to_string(), "sign": sign})
            }
            Measurement::Tomography => json!({"kind": "tomography"}),
        };
        json!({
            "group": self.group.name(),
            "interleaved": self.interleaved,
            "seed": seed,
            "depth": self.depth,
            "index": self.index,
            "input": self.input.as_ref().map(|p| p.to_string()),
            "gates": self.gates.iter().map(Gate::to_json).collect::<Vec<_>>(),
            "measurement": measurement,
            "ideal_outcome": self.ideal_outcome,
        })
    }

    /// Ideal unitary of the gates between preparation and readout layers.
    pub fn ideal_product(&self) -> CMat {
        self.gates.iter().fold(CMat::identity(4, 4), |acc, g| g.ideal() * acc)
    }
}

/// What to run: group, optional interleaved gate, depths, shot budget and seed.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub group: TwirlGroupKind,
    pub interleaved: Option<UnitaryMatrix>,
    pub depths: Vec<usize>,
    pub shots: usize,
    pub seed: u64,
}

impl ProtocolSpec {
    pub fn new(
        group: TwirlGroupKind,
        interleaved: Option<UnitaryMatrix>,
        depths: Vec<usize>,
        shots: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = ProtocolSpec { group, interleaved, depths, shots, seed };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with the default depth schedule for the group.
    pub fn with_defaults(group: TwirlGroupKind, interleaved: Option<UnitaryMatrix>, shots: usize, seed: u64) -> Result<Self> {
        let depths = default_depths(group, interleaved.is_some());
        ProtocolSpec::new(group, interleaved, depths, shots, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() {
            return Err(Error::InvalidInput("depth list is empty".into()));
        }
        if self.depths[0] < 1 || self.depths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("depths must be ≥ 1 and strictly increasing".into()));
        }
        if self.shots == 0 {
            return Err(Error::InvalidInput("shot count must be positive".into()));
        }
        if self.group == TwirlGroupKind::Pauli && self.shots % PAULI_STATES != 0 {
            return Err(Error::InvalidInput(format!(
                "Pauli protocol needs a shot count divisible by {PAULI_STATES}, got {}",
                self.shots
            )));
        }
        if let Some(g) = &self.interleaved {
            if g.dim() != 4 {
                return Err(Error::DimensionMismatch { expected: 4, found: g.dim() });
            }
            if self.group.requires_clifford_interleaved() && Tableau::from_unitary(g.matrix()).is_err() {
                return Err(Error::UnsupportedCombination(format!(
                    "the {} protocol tracks Clifford frames; the interleaved gate must be Clifford",
                    self.group
                )));
            }
        }
        Ok(())
    }

    pub fn is_interleaved(&self) -> bool {
        self.interleaved.is_some()
    }

    pub fn label(&self) -> String {
        format!("{}({})", self.group, if self.is_interleaved() { "G" } else { "I" })
    }

    /// Labels the decay data is grouped by.
    pub fn labels(&self) -> Vec<String> {
        match (self.group, self.is_interleaved()) {
            (TwirlGroupKind::LocalClifford, false) => vec!["q0".into(), "q1".into()],
            (TwirlGroupKind::Pauli, _) => PauliString::non_identity(2).iter().map(|p| p.to_string()).collect(),
            _ => vec!["00".into()],
        }
    }
}

pub fn default_depths(group: TwirlGroupKind, interleaved: bool) -> Vec<usize> {
    match (group, interleaved) {
        (TwirlGroupKind::Haar | TwirlGroupKind::Clifford2, _) => vec![4, 6, 8, 12, 14],
        (_, true) => vec![4, 8, 12, 16, 20],
        (_, false) => vec![4, 8, 12, 20, 30],
    }
}

/// Splits `total` over `n` slots, remainder to the first slots.
fn split_even(total: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| total / n + usize::from(i < total % n)).collect()
}

/// One block of identically configured circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub depth: usize,
    pub input: Option<PauliString>,
    pub count: usize,
}

/// `(depth, circuit count)` pairs, one circuit per shot.
pub fn schedule(spec: &ProtocolSpec) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = spec.depths.iter().map(|&m| (m, 0)).collect();
    for e in detailed_schedule(spec) {
        let slot = out.iter_mut().find(|(m, _)| *m == e.depth).expect("depth listed");
        slot.1 += e.count;
    }
    out
}

pub fn detailed_schedule(spec: &ProtocolSpec) -> Vec<ScheduleEntry> {
    let mut entries = Vec::new();
    if spec.group == TwirlGroupKind::Pauli {
        let per_state = spec.shots / PAULI_STATES;
        for p in PauliString::non_identity(2) {
            for (m, count) in spec.depths.iter().zip(split_even(per_state, spec.depths.len())) {
                entries.push(ScheduleEntry { depth: *m, input: Some(p.clone()), count });
            }
        }
    } else {
        for (m, count) in spec.depths.iter().zip(split_even(spec.shots, spec.depths.len())) {
            entries.push(ScheduleEntry { depth: *m, input: None, count });
        }
    }
    entries
}

/// Coordinates of every scheduled circuit: `(depth, input, global index)`.
pub fn circuit_coordinates(spec: &ProtocolSpec) -> Vec<(usize, Option<PauliString>, usize)> {
    let mut out = Vec::with_capacity(spec.shots);
    let mut index = 0;
    for e in detailed_schedule(spec) {
        for _ in 0..e.count {
            out.push((e.depth, e.input.clone(), index));
            index += 1;
        }
    }
    out
}

fn group_code(g: TwirlGroupKind) -> u64 {
    g as u64
}

pub fn circuit_stream(spec: &ProtocolSpec, depth: usize, index: usize) -> Stream {
    stream(
        spec.seed,
        Domain::Circuit,
        &[group_code(spec.group), u64::from(spec.is_interleaved()), depth as u64, index as u64],
    )
}

/// Builds the circuit at the given schedule coordinates.
pub fn build_circuit(spec: &ProtocolSpec, depth: usize, input: Option<&PauliString>, index: usize) -> Result<CircuitInstance> {
    let mut rng = circuit_stream(spec, depth, index);
    let mut circ = match spec.group {
        TwirlGroupKind::Haar => build_haar_circuit(spec, depth, &mut rng)?,
        TwirlGroupKind::Clifford2 => build_clifford_circuit(spec, depth, &mut rng)?,
        TwirlGroupKind::LocalClifford => build_local_clifford_circuit(spec, depth, &mut rng)?,
        TwirlGroupKind::Pauli => {
            let p = input.ok_or_else(|| Error::InvalidInput("Pauli circuits need an input Pauli".into()))?;
            build_pauli_circuit(spec, depth, p, &mut rng)?
        }
    };
    circ.index = index;
    Ok(circ)
}

fn interleaved_gate(spec: &ProtocolSpec) -> Option<Gate> {
    spec.interleaved
        .as_ref()
        .map(|g| Gate::two_qubit(GateRole::Interleaved, g.clone(), TwoQubitSource::Native))
}

fn check_depth(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::InvalidInput("depth must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn product(gates: &[Gate]) -> CMat {
    gates.iter().fold(CMat::identity(4, 4), |acc, g| g.ideal() * acc)
}

fn clifford_correction(gates: &[Gate], role: GateRole) -> Result<Gate> {
    let inv = product(gates).adjoint();
    let t = Tableau::from_unitary(&inv)?;
    let index = clifford2_index(&t);
    Ok(Gate::two_qubit(role, UnitaryMatrix::from_trusted(crate::linalg::canonical_phase(&inv)), TwoQubitSource::Clifford(index)))
}

fn finish(spec: &ProtocolSpec, m: usize, gates: Vec<Gate>, measurement: Measurement, input: Option<PauliString>) -> CircuitInstance {
    CircuitInstance {
        group: spec.group,
        interleaved: spec.is_interleaved(),
        depth: m,
        index: 0,
        input,
        gates,
        measurement,
        ideal_outcome: 1.0,
    }
}

pub fn build_haar_circuit<R: Rng + ?Sized>(spec: &ProtocolSpec, m: usize, rng: &mut R) -> Result<CircuitInstance> {
    check_depth(m)?;
    let mut gates = Vec::with_capacity(2 * m + 1);
    for _ in 0..m {
        gates.push(Gate::two_qubit(GateRole::Twirl, sample_haar_su4(rng), TwoQubitSource::Haar));
        gates.extend(interleaved_gate(spec));
    }
    let inv = UnitaryMatrix::from_trusted(product(&gates).adjoint());
    gates.push(Gate::two_qubit(GateRole::Correction, inv, TwoQubitSource::Haar));
    Ok(finish(spec, m, gates, Measurement::Survival, None))
}

pub fn build_clifford_circuit<R: Rng + ?Sized>(spec: &ProtocolSpec, m: usize, rng: &mut R) -> Result<CircuitInstance> {
    check_depth(m)?;
    let mut gates = Vec::with_capacity(2 * m + 1);
    for _ in 0..m {
        let el = sample_clifford2(rng);
        let index = el.index.expect("sampled in class form");
        gates.push(Gate::two_qubit(GateRole::Twirl, el.unitary, TwoQubitSource::Clifford(index)));
        gates.extend(interleaved_gate(spec));
    }
    let corr = clifford_correction(&gates, GateRole::Correction)?;
    gates.push(corr);
    Ok(finish(spec, m, gates, Measurement::Survival, None))
}

pub fn build_local_clifford_circuit<R: Rng + ?Sized>(spec: &ProtocolSpec, m: usize, rng: &mut R) -> Result<CircuitInstance> {
    check_depth(m)?;
    let mut gates = Vec::with_capacity(2 * m + 1);
    let mut per_qubit = [CMat::identity(2, 2), CMat::identity(2, 2)];
    for _ in 0..m {
        let (a, b) = (sample_clifford1(rng), sample_clifford1(rng));
        let (ua, ub) = (C1[a].unitary.matrix().clone(), C1[b].unitary.matrix().clone());
        per_qubit[0] = &ua * &per_qubit[0];
        per_qubit[1] = &ub * &per_qubit[1];
        gates.push(Gate::local(GateRole::Twirl, ua, ub));
        gates.extend(interleaved_gate(spec));
    }
    if spec.is_interleaved() {
        let corr = clifford_correction(&gates, GateRole::Correction)?;
        gates.push(corr);
        Ok(finish(spec, m, gates, Measurement::Survival, None))
    } else {
        let [a, b] = per_qubit;
        gates.push(Gate::local(GateRole::Correction, a.adjoint(), b.adjoint()));
        Ok(finish(spec, m, gates, Measurement::PerQubitSurvival, None))
    }
}

/// Local Clifford mapping `Z` to `p` by conjugation.
fn prep_clifford(p: Pauli) -> CMat {
    match p {
        Pauli::I | Pauli::Z => CMat::identity(2, 2),
        Pauli::X => hadamard(),
        Pauli::Y => phase_s() * hadamard(),
    }
}

/// Local Clifford mapping `p` to `Z` by conjugation.
fn measure_clifford(p: Pauli) -> CMat {
    prep_clifford(p).adjoint()
}

pub fn build_pauli_circuit<R: Rng + ?Sized>(
    spec: &ProtocolSpec,
    m: usize,
    input: &PauliString,
    rng: &mut R,
) -> Result<CircuitInstance> {
    check_depth(m)?;
    if input.num_qubits() != 2 || input.is_identity() {
        return Err(Error::InvalidInput(format!("input Pauli `{input}` must be a non-identity two-qubit Pauli")));
    }
    let mut body = Vec::with_capacity(2 * m);
    for _ in 0..m {
        let (a, b) = sample_pauli_layer(rng);
        body.push(Gate::local(GateRole::Twirl, a.matrix(), b.matrix()));
        body.extend(interleaved_gate(spec));
    }
    let t = Tableau::from_unitary(&product(&body))?;
    let image = t.conjugate(&PhasedPauli::from_string(input));
    let sign = image.sign().ok_or_else(|| Error::SimulationIntegrity("Pauli image is not Hermitian".into()))?;
    let out = image.string();
    let mut gates = Vec::with_capacity(body.len() + 2);
    gates.push(Gate::local(GateRole::Spam, prep_clifford(input.0[0]), prep_clifford(input.0[1])));
    gates.extend(body);
    gates.push(Gate::local(GateRole::Spam, measure_clifford(out.0[0]), measure_clifford(out.0[1])));
    Ok(finish(spec, m, gates, Measurement::Pauli { observable: out, sign }, Some(input.clone())))
}

/// `m` random Cliffords followed by Pauli tomography of the output.
pub fn build_xrb_circuit<R: Rng + ?Sized>(spec: &ProtocolSpec, m: usize, rng: &mut R) -> Result<CircuitInstance> {
    check_depth(m)?;
    if spec.group != TwirlGroupKind::Clifford2 || spec.is_interleaved() {
        return Err(Error::UnsupportedCombination("XRB sequences use the reference two-qubit Clifford group".into()));
    }
    let gates = (0..m)
        .map(|_| {
            let el = sample_clifford2(rng);
            let index = el.index.expect("class form");
            Gate::two_qubit(GateRole::Twirl, el.unitary, TwoQubitSource::Clifford(index))
        })
        .collect();
    Ok(finish(spec, m, gates, Measurement::Tomography, None))
}

/// XRB circuit at schedule coordinates, on a stream distinct from RB circuits.
pub fn build_xrb_at(spec: &ProtocolSpec, depth: usize, index: usize) -> Result<CircuitInstance> {
    let mut rng = stream(spec.seed, Domain::Circuit, &[99, depth as u64, index as u64]);
    let mut c = build_xrb_circuit(spec, depth, &mut rng)?;
    c.index = index;
    Ok(c)
}

/// Serializable summary of a spec for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecSummary {
    pub protocol: String,
    pub depths: Vec<usize>,
    pub shots: usize,
    pub seed: u64,
}

impl From<&ProtocolSpec> for SpecSummary {
    fn from(s: &ProtocolSpec) -> Self {
        SpecSummary { protocol: s.label(), depths: s.depths.clone(), shots: s.shots, seed: s.seed }
    }
}
