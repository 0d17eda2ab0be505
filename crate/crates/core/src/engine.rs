//! Noisy circuit simulation and shot sampling.
//!
//! Coherent noise keeps the two-qubit state pure, so the simulator carries a
//! state vector until the first non-unitary channel and switches to a density
//! matrix from then on. Each circuit gets one shot drawn from its exact outcome
//! distribution; the draw uses a stream keyed by the circuit coordinates, so
//! results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{DensityState, PauliTransferMatrix};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoisyOp};
use crate::pauli::{c, sparse_basis, CMat, PauliString, C64};
use crate::protocols::{
    build_circuit, build_xrb_at, circuit_coordinates, CircuitInstance, Gate, GateBody, Measurement, ProtocolSpec,
    TwoQubitSource,
};
use crate::rng::{stream, Domain};

const PROB_TOL: f64 = 1e-9;

/// One measured shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub depth: usize,
    pub circuit: usize,
    pub label: String,
    /// Tracked Pauli sign, `+1` for survival protocols.
    pub sign: i8,
    /// `0/1` survival or `±1` parity.
    pub outcome: i8,
    /// Exact expected value of `outcome·sign` (survival: probability).
    #[serde(skip)]
    pub probability: f64,
}

impl ShotRecord {
    /// Value entering the decay average.
    pub fn value(&self, exact: bool) -> f64 {
        if exact {
            self.probability
        } else {
            f64::from(self.outcome) * f64::from(self.sign)
        }
    }
}

/// Aggregated decay data at one depth for one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub depth: usize,
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Per-`(depth, label)` samples feeding fits and bootstrap resampling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observations {
    pub groups: BTreeMap<(String, usize), Vec<f64>>,
}

impl Observations {
    pub fn from_records(records: &[ShotRecord], exact: bool) -> Self {
        let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for r in records {
            groups.entry((r.label.clone(), r.depth)).or_default().push(r.value(exact));
        }
        Observations { groups }
    }

    pub fn points(&self) -> Vec<DecayPoint> {
        self.groups.iter().map(|((label, depth), vals)| summarize(*depth, label, vals)).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.groups.keys().map(|(l, _)| l.clone()).collect();
        out.dedup();
        out
    }
}

pub fn summarize(depth: usize, label: &str, vals: &[f64]) -> DecayPoint {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    DecayPoint { depth, label: label.to_string(), mean, stderr: (var / n.max(1) as f64).sqrt(), n }
}

/// Result of running one protocol.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub protocol: String,
    pub exact: bool,
    pub records: Vec<ShotRecord>,
    pub points: Vec<DecayPoint>,
}

impl ExperimentData {
    pub fn observations(&self) -> Observations {
        Observations::from_records(&self.records, self.exact)
    }

    pub fn write_shots_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_points_csv(&self, path: &Path) -> Result<()> {
        write_points_csv(&self.points, path)
    }
}

pub fn write_points_csv(points: &[DecayPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points<W: Write>(points: &[DecayPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

enum State {
    Pure(DVector<C64>),
    Mixed(CMat),
}

impl State {
    fn apply(&mut self, op: &NoisyOp) {
        match (&mut *self, op) {
            (State::Pure(psi), NoisyOp::Unitary(u)) => *psi = u * &*psi,
            (State::Mixed(rho), NoisyOp::Unitary(u)) => *rho = u * &*rho * u.adjoint(),
            (_, NoisyOp::Channel(ptm)) => {
                let rho = self.density();
                let st = DensityState::from_pauli_vector(4, &ptm.apply(&pauli_vector(&rho))).expect("d = 4");
                *self = State::Mixed(st.entries().clone());
            }
        }
    }

    fn density(&self) -> CMat {
        match self {
            State::Pure(psi) => psi * psi.adjoint(),
            State::Mixed(rho) => rho.clone(),
        }
    }

    fn diagonal(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            *o = match self {
                State::Pure(psi) => psi[k].norm_sqr(),
                State::Mixed(rho) => rho[(k, k)].re,
            };
        }
        out
    }
}

fn pauli_vector(rho: &CMat) -> Vec<f64> {
    sparse_basis(4).iter().map(|p| p.trace_with(rho).re / 2.0).collect()
}

/// Noisy operations, in application order, realizing one gate.
pub fn noisy_gate_ops(gate: &Gate, noise: &NoiseModel) -> Result<Vec<NoisyOp>> {
    match &gate.body {
        GateBody::Local([a, b]) => Ok(vec![noise.noisy_local(a, b)]),
        GateBody::TwoQubit { unitary, source } => {
            let dec = || gate.decomposition().expect("non-native gate");
            let compiled: Option<&dyn Fn() -> Result<crate::groups::Decomposition>> =
                if *source == TwoQubitSource::Native { None } else { Some(&dec) };
            noise.noisy_two_qubit(unitary.matrix(), gate.role, compiled)
        }
    }
}

/// Noisy operations realizing each gate of a circuit.
pub fn noisy_ops(circ: &CircuitInstance, noise: &NoiseModel) -> Result<Vec<NoisyOp>> {
    let mut ops = Vec::with_capacity(circ.gates.len() * 3);
    for gate in &circ.gates {
        ops.extend(noisy_gate_ops(gate, noise)?);
    }
    Ok(ops)
}

/// PTM of the noisy realization of one gate.
pub fn noisy_gate_ptm(gate: &Gate, noise: &NoiseModel) -> Result<PauliTransferMatrix> {
    let ops = noisy_gate_ops(gate, noise)?;
    let mut acc = PauliTransferMatrix::identity(4);
    for op in &ops {
        acc = op.to_ptm().after(&acc)?;
    }
    Ok(acc)
}

/// Final state reached by a circuit, before readout.
pub struct FinalState {
    state: State,
    readout_flip: f64,
}

impl FinalState {
    /// Bitstring distribution after readout flips, index `2·b₀ + b₁`.
    pub fn distribution(&self) -> Result<[f64; 4]> {
        let p = self.state.diagonal();
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-8 || p.iter().any(|x| *x < -PROB_TOL) {
            return Err(Error::SimulationIntegrity(format!(
                "final state is not a normalized state (trace {total:.12}, diagonal {p:?})"
            )));
        }
        let q = self.readout_flip;
        let mut out = [0.0; 4];
        for (y, o) in out.iter_mut().enumerate() {
            for (x, px) in p.iter().enumerate() {
                let flips = (x ^ y).count_ones() as i32;
                *o += px.max(0.0) * q.powi(flips) * (1.0 - q).powi(2 - flips);
            }
        }
        Ok(out)
    }

    /// `Tr(P ρ)` including readout attenuation.
    pub fn expectation(&self, p: &PauliString) -> f64 {
        let rho = self.state.density();
        let atten = (1.0 - 2.0 * self.readout_flip).powi(p.weight() as i32);
        sparse_basis(4)[p.index()].trace_with(&rho).re * atten
    }
}

pub fn propagate(circ: &CircuitInstance, noise: &NoiseModel) -> Result<FinalState> {
    let mut psi = DVector::from_element(4, c(0.0, 0.0));
    psi[0] = c(1.0, 0.0);
    let mut state = State::Pure(psi);
    for op in noisy_ops(circ, noise)? {
        state.apply(&op);
    }
    Ok(FinalState { state, readout_flip: noise.readout_flip })
}

fn parity(y: usize, support: &PauliString) -> f64 {
    let mut bits = 0;
    for (q, p) in support.0.iter().enumerate() {
        if *p != crate::pauli::Pauli::I {
            bits += (y >> (1 - q)) & 1;
        }
    }
    if bits % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Exact outcome values of a circuit, one per recorded label.
///
/// Survival: `[P(00)]`; per-qubit survival: `[P(q₀=0), P(q₁=0)]`; Pauli:
/// `[sign·⟨parity⟩]`; tomography: the 15 non-identity Pauli expectations.
pub fn simulate_circuit(circ: &CircuitInstance, noise: &NoiseModel) -> Result<Vec<f64>> {
    let fin = propagate(circ, noise)?;
    Ok(match &circ.measurement {
        Measurement::Survival => vec![fin.distribution()?[0]],
        Measurement::PerQubitSurvival => {
            let d = fin.distribution()?;
            vec![d[0] + d[1], d[0] + d[2]]
        }
        Measurement::Pauli { observable, sign } => {
            let d = fin.distribution()?;
            let e: f64 = (0..4).map(|y| d[y] * parity(y, observable)).sum();
            vec![e * f64::from(*sign)]
        }
        Measurement::Tomography => PauliString::non_identity(2).iter().map(|p| fin.expectation(p)).collect(),
    })
}

fn draw(dist: &[f64; 4], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    3
}

fn shot_records(spec: &ProtocolSpec, circ: &CircuitInstance, noise: &NoiseModel) -> Result<Vec<ShotRecord>> {
    let fin = propagate(circ, noise)?;
    let dist = fin.distribution()?;
    let mut rng = stream(
        spec.seed,
        Domain::Shot,
        &[spec.group as u64, u64::from(spec.is_interleaved()), circ.depth as u64, circ.index as u64],
    );
    let y = draw(&dist, rng.random::<f64>());
    let rec = |label: String, sign: i8, outcome: i8, probability: f64| ShotRecord {
        depth: circ.depth,
        circuit: circ.index,
        label,
        sign,
        outcome,
        probability,
    };
    Ok(match &circ.measurement {
        Measurement::Survival => vec![rec("00".into(), 1, i8::from(y == 0), dist[0])],
        Measurement::PerQubitSurvival => vec![
            rec("q0".into(), 1, i8::from(y >> 1 == 0), dist[0] + dist[1]),
            rec("q1".into(), 1, i8::from(y & 1 == 0), dist[0] + dist[2]),
        ],
        Measurement::Pauli { observable, sign } => {
            let e: f64 = (0..4).map(|k| dist[k] * parity(k, observable)).sum();
            let label = circ.input.as_ref().expect("Pauli input").to_string();
            vec![rec(label, *sign, parity(y, observable) as i8, e * f64::from(*sign))]
        }
        Measurement::Tomography => {
            return Err(Error::InvalidInput("tomography circuits are run through run_xrb".into()))
        }
    })
}

/// Execution settings for a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Use exact outcome probabilities instead of sampled shots.
    pub exact: bool,
}

/// Simulates every scheduled circuit with one shot each and aggregates decays.
pub fn run_experiment(spec: &ProtocolSpec, noise: &NoiseModel, opts: RunOptions) -> Result<ExperimentData> {
    spec.validate()?;
    let coords = circuit_coordinates(spec);
    let per_circuit: Vec<Result<Vec<ShotRecord>>> = coords
        .par_iter()
        .map(|(depth, input, index)| {
            let circ = build_circuit(spec, *depth, input.as_ref(), *index)?;
            shot_records(spec, &circ, noise)
        })
        .collect();
    let mut records = Vec::with_capacity(coords.len());
    for r in per_circuit {
        records.extend(r?);
    }
    let obs = Observations::from_records(&records, opts.exact);
    Ok(ExperimentData { protocol: spec.label(), exact: opts.exact, records, points: obs.points() })
}

/// Squared Bloch norm estimate of one XRB circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct PurityRecord {
    pub depth: usize,
    pub circuit: usize,
    /// `Σ⟨P⟩²/3` estimated without bias from finite shots.
    pub value: f64,
    pub exact: f64,
}

#[derive(Debug, Clone)]
pub struct XrbData {
    pub exact: bool,
    pub records: Vec<PurityRecord>,
    pub points: Vec<DecayPoint>,
}

impl XrbData {
    pub fn observations(&self) -> Observations {
        let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            groups
                .entry(("purity".into(), r.depth))
                .or_default()
                .push(if self.exact { r.exact } else { r.value });
        }
        Observations { groups }
    }
}

/// XRB: random Clifford sequences followed by Pauli tomography with
/// `shots_per_observable` shots for each of the 15 observables.
pub fn run_xrb(spec: &ProtocolSpec, noise: &NoiseModel, shots_per_observable: usize, opts: RunOptions) -> Result<XrbData> {
    spec.validate()?;
    if shots_per_observable < 2 && !opts.exact {
        return Err(Error::InvalidInput("XRB needs at least two shots per observable".into()));
    }
    let coords = circuit_coordinates(spec);
    let n = shots_per_observable as f64;
    let recs: Vec<Result<PurityRecord>> = coords
        .par_iter()
        .map(|(depth, _, index)| {
            let circ = build_xrb_at(spec, *depth, *index)?;
            let expectations = simulate_circuit(&circ, noise)?;
            let exact = expectations.iter().map(|e| e * e).sum::<f64>() / 3.0;
            let mut rng = stream(spec.seed, Domain::Shot, &[99, *depth as u64, *index as u64]);
            let mut est = 0.0;
            for e in &expectations {
                let p_plus = (0.5 * (1.0 + e)).clamp(0.0, 1.0);
                let plus = (0..shots_per_observable).filter(|_| rng.random::<f64>() < p_plus).count() as f64;
                let mean = (2.0 * plus - n) / n;
                est += (n * mean * mean - 1.0) / (n - 1.0);
            }
            Ok(PurityRecord { depth: *depth, circuit: *index, value: est / 3.0, exact })
        })
        .collect();
    let records = recs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut data = XrbData { exact: opts.exact, records, points: Vec::new() };
    data.points = data.observations().points();
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::PauliTransferMatrix;
    use crate::groups::{cnot_unitary, TwirlGroupKind};
    use crate::noise::{CustomModel, ErrorModel, Placement};
    use approx::assert_abs_diff_eq;

    fn spec(group: TwirlGroupKind, interleaved: bool, seed: u64) -> ProtocolSpec {
        ProtocolSpec::with_defaults(group, interleaved.then(cnot_unitary), 1500, seed).unwrap()
    }

    #[test]
    fn noiseless_circuits_reach_ideal_outcome() {
        let ideal = NoiseModel::ideal();
        for g in TwirlGroupKind::ALL {
            for interleaved in [false, true] {
                let s = spec(g, interleaved, 3);
                for (depth, input, index) in circuit_coordinates(&s).into_iter().step_by(97) {
                    let c = build_circuit(&s, depth, input.as_ref(), index).unwrap();
                    for v in simulate_circuit(&c, &ideal).unwrap() {
                        assert_abs_diff_eq!(v, c.ideal_outcome, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_circuits_are_ideal_under_compiled_placement() {
        let nm = NoiseModel::new(ErrorModel::coherent_z(0.0, 0.0), Placement::Compiled).unwrap();
        for g in [TwirlGroupKind::Haar, TwirlGroupKind::Clifford2] {
            let s = spec(g, true, 5);
            let c = build_circuit(&s, 4, None, 0).unwrap();
            assert_abs_diff_eq!(simulate_circuit(&c, &nm).unwrap()[0], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn depolarizing_survival_matches_closed_form() {
        let p = 0.97;
        let model = ErrorModel::Custom(CustomModel {
            two_qubit: Some(PauliTransferMatrix::depolarizing(4, p)),
            ..Default::default()
        });
        let nm = NoiseModel::new(model, Placement::Monolithic).unwrap();
        let s = spec(TwirlGroupKind::Clifford2, false, 9);
        for m in [4, 8] {
            let c = build_circuit(&s, m, None, 1).unwrap();
            // m twirls plus the correction, each followed by dep(p); depolarizing commutes with unitaries
            let expected = 0.75 * p.powi(m as i32 + 1) + 0.25;
            assert_abs_diff_eq!(simulate_circuit(&c, &nm).unwrap()[0], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn pauli_circuit_under_diagonal_noise_is_fidelity_product() {
        let mut lam = vec![1.0; 16];
        for (i, l) in lam.iter_mut().enumerate().skip(1) {
            *l = 1.0 - 0.01 * (i as f64 % 5.0 + 1.0);
        }
        let pulse = PauliTransferMatrix::identity(2);
        let model = ErrorModel::Custom(CustomModel {
            two_qubit: Some(PauliTransferMatrix::pauli_diagonal(4, &lam).unwrap()),
            pulse: Some(pulse),
            ..Default::default()
        });
        let nm = NoiseModel::new(model, Placement::Monolithic).unwrap();
        let s = spec(TwirlGroupKind::Pauli, false, 1);
        let p = PauliString::from_index(6, 2);
        let c = build_circuit(&s, 4, Some(&p), 0).unwrap();
        // reference Pauli circuits contain no two-qubit gates, so nothing decays
        assert_abs_diff_eq!(simulate_circuit(&c, &nm).unwrap()[0], 1.0, epsilon = 1e-12);
        let s = spec(TwirlGroupKind::Pauli, true, 1);
        let c = build_circuit(&s, 4, Some(&p), 0).unwrap();
        // the CNOT orbit of P alternates between P and CNOT·P·CNOT
        let t = crate::groups::Tableau::from_unitary(&crate::groups::cnot(0)).unwrap();
        let q = t.conjugate(&crate::pauli::PhasedPauli::from_string(&p)).string();
        let expect = (lam[p.index()] * lam[q.index()]).powi(2);
        assert_abs_diff_eq!(simulate_circuit(&c, &nm).unwrap()[0], expect, epsilon = 1e-12);
    }

    #[test]
    fn runs_are_deterministic_and_order_independent() {
        let nm = NoiseModel::new(ErrorModel::coherent_z(0.1, 0.02), Placement::Monolithic).unwrap();
        let s = spec(TwirlGroupKind::Clifford2, true, 11);
        let a = run_experiment(&s, &nm, RunOptions::default()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_experiment(&s, &nm, RunOptions::default()).unwrap());
        assert_eq!(a.records, b.records);
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn exact_mode_means_equal_probabilities() {
        let nm = NoiseModel::new(ErrorModel::coherent_z(0.1, 0.02), Placement::Monolithic).unwrap();
        let s = spec(TwirlGroupKind::LocalClifford, false, 2);
        let d = run_experiment(&s, &nm, RunOptions { exact: true }).unwrap();
        let first = &d.points[0];
        let vals: Vec<f64> = d.records.iter().filter(|r| r.depth == first.depth && r.label == first.label).map(|r| r.probability).collect();
        assert_abs_diff_eq!(first.mean, vals.iter().sum::<f64>() / vals.len() as f64, epsilon = 1e-15);
    }

    #[test]
    fn xrb_coherent_noise_keeps_purity() {
        let nm = NoiseModel::new(ErrorModel::coherent_z(0.2, 0.0), Placement::Monolithic).unwrap();
        let s = ProtocolSpec::new(TwirlGroupKind::Clifford2, None, vec![1, 3, 5], 30, 4).unwrap();
        let d = run_xrb(&s, &nm, 10, RunOptions { exact: true }).unwrap();
        for p in d.points {
            assert_abs_diff_eq!(p.mean, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn readout_flip_attenuates_parity() {
        let nm = NoiseModel::ideal().with_readout_flip(0.1).unwrap();
        let s = spec(TwirlGroupKind::Pauli, false, 1);
        let p: PauliString = "XZ".parse().unwrap();
        let c = build_circuit(&s, 4, Some(&p), 0).unwrap();
        assert_abs_diff_eq!(simulate_circuit(&c, &nm).unwrap()[0], 0.8f64.powi(2), epsilon = 1e-12);
    }
}
