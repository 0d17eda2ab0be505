//! Self-consistent gauge: edge channels, polar factors and gauge-fixed fidelities.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{ptm_to_choi, unitary_to_ptm, PauliTransferMatrix, UnitaryMatrix};
use crate::engine::noisy_gate_ptm;
use crate::error::{Error, Result};
use crate::groups::{
    clifford2_element, sample_clifford1, sample_clifford2, sample_haar_su4, sample_pauli_layer, TwirlGroupKind, C1,
    CLIFFORD2_ORDER,
};
use crate::linalg::polar;
use crate::noise::{GateRole, NoiseModel};
use crate::pauli::Pauli;
use crate::protocols::{Gate, TwoQubitSource};
use crate::rng::{stream, Domain, Stream};

const D2: f64 = 16.0;
const CHOI_FLOOR_TOL: f64 = 1e-6;

type Pair = (DMatrix<f64>, DMatrix<f64>);

/// The gates whose errors are being gauge-fixed: a twirl group, optionally
/// dressed by a fixed interleaved gate applied after each element.
pub struct GateSetSource<'a> {
    pub group: TwirlGroupKind,
    pub noise: &'a NoiseModel,
    pub dressing: Option<&'a UnitaryMatrix>,
}

impl<'a> GateSetSource<'a> {
    pub fn twirl(group: TwirlGroupKind, noise: &'a NoiseModel) -> Self {
        GateSetSource { group, noise, dressing: None }
    }

    pub fn dressed(group: TwirlGroupKind, noise: &'a NoiseModel, gate: &'a UnitaryMatrix) -> Self {
        GateSetSource { group, noise, dressing: Some(gate) }
    }

    /// Number of elements when the set is small enough to enumerate.
    pub fn order(&self) -> Option<usize> {
        match self.group {
            TwirlGroupKind::Pauli => Some(16),
            TwirlGroupKind::LocalClifford => Some(576),
            TwirlGroupKind::Clifford2 => Some(CLIFFORD2_ORDER),
            TwirlGroupKind::Haar => None,
        }
    }

    fn pair(&self, gate: Gate) -> Result<Pair> {
        let mut ideal = unitary_to_ptm(&UnitaryMatrix::from_trusted(gate.ideal()));
        let mut noisy = noisy_gate_ptm(&gate, self.noise)?;
        if let Some(c) = self.dressing {
            let g = Gate::two_qubit(GateRole::Interleaved, c.clone(), TwoQubitSource::Native);
            ideal = unitary_to_ptm(c).after(&ideal)?;
            noisy = noisy_gate_ptm(&g, self.noise)?.after(&noisy)?;
        }
        Ok((ideal.entries().clone(), noisy.entries().clone()))
    }

    fn element(&self, index: usize) -> Result<Pair> {
        let gate = match self.group {
            TwirlGroupKind::Pauli => {
                let (a, b) = (Pauli::from_index(index / 4), Pauli::from_index(index % 4));
                Gate::local(GateRole::Twirl, a.matrix(), b.matrix())
            }
            TwirlGroupKind::LocalClifford => Gate::local(
                GateRole::Twirl,
                C1[index / 24].unitary.matrix().clone(),
                C1[index % 24].unitary.matrix().clone(),
            ),
            TwirlGroupKind::Clifford2 => {
                Gate::two_qubit(GateRole::Twirl, clifford2_element(index).unitary, TwoQubitSource::Clifford(index))
            }
            TwirlGroupKind::Haar => return Err(Error::UnsupportedCombination("Haar elements cannot be enumerated".into())),
        };
        self.pair(gate)
    }

    fn sample(&self, rng: &mut Stream) -> Result<Pair> {
        let gate = match self.group {
            TwirlGroupKind::Pauli => {
                let (a, b) = sample_pauli_layer(rng);
                Gate::local(GateRole::Twirl, a.matrix(), b.matrix())
            }
            TwirlGroupKind::LocalClifford => {
                let (a, b) = (sample_clifford1(rng), sample_clifford1(rng));
                Gate::local(GateRole::Twirl, C1[a].unitary.matrix().clone(), C1[b].unitary.matrix().clone())
            }
            TwirlGroupKind::Clifford2 => {
                let el = sample_clifford2(rng);
                let i = el.index.expect("class form");
                Gate::two_qubit(GateRole::Twirl, el.unitary, TwoQubitSource::Clifford(i))
            }
            TwirlGroupKind::Haar => Gate::two_qubit(GateRole::Twirl, sample_haar_su4(rng), TwoQubitSource::Haar),
        };
        self.pair(gate)
    }

    fn all(&self) -> Result<Vec<Pair>> {
        let n = self.order().expect("enumerable");
        (0..n).into_par_iter().map(|i| self.element(i)).collect()
    }

    fn coord(&self) -> [u64; 2] {
        let g = TwirlGroupKind::ALL.iter().position(|k| *k == self.group).expect("listed") as u64;
        [g, u64::from(self.dressing.is_some())]
    }
}

/// Left and right edge channels of a gate set.
#[derive(Debug, Clone)]
pub struct EdgeChannels {
    pub left: PauliTransferMatrix,
    pub right: PauliTransferMatrix,
    /// Elements averaged per twirl step (exact) or sampled 4-tuples.
    pub samples: usize,
    pub exact: bool,
    pub choi_floor: f64,
}

fn ptm(entries: DMatrix<f64>) -> PauliTransferMatrix {
    PauliTransferMatrix::from_trusted(4, entries)
}

fn mean(mut ms: impl Iterator<Item = DMatrix<f64>>, n: usize) -> DMatrix<f64> {
    let first = ms.next().expect("non-empty");
    ms.fold(first, |acc, m| acc + m) / n as f64
}

fn exact_edges(set: &[Pair]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut l = DMatrix::identity(16, 16);
    let mut r = DMatrix::identity(16, 16);
    for _ in 0..4 {
        l = mean(set.par_iter().map(|(g, gn)| gn * &l * g.transpose()).collect::<Vec<_>>().into_iter(), set.len());
        r = mean(set.par_iter().map(|(g, gn)| g.transpose() * &r * gn).collect::<Vec<_>>().into_iter(), set.len());
    }
    (l, r)
}

/// Four-fold twirl averages `E[G̃₄G̃₃G̃₂G̃₁(G₄G₃G₂G₁)⁻¹]` and its mirror.
///
/// Enumerable sets are averaged exactly; Haar uses `n` sampled 4-tuples.
pub fn estimate_edge_channels(source: &GateSetSource, n: usize, seed: u64) -> Result<EdgeChannels> {
    let (left, right, samples, exact) = if source.order().is_some() {
        let set = source.all()?;
        let (l, r) = exact_edges(&set);
        (l, r, set.len(), true)
    } else {
        if n == 0 {
            return Err(Error::InvalidInput("edge-channel estimation needs at least one sample".into()));
        }
        let [g, dressed] = source.coord();
        let parts: Vec<Pair> = (0..n)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream(seed, Domain::Gauge, &[g, dressed, 0, t as u64]);
                let mut ideal = DMatrix::identity(16, 16);
                let mut noisy = DMatrix::identity(16, 16);
                for _ in 0..4 {
                    let (gi, gn) = source.sample(&mut rng)?;
                    ideal = gi * ideal;
                    noisy = gn * noisy;
                }
                Ok((&noisy * ideal.transpose(), ideal.transpose() * &noisy))
            })
            .collect::<Result<_>>()?;
        let l = mean(parts.iter().map(|p| p.0.clone()), n);
        let r = mean(parts.iter().map(|p| p.1.clone()), n);
        (l, r, n, false)
    };
    let (left, right) = (ptm(left), ptm(right));
    let choi_floor = ptm_to_choi(&left).min_eigenvalue().min(ptm_to_choi(&right).min_eigenvalue());
    if choi_floor < -CHOI_FLOOR_TOL {
        log::warn!("edge channels are not CPTP to tolerance: Choi floor {choi_floor:.3e} with {samples} samples");
    }
    Ok(EdgeChannels { left, right, samples, exact, choi_floor })
}

/// `Λ = 𝒰·D` with `𝒰` unitary and `D` decoherent.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub unitary: UnitaryMatrix,
    pub unitary_part: PauliTransferMatrix,
    pub decoherent_part: PauliTransferMatrix,
}

/// Polar factors via the leading Kraus operator of the Choi matrix.
pub fn channel_polar_decompose(channel: &PauliTransferMatrix) -> Result<PolarFactors> {
    let d = channel.dim();
    let choi = ptm_to_choi(channel);
    let (vals, vecs) = choi.eigen();
    let lead = vals[0];
    if lead <= 0.5 {
        return Err(Error::NoLeadingKraus(lead));
    }
    let k0 = crate::channels::kraus_from_eigenvector(d, lead, &vecs, 0);
    let (u, _) = polar(&k0);
    let unitary = UnitaryMatrix::from_trusted(crate::linalg::canonical_phase(&u));
    let unitary_part = unitary_to_ptm(&unitary);
    let decoherent_part = unitary_part.transpose().after(channel)?;
    Ok(PolarFactors { unitary, unitary_part, decoherent_part })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeOrigin {
    /// `S = U_R`.
    #[default]
    UR,
    /// `S = U_L⁻¹`.
    ULInverse,
    Identity,
}

#[derive(Debug, Clone)]
pub struct GaugeChoice {
    pub s: PauliTransferMatrix,
    pub origin: GaugeOrigin,
}

impl GaugeChoice {
    pub fn identity() -> Self {
        GaugeChoice { s: PauliTransferMatrix::identity(4), origin: GaugeOrigin::Identity }
    }

    pub fn from_edges(edges: &EdgeChannels, origin: GaugeOrigin) -> Result<Self> {
        let s = match origin {
            GaugeOrigin::UR => channel_polar_decompose(&edges.right)?.unitary_part,
            GaugeOrigin::ULInverse => channel_polar_decompose(&edges.left)?.unitary_part.transpose(),
            GaugeOrigin::Identity => PauliTransferMatrix::identity(4),
        };
        Ok(GaugeChoice { s, origin })
    }

    /// `f(SG̃S⁻¹, G)` for one gate.
    pub fn fidelity(&self, ideal: &DMatrix<f64>, noisy: &DMatrix<f64>) -> f64 {
        let s = self.s.entries();
        (s * noisy * s.transpose() * ideal.transpose()).trace() / D2
    }
}

/// Gauge-fixed average fidelity of a gate set.
pub fn scg_average_fidelity(source: &GateSetSource, gauge: &GaugeChoice, m: usize, seed: u64) -> Result<f64> {
    if let Some(n) = source.order() {
        let set = source.all()?;
        return Ok(set.iter().map(|(g, gn)| gauge.fidelity(g, gn)).sum::<f64>() / n as f64);
    }
    if m == 0 {
        return Err(Error::InvalidInput("SCG averaging needs at least one sample".into()));
    }
    let [g, dressed] = source.coord();
    let vals: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, Domain::Gauge, &[g, dressed, 1, t as u64]);
            source.sample(&mut rng).map(|(gi, gn)| gauge.fidelity(&gi, &gn))
        })
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / m as f64)
}

/// How the interleaved gate's SCG infidelity is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScgTarget {
    /// `1 − f_SCG(dressed set)/f_SCG(twirl set)`, each in its own gauge.
    #[default]
    DressedRatio,
    /// `1 − f(SC̃S⁻¹, C)` with `S` from the twirl set.
    Gate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeSettings {
    pub samples: usize,
    pub fidelity_samples: usize,
    pub origin: GaugeOrigin,
    pub target: ScgTarget,
}

impl Default for GaugeSettings {
    fn default() -> Self {
        GaugeSettings { samples: 10_000, fidelity_samples: 10_000, origin: GaugeOrigin::UR, target: ScgTarget::DressedRatio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub group: TwirlGroupKind,
    pub gauge_origin: GaugeOrigin,
    pub target: ScgTarget,
    pub scg_infidelity: f64,
    pub reference_scg_infidelity: f64,
    pub edge_choi_floor: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

/// SCG infidelity of `interleaved` when benchmarked against `group`.
pub fn scg_interleaved_infidelity(
    group: TwirlGroupKind,
    noise: &NoiseModel,
    interleaved: &UnitaryMatrix,
    settings: &GaugeSettings,
    seed: u64,
) -> Result<GaugeReport> {
    let twirl = GateSetSource::twirl(group, noise);
    let edges = estimate_edge_channels(&twirl, settings.samples, seed)?;
    let gauge = GaugeChoice::from_edges(&edges, settings.origin)?;
    let f_ref = scg_average_fidelity(&twirl, &gauge, settings.fidelity_samples, seed)?;
    let (scg, floor) = match settings.target {
        ScgTarget::DressedRatio => {
            let dressed = GateSetSource::dressed(group, noise, interleaved);
            let d_edges = estimate_edge_channels(&dressed, settings.samples, seed)?;
            let d_gauge = GaugeChoice::from_edges(&d_edges, settings.origin)?;
            let f_dressed = scg_average_fidelity(&dressed, &d_gauge, settings.fidelity_samples, seed)?;
            (1.0 - f_dressed / f_ref, edges.choi_floor.min(d_edges.choi_floor))
        }
        ScgTarget::Gate => {
            let gate = Gate::two_qubit(GateRole::Interleaved, interleaved.clone(), TwoQubitSource::Native);
            let noisy = noisy_gate_ptm(&gate, noise)?;
            let f = gauge.fidelity(unitary_to_ptm(interleaved).entries(), noisy.entries());
            (1.0 - f, edges.choi_floor)
        }
    };
    Ok(GaugeReport {
        group,
        gauge_origin: settings.origin,
        target: settings.target,
        scg_infidelity: scg,
        reference_scg_infidelity: 1.0 - f_ref,
        edge_choi_floor: floor,
        n: edges.samples,
        m: if twirl.order().is_some() { edges.samples } else { settings.fidelity_samples },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{process_infidelity, PauliTransferMatrix as Ptm};
    use crate::groups::{cnot_unitary, sample_haar};
    use crate::noise::{ErrorModel, Placement};
    use crate::pauli::PauliString;
    use crate::rng::Domain;
    use approx::assert_abs_diff_eq;

    fn zz(theta: f64) -> UnitaryMatrix {
        crate::channels::pauli_rotation(&PauliString::from_index(15, 2).matrix(), theta)
    }

    #[test]
    fn noiseless_edges_are_identity() {
        let noise = NoiseModel::ideal();
        for group in [TwirlGroupKind::Pauli, TwirlGroupKind::LocalClifford] {
            let e = estimate_edge_channels(&GateSetSource::twirl(group, &noise), 1, 0).unwrap();
            assert!(e.left.frobenius_distance(&Ptm::identity(4)) < 1e-10);
            assert!(e.right.frobenius_distance(&Ptm::identity(4)) < 1e-10);
            let r = scg_interleaved_infidelity(group, &noise, &cnot_unitary(), &GaugeSettings::default(), 0).unwrap();
            assert_abs_diff_eq!(r.scg_infidelity, 0.0, epsilon = 1e-12);
        }
        let e = estimate_edge_channels(&GateSetSource::twirl(TwirlGroupKind::Haar, &noise), 20, 3).unwrap();
        assert!(e.left.frobenius_distance(&Ptm::identity(4)) < 1e-9);
    }

    /// Ideal gates of a group paired with `err ∘ G`.
    fn left_noise_set(group: TwirlGroupKind, err: &Ptm) -> Vec<Pair> {
        let noise = NoiseModel::ideal();
        let src = GateSetSource::twirl(group, &noise);
        (0..src.order().unwrap()).map(|i| src.element(i).unwrap()).map(|(g, _)| (g.clone(), err.entries() * g)).collect()
    }

    #[test]
    fn edge_average_matches_brute_force_tuples() {
        let err = unitary_to_ptm(&zz(0.07));
        let set = left_noise_set(TwirlGroupKind::Pauli, &err);
        let (left, _) = exact_edges(&set);
        let mut l = DMatrix::zeros(16, 16);
        for i in 0..16usize.pow(4) {
            let idx = [i % 16, (i / 16) % 16, (i / 256) % 16, i / 4096];
            let mut ideal = DMatrix::identity(16, 16);
            let mut noisy = DMatrix::identity(16, 16);
            for k in idx {
                ideal = &set[k].0 * ideal;
                noisy = &set[k].1 * noisy;
            }
            l += noisy * ideal.transpose();
        }
        l /= 16f64.powi(4);
        assert!((&left - l).norm() < 1e-10);
        // Gate-independent unitary left noise: the unitary polar factor of L is the error itself.
        let pf = channel_polar_decompose(&ptm(left)).unwrap();
        assert!(pf.unitary_part.frobenius_distance(&err) < 1e-10);
    }

    #[test]
    fn polar_round_trips() {
        let mut rng = stream(5, Domain::Test, &[0]);
        let u = unitary_to_ptm(&zz(0.1));
        let pf = channel_polar_decompose(&u).unwrap();
        assert!(pf.decoherent_part.frobenius_distance(&Ptm::identity(4)) < 1e-10);
        let dep = Ptm::depolarizing(4, 0.95);
        let pf = channel_polar_decompose(&dep).unwrap();
        assert!(pf.unitary_part.frobenius_distance(&Ptm::identity(4)) < 1e-10);
        for _ in 0..10 {
            let h = sample_haar(&mut rng, 4);
            let small = crate::linalg::unitary_power(h.matrix(), 0.02);
            let v = unitary_to_ptm(&UnitaryMatrix::new(small.unwrap()).unwrap());
            let composite = v.after(&dep).unwrap();
            let pf = channel_polar_decompose(&composite).unwrap();
            assert!(pf.unitary_part.frobenius_distance(&v) < 1e-8);
            assert!(pf.decoherent_part.frobenius_distance(&dep) < 1e-8);
            assert!(pf.unitary_part.after(&pf.decoherent_part).unwrap().frobenius_distance(&composite) < 1e-8);
        }
        assert!(matches!(channel_polar_decompose(&Ptm::depolarizing(4, 0.1)), Err(Error::NoLeadingKraus(_))));
    }

    #[test]
    fn identity_gauge_equals_plain_average() {
        let dep = Ptm::depolarizing(4, 0.98);
        let set = left_noise_set(TwirlGroupKind::LocalClifford, &dep);
        let gauge = GaugeChoice::identity();
        let f = set.iter().map(|(g, gn)| gauge.fidelity(g, gn)).sum::<f64>() / set.len() as f64;
        assert_abs_diff_eq!(1.0 - f, process_infidelity(&dep), epsilon = 1e-12);
    }

    #[test]
    fn observables_are_gauge_invariant() {
        let mut rng = stream(9, Domain::Test, &[1]);
        let noise = NoiseModel::new(ErrorModel::coherent_z(0.17, 0.02), Placement::Compiled).unwrap();
        let src = GateSetSource::twirl(TwirlGroupKind::Clifford2, &noise);
        let s = DMatrix::from_fn(16, 16, |i, j| if i == j { 1.0 } else { 0.0 }) + DMatrix::from_fn(16, 16, |i, j| 0.01 * ((i * 7 + j * 3) % 5) as f64);
        let s_inv = s.clone().try_inverse().unwrap();
        let rho = DMatrix::from_fn(16, 1, |i, _| if i == 0 || i == 15 { 0.25 } else { 0.0 });
        let mu = rho.transpose();
        let mut plain = rho.clone();
        let mut gauged = &s * &rho;
        for _ in 0..6 {
            let (_, gn) = src.sample(&mut rng).unwrap();
            plain = &gn * plain;
            gauged = &s * &gn * &s_inv * gauged;
        }
        let a = (&mu * plain)[(0, 0)];
        let b = (&mu * &s_inv * gauged)[(0, 0)];
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }
}
