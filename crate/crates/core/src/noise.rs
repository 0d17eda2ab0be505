//! Error models and their attachment to ideal gates.
//!
//! A noisy gate is `E ∘ U`: the error acts after the ideal gate. Single-qubit
//! gates are always compiled into `Z·X(π/2)·Z·X(π/2)·Z` and only the two
//! `X(π/2)` pulses carry error. Two-qubit group elements receive one error per
//! element ([`Placement::Monolithic`]) or one per CNOT of their circuit
//! ([`Placement::Compiled`]).

use serde::{Deserialize, Serialize};

use crate::channels::{process_infidelity, PauliTransferMatrix, UnitaryMatrix};
use crate::error::{Error, Result};
use crate::groups::{self, x90, Decomposition, Step};
use crate::linalg;
use crate::pauli::{CMat, PauliString};

/// Where errors attach on two-qubit group elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Monolithic,
    Compiled,
}

/// What a gate is doing in its circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateRole {
    Twirl,
    Interleaved,
    Correction,
    Spam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateClass {
    OneQubitPulse,
    TwoQubit,
}

/// Per-gate-class channels for stochastic test models.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CustomModel {
    pub two_qubit: Option<PauliTransferMatrix>,
    /// Falls back to `two_qubit` when absent.
    pub interleaved: Option<PauliTransferMatrix>,
    pub pulse: Option<PauliTransferMatrix>,
}

/// Error models; all angles in radians with the exponent convention `e^{iθG}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorModel {
    Ideal,
    FixedCoherent {
        two_qubit_generator: PauliString,
        theta2: f64,
        single_qubit_generator: PauliString,
        theta1: f64,
    },
    Overrotation {
        delta2: f64,
        delta1: f64,
    },
    Adversarial {
        interleaved_generator: PauliString,
        interleaved_theta: f64,
        twirl_generator: PauliString,
        twirl_theta: f64,
    },
    Custom(CustomModel),
}

impl ErrorModel {
    pub fn coherent_z(theta2: f64, theta1: f64) -> Self {
        ErrorModel::FixedCoherent {
            two_qubit_generator: PauliString::new(vec![crate::pauli::Pauli::Z, crate::pauli::Pauli::Z]),
            theta2,
            single_qubit_generator: PauliString::new(vec![crate::pauli::Pauli::Z]),
            theta1,
        }
    }

    /// Interference model: `e^{iθ·XZ}` on the interleaved gate and `e^{sign·iθ·YY}` on twirl gates.
    pub fn adversarial(theta: f64, sign: f64) -> Self {
        use crate::pauli::Pauli::*;
        ErrorModel::Adversarial {
            interleaved_generator: PauliString::new(vec![X, Z]),
            interleaved_theta: theta,
            twirl_generator: PauliString::new(vec![Y, Y]),
            twirl_theta: sign * theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be finite")))
            }
        };
        match self {
            ErrorModel::Ideal => Ok(()),
            ErrorModel::FixedCoherent { two_qubit_generator, theta2, single_qubit_generator, theta1 } => {
                finite(*theta2, "theta2")?;
                finite(*theta1, "theta1")?;
                if two_qubit_generator.num_qubits() != 2 || single_qubit_generator.num_qubits() != 1 {
                    return Err(Error::InvalidInput(
                        "fixed-coherent generators must act on two and one qubits".into(),
                    ));
                }
                Ok(())
            }
            ErrorModel::Overrotation { delta2, delta1 } => {
                finite(*delta2, "delta2")?;
                finite(*delta1, "delta1")
            }
            ErrorModel::Adversarial { interleaved_generator, interleaved_theta, twirl_generator, twirl_theta } => {
                finite(*interleaved_theta, "interleaved angle")?;
                finite(*twirl_theta, "twirl angle")?;
                if interleaved_generator.num_qubits() != 2 || twirl_generator.num_qubits() != 2 {
                    return Err(Error::InvalidInput("adversarial generators must act on two qubits".into()));
                }
                Ok(())
            }
            ErrorModel::Custom(m) => {
                for (ptm, d) in [(&m.two_qubit, 4), (&m.interleaved, 4), (&m.pulse, 2)] {
                    if let Some(p) = ptm {
                        if p.dim() != d {
                            return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// An error operation: a unitary (cheap path) or a general channel.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisyOp {
    Unitary(CMat),
    Channel(PauliTransferMatrix),
}

impl NoisyOp {
    pub fn dim(&self) -> usize {
        match self {
            NoisyOp::Unitary(u) => u.nrows(),
            NoisyOp::Channel(p) => p.dim(),
        }
    }

    pub fn to_ptm(&self) -> PauliTransferMatrix {
        match self {
            NoisyOp::Unitary(u) => UnitaryMatrix::from_trusted(u.clone()).to_ptm(),
            NoisyOp::Channel(p) => p.clone(),
        }
    }

    /// `self ∘ other`.
    pub fn after(&self, other: &NoisyOp) -> NoisyOp {
        match (self, other) {
            (NoisyOp::Unitary(a), NoisyOp::Unitary(b)) => NoisyOp::Unitary(a * b),
            _ => NoisyOp::Channel(
                crate::channels::compose(&self.to_ptm(), &other.to_ptm()).expect("matching dimensions"),
            ),
        }
    }

    pub fn tensor(a: &NoisyOp, b: &NoisyOp) -> NoisyOp {
        match (a, b) {
            (NoisyOp::Unitary(x), NoisyOp::Unitary(y)) => NoisyOp::Unitary(x.kronecker(y)),
            _ => NoisyOp::Channel(PauliTransferMatrix::tensor(&a.to_ptm(), &b.to_ptm()).expect("single-qubit parts")),
        }
    }
}

/// An ideal gate together with the error that follows it.
#[derive(Debug, Clone)]
pub struct NoisyGate {
    pub ideal: UnitaryMatrix,
    pub error_ptm: PauliTransferMatrix,
}

impl NoisyGate {
    /// Full noisy channel `E ∘ U`.
    pub fn channel(&self) -> PauliTransferMatrix {
        crate::channels::compose(&self.error_ptm, &self.ideal.to_ptm()).expect("matching dimensions")
    }
}

fn rotation(generator: &PauliString, theta: f64) -> CMat {
    linalg::expm_i_hermitian(&generator.matrix(), theta)
}

/// Error following a two-qubit gate `gate` acting in `role`; `None` means error-free.
pub fn two_qubit_error(model: &ErrorModel, gate: &CMat, role: GateRole) -> Result<Option<NoisyOp>> {
    Ok(match model {
        ErrorModel::Ideal => None,
        ErrorModel::FixedCoherent { two_qubit_generator, theta2, .. } => {
            Some(NoisyOp::Unitary(rotation(two_qubit_generator, *theta2)))
        }
        ErrorModel::Overrotation { delta2, .. } => Some(NoisyOp::Unitary(linalg::unitary_power(gate, *delta2)?)),
        ErrorModel::Adversarial { interleaved_generator, interleaved_theta, twirl_generator, twirl_theta } => {
            Some(NoisyOp::Unitary(match role {
                GateRole::Interleaved => rotation(interleaved_generator, *interleaved_theta),
                _ => rotation(twirl_generator, *twirl_theta),
            }))
        }
        ErrorModel::Custom(m) => {
            let ptm = match role {
                GateRole::Interleaved => m.interleaved.as_ref().or(m.two_qubit.as_ref()),
                _ => m.two_qubit.as_ref(),
            };
            ptm.cloned().map(NoisyOp::Channel)
        }
    })
}

/// Error following each `X(π/2)` pulse.
pub fn pulse_error_op(model: &ErrorModel) -> Result<Option<NoisyOp>> {
    Ok(match model {
        ErrorModel::FixedCoherent { single_qubit_generator, theta1, .. } => {
            Some(NoisyOp::Unitary(rotation(single_qubit_generator, *theta1)))
        }
        ErrorModel::Overrotation { delta1, .. } => Some(NoisyOp::Unitary(linalg::unitary_power(&x90(), *delta1)?)),
        ErrorModel::Custom(m) => m.pulse.clone().map(NoisyOp::Channel),
        ErrorModel::Ideal | ErrorModel::Adversarial { .. } => None,
    })
}

/// Per-pulse error channel.
pub fn single_pulse_error(model: &ErrorModel) -> Result<PauliTransferMatrix> {
    Ok(pulse_error_op(model)?.map(|op| op.to_ptm()).unwrap_or_else(|| PauliTransferMatrix::identity(2)))
}

/// Attaches the model's error to an ideal gate of the given class.
pub fn apply_error_model(model: &ErrorModel, gate: &UnitaryMatrix, class: GateClass) -> Result<NoisyGate> {
    apply_error_model_with_role(model, gate, class, GateRole::Twirl)
}

pub fn apply_error_model_with_role(
    model: &ErrorModel,
    gate: &UnitaryMatrix,
    class: GateClass,
    role: GateRole,
) -> Result<NoisyGate> {
    model.validate()?;
    let (expected, op) = match class {
        GateClass::TwoQubit => (4, two_qubit_error(model, gate.matrix(), role)?),
        GateClass::OneQubitPulse => (2, pulse_error_op(model)?),
    };
    if gate.dim() != expected {
        return Err(Error::DimensionMismatch { expected, found: gate.dim() });
    }
    let error_ptm = op.map(|o| o.to_ptm()).unwrap_or_else(|| PauliTransferMatrix::identity(expected));
    Ok(NoisyGate { ideal: gate.clone(), error_ptm })
}

/// Infidelity of the error attached to `gate` when it is the interleaved gate.
pub fn interleaved_error_infidelity(model: &ErrorModel, gate: &UnitaryMatrix) -> Result<f64> {
    let ng = apply_error_model_with_role(model, gate, GateClass::TwoQubit, GateRole::Interleaved)?;
    Ok(process_infidelity(&ng.error_ptm))
}

/// Noise model with placement settings, able to turn gates into noisy operations.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub model: ErrorModel,
    pub placement: Placement,
    /// Independent per-qubit bit-flip probability at readout.
    pub readout_flip: f64,
    pulse: Option<NoisyOp>,
    noisy_x90: NoisyOp,
}

impl NoiseModel {
    pub fn new(model: ErrorModel, placement: Placement) -> Result<Self> {
        model.validate()?;
        let pulse = pulse_error_op(&model)?;
        let x = NoisyOp::Unitary(x90());
        let noisy_x90 = match &pulse {
            Some(e) => e.after(&x),
            None => x,
        };
        Ok(NoiseModel { model, placement, readout_flip: 0.0, pulse, noisy_x90 })
    }

    pub fn ideal() -> Self {
        NoiseModel::new(ErrorModel::Ideal, Placement::Monolithic).expect("ideal model is valid")
    }

    pub fn with_readout_flip(mut self, q: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&q) {
            return Err(Error::InvalidInput(format!("readout flip probability {q} outside [0, 0.5]")));
        }
        self.readout_flip = q;
        Ok(self)
    }

    pub fn pulse_error(&self) -> Option<&NoisyOp> {
        self.pulse.as_ref()
    }

    /// Noisy realization of a single-qubit gate compiled into two pulses.
    pub fn noisy_single_qubit(&self, u: &CMat) -> NoisyOp {
        if self.pulse.is_none() {
            return NoisyOp::Unitary(u.clone());
        }
        let g = groups::compile_single_qubit_matrix(u);
        match &self.noisy_x90 {
            NoisyOp::Unitary(p) => NoisyOp::Unitary(g.unitary_with_pulse(p)),
            pulse @ NoisyOp::Channel(_) => {
                let z = |t: f64| NoisyOp::Unitary(groups::rz(t));
                z(g.theta).after(pulse).after(&z(g.omega)).after(pulse).after(&z(g.phi))
            }
        }
    }

    pub fn noisy_local(&self, a: &CMat, b: &CMat) -> NoisyOp {
        NoisyOp::tensor(&self.noisy_single_qubit(a), &self.noisy_single_qubit(b))
    }

    fn noisy_decomposition(&self, dec: &Decomposition, role: GateRole) -> Result<Vec<NoisyOp>> {
        let mut ops = Vec::with_capacity(dec.0.len() * 2);
        for step in &dec.0 {
            match step {
                Step::Local([a, b]) => ops.push(self.noisy_local(a, b)),
                Step::Cnot { control } => {
                    let g = groups::cnot(*control);
                    let err = two_qubit_error(&self.model, &g, role)?;
                    ops.push(NoisyOp::Unitary(g));
                    ops.extend(err);
                }
            }
        }
        Ok(ops)
    }

    /// Noisy operations, in application order, realizing a two-qubit gate.
    ///
    /// `decomposition` is consulted only for compiled placement.
    pub fn noisy_two_qubit(
        &self,
        unitary: &CMat,
        role: GateRole,
        decomposition: Option<&dyn Fn() -> Result<Decomposition>>,
    ) -> Result<Vec<NoisyOp>> {
        if let (Placement::Compiled, Some(dec)) = (self.placement, decomposition) {
            return self.noisy_decomposition(&dec()?, role);
        }
        let mut ops = vec![NoisyOp::Unitary(unitary.clone())];
        ops.extend(two_qubit_error(&self.model, unitary, role)?);
        Ok(ops)
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(self.model, ErrorModel::Custom(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::unitarity;
    use crate::groups::cnot_unitary;
    use crate::pauli::{Pauli, PhasedPauli};
    use approx::assert_abs_diff_eq;

    #[test]
    fn fixed_coherent_on_cnot() {
        let m = ErrorModel::coherent_z(10f64.to_radians(), 1f64.to_radians());
        let ng = apply_error_model(&m, &cnot_unitary(), GateClass::TwoQubit).unwrap();
        assert_abs_diff_eq!(process_infidelity(&ng.error_ptm), 10f64.to_radians().sin().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(process_infidelity(&ng.error_ptm), 3.015e-2, epsilon = 1e-5);
        assert_abs_diff_eq!(unitarity(&ng.error_ptm), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_overrotation_is_identity() {
        let m = ErrorModel::Overrotation { delta2: 0.0, delta1: 0.0 };
        let ng = apply_error_model(&m, &cnot_unitary(), GateClass::TwoQubit).unwrap();
        assert!(ng.error_ptm.frobenius_distance(&PauliTransferMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn overrotation_commutes_with_gate() {
        let m = ErrorModel::Overrotation { delta2: 0.05, delta1: 0.01 };
        let ng = apply_error_model(&m, &cnot_unitary(), GateClass::TwoQubit).unwrap();
        let g = ng.ideal.to_ptm();
        let a = crate::channels::compose(&ng.error_ptm, &g).unwrap();
        let b = crate::channels::compose(&g, &ng.error_ptm).unwrap();
        assert!(a.frobenius_distance(&b) < 1e-10);
        assert_abs_diff_eq!(process_infidelity(&ng.error_ptm), 4.6162e-3, epsilon = 1e-6);
    }

    #[test]
    fn cnot_maps_yy_to_minus_xz() {
        let t = crate::groups::Tableau::from_unitary(&crate::groups::cnot(0)).unwrap();
        let yy = PhasedPauli { ops: vec![Pauli::Y, Pauli::Y], phase: 0 };
        let img = t.conjugate(&yy);
        assert_eq!(img.ops, vec![Pauli::X, Pauli::Z]);
        assert_eq!(img.sign(), Some(-1));
    }

    #[test]
    fn pulse_errors() {
        let m = ErrorModel::coherent_z(0.0, 1f64.to_radians());
        assert_abs_diff_eq!(process_infidelity(&single_pulse_error(&m).unwrap()), 3.046e-4, epsilon = 1e-7);
        let zero = ErrorModel::coherent_z(0.0, 0.0);
        assert!(single_pulse_error(&zero).unwrap().frobenius_distance(&PauliTransferMatrix::identity(2)) < 1e-14);
        let over = ErrorModel::Overrotation { delta2: 0.0, delta1: 0.01 };
        let expect = UnitaryMatrix::new(groups::rx(0.005 * std::f64::consts::PI)).unwrap().to_ptm();
        assert!(single_pulse_error(&over).unwrap().frobenius_distance(&expect) < 1e-10);
    }

    #[test]
    fn compiled_single_qubit_gate_uses_two_noisy_pulses() {
        let theta1 = 1f64.to_radians();
        let nm = NoiseModel::new(ErrorModel::coherent_z(0.0, theta1), Placement::Compiled).unwrap();
        // identity still carries two pulses: Z(θ)·E·X90·Z(ω)·E·X90·Z(φ)
        let NoisyOp::Unitary(u) = nm.noisy_single_qubit(&CMat::identity(2, 2)) else { panic!() };
        let eps = 1.0 - (u.trace().norm() / 2.0).powi(2);
        assert!(eps > 1e-5);
        // fixed-coherent pulse error is the same whatever the virtual Z angles
        let e = nm.pulse_error().unwrap().clone();
        let NoisyOp::Unitary(e) = e else { panic!() };
        assert!((e - linalg::expm_i_hermitian(&Pauli::Z.matrix(), theta1)).norm() < 1e-14);
    }

    #[test]
    fn adversarial_roles() {
        let m = ErrorModel::adversarial(0.1, -1.0);
        let Some(NoisyOp::Unitary(int)) = two_qubit_error(&m, &groups::cnot(0), GateRole::Interleaved).unwrap() else { panic!() };
        let Some(NoisyOp::Unitary(tw)) = two_qubit_error(&m, &groups::cnot(0), GateRole::Correction).unwrap() else { panic!() };
        let xz = PauliString::new(vec![Pauli::X, Pauli::Z]).matrix();
        let yy = PauliString::new(vec![Pauli::Y, Pauli::Y]).matrix();
        assert!((int - linalg::expm_i_hermitian(&xz, 0.1)).norm() < 1e-14);
        assert!((tw - linalg::expm_i_hermitian(&yy, -0.1)).norm() < 1e-14);
    }
}
