//! Twirling groups, Clifford tableaus and gate compilation.
//!
//! Two-qubit Cliffords are sampled through the four-class normal form
//! (single-qubit, CNOT-like, iSWAP-like, SWAP-like), which gives a uniform
//! draw from a single integer and carries its own CNOT circuit. Haar-random
//! unitaries are compiled with a KAK decomposition into three CNOTs.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use once_cell::sync::Lazy;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channels::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::{c, CMat, Pauli, PauliString, PhasedPauli, C64};

/// Twirling groups in order of decreasing size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlGroupKind {
    Haar,
    #[serde(rename = "clifford", alias = "clifford2")]
    Clifford2,
    LocalClifford,
    Pauli,
}

impl TwirlGroupKind {
    pub const ALL: [TwirlGroupKind; 4] = [
        TwirlGroupKind::Haar,
        TwirlGroupKind::Clifford2,
        TwirlGroupKind::LocalClifford,
        TwirlGroupKind::Pauli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TwirlGroupKind::Haar => "haar",
            TwirlGroupKind::Clifford2 => "clifford",
            TwirlGroupKind::LocalClifford => "local_clifford",
            TwirlGroupKind::Pauli => "pauli",
        }
    }

    /// True when the group tracks Pauli frames, so interleaved gates must be Clifford.
    pub fn requires_clifford_interleaved(self) -> bool {
        self != TwirlGroupKind::Haar
    }
}

impl fmt::Display for TwirlGroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn rz(t: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[C64::from_polar(1.0, -t / 2.0), c(0.0, 0.0), c(0.0, 0.0), C64::from_polar(1.0, t / 2.0)])
}

pub fn rx(t: f64) -> CMat {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    CMat::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)])
}

pub fn ry(t: f64) -> CMat {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)])
}

/// The error-bearing `X(π/2)` pulse.
pub fn x90() -> CMat {
    rx(FRAC_PI_2)
}

pub fn hadamard() -> CMat {
    let h = c(FRAC_1_SQRT_2, 0.0);
    CMat::from_row_slice(2, 2, &[h, h, h, -h])
}

pub fn phase_s() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])
}

/// CNOT with the given control qubit (qubit 0 is the left tensor factor).
pub fn cnot(control: usize) -> CMat {
    let mut m = CMat::zeros(4, 4);
    let perm: [usize; 4] = if control == 0 { [0, 1, 3, 2] } else { [0, 3, 2, 1] };
    for (col, row) in perm.iter().enumerate() {
        m[(*row, col)] = c(1.0, 0.0);
    }
    m
}

pub fn cnot_unitary() -> UnitaryMatrix {
    UnitaryMatrix::from_trusted(cnot(0))
}

pub fn kron2(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Clifford tableau: signed images of `X₀, Z₀, X₁, Z₁, …` under conjugation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tableau {
    images: Vec<PhasedPauli>,
}

impl Tableau {
    pub fn identity(n: usize) -> Self {
        let images = (0..2 * n)
            .map(|k| {
                let mut ops = vec![Pauli::I; n];
                ops[k / 2] = if k % 2 == 0 { Pauli::X } else { Pauli::Z };
                PhasedPauli { ops, phase: 0 }
            })
            .collect();
        Tableau { images }
    }

    pub fn num_qubits(&self) -> usize {
        self.images.len() / 2
    }

    pub fn images(&self) -> &[PhasedPauli] {
        &self.images
    }

    /// Reads the tableau off a unitary; fails if it is not Clifford.
    pub fn from_unitary(u: &CMat) -> Result<Self> {
        let d = u.nrows();
        let n = match d {
            2 => 1,
            4 => 2,
            _ => return Err(Error::InvalidInput(format!("unsupported dimension {d}"))),
        };
        let u_dag = u.adjoint();
        let mut images = Vec::with_capacity(2 * n);
        for gen in Tableau::identity(n).images {
            let conj = u * gen.string().matrix() * &u_dag;
            images.push(identify_pauli(&conj, n).ok_or_else(|| {
                Error::UnsupportedCombination(format!("gate is not Clifford: it maps {} outside the Pauli group", gen.string()))
            })?);
        }
        Ok(Tableau { images })
    }

    /// `C P C†` for a phased Pauli `P`.
    pub fn conjugate(&self, p: &PhasedPauli) -> PhasedPauli {
        let n = self.num_qubits();
        let mut acc = PhasedPauli { ops: vec![Pauli::I; n], phase: p.phase };
        for (q, op) in p.ops.iter().enumerate() {
            let (x, z) = op.bits();
            if x {
                acc = acc.mul(&self.images[2 * q]);
            }
            if z {
                acc = acc.mul(&self.images[2 * q + 1]);
            }
            if x && z {
                // Y = i·X·Z
                acc.phase = (acc.phase + 1) % 4;
            }
        }
        acc
    }

    /// Tableau of `self · other` (apply `other` first).
    pub fn then_after(&self, other: &Tableau) -> Tableau {
        Tableau { images: other.images.iter().map(|img| self.conjugate(img)).collect() }
    }

    /// Binary symplectic matrix; column `k` holds the `(x, z)` bits of image `k`.
    pub fn symplectic_matrix(&self) -> DMatrix<u8> {
        let m = self.images.len();
        DMatrix::from_fn(m, m, |row, col| {
            let (x, z) = self.images[col].ops[row / 2].bits();
            u8::from(if row % 2 == 0 { x } else { z })
        })
    }

    /// Image signs as bits (1 for a minus sign).
    pub fn phase_bits(&self) -> Vec<u8> {
        self.images.iter().map(|p| u8::from(p.phase == 2)).collect()
    }

    pub fn preserves_symplectic_form(&self) -> bool {
        let s = self.symplectic_matrix().map(|b| b as i64);
        let m = s.nrows();
        let omega = DMatrix::from_fn(m, m, |i, j| i64::from(i / 2 == j / 2 && i != j));
        let prod = s.transpose() * &omega * &s;
        prod.map(|v| v.rem_euclid(2)) == omega
    }
}

fn identify_pauli(m: &CMat, n: usize) -> Option<PhasedPauli> {
    let d = m.nrows() as f64;
    for idx in 0..4usize.pow(n as u32) {
        let p = PauliString::from_index(idx, n);
        let t = (p.matrix() * m).trace() / d;
        if (t.norm() - 1.0).abs() < 1e-8 {
            if t.im.abs() > 1e-8 {
                return None;
            }
            let phase = if t.re > 0.0 { 0 } else { 2 };
            return Some(PhasedPauli { ops: p.0, phase });
        }
    }
    None
}

/// One step of a two-qubit circuit in application order.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Local([CMat; 2]),
    Cnot { control: usize },
}

/// A two-qubit gate written as local layers and CNOTs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposition(pub Vec<Step>);

impl Decomposition {
    pub fn unitary(&self) -> CMat {
        self.0.iter().fold(CMat::identity(4, 4), |acc, step| {
            let m = match step {
                Step::Local([a, b]) => kron2(a, b),
                Step::Cnot { control } => cnot(*control),
            };
            m * acc
        })
    }

    pub fn cnot_count(&self) -> usize {
        self.0.iter().filter(|s| matches!(s, Step::Cnot { .. })).count()
    }

    /// Appends a local layer, merging it into a trailing local layer.
    fn push_local(&mut self, a: CMat, b: CMat) {
        if let Some(Step::Local([pa, pb])) = self.0.last_mut() {
            *pa = &a * &*pa;
            *pb = &b * &*pb;
        } else {
            self.0.push(Step::Local([a, b]));
        }
    }
}

/// Clifford element on one or two qubits with its unitary in canonical phase.
#[derive(Debug, Clone)]
pub struct CliffordElement {
    pub tableau: Tableau,
    pub unitary: UnitaryMatrix,
    /// Class-form index in `0..11520` for two-qubit elements.
    pub index: Option<usize>,
}

impl CliffordElement {
    pub fn from_unitary(u: &CMat) -> Result<Self> {
        let tableau = Tableau::from_unitary(u)?;
        Ok(CliffordElement { tableau, unitary: UnitaryMatrix::from_trusted(linalg::canonical_phase(u)), index: None })
    }

    pub fn num_qubits(&self) -> usize {
        self.tableau.num_qubits()
    }

    pub fn adjoint(&self) -> CliffordElement {
        CliffordElement::from_unitary(&self.unitary.matrix().adjoint()).expect("inverse of a Clifford is Clifford")
    }

    /// Two-qubit CNOT circuit for this element.
    pub fn decomposition(&self) -> Decomposition {
        let index = self.index.unwrap_or_else(|| clifford2_index(&self.tableau));
        clifford2_class_circuit(index)
    }
}

/// Single-qubit Clifford group in breadth-first order from the identity.
pub static C1: Lazy<Vec<CliffordElement>> = Lazy::new(|| {
    let gens = [hadamard(), phase_s()];
    let mut seen: HashMap<Tableau, ()> = HashMap::new();
    let mut out = Vec::new();
    let mut frontier = vec![CMat::identity(2, 2)];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for u in frontier {
            let el = CliffordElement::from_unitary(&u).expect("generated from Cliffords");
            if seen.insert(el.tableau.clone(), ()).is_some() {
                continue;
            }
            for g in &gens {
                next.push(g * &u);
            }
            out.push(el);
        }
        frontier = next;
    }
    out
});

static C1_BY_TABLEAU: Lazy<HashMap<Tableau, usize>> =
    Lazy::new(|| C1.iter().enumerate().map(|(i, el)| (el.tableau.clone(), i)).collect());

/// Index of a single-qubit Clifford unitary in [`C1`].
pub fn c1_index(u: &CMat) -> Result<usize> {
    let t = Tableau::from_unitary(u)?;
    Ok(C1_BY_TABLEAU[&t])
}

/// The three-element set that cycles `X → Y → Z` used in the class form.
fn s1_set() -> [CMat; 3] {
    [
        CMat::identity(2, 2),
        ry(FRAC_PI_2) * rx(FRAC_PI_2),
        rx(-FRAC_PI_2) * ry(-FRAC_PI_2),
    ]
}

pub const CLIFFORD2_ORDER: usize = 11520;

/// Circuit of the `index`-th two-qubit Clifford in class form.
pub fn clifford2_class_circuit(index: usize) -> Decomposition {
    assert!(index < CLIFFORD2_ORDER);
    let local = |k: usize| -> Step {
        Step::Local([C1[k / 24].unitary.matrix().clone(), C1[k % 24].unitary.matrix().clone()])
    };
    let s1 = s1_set();
    let s1_layer = |k: usize| -> Step { Step::Local([s1[k / 3].clone(), s1[k % 3].clone()]) };
    let mut steps = Vec::with_capacity(7);
    if index < 576 {
        steps.push(local(index));
    } else if index < 576 + 5184 {
        let j = index - 576;
        steps.push(local(j / 9));
        steps.push(Step::Cnot { control: 0 });
        steps.push(s1_layer(j % 9));
    } else if index < 576 + 2 * 5184 {
        let j = index - 576 - 5184;
        steps.push(local(j / 9));
        steps.push(Step::Cnot { control: 0 });
        steps.push(Step::Local([rx(-FRAC_PI_2), ry(FRAC_PI_2)]));
        steps.push(Step::Cnot { control: 0 });
        steps.push(s1_layer(j % 9));
    } else {
        let j = index - 576 - 2 * 5184;
        steps.push(local(j));
        steps.push(Step::Cnot { control: 0 });
        steps.push(Step::Cnot { control: 1 });
        steps.push(Step::Cnot { control: 0 });
    }
    Decomposition(steps)
}

/// Two-qubit Clifford for a class-form index.
pub fn clifford2_element(index: usize) -> CliffordElement {
    let u = clifford2_class_circuit(index).unitary();
    let mut el = CliffordElement::from_unitary(&u).expect("class form is Clifford");
    el.index = Some(index);
    el
}

/// Tableau → class index, built on first use; only used to synthesize correction gates.
static CLIFFORD2_TABLE: Lazy<HashMap<Tableau, usize>> = Lazy::new(|| {
    let mut table = HashMap::with_capacity(CLIFFORD2_ORDER);
    for i in 0..CLIFFORD2_ORDER {
        let t = Tableau::from_unitary(&clifford2_class_circuit(i).unitary()).expect("Clifford");
        table.insert(t, i);
    }
    table
});

pub fn clifford2_index(t: &Tableau) -> usize {
    CLIFFORD2_TABLE[t]
}

pub fn sample_clifford2<R: Rng + ?Sized>(rng: &mut R) -> CliffordElement {
    clifford2_element(rng.random_range(0..CLIFFORD2_ORDER))
}

pub fn sample_clifford1<R: Rng + ?Sized>(rng: &mut R) -> usize {
    rng.random_range(0..24)
}

/// Independent uniform single-qubit Cliffords on the two qubits.
pub fn sample_local_clifford<R: Rng + ?Sized>(rng: &mut R) -> (CliffordElement, CliffordElement) {
    (C1[sample_clifford1(rng)].clone(), C1[sample_clifford1(rng)].clone())
}

pub fn sample_pauli_layer<R: Rng + ?Sized>(rng: &mut R) -> (Pauli, Pauli) {
    (Pauli::from_index(rng.random_range(0..4)), Pauli::from_index(rng.random_range(0..4)))
}

/// Haar-random element of SU(4) via Ginibre + QR with phase correction.
pub fn sample_haar_su4<R: Rng + ?Sized>(rng: &mut R) -> UnitaryMatrix {
    sample_haar(rng, 4)
}

pub fn sample_haar<R: Rng + ?Sized>(rng: &mut R, d: usize) -> UnitaryMatrix {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let fix = CMat::from_fn(d, d, |i, j| if i == j { r[(i, i)] / r[(i, i)].norm() } else { c(0.0, 0.0) });
    let u = q * fix;
    let det = linalg::det(&u);
    let root = C64::from_polar(1.0, det.arg() / d as f64);
    UnitaryMatrix::from_trusted(u / root)
}

/// Angles of `Z(θ)·X(π/2)·Z(ω)·X(π/2)·Z(φ)`, with `Z(φ)` applied first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompiledSingleQubitGate {
    pub phi: f64,
    pub omega: f64,
    pub theta: f64,
}

impl CompiledSingleQubitGate {
    /// Number of error-bearing pulses; the same for every gate.
    pub const PULSES: usize = 2;

    pub fn unitary(&self) -> CMat {
        rz(self.theta) * x90() * rz(self.omega) * x90() * rz(self.phi)
    }

    /// Reconstruction with a custom pulse (e.g. a noisy `X(π/2)`).
    pub fn unitary_with_pulse(&self, pulse: &CMat) -> CMat {
        rz(self.theta) * pulse * rz(self.omega) * pulse * rz(self.phi)
    }
}

pub fn compile_single_qubit(u: &UnitaryMatrix) -> Result<CompiledSingleQubitGate> {
    if u.dim() != 2 {
        return Err(Error::InvalidInput("single-qubit compilation needs a 2×2 unitary".into()));
    }
    Ok(compile_single_qubit_matrix(u.matrix()))
}

pub(crate) fn compile_single_qubit_matrix(m: &CMat) -> CompiledSingleQubitGate {
    // m = e^{iα}·U3(t, f, l), U3 = [[cos t/2, −e^{il} sin t/2], [e^{if} sin t/2, e^{i(f+l)} cos t/2]]
    let (a00, a10) = (m[(0, 0)].norm(), m[(1, 0)].norm());
    let t = 2.0 * a10.atan2(a00);
    let (f, l) = if a00 > 1e-9 && a10 > 1e-9 {
        let base = m[(0, 0)].arg();
        (m[(1, 0)].arg() - base, (-m[(0, 1)]).arg() - base)
    } else if a10 <= 1e-9 {
        (0.0, m[(1, 1)].arg() - m[(0, 0)].arg())
    } else {
        (m[(1, 0)].arg() - (-m[(0, 1)]).arg(), 0.0)
    };
    // U3(t, f, l) ≅ RZ(f + π)·SX·RZ(t + π)·SX·RZ(l)
    CompiledSingleQubitGate { phi: l, omega: t + PI, theta: f + PI }
}

/// `(G_m ⋯ G_1)⁻¹` for gates listed in application order.
pub fn invert_sequence(ideal_gates: &[UnitaryMatrix]) -> Result<UnitaryMatrix> {
    let first = ideal_gates.first().ok_or_else(|| Error::InvalidInput("empty gate sequence".into()))?;
    let d = first.dim();
    let mut prod = CMat::identity(d, d);
    for g in ideal_gates {
        if g.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: g.dim() });
        }
        prod = g.matrix() * prod;
    }
    Ok(UnitaryMatrix::from_trusted(prod.adjoint()))
}

fn magic_basis() -> CMat {
    let h = FRAC_1_SQRT_2;
    CMat::from_row_slice(
        4,
        4,
        &[
            c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, h),
            c(0.0, 0.0), c(0.0, h), c(h, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, h), c(-h, 0.0), c(0.0, 0.0),
            c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -h),
        ],
    )
}

/// Splits `A = A₀ ⊗ A₁` for a local two-qubit unitary.
pub fn factor_local(a: &CMat) -> Result<(CMat, CMat)> {
    let block = |i: usize, j: usize| a.view((2 * i, 2 * j), (2, 2)).into_owned();
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for i in 0..2 {
        for j in 0..2 {
            let n = block(i, j).norm();
            if n > best {
                (bi, bj, best) = (i, j, n);
            }
        }
    }
    let b0 = block(bi, bj);
    let scale = (b0.norm_squared() / 2.0).sqrt();
    let a1 = b0 / c(scale, 0.0);
    let a0 = CMat::from_fn(2, 2, |i, j| (a1.adjoint() * block(i, j)).trace() / 2.0);
    if (kron2(&a0, &a1) - a).norm() > 1e-8 {
        return Err(Error::InvalidInput("matrix is not a tensor product of single-qubit unitaries".into()));
    }
    Ok((a0, a1))
}

/// KAK decomposition of a two-qubit unitary into three CNOTs and four local layers.
pub fn kak_decompose(u: &UnitaryMatrix) -> Result<Decomposition> {
    if u.dim() != 4 {
        return Err(Error::InvalidInput("KAK decomposition needs a 4×4 unitary".into()));
    }
    let det = linalg::det(u.matrix());
    let su = u.matrix() / C64::from_polar(1.0, det.arg() / 4.0);
    let mb = magic_basis();
    let ub = mb.adjoint() * &su * &mb;
    let m2 = ub.transpose() * &ub;
    let re = m2.map(|z| z.re);
    let im = m2.map(|z| z.im);
    let mut basis_o = None;
    #[allow(clippy::approx_constant)]
    for mix in [0.618_033_988_749_895, -1.324_717_957_244_746, 0.414_213_562_373_095, 2.718_281_828_459_045] {
        let eig = SymmetricEigen::new(&re + &im * mix);
        let o = eig.eigenvectors;
        let oc = o.map(|x| c(x, 0.0));
        let diag = oc.transpose() * &m2 * &oc;
        let off: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| diag[(i, j)].norm_sqr()).sum();
        if off.sqrt() < 1e-9 {
            basis_o = Some((o, diag));
            break;
        }
    }
    let (mut o, diag) = basis_o.ok_or_else(|| Error::InvalidInput("KAK: failed to diagonalize UᵀU".into()))?;
    if o.determinant() < 0.0 {
        for r in 0..4 {
            o[(r, 0)] = -o[(r, 0)];
        }
    }
    let o2 = o.transpose().map(|x| c(x, 0.0));
    let mut dvals: Vec<C64> = (0..4).map(|k| diag[(k, k)].sqrt()).collect();
    let dinv = |dv: &[C64]| CMat::from_fn(4, 4, |i, j| if i == j { c(1.0, 0.0) / dv[i] } else { c(0.0, 0.0) });
    let mut o1 = &ub * o2.transpose() * dinv(&dvals);
    if o1.map(|z| z.re).determinant() < 0.0 {
        dvals[0] = -dvals[0];
        o1 = &ub * o2.transpose() * dinv(&dvals);
    }
    if o1.iter().any(|z| z.im.abs() > 1e-7) {
        return Err(Error::InvalidInput("KAK: outer factor is not real orthogonal".into()));
    }
    let a = &mb * &o1 * mb.adjoint();
    let b = &mb * &o2 * mb.adjoint();
    let (a0, a1) = factor_local(&a)?;
    let (b0, b1) = factor_local(&b)?;

    // Solve diag phases = a·XX + b·YY + c·ZZ + γ in the magic basis.
    let xx = PauliString(vec![Pauli::X, Pauli::X]).matrix();
    let yy = PauliString(vec![Pauli::Y, Pauli::Y]).matrix();
    let zz = PauliString(vec![Pauli::Z, Pauli::Z]).matrix();
    let dg = |m: &CMat| {
        let t = mb.adjoint() * m * &mb;
        (0..4).map(|k| t[(k, k)].re).collect::<Vec<_>>()
    };
    let (hx, hy, hz) = (dg(&xx), dg(&yy), dg(&zz));
    let sys = DMatrix::from_fn(4, 4, |k, j| match j {
        0 => hx[k],
        1 => hy[k],
        2 => hz[k],
        _ => 1.0,
    });
    let lam = nalgebra::DVector::from_iterator(4, dvals.iter().map(|z| z.arg()));
    let sol = sys.lu().solve(&lam).ok_or_else(|| Error::InvalidInput("KAK: singular coefficient system".into()))?;
    let (ka, kb, kc) = (sol[0], sol[1], sol[2]);

    let (t1, t2, t3) = (-FRAC_PI_2 - 2.0 * kc, -2.0 * ka - FRAC_PI_2, FRAC_PI_2 + 2.0 * kb);
    let mut dec = Decomposition::default();
    dec.push_local(b0, b1);
    dec.push_local(CMat::identity(2, 2), rz(FRAC_PI_2));
    dec.0.push(Step::Cnot { control: 1 });
    dec.push_local(rz(t1), ry(t2));
    dec.0.push(Step::Cnot { control: 0 });
    dec.push_local(CMat::identity(2, 2), ry(t3));
    dec.0.push(Step::Cnot { control: 1 });
    dec.push_local(rz(-FRAC_PI_2), CMat::identity(2, 2));
    dec.push_local(a0, a1);
    if !linalg::equal_up_to_phase(&dec.unitary(), u.matrix(), 1e-7) {
        return Err(Error::InvalidInput("KAK reconstruction failed".into()));
    }
    Ok(dec)
}

/// Ideal matrix of a Pauli layer.
pub fn pauli_layer_matrix(p: (Pauli, Pauli)) -> CMat {
    kron2(&p.0.matrix(), &p.1.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use std::collections::HashSet;

    fn test_rng(k: u64) -> crate::rng::Stream {
        stream(42, Domain::Test, &[k])
    }

    #[test]
    fn single_qubit_clifford_group_has_24_elements() {
        assert_eq!(C1.len(), 24);
        assert!(C1.iter().all(|el| el.tableau.preserves_symplectic_form()));
    }

    #[test]
    fn closure_enumeration_gives_11520() {
        let h = hadamard();
        let s = phase_s();
        let id = CMat::identity(2, 2);
        let gens = [kron2(&h, &id), kron2(&id, &h), kron2(&s, &id), kron2(&id, &s), cnot(0)];
        let mut seen: HashSet<Tableau> = HashSet::new();
        let mut frontier = vec![CMat::identity(4, 4)];
        seen.insert(Tableau::identity(2));
        while let Some(u) = frontier.pop() {
            for g in &gens {
                let v = g * &u;
                if seen.insert(Tableau::from_unitary(&v).unwrap()) {
                    frontier.push(v);
                }
            }
        }
        assert_eq!(seen.len(), CLIFFORD2_ORDER);
        // the class form reaches every element exactly once
        let class: HashSet<Tableau> = (0..CLIFFORD2_ORDER)
            .map(|i| Tableau::from_unitary(&clifford2_class_circuit(i).unitary()).unwrap())
            .collect();
        assert_eq!(class.len(), CLIFFORD2_ORDER);
        assert!(class.is_subset(&seen));
    }

    #[test]
    fn mean_cnot_count_is_one_and_a_half() {
        let total: usize = (0..CLIFFORD2_ORDER).map(|i| clifford2_class_circuit(i).cnot_count()).sum();
        assert_eq!(total as f64 / CLIFFORD2_ORDER as f64, 1.5);
    }

    #[test]
    fn sampled_clifford_maps_xi_to_signed_pauli() {
        let mut rng = test_rng(1);
        for _ in 0..50 {
            let el = sample_clifford2(&mut rng);
            let xi = "XI".parse::<PauliString>().unwrap().matrix();
            let conj = el.unitary.matrix() * xi * el.unitary.matrix().adjoint();
            let img = identify_pauli(&conj, 2).expect("signed Pauli");
            assert!(img.sign().is_some());
            assert!(el.tableau.preserves_symplectic_form());
        }
    }

    #[test]
    fn tableau_conjugation_matches_matrices() {
        let mut rng = test_rng(2);
        for _ in 0..20 {
            let el = sample_clifford2(&mut rng);
            for idx in 1..16 {
                let p = PhasedPauli::from_string(&PauliString::from_index(idx, 2));
                let img = el.tableau.conjugate(&p);
                let lhs = el.unitary.matrix() * p.string().matrix() * el.unitary.matrix().adjoint();
                let phase = c(0.0, 1.0).powu(img.phase as u32);
                assert!((lhs - img.string().matrix() * phase).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tableau_composition_matches_product() {
        let mut rng = test_rng(3);
        let a = sample_clifford2(&mut rng);
        let b = sample_clifford2(&mut rng);
        let prod = Tableau::from_unitary(&(a.unitary.matrix() * b.unitary.matrix())).unwrap();
        assert_eq!(a.tableau.then_after(&b.tableau), prod);
    }

    #[test]
    fn haar_samples_are_special_unitary() {
        let u = sample_haar_su4(&mut test_rng(4));
        assert!(linalg::is_unitary(u.matrix(), 1e-12));
        assert!((linalg::det(u.matrix()) - c(1.0, 0.0)).norm() < 1e-12);
        let v = sample_haar_su4(&mut test_rng(5));
        assert!((u.matrix() - v.matrix()).norm() > 1e-3);
    }

    #[test]
    fn haar_second_moment() {
        let mut rng = test_rng(6);
        let n = 10_000;
        let vals: Vec<f64> = (0..n).map(|_| sample_haar_su4(&mut rng).matrix()[(0, 0)].norm_sqr()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        // |u₀₀|² ~ Beta(1, 3): variance 3/80
        let sigma = (3.0f64 / 80.0 / n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn compile_reconstructs_targets() {
        let id = UnitaryMatrix::identity(2);
        let h = UnitaryMatrix::new(hadamard()).unwrap();
        let x = UnitaryMatrix::new(x90()).unwrap();
        for u in [id, h, x] {
            let g = compile_single_qubit(&u).unwrap();
            assert!(linalg::equal_up_to_phase(&g.unitary(), u.matrix(), 1e-10));
        }
        let mut rng = test_rng(7);
        for _ in 0..200 {
            let u = sample_haar(&mut rng, 2);
            let g = compile_single_qubit(&u).unwrap();
            assert!(linalg::equal_up_to_phase(&g.unitary(), u.matrix(), 1e-10));
        }
        for el in C1.iter() {
            let g = compile_single_qubit(&el.unitary).unwrap();
            assert!(linalg::equal_up_to_phase(&g.unitary(), el.unitary.matrix(), 1e-10));
        }
    }

    #[test]
    fn kak_reconstructs_haar_and_clifford() {
        let mut rng = test_rng(8);
        for _ in 0..100 {
            let u = sample_haar_su4(&mut rng);
            let dec = kak_decompose(&u).unwrap();
            assert_eq!(dec.cnot_count(), 3);
        }
        for u in [cnot(0), cnot(1), CMat::identity(4, 4)] {
            kak_decompose(&UnitaryMatrix::new(u).unwrap()).unwrap();
        }
        for i in (0..CLIFFORD2_ORDER).step_by(997) {
            kak_decompose(&clifford2_element(i).unitary).unwrap();
        }
    }

    #[test]
    fn invert_sequence_examples() {
        let mut rng = test_rng(9);
        let g = sample_haar_su4(&mut rng);
        assert!((invert_sequence(std::slice::from_ref(&g)).unwrap().matrix() - g.matrix().adjoint()).norm() < 1e-14);
        let seq: Vec<UnitaryMatrix> = (0..5).map(|_| sample_clifford2(&mut rng).unitary).collect();
        let inv = invert_sequence(&seq).unwrap();
        let mut ptm = inv.to_ptm();
        for g in seq.iter().rev() {
            ptm = crate::channels::compose(&ptm, &g.to_ptm()).unwrap();
        }
        assert!(ptm.frobenius_distance(&crate::channels::PauliTransferMatrix::identity(4)) < 1e-12);
        assert!(Tableau::from_unitary(inv.matrix()).is_ok());
        assert!(invert_sequence(&[]).is_err());
    }

    #[test]
    fn correction_synthesis_round_trip() {
        let mut rng = test_rng(10);
        for _ in 0..20 {
            let el = sample_clifford2(&mut rng);
            let inv = el.adjoint();
            assert!(linalg::equal_up_to_phase(&inv.decomposition().unitary(), inv.unitary.matrix(), 1e-10));
        }
    }

    #[test]
    fn pauli_layer_is_self_inverse() {
        let mut rng = test_rng(11);
        for _ in 0..20 {
            let m = pauli_layer_matrix(sample_pauli_layer(&mut rng));
            assert!(linalg::equal_up_to_phase(&(&m * &m), &CMat::identity(4, 4), 1e-14));
        }
    }

    #[test]
    fn local_layer_ptm_is_tensor_of_parts() {
        let (a, b) = sample_local_clifford(&mut test_rng(12));
        let joint = UnitaryMatrix::new(kron2(a.unitary.matrix(), b.unitary.matrix())).unwrap().to_ptm();
        let tensor = crate::channels::PauliTransferMatrix::tensor(&a.unitary.to_ptm(), &b.unitary.to_ptm()).unwrap();
        assert!(joint.frobenius_distance(&tensor) < 1e-12);
    }
}
