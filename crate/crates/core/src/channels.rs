//! Quantum channels on one or two qubits in the normalized Pauli basis.
//!
//! A [`PauliTransferMatrix`] `R` acts on Pauli vectors `r_i = Tr(σ_i ρ)` with
//! `σ_i = P_i/√d`, so `R_ij = Tr(P_i E(P_j))/d`. Composition of channels is
//! the matrix product, and the trace of `R` gives the process fidelity.
//! Values produced from fitted data may leave the physical range; the
//! functionals here never clamp.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::{basis, c, sparse_basis, CMat, C64};

/// Tolerance used when accepting a matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-9;
/// Most negative Choi eigenvalue still considered completely positive.
pub const CP_TOL: f64 = 1e-10;

fn check_dim(d: usize) -> Result<()> {
    if d == 2 || d == 4 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "Hilbert-space dimension must be 2 or 4, got {d}"
        )))
    }
}

/// A `d×d` unitary with `d ∈ {2, 4}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    mat: CMat,
}

impl UnitaryMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        check_dim(mat.nrows())?;
        if !mat.is_square() {
            return Err(Error::InvalidInput("unitary must be square".into()));
        }
        let defect = linalg::unitarity_defect(&mat);
        if defect > UNITARY_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not unitary (‖U†U − I‖ = {defect:.3e})"
            )));
        }
        Ok(UnitaryMatrix { mat })
    }

    pub(crate) fn from_trusted(mat: CMat) -> Self {
        debug_assert!(linalg::is_unitary(&mat, 1e-8));
        UnitaryMatrix { mat }
    }

    pub fn identity(d: usize) -> Self {
        UnitaryMatrix { mat: CMat::identity(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        UnitaryMatrix { mat: self.mat.adjoint() }
    }

    /// `self · other` (apply `other` first).
    pub fn then_after(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix { mat: &self.mat * &other.mat }
    }

    pub fn kron(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix { mat: self.mat.kronecker(&other.mat) }
    }

    pub fn to_ptm(&self) -> PauliTransferMatrix {
        unitary_to_ptm(self)
    }

    /// Principal-branch fractional power.
    pub fn power(&self, a: f64) -> Result<UnitaryMatrix> {
        linalg::unitary_power(&self.mat, a).map(|mat| UnitaryMatrix { mat })
    }

    pub fn equal_up_to_phase(&self, other: &UnitaryMatrix, tol: f64) -> bool {
        linalg::equal_up_to_phase(&self.mat, &other.mat, tol)
    }
}

/// Real `d²×d²` Liouville representation in the normalized Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTransferMatrix {
    dim: usize,
    entries: DMatrix<f64>,
}

impl PauliTransferMatrix {
    pub fn new(dim: usize, entries: DMatrix<f64>) -> Result<Self> {
        check_dim(dim)?;
        let n = dim * dim;
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(PauliTransferMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        PauliTransferMatrix { dim, entries: DMatrix::identity(n, n) }
    }

    /// Depolarizing channel `ρ ↦ pρ + (1−p)·I/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Self {
        let n = dim * dim;
        let mut entries = DMatrix::identity(n, n) * p;
        entries[(0, 0)] = 1.0;
        PauliTransferMatrix { dim, entries }
    }

    /// Pauli channel from Pauli fidelities `λ_P` (index 0 is forced to 1).
    pub fn pauli_diagonal(dim: usize, fidelities: &[f64]) -> Result<Self> {
        let n = dim * dim;
        if fidelities.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: fidelities.len() });
        }
        let mut entries = DMatrix::zeros(n, n);
        entries[(0, 0)] = 1.0;
        for i in 1..n {
            entries[(i, i)] = fidelities[i];
        }
        PauliTransferMatrix::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `(d²−1)×(d²−1)` block acting on traceless operators.
    pub fn unital_block(&self) -> DMatrix<f64> {
        let n = self.dim * self.dim;
        self.entries.view((1, 1), (n - 1, n - 1)).into_owned()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let n = self.dim * self.dim;
        (self.entries[(0, 0)] - 1.0).abs() <= tol && (1..n).all(|j| self.entries[(0, j)].abs() <= tol)
    }

    /// Transpose, which inverts unitary channels.
    pub fn transpose(&self) -> Self {
        PauliTransferMatrix { dim: self.dim, entries: self.entries.transpose() }
    }

    pub fn try_inverse(&self) -> Result<Self> {
        self.entries
            .clone()
            .try_inverse()
            .map(|entries| PauliTransferMatrix { dim: self.dim, entries })
            .ok_or_else(|| Error::InvalidChannel("PTM is singular".into()))
    }

    /// PTM of `A ⊗ B` for two single-qubit channels.
    pub fn tensor(a: &PauliTransferMatrix, b: &PauliTransferMatrix) -> Result<Self> {
        if a.dim != 2 || b.dim != 2 {
            return Err(Error::InvalidInput("tensor product is defined for single-qubit PTMs".into()));
        }
        Ok(PauliTransferMatrix { dim: 4, entries: a.entries.kronecker(&b.entries) })
    }

    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        let n = self.dim * self.dim;
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, s) in state.iter().enumerate() {
                acc += self.entries[(i, j)] * s;
            }
            *o = acc;
        }
        out
    }

    pub fn frobenius_distance(&self, other: &PauliTransferMatrix) -> f64 {
        (&self.entries - &other.entries).norm()
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn after(&self, other: &PauliTransferMatrix) -> Result<PauliTransferMatrix> {
        compose(self, other)
    }

    pub fn scale_add(&self, weight: f64, other: &PauliTransferMatrix) -> PauliTransferMatrix {
        PauliTransferMatrix { dim: self.dim, entries: &self.entries + &other.entries * weight }
    }

    pub(crate) fn from_trusted(dim: usize, entries: DMatrix<f64>) -> Self {
        PauliTransferMatrix { dim, entries }
    }
}

/// Choi state `J = (1/d) Σ |k⟩⟨l| ⊗ E(|k⟩⟨l|)`, input factor first, trace 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    entries: CMat,
}

impl ChoiMatrix {
    pub fn new(dim: usize, entries: CMat) -> Result<Self> {
        check_dim(dim)?;
        let n = dim * dim;
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: entries.nrows() });
        }
        let herm = (&entries - entries.adjoint()).norm();
        if herm > 1e-8 {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix is not Hermitian (‖J − J†‖ = {herm:.3e})"
            )));
        }
        Ok(ChoiMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// Eigenvalues sorted descending with their eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        linalg::hermitian_eigen(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = self.eigen();
        vals.last().copied().unwrap_or(0.0)
    }
}

/// Kraus operators ordered by decreasing weight.
#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<CMat>,
    /// Choi eigenvalues, i.e. `Tr(K†K)/d`.
    pub weights: Vec<f64>,
}

impl KrausSet {
    pub fn dim(&self) -> usize {
        self.operators.first().map(|k| k.nrows()).unwrap_or(0)
    }

    /// `‖Σ K†K − I‖`.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.dim();
        let sum = self
            .operators
            .iter()
            .fold(CMat::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        (sum - CMat::identity(d, d)).norm()
    }

    pub fn to_ptm(&self) -> PauliTransferMatrix {
        kraus_to_ptm(&self.operators)
    }
}

/// Density operator on one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    dim: usize,
    entries: CMat,
}

impl DensityState {
    pub fn new(entries: CMat) -> Result<Self> {
        let dim = entries.nrows();
        check_dim(dim)?;
        let tr = entries.trace();
        if (tr - c(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::InvalidInput(format!("state trace is {tr}, expected 1")));
        }
        if (&entries - entries.adjoint()).norm() > 1e-9 {
            return Err(Error::InvalidInput("state is not Hermitian".into()));
        }
        let (vals, _) = linalg::hermitian_eigen(&entries);
        if vals.iter().any(|v| *v < -CP_TOL) {
            return Err(Error::InvalidInput("state has a negative eigenvalue".into()));
        }
        Ok(DensityState { dim, entries })
    }

    /// Computational basis state `|index⟩⟨index|`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut entries = CMat::zeros(dim, dim);
        entries[(index, index)] = c(1.0, 0.0);
        DensityState { dim, entries }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityState { dim, entries: CMat::identity(dim, dim) * c(1.0 / dim as f64, 0.0) }
    }

    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let v = v / c(norm, 0.0);
        DensityState::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// Components `Tr(σ_i ρ)` in the normalized Pauli basis.
    pub fn pauli_vector(&self) -> Vec<f64> {
        let scale = 1.0 / (self.dim as f64).sqrt();
        sparse_basis(self.dim)
            .iter()
            .map(|p| p.trace_with(&self.entries).re * scale)
            .collect()
    }

    pub fn from_pauli_vector(dim: usize, vector: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        if vector.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: vector.len() });
        }
        let scale = 1.0 / (dim as f64).sqrt();
        let entries = basis(dim)
            .iter()
            .zip(vector)
            .fold(CMat::zeros(dim, dim), |acc, (p, r)| acc + p * c(r * scale, 0.0));
        Ok(DensityState { dim, entries })
    }

    /// Generalized Bloch vector `n_i = Tr(P_i ρ)` over non-identity Paulis.
    pub fn bloch_vector(&self) -> Vec<f64> {
        sparse_basis(self.dim)
            .iter()
            .skip(1)
            .map(|p| p.trace_with(&self.entries).re)
            .collect()
    }

    pub fn evolve_unitary(&self, u: &UnitaryMatrix) -> DensityState {
        DensityState { dim: self.dim, entries: u.matrix() * &self.entries * u.matrix().adjoint() }
    }

    pub fn evolve_ptm(&self, ptm: &PauliTransferMatrix) -> DensityState {
        let v = ptm.apply(&self.pauli_vector());
        DensityState::from_pauli_vector(self.dim, &v).expect("dimension preserved")
    }
}

/// `ε = 1 − Tr[R]/d²`. Not clamped: non-physical inputs give values outside `[0, 1]`.
pub fn process_infidelity(ptm: &PauliTransferMatrix) -> f64 {
    let d2 = (ptm.dim * ptm.dim) as f64;
    1.0 - ptm.trace() / d2
}

/// Process fidelity `Tr[R]/d²`.
pub fn process_fidelity(ptm: &PauliTransferMatrix) -> f64 {
    1.0 - process_infidelity(ptm)
}

/// `p = 1 − d²/(d²−1)·ε`.
pub fn depolarizing_parameter_from_infidelity(eps: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    let d2 = (d * d) as f64;
    Ok(1.0 - d2 / (d2 - 1.0) * eps)
}

/// `ε = (d²−1)/d²·(1 − p)`.
pub fn infidelity_from_depolarizing_parameter(p: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    let d2 = (d * d) as f64;
    Ok((d2 - 1.0) / d2 * (1.0 - p))
}

/// `u = Tr[E_u† E_u]/(d²−1)` over the unital block.
pub fn unitarity(ptm: &PauliTransferMatrix) -> f64 {
    let block = ptm.unital_block();
    let n = block.nrows() as f64;
    block.norm_squared() / n
}

/// `a ∘ b` as the PTM product `a·b`.
pub fn compose(a: &PauliTransferMatrix, b: &PauliTransferMatrix) -> Result<PauliTransferMatrix> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    Ok(PauliTransferMatrix { dim: a.dim, entries: &a.entries * &b.entries })
}

pub fn unitary_to_ptm(u: &UnitaryMatrix) -> PauliTransferMatrix {
    let d = u.dim();
    let n = d * d;
    let paulis = basis(d);
    let sparse = sparse_basis(d);
    let m = u.matrix();
    let m_dag = m.adjoint();
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        let conj = m * &paulis[j] * &m_dag;
        for i in 0..n {
            entries[(i, j)] = sparse[i].trace_with(&conj).re / d as f64;
        }
    }
    PauliTransferMatrix { dim: d, entries }
}

pub fn kraus_to_ptm(ops: &[CMat]) -> PauliTransferMatrix {
    let d = ops[0].nrows();
    let n = d * d;
    let paulis = basis(d);
    let sparse = sparse_basis(d);
    let mut entries = DMatrix::zeros(n, n);
    for k in ops {
        let k_dag = k.adjoint();
        for j in 0..n {
            let image = k * &paulis[j] * &k_dag;
            for i in 0..n {
                entries[(i, j)] += sparse[i].trace_with(&image).re / d as f64;
            }
        }
    }
    PauliTransferMatrix { dim: d, entries }
}

/// `J = (1/d²) Σ_ij R_ij P_jᵀ ⊗ P_i`.
pub fn ptm_to_choi(ptm: &PauliTransferMatrix) -> ChoiMatrix {
    let d = ptm.dim;
    let n = d * d;
    let paulis = basis(d);
    let transposed: Vec<CMat> = paulis.iter().map(|p| p.transpose()).collect();
    let mut entries = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let r = ptm.entries[(i, j)];
            if r.abs() < 1e-300 {
                continue;
            }
            entries += transposed[j].kronecker(&paulis[i]) * c(r / n as f64, 0.0);
        }
    }
    ChoiMatrix { dim: d, entries }
}

/// `R_ij = Tr(J · (P_jᵀ ⊗ P_i))`.
pub fn choi_to_ptm(choi: &ChoiMatrix) -> PauliTransferMatrix {
    let d = choi.dim;
    let n = d * d;
    let paulis = basis(d);
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let op = paulis[j].transpose().kronecker(&paulis[i]);
            entries[(i, j)] = (&choi.entries * op).trace().re;
        }
    }
    PauliTransferMatrix { dim: d, entries }
}

/// Reshapes a Choi eigenvector (input index major) into `√(dλ)·K`.
pub(crate) fn kraus_from_eigenvector(d: usize, weight: f64, vector: &CMat, col: usize) -> CMat {
    let scale = (d as f64 * weight.max(0.0)).sqrt();
    CMat::from_fn(d, d, |a, k| vector[(k * d + a, col)] * c(scale, 0.0))
}

/// Kraus decomposition from the Choi eigensystem; rejects non-CP inputs.
pub fn choi_to_kraus(choi: &ChoiMatrix) -> Result<KrausSet> {
    let d = choi.dim;
    let (vals, vecs) = choi.eigen();
    if let Some(min) = vals.last() {
        if *min < -CP_TOL {
            return Err(Error::InvalidChannel(format!(
                "Choi matrix has eigenvalue {min:.3e} below −{CP_TOL:e}"
            )));
        }
    }
    let mut operators = Vec::new();
    let mut weights = Vec::new();
    for (col, &w) in vals.iter().enumerate() {
        if w <= 1e-14 {
            continue;
        }
        operators.push(kraus_from_eigenvector(d, w, &vecs, col));
        weights.push(w);
    }
    Ok(KrausSet { operators, weights })
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityState) -> f64 {
    let m = rho.entries();
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Unitary channel `e^{iθG}` for a Pauli generator given as a matrix.
pub fn pauli_rotation(generator: &CMat, theta: f64) -> UnitaryMatrix {
    UnitaryMatrix::from_trusted(linalg::expm_i_hermitian(generator, theta))
}

#[derive(Serialize, Deserialize)]
struct PtmJson {
    dim: usize,
    basis: String,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChoiJson {
    dim: usize,
    basis: String,
    entries: Vec<[f64; 2]>,
}

const BASIS_TAG: &str = "pauli-normalized";

impl Serialize for PauliTransferMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim * self.dim;
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[(i, j)])
            .collect();
        PtmJson { dim: self.dim, basis: BASIS_TAG.into(), entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PauliTransferMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PtmJson::deserialize(d)?;
        if raw.basis != BASIS_TAG {
            return Err(D::Error::custom(format!("unsupported basis `{}`", raw.basis)));
        }
        let n = raw.dim * raw.dim;
        if raw.entries.len() != n * n {
            return Err(D::Error::custom("entries length must be (dim²)²"));
        }
        PauliTransferMatrix::new(raw.dim, DMatrix::from_row_slice(n, n, &raw.entries))
            .map_err(D::Error::custom)
    }
}

impl Serialize for ChoiMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim * self.dim;
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| [self.entries[(i, j)].re, self.entries[(i, j)].im])
            .collect();
        ChoiJson { dim: self.dim, basis: BASIS_TAG.into(), entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChoiMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ChoiJson::deserialize(d)?;
        let n = raw.dim * raw.dim;
        if raw.entries.len() != n * n {
            return Err(D::Error::custom("entries length must be (dim²)²"));
        }
        let flat: Vec<C64> = raw.entries.iter().map(|[re, im]| c(*re, *im)).collect();
        ChoiMatrix::new(raw.dim, CMat::from_row_slice(n, n, &flat)).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn zz() -> CMat {
        "ZZ".parse::<PauliString>().unwrap().matrix()
    }

    fn unitary_trace_infidelity(u: &UnitaryMatrix) -> f64 {
        let d = u.dim() as f64;
        1.0 - (u.matrix().trace().norm() / d).powi(2)
    }

    #[test]
    fn identity_has_zero_infidelity() {
        assert_eq!(process_infidelity(&PauliTransferMatrix::identity(4)), 0.0);
    }

    #[test]
    fn zz_rotation_infidelity_matches_trace_oracle() {
        let theta = 10f64.to_radians();
        let u = pauli_rotation(&zz(), theta);
        let eps = process_infidelity(&u.to_ptm());
        assert_abs_diff_eq!(eps, unitary_trace_infidelity(&u), epsilon = 1e-12);
        assert_abs_diff_eq!(eps, theta.sin().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(eps, 3.0154e-2, epsilon = 1e-6);
    }

    #[test]
    fn local_z_rotation_infidelity() {
        let z_i = "ZI".parse::<PauliString>().unwrap().matrix();
        let theta = 1f64.to_radians();
        let eps = process_infidelity(&pauli_rotation(&z_i, theta).to_ptm());
        assert_abs_diff_eq!(eps, theta.sin().powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(eps, 3.046e-4, epsilon = 1e-7);
    }

    #[test]
    fn depolarizing_relation_examples() {
        assert_eq!(depolarizing_parameter_from_infidelity(0.0, 4).unwrap(), 1.0);
        assert_abs_diff_eq!(depolarizing_parameter_from_infidelity(0.0075, 4).unwrap(), 0.992, epsilon = 1e-15);
        assert_abs_diff_eq!(infidelity_from_depolarizing_parameter(0.992, 2).unwrap(), 0.006, epsilon = 1e-15);
        assert!(depolarizing_parameter_from_infidelity(0.1, 3).is_err());
        for eps in [0.0, 0.013, 0.2, -0.01] {
            let p = depolarizing_parameter_from_infidelity(eps, 4).unwrap();
            assert_abs_diff_eq!(infidelity_from_depolarizing_parameter(p, 4).unwrap(), eps, epsilon = 1e-15);
        }
    }

    #[test]
    fn unitarity_examples() {
        assert_abs_diff_eq!(unitarity(&pauli_rotation(&zz(), 0.4).to_ptm()), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(unitarity(&PauliTransferMatrix::depolarizing(2, 0.9)), 0.81, epsilon = 1e-15);
        assert_eq!(unitarity(&PauliTransferMatrix::depolarizing(4, 0.0)), 0.0);
    }

    #[test]
    fn compose_examples() {
        let x = UnitaryMatrix::new(crate::pauli::Pauli::X.matrix()).unwrap().to_ptm();
        let id = PauliTransferMatrix::identity(2);
        assert_eq!(compose(&id, &x).unwrap(), x);
        let fwd = pauli_rotation(&zz(), 0.3).to_ptm();
        let back = pauli_rotation(&zz(), -0.3).to_ptm();
        let prod = compose(&fwd, &back).unwrap();
        assert!(prod.frobenius_distance(&PauliTransferMatrix::identity(4)) < 1e-12);
        let dep = compose(
            &PauliTransferMatrix::depolarizing(4, 0.9),
            &PauliTransferMatrix::depolarizing(4, 0.8),
        )
        .unwrap();
        assert!(dep.frobenius_distance(&PauliTransferMatrix::depolarizing(4, 0.72)) < 1e-14);
        assert!(compose(&id, &PauliTransferMatrix::identity(4)).is_err());
    }

    #[test]
    fn identity_choi_is_maximally_entangled_projector() {
        let choi = ptm_to_choi(&PauliTransferMatrix::identity(2));
        let mut expect = CMat::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            expect[(i, j)] = c(0.5, 0.0);
        }
        assert!((choi.entries() - expect).norm() < 1e-14);
    }

    #[test]
    fn unitary_choi_has_single_kraus() {
        let u = pauli_rotation(&zz(), 0.7);
        let kraus = choi_to_kraus(&ptm_to_choi(&u.to_ptm())).unwrap();
        assert_eq!(kraus.operators.len(), 1);
        assert!(linalg::equal_up_to_phase(&kraus.operators[0], u.matrix(), 1e-10));
    }

    #[test]
    fn non_cp_choi_is_rejected() {
        let mut r = PauliTransferMatrix::identity(2);
        r.entries[(1, 1)] = 1.5;
        assert!(matches!(choi_to_kraus(&ptm_to_choi(&r)), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn purity_examples() {
        assert_abs_diff_eq!(purity(&DensityState::basis_state(4, 0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(purity(&DensityState::maximally_mixed(4)), 0.25, epsilon = 1e-15);
        let theta = 0.3 * PI;
        let amp = [c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0)];
        let pure = DensityState::pure(&amp).unwrap();
        let mixed = pure.evolve_ptm(&PauliTransferMatrix::depolarizing(2, 0.6));
        let n2: f64 = mixed.bloch_vector().iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(purity(&mixed), 0.5 * (1.0 + n2), epsilon = 1e-14);
    }

    #[test]
    fn ptm_json_round_trip() {
        let ptm = pauli_rotation(&zz(), 0.2).to_ptm();
        let json = serde_json::to_string(&ptm).unwrap();
        assert!(json.contains("\"basis\":\"pauli-normalized\""));
        let back: PauliTransferMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ptm);
        let choi = ptm_to_choi(&ptm);
        let back: ChoiMatrix = serde_json::from_str(&serde_json::to_string(&choi).unwrap()).unwrap();
        assert!((back.entries() - choi.entries()).norm() < 1e-15);
    }
}
