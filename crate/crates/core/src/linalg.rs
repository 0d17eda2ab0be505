//! Small dense complex linear-algebra helpers shared by the channel code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::pauli::{c, CMat, C64};

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Frobenius distance `‖U†U − I‖`.
pub fn unitarity_defect(m: &CMat) -> f64 {
    let d = m.nrows();
    (m.adjoint() * m - CMat::identity(d, d)).norm()
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    m.is_square() && unitarity_defect(m) <= tol
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(d, d, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Eigenphases in `(−π, π]` and eigenvectors of a unitary matrix.
///
/// The unitary is normal, so its Hermitian and anti-Hermitian parts commute
/// and a generic real combination of them shares its eigenvectors.
pub fn unitary_eigen(u: &CMat) -> Result<(Vec<f64>, CMat)> {
    let d = u.nrows();
    let herm = (u + u.adjoint()) * c(0.5, 0.0);
    let anti = (u - u.adjoint()) * c(0.0, -0.5);
    // arbitrary incommensurate weights; any one that splits the spectrum works
    #[allow(clippy::approx_constant)]
    for mix in [0.754_877_666_246_692_7, -0.318_309_886_183_791, 1.414_213_562_373_095] {
        let combined = &herm + &anti * c(mix, 0.0);
        let (_, vecs) = hermitian_eigen(&combined);
        let diag = vecs.adjoint() * u * &vecs;
        let mut off = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    off += diag[(i, j)].norm_sqr();
                }
            }
        }
        if off.sqrt() < 1e-9 {
            let phases = (0..d)
                .map(|k| {
                    let t = diag[(k, k)].arg();
                    if t <= -std::f64::consts::PI + 1e-12 {
                        std::f64::consts::PI
                    } else {
                        t
                    }
                })
                .collect();
            return Ok((phases, vecs));
        }
    }
    Err(Error::InvalidInput(
        "could not diagonalize unitary (matrix is not normal)".into(),
    ))
}

/// Principal-branch power `U^a` of a unitary.
///
/// Eigenvalues sitting on the branch cut at −1 are taken with phase `+π`
/// and reported through the log.
pub fn unitary_power(u: &CMat, a: f64) -> Result<CMat> {
    let (phases, vecs) = unitary_eigen(u)?;
    if phases
        .iter()
        .any(|t| (t.abs() - std::f64::consts::PI).abs() < 1e-9)
    {
        log::debug!("fractional power taken on the branch cut (eigenvalue −1); using phase +π");
    }
    let d = u.nrows();
    let diag = CMat::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, a * phases[i])
        } else {
            c(0.0, 0.0)
        }
    });
    Ok(&vecs * diag * vecs.adjoint())
}

/// `exp(i·θ·H)` for Hermitian `H`.
pub fn expm_i_hermitian(h: &CMat, theta: f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(h);
    let d = h.nrows();
    let diag = CMat::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, theta * vals[i])
        } else {
            c(0.0, 0.0)
        }
    });
    &vecs * diag * vecs.adjoint()
}

/// Polar decomposition `K = U·P` with `U` unitary and `P ⪰ 0`.
pub fn polar(k: &CMat) -> (CMat, CMat) {
    let svd = k.clone().svd(true, true);
    let w = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = DMatrix::from_diagonal(&svd.singular_values.map(|s| c(s, 0.0)));
    let unitary = &w * &v_t;
    let positive = v_t.adjoint() * sigma * &v_t;
    (unitary, positive)
}

/// Determinant of a small complex matrix.
pub fn det(m: &CMat) -> C64 {
    m.clone().determinant()
}

/// Removes the global phase so that the first entry of largest magnitude in
/// column-major order is real and positive.
pub fn canonical_phase(m: &CMat) -> CMat {
    let mut best = c(0.0, 0.0);
    for z in m.iter() {
        if z.norm() > best.norm() + 1e-9 {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        return m.clone();
    }
    let phase = best.conj() / best.norm();
    m * phase
}

/// `|Tr(A† B)| / d`, the phase-insensitive overlap of two unitaries.
pub fn phase_free_overlap(a: &CMat, b: &CMat) -> f64 {
    (a.adjoint() * b).trace().norm() / a.nrows() as f64
}

/// True if `a` and `b` agree up to a global phase.
pub fn equal_up_to_phase(a: &CMat, b: &CMat, tol: f64) -> bool {
    let t = (a.adjoint() * b).trace();
    if t.norm() < 1e-12 {
        return false;
    }
    let phase = t / t.norm();
    (a * phase - b).norm() <= tol
}
