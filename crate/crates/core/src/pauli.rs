//! Pauli operators, their matrices, and phase-tracked products.
//!
//! Multi-qubit labels are written left to right starting at qubit 0, which is
//! the most significant tensor factor: `"XZ"` is `X ⊗ Z`. Basis indices follow
//! the same lexicographic order, `index = 4·p₀ + p₁` with `I, X, Y, Z = 0..4`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Pauli {
        Pauli::ALL[i & 3]
    }

    /// Symplectic bits `(x, z)`; `Y` carries both.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn matrix(self) -> CMat {
        let o = c(0.0, 0.0);
        let l = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        match self {
            Pauli::I => DMatrix::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    /// Product `self · other = i^phase · result`.
    pub fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn commutes_with(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

/// Unsigned multi-qubit Pauli label such as `ZZ` or `XI`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Self {
        PauliString(ops)
    }

    pub fn identity(n: usize) -> Self {
        PauliString(vec![Pauli::I; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|p| *p == Pauli::I)
    }

    /// Lexicographic basis index.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| acc * 4 + p.index())
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        let mut ops = vec![Pauli::I; n];
        let mut rest = index;
        for q in (0..n).rev() {
            ops[q] = Pauli::from_index(rest % 4);
            rest /= 4;
        }
        PauliString(ops)
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|p| **p != Pauli::I).count()
    }

    pub fn matrix(&self) -> CMat {
        self.0
            .iter()
            .fold(DMatrix::from_element(1, 1, c(1.0, 0.0)), |acc, p| {
                acc.kronecker(&p.matrix())
            })
    }

    /// All `4^n − 1` non-identity strings in basis order.
    pub fn non_identity(n: usize) -> Vec<PauliString> {
        (1..4usize.pow(n as u32))
            .map(|i| PauliString::from_index(i, n))
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .trim()
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidInput(format!(
                    "`{other}` is not a Pauli label in `{s}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if ops.is_empty() || ops.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "Pauli string `{s}` must act on one or two qubits"
            )));
        }
        Ok(PauliString(ops))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pauli string with an overall phase `i^phase`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub ops: Vec<Pauli>,
    pub phase: u8,
}

impl PhasedPauli {
    pub fn identity(n: usize) -> Self {
        PhasedPauli { ops: vec![Pauli::I; n], phase: 0 }
    }

    pub fn from_string(p: &PauliString) -> Self {
        PhasedPauli { ops: p.0.clone(), phase: 0 }
    }

    pub fn mul(&self, other: &PhasedPauli) -> PhasedPauli {
        debug_assert_eq!(self.ops.len(), other.ops.len());
        let mut phase = self.phase + other.phase;
        let ops = self
            .ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| {
                let (k, p) = a.mul(*b);
                phase += k;
                p
            })
            .collect();
        PhasedPauli { ops, phase: phase % 4 }
    }

    /// `Some(sign)` when the operator is Hermitian (phase ±1).
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn string(&self) -> PauliString {
        PauliString(self.ops.clone())
    }
}

/// Single-qubit Pauli matrices indexed by [`Pauli::index`].
pub static PAULI_1Q: Lazy<Vec<CMat>> = Lazy::new(|| Pauli::ALL.iter().map(|p| p.matrix()).collect());

/// Two-qubit Pauli matrices in lexicographic order.
pub static PAULI_2Q: Lazy<Vec<CMat>> = Lazy::new(|| {
    (0..16)
        .map(|i| PauliString::from_index(i, 2).matrix())
        .collect()
});

/// Unnormalized Pauli basis matrices for dimension `d` (2 or 4).
pub fn basis(d: usize) -> &'static [CMat] {
    match d {
        2 => &PAULI_1Q,
        4 => &PAULI_2Q,
        _ => panic!("Pauli basis only defined for d = 2 or 4, got {d}"),
    }
}

/// Sparse form of a Pauli matrix: row `k` has a single nonzero at `cols[k]`.
#[derive(Debug, Clone)]
pub(crate) struct SparsePauli {
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

pub(crate) static SPARSE_1Q: Lazy<Vec<SparsePauli>> = Lazy::new(|| sparse_of(basis(2)));
pub(crate) static SPARSE_2Q: Lazy<Vec<SparsePauli>> = Lazy::new(|| sparse_of(basis(4)));

fn sparse_of(mats: &[CMat]) -> Vec<SparsePauli> {
    mats.iter()
        .map(|m| {
            let d = m.nrows();
            let mut cols = Vec::with_capacity(d);
            let mut vals = Vec::with_capacity(d);
            for k in 0..d {
                let col = (0..d).find(|&j| m[(k, j)].norm() > 0.5).expect("Pauli row has a nonzero");
                cols.push(col);
                vals.push(m[(k, col)]);
            }
            SparsePauli { cols, vals }
        })
        .collect()
}

pub(crate) fn sparse_basis(d: usize) -> &'static [SparsePauli] {
    match d {
        2 => &SPARSE_1Q,
        4 => &SPARSE_2Q,
        _ => panic!("Pauli basis only defined for d = 2 or 4, got {d}"),
    }
}

impl SparsePauli {
    /// `Tr(P · M)`.
    pub fn trace_with(&self, m: &CMat) -> C64 {
        self.cols
            .iter()
            .zip(&self.vals)
            .enumerate()
            .map(|(k, (&col, &v))| v * m[(col, k)])
            .sum()
    }
}
