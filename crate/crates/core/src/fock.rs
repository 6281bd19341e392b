//! Truncated qubit ⊗ cavity Hilbert space and its elementary operators.
//!
//! Basis ordering is fixed for the whole crate: the composite index of
//! `|q, n⟩` is `q * dim_cavity + n`, with `q = 0` for the ground state `|g⟩`
//! and `q = 1` for the excited state `|e⟩` of the qubit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Qubit factor index of `|g⟩`.
pub const QUBIT_G: usize = 0;
/// Qubit factor index of `|e⟩`.
pub const QUBIT_E: usize = 1;

/// Fock cutoff plus the qubit factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncatedSpace {
    n_fock: usize,
}

impl TruncatedSpace {
    /// Cavity states `|0⟩ … |n_fock⟩` tensored with one qubit.
    pub fn new(n_fock: usize) -> Result<Self> {
        if n_fock < 1 {
            return Err(Error::InvalidCutoff(n_fock));
        }
        Ok(Self { n_fock })
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn dim_cavity(&self) -> usize {
        self.n_fock + 1
    }

    pub fn dim_total(&self) -> usize {
        2 * self.dim_cavity()
    }

    /// Composite index of `|qubit, fock⟩`.
    pub fn index(&self, qubit: usize, fock: usize) -> usize {
        debug_assert!(qubit < 2 && fock <= self.n_fock);
        qubit * self.dim_cavity() + fock
    }

    /// Inverse of [`TruncatedSpace::index`].
    pub fn decompose(&self, index: usize) -> (usize, usize) {
        (index / self.dim_cavity(), index % self.dim_cavity())
    }

    /// Basis vector `|qubit, fock⟩`.
    pub fn basis_state(&self, qubit: usize, fock: usize) -> nalgebra::DVector<C64> {
        let mut v = nalgebra::DVector::zeros(self.dim_total());
        v[self.index(qubit, fock)] = C64::new(1.0, 0.0);
        v
    }
}

/// A dense operator on a [`TruncatedSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: TruncatedSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn from_matrix(space: TruncatedSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.dim_total();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: TruncatedSpace) -> Self {
        let d = space.dim_total();
        Self {
            space,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: TruncatedSpace) -> Self {
        let d = space.dim_total();
        Self {
            space,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `max|A − A†| < 1e-12 · max|A|`.
    pub fn is_hermitian(&self) -> bool {
        let scale = max_abs(&self.matrix);
        let dev = max_abs(&(&self.matrix - self.matrix.adjoint()));
        dev <= 1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * factor,
        }
    }

    pub fn add(&self, other: &Operator) -> Self {
        assert_eq!(self.space, other.space, "operators act on different spaces");
        Self {
            space: self.space,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Operator) -> Self {
        assert_eq!(self.space, other.space, "operators act on different spaces");
        Self {
            space: self.space,
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn mul(&self, other: &Operator) -> Self {
        assert_eq!(self.space, other.space, "operators act on different spaces");
        Self {
            space: self.space,
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Operator) -> Self {
        self.mul(other).sub(&other.mul(self))
    }
}

/// Largest modulus among the entries.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Cavity annihilation operator `a ⊗ 1₂` with the top Fock row truncated.
pub fn annihilation(space: TruncatedSpace) -> Operator {
    let mut op = Operator::zeros(space);
    for q in 0..2 {
        for n in 1..=space.n_fock() {
            let row = space.index(q, n - 1);
            let col = space.index(q, n);
            op.matrix[(row, col)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    op
}

/// Cavity creation operator, built directly rather than as `a†`.
pub fn creation(space: TruncatedSpace) -> Operator {
    let mut op = Operator::zeros(space);
    for q in 0..2 {
        for n in 1..=space.n_fock() {
            let row = space.index(q, n);
            let col = space.index(q, n - 1);
            op.matrix[(row, col)] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    op
}

/// Photon number `a†a` as a diagonal.
pub fn number(space: TruncatedSpace) -> Operator {
    let mut op = Operator::zeros(space);
    for q in 0..2 {
        for n in 0..=space.n_fock() {
            let i = space.index(q, n);
            op.matrix[(i, i)] = C64::new(n as f64, 0.0);
        }
    }
    op
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitOp {
    Sx,
    Sz,
    /// `σ₊ = |e⟩⟨g|`
    Splus,
    /// `σ₋ = |g⟩⟨e|`
    Sminus,
}

/// Qubit operator tensored with the cavity identity.
pub fn qubit_op(space: TruncatedSpace, which: QubitOp) -> Operator {
    let one = C64::new(1.0, 0.0);
    // 2×2 elements indexed [row qubit][col qubit]
    let elems: [[C64; 2]; 2] = match which {
        QubitOp::Sx => [[C64::default(), one], [one, C64::default()]],
        QubitOp::Sz => [[-one, C64::default()], [C64::default(), one]],
        QubitOp::Splus => [[C64::default(), C64::default()], [one, C64::default()]],
        QubitOp::Sminus => [[C64::default(), one], [C64::default(), C64::default()]],
    };
    let mut op = Operator::zeros(space);
    for (qr, row) in elems.iter().enumerate() {
        for (qc, &v) in row.iter().enumerate() {
            if v == C64::default() {
                continue;
            }
            for n in 0..=space.n_fock() {
                op.matrix[(space.index(qr, n), space.index(qc, n))] = v;
            }
        }
    }
    op
}

/// `σp = cos θ σz − sin θ σx`.
pub fn sigma_p(space: TruncatedSpace, theta: f64) -> Operator {
    let sz = qubit_op(space, QubitOp::Sz);
    let sx = qubit_op(space, QubitOp::Sx);
    sz.scale(C64::new(theta.cos(), 0.0))
        .sub(&sx.scale(C64::new(theta.sin(), 0.0)))
}
