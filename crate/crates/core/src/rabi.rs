//! Extended quantum Rabi Hamiltonian, its dressed eigenbasis and the
//! transition table between dressed levels.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fock::{
    annihilation, creation, max_abs, number, qubit_op, sigma_p, CMatrix, Operator, QubitOp,
    TruncatedSpace, C64,
};

/// Cutoff increment used to decide which dressed levels are converged.
pub const CUTOFF_BUMP: usize = 4;
/// Allowed eigenvalue change under the cutoff bump (units of ω_c).
pub const CONVERGENCE_TOL: f64 = 1e-8;
/// `|⟨j|Π|j⟩|` above this gives a definite parity label.
pub const PARITY_THRESHOLD: f64 = 1.0 - 1e-6;
/// Default amplitude floor for [`transition_table`].
pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 1e-8;

/// Model parameters, all frequencies in units of the cavity frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub omega_c: f64,
    pub omega_q: f64,
    pub g: f64,
    pub theta: f64,
}

impl RabiParams {
    pub fn new(omega_q: f64, g: f64, theta: f64) -> Result<Self> {
        let p = Self {
            omega_c: 1.0,
            omega_q,
            g,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.omega_c > 0.0) {
            return bad("omega_c", "must be positive");
        }
        if !(self.omega_q > 0.0) {
            return bad("omega_q", "must be positive");
        }
        if !(self.g >= 0.0) {
            return bad("g", "must be non-negative");
        }
        if !self.theta.is_finite() {
            return bad("theta", "must be finite");
        }
        Ok(())
    }

    /// Normalized coupling `g / ω_c`.
    pub fn eta(&self) -> f64 {
        self.g / self.omega_c
    }
}

/// `H = ω_c a†a + ω_q σ₊σ₋ − i g (a − a†) σp`.
pub fn hamiltonian(space: TruncatedSpace, params: &RabiParams) -> Operator {
    let a = annihilation(space);
    let ad = creation(space);
    let cavity = number(space).scale(C64::new(params.omega_c, 0.0));
    let qubit = qubit_op(space, QubitOp::Splus)
        .mul(&qubit_op(space, QubitOp::Sminus))
        .scale(C64::new(params.omega_q, 0.0));
    let coupling = a
        .sub(&ad)
        .mul(&sigma_p(space, params.theta))
        .scale(C64::new(0.0, -params.g));
    cavity.add(&qubit).add(&coupling)
}

/// `Π = exp(iπ[a†a + (1 + σz)/2])`, diagonal with entries `(−1)^(n + q)`.
pub fn parity_operator(space: TruncatedSpace) -> Operator {
    let d = space.dim_total();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        let (q, n) = space.decompose(i);
        m[(i, i)] = C64::new(if (q + n) % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
    }
    Operator::from_matrix(space, m).expect("dimension matches by construction")
}

/// The Hermitian operator `i(a† − a) + 2η σx` through which the cavity
/// field couples to the environment and to the sensors.
pub fn field_operator(space: TruncatedSpace, eta: f64) -> Operator {
    creation(space)
        .sub(&annihilation(space))
        .scale(C64::new(0.0, 1.0))
        .add(&qubit_op(space, QubitOp::Sx).scale(C64::new(2.0 * eta, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    fn rank(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
            Parity::None => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        }
    }
}

/// Ordered eigenpairs of the extended Rabi Hamiltonian.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    space: TruncatedSpace,
    params: RabiParams,
    energies: Vec<f64>,
    /// Columns are the eigenvectors `|j⟩` in the bare basis.
    states: CMatrix,
    parity: Vec<Parity>,
    n_levels_converged: usize,
}

impl DressedBasis {
    /// Diagonalizes at `space` and certifies that at least `n_levels` levels
    /// are converged under a cutoff bump of [`CUTOFF_BUMP`].
    pub fn compute(space: TruncatedSpace, params: &RabiParams, n_levels: usize) -> Result<Self> {
        let basis = Self::compute_unchecked(space, params)?;
        if n_levels > basis.n_levels_converged {
            return Err(Error::UnconvergedLevels {
                requested: n_levels,
                converged: basis.n_levels_converged,
                n_fock: space.n_fock(),
            });
        }
        Ok(basis)
    }

    /// Same as [`DressedBasis::compute`] but never fails on convergence.
    /// Used for deliberately reduced cutoffs where both sides of a
    /// comparison share the same truncation.
    pub fn compute_unchecked(space: TruncatedSpace, params: &RabiParams) -> Result<Self> {
        params.validate()?;
        let (energies, states, parity) = diagonalize(space, params);
        let bumped = TruncatedSpace::new(space.n_fock() + CUTOFF_BUMP)?;
        let (bumped_energies, _, _) = diagonalize(bumped, params);
        let n_levels_converged = energies
            .iter()
            .zip(&bumped_energies)
            .take_while(|(a, b)| (*a - *b).abs() < CONVERGENCE_TOL * params.omega_c)
            .count();
        Ok(Self {
            space,
            params: *params,
            energies,
            states,
            parity,
            n_levels_converged,
        })
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn params(&self) -> &RabiParams {
        &self.params
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn state(&self, j: usize) -> DVector<C64> {
        self.states.column(j).into_owned()
    }

    pub fn parity(&self) -> &[Parity] {
        &self.parity
    }

    pub fn n_levels_converged(&self) -> usize {
        self.n_levels_converged
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// `ω_kj = E_k − E_j`.
    pub fn transition_frequency(&self, k: usize, j: usize) -> f64 {
        self.energies[k] - self.energies[j]
    }

    /// Matrix elements `⟨j|O|k⟩` for `j, k < n_levels`.
    pub fn project(&self, op: &Operator, n_levels: usize) -> CMatrix {
        assert_eq!(op.space(), self.space, "operator lives on another space");
        let v = self.states.columns(0, n_levels);
        v.adjoint() * op.matrix() * v
    }

    /// Diagonal Hamiltonian `diag(E_0 … E_{n−1})` in the dressed basis.
    pub fn dressed_hamiltonian(&self, n_levels: usize) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(
            n_levels,
            self.energies[..n_levels].iter().map(|&e| C64::new(e, 0.0)),
        ))
    }
}

/// Full diagonalization with deterministic ordering and phases.
///
/// Eigenvalues are ascending. Inside a numerically degenerate cluster the
/// vectors are rotated to parity eigenstates when parity is conserved, then
/// aligned with bare basis states; the cluster is ordered even before odd,
/// then by the bare state of maximal overlap. Each vector's largest
/// component is made real and positive.
fn diagonalize(space: TruncatedSpace, params: &RabiParams) -> (Vec<f64>, CMatrix, Vec<Parity>) {
    let h = hamiltonian(space, params);
    let d = space.dim_total();
    let eig = SymmetricEigen::new(h.matrix().clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut states = CMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        states.set_column(col, &eig.eigenvectors.column(i));
    }

    let pi_op = parity_operator(space);
    let scale = energies.iter().fold(1.0_f64, |m, e| m.max(e.abs()));
    let cluster_tol = 1e-9 * scale;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && energies[end] - energies[end - 1] < cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let block = resolve_cluster(&states.columns(start, end - start).into_owned(), &pi_op);
            let mean = energies[start..end].iter().sum::<f64>() / (end - start) as f64;
            for (offset, col) in block.column_iter().enumerate() {
                states.set_column(start + offset, &col);
                energies[start + offset] = mean;
            }
        }
        start = end;
    }

    for mut col in states.column_iter_mut() {
        fix_phase(&mut col);
    }
    let parity = (0..d)
        .map(|j| {
            let v = states.column(j);
            let expect = (v.adjoint() * pi_op.matrix() * v)[(0, 0)].re;
            if expect.abs() > PARITY_THRESHOLD {
                if expect > 0.0 {
                    Parity::Even
                } else {
                    Parity::Odd
                }
            } else {
                Parity::None
            }
        })
        .collect();
    (energies, states, parity)
}

fn resolve_cluster(vectors: &CMatrix, parity: &Operator) -> CMatrix {
    let d = vectors.nrows();
    let k = vectors.ncols();
    // Rotate to eigenvectors of Π restricted to the degenerate subspace.
    let restricted = vectors.adjoint() * parity.matrix() * vectors;
    let restricted = (&restricted + restricted.adjoint()) * C64::new(0.5, 0.0);
    let peig = SymmetricEigen::new(restricted);
    let mut sectors: Vec<(Parity, Vec<usize>)> = Vec::new();
    for i in 0..k {
        let lam = peig.eigenvalues[i];
        let label = if lam > PARITY_THRESHOLD {
            Parity::Even
        } else if lam < -PARITY_THRESHOLD {
            Parity::Odd
        } else {
            Parity::None
        };
        match sectors.iter_mut().find(|(p, _)| *p == label) {
            Some((_, idx)) => idx.push(i),
            None => sectors.push((label, vec![i])),
        }
    }
    sectors.sort_by_key(|(p, _)| p.rank());

    let mut out = CMatrix::zeros(d, k);
    let mut filled = 0;
    for (_, idx) in sectors {
        let mut sub = CMatrix::zeros(d, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            sub.set_column(c, &(vectors * peig.eigenvectors.column(i)));
        }
        let aligned = align_to_bare(&sub);
        for col in aligned.column_iter() {
            out.set_column(filled, &col);
            filled += 1;
        }
    }
    out
}

/// Greedy Gram–Schmidt of the bare states best represented in the subspace
/// spanned by `sub`, returned in order of bare index.
fn align_to_bare(sub: &CMatrix) -> CMatrix {
    let d = sub.nrows();
    let k = sub.ncols();
    let weights: Vec<f64> = (0..d).map(|i| sub.row(i).norm_squared()).collect();
    let mut candidates: Vec<usize> = (0..d).collect();
    candidates.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));

    let mut chosen: Vec<(usize, DVector<C64>)> = Vec::with_capacity(k);
    for i in candidates {
        if chosen.len() == k {
            break;
        }
        // P e_i = V V† e_i
        let coeffs = sub.row(i).adjoint();
        let mut v: DVector<C64> = sub * coeffs;
        for (_, u) in &chosen {
            let overlap = u.dotc(&v);
            v -= u * overlap;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            chosen.push((i, v / C64::new(norm, 0.0)));
        }
    }
    chosen.sort_by_key(|(i, _)| *i);
    let mut out = CMatrix::zeros(d, k);
    for (c, (_, v)) in chosen.iter().enumerate() {
        out.set_column(c, v);
    }
    out
}

fn fix_phase(col: &mut nalgebra::DVectorViewMut<'_, C64>) {
    let max = col.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if let Some(pivot) = col.iter().find(|z| z.norm() > max * (1.0 - 1e-9)).copied() {
        let phase = pivot.conj() / pivot.norm();
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
}

/// One entry of the transition table: `k → j` with `k > j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub upper: usize,
    pub lower: usize,
    pub frequency: f64,
    /// `⟨j|O|k⟩`
    pub amplitude: C64,
}

/// All pairs `k > j` among the first `n_levels` with `|⟨j|O|k⟩| > floor`,
/// sorted by transition frequency.
pub fn transition_table(
    basis: &DressedBasis,
    transition_op: &Operator,
    n_levels: usize,
    floor: f64,
) -> Vec<Transition> {
    let m = basis.project(transition_op, n_levels);
    let mut out = Vec::new();
    for k in 0..n_levels {
        for j in 0..k {
            let amp = m[(j, k)];
            if amp.norm() > floor {
                out.push(Transition {
                    upper: k,
                    lower: j,
                    frequency: basis.transition_frequency(k, j),
                    amplitude: amp,
                });
            }
        }
    }
    out.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    out
}

/// Number of levels reported per point of an energy sweep.
pub const SWEEP_LEVELS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRow {
    pub g: f64,
    pub energies: Vec<f64>,
    pub parity: Vec<Parity>,
}

/// First [`SWEEP_LEVELS`] eigenvalues at each coupling strength in `g_grid`.
pub fn energy_sweep(
    space: TruncatedSpace,
    omega_q: f64,
    theta: f64,
    g_grid: &[f64],
    exec: Execution,
) -> Result<Vec<EnergyRow>> {
    if g_grid.is_empty() {
        return Err(Error::Grid("coupling grid is empty".into()));
    }
    let levels = SWEEP_LEVELS.min(space.dim_total());
    exec.map(g_grid, |&g| {
        let params = RabiParams::new(omega_q, g, theta)?;
        params.validate()?;
        let (energies, _, parity) = diagonalize(space, &params);
        Ok(EnergyRow {
            g,
            energies: energies[..levels].to_vec(),
            parity: parity[..levels].to_vec(),
        })
    })
    .into_iter()
    .collect()
}

/// `max|[H, Π]|`, zero iff parity is conserved.
pub fn parity_commutator_norm(space: TruncatedSpace, params: &RabiParams) -> f64 {
    let h = hamiltonian(space, params);
    max_abs(h.commutator(&parity_operator(space)).matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space(n: usize) -> TruncatedSpace {
        TruncatedSpace::new(n).unwrap()
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        for theta in [0.0, PI / 6.0, PI / 2.0, 1.1] {
            let p = RabiParams::new(1.0, 0.3, theta).unwrap();
            assert!(hamiltonian(space(10), &p).is_hermitian());
        }
    }

    #[test]
    fn decoupled_spectrum_is_ladder() {
        let p = RabiParams::new(1.3, 0.0, PI / 2.0).unwrap();
        let s = space(10);
        let basis = DressedBasis::compute_unchecked(s, &p).unwrap();
        let mut want: Vec<f64> = (0..=10).flat_map(|n| [n as f64, n as f64 + 1.3]).collect();
        want.sort_by(f64::total_cmp);
        for (e, w) in basis.energies().iter().zip(&want) {
            assert!((e - w).abs() < 1e-12, "{e} vs {w}");
        }
    }

    #[test]
    fn resonant_degenerate_pair() {
        let p = RabiParams::new(1.0, 0.0, PI / 2.0).unwrap();
        let s = space(8);
        let basis = DressedBasis::compute_unchecked(s, &p).unwrap();
        assert!((basis.energies()[1] - 1.0).abs() < 1e-12);
        assert!((basis.energies()[2] - 1.0).abs() < 1e-12);
        // Degenerate pair aligned with bare states |g,1⟩ then |e,0⟩.
        let v1 = basis.state(1);
        let v2 = basis.state(2);
        assert!((v1[s.index(0, 1)].re - 1.0).abs() < 1e-12);
        assert!((v2[s.index(1, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parity_operator_values() {
        let s = space(4);
        let pi = parity_operator(s);
        assert_eq!(pi.matrix()[(s.index(0, 0), s.index(0, 0))].re, 1.0);
        assert_eq!(pi.matrix()[(s.index(1, 0), s.index(1, 0))].re, -1.0);
        assert_eq!(pi.matrix()[(s.index(1, 1), s.index(1, 1))].re, 1.0);
        assert_eq!(pi.mul(&pi), Operator::identity(s));
    }

    #[test]
    fn parity_conserved_only_at_symmetric_point() {
        let s = space(12);
        let sym = RabiParams::new(1.0, 0.3, PI / 2.0).unwrap();
        let broken = RabiParams::new(1.0, 0.3, PI / 6.0).unwrap();
        assert!(parity_commutator_norm(s, &sym) < 1e-12);
        assert!(parity_commutator_norm(s, &broken) > 1e-3);
    }

    #[test]
    fn eigen_residuals_and_orthonormality() {
        let s = space(20);
        let p = RabiParams::new(1.0, 0.3, PI / 6.0).unwrap();
        let basis = DressedBasis::compute(s, &p, 12).unwrap();
        let h = hamiltonian(s, &p);
        for j in 0..basis.n_levels_converged() {
            let v = basis.state(j);
            let r = h.matrix() * &v - &v * C64::new(basis.energies()[j], 0.0);
            assert!(r.norm() < 1e-10);
        }
        let gram = basis.states().adjoint() * basis.states();
        let dev = max_abs(&(gram - CMatrix::identity(s.dim_total(), s.dim_total())));
        assert!(dev < 1e-12);
        assert!(basis.energies().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn parity_labels() {
        let s = space(20);
        let sym =
            DressedBasis::compute(s, &RabiParams::new(1.0, 0.3, PI / 2.0).unwrap(), 12).unwrap();
        assert!(sym.parity()[..sym.n_levels_converged()]
            .iter()
            .all(|p| *p != Parity::None));
        assert_eq!(sym.parity()[0], Parity::Even);
        let broken =
            DressedBasis::compute(s, &RabiParams::new(1.0, 0.3, PI / 6.0).unwrap(), 12).unwrap();
        assert!(broken.parity()[..12].iter().all(|p| *p == Parity::None));
    }

    #[test]
    fn unconverged_request_fails() {
        let s = space(3);
        let p = RabiParams::new(1.0, 0.3, PI / 2.0).unwrap();
        let err = DressedBasis::compute(s, &p, 8).unwrap_err();
        assert!(matches!(err, Error::UnconvergedLevels { .. }));
    }

    #[test]
    fn decoupled_transitions_are_bare_frequencies() {
        let s = space(8);
        let p = RabiParams::new(1.0, 0.0, PI / 2.0).unwrap();
        let basis = DressedBasis::compute_unchecked(s, &p).unwrap();
        let x = field_operator(s, p.eta());
        for t in transition_table(&basis, &x, 8, DEFAULT_AMPLITUDE_FLOOR) {
            assert!((t.frequency - 1.0).abs() < 1e-12, "{t:?}");
        }
        let sx = qubit_op(s, QubitOp::Sx);
        let p2 = RabiParams::new(1.7, 0.0, PI / 2.0).unwrap();
        let b2 = DressedBasis::compute_unchecked(s, &p2).unwrap();
        for t in transition_table(&b2, &sx, 8, DEFAULT_AMPLITUDE_FLOOR) {
            assert!((t.frequency - 1.7).abs() < 1e-12, "{t:?}");
        }
    }

    #[test]
    fn sweep_rejects_empty_grid() {
        assert!(energy_sweep(space(4), 1.0, PI / 2.0, &[], Execution::Sequential).is_err());
    }
}
