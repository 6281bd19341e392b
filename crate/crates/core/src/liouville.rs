//! Dressed-basis dissipation operators, the system Liouvillian `L₀` and the
//! Liouville-space solve primitives.
//!
//! Vectorization is column stacking: `vec(ρ)[i + j·d] = ρ[i, j]`, which is
//! nalgebra's native storage order. With this convention
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, so left multiplication is `I ⊗ A` and right
//! multiplication by `X†` is `conj(X) ⊗ I`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{max_abs, qubit_op, CMatrix, Operator, QubitOp, C64};
use crate::rabi::{field_operator, DressedBasis};

pub type CVector = DVector<C64>;

/// Pivot ratio below which a factorized matrix is treated as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Column-stacking vectorization.
pub fn vectorize(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

pub fn devectorize(v: &CVector, dim: usize) -> Result<CMatrix> {
    if v.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: v.len(),
        });
    }
    Ok(CMatrix::from_column_slice(dim, dim, v.as_slice()))
}

/// Superoperator of `ρ ↦ Xρ`.
pub fn left_super(x: &CMatrix) -> CMatrix {
    CMatrix::identity(x.nrows(), x.nrows()).kronecker(x)
}

/// Superoperator of `ρ ↦ ρB`.
pub fn right_super(b: &CMatrix) -> CMatrix {
    b.transpose()
        .kronecker(&CMatrix::identity(b.nrows(), b.nrows()))
}

/// Superoperator of `ρ ↦ ρX†`.
pub fn right_super_dagger(x: &CMatrix) -> CMatrix {
    x.map(|z| z.conj())
        .kronecker(&CMatrix::identity(x.nrows(), x.nrows()))
}

/// Superoperator of `ρ ↦ −i[H, ρ]`.
pub fn hamiltonian_super(h: &CMatrix) -> CMatrix {
    (left_super(h) - right_super(h)) * C64::new(0.0, -1.0)
}

/// Superoperator of `L[O]ρ = OρO† − ½O†Oρ − ½ρO†O`.
pub fn lindblad_dissipator(o: &CMatrix) -> CMatrix {
    let odo = o.adjoint() * o;
    let half = C64::new(0.5, 0.0);
    // (I ⊗ O)(conj(O) ⊗ I) = conj(O) ⊗ O
    o.map(|z| z.conj()).kronecker(o) - (left_super(&odo) + right_super(&odo)) * half
}

/// `vec(I)`, the left null vector of every trace-preserving generator.
pub fn trace_dual(dim: usize) -> CVector {
    vectorize(&CMatrix::identity(dim, dim))
}

/// `max_j |Σ_i trace_dual_i · G_ij|`.
pub fn trace_dual_residual(generator: &CMatrix, dim: usize) -> f64 {
    let row = trace_dual(dim).transpose() * generator;
    row.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Frequency weight applied to each positive-frequency matrix element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `ω_kj / ω_c`
    OverOmegaC,
    /// `ω_kj / ω_q`
    OverOmegaQ,
    Unweighted,
}

/// `Σ_{j,k>j} ⟨j|O|k⟩ |j⟩⟨k| · w_kj` over the first `n_levels` dressed
/// states, in the dressed representation.
pub fn positive_component(
    basis: &DressedBasis,
    bare_op: &Operator,
    weight: Weight,
    n_levels: usize,
) -> CMatrix {
    let elems = basis.project(bare_op, n_levels);
    let p = basis.params();
    let mut out = CMatrix::zeros(n_levels, n_levels);
    for k in 0..n_levels {
        for j in 0..k {
            let w = match weight {
                Weight::OverOmegaC => basis.transition_frequency(k, j) / p.omega_c,
                Weight::OverOmegaQ => basis.transition_frequency(k, j) / p.omega_q,
                Weight::Unweighted => 1.0,
            };
            out[(j, k)] = elems[(j, k)] * w;
        }
    }
    out
}

/// Cavity dissipation operator `X⁺`.
pub fn build_x_plus(basis: &DressedBasis, eta: f64, n_levels: usize) -> CMatrix {
    let x = field_operator(basis.space(), eta);
    positive_component(basis, &x, Weight::OverOmegaC, n_levels)
}

/// Qubit dissipation operator `D⁺ = i Σ ⟨j|σx|k⟩ |j⟩⟨k| ω_kj/ω_q`.
pub fn build_d_plus(basis: &DressedBasis, n_levels: usize) -> CMatrix {
    let isx = qubit_op(basis.space(), QubitOp::Sx).scale(C64::new(0.0, 1.0));
    positive_component(basis, &isx, Weight::OverOmegaQ, n_levels)
}

/// Unweighted sensor operator `X′`.
pub fn build_x_prime(basis: &DressedBasis, eta: f64, n_levels: usize) -> CMatrix {
    let x = field_operator(basis.space(), eta);
    positive_component(basis, &x, Weight::Unweighted, n_levels)
}

/// Decay and pump rates in units of ω_c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSet {
    pub kappa: f64,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub sensor_gamma: f64,
    pub p_inc: f64,
}

impl Default for RateSet {
    fn default() -> Self {
        Self::reference()
    }
}

impl RateSet {
    /// κ = γ = Γ = 5·10⁻³ and P_inc = 0.1κ.
    pub fn reference() -> Self {
        let kappa = 5e-3;
        Self {
            kappa,
            gamma: kappa,
            sensor_gamma: kappa,
            p_inc: 0.1 * kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("Gamma", self.sensor_gamma),
            ("p_inc", self.p_inc),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("rate must be finite and non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn validate_sensor(&self) -> Result<()> {
        self.validate()?;
        if !(self.sensor_gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "Gamma",
                reason: "sensor linewidth must be positive".into(),
            });
        }
        Ok(())
    }
}

/// The system truncated to its first `n_levels` dressed states, with every
/// operator the sensor methods need.
#[derive(Debug, Clone)]
pub struct DressedSystem {
    pub n_levels: usize,
    pub energies: Vec<f64>,
    pub hamiltonian: CMatrix,
    pub x_plus: CMatrix,
    pub d_plus: CMatrix,
    pub x_prime: CMatrix,
    /// Full `i(a†−a) + 2ησx` (both frequency components).
    pub x_full: CMatrix,
}

impl DressedSystem {
    pub fn new(basis: &DressedBasis, n_levels: usize) -> Result<Self> {
        if n_levels < 2 || n_levels > basis.len() {
            return Err(Error::InvalidParameter {
                name: "n_levels",
                reason: format!("must lie in 2..={}, got {n_levels}", basis.len()),
            });
        }
        let eta = basis.params().eta();
        Ok(Self {
            n_levels,
            energies: basis.energies()[..n_levels].to_vec(),
            hamiltonian: basis.dressed_hamiltonian(n_levels),
            x_plus: build_x_plus(basis, eta, n_levels),
            d_plus: build_d_plus(basis, n_levels),
            x_prime: build_x_prime(basis, eta, n_levels),
            x_full: basis.project(&field_operator(basis.space(), eta), n_levels),
        })
    }

    pub fn transition_frequency(&self, k: usize, j: usize) -> f64 {
        self.energies[k] - self.energies[j]
    }
}

/// Generator `L₀` acting on column-stacked density operators.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    generator: CMatrix,
}

impl Liouvillian {
    /// Wraps an arbitrary generator on a `dim`-dimensional Hilbert space.
    pub fn from_generator(dim: usize, generator: CMatrix) -> Result<Self> {
        if generator.nrows() != dim * dim || generator.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: generator.nrows(),
            });
        }
        Ok(Self { dim, generator })
    }

    /// `L₀ = −i[H, ·] + κ L[X⁺] + γ L[D⁺] + P_inc L[X⁻]`.
    pub fn build(system: &DressedSystem, rates: &RateSet) -> Result<Self> {
        rates.validate()?;
        let x_minus = system.x_plus.adjoint();
        let mut gen = hamiltonian_super(&system.hamiltonian);
        for (rate, op) in [
            (rates.kappa, &system.x_plus),
            (rates.gamma, &system.d_plus),
            (rates.p_inc, &x_minus),
        ] {
            if rate != 0.0 {
                gen += lindblad_dissipator(op) * C64::new(rate, 0.0);
            }
        }
        Self::from_generator(system.n_levels, gen)
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn trace_dual(&self) -> CVector {
        trace_dual(self.dim)
    }

    pub fn trace_dual_residual(&self) -> f64 {
        trace_dual_residual(&self.generator, self.dim)
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.generator * vectorize(rho);
        devectorize(&v, self.dim).expect("generator preserves dimension")
    }

    /// Smallest and second-smallest singular values of the generator.
    pub fn null_space_gap(&self) -> (f64, f64) {
        let sv = self.generator.clone().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(f64::total_cmp);
        (s[0], s[1])
    }

    /// Unique trace-one solution of `L₀ρ = 0`.
    ///
    /// The population equation of `|0⟩⟨0|` is replaced by the trace
    /// condition; a second null direction leaves the bordered matrix
    /// singular and is reported as [`Error::DegenerateNullSpace`].
    pub fn steady_state(&self) -> Result<CMatrix> {
        let n = self.dim * self.dim;
        let mut bordered = self.generator.clone();
        let td = self.trace_dual();
        for c in 0..n {
            bordered[(0, c)] = td[c];
        }
        let lu = bordered.lu();
        let ratio = pivot_ratio(&lu);
        if ratio < SINGULAR_PIVOT_RATIO {
            return Err(Error::DegenerateNullSpace { pivot_ratio: ratio });
        }
        let mut rhs = CVector::zeros(n);
        rhs[0] = C64::new(1.0, 0.0);
        let x = lu
            .solve(&rhs)
            .ok_or(Error::DegenerateNullSpace { pivot_ratio: ratio })?;
        let rho = devectorize(&x, self.dim)?;
        let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let tr = rho.trace();
        Ok(rho / tr)
    }

    /// LU factorization of `L₀ − zI`.
    pub fn factor_shift(&self, z: C64) -> Result<ShiftedSolver> {
        let n = self.dim * self.dim;
        let mut shifted = self.generator.clone();
        for i in 0..n {
            shifted[(i, i)] -= z;
        }
        let lu = shifted.lu();
        let ratio = pivot_ratio(&lu);
        if ratio < SINGULAR_PIVOT_RATIO {
            return Err(Error::NearSingular {
                re: z.re,
                im: z.im,
                pivot_ratio: ratio,
            });
        }
        Ok(ShiftedSolver {
            z,
            dim: self.dim,
            lu,
            pivot_ratio: ratio,
        })
    }

    /// Solves `(L₀ − zI) x = rhs`.
    pub fn shifted_solve(&self, z: C64, rhs: &CVector) -> Result<CVector> {
        self.factor_shift(z)?.solve(rhs)
    }

    /// All eigenvalues of the generator (dense Schur decomposition).
    pub fn eigenvalues(&self) -> Vec<C64> {
        let schur = self.generator.clone().schur();
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }
}

fn pivot_ratio(lu: &LU<C64, Dyn, Dyn>) -> f64 {
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].norm();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// A factorized shifted generator, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct ShiftedSolver {
    z: C64,
    dim: usize,
    lu: LU<C64, Dyn, Dyn>,
    pivot_ratio: f64,
}

impl ShiftedSolver {
    pub fn shift(&self) -> C64 {
        self.z
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, rhs: &CVector) -> Result<CVector> {
        if rhs.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim * self.dim,
                got: rhs.len(),
            });
        }
        self.lu.solve(rhs).ok_or(Error::NearSingular {
            re: self.z.re,
            im: self.z.im,
            pivot_ratio: self.pivot_ratio,
        })
    }

    /// Solves for a matrix-shaped right-hand side.
    pub fn solve_matrix(&self, rhs: &CMatrix) -> Result<CMatrix> {
        let x = self.solve(&vectorize(rhs))?;
        devectorize(&x, self.dim)
    }
}

/// Thread-safe cache of shifted factorizations keyed by the exact shift.
#[derive(Debug, Default)]
pub struct FactorCache {
    entries: Mutex<HashMap<(u64, u64), Arc<ShiftedSolver>>>,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_factor(&self, l0: &Liouvillian, z: C64) -> Result<Arc<ShiftedSolver>> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(s) = self.entries.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let solver = Arc::new(l0.factor_shift(z)?);
        let mut map = self.entries.lock().expect("cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(solver)))
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deviations of a density operator from physicality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physicality {
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub trace_error: f64,
}

impl Physicality {
    pub fn of(rho: &CMatrix) -> Self {
        let hermiticity = max_abs(&(rho - rho.adjoint()));
        let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let min_eigenvalue = herm
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let trace_error = (rho.trace() - C64::new(1.0, 0.0)).norm();
        Self {
            hermiticity,
            min_eigenvalue,
            trace_error,
        }
    }

    pub fn is_physical(&self) -> bool {
        self.hermiticity < 1e-12 && self.min_eigenvalue > -1e-10 && self.trace_error < 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::TruncatedSpace;
    use crate::rabi::RabiParams;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_matrix(rng: &mut impl Rng, d: usize) -> CMatrix {
        CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn reference_system(theta: f64) -> DressedSystem {
        let s = TruncatedSpace::new(20).unwrap();
        let p = RabiParams::new(1.0, 0.3, theta).unwrap();
        let b = DressedBasis::compute(s, &p, 12).unwrap();
        DressedSystem::new(&b, 12).unwrap()
    }

    #[test]
    fn vectorize_is_column_stacking() {
        let d = 3;
        let mut e = CMatrix::zeros(d, d);
        e[(1, 2)] = C64::new(1.0, 0.0);
        let v = vectorize(&e);
        assert_eq!(v[1 + 2 * d], C64::new(1.0, 0.0));
        assert_eq!(v.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert!(devectorize(&v, 4).is_err());
    }

    proptest! {
        #[test]
        fn vectorize_round_trip(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, d);
            prop_assert_eq!(devectorize(&vectorize(&m), d).unwrap(), m);
        }

        #[test]
        fn multiplication_superoperators(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let x = random_matrix(&mut rng, d);
            let rho = random_matrix(&mut rng, d);
            let v = vectorize(&rho);
            let left = devectorize(&(left_super(&x) * &v), d).unwrap();
            prop_assert!(max_abs(&(left - &x * &rho)) < 1e-13);
            let right = devectorize(&(right_super_dagger(&x) * &v), d).unwrap();
            prop_assert!(max_abs(&(right - &rho * x.adjoint())) < 1e-13);
            let both = devectorize(&(left_super(&x) * right_super_dagger(&x) * &v), d).unwrap();
            prop_assert!(max_abs(&(both - &x * &rho * x.adjoint())) < 1e-12);
        }

        #[test]
        fn dissipator_annihilates_trace(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let o = random_matrix(&mut rng, d);
            let h = random_matrix(&mut rng, d);
            let h = &h + h.adjoint();
            let gen = lindblad_dissipator(&o) + hamiltonian_super(&h);
            prop_assert!(trace_dual_residual(&gen, d) < 1e-12);
        }
    }

    #[test]
    fn identity_superoperators() {
        let id = CMatrix::identity(4, 4);
        assert_eq!(left_super(&id), CMatrix::identity(16, 16));
        assert_eq!(right_super_dagger(&id), CMatrix::identity(16, 16));
        assert_eq!(
            lindblad_dissipator(&CMatrix::zeros(4, 4)),
            CMatrix::zeros(16, 16)
        );
    }

    #[test]
    fn bare_qubit_decays_to_ground() {
        // basis {g, e}; σ₋ = |g⟩⟨e|
        let mut sm = CMatrix::zeros(2, 2);
        sm[(0, 1)] = C64::new(1.0, 0.0);
        let mut h = CMatrix::zeros(2, 2);
        h[(1, 1)] = C64::new(1.0, 0.0);
        let gen = hamiltonian_super(&h) + lindblad_dissipator(&sm);
        let l = Liouvillian::from_generator(2, gen).unwrap();
        let rho = l.steady_state().unwrap();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(rho[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn positive_components_are_strictly_upper() {
        let sys = reference_system(PI / 6.0);
        for m in [&sys.x_plus, &sys.d_plus, &sys.x_prime] {
            for j in 0..sys.n_levels {
                for k in 0..=j {
                    assert_eq!(m[(j, k)], C64::default());
                }
            }
            // annihilates the ground state
            let col0 = m.column(0);
            assert!(col0.iter().all(|z| z.norm() == 0.0));
        }
        for k in 0..sys.n_levels {
            for j in 0..k {
                let w = sys.transition_frequency(k, j);
                assert!((sys.x_plus[(j, k)] - sys.x_prime[(j, k)] * w).norm() < 1e-14);
                assert!((sys.x_full[(j, k)] - sys.x_prime[(j, k)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn selection_rules_on_x_prime() {
        let sys = reference_system(PI / 2.0);
        assert!(sys.x_prime[(0, 3)].norm() < 1e-10);
        assert!(sys.x_prime[(0, 1)].norm() > 1e-2);
    }

    #[test]
    fn decoupled_d_plus_is_qubit_lowering() {
        let s = TruncatedSpace::new(6).unwrap();
        let p = RabiParams::new(1.7, 0.0, PI / 2.0).unwrap();
        let b = DressedBasis::compute_unchecked(s, &p).unwrap();
        let n = 6;
        let d = build_d_plus(&b, n);
        let x = build_x_prime(&b, 0.0, n);
        for k in 0..n {
            for j in 0..k {
                let w = b.transition_frequency(k, j);
                if d[(j, k)].norm() > 1e-12 {
                    assert!((w - 1.7).abs() < 1e-12);
                    assert!((d[(j, k)].norm() - 1.0).abs() < 1e-12);
                }
                if x[(j, k)].norm() > 1e-12 {
                    assert!((w - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_pump_relaxes_to_ground_state() {
        let sys = reference_system(PI / 6.0);
        let rates = RateSet {
            p_inc: 0.0,
            ..RateSet::reference()
        };
        let l = Liouvillian::build(&sys, &rates).unwrap();
        let rho = l.steady_state().unwrap();
        assert!(rho[(0, 0)].re > 1.0 - 1e-8);
    }

    #[test]
    fn reference_steady_state_is_physical_and_unique() {
        for theta in [PI / 2.0, PI / 6.0] {
            let sys = reference_system(theta);
            let l = Liouvillian::build(&sys, &RateSet::reference()).unwrap();
            assert!(l.trace_dual_residual() < 1e-10);
            let (s0, s1) = l.null_space_gap();
            assert!(s1 / s0 > 1e6, "gap {s0} {s1}");
            let rho = l.steady_state().unwrap();
            let phys = Physicality::of(&rho);
            assert!(phys.is_physical(), "{phys:?}");
            // populations decrease over the lowest levels
            assert!(rho[(0, 0)].re > rho[(1, 1)].re);
            assert!(rho[(1, 1)].re > rho[(2, 2)].re);
        }
    }

    #[test]
    fn strong_damping_concentrates_in_ground_state() {
        let sys = reference_system(PI / 2.0);
        let mut rates = RateSet::reference();
        let weak = Liouvillian::build(&sys, &rates)
            .unwrap()
            .steady_state()
            .unwrap();
        rates.kappa *= 100.0;
        let strong = Liouvillian::build(&sys, &rates)
            .unwrap()
            .steady_state()
            .unwrap();
        assert!(strong[(0, 0)].re > weak[(0, 0)].re);
        assert!(strong[(0, 0)].re > 0.99);
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        // Two decoupled, undamped levels.
        let gen = CMatrix::zeros(4, 4);
        let l = Liouvillian::from_generator(2, gen).unwrap();
        assert!(matches!(
            l.steady_state(),
            Err(Error::DegenerateNullSpace { .. })
        ));
    }

    #[test]
    fn shifted_solve_limits() {
        let sys = reference_system(PI / 2.0);
        let l = Liouvillian::build(&sys, &RateSet::reference()).unwrap();
        let n = sys.n_levels * sys.n_levels;
        let zero = l
            .shifted_solve(C64::new(0.5, 1.0), &CVector::zeros(n))
            .unwrap();
        assert!(zero.norm() == 0.0);

        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let rhs = CVector::from_fn(n, |_, _| C64::new(rng.random(), rng.random()));
        let z = C64::new(1e9, 0.0);
        let x = l.shifted_solve(z, &rhs).unwrap();
        let approx = -&rhs / z;
        assert!((x - &approx).norm() < 1e-6 * approx.norm());

        let z = C64::new(2.5e-3, 0.77);
        let x = l.shifted_solve(z, &rhs).unwrap();
        let mut shifted = l.generator().clone();
        for i in 0..n {
            shifted[(i, i)] -= z;
        }
        assert!((shifted * x - &rhs).norm() < 1e-10 * rhs.norm());
    }

    #[test]
    fn singular_shift_is_reported() {
        let sys = reference_system(PI / 2.0);
        let l = Liouvillian::build(&sys, &RateSet::reference()).unwrap();
        assert!(matches!(
            l.factor_shift(C64::new(0.0, 0.0)),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn cache_reuses_factorizations() {
        let sys = reference_system(PI / 2.0);
        let l = Liouvillian::build(&sys, &RateSet::reference()).unwrap();
        let cache = FactorCache::new();
        let z = C64::new(5e-3, 0.0);
        let a = cache.get_or_factor(&l, z).unwrap();
        let b = cache.get_or_factor(&l, z).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }
}
