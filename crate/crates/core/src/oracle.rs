//! Explicit-sensor reference: one or two sensor qubits are added to the
//! master equation at small finite coupling ε, and the spectrum and `g²`
//! are read off the sensor populations of the joint steady state.
//!
//! Composite ordering is sensors ⊗ system, `index = sensor_mask · n + j`,
//! where bit `k` of `sensor_mask` is the occupation of sensor `k`. Sensors
//! couple through the full field operator `i(a†−a) + 2ησx`, not its
//! positive-frequency part.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cascade::{Scan, ScanKind, ScanPoint, SensorGrid, DENOMINATOR_FLOOR};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fock::{CMatrix, C64};
use crate::liouville::{
    hamiltonian_super, lindblad_dissipator, DressedSystem, Liouvillian, RateSet,
};

/// Largest composite Hilbert dimension accepted.
pub const DIMENSION_BUDGET: usize = 160;
/// ε must not exceed this fraction of `√(Γ γ_Q / 2)`.
pub const WEAK_COUPLING_FRACTION: f64 = 0.1;
pub const MAX_SENSORS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub omega: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

/// `√(Γ γ_Q / 2)` with `γ_Q` the smallest nonzero rate among κ, γ, Γ, P_inc.
pub fn weak_coupling_bound(rates: &RateSet, sensor_gamma: f64) -> f64 {
    let gamma_q = [rates.kappa, rates.gamma, sensor_gamma, rates.p_inc]
        .into_iter()
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    (sensor_gamma * gamma_q / 2.0).sqrt()
}

/// How the sensors couple to the system field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorCoupling {
    /// `ε ς^x X` with the full field operator.
    #[default]
    Full,
    /// `ε (ς⁺ X′ + ς⁻ X′†)`: only the energy-conserving terms.
    Rotating,
}

/// System ⊗ sensors generator and the operators needed to read it out.
#[derive(Debug, Clone)]
pub struct CompositeModel {
    n_system: usize,
    sensors: Vec<SensorSpec>,
    liouvillian: Liouvillian,
}

impl CompositeModel {
    pub fn new(system: &DressedSystem, rates: &RateSet, sensors: &[SensorSpec]) -> Result<Self> {
        Self::with_coupling(system, rates, sensors, SensorCoupling::Full)
    }

    pub fn with_coupling(
        system: &DressedSystem,
        rates: &RateSet,
        sensors: &[SensorSpec],
        coupling: SensorCoupling,
    ) -> Result<Self> {
        rates.validate()?;
        if sensors.is_empty() || sensors.len() > MAX_SENSORS {
            return Err(Error::InvalidParameter {
                name: "sensors",
                reason: format!(
                    "oracle supports 1..={MAX_SENSORS} sensors, got {}",
                    sensors.len()
                ),
            });
        }
        let n = system.n_levels;
        let n_sensor_states = 1usize << sensors.len();
        let dim = n * n_sensor_states;
        if dim > DIMENSION_BUDGET {
            return Err(Error::DimensionBudget {
                dim,
                budget: DIMENSION_BUDGET,
            });
        }
        for s in sensors {
            if !(s.gamma > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "Gamma",
                    reason: "sensor linewidth must be positive".into(),
                });
            }
            let bound = weak_coupling_bound(rates, s.gamma);
            if !(s.epsilon >= 0.0) || s.epsilon > WEAK_COUPLING_FRACTION * bound {
                return Err(Error::WeakCouplingViolated {
                    epsilon: s.epsilon,
                    bound,
                });
            }
        }

        let id_sensors = CMatrix::identity(n_sensor_states, n_sensor_states);
        let id_system = CMatrix::identity(n, n);
        let lift = |a: &CMatrix| id_sensors.kronecker(a);

        let mut h = lift(&system.hamiltonian);
        let mut gen = CMatrix::zeros(dim * dim, dim * dim);
        for (k, s) in sensors.iter().enumerate() {
            let lower = sensor_lowering(sensors.len(), k);
            let occupation = lower.adjoint() * &lower;
            h += occupation.kronecker(&id_system) * C64::new(s.omega, 0.0);
            let interaction = match coupling {
                SensorCoupling::Full => (&lower + lower.adjoint()).kronecker(&system.x_full),
                SensorCoupling::Rotating => {
                    let up = lower.adjoint().kronecker(&system.x_prime);
                    let down = up.adjoint();
                    up + down
                }
            };
            h += interaction * C64::new(s.epsilon, 0.0);
            gen += lindblad_dissipator(&lower.kronecker(&id_system)) * C64::new(s.gamma, 0.0);
        }
        gen += hamiltonian_super(&h);
        let x_minus = system.x_plus.adjoint();
        for (rate, op) in [
            (rates.kappa, &system.x_plus),
            (rates.gamma, &system.d_plus),
            (rates.p_inc, &x_minus),
        ] {
            if rate != 0.0 {
                gen += lindblad_dissipator(&lift(op)) * C64::new(rate, 0.0);
            }
        }
        Ok(Self {
            n_system: n,
            sensors: sensors.to_vec(),
            liouvillian: Liouvillian::from_generator(dim, gen)?,
        })
    }

    pub fn liouvillian(&self) -> &Liouvillian {
        &self.liouvillian
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn dim(&self) -> usize {
        self.liouvillian.dim()
    }

    pub fn steady_state(&self) -> Result<CMatrix> {
        self.liouvillian.steady_state()
    }

    /// `⟨Π_{k ∈ mask} ς_k†ς_k⟩` in the joint state.
    pub fn occupation(&self, rho: &CMatrix, mask: usize) -> f64 {
        let n = self.n_system;
        let mut total = 0.0;
        for sensor_state in 0..(1usize << self.sensors.len()) {
            if sensor_state & mask != mask {
                continue;
            }
            for j in 0..n {
                let i = sensor_state * n + j;
                total += rho[(i, i)].re;
            }
        }
        total
    }

    /// Reduced system state, tracing out the sensors.
    pub fn system_state(&self, rho: &CMatrix) -> CMatrix {
        let n = self.n_system;
        let mut out = CMatrix::zeros(n, n);
        for s in 0..(1usize << self.sensors.len()) {
            out += rho.view((s * n, s * n), (n, n));
        }
        out
    }
}

/// Lowering operator of sensor `k` on the `2^n_sensors` sensor space.
fn sensor_lowering(n_sensors: usize, k: usize) -> CMatrix {
    let d = 1usize << n_sensors;
    let bit = 1usize << k;
    let mut m = CMatrix::zeros(d, d);
    for s in 0..d {
        if s & bit != 0 {
            m[(s ^ bit, s)] = C64::new(1.0, 0.0);
        }
    }
    m
}

/// Sensor population of a single sensor at `omega`.
pub fn sensor_population(
    system: &DressedSystem,
    rates: &RateSet,
    omega: f64,
    epsilon: f64,
    coupling: SensorCoupling,
) -> Result<f64> {
    let spec = SensorSpec {
        omega,
        gamma: rates.sensor_gamma,
        epsilon,
    };
    let model = CompositeModel::with_coupling(system, rates, &[spec], coupling)?;
    let rho = model.steady_state()?;
    Ok(model.occupation(&rho, 0b1))
}

/// `S(ω₁) = Γ/(2πε²) ⟨ς₁†ς₁⟩` on every grid point.
pub fn oracle_spectrum(
    system: &DressedSystem,
    rates: &RateSet,
    grid: &SensorGrid,
    epsilon: f64,
    coupling: SensorCoupling,
    exec: Execution,
) -> Result<Scan> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: "oracle spectrum needs a positive coupling".into(),
        });
    }
    let gamma = grid.gamma();
    let points = exec.map(grid.frequencies(), |&w| {
        let spec = SensorSpec {
            omega: w,
            gamma,
            epsilon,
        };
        let r = CompositeModel::with_coupling(system, rates, &[spec], coupling).and_then(|m| {
            let rho = m.steady_state()?;
            Ok(gamma / (2.0 * PI * epsilon * epsilon) * m.occupation(&rho, 0b1))
        });
        match r {
            Ok(v) => ScanPoint {
                omega: w,
                value: Some(v),
                error: None,
            },
            Err(e) => ScanPoint {
                omega: w,
                value: None,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(Scan {
        kind: ScanKind::Spectrum,
        gamma,
        fixed_frequencies: Vec::new(),
        points,
        params: None,
        rates: Some(*rates),
    })
}

/// `⟨ς₁†ς₁ς₂†ς₂⟩ / (⟨ς₁†ς₁⟩⟨ς₂†ς₂⟩)` with two explicit sensors.
pub fn oracle_g2(
    system: &DressedSystem,
    rates: &RateSet,
    omega_1: f64,
    omega_2: f64,
    epsilon: f64,
    coupling: SensorCoupling,
) -> Result<f64> {
    let gamma = rates.sensor_gamma;
    let specs = [
        SensorSpec {
            omega: omega_1,
            gamma,
            epsilon,
        },
        SensorSpec {
            omega: omega_2,
            gamma,
            epsilon,
        },
    ];
    let model = CompositeModel::with_coupling(system, rates, &specs, coupling)?;
    let rho = model.steady_state()?;
    let n1 = model.occupation(&rho, 0b01);
    let n2 = model.occupation(&rho, 0b10);
    let n12 = model.occupation(&rho, 0b11);
    for n in [n1, n2] {
        if n.abs() < DENOMINATOR_FLOOR {
            return Err(Error::NoEmission { trace: n });
        }
    }
    Ok(n12 / (n1 * n2))
}

/// Tolerances for [`compare_reports`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub omega: f64,
    pub perturbative: Option<f64>,
    pub oracle: Option<f64>,
    pub rel_err: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub schema_version: u32,
    pub tolerance: Tolerance,
    pub max_rel_err: f64,
    pub pass: bool,
    pub points: Vec<ComparisonPoint>,
}

/// Pointwise relative error of `perturbative` against `oracle`.
pub fn compare_reports(
    perturbative: &Scan,
    oracle: &Scan,
    tolerance: Tolerance,
) -> Result<DiscrepancyReport> {
    if perturbative.points.len() != oracle.points.len() {
        return Err(Error::Grid(format!(
            "grids differ in length: {} vs {}",
            perturbative.points.len(),
            oracle.points.len()
        )));
    }
    let mut points = Vec::with_capacity(oracle.points.len());
    let mut max_rel_err: f64 = 0.0;
    for (p, o) in perturbative.points.iter().zip(&oracle.points) {
        let scale = p.omega.abs().max(1.0);
        if (p.omega - o.omega).abs() > 1e-12 * scale {
            return Err(Error::Grid(format!(
                "grid points differ: {} vs {}",
                p.omega, o.omega
            )));
        }
        let rel_err = match (p.value, o.value) {
            (Some(a), Some(b)) if a == b => Some(0.0),
            (Some(a), Some(b)) => Some((a - b).abs() / b.abs().max(a.abs()).max(f64::MIN_POSITIVE)),
            _ => None,
        };
        let pass = rel_err.is_some_and(|e| e <= tolerance.rel);
        max_rel_err = max_rel_err.max(rel_err.unwrap_or(f64::INFINITY));
        points.push(ComparisonPoint {
            omega: o.omega,
            perturbative: p.value,
            oracle: o.value,
            rel_err,
            pass,
        });
    }
    Ok(DiscrepancyReport {
        schema_version: crate::SCHEMA_VERSION,
        tolerance,
        max_rel_err,
        pass: points.iter().all(|p| p.pass),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{g2, power_spectrum, SensorModel};
    use crate::fock::TruncatedSpace;
    use crate::liouville::Physicality;
    use crate::rabi::{DressedBasis, RabiParams};

    fn system(theta: f64, n_fock: usize, n_levels: usize) -> DressedSystem {
        let s = TruncatedSpace::new(n_fock).unwrap();
        let p = RabiParams::new(1.0, 0.3, theta).unwrap();
        let b = DressedBasis::compute_unchecked(s, &p).unwrap();
        DressedSystem::new(&b, n_levels).unwrap()
    }

    #[test]
    fn sensor_lowering_acts_on_one_bit() {
        let l1 = sensor_lowering(2, 1);
        assert_eq!(l1[(0b00, 0b10)], C64::new(1.0, 0.0));
        assert_eq!(l1[(0b01, 0b11)], C64::new(1.0, 0.0));
        assert_eq!(l1.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn budget_and_coupling_limits() {
        let rates = RateSet::reference();
        let big = system(PI / 2.0, 30, 41);
        let spec1 = SensorSpec {
            omega: 0.7,
            gamma: rates.sensor_gamma,
            epsilon: 1e-5,
        };
        assert!(matches!(
            CompositeModel::new(&big, &rates, &[spec1; 2]),
            Err(Error::DimensionBudget { .. })
        ));
        let sys = system(PI / 2.0, 10, 12);
        let spec = |w: f64, e: f64| SensorSpec {
            omega: w,
            gamma: rates.sensor_gamma,
            epsilon: e,
        };
        assert!(CompositeModel::new(&sys, &rates, &[spec(0.7, 1e-5); 3]).is_err());
        let strong = CompositeModel::new(&sys, &rates, &[spec(0.7, 1e-3)]);
        assert!(matches!(strong, Err(Error::WeakCouplingViolated { .. })));
        assert!(CompositeModel::new(&sys, &rates, &[spec(0.7, 1e-4)]).is_ok());
    }

    #[test]
    fn decoupled_sensor_stays_empty() {
        let sys = system(PI / 2.0, 10, 10);
        let rates = RateSet::reference();
        let pop = sensor_population(&sys, &rates, 0.7, 0.0, SensorCoupling::Full).unwrap();
        assert!(pop.abs() < 1e-14);
    }

    #[test]
    fn composite_generator_is_trace_preserving_and_physical() {
        let sys = system(PI / 6.0, 6, 8);
        let rates = RateSet::reference();
        let specs = [
            SensorSpec {
                omega: 0.79,
                gamma: rates.sensor_gamma,
                epsilon: 5e-5,
            },
            SensorSpec {
                omega: 1.04,
                gamma: rates.sensor_gamma,
                epsilon: 5e-5,
            },
        ];
        let m = CompositeModel::new(&sys, &rates, &specs).unwrap();
        assert!(m.liouvillian().trace_dual_residual() < 1e-10);
        let rho = m.steady_state().unwrap();
        let phys = Physicality::of(&rho);
        assert!(phys.hermiticity < 1e-12 && phys.trace_error < 1e-12);
        assert!(phys.min_eigenvalue > -1e-10, "{phys:?}");
    }

    #[test]
    fn spectrum_agrees_with_cascade_at_the_main_peak() {
        let sys = system(PI / 2.0, 10, 10);
        let rates = RateSet::reference();
        let w10 = sys.transition_frequency(1, 0);
        let grid = SensorGrid::new(vec![w10], rates.sensor_gamma).unwrap();
        let oracle = oracle_spectrum(
            &sys,
            &rates,
            &grid,
            2e-5,
            SensorCoupling::Full,
            Execution::Sequential,
        )
        .unwrap();
        let model = SensorModel::from_system(&sys, &rates, None).unwrap();
        let pert = power_spectrum(&model, &grid, Execution::Sequential);
        let report = compare_reports(&pert, &oracle, Tolerance { rel: 0.02 }).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn g2_agrees_and_is_symmetric() {
        let sys = system(PI / 2.0, 6, 8);
        let rates = RateSet::reference();
        let w10 = sys.transition_frequency(1, 0);
        let w31 = sys.transition_frequency(3, 1);
        let a = oracle_g2(&sys, &rates, w31, w10, 2e-5, SensorCoupling::Full).unwrap();
        let b = oracle_g2(&sys, &rates, w10, w31, 2e-5, SensorCoupling::Full).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0) + 1e-6, "{a} {b}");
        let model = SensorModel::from_system(&sys, &rates, None).unwrap();
        let p = g2(&model, w31, w10).unwrap();
        assert!((a - p).abs() < 0.05 * p, "oracle {a} perturbative {p}");
        assert!(a > 1.0);
    }

    #[test]
    fn counter_rotating_terms_add_a_background_to_weak_lines() {
        let sys = system(PI / 2.0, 8, 8);
        let rates = RateSet::reference();
        let model = SensorModel::from_system(&sys, &rates, None).unwrap();
        let w41 = sys.transition_frequency(4, 1);
        let pert = crate::cascade::spectrum_at(&model, w41).unwrap();
        let scale = rates.sensor_gamma / (2.0 * PI * 1e-10);
        let rot =
            scale * sensor_population(&sys, &rates, w41, 1e-5, SensorCoupling::Rotating).unwrap();
        let full =
            scale * sensor_population(&sys, &rates, w41, 1e-5, SensorCoupling::Full).unwrap();
        assert!(
            (rot - pert).abs() < 1e-3 * pert,
            "rotating {rot} perturbative {pert}"
        );
        assert!(full > 1.2 * pert, "full {full} perturbative {pert}");
    }

    #[test]
    fn identical_reports_have_zero_discrepancy() {
        let sys = system(PI / 2.0, 8, 8);
        let rates = RateSet::reference();
        let model = SensorModel::from_system(&sys, &rates, None).unwrap();
        let grid = SensorGrid::uniform(0.6, 0.8, 0.01, rates.sensor_gamma).unwrap();
        let s = power_spectrum(&model, &grid, Execution::Sequential);
        let r = compare_reports(&s, &s, Tolerance { rel: 0.0 }).unwrap();
        assert_eq!(r.max_rel_err, 0.0);
        assert!(r.pass);
        let short = SensorGrid::uniform(0.6, 0.7, 0.01, rates.sensor_gamma).unwrap();
        let s2 = power_spectrum(&model, &short, Execution::Sequential);
        assert!(compare_reports(&s, &s2, Tolerance { rel: 0.0 }).is_err());
    }
}
