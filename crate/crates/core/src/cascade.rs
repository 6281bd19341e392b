//! Perturbative sensor cascade: power spectrum and frequency-resolved
//! N-photon correlations from the ladder of auxiliary conditional states.
//!
//! With `N` identical sensors of linewidth `Γ`, the ε-scaled conditional
//! state `ρ̃_m^{m′}` (sensor occupations `m` on the ket side, `m′` on the bra
//! side) solves
//!
//! ```text
//! (L₀ − z) ρ̃_m^{m′} = i [ Σ_{k: m_k=1} X′ ρ̃_{m−e_k}^{m′} − Σ_{k: m′_k=1} ρ̃_m^{m′−e_k} X′† ]
//! z = i Σ_k (m_k − m′_k) ω_k + (|m| + |m′|) Γ/2
//! ```
//!
//! starting from the system steady state at `m = m′ = 0`. Entries are solved
//! in order of total occupation and `ρ̃_{m′}^{m} = (ρ̃_m^{m′})†` halves the
//! work.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fock::{CMatrix, C64};
use crate::liouville::{DressedSystem, FactorCache, Liouvillian, RateSet};
use crate::rabi::{DressedBasis, RabiParams};

/// Traces below this are treated as "no emission".
pub const DENOMINATOR_FLOOR: f64 = 1e-30;

/// Sensor scan frequencies sharing one linewidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGrid {
    frequencies: Vec<f64>,
    gamma: f64,
}

impl SensorGrid {
    pub fn new(frequencies: Vec<f64>, gamma: f64) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::Grid("sensor grid is empty".into()));
        }
        if !(gamma > 0.0) {
            return Err(Error::Grid(format!(
                "sensor linewidth must be positive, got {gamma}"
            )));
        }
        if frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::Grid("grid contains a non-finite frequency".into()));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid(
                "grid frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { frequencies, gamma })
    }

    /// `start, start + step, …` up to and including `stop` (within 1e-9 step).
    pub fn uniform(start: f64, stop: f64, step: f64, gamma: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(Error::Grid(format!(
                "invalid range start={start} stop={stop} step={step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| start + i as f64 * step).collect(), gamma)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Largest spacing between neighbouring points.
    pub fn max_step(&self) -> f64 {
        self.frequencies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Peak resolution needs a step of at most `Γ/5`.
    pub fn resolves_peaks(&self) -> bool {
        self.max_step() <= self.gamma / 5.0 * (1.0 + 1e-9)
    }
}

/// Everything the ladder needs: `L₀`, `X′`, `Γ`, the steady state and a
/// factorization cache for shifts that recur across scan points.
#[derive(Debug)]
pub struct SensorModel {
    l0: Arc<Liouvillian>,
    x_prime: CMatrix,
    x_prime_dagger: CMatrix,
    gamma: f64,
    steady: CMatrix,
    cache: FactorCache,
    params: Option<RabiParams>,
    rates: Option<RateSet>,
}

impl SensorModel {
    pub fn new(l0: Arc<Liouvillian>, x_prime: CMatrix, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "Gamma",
                reason: "sensor linewidth must be positive".into(),
            });
        }
        if x_prime.nrows() != l0.dim() || x_prime.ncols() != l0.dim() {
            return Err(Error::DimensionMismatch {
                expected: l0.dim(),
                got: x_prime.nrows(),
            });
        }
        let steady = l0.steady_state()?;
        Ok(Self {
            x_prime_dagger: x_prime.adjoint(),
            l0,
            x_prime,
            gamma,
            steady,
            cache: FactorCache::new(),
            params: None,
            rates: None,
        })
    }

    /// Builds `L₀` and `X′` on the first `n_levels` dressed states.
    pub fn from_basis(basis: &DressedBasis, n_levels: usize, rates: &RateSet) -> Result<Self> {
        rates.validate_sensor()?;
        let system = DressedSystem::new(basis, n_levels)?;
        Self::from_system(&system, rates, Some(*basis.params()))
    }

    pub fn from_system(
        system: &DressedSystem,
        rates: &RateSet,
        params: Option<RabiParams>,
    ) -> Result<Self> {
        rates.validate_sensor()?;
        let l0 = Arc::new(Liouvillian::build(system, rates)?);
        let mut model = Self::new(l0, system.x_prime.clone(), rates.sensor_gamma)?;
        model.params = params;
        model.rates = Some(*rates);
        Ok(model)
    }

    pub fn liouvillian(&self) -> &Liouvillian {
        &self.l0
    }

    pub fn x_prime(&self) -> &CMatrix {
        &self.x_prime
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn steady_state(&self) -> &CMatrix {
        &self.steady
    }

    pub fn params(&self) -> Option<&RabiParams> {
        self.params.as_ref()
    }

    pub fn rates(&self) -> Option<&RateSet> {
        self.rates.as_ref()
    }

    pub fn cached_factorizations(&self) -> usize {
        self.cache.len()
    }

    fn solve(&self, z: C64, rhs: &CMatrix, cacheable: bool) -> Result<CMatrix> {
        if cacheable {
            self.cache.get_or_factor(&self.l0, z)?.solve_matrix(rhs)
        } else {
            self.l0.factor_shift(z)?.solve_matrix(rhs)
        }
    }
}

/// Auxiliary conditional states for `N` sensors, indexed by occupation
/// bit masks `(m, m′)`; bit `k` belongs to sensor `k`.
#[derive(Debug, Clone)]
pub struct ConditionalStateLadder {
    frequencies: Vec<f64>,
    gamma: f64,
    entries: Vec<CMatrix>,
}

impl ConditionalStateLadder {
    /// The sensorless ladder: only the steady state.
    pub fn root(model: &SensorModel) -> Self {
        Self {
            frequencies: Vec::new(),
            gamma: model.gamma,
            entries: vec![model.steady.clone()],
        }
    }

    /// Ladder for sensors at `frequencies`, added one at a time.
    pub fn build(model: &SensorModel, frequencies: &[f64]) -> Result<Self> {
        frequencies
            .iter()
            .try_fold(Self::root(model), |ladder, &w| ladder.extend(model, w))
    }

    /// Adds one sensor at frequency `omega` as the highest bit. Entries in
    /// which the new sensor is unoccupied are copied from `self`.
    pub fn extend(&self, model: &SensorModel, omega: f64) -> Result<Self> {
        let old_n = self.order();
        let n = old_n + 1;
        let width = 1usize << n;
        let new_bit = 1usize << old_n;
        let mut frequencies = self.frequencies.clone();
        frequencies.push(omega);

        let mut slots: Vec<Option<CMatrix>> = vec![None; width * width];
        let old_width = 1usize << old_n;
        for m in 0..old_width {
            for mp in 0..old_width {
                slots[m | (mp << n)] = Some(self.entries[m | (mp << old_n)].clone());
            }
        }

        let mut pending: Vec<(usize, usize)> = (0..width)
            .flat_map(|m| (0..width).map(move |mp| (m, mp)))
            .filter(|&(m, mp)| (m | mp) & new_bit != 0)
            .collect();
        pending.sort_by_key(|&(m, mp)| (m.count_ones() + mp.count_ones(), m, mp));

        let i = C64::new(0.0, 1.0);
        for (m, mp) in pending {
            if let Some(partner) = &slots[mp | (m << n)] {
                slots[m | (mp << n)] = Some(partner.adjoint());
                continue;
            }
            let dim = model.l0.dim();
            let mut rhs = CMatrix::zeros(dim, dim);
            for k in 0..n {
                let bit = 1usize << k;
                if m & bit != 0 {
                    let prev = slots[(m ^ bit) | (mp << n)]
                        .as_ref()
                        .expect("lower weight solved");
                    rhs += &model.x_prime * prev;
                }
                if mp & bit != 0 {
                    let prev = slots[m | ((mp ^ bit) << n)]
                        .as_ref()
                        .expect("lower weight solved");
                    rhs -= prev * &model.x_prime_dagger;
                }
            }
            rhs *= i;
            let z = shift(&frequencies, self.gamma, m, mp);
            let cacheable = (m & new_bit) == (mp & new_bit);
            slots[m | (mp << n)] = Some(model.solve(z, &rhs, cacheable)?);
        }

        Ok(Self {
            frequencies,
            gamma: self.gamma,
            entries: slots
                .into_iter()
                .map(|s| s.expect("all entries solved"))
                .collect(),
        })
    }

    /// Number of sensors.
    pub fn order(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `ρ̃_m^{m′}`.
    pub fn entry(&self, m: usize, mp: usize) -> &CMatrix {
        let n = self.order();
        assert!(m < (1 << n) && mp < (1 << n), "mask out of range");
        &self.entries[m | (mp << n)]
    }

    /// Shift `z(m, m′)` of the linear system that produced an entry.
    pub fn shift(&self, m: usize, mp: usize) -> C64 {
        shift(&self.frequencies, self.gamma, m, mp)
    }

    pub fn trace(&self, m: usize, mp: usize) -> C64 {
        self.entry(m, mp).trace()
    }

    /// `Tr[ρ̃_{1…1}^{1…1}] / Π_k Tr[ρ̃_{e_k}^{e_k}]`.
    pub fn correlation(&self) -> Result<f64> {
        let n = self.order();
        let full = (1usize << n) - 1;
        let mut denominator = 1.0;
        for k in 0..n {
            let t = self.trace(1 << k, 1 << k).re;
            if t.abs() < DENOMINATOR_FLOOR {
                return Err(Error::NoEmission { trace: t });
            }
            denominator *= t;
        }
        if denominator.abs() < DENOMINATOR_FLOOR {
            return Err(Error::NoEmission { trace: denominator });
        }
        Ok(self.trace(full, full).re / denominator)
    }
}

fn shift(frequencies: &[f64], gamma: f64, m: usize, mp: usize) -> C64 {
    let mut im = 0.0;
    for (k, w) in frequencies.iter().enumerate() {
        let bit = 1usize << k;
        let d = ((m & bit != 0) as i32) - ((mp & bit != 0) as i32);
        im += d as f64 * w;
    }
    let weight = (m.count_ones() + mp.count_ones()) as f64;
    C64::new(weight * gamma / 2.0, im)
}

/// What a [`Scan`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Spectrum,
    G2,
    G3,
}

/// One scan point: the value, or why it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub omega: f64,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Values on a sensor grid, with the frequencies of the held sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub kind: ScanKind,
    pub gamma: f64,
    pub fixed_frequencies: Vec<f64>,
    pub points: Vec<ScanPoint>,
    pub params: Option<RabiParams>,
    pub rates: Option<RateSet>,
}

pub type SpectrumScan = Scan;
pub type CorrelationScan = Scan;

impl Scan {
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.omega).collect()
    }

    /// Values with missing points as NaN.
    pub fn values(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.value.unwrap_or(f64::NAN))
            .collect()
    }

    pub fn max_value(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| p.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the grid point nearest to `omega`.
    pub fn value_near(&self, omega: f64) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| (a.omega - omega).abs().total_cmp(&(b.omega - omega).abs()))
            .and_then(|p| p.value)
    }
}

fn point(omega: f64, r: Result<f64>) -> ScanPoint {
    match r {
        Ok(v) => ScanPoint {
            omega,
            value: Some(v),
            error: None,
        },
        Err(e) => ScanPoint {
            omega,
            value: None,
            error: Some(e.to_string()),
        },
    }
}

/// `S(ω₁) = (Γ/2π) Tr[ρ̃₁¹]`.
pub fn spectrum_at(model: &SensorModel, omega: f64) -> Result<f64> {
    let ladder = ConditionalStateLadder::root(model).extend(model, omega)?;
    Ok(model.gamma / (2.0 * PI) * ladder.trace(1, 1).re)
}

pub fn power_spectrum(model: &SensorModel, grid: &SensorGrid, exec: Execution) -> SpectrumScan {
    let root = ConditionalStateLadder::root(model);
    let points = exec.map(grid.frequencies(), |&w| {
        let r = root
            .extend(model, w)
            .map(|l| model.gamma / (2.0 * PI) * l.trace(1, 1).re);
        point(w, r)
    });
    Scan {
        kind: ScanKind::Spectrum,
        gamma: model.gamma,
        fixed_frequencies: Vec::new(),
        points,
        params: model.params,
        rates: model.rates,
    }
}

/// Generic `g^(N)(ω₁ … ω_N)`.
pub fn gn(model: &SensorModel, frequencies: &[f64]) -> Result<f64> {
    ConditionalStateLadder::build(model, frequencies)?.correlation()
}

pub fn g2(model: &SensorModel, omega_1: f64, omega_2: f64) -> Result<f64> {
    gn(model, &[omega_1, omega_2])
}

pub fn g3(model: &SensorModel, omega_1: f64, omega_2: f64, omega_3: f64) -> Result<f64> {
    gn(model, &[omega_1, omega_2, omega_3])
}

/// `g^(N)(ω₁, fixed…)` over the grid; the ladder of the held sensors is
/// solved once and extended per point.
pub fn correlation_scan(
    model: &SensorModel,
    grid: &SensorGrid,
    fixed: &[f64],
    exec: Execution,
) -> Result<CorrelationScan> {
    let kind = match fixed.len() {
        1 => ScanKind::G2,
        2 => ScanKind::G3,
        n => {
            return Err(Error::InvalidParameter {
                name: "fixed",
                reason: format!("correlation scans hold 1 or 2 sensors, got {n}"),
            })
        }
    };
    let base = ConditionalStateLadder::build(model, fixed)?;
    let points = exec.map(grid.frequencies(), |&w| {
        point(w, base.extend(model, w).and_then(|l| l.correlation()))
    });
    Ok(Scan {
        kind,
        gamma: model.gamma,
        fixed_frequencies: fixed.to_vec(),
        points,
        params: model.params,
        rates: model.rates,
    })
}

pub fn g2_scan(
    model: &SensorModel,
    grid: &SensorGrid,
    omega_2: f64,
    exec: Execution,
) -> Result<CorrelationScan> {
    correlation_scan(model, grid, &[omega_2], exec)
}

pub fn g3_scan(
    model: &SensorModel,
    grid: &SensorGrid,
    omega_2: f64,
    omega_3: f64,
    exec: Execution,
) -> Result<CorrelationScan> {
    correlation_scan(model, grid, &[omega_2, omega_3], exec)
}
