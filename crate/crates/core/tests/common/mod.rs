#![allow(dead_code)]

pub mod transcription;

use std::f64::consts::PI;

use usc_sensor::cascade::SensorModel;
use usc_sensor::fock::TruncatedSpace;
use usc_sensor::liouville::{DressedSystem, RateSet};
use usc_sensor::rabi::{DressedBasis, RabiParams};

pub const THETA_X: f64 = PI / 2.0;
pub const THETA_MIXED: f64 = PI / 6.0;
pub const N_FOCK: usize = 20;
pub const N_LEVELS: usize = 12;

/// Lowest 12 eigenvalues at ω_q = ω_c = 1, g = 0.3, from an independent
/// dense diagonalization in NumPy at n_fock = 80.
pub const REFERENCE_EIGS_X: [f64; 12] = [
    -0.046035244863022,
    0.656807663091914,
    1.24862989188256,
    1.537583549695791,
    2.36227366585417,
    2.450301358261379,
    3.381361649898571,
    3.442636343137406,
    4.325962914461844,
    4.503036262401357,
    5.282114777622774,
    5.548079771408549,
];

pub const REFERENCE_EIGS_MIXED: [f64; 12] = [
    -0.079771244899389,
    0.786640497164577,
    1.04457170601224,
    1.75858686163451,
    2.064253390404718,
    2.755647326045346,
    3.062314364770685,
    3.765606021317349,
    4.05026067903502,
    4.781845734793346,
    5.033680684818846,
    5.800235073591552,
];

pub fn basis(theta: f64, n_fock: usize) -> DressedBasis {
    let space = TruncatedSpace::new(n_fock).unwrap();
    let params = RabiParams::new(1.0, 0.3, theta).unwrap();
    DressedBasis::compute(space, &params, N_LEVELS).unwrap()
}

pub fn reduced_system(theta: f64, n_fock: usize, n_levels: usize) -> DressedSystem {
    let space = TruncatedSpace::new(n_fock).unwrap();
    let params = RabiParams::new(1.0, 0.3, theta).unwrap();
    let basis = DressedBasis::compute_unchecked(space, &params).unwrap();
    DressedSystem::new(&basis, n_levels).unwrap()
}

pub fn model(theta: f64) -> (DressedBasis, SensorModel) {
    let b = basis(theta, N_FOCK);
    let m = SensorModel::from_basis(&b, N_LEVELS, &RateSet::reference()).unwrap();
    (b, m)
}
