//! Line-by-line transcription of the nine two-sensor conditional-state
//! equations, using an independent dense LU for every solve.

use nalgebra::DMatrix;
use usc_sensor::cascade::SensorModel;
use usc_sensor::fock::{CMatrix, C64};

const I: C64 = C64::new(0.0, 1.0);

/// `ρ = (L₀ − z)⁻¹ · i·rhs`, with column-stacked vectorization.
fn solve(m: &SensorModel, z: C64, rhs: CMatrix) -> CMatrix {
    let n = rhs.nrows();
    let a = m.liouvillian().generator() - DMatrix::<C64>::identity(n * n, n * n) * z;
    let b = DMatrix::from_column_slice(n * n, 1, (rhs * I).as_slice());
    let x = a.lu().solve(&b).expect("shifted generator is invertible");
    CMatrix::from_column_slice(n, n, x.as_slice())
}

pub struct Direct {
    pub r10_00: CMatrix,
    pub r01_00: CMatrix,
    pub r10_10: CMatrix,
    pub r01_01: CMatrix,
    pub r11_00: CMatrix,
    pub r10_01: CMatrix,
    pub r11_01: CMatrix,
    pub r11_10: CMatrix,
    pub r11_11: CMatrix,
}

/// Subscripts are (sensor 1, sensor 2) on the ket, superscripts on the bra.
pub fn direct(m: &SensorModel, w1: f64, w2: f64) -> Direct {
    let g = m.gamma();
    let x = m.x_prime();
    let xd = x.adjoint();
    let r00 = m.steady_state();
    let r10_00 = solve(m, C64::new(g / 2.0, w1), x * r00);
    let r01_00 = solve(m, C64::new(g / 2.0, w2), x * r00);
    let r00_10 = r10_00.adjoint();
    let r00_01 = r01_00.adjoint();
    let r10_10 = solve(m, C64::new(g, 0.0), x * &r00_10 - &r10_00 * &xd);
    let r01_01 = solve(m, C64::new(g, 0.0), x * &r00_01 - &r01_00 * &xd);
    let r11_00 = solve(m, C64::new(g, w1 + w2), x * &r01_00 + x * &r10_00);
    let r10_01 = solve(m, C64::new(g, w1 - w2), x * &r00_01 - &r10_00 * &xd);
    let r01_10 = r10_01.adjoint();
    let r11_01 = solve(
        m,
        C64::new(1.5 * g, w1),
        x * &r01_01 + x * &r10_01 - &r11_00 * &xd,
    );
    let r11_10 = solve(
        m,
        C64::new(1.5 * g, w2),
        x * &r01_10 - &r11_00 * &xd + x * &r10_10,
    );
    let r01_11 = r11_01.adjoint();
    let r10_11 = r11_10.adjoint();
    let r11_11 = solve(
        m,
        C64::new(2.0 * g, 0.0),
        x * &r01_11 - &r11_01 * &xd + x * &r10_11 - &r11_10 * &xd,
    );
    Direct {
        r10_00,
        r01_00,
        r10_10,
        r01_01,
        r11_00,
        r10_01,
        r11_01,
        r11_10,
        r11_11,
    }
}
