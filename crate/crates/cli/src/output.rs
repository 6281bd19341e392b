//! CSV and JSON writers for run directories.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use usc_sensor::cascade::Scan;
use usc_sensor::rabi::EnergyRow;

/// Decimal with 9 significant digits; scientific outside `[1e-6, 1e9)`.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let a = x.abs();
    if !(1e-6..1e9).contains(&a) {
        return format!("{x:.8e}");
    }
    // Rounding can carry into the next decade, so format via the exponent
    // of the rounded value.
    let rounded: f64 = format!("{x:.8e}").parse().unwrap();
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (8 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// `omega_1,value`; missing points are written as NaN.
pub fn write_scan_csv(path: &Path, scan: &Scan) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["omega_1", "value"])?;
    for p in &scan.points {
        w.write_record([sig9(p.omega), sig9(p.value.unwrap_or(f64::NAN))])?;
    }
    w.flush()?;
    Ok(())
}

/// `theta,omega_1,value` in long format.
pub fn write_theta_map_csv(path: &Path, rows: &[(f64, Scan)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["theta", "omega_1", "value"])?;
    for (theta, scan) in rows {
        for p in &scan.points {
            w.write_record([
                sig9(*theta),
                sig9(p.omega),
                sig9(p.value.unwrap_or(f64::NAN)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `g,E_0..E_{n-1},parity_0..parity_{n-1}`.
pub fn write_energy_csv(path: &Path, rows: &[EnergyRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.energies.len());
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("g".to_string())
        .chain((0..n).map(|i| format!("E_{i}")))
        .chain((0..n).map(|i| format!("parity_{i}")))
        .collect();
    w.write_record(&header)?;
    for r in rows {
        let rec: Vec<String> = std::iter::once(sig9(r.g))
            .chain(r.energies.iter().map(|&e| sig9(e)))
            .chain(r.parity.iter().map(|p| p.as_str().to_string()))
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.702839171234), "0.702839171");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(-0.046035244863022), "-0.0460352449");
        assert_eq!(sig9(12.3456789012), "12.3456789");
        assert_eq!(sig9(9.999999999), "10.0000000");
        assert_eq!(sig9(1.5e-9), "1.50000000e-9");
        assert_eq!(sig9(0.0), "0.00000000");
        assert_eq!(sig9(f64::NAN), "NaN");
        for x in [0.123456789123, 3.25987654321, 2.5e-3, 7.77e5] {
            let back: f64 = sig9(x).parse().unwrap();
            assert!((back - x).abs() <= 5e-9 * x.abs());
        }
    }
}
