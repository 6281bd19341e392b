//! Peak finding on scans and assignment of peaks to dressed transitions.

use serde::{Deserialize, Serialize};

use crate::cascade::Scan;
use crate::error::{Error, Result};
use crate::rabi::{DressedBasis, Transition};

/// Letter labels of the assigned spectral lines, keyed by `(upper, lower)`.
pub const LINE_LABELS: [(char, usize, usize); 15] = [
    ('A', 5, 4),
    ('B', 3, 2),
    ('C', 1, 0),
    ('D', 3, 1),
    ('E', 5, 3),
    ('F', 7, 4),
    ('G', 4, 2),
    ('H', 2, 0),
    ('I', 4, 1),
    ('J', 7, 3),
    ('K', 2, 1),
    ('L', 4, 3),
    ('M', 5, 2),
    ('N', 3, 0),
    ('O', 5, 1),
];

pub fn line_label(upper: usize, lower: usize) -> Option<char> {
    LINE_LABELS
        .iter()
        .find(|&&(_, k, j)| k == upper && j == lower)
        .map(|&(c, _, _)| c)
}

/// Transition `(upper, lower)` carrying a letter label.
pub fn labelled_transition(label: char) -> Option<(usize, usize)> {
    LINE_LABELS
        .iter()
        .find(|&&(c, _, _)| c == label)
        .map(|&(_, k, j)| (k, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedTransition {
    pub upper: usize,
    pub lower: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAssignment {
    /// Grid point of the maximum.
    pub omega_peak: f64,
    /// Vertex of the parabola through the maximum and its neighbours.
    pub omega_refined: f64,
    pub height: f64,
    /// `None` when no transition lies within `Γ`.
    pub transition: Option<MatchedTransition>,
    pub label: Option<char>,
}

impl PeakAssignment {
    pub fn is_assigned(&self) -> bool {
        self.transition.is_some()
    }

    pub fn matches(&self, upper: usize, lower: usize) -> bool {
        self.transition
            .is_some_and(|t| t.upper == upper && t.lower == lower)
    }
}

/// Indices of strict local maxima. A flat top counts once, at its left end.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Local maxima at or above `floor_fraction · max`, each matched to the
/// nearest transition within `gamma`.
pub fn find_peaks(
    scan: &Scan,
    floor_fraction: f64,
    gamma: f64,
    transitions: &[Transition],
) -> Vec<PeakAssignment> {
    let values = scan.values();
    let finite_max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = floor_fraction * finite_max;
    local_maxima(&values)
        .into_iter()
        .filter(|&i| values[i] >= floor)
        .map(|i| {
            let omega = scan.points[i].omega;
            let mut peak = assign(omega, values[i], gamma, transitions);
            peak.omega_refined = parabolic_vertex(
                [scan.points[i - 1].omega, omega, scan.points[i + 1].omega],
                [values[i - 1], values[i], values[i + 1]],
            );
            peak
        })
        .collect()
}

/// Abscissa of the vertex of the parabola through three points; the middle
/// abscissa when they are collinear.
pub fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (d2 - d1) / (x[2] - x[0]);
    if curvature == 0.0 || !curvature.is_finite() {
        return x[1];
    }
    // Newton form: y = y0 + d1·(t − x0) + c·(t − x0)(t − x1).
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curvature);
    v.clamp(x[0], x[2])
}

fn assign(omega: f64, height: f64, gamma: f64, transitions: &[Transition]) -> PeakAssignment {
    let nearest = transitions
        .iter()
        .filter(|t| (t.frequency - omega).abs() <= gamma)
        .min_by(|a, b| {
            (a.frequency - omega)
                .abs()
                .total_cmp(&(b.frequency - omega).abs())
        });
    PeakAssignment {
        omega_peak: omega,
        omega_refined: omega,
        height,
        transition: nearest.map(|t| MatchedTransition {
            upper: t.upper,
            lower: t.lower,
            frequency: t.frequency,
        }),
        label: nearest.and_then(|t| line_label(t.upper, t.lower)),
    }
}

/// Parses `w<k><j>` (single-digit levels) or `w<k>_<j>`.
pub fn parse_symbol(symbol: &str) -> Result<(usize, usize)> {
    let bad = || Error::UnknownSymbol(symbol.to_string());
    let body = symbol
        .strip_prefix('w')
        .or_else(|| symbol.strip_prefix('ω'))
        .ok_or_else(bad)?;
    let (k, j) = match body.split_once('_') {
        Some((k, j)) => (k, j),
        None if body.len() == 2 && body.is_ascii() => body.split_at(1),
        None => return Err(bad()),
    };
    let parse = |s: &str| {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            Err(bad())
        } else {
            s.parse::<usize>().map_err(|_| bad())
        }
    };
    let (k, j) = (parse(k)?, parse(j)?);
    if k <= j {
        return Err(Error::InvalidParameter {
            name: "symbol",
            reason: format!("{symbol}: upper level must exceed lower level"),
        });
    }
    Ok((k, j))
}

/// `E_k − E_j` for a symbol such as `w31`.
pub fn resolve_symbolic_frequency(symbol: &str, basis: &DressedBasis) -> Result<f64> {
    let (k, j) = parse_symbol(symbol)?;
    let converged = basis.n_levels_converged();
    if k >= converged {
        return Err(Error::UnconvergedLevels {
            requested: k + 1,
            converged,
            n_fock: basis.space().n_fock(),
        });
    }
    Ok(basis.transition_frequency(k, j))
}
