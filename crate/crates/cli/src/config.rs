//! Run configuration: a TOML file, overridden field by field by flags.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize};
use usc_sensor::liouville::RateSet;
use usc_sensor::oracle::SensorCoupling;
use usc_sensor::peaks::parse_symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    EnergySweep,
    Spectrum,
    SpectrumThetaMap,
    G2Scan,
    G3Scan,
    OracleCheck,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::EnergySweep,
        Mode::Spectrum,
        Mode::SpectrumThetaMap,
        Mode::G2Scan,
        Mode::G3Scan,
        Mode::OracleCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::EnergySweep => "energy_sweep",
            Mode::Spectrum => "spectrum",
            Mode::SpectrumThetaMap => "spectrum_theta_map",
            Mode::G2Scan => "g2_scan",
            Mode::G3Scan => "g3_scan",
            Mode::OracleCheck => "oracle_check",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown mode `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Parses an angle: a number, or a multiple of pi such as `pi/2`, `2pi/3`, `0.5*pi`.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let t = t.replace('π', "pi");
    let Some(pos) = t.find("pi") else {
        return Err(format!("cannot parse angle `{s}`"));
    };
    let (coef, rest) = (t[..pos].trim_end_matches('*'), &t[pos + 2..]);
    let coef = if coef.is_empty() {
        1.0
    } else {
        coef.parse::<f64>()
            .map_err(|_| format!("cannot parse angle `{s}`"))?
    };
    let denom = match rest.strip_prefix('/') {
        Some(d) => d
            .parse::<f64>()
            .map_err(|_| format!("cannot parse angle `{s}`"))?,
        None if rest.is_empty() => 1.0,
        None => return Err(format!("cannot parse angle `{s}`")),
    };
    if denom == 0.0 {
        return Err(format!("zero denominator in angle `{s}`"));
    }
    Ok(coef * PI / denom)
}

fn angle<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(s) => parse_angle(&s).map_err(serde::de::Error::custom),
    }
}

/// A fixed sensor frequency, symbolic (`"w31"`) or numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FreqSpec {
    Value(f64),
    Symbol(String),
}

impl FreqSpec {
    pub fn parse(s: &str) -> Self {
        match s.parse::<f64>() {
            Ok(v) => FreqSpec::Value(v),
            Err(_) => FreqSpec::Symbol(s.to_string()),
        }
    }
}

impl fmt::Display for FreqSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreqSpec::Value(v) => write!(f, "{v}"),
            FreqSpec::Symbol(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(deserialize_with = "angle")]
    pub start: f64,
    #[serde(deserialize_with = "angle")]
    pub stop: f64,
    #[serde(deserialize_with = "angle")]
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("start", self.start),
            ("stop", self.stop),
            ("step", self.step),
        ] {
            if !v.is_finite() {
                bail!("{path}.{name}: must be finite, got {v}");
            }
        }
        if !(self.step > 0.0) {
            bail!("{path}.step: must be positive, got {}", self.step);
        }
        if self.stop < self.start {
            bail!(
                "{path}: empty grid (stop {} is below start {})",
                self.stop,
                self.start
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub omega_q: f64,
    pub g: f64,
    #[serde(deserialize_with = "angle")]
    pub theta: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            omega_q: 1.0,
            g: 0.3,
            theta: PI / 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fixed {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2: Option<FreqSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w3: Option<FreqSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakOptions {
    /// Fraction of the scan maximum below which maxima are ignored.
    pub floor: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self { floor: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparePoints {
    /// Largest perturbative spectrum peaks.
    Peaks,
    /// Every grid point.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleOptions {
    pub epsilon: f64,
    /// `full` (default) or `rotating`.
    pub coupling: SensorCoupling,
    pub tolerance: f64,
    pub n_fock: usize,
    pub n_levels: usize,
    pub compare: ComparePoints,
    pub top_peaks: usize,
    /// Cutoff and levels for the two-sensor g² check.
    pub g2_n_fock: usize,
    pub g2_n_levels: usize,
    pub g2_tolerance: f64,
    /// Sensor-1 frequencies of the g² check.
    pub g2_points: Vec<FreqSpec>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            coupling: SensorCoupling::Full,
            tolerance: 0.02,
            n_fock: 10,
            n_levels: 10,
            compare: ComparePoints::Peaks,
            top_peaks: 3,
            g2_n_fock: 6,
            g2_n_levels: 8,
            g2_tolerance: 0.05,
            g2_points: ["w31", "w41", "w32", "w42", "w20"]
                .into_iter()
                .map(|s| FreqSpec::Symbol(s.into()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub n_fock: usize,
    pub n_levels: usize,
    pub out: PathBuf,
    pub sequential: bool,
    pub params: Params,
    pub rates: RateSet,
    /// Sensor frequency grid.
    pub grid: Grid,
    pub theta_grid: Grid,
    pub g_grid: Grid,
    pub fixed: Fixed,
    pub peaks: PeakOptions,
    pub oracle: OracleOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rates = RateSet::reference();
        Self {
            mode: Mode::Spectrum,
            n_fock: 20,
            n_levels: 12,
            out: PathBuf::from("runs/latest"),
            sequential: false,
            params: Params::default(),
            rates,
            grid: Grid {
                start: 0.0,
                stop: 2.5,
                step: rates.sensor_gamma / 5.0,
            },
            theta_grid: Grid {
                start: 0.0,
                stop: PI,
                step: PI / 24.0,
            },
            g_grid: Grid {
                start: 0.0,
                stop: 1.0,
                step: 0.01,
            },
            fixed: Fixed::default(),
            peaks: PeakOptions::default(),
            oracle: OracleOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("config: {}", e.to_string().trim_end()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Held sensor frequencies for the current mode, with the figure
    /// defaults when none are given.
    pub fn fixed_specs(&self) -> Vec<(&'static str, FreqSpec)> {
        let sym = |s: &str| FreqSpec::Symbol(s.into());
        match self.mode {
            Mode::G2Scan => vec![(
                "fixed.w2",
                self.fixed.w2.clone().unwrap_or_else(|| sym("w10")),
            )],
            Mode::G3Scan => vec![
                (
                    "fixed.w2",
                    self.fixed.w2.clone().unwrap_or_else(|| sym("w31")),
                ),
                (
                    "fixed.w3",
                    self.fixed.w3.clone().unwrap_or_else(|| sym("w10")),
                ),
            ],
            Mode::OracleCheck => self
                .fixed
                .w2
                .clone()
                .map(|w| vec![("fixed.w2", w)])
                .unwrap_or_default(),
            _ => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(p.omega_q > 0.0) || !p.omega_q.is_finite() {
            bail!("params.omega_q: must be positive, got {}", p.omega_q);
        }
        if !(p.g >= 0.0) || !p.g.is_finite() {
            bail!("params.g: must be non-negative, got {}", p.g);
        }
        if !p.theta.is_finite() {
            bail!("params.theta: must be finite, got {}", p.theta);
        }
        if self.n_fock < 1 {
            bail!("n_fock: must be at least 1");
        }
        if self.n_levels < 2 {
            bail!("n_levels: must be at least 2, got {}", self.n_levels);
        }
        for (name, v) in [
            ("kappa", self.rates.kappa),
            ("gamma", self.rates.gamma),
            ("Gamma", self.rates.sensor_gamma),
            ("p_inc", self.rates.p_inc),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                bail!("rates.{name}: must be finite and non-negative, got {v}");
            }
        }
        if self.mode != Mode::EnergySweep && !(self.rates.sensor_gamma > 0.0) {
            bail!("rates.Gamma: sensor linewidth must be positive");
        }
        match self.mode {
            Mode::EnergySweep => self.g_grid.validate("g_grid")?,
            Mode::SpectrumThetaMap => {
                self.grid.validate("grid")?;
                self.theta_grid.validate("theta_grid")?;
            }
            _ => self.grid.validate("grid")?,
        }
        if !(self.peaks.floor >= 0.0 && self.peaks.floor < 1.0) {
            bail!("peaks.floor: must lie in [0, 1), got {}", self.peaks.floor);
        }
        for (path, spec) in self.fixed_specs() {
            check_spec(path, &spec)?;
        }
        if self.mode == Mode::OracleCheck {
            let o = &self.oracle;
            if !(o.epsilon > 0.0) {
                bail!("oracle.epsilon: must be positive, got {}", o.epsilon);
            }
            if !(o.tolerance > 0.0) || !(o.g2_tolerance > 0.0) {
                bail!("oracle.tolerance: must be positive");
            }
            if o.n_fock < 1 || o.g2_n_fock < 1 {
                bail!("oracle.n_fock: must be at least 1");
            }
            if o.top_peaks == 0 {
                bail!("oracle.top_peaks: must be at least 1");
            }
            for (i, spec) in o.g2_points.iter().enumerate() {
                check_spec(&format!("oracle.g2_points[{i}]"), spec)?;
            }
        }
        Ok(())
    }
}

fn check_spec(path: &str, spec: &FreqSpec) -> Result<()> {
    match spec {
        FreqSpec::Value(v) if !v.is_finite() => bail!("{path}: must be finite, got {v}"),
        FreqSpec::Value(_) => Ok(()),
        FreqSpec::Symbol(s) => parse_symbol(s)
            .map(|_| ())
            .map_err(|e| anyhow::anyhow!("{path}: {e}")),
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub theta: Option<f64>,
    pub g: Option<f64>,
    pub n_fock: Option<usize>,
    pub n_levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub grid_start: Option<f64>,
    pub grid_stop: Option<f64>,
    pub grid_step: Option<f64>,
    /// `(name, value)` pairs from `--fixed name=value`.
    pub fixed: Vec<(String, String)>,
    pub oracle_epsilon: Option<f64>,
    pub sequential: bool,
}

impl Overrides {
    /// The grid flags address the coupling grid in `energy_sweep` and the
    /// sensor grid everywhere else.
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(v) = self.theta {
            cfg.params.theta = v;
        }
        if let Some(v) = self.g {
            cfg.params.g = v;
        }
        if let Some(v) = self.n_fock {
            cfg.n_fock = v;
        }
        if let Some(v) = self.n_levels {
            cfg.n_levels = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        let grid = if cfg.mode == Mode::EnergySweep {
            &mut cfg.g_grid
        } else {
            &mut cfg.grid
        };
        if let Some(v) = self.grid_start {
            grid.start = v;
        }
        if let Some(v) = self.grid_stop {
            grid.stop = v;
        }
        if let Some(v) = self.grid_step {
            grid.step = v;
        }
        for (name, value) in &self.fixed {
            let spec = FreqSpec::parse(value);
            match name.as_str() {
                "w2" => cfg.fixed.w2 = Some(spec),
                "w3" => cfg.fixed.w3 = Some(spec),
                other => bail!("--fixed: unknown sensor `{other}` (expected w2 or w3)"),
            }
        }
        if let Some(v) = self.oracle_epsilon {
            cfg.oracle.epsilon = v;
        }
        if self.sequential {
            cfg.sequential = true;
        }
        Ok(cfg)
    }
}

/// Splits `--fixed w2=w31`.
pub fn parse_fixed(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    if k.trim().is_empty() || v.trim().is_empty() {
        return Err(format!("expected NAME=VALUE, got `{s}`"));
    }
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!((parse_angle("pi/2").unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((parse_angle("2pi/3").unwrap() - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((parse_angle("0.5*pi").unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((parse_angle("π/6").unwrap() - PI / 6.0).abs() < 1e-15);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("half").is_err());
    }

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::from_toml("[params]\ngee = 0.3\n").unwrap_err();
        assert!(format!("{err:#}").contains("gee"), "{err:#}");
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.grid.stop = -1.0;
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.starts_with("grid:"), "{e}");
        cfg = RunConfig::default();
        cfg.mode = Mode::G2Scan;
        cfg.fixed.w2 = Some(FreqSpec::Symbol("w01".into()));
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.starts_with("fixed.w2:"), "{e}");
    }

    #[test]
    fn flags_win() {
        let cfg = RunConfig::from_toml("mode = \"g2_scan\"\n[params]\ng = 0.1\ntheta = \"pi/6\"\n")
            .unwrap();
        assert!((cfg.params.theta - PI / 6.0).abs() < 1e-15);
        let o = Overrides {
            g: Some(0.3),
            grid_step: Some(2e-3),
            fixed: vec![("w2".into(), "w21".into())],
            ..Default::default()
        };
        let cfg = o.apply(cfg).unwrap();
        assert_eq!(cfg.params.g, 0.3);
        assert_eq!(cfg.grid.step, 2e-3);
        assert_eq!(cfg.fixed.w2, Some(FreqSpec::Symbol("w21".into())));
        let bad = Overrides {
            fixed: vec![("w4".into(), "w10".into())],
            ..Default::default()
        };
        assert!(bad.apply(RunConfig::default()).is_err());
    }
}
