//! Mode dispatch and run-directory layout.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use usc_sensor::cascade::{
    correlation_scan, g2, power_spectrum, Scan, ScanKind, ScanPoint, SensorGrid, SensorModel,
};
use usc_sensor::exec::Execution;
use usc_sensor::fock::TruncatedSpace;
use usc_sensor::liouville::{DressedSystem, RateSet};
use usc_sensor::oracle::{
    compare_reports, oracle_g2, oracle_spectrum, sensor_population, DiscrepancyReport,
    SensorCoupling, Tolerance,
};
use usc_sensor::peaks::{find_peaks, parse_symbol, resolve_symbolic_frequency, PeakAssignment};
use usc_sensor::rabi::{
    energy_sweep, field_operator, transition_table, DressedBasis, EnergyRow, RabiParams,
    Transition, DEFAULT_AMPLITUDE_FLOOR,
};
use usc_sensor::SCHEMA_VERSION;

use crate::config::{ComparePoints, FreqSpec, Mode, RunConfig};
use crate::output::{write_energy_csv, write_json, write_scan_csv, write_theta_map_csv};

/// Tolerance on the ε → ε/2 population ratio.
const SCALING_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    /// False when a check in `oracle_check` fails.
    pub pass: bool,
}

#[derive(Debug, Serialize)]
struct ResolvedFrequency {
    name: String,
    spec: FreqSpec,
    omega: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    mode: Mode,
    version: &'a str,
    n_fock: usize,
    n_levels: usize,
    n_levels_converged: Option<usize>,
    fixed: &'a [ResolvedFrequency],
    files: &'a [String],
    pass: bool,
}

#[derive(Debug, Serialize)]
struct PeakSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    fixed_frequencies: Vec<f64>,
    peaks: Vec<PeakAssignment>,
}

#[derive(Debug, Serialize)]
struct PeaksDoc {
    schema_version: u32,
    mode: Mode,
    gamma: f64,
    floor: f64,
    sets: Vec<PeakSet>,
}

#[derive(Debug, Serialize)]
struct ScanDoc<'a> {
    schema_version: u32,
    scan: &'a Scan,
    peaks: &'a [PeakAssignment],
    transitions: &'a [Transition],
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

struct Setup {
    basis: DressedBasis,
    model: SensorModel,
    transitions: Vec<Transition>,
}

fn execution(cfg: &RunConfig) -> Execution {
    if cfg.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn params(cfg: &RunConfig, theta: f64) -> Result<RabiParams> {
    let p = RabiParams::new(cfg.params.omega_q, cfg.params.g, theta)?;
    p.validate()?;
    Ok(p)
}

fn setup(cfg: &RunConfig, theta: f64) -> Result<Setup> {
    let space = TruncatedSpace::new(cfg.n_fock)?;
    let p = params(cfg, theta)?;
    let basis = DressedBasis::compute(space, &p, cfg.n_levels)
        .with_context(|| format!("diagonalizing at theta = {theta}"))?;
    let model = SensorModel::from_basis(&basis, cfg.n_levels, &cfg.rates)?;
    let transitions = transition_table(
        &basis,
        &field_operator(space, p.eta()),
        cfg.n_levels,
        DEFAULT_AMPLITUDE_FLOOR,
    );
    Ok(Setup {
        basis,
        model,
        transitions,
    })
}

fn sensor_grid(cfg: &RunConfig) -> Result<SensorGrid> {
    Ok(SensorGrid::new(cfg.grid.points(), cfg.rates.sensor_gamma)?)
}

/// Resolves against the full basis with a convergence check.
fn resolve(spec: &FreqSpec, basis: &DressedBasis, n_levels: usize, path: &str) -> Result<f64> {
    match spec {
        FreqSpec::Value(v) => Ok(*v),
        FreqSpec::Symbol(s) => {
            let (k, _) = parse_symbol(s).with_context(|| path.to_string())?;
            if k >= n_levels {
                bail!("{path}: {s} needs level {k} but only {n_levels} levels are simulated");
            }
            resolve_symbolic_frequency(s, basis).with_context(|| path.to_string())
        }
    }
}

/// Resolves against a reduced-cutoff system without a convergence check.
fn resolve_reduced(spec: &FreqSpec, system: &DressedSystem, path: &str) -> Result<f64> {
    match spec {
        FreqSpec::Value(v) => Ok(*v),
        FreqSpec::Symbol(s) => {
            let (k, j) = parse_symbol(s).with_context(|| path.to_string())?;
            if k >= system.n_levels {
                bail!(
                    "{path}: {s} needs level {k} but the reduced system keeps {} levels",
                    system.n_levels
                );
            }
            Ok(system.transition_frequency(k, j))
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut w = Writer {
        dir: cfg.out.clone(),
        files: Vec::new(),
    };
    let snapshot = w.path("config.toml");
    fs::write(&snapshot, cfg.to_toml())
        .with_context(|| format!("writing {}", snapshot.display()))?;

    let mut fixed = Vec::new();
    let mut converged = None;
    let pass = match cfg.mode {
        Mode::EnergySweep => {
            energy(cfg, &mut w)?;
            true
        }
        Mode::Spectrum => {
            converged = Some(spectrum(cfg, &mut w)?);
            true
        }
        Mode::SpectrumThetaMap => {
            theta_map(cfg, &mut w)?;
            true
        }
        Mode::G2Scan | Mode::G3Scan => {
            converged = Some(correlations(cfg, &mut w, &mut fixed)?);
            true
        }
        Mode::OracleCheck => oracle_check(cfg, &mut w, &mut fixed)?,
    };

    let manifest_path = w.path("run.json");
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        mode: cfg.mode,
        version: env!("CARGO_PKG_VERSION"),
        n_fock: cfg.n_fock,
        n_levels: cfg.n_levels,
        n_levels_converged: converged,
        fixed: &fixed,
        files: &w.files,
        pass,
    };
    write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome {
        dir: w.dir,
        files: w.files,
        pass,
    })
}

fn write_peaks(cfg: &RunConfig, w: &mut Writer, sets: Vec<PeakSet>) -> Result<()> {
    let doc = PeaksDoc {
        schema_version: SCHEMA_VERSION,
        mode: cfg.mode,
        gamma: cfg.rates.sensor_gamma,
        floor: cfg.peaks.floor,
        sets,
    };
    write_json(&w.path("peaks.json"), &doc)
}

fn energy(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    let space = TruncatedSpace::new(cfg.n_fock)?;
    let g = cfg.g_grid.points();
    eprintln!("energy_sweep: {} couplings", g.len());
    let rows = energy_sweep(
        space,
        cfg.params.omega_q,
        cfg.params.theta,
        &g,
        execution(cfg),
    )?;
    write_energy_csv(&w.path("energies.csv"), &rows)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        schema_version: u32,
        omega_q: f64,
        theta: f64,
        n_fock: usize,
        rows: &'a [EnergyRow],
    }
    write_json(
        &w.path("energies.json"),
        &Doc {
            schema_version: SCHEMA_VERSION,
            omega_q: cfg.params.omega_q,
            theta: cfg.params.theta,
            n_fock: cfg.n_fock,
            rows: &rows,
        },
    )?;
    write_peaks(cfg, w, Vec::new())
}

fn scan_outputs(
    w: &mut Writer,
    stem: &str,
    scan: &Scan,
    peaks: &[PeakAssignment],
    transitions: &[Transition],
) -> Result<()> {
    write_scan_csv(&w.path(&format!("{stem}.csv")), scan)?;
    let doc = ScanDoc {
        schema_version: SCHEMA_VERSION,
        scan,
        peaks,
        transitions,
    };
    write_json(&w.path(&format!("{stem}.json")), &doc)
}

fn spectrum(cfg: &RunConfig, w: &mut Writer) -> Result<usize> {
    let s = setup(cfg, cfg.params.theta)?;
    let grid = sensor_grid(cfg)?;
    if !grid.resolves_peaks() {
        eprintln!("spectrum: warning: grid step exceeds Gamma/5, close peaks may merge");
    }
    eprintln!("spectrum: {} points", grid.len());
    let scan = power_spectrum(&s.model, &grid, execution(cfg));
    let peaks = find_peaks(&scan, cfg.peaks.floor, grid.gamma(), &s.transitions);
    scan_outputs(w, "spectrum", &scan, &peaks, &s.transitions)?;
    write_peaks(
        cfg,
        w,
        vec![PeakSet {
            theta: Some(cfg.params.theta),
            fixed_frequencies: Vec::new(),
            peaks,
        }],
    )?;
    Ok(s.basis.n_levels_converged())
}

fn theta_map(cfg: &RunConfig, w: &mut Writer) -> Result<()> {
    let grid = sensor_grid(cfg)?;
    let thetas = cfg.theta_grid.points();
    let mut rows = Vec::with_capacity(thetas.len());
    let mut sets = Vec::with_capacity(thetas.len());
    for (i, &theta) in thetas.iter().enumerate() {
        eprintln!(
            "spectrum_theta_map: theta {}/{} = {theta:.6}",
            i + 1,
            thetas.len()
        );
        let s = setup(cfg, theta)?;
        let scan = power_spectrum(&s.model, &grid, execution(cfg));
        let peaks = find_peaks(&scan, cfg.peaks.floor, grid.gamma(), &s.transitions);
        sets.push(PeakSet {
            theta: Some(theta),
            fixed_frequencies: Vec::new(),
            peaks,
        });
        rows.push((theta, scan));
    }
    write_theta_map_csv(&w.path("theta_map.csv"), &rows)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        schema_version: u32,
        thetas: &'a [f64],
        scans: Vec<&'a Scan>,
    }
    write_json(
        &w.path("theta_map.json"),
        &Doc {
            schema_version: SCHEMA_VERSION,
            thetas: &thetas,
            scans: rows.iter().map(|(_, s)| s).collect(),
        },
    )?;
    write_peaks(cfg, w, sets)
}

fn correlations(
    cfg: &RunConfig,
    w: &mut Writer,
    fixed: &mut Vec<ResolvedFrequency>,
) -> Result<usize> {
    let s = setup(cfg, cfg.params.theta)?;
    for (path, spec) in cfg.fixed_specs() {
        let omega = resolve(&spec, &s.basis, cfg.n_levels, path)?;
        fixed.push(ResolvedFrequency {
            name: path.trim_start_matches("fixed.").to_string(),
            spec,
            omega,
        });
    }
    let held: Vec<f64> = fixed.iter().map(|f| f.omega).collect();
    let grid = sensor_grid(cfg)?;
    let stem = if cfg.mode == Mode::G2Scan { "g2" } else { "g3" };
    eprintln!(
        "{stem}_scan: {} points, held sensors at {held:?}",
        grid.len()
    );
    let scan = correlation_scan(&s.model, &grid, &held, execution(cfg))?;
    let peaks = find_peaks(&scan, 0.0, grid.gamma(), &s.transitions);
    scan_outputs(w, stem, &scan, &peaks, &s.transitions)?;
    write_peaks(
        cfg,
        w,
        vec![PeakSet {
            theta: Some(cfg.params.theta),
            fixed_frequencies: held,
            peaks,
        }],
    )?;
    Ok(s.basis.n_levels_converged())
}

fn reduced_system(cfg: &RunConfig, n_fock: usize, n_levels: usize) -> Result<DressedSystem> {
    let space = TruncatedSpace::new(n_fock)?;
    let basis = DressedBasis::compute_unchecked(space, &params(cfg, cfg.params.theta)?)?;
    Ok(DressedSystem::new(&basis, n_levels)?)
}

#[derive(Debug, Serialize)]
struct ScalingCheck {
    omega: f64,
    epsilon: f64,
    population: f64,
    population_half: f64,
    ratio: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    schema_version: u32,
    epsilon: f64,
    coupling: SensorCoupling,
    spectrum_pass: bool,
    g2_pass: Option<bool>,
    scaling: ScalingCheck,
    pass: bool,
}

fn oracle_check(
    cfg: &RunConfig,
    w: &mut Writer,
    fixed: &mut Vec<ResolvedFrequency>,
) -> Result<bool> {
    let o = &cfg.oracle;
    let exec = execution(cfg);
    let rates: RateSet = cfg.rates;
    let gamma = rates.sensor_gamma;

    let system = reduced_system(cfg, o.n_fock, o.n_levels)?;
    let model = SensorModel::from_system(&system, &rates, Some(params(cfg, cfg.params.theta)?))?;
    let grid = sensor_grid(cfg)?;
    let full = power_spectrum(&model, &grid, exec);
    let compare_grid = match o.compare {
        ComparePoints::Grid => grid,
        ComparePoints::Peaks => {
            let mut peaks = find_peaks(&full, cfg.peaks.floor, gamma, &[]);
            peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
            let mut at: Vec<f64> = peaks
                .iter()
                .take(o.top_peaks)
                .map(|p| p.omega_peak)
                .collect();
            if at.is_empty() {
                bail!("oracle_check: the perturbative spectrum has no peaks on the grid");
            }
            at.sort_by(f64::total_cmp);
            SensorGrid::new(at, gamma)?
        }
    };
    eprintln!(
        "oracle_check: spectrum at {} points, epsilon = {:e}",
        compare_grid.len(),
        o.epsilon
    );
    let pert = power_spectrum(&model, &compare_grid, exec);
    let orac = oracle_spectrum(&system, &rates, &compare_grid, o.epsilon, o.coupling, exec)?;
    let spectrum_report = compare_reports(&pert, &orac, Tolerance { rel: o.tolerance })?;
    write_json(&w.path("spectrum_discrepancy.json"), &spectrum_report)?;
    write_scan_csv(&w.path("spectrum_perturbative.csv"), &pert)?;
    write_scan_csv(&w.path("spectrum_oracle.csv"), &orac)?;

    let top = pert
        .points
        .iter()
        .filter(|p| p.value.is_some())
        .max_by(|a, b| a.value.unwrap().total_cmp(&b.value.unwrap()))
        .map(|p| p.omega)
        .expect("non-empty comparison grid");
    let n1 = sensor_population(&system, &rates, top, o.epsilon, o.coupling)?;
    let n2 = sensor_population(&system, &rates, top, o.epsilon / 2.0, o.coupling)?;
    let ratio = n1 / n2;
    let scaling = ScalingCheck {
        omega: top,
        epsilon: o.epsilon,
        population: n1,
        population_half: n2,
        ratio,
        pass: (ratio / 4.0 - 1.0).abs() <= SCALING_TOLERANCE,
    };

    let g2_report = if o.g2_points.is_empty() {
        None
    } else {
        let sys2 = reduced_system(cfg, o.g2_n_fock, o.g2_n_levels)?;
        let model2 = SensorModel::from_system(&sys2, &rates, None)?;
        let w2_spec = cfg
            .fixed
            .w2
            .clone()
            .unwrap_or_else(|| FreqSpec::Symbol("w10".into()));
        let w2 = resolve_reduced(&w2_spec, &sys2, "fixed.w2")?;
        fixed.push(ResolvedFrequency {
            name: "w2".into(),
            spec: w2_spec,
            omega: w2,
        });
        let w1: Vec<f64> = o
            .g2_points
            .iter()
            .enumerate()
            .map(|(i, s)| resolve_reduced(s, &sys2, &format!("oracle.g2_points[{i}]")))
            .collect::<Result<_>>()?;
        eprintln!("oracle_check: g2 at {} points", w1.len());
        let scan_of = |values: Vec<ScanPoint>| Scan {
            kind: ScanKind::G2,
            gamma,
            fixed_frequencies: vec![w2],
            points: values,
            params: None,
            rates: Some(rates),
        };
        let to_point = |omega: f64, r: usc_sensor::Result<f64>| ScanPoint {
            omega,
            value: r.as_ref().ok().copied(),
            error: r.err().map(|e| e.to_string()),
        };
        let pert = scan_of(
            w1.iter()
                .map(|&x| to_point(x, g2(&model2, x, w2)))
                .collect(),
        );
        let orac = scan_of(exec.map(&w1, |&x| {
            to_point(x, oracle_g2(&sys2, &rates, x, w2, o.epsilon, o.coupling))
        }));
        let report = compare_reports(
            &pert,
            &orac,
            Tolerance {
                rel: o.g2_tolerance,
            },
        )?;
        write_json(&w.path("g2_discrepancy.json"), &report)?;
        Some(report)
    };

    let pass = spectrum_report.pass && scaling.pass && g2_report.as_ref().is_none_or(|r| r.pass);
    for (name, r) in [
        ("spectrum", Some(&spectrum_report)),
        ("g2", g2_report.as_ref()),
    ] {
        if let Some(r) = r {
            report_line(name, r);
        }
    }
    eprintln!(
        "oracle_check: epsilon scaling ratio {ratio:.4} ({})",
        if scaling.pass { "pass" } else { "FAIL" }
    );
    let summary = OracleSummary {
        schema_version: SCHEMA_VERSION,
        epsilon: o.epsilon,
        coupling: o.coupling,
        spectrum_pass: spectrum_report.pass,
        g2_pass: g2_report.as_ref().map(|r| r.pass),
        scaling,
        pass,
    };
    write_json(&w.path("oracle_summary.json"), &summary)?;
    write_peaks(
        cfg,
        w,
        vec![PeakSet {
            theta: Some(cfg.params.theta),
            fixed_frequencies: Vec::new(),
            peaks: find_peaks(&full, cfg.peaks.floor, gamma, &[]),
        }],
    )?;
    Ok(pass)
}

fn report_line(name: &str, r: &DiscrepancyReport) {
    eprintln!(
        "oracle_check: {name}: max rel err {:.3e} at tolerance {:.3e} ({})",
        r.max_rel_err,
        r.tolerance.rel,
        if r.pass { "pass" } else { "FAIL" }
    );
}
