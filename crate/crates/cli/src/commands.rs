//! Subcommand implementations.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::Path;
use std::time::Instant;

use dissipad_core::cavity::{
    effective_model, elimination_times, EffectiveModel, excited_ground, verify_elimination, DrivenCavityParams, EliminationReport, HardwarePreset,
};
use dissipad_core::config::{load_hardware_preset, load_lattice_config, LatticeConfig};
use dissipad_core::fermi_gaussian::{evolve_covariance, order_by_decay, rapidity_spectrum, steady_covariance, PairCovariance};
use dissipad_core::fit::relaxation_rate;
use dissipad_core::io::{fmt_float, spectrum_table, trajectory_table, CsvTable};
use dissipad_core::model::{verify_chiral, LatticeSpec};
use dissipad_core::spin_exact::{
    bond_concurrences, build_spin_liouvillian, dissipative_gap, evolve_density, liouvillian_spectrum, log_times, vacuum, DissipatorSet,
    NoiseConfig, RELAXATION_WINDOW,
};
use dissipad_core::{Error, C64};

use crate::manifest::{self, RunManifest};
use crate::{Cli, Command, Dissipators, Initial, NoiseKind, System};

/// Largest register for which the dense spin spectrum is computed.
pub const SPECTRUM_SITE_CAP: usize = 6;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::Parse { .. }) | CliError::Core(Error::Io(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub struct Outcome {
    pub passed: bool,
    pub reasons: Vec<String>,
}

struct Run {
    outcome: Outcome,
    config: serde_json::Value,
    input: Vec<u8>,
    outputs: Vec<String>,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let start = Instant::now();
    std::fs::create_dir_all(&cli.out_dir)?;
    let (name, run) = match &cli.command {
        Command::Verify { config } => ("verify", verify(cli, config)?),
        Command::Spectrum { config, system, v2, k } => ("spectrum", spectrum(cli, config, *system, v2, *k)?),
        Command::Evolve { config, system, tmax, points, observables, initial } => {
            ("evolve", evolve(cli, config, *system, *tmax, *points, observables, *initial)?)
        }
        Command::Robustness { config, noise_grid, noise, dissipators, v2 } => {
            ("robustness", robustness(cli, config, noise_grid, *noise, *dissipators, v2)?)
        }
        Command::Cavity { preset, kappa_sweep } => ("cavity", cavity(cli, preset.as_deref(), *kappa_sweep)?),
    };
    let args = json!({ "command": format!("{:?}", cli.command), "seed": cli.seed });
    let m = RunManifest {
        command: name.into(),
        input_hash: manifest::input_hash(&run.input, &args),
        config: run.config,
        outputs: run.outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    manifest::write(&cli.out_dir, &m)?;
    Ok(run.outcome)
}

fn load(config: &Path) -> CliResult<(LatticeConfig, LatticeSpec, Vec<u8>)> {
    let input = std::fs::read(config).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", config.display())))?;
    let cfg = load_lattice_config(config)?;
    let spec = cfg.to_spec()?;
    Ok((cfg, spec, input))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(name.into())
}

fn write_csv(dir: &Path, name: &str, table: &CsvTable) -> CliResult<String> {
    table.write(&dir.join(name))?;
    Ok(name.into())
}

fn snapshot(cfg: &LatticeConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn verify(cli: &Cli, config: &Path) -> CliResult<Run> {
    let (cfg, spec, input) = load(config)?;
    let report = verify_chiral(&spec)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
    let out = write_json(&cli.out_dir, "verify.json", &report)?;
    Ok(Run {
        outcome: Outcome { passed: report.passed(), reasons: report.notes.clone() },
        config: snapshot(&cfg),
        input,
        outputs: vec![out],
    })
}

fn spectrum(cli: &Cli, config: &Path, system: System, v2s: &[f64], k: usize) -> CliResult<Run> {
    let (cfg, spec, input) = load(config)?;
    let v2s: Vec<f64> = if v2s.is_empty() { vec![cfg.v2] } else { v2s.to_vec() };
    if system == System::Spin && spec.n_sites() > SPECTRUM_SITE_CAP {
        return Err(Error::DimensionCap { sites: spec.n_sites(), cap: SPECTRUM_SITE_CAP }.into());
    }
    let noise = cfg.noise()?;
    let rows: Vec<(f64, Vec<C64>, f64)> = v2s
        .par_iter()
        .map(|&v2| -> CliResult<(f64, Vec<C64>, f64)> {
            let s = spec.clone().with_v2(v2)?;
            match system {
                System::Fermion => {
                    let rap = rapidity_spectrum(&s)?;
                    Ok((v2, rap.slowest_liouvillian_eigenvalues(k), rap.gap))
                }
                System::Spin => {
                    let l = build_spin_liouvillian(&s, &noise, DissipatorSet::SingleBetaL)?;
                    let mut ev = liouvillian_spectrum(&l)?;
                    let gap = dissipative_gap(&ev, 1e-9);
                    order_by_decay(&mut ev);
                    ev.truncate(k);
                    Ok((v2, ev, gap))
                }
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = CsvTable::new(&["v2", "index", "re", "im"]);
    let mut gaps = CsvTable::new(&["v2", "gap"]);
    for (v2, ev, gap) in &rows {
        for r in spectrum_table(ev).rows {
            table.push([vec![fmt_float(*v2)], r].concat());
        }
        gaps.push(vec![fmt_float(*v2), fmt_float(*gap)]);
    }
    let outputs = vec![write_csv(&cli.out_dir, "spectrum.csv", &table)?, write_csv(&cli.out_dir, "gaps.csv", &gaps)?];
    let mut snap = snapshot(&cfg);
    snap["system"] = json!(system);
    snap["v2_list"] = json!(v2s);
    snap["k"] = json!(k);
    Ok(Run { outcome: Outcome { passed: true, reasons: vec![] }, config: snap, input, outputs })
}

fn random_state(dim: usize, seed: u64) -> Array2<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi: Vec<C64> = (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Array2::from_shape_fn((dim, dim), |(i, j)| psi[i] * psi[j].conj() / norm)
}

const SPIN_OBSERVABLES: &[&str] = &["number", "parity", "purity", "fidelity", "energy", "trace", "min_eigenvalue"];
const FERMION_OBSERVABLES: &[&str] = &["number", "parity", "energy", "purity_residual"];

#[allow(clippy::too_many_arguments)]
fn evolve(cli: &Cli, config: &Path, system: System, tmax: f64, points: usize, observables: &[String], initial: Initial) -> CliResult<Run> {
    let (cfg, spec, input) = load(config)?;
    if tmax.is_nan() || tmax <= 1e-2 || points < 2 {
        return Err(CliError::Usage("need tmax > 0.01 and at least 2 points".into()));
    }
    let n = spec.n_sites();
    let bonds: Vec<String> = (1..=spec.n_pairs).map(|b| format!("concurrence_{b}")).collect();
    let available: Vec<String> = match system {
        System::Spin => SPIN_OBSERVABLES.iter().map(|s| s.to_string()).chain(bonds.iter().cloned()).collect(),
        System::Fermion => FERMION_OBSERVABLES.iter().map(|s| s.to_string()).collect(),
    };
    let wanted: Vec<String> = if observables.is_empty() { available.clone() } else { observables.to_vec() };
    if let Some(bad) = wanted.iter().find(|w| !available.contains(w)) {
        return Err(CliError::Usage(format!("unknown observable `{bad}` for {system:?}; available: {}", available.join(","))));
    }
    let mut times = vec![0.0];
    times.extend(log_times(1e-2, tmax, points - 1));
    let samples: Vec<(f64, Vec<(String, f64)>)> = match system {
        System::Spin => {
            let l = build_spin_liouvillian(&spec, &cfg.noise()?, DissipatorSet::SingleBetaL)?;
            let rho0 = match initial {
                Initial::Vacuum => vacuum(n),
                Initial::Random => random_state(1 << n, cli.seed),
            };
            evolve_density(&spec, &l, &rho0, &times)?
                .into_iter()
                .map(|o| {
                    let mut all = vec![
                        ("number".to_string(), o.excitation),
                        ("parity".to_string(), o.parity),
                        ("purity".to_string(), o.purity),
                        ("fidelity".to_string(), o.rainbow_fidelity),
                        ("energy".to_string(), o.energy),
                        ("trace".to_string(), o.trace),
                        ("min_eigenvalue".to_string(), o.min_eigenvalue),
                    ];
                    all.extend(bonds.iter().cloned().zip(o.concurrences.iter().cloned()));
                    (o.t, all)
                })
                .collect()
        }
        System::Fermion => {
            if initial == Initial::Random {
                return Err(CliError::Usage("random initial states are only available for the spin system".into()));
            }
            if cfg.gamma_phi > 0.0 || cfg.gamma_rel > 0.0 {
                return Err(CliError::Usage("local noise is only modelled for the spin system".into()));
            }
            evolve_covariance(&spec, &PairCovariance::vacuum(n), &times)?
                .into_iter()
                .zip(&times)
                .map(|(c, &t)| {
                    let all = vec![
                        ("number".to_string(), c.total_number()),
                        ("parity".to_string(), c.parity()),
                        ("energy".to_string(), c.energy(&spec.hopping)),
                        ("purity_residual".to_string(), c.purity_residual()),
                    ];
                    (t, all)
                })
                .collect()
        }
    };
    let series = |name: &str| -> Vec<f64> {
        samples.iter().map(|(_, obs)| obs.iter().find(|(k, _)| k == name).map_or(f64::NAN, |(_, v)| *v)).collect()
    };
    let ss = steady_covariance(&spec).ok();
    let relaxation = ss.map(|ss| {
        let (lo, hi) = RELAXATION_WINDOW;
        let pr: Vec<f64> = series("parity").iter().map(|p| (p - ss.parity()).abs()).collect();
        let nr: Vec<f64> = series("number").iter().map(|x| (x - ss.total_number()).abs()).collect();
        let parity = relaxation_rate(&times[1..], &pr[1..], lo, hi);
        let number = relaxation_rate(&times[1..], &nr[1..], lo, hi);
        let ratio = match (&parity, &number) {
            (Some(p), Some(q)) => q.rate / p.rate,
            _ => f64::NAN,
        };
        json!({ "steady_parity": ss.parity(), "steady_number": ss.total_number(), "parity": parity, "number": number, "number_over_parity": ratio })
    });
    let filtered: Vec<(f64, Vec<(String, f64)>)> =
        samples.into_iter().map(|(t, obs)| (t, obs.into_iter().filter(|(k, _)| wanted.contains(k)).collect())).collect();
    let mut outputs = vec![write_csv(&cli.out_dir, "trajectory.csv", &trajectory_table(&filtered))?];
    if let Some(r) = relaxation {
        outputs.push(write_json(&cli.out_dir, "relaxation.json", &r)?);
    }
    let mut snap = snapshot(&cfg);
    snap["system"] = json!(system);
    snap["tmax"] = json!(tmax);
    snap["points"] = json!(points);
    snap["observables"] = json!(wanted);
    snap["initial"] = json!(initial);
    snap["seed"] = json!(cli.seed);
    Ok(Run { outcome: Outcome { passed: true, reasons: vec![] }, config: snap, input, outputs })
}

fn robustness(
    cli: &Cli,
    config: &Path,
    grid: &[f64],
    kind: NoiseKind,
    dissipators: Dissipators,
    v2_grid: &[f64],
) -> CliResult<Run> {
    let (cfg, spec, input) = load(config)?;
    if grid.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(CliError::Usage("noise rates must be non-negative".into()));
    }
    let v2_grid: Vec<f64> = if v2_grid.is_empty() { DEFAULT_V2_GRID.to_vec() } else { v2_grid.to_vec() };
    let set = match dissipators {
        Dissipators::Single => DissipatorSet::SingleBetaL,
        Dissipators::Pair => DissipatorSet::BetaAAndBetaB,
    };
    let jobs: Vec<(f64, f64)> = grid.iter().flat_map(|&g| v2_grid.iter().map(move |&v| (g, v))).collect();
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(g, v2)| -> CliResult<Vec<f64>> {
            let rate = g * spec.gamma;
            let noise = match kind {
                NoiseKind::Dephasing => NoiseConfig::new(rate, 0.0)?,
                NoiseKind::Relaxation => NoiseConfig::new(0.0, rate)?,
            };
            match bond_concurrences(&spec.clone().with_v2(v2)?, &noise, set) {
                Err(Error::Degenerate(_)) => Ok(vec![f64::NAN; spec.n_pairs]),
                other => Ok(other?),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = CsvTable::new(&["noise", "bond", "v2_opt", "concurrence"]);
    let mut curves = CsvTable::new(&["noise", "v2", "bond", "concurrence"]);
    for (gi, &g) in grid.iter().enumerate() {
        let block = &results[gi * v2_grid.len()..(gi + 1) * v2_grid.len()];
        for b in 0..spec.n_pairs {
            let mut best = (f64::NAN, f64::NAN);
            for (vi, &v2) in v2_grid.iter().enumerate() {
                let c = block[vi][b];
                curves.push(vec![fmt_float(g), fmt_float(v2), (b + 1).to_string(), fmt_float(c)]);
                if c.is_finite() && (best.1.is_nan() || c > best.1) {
                    best = (v2, c);
                }
            }
            table.push(vec![fmt_float(g), (b + 1).to_string(), fmt_float(best.0), fmt_float(best.1)]);
        }
    }
    let outputs =
        vec![write_csv(&cli.out_dir, "robustness.csv", &table)?, write_csv(&cli.out_dir, "robustness_curves.csv", &curves)?];
    let mut snap = snapshot(&cfg);
    snap["noise_grid"] = json!(grid);
    snap["noise"] = json!(kind);
    snap["dissipators"] = json!(dissipators);
    snap["v2_grid"] = json!(v2_grid);
    Ok(Run { outcome: Outcome { passed: true, reasons: vec![] }, config: snap, input, outputs })
}

/// Denser at small v^2, where noisy optima sit.
const DEFAULT_V2_GRID: [f64; 11] = [0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.14, 0.2, 0.3, 0.4];

#[derive(Serialize)]
struct SweepPoint {
    kappa_over_g: f64,
    max_trace_distance: f64,
    rate_error: f64,
}

fn elimination(params: &DrivenCavityParams) -> dissipad_core::Result<EliminationReport> {
    let m = effective_model(params)?;
    verify_elimination(params, &excited_ground(), &elimination_times(&m, 101))
}

/// A resonant coupling suppressed to this fraction of its bare value counts as zero.
const BESSEL_ROOT_TOL: f64 = 1e-6;

fn vanishing_coupling(params: &DrivenCavityParams, m: &EffectiveModel) -> Option<String> {
    [(1, m.g1_eff, params.g_1), (2, m.g2_eff, params.g_2)]
        .into_iter()
        .find(|(_, eff, bare)| eff.abs() <= BESSEL_ROOT_TOL * bare.abs())
        .map(|(k, _, _)| format!("qubit {k} resonant coupling vanishes at a Bessel root; the jump loses its pairing term"))
}

fn cavity(cli: &Cli, preset: Option<&Path>, kappa_sweep: bool) -> CliResult<Run> {
    let (preset_values, input) = match preset {
        Some(p) => {
            let input = std::fs::read(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            (load_hardware_preset(p)?, input)
        }
        None => (HardwarePreset::default(), Vec::new()),
    };
    let params = preset_values.params()?;
    let snap = json!({ "preset": preset_values, "params": params });
    let mhz = |w: f64| w / (2.0 * std::f64::consts::PI);
    let model = match effective_model(&params) {
        Ok(m) => vanishing_coupling(&params, &m).map_or(Ok(m), Err),
        Err(Error::Degenerate(reason)) => Err(reason),
        Err(e) => return Err(e.into()),
    };
    let model = match model {
        Ok(m) => m,
        Err(reason) => {
            let out = write_json(&cli.out_dir, "cavity.json", &json!({ "degenerate": true, "reason": reason }))?;
            return Ok(Run { outcome: Outcome { passed: false, reasons: vec![reason] }, config: snap, input, outputs: vec![out] });
        }
    };
    let report = elimination(&params)?;
    let sweep = if kappa_sweep {
        let points: Vec<SweepPoint> = [5.0, 10.0, 20.0, 40.0]
            .par_iter()
            .map(|&ratio| -> dissipad_core::Result<SweepPoint> {
                let p = DrivenCavityParams { kappa: ratio * model.g, ..params.clone() };
                let r = elimination(&p)?;
                Ok(SweepPoint { kappa_over_g: ratio, max_trace_distance: r.max_trace_distance, rate_error: r.rate_error })
            })
            .collect::<dissipad_core::Result<Vec<_>>>()?;
        Some(points)
    } else {
        None
    };
    let mut reasons = Vec::new();
    if report.rate_error > 0.1 {
        reasons.push(format!("fitted rate off by {:.1}% from 4g^2/kappa", 100.0 * report.rate_error));
    }
    if report.kappa_over_g < 10.0 {
        reasons.push(format!("kappa/g = {:.2} is outside the elimination regime (>= 10)", report.kappa_over_g));
    }
    let body = json!({
        "degenerate": false,
        "effective": model,
        "g1_eff_mhz": mhz(model.g1_eff.abs()),
        "g2_eff_mhz": mhz(model.g2_eff.abs()),
        "rate_mhz": mhz(model.rate),
        "elimination": {
            "kappa_over_g": report.kappa_over_g,
            "v2": report.v2,
            "predicted_rate": report.predicted_rate,
            "fitted_rate": report.fitted_rate,
            "rate_error": report.rate_error,
            "max_trace_distance": report.max_trace_distance,
            "final_dark_population": report.final_dark_population,
        },
        "kappa_sweep": sweep,
    });
    println!("{}", serde_json::to_string_pretty(&body).unwrap_or_default());
    let out = write_json(&cli.out_dir, "cavity.json", &body)?;
    Ok(Run { outcome: Outcome { passed: reasons.is_empty(), reasons }, config: snap, input, outputs: vec![out] })
}
