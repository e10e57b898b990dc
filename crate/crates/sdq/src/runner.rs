//! Experiment orchestration: runs the subcommand workloads, writes CSV/JSON
//! outputs, and drops a run manifest next to every artifact.
//!
//! CSV files use '.' decimals, a header row, and LF line endings. The
//! manifest embeds the fully resolved config (post command-line overrides),
//! its SHA-256, and the produced file list, so outputs are reproducible from
//! the manifest alone.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analyzer::{self, AnalyzerError, LawSource, LimitDensity};
use crate::clocks::{self, ClocksError};
use crate::config::{ConfigError, ExperimentConfig};
use crate::diffusion::{self, DiffusionError, RbmOptions};
use crate::palm;
use crate::profile::ScaledSystem;
use crate::simulator::{self, RunOptions, SimulatorError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] SimulatorError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
    #[error(transparent)]
    Clocks(#[from] ClocksError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config has no `{0}` section, required by this command")]
    MissingSection(&'static str),
}

/// Per-command run-scale overrides (from command-line flags). The
/// instability override is not config state; commands take it directly.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub events: Option<u64>,
    pub replications: Option<u32>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(events) = self.events {
            config.events = events;
        }
        if let Some(replications) = self.replications {
            config.replications = replications;
        }
        if let Some(out) = &self.out {
            config.outputs = out.display().to_string();
        }
    }
}

pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    /// One-line-per-item human summary for stdout.
    pub summary: Vec<String>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunnerError> {
    fs::create_dir_all(dir).map_err(|source| RunnerError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunnerError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, RunnerError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_file(dir, name, &text)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    files: &[PathBuf],
) -> Result<PathBuf, RunnerError> {
    let canonical = serde_json::to_string(config).expect("serializable");
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hex,
        config,
        outputs: files
            .iter()
            .map(|p| {
                p.file_name()
                    .map(|f| f.to_string_lossy().into_owned())
                    .unwrap_or_default()
            })
            .collect(),
    };
    write_json(dir, &format!("manifest_{command}.json"), &manifest)
}

fn law_csv(law: &simulator::EmpiricalLaw) -> String {
    let sqrt_n = (law.n as f64).sqrt();
    let mut out = String::from("ell,scaled_u,mass\n");
    for (ell, mass) in law.masses() {
        let _ = writeln!(out, "{ell},{},{mass}", ell as f64 / sqrt_n);
    }
    out
}

#[derive(Serialize)]
struct LawDump {
    n: u64,
    seed: u64,
    events: u64,
    burn_in_fraction: f64,
    replications: u32,
    total_time: f64,
    horizon: f64,
    burn_in: f64,
    arrivals: u64,
    departures: u64,
    masses: Vec<(u64, f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    advisories: Vec<String>,
}

fn law_json(
    law: &simulator::EmpiricalLaw,
    config: &ExperimentConfig,
    advisories: &[String],
) -> LawDump {
    let sqrt_n = (law.n as f64).sqrt();
    LawDump {
        n: law.n,
        seed: config.seed,
        events: config.events,
        burn_in_fraction: config.burn_in_fraction,
        replications: law.replications,
        total_time: law.total_time,
        horizon: law.horizon,
        burn_in: law.burn_in,
        arrivals: law.arrivals,
        departures: law.departures,
        masses: law
            .masses()
            .map(|(ell, m)| (ell, ell as f64 / sqrt_n, m))
            .collect(),
        advisories: advisories.to_vec(),
    }
}

fn run_options(config: &ExperimentConfig, sys: &ScaledSystem, allow_unstable: bool) -> RunOptions {
    RunOptions {
        events: config.events,
        burn_in_fraction: config.burn_in_fraction,
        seed: config.seed,
        stream: 0,
        probes: config.effective_probes(&sys.profile),
        allow_unstable,
        ..RunOptions::default()
    }
}

#[derive(Serialize)]
struct PalmIdentities {
    intensity: palm::IntensityReport,
    boundary: palm::BoundaryReport,
}

fn palm_csv(
    law: &simulator::EmpiricalLaw,
    acc: &palm::PalmAccumulators,
    sys: &ScaledSystem,
    probes: &[f64],
) -> String {
    let mut out = String::from("x,q,h_hat,h_stderr,delta_hat,delta_stderr,epochs_used,insufficient\n");
    for &x in probes {
        let h = palm::estimate_h(acc, sys, x);
        let d = palm::estimate_delta(acc, law, sys, x);
        let _ = writeln!(
            out,
            "{x},{},{},{},{},{},{},{}",
            h.q, h.value, h.stderr, d.value, d.stderr, h.epochs_used, h.insufficient
        );
    }
    out
}

/// `simulate`: per-`n` law (CSV + JSON) and Palm report.
pub fn cmd_simulate(
    config: &ExperimentConfig,
    allow_unstable: bool,
) -> Result<CommandOutcome, RunnerError> {
    simulate_inner(config, allow_unstable, true, "simulate")
}

/// `palm-report`: same run as `simulate`, emitting only the Palm artifacts.
pub fn cmd_palm_report(
    config: &ExperimentConfig,
    allow_unstable: bool,
) -> Result<CommandOutcome, RunnerError> {
    simulate_inner(config, allow_unstable, false, "palm-report")
}

fn simulate_inner(
    config: &ExperimentConfig,
    allow_unstable: bool,
    emit_law: bool,
    command: &str,
) -> Result<CommandOutcome, RunnerError> {
    let dir = PathBuf::from(&config.outputs);
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for &n in &config.n_list {
        let sys = config.system(n)?;
        let advisories = sys.advisories();
        for note in &advisories {
            summary.push(format!("n={n}: note: {note}"));
        }
        let opts = run_options(config, &sys, allow_unstable);
        let (law, acc) = simulator::run_replicated(&sys, &opts, config.replications)?;
        if emit_law {
            files.push(write_file(&dir, &format!("law_n{n}.csv"), &law_csv(&law))?);
            files.push(write_json(
                &dir,
                &format!("law_n{n}.json"),
                &law_json(&law, config, &advisories),
            )?);
        }
        let probes = config.effective_probes(&sys.profile);
        files.push(write_file(
            &dir,
            &format!("palm_n{n}.csv"),
            &palm_csv(&law, &acc, &sys, &probes),
        )?);
        let identities = PalmIdentities {
            intensity: palm::intensity_identity_report(&law, &acc, &sys),
            boundary: palm::boundary_identity_report(law.masses(), &sys),
        };
        files.push(write_json(
            &dir,
            &format!("palm_identities_n{n}.json"),
            &identities,
        )?);
        summary.push(format!(
            "n={n}: {} events over {} replications, alpha_e={:.6}, boundary rel_err={:.4}",
            law.arrivals + law.departures,
            law.replications,
            identities.intensity.alpha_e,
            identities.boundary.rel_err,
        ));
    }
    files.push(write_manifest(&dir, command, config, &files)?);
    Ok(CommandOutcome { files, summary })
}

#[derive(Serialize)]
struct LimitDump {
    c: f64,
    levels: Vec<f64>,
    grid: Vec<(f64, f64, f64)>,
}

fn build_density(config: &ExperimentConfig) -> Result<LimitDensity, RunnerError> {
    let profile = config.model.build()?;
    Ok(analyzer::limit_density(
        &profile,
        &config.arrival_spec()?,
        &config.service_spec()?,
    )?)
}

/// `limit`: closed-form limit density sampled on a grid.
pub fn cmd_limit(config: &ExperimentConfig) -> Result<CommandOutcome, RunnerError> {
    let dir = PathBuf::from(&config.outputs);
    let density = build_density(config)?;
    let upper = density.upper_hint();
    let grid = density.sample_grid(upper, 1001);
    let mut csv = String::from("u,h,cdf\n");
    for &(u, h, cdf) in &grid {
        let _ = writeln!(csv, "{u},{h},{cdf}");
    }
    let mut files = vec![
        write_file(&dir, "limit_grid.csv", &csv)?,
        write_json(
            &dir,
            "limit_density.json",
            &LimitDump {
                c: density.c(),
                levels: density.levels().to_vec(),
                grid,
            },
        )?,
    ];
    files.push(write_manifest(&dir, "limit", config, &files)?);
    let summary = vec![format!(
        "limit density: C={:.9}, h(0)={:.9}, levels={:?}",
        density.c(),
        density.h(0.0),
        density.levels()
    )];
    Ok(CommandOutcome { files, summary })
}

/// `compare`: convergence table of scaled laws against the limit density.
pub fn cmd_compare(
    config: &ExperimentConfig,
    simulate: bool,
    allow_unstable: bool,
) -> Result<CommandOutcome, RunnerError> {
    let dir = PathBuf::from(&config.outputs);
    let density = build_density(config)?;
    let systems: Result<Vec<ScaledSystem>, _> =
        config.n_list.iter().map(|&n| config.system(n)).collect();
    let systems = systems?;
    if !allow_unstable {
        for sys in &systems {
            let report = sys.stability_report();
            if !report.stable {
                return Err(SimulatorError::Unstable {
                    gamma_inf: report.gamma_inf,
                }
                .into());
            }
        }
    }
    let source = if simulate {
        LawSource::Simulation {
            events: config.events,
            burn_in_fraction: config.burn_in_fraction,
            seed: config.seed,
            replications: config.replications,
        }
    } else {
        LawSource::Oracle
    };
    let table = analyzer::convergence_study(&systems, &density, &source)?;
    let mut csv = String::from("n,ks,boundary_mass\n");
    for row in &table.rows {
        let _ = writeln!(csv, "{},{},{}", row.n, row.ks, row.boundary_mass);
    }
    let mut files = vec![
        write_file(&dir, "compare.csv", &csv)?,
        write_json(&dir, "compare.json", &table)?,
    ];
    files.push(write_manifest(&dir, "compare", config, &files)?);
    let summary = vec![format!(
        "convergence over n={:?}: KS {:?}, monotone: {:?}",
        config.n_list,
        table.rows.iter().map(|r| r.ks).collect::<Vec<_>>(),
        table.monotone
    )];
    Ok(CommandOutcome { files, summary })
}

#[derive(Serialize)]
struct DiffusionDump {
    delta: f64,
    steps: u64,
    seed: u64,
    interior_reflection_rate: f64,
    boundary_fraction: f64,
    masses: Vec<(usize, f64, f64)>,
}

/// `diffusion`: reflected Euler run against the config's limit fields.
pub fn cmd_diffusion(config: &ExperimentConfig) -> Result<CommandOutcome, RunnerError> {
    let dir = PathBuf::from(&config.outputs);
    let density = build_density(config)?;
    let section = config
        .diffusion
        .clone()
        .ok_or(RunnerError::MissingSection("diffusion"))?;
    let opts = RbmOptions {
        delta: section.delta,
        steps: section.steps,
        burn_in: section.burn_in.unwrap_or(section.steps / 10),
        seed: config.seed,
        ..RbmOptions::default()
    };
    let run = diffusion::simulate_rbm(&density, &opts)?;
    let mut csv = String::from("ell,scaled_u,mass\n");
    let mut masses = Vec::new();
    for (i, &(u, m)) in run.law.atoms().iter().enumerate() {
        let _ = writeln!(csv, "{i},{u},{m}");
        masses.push((i, u, m));
    }
    let mut files = vec![
        write_file(&dir, "diffusion_law.csv", &csv)?,
        write_json(
            &dir,
            "diffusion_law.json",
            &DiffusionDump {
                delta: opts.delta,
                steps: opts.steps,
                seed: opts.seed,
                interior_reflection_rate: run.interior_reflection_rate,
                boundary_fraction: run.boundary_fraction,
                masses,
            },
        )?,
    ];
    files.push(write_manifest(&dir, "diffusion", config, &files)?);
    let summary = vec![format!(
        "diffusion: {} steps at delta={}, interior reflection rate {:.3e}",
        opts.steps, opts.delta, run.interior_reflection_rate
    )];
    Ok(CommandOutcome { files, summary })
}

/// `clocks`: clock solutions over the config's theta grid and n list.
pub fn cmd_clocks(config: &ExperimentConfig) -> Result<CommandOutcome, RunnerError> {
    let dir = PathBuf::from(&config.outputs);
    let arrival = config.arrival_spec()?;
    let service = config.service_spec()?;
    let thetas = if config.theta_grid.is_empty() {
        vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
    } else {
        config.theta_grid.clone()
    };
    let mut csv = String::from("theta,n,eta,zeta,residual_eta,residual_zeta\n");
    for &n in &config.n_list {
        for &theta in &thetas {
            let sol = clocks::solve_clocks(&arrival, &service, theta, n)?;
            let _ = writeln!(
                csv,
                "{theta},{n},{},{},{},{}",
                sol.eta, sol.zeta, sol.residual_eta, sol.residual_zeta
            );
        }
    }
    let mut files = vec![write_file(&dir, "clocks.csv", &csv)?];
    files.push(write_manifest(&dir, "clocks", config, &files)?);
    let summary = vec![format!(
        "clocks: {} rows ({} thetas x {} n)",
        thetas.len() * config.n_list.len(),
        thetas.len(),
        config.n_list.len()
    )];
    Ok(CommandOutcome { files, summary })
}

/// `fluid`: fluid-scaled trajectory against the linear drain limit.
pub fn cmd_fluid(config: &ExperimentConfig) -> Result<CommandOutcome, RunnerError> {
    let dir = PathBuf::from(&config.outputs);
    let section = config
        .fluid
        .clone()
        .ok_or(RunnerError::MissingSection("fluid"))?;
    let n = config.n_list[0];
    let sys = config.system(n)?;
    let report = sys.stability_report();
    let trajectory = simulator::run_fluid(&sys, section.y, &section.t_grid, config.seed)?;
    let rate = report.gamma_inf.abs();
    let mut csv = String::from("t,l_bar,limit,abs_err\n");
    let mut sup: f64 = 0.0;
    for &(t, l_bar) in &trajectory {
        let limit = (1.0 - rate * t).max(0.0);
        let err = (l_bar - limit).abs();
        sup = sup.max(err);
        let _ = writeln!(csv, "{t},{l_bar},{limit},{err}");
    }
    let mut files = vec![write_file(&dir, "fluid.csv", &csv)?];
    files.push(write_manifest(&dir, "fluid", config, &files)?);
    let summary = vec![format!(
        "fluid: y={}, sup |L_bar − (1 − {rate} t)^+| = {sup:.4}",
        section.y
    )];
    Ok(CommandOutcome { files, summary })
}
