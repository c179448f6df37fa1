use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kmgraph::analysis::{detect_winding, estimate_kc, sqrt_scaling_fit, sweep, SWEEP_K_MAX};
use kmgraph::graphgen::{is_paley_order, is_prime};
use kmgraph::simulate::{init_state, run_from};
use kmgraph::{spectral_report, Error, FrequencyDensity, SpectralReport};
use serde::Serialize;

use crate::config::{Couplings, ExperimentConfig};
use crate::plot;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const FINAL_STATE_FILE: &str = "final_state.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn check_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    Ok(())
}

/// Output directory: the flag wins over the config, then the working directory.
pub fn out_dir(config: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn spectrum(config: &ExperimentConfig) -> Result<SpectralReport> {
    let w = config.graphon()?;
    Ok(spectral_report(&w, &FrequencyDensity::standard_normal())?)
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub coupling: f64,
    pub final_r_classical: f64,
    pub final_r_graph_norm: f64,
    pub twist: kmgraph::TwistReport,
}

pub fn simulate(config: &ExperimentConfig, dir: &Path, plotscript: bool) -> Result<SimulateSummary> {
    let Couplings::Single(coupling) = config.couplings()? else {
        bail!("simulate needs a single `coupling`, not a grid");
    };
    check_dir(dir)?;
    let g = FrequencyDensity::standard_normal();
    let graph = config.graph_spec()?.build(config.graph_seed(0))?;
    let sim = config.sim_config(coupling, 0);

    let mut series = create(dir, TIMESERIES_FILE)?;
    writeln!(series, "t,r_classical,r_graph_norm")?;
    let mut io_error = None;
    let mut last = None;
    let result = run_from(&sim, &graph, init_state(&sim, &g), |_, s| {
        last = Some(*s);
        if io_error.is_none() {
            if let Err(e) = writeln!(series, "{},{},{}", s.t, s.r_classical, s.r_graph_norm) {
                io_error = Some(e);
            }
        }
    });
    series.flush()?;
    if let Some(e) = io_error {
        return Err(e).context("writing time series");
    }
    let out = result.with_context(|| format!("simulation at K={coupling}"))?;

    let mut state = create(dir, FINAL_STATE_FILE)?;
    writeln!(state, "index,phase,frequency")?;
    for (i, (u, w)) in out.final_state.phases.iter().zip(&out.final_state.frequencies).enumerate() {
        writeln!(state, "{i},{u},{w}")?;
    }
    state.flush()?;
    if plotscript {
        plot::write_timeseries_script(dir)?;
    }
    let last = last.expect("a run records at least its final state");
    Ok(SimulateSummary {
        coupling,
        final_r_classical: last.r_classical,
        final_r_graph_norm: last.r_graph_norm,
        twist: detect_winding(&out.final_state.phases, SWEEP_K_MAX),
    })
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub model: String,
    pub graphon: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub kc_estimate: Option<f64>,
    pub fit_exponent: Option<f64>,
    pub spectral: Option<SpectralReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_error: Option<String>,
}

pub fn run_sweep(config: &ExperimentConfig, dir: &Path, plotscript: bool) -> Result<SweepSummary> {
    let Couplings::Grid(grid) = config.couplings()? else {
        bail!("sweep needs `k_grid` or `k_range`, not a single coupling");
    };
    check_dir(dir)?;
    let g = FrequencyDensity::standard_normal();
    let spec = config.graph_spec()?;
    let base = config.sim_config(0.0, 0);
    let result = sweep(&grid, config.reps, &base, &spec, &g, config.seed)?;

    let mut csv = create(dir, SWEEP_FILE)?;
    result.write_csv(&mut csv)?;

    let kc_estimate = match estimate_kc(&result, config.n) {
        Ok(kc) => Some(kc),
        Err(Error::NotBracketed) => None,
        Err(e) => return Err(e.into()),
    };
    let fit_exponent = kc_estimate.and_then(|kc| sqrt_scaling_fit(&result, kc).ok());
    let (spectral, spectral_error) = match spectral_report(&spec.graphon, &g) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SweepSummary {
        model: config.model.to_string(),
        graphon: spec.graphon.tag().to_string(),
        n: config.n,
        reps: config.reps,
        seed: config.seed,
        kc_estimate,
        fit_exponent,
        spectral,
        spectral_error,
    };
    let mut out = create(dir, SUMMARY_FILE)?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    out.flush()?;
    if plotscript {
        plot::write_sweep_script(dir)?;
    }
    Ok(summary)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct PaleyCheck {
    pub n: usize,
    pub prime: bool,
    pub residue_mod_4: usize,
    pub valid: bool,
}

pub fn paley_check(n: usize) -> PaleyCheck {
    PaleyCheck {
        n,
        prime: is_prime(n),
        residue_mod_4: n % 4,
        valid: is_paley_order(n),
    }
}
