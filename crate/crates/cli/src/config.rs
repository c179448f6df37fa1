//! Flat TOML experiment description.
//!
//! ```toml
//! graphon = "small_world"   # constant | small_world | power_law | bipartite | two_block | step_function
//! p = 0.2
//! r = 0.3
//! model = "RD"              # DD | RD | RS | Paley
//! n = 2000
//! k_range = [-40.0, -20.0, 2.0]   # or k_grid = [...], or coupling = -36.0
//! reps = 3
//! seed = 7
//! ```
//!
//! Kernel parameters: `p` (constant, small_world), `r` (small_world),
//! `gamma` (power_law), `block_alpha` (two_block), `breakpoints` and
//! `block_values` (step_function). Sparse graphs take `alpha` or
//! `sparsity_exponent` (alpha = n^-exponent). Paley graphs need no graphon.

use std::path::PathBuf;

use anyhow::{anyhow, bail, ensure, Context, Result};
use kmgraph::analysis::{frequency_seed, graph_seed, phase_seed, GraphSpec};
use kmgraph::graphgen::is_paley_order;
use kmgraph::simulate::{DEFAULT_DT, DEFAULT_RECORD_EVERY, DEFAULT_T_FINAL};
use kmgraph::{Graphon, GraphonKind, Model, SimConfig};
use serde::{Deserialize, Serialize};

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_t_final() -> f64 {
    DEFAULT_T_FINAL
}

fn default_reps() -> usize {
    1
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_values: Option<Vec<f64>>,

    pub model: Model,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity_exponent: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
    /// `[start, stop, step]`, both ends included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<[f64; 3]>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Couplings {
    Single(f64),
    Grid(Vec<f64>),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).context("malformed config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn need(&self, value: Option<f64>, key: &str, kind: &str) -> Result<f64> {
        value.ok_or_else(|| anyhow!("graphon {kind:?} needs `{key}`"))
    }

    /// The kernel; Paley graphs without one get `W = 1/2`, their limit.
    pub fn graphon(&self) -> Result<Graphon> {
        let Some(kind) = self.graphon.as_deref() else {
            ensure!(self.model == Model::Paley, "`graphon` is required for model {}", self.model);
            return Ok(Graphon::constant(0.5)?);
        };
        let w = match kind {
            "constant" => Graphon::constant(self.need(self.p, "p", kind)?)?,
            "small_world" => Graphon::small_world(self.need(self.p, "p", kind)?, self.need(self.r, "r", kind)?)?,
            "power_law" => Graphon::power_law(self.need(self.gamma, "gamma", kind)?)?,
            "bipartite" => Graphon::bipartite(),
            "two_block" => Graphon::two_block(self.need(self.block_alpha, "block_alpha", kind)?)?,
            "step_function" => {
                let b = self.breakpoints.clone().ok_or_else(|| anyhow!("step_function needs `breakpoints`"))?;
                let v = self.block_values.clone().ok_or_else(|| anyhow!("step_function needs `block_values`"))?;
                Graphon::step_function(b, v)?
            }
            other => bail!("unknown graphon {other:?}"),
        };
        Ok(w)
    }

    pub fn sparse_alpha(&self) -> Result<Option<f64>> {
        match (self.model, self.alpha, self.sparsity_exponent) {
            (Model::SparseRandom, Some(a), None) => {
                ensure!(a > 0.0 && a <= 1.0, "alpha={a} not in (0, 1]");
                Ok(Some(a))
            }
            (Model::SparseRandom, None, Some(b)) => {
                ensure!(b > 0.0 && b < 1.0, "sparsity_exponent={b} not in (0, 1)");
                Ok(Some((self.n as f64).powf(-b)))
            }
            (Model::SparseRandom, None, None) => bail!("model RS needs `alpha` or `sparsity_exponent`"),
            (Model::SparseRandom, Some(_), Some(_)) => bail!("give only one of `alpha` and `sparsity_exponent`"),
            (_, None, None) => Ok(None),
            (m, _, _) => bail!("`alpha`/`sparsity_exponent` only apply to RS, not {m}"),
        }
    }

    pub fn graph_spec(&self) -> Result<GraphSpec> {
        let graphon = self.graphon()?;
        match self.model {
            Model::DenseRandom => ensure!(
                graphon.is_probability_kernel() && !matches!(graphon.kind(), GraphonKind::PowerLaw { .. }),
                "model RD needs a [0,1]-valued graphon, got {}",
                graphon.tag()
            ),
            Model::SparseRandom => ensure!(
                graphon.value_range().0 >= 0.0,
                "model RS needs a nonnegative graphon"
            ),
            Model::Deterministic => ensure!(
                !matches!(graphon.kind(), GraphonKind::PowerLaw { .. }),
                "model DD cannot average the unbounded power-law kernel"
            ),
            Model::Paley => ensure!(
                is_paley_order(self.n),
                "Paley graphs need n prime with n = 1 mod 4, got {}",
                self.n
            ),
        }
        Ok(GraphSpec {
            graphon,
            model: self.model,
            n: self.n,
            alpha: self.sparse_alpha()?,
        })
    }

    pub fn couplings(&self) -> Result<Couplings> {
        match (self.coupling, &self.k_grid, &self.k_range) {
            (Some(k), None, None) => {
                ensure!(k.is_finite(), "coupling must be finite");
                Ok(Couplings::Single(k))
            }
            (None, Some(grid), None) => {
                ensure!(!grid.is_empty(), "`k_grid` is empty");
                ensure!(
                    grid.windows(2).all(|w| w[0] < w[1]) || grid.windows(2).all(|w| w[0] > w[1]),
                    "`k_grid` must be strictly monotone"
                );
                Ok(Couplings::Grid(grid.clone()))
            }
            (None, None, Some([start, stop, step])) => {
                ensure!(*step != 0.0 && (stop - start) / step >= 0.0, "`k_range` step does not reach stop");
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                ensure!(count < 100_000, "`k_range` has too many points");
                Ok(Couplings::Grid((0..=count).map(|i| start + step * i as f64).collect()))
            }
            (None, None, None) => bail!("set one of `coupling`, `k_grid` or `k_range`"),
            _ => bail!("set exactly one of `coupling`, `k_grid` and `k_range`"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n >= 2, "n={} is too small", self.n);
        ensure!(self.reps >= 1, "reps must be at least 1");
        ensure!(self.dt > 0.0 && self.dt.is_finite(), "dt must be positive");
        ensure!(self.t_final >= self.dt, "t_final must be at least dt");
        ensure!(self.record_every >= 1, "record_every must be at least 1");
        self.graph_spec()?;
        self.couplings()?;
        Ok(())
    }

    /// Simulation settings for one `(K, rep)` point, seeded from the master seed.
    pub fn sim_config(&self, coupling: f64, rep: usize) -> SimConfig {
        SimConfig {
            n: self.n,
            coupling,
            dt: self.dt,
            t_final: self.t_final,
            seed_phases: phase_seed(self.seed, coupling, rep),
            seed_freqs: frequency_seed(self.seed, coupling, rep),
            record_every: self.record_every,
        }
    }

    pub fn graph_seed(&self, rep: usize) -> u64 {
        graph_seed(self.seed, rep)
    }
}
