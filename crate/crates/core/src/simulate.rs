//! Heun integration of `u_i' = ω_i + K/(nα) Σ_j a_ij sin(u_j − u_i)` and the
//! order parameters used to read out coherence.
//!
//! The coupling term is evaluated as `cos u_i · S_i − sin u_i · C_i` with
//! `S_i = Σ_j a_ij sin u_j` and `C_i = Σ_j a_ij cos u_j`, which turns each
//! evaluation into two weighted row sums over precomputed `sin`/`cos`
//! vectors. The same sums give the graph order parameter
//! `h_i = (C_i + i S_i)/(nα)` for free at recording steps.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgen::Graph;
use crate::spectral::FrequencyDensity;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_FINAL: f64 = 20.0;
pub const DEFAULT_RECORD_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub coupling: f64,
    pub dt: f64,
    pub t_final: f64,
    pub seed_phases: u64,
    pub seed_freqs: u64,
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(n: usize, coupling: f64) -> Self {
        SimConfig {
            n,
            coupling,
            dt: DEFAULT_DT,
            t_final: DEFAULT_T_FINAL,
            seed_phases: 0,
            seed_freqs: 1,
            record_every: DEFAULT_RECORD_EVERY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt={} must be positive", self.dt)));
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "t_final={} must be at least dt={}",
                self.t_final, self.dt
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n={} < 2", self.n)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorState {
    pub phases: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub t: f64,
}

impl OscillatorState {
    pub fn n(&self) -> usize {
        self.phases.len()
    }
}

/// Reduce to `[0, 2π)`. `rem_euclid` can round up to exactly `2π` for tiny
/// negative inputs.
pub fn wrap_phase(u: f64) -> f64 {
    let v = u.rem_euclid(TAU);
    if v >= TAU {
        0.0
    } else {
        v
    }
}

/// Signed difference `a − b` folded into `[−π, π)`.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    (a - b + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI
}

/// Uniform phases from `seed_phases`, frequencies drawn from `g` with `seed_freqs`.
pub fn init_state(config: &SimConfig, g: &FrequencyDensity) -> OscillatorState {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed_phases);
    let phases = (0..config.n)
        .map(|_| wrap_phase(rng.random::<f64>() * TAU))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed_freqs);
    let frequencies = (0..config.n).map(|_| g.sample(&mut rng)).collect();
    OscillatorState {
        phases,
        frequencies,
        t: 0.0,
    }
}

/// Order parameter sample recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSample {
    pub t: f64,
    pub r_classical: f64,
    pub r_graph_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: OscillatorState,
    pub series: Vec<OrderSample>,
}

/// Scratch buffers for one trajectory.
struct Workspace {
    sin: Vec<f64>,
    cos: Vec<f64>,
    s: Vec<f64>,
    c: Vec<f64>,
    f0: Vec<f64>,
    f1: Vec<f64>,
    trial: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            sin: vec![0.0; n],
            cos: vec![0.0; n],
            s: vec![0.0; n],
            c: vec![0.0; n],
            f0: vec![0.0; n],
            f1: vec![0.0; n],
            trial: vec![0.0; n],
        }
    }

    /// Fill `sin`, `cos`, and the row sums for phases `u`.
    fn sums(&mut self, graph: &Graph, u: &[f64]) {
        for ((s, c), &x) in self.sin.iter_mut().zip(self.cos.iter_mut()).zip(u) {
            (*s, *c) = x.sin_cos();
        }
        graph.row_sums(&self.sin, &self.cos, &mut self.s, &mut self.c);
    }

    /// Velocity from the current sums into `out`.
    fn velocity(&self, omega: &[f64], scale: f64, out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = omega[i] + scale * (self.cos[i] * self.s[i] - self.sin[i] * self.c[i]);
        }
    }

    fn order_sample(&self, t: f64, norm: f64) -> OrderSample {
        let n = self.sin.len() as f64;
        let (sx, sy) = self
            .cos
            .iter()
            .zip(&self.sin)
            .fold((0.0, 0.0), |(a, b), (c, s)| (a + c, b + s));
        let r_classical = (sx * sx + sy * sy).sqrt() / n;
        let sq: f64 = self
            .c
            .iter()
            .zip(&self.s)
            .map(|(c, s)| (c * c + s * s) * norm * norm)
            .sum();
        OrderSample {
            t,
            r_classical,
            r_graph_norm: (sq / n).sqrt(),
        }
    }

    /// One Heun step in place. Returns false if a phase became non-finite.
    fn step(&mut self, graph: &Graph, coupling: f64, state: &mut OscillatorState, dt: f64, sums_ready: bool) -> bool {
        let scale = coupling_scale(graph, coupling);
        let omega = &state.frequencies;
        let u = &mut state.phases;
        if coupling == 0.0 {
            for i in 0..u.len() {
                u[i] = wrap_phase(u[i] + 0.5 * dt * (omega[i] + omega[i]));
            }
            return u.iter().all(|x| x.is_finite());
        }
        if !sums_ready {
            self.sums(graph, u);
        }
        let mut f0 = std::mem::take(&mut self.f0);
        self.velocity(omega, scale, &mut f0);
        for i in 0..u.len() {
            self.trial[i] = u[i] + dt * f0[i];
        }
        let trial = std::mem::take(&mut self.trial);
        self.sums(graph, &trial);
        self.trial = trial;
        let mut f1 = std::mem::take(&mut self.f1);
        self.velocity(omega, scale, &mut f1);
        let mut finite = true;
        for i in 0..u.len() {
            let v = u[i] + 0.5 * dt * (f0[i] + f1[i]);
            finite &= v.is_finite();
            u[i] = wrap_phase(v);
        }
        self.f0 = f0;
        self.f1 = f1;
        finite
    }
}

/// `K / (n α)`.
pub fn coupling_scale(graph: &Graph, coupling: f64) -> f64 {
    coupling / (graph.n() as f64 * graph.alpha())
}

fn check_sizes(graph: &Graph, state: &OscillatorState) -> Result<()> {
    if graph.n() != state.phases.len() || graph.n() != state.frequencies.len() {
        return Err(Error::InvalidParameter(format!(
            "graph has {} nodes but state has {} phases and {} frequencies",
            graph.n(),
            state.phases.len(),
            state.frequencies.len()
        )));
    }
    Ok(())
}

/// Phase velocities at the current state.
pub fn rhs(graph: &Graph, coupling: f64, state: &OscillatorState) -> Result<Vec<f64>> {
    check_sizes(graph, state)?;
    let mut ws = Workspace::new(graph.n());
    let mut out = vec![0.0; graph.n()];
    if coupling == 0.0 {
        out.copy_from_slice(&state.frequencies);
        return Ok(out);
    }
    ws.sums(graph, &state.phases);
    ws.velocity(&state.frequencies, coupling_scale(graph, coupling), &mut out);
    Ok(out)
}

/// One predictor-corrector step; phases come back reduced to `[0, 2π)`.
pub fn heun_step(graph: &Graph, coupling: f64, state: &OscillatorState, dt: f64) -> Result<OscillatorState> {
    check_sizes(graph, state)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt={dt} must be positive")));
    }
    let mut ws = Workspace::new(graph.n());
    let mut next = state.clone();
    if !ws.step(graph, coupling, &mut next, dt, false) {
        return Err(Error::NumericalBlowup { step: 0 });
    }
    next.t = state.t + dt;
    Ok(next)
}

/// Integrate from a fresh initial state to `t_final`.
pub fn run(config: &SimConfig, graph: &Graph, g: &FrequencyDensity) -> Result<RunOutput> {
    let state = init_state(config, g);
    run_from(config, graph, state, |_, _| {})
}

/// Integrate from `state` for `config.steps()` steps, recording order
/// parameters every `record_every` steps and at the end. `observer` sees the
/// state at every recording point.
pub fn run_from<F>(config: &SimConfig, graph: &Graph, mut state: OscillatorState, mut observer: F) -> Result<RunOutput>
where
    F: FnMut(&OscillatorState, &OrderSample),
{
    config.validate()?;
    check_sizes(graph, &state)?;
    let norm = 1.0 / (graph.n() as f64 * graph.alpha());
    let steps = config.steps();
    let t0 = state.t;
    let mut ws = Workspace::new(graph.n());
    let mut series = Vec::with_capacity(steps / config.record_every + 2);

    for step in 0..steps {
        let record = step % config.record_every == 0;
        let sums_ready = record || config.coupling != 0.0;
        if sums_ready {
            ws.sums(graph, &state.phases);
        }
        if record {
            let sample = ws.order_sample(state.t, norm);
            observer(&state, &sample);
            series.push(sample);
        }
        if !ws.step(graph, config.coupling, &mut state, config.dt, sums_ready) {
            return Err(Error::NumericalBlowup { step: step + 1 });
        }
        state.t = t0 + (step + 1) as f64 * config.dt;
    }
    ws.sums(graph, &state.phases);
    let sample = ws.order_sample(state.t, norm);
    observer(&state, &sample);
    series.push(sample);
    Ok(RunOutput {
        final_state: state,
        series,
    })
}

/// `n^{-1} Σ_j e^{i u_j}`.
pub fn order_classical(state: &OscillatorState) -> Complex64 {
    let sum: Complex64 = state.phases.iter().map(|&u| Complex64::from_polar(1.0, u)).sum();
    sum / state.n() as f64
}

/// Local order parameters `h_i = (nα)^{-1} Σ_j a_ij e^{i u_j}`.
pub fn order_graph(graph: &Graph, state: &OscillatorState) -> Result<Vec<Complex64>> {
    check_sizes(graph, state)?;
    let mut ws = Workspace::new(graph.n());
    ws.sums(graph, &state.phases);
    let norm = 1.0 / (graph.n() as f64 * graph.alpha());
    Ok(ws
        .c
        .iter()
        .zip(&ws.s)
        .map(|(&c, &s)| Complex64::new(c, s) * norm)
        .collect())
}

/// Scaled l2 norm `sqrt(n^{-1} Σ |h_i|^2)`.
pub fn order_norm(h: &[Complex64]) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    (h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64).sqrt()
}
