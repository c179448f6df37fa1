//! Coupling sweeps and the readouts built on them: threshold estimates,
//! square-root fits near onset, twisted-state detection and locking.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgen::{deterministic_graph, dense_random, paley, sparse_random, Graph, Model};
use crate::graphon::Graphon;
use crate::simulate::{init_state, run_from, SimConfig};
use crate::spectral::{spectral_report, FrequencyDensity, SpectralReport};

/// Fraction of the run, counted from the end, that the asymptotic statistic averages over.
pub const AVERAGING_FRACTION: f64 = 0.25;
/// Default variance threshold (rad²) separating locked from drifting oscillators.
pub const LOCK_TOLERANCE: f64 = 1e-3;
/// Wavenumbers scanned by sweeps when labelling the final state.
pub const SWEEP_K_MAX: usize = 16;

const STREAM_GRAPH: u64 = 0x0067_7261_7068;
const STREAM_PHASES: u64 = 0x0070_6861_7365;
const STREAM_FREQS: u64 = 0x6672_6571;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed split: the result depends only on `master` and `words`.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(master), |h, &w| splitmix64(h ^ splitmix64(w)))
}

pub fn graph_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, &[STREAM_GRAPH, rep as u64])
}

pub fn phase_seed(master: u64, coupling: f64, rep: usize) -> u64 {
    derive_seed(master, &[STREAM_PHASES, coupling.to_bits(), rep as u64])
}

pub fn frequency_seed(master: u64, coupling: f64, rep: usize) -> u64 {
    derive_seed(master, &[STREAM_FREQS, coupling.to_bits(), rep as u64])
}

/// Which graph to build: a kernel, a sampling model, a size and, for sparse
/// graphs, the scaling `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub graphon: Graphon,
    pub model: Model,
    pub n: usize,
    pub alpha: Option<f64>,
}

impl GraphSpec {
    pub fn new(graphon: Graphon, model: Model, n: usize) -> Self {
        GraphSpec {
            graphon,
            model,
            n,
            alpha: None,
        }
    }

    pub fn sparse(graphon: Graphon, n: usize, alpha: f64) -> Self {
        GraphSpec {
            graphon,
            model: Model::SparseRandom,
            n,
            alpha: Some(alpha),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self.model, Model::DenseRandom | Model::SparseRandom)
    }

    pub fn build(&self, seed: u64) -> Result<Graph> {
        match self.model {
            Model::Deterministic => deterministic_graph(&self.graphon, self.n),
            Model::DenseRandom => dense_random(&self.graphon, self.n, seed),
            Model::SparseRandom => {
                let alpha = self.alpha.ok_or_else(|| {
                    Error::InvalidParameter("sparse random graphs need alpha".into())
                })?;
                sparse_random(&self.graphon, self.n, alpha, seed)
            }
            Model::Paley => paley(self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub coupling: f64,
    pub rep: usize,
    pub seed_graph: u64,
    pub seed_phases: u64,
    pub seed_freqs: u64,
    pub r_asymptotic: f64,
    /// Dominant winding of the final state; `None` when incoherent.
    pub q_detected: Option<u64>,
    pub locked_fraction: f64,
}

/// Rows ordered by grid position, then replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub reps: usize,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str =
    "K,rep,seed_graph,seed_phases,seed_freqs,r_asymptotic,q_detected,locked_fraction";

impl SweepResult {
    /// Replicate mean of the asymptotic statistic at each grid value.
    pub fn means(&self) -> Vec<(f64, f64)> {
        self.grid
            .iter()
            .map(|&k| {
                let vals: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.coupling == k)
                    .map(|r| r.r_asymptotic)
                    .collect();
                (k, vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            let q = r.q_detected.map(|q| q.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.coupling, r.rep, r.seed_graph, r.seed_phases, r.seed_freqs, r.r_asymptotic, q, r.locked_fraction
            )?;
        }
        out.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// What a single run leaves behind once it is reduced.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    pub r_asymptotic: f64,
    pub twist: TwistReport,
    pub locked_fraction: f64,
}

/// Run one trajectory and reduce it: mean graph order norm over the final
/// quarter, winding of the final state and locked fraction over the same window.
pub fn run_point(config: &SimConfig, graph: &Graph, g: &FrequencyDensity) -> Result<PointOutcome> {
    let start = (1.0 - AVERAGING_FRACTION) * config.t_final;
    let eps = 1e-9 * config.dt;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut window: Vec<Vec<f64>> = Vec::new();
    let out = run_from(config, graph, init_state(config, g), |state, sample| {
        if sample.t >= start - eps {
            sum += sample.r_graph_norm;
            count += 1;
            window.push(state.phases.clone());
        }
    })?;
    let twist = detect_winding(&out.final_state.phases, SWEEP_K_MAX);
    let locked_fraction = locked_fraction(&window, twist.wavenumber, LOCK_TOLERANCE);
    Ok(PointOutcome {
        r_asymptotic: sum / count.max(1) as f64,
        twist,
        locked_fraction,
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty coupling grid".into()));
    }
    if grid.iter().any(|k| !k.is_finite()) {
        return Err(Error::InvalidParameter("coupling grid has non-finite values".into()));
    }
    let up = grid.windows(2).all(|w| w[0] < w[1]);
    let down = grid.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(Error::InvalidParameter("coupling grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Run every `(K, rep)` pair. Random models get one graph per replicate,
/// shared across the grid; seeds come from `master_seed` by counter split.
pub fn sweep(
    grid: &[f64],
    reps: usize,
    config: &SimConfig,
    spec: &GraphSpec,
    g: &FrequencyDensity,
    master_seed: u64,
) -> Result<SweepResult> {
    check_grid(grid)?;
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    if config.n != spec.n {
        return Err(Error::InvalidParameter(format!(
            "simulation n={} differs from graph n={}",
            config.n, spec.n
        )));
    }
    config.validate()?;

    let graphs: Vec<Graph> = if spec.is_random() {
        (0..reps).map(|rep| spec.build(graph_seed(master_seed, rep))).collect::<Result<_>>()?
    } else {
        vec![spec.build(graph_seed(master_seed, 0))?]
    };

    let points: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|i| (0..reps).map(move |rep| (i, rep)))
        .collect();
    let mut rows: Vec<(usize, SweepRow)> = points
        .par_iter()
        .map(|&(i, rep)| {
            let coupling = grid[i];
            let graph = &graphs[if spec.is_random() { rep } else { 0 }];
            let mut cfg = config.clone();
            cfg.coupling = coupling;
            cfg.seed_phases = phase_seed(master_seed, coupling, rep);
            cfg.seed_freqs = frequency_seed(master_seed, coupling, rep);
            let outcome = run_point(&cfg, graph, g).map_err(|e| Error::SweepPoint {
                coupling,
                rep,
                source: Box::new(e),
            })?;
            Ok((
                i,
                SweepRow {
                    coupling,
                    rep,
                    seed_graph: if spec.is_random() { graph_seed(master_seed, rep) } else { graph_seed(master_seed, 0) },
                    seed_phases: cfg.seed_phases,
                    seed_freqs: cfg.seed_freqs,
                    r_asymptotic: outcome.r_asymptotic,
                    q_detected: (!outcome.twist.incoherent).then_some(outcome.twist.q),
                    locked_fraction: outcome.locked_fraction,
                },
            ))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|(i, row)| (*i, row.rep));
    Ok(SweepResult {
        grid: grid.to_vec(),
        reps,
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}

/// First coupling, moving away from zero, at which the replicate mean
/// exceeds the smallest-|K| baseline by `5/sqrt(n)`, linearly interpolated
/// between the bracketing grid points.
pub fn estimate_kc(result: &SweepResult, baseline_n: usize) -> Result<f64> {
    let mut means = result.means();
    means.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    if means.len() < 2 {
        return Err(Error::NotBracketed);
    }
    let threshold = means[0].1 + 5.0 / (baseline_n as f64).sqrt();
    for w in means.windows(2) {
        let ((k0, m0), (k1, m1)) = (w[0], w[1]);
        if m1 > threshold {
            return Ok(k0 + (threshold - m0) / (m1 - m0) * (k1 - k0));
        }
    }
    Err(Error::NotBracketed)
}

/// Log-log slope of `r − baseline` against `K − kc` over `(kc, 1.5 kc]`.
pub fn sqrt_scaling_fit(result: &SweepResult, kc: f64) -> Result<f64> {
    sqrt_scaling_fit_window(result, kc, 1.5 * kc)
}

/// As [`sqrt_scaling_fit`] with the window `(kc, upper]` (mirrored for
/// negative thresholds). The baseline is the mean below threshold, or zero
/// when the grid has no such points.
pub fn sqrt_scaling_fit_window(result: &SweepResult, kc: f64, upper: f64) -> Result<f64> {
    if kc == 0.0 || kc.signum() != upper.signum() || upper.abs() <= kc.abs() {
        return Err(Error::InvalidParameter(format!("bad fit window ({kc}, {upper}]")));
    }
    let means = result.means();
    let same_side = |k: f64| k.signum() == kc.signum() || k == 0.0;
    let below: Vec<f64> = means
        .iter()
        .filter(|(k, _)| same_side(*k) && k.abs() < kc.abs())
        .map(|(_, m)| *m)
        .collect();
    let baseline = if below.is_empty() {
        0.0
    } else {
        below.iter().sum::<f64>() / below.len() as f64
    };
    let window: Vec<(f64, f64)> = means
        .iter()
        .filter(|(k, _)| k.signum() == kc.signum() && k.abs() > kc.abs() && k.abs() <= upper.abs())
        .copied()
        .collect();
    if window.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} grid points in ({kc}, {upper}], need 4",
            window.len()
        )));
    }
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|(_, m)| *m > baseline)
        .map(|(k, m)| ((k - kc).abs().ln(), (m - baseline).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("order statistic never rises above baseline".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Winding profile of a phase vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistReport {
    pub q: u64,
    /// Signed wavenumber of the dominant mode; `q = |wavenumber|`.
    pub wavenumber: i64,
    pub r_q: f64,
    /// Offset in `[0, 1)` with `u_j ≈ 2π·wavenumber·(j/n + phi)`.
    pub phi: f64,
    /// `(k, max(r_k, r_{-k}))` for `k = 0..=k_max`.
    pub profile: Vec<(u64, f64)>,
    pub incoherent: bool,
}

fn twisted_sum(phases: &[f64], k: i64) -> Complex64 {
    let n = phases.len() as f64;
    phases
        .iter()
        .enumerate()
        .map(|(j, &u)| Complex64::from_polar(1.0, u - TAU * k as f64 * j as f64 / n))
        .sum::<Complex64>()
        / n
}

/// `r_k = |n^{-1} Σ_j exp(i(u_j − 2πkj/n))|` for `|k| <= k_max`; the largest
/// picks the winding. Incoherent when every `r_k < 3/sqrt(n)`.
pub fn detect_winding(phases: &[f64], k_max: usize) -> TwistReport {
    assert!(k_max >= 1, "k_max must be at least 1");
    assert!(!phases.is_empty(), "no phases");
    let km = k_max as i64;
    let sums: Vec<(i64, Complex64)> = (-km..=km).map(|k| (k, twisted_sum(phases, k))).collect();
    let mut best = (0i64, sums[km as usize].1);
    // Scan by increasing |k|, positive first, so ties favor simpler twists.
    for q in 1..=km {
        for k in [q, -q] {
            let z = sums[(k + km) as usize].1;
            if z.norm() > best.1.norm() {
                best = (k, z);
            }
        }
    }
    let profile = (0..=km)
        .map(|q| {
            let a = sums[(q + km) as usize].1.norm();
            let b = sums[(km - q) as usize].1.norm();
            (q as u64, a.max(b))
        })
        .collect();
    let floor = 3.0 / (phases.len() as f64).sqrt();
    let (k, z) = best;
    let phi = if k == 0 {
        z.arg() / TAU
    } else {
        z.arg() / (TAU * k as f64)
    };
    TwistReport {
        q: k.unsigned_abs(),
        wavenumber: k,
        r_q: z.norm(),
        phi: phi.rem_euclid(1.0) % 1.0,
        profile,
        incoherent: sums.iter().all(|(_, z)| z.norm() < floor),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingPoint {
    pub r: f64,
    pub q_min: u64,
    pub kc_minus: f64,
    pub coupling: f64,
    pub twist: TwistReport,
}

/// For each range `r`: couple at `kc_minus − margin·|kc_minus|` on a
/// small-world graph and record the detected winding next to the spectral
/// prediction.
pub fn winding_vs_range(
    r_grid: &[f64],
    p: f64,
    margin: f64,
    model: Model,
    config: &SimConfig,
    g: &FrequencyDensity,
    seed: u64,
) -> Result<Vec<WindingPoint>> {
    if !matches!(model, Model::Deterministic | Model::DenseRandom) {
        return Err(Error::InvalidModel(format!("winding scans use DD or RD graphs, got {model}")));
    }
    r_grid
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r < 0.5) {
                return Err(Error::InvalidParameter(format!("range r={r} outside (0, 0.5)")));
            }
            let w = Graphon::small_world(p, r)?;
            let report = spectral_report(&w, g)?;
            let kc_minus = report
                .kc_minus
                .ok_or_else(|| Error::DegenerateSpectrum(format!("no negative eigenvalue at r={r}")))?;
            let coupling = kc_minus - margin * kc_minus.abs();
            let graph = GraphSpec::new(w, model, config.n).build(graph_seed(seed, 0))?;
            let mut cfg = config.clone();
            cfg.coupling = coupling;
            cfg.seed_phases = phase_seed(seed, coupling, 0);
            cfg.seed_freqs = frequency_seed(seed, coupling, 0);
            let out = run_from(&cfg, &graph, init_state(&cfg, g), |_, _| {})?;
            Ok(WindingPoint {
                r,
                q_min: report.q_min.unwrap_or(0),
                kc_minus,
                coupling,
                twist: detect_winding(&out.final_state.phases, SWEEP_K_MAX),
            })
        })
        .collect()
}

/// Twist amplitude `sqrt(κ/|β|)` below the negative threshold, with
/// `κ = kc_minus − K` and `β = −π g''(0) kc_minus⁴ μ_min / 16`.
pub fn predicted_amplitude(coupling: f64, spectral: &SpectralReport, g: &FrequencyDensity) -> Result<f64> {
    let kc = spectral
        .kc_minus
        .ok_or_else(|| Error::Precondition("spectrum has no negative threshold".into()))?;
    let kappa = kc - coupling;
    if kappa < 0.0 {
        return Err(Error::Domain(format!("K={coupling} is above kc_minus={kc}")));
    }
    let beta = -PI * g.g2 * kc.powi(4) * spectral.mu_min / 16.0;
    Ok((kappa / beta.abs()).sqrt())
}

/// `P(|ω| <= |K|·R)`: the share of frequencies a field of strength `R` can lock.
pub fn predicted_locked_fraction(coupling: f64, amplitude: f64, g: &FrequencyDensity) -> f64 {
    g.central_mass(coupling.abs() * amplitude)
}

/// Share of oscillators whose phase relative to the fitted twist has
/// variance below `tol` over the snapshots. The twist offset is refitted at
/// every snapshot so a slowly rotating pattern still counts as locked.
pub fn locked_fraction(snapshots: &[Vec<f64>], wavenumber: i64, tol: f64) -> f64 {
    let Some(first) = snapshots.first() else {
        return 0.0;
    };
    let n = first.len();
    let base: Vec<f64> = (0..n).map(|j| TAU * wavenumber as f64 * j as f64 / n as f64).collect();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut prev = vec![0.0; n];
    for (s, phases) in snapshots.iter().enumerate() {
        let psi = twisted_sum(phases, wavenumber).arg();
        for j in 0..n {
            let rel = crate::simulate::phase_difference(phases[j], base[j] + psi);
            let value = if s == 0 {
                rel
            } else {
                prev[j] + crate::simulate::phase_difference(rel, prev[j])
            };
            prev[j] = value;
            sum[j] += value;
            sum_sq[j] += value * value;
        }
    }
    let m = snapshots.len() as f64;
    let locked = (0..n)
        .filter(|&j| {
            let mean = sum[j] / m;
            (sum_sq[j] / m - mean * mean).max(0.0) < tol
        })
        .count();
    locked as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::wrap_phase;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(grid: &[f64], f: impl Fn(f64) -> f64) -> SweepResult {
        SweepResult {
            grid: grid.to_vec(),
            reps: 1,
            rows: grid
                .iter()
                .map(|&k| SweepRow {
                    coupling: k,
                    rep: 0,
                    seed_graph: 0,
                    seed_phases: 0,
                    seed_freqs: 0,
                    r_asymptotic: f(k),
                    q_detected: None,
                    locked_fraction: 0.0,
                })
                .collect(),
        }
    }

    fn twist(n: usize, k: i64, shift: f64) -> Vec<f64> {
        (0..n)
            .map(|j| wrap_phase(TAU * k as f64 * j as f64 / n as f64 + shift))
            .collect()
    }

    fn half_complete(n: usize) -> GraphSpec {
        GraphSpec::new(Graphon::constant(0.5).unwrap(), Model::Deterministic, n)
    }

    #[test]
    fn seeds_depend_only_on_their_coordinates() {
        assert_eq!(phase_seed(7, 1.25, 2), phase_seed(7, 1.25, 2));
        assert_ne!(phase_seed(7, 1.25, 2), phase_seed(7, 1.5, 2));
        assert_ne!(phase_seed(7, 1.25, 2), phase_seed(7, 1.25, 3));
        assert_ne!(phase_seed(7, 1.25, 2), frequency_seed(7, 1.25, 2));
        assert_ne!(graph_seed(7, 0), graph_seed(8, 0));
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let c = SimConfig::new(10, 1.0);
        let g = FrequencyDensity::standard_normal();
        assert!(sweep(&[], 1, &c, &half_complete(10), &g, 0).is_err());
        assert!(sweep(&[1.0], 0, &c, &half_complete(10), &g, 0).is_err());
        assert!(sweep(&[1.0, 1.0], 1, &c, &half_complete(10), &g, 0).is_err());
        assert!(sweep(&[1.0, 3.0, 2.0], 1, &c, &half_complete(10), &g, 0).is_err());
        assert!(sweep(&[1.0], 1, &c, &half_complete(11), &g, 0).is_err());
    }

    #[test]
    fn sweep_sub_and_supercritical() {
        let n = 2000;
        let c = SimConfig::new(n, 0.0);
        let g = FrequencyDensity::standard_normal();
        let low = sweep(&[1.0], 3, &c, &half_complete(n), &g, 11).unwrap();
        assert_eq!(low.rows.len(), 3);
        assert!(low.rows.iter().all(|r| r.r_asymptotic < 0.1), "{:?}", low.rows);
        let high = sweep(&[6.0], 3, &c, &half_complete(n), &g, 11).unwrap();
        assert!(high.rows.iter().all(|r| r.r_asymptotic > 0.3), "{:?}", high.rows);
        assert!(high.rows.iter().all(|r| r.q_detected == Some(0)));
        assert!(high.rows.iter().all(|r| r.locked_fraction > 0.5));
    }

    #[test]
    fn sweep_rows_are_ordered_and_seeded_per_point() {
        let n = 64;
        let mut c = SimConfig::new(n, 0.0);
        c.t_final = 1.0;
        let g = FrequencyDensity::standard_normal();
        let spec = GraphSpec::new(Graphon::small_world(0.2, 0.3).unwrap(), Model::DenseRandom, n);
        let a = sweep(&[3.0, 2.0, 1.0], 2, &c, &spec, &g, 5).unwrap();
        let ks: Vec<(f64, usize)> = a.rows.iter().map(|r| (r.coupling, r.rep)).collect();
        assert_eq!(ks, vec![(3.0, 0), (3.0, 1), (2.0, 0), (2.0, 1), (1.0, 0), (1.0, 1)]);
        assert_ne!(a.rows[0].seed_graph, a.rows[1].seed_graph);
        assert_eq!(a.rows[0].seed_graph, a.rows[2].seed_graph);
        // Extending the grid leaves existing rows untouched.
        let b = sweep(&[3.0, 2.5, 2.0, 1.0], 2, &c, &spec, &g, 5).unwrap();
        for row in &a.rows {
            assert!(b.rows.contains(row));
        }
        let csv = a.to_csv();
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn sweep_statistic_is_bounded_by_normalized_degree() {
        let n = 300;
        let mut c = SimConfig::new(n, 0.0);
        c.t_final = 4.0;
        let g = FrequencyDensity::standard_normal();
        let spec = GraphSpec::sparse(Graphon::power_law(0.3).unwrap(), n, 0.3);
        let res = sweep(&[0.5, 3.0, 8.0], 2, &c, &spec, &g, 9).unwrap();
        for row in &res.rows {
            let graph = spec.build(row.seed_graph).unwrap();
            let bound = (0..n).map(|i| graph.degree(i)).fold(0.0, f64::max) / (n as f64 * graph.alpha());
            assert!(row.r_asymptotic >= 0.0 && row.r_asymptotic <= bound);
            assert!((0.0..=1.0).contains(&row.locked_fraction));
        }
    }

    #[test]
    fn estimate_kc_interpolates_first_crossing() {
        let n = 2500;
        let grid: Vec<f64> = (0..=20).map(|i| 1.0 + 0.25 * i as f64).collect();
        let res = synthetic(&grid, |k| if k < 3.0 { 0.01 } else { 0.01 + (k - 3.0) * 0.4 });
        let kc = estimate_kc(&res, n).unwrap();
        // Crossing at r = 0.11, i.e. K = 3.25.
        assert!((kc - 3.25).abs() < 1e-12, "{kc}");
        let flat = synthetic(&grid, |_| 0.02);
        assert_eq!(estimate_kc(&flat, n), Err(Error::NotBracketed));
        let neg: Vec<f64> = grid.iter().map(|k| -k).collect();
        let mirrored = synthetic(&neg, |k| if k > -3.0 { 0.01 } else { 0.01 + (-k - 3.0) * 0.4 });
        assert!((estimate_kc(&mirrored, n).unwrap() + 3.25).abs() < 1e-12);
    }

    #[test]
    fn sqrt_fit_recovers_exponents() {
        let grid: Vec<f64> = (1..=30).map(|i| 2.0 + 0.1 * i as f64).collect();
        let sqrt = synthetic(&grid, |k| if k <= 3.0 { 0.0 } else { (k - 3.0).sqrt() });
        assert!((sqrt_scaling_fit(&sqrt, 3.0).unwrap() - 0.5).abs() < 1e-6);
        let lin = synthetic(&grid, |k| if k <= 3.0 { 0.0 } else { k - 3.0 });
        assert!((sqrt_scaling_fit(&lin, 3.0).unwrap() - 1.0).abs() < 1e-6);
        let sparse = synthetic(&[3.5, 4.0, 4.4], |k| k - 3.0);
        assert!(matches!(sqrt_scaling_fit(&sparse, 3.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn winding_examples() {
        let n = 200;
        let r = detect_winding(&twist(n, 2, 0.0), 16);
        assert_eq!((r.q, r.wavenumber), (2, 2));
        assert!((r.r_q - 1.0).abs() < 1e-12);
        assert!(!r.incoherent);
        assert_eq!(r.profile.len(), 17);
        let max = r.profile.iter().map(|p| p.1).fold(0.0, f64::max);
        assert_eq!(max, r.r_q);

        let r = detect_winding(&vec![1.3; n], 16);
        assert_eq!(r.q, 0);
        assert!((r.r_q - 1.0).abs() < 1e-12);
        assert!((r.phi - 1.3 / TAU).abs() < 1e-12);

        let r = detect_winding(&twist(n, -3, 0.0), 8);
        assert_eq!((r.q, r.wavenumber), (3, -3));
    }

    #[test]
    fn winding_offset_is_recovered() {
        let n = 500;
        for k in [1i64, 2, -2, 5] {
            for phi in [0.0, 0.03, 0.07] {
                let shift = TAU * k as f64 * phi;
                let r = detect_winding(&twist(n, k, shift), 8);
                let period = 1.0 / k.unsigned_abs() as f64;
                let d = (r.phi - phi).rem_euclid(period);
                assert!(d < 1e-9 || period - d < 1e-9, "k={k} phi={phi} got {}", r.phi);
            }
        }
    }

    #[test]
    fn noisy_twists_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for q in 1..=6i64 {
            for &n in &[500usize, 1000] {
                let mut hits = 0;
                for _ in 0..100 {
                    let phases: Vec<f64> = twist(n, q, rng.random::<f64>() * TAU)
                        .iter()
                        .map(|u| wrap_phase(u + rng.random_range(-0.3..0.3)))
                        .collect();
                    hits += (detect_winding(&phases, 16).q == q as u64) as usize;
                }
                assert!(hits >= 99, "q={q} n={n}: {hits}/100");
            }
        }
    }

    #[test]
    fn uniform_phases_look_incoherent() {
        let n = 2000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ok = 0;
        let mut flagged = 0;
        for _ in 0..200 {
            let phases: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
            let r = detect_winding(&phases, 16);
            ok += (r.profile.iter().all(|p| p.1 < 5.0 / (n as f64).sqrt())) as usize;
            flagged += r.incoherent as usize;
            assert!(r.profile.iter().all(|p| p.1 <= 1.0));
        }
        assert!(ok >= 198, "{ok}/200");
        assert!(flagged >= 180, "{flagged}/200");
    }

    fn sw_report() -> SpectralReport {
        spectral_report(&Graphon::small_world(0.2, 0.3).unwrap(), &FrequencyDensity::standard_normal()).unwrap()
    }

    #[test]
    fn amplitude_examples() {
        let g = FrequencyDensity::standard_normal();
        let rep = sw_report();
        let a = predicted_amplitude(-36.0, &rep, &g).unwrap();
        assert!((a - 0.051_335_4).abs() < 1e-6, "{a}");
        assert_eq!(predicted_amplitude(rep.kc_minus.unwrap(), &rep, &g).unwrap(), 0.0);
        assert!(matches!(predicted_amplitude(-10.0, &rep, &g), Err(Error::Domain(_))));
        let kc = rep.kc_minus.unwrap();
        let one = predicted_amplitude(kc - 1.5, &rep, &g).unwrap();
        let two = predicted_amplitude(kc - 3.0, &rep, &g).unwrap();
        assert!((two / one - 2f64.sqrt()).abs() < 1e-12);
        let frac = predicted_locked_fraction(-36.0, a, &g);
        assert!((frac - 0.9357).abs() < 2e-3, "{frac}");
    }

    #[test]
    fn amplitude_needs_negative_threshold() {
        let g = FrequencyDensity::standard_normal();
        let rep = spectral_report(&Graphon::constant(0.5).unwrap(), &g).unwrap();
        assert!(predicted_amplitude(-5.0, &rep, &g).is_err());
    }

    #[test]
    fn locked_fraction_examples() {
        let n = 300;
        let static_twist = vec![twist(n, 2, 0.4); 20];
        assert_eq!(locked_fraction(&static_twist, 2, LOCK_TOLERANCE), 1.0);
        // A rigidly rotating twist is still locked.
        let rotating: Vec<Vec<f64>> = (0..20).map(|s| twist(n, 2, 0.4 + 0.3 * s as f64)).collect();
        assert_eq!(locked_fraction(&rotating, 2, LOCK_TOLERANCE), 1.0);
        assert_eq!(locked_fraction(&[], 2, LOCK_TOLERANCE), 0.0);
    }

    #[test]
    fn uncoupled_oscillators_drift() {
        let n = 400;
        let graph = crate::graphgen::deterministic_graph(&Graphon::constant(1.0).unwrap(), n).unwrap();
        let c = SimConfig::new(n, 0.0);
        let out = run_point(&c, &graph, &FrequencyDensity::standard_normal()).unwrap();
        assert!(out.locked_fraction < 0.01, "{}", out.locked_fraction);
    }

    #[test]
    fn winding_scan_validates_range() {
        let c = SimConfig::new(50, 0.0);
        let g = FrequencyDensity::standard_normal();
        assert!(winding_vs_range(&[0.6], 0.2, 0.25, Model::DenseRandom, &c, &g, 0).is_err());
        assert!(matches!(
            winding_vs_range(&[0.3], 0.5, 0.25, Model::DenseRandom, &c, &g, 0),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn winding_scan_finds_spectral_twist() {
        let mut c = SimConfig::new(1000, 0.0);
        c.t_final = 20.0;
        let g = FrequencyDensity::standard_normal();
        let pts = winding_vs_range(&[0.3], 0.2, 0.25, Model::Deterministic, &c, &g, 4).unwrap();
        assert_eq!(pts[0].q_min, 2);
        assert_eq!(pts[0].twist.q, 2);
        assert!((pts[0].coupling - 1.25 * pts[0].kc_minus).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn estimate_kc_stable_under_agreeing_replicates(
            kc in 2.0f64..4.0, slope in 0.2f64..1.0, noise in prop::collection::vec(-1.0f64..1.0, 21)
        ) {
            let n = 2000usize;
            let grid: Vec<f64> = (0..=20).map(|i| 1.0 + 0.25 * i as f64).collect();
            let f = |k: f64| if k < kc { 0.02 } else { 0.02 + slope * (k - kc) };
            let base = synthetic(&grid, f);
            let before = estimate_kc(&base, n).unwrap();
            let mut more = base.clone();
            more.reps = 2;
            for (i, &k) in grid.iter().enumerate() {
                let mut row = more.rows[i].clone();
                row.rep = 1;
                row.r_asymptotic = f(k) + noise[i] / (n as f64).sqrt();
                more.rows.push(row);
            }
            let after = estimate_kc(&more, n).unwrap();
            // Same bracketing interval, so the estimate moves by less than one grid step.
            prop_assert!((after - before).abs() < 0.25, "{before} -> {after}");
            let mut same = base.clone();
            same.reps = 2;
            for i in 0..grid.len() {
                let mut row = same.rows[i].clone();
                row.rep = 1;
                same.rows.push(row);
            }
            prop_assert_eq!(estimate_kc(&same, n).unwrap(), before);
        }

        #[test]
        fn profile_bounds(seed in any::<u64>(), n in 20usize..400) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phases: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
            let r = detect_winding(&phases, 8);
            prop_assert!(r.profile.iter().all(|p| p.1 <= 1.0 + 1e-12));
            prop_assert_eq!(r.r_q, r.profile.iter().map(|p| p.1).fold(0.0, f64::max));
            prop_assert!((0.0..1.0).contains(&r.phi));
        }
    }
}
