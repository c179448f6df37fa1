//! Eigenvalues of the kernel operator `(W f)(x) = ∫ W(x,y) f(y) dy` and the
//! critical couplings `K_c = 2 / (π g(0) μ)` they predict.
//!
//! Analytic formulas cover every builtin family; the dense discretization in
//! [`numeric_eigen_extremes`] exists to check them and to handle kernels
//! without a closed form (truncated power laws).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::graphon::{Graphon, GraphonKind};

/// Discretization used when a kernel has no closed-form spectrum.
pub const NUMERIC_FALLBACK_SIZE: usize = 1024;

/// First search bound for the small-world minimum; doubled until certified.
const SW_SEARCH_START: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    StandardNormal,
}

/// Even, unimodal density of the intrinsic frequencies, carried with its
/// value and curvature at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDensity {
    pub kind: DensityKind,
    pub g0: f64,
    pub g2: f64,
}

impl FrequencyDensity {
    pub fn standard_normal() -> Self {
        let g0 = (2.0 * PI).sqrt().recip();
        FrequencyDensity {
            kind: DensityKind::StandardNormal,
            g0,
            g2: -g0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DensityKind::StandardNormal => StandardNormal.sample(rng),
        }
    }

    /// `P(|ω| <= c)`.
    pub fn central_mass(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        match self.kind {
            DensityKind::StandardNormal => erf(c / std::f64::consts::SQRT_2),
        }
    }
}

impl Default for FrequencyDensity {
    fn default() -> Self {
        Self::standard_normal()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    /// Dense discretization with the given grid size.
    Numeric(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub mu_max: f64,
    pub mu_min: f64,
    pub q_min: Option<u64>,
    pub kc_plus: f64,
    pub kc_minus: Option<f64>,
    pub method: Method,
    /// Full nonzero spectrum for block-constant kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

/// Fourier coefficient `μ_k` of the small-world convolution kernel; even in `k`.
pub fn sw_eigenvalue(p: f64, r: f64, k: i64) -> f64 {
    if k == 0 {
        2.0 * r + p - 4.0 * r * p
    } else {
        let k = k.unsigned_abs() as f64;
        (1.0 - 2.0 * p) * (2.0 * PI * k * r).sin() / (PI * k)
    }
}

/// Smallest small-world eigenvalue over `k >= 1`, with the bound it was
/// certified at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwMinimum {
    pub q: u64,
    pub mu: f64,
    /// Final search bound `M`: every `k > M` has `μ_k > -1/(Mπ) >= mu`.
    pub bound: u64,
    /// Largest `μ_k` over `1 <= k <= bound`.
    pub max_nonzero_mode: f64,
}

/// Certified minimum of `μ_k` over `k >= 1`.
///
/// `μ_k > -1/(kπ)`, so once the running minimum over `1..=M` is at most
/// `-1/(Mπ)` no larger wavenumber can beat it. `M` doubles until that holds.
/// Ties go to the smallest `k`.
pub fn sw_min_eigenvalue(p: f64, r: f64) -> Result<SwMinimum> {
    if !(0.0..0.5).contains(&p) {
        if p == 0.5 {
            return Err(Error::DegenerateSpectrum(
                "small-world p=0.5: every nonconstant mode has eigenvalue 0".into(),
            ));
        }
        return Err(Error::InvalidParameter(format!("small-world p={p} not in [0,0.5)")));
    }
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::InvalidParameter(format!("small-world r={r} not in (0,0.5)")));
    }
    let mut q = 0;
    let mut mu = f64::INFINITY;
    let mut max_mode = f64::NEG_INFINITY;
    let mut scanned = 0u64;
    let mut bound = SW_SEARCH_START;
    loop {
        for k in scanned + 1..=bound {
            let v = sw_eigenvalue(p, r, k as i64);
            if v < mu {
                mu = v;
                q = k;
            }
            max_mode = max_mode.max(v);
        }
        scanned = bound;
        if mu <= -1.0 / (bound as f64 * PI) {
            return Ok(SwMinimum {
                q,
                mu,
                bound,
                max_nonzero_mode: max_mode,
            });
        }
        bound *= 2;
    }
}

/// Eigenvalues of a block-constant kernel, in decreasing order: those of
/// `D^{1/2} V D^{1/2}` with `V` the block values and `D` the block lengths.
pub fn step_graphon_eigenvalues(w: &Graphon) -> Result<Vec<f64>> {
    let step = w.as_step().ok_or_else(|| {
        Error::InvalidParameter(format!("{} kernel is not block-constant", w.tag()))
    })?;
    let k = step.blocks();
    let root: Vec<f64> = step.block_lengths().iter().map(|l| l.sqrt()).collect();
    let m = DMatrix::from_fn(k, k, |a, b| root[a] * step.value(a, b) * root[b]);
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// The single nonzero eigenvalue `1/(1-2γ)` of the rank-one kernel `(xy)^-γ`.
pub fn powerlaw_mu_max(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::Domain(format!(
            "power-law gamma={gamma}: kernel is square-integrable only for gamma in (0,0.5)"
        )));
    }
    Ok(1.0 / (1.0 - 2.0 * gamma))
}

/// Matrix `M_ij = <W>_{cell ij} / m` whose spectrum approximates the operator's.
pub fn discretized_operator(w: &Graphon, m: usize) -> DMatrix<f64> {
    let mf = m as f64;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = w.cell_average(m, i, j) / mf;
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Extreme eigenvalues `(max, min)` of the `m x m` discretized operator.
pub fn numeric_eigen_extremes(w: &Graphon, m: usize) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("discretization m={m} < 2")));
    }
    let eig = discretized_operator(w, m).symmetric_eigenvalues();
    Ok((eig.max(), eig.min()))
}

/// `(K_c^+, K_c^-)`; the negative threshold exists only when `mu_min < 0`.
pub fn critical_couplings(
    mu_max: f64,
    mu_min: f64,
    g: &FrequencyDensity,
) -> Result<(f64, Option<f64>)> {
    if !(mu_max > 0.0) {
        return Err(Error::NoThreshold(mu_max));
    }
    let scale = 2.0 / (PI * g.g0);
    let minus = (mu_min < 0.0).then(|| scale / mu_min);
    Ok((scale / mu_max, minus))
}

/// Spectral summary for a kernel, analytic wherever a closed form exists.
pub fn spectral_report(w: &Graphon, g: &FrequencyDensity) -> Result<SpectralReport> {
    let (mu_max, mu_min, q_min, method, eigenvalues) = match w.kind() {
        GraphonKind::SmallWorld { p, r } => {
            let min = sw_min_eigenvalue(*p, *r)?;
            let mu0 = sw_eigenvalue(*p, *r, 0);
            (mu0.max(min.max_nonzero_mode), min.mu, Some(min.q), Method::Analytic, None)
        }
        GraphonKind::PowerLaw { gamma, cap: None } => {
            (powerlaw_mu_max(*gamma)?, 0.0, None, Method::Analytic, None)
        }
        GraphonKind::PowerLaw { cap: Some(_), .. } => {
            let (hi, lo) = numeric_eigen_extremes(w, NUMERIC_FALLBACK_SIZE)?;
            (hi, lo.min(0.0), None, Method::Numeric(NUMERIC_FALLBACK_SIZE), None)
        }
        _ => {
            let eig = step_graphon_eigenvalues(w)?;
            // Finite rank: zero is always in the spectrum of the operator.
            let hi = eig[0].max(0.0);
            let lo = eig[eig.len() - 1].min(0.0);
            (hi, lo, None, Method::Analytic, Some(eig))
        }
    };
    let (kc_plus, kc_minus) = critical_couplings(mu_max, mu_min, g)?;
    Ok(SpectralReport {
        mu_max,
        mu_min,
        q_min,
        kc_plus,
        kc_minus,
        method,
        eigenvalues,
    })
}
