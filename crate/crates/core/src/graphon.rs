//! Symmetric kernels on the unit square that define graph families and
//! their continuum limits.
//!
//! Every builtin kind has an exact cell average over the grid squares
//! `[i/n, (i+1)/n] x [j/n, (j+1)/n]`, which is what the graph generators
//! consume. Indices are zero-based throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block-constant kernel: `breakpoints` partition `[0, 1]` into `k` blocks and
/// `values` is the symmetric `k x k` matrix of block values, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepKernel {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepKernel {
    pub fn blocks(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.blocks() + b]
    }

    pub fn block_lengths(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn block_of(&self, x: f64) -> usize {
        // Interior breakpoints belong to the block on their right.
        let k = self.blocks();
        self.breakpoints[1..k].partition_point(|&c| c <= x)
    }

    /// `n * |[lo, hi] ∩ block|` for every block.
    fn overlaps(&self, lo: f64, hi: f64, n: f64) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .map(|w| (hi.min(w[1]) - lo.max(w[0])).max(0.0) * n)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let bp = &self.breakpoints;
        if bp.len() < 2 {
            return Err(Error::InvalidParameter(
                "step kernel needs at least one block".into(),
            ));
        }
        if bp[0] != 0.0 || *bp.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter(
                "step kernel breakpoints must run from 0 to 1".into(),
            ));
        }
        if bp.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "step kernel breakpoints must strictly increase".into(),
            ));
        }
        let k = self.blocks();
        if self.values.len() != k * k {
            return Err(Error::InvalidParameter(format!(
                "step kernel with {k} blocks needs {} values, got {}",
                k * k,
                self.values.len()
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let v = self.value(a, b);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "step kernel value ({a},{b}) = {v} is not a nonnegative number"
                    )));
                }
                if v != self.value(b, a) {
                    return Err(Error::InvalidParameter(
                        "step kernel block matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The kernel families. Fields are readable; construct through [`Graphon`]
/// so that parameters are validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphonKind {
    Constant { p: f64 },
    SmallWorld { p: f64, r: f64 },
    /// `(xy)^-gamma`, optionally capped at `cap` (the truncated sparse kernel).
    PowerLaw {
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    Bipartite,
    TwoBlock { alpha: f64 },
    StepFunction(StepKernel),
}

/// A validated graphon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphonKind", into = "GraphonKind")]
pub struct Graphon {
    kind: GraphonKind,
}

impl TryFrom<GraphonKind> for Graphon {
    type Error = Error;

    fn try_from(kind: GraphonKind) -> Result<Self> {
        Graphon::new(kind)
    }
}

impl From<Graphon> for GraphonKind {
    fn from(w: Graphon) -> Self {
        w.kind
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

impl Graphon {
    pub fn new(kind: GraphonKind) -> Result<Self> {
        match &kind {
            GraphonKind::Constant { p } => {
                check((0.0..=1.0).contains(p), || format!("constant p={p} not in [0,1]"))?
            }
            GraphonKind::SmallWorld { p, r } => {
                check((0.0..=0.5).contains(p), || {
                    format!("small-world p={p} not in [0,0.5]")
                })?;
                check(*r > 0.0 && *r < 0.5, || {
                    format!("small-world r={r} not in (0,0.5)")
                })?;
            }
            GraphonKind::PowerLaw { gamma, cap } => {
                check(*gamma > 0.0 && *gamma < 1.0, || {
                    format!("power-law gamma={gamma} not in (0,1)")
                })?;
                if let Some(c) = cap {
                    check(c.is_finite() && *c >= 1.0, || {
                        format!("power-law cap={c} must be finite and at least 1")
                    })?;
                }
            }
            GraphonKind::Bipartite => {}
            GraphonKind::TwoBlock { alpha } => check((0.0..=0.5).contains(alpha), || {
                format!("two-block alpha={alpha} not in [0,0.5]")
            })?,
            GraphonKind::StepFunction(s) => s.validate()?,
        }
        Ok(Graphon { kind })
    }

    pub fn constant(p: f64) -> Result<Self> {
        Self::new(GraphonKind::Constant { p })
    }

    pub fn small_world(p: f64, r: f64) -> Result<Self> {
        Self::new(GraphonKind::SmallWorld { p, r })
    }

    pub fn power_law(gamma: f64) -> Result<Self> {
        Self::new(GraphonKind::PowerLaw { gamma, cap: None })
    }

    pub fn bipartite() -> Self {
        Graphon {
            kind: GraphonKind::Bipartite,
        }
    }

    pub fn two_block(alpha: f64) -> Result<Self> {
        Self::new(GraphonKind::TwoBlock { alpha })
    }

    pub fn step_function(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(GraphonKind::StepFunction(StepKernel {
            breakpoints,
            values,
        }))
    }

    pub fn kind(&self) -> &GraphonKind {
        &self.kind
    }

    /// Short tag used in provenance records and file headers.
    pub fn tag(&self) -> &'static str {
        match self.kind {
            GraphonKind::Constant { .. } => "constant",
            GraphonKind::SmallWorld { .. } => "small_world",
            GraphonKind::PowerLaw { .. } => "power_law",
            GraphonKind::Bipartite => "bipartite",
            GraphonKind::TwoBlock { .. } => "two_block",
            GraphonKind::StepFunction(_) => "step_function",
        }
    }

    /// Block representation for the kinds that are block-constant.
    pub fn as_step(&self) -> Option<StepKernel> {
        match &self.kind {
            GraphonKind::Constant { p } => Some(StepKernel {
                breakpoints: vec![0.0, 1.0],
                values: vec![*p],
            }),
            GraphonKind::Bipartite => Some(StepKernel {
                breakpoints: vec![0.0, 0.5, 1.0],
                values: vec![0.0, 1.0, 1.0, 0.0],
            }),
            GraphonKind::TwoBlock { alpha } => Some(StepKernel {
                breakpoints: vec![0.0, 0.5, 1.0],
                values: vec![1.0 - alpha, *alpha, *alpha, 1.0 - alpha],
            }),
            GraphonKind::StepFunction(s) => Some(s.clone()),
            _ => None,
        }
    }

    /// Closed interval containing every kernel value; the upper end is
    /// infinite for the uncapped power law.
    pub fn value_range(&self) -> (f64, f64) {
        match &self.kind {
            GraphonKind::Constant { p } => (*p, *p),
            GraphonKind::SmallWorld { p, .. } => (p.min(1.0 - p), p.max(1.0 - p)),
            GraphonKind::PowerLaw { cap, .. } => (1.0, cap.unwrap_or(f64::INFINITY)),
            GraphonKind::Bipartite => (0.0, 1.0),
            GraphonKind::TwoBlock { alpha } => (*alpha, 1.0 - alpha),
            GraphonKind::StepFunction(s) => s
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }

    /// Whether every value lies in `[0, 1]`, i.e. the kernel can serve as an
    /// edge-probability function.
    pub fn is_probability_kernel(&self) -> bool {
        let (lo, hi) = self.value_range();
        lo >= 0.0 && hi <= 1.0
    }

    /// Point evaluation `W(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::Domain(format!("({x}, {y}) outside the unit square")));
        }
        Ok(match &self.kind {
            GraphonKind::Constant { p } => *p,
            GraphonKind::SmallWorld { p, r } => {
                if wrap_distance(x, y) <= *r {
                    1.0 - p
                } else {
                    *p
                }
            }
            GraphonKind::PowerLaw { gamma, cap } => {
                let prod = x * y;
                match cap {
                    Some(c) if prod == 0.0 => *c,
                    Some(c) => c.min(prod.powf(-gamma)),
                    None if prod == 0.0 => {
                        return Err(Error::Domain(
                            "power law is unbounded on the axes; use cell averages".into(),
                        ))
                    }
                    None => prod.powf(-gamma),
                }
            }
            _ => {
                let s = self.as_step().expect("block-constant kind");
                s.value(s.block_of(x), s.block_of(y))
            }
        })
    }

    /// Mean of `W` over the grid cell `[i/n,(i+1)/n] x [j/n,(j+1)/n]`
    /// (zero-based indices), in closed form.
    pub fn cell_average(&self, n: usize, i: usize, j: usize) -> f64 {
        assert!(i < n && j < n, "cell ({i},{j}) outside a grid of size {n}");
        let nf = n as f64;
        let (a1, b1) = (i as f64 / nf, (i + 1) as f64 / nf);
        let (a2, b2) = (j as f64 / nf, (j + 1) as f64 / nf);
        match &self.kind {
            GraphonKind::Constant { p } => *p,
            GraphonKind::SmallWorld { p, r } => {
                let area = near_diagonal_area(a1, b1, a2, b2, *r);
                p + (1.0 - 2.0 * p) * area * nf * nf
            }
            GraphonKind::PowerLaw { gamma, cap: None } => {
                let g = 1.0 - gamma;
                let fx = (b1.powf(g) - a1.powf(g)) / g;
                let fy = (b2.powf(g) - a2.powf(g)) / g;
                fx * nf * fy * nf
            }
            GraphonKind::PowerLaw {
                gamma,
                cap: Some(c),
            } => capped_power_integral(a1, b1, a2, b2, *gamma, *c) * nf * nf,
            _ => {
                let s = self.as_step().expect("block-constant kind");
                let ox = s.overlaps(a1, b1, nf);
                let oy = s.overlaps(a2, b2, nf);
                let k = s.blocks();
                let mut acc = 0.0;
                for a in 0..k {
                    if ox[a] == 0.0 {
                        continue;
                    }
                    for b in 0..k {
                        acc += ox[a] * oy[b] * s.value(a, b);
                    }
                }
                acc
            }
        }
    }

    /// Pointwise `min(1/alpha, W)`.
    pub fn truncate(&self, alpha: f64) -> Result<Graphon> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sparsity scale alpha={alpha} not in (0,1]"
            )));
        }
        let cap = 1.0 / alpha;
        let kind = match &self.kind {
            GraphonKind::PowerLaw { gamma, cap: old } => GraphonKind::PowerLaw {
                gamma: *gamma,
                cap: Some(old.map_or(cap, |o| o.min(cap))),
            },
            GraphonKind::StepFunction(s) if s.values.iter().any(|&v| v > cap) => {
                GraphonKind::StepFunction(StepKernel {
                    breakpoints: s.breakpoints.clone(),
                    values: s.values.iter().map(|&v| v.min(cap)).collect(),
                })
            }
            // Remaining kinds are bounded by 1 <= 1/alpha.
            other => other.clone(),
        };
        Ok(Graphon { kind })
    }
}

/// Distance on the unit circle.
pub fn wrap_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    d.min(1.0 - d)
}

/// `∫_{-inf}^{s} clamp(t, 0, w) dt`.
fn ramp_integral(s: f64, w: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s <= w {
        0.5 * s * s
    } else {
        0.5 * w * w + w * (s - w)
    }
}

/// Area of `{(x, y) in [a1,b1]x[a2,b2] : x - y <= z}`.
fn lower_area(a1: f64, b1: f64, a2: f64, b2: f64, z: f64) -> f64 {
    let w = b1 - a1;
    ramp_integral(b2 + z - a1, w) - ramp_integral(a2 + z - a1, w)
}

/// Area of the part of the rectangle within wrapped distance `r` of the
/// diagonal. `x - y` ranges over `[-1, 1]`, so three bands suffice.
fn near_diagonal_area(a1: f64, b1: f64, a2: f64, b2: f64, r: f64) -> f64 {
    [-1.0, 0.0, 1.0]
        .iter()
        .map(|&m| lower_area(a1, b1, a2, b2, m + r) - lower_area(a1, b1, a2, b2, m - r))
        .sum()
}

/// `∫∫ min(c, (xy)^-gamma)` over `[a1,b1]x[a2,b2]`.
fn capped_power_integral(a1: f64, b1: f64, a2: f64, b2: f64, gamma: f64, c: f64) -> f64 {
    let g = 1.0 - gamma;
    // The cap is active exactly where xy < t.
    let t = c.powf(-1.0 / gamma);
    let tg = t.powf(g);
    let x_full = t / b2; // below: whole column capped
    let x_none = if a2 > 0.0 { t / a2 } else { f64::INFINITY }; // above: no capping

    let mut total = 0.0;

    let (l, r) = (a1, b1.min(x_full));
    if r > l {
        total += c * (b2 - a2) * (r - l);
    }

    let (l, r) = (a1.max(x_full), b1.min(x_none));
    if r > l {
        total += -gamma * tg / g * (r / l).ln() - c * a2 * (r - l)
            + b2.powf(g) * (r.powf(g) - l.powf(g)) / (g * g);
    }

    let (l, r) = (a1.max(x_none), b1);
    if r > l {
        total += (b2.powf(g) - a2.powf(g)) * (r.powf(g) - l.powf(g)) / (g * g);
    }
    total
}
