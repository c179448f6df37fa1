//! Test-only quadrature oracle: tanh-sinh rules on piecewise-smooth pieces,
//! nested for double integrals over grid cells. Independent of the closed
//! forms it checks; it only knows where each kernel has kinks or jumps.

use crate::graphon::{Graphon, GraphonKind};

/// Tanh-sinh quadrature of `f` over `[a, b]`, refining the step until two
/// successive levels agree to near machine precision.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let len = b - a;
    let node = |t: f64| -> Option<(f64, f64)> {
        let s = half_pi * t.sinh();
        let e = (2.0 * s).exp();
        // Distances to both endpoints, computed without cancellation.
        let da = len / (1.0 + 1.0 / e);
        let db = len / (1.0 + e);
        let x = if t < 0.0 { a + da } else { b - db };
        if !(x > a && x < b) {
            return None;
        }
        let ch = s.cosh();
        let w = 0.5 * len * half_pi * t.cosh() / (ch * ch);
        Some((x, w))
    };
    let t_max = 4.0;
    let mut h = 0.5;
    let mut sum = {
        let mut acc = 0.0;
        let mut k = -((t_max / h) as i64);
        while (k as f64) * h <= t_max {
            if let Some((x, w)) = node(k as f64 * h) {
                acc += w * f(x);
            }
            k += 1;
        }
        acc
    };
    let mut estimate = sum * h;
    for _ in 0..7 {
        h *= 0.5;
        // Only odd multiples of the new step are new nodes.
        let mut k = -((t_max / h) as i64) | 1;
        while (k as f64) * h <= t_max {
            if let Some((x, w)) = node(k as f64 * h) {
                sum += w * f(x);
            }
            k += 2;
        }
        let next = sum * h;
        if (next - estimate).abs() <= 1e-13 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Integrate over `[a, b]` split at the given interior points.
pub fn piecewise<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cuts: &[f64]) -> f64 {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    pts.windows(2).map(|w| tanh_sinh(&f, w[0], w[1])).sum()
}

/// Cell average of `w` over cell `(i, j)` of an `n`-grid by nested quadrature.
pub fn integrate_2d(w: &Graphon, n: usize, i: usize, j: usize) -> f64 {
    let nf = n as f64;
    let (a1, b1) = (i as f64 / nf, (i + 1) as f64 / nf);
    let (a2, b2) = (j as f64 / nf, (j + 1) as f64 / nf);

    let value = |x: f64, y: f64| -> f64 {
        match w.kind() {
            // Nodes never hit the axes, so the uncapped kernel is fine here.
            GraphonKind::PowerLaw { gamma, cap } => {
                let v = (x * y).powf(-gamma);
                cap.map_or(v, |c| v.min(c))
            }
            _ => w.eval(x, y).unwrap(),
        }
    };

    let inner_cuts = |x: f64| -> Vec<f64> {
        match w.kind() {
            GraphonKind::SmallWorld { r, .. } => [-1.0, 0.0, 1.0]
                .iter()
                .flat_map(|m| [x - m - r, x - m + r])
                .collect(),
            GraphonKind::PowerLaw { gamma, cap: Some(c) } => vec![x.recip() * c.powf(-1.0 / gamma)],
            _ => w.as_step().map(|s| s.breakpoints).unwrap_or_default(),
        }
    };
    let outer_cuts: Vec<f64> = match w.kind() {
        GraphonKind::SmallWorld { r, .. } => [a2, b2]
            .iter()
            .flat_map(|y| [-1.0, 0.0, 1.0].map(|m| (y, m)))
            .flat_map(|(y, m)| [y + m - r, y + m + r])
            .collect(),
        GraphonKind::PowerLaw { gamma, cap: Some(c) } => {
            let t = c.powf(-1.0 / gamma);
            let mut v = vec![t / b2];
            if a2 > 0.0 {
                v.push(t / a2);
            }
            v
        }
        _ => w.as_step().map(|s| s.breakpoints).unwrap_or_default(),
    };

    let outer = |x: f64| piecewise(|y| value(x, y), a2, b2, &inner_cuts(x));
    piecewise(outer, a1, b1, &outer_cuts) * nf * nf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_and_endpoint_singular_functions() {
        assert!((tanh_sinh(|x| x * x, 0.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((tanh_sinh(|x| x.powf(-0.5), 0.0, 1.0) - 2.0).abs() < 1e-13);
        assert!((tanh_sinh(f64::sin, 0.0, std::f64::consts::PI) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn piecewise_handles_jumps() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        assert!((piecewise(f, 0.0, 1.0, &[0.3]) - 1.7).abs() < 1e-14);
    }
}
