//! Box-constrained Nelder–Mead.
//!
//! Trial points are projected onto the box before evaluation, so the
//! objective never sees an out-of-bounds vector.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Initial edge length as a fraction of each parameter's range.
    pub initial_step: f64,
    /// Stop once the spread of objective values over the simplex is below this.
    pub f_tol: f64,
    /// Stop immediately when an objective value at or below this is found.
    pub target: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 1000,
            initial_step: 0.1,
            f_tol: 1e-14,
            target: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Best-so-far objective after each evaluation.
    pub trace: Vec<f64>,
}

pub fn clamp_to(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

struct Counter<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    lower: &'a [f64],
    upper: &'a [f64],
    evals: usize,
    best: (Vec<f64>, f64),
    trace: Vec<f64>,
}

impl Counter<'_> {
    fn eval(&mut self, x: &mut [f64]) -> f64 {
        clamp_to(x, self.lower, self.upper);
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.evals += 1;
        if v < self.best.1 {
            self.best = (x.to_vec(), v);
        }
        self.trace.push(self.best.1);
        v
    }
}

/// Minimises `f` from `x0` (clamped into the box). At most
/// `opts.max_evals` evaluations; the result is the best point evaluated.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Minimum {
    let n = x0.len();
    let mut c = Counter {
        f,
        lower,
        upper,
        evals: 0,
        best: (x0.to_vec(), f64::INFINITY),
        trace: Vec::new(),
    };
    if opts.max_evals == 0 {
        return Minimum {
            x: x0.to_vec(),
            f: f64::INFINITY,
            evals: 0,
            trace: Vec::new(),
        };
    }
    let mut start = x0.to_vec();
    let f0 = c.eval(&mut start);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        if c.evals >= opts.max_evals || f0 <= opts.target {
            break;
        }
        let range = upper[i] - lower[i];
        let mut step = opts.initial_step * if range.is_finite() { range } else { start[i].abs().max(1.0) };
        if step == 0.0 {
            step = 1e-6;
        }
        let mut p = start.clone();
        p[i] += step;
        if p[i] > upper[i] {
            p[i] = start[i] - step;
        }
        let v = c.eval(&mut p);
        simplex.push((p, v));
    }

    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    while simplex.len() == n + 1 && c.evals < opts.max_evals && c.best.1 > opts.target {
        simplex.sort_by(by_value);
        if simplex[n].1 - simplex[0].1 <= opts.f_tol {
            break;
        }
        let mut centroid = alloc::vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (cv, pv) in centroid.iter_mut().zip(p) {
                *cv += pv / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(cv, wv)| cv + t * (wv - cv))
                .collect()
        };
        let mut xr = along(-1.0);
        let fr = c.eval(&mut xr);
        if fr < simplex[0].1 {
            if c.evals >= opts.max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let mut xe = along(-2.0);
            let fe = c.eval(&mut xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if c.evals >= opts.max_evals {
                break;
            }
            let (mut xc, outside) = if fr < worst.1 { (along(-0.5), true) } else { (along(0.5), false) };
            let fc = c.eval(&mut xc);
            if (outside && fc <= fr) || (!outside && fc < worst.1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    if c.evals >= opts.max_evals {
                        break;
                    }
                    let mut p: Vec<f64> = best.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let v = c.eval(&mut p);
                    *item = (p, v);
                }
            }
        }
    }
    Minimum {
        x: c.best.0,
        f: c.best.1,
        evals: c.evals,
        trace: c.trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum_inside_box() {
        let mut f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2);
        let m = nelder_mead(&mut f, &[0.0, 0.0], &[-2.0, -2.0], &[2.0, 2.0], &SimplexOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] + 0.5).abs() < 1e-5);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        let mut seen_outside = false;
        let mut f = |x: &[f64]| {
            seen_outside |= x[0] < 0.5;
            x[0]
        };
        let m = nelder_mead(&mut f, &[1.0], &[0.5], &[2.0], &SimplexOptions::default());
        assert!(!seen_outside);
        assert_eq!(m.x[0], 0.5);
    }

    #[test]
    fn eval_budget_is_hard() {
        let mut count = 0;
        let mut f = |x: &[f64]| {
            count += 1;
            x.iter().map(|v| v * v).sum()
        };
        let m = nelder_mead(&mut f, &[1.0, 1.0, 1.0], &[-5.0; 3], &[5.0; 3], &SimplexOptions { max_evals: 17, ..Default::default() });
        assert_eq!(m.evals, 17);
        assert_eq!(count, 17);
    }
}
