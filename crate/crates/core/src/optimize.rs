//! Limited-memory BFGS with Armijo backtracking.
//!
//! Minimizes a smooth objective given value and gradient. Every accepted
//! step strictly decreases the objective, and the value after each accepted
//! step is recorded in [`Outcome::trace`].

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop when `|Δf| ≤ rel_tol · max(|f|, f_scale)` and the gradient test passes.
    pub rel_tol: f64,
    pub f_scale: f64,
    /// Max-norm gradient threshold.
    pub grad_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iter: 2000,
            memory: 10,
            rel_tol: 1e-10,
            f_scale: 1.0,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `f(x, grad)` writes the gradient into `grad` and returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut trace = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    if !fx.is_finite() {
        return Outcome {
            grad_norm: f64::INFINITY,
            x,
            value: fx,
            iterations,
            converged,
            trace,
        };
    }

    while iterations < opts.max_iter {
        let gnorm = max_abs(&g);
        if gnorm <= opts.grad_tol * 1e-3 {
            converged = true;
            break;
        }
        let mut d = two_loop(&g, &s_hist, &y_hist, &rho_hist);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if s_hist.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope && f_new < fx {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            if !s_hist.is_empty() {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            // no descent possible along the gradient: numerically stationary
            converged = gnorm <= opts.grad_tol;
            break;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }
        let change = (fx - f_new).abs();
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        trace.push(fx);
        if change <= opts.rel_tol * fx.abs().max(opts.f_scale) && max_abs(&g) <= opts.grad_tol {
            converged = true;
            break;
        }
    }
    Outcome {
        grad_norm: max_abs(&g),
        x,
        value: fx,
        iterations,
        converged,
        trace,
    }
}

fn two_loop(g: &[f64], s: &[Vec<f64>], y: &[Vec<f64>], rho: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let m = s.len();
    let mut alpha = vec![0.0; m];
    for k in (0..m).rev() {
        alpha[k] = rho[k] * dot(&s[k], &q);
        for (qi, yi) in q.iter_mut().zip(&y[k]) {
            *qi -= alpha[k] * yi;
        }
    }
    if let Some(k) = m.checked_sub(1) {
        let gamma = dot(&s[k], &y[k]) / dot(&y[k], &y[k]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for k in 0..m {
        let beta = rho[k] * dot(&y[k], &q);
        for (qi, si) in q.iter_mut().zip(&s[k]) {
            *qi += (alpha[k] - beta) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
