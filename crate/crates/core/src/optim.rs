//! Quasi-Newton minimization (BFGS) with optional box constraints.
//!
//! Box constraints use a projected step with an active set: coordinates
//! pinned at a bound whose gradient points outward are frozen for the
//! iteration and the inverse Hessian is reset whenever the active set
//! changes. Objectives may return `f64::INFINITY` for infeasible points; the
//! line search backs off from them.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the max-norm of the projected gradient falls below this.
    pub grad_tol: f64,
    /// Stop when the max-norm of an accepted step falls below this.
    pub step_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 1000, grad_tol: 1e-6, step_tol: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

/// Unconstrained BFGS.
pub fn bfgs<F, G>(f: F, grad: G, x0: DVector<f64>, opts: BfgsOptions) -> Minimum
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let lo = DVector::from_element(n, f64::NEG_INFINITY);
    let hi = DVector::from_element(n, f64::INFINITY);
    bfgs_box(f, grad, x0, &lo, &hi, opts)
}

fn project(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn active_set(x: &DVector<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Vec<bool> {
    (0..x.len()).map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)).collect()
}

fn projected_grad_norm(x: &DVector<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    (0..x.len()).map(|i| (x[i] - (x[i] - g[i]).clamp(lo[i], hi[i])).abs()).fold(0.0, f64::max)
}

/// BFGS restricted to the box `lo <= x <= hi`.
pub fn bfgs_box<F, G>(
    f: F,
    grad: G,
    x0: DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    opts: BfgsOptions,
) -> Minimum
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let mut x = x0;
    project(&mut x, lo, hi);
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut active = active_set(&x, &g, lo, hi);
    let mut fresh = true;

    for iter in 0..opts.max_iter {
        let gnorm = projected_grad_norm(&x, &g, lo, hi);
        if gnorm < opts.grad_tol {
            return Minimum { x, value: fx, iterations: iter, converged: true, grad_norm: gnorm };
        }

        let mut gf = g.clone();
        for i in 0..n {
            if active[i] {
                gf[i] = 0.0;
            }
        }
        let mut d = -(&h * &gf);
        for i in 0..n {
            if active[i] {
                d[i] = 0.0;
            }
        }
        if gf.dot(&d) >= 0.0 {
            h = DMatrix::identity(n, n);
            d = -gf.clone();
            fresh = true;
        }

        // Backtracking Armijo search on the projected path.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = &x + &d * step;
            project(&mut trial, lo, hi);
            let ft = f(&trial);
            let decrease = g.dot(&(&trial - &x));
            if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        // Extrapolate while a full step leaves the directional derivative
        // steep (weak Wolfe curvature test fails) and the value keeps falling.
        if let Some((ref mut xa, ref mut fa)) = accepted {
            if step == 1.0 {
                let slope0 = g.dot(&d);
                let mut t = 1.0;
                for _ in 0..30 {
                    if grad(xa).dot(&d) > 0.9 * slope0 {
                        break;
                    }
                    t *= 2.0;
                    let mut trial = &x + &d * t;
                    project(&mut trial, lo, hi);
                    let ft = f(&trial);
                    if !(ft.is_finite() && ft < *fa) || trial == *xa {
                        break;
                    }
                    *xa = trial;
                    *fa = ft;
                }
            }
        }
        let Some((x_new, f_new)) = accepted else {
            if !fresh {
                // Retry from steepest descent before giving up.
                h = DMatrix::identity(n, n);
                fresh = true;
                continue;
            }
            return Minimum { x, value: fx, iterations: iter, converged: false, grad_norm: gnorm };
        };

        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let step_norm = s.amax();
        x = x_new;
        fx = f_new;
        g = g_new;

        let new_active = active_set(&x, &g, lo, hi);
        if new_active != active {
            h = DMatrix::identity(n, n);
            fresh = true;
        } else {
            let sy = s.dot(&y);
            if sy > 1e-14 {
                if fresh {
                    h *= sy / y.dot(&y);
                    fresh = false;
                }
                let rho = 1.0 / sy;
                let hy = &h * &y;
                let yhy = y.dot(&hy);
                // H+ = H - rho (s hy' + hy s') + (rho^2 yHy + rho) s s'
                h = &h - (&s * hy.transpose() + &hy * s.transpose()) * rho
                    + (&s * s.transpose()) * (rho * rho * yhy + rho);
            }
        }
        active = new_active;

        if opts.step_tol > 0.0 && step_norm < opts.step_tol {
            let gnorm = projected_grad_norm(&x, &g, lo, hi);
            return Minimum { x, value: fx, iterations: iter + 1, converged: true, grad_norm: gnorm };
        }
    }
    let gnorm = projected_grad_norm(&x, &g, lo, hi);
    Minimum { x, value: fx, iterations: opts.max_iter, converged: gnorm < opts.grad_tol, grad_norm: gnorm }
}
