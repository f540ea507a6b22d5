//! Bounded Nelder-Mead simplex minimizer.
//!
//! Non-periodic coordinates are clipped onto their box after every move;
//! periodic ones are left free. Coefficients follow the dimension-adaptive
//! choice of Gao and Han, which behaves better than the textbook values
//! above four or five dimensions.

use crate::scenarios::ParamBound;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Iteration cap, shared across restarts.
    pub max_iterations: usize,
    /// Converged once the spread of vertex values is at most this.
    pub ftol: f64,
    /// ... and every vertex lies within this distance (max-norm) of the best.
    pub xtol: f64,
    /// Initial edge length as a fraction of each coordinate's box width.
    pub initial_step: f64,
    /// Fresh simplices built around a converged point.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            ftol: 1e-9,
            xtol: 1e-5,
            initial_step: 0.1,
            restarts: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        // NaN never wins a comparison.
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn project(bounds: &[ParamBound], x: &mut [f64]) {
    for (xi, b) in x.iter_mut().zip(bounds) {
        *xi = b.project(*xi);
    }
}

/// Minimizes `f` from `x0` inside `bounds`.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &[ParamBound], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), bounds.len(), "start point and bounds disagree in dimension");
    let mut f = Counted { f, evaluations: 0 };
    let mut x = x0.to_vec();
    project(bounds, &mut x);
    let mut fx = f.call(&x);
    let mut iterations = 0;
    let mut converged = false;
    let mut step = opts.initial_step;

    for _round in 0..=opts.restarts {
        let budget = opts.max_iterations.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let run = run_simplex(&mut f, &x, fx, bounds, step, budget, opts);
        iterations += run.iterations;
        let improvement = fx - run.fx;
        if run.fx <= fx {
            x = run.x;
            fx = run.fx;
        }
        converged = run.converged;
        // A restart that no longer moves the value means we are done.
        if !converged || improvement.abs() <= opts.ftol {
            break;
        }
        step *= 0.5;
    }

    SimplexResult {
        x,
        fx,
        iterations,
        evaluations: f.evaluations,
        converged,
    }
}

struct Run {
    x: Vec<f64>,
    fx: f64,
    iterations: usize,
    converged: bool,
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    bounds: &[ParamBound],
    step: f64,
    budget: usize,
    opts: &SimplexOptions,
) -> Run {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut v = x0.to_vec();
        let h = step * bounds[i].width();
        // Step inward when the forward vertex would be clipped back.
        v[i] = if !bounds[i].periodic && v[i] + h > bounds[i].hi {
            v[i] - h
        } else {
            v[i] + h
        };
        project(bounds, &mut v);
        let fv = f.call(&v);
        simplex.push((v, fv));
    }

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_f, worst_f) = (simplex[0].1, simplex[n].1);
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if worst_f - best_f <= opts.ftol && diameter <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (v, _) in &simplex[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / nf;
            }
        }
        let worst = simplex[n].0.clone();
        let along = |coef: f64, out: &mut Vec<f64>| {
            for i in 0..n {
                out[i] = centroid[i] + coef * (centroid[i] - worst[i]);
            }
            project(bounds, out);
        };

        along(alpha, &mut trial);
        let fr = f.call(&trial);
        if fr < best_f {
            let mut expanded = vec![0.0; n];
            along(alpha * gamma, &mut expanded);
            let fe = f.call(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (trial.clone(), fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (trial.clone(), fr);
            continue;
        }
        // Contraction: outside if the reflection helped, inside otherwise.
        let outside = fr < worst_f;
        let mut contracted = vec![0.0; n];
        along(if outside { alpha * rho } else { -rho }, &mut contracted);
        let fc = f.call(&contracted);
        if (outside && fc <= fr) || (!outside && fc < worst_f) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (v, fv) in simplex.iter_mut().skip(1) {
            for (vi, ai) in v.iter_mut().zip(&anchor) {
                *vi = ai + sigma * (*vi - ai);
            }
            project(bounds, v);
            *fv = f.call(v);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Run {
        x,
        fx,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(n: usize, lo: f64, hi: f64) -> Vec<ParamBound> {
        vec![
            ParamBound {
                lo,
                hi,
                periodic: false
            };
            n
        ]
    }

    #[test]
    fn quadratic_bowl() {
        let target = [0.3, -1.2, 2.0, 0.7];
        let f = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let r = minimize(f, &[0.0; 4], &free(4, -5.0, 5.0), &SimplexOptions::default());
        assert!(r.converged);
        for (x, t) in r.x.iter().zip(&target) {
            assert!((x - t).abs() < 1e-4, "{x} vs {t}");
        }
        assert!(r.fx < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            ftol: 1e-14,
            xtol: 1e-8,
            ..Default::default()
        };
        let r = minimize(f, &[-1.2, 1.0], &free(2, -5.0, 5.0), &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn optimum_on_the_boundary_is_clipped() {
        // Unconstrained minimum at x = 3 lies outside [0, 1].
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] - 0.5).powi(2);
        let r = minimize(f, &[0.2, 0.2], &free(2, 0.0, 1.0), &SimplexOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6);
        assert!((r.x[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn periodic_coordinates_are_not_clipped() {
        let b = [ParamBound {
            lo: 0.0,
            hi: 1.0,
            periodic: true,
        }];
        let f = |x: &[f64]| (x[0] - 1.4).powi(2);
        let r = minimize(f, &[0.9], &b, &SimplexOptions::default());
        assert!((r.x[0] - 1.4).abs() < 1e-4);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_iterations: 5,
            ..Default::default()
        };
        let r = minimize(f, &[-1.2, 1.0], &free(2, -5.0, 5.0), &opts);
        assert!(!r.converged);
        assert!(r.iterations <= 5);
    }
}
