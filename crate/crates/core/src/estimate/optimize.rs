//! Small dense optimizers over free-parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;

/// Search direction used by [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Descent {
    /// Steepest descent.
    Gradient,
    /// Quasi-Newton (BFGS inverse-Hessian update). Reaches the same minima
    /// as steepest descent in far fewer iterations.
    #[default]
    Bfgs,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective value after each accepted step, starting at `x0`.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes a smooth function with backtracking (Armijo) line search.
///
/// Each iteration starts with step 1 and halves it until the sufficient
/// decrease condition `f(x + t d) <= f(x) + 1e-4 t ∇f·d` holds, so every
/// accepted step strictly lowers the objective. Stops once
/// `‖∇f‖ < grad_tol`, after `max_iters` steps, or when no step length
/// above `1e-20` decreases the objective.
pub fn minimize<F>(
    f: F,
    x0: &[f64],
    descent: Descent,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Minimum>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteEnergy { iteration: 0 });
    }
    let mut trace = vec![fx];
    // inverse Hessian approximation, row-major
    let mut inv = identity(dim);
    let mut iterations = 0;
    while iterations < max_iters && norm(&g) >= grad_tol {
        let mut d = match descent {
            Descent::Gradient => g.iter().map(|v| -v).collect::<Vec<_>>(),
            Descent::Bfgs => mat_vec(&inv, &g, dim).into_iter().map(|v| -v).collect(),
        };
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            inv = identity(dim);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO_C * t * slope && ft < fx {
                break Some((trial, ft, gt));
            }
            t *= SHRINK;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((xn, fxn, gn)) = accepted else {
            break;
        };
        iterations += 1;
        if descent == Descent::Bfgs {
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            bfgs_update(&mut inv, &s, &y, dim);
        }
        x = xn;
        fx = fxn;
        g = gn;
        trace.push(fx);
    }
    Ok(Minimum {
        grad_norm: norm(&g),
        x,
        value: fx,
        iterations,
        trace,
    })
}

fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], dim: usize) -> Vec<f64> {
    (0..dim).map(|i| dot(&m[i * dim..(i + 1) * dim], v)).collect()
}

fn bfgs_update(inv: &mut [f64], s: &[f64], y: &[f64], dim: usize) {
    let sy = dot(s, y);
    if sy <= 1e-12 * norm(s) * norm(y) {
        return;
    }
    let rho = 1.0 / sy;
    let hy = mat_vec(inv, y, dim);
    let yhy = dot(y, &hy);
    // H+ = H - ρ(s hyᵀ + hy sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
    for i in 0..dim {
        for j in 0..dim {
            inv[i * dim + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Nelder–Mead settings. Coefficients are reflection 1, expansion 2,
/// contraction 0.5 and shrink 0.5.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Offset of the initial simplex vertices along each axis.
    pub step: f64,
    pub max_evals: usize,
    pub xatol: f64,
    pub fatol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            max_evals: 200,
            xatol: 1e-4,
            fatol: 1e-4,
        }
    }
}

/// Derivative-free simplex search. Returns the best vertex, its value and
/// the number of objective evaluations.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: SimplexOptions) -> Result<(Vec<f64>, f64, usize)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let dim = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)?));
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        let fv = eval(&v, &mut evals)?;
        simplex.push((v, fv));
    }
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };
    while evals < opts.max_evals {
        // stable sort keeps the earlier vertex first on ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].clone();
        let fspread = simplex.iter().map(|v| (v.1 - best.1).abs()).fold(0.0, f64::max);
        let xspread = simplex
            .iter()
            .flat_map(|v| v.0.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fspread <= opts.fatol && xspread <= opts.xatol {
            break;
        }
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v.0[j]).sum::<f64>() / dim as f64)
            .collect();
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected, &mut evals)?;
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded, &mut evals)?;
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = lerp(&centroid, &worst.0, -0.5);
            let fc = eval(&c, &mut evals)?;
            (c, fc)
        } else {
            let c = lerp(&centroid, &worst.0, 0.5);
            let fc = eval(&c, &mut evals)?;
            (c, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        for vertex in simplex.iter_mut().skip(1) {
            let v = lerp(&best.0, &vertex.0, 0.5);
            let fv = eval(&v, &mut evals)?;
            *vertex = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Ok((x, fx, evals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (f, g)
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], Descent::Bfgs, 1e-8, 500).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn accepted_steps_strictly_decrease() {
        for descent in [Descent::Gradient, Descent::Bfgs] {
            let m = minimize(rosenbrock, &[-1.2, 1.0], descent, 1e-8, 300).unwrap();
            assert!(m.trace.windows(2).all(|w| w[1] < w[0]));
            assert_eq!(m.trace.len(), m.iterations + 1);
        }
    }

    #[test]
    fn gradient_descent_on_quadratic() {
        let f = |x: &[f64]| {
            let v = 0.5 * (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2);
            (v, vec![x[0] - 3.0, 4.0 * (x[1] + 1.0)])
        };
        let m = minimize(f, &[0.0, 0.0], Descent::Gradient, 1e-10, 1000).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-9 && (m.x[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_start_rejected() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(
            minimize(f, &[0.0], Descent::Gradient, 1e-6, 10),
            Err(Error::NonFiniteEnergy { iteration: 0 })
        ));
    }

    #[test]
    fn simplex_finds_quadratic_minimum() {
        let f = |x: &[f64]| Ok((x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2));
        let opts = SimplexOptions {
            step: 0.1,
            max_evals: 500,
            xatol: 1e-8,
            fatol: 1e-12,
        };
        let (x, fx, evals) = nelder_mead(f, &[0.0, 0.0], opts).unwrap();
        assert!(fx < 1e-10, "{fx}");
        assert!((x[0] - 0.3).abs() < 1e-4);
        assert!(evals <= 500);
    }

    #[test]
    fn simplex_respects_eval_cap() {
        let f = |x: &[f64]| Ok(x.iter().map(|v| v.sin()).sum::<f64>());
        let opts = SimplexOptions {
            max_evals: 20,
            xatol: 0.0,
            fatol: 0.0,
            ..Default::default()
        };
        let (_, _, evals) = nelder_mead(f, &[0.0; 3], opts).unwrap();
        // the last iteration may overshoot by one shrink
        assert!(evals <= 20 + 3);
    }
}
