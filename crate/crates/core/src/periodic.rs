//! Periodic boundary conditions: the weight `e^{L w^2 / 2}` in the open
//! machinery, with `c_k^per = c_k / 2^{k-1}`.

use crate::cumulants::kbar_mean;
use crate::model::{KernelMatrix, ModelWeights};
use crate::quadrature::{gauss_legendre, ContourGrid};
use crate::series::{cumulants_from_weights, CumulantResult, Method};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Gaussian weight `e^{-L y^2 / 2}` on its own grid.
pub fn periodic_weights(l: f64, n_nodes: usize) -> Result<(ModelWeights, KernelMatrix)> {
    let grid = ContourGrid::with_envelope(0.5 * l, 0.0, 1.0, n_nodes, 0.0)?;
    let psi = grid.nodes.iter().map(|y| (-0.5 * l * y * y).exp()).collect();
    let w = ModelWeights::from_values(&grid, psi, l, 0.5)?;
    let k = KernelMatrix::build(&grid);
    Ok((w, k))
}

fn rescale(c: &mut [f64]) {
    for (k, ck) in c.iter_mut().enumerate() {
        *ck /= 2f64.powi(k as i32);
    }
}

pub fn periodic_cumulants(l: f64, n_nodes: usize, kmax: usize) -> Result<CumulantResult> {
    if !(l > 0.0) {
        return Err(Error::Domain(format!("L must be positive, got {l}")));
    }
    if kmax == 0 {
        return Err(Error::Domain("series order must be at least 1".into()));
    }
    let run = |n: usize| -> Result<Vec<f64>> {
        let (w, k) = periodic_weights(l, n)?;
        let mut c = cumulants_from_weights(&w, &k, kmax)?;
        rescale(&mut c);
        Ok(c)
    };
    let c = run(n_nodes)?;
    let coarse = run((n_nodes / 2).max(32))?;
    let delta = c.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CumulantResult { c, method: Method::Periodic, params: None, nodes: n_nodes, refinement_delta: Some(delta) })
}

/// `(1/2) <kbar(w1, w2)(w1^2 - <w^2>)>` under the periodic measure.
pub fn c2_periodic_direct(l: f64, n_nodes: usize) -> Result<f64> {
    let (w, k) = periodic_weights(l, n_nodes)?;
    let m = w.w2_mean;
    let centered: Vec<f64> = w.grid.nodes.iter().map(|y| -y * y - m).collect();
    let knu = k.apply(&w.nu)?;
    let f: Vec<f64> = knu.iter().zip(&centered).map(|(a, b)| a * b).collect();
    let g: Vec<f64> = w.nu.iter().zip(&centered).map(|(n, c)| n * n * c).collect();
    Ok(0.5 * (w.expect(&f) + w.grid.integrate(&g)))
}

/// `(1/2) d/dL <kbar>` under the periodic measure, central difference.
pub fn c2_periodic_dl(l: f64, n_nodes: usize) -> Result<f64> {
    let (w, k) = periodic_weights(l, n_nodes)?;
    let h = 1e-4 * l;
    let p = kbar_mean(&w.with_length(l + h)?, &k)?;
    let m = kbar_mean(&w.with_length(l - h)?, &k)?;
    Ok(0.5 * (p - m) / (2.0 * h))
}

/// Solve `U = -log(1 - 2 zeta Psi e^{k U / 2})` by plain iteration.
pub fn solve_u_periodic(w: &ModelWeights, k: &KernelMatrix, zeta: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut u = vec![0.0; w.len()];
    for _ in 0..max_iter {
        let ku = k.apply(&u)?;
        let next = w
            .psi
            .iter()
            .zip(&ku)
            .map(|(&p, &q)| {
                let arg = 1.0 - 2.0 * zeta * p * (0.5 * q).exp();
                if arg > 0.0 {
                    Ok(-arg.ln())
                } else {
                    Err(Error::DomainExceeded { zeta })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let d = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next;
        if d < tol {
            return Ok(u);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: f64::NAN })
}

/// `int_0^inf f(t) dt` by Gauss-Legendre after `t = c s / (1 - s)`.
fn half_line_gl<F: Fn(f64) -> f64>(f: F, c: f64, n: usize) -> f64 {
    let (x, wx) = gauss_legendre(n);
    x.iter()
        .zip(&wx)
        .map(|(&xi, &wi)| {
            let s = 0.5 * (xi + 1.0);
            let t = c * s / (1.0 - s);
            let jac = c / ((1.0 - s) * (1.0 - s));
            0.5 * wi * jac * f(t)
        })
        .sum()
}

/// The two closed forms of `c2^per`:
/// `res1 = 2 int t^2 e^{-t^2/L} / (L^2 (e^t - 1)) dt + sqrt(pi) / (4 sqrt L)` and
/// `res2 = (2 sqrt(2L))^{-1} int lambda^2 e^{-lambda^2/2} / tanh(lambda sqrt L / (2 sqrt 2)) d lambda`.
pub fn bd_crosscheck(l: f64) -> Result<(f64, f64)> {
    if !(l > 0.0) {
        return Err(Error::Domain(format!("L must be positive, got {l}")));
    }
    let n = 400;
    let f1 = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            t * t * (-t * t / l).exp() / t.exp_m1()
        }
    };
    let res1 = 2.0 / (l * l) * half_line_gl(f1, l.sqrt(), n) + PI.sqrt() / (4.0 * l.sqrt());
    let a = l.sqrt() / (2.0 * 2f64.sqrt());
    let f2 = |x: f64| {
        let ax = a * x;
        let r = if ax < 1e-8 { x / a } else { x * x / ax.tanh() };
        r * (-0.5 * x * x).exp()
    };
    let res2 = half_line_gl(f2, 1.0, n) / (2.0 * (2.0 * l).sqrt());
    Ok((res1, res2))
}
