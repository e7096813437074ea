//! Finite-`zeta` solutions of `U = -1/2 log(1 - 2 zeta Psi e^{k U})`, the
//! parametric curve `(s, E)` and its Legendre transform.

use crate::model::{KernelMatrix, ModelWeights};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub zeta: f64,
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ParametricCurve {
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RateFunction {
    pub samples: Vec<RateSample>,
}

fn update(psi: &[f64], ku: &[f64], zeta: f64) -> Result<Vec<f64>> {
    psi.iter()
        .zip(ku)
        .map(|(&p, &k)| {
            let arg = 1.0 - 2.0 * zeta * p * k.exp();
            if arg > 0.0 {
                Ok(-0.5 * arg.ln())
            } else {
                Err(Error::DomainExceeded { zeta })
            }
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damped fixed-point iteration from `U = 0`; the step is halved for good
/// after the first increase of the update norm.
pub fn solve_u(
    weights: &ModelWeights,
    kernel: &KernelMatrix,
    zeta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let psi = &weights.psi;
    let mut u = vec![0.0; psi.len()];
    let mut theta = 1.0;
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let next = update(psi, &kernel.apply(&u)?, zeta)?;
        let d = sup_diff(&next, &u);
        if d > last {
            theta = 0.5;
        }
        last = d;
        for (x, n) in u.iter_mut().zip(&next) {
            *x += theta * (n - *x);
        }
        if d < tol {
            let again = update(psi, &kernel.apply(&u)?, zeta)?;
            return Ok(FixedPoint { residual: sup_diff(&again, &u), u, iterations: it });
        }
    }
    let again = update(psi, &kernel.apply(&u)?, zeta)?;
    Err(Error::NoConvergence { iterations: max_iter, residual: sup_diff(&again, &u) })
}

/// `s = int U` and `E = -s/24 + (1/2) int w^2 U`.
pub fn curve_point(weights: &ModelWeights, fp: &FixedPoint, zeta: f64) -> CurvePoint {
    let g = &weights.grid;
    let s = g.integrate(&fp.u);
    let w2u: Vec<f64> = g.nodes.iter().zip(&fp.u).map(|(y, u)| -y * y * u).collect();
    CurvePoint { zeta, s, e: -s / 24.0 + 0.5 * g.integrate(&w2u), converged: true, iterations: fp.iterations }
}

/// Largest `zeta > 0` with a convergent solution, by bisection to relative width `rel`.
pub fn zeta_max(weights: &ModelWeights, kernel: &KernelMatrix, tol: f64, rel: f64) -> Result<f64> {
    let ok = |z: f64| solve_u(weights, kernel, z, tol, DEFAULT_MAX_ITER).is_ok();
    let pmax = weights.psi.iter().cloned().fold(0.0, f64::max);
    if !(pmax > 0.0) {
        return Err(Error::Singular("weight vanishes on the grid".into()));
    }
    // U >= 0 for zeta > 0, so zeta < 1/(2 max Psi) only if k U stays small;
    // bracket outward from there.
    let mut lo = 0.0;
    let mut hi = 0.5 / pmax;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 / pmax {
            return Err(Error::NoConvergence { iterations: 0, residual: hi });
        }
    }
    if lo == 0.0 {
        lo = hi;
        while !ok(lo) {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-12 / pmax {
                return Err(Error::DomainExceeded { zeta: lo });
            }
        }
    }
    while hi - lo > rel * lo {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Solve independently at each `zeta` (in parallel) and collect the curve in input order.
pub fn trace_curve(weights: &ModelWeights, kernel: &KernelMatrix, zetas: &[f64], tol: f64) -> Result<ParametricCurve> {
    let points = zetas
        .par_iter()
        .map(|&z| {
            let fp = solve_u(weights, kernel, z, tol, DEFAULT_MAX_ITER)?;
            Ok(curve_point(weights, &fp, z))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParametricCurve { points })
}

/// `n` equally spaced values from `-frac zmax` to `frac zmax`, always containing zero
/// (`n` is rounded up to odd).
pub fn symmetric_zeta_grid(zmax: f64, frac: f64, n: usize) -> Vec<f64> {
    let half = n.max(5) / 2;
    let h = frac * zmax / half as f64;
    (0..=2 * half).map(|i| (i as f64 - half as f64) * h).collect()
}

fn derivative(x: &[f64], i: usize) -> f64 {
    let n = x.len();
    if i >= 2 && i + 2 < n {
        (-x[i + 2] + 8.0 * x[i + 1] - 8.0 * x[i - 1] + x[i - 2]) / 12.0
    } else {
        0.5 * (x[i + 1] - x[i - 1])
    }
}

/// `H = dE/ds + 1/24` from centered differences in `zeta` (uniform grid
/// assumed) and `Phi = s H - E - s/24`, for interior points with `s >= 0`.
pub fn legendre(curve: &ParametricCurve) -> Result<RateFunction> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::Domain("need at least three curve points".into()));
    }
    for i in 1..pts.len() {
        if !(pts[i].s > pts[i - 1].s) {
            return Err(Error::NotMonotone(i));
        }
    }
    let s: Vec<f64> = pts.iter().map(|p| p.s).collect();
    let e: Vec<f64> = pts.iter().map(|p| p.e).collect();
    let mut samples = Vec::new();
    for i in 1..pts.len() - 1 {
        if s[i] < 0.0 {
            continue;
        }
        let h = derivative(&e, i) / derivative(&s, i) + 1.0 / 24.0;
        let phi = s[i] * h - e[i] - s[i] / 24.0;
        samples.push(RateSample { h, phi, s: s[i], e: e[i] });
    }
    Ok(RateFunction { samples })
}

impl RateFunction {
    /// Minimum discrete second difference of `Phi` against `H`.
    pub fn min_convexity(&self) -> f64 {
        let s = &self.samples;
        let mut worst = f64::INFINITY;
        for i in 1..s.len().saturating_sub(1) {
            let (a, b, c) = (&s[i - 1], &s[i], &s[i + 1]);
            let left = (b.phi - a.phi) / (b.h - a.h);
            let right = (c.phi - b.phi) / (c.h - b.h);
            worst = worst.min(right - left);
        }
        worst
    }

    /// `Phi` at `h` by linear interpolation between samples.
    pub fn interpolate(&self, h: f64) -> Option<f64> {
        self.samples.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if (a.h - h) * (b.h - h) <= 0.0 && a.h != b.h {
                Some(a.phi + (b.phi - a.phi) * (h - a.h) / (b.h - a.h))
            } else {
                None
            }
        })
    }

    /// `max_j (s H_j - Phi_j) - s/24`.
    pub fn reconstruct_e(&self, s: f64) -> f64 {
        self.samples.iter().map(|p| s * p.h - p.phi).fold(f64::NEG_INFINITY, f64::max) - s / 24.0
    }
}
