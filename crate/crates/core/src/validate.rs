//! Invariant suite behind `kpzcum validate`, reported as versioned JSON.

use crate::cumulants::{c1_continued, c2_origin, Problem};
use crate::largel::{find_c2_minimum, MinimumMode};
use crate::mc::{mc_c1_open_line, mc_c1_periodic, McConfig};
use crate::model::{kernel_kk_line, BoundaryParams, KernelMatrix};
use crate::periodic::{bd_crosscheck, periodic_cumulants};
use crate::quadrature::{gauss_kronrod, gauss_legendre, ContourGrid};
use crate::series::cumulants_from_weights;
use crate::{Result, DEFAULT_KMAX, DEFAULT_NODES, DEFAULT_SEED, DEFAULT_TOL};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured < threshold`; errors count as failures.
    pub fn below(name: &str, measured: Result<f64>, threshold: f64) -> Check {
        let m = measured.unwrap_or(f64::NAN);
        Check { name: name.to_string(), measured: m, threshold, pass: m < threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub nodes: usize,
    pub kmax: usize,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub steps: usize,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateConfig {
    pub nodes: usize,
    pub seed: u64,
    pub samples: usize,
    pub steps: usize,
    /// Diagonal constant used to build `k`; anything but Euler's constant should fail.
    pub euler: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            nodes: DEFAULT_NODES,
            seed: DEFAULT_SEED,
            samples: crate::mc::DEFAULT_SAMPLES,
            steps: crate::mc::DEFAULT_STEPS,
            euler: crate::specfun::EULER_GAMMA,
        }
    }
}

/// Relative mismatch between the stored diagonal of `k` and the limit of
/// its off-diagonal entries, `-4 Re psi(1 + i eps)` as `eps -> 0`.
pub fn kk_diagonal_deviation(euler: f64) -> Result<f64> {
    let p = BoundaryParams::new(1.0, 1.0, 1.0)?;
    let grid = ContourGrid::new(&p, 64, 0.0)?;
    let k = KernelMatrix::with_euler(&grid, euler);
    let limit = kernel_kk_line(0.0, 1e-8);
    Ok((k.entry(7, 7) - limit).abs() / limit.abs())
}

/// Laplace transform `f(w) = int_0^inf e^{-w t} fhat(t) dt` of a Gaussian
/// bump `fhat(t) = exp(-(t - center)^2 / (2 width^2))`.
#[derive(Debug, Clone)]
pub struct GaussianLaplace {
    t: Vec<f64>,
    wt: Vec<f64>,
}

impl GaussianLaplace {
    pub fn new(center: f64, width: f64, n: usize) -> Self {
        let hi = center + 12.0 * width;
        let lo = (center - 12.0 * width).max(0.0);
        let (x, w) = gauss_legendre(n);
        let half = 0.5 * (hi - lo);
        let t: Vec<f64> = x.iter().map(|x| lo + half * (x + 1.0)).collect();
        let wt =
            t.iter().zip(&w).map(|(t, w)| w * half * (-(t - center).powi(2) / (2.0 * width * width)).exp()).collect();
        GaussianLaplace { t, wt }
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.t.iter().zip(&self.wt).map(|(&t, &c)| (-w * t).exp() * c).sum()
    }
}

/// Maximum deviation of `k phi` from `2 f(1 + w) + 2 g(1 - w)` over the
/// inner half of the grid, for `phi(w) = f(w) - f(w + 1) + g(-w) - g(1 - w)`.
pub fn kernel_action_deviation(n_nodes: usize) -> Result<f64> {
    let f = GaussianLaplace::new(3.0, 0.5, 400);
    let g = GaussianLaplace::new(3.5, 0.5, 400);
    // |f(iy)| ~ exp(-width^2 y^2 / 2); bumps sit far from t = 0 so the 1/w tails are negligible
    let grid = ContourGrid::with_envelope(0.5 * 0.25, 0.0, 1.0, n_nodes, 0.0)?;
    let k = KernelMatrix::build(&grid);
    let one = Complex64::new(1.0, 0.0);
    let phi: Vec<Complex64> = grid
        .nodes
        .iter()
        .map(|&y| {
            let w = Complex64::new(0.0, y);
            f.eval(w) - f.eval(w + one) + g.eval(-w) - g.eval(one - w)
        })
        .collect();
    let re: Vec<f64> = phi.iter().map(|z| z.re).collect();
    let im: Vec<f64> = phi.iter().map(|z| z.im).collect();
    let (kre, kim) = (k.apply(&re)?, k.apply(&im)?);
    let mut worst: f64 = 0.0;
    for (i, &y) in grid.nodes.iter().enumerate() {
        if y.abs() > 0.5 * grid.cutoff {
            continue;
        }
        let w = Complex64::new(0.0, y);
        let want = 2.0 * f.eval(one + w) + 2.0 * g.eval(one - w);
        worst = worst.max((Complex64::new(kre[i], kim[i]) - want).norm());
    }
    Ok(worst)
}

fn max_pairwise(v: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for a in v {
        for b in v {
            m = m.max((a - b).abs());
        }
    }
    m
}

/// Pairwise spread of the four `c2` routes at `params`.
pub fn c2_route_spread(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    let p = Problem::new(params, n_nodes)?;
    let series = cumulants_from_weights(&p.weights, &p.kernel, 2)?[1];
    let (kk, _) = p.c2_kernel_k()?;
    Ok(max_pairwise(&[p.c2()?, p.c2_total_derivative()?, kk, series]))
}

pub fn c3_route_gap(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    let p = Problem::new(params, n_nodes)?;
    let series = cumulants_from_weights(&p.weights, &p.kernel, 3)?[2];
    Ok((p.c3()? - series).abs())
}

fn mc_sigmas(mean: f64, stderr: f64, target: f64) -> f64 {
    (mean - target).abs() / stderr
}

pub fn run_validation(cfg: &ValidateConfig) -> Report {
    let n = cfg.nodes;
    let mut checks = Vec::new();
    checks.push(Check::below("kk_diagonal", kk_diagonal_deviation(cfg.euler), 1e-9));
    checks.push(Check::below("kernel_action_identity", kernel_action_deviation(n), 1e-6));
    for (u, v, l) in [(1.0, 1.0, 1.0), (0.7, 1.3, 1.0), (0.5, 2.0, 0.5)] {
        let p = BoundaryParams::new(u, v, l);
        let tag = format!("({u},{v},{l})");
        checks.push(Check::below(&format!("c2_routes{tag}"), p.clone().and_then(|p| c2_route_spread(&p, n)), 1e-7));
        checks.push(Check::below(&format!("c3_routes{tag}"), p.and_then(|p| c3_route_gap(&p, n)), 1e-6));
    }
    checks.push(Check::below(
        "equilibrium_c1(0.6,-0.6,1)",
        BoundaryParams::new(0.6, -0.6, 1.0).and_then(|p| c1_continued(&p, n)).map(|c| (c - (-1.0 / 24.0 + 0.18)).abs()),
        1e-9,
    ));
    for l in [0.25, 1.0, 4.0] {
        let per = periodic_cumulants(l, n, 2);
        let bd = bd_crosscheck(l);
        checks.push(Check::below(
            &format!("periodic_c1(L={l})"),
            per.as_ref().map(|r| (r.c[0] - (-1.0 / 24.0 - 0.5 / l)).abs()).map_err(Clone::clone),
            1e-10,
        ));
        checks.push(Check::below(
            &format!("periodic_closed_forms(L={l})"),
            bd.as_ref().map(|(a, b)| (a - b).abs()).map_err(Clone::clone),
            1e-8,
        ));
        let gap = match (&per, &bd) {
            (Ok(r), Ok((a, _))) => Ok((r.c[1] - a).abs()),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        };
        checks.push(Check::below(&format!("periodic_c2(L={l})"), gap, 1e-7));
    }
    checks.push(Check::below(
        "c2_origin_adaptive(L=1)",
        c2_origin(1.0, n).and_then(|c| {
            let f = |x: f64| 2.0 * if x == 0.0 { 1.0 / PI } else { x / (PI * x).tanh() } * (-x * x).exp();
            Ok((c - gauss_kronrod(f, 0.0, 12.0, 1e-14)?).abs())
        }),
        1e-10,
    ));
    let min_eq = find_c2_minimum(MinimumMode::Equal);
    checks.push(Check::below(
        "c2_minimum_equal_location",
        min_eq.as_ref().map(|m| (m.0 - 2.19956).abs()).map_err(Clone::clone),
        1e-2,
    ));
    checks.push(Check::below(
        "c2_minimum_equal_value",
        min_eq.as_ref().map(|m| (m.1 - 0.446153).abs()).map_err(Clone::clone),
        1e-3,
    ));
    let min_v0 = find_c2_minimum(MinimumMode::VZero);
    checks.push(Check::below(
        "c2_minimum_v0_location",
        min_v0.as_ref().map(|m| (m.0 - 0.423115).abs()).map_err(Clone::clone),
        1e-2,
    ));
    checks.push(Check::below(
        "c2_minimum_v0_value",
        min_v0.as_ref().map(|m| (m.1 - 0.548349).abs()).map_err(Clone::clone),
        1e-3,
    ));
    let mc = McConfig::new(cfg.samples, cfg.steps, cfg.seed);
    checks.push(Check::below(
        "mc_periodic_sigmas(L=1)",
        mc_c1_periodic(1.0, &mc).map(|e| mc_sigmas(e.mean, e.stderr, -13.0 / 24.0)),
        3.0,
    ));
    let half = BoundaryParams::new(0.5, 0.5, 1.0).and_then(|p| Problem::new(&p, n));
    let open = mc_c1_open_line(0.5, 1.0, &mc);
    let (c1_gap, den_gap) = match (&half, &open) {
        (Ok(p), Ok(o)) => (
            Ok(mc_sigmas(o.c1.mean, o.c1.stderr, p.c1())),
            Ok(mc_sigmas(o.denominator.mean, o.denominator.stderr, p.weights.zcal)),
        ),
        (Err(e), _) | (_, Err(e)) => (Err(e.clone()), Err(e.clone())),
    };
    checks.push(Check::below("mc_open_line_sigmas(u=1/2,L=1)", c1_gap, 3.0));
    checks.push(Check::below("mc_open_denominator_sigmas(u=1/2,L=1)", den_gap, 3.0));
    let all_pass = checks.iter().all(|c| c.pass);
    Report {
        schema: SCHEMA_VERSION,
        nodes: n,
        kmax: DEFAULT_KMAX,
        tol: DEFAULT_TOL,
        seed: cfg.seed,
        samples: cfg.samples,
        steps: cfg.steps,
        checks,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::EULER_GAMMA;

    #[test]
    fn diagonal_check_detects_perturbation() {
        assert!(kk_diagonal_deviation(EULER_GAMMA).unwrap() < 1e-9);
        assert!(kk_diagonal_deviation(1.01 * EULER_GAMMA).unwrap() > 1e-3);
    }

    #[test]
    fn laplace_of_gaussian_bump() {
        // at w = 0 the transform is the mass of the bump
        let f = GaussianLaplace::new(3.0, 0.5, 400);
        let mass = 0.5 * (2.0 * PI).sqrt() * 0.5 * crate::specfun::erfc(-6.0 / 2f64.sqrt());
        assert!((f.eval(Complex64::new(0.0, 0.0)).re - mass).abs() < 1e-12);
    }

    #[test]
    fn kernel_action_identity() {
        let d = kernel_action_deviation(400).unwrap();
        assert!(d < 1e-6, "{d}");
    }
}
