//! Closed forms for `c1, c2, c3`, the shifted-contour kernel-K route for
//! `c2`, and the analytic continuation to non-positive boundary parameters.

use crate::model::{kernel_big_k, psi_line, psi_weight, BoundaryParams, KernelMatrix, ModelWeights};
use crate::quadrature::ContourGrid;
use crate::specfun::{gamma, rgamma};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Shift of the second contour in the kernel-K route.
pub const K_ROUTE_SHIFT: f64 = 0.25;

/// Relative step of the central differences in `L`.
const DL_REL: f64 = 1e-4;

/// Weights and `k` on one grid, for the closed-form routes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: BoundaryParams,
    pub weights: ModelWeights,
    pub kernel: KernelMatrix,
}

impl Problem {
    pub fn new(params: &BoundaryParams, n_nodes: usize) -> Result<Self> {
        let grid = ContourGrid::new(params, n_nodes, 0.0)?;
        let weights = ModelWeights::build(params, &grid)?;
        let kernel = KernelMatrix::build(&grid);
        Ok(Problem { params: *params, weights, kernel })
    }

    fn step(&self) -> f64 {
        DL_REL * self.params.l
    }

    /// `-1/24 + <w^2>/2`.
    pub fn c1(&self) -> f64 {
        -1.0 / 24.0 + 0.5 * self.weights.w2_mean
    }

    /// `-1/24 + (1/2) d/dL log Z` by central difference.
    pub fn c1_from_log_z(&self) -> Result<f64> {
        let h = self.step();
        let zp = self.weights.with_length(self.params.l + h)?.z1;
        let zm = self.weights.with_length(self.params.l - h)?.z1;
        Ok(-1.0 / 24.0 + 0.5 * (zp.ln() - zm.ln()) / (2.0 * h))
    }

    /// `<k(w1, w2)(w1^2 - <w^2>)>` plus the coincidence term from `delta`.
    pub fn c2(&self) -> Result<f64> {
        let w = &self.weights;
        let knu = self.kernel.apply(&w.nu)?;
        let m = w.w2_mean;
        let centered: Vec<f64> = w.grid.nodes.iter().map(|y| -y * y - m).collect();
        let f: Vec<f64> = knu.iter().zip(&centered).map(|(a, b)| a * b).collect();
        let g: Vec<f64> = w.nu.iter().zip(&centered).map(|(n, c)| n * n * c).collect();
        Ok(w.expect(&f) + w.grid.integrate(&g))
    }

    /// `(1/2) d/dL <kbar>` with the grid held fixed.
    pub fn c2_total_derivative(&self) -> Result<f64> {
        let h = self.step();
        let p = kbar_mean(&self.weights.with_length(self.params.l + h)?, &self.kernel)?;
        let m = kbar_mean(&self.weights.with_length(self.params.l - h)?, &self.kernel)?;
        Ok(0.5 * (p - m) / (2.0 * h))
    }

    /// `d/dL (3/2 <kbar kbar> - 3/2 <kbar>^2 - 1/6 <delta delta>)`.
    pub fn c3(&self) -> Result<f64> {
        let h = self.step();
        let p = c3_bracket(&self.weights.with_length(self.params.l + h)?, &self.kernel)?;
        let m = c3_bracket(&self.weights.with_length(self.params.l - h)?, &self.kernel)?;
        Ok((p - m) / (2.0 * h))
    }

    /// `c2` from the kernel `K` with the second contour at `Re w = 1/4`.
    /// Returns the real part and the imaginary residue.
    pub fn c2_kernel_k(&self) -> Result<(f64, f64)> {
        let (grid_b, nu_b) = self.shifted_measure()?;
        let w = &self.weights;
        let m = w.w2_mean;
        let two_pi = 2.0 * PI;
        let rows = w
            .grid
            .nodes
            .par_iter()
            .zip(&w.grid.weights)
            .zip(&w.nu)
            .map(|((&y1, &q1), &n1)| -> Result<Complex64> {
                let w1 = Complex64::new(0.0, y1);
                let mut inner = Complex64::new(0.0, 0.0);
                for ((&y2, &q2), &n2) in grid_b.nodes.iter().zip(&grid_b.weights).zip(&nu_b) {
                    let w2 = Complex64::new(K_ROUTE_SHIFT, y2);
                    inner += kernel_big_k(w1, w2)? * n2 * (q2 / two_pi);
                }
                Ok(inner * (n1 * (-y1 * y1 - m) * q1 / two_pi))
            })
            .collect::<Result<Vec<_>>>()?;
        let total: Complex64 = rows.into_iter().sum::<Complex64>() * 2.0;
        Ok((total.re, total.im))
    }

    /// `max_i |Delta(iy_i) + Delta(-iy_i)|` where
    /// `Delta(w) = int_{1/4 + iR} nu(dw') 2/(w + w') - nu(w)`.
    pub fn delta_oddness(&self) -> Result<f64> {
        let (grid_b, nu_b) = self.shifted_measure()?;
        let w = &self.weights;
        let delta = |y: f64, nu: f64| -> Complex64 {
            let w1 = Complex64::new(0.0, y);
            let mut acc = Complex64::new(0.0, 0.0);
            for ((&y2, &q2), &n2) in grid_b.nodes.iter().zip(&grid_b.weights).zip(&nu_b) {
                let w2 = Complex64::new(K_ROUTE_SHIFT, y2);
                acc += n2 * 2.0 / (w1 + w2) * (q2 / (2.0 * PI));
            }
            acc - nu
        };
        let n = w.len();
        Ok((0..n / 2)
            .into_par_iter()
            .map(|i| {
                let j = n - 1 - i;
                (delta(w.grid.nodes[i], w.nu[i]) + delta(w.grid.nodes[j], w.nu[j])).norm()
            })
            .reduce(|| 0.0, f64::max))
    }

    fn shifted_measure(&self) -> Result<(ContourGrid, Vec<Complex64>)> {
        let p = &self.params;
        if p.u.min(p.v) <= K_ROUTE_SHIFT {
            return Err(Error::Domain(format!(
                "kernel-K route needs min(u, v) > {K_ROUTE_SHIFT}, got ({}, {})",
                p.u, p.v
            )));
        }
        let grid_b = ContourGrid::new(p, self.weights.len(), K_ROUTE_SHIFT)?;
        let z1 = self.weights.z1;
        let nu_b = grid_b
            .nodes
            .par_iter()
            .map(|&y| psi_weight(p, Complex64::new(K_ROUTE_SHIFT, y)).map(|v| v / z1))
            .collect::<Result<Vec<_>>>()?;
        Ok((grid_b, nu_b))
    }
}

/// `<kbar(w1, w2)>` under `nu x nu`.
pub fn kbar_mean(w: &ModelWeights, kernel: &KernelMatrix) -> Result<f64> {
    let knu = kernel.apply(&w.nu)?;
    let sq: Vec<f64> = w.nu.iter().map(|n| n * n).collect();
    Ok(w.expect(&knu) + w.grid.integrate(&sq))
}

/// `<kbar(w1, w2) kbar(w1, w3)>` under `nu^3`.
pub fn kbar_pair_mean(w: &ModelWeights, kernel: &KernelMatrix) -> Result<f64> {
    let g = kernel.apply_bar(&w.nu)?;
    let g2: Vec<f64> = g.iter().map(|x| x * x).collect();
    Ok(w.expect(&g2))
}

/// `<delta delta> = int dw/(2 i pi) nu(w)^3`.
pub fn delta_delta(w: &ModelWeights) -> f64 {
    let cube: Vec<f64> = w.nu.iter().map(|n| n * n * n).collect();
    w.grid.integrate(&cube)
}

fn c3_bracket(w: &ModelWeights, kernel: &KernelMatrix) -> Result<f64> {
    let pair = kbar_pair_mean(w, kernel)?;
    let mean = kbar_mean(w, kernel)?;
    Ok(1.5 * pair - 1.5 * mean * mean - delta_delta(w) / 6.0)
}

pub fn c1_closed(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    Ok(Problem::new(params, n_nodes)?.c1())
}

pub fn c2_closed(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    Problem::new(params, n_nodes)?.c2()
}

pub fn c3_closed(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    Problem::new(params, n_nodes)?.c3()
}

pub fn c2_kernel_k(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    let (re, im) = Problem::new(params, n_nodes)?.c2_kernel_k()?;
    if im.abs() > 1e-9 {
        return Err(Error::Quadrature(im.abs()));
    }
    Ok(re)
}

/// One pole contribution to the continued normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidueTerm {
    /// `u + i` (or `v + i`), the mirrored pole position.
    pub location: f64,
    pub index: usize,
    pub value: f64,
    /// `d/dL` of `value`.
    pub dl_value: f64,
}

fn check_not_negative_integer(x: f64, name: &str, exempt: bool) -> Result<()> {
    let r = x.round();
    if !exempt && r <= -1.0 && (x - r).abs() < 1e-6 {
        return Err(Error::Domain(format!("{name} = {x} is too close to a negative integer")));
    }
    Ok(())
}

/// `T_i(a, b) = 2 (-1)^i/i! Gamma(b - a - i) (a + b)_i e^{L (a+i)^2}
///   / (Gamma(-2(a+i)) prod_{j=i}^{2i-1} (2a + j))`.
fn residue_term(a: f64, b: f64, l: f64, i: usize) -> Result<ResidueTerm> {
    let loc = a + i as f64;
    let poch: f64 = (0..i).map(|j| a + b + j as f64).product();
    let value = if poch == 0.0 {
        0.0
    } else {
        let mut fact = 1.0;
        let mut prod = 1.0;
        for j in 0..i {
            fact *= (j + 1) as f64;
            prod *= 2.0 * a + (i + j) as f64;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let g = gamma(b - a - i as f64).map_err(|_| Error::Domain(format!("double pole at u = {a}, v = {b}")))?;
        2.0 * sign / fact * g * poch * rgamma(-2.0 * loc) / prod * (l * loc * loc).exp()
    };
    Ok(ResidueTerm { location: loc, index: i, value, dl_value: loc * loc * value })
}

/// Residue corrections from the poles of `Psi` that crossed the contour.
pub fn residue_terms(params: &BoundaryParams) -> Result<Vec<ResidueTerm>> {
    let (u, v, l) = (params.u, params.v, params.l);
    let mut out = Vec::new();
    for (a, b) in [(u, v), (v, u)] {
        if a < 0.0 {
            let top = (-a).floor() as usize;
            for i in 0..=top {
                out.push(residue_term(a, b, l, i)?);
            }
        }
    }
    Ok(out)
}

/// Continued `Ztilde` and its `L`-derivative.
pub fn ztilde_continued_with_derivative(params: &BoundaryParams, n_nodes: usize) -> Result<(f64, f64)> {
    let (u, v) = (params.u, params.v);
    let on_line = (u + v).abs() < 1e-12;
    check_not_negative_integer(u, "u", on_line)?;
    check_not_negative_integer(v, "v", on_line)?;
    if u == 0.0 && v == 0.0 {
        return Err(Error::Singular("Ztilde is not defined at u = v = 0".into()));
    }
    let rg = if on_line { 0.0 } else { rgamma(u + v) };
    let (mut z, mut dz) = (0.0, 0.0);
    if rg != 0.0 {
        let grid = ContourGrid::new(params, n_nodes, 0.0)?;
        let psi = grid.nodes.par_iter().map(|&y| psi_line(params, y)).collect::<Result<Vec<_>>>()?;
        let w2psi: Vec<f64> = grid.nodes.iter().zip(&psi).map(|(y, p)| -y * y * p).collect();
        z += rg * grid.integrate(&psi);
        dz += rg * grid.integrate(&w2psi);
    }
    for t in residue_terms(params)? {
        z += t.value;
        dz += t.dl_value;
    }
    if !(z.abs() > 0.0) || !z.is_finite() {
        return Err(Error::Singular(format!("continued Ztilde = {z}")));
    }
    Ok((z, dz))
}

pub fn ztilde_continued(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    Ok(ztilde_continued_with_derivative(params, n_nodes)?.0)
}

/// `-1/24 + (1/2) d/dL log Ztilde` through the continuation.
pub fn c1_continued(params: &BoundaryParams, n_nodes: usize) -> Result<f64> {
    let (z, dz) = ztilde_continued_with_derivative(params, n_nodes)?;
    Ok(-1.0 / 24.0 + 0.5 * dz / z)
}

/// `c2(u, -u, L) = |u| - e^{-L u^2}/2 int dw/(2 i pi) Psi_{u,-u}(w) (w^2 - u^2)`.
pub fn c2_line_uv0(u: f64, l: f64, n_nodes: usize) -> Result<f64> {
    let params = BoundaryParams::new(u, -u, l)?;
    let grid = ContourGrid::new(&params, n_nodes, 0.0)?;
    if u == 0.0 {
        // Psi_{0,0}(iy) (-y^2) = -4 pi y coth(pi y) e^{-L y^2}
        let s: f64 = grid.integrate_fn(|y| -4.0 * PI * x_coth_pi_x(y) * (-l * y * y).exp());
        return Ok(-0.5 * s);
    }
    let vals = grid
        .nodes
        .par_iter()
        .map(|&y| psi_line(&params, y).map(|p| p * (-y * y - u * u)))
        .collect::<Result<Vec<_>>>()?;
    Ok(u.abs() - 0.5 * (-l * u * u).exp() * grid.integrate(&vals))
}

fn x_coth_pi_x(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 / PI
    } else {
        x / (PI * x).tanh()
    }
}

/// `c2(0, 0, L) = int_R x coth(pi x) e^{-L x^2} dx`.
pub fn c2_origin(l: f64, n_nodes: usize) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::Domain(format!("L must be positive, got {l}")));
    }
    let grid = ContourGrid::with_envelope(l, 2.0, 1.0, n_nodes, 0.0)?;
    Ok(grid.integrate_fn(|x| 2.0 * PI * x_coth_pi_x(x) * (-l * x * x).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_kronrod;
    use crate::series::series_cumulants;

    fn prob(u: f64, v: f64, l: f64, n: usize) -> Problem {
        Problem::new(&BoundaryParams::new(u, v, l).unwrap(), n).unwrap()
    }

    #[test]
    fn c1_routes() {
        let p = prob(0.7, 1.3, 0.8, 400);
        assert!((p.c1() - p.c1_from_log_z().unwrap()).abs() < 1e-7);
        let a = prob(1.0, 1.0, 1.0, 400).c1();
        let b = prob(1.0, 1.0, 1.0, 200).c1();
        assert!((a - b).abs() < 1e-9);
        assert!((a + 1.03218873135).abs() < 1e-9);
    }

    #[test]
    fn c1_gaussian_line() {
        for l in [0.5, 1.0, 3.0] {
            let c = prob(0.0, 0.5, l, 400).c1();
            assert!((c - (-1.0 / 24.0 - 0.25 / l)).abs() < 1e-9, "L = {l}: {c}");
        }
    }

    #[test]
    fn c2_routes_and_values() {
        for (u, v, l, want) in
            [(1.0, 1.0, 1.0, 1.13159869955), (0.7, 1.3, 1.0, 1.14152862369), (0.5, 2.0, 0.5, 2.18904955003)]
        {
            let p = prob(u, v, l, 400);
            let a = p.c2().unwrap();
            let b = p.c2_total_derivative().unwrap();
            assert!((a - want).abs() < 1e-9, "({u},{v},{l}): {a}");
            assert!((a - b).abs() < 1e-7, "({u},{v},{l}): {a} vs {b}");
        }
    }

    #[test]
    fn constant_kernel_does_not_contribute() {
        let p = prob(1.0, 1.0, 1.0, 200);
        let w = &p.weights;
        let f: Vec<f64> = w.grid.nodes.iter().map(|y| -y * y - w.w2_mean).collect();
        assert!(w.expect(&f).abs() < 1e-13);
    }

    #[test]
    fn kernel_k_route() {
        for (u, v) in [(0.7, 1.3), (1.0, 1.0)] {
            let p = prob(u, v, 1.0, 400);
            let (re, im) = p.c2_kernel_k().unwrap();
            assert!((re - p.c2().unwrap()).abs() < 1e-7, "{re}");
            assert!(im.abs() < 1e-9, "{im}");
            assert!(p.delta_oddness().unwrap() < 1e-9);
        }
        let p = BoundaryParams::new(0.2, 1.0, 1.0).unwrap();
        assert!(matches!(c2_kernel_k(&p, 200), Err(Error::Domain(_))));
    }

    #[test]
    fn c3_matches_series() {
        for (u, v, l) in [(1.0, 1.0, 1.0), (0.5, 2.0, 0.5)] {
            let params = BoundaryParams::new(u, v, l).unwrap();
            let c3 = c3_closed(&params, 400).unwrap();
            let s = series_cumulants(&params, 400, 3).unwrap();
            assert!((c3 - s.c[2]).abs() < 1e-6, "{c3} vs {}", s.c[2]);
        }
        let a = c3_closed(&BoundaryParams::new(0.4, 1.5, 1.0).unwrap(), 300).unwrap();
        let b = c3_closed(&BoundaryParams::new(1.5, 0.4, 1.0).unwrap(), 300).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn equilibrium_line() {
        for (u, l) in [(0.6, 1.0), (-0.5, 0.5), (1.0, 2.0), (-1.7, 1.0)] {
            let p = BoundaryParams::new(u, -u, l).unwrap();
            let (z, _) = ztilde_continued_with_derivative(&p, 300).unwrap();
            assert!((z - 2.0 * (l * u * u).exp()).abs() < 1e-10 * z, "u = {u}");
            let c = c1_continued(&p, 300).unwrap();
            assert!((c - (-1.0 / 24.0 + 0.5 * u * u)).abs() < 1e-10, "u = {u}");
        }
        let p = BoundaryParams::new(0.6, -0.6, 1.0).unwrap();
        assert!((c1_continued(&p, 300).unwrap() - 0.138333333333333).abs() < 1e-9);
    }

    #[test]
    fn continuation_across_zero() {
        let c = |u: f64| c1_continued(&BoundaryParams::new(u, 0.8, 1.0).unwrap(), 400).unwrap();
        let (a, b) = (c(1e-8), c(-1e-8));
        assert!((a - b).abs() < 1e-7, "{a} {b}");
        // smooth through u = 0, not just continuous
        let fine = (c(1e-6) - c(-1e-6)) / 2e-6;
        let coarse = (c(1e-3) - c(-1e-3)) / 2e-3;
        assert!((fine - coarse).abs() < 1e-2, "{fine} {coarse}");
        let direct = c1_closed(&BoundaryParams::new(0.3, 0.8, 1.0).unwrap(), 400).unwrap();
        let cont = c1_continued(&BoundaryParams::new(0.3, 0.8, 1.0).unwrap(), 400).unwrap();
        assert!((direct - cont).abs() < 1e-10);
        // one crossed pole
        let p = BoundaryParams::new(-0.4, 0.9, 1.0).unwrap();
        let t = residue_terms(&p).unwrap();
        assert_eq!(t.len(), 1);
        let want = 2.0 * (0.16f64).exp() * gamma(1.3).unwrap() * rgamma(0.8);
        assert!((t[0].value - want).abs() < 1e-12 * want);
    }

    #[test]
    fn binding_energy_at_large_length() {
        let p = BoundaryParams::new(-0.8, 1.5, 20.0).unwrap();
        let c = c1_continued(&p, 400).unwrap();
        assert!((c - (-1.0 / 24.0 + 0.32)).abs() < 1e-3, "{c}");
    }

    #[test]
    fn negative_integer_rejected() {
        let p = BoundaryParams::new(-1.0, 0.5, 1.0).unwrap();
        assert!(matches!(c1_continued(&p, 200), Err(Error::Domain(_))));
        let p = BoundaryParams::new(-2.0000001, 0.5, 1.0).unwrap();
        assert!(matches!(c1_continued(&p, 200), Err(Error::Domain(_))));
    }

    #[test]
    fn origin_against_adaptive() {
        let f = |x: f64| 2.0 * x_coth_pi_x(x) * (-x * x).exp();
        let want = gauss_kronrod(f, 0.0, 12.0, 1e-14).unwrap();
        let got = c2_origin(1.0, 400).unwrap();
        assert!((got - want).abs() < 1e-10);
        assert!((got - 1.15299380521989158).abs() < 1e-12);
        assert!((c2_line_uv0(0.0, 1.0, 400).unwrap() - got).abs() < 1e-8);
    }

    #[test]
    fn line_uv0_approaches_origin() {
        let c0 = c2_origin(1.0, 400).unwrap();
        let mut prev = f64::INFINITY;
        for u in [1e-1, 1e-2, 1e-3, 1e-4] {
            let d = (c2_line_uv0(u, 1.0, 400).unwrap() - c0).abs();
            assert!(d < prev, "u = {u}: {d}");
            prev = d;
        }
        assert!(prev < 1e-3);
    }
}
