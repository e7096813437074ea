//! The weight `Psi(w)`, the probability measure `nu` it induces on the
//! contour, and the digamma kernels `k`, `kbar = k + delta` and `K`.

use crate::quadrature::ContourGrid;
use crate::specfun::{digamma, gamma_abs2_line, ln_gamma, rgamma, EULER_GAMMA};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Boundary parameters `(u, v)` and interval length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryParams {
    pub u: f64,
    pub v: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl BoundaryParams {
    pub fn new(u: f64, v: f64, l: f64) -> Result<Self> {
        if !u.is_finite() || !v.is_finite() || !l.is_finite() {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        if !(l > 0.0) {
            return Err(Error::Domain(format!("L must be positive, got {l}")));
        }
        Ok(BoundaryParams { u, v, l })
    }

    pub fn with_length(&self, l: f64) -> Self {
        BoundaryParams { l, ..*self }
    }
}

fn is_gamma_pole(z: Complex64) -> bool {
    z.im.abs() < 1e-14 && z.re <= 1e-14 && (z.re - z.re.round()).abs() < 1e-14
}

/// log(sin z), stable for large |Im z| (the branch is irrelevant after exp).
fn ln_sin(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im > 1.0 {
        // sin z = (i/2) e^{-iz} (1 - e^{2iz})
        -i * z + (0.5 * i).ln() + (1.0 - (2.0 * i * z).exp()).ln()
    } else if z.im < -1.0 {
        // sin z = (-i/2) e^{iz} (1 - e^{-2iz})
        i * z + (-0.5 * i).ln() + (1.0 - (-2.0 * i * z).exp()).ln()
    } else {
        z.sin().ln()
    }
}

/// `Psi(w) = Gamma(u±w) Gamma(v±w) e^{L w^2} / (Gamma(2w) Gamma(-2w))`.
pub fn psi_weight(p: &BoundaryParams, w: Complex64) -> Result<Complex64> {
    let (u, v) = (p.u, p.v);
    for z in [u + w, u - w, v + w, v - w] {
        if is_gamma_pole(z) && !(w.norm() == 0.0 && (u == 0.0 || v == 0.0)) {
            return Err(Error::Pole(format!("Psi at w = {w}")));
        }
    }
    let gauss = p.l * w * w;
    if u == 0.0 && v == 0.0 {
        return Err(Error::Singular("Psi is singular at u = v = 0".into()));
    }
    if u == 0.0 || v == 0.0 {
        // duplication formula: Psi = 4 cos(pi w) Gamma(a+w) Gamma(a-w) e^{L w^2}
        let a = if u == 0.0 { v } else { u };
        let lg = ln_gamma(a + w)? + ln_gamma(a - w)? + gauss;
        return Ok(4.0 * (PI * w).cos() * lg.exp());
    }
    if w.norm() == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // 1/(Gamma(2w) Gamma(-2w)) = -2w sin(2 pi w) / pi
    let lg = ln_gamma(u + w)? + ln_gamma(u - w)? + ln_gamma(v + w)? + ln_gamma(v - w)?;
    let lr = (-2.0 * w / PI).ln() + ln_sin(2.0 * PI * w);
    Ok((lg + gauss + lr).exp())
}

/// `Psi(iy)`, real and non-negative for real `u, v`.
pub fn psi_line(p: &BoundaryParams, y: f64) -> Result<f64> {
    let (u, v) = (p.u, p.v);
    let ay = y.abs();
    if u == 0.0 && v == 0.0 {
        return Err(Error::Singular("Psi is singular at u = v = 0".into()));
    }
    if u == 0.0 || v == 0.0 {
        let a = if u == 0.0 { v } else { u };
        let ln_cosh = PI * ay + (0.5 * (1.0 + (-2.0 * PI * ay).exp())).ln();
        return Ok(4.0 * gamma_abs2_line(a, ay)? * (ln_cosh - p.l * y * y).exp());
    }
    if ay == 0.0 {
        return Ok(0.0);
    }
    // 2y sinh(2 pi y)/pi, in logs
    let ln_sinh = 2.0 * PI * ay + (-(-4.0 * PI * ay).exp_m1() * 0.5).ln();
    let ln_front = (2.0 * ay / PI).ln() + ln_sinh;
    let lg = 2.0 * ln_gamma(Complex64::new(u, ay))?.re + 2.0 * ln_gamma(Complex64::new(v, ay))?.re;
    Ok((lg + ln_front - p.l * y * y).exp())
}

/// Psi on a grid together with the derived normalizations and measure.
#[derive(Debug, Clone)]
pub struct ModelWeights {
    pub grid: ContourGrid,
    /// Interval length the values were computed at.
    pub l: f64,
    /// `Psi` scales as `exp(-kappa L y^2)` on the contour.
    pub kappa: f64,
    pub psi: Vec<f64>,
    /// `int dw/(2 i pi) Psi`.
    pub z1: f64,
    /// `Z1 / 2`, the normalization of the stationary measure.
    pub zcal: f64,
    /// `Z1 / Gamma(u + v)` when `u + v > 0`.
    pub ztilde: Option<f64>,
    /// Density of `nu` with respect to `dw/(2 i pi)`.
    pub nu: Vec<f64>,
    /// `<w^2>` under `nu`.
    pub w2_mean: f64,
    pub params: Option<BoundaryParams>,
}

impl ModelWeights {
    /// Weights on the unshifted contour; needs `u, v >= 0`, not both zero.
    pub fn build(params: &BoundaryParams, grid: &ContourGrid) -> Result<Self> {
        if params.u < 0.0 || params.v < 0.0 {
            return Err(Error::Domain(format!(
                "direct contour route needs u, v >= 0 (u = {}, v = {})",
                params.u, params.v
            )));
        }
        if grid.shift != 0.0 {
            return Err(Error::Domain("weights live on the unshifted contour".into()));
        }
        let psi = grid.nodes.par_iter().map(|&y| psi_line(params, y)).collect::<Result<Vec<_>>>()?;
        let mut w = Self::from_values(grid, psi, params.l, 1.0)?;
        if params.u + params.v > 0.0 {
            w.ztilde = Some(w.z1 * rgamma(params.u + params.v));
        }
        w.params = Some(*params);
        Ok(w)
    }

    /// Weights from precomputed `Psi` values scaling like `exp(-kappa L y^2)`.
    pub fn from_values(grid: &ContourGrid, psi: Vec<f64>, l: f64, kappa: f64) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::GridMismatch { expected: grid.len(), got: psi.len() });
        }
        if psi.iter().any(|p| !p.is_finite()) {
            return Err(Error::Singular("non-finite weight on the contour".into()));
        }
        let z1: f64 = grid.integrate(&psi);
        if !(z1 > 0.0) {
            return Err(Error::Singular(format!("normalization Z1 = {z1} is not positive")));
        }
        let nu: Vec<f64> = psi.iter().map(|p| p / z1).collect();
        let w2: Vec<f64> = grid.nodes.iter().zip(&nu).map(|(y, n)| -y * y * n).collect();
        let w2_mean = grid.integrate(&w2);
        Ok(ModelWeights {
            grid: grid.clone(),
            l,
            kappa,
            psi,
            z1,
            zcal: 0.5 * z1,
            ztilde: None,
            nu,
            w2_mean,
            params: None,
        })
    }

    /// Same grid, interval length changed to `l` (exact rescaling by the Gaussian factor).
    pub fn with_length(&self, l: f64) -> Result<Self> {
        let dl = l - self.l;
        let psi = self.grid.nodes.iter().zip(&self.psi).map(|(y, p)| p * (-self.kappa * dl * y * y).exp()).collect();
        let mut w = Self::from_values(&self.grid, psi, l, self.kappa)?;
        if let Some(p) = self.params {
            let p = p.with_length(l);
            if p.u + p.v > 0.0 {
                w.ztilde = Some(w.z1 * rgamma(p.u + p.v));
            }
            w.params = Some(p);
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// `int nu(dw) f(w)` for `f` sampled on the nodes.
    pub fn expect(&self, f: &[f64]) -> f64 {
        let g: Vec<f64> = self.nu.iter().zip(f).map(|(n, f)| n * f).collect();
        self.grid.integrate(&g)
    }
}

/// `k(w1, w2) = -2 (psi(1 + w1 - w2) + psi(1 + w2 - w1))`.
pub fn kernel_kk(w1: Complex64, w2: Complex64) -> Result<Complex64> {
    let d = w1 - w2;
    Ok(-2.0 * (digamma(1.0 + d)? + digamma(1.0 - d)?))
}

/// `k(iy1, iy2) = -4 Re psi(1 + i(y1 - y2))`, with the diagonal `4 gamma_E`.
pub fn kernel_kk_line(y1: f64, y2: f64) -> f64 {
    kernel_kk_line_with(y1, y2, EULER_GAMMA)
}

fn kernel_kk_line_with(y1: f64, y2: f64, euler: f64) -> f64 {
    let d = (y1 - y2).abs();
    if d == 0.0 {
        4.0 * euler
    } else {
        -4.0 * digamma(Complex64::new(1.0, d)).expect("no pole off the real axis").re
    }
}

/// `K(w1, w2) = 1/(w1 + w2) - psi(1 + w1 - w2) - psi(1 + w2 - w1)`.
pub fn kernel_big_k(w1: Complex64, w2: Complex64) -> Result<Complex64> {
    let s = w1 + w2;
    if s.norm() < 1e-14 {
        return Err(Error::Singular(format!("K at w1 + w2 = 0 (w1 = {w1})")));
    }
    Ok(s.inv() + 0.5 * kernel_kk(w1, w2)?)
}

/// Discretized `k` on the nodes of a contour grid.
///
/// The delta part of `kbar` is never discretized: `apply_bar` adds `f` back
/// analytically, since `int dw'/(2 i pi) delta(w - w') f(w') = f(w)`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<f64>,
    qw: Vec<f64>,
}

impl KernelMatrix {
    pub fn build(grid: &ContourGrid) -> Self {
        Self::with_euler(grid, EULER_GAMMA)
    }

    /// Build with a caller-supplied value for the diagonal constant.
    pub fn with_euler(grid: &ContourGrid, euler: f64) -> Self {
        let n = grid.len();
        let y = &grid.nodes;
        let entries: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| kernel_kk_line_with(y[i], y[j], euler)))
            .collect();
        let qw = grid.weights.iter().map(|w| w / (2.0 * PI)).collect();
        KernelMatrix { n, entries, qw }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `(k f)(w_i) = sum_j k(w_i, w_j) f(w_j) dw_j/(2 i pi)`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n {
            return Err(Error::GridMismatch { expected: self.n, got: f.len() });
        }
        let g: Vec<f64> = f.iter().zip(&self.qw).map(|(f, w)| f * w).collect();
        Ok(self.entries.par_chunks(self.n).map(|row| row.iter().zip(&g).map(|(k, g)| k * g).sum()).collect())
    }

    /// `kbar f = k f + f`.
    pub fn apply_bar(&self, f: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply(f)?;
        for (o, fi) in out.iter_mut().zip(f) {
            *o += fi;
        }
        Ok(out)
    }
}
