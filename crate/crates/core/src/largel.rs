//! The scaled `L -> infinity` theory with `u = ut / sqrt(L)`, `v = vt / sqrt(L)`.

use crate::cumulants::Problem;
use crate::fixedpoint::{CurvePoint, ParametricCurve, RateFunction, RateSample};
use crate::model::BoundaryParams;
use crate::quadrature::{gauss_kronrod, integrate_with_breaks};
use crate::series::{invert_to_cumulants, CoeffSeries};
use crate::specfun::{erfc, erfcx, gamma, polylog, tricomi_u};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

const REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledParams {
    pub ut: f64,
    pub vt: f64,
}

impl ScaledParams {
    pub fn new(ut: f64, vt: f64) -> Result<Self> {
        if !(ut >= 0.0 && vt >= 0.0) || !ut.is_finite() || !vt.is_finite() {
            return Err(Error::Domain(format!("scaled parameters must be >= 0, got ({ut}, {vt})")));
        }
        Ok(ScaledParams { ut, vt })
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        for x in [self.ut, self.vt, 0.3 * self.ut, 0.3 * self.vt, 3.0 * self.ut, 3.0 * self.vt, 1.0, 3.0] {
            if x > 0.0 && x < 6.0 {
                b.push(x);
            }
        }
        b.push(6.0);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `int_R dy/(2 pi) f(y)` for even `f`.
    fn integrate_even<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        Ok(integrate_with_breaks(f, &self.breaks(), 1.0, REL_TOL)? / PI)
    }
}

/// `phi(y) = 4 y^2 e^{-y^2} / ((ut^2 + y^2)(vt^2 + y^2))`.
pub fn phi(sp: &ScaledParams, y: f64) -> f64 {
    let y2 = y * y;
    if y2 == 0.0 {
        return match (sp.ut == 0.0, sp.vt == 0.0) {
            (true, true) => f64::INFINITY,
            (true, false) => 4.0 / (sp.vt * sp.vt),
            (false, true) => 4.0 / (sp.ut * sp.ut),
            (false, false) => 0.0,
        };
    }
    4.0 * y2 * (-y2).exp() / ((sp.ut * sp.ut + y2) * (sp.vt * sp.vt + y2))
}

/// `(phi_k, psi_k) = int dy/(2 pi) (1, y^2) phi(y)^k`.
pub fn phi_moment(sp: &ScaledParams, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Domain("moment order must be >= 1".into()));
    }
    if sp.ut == 0.0 && sp.vt == 0.0 {
        return Err(Error::Singular("moments diverge at ut = vt = 0".into()));
    }
    let k = k as i32;
    let a = sp.integrate_even(|y| phi(sp, y).powi(k))?;
    let b = sp.integrate_even(|y| y * y * phi(sp, y).powi(k))?;
    Ok((a, b))
}

/// `I_{k,p,m}(a) = int dy/(2 pi) y^{2p} e^{-k y^2} / (a + y^2)^m`.
pub fn i_kpm(k: f64, p: f64, m: f64, a: f64) -> Result<f64> {
    Ok(gamma(p + 0.5)? / (2.0 * PI) * a.powf(p + 0.5 - m) * tricomi_u(p + 0.5, p + 1.5 - m, k * a)?)
}

/// Moments from the Tricomi forms; valid on `ut = vt` and on `vt = 0` (or `ut = 0`).
pub fn phi_moment_closed(sp: &ScaledParams, k: usize) -> Result<(f64, f64)> {
    let kf = k as f64;
    let c = 4f64.powi(k as i32);
    if sp.ut == sp.vt && sp.ut > 0.0 {
        let a = sp.ut * sp.ut;
        Ok((c * i_kpm(kf, kf, 2.0 * kf, a)?, c * i_kpm(kf, kf + 1.0, 2.0 * kf, a)?))
    } else if sp.ut.min(sp.vt) == 0.0 && sp.ut.max(sp.vt) > 0.0 {
        let a = sp.ut.max(sp.vt).powi(2);
        Ok((c * i_kpm(kf, 0.0, kf, a)?, c * i_kpm(kf, 1.0, kf, a)?))
    } else {
        Err(Error::Domain("closed forms need ut = vt or a vanishing parameter".into()))
    }
}

/// `f(a) = e^a erfc(sqrt a) / (2 sqrt a)`.
fn f_gen(a: f64) -> f64 {
    erfcx(a.sqrt()) / (2.0 * a.sqrt())
}

fn f_gen_prime(x: f64) -> f64 {
    let z = x.sqrt();
    let e = erfcx(z);
    let de = 2.0 * z * e - 2.0 / PI.sqrt();
    (de * z - e) / (2.0 * z * z) / (2.0 * z)
}

/// First moments from the general `(a, b)` error-function form, with the
/// `t`-derivatives taken by Richardson-extrapolated central differences.
pub fn phi_moment_general_k1(sp: &ScaledParams) -> Result<(f64, f64)> {
    let (a, b) = (sp.ut * sp.ut, sp.vt * sp.vt);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain("general form needs ut, vt > 0".into()));
    }
    let g = |t: f64| {
        if (a - b).abs() < 1e-10 * a.max(b) {
            // limit b -> a: -t f'(a t)
            -t.sqrt() * t * f_gen_prime(a * t)
        } else {
            t.sqrt() * (f_gen(a * t) - f_gen(b * t)) / (b - a)
        }
    };
    let d1 = |h: f64| (g(1.0 + h) - g(1.0 - h)) / (2.0 * h);
    let d2 = |h: f64| (g(1.0 + h) - 2.0 * g(1.0) + g(1.0 - h)) / (h * h);
    let rich = |d: &dyn Fn(f64) -> f64, h: f64| (4.0 * d(h / 2.0) - d(h)) / 3.0;
    let phi1 = -4.0 * rich(&d1, 1e-2);
    let psi1 = 4.0 * rich(&d2, 1e-2);
    Ok((phi1, psi1))
}

/// `ct_1 = -E_{3/2}(ut^2) / (4 E_{1/2}(ut^2))` on the `vt = 0` line.
pub fn c1_tilde_v_zero(ut: f64) -> Result<f64> {
    use crate::specfun::exp_integral_e;
    let x = ut * ut;
    Ok(-exp_integral_e(1.5, x)? / (4.0 * exp_integral_e(0.5, x)?))
}

/// `phi_1` and `psi_1` on `ut = vt` from the error-function display.
pub fn phi1_equal_closed(ut: f64) -> (f64, f64) {
    let a = ut * ut;
    let e = a.exp() * erfc(ut);
    let sp = PI.sqrt();
    ((2.0 * a + 1.0) * e / ut - 2.0 / sp, 2.0 * (a + 1.0) / sp - ut * (2.0 * a + 3.0) * e)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaledSeries {
    pub k: usize,
    pub phi_k: Vec<f64>,
    pub psi_k: Vec<f64>,
    pub c_t: Vec<f64>,
}

/// Scaled cumulants from `s_k = phi_k/(2k)`, `eps_k = -psi_k/(4k)` by the generic inversion.
pub fn scaled_cumulants(sp: &ScaledParams, kmax: usize) -> Result<ScaledSeries> {
    if kmax == 0 || kmax > 8 {
        return Err(Error::Domain(format!("order must be in 1..=8, got {kmax}")));
    }
    let moments = (1..=kmax).into_par_iter().map(|k| phi_moment(sp, k)).collect::<Result<Vec<_>>>()?;
    let phi_k: Vec<f64> = moments.iter().map(|m| m.0).collect();
    let psi_k: Vec<f64> = moments.iter().map(|m| m.1).collect();
    let coeffs = CoeffSeries {
        s: phi_k.iter().enumerate().map(|(i, p)| p / (2.0 * (i + 1) as f64)).collect(),
        eps: psi_k.iter().enumerate().map(|(i, p)| -p / (4.0 * (i + 1) as f64)).collect(),
        include_shift: false,
    };
    let c_t = invert_to_cumulants(&coeffs)?;
    Ok(ScaledSeries { k: kmax, phi_k, psi_k, c_t })
}

impl ScaledSeries {
    /// `ct_1, ct_2, ct_3` from the explicit moment combinations.
    pub fn closed_forms(&self) -> Vec<f64> {
        let p = &self.phi_k;
        let q = &self.psi_k;
        let mut out = vec![-q[0] / (2.0 * p[0])];
        if p.len() >= 2 {
            out.push((q[0] * p[1] - q[1] * p[0]) / p[0].powi(3));
        }
        if p.len() >= 3 {
            let (p1, p2, p3) = (p[0], p[1], p[2]);
            let (q1, q2, q3) = (q[0], q[1], q[2]);
            out.push(
                2.0 / p1.powi(5) * (-2.0 * q3 * p1 * p1 - 3.0 * q1 * p2 * p2 + 3.0 * q2 * p2 * p1 + 2.0 * q1 * p3 * p1),
            );
        }
        out
    }
}

pub fn c2_tilde(sp: &ScaledParams) -> Result<f64> {
    let s = scaled_cumulants(sp, 2)?;
    Ok(s.c_t[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimumMode {
    Equal,
    VZero,
}

/// Golden-section minimum of `ct_2` over `ut in [0.01, 10]` with `vt = ut` or `vt = 0`.
pub fn find_c2_minimum(mode: MinimumMode) -> Result<(f64, f64)> {
    let eval = |u: f64| -> Result<f64> {
        let sp = match mode {
            MinimumMode::Equal => ScaledParams::new(u, u)?,
            MinimumMode::VZero => ScaledParams::new(u, 0.0)?,
        };
        c2_tilde(&sp)
    };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.01, 10.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > 1e-5 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = eval(x2)?;
        }
    }
    let u = 0.5 * (a + b);
    Ok((u, eval(u)?))
}

/// `1 / max_y phi(y)`, the end of the scaled `zeta` window.
pub fn zeta_threshold(sp: &ScaledParams) -> Result<f64> {
    let n = 4000;
    let top = 8.0;
    let (mut best, mut arg) = (0.0, 0.0);
    for i in 0..=n {
        let y = top * i as f64 / n as f64;
        let v = phi(sp, y);
        if v > best {
            best = v;
            arg = y;
        }
    }
    let h = top / n as f64;
    let (mut a, mut b) = ((arg - h).max(0.0), arg + h);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-12 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if phi(sp, x1) > phi(sp, x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let m = phi(sp, 0.5 * (a + b)).max(best);
    if !(m > 0.0) {
        return Err(Error::Singular("phi vanishes identically".into()));
    }
    Ok(1.0 / m)
}

/// `(s, E, ds/dzeta, dE/dzeta)` of the scaled curve at `zt`.
pub fn scaled_point(sp: &ScaledParams, zt: f64) -> Result<(f64, f64, f64, f64)> {
    let lg = |y: f64| (-zt * phi(sp, y)).ln_1p();
    let dl = |y: f64| {
        let p = phi(sp, y);
        p / (1.0 - zt * p)
    };
    let s = -0.5 * sp.integrate_even(lg)?;
    let e = 0.25 * sp.integrate_even(|y| y * y * lg(y))?;
    let ds = 0.5 * sp.integrate_even(dl)?;
    let de = -0.25 * sp.integrate_even(|y| y * y * dl(y))?;
    Ok((s, e, ds, de))
}

pub fn scaled_curve(sp: &ScaledParams, zetas: &[f64]) -> Result<ParametricCurve> {
    let zmax = zeta_threshold(sp)?;
    if let Some(&z) = zetas.iter().find(|&&z| z >= zmax) {
        return Err(Error::DomainExceeded { zeta: z });
    }
    let points = zetas
        .par_iter()
        .map(|&z| {
            let (s, e, _, _) = scaled_point(sp, z)?;
            Ok(CurvePoint { zeta: z, s, e, converged: true, iterations: 0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParametricCurve { points })
}

/// `Phit(Ht)` from the exact slope `Ht = (dE/dzeta) / (ds/dzeta)` at each `zeta >= 0`.
pub fn scaled_rate(sp: &ScaledParams, zetas: &[f64]) -> Result<RateFunction> {
    let zmax = zeta_threshold(sp)?;
    let mut zs: Vec<f64> = zetas.iter().cloned().filter(|&z| z >= 0.0).collect();
    zs.sort_by(f64::total_cmp);
    if let Some(&z) = zs.iter().find(|&&z| z >= zmax) {
        return Err(Error::DomainExceeded { zeta: z });
    }
    let samples = zs
        .par_iter()
        .map(|&z| {
            let (s, e, ds, de) = scaled_point(sp, z)?;
            let h = de / ds;
            Ok(RateSample { h, phi: s * h - e, s, e })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateFunction { samples })
}

/// `(1/(4 sqrt pi)) sum_k zhat^k (2k)! / (k! k^{3/2 + k})`, truncated when terms drop below 1e-17.
pub fn max_current_series(zhat: f64) -> f64 {
    let mut sum = 0.0;
    let mut ratio = 1.0; // (2k)!/k!
    for k in 1..400 {
        let kf = k as f64;
        ratio *= (2.0 * kf - 1.0) * 2.0; // (2k)(2k-1)/k
        let term = zhat.powi(k) * ratio / kf.powf(1.5 + kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (4.0 * PI.sqrt())
}

/// Deviation of the scaled curve at large `ut`, `vt = 0` from the polylog forms
/// `s = Li_{3/2}(zhat) / (4 sqrt pi)`, `E = -Li_{5/2}(zhat) / (16 sqrt pi)`,
/// with `zhat = 4 zt / ut^2`. Returns `(|ds|, |dE|)`.
pub fn hdmc_check(ut: f64, zhat: f64) -> Result<(f64, f64)> {
    let sp = ScaledParams::new(ut, 0.0)?;
    let zt = zhat * ut * ut / 4.0;
    let (s, e, _, _) = scaled_point(&sp, zt)?;
    let sq = PI.sqrt();
    let s_ref = polylog(1.5, zhat)? / (4.0 * sq);
    let e_ref = -polylog(2.5, zhat)? / (16.0 * sq);
    Ok(((s - s_ref).abs(), (e - e_ref).abs()))
}

/// Scaled curve at `ut = vt` against the factorial series, `zt = zhat ut^2 vt^2`.
pub fn max_current_check(ut: f64, zhat: f64) -> Result<f64> {
    let sp = ScaledParams::new(ut, ut)?;
    let (s, _, _, _) = scaled_point(&sp, zhat * ut.powi(4))?;
    Ok((s - max_current_series(zhat)).abs())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FiniteLReport {
    #[serde(rename = "L")]
    pub l: f64,
    pub c1_scaled: f64,
    pub c1_tilde: f64,
    pub c1_rel_dev: f64,
    pub c2_scaled: f64,
    pub c2_tilde: f64,
    pub c2_rel_dev: f64,
}

/// Compare `L (c1 + 1/24)` and `sqrt(L) c2` at `(ut, vt)/sqrt(L)` with the scaled limits.
pub fn finite_l_consistency(sp: &ScaledParams, l: f64, n_nodes: usize) -> Result<FiniteLReport> {
    let r = l.sqrt();
    let params = BoundaryParams::new(sp.ut / r, sp.vt / r, l)?;
    let prob = Problem::new(&params, n_nodes)?;
    let c1_scaled = l * (prob.c1() + 1.0 / 24.0);
    let c2_scaled = r * prob.c2()?;
    let ct = scaled_cumulants(sp, 2)?.c_t;
    Ok(FiniteLReport {
        l,
        c1_scaled,
        c1_tilde: ct[0],
        c1_rel_dev: ((c1_scaled - ct[0]) / ct[0]).abs(),
        c2_scaled,
        c2_tilde: ct[1],
        c2_rel_dev: ((c2_scaled - ct[1]) / ct[1]).abs(),
    })
}

/// `int_0^inf phi^k` by plain adaptive quadrature on a finite range, for tests.
pub fn phi_moment_brute(sp: &ScaledParams, k: usize) -> Result<f64> {
    let k = k as i32;
    Ok(gauss_kronrod(|y| phi(sp, y).powi(k), 0.0, 12.0, 1e-12)? / PI)
}
