//! Gamma and digamma over the complex plane, plus the real special
//! functions needed by the large-L formulas.

use crate::quadrature::integrate_half_line;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

// B_{2k} / (2k (2k - 1))
const LNGAMMA_COEF: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

// B_{2k} / (2k)
const DIGAMMA_COEF: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
    43867.0 / 14364.0,
    -174611.0 / 6600.0,
];

// B_{2k}
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

fn check_finite(z: Complex64) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite argument {z}")))
    }
}

fn needs_shift(w: Complex64) -> bool {
    w.re < 0.0 || w.norm_sqr() < 100.0
}

/// Principal branch of log Gamma(z).
///
/// Shifts `z` upward until `Re z >= 0` and `|z| >= 10`, then sums the
/// Stirling series.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    check_finite(z)?;
    if z.im == 0.0 && is_nonpositive_integer(z.re) {
        return Err(Error::Pole(format!("Gamma at {}", z.re)));
    }
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while needs_shift(w) {
        shift += w.ln();
        w.re += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut p = inv;
    let mut tail = Complex64::new(0.0, 0.0);
    for c in LNGAMMA_COEF {
        tail += p * c;
        p *= inv2;
    }
    Ok((w - 0.5) * w.ln() - w + LN_SQRT_2PI + tail - shift)
}

/// Digamma psi(z) = d/dz log Gamma(z).
pub fn digamma(z: Complex64) -> Result<Complex64> {
    check_finite(z)?;
    if z.im == 0.0 && is_nonpositive_integer(z.re) {
        return Err(Error::Pole(format!("digamma at {}", z.re)));
    }
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while needs_shift(w) {
        shift += w.inv();
        w.re += 1.0;
    }
    let inv2 = (w * w).inv();
    let mut p = inv2;
    let mut tail = Complex64::new(0.0, 0.0);
    for c in DIGAMMA_COEF {
        tail += p * c;
        p *= inv2;
    }
    Ok(w.ln() - 0.5 * w.inv() - tail - shift)
}

/// |Gamma(a + iy)|^2, computed in log space. Even in `y` by construction.
pub fn gamma_abs2_line(a: f64, y: f64) -> Result<f64> {
    Ok((2.0 * ln_gamma(Complex64::new(a, y.abs()))?.re).exp())
}

/// sin(pi x) with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        (PI * (-1.0 - r)).sin()
    } else {
        (PI * r).sin()
    }
}

/// Real Gamma function.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Pole(format!("Gamma at {x}")));
    }
    if x < 0.5 {
        Ok(PI / (sin_pi(x) * gamma(1.0 - x)?))
    } else {
        Ok(ln_gamma(Complex64::new(x, 0.0))?.re.exp())
    }
}

/// 1/Gamma(x), zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else if x < 0.5 {
        // 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
        sin_pi(x) * gamma(1.0 - x).unwrap_or(f64::INFINITY) / PI
    } else {
        (-ln_gamma(Complex64::new(x, 0.0)).map(|v| v.re).unwrap_or(f64::NAN)).exp()
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 * FRAC_1_SQRT_PI * (-x2).exp() * sum
}

fn erfcx_cf(x: f64) -> f64 {
    // sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..5000 {
        let a = 0.5 * n as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI / f
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfcx_cf(x) * (-x * x).exp()
    }
}

/// Scaled complementary error function e^{x^2} erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else if x < 0.0 {
        2.0 * (x * x).exp() - erfcx(-x)
    } else if x < 2.0 {
        (x * x).exp() * (1.0 - erf_series(x))
    } else {
        erfcx_cf(x)
    }
}

/// Tricomi confluent hypergeometric function U(a, b, x) for a > 0, x > 0,
/// from its Laplace integral with t = s^2.
pub fn tricomi_u(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("tricomi_u needs a > 0, x > 0 (a = {a}, b = {b}, x = {x})")));
    }
    let p = 2.0 * a - 1.0;
    let q = b - a - 1.0;
    let f = |s: f64| {
        let t = s * s;
        2.0 * (p * s.ln() + q * t.ln_1p() - x * t).exp()
    };
    let integral = integrate_half_line(f, 0.0, 1.0 / x.sqrt(), 1e-14)?;
    Ok(integral * rgamma(a))
}

/// Generalized exponential integral E_a(x) = e^{-x} U(1, 2 - a, x).
pub fn exp_integral_e(a: f64, x: f64) -> Result<f64> {
    Ok((-x).exp() * tricomi_u(1.0, 2.0 - a, x)?)
}

/// Riemann zeta for real s != 1 (Euler-Maclaurin, reflected for s < -1/2).
pub fn zeta(s: f64) -> Result<f64> {
    if s == 1.0 || !s.is_finite() {
        return Err(Error::Pole(format!("zeta at {s}")));
    }
    if s < -0.5 {
        if is_nonpositive_integer(s) && (s / 2.0).fract() == 0.0 {
            return Ok(0.0);
        }
        let refl = 2f64.powf(s) * PI.powf(s - 1.0) * sin_pi(0.5 * s) * gamma(1.0 - s)?;
        return Ok(refl * zeta(1.0 - s)?);
    }
    let n = 16.0f64;
    let mut sum: f64 = (1..16).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // sum_j B_{2j}/(2j)! s(s+1)...(s+2j-2) n^{-s-2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut npow = n.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        if j > 0 {
            let k = 2.0 * j as f64;
            rising *= (s + k - 1.0) * (s + k);
            fact *= (k + 1.0) * (k + 2.0);
            npow /= n * n;
        }
        sum += b / fact * rising * npow;
    }
    Ok(sum)
}

/// Polylogarithm Li_s(x) for non-integer s > 1 and |x| <= 1 - 1e-9.
///
/// Direct series for |x| <= 1/2; above that the expansion in mu = log x,
/// Li_s(e^mu) = Gamma(1 - s)(-mu)^{s-1} + sum_k zeta(s - k) mu^k / k!.
pub fn polylog(s: f64, x: f64) -> Result<f64> {
    if !(s > 1.0) || s.fract() == 0.0 {
        return Err(Error::Domain(format!("polylog order {s} not supported")));
    }
    if !(x.abs() <= 1.0 - 1e-9) {
        return Err(Error::Domain(format!("polylog argument {x} outside |x| <= 1 - 1e-9")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < 0.0 {
        return Ok(2f64.powf(1.0 - s) * polylog(s, x * x)? - polylog(s, -x)?);
    }
    if x <= 0.5 {
        let mut sum = 0.0;
        let mut xk = 1.0;
        for k in 1..200 {
            xk *= x;
            let term = xk / (k as f64).powf(s);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return Ok(sum);
    }
    let mu = x.ln();
    let mut sum = gamma(1.0 - s)? * (-mu).powf(s - 1.0);
    let mut mk = 1.0;
    for k in 0..80 {
        if k > 0 {
            mk *= mu / k as f64;
        }
        let term = zeta(s - k as f64)? * mk;
        sum += term;
        if k as f64 > s + 2.0 && term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Ok(sum)
}
