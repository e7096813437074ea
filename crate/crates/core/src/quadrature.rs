//! Discretization of contour integrals `int dw/(2 i pi) f(w)` over
//! `delta + iR`, plus an adaptive Gauss-Kronrod rule for real integrals.

use crate::model::BoundaryParams;
use crate::{Error, Result};
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Envelope threshold used to truncate the contour.
pub const ENVELOPE_EPS: f64 = 1e-18;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = p0;
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Quadrature nodes for the contour `shift + iy`, `y` in `[-cutoff, cutoff]`.
///
/// Nodes are Gauss-Legendre in `y`, or in `t` with `y = c sinh(t)` when the
/// integrand has structure on a scale `c` much finer than the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cutoff: f64,
    pub shift: f64,
    /// Scale `c` of the sinh map, if used.
    pub stretch: Option<f64>,
}

/// Smallest `Y` past the envelope maximum with `exp(-rate Y^2) Y^power < ENVELOPE_EPS`.
pub fn envelope_cutoff(rate: f64, power: f64) -> f64 {
    let g = |y: f64| -rate * y * y + power * y.ln() - ENVELOPE_EPS.ln();
    let mut lo = (power.max(1.0) / (2.0 * rate)).sqrt();
    if g(lo) < 0.0 {
        return lo;
    }
    let mut hi = 2.0 * lo;
    while g(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn feature_scale(p: &BoundaryParams, shift: f64) -> f64 {
    let mut cands = vec![p.u.abs(), p.v.abs(), 1.0];
    if shift > 0.0 {
        cands.extend([shift, (p.u - shift).abs(), (p.v - shift).abs()]);
    }
    cands.into_iter().filter(|c| *c > 0.0).fold(f64::INFINITY, f64::min)
}

impl ContourGrid {
    /// Grid adapted to the weight of `params`: Gaussian rate `L`, power
    /// `2(u+v)+6`, feature scale `min(|u|, |v|, 1)`.
    pub fn new(params: &BoundaryParams, n_nodes: usize, shift: f64) -> Result<Self> {
        let power = 2.0 * (params.u + params.v) + 6.0;
        Self::with_envelope(params.l, power, feature_scale(params, shift), n_nodes, shift)
    }

    pub fn with_envelope(rate: f64, power: f64, scale: f64, n_nodes: usize, shift: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("envelope rate must be positive, got {rate}")));
        }
        if n_nodes < 32 {
            return Err(Error::Domain(format!("need at least 32 nodes, got {n_nodes}")));
        }
        if !(shift >= 0.0) {
            return Err(Error::Domain(format!("contour shift must be >= 0, got {shift}")));
        }
        let cutoff = envelope_cutoff(rate, power);
        let (t, wt) = gauss_legendre(n_nodes);
        // plain GL error ~ exp(-2 N c / Y) for a singularity at distance c
        let stretched = 2.0 * n_nodes as f64 * scale / cutoff < 36.8;
        let (nodes, weights, stretch) = if stretched {
            let c = scale;
            let s = (cutoff / c).asinh();
            let nodes = t.iter().map(|&ti| c * (s * ti).sinh()).collect();
            let weights = t.iter().zip(&wt).map(|(&ti, &wi)| wi * s * c * (s * ti).cosh()).collect();
            (nodes, weights, Some(c))
        } else {
            let nodes = t.iter().map(|&ti| cutoff * ti).collect();
            let weights = wt.iter().map(|&wi| cutoff * wi).collect();
            (nodes, weights, None)
        };
        Ok(ContourGrid { nodes, weights, cutoff, shift, stretch })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `w^2` at each node, `w = shift + iy`; real only when `shift == 0`.
    pub fn w2_real(&self) -> Vec<f64> {
        self.nodes.iter().map(|y| -y * y).collect()
    }

    /// Sum `w_i f_i / (2 pi)`, approximating `int dw/(2 i pi) f(w)`.
    pub fn integrate<T>(&self, f: &[T]) -> T
    where
        T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        assert_eq!(f.len(), self.len(), "grid function length mismatch");
        self.weights.iter().zip(f).map(|(&w, &fi)| fi * (w / (2.0 * PI))).sum()
    }

    /// Integrate a function of `y` sampled at the nodes.
    pub fn integrate_fn<T, F>(&self, f: F) -> T
    where
        T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
        F: Fn(f64) -> T,
    {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| f(y) * (w / (2.0 * PI))).sum()
    }
}

/// Tensor-product rule `sum_ij w_i w_j F(y_i, y_j) / (2 pi)^2`.
pub fn integrate2<T, F>(f: F, grid_a: &ContourGrid, grid_b: &ContourGrid) -> T
where
    T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64, f64) -> T,
{
    grid_a.integrate_fn(|ya| grid_b.integrate_fn(|yb| f(ya, yb)))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) on `[a, b]` to relative tolerance `tol`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut err = error;
    let mut evals = 1;
    while err > tol * total.abs() && err > 1e-300 {
        if evals > 4000 {
            return Err(Error::Quadrature(err));
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
        evals += 2;
        if !total.is_finite() {
            return Err(Error::Quadrature(f64::INFINITY));
        }
    }
    // re-sum to shed accumulated rounding in the running total
    Ok(heap.iter().map(|s| s.value).sum())
}

/// `int_a^inf f(x) dx` with `x = a + scale r/(1 - r)`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: f64) -> Result<f64> {
    let g = |r: f64| {
        let one_minus = 1.0 - r;
        let x = a + scale * r / one_minus;
        let v = f(x) * scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    gauss_kronrod(g, 0.0, 1.0, tol)
}

/// `int_{b_0}^inf f` split at the ascending breakpoints `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tail_scale: f64, tol: f64) -> Result<f64> {
    let mut sum = 0.0;
    for pair in breaks.windows(2) {
        if pair[1] > pair[0] {
            sum += gauss_kronrod(&f, pair[0], pair[1], tol)?;
        }
    }
    let last = *breaks.last().expect("at least one breakpoint");
    Ok(sum + integrate_half_line(&f, last, tail_scale, tol)?)
}
