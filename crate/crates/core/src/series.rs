//! Power-series solution of the functional equation in `zeta` and the
//! inversion of `(s(zeta), E(zeta))` into cumulants.
//!
//! With `U = sum_n U_n zeta^n` and `A = k U`, expanding
//! `U = -1/2 log(1 - 2 zeta Psi e^A)` gives
//! `U_n = sum_{l=1}^n (2^{l-1}/l) Psi^l [zeta^{n-l}] e^{l A}`.

use crate::model::{KernelMatrix, ModelWeights};
use crate::quadrature::ContourGrid;
use crate::{BoundaryParams, Error, Result};
use serde::Serialize;

/// Which route produced a set of cumulants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    ClosedForm,
    Continuation,
    LargeL,
    Periodic,
    MonteCarlo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Series => "series",
            Method::ClosedForm => "closed_form",
            Method::Continuation => "continuation",
            Method::LargeL => "large_L",
            Method::Periodic => "periodic",
            Method::MonteCarlo => "monte_carlo",
        };
        f.write_str(s)
    }
}

/// Coefficients `s_n = int U_n` and `eps_n = 1/2 int w^2 U_n`, n = 1..K.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffSeries {
    pub s: Vec<f64>,
    pub eps: Vec<f64>,
    /// Add the `-1/24` shift to `c_1` on inversion.
    pub include_shift: bool,
}

/// Cumulants `c_1..c_K` with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulantResult {
    pub c: Vec<f64>,
    pub method: Method,
    pub params: Option<BoundaryParams>,
    pub nodes: usize,
    /// Largest change of any `c_k` when the grid is halved.
    pub refinement_delta: Option<f64>,
}

/// `U_1..U_K` by the exponential-of-series recurrence,
/// `m E_m = l sum_{j=1}^m j A_j E_{m-j}` for `e^{l A}`.
pub fn u_coeffs_with<F>(psi: &[f64], apply_k: F, kmax: usize) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = psi.len();
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    for order in 1..=kmax {
        let mut un = vec![0.0; n];
        for node in 0..n {
            let p = psi[node];
            let mut pl = 1.0;
            for l in 1..=order {
                pl *= p;
                let m = order - l;
                let e = exp_coeff(|j| a[j - 1][node], l as f64, m);
                un[node] += 2f64.powi(l as i32 - 1) / l as f64 * pl * e;
            }
        }
        if order < kmax {
            a.push(apply_k(&un)?);
        }
        us.push(un);
    }
    Ok(us)
}

/// `[zeta^m] exp(l sum_j A_j zeta^j)`.
fn exp_coeff<A: Fn(usize) -> f64>(a: A, l: f64, m: usize) -> f64 {
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for k in 1..=m {
        let s: f64 = (1..=k).map(|j| j as f64 * a(j) * e[k - j]).sum();
        e[k] = l * s / k as f64;
    }
    e[m]
}

/// `U_1..U_K` by direct multinomial composition, `e^{lA} = sum_j (lA)^j / j!`
/// with the powers of `A` formed by series convolution.
pub fn u_coeffs_multinomial<F>(psi: &[f64], apply_k: F, kmax: usize) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = psi.len();
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    for order in 1..=kmax {
        let mut un = vec![0.0; n];
        for node in 0..n {
            // series A(zeta) truncated at order - 1, A_0 = 0
            let mut aser = vec![0.0; order];
            for j in 1..order {
                aser[j] = a[j - 1][node];
            }
            // powers[j] = A^j
            let mut powers = vec![vec![0.0; order]; order];
            powers[0][0] = 1.0;
            for j in 1..order {
                powers[j] = convolve(&powers[j - 1], &aser);
            }
            let p = psi[node];
            for l in 1..=order {
                let m = order - l;
                let mut e = 0.0;
                let mut fact = 1.0;
                for (j, pw) in powers.iter().enumerate().take(m + 1) {
                    if j > 0 {
                        fact *= j as f64;
                    }
                    e += (l as f64).powi(j as i32) / fact * pw[m];
                }
                un[node] += 2f64.powi(l as i32 - 1) / l as f64 * p.powi(l as i32) * e;
            }
        }
        if order < kmax {
            a.push(apply_k(&un)?);
        }
        us.push(un);
    }
    Ok(us)
}

fn convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += x[i] * y[j];
        }
    }
    out
}

/// `U_1..U_K` on the grid of `weights` with the kernel `k`.
pub fn compute_u_coeffs(weights: &ModelWeights, kernel: &KernelMatrix, kmax: usize) -> Result<Vec<Vec<f64>>> {
    u_coeffs_with(&weights.psi, |f| kernel.apply(f), kmax)
}

/// `s_n = int U_n`, `eps_n = 1/2 int w^2 U_n` with `w^2 = -y^2`.
pub fn extract_coeffs(us: &[Vec<f64>], grid: &ContourGrid) -> CoeffSeries {
    let s = us.iter().map(|u| grid.integrate(u)).collect();
    let eps = us
        .iter()
        .map(|u| {
            let g: Vec<f64> = u.iter().zip(&grid.nodes).map(|(u, y)| -0.5 * y * y * u).collect();
            grid.integrate(&g)
        })
        .collect();
    CoeffSeries { s, eps, include_shift: true }
}

/// `d_{k,l} = [zeta^k] s(zeta)^l` for `k, l <= K`, indexed `d[k][l]`.
pub fn power_table(s: &[f64]) -> Vec<Vec<f64>> {
    let kmax = s.len();
    let mut ser = vec![0.0; kmax + 1];
    ser[1..].copy_from_slice(s);
    let mut pw = vec![vec![0.0; kmax + 1]; kmax + 1];
    pw[0][0] = 1.0;
    for l in 1..=kmax {
        pw[l] = convolve(&pw[l - 1], &ser);
    }
    let mut d = vec![vec![0.0; kmax + 1]; kmax + 1];
    for (l, row) in pw.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            d[k][l] = *v;
        }
    }
    d
}

/// Solve `eps_k = sum_{l <= k} d_{k,l} c_l / l!` for `c_1..c_K`.
pub fn invert_to_cumulants(coeffs: &CoeffSeries) -> Result<Vec<f64>> {
    let kmax = coeffs.s.len();
    if coeffs.eps.len() != kmax {
        return Err(Error::Domain("s and eps coefficient lengths differ".into()));
    }
    if kmax == 0 {
        return Ok(Vec::new());
    }
    let s1 = coeffs.s[0];
    if s1 == 0.0 || !s1.is_finite() {
        return Err(Error::Singular(format!("cannot invert with s_1 = {s1}")));
    }
    let d = power_table(&coeffs.s);
    let mut scaled = vec![0.0; kmax + 1]; // c_l / l!
    for k in 1..=kmax {
        let acc: f64 = (1..k).map(|l| d[k][l] * scaled[l]).sum();
        scaled[k] = (coeffs.eps[k - 1] - acc) / s1.powi(k as i32);
    }
    let mut fact = 1.0;
    let mut c: Vec<f64> = (1..=kmax)
        .map(|k| {
            fact *= k as f64;
            scaled[k] * fact
        })
        .collect();
    if coeffs.include_shift {
        c[0] -= 1.0 / 24.0;
    }
    Ok(c)
}

/// Cumulants `c_1..c_K` from the series route on `weights`.
///
/// The weight is normalized to `nu` first; this rescales `zeta` by `Z1`
/// and leaves the cumulants unchanged.
pub fn cumulants_from_weights(weights: &ModelWeights, kernel: &KernelMatrix, kmax: usize) -> Result<Vec<f64>> {
    let us = u_coeffs_with(&weights.nu, |f| kernel.apply(f), kmax)?;
    invert_to_cumulants(&extract_coeffs(&us, &weights.grid))
}

/// Series-route cumulants for `(u, v, L)` with `u, v >= 0`.
pub fn series_cumulants(params: &BoundaryParams, n_nodes: usize, kmax: usize) -> Result<CumulantResult> {
    if kmax == 0 {
        return Err(Error::Domain("series order must be at least 1".into()));
    }
    let run = |n: usize| -> Result<Vec<f64>> {
        let grid = ContourGrid::new(params, n, 0.0)?;
        let weights = ModelWeights::build(params, &grid)?;
        let kernel = KernelMatrix::build(&grid);
        cumulants_from_weights(&weights, &kernel, kmax)
    };
    let c = run(n_nodes)?;
    let coarse = run((n_nodes / 2).max(32))?;
    let delta = c.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CumulantResult {
        c,
        method: Method::Series,
        params: Some(*params),
        nodes: n_nodes,
        refinement_delta: Some(delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setup(u: f64, v: f64, l: f64, n: usize) -> (ModelWeights, KernelMatrix) {
        let p = BoundaryParams::new(u, v, l).unwrap();
        let g = ContourGrid::new(&p, n, 0.0).unwrap();
        let w = ModelWeights::build(&p, &g).unwrap();
        let k = KernelMatrix::build(&g);
        (w, k)
    }

    #[test]
    fn low_orders_match_explicit_forms() {
        let (w, k) = setup(1.0, 1.0, 1.0, 200);
        let us = compute_u_coeffs(&w, &k, 3).unwrap();
        let psi = &w.psi;
        let kpsi = k.apply(psi).unwrap();
        for i in 0..psi.len() {
            assert_eq!(us[0][i], psi[i]);
            let u2 = psi[i] * psi[i] + psi[i] * kpsi[i];
            assert!((us[1][i] - u2).abs() < 1e-10 * (1.0 + u2.abs()));
        }
        // U_3 = 4/3 Psi^3 + 2 Psi^2 kPsi + 1/2 Psi (kPsi)^2 + Psi k(Psi^2) + Psi k(Psi kPsi)
        let psi2: Vec<f64> = psi.iter().map(|p| p * p).collect();
        let psikpsi: Vec<f64> = psi.iter().zip(&kpsi).map(|(p, q)| p * q).collect();
        let kpsi2 = k.apply(&psi2).unwrap();
        let kpk = k.apply(&psikpsi).unwrap();
        for i in 0..psi.len() {
            let p = psi[i];
            let u3 =
                4.0 / 3.0 * p.powi(3) + 2.0 * p * p * kpsi[i] + 0.5 * p * kpsi[i] * kpsi[i] + p * kpsi2[i] + p * kpk[i];
            assert!((us[2][i] - u3).abs() < 1e-9 * (1.0 + u3.abs()));
        }
        // kbar forms: U_2 = Psi kbar Psi, U_3 = -Psi^3/6 + Psi (kbar Psi)^2 / 2 + Psi kbar(Psi kbar Psi)
        let kb = k.apply_bar(psi).unwrap();
        let pkb: Vec<f64> = psi.iter().zip(&kb).map(|(p, q)| p * q).collect();
        let kbpkb = k.apply_bar(&pkb).unwrap();
        for i in 0..psi.len() {
            let p = psi[i];
            assert!((us[1][i] - p * kb[i]).abs() < 1e-10 * (1.0 + us[1][i].abs()));
            let u3 = -p.powi(3) / 6.0 + 0.5 * p * kb[i] * kb[i] + p * kbpkb[i];
            assert!((us[2][i] - u3).abs() < 1e-9 * (1.0 + u3.abs()));
        }
    }

    #[test]
    fn zero_kernel_collapses_log_series() {
        let psi = vec![0.3, 1.2, 0.01, 2.0];
        let zero = |f: &[f64]| Ok(vec![0.0; f.len()]);
        let us = u_coeffs_with(&psi, zero, 6).unwrap();
        for (n, u) in us.iter().enumerate() {
            let n = n as i32 + 1;
            for (x, p) in u.iter().zip(&psi) {
                let want = 2f64.powi(n - 1) / n as f64 * p.powi(n);
                assert!((x - want).abs() < 1e-14 * want.max(1e-300));
            }
        }
    }

    #[test]
    fn routes_agree() {
        let (w, k) = setup(0.7, 1.3, 1.0, 200);
        let a = u_coeffs_with(&w.nu, |f| k.apply(f), 6).unwrap();
        let b = u_coeffs_multinomial(&w.nu, |f| k.apply(f), 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn u_coeffs_even() {
        let (w, k) = setup(1.0, 0.5, 1.0, 100);
        let us = compute_u_coeffs(&w, &k, 4).unwrap();
        for u in &us {
            for i in 0..u.len() {
                assert!((u[i] - u[u.len() - 1 - i]).abs() <= 1e-12 * u[i].abs().max(1e-300));
            }
        }
    }

    #[test]
    fn first_order_coefficients() {
        let (w, k) = setup(1.0, 1.0, 1.0, 200);
        let us = compute_u_coeffs(&w, &k, 2).unwrap();
        let cs = extract_coeffs(&us, &w.grid);
        assert!((cs.eps[0] / cs.s[0] - 0.5 * w.w2_mean).abs() < 1e-13);
        let zero = extract_coeffs(&[vec![0.0; w.len()]], &w.grid);
        assert_eq!(zero.s, vec![0.0]);
        assert_eq!(zero.eps, vec![0.0]);
        // s_2 = s_1^2 <kbar>
        let knu = k.apply(&w.nu).unwrap();
        let kmean = w.expect(&knu);
        let psi2: Vec<f64> = w.psi.iter().map(|p| p * p).collect();
        let kbar = kmean + w.grid.integrate(&psi2) / (w.z1 * w.z1);
        assert!((cs.s[1] - cs.s[0].powi(2) * kbar).abs() < 1e-9 * cs.s[1].abs());
    }

    #[test]
    fn inversion_linear_case() {
        let cs = CoeffSeries { s: vec![1.0, 0.0, 0.0], eps: vec![0.7, 0.0, 0.0], include_shift: false };
        assert_eq!(invert_to_cumulants(&cs).unwrap(), vec![0.7, 0.0, 0.0]);
        let bad = CoeffSeries { s: vec![0.0], eps: vec![1.0], include_shift: false };
        assert!(invert_to_cumulants(&bad).is_err());
    }

    #[test]
    fn inversion_matrix_top_block() {
        // c_k = sum_j M_kj e_j with e_j = eps_j / s_1, m_i = s_i / s_1, s_1 = 1
        let (m2, m3, m4) = (0.3, -0.2, 0.15);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| {
                let mut eps = vec![0.0; 4];
                eps[j] = 1.0;
                let cs = CoeffSeries { s: vec![1.0, m2, m3, m4], eps, include_shift: false };
                invert_to_cumulants(&cs).unwrap()
            })
            .collect();
        let want = [
            [1.0, 0.0, 0.0, 0.0],
            [-2.0 * m2, 2.0, 0.0, 0.0],
            [12.0 * m2 * m2 - 6.0 * m3, -12.0 * m2, 6.0, 0.0],
            [-24.0 * (5.0 * m2.powi(3) - 5.0 * m2 * m3 + m4), 24.0 * (5.0 * m2 * m2 - 2.0 * m3), -72.0 * m2, 24.0],
        ];
        for k in 0..4 {
            for j in 0..4 {
                assert!((cols[j][k] - want[k][j]).abs() < 1e-12, "entry ({k},{j})");
            }
        }
    }

    proptest! {
        #[test]
        fn inversion_recomposes(
            s in proptest::collection::vec(-1.0f64..1.0, 6),
            eps in proptest::collection::vec(-1.0f64..1.0, 6),
            s1 in 0.5f64..2.0,
        ) {
            let mut s = s;
            s[0] = s1;
            let cs = CoeffSeries { s: s.clone(), eps: eps.clone(), include_shift: false };
            let c = invert_to_cumulants(&cs).unwrap();
            // recompose E(s(zeta)) = sum_l c_l/l! s(zeta)^l term by term
            let mut ser = vec![0.0; 7];
            ser[1..].copy_from_slice(&s);
            let mut pw = vec![0.0; 7];
            pw[0] = 1.0;
            let mut out = vec![0.0; 7];
            let mut fact = 1.0;
            for (l, cl) in c.iter().enumerate() {
                let mut next = vec![0.0; 7];
                for i in 0..7 {
                    for j in 0..7 - i {
                        next[i + j] += pw[i] * ser[j];
                    }
                }
                pw = next;
                fact *= (l + 1) as f64;
                for k in 0..7 {
                    out[k] += cl / fact * pw[k];
                }
            }
            for k in 0..6 {
                prop_assert!((out[k + 1] - eps[k]).abs() < 1e-12 * (1.0 + eps[k].abs()) * 10.0);
            }
        }
    }
}
