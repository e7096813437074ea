//! Monte-Carlo estimates of `c1` from Brownian functionals.
//!
//! Samples are drawn in fixed chunks; chunk `j` uses a ChaCha stream
//! `(seed, j)` and partial sums are reduced in chunk order, so the result
//! does not depend on the thread schedule.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_STEPS: usize = 4096;
pub const DEFAULT_SAMPLES: usize = 100_000;
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Bridge,
    Free,
}

/// Path sampled at `x_i = i L / n`, `i = 0..=n`, unit diffusion.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    pub l: f64,
    pub kind: PathKind,
    pub values: Vec<f64>,
}

impl BrownianPath {
    pub fn new(l: f64, n_steps: usize, kind: PathKind) -> Self {
        BrownianPath { l, kind, values: vec![0.0; n_steps + 1] }
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn resample<R: Rng>(&mut self, rng: &mut R) {
        let n = self.steps();
        let sd = (self.l / n as f64).sqrt();
        let mut acc = 0.0;
        self.values[0] = 0.0;
        for v in self.values[1..].iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            acc += sd * z;
            *v = acc;
        }
        if self.kind == PathKind::Bridge {
            let end = acc;
            for (i, v) in self.values.iter_mut().enumerate() {
                *v -= end * i as f64 / n as f64;
            }
        }
    }

    /// Trapezoid rule for `int_0^L f(B(x), x) dx`.
    pub fn trapezoid<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let n = self.steps();
        let dx = self.l / n as f64;
        let mut s = 0.5 * (f(self.values[0], 0.0) + f(self.values[n], self.l));
        for i in 1..n {
            s += f(self.values[i], i as f64 * dx);
        }
        s * dx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl McConfig {
    pub fn new(n_samples: usize, n_steps: usize, seed: u64) -> Self {
        McConfig { n_samples, n_steps, seed, parallel: true }
    }

    fn check(&self) -> Result<()> {
        if self.n_steps < 1024 {
            return Err(Error::Domain(format!("need at least 1024 steps, got {}", self.n_steps)));
        }
        if self.n_samples < 10_000 {
            return Err(Error::Domain(format!("need at least 1e4 samples, got {}", self.n_samples)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub n_steps: usize,
}

/// Running sums of up to two observables.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    a: f64,
    b: f64,
    aa: f64,
    bb: f64,
    ab: f64,
}

impl Moments {
    fn push(&mut self, a: f64, b: f64) {
        self.n += 1.0;
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.bb += b * b;
        self.ab += a * b;
    }

    fn merge(mut self, o: &Moments) -> Moments {
        self.n += o.n;
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.bb += o.bb;
        self.ab += o.ab;
        self
    }

    fn mean_a(&self) -> f64 {
        self.a / self.n
    }

    fn mean_b(&self) -> f64 {
        self.b / self.n
    }

    fn var_a(&self) -> f64 {
        (self.aa / self.n - self.mean_a().powi(2)) * self.n / (self.n - 1.0)
    }

    fn var_b(&self) -> f64 {
        (self.bb / self.n - self.mean_b().powi(2)) * self.n / (self.n - 1.0)
    }

    fn cov(&self) -> f64 {
        (self.ab / self.n - self.mean_a() * self.mean_b()) * self.n / (self.n - 1.0)
    }
}

fn run_chunks<F>(cfg: &McConfig, sample: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
{
    let n_chunks = cfg.n_samples.div_ceil(CHUNK);
    let chunk = |j: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(j as u64);
        let count = CHUNK.min(cfg.n_samples - j * CHUNK);
        let mut m = Moments::default();
        for _ in 0..count {
            let (a, b) = sample(&mut rng);
            m.push(a, b);
        }
        m
    };
    let parts: Vec<Moments> = if cfg.parallel {
        (0..n_chunks).into_par_iter().map(chunk).collect()
    } else {
        (0..n_chunks).map(chunk).collect()
    };
    parts.iter().fold(Moments::default(), |acc, m| acc.merge(m))
}

/// `c1^per = -(L/2) E[(int_0^L e^{B})^{-2}]` with `B` a Brownian bridge.
pub fn mc_c1_periodic(l: f64, cfg: &McConfig) -> Result<McEstimate> {
    cfg.check()?;
    if !(l > 0.0) {
        return Err(Error::Domain(format!("L must be positive, got {l}")));
    }
    let m = run_chunks(cfg, |rng| {
        let mut b = BrownianPath::new(l, cfg.n_steps, PathKind::Bridge);
        b.resample(rng);
        let i = b.trapezoid(|x, _| x.exp());
        (-0.5 * l / (i * i), 0.0)
    });
    Ok(McEstimate {
        mean: m.mean_a(),
        stderr: (m.var_a() / m.n).sqrt(),
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        n_steps: cfg.n_steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpenLineEstimate {
    pub u: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub c1: McEstimate,
    /// `E[e^{-v(B1(L) - B2(L))} / int_0^L e^{-(B1 - B2)}]`, an estimate of `Z`.
    pub denominator: McEstimate,
}

/// `c1(u, 1-u, L)` from the test function `e^{x(u - 1/2)}`:
/// `c1 = (u - 1/2)^2 - E[w F] / (2 E[w])` with weight
/// `w = e^{-v(B1(L) - B2(L))} / int e^{-(B1 - B2)}` and
/// `F = int e^{2(B1 + (u - 1/2)x)} / (int e^{B1 + (u - 1/2)x})^2`.
pub fn mc_c1_open_line(u: f64, l: f64, cfg: &McConfig) -> Result<OpenLineEstimate> {
    cfg.check()?;
    if !(l > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("invalid (u, L) = ({u}, {l})")));
    }
    let v = 1.0 - u;
    let a = u - 0.5;
    let m = run_chunks(cfg, |rng| {
        let mut b1 = BrownianPath::new(l, cfg.n_steps, PathKind::Free);
        let mut b2 = BrownianPath::new(l, cfg.n_steps, PathKind::Free);
        b1.resample(rng);
        b2.resample(rng);
        let n = cfg.n_steps;
        let dx = l / n as f64;
        let (mut i1, mut i2, mut id) = (0.0, 0.0, 0.0);
        for k in 0..=n {
            let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
            let e = (b1.values[k] + a * k as f64 * dx).exp();
            i1 += wgt * e;
            i2 += wgt * e * e;
            id += wgt * (b2.values[k] - b1.values[k]).exp();
        }
        let (i1, i2, id) = (i1 * dx, i2 * dx, id * dx);
        let w = (-v * (b1.values[n] - b2.values[n])).exp() / id;
        (w * i2 / (i1 * i1), w)
    });
    let (num, den) = (m.mean_a(), m.mean_b());
    let r = num / den;
    let var_r = (m.var_a() - 2.0 * r * m.cov() + r * r * m.var_b()) / (den * den);
    let c1 = McEstimate {
        mean: a * a - 0.5 * r,
        stderr: 0.5 * (var_r / m.n).sqrt(),
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        n_steps: cfg.n_steps,
    };
    let denominator = McEstimate { mean: den, stderr: (m.var_b() / m.n).sqrt(), ..c1 };
    Ok(OpenLineEstimate { u, l, c1, denominator })
}

/// Sample variance of `B(L/2)` for a bridge, and its standard error.
pub fn bridge_midpoint_variance(l: f64, cfg: &McConfig) -> Result<(f64, f64)> {
    cfg.check()?;
    let m = run_chunks(cfg, |rng| {
        let mut b = BrownianPath::new(l, cfg.n_steps, PathKind::Bridge);
        b.resample(rng);
        let x = b.values[cfg.n_steps / 2];
        (x * x, 0.0)
    });
    // B(L/2) is centered, so E[B^2] is the variance
    Ok((m.mean_a(), (m.var_a() / m.n).sqrt()))
}
