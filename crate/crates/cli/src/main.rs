use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kpzcum::cumulants::{c1_continued, c2_line_uv0, c2_origin, Problem};
use kpzcum::fixedpoint::{legendre, trace_curve, zeta_max, RateFunction};
use kpzcum::largel::{scaled_cumulants, scaled_rate, zeta_threshold, ScaledParams};
use kpzcum::mc::{mc_c1_open_line, mc_c1_periodic, McConfig};
use kpzcum::model::{BoundaryParams, KernelMatrix, ModelWeights};
use kpzcum::periodic::{bd_crosscheck, periodic_cumulants};
use kpzcum::quadrature::ContourGrid;
use kpzcum::series::{series_cumulants, Method};
use kpzcum::validate::{run_validation, ValidateConfig};
use kpzcum::{Error, DEFAULT_KMAX, DEFAULT_NODES, DEFAULT_SEED, DEFAULT_TOL};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "kpzcum", version, about = "Large-time cumulants of KPZ on an interval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cumulants c_k(u, v, L) by every applicable route
    Cumulants(Opts),
    /// Sweep of c_2(u, u, 1)
    Fig1(Opts),
    /// Rate function, finite L (--u --v --L) or scaled (--ut --vt)
    Rate(Opts),
    /// Scaled cumulants of the large-L limit
    Largel(Opts),
    /// Periodic cumulants and the two closed forms of c_2
    Periodic(Opts),
    /// Monte-Carlo c_1: periodic, or the v = 1 - u line when --u is given
    Mc(Opts),
    /// Run the invariant suite and emit a JSON report
    Validate(Opts),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Opts {
    #[arg(long, allow_hyphen_values = true)]
    u: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v: Option<f64>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: Option<f64>,
    #[arg(long)]
    ut: Option<f64>,
    #[arg(long)]
    vt: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    kmax: usize,
    #[arg(long, default_value_t = DEFAULT_NODES)]
    nodes: usize,
    #[arg(long, allow_hyphen_values = true)]
    zeta_min: Option<f64>,
    #[arg(long)]
    zeta_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    zeta_steps: usize,
    #[arg(long, default_value_t = kpzcum::mc::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = kpzcum::mc::DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Sweep start for fig1
    #[arg(long, default_value_t = 0.05)]
    u_min: f64,
    /// Sweep end for fig1
    #[arg(long, default_value_t = 5.0)]
    u_max: f64,
    /// Sweep step for fig1
    #[arg(long, default_value_t = 0.05)]
    u_step: f64,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Relative perturbation of the k diagonal constant (validate only)
    #[arg(long, hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
    perturb_euler: f64,
    #[arg(skip = DEFAULT_TOL)]
    tol: f64,
}

/// Bad flags or parameters; exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Usage(msg.into()).into())
}

fn need(x: Option<f64>, name: &str) -> anyhow::Result<f64> {
    match x {
        Some(v) if v.is_finite() => Ok(v),
        Some(v) => usage(format!("--{name} must be finite, got {v}")),
        None => usage(format!("--{name} is required")),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV body with the configuration echoed in leading `#` lines.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    notes: Vec<String>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    fn render(&self, opts: &Opts, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Csv => {
                let mut s = String::new();
                writeln!(s, "# {}", serde_json::to_string(opts)?)?;
                for n in &self.notes {
                    writeln!(s, "# {n}")?;
                }
                writeln!(s, "{}", self.header.join(","))?;
                for r in &self.rows {
                    writeln!(s, "{}", r.join(","))?;
                }
                Ok(s)
            }
            Format::Json => {
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
                    .rows
                    .iter()
                    .map(|r| {
                        self.header
                            .iter()
                            .zip(r)
                            .map(|(h, v)| {
                                let val = v
                                    .parse::<f64>()
                                    .ok()
                                    .and_then(serde_json::Number::from_f64)
                                    .map(serde_json::Value::Number)
                                    .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                                (h.to_string(), val)
                            })
                            .collect()
                    })
                    .collect();
                let doc = serde_json::json!({ "config": opts, "notes": self.notes, "rows": rows });
                Ok(serde_json::to_string_pretty(&doc)? + "\n")
            }
        }
    }
}

fn boundary(opts: &Opts) -> anyhow::Result<BoundaryParams> {
    let p = BoundaryParams::new(need(opts.u, "u")?, need(opts.v, "v")?, need(opts.l, "L")?)?;
    Ok(p)
}

fn check_nodes(opts: &Opts) -> anyhow::Result<()> {
    if opts.nodes < 32 {
        return usage(format!("--nodes must be at least 32, got {}", opts.nodes));
    }
    Ok(())
}

fn cmd_cumulants(opts: &Opts) -> anyhow::Result<Table> {
    check_nodes(opts)?;
    if opts.kmax == 0 {
        return usage("--kmax must be at least 1");
    }
    let p = boundary(opts)?;
    let n = opts.nodes;
    let mut t = Table::new(&["k", "c_k", "method", "refinement_delta"]);
    let mut push = |k: usize, c: f64, m: Method, d: Option<f64>| {
        t.rows.push(vec![k.to_string(), num(c), m.to_string(), d.map(num).unwrap_or_default()]);
    };
    if p.u >= 0.0 && p.v >= 0.0 && p.u + p.v > 0.0 {
        let series = series_cumulants(&p, n, opts.kmax)?;
        let fine = Problem::new(&p, n)?;
        let coarse = Problem::new(&p, (n / 2).max(32))?;
        let closed = |q: &Problem| -> kpzcum::Result<Vec<f64>> { Ok(vec![q.c1(), q.c2()?, q.c3()?]) };
        let (cf, cc) = (closed(&fine)?, closed(&coarse)?);
        for k in 1..=opts.kmax {
            if k <= 3 {
                push(k, cf[k - 1], Method::ClosedForm, Some((cf[k - 1] - cc[k - 1]).abs()));
            }
            push(k, series.c[k - 1], Method::Series, series.refinement_delta);
        }
    } else {
        let on_line = (p.u + p.v).abs() < 1e-12;
        let c1 = if on_line && p.u == 0.0 {
            -1.0 / 24.0
        } else {
            let a = c1_continued(&p, n)?;
            let b = c1_continued(&p, (n / 2).max(32))?;
            push(1, a, Method::Continuation, Some((a - b).abs()));
            f64::NAN
        };
        if !c1.is_nan() {
            push(1, c1, Method::Continuation, None);
        }
        if on_line && opts.kmax >= 2 {
            let c2 = |m: usize| if p.u == 0.0 { c2_origin(p.l, m) } else { c2_line_uv0(p.u, p.l, m) };
            let (a, b) = (c2(n)?, c2((n / 2).max(32))?);
            push(2, a, Method::Continuation, Some((a - b).abs()));
        }
        t.notes.push("only c_1 (and c_2 on u + v = 0) are available off u, v >= 0".into());
    }
    Ok(t)
}

fn slope_sign_changes(c: &[f64]) -> usize {
    let d: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    d.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

fn cmd_fig1(opts: &Opts) -> anyhow::Result<Table> {
    check_nodes(opts)?;
    if !(opts.u_step > 0.0 && opts.u_min > 0.0 && opts.u_max >= opts.u_min) {
        return usage("need 0 < --u-min <= --u-max and --u-step > 0");
    }
    let l = opts.l.unwrap_or(1.0);
    let count = ((opts.u_max - opts.u_min) / opts.u_step + 1e-9).floor() as usize + 1;
    let us: Vec<f64> = (0..count).map(|i| opts.u_min + i as f64 * opts.u_step).collect();
    let c2 = |u: f64| -> kpzcum::Result<f64> { Problem::new(&BoundaryParams::new(u, u, l)?, opts.nodes)?.c2() };
    let cs = us.par_iter().map(|&u| c2(u)).collect::<kpzcum::Result<Vec<_>>>()?;
    let mut t = Table::new(&["u", "c2"]);
    for (u, c) in us.iter().zip(&cs) {
        t.rows.push(vec![num(*u), num(*c)]);
    }
    let changes = slope_sign_changes(&cs);
    t.notes.push(format!("slope_sign_changes={changes} monotone={}", changes == 0));
    let (i_min, c_min) = cs.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &c)| if c < a.1 { (i, c) } else { a });
    t.notes.push(format!("grid_minimum u={} c2={}", num(us[i_min]), num(c_min)));
    t.notes.push(format!("c2(0,0,L)={}", num(c2_origin(l, opts.nodes)?)));
    let plateau = (c2(8.0)? - c2(16.0)?).abs();
    t.notes.push(format!("plateau |c2(8)-c2(16)|={}", num(plateau)));
    Ok(t)
}

/// Uniform grid from the flags, or `i h` for `i = -2..steps` with `h = 0.98 zmax / steps`.
fn zeta_grid(opts: &Opts, zmax: f64) -> anyhow::Result<Vec<f64>> {
    let steps = opts.zeta_steps.max(5);
    let grid = match (opts.zeta_min, opts.zeta_max) {
        (None, None) => {
            let h = 0.98 * zmax / steps as f64;
            (-2..=steps as i64).map(|i| i as f64 * h).collect()
        }
        (a, b) => {
            let lo = a.unwrap_or(0.0);
            let hi = b.unwrap_or(0.98 * zmax);
            if !(hi > lo) {
                return usage("--zeta-max must exceed --zeta-min");
            }
            let h = (hi - lo) / (steps - 1) as f64;
            (0..steps).map(|i| lo + i as f64 * h).collect::<Vec<f64>>()
        }
    };
    let kept: Vec<f64> = grid.into_iter().filter(|&z| z < zmax).collect();
    if kept.len() < 3 {
        return Err(Error::DomainExceeded { zeta: zmax }.into());
    }
    Ok(kept)
}

fn rate_table(rate: &RateFunction, shift: f64) -> Table {
    let mut t = Table::new(&["s", "E", "H", "Phi"]);
    for p in &rate.samples {
        t.rows.push(vec![num(p.s), num(p.e), num(p.h), num(p.phi)]);
    }
    let conv = rate.min_convexity();
    t.notes.push(format!("convex={} min_second_difference={}", conv > -1e-8, num(conv)));
    if let Some(first) = rate.samples.first() {
        t.notes.push(format!("H_at_s0={} (c1 + {shift})", num(first.h)));
    }
    t
}

fn cmd_rate(opts: &Opts) -> anyhow::Result<Table> {
    check_nodes(opts)?;
    if opts.ut.is_some() || opts.vt.is_some() {
        let sp = ScaledParams::new(need(opts.ut, "ut")?, need(opts.vt, "vt")?)?;
        let zmax = zeta_threshold(&sp)?;
        let zs = zeta_grid(opts, zmax)?;
        let rate = scaled_rate(&sp, &zs)?;
        let mut t = rate_table(&rate, 0.0);
        t.notes.push(format!("zeta_threshold={}", num(zmax)));
        return Ok(t);
    }
    let p = boundary(opts)?;
    let grid = ContourGrid::new(&p, opts.nodes, 0.0)?;
    let w = ModelWeights::build(&p, &grid)?;
    let k = KernelMatrix::build(&grid);
    let zmax = zeta_max(&w, &k, opts.tol, 1e-3)?;
    let zs = zeta_grid(opts, zmax)?;
    let curve = trace_curve(&w, &k, &zs, opts.tol)?;
    let rate = legendre(&curve)?;
    let mut t = rate_table(&rate, 1.0 / 24.0);
    t.notes.push(format!("zeta_max={}", num(zmax)));
    Ok(t)
}

fn cmd_largel(opts: &Opts) -> anyhow::Result<Table> {
    if opts.kmax == 0 || opts.kmax > 8 {
        return usage("--kmax must be in 1..=8 for the scaled theory");
    }
    let sp = ScaledParams::new(need(opts.ut, "ut")?, need(opts.vt, "vt")?)?;
    let s = scaled_cumulants(&sp, opts.kmax)?;
    let mut t = Table::new(&["k", "c_tilde", "phi_k", "psi_k", "method"]);
    for k in 0..s.k {
        t.rows.push(vec![
            (k + 1).to_string(),
            num(s.c_t[k]),
            num(s.phi_k[k]),
            num(s.psi_k[k]),
            Method::LargeL.to_string(),
        ]);
    }
    Ok(t)
}

fn cmd_periodic(opts: &Opts) -> anyhow::Result<Table> {
    check_nodes(opts)?;
    if opts.kmax == 0 || opts.kmax > 8 {
        return usage("--kmax must be in 1..=8");
    }
    let l = need(opts.l, "L")?;
    let r = periodic_cumulants(l, opts.nodes, opts.kmax)?;
    let (res1, res2) = bd_crosscheck(l)?;
    let mut t = Table::new(&["k", "c_k", "method", "refinement_delta"]);
    for (k, c) in r.c.iter().enumerate() {
        t.rows.push(vec![
            (k + 1).to_string(),
            num(*c),
            r.method.to_string(),
            r.refinement_delta.map(num).unwrap_or_default(),
        ]);
    }
    t.notes.push(format!("c2_closed_res1={} c2_closed_res2={}", num(res1), num(res2)));
    Ok(t)
}

fn cmd_mc(opts: &Opts) -> anyhow::Result<Table> {
    let l = need(opts.l, "L")?;
    let cfg = McConfig::new(opts.samples, opts.steps, opts.seed);
    let mut t = Table::new(&["quantity", "mean", "stderr", "reference", "samples", "steps", "seed"]);
    let row = |q: &str, m: f64, se: f64, r: f64| {
        vec![
            q.to_string(),
            num(m),
            num(se),
            num(r),
            opts.samples.to_string(),
            opts.steps.to_string(),
            opts.seed.to_string(),
        ]
    };
    match opts.u {
        None => {
            let e = mc_c1_periodic(l, &cfg)?;
            t.rows.push(row("c1_periodic", e.mean, e.stderr, -1.0 / 24.0 - 0.5 / l));
        }
        Some(u) => {
            if !(u > 0.0 && u < 1.0) {
                return usage("--u must lie in (0, 1) on the v = 1 - u line");
            }
            let e = mc_c1_open_line(u, l, &cfg)?;
            let prob = Problem::new(&BoundaryParams::new(u, 1.0 - u, l)?, opts.nodes)?;
            t.rows.push(row("c1_open_line", e.c1.mean, e.c1.stderr, prob.c1()));
            t.rows.push(row("denominator", e.denominator.mean, e.denominator.stderr, prob.weights.zcal));
        }
    }
    Ok(t)
}

fn cmd_validate(opts: &Opts) -> anyhow::Result<(String, bool)> {
    check_nodes(opts)?;
    let cfg = ValidateConfig {
        nodes: opts.nodes,
        seed: opts.seed,
        samples: opts.samples,
        steps: opts.steps,
        euler: kpzcum::specfun::EULER_GAMMA * (1.0 + opts.perturb_euler),
    };
    let report = run_validation(&cfg);
    Ok((serde_json::to_string_pretty(&report)? + "\n", report.all_pass))
}

fn emit(opts: &Opts, text: &str) -> anyhow::Result<()> {
    match &opts.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (opts, table) = match &cli.command {
        Command::Cumulants(o) => (o, cmd_cumulants(o)?),
        Command::Fig1(o) => (o, cmd_fig1(o)?),
        Command::Rate(o) => (o, cmd_rate(o)?),
        Command::Largel(o) => (o, cmd_largel(o)?),
        Command::Periodic(o) => (o, cmd_periodic(o)?),
        Command::Mc(o) => (o, cmd_mc(o)?),
        Command::Validate(o) => {
            let (text, pass) = cmd_validate(o)?;
            emit(o, &text)?;
            return Ok(pass);
        }
    };
    emit(opts, &table.render(opts, opts.format)?)?;
    Ok(true)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
