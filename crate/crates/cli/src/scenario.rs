//! Scenario configs: parsing, validation and dispatch.

use crate::artifacts::{fmt_f64, ArtifactSink};
use serde::Deserialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use tropdyn_core::automata::AutomatonSpec;
use tropdyn_core::dynamics::{self, BoundReport, Mode};
use tropdyn_core::extensions;
use tropdyn_core::pde;
use tropdyn_core::{Error as CoreError, MaxPlusPresentation, RationalMode, TropicalParam};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Eval,
    Orbit,
    Compare,
    Recurse,
    Pde,
    Refine,
}

#[derive(Debug, Deserialize)]
pub struct Scenario {
    pub kind: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Debug)]
pub enum RunError {
    /// Parse or precondition failure: exit 1. Failed bounds are reported
    /// through the Ok(false) channel and exit 2.
    Fail(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Fail(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Fail(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Fail(e.to_string())
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Fail(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::Fail(format!("{}: {e}", path.display())))
}

pub struct Ctx<'a> {
    pub scenario: &'a Scenario,
    pub base_dir: PathBuf,
    pub seed: Option<u64>,
}

impl Ctx<'_> {
    fn input_path(&self, key: &str) -> Result<PathBuf, RunError> {
        let rel = self
            .scenario
            .inputs
            .get(key)
            .ok_or_else(|| RunError::Fail(format!("missing input {key:?}")))?;
        let p = PathBuf::from(rel);
        Ok(if p.is_absolute() { p } else { self.base_dir.join(p) })
    }

    fn presentation(&self, key: &str) -> Result<MaxPlusPresentation, RunError> {
        let path = self.input_path(key)?;
        let text = fs::read_to_string(&path)
            .map_err(|e| RunError::Fail(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Fail(format!("{}: {e}", path.display())))
    }

    fn automaton(&self, key: &str) -> Result<AutomatonSpec, RunError> {
        if let Some(name) = self.scenario.inputs.get(key).and_then(|v| v.strip_prefix("builtin:")) {
            return Ok(tropdyn_core::automata::builtin(name)?);
        }
        let path = self.input_path(key)?;
        let text = fs::read_to_string(&path)
            .map_err(|e| RunError::Fail(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Fail(format!("{}: {e}", path.display())))
    }

    fn param(&self, key: &str) -> Option<&Value> {
        self.scenario.params.get(key)
    }

    fn f64_param(&self, key: &str) -> Result<f64, RunError> {
        self.param(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| RunError::Fail(format!("missing numeric param {key:?}")))
    }

    fn f64_param_or(&self, key: &str, default: f64) -> Result<f64, RunError> {
        match self.param(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| RunError::Fail(format!("param {key:?} must be numeric"))),
        }
    }

    fn usize_param(&self, key: &str) -> Result<usize, RunError> {
        self.param(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| RunError::Fail(format!("missing integer param {key:?}")))
    }

    fn vec_param(&self, key: &str) -> Result<Vec<f64>, RunError> {
        let arr = self
            .param(key)
            .and_then(Value::as_array)
            .ok_or_else(|| RunError::Fail(format!("missing array param {key:?}")))?;
        arr.iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| RunError::Fail(format!("param {key:?} must hold numbers")))
            })
            .collect()
    }

    fn str_param(&self, key: &str) -> Option<&str> {
        self.param(key).and_then(Value::as_str)
    }

    fn t_param(&self) -> Result<Option<TropicalParam>, RunError> {
        match self.param("t") {
            None => Ok(None),
            Some(v) => {
                let t = v
                    .as_f64()
                    .ok_or_else(|| RunError::Fail("param \"t\" must be numeric".into()))?;
                Ok(Some(TropicalParam::new(t)?))
            }
        }
    }

    fn seed(&self) -> Option<u64> {
        self.seed
            .or_else(|| self.param("seed").and_then(Value::as_u64))
    }
}

/// Dry-run diagnostics: schema and precondition checks without computing.
pub fn validate(ctx: &Ctx) -> Vec<String> {
    let mut diags = Vec::new();
    let s = ctx.scenario;
    match s.kind.as_str() {
        "eval" => {
            if let Err(e) = ctx.presentation("presentation") {
                diags.push(e.to_string());
            } else if let Ok(p) = ctx.presentation("presentation") {
                match ctx.vec_param("point") {
                    Err(e) => diags.push(e.to_string()),
                    Ok(pt) if pt.len() != p.arity() => {
                        diags.push(format!("point length {} != arity {}", pt.len(), p.arity()))
                    }
                    _ => {}
                }
            }
        }
        "orbit" | "compare" => {
            for key in ["psi", "phi"] {
                if s.kind == "orbit" {
                    if let Err(e) = ctx.presentation(key) {
                        diags.push(e.to_string());
                    }
                }
            }
            if s.kind == "compare" {
                for key in ["psi1", "phi1", "psi2", "phi2"] {
                    if let Err(e) = ctx.presentation(key) {
                        diags.push(e.to_string());
                    }
                }
                let sandwich = ctx.param("sandwich").and_then(Value::as_bool).unwrap_or(false);
                if sandwich && ctx.seed().is_none() {
                    diags.push("sandwich runs draw random interpolations: a seed is required".into());
                }
            }
            if ctx.param("mode").is_some() && ctx.str_param("mode").is_none() {
                diags.push("param \"mode\" must be a string".into());
            }
        }
        "recurse" => {
            if s.inputs.contains_key("automaton") {
                // probe shape: check the large-base stability threshold
                match probe_setup(ctx) {
                    Err(e) => diags.push(e.to_string()),
                    Ok((_, ext, t, c)) => {
                        let m = ext.psi_pres.components().max(ext.phi_pres.components()) as f64;
                        let delta = ext.delta;
                        let log_m = m.ln() / t.get().ln();
                        let log_c = c.ln() / t.get().ln();
                        if ext.mu * delta + 2.0 * log_m >= delta {
                            diags.push(format!(
                                "t violates the stability threshold: need mu*delta + 2 log_t M < delta, got {} + {} >= {delta}",
                                ext.mu * delta,
                                2.0 * log_m
                            ));
                        }
                        if log_c > delta / 2.0 {
                            diags.push("log_t C exceeds delta/2".into());
                        }
                        if ctx.seed().is_none() {
                            diags.push("probe initials are random: a seed is required".into());
                        }
                    }
                }
            } else {
                if let Err(e) = ctx.presentation("presentation") {
                    diags.push(e.to_string());
                }
                if let Err(e) = ctx.vec_param("initials") {
                    diags.push(e.to_string());
                }
            }
        }
        "pde" => match pde_setup(ctx) {
            Err(e) => diags.push(e.to_string()),
            Ok(setup) => {
                // tau conditions without solving
                match pde::solver::window_constants(&setup.f, &setup.g, setup.t, setup.window) {
                    Err(e) => diags.push(e.to_string()),
                    Ok(c) => {
                        let tau_max =
                            (0.5 / c.lipschitz).min(setup.window.q / c.drift_sup).min(0.25 / c.deriv_bound);
                        if setup.h > tau_max {
                            diags.push(format!(
                                "h = {} exceeds the admissible Picard square size {tau_max}",
                                setup.h
                            ));
                        }
                    }
                }
            }
        },
        "refine" => {
            if let Err(e) = ctx.automaton("automaton") {
                diags.push(e.to_string());
            }
            match ctx.f64_param("delta") {
                Err(e) => diags.push(e.to_string()),
                Ok(d) => {
                    let n = 1.0 / d;
                    if !(d > 0.0 && (n - n.round()).abs() < 1e-12 && n >= 2.0) {
                        diags.push(format!("1/delta must be an integer >= 2, got delta = {d}"));
                    }
                }
            }
        }
        other => diags.push(format!("unknown scenario kind {other:?}")),
    }
    diags
}

fn report_lines(name: &str, rep: &BoundReport) -> String {
    format!(
        "{name:<24} lhs {:<22} bound {:<22} margin {:<22} at {:?} {}\n",
        fmt_f64(rep.worst_lhs),
        fmt_f64(rep.bound_rhs),
        fmt_f64(rep.margin),
        rep.location,
        if rep.pass { "PASS" } else { "FAIL" }
    )
}

fn mode_of(s: Option<&str>) -> Result<Mode, RunError> {
    match s.unwrap_or("rational-log") {
        "pl" => Ok(Mode::Pl),
        "dequantized" => Ok(Mode::Dequantized),
        "rational-log" => Ok(Mode::RationalLog),
        other => Err(RunError::Fail(format!("unknown mode {other:?}"))),
    }
}

fn grid_csv(grid: &dynamics::OrbitGrid) -> String {
    let mut out = String::from("i,j,x,y\n");
    for (j, row) in grid.x.iter().enumerate() {
        for (i, x) in row.iter().enumerate() {
            let y = grid
                .y
                .get(j)
                .and_then(|r| r.get(i))
                .copied()
                .map(fmt_f64)
                .unwrap_or_default();
            let _ = writeln!(out, "{i},{j},{},{y}", fmt_f64(*x));
        }
    }
    out
}

pub fn run_scenario(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    let diags = validate(ctx);
    if !diags.is_empty() {
        return Err(RunError::Fail(diags.join("; ")));
    }
    match ctx.scenario.kind.as_str() {
        "eval" => run_eval(ctx, sink),
        "orbit" => run_orbit(ctx, sink),
        "compare" => run_compare(ctx, sink),
        "recurse" => run_recurse(ctx, sink),
        "pde" => run_pde(ctx, sink),
        "refine" => run_refine(ctx, sink),
        other => Err(RunError::Fail(format!("unknown scenario kind {other:?}"))),
    }
}

fn run_eval(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    let pres = ctx.presentation("presentation")?;
    let point = ctx.vec_param("point")?;
    let mode = ctx.str_param("mode").unwrap_or("maxplus");
    let value = match mode {
        "maxplus" => pres.eval_maxplus(&point)?,
        "dequantized" => {
            let t = ctx.t_param()?.ok_or_else(|| RunError::Fail("dequantized mode needs t".into()))?;
            pres.eval_dequantized(t, &point)?
        }
        "linear" => {
            let t = ctx.t_param()?.ok_or_else(|| RunError::Fail("linear mode needs t".into()))?;
            pres.eval_rational(t, &point, RationalMode::Linear)?
        }
        "log" => {
            let t = ctx.t_param()?.ok_or_else(|| RunError::Fail("log mode needs t".into()))?;
            pres.eval_rational(t, &point, RationalMode::Log)?
        }
        other => return Err(RunError::Fail(format!("unknown eval mode {other:?}"))),
    };
    sink.write("result.txt", format!("{}\n", fmt_f64(value)).as_bytes())?;
    sink.summary.insert("value".into(), serde_json::json!(value));
    Ok(true)
}

fn run_orbit(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    let psi = ctx.presentation("psi")?;
    let phi = ctx.presentation("phi")?;
    let mode = mode_of(ctx.str_param("mode"))?;
    let t = ctx.t_param()?;
    let x_init = ctx.vec_param("x_init")?;
    let y_init = ctx.vec_param("y_init")?;
    let i_extent = ctx.usize_param("i_extent")?;
    let j_extent = ctx.usize_param("j_extent")?;
    let grid = dynamics::run(&psi, &phi, t, &x_init, &y_init, i_extent, j_extent, mode)?;
    sink.write("grid.csv", grid_csv(&grid).as_bytes())?;
    sink.write_gnuplot("grid.csv", "orbit", "1:3")?;
    Ok(true)
}

fn run_compare(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    let psi1 = ctx.presentation("psi1")?;
    let phi1 = ctx.presentation("phi1")?;
    let psi2 = ctx.presentation("psi2")?;
    let phi2 = ctx.presentation("phi2")?;
    let t = ctx
        .t_param()?
        .ok_or_else(|| RunError::Fail("compare requires t".into()))?;
    let x_init = ctx.vec_param("x_init")?;
    let y_init = ctx.vec_param("y_init")?;
    let i_extent = ctx.usize_param("i_extent")?;
    let j_extent = ctx.usize_param("j_extent")?;
    let sandwich = ctx.param("sandwich").and_then(Value::as_bool).unwrap_or(false);
    let g1 = if sandwich {
        let seed = ctx
            .seed()
            .ok_or_else(|| RunError::Fail("sandwich runs require a seed".into()))?;
        dynamics::sandwich_run(&psi1, &psi2, &phi1, &phi2, t, &x_init, &y_init, i_extent, j_extent, seed)?
    } else {
        dynamics::run(&psi1, &phi1, Some(t), &x_init, &y_init, i_extent, j_extent, Mode::RationalLog)?
    };
    let g2 = dynamics::run(&psi2, &phi2, Some(t), &x_init, &y_init, i_extent, j_extent, Mode::RationalLog)?;
    let stats = [psi1.stats(), phi1.stats(), psi2.stats(), phi2.stats()];
    let c = ctx.f64_param_or("c", stats.iter().map(|s| s.lipschitz).fold(0.0, f64::max))?;
    let m = ctx
        .param("M")
        .and_then(Value::as_u64)
        .map(|v| v as u128)
        .unwrap_or_else(|| stats.iter().map(|s| s.components).max().unwrap());
    let gamma = psi1.arity().max(phi1.arity()) - 2;
    let rate = ctx.f64_param_or("rate", 1.0)?;
    let multiplier = ctx.param("multiplier").and_then(Value::as_u64).unwrap_or(2) as u32;
    let report = dynamics::check_comparison(&g1, &g2, m, c, gamma, rate, multiplier)?;
    sink.write("grid1.csv", grid_csv(&g1).as_bytes())?;
    sink.write("grid2.csv", grid_csv(&g2).as_bytes())?;
    sink.write_json("report.json", &report)?;
    sink.write("report.txt", report_lines("comparison", &report).as_bytes())?;
    sink.summary.insert("margin".into(), serde_json::json!(report.margin));
    sink.summary.insert("pass".into(), serde_json::json!(report.pass));
    Ok(report.pass)
}

type ProbeSetup = (AutomatonSpec, extensions::StableExtension, TropicalParam, f64);

fn probe_setup(ctx: &Ctx) -> Result<ProbeSetup, RunError> {
    let ext_name = ctx
        .str_param("extension")
        .ok_or_else(|| RunError::Fail("probe needs param \"extension\"".into()))?;
    let (a, ext, _) = extensions::builtin_extension(ext_name)?;
    let t = ctx
        .t_param()?
        .ok_or_else(|| RunError::Fail("probe requires t".into()))?;
    let c = ctx.f64_param_or("C", 2.0)?;
    Ok((a, ext, t, c))
}

fn run_recurse(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    if ctx.scenario.inputs.contains_key("automaton") {
        let (a, ext, t, c) = probe_setup(ctx)?;
        let state_word: Vec<usize> = ctx
            .vec_param("state_word")?
            .into_iter()
            .map(|v| v as usize)
            .collect();
        let level = ctx.usize_param("level")?;
        let columns = ctx.usize_param("columns")?;
        let seed = ctx
            .seed()
            .ok_or_else(|| RunError::Fail("probe requires a seed".into()))?;
        let out = dynamics::quasi_recursivity_probe(&ext, &a, &state_word, t, c, level, columns, seed)?;
        sink.write_json("probe.json", &out.report)?;
        let mut txt = format!("period p = {}\n", out.period);
        txt.push_str(&report_lines("C^4 ratio bound", &out.report));
        sink.write("probe.txt", txt.as_bytes())?;
        sink.summary.insert("p".into(), serde_json::json!(out.period as u64));
        sink.summary.insert("pass".into(), serde_json::json!(out.report.pass));
        return Ok(out.report.pass);
    }
    let pres = ctx.presentation("presentation")?;
    let initials = ctx.vec_param("initials")?;
    if initials.len() != pres.arity() {
        return Err(RunError::Fail("initials must match the recursion arity".into()));
    }
    let steps = ctx.usize_param("steps")?;
    let c = ctx.f64_param("C")?;
    let p_max = ctx.usize_param("p_max")?;
    let t = ctx.t_param()?.unwrap_or(TropicalParam::new(10.0)?);
    let mut series = initials;
    for _ in 0..steps {
        let n = series.len();
        let window: Vec<f64> = series[n - pres.arity()..].to_vec();
        series.push(pres.eval_rational(t, &window, RationalMode::Linear)?);
    }
    let qp = dynamics::detect_quasi_period(&[series.clone()], c, p_max)?;
    let mut csv = String::from("n,z\n");
    for (n, z) in series.iter().enumerate() {
        let _ = writeln!(csv, "{n},{}", fmt_f64(*z));
    }
    sink.write("orbit.csv", csv.as_bytes())?;
    sink.write_gnuplot("orbit.csv", "recursion orbit", "1:2")?;
    match qp {
        Some(qp) => {
            sink.write_json("recurse.json", &qp)?;
            sink.write(
                "recurse.txt",
                format!("p={} max_ratio={}\n", qp.p, fmt_f64(qp.max_ratio)).as_bytes(),
            )?;
            sink.summary.insert("p".into(), serde_json::json!(qp.p));
            Ok(true)
        }
        None => {
            sink.write("recurse.txt", b"no quasi-period found\n")?;
            sink.summary.insert("p".into(), Value::Null);
            Ok(false)
        }
    }
}

struct PdeSetup {
    f: MaxPlusPresentation,
    g: MaxPlusPresentation,
    t: TropicalParam,
    window: pde::SelfDynamicsWindow,
    u0: Vec<f64>,
    v0: Vec<f64>,
    h: f64,
    tol: f64,
    max_iters: usize,
}

fn edge_values(spec: &Value, n: usize, h: f64) -> Result<Vec<f64>, RunError> {
    if let Some(c) = spec.get("const").and_then(Value::as_f64) {
        return Ok(vec![c; n + 1]);
    }
    if let Some(vals) = spec.get("values").and_then(Value::as_array) {
        let out: Option<Vec<f64>> = vals.iter().map(Value::as_f64).collect();
        let out = out.ok_or_else(|| RunError::Fail("edge values must be numbers".into()))?;
        if out.len() != n + 1 {
            return Err(RunError::Fail(format!("edge needs {} values, got {}", n + 1, out.len())));
        }
        return Ok(out);
    }
    if let Some(sine) = spec.get("sine") {
        let base = sine.get("base").and_then(Value::as_f64).unwrap_or(1.0);
        let amp = sine.get("amp").and_then(Value::as_f64).unwrap_or(0.0);
        let freq = sine.get("freq").and_then(Value::as_f64).unwrap_or(1.0);
        return Ok((0..=n).map(|i| base + amp * (freq * i as f64 * h).sin()).collect());
    }
    Err(RunError::Fail("edge spec must carry const, values or sine".into()))
}

fn pde_setup(ctx: &Ctx) -> Result<PdeSetup, RunError> {
    let f = ctx.presentation("f")?;
    let g = ctx.presentation("g")?;
    let t = ctx
        .t_param()?
        .ok_or_else(|| RunError::Fail("pde requires t".into()))?;
    let window = pde::SelfDynamicsWindow::new(
        ctx.f64_param("r")?,
        ctx.f64_param("R")?,
        ctx.f64_param("q")?,
    )?;
    let h = ctx.f64_param("h")?;
    let x_extent = ctx.f64_param("X")?;
    let s_extent = ctx.f64_param("S")?;
    let nx = (x_extent / h).round() as usize;
    let ns = (s_extent / h).round() as usize;
    let u0 = edge_values(
        ctx.param("u0").ok_or_else(|| RunError::Fail("missing param \"u0\"".into()))?,
        nx,
        h,
    )?;
    let v0 = edge_values(
        ctx.param("v0").ok_or_else(|| RunError::Fail("missing param \"v0\"".into()))?,
        ns,
        h,
    )?;
    Ok(PdeSetup {
        f,
        g,
        t,
        window,
        u0,
        v0,
        h,
        tol: ctx.f64_param_or("tol", 1e-12)?,
        max_iters: ctx.param("max_iters").and_then(Value::as_u64).unwrap_or(80) as usize,
    })
}

fn run_pde(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    let s = pde_setup(ctx)?;
    let sol = pde::solve(&s.f, &s.g, s.t, s.window, &s.u0, &s.v0, s.h, s.tol, s.max_iters)?;
    let (ru, rv) = pde::residual(&sol, &s.f, &s.g, s.t)?;
    let mut csv = String::from("x,s,u,v\n");
    for ix in 0..=sol.nx() {
        for is in 0..=sol.ns() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt_f64(ix as f64 * sol.h),
                fmt_f64(is as f64 * sol.h),
                fmt_f64(sol.u[ix][is]),
                fmt_f64(sol.v[ix][is])
            );
        }
    }
    sink.write("solution.csv", csv.as_bytes())?;
    sink.write_gnuplot("solution.csv", "u(x, s)", "1:2:3")?;
    #[derive(serde::Serialize)]
    struct Diag<'a> {
        constants: &'a pde::WindowConstants,
        tau: f64,
        h: f64,
        tol: f64,
        residual_tolerance: f64,
        square_iterations: &'a [usize],
        max_contraction: f64,
        residual_u: f64,
        residual_v: f64,
    }
    sink.write_json(
        "diagnostics.json",
        &Diag {
            constants: &sol.constants,
            tau: sol.tau,
            h: sol.h,
            tol: sol.diagnostics.tol,
            residual_tolerance: sol.diagnostics.residual_tolerance,
            square_iterations: &sol.diagnostics.square_iterations,
            max_contraction: sol.diagnostics.max_contraction,
            residual_u: ru,
            residual_v: rv,
        },
    )?;
    let mut pass = true;
    let mut txt = String::new();
    if let Ok(reports) = pde::energy_report(&sol, &s.f, &s.g, s.t) {
        for lr in reports {
            match lr.report {
                Some(rep) => {
                    pass &= rep.pass;
                    txt.push_str(&report_lines(lr.name, &rep));
                }
                None => {
                    let _ = writeln!(txt, "{:<24} not applicable", lr.name);
                }
            }
        }
    }
    sink.write("energy.txt", txt.as_bytes())?;
    sink.summary.insert("residual_u".into(), serde_json::json!(ru));
    sink.summary.insert("residual_v".into(), serde_json::json!(rv));
    sink.summary.insert("tau".into(), serde_json::json!(sol.tau));
    Ok(pass)
}

fn run_refine(ctx: &Ctx, sink: &mut ArtifactSink) -> Result<bool, RunError> {
    let a = ctx.automaton("automaton")?;
    let delta = ctx.f64_param("delta")?;
    let max_len = ctx.usize_param("max_len")?;
    let r = extensions::build_refinement_2alphabet(&a, delta)?;
    let check = extensions::verify_refinement(&r, &a, max_len)?;
    sink.write_json("refine.json", &check.report)?;
    let mut txt = report_lines("lattice deviation", &check.report);
    let _ = writeln!(
        txt,
        "subdivision N = {}, epsilon = {}, max path step = {}, scenarios = {}",
        r.subdivision,
        fmt_f64(r.epsilon),
        fmt_f64(check.max_path_step),
        check.scenarios
    );
    sink.write("refine.txt", txt.as_bytes())?;
    sink.summary.insert("pass".into(), serde_json::json!(check.report.pass));
    Ok(check.report.pass)
}
