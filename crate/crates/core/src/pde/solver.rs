//! Picard solver for the hyperbolic Mealy system on a rectangle: squares
//! are marched left to right, stripe by stripe upward, with trapezoidal
//! quadrature on the h-lattice inside each square.

use super::{drift, SelfDynamicsWindow};
use crate::error::{Error, Result};
use crate::presentation::{MaxPlusPresentation, TropicalParam};
use serde::{Deserialize, Serialize};

/// Constants measured on the window (200 x 200 evaluation grid) plus the
/// initial C1 norm; every bound check reads them from here.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindowConstants {
    /// D = sup max(|f - u|, |g - v|)
    pub drift_sup: f64,
    /// B = max(||f_u - 1||, ||f_v||, ||g_v - 1||, ||g_u||)
    pub deriv_bound: f64,
    /// Lipschitz bound of the drift fields w.r.t. the sup metric
    pub lipschitz: f64,
    /// A = initial C1 norms (measured with the grid difference operator)
    pub initial_c1: f64,
    /// b = sup |(f_t)_v (g_t - v)|
    pub cross_f: f64,
    /// d = sup |(g_t)_u (f_t - u)|
    pub cross_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub tol: f64,
    pub residual_tolerance: f64,
    pub square_iterations: Vec<usize>,
    pub max_contraction: f64,
    pub squares: (usize, usize),
}

/// Discretized solution of the system on [0, X] x [0, S].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSolution {
    pub h: f64,
    pub tau: f64,
    pub x_extent: f64,
    pub s_extent: f64,
    /// u[ix][is] on the (X/h + 1) x (S/h + 1) lattice.
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub diagnostics: SolveDiagnostics,
    pub constants: WindowConstants,
    pub window: SelfDynamicsWindow,
}

impl GridSolution {
    pub fn nx(&self) -> usize {
        self.u.len() - 1
    }

    pub fn ns(&self) -> usize {
        self.u[0].len() - 1
    }
}

/// Sup norms of the drift fields and the derivative-based constants over
/// the window.
pub fn window_constants(
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
    window: SelfDynamicsWindow,
) -> Result<WindowConstants> {
    let n = 200;
    let (r, big_r) = (window.r, window.big_r);
    let mut drift_sup: f64 = 0.0;
    let mut deriv: f64 = 0.0;
    let mut lip: f64 = 0.0;
    let mut cross_f: f64 = 0.0;
    let mut cross_g: f64 = 0.0;
    for i in 0..n {
        let v = r + (big_r - r) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let u = r + (big_r - r) * j as f64 / (n - 1) as f64;
            let fd = drift(f, t, &[v, u], u)?;
            let gd = drift(g, t, &[v, u], v)?;
            drift_sup = drift_sup.max(fd.abs()).max(gd.abs());
            let gf = f.rational_gradient(t, &[v, u])?;
            let gg = g.rational_gradient(t, &[v, u])?;
            let (f_v, f_u) = (gf[0], gf[1]);
            let (g_v, g_u) = (gg[0], gg[1]);
            deriv = deriv
                .max((f_u - 1.0).abs())
                .max(f_v.abs())
                .max((g_v - 1.0).abs())
                .max(g_u.abs());
            lip = lip.max((f_u - 1.0).abs() + f_v.abs()).max((g_v - 1.0).abs() + g_u.abs());
            cross_f = cross_f.max((f_v * gd).abs());
            cross_g = cross_g.max((g_u * fd).abs());
        }
    }
    Ok(WindowConstants {
        drift_sup,
        deriv_bound: deriv,
        lipschitz: lip,
        initial_c1: 0.0,
        cross_f,
        cross_g,
    })
}

fn edge_derivative_sup(vals: &[f64], h: f64) -> f64 {
    vals.windows(2).map(|w| ((w[1] - w[0]) / h).abs()).fold(0.0, f64::max)
}

/// Solve with initial values u0 on [0, X] x {0} and v0 on {0} x [0, S]
/// (given on the h-lattice). The Picard square size tau is the largest
/// multiple of h satisfying tau Lip <= 1/2, tau <= q/D and tau B <= 1/4.
#[allow(clippy::too_many_arguments)]
pub fn solve(
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
    window: SelfDynamicsWindow,
    u0: &[f64],
    v0: &[f64],
    h: f64,
    tol: f64,
    max_iters: usize,
) -> Result<GridSolution> {
    let (r, big_r, q) = (window.r, window.big_r, window.q);
    if u0.len() < 2 || v0.len() < 2 {
        return Err(Error::Input("initial edges need at least two nodes".into()));
    }
    let inside = |x: f64| x >= r + q - 1e-12 && x <= big_r - q + 1e-12;
    if let Some(bad) = u0.iter().chain(v0).find(|x| !inside(**x)) {
        return Err(Error::Input(format!(
            "initial value {bad} outside [r+q, R-q] = [{}, {}]",
            r + q,
            big_r - q
        )));
    }
    let mut constants = window_constants(f, g, t, window)?;
    constants.initial_c1 = edge_derivative_sup(u0, h).max(edge_derivative_sup(v0, h));
    let lim_lip = 0.5 / constants.lipschitz;
    let lim_d = q / constants.drift_sup;
    let lim_b = 0.25 / constants.deriv_bound;
    let tau_max = lim_lip.min(lim_d).min(lim_b);
    let m = (tau_max / h).floor() as usize;
    if m == 0 {
        let failing = if tau_max == lim_lip {
            "tau * Lip <= 1/2"
        } else if tau_max == lim_d {
            "tau <= q / D"
        } else {
            "tau * B <= 1/4"
        };
        return Err(Error::Input(format!(
            "h = {h} exceeds the admissible square size {tau_max} (condition {failing})"
        )));
    }
    let tau = h * m as f64;
    let nx = u0.len() - 1;
    let ns = v0.len() - 1;
    let mut u = vec![vec![0.0f64; ns + 1]; nx + 1];
    let mut v = vec![vec![0.0f64; ns + 1]; nx + 1];
    for (ix, val) in u0.iter().enumerate() {
        u[ix][0] = *val;
    }
    for (is, val) in v0.iter().enumerate() {
        v[0][is] = *val;
    }
    let stripes = ns.div_ceil(m);
    let cols = nx.div_ceil(m);
    let mut square_iterations = Vec::with_capacity(stripes * cols);
    let mut max_contraction: f64 = 0.0;
    for stripe in 0..stripes {
        let s_lo = stripe * m;
        let s_hi = ((stripe + 1) * m).min(ns);
        for col in 0..cols {
            let x_lo = col * m;
            let x_hi = ((col + 1) * m).min(nx);
            let (iters, contraction) = picard_square(
                f, g, t, &mut u, &mut v, x_lo, x_hi, s_lo, s_hi, h, tol, max_iters,
            )
            .map_err(|e| match e {
                Error::Numerical(msg) => {
                    Error::Numerical(format!("square ({col}, {stripe}): {msg}"))
                }
                other => other,
            })?;
            square_iterations.push(iters);
            max_contraction = max_contraction.max(contraction);
        }
    }
    // range invariance at every node
    for (ix, ucol) in u.iter().enumerate() {
        for (is, val) in ucol.iter().enumerate() {
            if !inside(*val) || !inside(v[ix][is]) {
                return Err(Error::Numerical(format!(
                    "range escape at node ({ix}, {is}): u = {val}, v = {}",
                    v[ix][is]
                )));
            }
        }
    }
    let sol = GridSolution {
        h,
        tau,
        x_extent: nx as f64 * h,
        s_extent: ns as f64 * h,
        u,
        v,
        diagnostics: SolveDiagnostics {
            tol,
            residual_tolerance: 5.0 * h,
            square_iterations,
            max_contraction,
            squares: (cols, stripes),
        },
        constants,
        window,
    };
    if nx >= 2 && ns >= 2 {
        let (ru, rv) = residual(&sol, f, g, t)?;
        if ru > sol.diagnostics.residual_tolerance || rv > sol.diagnostics.residual_tolerance {
            return Err(Error::Numerical(format!(
                "residual ({ru}, {rv}) above the declared tolerance"
            )));
        }
    }
    Ok(sol)
}

/// Picard iteration on one square, with u given along its bottom edge and
/// v along its left edge. Returns (iterations, worst contraction factor).
#[allow(clippy::too_many_arguments)]
fn picard_square(
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
    u: &mut [Vec<f64>],
    v: &mut [Vec<f64>],
    x_lo: usize,
    x_hi: usize,
    s_lo: usize,
    s_hi: usize,
    h: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(usize, f64)> {
    let w = x_hi - x_lo;
    let d = s_hi - s_lo;
    // local fields, indexed [0..=w][0..=d]
    let mut cu = vec![vec![0.0f64; d + 1]; w + 1];
    let mut cv = vec![vec![0.0f64; d + 1]; w + 1];
    for i in 0..=w {
        for j in 0..=d {
            cu[i][j] = u[x_lo + i][s_lo];
            cv[i][j] = v[x_lo][s_lo + j];
        }
    }
    let mut fbar = vec![vec![0.0f64; d + 1]; w + 1];
    let mut gbar = vec![vec![0.0f64; d + 1]; w + 1];
    let mut prev_delta = f64::INFINITY;
    let mut worst_ratio: f64 = 0.0;
    let mut iters = 0usize;
    loop {
        iters += 1;
        for i in 0..=w {
            for j in 0..=d {
                let point = [cv[i][j], cu[i][j]];
                fbar[i][j] = drift(f, t, &point, cu[i][j])?;
                gbar[i][j] = drift(g, t, &point, cv[i][j])?;
            }
        }
        let mut delta: f64 = 0.0;
        // u_(n+1)(x, s) = u(x, s_lo) + integral of fbar over s
        for i in 0..=w {
            let mut acc = 0.0;
            let base = u[x_lo + i][s_lo];
            let old = cu[i][0];
            cu[i][0] = base;
            delta = delta.max((cu[i][0] - old).abs());
            for j in 1..=d {
                acc += 0.5 * h * (fbar[i][j - 1] + fbar[i][j]);
                let next = base + acc;
                delta = delta.max((next - cu[i][j]).abs());
                cu[i][j] = next;
            }
        }
        // v_(n+1)(x, s) = v(x_lo, s) + integral of gbar over x
        for j in 0..=d {
            let mut acc = 0.0;
            let base = v[x_lo][s_lo + j];
            let old = cv[0][j];
            cv[0][j] = base;
            delta = delta.max((cv[0][j] - old).abs());
            for i in 1..=w {
                acc += 0.5 * h * (gbar[i - 1][j] + gbar[i][j]);
                let next = base + acc;
                delta = delta.max((next - cv[i][j]).abs());
                cv[i][j] = next;
            }
        }
        if delta > 1e-13 && prev_delta.is_finite() && prev_delta > 1e-13 {
            worst_ratio = worst_ratio.max(delta / prev_delta);
        }
        if delta <= tol {
            break;
        }
        if iters >= max_iters {
            return Err(Error::Numerical(format!(
                "Picard iteration did not contract below tol (last change {delta})"
            )));
        }
        prev_delta = delta;
    }
    if worst_ratio > 0.5 + 1e-6 {
        return Err(Error::Numerical(format!(
            "contraction factor {worst_ratio} exceeds 1/2"
        )));
    }
    for i in 0..=w {
        for j in 0..=d {
            u[x_lo + i][s_lo + j] = cu[i][j];
            v[x_lo + i][s_lo + j] = cv[i][j];
        }
    }
    Ok((iters, worst_ratio))
}

/// Sup norms of the two equation residuals via centered differences
/// (one-sided at the boundary), excluding the outermost layer.
pub fn residual(
    sol: &GridSolution,
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
) -> Result<(f64, f64)> {
    let nx = sol.nx();
    let ns = sol.ns();
    if nx < 2 || ns < 2 {
        return Err(Error::Input("grid too small for residuals".into()));
    }
    let h = sol.h;
    let mut ru: f64 = 0.0;
    let mut rv: f64 = 0.0;
    for ix in 1..nx {
        for is in 1..ns {
            let point = [sol.v[ix][is], sol.u[ix][is]];
            let us = (sol.u[ix][is + 1] - sol.u[ix][is - 1]) / (2.0 * h);
            let vx = (sol.v[ix + 1][is] - sol.v[ix - 1][is]) / (2.0 * h);
            ru = ru.max((us - drift(f, t, &point, sol.u[ix][is])?).abs());
            rv = rv.max((vx - drift(g, t, &point, sol.v[ix][is])?).abs());
        }
    }
    Ok((ru, rv))
}
