//! Energy estimates, higher distortion, admissibility and the asymptotic
//! comparison for grid solutions.

use super::drift;
use super::solver::GridSolution;
use crate::dynamics::{bound_p, BoundReport};
use crate::error::{Error, Result};
use crate::presentation::{MaxPlusPresentation, TropicalParam};

/// A named bound report; `report` is None when the check's precondition
/// does not hold (reported as not-applicable, never an error).
#[derive(Debug, Clone)]
pub struct LabeledReport {
    pub name: &'static str,
    pub report: Option<BoundReport>,
}

fn centered_x(field: &[Vec<f64>], ix: usize, is: usize, h: f64) -> f64 {
    let nx = field.len() - 1;
    if ix == 0 {
        (field[1][is] - field[0][is]) / h
    } else if ix == nx {
        (field[nx][is] - field[nx - 1][is]) / h
    } else {
        (field[ix + 1][is] - field[ix - 1][is]) / (2.0 * h)
    }
}

fn centered_s(field: &[Vec<f64>], ix: usize, is: usize, h: f64) -> f64 {
    let ns = field[0].len() - 1;
    if is == 0 {
        (field[ix][1] - field[ix][0]) / h
    } else if is == ns {
        (field[ix][ns] - field[ix][ns - 1]) / h
    } else {
        (field[ix][is + 1] - field[ix][is - 1]) / (2.0 * h)
    }
}

struct Worst {
    lhs: f64,
    rhs: f64,
    loc: (usize, usize),
    some: bool,
}

impl Worst {
    fn new() -> Self {
        Worst { lhs: 0.0, rhs: 0.0, loc: (0, 0), some: false }
    }

    fn feed(&mut self, lhs: f64, rhs: f64, loc: (usize, usize)) {
        if !self.some || rhs - lhs < self.rhs - self.lhs {
            *self = Worst { lhs, rhs, loc, some: true };
        }
    }

    fn report(self) -> BoundReport {
        if !self.some {
            return BoundReport::trivial_pass();
        }
        let margin = self.rhs - self.lhs;
        BoundReport {
            worst_lhs: self.lhs,
            bound_rhs: self.rhs,
            margin,
            location: self.loc,
            pass: margin >= -1e-9,
        }
    }
}

/// The two-sided Gronwall envelope on |w| for -a w - b <= w' <= -c w + b:
/// lower max(0, |w0| e^(-a s) - (b/a)(1 - e^(-a s))), upper
/// |w0| e^(-c s) + (b/c)(1 - e^(-c s)). The upper side decays at rate c
/// (the corrected direction), the lower at rate a.
pub fn gronwall_envelope(w0_abs: f64, a: f64, c: f64, b: f64, s: f64) -> (f64, f64) {
    let lower = (w0_abs * (-a * s).exp() - b / a * (1.0 - (-a * s).exp())).max(0.0);
    let upper = w0_abs * (-c * s).exp() + b / c * (1.0 - (-c * s).exp());
    (lower, upper)
}

/// Energy reports: (i) the stripe bounds 2^(s/tau) (A + 2D) on u_x and
/// 2^(x/tau) (A + 2D) on v_s, (ii) |u_s|, |v_x| <= D, and (iii) when the
/// drift derivatives are negative on the window, the Gronwall envelope
/// bracketing |u_x| and |v_s|. Derivatives are measured by centered
/// differences on the solved grid; each bound carries the discretization
/// allowance declared in the diagnostics.
pub fn energy_report(
    sol: &GridSolution,
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
) -> Result<Vec<LabeledReport>> {
    let h = sol.h;
    let nx = sol.nx();
    let ns = sol.ns();
    let d_const = sol.constants.drift_sup;
    let allow = sol.diagnostics.residual_tolerance;
    let a_initial = sol.constants.initial_c1;
    let amp = a_initial + 2.0 * d_const;

    let mut stripe_u = Worst::new();
    let mut stripe_v = Worst::new();
    let mut slope_u = Worst::new();
    let mut slope_v = Worst::new();
    for ix in 0..=nx {
        for is in 0..=ns {
            let ux = centered_x(&sol.u, ix, is, h).abs();
            let vs = centered_s(&sol.v, ix, is, h).abs();
            let us = centered_s(&sol.u, ix, is, h).abs();
            let vx = centered_x(&sol.v, ix, is, h).abs();
            let s_val = is as f64 * h;
            let x_val = ix as f64 * h;
            stripe_u.feed(ux, (s_val / sol.tau).exp2() * amp + allow, (ix, is));
            stripe_v.feed(vs, (x_val / sol.tau).exp2() * amp + allow, (ix, is));
            slope_u.feed(us, d_const + allow, (ix, is));
            slope_v.feed(vx, d_const + allow, (ix, is));
        }
    }

    // negativity rates for the envelope: f_u - 1 in [-a_f, -c_f] etc.
    let n = 200;
    let (r, big_r) = (sol.window.r, sol.window.big_r);
    let mut fu_min = f64::INFINITY;
    let mut fu_max = f64::NEG_INFINITY;
    let mut gv_min = f64::INFINITY;
    let mut gv_max = f64::NEG_INFINITY;
    for i in 0..n {
        let v = r + (big_r - r) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let u = r + (big_r - r) * j as f64 / (n - 1) as f64;
            let fu = f.rational_gradient(t, &[v, u])?[1];
            let gv = g.rational_gradient(t, &[v, u])?[0];
            fu_min = fu_min.min(fu);
            fu_max = fu_max.max(fu);
            gv_min = gv_min.min(gv);
            gv_max = gv_max.max(gv);
        }
    }
    let env_u = if fu_max < 1.0 {
        let a = 1.0 - fu_min;
        let c = 1.0 - fu_max;
        let b = sol.constants.cross_f;
        let mut w = Worst::new();
        for ix in 0..=nx {
            let w0 = centered_x(&sol.u, ix, 0, h).abs();
            for is in 0..=ns {
                let s_val = is as f64 * h;
                let (lo, hi) = gronwall_envelope(w0, a, c, b, s_val);
                let ux = centered_x(&sol.u, ix, is, h).abs();
                // bracketing: both sides must hold
                w.feed(ux, hi + allow, (ix, is));
                w.feed(lo, ux + allow, (ix, is));
            }
        }
        Some(w.report())
    } else {
        None
    };
    let env_v = if gv_max < 1.0 {
        let a = 1.0 - gv_min;
        let c = 1.0 - gv_max;
        let b = sol.constants.cross_g;
        let mut w = Worst::new();
        for is in 0..=ns {
            let w0 = centered_s(&sol.v, 0, is, h).abs();
            for ix in 0..=nx {
                let x_val = ix as f64 * h;
                let (lo, hi) = gronwall_envelope(w0, a, c, b, x_val);
                let vs = centered_s(&sol.v, ix, is, h).abs();
                w.feed(vs, hi + allow, (ix, is));
                w.feed(lo, vs + allow, (ix, is));
            }
        }
        Some(w.report())
    } else {
        None
    };

    Ok(vec![
        LabeledReport { name: "stripe_u_x", report: Some(stripe_u.report()) },
        LabeledReport { name: "stripe_v_s", report: Some(stripe_v.report()) },
        LabeledReport { name: "u_s_vs_D", report: Some(slope_u.report()) },
        LabeledReport { name: "v_x_vs_D", report: Some(slope_v.report()) },
        LabeledReport { name: "envelope_u_x", report: env_u },
        LabeledReport { name: "envelope_v_s", report: env_v },
    ])
}

/// Second derivatives through the analytic identities
///   u_ss = (f - u)(f_u - 1) + f_v v_s,
///   v_xx = (g - v)(g_v - 1) + g_u u_x.
fn second_derivatives(
    sol: &GridSolution,
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let nx = sol.nx();
    let ns = sol.ns();
    let h = sol.h;
    let mut uss = vec![vec![0.0f64; ns + 1]; nx + 1];
    let mut vxx = vec![vec![0.0f64; ns + 1]; nx + 1];
    for ix in 0..=nx {
        for is in 0..=ns {
            let point = [sol.v[ix][is], sol.u[ix][is]];
            let fd = drift(f, t, &point, sol.u[ix][is])?;
            let gd = drift(g, t, &point, sol.v[ix][is])?;
            let gf = f.rational_gradient(t, &point)?;
            let gg = g.rational_gradient(t, &point)?;
            let vs = centered_s(&sol.v, ix, is, h);
            let ux = centered_x(&sol.u, ix, is, h);
            uss[ix][is] = fd * (gf[1] - 1.0) + gf[0] * vs;
            vxx[ix][is] = gd * (gg[0] - 1.0) + gg[1] * ux;
        }
    }
    Ok((uss, vxx))
}

/// Higher distortion K(u, v): sup over the grid of
///   sup_{sigma in [s, s+1]} |u_ss(x, sigma)| / u(x, s+1)  and
///   sup_{xi in [x, x+1]} |v_xx(xi, s)| / v(x+1, s)
/// with the unit windows taken as grid sups.
pub fn higher_distortion(
    sol: &GridSolution,
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
) -> Result<f64> {
    let n1 = (1.0 / sol.h).round() as usize;
    let nx = sol.nx();
    let ns = sol.ns();
    if nx < n1 || ns < n1 {
        return Err(Error::Input("grid must cover unit shifts (X, S >= 1)".into()));
    }
    let (uss, vxx) = second_derivatives(sol, f, g, t)?;
    let mut k: f64 = 0.0;
    for ix in 0..=nx {
        for is in 0..=(ns - n1) {
            let num = (is..=is + n1).map(|j| uss[ix][j].abs()).fold(0.0, f64::max);
            let den = sol.u[ix][is + n1];
            if den < 1e-12 {
                return Err(Error::Domain("vanishing shifted field".into()));
            }
            k = k.max(num / den);
        }
    }
    for is in 0..=ns {
        for ix in 0..=(nx - n1) {
            let num = (ix..=ix + n1).map(|i| vxx[i][is].abs()).fold(0.0, f64::max);
            let den = sol.v[ix + n1][is];
            if den < 1e-12 {
                return Err(Error::Domain("vanishing shifted field".into()));
            }
            k = k.max(num / den);
        }
    }
    Ok(k)
}

/// Admissibility: at every node,
///   |(f-u)(f_u - 1)| + |v_s f_v| < (2 - mu) inf_{a in [0,1]} u(x, s+a)
/// and the v-analogue, with the infimum taken as the grid minimum over the
/// unit window.
pub fn admissibility_check(
    sol: &GridSolution,
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
    mu: f64,
) -> Result<BoundReport> {
    let n1 = (1.0 / sol.h).round() as usize;
    let nx = sol.nx();
    let ns = sol.ns();
    if nx < n1 || ns < n1 {
        return Err(Error::Input("grid must cover unit shifts (X, S >= 1)".into()));
    }
    let h = sol.h;
    let mut worst = Worst::new();
    for ix in 0..=nx {
        for is in 0..=(ns - n1) {
            let point = [sol.v[ix][is], sol.u[ix][is]];
            let fd = drift(f, t, &point, sol.u[ix][is])?;
            let gf = f.rational_gradient(t, &point)?;
            let vs = centered_s(&sol.v, ix, is, h);
            let lhs = (fd * (gf[1] - 1.0)).abs() + (vs * gf[0]).abs();
            let inf = (is..=is + n1).map(|j| sol.u[ix][j]).fold(f64::INFINITY, f64::min);
            worst.feed(lhs, (2.0 - mu) * inf, (ix, is));
        }
    }
    for is in 0..=ns {
        for ix in 0..=(nx - n1) {
            let point = [sol.v[ix][is], sol.u[ix][is]];
            let gd = drift(g, t, &point, sol.v[ix][is])?;
            let gg = g.rational_gradient(t, &point)?;
            let ux = centered_x(&sol.u, ix, is, h);
            let lhs = (gd * (gg[0] - 1.0)).abs() + (ux * gg[1]).abs();
            let inf = (ix..=ix + n1).map(|i| sol.v[i][is]).fold(f64::INFINITY, f64::min);
            worst.feed(lhs, (2.0 - mu) * inf, (ix, is));
        }
    }
    Ok(worst.report())
}

/// The asymptotic two-sided ratio bound between two solutions:
///   (u1/u2)^(+-1) <= (N0 M)^(6 P_(x + s(gamma+1))(c)) * rate^(ctilde^(x + s(gamma+1) + 1))
/// checked in log space at every node. With c < 1 the recorded bound is
/// the uniform limiting constant, returned alongside the report.
pub fn asymptotic_compare(
    sol1: &GridSolution,
    sol2: &GridSolution,
    m: u128,
    c: f64,
    gamma: usize,
    n0: u128,
    rate: f64,
) -> Result<(BoundReport, Option<f64>)> {
    if sol1.nx() != sol2.nx() || sol1.ns() != sol2.ns() || (sol1.h - sol2.h).abs() > 1e-15 {
        return Err(Error::Input("solutions live on different lattices".into()));
    }
    let ln_nm = ((n0 as f64) * (m as f64)).ln();
    let ln_rate = rate.ln();
    let ctilde = c.max(1.0);
    let g1 = (gamma + 1) as f64;
    let h = sol1.h;
    let limiting = if c < 1.0 {
        Some((6.0 / (1.0 - c) * ln_nm + ln_rate).exp())
    } else {
        None
    };
    let mut worst = Worst::new();
    for ix in 0..=sol1.nx() {
        for is in 0..=sol1.ns() {
            let idx = ix as f64 * h + is as f64 * h * g1;
            let rhs = if c < 1.0 {
                6.0 / (1.0 - c) * ln_nm + ln_rate
            } else {
                6.0 * bound_p(idx, c) * ln_nm + ctilde.powf(idx + 1.0) * ln_rate
            };
            let lu = (sol1.u[ix][is].ln() - sol2.u[ix][is].ln()).abs();
            let lv = (sol1.v[ix][is].ln() - sol2.v[ix][is].ln()).abs();
            worst.feed(lu.max(lv), rhs, (ix, is));
        }
    }
    Ok((worst.report(), limiting))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{logistic_pair, solve, SelfDynamicsWindow};

    fn example_solution(perturb: f64) -> (GridSolution, MaxPlusPresentation, MaxPlusPresentation, TropicalParam) {
        let (f, g) = logistic_pair(2).unwrap();
        let t = TropicalParam::new(10.0).unwrap();
        let w = SelfDynamicsWindow::new(0.5, 1.5, 0.1).unwrap();
        let h = 1.0 / 16.0;
        let n = (3.0 / h) as usize;
        let u0: Vec<f64> = (0..=n).map(|i| 1.0 + perturb * (i as f64 * h).sin()).collect();
        let v0 = vec![1.0; n + 1];
        let sol = solve(&f, &g, t, w, &u0, &v0, h, 1e-12, 80).unwrap();
        (sol, f, g, t)
    }

    #[test]
    fn constant_solution_energy_all_pass() {
        let (sol, f, g, t) = example_solution(0.0);
        for lr in energy_report(&sol, &f, &g, t).unwrap() {
            let rep = lr.report.expect(lr.name);
            assert!(rep.pass, "{}: {rep:?}", lr.name);
        }
    }

    #[test]
    fn perturbed_energy_envelope_brackets() {
        let (sol, f, g, t) = example_solution(0.3);
        let reports = energy_report(&sol, &f, &g, t).unwrap();
        for lr in &reports {
            let rep = lr.report.as_ref().expect(lr.name);
            assert!(rep.pass, "{}: {rep:?}", lr.name);
        }
    }

    #[test]
    fn gronwall_kernel_degenerate() {
        // a = c = 1, b = 0, w0 = 1: both envelope ends equal exp(-s)
        for s in [0.0, 0.5, 1.3, 4.0] {
            let (lo, hi) = gronwall_envelope(1.0, 1.0, 1.0, 0.0, s);
            assert!((lo - (-s).exp()).abs() < 1e-12);
            assert!((hi - (-s).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_solution_distortion_zero() {
        let (sol, f, g, t) = example_solution(0.0);
        let k = higher_distortion(&sol, &f, &g, t).unwrap();
        assert!(k.abs() < 1e-10, "K = {k}");
    }

    #[test]
    fn distortion_matches_finite_differences() {
        let (sol, f, g, t) = example_solution(0.3);
        let (uss, _) = second_derivatives(&sol, &f, &g, t).unwrap();
        // compare against direct second differences in the interior
        let h = sol.h;
        let mut worst_rel: f64 = 0.0;
        for ix in 2..sol.nx() - 1 {
            for is in 2..sol.ns() - 1 {
                let fd =
                    (sol.u[ix][is + 1] - 2.0 * sol.u[ix][is] + sol.u[ix][is - 1]) / (h * h);
                let scale = uss[ix][is].abs().max(0.05);
                worst_rel = worst_rel.max((uss[ix][is] - fd).abs() / scale);
            }
        }
        assert!(worst_rel < 0.05, "relative mismatch {worst_rel}");
    }

    #[test]
    fn admissibility_logistic_passes_and_planted_fails() {
        let (sol, f, g, t) = example_solution(0.2);
        let rep = admissibility_check(&sol, &f, &g, t, 0.1).unwrap();
        assert!(rep.pass, "{rep:?}");
        // planted violation on the sqrt pair: scaling u down by 1e3 drives
        // (f_u - 1) far from the admissible band
        let (fs, gs) = crate::pde::sqrt_pair().unwrap();
        let w = SelfDynamicsWindow::new(0.5, 2.0, 0.1).unwrap();
        let h = 1.0 / 16.0;
        let n = (2.0 / h) as usize;
        let edge = vec![1.0; n + 1];
        let sol2 = solve(&fs, &gs, t, w, &edge, &edge, h, 1e-12, 80).unwrap();
        let rep = admissibility_check(&sol2, &fs, &gs, t, 0.1).unwrap();
        assert!(rep.pass, "{rep:?}");
        let mut bad = sol2.clone();
        for col in &mut bad.u {
            for v in col.iter_mut() {
                *v /= 1e3;
            }
        }
        let rep = admissibility_check(&bad, &fs, &gs, t, 0.1).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn asymptotic_identical_solutions() {
        let (sol, f, g, _t) = example_solution(0.2);
        let m = f.components().max(g.components());
        let (rep, _) = asymptotic_compare(&sol, &sol, m, 2.0, 0, 2, 1.0).unwrap();
        assert!(rep.pass && rep.worst_lhs == 0.0);
    }
}
