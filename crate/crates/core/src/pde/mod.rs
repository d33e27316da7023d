//! The hyperbolic Mealy system u_s = f_t(v,u) - u, v_x = g_t(v,u) - v on a
//! rectangle, with epsilon fixed at 1: self-dynamics windows, the Picard
//! solver, residuals, energy estimates, higher distortion, admissibility
//! and the asymptotic comparison.

mod estimates;
pub mod solver;

pub use estimates::{
    admissibility_check, asymptotic_compare, energy_report, gronwall_envelope, higher_distortion,
    LabeledReport,
};
pub use solver::{residual, solve, GridSolution, SolveDiagnostics, WindowConstants};

use crate::error::{Error, Result};
use crate::presentation::{MaxPlusPresentation, TropicalParam};
use serde::{Deserialize, Serialize};

/// A window [r, R] with margin q on which the pair restricts to a
/// self-dynamics: drift at least q below r+q, at most -q above R-q, and
/// |drift| <= R - r throughout.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SelfDynamicsWindow {
    pub r: f64,
    pub big_r: f64,
    pub q: f64,
}

impl SelfDynamicsWindow {
    pub fn new(r: f64, big_r: f64, q: f64) -> Result<Self> {
        if !(0.0 < q && q < r && r < big_r) {
            return Err(Error::Input("window requires 0 < q < r < R".into()));
        }
        Ok(SelfDynamicsWindow { r, big_r, q })
    }
}

/// Drift f_t(a, b) - b of the own variable, computed in the log domain to
/// stay accurate when f_t is close to b and representable for large t.
/// `point` carries the arguments in presentation order.
pub(crate) fn drift(
    pres: &MaxPlusPresentation,
    t: TropicalParam,
    point: &[f64],
    own: f64,
) -> Result<f64> {
    let logs: Vec<f64> = point.iter().map(|z| t.log(*z)).collect();
    let lf = pres.eval_dequantized(t, &logs)?;
    Ok(own * ((lf - t.log(own)) * t.ln()).exp_m1())
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelfDynamicsVerdict {
    Pass,
    Violation { which: &'static str, a: f64, b: f64, drift: f64 },
}

/// Evaluate the three displayed inequalities of the self-dynamics window on
/// a grid x grid lattice over [r, R]^2, with the free variable also swept
/// over neighbouring decades.
pub fn check_self_dynamics(
    f: &MaxPlusPresentation,
    g: &MaxPlusPresentation,
    t: TropicalParam,
    window: SelfDynamicsWindow,
    grid: usize,
) -> Result<SelfDynamicsVerdict> {
    let (r, big_r, q) = (window.r, window.big_r, window.q);
    if grid < 2 {
        return Err(Error::Input("grid must be at least 2".into()));
    }
    let line: Vec<f64> = (0..grid)
        .map(|i| r + (big_r - r) * i as f64 / (grid - 1) as f64)
        .collect();
    // free-variable sweep: the window plus boundary decades
    let mut sweep = line.clone();
    for k in 1..=2 {
        sweep.push(r / (10f64).powi(k));
        sweep.push(big_r * (10f64).powi(k));
    }
    for &b in &line {
        for &a in &sweep {
            // f's own variable is the second argument
            let df = drift(f, t, &[a, b], b)?;
            // g's own variable is the first argument
            let dg = drift(g, t, &[b, a], b)?;
            for (which, d) in [("f", df), ("g", dg)] {
                if b <= r + q + 1e-12 && d < q - 1e-9 {
                    return Ok(SelfDynamicsVerdict::Violation { which, a, b, drift: d });
                }
                if b >= big_r - q - 1e-12 && d > -q + 1e-9 {
                    return Ok(SelfDynamicsVerdict::Violation { which, a, b, drift: d });
                }
                if d.abs() > big_r - r + 1e-9 {
                    return Ok(SelfDynamicsVerdict::Violation { which, a, b, drift: d });
                }
            }
        }
    }
    Ok(SelfDynamicsVerdict::Pass)
}

/// f(v, u) = a u / (1 + u): the workhorse example pair (no t-dependence).
pub fn logistic_pair(a: u128) -> Result<(MaxPlusPresentation, MaxPlusPresentation)> {
    use crate::presentation::{AffineTerm, Rational};
    let zero = Rational::new(0, 1);
    let one = Rational::new(1, 1);
    let f = MaxPlusPresentation::new(
        2,
        vec![AffineTerm::with_weight(0.0, vec![zero, one], a)],
        vec![
            AffineTerm::constant(0.0, 2),
            AffineTerm::new(0.0, vec![zero, one]),
        ],
    )?;
    let g = MaxPlusPresentation::new(
        2,
        vec![AffineTerm::with_weight(0.0, vec![one, zero], a)],
        vec![
            AffineTerm::constant(0.0, 2),
            AffineTerm::new(0.0, vec![one, zero]),
        ],
    )?;
    Ok((f, g))
}

/// f(v, u) = sqrt(u), g(v, u) = sqrt(v): a pair with certified Lipschitz
/// constant 1/2 (used for the contracting comparison tests).
pub fn sqrt_pair() -> Result<(MaxPlusPresentation, MaxPlusPresentation)> {
    use crate::presentation::{AffineTerm, Rational};
    let zero = Rational::new(0, 1);
    let half = Rational::new(1, 2);
    let f = MaxPlusPresentation::new(
        2,
        vec![AffineTerm::new(0.0, vec![zero, half])],
        vec![AffineTerm::constant(0.0, 2)],
    )?;
    let g = MaxPlusPresentation::new(
        2,
        vec![AffineTerm::new(0.0, vec![half, zero])],
        vec![AffineTerm::constant(0.0, 2)],
    )?;
    Ok((f, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_window_passes() {
        let (f, g) = logistic_pair(2).unwrap();
        let t = TropicalParam::new(10.0).unwrap();
        let w = SelfDynamicsWindow::new(0.5, 1.5, 0.1).unwrap();
        assert_eq!(check_self_dynamics(&f, &g, t, w, 40).unwrap(), SelfDynamicsVerdict::Pass);
        // spot values from the window definition
        let d = drift(&f, t, &[1.0, 0.6], 0.6).unwrap();
        assert!((d - 0.15).abs() < 1e-9);
        let d = drift(&f, t, &[1.0, 1.4], 1.4).unwrap();
        assert!((d + 0.2333333333333334).abs() < 1e-9);
    }

    #[test]
    fn identity_drift_fails() {
        // f(v, u) = u has zero drift, below the q = 0.1 requirement
        let f = MaxPlusPresentation::coordinate(2, 1);
        let g = MaxPlusPresentation::coordinate(2, 0);
        let t = TropicalParam::new(10.0).unwrap();
        let w = SelfDynamicsWindow::new(0.5, 1.5, 0.1).unwrap();
        match check_self_dynamics(&f, &g, t, w, 20).unwrap() {
            SelfDynamicsVerdict::Violation { b, .. } => assert!(b <= 0.6 + 1e-9),
            SelfDynamicsVerdict::Pass => panic!("expected a violation"),
        }
    }

    #[test]
    fn scaled_clipped_stairs_window_passes() {
        // A bounded stair (clipped to [L-1, L+1]) has a bounded rational
        // lift; a suitable integer multiple of it restricts to a
        // self-dynamics over an exponential window around t^L.
        use crate::presentation::RationalMode;
        let t = TropicalParam::new(10.0).unwrap();
        let delta = 0.25;
        let l = 1.0;
        let xi = crate::extensions::make_stairs(1, l, delta).unwrap();
        let bounded = MaxPlusPresentation::constant(1, l - 1.0)
            .max2(&xi.min2(&MaxPlusPresentation::constant(1, l + 1.0)).unwrap())
            .unwrap();
        // numeric range of the lift over a wide sweep
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in -40..=40 {
            let z = t.pow(l + i as f64 * 0.1);
            let v = bounded.eval_rational(t, &[z], RationalMode::Linear).unwrap();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let scale = 3u128;
        let f1 = bounded.scale(scale).unwrap();
        let (lo, hi) = (lo * scale as f64, hi * scale as f64);
        let f = f1.substitute(&[MaxPlusPresentation::coordinate(2, 1)]).unwrap();
        let g = f1.substitute(&[MaxPlusPresentation::coordinate(2, 0)]).unwrap();
        let w = SelfDynamicsWindow::new(lo / 2.0, 2.0 * hi, lo / 4.0).unwrap();
        assert_eq!(check_self_dynamics(&f, &g, t, w, 30).unwrap(), SelfDynamicsVerdict::Pass);
    }

    #[test]
    fn positive_drift_below_window() {
        // monotone trap: below r+q the drift is positive,
        // so a solution started there rises.
        let (f, _) = logistic_pair(2).unwrap();
        let t = TropicalParam::new(10.0).unwrap();
        for b in [0.2, 0.35, 0.5, 0.59] {
            let d = drift(&f, t, &[1.0, b], b).unwrap();
            assert!(d > 0.0, "drift at {b} = {d}");
        }
    }
}
