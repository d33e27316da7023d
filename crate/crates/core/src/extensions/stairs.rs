//! Stair functions, their rational lifts with the drift/derivative bounds,
//! and the bump functions used by the admissibility analysis.

use crate::error::{Error, Result};
use crate::presentation::{MaxPlusPresentation, TropicalParam};

fn coord1() -> MaxPlusPresentation {
    MaxPlusPresentation::coordinate(1, 0)
}

fn cst1(c: f64) -> MaxPlusPresentation {
    MaxPlusPresentation::constant(1, c)
}

/// The n-step stair function: xi_1(x) = max(min(x + delta, L), x - delta),
/// xi_m(x) = max(min(xi_{m-1}(x), L + m - 1), x - (2m - 1) delta).
/// 1-Lipschitz; fixes L and drains L..L+n-1 down to L under iteration.
pub fn make_stairs(n: usize, l_value: f64, delta: f64) -> Result<MaxPlusPresentation> {
    if n == 0 {
        return Err(Error::Input("stair count must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Input("delta must lie in (0, 1/2)".into()));
    }
    let x = coord1();
    let mut xi = x
        .add_const(delta)
        .min2(&cst1(l_value))?
        .max2(&x.add_const(-delta))?;
    for m in 2..=n {
        let step = (2 * m - 1) as f64;
        xi = xi
            .min2(&cst1(l_value + (m - 1) as f64))?
            .max2(&x.add_const(-step * delta))?;
    }
    Ok(xi)
}

/// Smallest integer N0 with t^-delta + t^delta / N0 < 1.
pub fn minimal_n0(t: TropicalParam, delta: f64) -> Result<u128> {
    let lo = t.pow(-delta);
    if lo >= 1.0 {
        return Err(Error::Input("delta must be positive".into()));
    }
    let hi = t.pow(delta);
    let mut n0 = (hi / (1.0 - lo)).floor() as u128;
    while t.pow(-delta) + t.pow(delta) / n0.max(1) as f64 >= 1.0 {
        n0 += 1;
    }
    Ok(n0.max(1))
}

/// The rational stair family:
///   f_t(z)   = t^-delta z + (1/N0) t^L z / (z + t^(L-delta)),
///   f_t^m(z) = t^-(2m-1)delta z
///              + (1/N0) t^(L+m-1) f^(m-1) / (t^(L+m-1) + f^(m-1)).
/// Requires t^-delta + t^delta/N0 < 1; on that condition both the drift and
/// the derivative of f^n - z are pinched in (-1 + t^-(2n-1)delta, -mu].
pub fn make_stairs_rational(
    n: usize,
    l_value: f64,
    delta: f64,
    t: TropicalParam,
    n0: u128,
) -> Result<MaxPlusPresentation> {
    if n == 0 {
        return Err(Error::Input("stair count must be >= 1".into()));
    }
    let gap = 1.0 - (t.pow(-delta) + t.pow(delta) / n0 as f64);
    if gap <= 0.0 {
        let min = minimal_n0(t, delta)?;
        return Err(Error::Input(format!(
            "N0 = {n0} too small: t^-delta + t^delta/N0 must be < 1; minimal admissible N0 is {min}"
        )));
    }
    let x = coord1();
    // f_1 = t^-delta z + (1/N0) * (t^L z) / (z + t^(L-delta))
    let head = x.add_const(-delta);
    let tail = x
        .add_const(l_value)
        .div_lift(&x.max2(&cst1(l_value - delta))?)?
        .div_weight(n0)?;
    let mut f = head.max2(&tail)?;
    for m in 2..=n {
        let level = l_value + (m - 1) as f64;
        let head = x.add_const(-((2 * m - 1) as f64) * delta);
        let tail = f
            .add_const(level)
            .div_lift(&cst1(level).max2(&f)?)?
            .div_weight(n0)?;
        f = head.max2(&tail)?;
    }
    Ok(f)
}

/// l_t(w) = [ (1 + t^-delta w)^-1 + (1 + t^(7 delta) w^-1)^-1 ]^-1,
/// the rational lift of the one-sided bump tau.
pub fn bump_l(t: TropicalParam, delta: f64, w: f64) -> f64 {
    let a = 1.0 / (1.0 + t.pow(-delta) * w);
    let b = 1.0 / (1.0 + t.pow(7.0 * delta) / w);
    1.0 / (a + b)
}

/// K for the plateau bump: the smallest integer making h_t <= 1 on a wide
/// log-spaced sweep of w.
pub fn bump_k_constant(t: TropicalParam, delta: f64, states: &[f64]) -> u64 {
    let mut sup: f64 = 0.0;
    for i in -400..=400 {
        let w = t.pow(i as f64 * 0.05);
        let sum_l: f64 = states.iter().map(|q| bump_l(t, delta, t.pow(-q) * w)).sum();
        let h = 1.0 / (t.pow(-2.0 * delta) + 1.0 / sum_l);
        sup = sup.max(h);
    }
    sup.ceil().max(1.0) as u64
}

/// h_t(w) = K^-1 [ t^-2delta + (sum_j l_t(t^-q_j w))^-1 ]^-1 with K the
/// smallest integer keeping the value at or below 1.
pub fn bump_h(t: TropicalParam, delta: f64, states: &[f64], k: u64, w: f64) -> f64 {
    let sum_l: f64 = states.iter().map(|q| bump_l(t, delta, t.pow(-q) * w)).sum();
    (1.0 / (t.pow(-2.0 * delta) + 1.0 / sum_l)) / k as f64
}

/// The transition formulas printed for the one-state refinements:
/// swap: min(q_bar, max(y, y + x - (L + 1 - delta))),
/// id:   min(q_bar, max(y, y - x + L + delta)).
/// Shipped verbatim for inspection; see the refinement module for the
/// construction actually used.
pub fn paper_one_state_phi_bar(
    swap: bool,
    q_bar: f64,
    l_value: f64,
    delta: f64,
) -> Result<MaxPlusPresentation> {
    let y = MaxPlusPresentation::coordinate(2, 0);
    let x = MaxPlusPresentation::coordinate(2, 1);
    let inner = if swap {
        y.max2(&y.add(&x)?.add_const(-(l_value + 1.0 - delta)))?
    } else {
        y.max2(&y.sub(&x)?.add_const(l_value + delta))?
    };
    MaxPlusPresentation::constant(2, q_bar).min2(&inner)
}
