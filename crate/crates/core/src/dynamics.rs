//! Two-index state dynamics in piecewise-linear, dequantized and
//! rational-log modes, with the explicit comparison bounds and the
//! quasi-recursivity probes.

use crate::automata::{AutomatonSpec, LevelOrder};
use crate::error::{Error, Result};
use crate::extensions::StableExtension;
use crate::presentation::{MaxPlusPresentation, TropicalParam};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Pl,
    Dequantized,
    RationalLog,
}

/// A two-indexed orbit. Row j of `x` holds x_i^j; row j of `y` holds y_i^j.
/// In the rational modes the stored values are log_t of the rational orbit.
/// With lookaheads the x-extent shrinks by gamma = max(alpha, beta) per
/// j-step; each row records its own valid extent.
#[derive(Debug, Clone)]
pub struct OrbitGrid {
    pub mode: Mode,
    pub t: Option<TropicalParam>,
    pub alpha: usize,
    pub beta: usize,
    /// x[j] for j = 0..=J; row j has I + gamma*(J - j) entries.
    pub x: Vec<Vec<f64>>,
    /// y[j] for j = 0..J; row j has len_x(j) - beta + 1 entries.
    pub y: Vec<Vec<f64>>,
}

impl OrbitGrid {
    pub fn gamma(&self) -> usize {
        self.alpha.max(self.beta)
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }
}

fn eval(
    pres: &MaxPlusPresentation,
    t: Option<TropicalParam>,
    point: &[f64],
    mode: Mode,
) -> Result<f64> {
    match mode {
        Mode::Pl => pres.eval_maxplus(point),
        // The rational-log orbit is computed by the same dequantized kernel,
        // which is the log-domain rational evaluation by construction.
        Mode::Dequantized | Mode::RationalLog => {
            let t = t.ok_or_else(|| Error::Input("dequantized mode requires t".into()))?;
            pres.eval_dequantized(t, point)
        }
    }
}

/// Run the state dynamics
///   x_i^{j+1} = psi(y_i^j, x_i^j, ..., x_{i+alpha}^j)
///   y_{i+1}^j = phi(y_i^j, x_i^j, ..., x_{i+beta}^j)
/// from x_i^0 = x_init[i], y_0^j = y_init[j]. `x_init` must supply
/// I + gamma*J entries so the shrinking trapezoid still spans I columns at
/// the top row.
pub fn run(
    psi: &MaxPlusPresentation,
    phi: &MaxPlusPresentation,
    t: Option<TropicalParam>,
    x_init: &[f64],
    y_init: &[f64],
    i_extent: usize,
    j_extent: usize,
    mode: Mode,
) -> Result<OrbitGrid> {
    if psi.arity() < 2 || phi.arity() < 2 {
        return Err(Error::Input("psi and phi must have arity >= 2".into()));
    }
    let alpha = psi.arity() - 2;
    let beta = phi.arity() - 2;
    let gamma = alpha.max(beta);
    if y_init.len() != j_extent {
        return Err(Error::Input(format!(
            "y_init must have J = {j_extent} entries, got {}",
            y_init.len()
        )));
    }
    let need = i_extent + gamma * j_extent;
    if x_init.len() < need {
        return Err(Error::Input(format!(
            "insufficient initial data: x_init needs I + gamma*J = {need} entries, got {}",
            x_init.len()
        )));
    }
    let mut x: Vec<Vec<f64>> = vec![x_init[..need].to_vec()];
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(j_extent);
    let mut point_a = vec![0.0; alpha + 2];
    let mut point_b = vec![0.0; beta + 2];
    for j in 0..j_extent {
        let row_x = &x[j];
        let len = row_x.len();
        // y-walk along row j
        let mut row_y = Vec::with_capacity(len.saturating_sub(beta) + 1);
        row_y.push(y_init[j]);
        let y_len = len - beta; // highest filled index is y_len
        for i in 0..y_len {
            point_b[0] = row_y[i];
            point_b[1..].copy_from_slice(&row_x[i..=i + beta]);
            row_y.push(eval(phi, t, &point_b, mode)?);
        }
        // next x-row
        let next_len = len - gamma;
        let mut row_next = Vec::with_capacity(next_len);
        for i in 0..next_len {
            point_a[0] = row_y[i];
            point_a[1..].copy_from_slice(&row_x[i..=i + alpha]);
            row_next.push(eval(psi, t, &point_a, mode)?);
        }
        y.push(row_y);
        x.push(row_next);
    }
    Ok(OrbitGrid { mode, t, alpha, beta, x, y })
}

/// P_i(c) = 1 + c + ... + c^i, with the removable singularity at c = 1.
/// Defined for real i >= 0 via the closed form.
pub fn bound_p(i: f64, c: f64) -> f64 {
    assert!(i >= 0.0 && c >= 0.0);
    if (c - 1.0).abs() < 1e-12 {
        i + 1.0
    } else {
        (c.powf(i + 1.0) - 1.0) / (c - 1.0)
    }
}

/// Integer-index P_i(c) computed by direct summation.
pub fn bound_p_int(i: usize, c: f64) -> f64 {
    let mut acc = 0.0;
    let mut pw = 1.0;
    for _ in 0..=i {
        acc += pw;
        pw *= c;
        if !acc.is_finite() {
            break;
        }
    }
    acc
}

/// sup over entries of the four two-sided ratios; always >= 1.
pub fn initial_rate(z1: &[f64], w1: &[f64], z2: &[f64], w2: &[f64]) -> Result<f64> {
    if z1.len() != z2.len() || w1.len() != w2.len() {
        return Err(Error::Input("initial sequences must have matching lengths".into()));
    }
    let mut rate: f64 = 1.0;
    let mut feed = |a: &[f64], b: &[f64]| -> Result<()> {
        for (x, y) in a.iter().zip(b) {
            if *x <= 0.0 || *y <= 0.0 {
                return Err(Error::Domain("initial rate needs positive entries".into()));
            }
            rate = rate.max(x / y).max(y / x);
        }
        Ok(())
    };
    feed(z1, z2)?;
    feed(w1, w2)?;
    Ok(rate)
}

/// One verified inequality instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub worst_lhs: f64,
    pub bound_rhs: f64,
    pub margin: f64,
    pub location: (usize, usize),
    pub pass: bool,
}

impl BoundReport {
    pub fn trivial_pass() -> Self {
        BoundReport { worst_lhs: 0.0, bound_rhs: 0.0, margin: 0.0, location: (0, 0), pass: true }
    }

    fn from_worst(worst: Option<(f64, f64, (usize, usize))>) -> Self {
        match worst {
            None => BoundReport::trivial_pass(),
            Some((lhs, rhs, loc)) => {
                let margin = rhs - lhs;
                BoundReport { worst_lhs: lhs, bound_rhs: rhs, margin, location: loc, pass: margin >= -1e-9 }
            }
        }
    }
}

fn track_worst(worst: &mut Option<(f64, f64, (usize, usize))>, lhs: f64, rhs: f64, loc: (usize, usize)) {
    let margin = rhs - lhs;
    if worst.is_none_or(|(l, r, _)| r - l > margin) {
        *worst = Some((lhs, rhs, loc));
    }
}

/// Compare two rational-log (or dequantized) grids against the bound
///   |x1 - x2| <= multiplier * P_{i+j(gamma+1)}(c) * log_t M
///                + ctilde^{i+1+j(gamma+1)} * log_t rate
/// at every cell (and the analogous bound for the y entries).
pub fn check_comparison(
    g1: &OrbitGrid,
    g2: &OrbitGrid,
    m: u128,
    c: f64,
    gamma: usize,
    rate: f64,
    multiplier: u32,
) -> Result<BoundReport> {
    if g1.x.len() != g2.x.len() || g1.y.len() != g2.y.len() {
        return Err(Error::Input("grid extents differ".into()));
    }
    let t = g1
        .t
        .or(g2.t)
        .ok_or_else(|| Error::Input("comparison requires grids with a tropical base".into()))?;
    let log_m = (m as f64).ln() / t.ln();
    let log_rate = rate.ln() / t.ln();
    let ctilde = c.max(1.0);
    let g = (gamma + 1) as f64;
    let mut worst: Option<(f64, f64, (usize, usize))> = None;
    // x rows: row r >= 1 comes from exponent index (i, j = r-1).
    for (r, (row1, row2)) in g1.x.iter().zip(&g2.x).enumerate() {
        if row1.len() != row2.len() {
            return Err(Error::Input("grid extents differ".into()));
        }
        for (i, (a, b)) in row1.iter().zip(row2).enumerate() {
            let lhs = (a - b).abs();
            let rhs = if r == 0 {
                log_rate
            } else {
                let j = (r - 1) as f64;
                let idx = i as f64 + j * g;
                (multiplier as f64) * bound_p(idx, c) * log_m + ctilde.powf(idx + 1.0) * log_rate
            };
            track_worst(&mut worst, lhs, rhs, (i, r));
        }
    }
    // y rows: entry k >= 1 of row j comes from exponent index (k-1, j).
    for (j, (row1, row2)) in g1.y.iter().zip(&g2.y).enumerate() {
        for (k, (a, b)) in row1.iter().zip(row2).enumerate() {
            let lhs = (a - b).abs();
            let rhs = if k == 0 {
                log_rate
            } else {
                let idx = (k - 1) as f64 + j as f64 * g;
                (multiplier as f64) * bound_p(idx, c) * log_m + ctilde.powf(idx + 1.0) * log_rate
            };
            track_worst(&mut worst, lhs, rhs, (k, j));
        }
    }
    Ok(BoundReport::from_worst(worst))
}

/// Run a sandwiched orbit: each cell is the lambda-geometric interpolation
/// between the f1/g1 and f2/g2 right-hand sides, with lambda drawn per cell
/// from the seeded policy. Requires f1 <= f2 and g1 <= g2 at every visited
/// cell. Returned in rational-log mode.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_run(
    f1: &MaxPlusPresentation,
    f2: &MaxPlusPresentation,
    g1: &MaxPlusPresentation,
    g2: &MaxPlusPresentation,
    t: TropicalParam,
    x_init: &[f64],
    y_init: &[f64],
    i_extent: usize,
    j_extent: usize,
    seed: u64,
) -> Result<OrbitGrid> {
    for (a, b) in [(f1, f2), (g1, g2)] {
        if a.arity() != b.arity() {
            return Err(Error::Arity { expected: a.arity(), got: b.arity() });
        }
    }
    let alpha = f1.arity() - 2;
    let beta = g1.arity() - 2;
    let gamma = alpha.max(beta);
    let need = i_extent + gamma * j_extent;
    if x_init.len() < need {
        return Err(Error::Input(format!(
            "insufficient initial data: x_init needs {need} entries"
        )));
    }
    if y_init.len() != j_extent {
        return Err(Error::Input("y_init must have J entries".into()));
    }
    let mut rng = crate::seeded_rng(seed);
    let mut interp = |lo: &MaxPlusPresentation,
                      hi: &MaxPlusPresentation,
                      point: &[f64],
                      loc: (usize, usize)|
     -> Result<f64> {
        let a = lo.eval_dequantized(t, point)?;
        let b = hi.eval_dequantized(t, point)?;
        if a > b + 1e-9 {
            return Err(Error::Input(format!(
                "ordering violated at cell {loc:?}: lower side {a} > upper side {b}"
            )));
        }
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        Ok(a + lambda * (b - a))
    };
    let mut x: Vec<Vec<f64>> = vec![x_init[..need].to_vec()];
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(j_extent);
    for j in 0..j_extent {
        let row_x = x[j].clone();
        let len = row_x.len();
        let mut row_y = vec![y_init[j]];
        for i in 0..len - beta {
            let mut point = vec![row_y[i]];
            point.extend_from_slice(&row_x[i..=i + beta]);
            row_y.push(interp(g1, g2, &point, (i, j))?);
        }
        let mut row_next = Vec::with_capacity(len - gamma);
        for i in 0..len - gamma {
            let mut point = vec![row_y[i]];
            point.extend_from_slice(&row_x[i..=i + alpha]);
            row_next.push(interp(f1, f2, &point, (i, j))?);
        }
        y.push(row_y);
        x.push(row_next);
    }
    Ok(OrbitGrid { mode: Mode::RationalLog, t: Some(t), alpha, beta, x, y })
}

/// Result of the quasi-period search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriod {
    pub p: usize,
    /// sup over all valid (i, j, l) of the two-sided ratio at shift p*l.
    pub max_ratio: f64,
    /// For each p' < p: the best lower-bound witness, i.e. the max over
    /// rows i of the min over valid j of the two-sided ratio at shift p'.
    pub lower_witnesses: Vec<f64>,
}

/// Smallest p <= p_max such that all two-sided ratios z_i^{j+pl} / z_i^j
/// stay below C. `series` is a list of positive rows (one row suffices for
/// a one-dimensional orbit).
pub fn detect_quasi_period(series: &[Vec<f64>], c: f64, p_max: usize) -> Result<Option<QuasiPeriod>> {
    if series.is_empty() || series.iter().any(|r| r.is_empty()) {
        return Err(Error::Input("series must be nonempty".into()));
    }
    if series.iter().flatten().any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(Error::Domain("series entries must be positive and finite".into()));
    }
    let two_sided_sup = |p: usize| -> f64 {
        // sup over i, j, l >= 1 of the two-sided ratio at shift p*l
        let mut sup: f64 = 1.0;
        for row in series {
            for j in 0..row.len() {
                let mut k = j + p;
                while k < row.len() {
                    let r = (row[k] / row[j]).max(row[j] / row[k]);
                    sup = sup.max(r);
                    k += p;
                }
            }
        }
        sup
    };
    let witness = |p: usize| -> f64 {
        // max over rows of the min over j of the single-shift ratio
        series
            .iter()
            .map(|row| {
                if row.len() <= p {
                    return 1.0;
                }
                (0..row.len() - p)
                    .map(|j| (row[j + p] / row[j]).max(row[j] / row[j + p]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(1.0f64, f64::max)
    };
    for p in 1..=p_max {
        if two_sided_sup(p) <= c {
            let lower_witnesses = (1..p).map(witness).collect();
            return Ok(Some(QuasiPeriod { p, max_ratio: two_sided_sup(p), lower_witnesses }));
        }
    }
    Ok(None)
}

/// Outcome of a quasi-recursivity probe: the detected period and the
/// verified ratio bound.
#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub period: u128,
    pub report: BoundReport,
}

/// Probe the bound (z_i^j / z_i^{j+p(m+1)l})^{+-1} <= C^4 for a stable
/// extension of a finite-order Mealy element. Draws initials uniformly in
/// the C-neighborhoods of the exponential lattices and runs the
/// rational-log dynamics over a J-row grid with I = level columns.
#[allow(clippy::too_many_arguments)]
pub fn quasi_recursivity_probe(
    ext: &StableExtension,
    a: &AutomatonSpec,
    state_word: &[usize],
    t: TropicalParam,
    c_nbhd: f64,
    i_extent: usize,
    j_extent: usize,
    seed: u64,
) -> Result<ProbeOutcome> {
    if !a.is_mealy() || !a.is_invertible_mealy()? {
        return Err(Error::Contract("probe requires an invertible Mealy automaton".into()));
    }
    if c_nbhd < 1.0 {
        return Err(Error::Input("neighborhood constant C must be >= 1".into()));
    }
    // Threshold validation: log_t C <= delta/2 and mu*delta/2 + log_t M < delta/2.
    let delta = ext.delta;
    let mu = ext.mu;
    let m = ext.psi_pres.components().max(ext.phi_pres.components()) as f64;
    let log_c = c_nbhd.ln() / t.ln();
    let log_m = m.ln() / t.ln();
    if log_c > delta / 2.0 || mu * delta / 2.0 + log_m >= delta / 2.0 {
        let t_min_c = c_nbhd.powf(2.0 / delta);
        let t_min_m = m.powf(2.0 / (delta * (1.0 - mu)));
        return Err(Error::Input(format!(
            "t = {} below the stability threshold; minimal admissible t is {:.3e}",
            t.get(),
            t_min_c.max(t_min_m)
        )));
    }
    let period = match a.order_on_level(state_word, i_extent, 1 << 20)? {
        LevelOrder::Order(p) => p,
        LevelOrder::Exceeded => {
            return Err(Error::Resource("element order exceeds the search cap".into()))
        }
    };
    let p = period as usize;
    let m_word = state_word.len();
    // Seeded initials inside the C-neighborhoods, in log coordinates.
    let mut rng = crate::seeded_rng(seed);
    let x_init: Vec<f64> = (0..i_extent)
        .map(|_| {
            let k = rng.gen_range(0..a.symbol_count());
            a.alphabet[k] + rng.gen_range(-1.0..1.0) * log_c
        })
        .collect();
    let y_init: Vec<f64> = (0..j_extent)
        .map(|j| {
            let q = state_word[j % m_word];
            a.states[q] + rng.gen_range(-1.0..1.0) * log_c
        })
        .collect();
    let grid = run(
        &ext.psi_pres,
        &ext.phi_pres,
        Some(t),
        &x_init,
        &y_init,
        i_extent,
        j_extent,
        Mode::RationalLog,
    )?;
    let bound = 4.0 * log_c; // log_t C^4
    let stride = p * m_word;
    let mut worst: Option<(f64, f64, (usize, usize))> = None;
    for j in 0..grid.x.len() {
        let mut k = j + stride;
        while k < grid.x.len() {
            for i in 0..i_extent.min(grid.x[k].len()) {
                let lhs = (grid.x[j][i] - grid.x[k][i]).abs();
                track_worst(&mut worst, lhs, bound, (i, j));
            }
            k += stride;
        }
    }
    Ok(ProbeOutcome { period, report: BoundReport::from_worst(worst) })
}


#[cfg(test)]
mod probe_tests {
    use super::*;
    use crate::extensions::builtin_extension;

    #[test]
    fn identity2_probe_trivial() {
        let (a, ext, _) = builtin_extension("identity2").unwrap();
        let t = TropicalParam::new(1e6).unwrap();
        let out = quasi_recursivity_probe(&ext, &a, &[0], t, 2.0, 3, 12, 5).unwrap();
        assert_eq!(out.period, 1);
        assert!(out.report.pass, "{:?}", out.report);
    }

    #[test]
    fn lamplighter_probe_level_4() {
        let (a, ext, _) = builtin_extension("lamplighter").unwrap();
        let t = TropicalParam::new(1e6).unwrap();
        let out = quasi_recursivity_probe(&ext, &a, &[1], t, 2.0, 4, 40, 11).unwrap();
        // p equals the brute-forced order of the level-4 permutation
        match a.order_on_level(&[1], 4, 1 << 20).unwrap() {
            crate::automata::LevelOrder::Order(p) => assert_eq!(out.period, p),
            _ => panic!(),
        }
        assert!(out.report.pass, "{:?}", out.report);
    }

    #[test]
    fn probe_threshold_guard() {
        let (a, ext, _) = builtin_extension("lamplighter").unwrap();
        let t = TropicalParam::new(2.0).unwrap();
        let err = quasi_recursivity_probe(&ext, &a, &[1], t, 2.0, 4, 10, 1).unwrap_err();
        match err {
            Error::Input(msg) => assert!(msg.contains("minimal admissible t"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grigorchuk_head_probe_torsion() {
        let (a, ext, _) = builtin_extension("grigorchuk_head").unwrap();
        let t = TropicalParam::new(1e6).unwrap();
        let out = quasi_recursivity_probe(&ext, &a, &[0], t, 2.0, 5, 40, 23).unwrap();
        assert_eq!(out.period, 2);
        assert!(out.report.pass, "{:?}", out.report);
    }
}
