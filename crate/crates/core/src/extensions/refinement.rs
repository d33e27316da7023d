//! Lattice refinements of two-symbol Mealy automata.
//!
//! The construction keeps the doubled state set on the delta-grid
//! (q_bar = q + 4 delta, consecutive states 8 delta apart) and subdivision
//! N = 1/delta, and realizes one automaton step per N-row band:
//!
//! * rows jN .. jN+N-2 freeze every column; the walk along the lattice row
//!   jN reads the stable symbols and reproduces the exact state orbit;
//! * the walk along the last band row carries swap/id markers (offsets
//!   4 delta and 2 delta over the base states) computed from the same
//!   frozen symbols;
//! * the final drive of the band applies a gated reflection of the symbol
//!   interval, so a marked column swaps its symbol exactly and an unmarked
//!   one holds it.
//!
//! Non-lattice columns rest at an off-integer park value, which every walk
//! passes through unchanged and every drive fixes.

use crate::automata::AutomatonSpec;
use crate::dynamics::{self, BoundReport, Mode};
use crate::error::{Error, Result};
use crate::presentation::{pl_from_pieces, rational_from_f64, MaxPlusPresentation, Rational};
use serde::{Deserialize, Serialize};

/// A refinement: presentations, subdivision, declared path step bound and
/// the embeddings its lattice conditions refer to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Refinement {
    pub psi_bar: MaxPlusPresentation,
    pub phi_bar: MaxPlusPresentation,
    pub subdivision: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Embedded symbols: [L, L+1].
    pub symbol_embedding: Vec<f64>,
    /// Base value of each state on the 8 delta grid.
    pub state_embedding: Vec<f64>,
    /// Marker offset per state: 2 delta for id rows, 4 delta for swap rows.
    pub marker_offsets: Vec<f64>,
    /// Resting value of non-lattice columns.
    pub park: f64,
}

const L_BASE: f64 = 10.0;
const GATE_PSI: f64 = 4.0;
const GATE_PHI: f64 = 16.0;
const BRANCH_SEP: f64 = 64.0;

fn cst(arity: usize, c: f64) -> MaxPlusPresentation {
    MaxPlusPresentation::constant(arity, c)
}

fn coord(arity: usize, i: usize) -> MaxPlusPresentation {
    MaxPlusPresentation::coordinate(arity, i)
}

/// 1-d function with flat plateaus [lo_k, hi_k] |-> v_k, linear ramps
/// between consecutive plateaus and constant extensions beyond the ends.
fn plateau_interp_1d(plateaus: &[(f64, f64, f64)]) -> Result<MaxPlusPresentation> {
    if plateaus.is_empty() {
        return Err(Error::Input("need at least one plateau".into()));
    }
    let mut breaks = Vec::new();
    // slopes[i] is the piece left of breaks[i]; the leading piece is flat.
    let mut slopes = vec![Rational::new(0, 1)];
    for (k, &(lo, hi, v)) in plateaus.iter().enumerate() {
        if hi <= lo {
            return Err(Error::Input("plateaus must have positive width".into()));
        }
        if k > 0 {
            let (_, prev_hi, _) = plateaus[k - 1];
            if lo <= prev_hi {
                return Err(Error::Input("plateaus must be disjoint and sorted".into()));
            }
            // the ramp from the previous plateau ends here
            breaks.push(lo);
            slopes.push(Rational::new(0, 1));
        }
        breaks.push(hi);
        if let Some(&(next_lo, _, next_v)) = plateaus.get(k + 1) {
            slopes.push(rational_from_f64((next_v - v) / (next_lo - hi))?);
        } else {
            slopes.push(Rational::new(0, 1));
        }
    }
    let anchor = (plateaus[0].0, plateaus[0].2);
    pl_from_pieces(anchor, &breaks, &slopes)
}

fn is_swap_row(a: &AutomatonSpec, q: usize) -> Result<bool> {
    match (a.psi_entry(q, &[0]), a.psi_entry(q, &[1])) {
        (1, 0) => Ok(true),
        (0, 1) => Ok(false),
        _ => Err(Error::Contract("output rows must be permutations of two symbols".into())),
    }
}

/// Build the refinement for an invertible two-symbol Mealy automaton.
/// Requires 1/delta to be an integer (at least 2).
pub fn build_refinement_2alphabet(a: &AutomatonSpec, delta: f64) -> Result<Refinement> {
    if a.symbol_count() != 2 {
        return Err(Error::Input("refinements are built for two-symbol automata only".into()));
    }
    if !a.is_mealy() || !a.is_invertible_mealy()? {
        return Err(Error::Contract("refinement requires an invertible Mealy automaton".into()));
    }
    let n_f = 1.0 / delta;
    if !(delta > 0.0 && (n_f - n_f.round()).abs() < 1e-12 && n_f.round() >= 2.0) {
        return Err(Error::Input("1/delta must be an integer >= 2".into()));
    }
    let n = n_f.round() as usize;
    let q_count = a.state_count();
    let base: Vec<f64> = (0..q_count).map(|m| 8.0 * delta * m as f64).collect();
    let mut marker = Vec::with_capacity(q_count);
    for q in 0..q_count {
        marker.push(if is_swap_row(a, q)? { 4.0 * delta } else { 2.0 * delta });
    }
    let l = L_BASE;
    let park = l - 0.5;

    // psi_bar(y, x) = max( min(R(x), x + A(y)), x - A(y) ).
    let reflect = pl_from_pieces(
        (l - 0.5, l - 0.5),
        &[l - 0.5, l - 0.25, l + 1.25, l + 2.0],
        &[
            Rational::new(1, 1),
            Rational::new(7, 1),
            Rational::new(-1, 1),
            Rational::new(3, 1),
            Rational::new(1, 1),
        ],
    )?;
    let x2 = coord(2, 1);
    let y2 = coord(2, 0);
    let reflect2 = reflect.substitute(std::slice::from_ref(&x2))?;
    // A: gate tents at the swap markers base + 4 delta, plateau GATE_PSI on
    // |y - p| <= delta/2, zero for |y - p| >= delta.
    let lambda = rational_from_f64(2.0 * GATE_PSI / delta)?;
    let mut gate = cst(2, 0.0);
    for m in 0..q_count {
        let p = base[m] + 4.0 * delta;
        let up = y2.add_const(delta - p).scale_rational(lambda)?;
        let down = y2.neg().add_const(p + delta).scale_rational(lambda)?;
        let tent = MaxPlusPresentation::min_of(&[cst(2, GATE_PSI), up, down])?;
        gate = gate.max2(&tent)?;
    }
    let psi_bar = reflect2
        .min2(&x2.add(&gate)?)?
        .max2(&x2.sub(&gate)?)?;

    // phi_bar(y, x) = max( min(T(y, x), y + B(x)), y - B(x) ).
    let gate_b = cst(2, GATE_PHI).min2(
        &cst(2, 0.0).max2(
            &x2.add_const(0.25 - l).scale_rational(rational_from_f64(8.0 * GATE_PHI)?)?,
        )?,
    )?;
    // T_s: per state, a plain plateau at the base value mapping to the next
    // state's base, and a marker plateau over [base+2d, base+4d] mapping to
    // the next state's marked value.
    let t_branch = |s: usize| -> Result<MaxPlusPresentation> {
        let mut plateaus = Vec::with_capacity(2 * q_count);
        for q in 0..q_count {
            let nxt = a.phi_entry(q, &[s]);
            let w = delta / 4.0;
            plateaus.push((base[q] - w, base[q] + w, base[nxt]));
            plateaus.push((
                base[q] + 2.0 * delta - w,
                base[q] + 4.0 * delta + w,
                base[nxt] + marker[nxt],
            ));
        }
        plateau_interp_1d(&plateaus)?.substitute(std::slice::from_ref(&y2))
    };
    let sep = rational_from_f64(BRANCH_SEP)?;
    let dist_to = |c: f64| -> Result<MaxPlusPresentation> {
        x2.add_const(-c).max2(&x2.neg().add_const(c))
    };
    let t0 = t_branch(0)?.sub(&dist_to(l)?.scale_rational(sep)?)?;
    let t1 = t_branch(1)?.sub(&dist_to(l + 1.0)?.scale_rational(sep)?)?;
    let t_field = t0.max2(&t1)?;
    let phi_bar = t_field
        .min2(&y2.add(&gate_b)?)?
        .max2(&y2.sub(&gate_b)?)?;

    // Path step bound: symbol-to-park moves on the x side, band-internal
    // moves and cross-band state moves on the y side.
    let x_step = 1.5f64;
    let y_step = base
        .last()
        .map(|last| last - base[0] + 4.0 * delta)
        .unwrap_or(4.0 * delta);
    Ok(Refinement {
        psi_bar,
        phi_bar,
        subdivision: n,
        epsilon: x_step.max(y_step),
        delta,
        symbol_embedding: vec![l, l + 1.0],
        state_embedding: base,
        marker_offsets: marker,
        park,
    })
}

/// The canonical initial paths for given state/input words.
pub fn refinement_paths(r: &Refinement, state_word: &[usize], input_word: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = r.subdivision;
    let cols = (input_word.len() - 1) * n + 1;
    let mut x_path = vec![r.park; cols];
    for (i, &k) in input_word.iter().enumerate() {
        x_path[i * n] = r.symbol_embedding[k];
    }
    let mut y_path = Vec::with_capacity(state_word.len() * n);
    for &q in state_word {
        let b = r.state_embedding[q];
        for row in 0..n {
            if row == n - 1 {
                y_path.push(b + r.marker_offsets[q]);
            } else {
                y_path.push(b);
            }
        }
    }
    (x_path, y_path)
}

/// Verification outcome for one refinement: the worst lattice deviation
/// and the path-step audit.
#[derive(Debug, Clone)]
pub struct RefinementCheck {
    pub report: BoundReport,
    pub max_path_step: f64,
    pub scenarios: usize,
}

/// Run the refined dynamics from lattice initial paths for every state and
/// input word up to `max_len`, and compare the (iN, jN) sublattice against
/// the automaton orbit. Passes iff the worst deviation is at most 1e-9 and
/// all path steps stay within the declared epsilon.
pub fn verify_refinement(r: &Refinement, a: &AutomatonSpec, max_len: usize) -> Result<RefinementCheck> {
    if a.symbol_count() != 2 {
        return Err(Error::Input("two-symbol automata only".into()));
    }
    let n = r.subdivision;
    let mut worst: f64 = 0.0;
    let mut worst_loc = (0usize, 0usize);
    let mut max_step: f64 = 0.0;
    let mut scenarios = 0usize;
    for j_len in 1..=max_len {
        for i_len in 1..=max_len {
            for sw in 0..a.state_count().pow(j_len as u32) {
                let state_word = unflatten(sw, a.state_count(), j_len);
                for iw in 0..a.symbol_count().pow(i_len as u32) {
                    let input_word = unflatten(iw, a.symbol_count(), i_len);
                    scenarios += 1;
                    // exact automaton orbit
                    let (k_grid, q_grid) = automaton_orbit(a, &state_word, &input_word);
                    let (x_path, y_path) = refinement_paths(r, &state_word, &input_word);
                    for w in x_path.windows(2).chain(y_path.windows(2)) {
                        max_step = max_step.max((w[1] - w[0]).abs());
                    }
                    let cols = x_path.len();
                    let grid = dynamics::run(
                        &r.psi_bar,
                        &r.phi_bar,
                        None,
                        &x_path,
                        &y_path,
                        cols,
                        y_path.len(),
                        Mode::Pl,
                    )?;
                    for (j, row) in k_grid.iter().enumerate() {
                        for (i, &k) in row.iter().enumerate() {
                            let got = grid.x[j * n][i * n];
                            let dev = (got - r.symbol_embedding[k]).abs();
                            if dev > worst {
                                worst = dev;
                                worst_loc = (i * n, j * n);
                            }
                        }
                    }
                    for (j, row) in q_grid.iter().enumerate() {
                        for (i, &q) in row.iter().enumerate() {
                            let got = grid.y[j * n][i * n];
                            let dev = (got - r.state_embedding[q]).abs();
                            if dev > worst {
                                worst = dev;
                                worst_loc = (i * n, j * n);
                            }
                        }
                    }
                }
            }
        }
    }
    let steps_ok = max_step <= r.epsilon + 1e-12;
    let margin = 1e-9 - worst;
    Ok(RefinementCheck {
        report: BoundReport {
            worst_lhs: worst,
            bound_rhs: 1e-9,
            margin,
            location: worst_loc,
            pass: worst <= 1e-9 && steps_ok,
        },
        max_path_step: max_step,
        scenarios,
    })
}

/// Symbol grid k_i^j (rows j = 0..=J) and state grid q_i^j (rows j = 0..J).
fn automaton_orbit(
    a: &AutomatonSpec,
    state_word: &[usize],
    input_word: &[usize],
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut k_rows = vec![input_word.to_vec()];
    let mut q_rows = Vec::with_capacity(state_word.len());
    for &q0 in state_word {
        let prev = k_rows.last().unwrap();
        let mut q = q0;
        let mut q_row = Vec::with_capacity(prev.len());
        let mut k_row = Vec::with_capacity(prev.len());
        for &k in prev {
            q_row.push(q);
            k_row.push(a.psi_entry(q, &[k]));
            q = a.phi_entry(q, &[k]);
        }
        q_rows.push(q_row);
        k_rows.push(k_row);
    }
    (k_rows, q_rows)
}

fn unflatten(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0usize; len];
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    out
}

/// The two one-state automata of the worked examples: psi is the swap or
/// the identity on {s0, s1}, phi is constant.
pub fn one_state_automaton(swap: bool) -> AutomatonSpec {
    let psi = if swap { vec![vec![1, 0]] } else { vec![vec![0, 1]] };
    AutomatonSpec::new(vec![0.0, 1.0], vec![0.0], 0, 0, psi, vec![vec![0, 0]]).unwrap()
}
