//! Real extensions of automata as (max,+)-presentations: plateau-stable
//! extensions, the stair/bump constructions, and lattice refinements.

mod refinement;
mod stairs;

pub use refinement::{
    build_refinement_2alphabet, one_state_automaton, refinement_paths, verify_refinement,
    Refinement, RefinementCheck,
};
pub use stairs::{
    bump_h, bump_k_constant, bump_l, make_stairs, make_stairs_rational, minimal_n0,
    paper_one_state_phi_bar,
};

use crate::automata::AutomatonSpec;
use crate::error::{Error, Result};
use crate::presentation::{rational_from_f64, AffineTerm, MaxPlusPresentation, Rational};
use num::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A stable extension of an automaton: presentations that reproduce the
/// tables exactly on the lattice and are mu-Lipschitz within delta of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StableExtension {
    pub psi_pres: MaxPlusPresentation,
    pub phi_pres: MaxPlusPresentation,
    pub delta: f64,
    pub mu: f64,
}

impl StableExtension {
    /// Restriction property: evaluating the presentations at every lattice
    /// tuple reproduces the automaton tables within 1e-9.
    pub fn verify_restriction(&self, a: &AutomatonSpec) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for_each_lattice(a, a.alpha, |state, symbols, point| {
            let want = a.alphabet[a.psi_entry(state, symbols)];
            let got = self.psi_pres.eval_maxplus(point)?;
            worst = worst.max((want - got).abs());
            Ok(())
        })?;
        for_each_lattice(a, a.beta, |state, symbols, point| {
            let want = a.states[a.phi_entry(state, symbols)];
            let got = self.phi_pres.eval_maxplus(point)?;
            worst = worst.max((want - got).abs());
            Ok(())
        })?;
        Ok(worst)
    }
}

fn for_each_lattice<F>(a: &AutomatonSpec, lookahead: usize, mut f: F) -> Result<()>
where
    F: FnMut(usize, &[usize], &[f64]) -> Result<()>,
{
    let s = a.symbol_count();
    let width = lookahead + 1;
    let total = s.pow(width as u32);
    for state in 0..a.state_count() {
        for flat in 0..total {
            let mut symbols = vec![0usize; width];
            let mut idx = flat;
            for slot in symbols.iter_mut().rev() {
                *slot = idx % s;
                idx /= s;
            }
            let mut point = Vec::with_capacity(width + 1);
            point.push(a.states[state]);
            point.extend(symbols.iter().map(|&k| a.alphabet[k]));
            f(state, &symbols, &point)?;
        }
    }
    Ok(())
}

fn min_gap(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup_by(|a, b| a == b);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// The disjoint-plateau construction: a cone of slope `sharpness` rises to
/// each table value and is exactly constant on the closed delta-box around
/// its lattice point; the whole function is floored at (min table - 1).
fn plateau_table(
    points: &[(Vec<f64>, f64)],
    arity: usize,
    delta: f64,
    sharpness: Rational,
) -> Result<MaxPlusPresentation> {
    let lo = points.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min) - 1.0;
    let mut parts = vec![MaxPlusPresentation::constant(arity, lo)];
    for (p, v) in points {
        // d(p) = max_i max(x_i - p_i, p_i - x_i)
        let mut dist_terms = Vec::with_capacity(2 * arity);
        for i in 0..arity {
            let mut up = vec![Rational::zero(); arity];
            up[i] = Rational::new(1, 1);
            dist_terms.push(AffineTerm::new(-p[i], up.clone()));
            let mut down = up;
            down[i] = Rational::new(-1, 1);
            dist_terms.push(AffineTerm::new(p[i], down));
        }
        let dist = MaxPlusPresentation::new(
            arity,
            dist_terms,
            vec![AffineTerm::constant(0.0, arity)],
        )?;
        let excess = MaxPlusPresentation::constant(arity, 0.0).max2(&dist.add_const(-delta))?;
        let cone = MaxPlusPresentation::constant(arity, *v).sub(&excess.scale_rational(sharpness)?)?;
        parts.push(cone);
    }
    MaxPlusPresentation::max_of(&parts)
}

/// Build a bounded stable extension with mu = 0: the presentations are
/// exactly constant on the closed delta-boxes around each lattice point
/// (the disjoint-squares shape), with ramps of slope `sharpness`
/// joining the plateaus and a global floor/ceiling one unit past the table
/// range.
pub fn build_stable_extension(
    a: &AutomatonSpec,
    delta: f64,
    sharpness: f64,
) -> Result<StableExtension> {
    if !a.is_mealy() {
        return Err(Error::Contract("stable extensions are built for Mealy automata".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input("delta must lie in (0, 1)".into()));
    }
    let mut all: Vec<f64> = a.alphabet.clone();
    all.extend_from_slice(&a.states);
    let gap = min_gap(&all);
    if delta >= gap / 2.0 {
        return Err(Error::Input(format!(
            "delta = {delta} too large: plateaus would overlap (need delta < {})",
            gap / 2.0
        )));
    }
    let spread = |vals: &[f64]| {
        vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let needed = (spread(&a.alphabet).max(spread(&a.states))) / (gap - 2.0 * delta);
    if sharpness < needed {
        return Err(Error::Input(format!(
            "sharpness {sharpness} below the minimal admissible slope {needed}"
        )));
    }
    let slope = rational_from_f64(sharpness)?;
    let mut psi_points = Vec::new();
    for_each_lattice(a, a.alpha, |state, symbols, point| {
        psi_points.push((point.to_vec(), a.alphabet[a.psi_entry(state, symbols)]));
        Ok(())
    })?;
    let mut phi_points = Vec::new();
    for_each_lattice(a, a.beta, |state, symbols, point| {
        phi_points.push((point.to_vec(), a.states[a.phi_entry(state, symbols)]));
        Ok(())
    })?;
    let ext = StableExtension {
        psi_pres: plateau_table(&psi_points, a.alpha + 2, delta, slope)?,
        phi_pres: plateau_table(&phi_points, a.beta + 2, delta, slope)?,
        delta,
        mu: 0.0,
    };
    let worst = ext.verify_restriction(a)?;
    if worst > 1e-9 {
        return Err(Error::Numerical(format!("restriction failed by {worst}")));
    }
    Ok(ext)
}

/// Estimate the stability constant by sampling perturbations within delta
/// of the lattice: the max observed |change in output| / |perturbation|.
pub fn stability_check(
    ext: &StableExtension,
    a: &AutomatonSpec,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = crate::seeded_rng(seed);
    let mut worst: f64 = 0.0;
    let mut probe =
        |pres: &MaxPlusPresentation, lattice: &[Vec<f64>]| -> Result<()> {
            for point in lattice {
                let base = pres.eval_maxplus(point)?;
                for _ in 0..samples {
                    let perturbed: Vec<f64> = point
                        .iter()
                        .map(|x| x + rng.gen_range(-1.0..1.0) * ext.delta * 0.999)
                        .collect();
                    let d: f64 = point
                        .iter()
                        .zip(&perturbed)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if d == 0.0 {
                        continue;
                    }
                    let out = pres.eval_maxplus(&perturbed)?;
                    worst = worst.max((out - base).abs() / d);
                }
            }
            Ok(())
        };
    let mut psi_lattice = Vec::new();
    for_each_lattice(a, a.alpha, |_, _, p| {
        psi_lattice.push(p.to_vec());
        Ok(())
    })?;
    let mut phi_lattice = Vec::new();
    for_each_lattice(a, a.beta, |_, _, p| {
        phi_lattice.push(p.to_vec());
        Ok(())
    })?;
    probe(&ext.psi_pres, &psi_lattice)?;
    probe(&ext.phi_pres, &phi_lattice)?;
    Ok(worst)
}

fn coord(arity: usize, i: usize) -> MaxPlusPresentation {
    MaxPlusPresentation::coordinate(arity, i)
}

fn cst(arity: usize, c: f64) -> MaxPlusPresentation {
    MaxPlusPresentation::constant(arity, c)
}

/// Compact low-component extensions for the built-in automata, sized so the
/// large-t stability thresholds hold at desk scale. `grigorchuk_head` is
/// the {a, id} sub-automaton, which carries the full a-generator dynamics
/// (phi never leaves {a, id} from a).
pub fn builtin_extension(name: &str) -> Result<(AutomatonSpec, StableExtension, f64)> {
    match name {
        "lamplighter" => {
            let a = crate::automata::builtin("lamplighter")?;
            let delta = 0.7;
            // psi(y, x) = min(3, max(0, 15 (u - 1.4))), u = |x - y|:
            // 0 on the id cells, 3 on the swapped ones, flat within delta
            // (u deviates by at most 2 delta from its lattice value).
            let y = coord(2, 0);
            let x = coord(2, 1);
            let u = x.sub(&y)?.max2(&y.sub(&x)?)?;
            let psi = cst(2, 3.0).min2(
                &cst(2, 0.0).max2(&u.add_const(-1.4).scale_rational(Rational::new(15, 1))?)?,
            )?;
            // phi(y, x) = min(3, max(0, 4 (x - 1.4))): echoes the symbol.
            let phi = cst(2, 3.0).min2(
                &cst(2, 0.0).max2(&x.add_const(-1.4).scale_rational(Rational::new(4, 1))?)?,
            )?;
            let ext = StableExtension { psi_pres: psi, phi_pres: phi, delta, mu: 0.0 };
            let worst = ext.verify_restriction(&a)?;
            if worst > 1e-9 {
                return Err(Error::Numerical(format!("restriction failed by {worst}")));
            }
            Ok((a, ext, delta))
        }
        "grigorchuk_head" => {
            // a at 0 (swap, -> id), id at 3; symbols at 0, 3.
            let a = AutomatonSpec::new(
                vec![0.0, 3.0],
                vec![0.0, 3.0],
                0,
                0,
                vec![vec![1, 0], vec![0, 1]],
                vec![vec![1, 1], vec![1, 1]],
            )?;
            let delta = 0.7;
            // swap at y = 0, identity at y = 3: u = |x + y - 3|.
            let y = coord(2, 0);
            let x = coord(2, 1);
            let sum = x.add(&y)?.add_const(-3.0);
            let u = sum.max2(&sum.neg())?;
            let psi = cst(2, 3.0).min2(
                &cst(2, 0.0).max2(&u.add_const(-1.4).scale_rational(Rational::new(15, 1))?)?,
            )?;
            let phi = cst(2, 3.0);
            let ext = StableExtension { psi_pres: psi, phi_pres: phi, delta, mu: 0.0 };
            let worst = ext.verify_restriction(&a)?;
            if worst > 1e-9 {
                return Err(Error::Numerical(format!("restriction failed by {worst}")));
            }
            Ok((a, ext, delta))
        }
        "identity2" => {
            let a = crate::automata::builtin("identity2")?;
            let delta = 0.45;
            let x = coord(2, 1);
            let psi = cst(2, 1.0)
                .min2(&cst(2, 0.0).max2(&x.add_const(-0.45).scale_rational(Rational::new(10, 1))?)?)?;
            let phi = cst(2, 0.0);
            let ext = StableExtension { psi_pres: psi, phi_pres: phi, delta, mu: 0.0 };
            let worst = ext.verify_restriction(&a)?;
            if worst > 1e-9 {
                return Err(Error::Numerical(format!("restriction failed by {worst}")));
            }
            Ok((a, ext, delta))
        }
        other => Err(Error::Input(format!("no builtin extension named {other:?}"))),
    }
}

/// A pair of closed-form lamplighter extension formulas sometimes quoted
/// for this automaton, shipped for inspection. Direct evaluation shows
/// they cannot reproduce both state rows of the tables (see the unit
/// tests), so the default lamplighter extension comes from
/// `builtin_extension` instead.
pub fn lamplighter_paper_formulas() -> Result<(MaxPlusPresentation, MaxPlusPresentation)> {
    // P(k) = -max(-3, -max(0, -3(k-2))), Q(k) = -max(-3, -max(0, 3(k-1)))
    let k = coord(1, 0);
    let p_inner = cst(1, 0.0).max2(&k.add_const(-2.0).scale_rational(Rational::new(-3, 1))?)?;
    let p = cst(1, -3.0).max2(&p_inner.neg())?.neg();
    let q_inner = cst(1, 0.0).max2(&k.add_const(-1.0).scale_rational(Rational::new(3, 1))?)?;
    let q = cst(1, -3.0).max2(&q_inner.neg())?.neg();
    // psi(q, s) = max(P(s), Q(s - q)), phi(q, s) = Q(s); variables (y, x).
    let y = coord(2, 0);
    let x = coord(2, 1);
    let psi = p.substitute(std::slice::from_ref(&x))?.max2(&q.substitute(&[x.sub(&y)?])?)?;
    let phi = q.substitute(&[x])?;
    Ok((psi, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::builtin;

    #[test]
    fn plateau_extension_identity2() {
        let a = builtin("identity2").unwrap();
        let ext = build_stable_extension(&a, 0.2, 8.0).unwrap();
        assert!(ext.verify_restriction(&a).unwrap() <= 1e-9);
        let mu = stability_check(&ext, &a, 200, 3).unwrap();
        assert!(mu <= 1e-10, "mu = {mu}");
    }

    #[test]
    fn plateau_extension_lamplighter() {
        let a = builtin("lamplighter").unwrap();
        let ext = build_stable_extension(&a, 0.5, 8.0).unwrap();
        // restriction reproduces all 4 table entries of each map
        assert!(ext.verify_restriction(&a).unwrap() <= 1e-9);
        let mu = stability_check(&ext, &a, 200, 5).unwrap();
        assert!(mu <= 1e-10, "mu = {mu}");
    }

    #[test]
    fn plateau_extension_globally_bounded() {
        let a = builtin("lamplighter").unwrap();
        let ext = build_stable_extension(&a, 0.5, 8.0).unwrap();
        let bound = 3.0 + 1.0;
        let mut rng = crate::seeded_rng(12);
        for _ in 0..10_000 {
            let p = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
            let v = ext.psi_pres.eval_maxplus(&p).unwrap();
            assert!(v.abs() <= bound, "psi({p:?}) = {v}");
        }
    }

    #[test]
    fn plateau_overlap_and_slope_errors() {
        // unit embedding gap: delta 0.6 makes the boxes overlap
        let a = builtin("identity2").unwrap();
        assert!(matches!(build_stable_extension(&a, 0.6, 100.0), Err(Error::Input(_))));
        let a = builtin("lamplighter").unwrap();
        assert!(matches!(build_stable_extension(&a, 0.5, 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn planted_slope_violation_detected() {
        // an "extension" with slope 2 through a lattice point
        let a = builtin("identity2").unwrap();
        let x = coord(2, 1);
        let bad = StableExtension {
            psi_pres: x.scale_rational(Rational::new(2, 1)).unwrap().add_const(-0.0),
            phi_pres: cst(2, 0.0),
            delta: 0.2,
            mu: 0.0,
        };
        // table says psi(0, 1) = 1 but slope-2 gives restriction holds at
        // lattice? 2*0=0 ok at x=0; 2*1=2 != 1, restriction fails as well
        // as stability; test the stability estimator on the raw slope.
        let est = stability_check(&bad, &a, 300, 9).unwrap();
        assert!((est - 2.0).abs() < 0.05, "estimated mu = {est}");
        assert!(est > bad.mu);
    }

    #[test]
    fn compact_extensions_verify() {
        for name in ["lamplighter", "grigorchuk_head", "identity2"] {
            let (a, ext, _) = builtin_extension(name).unwrap();
            assert!(ext.verify_restriction(&a).unwrap() <= 1e-9, "{name}");
            let mu = stability_check(&ext, &a, 300, 7).unwrap();
            assert!(mu <= ext.mu + 1e-10, "{name}: mu = {mu}");
        }
    }

    #[test]
    fn compact_extensions_are_small() {
        // component counts must clear the large-t threshold M < t^(delta/2)
        // at t = 1e6
        for name in ["lamplighter", "grigorchuk_head"] {
            let (_, ext, delta) = builtin_extension(name).unwrap();
            let m = ext.psi_pres.components().max(ext.phi_pres.components()) as f64;
            let bound = 1e6f64.powf(delta / 2.0);
            assert!(m < bound, "{name}: M = {m} vs {bound}");
        }
    }

    #[test]
    fn grigorchuk_head_matches_full_generator() {
        // the {a, id} sub-automaton acts like the full automaton's a
        let full = builtin("grigorchuk").unwrap();
        let (head, _, _) = builtin_extension("grigorchuk_head").unwrap();
        for len in 1..=6usize {
            for idx in 0..(1usize << len) {
                let w: Vec<usize> = (0..len).map(|i| (idx >> i) & 1).collect();
                let a_full = full.act(&[0], &crate::automata::TreeWord(w.clone()), 0).unwrap();
                let a_head = head.act(&[0], &crate::automata::TreeWord(w), 0).unwrap();
                assert_eq!(a_full, a_head);
            }
        }
    }

    #[test]
    fn quoted_lamplighter_formulas_are_inconsistent() {
        // P(0) = 3, so psi(q0, s0) = max(P(0), Q(0)) = 3 while the table
        // demands psi(q0, .) = id, i.e. 0. The discrepancy is reported, not
        // silently fixed.
        let (psi, phi) = lamplighter_paper_formulas().unwrap();
        let v = psi.eval_maxplus(&[0.0, 0.0]).unwrap();
        assert_eq!(v, 3.0);
        // phi(q, s) = Q(s) does match the transition table on the lattice
        for (s, want) in [(0.0, 0.0), (3.0, 3.0)] {
            assert_eq!(phi.eval_maxplus(&[0.0, s]).unwrap(), want);
            assert_eq!(phi.eval_maxplus(&[3.0, s]).unwrap(), want);
        }
    }
}
