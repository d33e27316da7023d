//! An admissible pair assembled from the rational stair family and a
//! mild bump gate: the distortion and admissibility checks of the
//! sharpened inequality pass on its solutions.

use tropdyn_core::extensions::{make_stairs_rational, minimal_n0};
use tropdyn_core::pde::{
    admissibility_check, higher_distortion, solve, SelfDynamicsWindow,
};
use tropdyn_core::presentation::MaxPlusPresentation;
use tropdyn_core::TropicalParam;

fn cst(arity: usize, c: f64) -> MaxPlusPresentation {
    MaxPlusPresentation::constant(arity, c)
}

/// l_t-style reciprocal-sum bump in one variable:
/// l(v) = [ (1 + t^-delta v)^-1 + (1 + t^(7 delta) v^-1)^-1 ]^-1.
fn bump_presentation(delta: f64) -> MaxPlusPresentation {
    let v = MaxPlusPresentation::coordinate(1, 0);
    let a = cst(1, 0.0).max2(&v.add_const(-delta)).unwrap();
    let b = cst(1, 0.0)
        .max2(&v.neg().add_const(7.0 * delta))
        .unwrap();
    a.neg().max2(&b.neg()).unwrap().neg()
}

/// A weakly modulated gate h(w) = [t^-2delta + (l(t^-q w))^-1 / N_h]^-1 / K:
/// close to constant, so the cross terms stay small while the v-dependence
/// is genuinely present.
fn gate_presentation(delta: f64, q_center: f64, n_h: u128, k: u128) -> MaxPlusPresentation {
    let w = MaxPlusPresentation::coordinate(1, 0);
    let l_shift = bump_presentation(delta)
        .substitute(&[w.add_const(-q_center)])
        .unwrap();
    cst(1, -2.0 * delta)
        .max2(&l_shift.neg().div_weight(n_h).unwrap())
        .unwrap()
        .neg()
        .div_weight(k)
        .unwrap()
}

#[test]
fn stairs_bump_pair_is_admissible() {
    let t = TropicalParam::new(10.0).unwrap();
    let delta = 0.1;
    let l_level = 1.0;
    let n0 = minimal_n0(t, delta).unwrap() * 2;
    let stairs = make_stairs_rational(1, l_level, delta, t, n0).unwrap();
    // f(w, z) = stairs(z * h(w)); the gate varies by a few percent only
    let gate = gate_presentation(delta, 2.0, 50, 2);
    let w2 = MaxPlusPresentation::coordinate(2, 0);
    let z2 = MaxPlusPresentation::coordinate(2, 1);
    let zh = z2.add(&gate.substitute(&[w2]).unwrap()).unwrap();
    let f = stairs.substitute(&[zh]).unwrap();
    // g(w, z): the same stair family acting on w around the state level
    let g = make_stairs_rational(1, 1.0, delta, t, n0)
        .unwrap()
        .substitute(&[MaxPlusPresentation::coordinate(2, 0)])
        .unwrap();

    // solutions decay slowly from t^L; a wide window contains the sweep
    let window = SelfDynamicsWindow::new(1.0, 12.0, 0.2).unwrap();
    let h = 1.0 / 32.0;
    let n = (1.5 / h) as usize;
    let u0 = vec![10.0; n + 1];
    let v0 = vec![10.0; n + 1];
    let sol = solve(&f, &g, t, window, &u0, &v0, h, 1e-12, 120).unwrap();

    // sharpened admissibility (mu = 0 gives the strict 2 u(x, s+1) form)
    let rep = admissibility_check(&sol, &f, &g, t, 0.0).unwrap();
    assert!(rep.pass, "{rep:?}");

    // higher distortion clears the comparison precondition with room:
    // C K <= 1 - delta for a declared delta of 1/2
    let k = higher_distortion(&sol, &f, &g, t).unwrap();
    assert!(k.is_finite() && k >= 0.0);
    assert!(0.5 * k <= 1.0 - 0.5, "C K = {} too large", 0.5 * k);
}
