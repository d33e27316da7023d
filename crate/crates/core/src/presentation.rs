//! Relative (max,+)-functions carried with their presentations.
//!
//! A presentation is two nonempty lists of affine terms. The same data
//! evaluates three ways: as a piecewise-linear function (max of numerator
//! terms minus max of denominator terms), as its dequantization at a base
//! t > 1 (log-sum-exp in base t), and as the positive rational function
//! whose numerator and denominator are sums of weighted monomials
//! `w * t^offset * z^coeffs`. The log-domain rational evaluation delegates
//! to the dequantized one, so the two are identical by construction.

use crate::error::{Error, Result};
use num::rational::Ratio;
use num::{Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = Ratio<i64>;

/// Parse a rational written as "p/q" or "p".
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: i64 = n
        .trim()
        .parse()
        .map_err(|_| Error::Input(format!("bad rational numerator in {s:?}")))?;
    let d: i64 = d
        .trim()
        .parse()
        .map_err(|_| Error::Input(format!("bad rational denominator in {s:?}")))?;
    if d == 0 {
        return Err(Error::Input(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(n, d))
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Rationalize a float that is expected to be an exact small rational
/// (slopes entering exponent vectors must not drift).
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::Input(format!("non-finite slope {x}")));
    }
    let mut best: Option<Rational> = None;
    for den in 1..=4096i64 {
        let num = (x * den as f64).round();
        if num.abs() > 9e15 {
            continue;
        }
        let cand = Rational::new(num as i64, den);
        if (cand.to_f64().unwrap() - x).abs() < 1e-12 * x.abs().max(1.0) {
            best = Some(cand);
            break;
        }
    }
    best.ok_or_else(|| Error::Input(format!("{x} is not a small exact rational")))
}

/// One affine component `offset + coeffs . x`, carried with a positive
/// integer multiplicity. A weight w stands for w repeated copies of the
/// term in the presentation list; the rational lift of the term is
/// `w * t^offset * z^coeffs`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTerm {
    pub offset: f64,
    pub coeffs: Vec<Rational>,
    pub weight: u128,
}

impl AffineTerm {
    pub fn new(offset: f64, coeffs: Vec<Rational>) -> Self {
        AffineTerm { offset, coeffs, weight: 1 }
    }

    pub fn with_weight(offset: f64, coeffs: Vec<Rational>, weight: u128) -> Self {
        AffineTerm { offset, coeffs, weight }
    }

    pub fn constant(offset: f64, arity: usize) -> Self {
        AffineTerm::new(offset, vec![Rational::zero(); arity])
    }

    /// offset + coeffs . point
    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut acc = self.offset;
        for (c, x) in self.coeffs.iter().zip(point) {
            if !c.is_zero() {
                acc += c.to_f64().unwrap() * x;
            }
        }
        acc
    }

    fn combine(&self, other: &AffineTerm) -> AffineTerm {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        AffineTerm {
            offset: self.offset + other.offset,
            coeffs,
            weight: self.weight.saturating_mul(other.weight),
        }
    }

    fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs().to_f64().unwrap()).sum()
    }
}

/// Evaluation mode for the rational lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RationalMode {
    Linear,
    Log,
}

/// Base parameter of the dequantization; strictly above 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TropicalParam(f64);

impl TropicalParam {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 1.0) {
            return Err(Error::Input(format!("tropical base must satisfy t > 1, got {t}")));
        }
        Ok(TropicalParam(t))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        self.0.ln()
    }

    /// log_t(x) for x > 0.
    pub fn log(self, x: f64) -> f64 {
        x.ln() / self.0.ln()
    }

    /// t^x
    pub fn pow(self, x: f64) -> f64 {
        self.0.powf(x)
    }
}

/// Component count, Lipschitz constant and its floor at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresentationStats {
    pub components: u128,
    pub lipschitz: f64,
    pub lipschitz_tilde: f64,
}

/// A relative (max,+)-function together with its presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPlusPresentation {
    arity: usize,
    num_terms: Vec<AffineTerm>,
    den_terms: Vec<AffineTerm>,
}

impl MaxPlusPresentation {
    pub fn new(arity: usize, num_terms: Vec<AffineTerm>, den_terms: Vec<AffineTerm>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::Input("arity must be positive".into()));
        }
        if num_terms.is_empty() || den_terms.is_empty() {
            return Err(Error::Input("term lists must be nonempty".into()));
        }
        for t in num_terms.iter().chain(&den_terms) {
            if t.coeffs.len() != arity {
                return Err(Error::Arity { expected: arity, got: t.coeffs.len() });
            }
            if !t.offset.is_finite() {
                return Err(Error::Input("term offset must be finite".into()));
            }
            if t.weight == 0 {
                return Err(Error::Input("term weight must be positive".into()));
            }
        }
        let mut p = MaxPlusPresentation { arity, num_terms, den_terms };
        p.normalize();
        Ok(p)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_terms(&self) -> &[AffineTerm] {
        &self.num_terms
    }

    pub fn den_terms(&self) -> &[AffineTerm] {
        &self.den_terms
    }

    /// The constant function `c`.
    pub fn constant(arity: usize, c: f64) -> Self {
        MaxPlusPresentation {
            arity,
            num_terms: vec![AffineTerm::constant(c, arity)],
            den_terms: vec![AffineTerm::constant(0.0, arity)],
        }
    }

    /// The coordinate function x_i.
    pub fn coordinate(arity: usize, i: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); arity];
        coeffs[i] = Rational::new(1, 1);
        MaxPlusPresentation {
            arity,
            num_terms: vec![AffineTerm::new(0.0, coeffs)],
            den_terms: vec![AffineTerm::constant(0.0, arity)],
        }
    }

    /// A single affine function.
    pub fn affine(arity: usize, term: AffineTerm) -> Result<Self> {
        MaxPlusPresentation::new(arity, vec![term], vec![AffineTerm::constant(0.0, arity)])
    }

    /// Merge duplicate terms (same coefficients, same offset) by summing
    /// weights, and keep the lists sorted.
    fn normalize(&mut self) {
        let key = |t: &AffineTerm| (t.coeffs.clone(), t.offset);
        for list in [&mut self.num_terms, &mut self.den_terms] {
            list.sort_by(|a, b| {
                key(a)
                    .partial_cmp(&key(b))
                    .expect("offsets are finite")
            });
            let mut merged: Vec<AffineTerm> = Vec::with_capacity(list.len());
            for t in list.drain(..) {
                match merged.last_mut() {
                    Some(last) if last.coeffs == t.coeffs && last.offset == t.offset => {
                        last.weight = last.weight.saturating_add(t.weight);
                    }
                    _ => merged.push(t),
                }
            }
            *list = merged;
        }
    }

    /// Drop terms dominated by another term with the same exponent vector
    /// and a larger offset. Leaves the (max,+)-function unchanged; the
    /// rational lift is replaced by a tropically equivalent one.
    pub fn prune_dominated(&mut self) {
        for list in [&mut self.num_terms, &mut self.den_terms] {
            list.sort_by(|a, b| {
                (a.coeffs.clone(), a.offset)
                    .partial_cmp(&(b.coeffs.clone(), b.offset))
                    .unwrap()
            });
            let mut kept: Vec<AffineTerm> = Vec::with_capacity(list.len());
            for t in list.drain(..) {
                match kept.last_mut() {
                    Some(last) if last.coeffs == t.coeffs => *last = t,
                    _ => kept.push(t),
                }
            }
            *list = kept;
        }
    }

    fn weighted_len(terms: &[AffineTerm]) -> u128 {
        terms.iter().fold(0u128, |acc, t| acc.saturating_add(t.weight))
    }

    /// m * l with multiplicities counted.
    pub fn components(&self) -> u128 {
        Self::weighted_len(&self.num_terms).saturating_mul(Self::weighted_len(&self.den_terms))
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, got: point.len() });
        }
        Ok(())
    }

    /// Piecewise-linear evaluation: max over numerator terms minus max over
    /// denominator terms. Weights do not affect the result.
    pub fn eval_maxplus(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        let m = |terms: &[AffineTerm]| {
            terms
                .iter()
                .map(|t| t.eval(point))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        Ok(m(&self.num_terms) - m(&self.den_terms))
    }

    /// log_t sum over terms of w * t^(term value), stabilized by shifting
    /// with the maximum so no intermediate exponential overflows.
    fn log_sum(terms: &[AffineTerm], t: TropicalParam, point: &[f64]) -> f64 {
        let lnt = t.ln();
        let vals: Vec<f64> = terms
            .iter()
            .map(|term| term.eval(point) * lnt + (term.weight as f64).ln())
            .collect();
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = vals.iter().map(|v| (v - m).exp()).sum();
        (m + s.ln()) / lnt
    }

    /// The dequantized evaluation phi_t(point).
    pub fn eval_dequantized(&self, t: TropicalParam, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        Ok(Self::log_sum(&self.num_terms, t, point) - Self::log_sum(&self.den_terms, t, point))
    }

    fn poly_eval(terms: &[AffineTerm], t: TropicalParam, z: &[f64]) -> f64 {
        terms
            .iter()
            .map(|term| {
                let mut v = (term.weight as f64) * t.pow(term.offset);
                for (c, zi) in term.coeffs.iter().zip(z) {
                    if !c.is_zero() {
                        v *= zi.powf(c.to_f64().unwrap());
                    }
                }
                v
            })
            .sum()
    }

    /// The rational lift. Linear mode takes positive inputs z and returns
    /// f_t(z) > 0; log mode takes Log_t z (any reals) and returns
    /// log_t f_t(t^x), which is evaluated as the dequantization.
    pub fn eval_rational(
        &self,
        t: TropicalParam,
        input: &[f64],
        mode: RationalMode,
    ) -> Result<f64> {
        self.check_point(input)?;
        match mode {
            RationalMode::Log => self.eval_dequantized(t, input),
            RationalMode::Linear => {
                if let Some(z) = input.iter().find(|z| **z <= 0.0) {
                    return Err(Error::Domain(format!(
                        "linear mode requires positive inputs, got {z}"
                    )));
                }
                let num = Self::poly_eval(&self.num_terms, t, input);
                let den = Self::poly_eval(&self.den_terms, t, input);
                if !num.is_finite() || !den.is_finite() || den == 0.0 {
                    return Err(Error::Overflow(
                        "intermediate power out of range in linear mode; use log mode".into(),
                    ));
                }
                Ok(num / den)
            }
        }
    }

    /// Component count and the certified Lipschitz constant
    /// (max l1-norm over numerator exponents plus the same over the
    /// denominator, valid for the sup metric).
    pub fn stats(&self) -> PresentationStats {
        let l1max = |terms: &[AffineTerm]| {
            terms.iter().map(AffineTerm::l1_norm).fold(0.0, f64::max)
        };
        let lipschitz = l1max(&self.num_terms) + l1max(&self.den_terms);
        PresentationStats {
            components: self.components(),
            lipschitz,
            lipschitz_tilde: lipschitz.max(1.0),
        }
    }

    /// The presentation of N * f_t: numerator repeated N times. Pointwise
    /// equal as a (max,+)-function.
    pub fn scale(&self, n: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("scale factor must be >= 1".into()));
        }
        let mut out = self.clone();
        for t in &mut out.num_terms {
            t.weight = t.weight.saturating_mul(n);
        }
        Ok(out)
    }

    // ---- exact calculus on presentations -------------------------------

    /// -f : swaps the two term lists.
    pub fn neg(&self) -> Self {
        MaxPlusPresentation {
            arity: self.arity,
            num_terms: self.den_terms.clone(),
            den_terms: self.num_terms.clone(),
        }
    }

    fn cross(a: &[AffineTerm], b: &[AffineTerm]) -> Vec<AffineTerm> {
        let mut out = Vec::with_capacity(a.len() * b.len());
        for x in a {
            for y in b {
                out.push(x.combine(y));
            }
        }
        out
    }

    /// f + g (rational lift: f_t * g_t).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_arity(other)?;
        MaxPlusPresentation::new(
            self.arity,
            Self::cross(&self.num_terms, &other.num_terms),
            Self::cross(&self.den_terms, &other.den_terms),
        )
    }

    /// f - g (rational lift: f_t / g_t).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn add_const(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.num_terms {
            t.offset += c;
        }
        out
    }

    /// max(f, g) (rational lift: f_t + g_t).
    pub fn max2(&self, other: &Self) -> Result<Self> {
        self.same_arity(other)?;
        let mut num = Self::cross(&self.num_terms, &other.den_terms);
        num.extend(Self::cross(&other.num_terms, &self.den_terms));
        MaxPlusPresentation::new(self.arity, num, Self::cross(&self.den_terms, &other.den_terms))
    }

    /// min(f, g) = -max(-f, -g) (rational lift: parallel sum).
    pub fn min2(&self, other: &Self) -> Result<Self> {
        Ok(self.neg().max2(&other.neg())?.neg())
    }

    pub fn max_of(items: &[Self]) -> Result<Self> {
        let mut it = items.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Input("max_of needs at least one function".into()))?;
        let mut acc = first.clone();
        for f in it {
            acc = acc.max2(f)?;
        }
        Ok(acc)
    }

    pub fn min_of(items: &[Self]) -> Result<Self> {
        let mut it = items.iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Input("min_of needs at least one function".into()))?;
        let mut acc = first.clone();
        for f in it {
            acc = acc.min2(f)?;
        }
        Ok(acc)
    }

    /// a * f for rational a. Negative a swaps the lists. Fractional a
    /// requires unit weights (w^a must stay integral).
    pub fn scale_rational(&self, a: Rational) -> Result<Self> {
        if a.is_zero() {
            return Ok(Self::constant(self.arity, 0.0));
        }
        let (mag, flip) = if a < Rational::zero() { (-a, true) } else { (a, false) };
        let base = if flip { self.neg() } else { self.clone() };
        let af = mag.to_f64().unwrap();
        let scale_terms = |terms: &[AffineTerm]| -> Result<Vec<AffineTerm>> {
            terms
                .iter()
                .map(|t| {
                    let weight = if *mag.denom() == 1 {
                        t.weight
                            .checked_pow(
                                u32::try_from(*mag.numer())
                                    .map_err(|_| Error::Overflow("scale exponent too large".into()))?,
                            )
                            .ok_or_else(|| Error::Overflow("weight overflow in scale".into()))?
                    } else if t.weight == 1 {
                        1
                    } else {
                        return Err(Error::Input(
                            "fractional scaling requires unit weights".into(),
                        ));
                    };
                    Ok(AffineTerm {
                        offset: t.offset * af,
                        coeffs: t.coeffs.iter().map(|c| c * mag).collect(),
                        weight,
                    })
                })
                .collect()
        };
        MaxPlusPresentation::new(self.arity, scale_terms(&base.num_terms)?, scale_terms(&base.den_terms)?)
    }

    /// Rational-function product f_t * g_t (max-plus: f + g); same as add.
    pub fn mul_lift(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }

    /// Rational-function quotient f_t / g_t (max-plus: f - g).
    pub fn div_lift(&self, other: &Self) -> Result<Self> {
        self.sub(other)
    }

    /// Divide the rational lift by a positive integer: denominator weights
    /// multiplied by n. Max-plus function unchanged.
    pub fn div_weight(&self, n: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("division weight must be >= 1".into()));
        }
        let mut out = self.clone();
        for t in &mut out.den_terms {
            t.weight = t.weight.saturating_mul(n);
        }
        Ok(out)
    }

    /// (lift of self)^k by repeated cross-multiplication; exact as a
    /// rational function.
    pub fn pow_lift(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(Self::constant(self.arity, 0.0));
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.add(self)?;
        }
        Ok(acc)
    }

    /// Composition phi(g_1, ..., g_n): substitute a presentation for each
    /// coordinate. Exact on the (max,+) side; integer exponents compose
    /// the rational lifts exactly (fractional exponents scale the inner
    /// presentation termwise, a tropically equivalent choice).
    pub fn substitute(&self, args: &[Self]) -> Result<Self> {
        if args.len() != self.arity {
            return Err(Error::Arity { expected: self.arity, got: args.len() });
        }
        let arity = args
            .first()
            .map(|g| g.arity)
            .ok_or_else(|| Error::Input("substitute needs at least one argument".into()))?;
        for g in args {
            if g.arity != arity {
                return Err(Error::Arity { expected: arity, got: g.arity });
            }
        }
        let term_fn = |t: &AffineTerm| -> Result<MaxPlusPresentation> {
            let mut acc = MaxPlusPresentation::constant(arity, t.offset);
            for (c, g) in t.coeffs.iter().zip(args) {
                if c.is_zero() {
                    continue;
                }
                let factor = if *c.denom() == 1 {
                    let base = if *c.numer() < 0 { g.neg() } else { g.clone() };
                    let k = u32::try_from(c.numer().unsigned_abs())
                        .map_err(|_| Error::Overflow("exponent too large to compose".into()))?;
                    base.pow_lift(k)?
                } else {
                    g.scale_rational(*c)?
                };
                acc = acc.add(&factor)?;
            }
            // carry the term multiplicity into the lift
            if t.weight > 1 {
                acc = acc.scale(t.weight)?;
            }
            Ok(acc)
        };
        let side = |terms: &[AffineTerm]| -> Result<MaxPlusPresentation> {
            let parts: Result<Vec<_>> = terms.iter().map(term_fn).collect();
            MaxPlusPresentation::max_of(&parts?)
        };
        side(&self.num_terms)?.sub(&side(&self.den_terms)?)
    }

    fn same_arity(&self, other: &Self) -> Result<()> {
        if self.arity != other.arity {
            return Err(Error::Arity { expected: self.arity, got: other.arity });
        }
        Ok(())
    }

    /// Analytic gradient of the rational lift at positive z (quotient rule
    /// on the two weighted polynomials).
    pub fn rational_gradient(&self, t: TropicalParam, z: &[f64]) -> Result<Vec<f64>> {
        self.check_point(z)?;
        if let Some(bad) = z.iter().find(|v| **v <= 0.0) {
            return Err(Error::Domain(format!("gradient requires positive inputs, got {bad}")));
        }
        let num = Self::poly_eval(&self.num_terms, t, z);
        let den = Self::poly_eval(&self.den_terms, t, z);
        if !num.is_finite() || !den.is_finite() || den == 0.0 {
            return Err(Error::Overflow(
                "intermediate power out of range; rescale t or the box".into(),
            ));
        }
        let partial = |terms: &[AffineTerm], i: usize| -> f64 {
            terms
                .iter()
                .map(|term| {
                    let a = term.coeffs[i];
                    if a.is_zero() {
                        return 0.0;
                    }
                    let mut v = (term.weight as f64) * t.pow(term.offset);
                    for (c, zi) in term.coeffs.iter().zip(z) {
                        if !c.is_zero() {
                            v *= zi.powf(c.to_f64().unwrap());
                        }
                    }
                    v * a.to_f64().unwrap() / z[i]
                })
                .sum()
        };
        let mut grad = Vec::with_capacity(self.arity);
        for i in 0..self.arity {
            let dn = partial(&self.num_terms, i);
            let dd = partial(&self.den_terms, i);
            let g = (dn * den - num * dd) / (den * den);
            if !g.is_finite() {
                return Err(Error::Overflow("gradient overflow; rescale t or the box".into()));
            }
            grad.push(g);
        }
        Ok(grad)
    }
}

/// Outcome of sampling-based equivalence checking.
#[derive(Debug, Clone, PartialEq)]
pub enum EquivalenceVerdict {
    EquivalentOnSamples,
    Counterexample { point: Vec<f64>, v1: f64, v2: f64 },
}

/// Sample the box uniformly (seeded) plus all box corners; report the first
/// point where the two functions differ by more than 1e-9. A semi-decision.
pub fn check_equivalence(
    p1: &MaxPlusPresentation,
    p2: &MaxPlusPresentation,
    boxes: &[(f64, f64)],
    samples: usize,
    seed: u64,
) -> Result<EquivalenceVerdict> {
    if p1.arity() != p2.arity() {
        return Err(Error::Arity { expected: p1.arity(), got: p2.arity() });
    }
    if boxes.len() != p1.arity() {
        return Err(Error::Arity { expected: p1.arity(), got: boxes.len() });
    }
    let n = p1.arity();
    let check = |point: &[f64]| -> Result<Option<EquivalenceVerdict>> {
        let v1 = p1.eval_maxplus(point)?;
        let v2 = p2.eval_maxplus(point)?;
        if (v1 - v2).abs() > 1e-9 {
            return Ok(Some(EquivalenceVerdict::Counterexample {
                point: point.to_vec(),
                v1,
                v2,
            }));
        }
        Ok(None)
    };
    if n <= 20 {
        for mask in 0..(1usize << n) {
            let corner: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { boxes[i].1 } else { boxes[i].0 })
                .collect();
            if let Some(v) = check(&corner)? {
                return Ok(v);
            }
        }
    }
    let mut rng = crate::seeded_rng(seed);
    for _ in 0..samples {
        let point: Vec<f64> = boxes.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect();
        if let Some(v) = check(&point)? {
            return Ok(v);
        }
    }
    Ok(EquivalenceVerdict::EquivalentOnSamples)
}

/// Build a one-variable presentation from an anchor point and explicit
/// rational slopes between consecutive breakpoints. `slopes` has one more
/// entry than `breaks`; piece i applies left of `breaks[i]` (the last one to
/// the right of the final break). Exact: the convex and concave parts are
/// assembled from the slope jumps.
pub fn pl_from_pieces(anchor: (f64, f64), breaks: &[f64], slopes: &[Rational]) -> Result<MaxPlusPresentation> {
    if slopes.len() != breaks.len() + 1 {
        return Err(Error::Input("need one more slope than breakpoints".into()));
    }
    if breaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("breakpoints must be strictly increasing".into()));
    }
    // Value at each breakpoint, derived exactly from the anchor.
    let piece_of = |x: f64| -> usize {
        let mut i = 0;
        while i < breaks.len() && x >= breaks[i] {
            i += 1;
        }
        i
    };
    let (ax, ay) = anchor;
    let a_piece = piece_of(ax);
    // value(x) walking from the anchor
    let value_at = |x: f64| -> f64 {
        let mut v = ay;
        let mut cur = ax;
        if x >= ax {
            let mut p = a_piece;
            while p < breaks.len() && breaks[p] <= x {
                v += slopes[p].to_f64().unwrap() * (breaks[p] - cur);
                cur = breaks[p];
                p += 1;
            }
            v + slopes[p].to_f64().unwrap() * (x - cur)
        } else {
            let mut p = a_piece;
            while p > 0 && breaks[p - 1] >= x {
                v -= slopes[p].to_f64().unwrap() * (cur - breaks[p - 1]);
                cur = breaks[p - 1];
                p -= 1;
            }
            v - slopes[p].to_f64().unwrap() * (cur - x)
        }
    };
    // f = convex part - concave-deficit part, both maxes of affines.
    // Walk pieces left to right accumulating slope jumps.
    let mut convex: Vec<(Rational, f64)> = Vec::new(); // (slope, value at its active start)
    let mut concave: Vec<(Rational, f64)> = Vec::new();
    // Start with the leftmost piece in the convex list, concave part 0.
    // Each +jump adds a new convex affine; each -jump adds to the concave
    // side (which is subtracted).
    let mut c_slope = slopes[0];
    let mut d_slope = Rational::zero();
    // Anchor both parts so that f = C - D holds: choose D(leftmost) = 0.
    // Track affine representations as (slope, intercept-at-0) pairs in exact
    // slope/f64 intercept form: intercept = value_at_break - slope * break.
    let x0 = breaks.first().copied().unwrap_or(0.0) - 1.0;
    let f0 = value_at(x0);
    convex.push((c_slope, f0 - c_slope.to_f64().unwrap() * x0));
    concave.push((Rational::zero(), 0.0));
    let d_at = |concave: &[(Rational, f64)], x: f64| -> f64 {
        concave
            .iter()
            .map(|(s, b)| s.to_f64().unwrap() * x + b)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    for (i, &bx) in breaks.iter().enumerate() {
        let jump = slopes[i + 1] - slopes[i];
        if jump > Rational::zero() {
            // convex crease: new convex affine active from bx
            c_slope += jump;
            let dval = d_at(&concave, bx);
            let fval = value_at(bx);
            let cval = fval + dval;
            convex.push((c_slope, cval - c_slope.to_f64().unwrap() * bx));
        } else if jump < Rational::zero() {
            // concave crease: new concave affine active from bx
            d_slope += -jump;
            let dval = d_at(&concave, bx);
            concave.push((d_slope, dval - d_slope.to_f64().unwrap() * bx));
        }
    }
    let to_terms = |list: &[(Rational, f64)]| -> Vec<AffineTerm> {
        list.iter()
            .map(|(s, b)| AffineTerm::new(*b, vec![*s]))
            .collect()
    };
    MaxPlusPresentation::new(1, to_terms(&convex), to_terms(&concave))
}

// ---- serde: the external presentation document -------------------------

#[derive(Serialize, Deserialize)]
struct TermDoc {
    offset: f64,
    coeffs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PresentationDoc {
    arity: usize,
    num: Vec<TermDoc>,
    den: Vec<TermDoc>,
}

const MAX_SERIALIZED_TERMS: u128 = 100_000;

impl Serialize for MaxPlusPresentation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let expand = |terms: &[AffineTerm]| -> std::result::Result<Vec<TermDoc>, S::Error> {
            let total = MaxPlusPresentation::weighted_len(terms);
            if total > MAX_SERIALIZED_TERMS {
                return Err(serde::ser::Error::custom(format!(
                    "presentation too large to serialize ({total} weighted terms)"
                )));
            }
            let mut out = Vec::new();
            for t in terms {
                for _ in 0..t.weight {
                    out.push(TermDoc {
                        offset: t.offset,
                        coeffs: t.coeffs.iter().map(format_rational).collect(),
                    });
                }
            }
            Ok(out)
        };
        let doc = PresentationDoc {
            arity: self.arity,
            num: expand(&self.num_terms)?,
            den: expand(&self.den_terms)?,
        };
        doc.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MaxPlusPresentation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = PresentationDoc::deserialize(deserializer)?;
        let conv = |docs: Vec<TermDoc>| -> std::result::Result<Vec<AffineTerm>, D::Error> {
            docs.into_iter()
                .map(|d| {
                    let coeffs: std::result::Result<Vec<_>, D::Error> = d
                        .coeffs
                        .iter()
                        .map(|s| parse_rational(s).map_err(D::Error::custom))
                        .collect();
                    Ok(AffineTerm::new(d.offset, coeffs?))
                })
                .collect()
        };
        MaxPlusPresentation::new(doc.arity, conv(doc.num)?, conv(doc.den)?).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    /// phi(y, x) = max(x, -x) - y with arity 2, variable order (y, x).
    pub(crate) fn abs_minus() -> MaxPlusPresentation {
        MaxPlusPresentation::new(
            2,
            vec![
                AffineTerm::new(0.0, vec![r(0, 1), r(1, 1)]),
                AffineTerm::new(0.0, vec![r(0, 1), r(-1, 1)]),
            ],
            vec![AffineTerm::new(0.0, vec![r(1, 1), r(0, 1)])],
        )
        .unwrap()
    }

    fn relu() -> MaxPlusPresentation {
        // max(0, x)
        MaxPlusPresentation::new(
            1,
            vec![AffineTerm::constant(0.0, 1), AffineTerm::new(0.0, vec![r(1, 1)])],
            vec![AffineTerm::constant(0.0, 1)],
        )
        .unwrap()
    }

    #[test]
    fn eval_maxplus_examples() {
        // |2| - 1 = 1
        assert_eq!(abs_minus().eval_maxplus(&[1.0, 2.0]).unwrap(), 1.0);
        // max(0, x) at x = -3 -> 0
        assert_eq!(relu().eval_maxplus(&[-3.0]).unwrap(), 0.0);
        // symmetry at origin
        assert_eq!(abs_minus().eval_maxplus(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn eval_maxplus_arity_mismatch() {
        assert!(matches!(
            relu().eval_maxplus(&[1.0, 2.0]),
            Err(Error::Arity { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn dequantized_examples() {
        // two identical terms: phi_t(0) = log_t 2
        let two = MaxPlusPresentation::new(
            1,
            vec![AffineTerm::with_weight(0.0, vec![r(1, 1)], 2)],
            vec![AffineTerm::constant(0.0, 1)],
        )
        .unwrap();
        let t = TropicalParam::new(10.0).unwrap();
        let v = two.eval_dequantized(t, &[0.0]).unwrap();
        assert!((v - 2f64.log10()).abs() < 1e-12, "{v}");

        // max(0, x) at x = 1, t = 10: log10(1 + 10)
        let v = relu().eval_dequantized(t, &[1.0]).unwrap();
        assert!((v - 11f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn dequantization_gap_bound_random() {
        let t = TropicalParam::new(1e6).unwrap();
        let pres = abs_minus();
        let m = pres.components() as f64;
        let bound = m.ln() / 1e6f64.ln();
        let mut rng = crate::seeded_rng(7);
        for _ in 0..10_000 {
            let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let d = (pres.eval_dequantized(t, &p).unwrap() - pres.eval_maxplus(&p).unwrap()).abs();
            assert!(d <= bound + 1e-12, "d = {d}, bound = {bound}");
        }
    }

    #[test]
    fn rational_examples() {
        let t = TropicalParam::new(3.7).unwrap();
        // f(w, z) = w^-1 (z + z^-1): z = 2, w = 1 -> 2.5, any t
        let f = abs_minus();
        let v = f.eval_rational(t, &[1.0, 2.0], RationalMode::Linear).unwrap();
        assert!((v - 2.5).abs() < 1e-12);

        // relu: t = 10, z = 10 -> 11; log mode at 1 -> log10(11)
        let t10 = TropicalParam::new(10.0).unwrap();
        let v = relu().eval_rational(t10, &[10.0], RationalMode::Linear).unwrap();
        assert!((v - 11.0).abs() < 1e-12);
        let lg = relu().eval_rational(t10, &[1.0], RationalMode::Log).unwrap();
        assert_eq!(lg, relu().eval_dequantized(t10, &[1.0]).unwrap());
        assert!((lg - 11f64.log10()).abs() < 1e-12);

        // psi = max(phi, -y): g(w, z) = w^-1 (z + z^-1 + 1): g(1, 2) = 3.5
        let minus_y = MaxPlusPresentation::new(
            2,
            vec![AffineTerm::constant(0.0, 2)],
            vec![AffineTerm::new(0.0, vec![r(1, 1), r(0, 1)])],
        )
        .unwrap();
        let g = f.max2(&minus_y).unwrap();
        let v = g.eval_rational(t, &[1.0, 2.0], RationalMode::Linear).unwrap();
        assert!((v - 3.5).abs() < 1e-12);
    }

    #[test]
    fn linear_mode_errors() {
        let t = TropicalParam::new(10.0).unwrap();
        assert!(matches!(
            abs_minus().eval_rational(t, &[1.0, -2.0], RationalMode::Linear),
            Err(Error::Domain(_))
        ));
        // t^offset past the representable range trips the overflow advice
        let shifted = MaxPlusPresentation::new(
            1,
            vec![AffineTerm::new(400.0, vec![r(1, 1)])],
            vec![AffineTerm::constant(0.0, 1)],
        )
        .unwrap();
        let t10 = TropicalParam::new(10.0).unwrap();
        assert!(matches!(
            shifted.eval_rational(t10, &[1.0], RationalMode::Linear),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn stats_examples() {
        let s = abs_minus().stats();
        assert_eq!(s.components, 2);
        assert_eq!(s.lipschitz, 2.0);
        let s = relu().stats();
        assert_eq!(s.components, 2);
        assert_eq!(s.lipschitz, 1.0);
        let c = MaxPlusPresentation::constant(1, 0.0).stats();
        assert_eq!(c.components, 1);
        assert_eq!(c.lipschitz, 0.0);
        assert_eq!(c.lipschitz_tilde, 1.0);
    }

    #[test]
    fn lipschitz_certified_by_sampling() {
        let pres = abs_minus();
        let c = pres.stats().lipschitz;
        let mut rng = crate::seeded_rng(11);
        for _ in 0..10_000 {
            let a = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let b = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let d = (pres.eval_maxplus(&a).unwrap() - pres.eval_maxplus(&b).unwrap()).abs();
            let sup = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
            assert!(d <= c * sup + 1e-12);
        }
    }

    #[test]
    fn scale_properties() {
        let f = relu();
        let s1 = f.scale(1).unwrap();
        assert_eq!(f, s1);
        let s3 = f.scale(3).unwrap();
        assert_eq!(s3.components(), 3 * f.components());
        let t = TropicalParam::new(7.0).unwrap();
        let mut rng = crate::seeded_rng(3);
        for _ in 0..100 {
            let x = rng.gen_range(-3.0..3.0);
            assert_eq!(f.eval_maxplus(&[x]).unwrap(), s3.eval_maxplus(&[x]).unwrap());
            let z = rng.gen_range(0.1..10.0);
            let a = f.eval_rational(t, &[z], RationalMode::Linear).unwrap();
            let b = s3.eval_rational(t, &[z], RationalMode::Linear).unwrap();
            assert!((b - 3.0 * a).abs() < 1e-12 * b.abs());
        }
    }

    #[test]
    fn equivalence_examples() {
        let f = abs_minus();
        let minus_y = MaxPlusPresentation::new(
            2,
            vec![AffineTerm::constant(0.0, 2)],
            vec![AffineTerm::new(0.0, vec![r(1, 1), r(0, 1)])],
        )
        .unwrap();
        let g = f.max2(&minus_y).unwrap();
        let boxes = [(-3.0, 3.0), (-3.0, 3.0)];
        assert_eq!(
            check_equivalence(&f, &g, &boxes, 500, 1).unwrap(),
            EquivalenceVerdict::EquivalentOnSamples
        );
        // relu vs x: counterexample at negative x
        let x = MaxPlusPresentation::coordinate(1, 0);
        match check_equivalence(&relu(), &x, &[(-2.0, 2.0)], 500, 1).unwrap() {
            EquivalenceVerdict::Counterexample { point, v1, v2 } => {
                assert!(point[0] < 0.0);
                assert!(v1 > v2);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
        let s5 = f.scale(5).unwrap();
        assert_eq!(
            check_equivalence(&f, &s5, &boxes, 500, 1).unwrap(),
            EquivalenceVerdict::EquivalentOnSamples
        );
    }

    #[test]
    fn gradient_examples() {
        let t = TropicalParam::new(10.0).unwrap();
        // f(z) = 1 + z
        let one_plus = MaxPlusPresentation::new(
            1,
            vec![AffineTerm::constant(0.0, 1), AffineTerm::new(0.0, vec![r(1, 1)])],
            vec![AffineTerm::constant(0.0, 1)],
        )
        .unwrap();
        let g = one_plus.rational_gradient(t, &[2.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12);

        // f(w, z) = w^-1 (z + z^-1) at (1, 2): df/dz = 0.75, df/dw = -2.5
        let f = abs_minus();
        let g = f.rational_gradient(t, &[1.0, 2.0]).unwrap();
        assert!((g[1] - 0.75).abs() < 1e-12);
        assert!((g[0] + 2.5).abs() < 1e-12);

        // f(z) = 2z/(1+z) at 1: f' = 0.5
        let f = MaxPlusPresentation::new(
            1,
            vec![AffineTerm::with_weight(0.0, vec![r(1, 1)], 2)],
            vec![AffineTerm::constant(0.0, 1), AffineTerm::new(0.0, vec![r(1, 1)])],
        )
        .unwrap();
        let g = f.rational_gradient(t, &[1.0]).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = TropicalParam::new(5.0).unwrap();
        let f = abs_minus();
        let mut rng = crate::seeded_rng(5);
        for _ in 0..50 {
            let z = [rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)];
            let g = f.rational_gradient(t, &z).unwrap();
            for i in 0..2 {
                let h = 1e-6 * z[i];
                let mut zp = z;
                zp[i] += h;
                let mut zm = z;
                zm[i] -= h;
                let fd = (f.eval_rational(t, &zp, RationalMode::Linear).unwrap()
                    - f.eval_rational(t, &zm, RationalMode::Linear).unwrap())
                    / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() <= 1e-4 * g[i].abs().max(1.0),
                    "component {i}: {} vs {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn pl_from_pieces_stairs_shape() {
        // xi(x) = max(min(x + 1/4, 5), x - 1/4): breaks at 4.75, 5.25,
        // slopes 1, 0, 1.
        let xi = pl_from_pieces((0.0, 0.25), &[4.75, 5.25], &[r(1, 1), r(0, 1), r(1, 1)]).unwrap();
        for (x, want) in [(5.6, 5.35), (4.0, 4.25), (5.0, 5.0), (6.0, 5.75)] {
            let got = xi.eval_maxplus(&[x]).unwrap();
            assert!((got - want).abs() < 1e-12, "xi({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn substitute_composition() {
        // relu(x + 1) via substitution
        let shift = MaxPlusPresentation::coordinate(1, 0).add_const(1.0);
        let comp = relu().substitute(&[shift]).unwrap();
        for x in [-3.0, -1.0, 0.0, 2.5] {
            let want = (x + 1.0f64).max(0.0);
            assert!((comp.eval_maxplus(&[x]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn json_roundtrip() {
        let f = abs_minus();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"arity\":2"));
        assert!(s.contains("\"num\""));
        let back: MaxPlusPresentation = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        // weighted terms expand to repetition
        let two = relu().scale(2).unwrap();
        let s = serde_json::to_string(&two).unwrap();
        let back: MaxPlusPresentation = serde_json::from_str(&s).unwrap();
        assert_eq!(back.components(), two.components());
    }
}
