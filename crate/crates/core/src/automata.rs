//! Finite automata acting on words and infinite strings over alphabets
//! embedded in the reals: Mealy and lookahead variants, invertibility and
//! finite-order detection on tree levels.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::HashMap;

/// A word over the alphabet, stored as symbol indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeWord(pub Vec<usize>);

impl TreeWord {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An automaton with output lookahead `alpha` and transition lookahead
/// `beta`. Tables are stored flattened, row-major over symbol tuples; the
/// automaton is Mealy exactly when alpha = beta = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AutomatonSpec {
    /// Embedded alphabet values, strictly increasing.
    pub alphabet: Vec<f64>,
    /// Embedded state values, strictly increasing.
    pub states: Vec<f64>,
    pub alpha: usize,
    pub beta: usize,
    /// psi[q][flat(k_i..k_{i+alpha})] -> symbol index
    psi: Vec<Vec<usize>>,
    /// phi[q][flat(k_i..k_{i+beta})] -> state index
    phi: Vec<Vec<usize>>,
}

fn strictly_sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl AutomatonSpec {
    pub fn new(
        alphabet: Vec<f64>,
        states: Vec<f64>,
        alpha: usize,
        beta: usize,
        psi: Vec<Vec<usize>>,
        phi: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let s = alphabet.len();
        let q = states.len();
        if s == 0 || q == 0 {
            return Err(Error::Input("alphabet and state set must be nonempty".into()));
        }
        if !strictly_sorted(&alphabet) || !strictly_sorted(&states) {
            return Err(Error::Input("embedded values must be strictly sorted".into()));
        }
        let check_table = |table: &[Vec<usize>], look: usize, range: usize, name: &str| -> Result<()> {
            if table.len() != q {
                return Err(Error::Input(format!("{name} must have one row per state")));
            }
            let width = s.pow(look as u32 + 1);
            for row in table {
                if row.len() != width {
                    return Err(Error::Input(format!(
                        "{name} rows must have |S|^(lookahead+1) = {width} entries"
                    )));
                }
                if row.iter().any(|&v| v >= range) {
                    return Err(Error::Input(format!("{name} entry out of range")));
                }
            }
            Ok(())
        };
        check_table(&psi, alpha, s, "psi")?;
        check_table(&phi, beta, q, "phi")?;
        Ok(AutomatonSpec { alphabet, states, alpha, beta, psi, phi })
    }

    pub fn symbol_count(&self) -> usize {
        self.alphabet.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn is_mealy(&self) -> bool {
        self.alpha == 0 && self.beta == 0
    }

    pub fn psi_entry(&self, state: usize, symbols: &[usize]) -> usize {
        self.psi[state][self.flat(symbols)]
    }

    pub fn phi_entry(&self, state: usize, symbols: &[usize]) -> usize {
        self.phi[state][self.flat(symbols)]
    }

    fn flat(&self, symbols: &[usize]) -> usize {
        let s = self.symbol_count();
        symbols.iter().fold(0, |acc, &k| acc * s + k)
    }

    fn window(&self, input: &[usize], start: usize, len: usize, padding: usize) -> Vec<usize> {
        (start..start + len)
            .map(|i| input.get(i).copied().unwrap_or(padding))
            .collect()
    }

    /// Apply A_q once with the given padding for lookahead overruns.
    fn act_single(&self, state: usize, input: &[usize], padding: usize) -> Vec<usize> {
        let mut q = state;
        let mut out = Vec::with_capacity(input.len());
        for i in 0..input.len() {
            let wa = self.window(input, i, self.alpha + 1, padding);
            let wb = self.window(input, i, self.beta + 1, padding);
            out.push(self.psi[q][self.flat(&wa)]);
            q = self.phi[q][self.flat(&wb)];
        }
        out
    }

    /// Apply the composition A_{q^L} o ... o A_{q^0} to a finite word.
    /// Lookahead windows that run past the end read `padding`.
    pub fn act(&self, state_word: &[usize], input: &TreeWord, padding: usize) -> Result<TreeWord> {
        if padding >= self.symbol_count() {
            return Err(Error::Input("padding symbol index out of range".into()));
        }
        if input.0.iter().any(|&k| k >= self.symbol_count()) {
            return Err(Error::Input("input symbol index out of range".into()));
        }
        if state_word.iter().any(|&q| q >= self.state_count()) {
            return Err(Error::Input("state index out of range".into()));
        }
        let mut word = input.0.clone();
        for &q in state_word {
            word = self.act_single(q, &word, padding);
        }
        Ok(TreeWord(word))
    }

    /// True iff every output row psi(q, .) is a permutation of S.
    pub fn is_invertible_mealy(&self) -> Result<bool> {
        if !self.is_mealy() {
            return Err(Error::Contract("invertibility test requires a Mealy automaton".into()));
        }
        let s = self.symbol_count();
        Ok(self.psi.iter().all(|row| {
            let mut seen = vec![false; s];
            row.iter().for_each(|&v| seen[v] = true);
            seen.iter().all(|&b| b)
        }))
    }

    /// Brute-force injectivity of each A_q on words of the given depth, for
    /// every padding choice.
    pub fn check_invertible_general(&self, depth: usize) -> Result<InvertibilityVerdict> {
        if depth == 0 {
            return Err(Error::Input("depth must be >= 1".into()));
        }
        let s = self.symbol_count();
        let total = (s as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
        if total > 10_000_000 {
            return Err(Error::Resource(format!(
                "|S|^depth = {total} exceeds the 1e7 enumeration limit"
            )));
        }
        let total = total as usize;
        for q in 0..self.state_count() {
            for padding in 0..s {
                let mut images: HashMap<Vec<usize>, Vec<usize>> = HashMap::with_capacity(total);
                for idx in 0..total {
                    let word = unflatten(idx, s, depth);
                    let out = self.act_single(q, &word, padding);
                    if let Some(prev) = images.insert(out, word.clone()) {
                        return Ok(InvertibilityVerdict::Collision {
                            state: q,
                            padding,
                            first: TreeWord(prev),
                            second: TreeWord(word),
                        });
                    }
                }
            }
        }
        Ok(InvertibilityVerdict::InjectiveToDepth(depth))
    }

    /// Order of the permutation induced by A_{state_word} on S^level,
    /// as the lcm of its cycle lengths.
    pub fn order_on_level(
        &self,
        state_word: &[usize],
        level: usize,
        cap: u128,
    ) -> Result<LevelOrder> {
        if !self.is_mealy() || !self.is_invertible_mealy()? {
            return Err(Error::Contract(
                "order_on_level requires an invertible Mealy automaton".into(),
            ));
        }
        if level == 0 {
            return Err(Error::Input("level must be >= 1".into()));
        }
        let s = self.symbol_count();
        let total = (s as u128).checked_pow(level as u32).unwrap_or(u128::MAX);
        if total > 10_000_000 {
            return Err(Error::Resource("level too deep to enumerate".into()));
        }
        let total = total as usize;
        let mut perm = vec![0usize; total];
        for idx in 0..total {
            let word = unflatten(idx, s, level);
            let out = self.act(state_word, &TreeWord(word), 0)?;
            perm[idx] = out.0.iter().fold(0, |acc, &k| acc * s + k);
        }
        let mut seen = vec![false; total];
        let mut order: u128 = 1;
        for start in 0..total {
            if seen[start] {
                continue;
            }
            let mut len: u128 = 0;
            let mut cur = start;
            while !seen[cur] {
                seen[cur] = true;
                cur = perm[cur];
                len += 1;
            }
            order = lcm(order, len);
            if order > cap {
                return Ok(LevelOrder::Exceeded);
            }
        }
        Ok(LevelOrder::Order(order))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvertibilityVerdict {
    InjectiveToDepth(usize),
    Collision { state: usize, padding: usize, first: TreeWord, second: TreeWord },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelOrder {
    Order(u128),
    Exceeded,
}

fn unflatten(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0usize; len];
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    out
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: u128, b: u128) -> u128 {
    a / gcd(a, b) * b
}

/// Built-in automata used throughout the test suites.
pub fn builtin(name: &str) -> Result<AutomatonSpec> {
    match name {
        // psi(q0,.) = id, psi(q1,.) = swap, phi(., s_i) = q^i.
        // Embeddings fixed at q0 = s0 = 0, q1 = s1 = 3.
        "lamplighter" => AutomatonSpec::new(
            vec![0.0, 3.0],
            vec![0.0, 3.0],
            0,
            0,
            vec![vec![0, 1], vec![1, 0]],
            vec![vec![0, 1], vec![0, 1]],
        ),
        // alpha = beta = 1; output swaps unless the state is q0 and the
        // lookahead symbol is s1; states alternate every step.
        "example_4_1" => AutomatonSpec::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            1,
            1,
            vec![
                // q0: tuples (k, s): swap k iff s = s0
                vec![1, 0, 0, 1],
                // q1: always swap k
                vec![1, 1, 0, 0],
            ],
            vec![
                // state alternates regardless of symbols
                vec![1, 1, 1, 1],
                vec![0, 0, 0, 0],
            ],
        ),
        // States a, b, c, d, e(=id) over {0, 1}:
        // a swaps and goes to e; b = (a, c); c = (a, d); d = (e, b).
        "grigorchuk" => AutomatonSpec::new(
            vec![0.0, 1.0],
            (0..5).map(|i| i as f64).collect(),
            0,
            0,
            vec![
                vec![1, 0], // a
                vec![0, 1], // b
                vec![0, 1], // c
                vec![0, 1], // d
                vec![0, 1], // e
            ],
            vec![
                vec![4, 4], // a -> e, e
                vec![0, 2], // b -> a, c
                vec![0, 3], // c -> a, d
                vec![4, 1], // d -> e, b
                vec![4, 4], // e
            ],
        ),
        // One state, two symbols, acts trivially at every level.
        "identity2" => AutomatonSpec::new(
            vec![0.0, 1.0],
            vec![0.0],
            0,
            0,
            vec![vec![0, 1]],
            vec![vec![0, 0]],
        ),
        other => Err(Error::Input(format!("unknown builtin automaton {other:?}"))),
    }
}

// ---- serde: the external automaton document ----------------------------

#[derive(Serialize, Deserialize)]
struct AutomatonDoc {
    #[serde(rename = "S")]
    s: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<f64>,
    alpha: usize,
    beta: usize,
    psi: serde_json::Value,
    phi: serde_json::Value,
}

fn nest(row: &[usize], base: usize, depth: usize) -> serde_json::Value {
    if depth == 0 {
        debug_assert_eq!(row.len(), 1);
        return serde_json::Value::from(row[0]);
    }
    let chunk = row.len() / base;
    serde_json::Value::Array(
        (0..base)
            .map(|i| nest(&row[i * chunk..(i + 1) * chunk], base, depth - 1))
            .collect(),
    )
}

fn flatten_value(v: &serde_json::Value, base: usize, depth: usize, out: &mut Vec<usize>) -> Result<()> {
    if depth == 0 {
        let n = v
            .as_u64()
            .ok_or_else(|| Error::Input("table leaf must be an index".into()))?;
        out.push(n as usize);
        return Ok(());
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Input("table level must be an array".into()))?;
    if arr.len() != base {
        return Err(Error::Input(format!("table level must have |S| = {base} entries")));
    }
    for item in arr {
        flatten_value(item, base, depth - 1, out)?;
    }
    Ok(())
}

impl Serialize for AutomatonSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let base = self.symbol_count();
        let table = |rows: &[Vec<usize>], look: usize| {
            serde_json::Value::Array(rows.iter().map(|r| nest(r, base, look + 1)).collect())
        };
        AutomatonDoc {
            s: self.alphabet.clone(),
            q: self.states.clone(),
            alpha: self.alpha,
            beta: self.beta,
            psi: table(&self.psi, self.alpha),
            phi: table(&self.phi, self.beta),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AutomatonSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = AutomatonDoc::deserialize(deserializer)?;
        let base = doc.s.len();
        let table = |v: &serde_json::Value, look: usize| -> Result<Vec<Vec<usize>>> {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::Input("table must be an array over states".into()))?;
            arr.iter()
                .map(|row| {
                    let mut flat = Vec::new();
                    flatten_value(row, base, look + 1, &mut flat)?;
                    Ok(flat)
                })
                .collect()
        };
        let psi = table(&doc.psi, doc.alpha).map_err(D::Error::custom)?;
        let phi = table(&doc.phi, doc.beta).map_err(D::Error::custom)?;
        AutomatonSpec::new(doc.s, doc.q, doc.alpha, doc.beta, psi, phi).map_err(D::Error::custom)
    }
}
