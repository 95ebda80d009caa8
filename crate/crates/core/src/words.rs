//! Finite words over `{0, 1, 2}` and the sliding-window admissibility
//! constraint `(i, j, L)`: every length-`L` window holds between `i` and `j`
//! occurrences of the symbol `2`.
//!
//! Words restricted to `{0, 2}` are bit-packed into a `u64` (bit set = symbol
//! `2`) so window counts reduce to population counts on masked ranges.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Longest window that fits the packed representation.
pub const MAX_WINDOW: usize = 63;

/// Default cap on raw (exponential) enumeration work.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 26;

/// A finite word over the alphabet `{0, 1, 2}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(&s) = symbols.iter().find(|&&s| s > 2) {
            return Err(Error::BadSymbol {
                symbol: s,
                allowed: "{0,1,2}",
            });
        }
        Ok(Word(symbols))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Unpacks `len` symbols of a packed `{0,2}` word, most significant bit first.
    pub fn from_packed(bits: u64, len: usize) -> Self {
        Word(
            (0..len)
                .map(|p| if bits >> (len - 1 - p) & 1 == 1 { 2 } else { 0 })
                .collect(),
        )
    }

    pub fn repeat(symbol: u8, len: usize) -> Self {
        Word(vec![symbol; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&s| s != 1)
    }

    pub fn count(&self, symbol: u8) -> usize {
        self.0.iter().filter(|&&s| s == symbol).count()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn slice(&self, start: usize, end: usize) -> Word {
        Word(self.0[start..end].to_vec())
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// Packs a `{0,2}` word of length at most 64, first symbol in the most
    /// significant position.
    pub fn pack(&self) -> Result<u64> {
        if self.len() > 64 {
            return Err(Error::Precondition(format!(
                "cannot pack a word of length {}",
                self.len()
            )));
        }
        let mut bits = 0u64;
        for &s in &self.0 {
            bits <<= 1;
            match s {
                0 => {}
                2 => bits |= 1,
                _ => {
                    return Err(Error::BadSymbol {
                        symbol: s,
                        allowed: "{0,2}",
                    })
                }
            }
        }
        Ok(bits)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                '2' => Ok(2),
                other => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected symbol {other:?} in word"),
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Word(symbols))
    }
}

/// Window constraint: each length-`len` window contains between `i` and `j`
/// occurrences of symbol `2`.
///
/// `i == j` is accepted so that degenerate single-count constraints can be
/// represented; the sub-shift pieces of a schedule always have `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub i: usize,
    pub j: usize,
    pub len: usize,
}

impl Triple {
    pub fn new(i: usize, j: usize, len: usize) -> Result<Self> {
        let bad = |reason| Error::InvalidTriple { i, j, len, reason };
        if len == 0 {
            return Err(bad("window length must be positive"));
        }
        if len > MAX_WINDOW {
            return Err(bad("window length exceeds the packed-word limit"));
        }
        if i > j {
            return Err(bad("lower bound exceeds upper bound"));
        }
        if j > len {
            return Err(bad("upper bound exceeds window length"));
        }
        Ok(Triple { i, j, len })
    }

    /// The constraint obtained by exchanging the roles of the symbols `0` and `2`.
    pub fn complement(&self) -> Triple {
        Triple {
            i: self.len - self.j,
            j: self.len - self.i,
            len: self.len,
        }
    }

    pub fn admits_count(&self, c: usize) -> bool {
        (self.i..=self.j).contains(&c)
    }

    pub fn is_unconstrained(&self) -> bool {
        self.i == 0 && self.j == self.len
    }

    pub(crate) fn mask(&self) -> u64 {
        low_mask(self.len)
    }

    /// Whether a packed `len`-bit window is admissible.
    #[inline]
    pub fn admits_packed(&self, window: u64) -> bool {
        self.admits_count((window & self.mask()).count_ones() as usize)
    }

    /// Number of admissible windows, `sum_{c=i..j} C(L, c)`.
    pub fn window_count(&self) -> f64 {
        (self.i..=self.j).map(|c| binomial(self.len, c)).sum()
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.i, self.j, self.len)
    }
}

#[inline]
pub(crate) fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// True iff every length-`L` window of `w` is admissible.
///
/// Words shorter than the window are rejected rather than declared vacuously
/// admissible.
pub fn is_admissible(w: &Word, t: Triple) -> Result<bool> {
    if w.len() < t.len {
        return Err(Error::WordTooShort {
            word_len: w.len(),
            window: t.len,
        });
    }
    if let Some(&s) = w.symbols().iter().find(|&&s| s == 1) {
        return Err(Error::BadSymbol {
            symbol: s,
            allowed: "{0,2}",
        });
    }
    let sym = w.symbols();
    let mut count = sym[..t.len].iter().filter(|&&s| s == 2).count();
    if !t.admits_count(count) {
        return Ok(false);
    }
    for k in t.len..sym.len() {
        count += (sym[k] == 2) as usize;
        count -= (sym[k - t.len] == 2) as usize;
        if !t.admits_count(count) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(L - j, L - i)`: the range of symbol-`0` counts per admissible window.
pub fn window_count_range(t: Triple) -> (usize, usize) {
    (t.len - t.j, t.len - t.i)
}

/// Suffix states of length `L - 1` that can occur inside an admissible word.
fn suffix_states(t: Triple) -> Vec<u64> {
    let width = t.len - 1;
    let lo = t.i.saturating_sub(1);
    let hi = t.j.min(width);
    let mut states = Vec::new();
    for c in lo..=hi {
        for_each_with_popcount(width, c, |w| states.push(w));
    }
    states.sort_unstable();
    states
}

/// Calls `f` for every `width`-bit word with exactly `ones` bits set, in
/// increasing order. `width` must be below 64.
pub(crate) fn for_each_with_popcount(width: usize, ones: usize, mut f: impl FnMut(u64)) {
    debug_assert!(width < 64);
    if ones > width {
        return;
    }
    if ones == 0 {
        f(0);
        return;
    }
    let limit = 1u64 << width;
    let mut v = low_mask(ones);
    // Gosper's hack: next integer with the same popcount.
    while v < limit {
        f(v);
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
}

fn state_count_estimate(t: Triple) -> f64 {
    let width = t.len - 1;
    (t.i.saturating_sub(1)..=t.j.min(width))
        .map(|c| binomial(width, c))
        .sum()
}

/// Exact number of admissible words of length `n`, by dynamic programming
/// over the `(L-1)`-symbol suffix of the word.
pub fn count_admissible(t: Triple, n: usize, state_cap: u64) -> Result<u128> {
    if n < t.len {
        return Err(Error::WordTooShort {
            word_len: n,
            window: t.len,
        });
    }
    let estimate = state_count_estimate(t);
    if estimate > state_cap as f64 {
        return Err(Error::CapExceeded {
            what: "admissible-word DP states",
            estimate,
            cap: state_cap as f64,
        });
    }
    if t.len == 1 {
        let per_symbol = (t.i == 0) as u128 + (t.j >= 1) as u128;
        return per_symbol.checked_pow(n as u32).ok_or(Error::CapExceeded {
            what: "admissible-word count (u128 overflow)",
            estimate: (per_symbol as f64).powi(n as i32),
            cap: u128::MAX as f64,
        });
    }
    let states = suffix_states(t);
    let state_mask = low_mask(t.len - 1);
    let mut counts = vec![1u128; states.len()];
    let overflow = || Error::CapExceeded {
        what: "admissible-word count (u128 overflow)",
        estimate: f64::INFINITY,
        cap: u128::MAX as f64,
    };
    for _ in 0..(n - t.len + 1) {
        let mut next = vec![0u128; states.len()];
        for (idx, &w) in states.iter().enumerate() {
            if counts[idx] == 0 {
                continue;
            }
            for s in 0..2u64 {
                let window = (w << 1) | s;
                if !t.admits_packed(window) {
                    continue;
                }
                let to = states
                    .binary_search(&(window & state_mask))
                    .expect("suffix of an admissible window is a state");
                next[to] = next[to].checked_add(counts[idx]).ok_or_else(overflow)?;
            }
        }
        counts = next;
    }
    counts
        .into_iter()
        .try_fold(0u128, |acc, c| acc.checked_add(c))
        .ok_or_else(overflow)
}

/// `log sum_w exp(sum_m weight(w_m))` over admissible words of length `n`,
/// where `log_weight[0]` applies to symbol `0` and `log_weight[1]` to symbol `2`.
///
/// Same suffix-state recursion as [`count_admissible`], carried out in log
/// scale.
pub fn log_weighted_sum(t: Triple, n: usize, log_weight: [f64; 2], state_cap: u64) -> Result<f64> {
    if n < t.len {
        return Err(Error::WordTooShort {
            word_len: n,
            window: t.len,
        });
    }
    let estimate = state_count_estimate(t);
    if estimate > state_cap as f64 {
        return Err(Error::CapExceeded {
            what: "weighted word-sum DP states",
            estimate,
            cap: state_cap as f64,
        });
    }
    if t.len == 1 {
        let mut per = f64::NEG_INFINITY;
        if t.i == 0 {
            per = log_add(per, log_weight[0]);
        }
        if t.j >= 1 {
            per = log_add(per, log_weight[1]);
        }
        return Ok(per * n as f64);
    }
    let states = suffix_states(t);
    let state_mask = low_mask(t.len - 1);
    // Prefix weights of the first L-1 symbols.
    let mut values: Vec<f64> = states
        .iter()
        .map(|&w| {
            let twos = w.count_ones() as f64;
            let zeros = (t.len - 1) as f64 - twos;
            (zeros * log_weight[0] + twos * log_weight[1]).exp()
        })
        .collect();
    let weight = [log_weight[0].exp(), log_weight[1].exp()];
    let mut log_scale = 0.0;
    for _ in 0..(n - t.len + 1) {
        let mut next = vec![0.0f64; states.len()];
        for (idx, &w) in states.iter().enumerate() {
            let v = values[idx];
            if v == 0.0 {
                continue;
            }
            for s in 0..2u64 {
                let window = (w << 1) | s;
                if !t.admits_packed(window) {
                    continue;
                }
                let to = states
                    .binary_search(&(window & state_mask))
                    .expect("suffix of an admissible window is a state");
                next[to] += v * weight[s as usize];
            }
        }
        let total: f64 = next.iter().sum();
        if total == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        next.iter_mut().for_each(|x| *x /= total);
        log_scale += total.ln();
        values = next;
    }
    Ok(log_scale + values.iter().sum::<f64>().ln())
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Outcome of the union-disjointness check.
#[derive(Clone, Debug, PartialEq)]
pub struct DisjointnessReport {
    pub horizon: usize,
    pub words_checked: u64,
    /// `false` when the exhaustive search hit its budget and the report is
    /// based on random samples only.
    pub exhaustive: bool,
    pub counterexample: Option<Counterexample>,
}

impl DisjointnessReport {
    pub fn is_disjoint(&self) -> bool {
        self.counterexample.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub word: Word,
    /// Window start and the 1-based pieces certifying it.
    pub certificates: Vec<(usize, Vec<usize>)>,
}

/// Checks that every length-`n` word satisfying the union constraint (each
/// window start certified by at least one piece) is certified by one and the
/// same piece at every start position.
///
/// `pieces` are the symbol-2 window constraints of the pieces, in order.
/// Exhaustive depth-first enumeration with prefix pruning is attempted first;
/// once `node_budget` search nodes are spent the check falls back to
/// `samples` random descents seeded by `seed`.
pub fn verify_union_disjointness(
    pieces: &[Triple],
    n: usize,
    node_budget: u64,
    samples: u64,
    seed: u64,
) -> Result<DisjointnessReport> {
    if pieces.is_empty() {
        return Err(Error::Precondition("no pieces given".into()));
    }
    let max_len = pieces.iter().map(|t| t.len).max().unwrap();
    let min_len = pieces.iter().map(|t| t.len).min().unwrap();
    if n < max_len + min_len {
        return Err(Error::Precondition(format!(
            "horizon {n} shorter than max window {max_len} + min window {min_len}"
        )));
    }
    if n > 64 {
        return Err(Error::Precondition(format!(
            "horizon {n} exceeds the packed-word limit 64"
        )));
    }
    let search = UnionSearch {
        pieces,
        n,
        last_start: n - max_len,
    };

    let mut exhaustive = ExhaustiveState {
        budget: node_budget,
        spent: 0,
        words: 0,
        counterexample: None,
    };
    if search.dfs(0, 0, &mut exhaustive) {
        return Ok(DisjointnessReport {
            horizon: n,
            words_checked: exhaustive.words,
            exhaustive: true,
            counterexample: exhaustive.counterexample,
        });
    }

    log::warn!(
        "union-disjointness search exceeded {node_budget} nodes; switching to {samples} samples"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = 0;
    for _ in 0..samples {
        if let Some(bits) = search.random_descent(&mut rng) {
            words += 1;
            if let Some(cex) = search.check_leaf(bits) {
                return Ok(DisjointnessReport {
                    horizon: n,
                    words_checked: words,
                    exhaustive: false,
                    counterexample: Some(cex),
                });
            }
        }
    }
    Ok(DisjointnessReport {
        horizon: n,
        words_checked: words,
        exhaustive: false,
        counterexample: None,
    })
}

struct ExhaustiveState {
    budget: u64,
    spent: u64,
    words: u64,
    counterexample: Option<Counterexample>,
}

struct UnionSearch<'a> {
    pieces: &'a [Triple],
    n: usize,
    last_start: usize,
}

impl UnionSearch<'_> {
    // Prefix bits are stored LSB-first: bit m is position m.
    fn piece_possible(&self, bits: u64, m: usize, s: usize, t: &Triple) -> bool {
        let end = s + t.len;
        let known_end = end.min(m);
        if known_end <= s {
            return true;
        }
        let c = ((bits >> s) & low_mask(known_end - s)).count_ones() as usize;
        let remaining = end - known_end;
        c <= t.j && c + remaining >= t.i
    }

    fn prefix_viable(&self, bits: u64, m: usize) -> bool {
        let upto = self.last_start.min(m.saturating_sub(1));
        (0..=upto).all(|s| {
            self.pieces
                .iter()
                .any(|t| self.piece_possible(bits, m, s, t))
        })
    }

    fn certificates(&self, bits: u64, s: usize) -> Vec<usize> {
        self.pieces
            .iter()
            .enumerate()
            .filter(|(_, t)| t.admits_packed(bits >> s))
            .map(|(idx, _)| idx + 1)
            .collect()
    }

    fn check_leaf(&self, bits: u64) -> Option<Counterexample> {
        let certs: Vec<(usize, Vec<usize>)> = (0..=self.last_start)
            .map(|s| (s, self.certificates(bits, s)))
            .collect();
        let first = &certs[0].1;
        let consistent = first.len() == 1 && certs.iter().all(|(_, c)| c == first);
        if consistent {
            None
        } else {
            let word = Word((0..self.n).map(|m| 2 * ((bits >> m) & 1) as u8).collect());
            Some(Counterexample {
                word,
                certificates: certs,
            })
        }
    }

    /// Returns `false` if the node budget ran out.
    fn dfs(&self, bits: u64, m: usize, st: &mut ExhaustiveState) -> bool {
        st.spent += 1;
        if st.spent > st.budget {
            return false;
        }
        if m == self.n {
            st.words += 1;
            if st.counterexample.is_none() {
                st.counterexample = self.check_leaf(bits);
            }
            return true;
        }
        for s in 0..2u64 {
            let next = bits | (s << m);
            if self.prefix_viable(next, m + 1) && !self.dfs(next, m + 1, st) {
                return false;
            }
            if st.counterexample.is_some() {
                return true;
            }
        }
        true
    }

    fn random_descent(&self, rng: &mut ChaCha8Rng) -> Option<u64> {
        // Bounded random DFS: try symbols in random order, backtrack on dead ends.
        fn go(search: &UnionSearch<'_>, bits: u64, m: usize, rng: &mut ChaCha8Rng, fuel: &mut u32) -> Option<u64> {
            if m == search.n {
                return Some(bits);
            }
            if *fuel == 0 {
                return None;
            }
            *fuel -= 1;
            let first: u64 = rng.gen_range(0..2);
            for s in [first, 1 - first] {
                let next = bits | (s << m);
                if search.prefix_viable(next, m + 1) {
                    if let Some(w) = go(search, next, m + 1, rng, fuel) {
                        return Some(w);
                    }
                }
            }
            None
        }
        let mut fuel = 64 * self.n as u32;
        go(self, 0, 0, rng, &mut fuel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn t(i: usize, j: usize, l: usize) -> Triple {
        Triple::new(i, j, l).unwrap()
    }

    /// Raw enumeration oracle: every {0,2}-word of length n, checked directly.
    fn brute_count(t: Triple, n: usize) -> u128 {
        (0u64..(1 << n))
            .filter(|&bits| is_admissible(&Word::from_packed(bits, n), t).unwrap())
            .count() as u128
    }

    #[test]
    fn admissibility_examples() {
        assert!(is_admissible(&w("000"), t(0, 1, 3)).unwrap());
        assert!(!is_admissible(&w("022"), t(0, 1, 3)).unwrap());
        assert!(!is_admissible(&w("00202"), t(0, 1, 3)).unwrap());
        assert!(is_admissible(&w("00200"), t(0, 1, 3)).unwrap());
    }

    #[test]
    fn short_word_is_an_error() {
        assert_eq!(
            is_admissible(&w("02"), t(0, 1, 3)),
            Err(Error::WordTooShort {
                word_len: 2,
                window: 3
            })
        );
    }

    #[test]
    fn symbol_one_rejected() {
        assert!(matches!(
            is_admissible(&w("0120"), t(0, 2, 3)),
            Err(Error::BadSymbol { symbol: 1, .. })
        ));
    }

    #[test]
    fn triple_validation() {
        assert!(Triple::new(2, 1, 3).is_err());
        assert!(Triple::new(0, 4, 3).is_err());
        assert!(Triple::new(0, 0, 0).is_err());
        assert!(Triple::new(0, 1, 64).is_err());
        assert!(Triple::new(1, 1, 3).is_ok());
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_admissible(t(0, 1, 3), 3, DEFAULT_ENUM_CAP).unwrap(), 4);
        assert_eq!(brute_count(t(0, 1, 3), 6), 13);
        assert_eq!(count_admissible(t(0, 1, 3), 6, DEFAULT_ENUM_CAP).unwrap(), 13);
        for l in 1..=10 {
            assert_eq!(
                count_admissible(t(0, l, l), l, DEFAULT_ENUM_CAP).unwrap(),
                1u128 << l
            );
        }
    }

    #[test]
    fn count_matches_recurrence_for_0_1_3() {
        // Words with at most one 2 per 3-window: a_n = a_{n-1} + a_{n-3}.
        let mut a = vec![0u128, 2, 3, 4];
        for n in 4..=40 {
            a.push(a[n - 1] + a[n - 3]);
        }
        for n in 3..=40 {
            assert_eq!(count_admissible(t(0, 1, 3), n, DEFAULT_ENUM_CAP).unwrap(), a[n], "n={n}");
        }
    }

    #[test]
    fn dp_count_matches_raw_enumeration() {
        for l in 1..=8 {
            for i in 0..=l {
                for j in i..=l {
                    let tr = t(i, j, l);
                    for n in l..=(l + 8).min(20) {
                        assert_eq!(
                            count_admissible(tr, n, DEFAULT_ENUM_CAP).unwrap(),
                            brute_count(tr, n),
                            "triple {tr} n={n}"
                        );
                    }
                }
            }
        }
        for n in 3..=20 {
            assert_eq!(
                count_admissible(t(0, 1, 3), n, DEFAULT_ENUM_CAP).unwrap(),
                brute_count(t(0, 1, 3), n)
            );
        }
    }

    #[test]
    fn count_cap_refuses_with_estimate() {
        let err = count_admissible(t(0, 30, 60), 60, 1 << 20).unwrap_err();
        match err {
            Error::CapExceeded { estimate, .. } => assert!(estimate > (1u64 << 20) as f64),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weighted_sum_with_zero_weights_is_log_count() {
        let tr = t(1, 3, 5);
        for n in 5..15 {
            let c = count_admissible(tr, n, DEFAULT_ENUM_CAP).unwrap() as f64;
            let z = log_weighted_sum(tr, n, [0.0, 0.0], DEFAULT_ENUM_CAP).unwrap();
            assert!((z - c.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_sum_matches_brute_force() {
        let tr = t(1, 2, 4);
        let lw = [-0.3, 0.7];
        let n = 12;
        let brute: f64 = (0u64..(1 << n))
            .map(|b| Word::from_packed(b, n))
            .filter(|word| is_admissible(word, tr).unwrap())
            .map(|word| {
                let twos = word.count(2) as f64;
                ((n as f64 - twos) * lw[0] + twos * lw[1]).exp()
            })
            .sum();
        let z = log_weighted_sum(tr, n, lw, DEFAULT_ENUM_CAP).unwrap();
        assert!((z - brute.ln()).abs() < 1e-12);
    }

    #[test]
    fn window_count_range_examples() {
        assert_eq!(window_count_range(t(0, 2, 6)), (4, 6));
        let l = 12;
        assert_eq!(window_count_range(t(l - 5, l - 4, l)), (4, 5));
        assert_eq!(window_count_range(t(0, l, l)), (0, l));
    }

    #[test]
    fn concatenation_closure_for_one_flip() {
        // Admissible L-words D, E differing in at most one position give an
        // admissible DE.
        for l in 1..=10 {
            for i in 0..=l {
                for j in i..=l {
                    let tr = t(i, j, l);
                    for d in 0u64..(1 << l) {
                        if !tr.admits_packed(d) {
                            continue;
                        }
                        let dw = Word::from_packed(d, l);
                        for p in 0..=l {
                            let e = if p == l { d } else { d ^ (1 << p) };
                            if !tr.admits_packed(e) {
                                continue;
                            }
                            let de = dw.concat(&Word::from_packed(e, l));
                            assert!(is_admissible(&de, tr).unwrap(), "{tr} {de}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reversal_invariance() {
        for l in 1..=8 {
            for i in 0..=l {
                for j in i..=l {
                    let tr = t(i, j, l);
                    let n = l + 4;
                    for bits in 0u64..(1 << n) {
                        let word = Word::from_packed(bits, n);
                        assert_eq!(
                            is_admissible(&word, tr).unwrap(),
                            is_admissible(&word.reversed(), tr).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn packing_round_trip() {
        let word = w("0220200");
        let bits = word.pack().unwrap();
        assert_eq!(Word::from_packed(bits, word.len()), word);
        assert!(w("012").pack().is_err());
    }

    #[test]
    fn popcount_enumeration_counts() {
        for width in 0..=12 {
            for ones in 0..=width {
                let mut n = 0;
                for_each_with_popcount(width, ones, |v| {
                    assert_eq!(v.count_ones() as usize, ones);
                    assert!(v < (1 << width));
                    n += 1;
                });
                assert_eq!(n as f64, binomial(width, ones), "width={width} ones={ones}");
            }
        }
    }

    #[test]
    fn single_piece_is_trivially_disjoint() {
        let rep = verify_union_disjointness(&[t(4, 6, 6)], 12, 1 << 24, 100, 1).unwrap();
        assert!(rep.exhaustive);
        assert!(rep.is_disjoint());
        assert!(rep.words_checked > 0);
    }

    #[test]
    fn overlapping_pieces_produce_counterexample() {
        // Two pieces that both admit 0^6-like windows: every all-zero word
        // is certified twice.
        let rep = verify_union_disjointness(&[t(0, 2, 4), t(0, 3, 6)], 10, 1 << 24, 100, 1).unwrap();
        let cex = rep.counterexample.expect("overlap must be detected");
        assert!(cex.certificates.iter().any(|(_, c)| c.len() > 1));
    }

    #[test]
    fn sampled_mode_is_flagged() {
        let rep = verify_union_disjointness(&[t(0, 3, 6), t(5, 6, 8)], 30, 50, 20, 3).unwrap();
        assert!(!rep.exhaustive);
    }
}
