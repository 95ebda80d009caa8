//! Connecting words between admissible words, and a sampled witness of
//! topological mixing built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transfer::{period, BlockGraph, NONE};
use crate::words::{is_admissible, Triple, Word};

/// Result of [`connect`].
#[derive(Clone, Debug, PartialEq)]
pub struct Connector {
    pub word: Word,
    /// Number of single-position changes from the end block of `A` to the
    /// start block of `B`.
    pub chain_len: usize,
}

/// Upper bound `2 L min(j, L - i)` on connector lengths.
pub fn connector_bound(t: Triple) -> usize {
    2 * t.len * t.j.min(t.len - t.i)
}

/// Returns `C` such that `A C B` is admissible.
///
/// The last window of `A` is morphed into the first window of `B` one
/// position at a time, always through admissible windows; `C` is the
/// concatenation of the intermediate windows. At each step the leftmost
/// mismatch whose change keeps the window admissible is taken.
pub fn connect(a: &Word, b: &Word, t: Triple) -> Result<Connector> {
    for w in [a, b] {
        if !is_admissible(w, t)? {
            return Err(Error::Precondition(format!("{w} is not admissible for {t}")));
        }
    }
    let l = t.len;
    let start = a.slice(a.len() - l, a.len()).pack()?;
    let target = b.slice(0, l).pack()?;
    let mut mismatches: Vec<usize> = (0..l).filter(|&p| (start ^ target) >> p & 1 == 1).collect();
    let total = mismatches.len();
    let mut current = start;
    let mut chain = Vec::new();
    while !mismatches.is_empty() {
        // Positions count from the least significant bit; scan left to right.
        let pick = mismatches
            .iter()
            .rev()
            .position(|&p| t.admits_packed(current ^ (1 << p)))
            .map(|k| mismatches.len() - 1 - k)
            .ok_or_else(|| {
                Error::LemmaViolation(format!(
                    "no admissible single change from {} towards {} under {t}",
                    Word::from_packed(current, l),
                    Word::from_packed(target, l)
                ))
            })?;
        current ^= 1 << mismatches.remove(pick);
        chain.push(current);
    }
    // The last element equals the first window of B and is not part of C.
    chain.pop();
    let mut symbols = Vec::with_capacity(chain.len() * l);
    for w in &chain {
        symbols.extend_from_slice(Word::from_packed(*w, l).symbols());
    }
    let word = Word::new(symbols)?;
    if word.len() > connector_bound(t) {
        return Err(Error::LemmaViolation(format!(
            "connector of length {} exceeds {}",
            word.len(),
            connector_bound(t)
        )));
    }
    let joined = a.concat(&word).concat(b);
    if !is_admissible(&joined, t)? {
        return Err(Error::LemmaViolation(format!("{joined} is not admissible for {t}")));
    }
    Ok(Connector {
        word,
        chain_len: total,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingReport {
    pub triple: Triple,
    pub period: usize,
    pub pairs: usize,
    pub max_connector: usize,
    pub bound: usize,
    pub failures: Vec<String>,
}

impl MixingReport {
    pub fn mixing(&self) -> bool {
        self.period == 1 && self.failures.is_empty()
    }
}

/// Random admissible word of length `len >= L` by a walk on the block graph.
pub fn random_word(g: &BlockGraph, len: usize, rng: &mut impl Rng) -> Word {
    let l = g.triple().len;
    let mut node = rng.gen_range(0..g.len());
    let mut symbols = g.word(node).symbols().to_vec();
    while symbols.len() < len {
        let succ = g.successors(node);
        let options: Vec<u32> = succ.iter().copied().filter(|&v| v != NONE).collect();
        node = options[rng.gen_range(0..options.len())] as usize;
        symbols.push(g.edge_symbol(node));
    }
    debug_assert!(symbols.len() >= l);
    Word::new(symbols).expect("graph words are over {0,2}")
}

/// Graph period plus connectors between `n_pairs` random admissible pairs.
pub fn mixing_witness(t: Triple, n_pairs: usize, node_cap: f64, seed: u64) -> Result<MixingReport> {
    let g = BlockGraph::build(t, node_cap)?;
    let (p, _) = period(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_connector = 0;
    let mut failures = Vec::new();
    for k in 0..n_pairs {
        // Every third pair uses words longer than one window.
        let extra = if k % 3 == 0 { rng.gen_range(1..=t.len) } else { 0 };
        let a = random_word(&g, t.len + extra, &mut rng);
        let b = random_word(&g, t.len + extra, &mut rng);
        match connect(&a, &b, t) {
            Ok(c) => max_connector = max_connector.max(c.word.len()),
            Err(e) => failures.push(format!("{a} -> {b}: {e}")),
        }
    }
    Ok(MixingReport {
        triple: t,
        period: p,
        pairs: n_pairs,
        max_connector,
        bound: connector_bound(t),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn already_admissible_join_needs_nothing() {
        let t = Triple::new(0, 1, 3).unwrap();
        let c = connect(&w("000"), &w("020"), t).unwrap();
        assert!(c.word.is_empty());
        let c = connect(&w("020"), &w("020"), t).unwrap();
        assert!(c.word.is_empty());
        assert_eq!(c.chain_len, 0);
    }

    #[test]
    fn inadmissible_input_rejected() {
        let t = Triple::new(0, 1, 3).unwrap();
        assert!(connect(&w("022"), &w("000"), t).is_err());
    }

    #[test]
    fn connector_needed_for_far_words() {
        let t = Triple::new(2, 3, 5).unwrap();
        let c = connect(&w("22200"), &w("00022"), t).unwrap();
        assert!(!c.word.is_empty());
        let joined = w("22200").concat(&c.word).concat(&w("00022"));
        assert!(is_admissible(&joined, t).unwrap());
        assert!(c.word.len() <= connector_bound(t));
    }

    #[test]
    fn golden_mean_witness() {
        let r = mixing_witness(Triple::new(0, 1, 2).unwrap(), 200, 1e6, 5).unwrap();
        assert_eq!(r.period, 1);
        assert!(r.failures.is_empty());
        assert!(r.max_connector <= 4);
        assert_eq!(r.bound, 4);
    }

    #[test]
    fn single_word_is_mixing() {
        let r = mixing_witness(Triple::new(0, 0, 5).unwrap(), 20, 1e6, 1).unwrap();
        assert!(r.mixing());
        assert_eq!(r.max_connector, 0);
    }
}
