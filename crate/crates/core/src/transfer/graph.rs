use crate::error::{Error, Result};
use crate::words::{for_each_with_popcount, low_mask, Triple, Word};

/// Marks a missing successor or predecessor.
pub const NONE: u32 = u32::MAX;

/// Default cap on the number of admissible windows.
pub const DEFAULT_NODE_CAP: f64 = 2.0e6;

/// Block presentation of the sub-shift defined by one [`Triple`].
///
/// Nodes are the admissible windows, packed with the first symbol in the most
/// significant bit and sorted, so node order is lexicographic. The edge
/// `u -> v` exists when `v` is `u` shifted left by one symbol; its label is
/// the appended symbol, i.e. the lowest bit of `v`.
///
/// Successor and predecessor tables are kept as two `u32` slots per node,
/// indexed by the appended (resp. dropped) bit.
#[derive(Clone, Debug)]
pub struct BlockGraph {
    triple: Triple,
    words: Vec<u64>,
    succ: Vec<[u32; 2]>,
    pred: Vec<[u32; 2]>,
    unpruned_nodes: usize,
    components: usize,
}

impl BlockGraph {
    /// Builds the graph and prunes it to its recurrent part.
    ///
    /// When several strongly connected components survive (possible only for
    /// degenerate `i == j` triples), the largest is kept, ties broken by the
    /// smallest word.
    pub fn build(t: Triple, node_cap: f64) -> Result<Self> {
        let estimate = t.window_count();
        if estimate > node_cap {
            return Err(Error::CapExceeded {
                what: "block-graph nodes",
                estimate,
                cap: node_cap,
            });
        }
        let mut words = Vec::with_capacity(estimate as usize);
        for c in t.i..=t.j {
            for_each_with_popcount(t.len, c, |w| words.push(w));
        }
        words.sort_unstable();
        let unpruned_nodes = words.len();

        let mask = low_mask(t.len);
        let find = |words: &[u64], w: u64| -> u32 {
            words
                .binary_search(&w)
                .map(|k| k as u32)
                .unwrap_or(NONE)
        };
        let succ: Vec<[u32; 2]> = words
            .iter()
            .map(|&u| [find(&words, (u << 1) & mask), find(&words, ((u << 1) | 1) & mask)])
            .collect();

        let keep = recurrent_component(&succ);
        let components = keep.1;
        let keep = keep.0;

        let mut remap = vec![NONE; words.len()];
        let mut kept_words = Vec::with_capacity(keep.len());
        for (new, &old) in keep.iter().enumerate() {
            remap[old as usize] = new as u32;
            kept_words.push(words[old as usize]);
        }
        let relabel = |x: u32| if x == NONE { NONE } else { remap[x as usize] };
        let succ: Vec<[u32; 2]> = keep
            .iter()
            .map(|&old| {
                let s = succ[old as usize];
                [relabel(s[0]), relabel(s[1])]
            })
            .collect();
        let mut pred = vec![[NONE; 2]; succ.len()];
        let top = t.len - 1;
        for (u, s) in succ.iter().enumerate() {
            let dropped = (kept_words[u] >> top & 1) as usize;
            for &v in s {
                if v != NONE {
                    pred[v as usize][dropped] = u as u32;
                }
            }
        }
        Ok(BlockGraph {
            triple: t,
            words: kept_words,
            succ,
            pred,
            unpruned_nodes,
            components,
        })
    }

    pub fn triple(&self) -> Triple {
        self.triple
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn unpruned_len(&self) -> usize {
        self.unpruned_nodes
    }

    /// Number of non-trivial strongly connected components before pruning.
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn packed(&self, node: usize) -> u64 {
        self.words[node]
    }

    pub fn word(&self, node: usize) -> Word {
        Word::from_packed(self.words[node], self.triple.len)
    }

    pub fn index_of(&self, packed: u64) -> Option<usize> {
        self.words.binary_search(&packed).ok()
    }

    /// Successors indexed by appended bit (`0` for symbol 0, `1` for symbol 2).
    pub fn successors(&self, node: usize) -> [u32; 2] {
        self.succ[node]
    }

    pub fn predecessors(&self, node: usize) -> [u32; 2] {
        self.pred[node]
    }

    /// Symbol (`0` or `2`) labelling every edge into `node`.
    pub fn edge_symbol(&self, node: usize) -> u8 {
        2 * (self.words[node] & 1) as u8
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(u, s)| {
            s.iter()
                .filter(|&&v| v != NONE)
                .map(move |&v| (u, v as usize))
        })
    }

    pub(crate) fn succ_table(&self) -> &[[u32; 2]] {
        &self.succ
    }

    pub(crate) fn pred_table(&self) -> &[[u32; 2]] {
        &self.pred
    }

    pub(crate) fn low_bits(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().map(|&w| (w & 1) as usize)
    }
}

/// Iterative Tarjan; returns the node set of the chosen recurrent component
/// (sorted) and the number of non-trivial components.
fn recurrent_component(succ: &[[u32; 2]]) -> (Vec<u32>, usize) {
    let n = succ.len();
    let mut index = vec![NONE; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_index = 0u32;
    let mut best: Vec<u32> = Vec::new();
    let mut nontrivial = 0usize;
    // Call stack frames: (node, next successor slot).
    let mut frames: Vec<(u32, u8)> = Vec::new();

    for root in 0..n as u32 {
        if index[root as usize] != NONE {
            continue;
        }
        frames.push((root, 0));
        index[root as usize] = next_index;
        low[root as usize] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut slot)) = frames.last_mut() {
            if (*slot as usize) < 2 {
                let w = succ[v as usize][*slot as usize];
                *slot += 1;
                if w == NONE {
                    continue;
                }
                if index[w as usize] == NONE {
                    index[w as usize] = next_index;
                    low[w as usize] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    frames.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent as usize] = low[parent as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w as usize] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                let cyclic = comp.len() > 1 || succ[v as usize].contains(&v);
                if !cyclic {
                    continue;
                }
                nontrivial += 1;
                comp.sort_unstable();
                let better = comp.len() > best.len()
                    || (comp.len() == best.len() && comp[0] < best[0]);
                if better {
                    best = comp;
                }
            }
        }
    }
    (best, nontrivial)
}

/// Period of a strongly connected graph: gcd over edges `u -> v` of
/// `level(u) + 1 - level(v)` for BFS levels from node 0.
///
/// Returns `(period, witness)` where `witness` is a node on an edge whose
/// level difference is non-zero (node 0 when the period is 1 via a loop).
pub fn period(g: &BlockGraph) -> (usize, usize) {
    if g.is_empty() {
        return (0, 0);
    }
    let n = g.len();
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    level[0] = 0;
    queue.push_back(0usize);
    while let Some(u) = queue.pop_front() {
        for v in g.successors(u) {
            if v != NONE && level[v as usize] == usize::MAX {
                level[v as usize] = level[u] + 1;
                queue.push_back(v as usize);
            }
        }
    }
    let mut d = 0usize;
    let mut witness = 0usize;
    for (u, v) in g.edges() {
        if level[u] == usize::MAX || level[v] == usize::MAX {
            continue;
        }
        let diff = (level[u] + 1).abs_diff(level[v]);
        if diff != 0 {
            let next = gcd(d, diff);
            if next != d {
                witness = u;
            }
            d = next;
        }
    }
    (d.max(1), witness)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Ok(())` iff the graph is aperiodic (gcd of cycle lengths is 1).
pub fn check_primitivity(g: &BlockGraph) -> Result<()> {
    let (p, witness) = period(g);
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if p == 1 {
        Ok(())
    } else {
        Err(Error::NotPrimitive { period: p, witness })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(i: usize, j: usize, l: usize) -> BlockGraph {
        BlockGraph::build(Triple::new(i, j, l).unwrap(), DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn golden_mean_structure() {
        let g = graph(0, 1, 2);
        let words: Vec<String> = (0..g.len()).map(|k| g.word(k).to_string()).collect();
        assert_eq!(words, ["00", "02", "20"]);
        let mut edges: Vec<(String, String)> = g
            .edges()
            .map(|(u, v)| (g.word(u).to_string(), g.word(v).to_string()))
            .collect();
        edges.sort();
        let expected = [("00", "00"), ("00", "02"), ("02", "20"), ("20", "00"), ("20", "02")];
        assert_eq!(
            edges,
            expected
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn full_shift_out_degree_two() {
        for l in 1..=8 {
            let g = graph(0, l, l);
            assert_eq!(g.len(), 1 << l);
            for u in 0..g.len() {
                assert!(g.successors(u).iter().all(|&v| v != NONE));
                assert!(g.predecessors(u).iter().all(|&v| v != NONE));
            }
        }
    }

    #[test]
    fn node_count_matches_binomial_sum() {
        for l in 2..=12 {
            for i in 0..l {
                for j in (i + 1)..=l {
                    let t = Triple::new(i, j, l).unwrap();
                    let g = BlockGraph::build(t, DEFAULT_NODE_CAP).unwrap();
                    assert_eq!(g.unpruned_len() as f64, t.window_count());
                    // With i < j every window lies on a cycle.
                    assert_eq!(g.len(), g.unpruned_len(), "{t}");
                    assert_eq!(g.components(), 1, "{t}");
                }
            }
        }
    }

    #[test]
    fn degree_bounds_after_pruning() {
        for (i, j, l) in [(2, 2, 4), (1, 1, 3), (0, 0, 5), (3, 3, 7)] {
            let g = graph(i, j, l);
            for u in 0..g.len() {
                assert!(g.successors(u).iter().any(|&v| v != NONE));
                assert!(g.predecessors(u).iter().any(|&v| v != NONE));
            }
        }
    }

    #[test]
    fn path_counts_follow_recurrence() {
        // Paths of length n - 3 in (0,1,3) count admissible n-words.
        let g = graph(0, 1, 3);
        assert_eq!(g.len(), 4);
        let mut v = vec![1u64; g.len()];
        let mut a = vec![0u64, 2, 3, 4];
        for n in 4..=25 {
            a.push(a[n - 1] + a[n - 3]);
            let mut next = vec![0u64; g.len()];
            for (u, w) in g.edges() {
                next[w] += v[u];
            }
            v = next;
            assert_eq!(v.iter().sum::<u64>(), a[n]);
        }
    }

    #[test]
    fn cap_refusal_reports_estimate() {
        let t = Triple::new(0, 20, 40).unwrap();
        match BlockGraph::build(t, 1e6) {
            Err(Error::CapExceeded { estimate, .. }) => assert!(estimate > 1e6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn primitivity() {
        assert!(check_primitivity(&graph(0, 1, 2)).is_ok());
        // 1010 <-> 0101 is a pure 2-cycle.
        let g = BlockGraph::build(Triple::new(2, 2, 4).unwrap(), DEFAULT_NODE_CAP).unwrap();
        assert_eq!(g.components(), 2);
        assert_eq!(g.len(), 4);
        match check_primitivity(&g) {
            Err(Error::NotPrimitive { period, .. }) => assert_eq!(period, 4),
            other => panic!("unexpected {other:?}"),
        }
        // Two-cycle from (1,1,2): 01 <-> 10.
        let g = graph(1, 1, 2);
        assert_eq!(period(&g).0, 2);
    }

    #[test]
    fn single_word_graph() {
        let g = graph(0, 0, 6);
        assert_eq!(g.len(), 1);
        assert_eq!(g.successors(0), [0, NONE]);
        assert!(check_primitivity(&g).is_ok());
    }
}
