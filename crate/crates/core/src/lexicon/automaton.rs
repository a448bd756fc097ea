//! Aho-Corasick automaton over token ids.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::text_model::TokenId;

pub type StateId = usize;
pub const ROOT: StateId = 0;

#[derive(Debug, Clone, Default, PartialEq)]
struct Node {
    children: BTreeMap<TokenId, StateId>,
    fail: StateId,
    /// Patterns ending exactly at this node.
    terminal: Vec<usize>,
    /// Patterns ending here or at any node on the fail chain.
    outputs: Vec<usize>,
    /// Tokens that complete some pattern from this state.
    completions: BTreeSet<TokenId>,
}

/// One full-pattern occurrence: `start..end` in the scanned stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence {
    pub start: usize,
    pub end: usize,
    pub pattern: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Automaton {
    nodes: Vec<Node>,
    lengths: Vec<usize>,
}

impl Automaton {
    /// Builds the automaton; empty patterns are ignored.
    pub fn new<P: AsRef<[TokenId]>>(patterns: &[P]) -> Self {
        let mut nodes = vec![Node::default()];
        let mut lengths = Vec::with_capacity(patterns.len());
        for (pi, p) in patterns.iter().enumerate() {
            let p = p.as_ref();
            lengths.push(p.len());
            if p.is_empty() {
                continue;
            }
            let mut s = ROOT;
            for &t in p {
                s = match nodes[s].children.get(&t) {
                    Some(&c) => c,
                    None => {
                        nodes.push(Node::default());
                        let c = nodes.len() - 1;
                        nodes[s].children.insert(t, c);
                        c
                    }
                };
            }
            nodes[s].terminal.push(pi);
        }

        // breadth-first so every fail target is finished before its users
        let mut order = Vec::with_capacity(nodes.len());
        let mut queue: VecDeque<StateId> = VecDeque::from([ROOT]);
        while let Some(s) = queue.pop_front() {
            order.push(s);
            let children: Vec<(TokenId, StateId)> = nodes[s].children.iter().map(|(&t, &c)| (t, c)).collect();
            for (t, c) in children {
                nodes[c].fail = if s == ROOT {
                    ROOT
                } else {
                    let mut f = nodes[s].fail;
                    loop {
                        if let Some(&g) = nodes[f].children.get(&t) {
                            break g;
                        }
                        if f == ROOT {
                            break ROOT;
                        }
                        f = nodes[f].fail;
                    }
                };
                queue.push_back(c);
            }
        }
        for &s in &order {
            let fail = nodes[s].fail;
            let mut outputs = nodes[s].terminal.clone();
            let mut completions: BTreeSet<TokenId> = nodes[s]
                .children
                .iter()
                .filter(|(_, &c)| !nodes[c].terminal.is_empty())
                .map(|(&t, _)| t)
                .collect();
            if s != ROOT {
                outputs.extend(nodes[fail].outputs.iter().copied());
                completions.extend(nodes[fail].completions.iter().copied());
            }
            nodes[s].outputs = outputs;
            nodes[s].completions = completions;
        }
        Automaton { nodes, lengths }
    }

    pub fn num_states(&self) -> usize {
        self.nodes.len()
    }

    pub fn step(&self, mut state: StateId, token: TokenId) -> StateId {
        loop {
            if let Some(&c) = self.nodes[state].children.get(&token) {
                return c;
            }
            if state == ROOT {
                return ROOT;
            }
            state = self.nodes[state].fail;
        }
    }

    /// State after reading `tokens` from the root.
    pub fn state_after(&self, tokens: &[TokenId]) -> StateId {
        tokens.iter().fold(ROOT, |s, &t| self.step(s, t))
    }

    /// Tokens that would complete a pattern if read next from `state`.
    pub fn completions(&self, state: StateId) -> &BTreeSet<TokenId> {
        &self.nodes[state].completions
    }

    /// Patterns that end at `state`.
    pub fn outputs(&self, state: StateId) -> &[usize] {
        &self.nodes[state].outputs
    }

    /// Every occurrence of every pattern, overlapping ones included, sorted
    /// by position then pattern index.
    pub fn find_all(&self, stream: &[TokenId]) -> Vec<Occurrence> {
        let mut out = Vec::new();
        let mut s = ROOT;
        for (i, &t) in stream.iter().enumerate() {
            s = self.step(s, t);
            for &p in &self.nodes[s].outputs {
                let len = self.lengths[p];
                out.push(Occurrence {
                    start: i + 1 - len,
                    end: i + 1,
                    pattern: p,
                });
            }
        }
        out.sort_unstable();
        out
    }
}

/// Brute-force occurrence scan, used as the reference for the automaton.
pub fn naive_find_all<P: AsRef<[TokenId]>>(patterns: &[P], stream: &[TokenId]) -> Vec<Occurrence> {
    let mut out = Vec::new();
    for (pi, p) in patterns.iter().enumerate() {
        let p = p.as_ref();
        if p.is_empty() || p.len() > stream.len() {
            continue;
        }
        for start in 0..=stream.len() - p.len() {
            if &stream[start..start + p.len()] == p {
                out.push(Occurrence {
                    start,
                    end: start + p.len(),
                    pattern: pi,
                });
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pattern_matches_its_positions() {
        let a = Automaton::new(&[vec![7]]);
        let hits: Vec<usize> = a.find_all(&[7, 1, 7, 7]).iter().map(|o| o.start).collect();
        assert_eq!(hits, vec![0, 2, 3]);
    }

    #[test]
    fn overlapping_matches_are_all_reported() {
        let pats = vec![vec![1, 2], vec![2, 3], vec![1, 2, 3], vec![3]];
        let a = Automaton::new(&pats);
        assert_eq!(a.find_all(&[1, 2, 3]), naive_find_all(&pats, &[1, 2, 3]));
        assert_eq!(a.find_all(&[1, 2, 3]).len(), 4);
    }

    #[test]
    fn completions_follow_the_fail_chain() {
        // "s h" and "h x": after reading s, h completes; x completes only after h
        let a = Automaton::new(&[vec![10, 11], vec![11, 12], vec![13]]);
        let s = a.state_after(&[5, 10]);
        assert_eq!(a.completions(s).iter().copied().collect::<Vec<_>>(), vec![11, 13]);
        let s = a.state_after(&[10, 11]);
        assert_eq!(a.completions(s).iter().copied().collect::<Vec<_>>(), vec![12, 13]);
    }

    #[test]
    fn empty_automaton_matches_nothing() {
        let a = Automaton::new::<Vec<TokenId>>(&[]);
        assert!(a.find_all(&[1, 2, 3]).is_empty());
        assert!(a.completions(ROOT).is_empty());
    }

    fn lexicon_and_stream() -> impl Strategy<Value = (Vec<Vec<TokenId>>, Vec<TokenId>)> {
        (
            prop::collection::vec(prop::collection::vec(0u32..6, 1..=5), 1..=50),
            prop::collection::vec(0u32..6, 0..2000),
        )
    }

    proptest! {
        #[test]
        fn automaton_agrees_with_naive_scan((pats, stream) in lexicon_and_stream()) {
            let a = Automaton::new(&pats);
            prop_assert_eq!(a.find_all(&stream), naive_find_all(&pats, &stream));
        }

        #[test]
        fn completions_are_exactly_the_completing_tokens(
            (pats, stream) in lexicon_and_stream(),
            cut in 0usize..2000,
        ) {
            let a = Automaton::new(&pats);
            let prefix = &stream[..cut.min(stream.len())];
            let got = a.completions(a.state_after(prefix));
            for v in 0u32..7 {
                let mut ext = prefix.to_vec();
                ext.push(v);
                let completes = pats.iter().any(|p| ext.ends_with(p));
                prop_assert_eq!(got.contains(&v), completes, "token {}", v);
            }
        }
    }
}
