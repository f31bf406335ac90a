//! Sparse parity-check codes built by progressive edge growth.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{KeyError, Result};

/// Bipartite Tanner graph. Variable node `v` is connected to the checks in
/// `var_adj[v]`, check `c` to the variables in `chk_adj[c]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    pub n_v: usize,
    pub n_c: usize,
    pub var_adj: Vec<Vec<u32>>,
    pub chk_adj: Vec<Vec<u32>>,
}

impl LdpcCode {
    pub fn from_edges(n_v: usize, n_c: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut var_adj = vec![Vec::new(); n_v];
        let mut chk_adj = vec![Vec::new(); n_c];
        for &(v, c) in edges {
            if v as usize >= n_v || c as usize >= n_c {
                return Err(KeyError::Format {
                    what: "edge list",
                    reason: format!("edge ({v}, {c}) outside a {n_v}x{n_c} graph"),
                });
            }
            if var_adj[v as usize].contains(&c) {
                return Err(KeyError::Format {
                    what: "edge list",
                    reason: format!("duplicate edge ({v}, {c})"),
                });
            }
            var_adj[v as usize].push(c);
            chk_adj[c as usize].push(v);
        }
        Ok(Self {
            n_v,
            n_c,
            var_adj,
            chk_adj,
        })
    }

    pub fn rate(&self) -> f64 {
        1.0 - self.n_c as f64 / self.n_v as f64
    }

    pub fn edge_count(&self) -> usize {
        self.var_adj.iter().map(Vec::len).sum()
    }

    /// (variable, check) pairs in variable order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.var_adj
            .iter()
            .enumerate()
            .flat_map(|(v, cs)| cs.iter().map(move |&c| (v as u32, c)))
            .collect()
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.chk_adj
            .iter()
            .map(|vs| vs.iter().fold(0u8, |s, &v| s ^ (bits[v as usize] & 1)))
            .collect()
    }

    /// True if two checks share more than one variable.
    pub fn has_four_cycle(&self) -> bool {
        let mut seen = vec![usize::MAX; self.n_c];
        for (c, vs) in self.chk_adj.iter().enumerate() {
            for &v in vs {
                for &d in &self.var_adj[v as usize] {
                    let d = d as usize;
                    if d == c {
                        continue;
                    }
                    if seen[d] == c {
                        return true;
                    }
                    seen[d] = c;
                }
            }
        }
        false
    }

    /// Length of the shortest cycle, by breadth-first search from every
    /// variable node. `None` for a forest.
    pub fn girth(&self) -> Option<usize> {
        let n = self.n_v + self.n_c;
        let neighbours = |u: usize| -> Vec<usize> {
            if u < self.n_v {
                self.var_adj[u].iter().map(|&c| self.n_v + c as usize).collect()
            } else {
                self.chk_adj[u - self.n_v].iter().map(|&v| v as usize).collect()
            }
        };
        let mut best = usize::MAX;
        let mut dist = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        for root in 0..self.n_v {
            let mut touched = vec![root];
            dist[root] = 0;
            let mut queue = VecDeque::from([root]);
            'bfs: while let Some(u) = queue.pop_front() {
                if 2 * dist[u] + 1 >= best {
                    break;
                }
                for w in neighbours(u) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        touched.push(w);
                        queue.push_back(w);
                    } else if parent[u] != w {
                        best = best.min(dist[u] + dist[w] + 1);
                        break 'bfs;
                    }
                }
            }
            for u in touched {
                dist[u] = usize::MAX;
                parent[u] = usize::MAX;
            }
        }
        (best != usize::MAX).then_some(best)
    }

    /// Header line "n_v n_c", then one "variable check" pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n_v, self.n_c);
        for (v, c) in self.edges() {
            let _ = writeln!(s, "{v} {c}");
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let bad = |reason: String| KeyError::Format {
            what: "edge list",
            reason,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let pair = |line: &str| -> Result<(u64, u64)> {
            let mut it = line.split_whitespace().map(str::parse::<u64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(bad(format!("cannot parse line {line:?}"))),
            }
        };
        let (n_v, n_c) = pair(lines.next().ok_or_else(|| bad("empty input".into()))?)?;
        let edges = lines
            .map(|l| pair(l).map(|(v, c)| (v as u32, c as u32)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_edges(n_v as usize, n_c as usize, &edges)
    }
}

/// Node-perspective variable degree sequence of length `n_v` from
/// (degree, fraction) pairs. Rounding remainders go to the first entry.
pub fn degree_sequence(n_v: usize, profile: &[(usize, f64)]) -> Vec<usize> {
    let total: f64 = profile.iter().map(|p| p.1).sum();
    let mut counts: Vec<usize> = profile.iter().map(|p| (p.1 / total * n_v as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    if let Some(first) = counts.first_mut() {
        *first += n_v - assigned;
    }
    profile
        .iter()
        .zip(counts)
        .flat_map(|(p, k)| std::iter::repeat_n(p.0, k))
        .collect()
}

struct Growth {
    var_adj: Vec<Vec<u32>>,
    chk_adj: Vec<Vec<u32>>,
    stamp: Vec<u32>,
    var_stamp: Vec<u32>,
    epoch: u32,
}

impl Growth {
    fn pick(&self, candidates: impl Iterator<Item = usize>) -> usize {
        candidates.min_by_key(|&c| (self.chk_adj[c].len(), c)).unwrap()
    }

    /// Check for the next edge of `v`: one not reachable from `v` if the
    /// tree stops growing, otherwise one first reached at the deepest level.
    fn next_check(&mut self, v: usize) -> usize {
        let n_c = self.chk_adj.len();
        if self.var_adj[v].is_empty() {
            return self.pick(0..n_c);
        }
        self.epoch += 1;
        let e = self.epoch;
        self.var_stamp[v] = e;
        let mut frontier: Vec<u32> = Vec::new();
        for &c in &self.var_adj[v] {
            self.stamp[c as usize] = e;
            frontier.push(c);
        }
        let mut reached = frontier.len();
        loop {
            let mut next = Vec::new();
            for &c in &frontier {
                for &w in &self.chk_adj[c as usize] {
                    if self.var_stamp[w as usize] == e {
                        continue;
                    }
                    self.var_stamp[w as usize] = e;
                    for &d in &self.var_adj[w as usize] {
                        if self.stamp[d as usize] != e {
                            self.stamp[d as usize] = e;
                            next.push(d);
                        }
                    }
                }
            }
            if next.is_empty() {
                // Tree saturated below n_c: connect outside it.
                let stamp = &self.stamp;
                return self.pick((0..n_c).filter(|&c| stamp[c] != e));
            }
            if reached + next.len() == n_c {
                return self.pick(next.iter().map(|&c| c as usize));
            }
            reached += next.len();
            frontier = next;
        }
    }
}

/// Progressive edge growth. Variable nodes are processed in order of
/// increasing degree; within one degree the order is a seeded shuffle.
pub fn peg_construct(n_v: usize, n_c: usize, degrees: &[usize], seed: u64) -> Result<LdpcCode> {
    if degrees.len() != n_v {
        return Err(KeyError::Construction(format!("{} degrees for {n_v} variable nodes", degrees.len())));
    }
    if n_c == 0 || n_v == 0 {
        return Err(KeyError::Construction("empty graph".into()));
    }
    if let Some(&d) = degrees.iter().find(|&&d| d == 0 || d > n_c) {
        return Err(KeyError::Construction(format!("variable degree {d} with {n_c} checks")));
    }
    let mut order: Vec<usize> = (0..n_v).collect();
    order.shuffle(&mut qlink_core::rng::stream(seed, "peg"));
    order.sort_by_key(|&v| degrees[v]);
    let mut g = Growth {
        var_adj: vec![Vec::new(); n_v],
        chk_adj: vec![Vec::new(); n_c],
        stamp: vec![0; n_c],
        var_stamp: vec![0; n_v],
        epoch: 0,
    };
    for v in order {
        for _ in 0..degrees[v] {
            let c = g.next_check(v);
            g.var_adj[v].push(c as u32);
            g.chk_adj[c].push(v as u32);
        }
    }
    for vs in &mut g.chk_adj {
        vs.sort_unstable();
    }
    Ok(LdpcCode {
        n_v,
        n_c,
        var_adj: g.var_adj,
        chk_adj: g.chk_adj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_sequence_honoured() {
        let deg = degree_sequence(1000, &[(2, 0.2), (3, 0.5), (8, 0.3)]);
        let code = peg_construct(1000, 330, &deg, 4).unwrap();
        for (v, cs) in code.var_adj.iter().enumerate() {
            assert_eq!(cs.len(), deg[v]);
        }
        assert_eq!(code.edge_count(), deg.iter().sum::<usize>());
        let (lo, hi) = code.chk_adj.iter().fold((usize::MAX, 0), |(lo, hi), c| (lo.min(c.len()), hi.max(c.len())));
        assert!(hi - lo <= 2, "check degrees {lo}..{hi}");
    }

    #[test]
    fn regular_code_has_girth_six() {
        let code = peg_construct(1024, 338, &vec![3; 1024], 1).unwrap();
        assert!(!code.has_four_cycle());
        assert!(code.girth().unwrap() >= 6);
    }

    #[test]
    fn girth_of_a_known_cycle() {
        // v0-c0-v1-c1-v0 is a 4-cycle; v2 hangs off c1.
        let code = LdpcCode::from_edges(3, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 1)]).unwrap();
        assert_eq!(code.girth(), Some(4));
        assert!(code.has_four_cycle());
        let tree = LdpcCode::from_edges(3, 2, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        assert_eq!(tree.girth(), None);
    }

    #[test]
    fn same_seed_same_graph() {
        let deg = degree_sequence(300, &[(2, 0.3), (4, 0.7)]);
        let a = peg_construct(300, 120, &deg, 9).unwrap();
        assert_eq!(a, peg_construct(300, 120, &deg, 9).unwrap());
        assert_ne!(a, peg_construct(300, 120, &deg, 10).unwrap());
    }

    #[test]
    fn edge_list_round_trip() {
        let code = peg_construct(200, 70, &vec![3; 200], 2).unwrap();
        assert_eq!(LdpcCode::from_edge_list(&code.to_edge_list()).unwrap(), code);
        assert!(LdpcCode::from_edge_list("2 1\n0 0\n0 0\n").is_err());
        assert!(LdpcCode::from_edge_list("2 1\n0 5\n").is_err());
    }

    #[test]
    fn infeasible_degrees_rejected() {
        assert!(peg_construct(10, 3, &vec![4; 10], 0).is_err());
        assert!(peg_construct(10, 3, &vec![2; 9], 0).is_err());
    }
}
