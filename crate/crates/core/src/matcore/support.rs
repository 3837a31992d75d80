use std::collections::VecDeque;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::matcore::NonNegMatrix;
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportStatus {
    /// No positive diagonal.
    NoSupport,
    /// A positive diagonal exists, but some positive entry lies on none.
    Support,
    /// Every positive entry lies on a positive diagonal.
    TotalSupport,
}

impl SupportStatus {
    pub fn has_support(self) -> bool {
        self != SupportStatus::NoSupport
    }
}

/// Maximum matching of the bipartite pattern graph (rows ↔ columns).
#[derive(Clone, Debug)]
pub struct Matching {
    pub row_to_col: Vec<Option<usize>>,
    pub col_to_row: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }

    pub fn is_perfect(&self) -> bool {
        self.size() == self.row_to_col.len()
    }
}

fn adjacency<T: Scalar>(a: &NonNegMatrix<T>) -> Vec<Vec<usize>> {
    (0..a.dim()).map(|i| a.row(i).map(|(j, _)| j).collect()).collect()
}

/// Hopcroft–Karp on the pattern of `a`.
pub fn maximum_matching<T: Scalar>(a: &NonNegMatrix<T>) -> Matching {
    let adj = adjacency(a);
    let (mate_r, mate_c) = hopcroft_karp(&adj, a.dim());
    let wrap = |v: Vec<usize>| v.into_iter().map(|x| (x != NONE).then_some(x)).collect();
    Matching { row_to_col: wrap(mate_r), col_to_row: wrap(mate_c) }
}

fn hopcroft_karp(adj: &[Vec<usize>], n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut mate_r = vec![NONE; n];
    let mut mate_c = vec![NONE; n];
    for (r, cols) in adj.iter().enumerate() {
        if let Some(&c) = cols.iter().find(|&&c| mate_c[c] == NONE) {
            mate_r[r] = c;
            mate_c[c] = r;
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    let mut queue = VecDeque::new();
    let mut stack = Vec::new();
    loop {
        queue.clear();
        for r in 0..n {
            if mate_r[r] == NONE {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &c in &adj[r] {
                let r2 = mate_c[c];
                if r2 == NONE {
                    found = true;
                } else if dist[r2] == usize::MAX {
                    dist[r2] = dist[r] + 1;
                    queue.push_back(r2);
                }
            }
        }
        if !found {
            break;
        }
        next.fill(0);
        for s in 0..n {
            if mate_r[s] != NONE {
                continue;
            }
            stack.clear();
            stack.push(s);
            while let Some(&r) = stack.last() {
                if next[r] == adj[r].len() {
                    dist[r] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let c = adj[r][next[r]];
                next[r] += 1;
                let r2 = mate_c[c];
                if r2 == NONE {
                    // each row on the stack takes the column it last advanced over
                    for &rr in &stack {
                        let cc = adj[rr][next[rr] - 1];
                        mate_r[rr] = cc;
                        mate_c[cc] = rr;
                    }
                    break;
                } else if dist[r2] != usize::MAX && dist[r2] == dist[r] + 1 {
                    stack.push(r2);
                }
            }
        }
    }
    (mate_r, mate_c)
}

/// Classifies the pattern: perfect matching via Hopcroft–Karp, then an
/// unmatched edge `(i, j)` lies on a perfect matching iff `i` and the row
/// matched to `j` share a strongly connected component of the alternating digraph.
pub fn support_status<T: Scalar>(a: &NonNegMatrix<T>) -> SupportStatus {
    let n = a.dim();
    let adj = adjacency(a);
    let (mate_r, mate_c) = hopcroft_karp(&adj, n);
    if mate_r.contains(&NONE) {
        return SupportStatus::NoSupport;
    }
    let mut g = DiGraph::<(), ()>::with_capacity(n, a.nnz());
    let nodes: Vec<NodeIndex> = (0..n).map(|_| g.add_node(())).collect();
    for (i, cols) in adj.iter().enumerate() {
        for &j in cols {
            if mate_r[i] != j {
                g.add_edge(nodes[i], nodes[mate_c[j]], ());
            }
        }
    }
    let mut comp = vec![0usize; n];
    for (k, scc) in tarjan_scc(&g).into_iter().enumerate() {
        for v in scc {
            comp[v.index()] = k;
        }
    }
    let total = adj.iter().enumerate().all(|(i, cols)| cols.iter().all(|&j| mate_r[i] == j || comp[i] == comp[mate_c[j]]));
    if total {
        SupportStatus::TotalSupport
    } else {
        SupportStatus::Support
    }
}
