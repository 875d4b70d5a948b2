//! Finite Markov chain helpers over AoI states `1..=cap`.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};

/// Closed communicating classes (the recurrent classes) of the chain on
/// `1..=cap` whose positive-probability successors are given by `succ`.
/// Each class is sorted; classes are ordered by their smallest state.
pub fn closed_classes<F>(cap: u32, mut succ: F) -> Vec<Vec<u32>>
where
    F: FnMut(u32) -> Vec<u32>,
{
    let n = cap as usize;
    let mut graph = DiGraph::<u32, ()>::with_capacity(n, 3 * n);
    for s in 1..=cap {
        graph.add_node(s);
    }
    for s in 1..=cap {
        for t in succ(s) {
            graph.add_edge(
                NodeIndex::new(s as usize - 1),
                NodeIndex::new(t as usize - 1),
                (),
            );
        }
    }

    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            component[v.index()] = c;
        }
    }

    let mut classes: Vec<Vec<u32>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members
                .iter()
                .all(|v| graph.neighbors(*v).all(|w| component[w.index()] == *c))
        })
        .map(|(_, members)| {
            let mut states: Vec<u32> = members.iter().map(|v| graph[*v]).collect();
            states.sort_unstable();
            states
        })
        .collect();
    classes.sort_unstable_by_key(|c| c[0]);
    classes
}

/// States reachable from `start` (inclusive), as a membership mask indexed by `s - 1`.
pub fn reachable_from<F>(cap: u32, start: u32, mut succ: F) -> Vec<bool>
where
    F: FnMut(u32) -> Vec<u32>,
{
    let mut seen = vec![false; cap as usize];
    let mut stack = vec![start];
    seen[start as usize - 1] = true;
    while let Some(s) = stack.pop() {
        for t in succ(s) {
            if !seen[t as usize - 1] {
                seen[t as usize - 1] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// Stationary distribution of the chain restricted to a closed class.
/// `row(s)` lists `(next, probability)`; entries leaving the class must have
/// zero mass. Returns probabilities aligned with `class`.
pub fn stationary_distribution<F>(class: &[u32], mut row: F) -> Result<Vec<f64>>
where
    F: FnMut(u32) -> Vec<(u32, f64)>,
{
    let m = class.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let position = |s: u32| class.binary_search(&s).ok();

    // Balance equations mu (P - I) = 0, transposed, with the last one
    // replaced by the normalization sum(mu) = 1.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (j, &s) in class.iter().enumerate() {
        a[(j, j)] -= 1.0;
        for (t, p) in row(s) {
            if let Some(i) = position(t) {
                a[(i, j)] += p;
            }
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let mu = solve_dense(a, b)?;
    Ok(mu.iter().copied().collect())
}

/// Dense full-pivoting LU solve with a pivot-ratio singularity check.
pub(crate) fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.full_piv_lu();
    let diag = lu.u().diagonal();
    let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if ratio < 1e-13 {
        return Err(Error::Singular(ratio));
    }
    lu.solve(&b).ok_or(Error::Singular(ratio))
}
