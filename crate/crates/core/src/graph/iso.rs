//! Exhaustive isomorphism check for small graphs.

use super::{degree_vector, Graph};
use crate::error::{Error, Result};

const MAX_NODES: usize = 10;

/// True iff some node permutation maps `g1`'s edge set onto `g2`'s.
///
/// Factorial search with degree pruning; refuses graphs above 10 nodes.
pub fn brute_force_isomorphic(g1: &Graph, g2: &Graph) -> Result<bool> {
    if g1.num_nodes > MAX_NODES || g2.num_nodes > MAX_NODES {
        return Err(Error::SizeGuard(format!(
            "brute_force_isomorphic limited to {MAX_NODES} nodes, got {} and {}",
            g1.num_nodes, g2.num_nodes
        )));
    }
    if g1.num_nodes != g2.num_nodes || g1.num_edges() != g2.num_edges() {
        return Ok(false);
    }
    let mut deg1 = degree_vector(g1);
    let mut deg2 = degree_vector(g2);
    let (d1, d2) = (deg1.clone(), deg2.clone());
    deg1.sort_unstable();
    deg2.sort_unstable();
    if deg1 != deg2 {
        return Ok(false);
    }

    let n = g1.num_nodes;
    let adj1 = g1.adjacency_matrix();
    let adj2 = g2.adjacency_matrix();
    // perm[i] = image of g1-node i in g2; extend one node at a time.
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    Ok(extend(0, n, &adj1, &adj2, &d1, &d2, &mut perm, &mut used))
}

fn extend(
    i: usize,
    n: usize,
    adj1: &[Vec<f64>],
    adj2: &[Vec<f64>],
    d1: &[usize],
    d2: &[usize],
    perm: &mut [usize],
    used: &mut [bool],
) -> bool {
    if i == n {
        return true;
    }
    for cand in 0..n {
        if used[cand] || d1[i] != d2[cand] {
            continue;
        }
        let consistent = (0..i).all(|j| adj1[i][j] == adj2[cand][perm[j]]);
        if !consistent {
            continue;
        }
        perm[i] = cand;
        used[cand] = true;
        if extend(i + 1, n, adj1, adj2, d1, d2, perm, used) {
            return true;
        }
        used[cand] = false;
        perm[i] = usize::MAX;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_complete, gen_cycle};

    #[test]
    fn relabeled_cycle_is_isomorphic() {
        let c4 = gen_cycle(4).unwrap();
        let relabeled = c4.permuted(&[2, 0, 3, 1]).unwrap();
        assert!(brute_force_isomorphic(&c4, &relabeled).unwrap());
    }

    #[test]
    fn c6_vs_two_triangles() {
        let c6 = gen_cycle(6).unwrap();
        let two_c3 = Graph::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert!(!brute_force_isomorphic(&c6, &two_c3).unwrap());
    }

    #[test]
    fn k4_minus_edge_vs_path() {
        let mut k4 = gen_complete(4).unwrap();
        let edges: Vec<(usize, usize)> =
            k4.edges().iter().copied().filter(|&e| e != (0, 1)).collect();
        k4 = Graph::new(4, edges).unwrap();
        let p4 = Graph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(!brute_force_isomorphic(&k4, &p4).unwrap());
    }

    #[test]
    fn size_guard() {
        let big = gen_cycle(11).unwrap();
        assert!(matches!(brute_force_isomorphic(&big, &big), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn equivalence_relation_on_small_corpus() {
        // Reflexive, symmetric, transitive over a mixed corpus.
        let corpus = vec![
            gen_cycle(5).unwrap(),
            gen_cycle(5).unwrap().permuted(&[4, 2, 0, 1, 3]).unwrap(),
            gen_complete(5).unwrap(),
            Graph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap(),
        ];
        let iso = |a: &Graph, b: &Graph| brute_force_isomorphic(a, b).unwrap();
        for g in &corpus {
            assert!(iso(g, g));
        }
        for a in &corpus {
            for b in &corpus {
                assert_eq!(iso(a, b), iso(b, a));
                for c in &corpus {
                    if iso(a, b) && iso(b, c) {
                        assert!(iso(a, c));
                    }
                }
            }
        }
    }
}
