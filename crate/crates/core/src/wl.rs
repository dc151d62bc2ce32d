//! 1-WL color refinement and spectra-based graph discrimination.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::graph::{brute_force_isomorphic, Graph};
use crate::spectral::{eigendecompose, LaplacianKind};

/// Default absolute tolerance for eigenvalue comparison.
pub const DEFAULT_SPECTRA_TOL: f64 = 1e-6;

/// Stabilized 1-WL coloring of a single graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WLColoring {
    /// Final color id per node. Ids are canonical: assigned by the sorted
    /// order of color signatures, so relabeling nodes permutes the vector
    /// without changing the ids.
    pub colors: Vec<usize>,
    pub rounds_to_stabilize: usize,
    /// Sorted (color, count) pairs.
    pub histogram: Vec<(usize, usize)>,
}

/// Iterate `color <- rank(color, sorted neighbor colors)` until stable or
/// `max_rounds`. Initial colors come from node features when present,
/// otherwise all nodes start equal.
pub fn wl1_refine(g: &Graph, max_rounds: usize) -> WLColoring {
    let (mut colorings, rounds) = refine_multi(&[g], max_rounds);
    let colors = colorings.pop().unwrap();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &colors {
        *hist.entry(c).or_insert(0) += 1;
    }
    WLColoring { colors, rounds_to_stabilize: rounds, histogram: hist.into_iter().collect() }
}

/// Joint refinement over several graphs with a shared color table, so color
/// ids are comparable across them. Returns per-graph colors and the number of
/// rounds until stability.
fn refine_multi(graphs: &[&Graph], max_rounds: usize) -> (Vec<Vec<usize>>, usize) {
    // Initial colors: intern node feature bit patterns, or 0 everywhere.
    let mut init_table: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut keys: Vec<Vec<Vec<u64>>> = Vec::new();
    for g in graphs {
        let per_node: Vec<Vec<u64>> = (0..g.num_nodes)
            .map(|i| match &g.node_features {
                Some(f) => f[i].iter().map(|x| x.to_bits()).collect(),
                None => Vec::new(),
            })
            .collect();
        for k in &per_node {
            init_table.entry(k.clone()).or_insert(0);
        }
        keys.push(per_node);
    }
    for (rank, (_, v)) in init_table.iter_mut().enumerate() {
        *v = rank;
    }
    let mut colors: Vec<Vec<usize>> =
        keys.iter().map(|ks| ks.iter().map(|k| init_table[k]).collect()).collect();

    let adjacencies: Vec<Vec<Vec<usize>>> = graphs.iter().map(|g| g.adjacency()).collect();
    let mut rounds = 0;
    for _ in 0..max_rounds {
        // Signature: (own color, sorted multiset of neighbor colors).
        let mut signatures: Vec<Vec<(usize, Vec<usize>)>> = Vec::new();
        let mut table: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        for (gi, adj) in adjacencies.iter().enumerate() {
            let sigs: Vec<(usize, Vec<usize>)> = (0..adj.len())
                .map(|i| {
                    let mut nb: Vec<usize> = adj[i].iter().map(|&j| colors[gi][j]).collect();
                    nb.sort_unstable();
                    (colors[gi][i], nb)
                })
                .collect();
            for s in &sigs {
                table.entry(s.clone()).or_insert(0);
            }
            signatures.push(sigs);
        }
        for (rank, (_, v)) in table.iter_mut().enumerate() {
            *v = rank;
        }
        let next: Vec<Vec<usize>> = signatures
            .iter()
            .map(|sigs| sigs.iter().map(|s| table[s]).collect())
            .collect();
        // Stable when the induced partitions stop refining; the canonical
        // interning makes that an equality check modulo renaming, which we
        // detect by comparing partition sizes per (old, new) pair.
        let stable = partition_equal(&colors, &next);
        colors = next;
        if stable {
            break;
        }
        rounds += 1;
    }
    (colors, rounds)
}

/// True when the `b`-partition equals the `a`-partition (as set partitions).
fn partition_equal(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    let mut fwd: BTreeMap<usize, usize> = BTreeMap::new();
    let mut bwd: BTreeMap<usize, usize> = BTreeMap::new();
    for (ag, bg) in a.iter().zip(b) {
        for (&x, &y) in ag.iter().zip(bg) {
            if *fwd.entry(x).or_insert(y) != y || *bwd.entry(y).or_insert(x) != x {
                return false;
            }
        }
    }
    true
}

/// True iff the stabilized 1-WL color histograms of the two graphs differ.
pub fn wl1_distinguishes(g1: &Graph, g2: &Graph) -> bool {
    let max_rounds = g1.num_nodes.max(g2.num_nodes) + 1;
    let (colorings, _) = refine_multi(&[g1, g2], max_rounds);
    let hist = |colors: &[usize]| -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for &c in colors {
            *h.entry(c).or_insert(0usize) += 1;
        }
        h
    };
    hist(&colorings[0]) != hist(&colorings[1])
}

/// True iff the sorted combinatorial Laplacian spectra differ beyond `tol`
/// at any position. Graphs of different node counts are trivially distinct.
pub fn spectra_distinguish(g1: &Graph, g2: &Graph, tol: f64) -> Result<bool> {
    if g1.num_nodes != g2.num_nodes {
        return Ok(true);
    }
    let s1 = eigendecompose(g1, LaplacianKind::Combinatorial)?;
    let s2 = eigendecompose(g2, LaplacianKind::Combinatorial)?;
    Ok(s1
        .eigenvalues
        .iter()
        .zip(&s2.eigenvalues)
        .any(|(a, b)| (a - b).abs() > tol))
}

/// One row per unordered corpus pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationRow {
    pub g1: usize,
    pub g2: usize,
    pub isomorphic: bool,
    pub wl1_distinct: bool,
    pub spectra_distinct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationReport {
    pub rows: Vec<DiscriminationRow>,
    /// Non-isomorphic pairs that 1-WL misses but the spectra separate.
    pub wl_blind_spectra_separated: usize,
    /// Isomorphic pairs wrongly flagged by 1-WL or spectra (must be zero).
    pub unsound_pairs: usize,
}

/// Pairwise discrimination table over a small corpus (every graph at most
/// 10 nodes, enforced by the isomorphism oracle).
pub fn discrimination_report(corpus: &[Graph], tol: f64) -> Result<DiscriminationReport> {
    let mut rows = Vec::new();
    let mut wl_blind_spectra_separated = 0;
    let mut unsound_pairs = 0;
    for i in 0..corpus.len() {
        for j in (i + 1)..corpus.len() {
            let isomorphic = brute_force_isomorphic(&corpus[i], &corpus[j])?;
            let wl1_distinct = wl1_distinguishes(&corpus[i], &corpus[j]);
            let spectra_distinct = spectra_distinguish(&corpus[i], &corpus[j], tol)?;
            if !isomorphic && !wl1_distinct && spectra_distinct {
                wl_blind_spectra_separated += 1;
            }
            if isomorphic && (wl1_distinct || spectra_distinct) {
                unsound_pairs += 1;
            }
            rows.push(DiscriminationRow { g1: i, g2: j, isomorphic, wl1_distinct, spectra_distinct });
        }
    }
    Ok(DiscriminationReport { rows, wl_blind_spectra_separated, unsound_pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_complete, gen_cycle, Graph};

    fn two_c3() -> Graph {
        Graph::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    #[test]
    fn k3_is_monochromatic() {
        let c = wl1_refine(&gen_complete(3).unwrap(), 10);
        assert!(c.colors.iter().all(|&x| x == c.colors[0]));
        assert!(c.rounds_to_stabilize <= 1);
        assert_eq!(c.histogram, vec![(0, 3)]);
    }

    #[test]
    fn path_endpoints_differ_from_midpoint() {
        let p3 = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let c = wl1_refine(&p3, 10);
        assert_eq!(c.colors[0], c.colors[2]);
        assert_ne!(c.colors[0], c.colors[1]);
    }

    #[test]
    fn c6_and_two_triangles_share_histograms() {
        let a = wl1_refine(&gen_cycle(6).unwrap(), 10);
        let b = wl1_refine(&two_c3(), 10);
        assert_eq!(a.histogram, b.histogram);
        assert!(!wl1_distinguishes(&gen_cycle(6).unwrap(), &two_c3()));
    }

    #[test]
    fn wl_distinguishes_by_degree() {
        let p3 = Graph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        assert!(wl1_distinguishes(&p3, &gen_cycle(3).unwrap()));
        let c4 = gen_cycle(4).unwrap();
        assert!(!wl1_distinguishes(&c4, &c4.permuted(&[3, 1, 0, 2]).unwrap()));
    }

    #[test]
    fn wl_is_permutation_invariant() {
        let g = crate::graph::gen_erdos_renyi(8, 0.4, 5).unwrap();
        let h = g.permuted(&[5, 3, 7, 1, 0, 6, 2, 4]).unwrap();
        let cg = wl1_refine(&g, 20);
        let ch = wl1_refine(&h, 20);
        assert_eq!(cg.histogram, ch.histogram);
    }

    #[test]
    fn refinement_is_monotone() {
        // The partition at round r+1 refines the partition at round r:
        // nodes sharing a color later always shared one earlier.
        let g = crate::graph::gen_ring_pair(4, 5).unwrap();
        let mut prev = wl1_refine(&g, 0).colors;
        for r in 1..=6 {
            let cur = wl1_refine(&g, r).colors;
            for i in 0..g.num_nodes {
                for j in 0..g.num_nodes {
                    if cur[i] == cur[j] {
                        assert_eq!(prev[i], prev[j], "round {r} merged {i},{j}");
                    }
                }
            }
            prev = cur;
        }
    }

    #[test]
    fn spectra_distinguish_examples() {
        let c6 = gen_cycle(6).unwrap();
        assert!(spectra_distinguish(&c6, &two_c3(), DEFAULT_SPECTRA_TOL).unwrap());
        let relabeled = c6.permuted(&[2, 4, 0, 5, 1, 3]).unwrap();
        assert!(!spectra_distinguish(&c6, &relabeled, DEFAULT_SPECTRA_TOL).unwrap());
    }

    #[test]
    fn known_isospectral_nonisomorphic_pair() {
        // Laplacian-cospectral non-isomorphic 6-node pair, found by
        // exhaustive enumeration over all 6-node graphs (shared spectrum
        // {0, 3-sqrt(5), 2, 3, 3, 3+sqrt(5)}).
        let g1 =
            Graph::new(6, vec![(0, 2), (0, 4), (0, 5), (1, 2), (1, 4), (1, 5), (2, 3)]).unwrap();
        let g2 =
            Graph::new(6, vec![(0, 2), (0, 3), (0, 4), (0, 5), (1, 4), (1, 5), (2, 3)]).unwrap();
        assert!(!brute_force_isomorphic(&g1, &g2).unwrap());
        assert!(!spectra_distinguish(&g1, &g2, DEFAULT_SPECTRA_TOL).unwrap());
    }

    #[test]
    fn report_on_canonical_corpus() {
        let corpus = vec![gen_cycle(6).unwrap(), two_c3()];
        let rep = discrimination_report(&corpus, DEFAULT_SPECTRA_TOL).unwrap();
        assert_eq!(rep.rows.len(), 1);
        let row = &rep.rows[0];
        assert!(!row.isomorphic && !row.wl1_distinct && row.spectra_distinct);
        assert_eq!(rep.wl_blind_spectra_separated, 1);
        assert_eq!(rep.unsound_pairs, 0);
    }

    #[test]
    fn report_on_relabelings_finds_nothing() {
        let c4 = gen_cycle(4).unwrap();
        let corpus = vec![
            c4.clone(),
            c4.permuted(&[1, 2, 3, 0]).unwrap(),
            c4.permuted(&[2, 0, 3, 1]).unwrap(),
        ];
        let rep = discrimination_report(&corpus, DEFAULT_SPECTRA_TOL).unwrap();
        assert!(rep.rows.iter().all(|r| r.isomorphic && !r.wl1_distinct && !r.spectra_distinct));
        assert_eq!(rep.unsound_pairs, 0);
    }

    #[test]
    fn spectra_sound_on_all_connected_five_node_graphs() {
        let corpus = crate::graph::enumerate_connected(5).unwrap();
        let rep = discrimination_report(&corpus, DEFAULT_SPECTRA_TOL).unwrap();
        assert_eq!(rep.unsound_pairs, 0);
    }
}
