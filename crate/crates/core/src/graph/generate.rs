//! Deterministic synthetic graph generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{Error, Result};

/// Stochastic block model draw with ground-truth community labels.
///
/// Communities partition the nodes as evenly as possible (sizes differ by at
/// most one); node `i` belongs to community `i * c / n` under contiguous
/// assignment. Same `(args, seed)` always yields the same graph.
pub fn gen_sbm(
    num_nodes: usize,
    num_communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<Graph> {
    if num_communities == 0 || num_communities > num_nodes {
        return Err(Error::InvalidArgument(format!(
            "num_communities {num_communities} must be in [1, {num_nodes}]"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::InvalidArgument(
            "require 0 <= p_out <= p_in <= 1".into(),
        ));
    }
    let labels = community_assignment(num_nodes, num_communities);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..num_nodes {
        for j in (i + 1)..num_nodes {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let mut g = Graph::new(num_nodes, edges)?;
    g.node_labels = Some(labels);
    Ok(g)
}

fn community_assignment(n: usize, c: usize) -> Vec<usize> {
    // First n % c communities get the extra node.
    let base = n / c;
    let extra = n % c;
    let mut labels = Vec::with_capacity(n);
    for comm in 0..c {
        let size = base + usize::from(comm < extra);
        labels.extend(std::iter::repeat(comm).take(size));
    }
    labels
}

/// Erdős–Rényi G(n, p) draw.
pub fn gen_erdos_renyi(num_nodes: usize, p: f64, seed: u64) -> Result<Graph> {
    gen_sbm(num_nodes, 1, p, p, seed).map(|mut g| {
        g.node_labels = None;
        g
    })
}

/// Cycle C_n with edges {i, i+1 mod n}.
pub fn gen_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cycle needs n >= 3, got {n}")));
    }
    let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::new(n, edges)
}

/// Complete graph K_n.
pub fn gen_complete(n: usize) -> Result<Graph> {
    if n < 1 {
        return Err(Error::InvalidArgument("complete graph needs n >= 1".into()));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    Graph::new(n, edges)
}

/// Two cycles C_n (nodes 0..n) and C_m (nodes n..n+m) joined by the bridge
/// edge (0, n).
pub fn gen_ring_pair(n: usize, m: usize) -> Result<Graph> {
    if n < 3 || m < 3 {
        return Err(Error::InvalidArgument(format!(
            "ring pair needs both cycles >= 3, got ({n}, {m})"
        )));
    }
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    edges.extend((0..m).map(|i| (n + i, n + (i + 1) % m)));
    edges.push((0, n));
    Graph::new(n + m, edges)
}

/// All connected graphs on at most `max_nodes` nodes, one representative per
/// isomorphism class. `max_nodes <= 6` (the canonical form is min-over-perms).
pub fn enumerate_connected(max_nodes: usize) -> Result<Vec<Graph>> {
    if max_nodes > 6 {
        return Err(Error::SizeGuard(format!(
            "enumerate_connected supports at most 6 nodes, got {max_nodes}"
        )));
    }
    let mut out = Vec::new();
    for n in 1..=max_nodes {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let num_pairs = pairs.len();
        // Edge index remapping for every node permutation.
        let perms = permutations(n);
        let pair_index = |a: usize, b: usize| -> usize {
            let (i, j) = (a.min(b), a.max(b));
            // index of (i, j) in the lexicographic pair list
            i * n - i * (i + 1) / 2 + (j - i - 1)
        };
        let perm_maps: Vec<Vec<usize>> = perms
            .iter()
            .map(|p| pairs.iter().map(|&(a, b)| pair_index(p[a], p[b])).collect())
            .collect();
        let mut seen = std::collections::HashSet::new();
        for mask in 0u64..(1u64 << num_pairs) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let g = Graph::new(n, edges)?;
            if !g.is_connected() {
                continue;
            }
            let canon = perm_maps
                .iter()
                .map(|map| {
                    let mut m = 0u64;
                    for k in 0..num_pairs {
                        if mask >> k & 1 == 1 {
                            m |= 1 << map[k];
                        }
                    }
                    m
                })
                .min()
                .unwrap();
            if seen.insert((n, canon)) {
                out.push(g);
            }
        }
    }
    Ok(out)
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut result = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    heap_permute(&mut current, n, &mut result);
    result
}

fn heap_permute(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..k {
        heap_permute(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::degree_vector;

    #[test]
    fn sbm_degenerate_probabilities_give_disjoint_cliques() {
        let g = gen_sbm(6, 2, 1.0, 0.0, 123).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert_eq!(g.node_labels.as_ref().unwrap(), &vec![0, 0, 0, 1, 1, 1]);
        let comps = g.connected_components();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn sbm_is_deterministic_and_assortative() {
        let a = gen_sbm(40, 4, 0.9, 0.05, 7).unwrap();
        let b = gen_sbm(40, 4, 0.9, 0.05, 7).unwrap();
        assert_eq!(a, b);
        let labels = a.node_labels.as_ref().unwrap();
        let (mut intra, mut inter) = (0usize, 0usize);
        for &(u, v) in a.edges() {
            if labels[u] == labels[v] {
                intra += 1;
            } else {
                inter += 1;
            }
        }
        // 4 communities of 10: 180 intra pairs at p=0.9, 600 inter at p=0.05.
        let intra_frac = intra as f64 / 180.0;
        let inter_frac = inter as f64 / 600.0;
        assert!(intra_frac > inter_frac, "intra {intra_frac} <= inter {inter_frac}");
    }

    #[test]
    fn sbm_rejects_too_many_communities() {
        assert!(gen_sbm(3, 4, 0.5, 0.1, 0).is_err());
    }

    #[test]
    fn sbm_community_sizes_differ_by_at_most_one() {
        let labels = community_assignment(11, 3);
        let mut counts = [0usize; 3];
        for &l in &labels {
            counts[l] += 1;
        }
        assert_eq!(counts.iter().max().unwrap() - counts.iter().min().unwrap(), 1);
    }

    #[test]
    fn sbm_with_equal_probabilities_matches_erdos_renyi_density() {
        // Empirical density over 100 seeds within 3 sigma of the binomial.
        let (n, p) = (12usize, 0.3f64);
        let pairs = (n * (n - 1) / 2) as f64;
        let trials = 100.0 * pairs;
        let mut edges = 0usize;
        for seed in 0..100 {
            edges += gen_sbm(n, 3, p, p, seed).unwrap().num_edges();
        }
        let density = edges as f64 / trials;
        let sigma = (p * (1.0 - p) / trials).sqrt();
        assert!((density - p).abs() < 3.0 * sigma, "density {density} vs p {p}");
    }

    #[test]
    fn canonical_small_generators() {
        let c4 = gen_cycle(4).unwrap();
        assert_eq!(c4.edges(), &[(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(gen_complete(3).unwrap().num_edges(), 3);
        let rp = gen_ring_pair(3, 3).unwrap();
        assert_eq!(rp.num_nodes, 6);
        assert_eq!(rp.num_edges(), 7);
        assert!(gen_cycle(2).is_err());
    }

    #[test]
    fn enumeration_counts_match_oeis() {
        // Connected graphs up to isomorphism: 1, 1, 2, 6, 21, 112 for n=1..6.
        let graphs = enumerate_connected(6).unwrap();
        let count = |n: usize| graphs.iter().filter(|g| g.num_nodes == n).count();
        assert_eq!(count(1), 1);
        assert_eq!(count(2), 1);
        assert_eq!(count(3), 2);
        assert_eq!(count(4), 6);
        assert_eq!(count(5), 21);
        assert_eq!(count(6), 112);
    }

    #[test]
    fn erdos_renyi_has_no_labels() {
        let g = gen_erdos_renyi(10, 0.4, 3).unwrap();
        assert!(g.node_labels.is_none());
        assert!(degree_vector(&g).iter().sum::<usize>() == 2 * g.num_edges());
    }
}
