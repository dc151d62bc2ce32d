//! Laplacian construction, eigendecomposition bookkeeping, and the spectral
//! distance functions (Green's function, diffusion and biharmonic distances).
//!
//! Eigenvectors are always L2-normalized and paired with ascending
//! eigenvalues; multiplicity groups and zero modes are tracked explicitly.
//! Signs are canonicalized after decomposition (first nonzero entry
//! positive), so any downstream sign randomness comes from
//! [`random_sign_flip`] alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{degree_vector, Graph};

/// Which Laplacian the decomposition refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    /// L = D - A
    Combinatorial,
    /// D^{-1/2} L D^{-1/2}, with zero rows/columns at isolated nodes
    SymmetricNormalized,
}

/// Relative tolerance under which an eigenvalue counts as a zero mode.
const ZERO_MODE_REL_TOL: f64 = 1e-8;

/// Default multiplicity grouping tolerance, relative to the spectral radius.
pub const DEFAULT_TOL_MULT: f64 = 1e-6;

/// Dense N x N Laplacian matrix, row-major nested vectors.
pub fn laplacian(g: &Graph, kind: LaplacianKind) -> Vec<Vec<f64>> {
    let n = g.num_nodes;
    let deg = degree_vector(g);
    let mut m = vec![vec![0.0; n]; n];
    match kind {
        LaplacianKind::Combinatorial => {
            for i in 0..n {
                m[i][i] = deg[i] as f64;
            }
            for &(a, b) in g.edges() {
                m[a][b] = -1.0;
                m[b][a] = -1.0;
            }
        }
        LaplacianKind::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> =
                deg.iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() }).collect();
            for i in 0..n {
                if deg[i] > 0 {
                    m[i][i] = 1.0;
                }
            }
            for &(a, b) in g.edges() {
                let v = -inv_sqrt[a] * inv_sqrt[b];
                m[a][b] = v;
                m[b][a] = v;
            }
        }
    }
    m
}

/// Ordered eigenvalues with L2-normalized eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub kind: LaplacianKind,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` is the length-N column paired with `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Partition of eigenvalue indices by equality within tolerance.
    pub multiplicity_groups: Vec<Vec<usize>>,
    /// Count of eigenvalues below the zero tolerance.
    pub num_zero_modes: usize,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Zero-mode threshold: eigenvalues below this count as zero.
    pub fn zero_tol(&self) -> f64 {
        let lam_max = self.eigenvalues.last().copied().unwrap_or(0.0);
        ZERO_MODE_REL_TOL * lam_max.max(1.0)
    }
}

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
///
/// `tol_mult` groups eigenvalues whose gap is within
/// `tol_mult * max(1, lambda_max)` into one multiplicity group.
pub fn eigendecompose_matrix(
    matrix: &[Vec<f64>],
    kind: LaplacianKind,
    tol_mult: f64,
) -> Result<SpectralDecomposition> {
    let n = matrix.len();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ShapeMismatch {
                op: "eigendecompose".into(),
                details: format!("row {i} has length {} in a {n}-row matrix", row.len()),
            });
        }
        for j in 0..n {
            if (matrix[i][j] - matrix[j][i]).abs() > 1e-10 {
                return Err(Error::Numerical(format!(
                    "asymmetric input: |A[{i}][{j}] - A[{j}][{i}]| = {}",
                    (matrix[i][j] - matrix[j][i]).abs()
                )));
            }
        }
    }

    let (mut values, mut vectors) = jacobi_eigen(matrix);

    // Sort ascending, carrying columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    values = order.iter().map(|&i| values[i]).collect();
    vectors = order.iter().map(|&i| std::mem::take(&mut vectors[i])).collect();

    // Normalize and canonicalize signs: first entry above threshold positive.
    for col in vectors.iter_mut() {
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in col.iter_mut() {
                *x /= norm;
            }
        }
        let lead = col.iter().find(|x| x.abs() > 1e-9);
        if let Some(&lead) = lead {
            if lead < 0.0 {
                for x in col.iter_mut() {
                    *x = -*x;
                }
            }
        }
    }

    let lam_max = values.last().copied().unwrap_or(0.0);
    let group_tol = tol_mult * lam_max.max(1.0);
    let mut multiplicity_groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match multiplicity_groups.last_mut() {
            Some(group) if values[i] - values[*group.last().unwrap()] <= group_tol => {
                group.push(i);
            }
            _ => multiplicity_groups.push(vec![i]),
        }
    }

    let zero_tol = ZERO_MODE_REL_TOL * lam_max.max(1.0);
    let num_zero_modes = values.iter().take_while(|&&v| v < zero_tol).count();

    Ok(SpectralDecomposition {
        kind,
        eigenvalues: values,
        eigenvectors: vectors,
        multiplicity_groups,
        num_zero_modes,
    })
}

/// Decompose a graph's Laplacian with the default multiplicity tolerance.
pub fn eigendecompose(g: &Graph, kind: LaplacianKind) -> Result<SpectralDecomposition> {
    eigendecompose_matrix(&laplacian(g, kind), kind, DEFAULT_TOL_MULT)
}

/// Cyclic Jacobi for symmetric matrices. Returns (eigenvalues, columns),
/// unsorted.
fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n <= 1 {
        let values = (0..n).map(|i| a[i][i]).collect();
        return (values, v);
    }

    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };
    let scale: f64 = matrix
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(1.0);

    for _sweep in 0..100 {
        if off(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let values: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    let columns: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, columns)
}

/// The m lowest eigenpairs, zero-padded with a mask when m > N.
#[derive(Debug, Clone, PartialEq)]
pub struct EigSelection {
    pub n: usize,
    /// Length m; padded tail entries are exactly zero.
    pub eigenvalues: Vec<f64>,
    /// m columns, each length N; padded columns are exactly zero.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Length m; true where the eigenpair is real.
    pub mask: Vec<bool>,
}

impl EigSelection {
    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn num_real(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

pub fn select_eigpairs(sd: &SpectralDecomposition, m: usize) -> Result<EigSelection> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    let n = sd.n();
    let real = m.min(n);
    let mut eigenvalues = vec![0.0; m];
    let mut eigenvectors = vec![vec![0.0; n]; m];
    let mut mask = vec![false; m];
    for i in 0..real {
        eigenvalues[i] = sd.eigenvalues[i];
        eigenvectors[i] = sd.eigenvectors[i].clone();
        mask[i] = true;
    }
    Ok(EigSelection { n, eigenvalues, eigenvectors, mask })
}

/// Independently flip the sign of each unmasked eigenvector with p = 1/2.
pub fn random_sign_flip(sel: &EigSelection, seed: u64) -> EigSelection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = sel.clone();
    for (i, col) in out.eigenvectors.iter_mut().enumerate() {
        if out.mask[i] && rng.gen::<bool>() {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
    }
    out
}

/// Apply an explicit per-eigenvector sign pattern (`true` = flip).
pub fn apply_sign_flips(sel: &EigSelection, flips: &[bool]) -> EigSelection {
    let mut out = sel.clone();
    for (i, col) in out.eigenvectors.iter_mut().enumerate() {
        if out.mask[i] && flips.get(i).copied().unwrap_or(false) {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
    }
    out
}

/// Electrostatic-potential matrix from the symmetric-normalized spectrum.
///
/// With `as_written = true` the product of eigenvector entries is squared:
/// `G(j1,j2) = d_j1^{1/2} d_j2^{-1/2} sum_i (phi_{i,j1} phi_{i,j2})^2 / lambda_i`.
/// With `as_written = false` the product enters unsquared, which makes G equal
/// to `D^{1/2} (L_sym)^+ D^{-1/2}`. Zero modes are excluded either way.
pub fn greens_function(g: &Graph, as_written: bool) -> Result<Vec<Vec<f64>>> {
    let deg = degree_vector(g);
    if let Some(i) = deg.iter().position(|&d| d == 0) {
        return Err(Error::InvalidGraph(format!(
            "greens_function requires positive degrees; node {i} is isolated"
        )));
    }
    let sd = eigendecompose(g, LaplacianKind::SymmetricNormalized)?;
    let n = g.num_nodes;
    let zero_tol = sd.zero_tol();
    let mut out = vec![vec![0.0; n]; n];
    for (j1, row) in out.iter_mut().enumerate() {
        for (j2, entry) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for i in 0..n {
                if sd.eigenvalues[i] <= zero_tol {
                    continue;
                }
                let prod = sd.eigenvectors[i][j1] * sd.eigenvectors[i][j2];
                let term = if as_written { prod * prod } else { prod };
                sum += term / sd.eigenvalues[i];
            }
            *entry = (deg[j1] as f64).sqrt() / (deg[j2] as f64).sqrt() * sum;
        }
    }
    Ok(out)
}

fn check_nodes(g: &Graph, j1: usize, j2: usize) -> Result<()> {
    if j1 >= g.num_nodes || j2 >= g.num_nodes {
        return Err(Error::InvalidArgument(format!(
            "node pair ({j1},{j2}) out of range for {} nodes",
            g.num_nodes
        )));
    }
    Ok(())
}

/// Squared diffusion distance at time `t`, from the combinatorial spectrum:
/// `sum_{i>0} e^{-2 t lambda_i} (phi_{i,j1} - phi_{i,j2})^2`, zero modes
/// excluded.
pub fn diffusion_distance_sq(g: &Graph, j1: usize, j2: usize, t: f64) -> Result<f64> {
    check_nodes(g, j1, j2)?;
    if t <= 0.0 {
        return Err(Error::InvalidArgument(format!("diffusion time must be positive, got {t}")));
    }
    let sd = eigendecompose(g, LaplacianKind::Combinatorial)?;
    let zero_tol = sd.zero_tol();
    let mut sum = 0.0;
    for i in 0..sd.n() {
        if sd.eigenvalues[i] <= zero_tol {
            continue;
        }
        let diff = sd.eigenvectors[i][j1] - sd.eigenvectors[i][j2];
        sum += (-2.0 * t * sd.eigenvalues[i]).exp() * diff * diff;
    }
    Ok(sum)
}

/// Squared biharmonic distance: `sum_{i>0} (phi_{i,j1} - phi_{i,j2})^2 / lambda_i^2`.
pub fn biharmonic_distance_sq(g: &Graph, j1: usize, j2: usize) -> Result<f64> {
    check_nodes(g, j1, j2)?;
    let sd = eigendecompose(g, LaplacianKind::Combinatorial)?;
    let zero_tol = sd.zero_tol();
    let mut sum = 0.0;
    for i in 0..sd.n() {
        if sd.eigenvalues[i] <= zero_tol {
            continue;
        }
        let diff = sd.eigenvectors[i][j1] - sd.eigenvectors[i][j2];
        sum += diff * diff / (sd.eigenvalues[i] * sd.eigenvalues[i]);
    }
    Ok(sum)
}

/// Heat kernel `e^{-tL}` (combinatorial L) by scaling-and-squaring on a
/// Taylor series. Independent of the eigendecomposition path, so it can serve
/// as an oracle for [`diffusion_distance_sq`].
pub fn heat_kernel(g: &Graph, t: f64) -> Vec<Vec<f64>> {
    let n = g.num_nodes;
    let lap = laplacian(g, LaplacianKind::Combinatorial);
    // Scale so the series argument has small norm, then square back.
    let norm: f64 = lap.iter().flat_map(|r| r.iter()).map(|x| x.abs()).sum();
    let mut s = 0u32;
    let mut scale = t;
    while scale * norm > 0.5 {
        scale /= 2.0;
        s += 1;
    }
    let m: Vec<Vec<f64>> = lap.iter().map(|row| row.iter().map(|x| -scale * x).collect()).collect();

    // exp(M) = sum M^k / k!
    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..60 {
        term = mat_mul(&term, &m);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        let tnorm: f64 = term.iter().flat_map(|r| r.iter()).map(|x| x.abs()).sum();
        for (rr, tr) in result.iter_mut().zip(&term) {
            for (a, b) in rr.iter_mut().zip(tr) {
                *a += b;
            }
        }
        if tnorm < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = mat_mul(&result, &result);
    }
    result
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub(crate) fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b.len();
    let m = if k > 0 { b[0].len() } else { 0 };
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            let aip = a[i][p];
            if aip == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += aip * b[p][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_complete, gen_cycle, gen_erdos_renyi, Graph};
    use nalgebra::DMatrix;

    fn p2() -> Graph {
        Graph::new(2, vec![(0, 1)]).unwrap()
    }

    fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
        let n = m.len();
        DMatrix::from_fn(n, n, |i, j| m[i][j])
    }

    #[test]
    fn laplacian_examples() {
        let l = laplacian(&p2(), LaplacianKind::Combinatorial);
        assert_eq!(l, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let ls = laplacian(&p2(), LaplacianKind::SymmetricNormalized);
        assert_eq!(ls, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let k3 = laplacian(&gen_complete(3).unwrap(), LaplacianKind::Combinatorial);
        assert_eq!(k3[0], vec![2.0, -1.0, -1.0]);
        // Combinatorial rows sum to zero.
        for row in &k3 {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn eigendecompose_p2() {
        let sd = eigendecompose(&p2(), LaplacianKind::Combinatorial).unwrap();
        assert!((sd.eigenvalues[0] - 0.0).abs() < 1e-12);
        assert!((sd.eigenvalues[1] - 2.0).abs() < 1e-12);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        for x in &sd.eigenvectors[0] {
            assert!((x.abs() - inv_sqrt2).abs() < 1e-12);
        }
        assert_eq!(sd.num_zero_modes, 1);
    }

    #[test]
    fn eigendecompose_matches_dense_solver_on_c4_and_k4() {
        for g in [gen_cycle(4).unwrap(), gen_complete(4).unwrap()] {
            let lap = laplacian(&g, LaplacianKind::Combinatorial);
            let sd = eigendecompose(&g, LaplacianKind::Combinatorial).unwrap();
            let oracle = to_dmatrix(&lap).symmetric_eigen();
            let mut expected: Vec<f64> = oracle.eigenvalues.iter().copied().collect();
            expected.sort_by(f64::total_cmp);
            for (a, b) in sd.eigenvalues.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
        let c4 = eigendecompose(&gen_cycle(4).unwrap(), LaplacianKind::Combinatorial).unwrap();
        assert_eq!(c4.multiplicity_groups, vec![vec![0], vec![1, 2], vec![3]]);
        let k4 = eigendecompose(&gen_complete(4).unwrap(), LaplacianKind::Combinatorial).unwrap();
        assert_eq!(k4.multiplicity_groups, vec![vec![0], vec![1, 2, 3]]);
        assert!((k4.eigenvalues[3] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn decomposition_invariants_on_random_graphs() {
        for seed in 0..8 {
            let g = gen_erdos_renyi(4 + (seed as usize % 6), 0.5, seed).unwrap();
            let lap = laplacian(&g, LaplacianKind::Combinatorial);
            let sd = eigendecompose(&g, LaplacianKind::Combinatorial).unwrap();
            let n = sd.n();
            // Ascending, nonnegative-ish.
            for w in sd.eigenvalues.windows(2) {
                assert!(w[0] <= w[1]);
            }
            assert!(sd.eigenvalues[0] >= -1e-9);
            // Unit columns.
            for col in &sd.eigenvectors {
                let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-9);
            }
            // Zero modes count connected components for the combinatorial kind.
            assert_eq!(sd.num_zero_modes, g.connected_components().len());
            // Reconstruction Phi diag(lambda) Phi^T within 1e-7 Frobenius.
            let mut recon = vec![vec![0.0; n]; n];
            for i in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        recon[a][b] += sd.eigenvalues[i] * sd.eigenvectors[i][a] * sd.eigenvectors[i][b];
                    }
                }
            }
            let frob: f64 = recon
                .iter()
                .zip(&lap)
                .flat_map(|(r, l)| r.iter().zip(l).map(|(a, b)| (a - b) * (a - b)))
                .sum::<f64>()
                .sqrt();
            assert!(frob < 1e-7, "reconstruction error {frob}");
        }
    }

    #[test]
    fn sign_flips_leave_reconstruction_unchanged() {
        let g = gen_erdos_renyi(7, 0.5, 9).unwrap();
        let sd = eigendecompose(&g, LaplacianKind::Combinatorial).unwrap();
        let n = sd.n();
        let recon = |vectors: &[Vec<f64>]| -> Vec<f64> {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        out[a * n + b] += sd.eigenvalues[i] * vectors[i][a] * vectors[i][b];
                    }
                }
            }
            out
        };
        let base = recon(&sd.eigenvectors);
        let mut flipped = sd.eigenvectors.clone();
        for x in flipped[1].iter_mut() {
            *x = -*x;
        }
        let alt = recon(&flipped);
        for (a, b) in base.iter().zip(&alt) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = vec![vec![0.0, 1.0], vec![0.5, 0.0]];
        assert!(eigendecompose_matrix(&m, LaplacianKind::Combinatorial, 1e-6).is_err());
    }

    #[test]
    fn select_eigpairs_masking() {
        let c4 = eigendecompose(&gen_cycle(4).unwrap(), LaplacianKind::Combinatorial).unwrap();
        let sel = select_eigpairs(&c4, 2).unwrap();
        assert!((sel.eigenvalues[0]).abs() < 1e-9);
        assert!((sel.eigenvalues[1] - 2.0).abs() < 1e-9);
        assert!(sel.mask.iter().all(|&b| b));

        let sd2 = eigendecompose(&p2(), LaplacianKind::Combinatorial).unwrap();
        let sel5 = select_eigpairs(&sd2, 5).unwrap();
        assert_eq!(sel5.mask, vec![true, true, false, false, false]);
        for i in 2..5 {
            assert_eq!(sel5.eigenvalues[i], 0.0);
            assert!(sel5.eigenvectors[i].iter().all(|&x| x == 0.0));
        }

        let full = select_eigpairs(&sd2, 2).unwrap();
        assert_eq!(full.num_real(), 2);
    }

    #[test]
    fn random_sign_flip_contract() {
        let sd = eigendecompose(&gen_cycle(5).unwrap(), LaplacianKind::Combinatorial).unwrap();
        let sel = select_eigpairs(&sd, 5).unwrap();
        let a = random_sign_flip(&sel, 42);
        let b = random_sign_flip(&sel, 42);
        assert_eq!(a, b);
        assert_eq!(a.eigenvalues, sel.eigenvalues);
        assert_eq!(a.mask, sel.mask);
        for (fa, fs) in a.eigenvectors.iter().zip(&sel.eigenvectors) {
            let norm_a: f64 = fa.iter().map(|x| x * x).sum();
            let norm_s: f64 = fs.iter().map(|x| x * x).sum();
            assert!((norm_a - norm_s).abs() < 1e-15);
        }
        // The all-keep pattern is the identity.
        let kept = apply_sign_flips(&sel, &[false; 5]);
        assert_eq!(kept, sel);
    }

    #[test]
    fn greens_function_examples() {
        // Edgeless graphs are rejected (zero degrees).
        let lonely = Graph::new(3, vec![]).unwrap();
        assert!(greens_function(&lonely, false).is_err());

        // Unsquared form equals D^{1/2} L_sym^+ D^{-1/2} via SVD pseudoinverse.
        let g = p2();
        let unsq = greens_function(&g, false).unwrap();
        let lsym = to_dmatrix(&laplacian(&g, LaplacianKind::SymmetricNormalized));
        let pinv = lsym.pseudo_inverse(1e-10).unwrap();
        for j1 in 0..2 {
            for j2 in 0..2 {
                // unit degrees: D^{1/2} = I
                assert!((unsq[j1][j2] - pinv[(j1, j2)]).abs() < 1e-10);
            }
        }

        // As-written entry (0,1) on P2: ((1/sqrt2)(-1/sqrt2))^2 / 2 = 1/8.
        let sq = greens_function(&g, true).unwrap();
        assert!((sq[0][1] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn diffusion_distance_examples() {
        let g = p2();
        assert_eq!(diffusion_distance_sq(&g, 0, 0, 1.0).unwrap(), 0.0);
        for &t in &[0.1, 0.5, 1.0] {
            let d = diffusion_distance_sq(&g, 0, 1, t).unwrap();
            assert!((d - 2.0 * (-4.0 * t).exp()).abs() < 1e-12);
            let sym = diffusion_distance_sq(&g, 1, 0, t).unwrap();
            assert_eq!(d, sym);
        }
        assert!(diffusion_distance_sq(&g, 0, 5, 1.0).is_err());
    }

    #[test]
    fn biharmonic_distance_examples() {
        let g = p2();
        assert_eq!(biharmonic_distance_sq(&g, 1, 1).unwrap(), 0.0);
        assert!((biharmonic_distance_sq(&g, 0, 1).unwrap() - 0.5).abs() < 1e-12);
        let c4 = gen_cycle(4).unwrap();
        let opposite = biharmonic_distance_sq(&c4, 0, 2).unwrap();
        let adjacent = biharmonic_distance_sq(&c4, 0, 1).unwrap();
        assert!(opposite >= adjacent);
    }

    #[test]
    fn heat_kernel_examples() {
        let g = p2();
        let h0 = heat_kernel(&g, 0.0);
        assert!((h0[0][0] - 1.0).abs() < 1e-12 && h0[0][1].abs() < 1e-12);

        let h1 = heat_kernel(&g, 1.0);
        let e2 = (-2.0f64).exp();
        assert!((h1[0][0] - (1.0 + e2) / 2.0).abs() < 1e-12);
        assert!((h1[0][1] - (1.0 - e2) / 2.0).abs() < 1e-12);

        // Rows sum to 1 for the combinatorial Laplacian.
        let g2 = gen_cycle(5).unwrap();
        let h = heat_kernel(&g2, 0.7);
        for row in &h {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }

        // Matches the eigendecomposition form within 1e-9.
        let sd = eigendecompose(&g2, LaplacianKind::Combinatorial).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let mut v = 0.0;
                for i in 0..5 {
                    v += (-0.7 * sd.eigenvalues[i]).exp()
                        * sd.eigenvectors[i][a]
                        * sd.eigenvectors[i][b];
                }
                assert!((v - h[a][b]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn isomorphic_graphs_share_spectra() {
        let g = gen_erdos_renyi(8, 0.4, 11).unwrap();
        let perm = vec![3, 1, 7, 0, 6, 2, 5, 4];
        let h = g.permuted(&perm).unwrap();
        let sg = eigendecompose(&g, LaplacianKind::Combinatorial).unwrap();
        let sh = eigendecompose(&h, LaplacianKind::Combinatorial).unwrap();
        for (a, b) in sg.eigenvalues.iter().zip(&sh.eigenvalues) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
