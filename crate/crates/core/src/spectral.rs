//! Dense symmetric eigensolver and the graph quantities built on it:
//! diffusion-map coordinates, connected components and Laplacian spectra.

use ndarray::{Array1, Array2, ArrayView2};

use crate::dataset::DataMatrix;
use crate::error::{Result, SugarError};
use crate::eval::kmeans;
use crate::kernel::{row_sums, KernelMatrix};

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
/// Column `k` of `eigenvectors` belongs to `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

impl EigenDecomposition {
    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &Array1::from(self.eigenvalues.clone());
        scaled.dot(&self.eigenvectors.t())
    }
}

fn max_asymmetry(s: ArrayView2<'_, f64>) -> f64 {
    let n = s.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((s[[i, j]] - s[[j, i]]).abs());
        }
    }
    worst
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps run in a fixed (p, q) order, so the result is deterministic.
pub fn sym_eigendecomp(s: &Array2<f64>) -> Result<EigenDecomposition> {
    let (n, m) = s.dim();
    if n != m {
        return Err(SugarError::DimensionMismatch(format!("{n}x{m} matrix is not square")));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(SugarError::InvalidData("matrix has non-finite entries".into()));
    }
    let scale = s.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let asym = max_asymmetry(s.view());
    if asym > SYMMETRY_TOL * scale {
        return Err(SugarError::NotSymmetric { max_asymmetry: asym });
    }

    // Work on the symmetrized copy in row-major storage.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (s[[i, j]] + s[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Off-diagonal entries at or below this are left alone.
    let tol = f64::EPSILON * frob / n.max(1) as f64;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol {
                    continue;
                }
                rotated = true;
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                rotate(&mut a, n, p, q, c, sn);
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors = Array2::from_shape_fn((n, n), |(r, k)| v[r * n + order[k]]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Two-sided Jacobi rotation `A ← Jᵀ A J` in the (p, q) plane.
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let (akp, akq) = (a[k * n + p], a[k * n + q]);
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    let (rp, rq) = (p * n, q * n);
    for k in 0..n {
        let (apk, aqk) = (a[rp + k], a[rq + k]);
        a[rp + k] = c * apk - s * aqk;
        a[rq + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
}

/// Eigenvalues that are negative only through rounding are treated as zero;
/// anything below `-1e-10 · max(1, max|λ|)` is rejected.
pub(crate) fn check_psd(eig: &EigenDecomposition) -> Result<()> {
    let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, l| acc.max(l.abs()));
    match eig.eigenvalues.last() {
        Some(&min) if min < -1e-10 * scale => Err(SugarError::NotPsd {
            index: 0,
            eigenvalue: min,
        }),
        _ => Ok(()),
    }
}

/// Symmetric PSD square root `V diag(√max(λ,0)) Vᵀ`.
pub fn psd_sqrt(s: &Array2<f64>) -> Result<Array2<f64>> {
    let eig = sym_eigendecomp(s)?;
    check_psd(&eig)?;
    let roots = Array1::from_iter(eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    let scaled = &eig.eigenvectors * &roots;
    Ok(scaled.dot(&eig.eigenvectors.t()))
}

/// Diffusion-map coordinates of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// N×m, column k is `λ_k^t ψ_k`.
    pub coords: Array2<f64>,
    /// The m retained nontrivial eigenvalues of P, descending.
    pub eigenvalues: Vec<f64>,
}

impl Embedding {
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.coords.column(k).to_vec()
    }
}

fn require_square(k: &KernelMatrix) -> Result<()> {
    if k.is_square() {
        Ok(())
    } else {
        let (n, m) = k.dim();
        Err(SugarError::DimensionMismatch(format!("{n}x{m} kernel is not square")))
    }
}

/// Eigendecomposition of `S = D^{-1/2} K D^{-1/2}` plus the degrees.
fn conjugate_spectrum(k: &KernelMatrix) -> Result<(EigenDecomposition, Vec<f64>)> {
    require_square(k)?;
    let kv = k.values();
    let d = row_sums(kv);
    if let Some(index) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(SugarError::ZeroRowSum { index });
    }
    let n = d.len();
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let s = Array2::from_shape_fn((n, n), |(i, j)| kv[[i, j]] * inv_sqrt[i] * inv_sqrt[j]);
    Ok((sym_eigendecomp(&s)?, d))
}

/// Eigenvalues of the diffusion operator `P = D⁻¹K`, descending.
pub fn diffusion_spectrum(k: &KernelMatrix) -> Result<Vec<f64>> {
    Ok(conjugate_spectrum(k)?.0.eigenvalues)
}

/// Diffusion-map embedding at time `t` with `m` nontrivial coordinates.
///
/// Right eigenvectors of P are `ψ_k = √vol · D^{-1/2} v_k`, normalized so the
/// trivial one is the constant 1 and Euclidean distance in the full
/// embedding equals diffusion distance.
pub fn diffusion_map(k: &KernelMatrix, m: usize, t: u32) -> Result<Embedding> {
    let (n, _) = k.dim();
    if m == 0 || m >= n {
        return Err(SugarError::param("m", format!("need 1 <= m < N = {n}, got {m}")));
    }
    let (eig, d) = conjugate_spectrum(k)?;
    let vol: f64 = d.iter().sum();
    let mut coords = Array2::zeros((n, m));
    for c in 0..m {
        let lambda = eig.eigenvalues[c + 1];
        let weight = lambda.powi(t as i32);
        let v = eig.eigenvectors.column(c + 1);
        // Fix the sign so the first nonzero entry is positive.
        let sign = v.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
        for i in 0..n {
            coords[[i, c]] = sign * weight * vol.sqrt() * v[i] / d[i].sqrt();
        }
    }
    Ok(Embedding {
        coords,
        eigenvalues: eig.eigenvalues[1..=m].to_vec(),
    })
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Components of the graph with an edge wherever affinity ≥ `threshold`.
///
/// Labels are numbered in order of each component's first point.
pub fn connected_components(k: &KernelMatrix, threshold: f64) -> Result<(usize, Vec<usize>)> {
    require_square(k)?;
    let v = k.values();
    let n = v.nrows();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if v[[i, j]] >= threshold || v[[j, i]] >= threshold {
                uf.union(i, j);
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut count = 0;
    for i in 0..n {
        let root = uf.find(i);
        if ids[root] == usize::MAX {
            ids[root] = count;
            count += 1;
        }
        labels.push(ids[root]);
    }
    Ok((count, labels))
}

/// The `m` smallest eigenvalues of the unnormalized Laplacian `L = D − K`, ascending.
pub fn laplacian_spectrum(k: &KernelMatrix, m: usize) -> Result<Vec<f64>> {
    require_square(k)?;
    let (n, _) = k.dim();
    if m > n {
        return Err(SugarError::param("m", format!("asked for {m} eigenvalues of a {n}x{n} Laplacian")));
    }
    let kv = k.values();
    let d = row_sums(kv);
    let mut lap = kv.mapv(|x| -x);
    for i in 0..n {
        lap[[i, i]] += d[i];
    }
    let eig = sym_eigendecomp(&lap)?;
    Ok(eig.eigenvalues.iter().rev().take(m).copied().collect())
}

/// Spectral clustering: k-means over the first `clusters` diffusion coordinates.
pub fn spectral_clustering(k: &KernelMatrix, clusters: usize, t: u32, seed: u64) -> Result<Vec<usize>> {
    let (n, _) = k.dim();
    let m = clusters.min(n.saturating_sub(1)).max(1);
    let emb = diffusion_map(k, m, t)?;
    kmeans(&DataMatrix::new(emb.coords)?, clusters, seed, 10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gaussian_kernel, BandwidthSpec, ResolvedBandwidth};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixed(sigma2: f64) -> ResolvedBandwidth {
        ResolvedBandwidth::Global {
            spec: BandwidthSpec::Fixed { sigma2 },
            sigma2,
        }
    }

    fn random_sym(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        (&a + &a.t()) * 0.5
    }

    fn check_decomposition(s: &Array2<f64>, eig: &EigenDecomposition) {
        let n = s.nrows();
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        for k in 0..n {
            let v = eig.eigenvectors.column(k);
            let r = s.dot(&v) - &(&v * eig.eigenvalues[k]);
            assert!(r.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-8 * norm);
        }
        let gram = eig.eigenvectors.t().dot(&eig.eigenvectors);
        for ((i, j), g) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((g - target).abs() < 1e-8);
        }
        for w in eig.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let rec = eig.reconstruct();
        for (a, b) in rec.iter().zip(s.iter()) {
            assert!((a - b).abs() < 1e-8 * norm);
        }
    }

    #[test]
    fn three_i_minus_ones() {
        let s = Array2::<f64>::eye(3) * 3.0 - Array2::<f64>::ones((3, 3));
        let eig = sym_eigendecomp(&s).unwrap();
        // characteristic polynomial −λ(λ−3)² has roots 3, 3, 0
        for (l, target) in eig.eigenvalues.iter().zip([3.0, 3.0, 0.0]) {
            assert!((l - target).abs() < 1e-12);
        }
        check_decomposition(&s, &eig);
    }

    #[test]
    fn diagonal_matrix() {
        let s = Array2::from_diag(&array![2.0, -1.0, 5.0, 0.5]);
        let eig = sym_eigendecomp(&s).unwrap();
        assert_eq!(eig.eigenvalues, vec![5.0, 2.0, 0.5, -1.0]);
        check_decomposition(&s, &eig);
    }

    #[test]
    fn random_matrices_decompose() {
        for (n, seed) in [(1, 0), (2, 1), (7, 2), (30, 3), (80, 4)] {
            let s = random_sym(n, seed);
            check_decomposition(&s, &sym_eigendecomp(&s).unwrap());
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let s = array![[1.0, 2.0], [2.1, 1.0]];
        assert!(matches!(sym_eigendecomp(&s).unwrap_err(), SugarError::NotSymmetric { .. }));
        assert!(sym_eigendecomp(&Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = Array2::from_shape_fn((4, 2), |_| rng.random_range(-1.0..1.0));
        let s = a.dot(&a.t()); // rank 2
        let r = psd_sqrt(&s).unwrap();
        let back = r.dot(&r);
        for (x, y) in back.iter().zip(s.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(matches!(psd_sqrt(&array![[1.0, 2.0], [2.0, 1.0]]).unwrap_err(), SugarError::NotPsd { .. }));
        assert_eq!(psd_sqrt(&Array2::zeros((2, 2))).unwrap(), Array2::<f64>::zeros((2, 2)));
    }

    fn block_kernel(blocks: &[usize]) -> KernelMatrix {
        let n: usize = blocks.iter().sum();
        let mut v = Array2::zeros((n, n));
        let mut start = 0;
        for &b in blocks {
            for i in start..start + b {
                for j in start..start + b {
                    v[[i, j]] = if i == j { 1.0 } else { 0.6 };
                }
            }
            start += b;
        }
        KernelMatrix::from_square(v, fixed(1.0)).unwrap()
    }

    #[test]
    fn block_kernel_has_repeated_unit_eigenvalue() {
        let k = block_kernel(&[3, 4]);
        let spec = diffusion_spectrum(&k).unwrap();
        assert!((spec[0] - 1.0).abs() < 1e-10);
        assert!((spec[1] - 1.0).abs() < 1e-10);
        assert!(spec[2] < 1.0 - 1e-6);
        let emb = diffusion_map(&k, 2, 1).unwrap();
        assert!((emb.eigenvalues[0] - 1.0).abs() < 1e-10);
    }

    fn two_blobs(seed: u64) -> (DataMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, cx) in [(0usize, -5.0), (1, 5.0)] {
            for _ in 0..25 {
                rows.push(vec![cx + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                labels.push(c);
            }
        }
        (DataMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn first_coordinate_separates_blobs() {
        let (x, labels) = two_blobs(1);
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::Fixed { sigma2: 4.0 }).unwrap();
        let emb = diffusion_map(&k, 2, 1).unwrap();
        let c0 = emb.coordinate(0);
        let sign_of_first = c0[0].signum();
        for (v, l) in c0.iter().zip(&labels) {
            let expected = if *l == labels[0] { sign_of_first } else { -sign_of_first };
            assert_eq!(v.signum(), expected);
        }
    }

    #[test]
    fn rigid_rotation_keeps_spectrum() {
        let (x, _) = two_blobs(2);
        let angle: f64 = 0.7;
        let rot = array![[angle.cos(), -angle.sin()], [angle.sin(), angle.cos()]];
        let xr = DataMatrix::new(x.values().dot(&rot)).unwrap();
        let bw = BandwidthSpec::Fixed { sigma2: 3.0 };
        let a = diffusion_map(&gaussian_kernel(&x, &x, &bw).unwrap(), 10, 1).unwrap();
        let b = diffusion_map(&gaussian_kernel(&xr, &xr, &bw).unwrap(), 10, 1).unwrap();
        for (l1, l2) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((l1 - l2).abs() < 1e-8);
        }
    }

    #[test]
    fn full_embedding_distance_is_diffusion_distance() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 1.1], vec![2.0, 2.0], vec![-1.0, 0.5]])
            .unwrap();
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::Fixed { sigma2: 0.8 }).unwrap();
        let p = crate::kernel::row_normalize(&k).unwrap();
        let d = row_sums(k.values());
        let vol: f64 = d.iter().sum();
        let pi: Vec<f64> = d.iter().map(|x| x / vol).collect();
        for t in [1u32, 2, 3] {
            let pt = p.power(t);
            let emb = diffusion_map(&k, 4, t).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let mut dd = 0.0;
                    for z in 0..5 {
                        dd += (pt.values()[[i, z]] - pt.values()[[j, z]]).powi(2) / pi[z];
                    }
                    let e = emb.coords.row(i).to_owned() - emb.coords.row(j);
                    let de: f64 = e.iter().map(|x| x * x).sum();
                    assert!((dd - de).abs() < 1e-9 * dd.max(1.0), "t={t} ({i},{j}): {dd} vs {de}");
                }
            }
        }
    }

    #[test]
    fn diffusion_map_argument_checks() {
        let k = block_kernel(&[2, 2]);
        assert!(diffusion_map(&k, 0, 1).is_err());
        assert!(diffusion_map(&k, 4, 1).is_err());
        let z = KernelMatrix::from_square(array![[1.0, 0.0], [0.0, 0.0]], fixed(1.0)).unwrap();
        assert!(matches!(diffusion_map(&z, 1, 1).unwrap_err(), SugarError::ZeroRowSum { index: 1 }));
    }

    #[test]
    fn component_thresholds() {
        let (x, _) = two_blobs(3);
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::Fixed { sigma2: 1.0 }).unwrap();
        let max_off = k
            .values()
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        let (c, labels) = connected_components(&k, max_off * 1.0001).unwrap();
        assert_eq!(c, 50);
        assert_eq!(labels, (0..50).collect::<Vec<_>>());
        assert_eq!(connected_components(&k, 0.0).unwrap().0, 1);
    }

    /// Breadth-first search over the thresholded graph.
    fn bfs_components(v: ArrayView2<'_, f64>, threshold: f64) -> usize {
        let n = v.nrows();
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut queue = std::collections::VecDeque::from([s]);
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                for w in 0..n {
                    if !seen[w] && w != u && v[[u, w]] >= threshold {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn separated_gaussian_blobs_form_two_components() {
        let sigma = 1.0;
        let comps = [
            crate::dataset::MixtureComponent::spherical(vec![0.0, 0.0], sigma * sigma, 0.5, 0),
            crate::dataset::MixtureComponent::spherical(vec![20.0 * sigma, 0.0], sigma * sigma, 0.5, 1),
        ];
        let ds = crate::dataset::gen_gaussian_mixture(&comps, 120, 4).unwrap();
        let k = gaussian_kernel(ds.data(), ds.data(), &BandwidthSpec::Fixed { sigma2: 1.0 }).unwrap();
        let threshold = (-1.0f64).exp();
        let (c, labels) = connected_components(&k, threshold).unwrap();
        assert_eq!(c, bfs_components(k.values(), threshold));
        assert_eq!(c, 2);
        assert_eq!(crate::eval::rand_index(&labels, ds.labels()).unwrap(), 1.0);
    }

    #[test]
    fn laplacian_of_all_ones() {
        let k = KernelMatrix::from_square(Array2::ones((3, 3)), fixed(1.0)).unwrap();
        let spec = laplacian_spectrum(&k, 3).unwrap();
        // L = 3I − J has eigenvalues 0, 3, 3
        for (l, target) in spec.iter().zip([0.0, 3.0, 3.0]) {
            assert!((l - target).abs() < 1e-12);
        }
        assert!(laplacian_spectrum(&k, 4).is_err());
    }

    #[test]
    fn laplacian_zero_multiplicity_matches_blocks() {
        for blocks in [vec![3], vec![2, 3], vec![1, 4, 2, 2]] {
            let k = block_kernel(&blocks);
            let n = k.dim().0;
            let spec = laplacian_spectrum(&k, n).unwrap();
            assert!(spec.iter().all(|&l| l >= -1e-10));
            let zeros = spec.iter().filter(|l| l.abs() < 1e-8).count();
            assert_eq!(zeros, blocks.len());
            assert_eq!(connected_components(&k, 1e-12).unwrap().0, blocks.len());
        }
    }

    #[test]
    fn spectral_clustering_recovers_blobs() {
        let (x, labels) = two_blobs(5);
        let k = gaussian_kernel(&x, &x, &BandwidthSpec::Fixed { sigma2: 2.0 }).unwrap();
        let pred = spectral_clustering(&k, 2, 1, 0).unwrap();
        assert_eq!(crate::eval::rand_index(&pred, &labels).unwrap(), 1.0);
    }
}
