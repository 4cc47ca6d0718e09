//! Shared fixtures for the integration suites: seeded random datasets in all
//! three case kinds, plus dense oracles that materialize the factorizations
//! the library deliberately avoids.

use hyperred::compression::CompressedDataset;
use hyperred::kernels::DenseMatrix;
use hyperred::manifold::{
    self, build_cell_dataset, build_quadrature_dataset, CaseKind, TrainingDataset,
};
use hyperred::training::{self, LsProblem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Random dataset within the small-instance envelope (M <= 50, K <= 40,
/// N_r <= 8). Cell kinds use mixed group sizes up to 3.
pub fn random_dataset(rng: &mut ChaCha8Rng, kind: CaseKind) -> TrainingDataset {
    let k = rng.gen_range(2..=40);
    match kind {
        CaseKind::Quadrature => {
            let m = rng.gen_range(3..=50);
            let n_r = rng.gen_range(1..=8);
            let p: Vec<Vec<f64>> = (0..n_r)
                .map(|_| (0..m).map(|_| uniform(rng, -1.0, 1.0)).collect())
                .collect();
            let g: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..m).map(|_| uniform(rng, -1.0, 1.0)).collect())
                .collect();
            let w: Vec<f64> = (0..m).map(|_| uniform(rng, 0.2, 1.5)).collect();
            build_quadrature_dataset(&p, &g, &w).expect("random quadrature dataset")
        }
        CaseKind::CellGeneral | CaseKind::CellSimplified => {
            let m = rng.gen_range(3..=25);
            let n_r = rng.gen_range(3..=8);
            let group_sizes: Vec<usize> =
                (0..m).map(|_| rng.gen_range(1..=3usize.min(n_r))).collect();
            let nodal: usize = group_sizes.iter().sum();
            let mut groups = Vec::with_capacity(m);
            let mut next = 0;
            for &s in &group_sizes {
                groups.push((next..next + s).collect::<Vec<usize>>());
                next += s;
            }
            let coeffs: Vec<Vec<f64>> = (0..n_r)
                .map(|_| (0..nodal).map(|_| uniform(rng, -1.0, 1.0)).collect())
                .collect();
            let integrals: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..nodal).map(|_| uniform(rng, -1.0, 1.0)).collect())
                .collect();
            let measures: Vec<f64> = (0..m).map(|_| uniform(rng, 0.1, 1.0)).collect();
            let weights: Vec<f64> = (0..m).map(|_| uniform(rng, 0.2, 1.5)).collect();
            build_cell_dataset(
                &coeffs,
                &groups,
                &integrals,
                &measures,
                &weights,
                kind == CaseKind::CellSimplified,
            )
            .expect("random cell dataset")
        }
    }
}

pub const ALL_KINDS: [CaseKind; 3] =
    [CaseKind::Quadrature, CaseKind::CellGeneral, CaseKind::CellSimplified];

/// Dense manifold matrix (snapshot-major layout).
pub fn dense_manifold(ds: &TrainingDataset) -> DenseMatrix {
    manifold::assemble_dense(ds, u64::MAX).expect("oracle assembly").into_matrix()
}

/// Full-size prolongation of the compressed manifold: the retained factor
/// expanded by the right singular factor, pushed through the true basis
/// factor, reordered to the snapshot-major layout.
pub fn prolonged_manifold(ds: &TrainingDataset, cds: &CompressedDataset) -> DenseMatrix {
    let g_p = cds.retained_factor.matmul(&cds.right_factor).expect("factor product");
    let c_full = ds.basis().explicit_manifold_factor().matmul(&g_p).expect("manifold product");
    manifold::to_snapshot_major(&c_full, ds.num_summands(), ds.num_test_functions(), ds.num_snapshots())
        .expect("reorder")
}

/// For the simplified kind, the compression acts on the diagonal nodal
/// factor; this returns that factor's data and its prolonged approximation in
/// the snapshot-major layout (one "summand" per nodal slot).
pub fn breve_pair(ds: &TrainingDataset, cds: &CompressedDataset) -> (DenseMatrix, DenseMatrix) {
    let basis = ds.basis();
    let nodal = basis.nodal_dim();
    let factor = basis.explicit_compression_factor();
    let data = factor.matmul(ds.snapshots()).expect("factor product");
    let g_p = cds.retained_factor.matmul(&cds.right_factor).expect("factor product");
    let approx = factor.matmul(&g_p).expect("factor product");
    let to = |m: &DenseMatrix| {
        manifold::to_snapshot_major(m, nodal, basis.num_test_functions(), ds.num_snapshots())
            .expect("reorder")
    };
    (to(&data), to(&approx))
}

/// Standard training problem from the dense oracle.
pub fn standard_problem(ds: &TrainingDataset) -> LsProblem {
    let dense = manifold::assemble_dense(ds, u64::MAX).expect("oracle assembly");
    training::build_ls_standard(dense, ds).expect("standard problem")
}

/// Frobenius norm of the difference between the dense manifold and its
/// prolonged compression, in the geometry the compression acted on.
pub fn compression_error_oracle(ds: &TrainingDataset, cds: &CompressedDataset) -> f64 {
    match ds.kind() {
        CaseKind::Quadrature | CaseKind::CellGeneral => {
            let dense = dense_manifold(ds);
            let prolonged = prolonged_manifold(ds, cds);
            dense.sub(&prolonged).expect("same dims").frobenius_norm()
        }
        CaseKind::CellSimplified => {
            let (data, approx) = breve_pair(ds, cds);
            data.sub(&approx).expect("same dims").frobenius_norm()
        }
    }
}

/// All index subsets of `items` with exactly `size` elements.
pub fn subsets_of_size(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn recurse(
        items: &[usize],
        start: usize,
        size: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        let needed = size - current.len();
        for i in start..items.len() {
            if items.len() - i < needed {
                break;
            }
            current.push(items[i]);
            recurse(items, i + 1, size, current, out);
            current.pop();
        }
    }
    recurse(items, 0, size, &mut current, &mut out);
    out
}
