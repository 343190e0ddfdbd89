//! Seeded random test objects: symmetric, PSD and orthogonal matrices,
//! identity decompositions and matrix-valued functions.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::functional::MatrixFn;
use crate::matrix::{IdentityDecomposition, SymMatrix};
use crate::{Mask, Result};

/// RNG for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `(G + Gᵀ)/2` with standard normal `G`.
pub fn random_symmetric(d: usize, rng: &mut impl Rng) -> SymMatrix {
    SymMatrix::symmetrize(gaussian_matrix(d, d, rng))
}

/// Symmetric with spectral norm exactly `norm` (unless `d = 0`).
pub fn random_symmetric_with_norm(d: usize, norm: f64, rng: &mut impl Rng) -> SymMatrix {
    let a = random_symmetric(d, rng);
    let s = a.spectral_norm();
    if s > 0.0 {
        a * (norm / s)
    } else {
        a
    }
}

/// `GGᵀ/d`, PSD.
pub fn random_psd(d: usize, rng: &mut impl Rng) -> SymMatrix {
    let g = gaussian_matrix(d, d, rng);
    SymMatrix::symmetrize(&g * g.transpose() / d.max(1) as f64)
}

/// Haar-like orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let qr = gaussian_matrix(d, d, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let signs = DMatrix::from_diagonal(&r.diagonal().map(|v| if v < 0.0 { -1.0 } else { 1.0 }));
    q * signs
}

/// `{K_i}` with `Σ K_iᵀK_i = I`, built as `K_i = A_i S^{−1/2}` for Gaussian
/// `A_i` and `S = Σ A_iᵀA_i`.
pub fn random_identity_decomposition(d: usize, parts: usize, rng: &mut impl Rng) -> Result<IdentityDecomposition> {
    let a: Vec<DMatrix<f64>> = (0..parts).map(|_| gaussian_matrix(d, d, rng)).collect();
    let s = a.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m.transpose() * m);
    let inv_sqrt = SymMatrix::symmetrize(s).map_spectrum(|v| 1.0 / v.max(1e-300).sqrt());
    IdentityDecomposition::new(a.iter().map(|m| m * inv_sqrt.as_matrix()).collect())
}

/// Independent random symmetric values on every state.
pub fn random_matrix_fn(states: &[Mask], d: usize, rng: &mut impl Rng) -> MatrixFn {
    MatrixFn::from_fn(states, |_| random_symmetric(d, rng)).expect("uniform dimension")
}

/// `F(x) = Σ_{i∈x} A_i` with symmetric `A_i`, `‖A_i‖ = lipschitz`: an
/// `L`-Lipschitz function with respect to Hamming distance.
pub fn random_lipschitz_fn(states: &[Mask], n: usize, d: usize, lipschitz: f64, rng: &mut impl Rng) -> MatrixFn {
    let atoms: Vec<SymMatrix> = (0..n).map(|_| random_symmetric_with_norm(d, lipschitz, rng)).collect();
    MatrixFn::from_fn(states, |x| crate::measures::bits(x).fold(SymMatrix::zeros(d), |acc, i| acc + atoms[i].clone()))
        .expect("uniform dimension")
}
