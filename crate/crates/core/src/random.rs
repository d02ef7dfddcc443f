//! Seeded random sampling of states, unitaries and channels.
//!
//! Every stream is a ChaCha8 generator derived from `(seed, stream)`, so
//! parallel workers draw independent, reproducible sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::hermitian_part;
use crate::scalar::{cplx, creal, lit, CMatrix, CVector, Real, C};
use crate::states::{DensityMatrix, PureState};

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> C<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cplx(lit(re), lit(im))
}

/// Complex Ginibre matrix with i.i.d. standard normal real and imaginary parts.
pub fn ginibre<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    let mut m = CMatrix::<T>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

/// Haar-distributed pure state.
pub fn haar_state<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState<T> {
    let v = CVector::<T>::from_fn(dim, |_, _| gaussian(rng));
    PureState::normalized(v).expect("gaussian vector is nonzero almost surely")
}

/// Random density matrix of rank at most `rank` from the induced measure
/// (`G G† / Tr`, `G` Ginibre `dim × rank`). `rank = dim` gives the
/// Hilbert–Schmidt measure.
pub fn random_density<T: Real, R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix<T> {
    let g = ginibre::<T, R>(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_channel_output(hermitian_part(&(m / creal(tr))))
}

/// Full-rank state `(1 − p) σ + p I/d` with `σ` Hilbert–Schmidt random, which
/// keeps the smallest eigenvalue at least `p/d`.
pub fn random_full_rank<T: Real, R: Rng + ?Sized>(dim: usize, floor: f64, rng: &mut R) -> DensityMatrix<T> {
    let sigma = random_density::<T, R>(dim, dim, rng);
    let mixed = DensityMatrix::<T>::maximally_mixed(dim);
    let p = creal(lit::<T>(floor));
    let q = creal(lit::<T>(1.0 - floor));
    DensityMatrix::from_channel_output(sigma.matrix() * q + mixed.matrix() * p)
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    let g = ginibre::<T, R>(dim, dim, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.norm_sqr().sqrt();
        if n > T::zero() {
            let phase = d / creal(n);
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    hermitian_part(&ginibre::<T, R>(dim, dim, rng))
}

/// Kraus operators of a random CPTP map obtained from a Haar isometry
/// `C^dim → C^{ops·dim}`.
pub fn random_kraus_ops<T: Real, R: Rng + ?Sized>(dim: usize, ops: usize, rng: &mut R) -> Vec<CMatrix<T>> {
    let big = haar_unitary::<T, R>(dim * ops, rng);
    (0..ops)
        .map(|k| big.view((k * dim, 0), (dim, dim)).into_owned())
        .collect()
}
