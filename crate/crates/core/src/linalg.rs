//! Dense complex helpers that do not belong to a particular quantum type.

use nalgebra::linalg::SymmetricEigen;

use crate::scalar::{creal, from_usize, lit, CMatrix, Real, C};

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_deviation<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// `(m + m†) / 2`.
pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let half = creal(lit::<T>(0.5));
    (m + m.adjoint()) * half
}

/// `[a, b] = ab - ba`.
pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// Frobenius norm.
pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Largest entrywise modulus.
pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = z.norm_sqr().sqrt();
        if a > acc {
            a
        } else {
            acc
        }
    })
}

/// `‖U†U − I‖_max`.
pub fn unitarity_deviation<T: Real>(u: &CMatrix<T>) -> T {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::<T>::identity(n, n)))
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues in descending
/// order. Only the Hermitian part of the input is used.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T: Real> {
    pub eigenvalues: Vec<T>,
    /// Eigenvectors stored as columns, aligned with `eigenvalues`.
    pub eigenvectors: CMatrix<T>,
}

impl<T: Real> EigenDecomposition<T> {
    pub fn of_hermitian(m: &CMatrix<T>) -> Self {
        let eig = SymmetricEigen::new(hermitian_part(m));
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = CMatrix::<T>::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_i f(λ_i) |e_i⟩⟨e_i|`.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = creal(f(lam));
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        self.map_spectrum(|l| l)
    }
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues at or below `n · ε · λ_max` are rounding noise and are set to
/// zero; otherwise their square roots (~1e-8) would leak into every quantity
/// built from the root.
pub fn sqrt_psd<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let eig = EigenDecomposition::of_hermitian(m);
    let top = eig.eigenvalues.first().copied().unwrap_or_else(T::zero);
    let floor = top * T::default_epsilon() * from_usize::<T>(eig.dim());
    eig.map_spectrum(|l| if l > floor { l.sqrt() } else { T::zero() })
}

/// Unitary `W` maximizing `Re Tr(m W)`, i.e. `V U†` for `m = U Σ V†`.
///
/// `V` comes from the Hermitian eigenproblem of `m† m` and `U` from a
/// Householder QR of `m V`, whose columns are orthogonal with norms `σ_i`.
/// The QR also completes `U` on the null space, so `W` is unitary even for
/// rank-deficient `m`.
pub fn polar_unitary<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let v = EigenDecomposition::of_hermitian(&(m.adjoint() * m)).eigenvectors;
    let qr = (m * &v).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..u.ncols() {
        let d = r[(j, j)];
        let modulus = d.norm_sqr().sqrt();
        if modulus > T::zero() {
            let phase = d / creal(modulus);
            for i in 0..u.nrows() {
                u[(i, j)] *= phase;
            }
        }
    }
    v * u.adjoint()
}

/// Sum of singular values, `Re Tr(m W)` with `W` from [`polar_unitary`].
pub fn nuclear_norm<T: Real>(m: &CMatrix<T>) -> T {
    (m * polar_unitary(m)).trace().re
}

/// Matrix exponential `exp(-i θ H)` for Hermitian `H`.
pub fn unitary_exp<T: Real>(h: &CMatrix<T>, theta: T) -> CMatrix<T> {
    let eig = EigenDecomposition::of_hermitian(h);
    let n = eig.dim();
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let phase = -(theta * lam);
        let w = C::new(phase.cos(), phase.sin());
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    scaled * eig.eigenvectors.adjoint()
}

/// Permutation unitary on `dims` that exchanges subsystems `a` and `b`.
pub fn swap_subsystems<T: Real>(dims: &[usize], a: usize, b: usize) -> CMatrix<T> {
    let total: usize = dims.iter().product();
    let mut perm = CMatrix::<T>::zeros(total, total);
    let mut digits = vec![0usize; dims.len()];
    for idx in 0..total {
        split_index(idx, dims, &mut digits);
        digits.swap(a, b);
        let target = join_index(&digits, dims);
        perm[(target, idx)] = creal(T::one());
    }
    perm
}

/// Permutation unitary sending the content of slot `order[k]` to slot `k`.
/// All slots must share the same dimension.
pub fn permute_subsystems<T: Real>(dims: &[usize], order: &[usize]) -> CMatrix<T> {
    let total: usize = dims.iter().product();
    let mut perm = CMatrix::<T>::zeros(total, total);
    let mut digits = vec![0usize; dims.len()];
    let mut moved = vec![0usize; dims.len()];
    for idx in 0..total {
        split_index(idx, dims, &mut digits);
        for (k, &src) in order.iter().enumerate() {
            moved[k] = digits[src];
        }
        let target = join_index(&moved, dims);
        perm[(target, idx)] = creal(T::one());
    }
    perm
}

/// Row-major mixed-radix decomposition; the first subsystem is most significant.
pub fn split_index(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

pub fn join_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0usize, |acc, (&d, &n)| acc * n + d)
}
