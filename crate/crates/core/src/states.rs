//! Density matrices, pure states and generators.
//!
//! Matrices are dense. Composite systems use row-major ordering with the
//! first listed subsystem most significant, so `|a⟩ ⊗ |b⟩` has index
//! `a * dim_b + b`.
//!
//! Qubit levels are indexed `|0⟩, |1⟩` as usual. Search labels are a separate
//! 1-based [`Label`] matching database entries `x = 1..N`.

use std::fmt;

use crate::error::{invalid, Error, Result};
pub use crate::linalg::EigenDecomposition;
use crate::linalg::{hermitian_deviation, hermitian_part, kron, max_abs, split_index};
use crate::scalar::{creal, from_usize, lit, to_f64, CMatrix, CVector, Real};

/// Default cap on the total Hilbert space dimension.
pub const DEFAULT_DIM_CAP: usize = 64;

/// Entrywise Hermiticity tolerance for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on `|Tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped; anything lower is rejected.
pub const PSD_TOL: f64 = 1e-10;
/// Tolerance on `|‖ψ‖² − 1|`.
pub const NORM_TOL: f64 = 1e-12;

/// Database label `x ∈ 1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(usize);

impl Label {
    pub fn new(x: usize, n: usize) -> Result<Self> {
        if x == 0 || x > n {
            return Err(invalid("x", format!("label {x} outside 1..={n}")));
        }
        Ok(Label(x))
    }

    /// All labels `1..=n`.
    pub fn all(n: usize) -> impl Iterator<Item = Label> {
        (1..=n).map(Label)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based basis index.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates `matrix` against the density matrix invariants.
    ///
    /// Slightly negative eigenvalues (down to `-PSD_TOL`) are clamped to zero
    /// and the trace renormalized.
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState(format!(
                "matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidState("empty matrix".into()));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > lit(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(to_f64(dev)));
        }
        let tr = matrix.trace().re;
        if (tr - T::one()).abs() > lit(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {} differs from 1", to_f64(tr))));
        }
        let herm = hermitian_part(&matrix);
        let eig = EigenDecomposition::of_hermitian(&herm);
        let min = eig.eigenvalues.last().copied().unwrap_or_else(T::zero);
        if min < -lit::<T>(PSD_TOL) {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", to_f64(min))));
        }
        if min < T::zero() {
            let clamped = eig.map_spectrum(|l| if l > T::zero() { l } else { T::zero() });
            let tr = clamped.trace().re;
            return Ok(Self {
                matrix: clamped / creal(tr),
            });
        }
        Ok(Self { matrix: herm })
    }

    /// Wraps a matrix produced by a trace-preserving completely positive map
    /// of a valid state.
    pub(crate) fn from_channel_output(matrix: CMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn from_pure(psi: &PureState<T>) -> Self {
        let v = psi.amplitudes();
        Self {
            matrix: v * v.adjoint(),
        }
    }

    /// `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let w = creal(T::one() / from_usize(dim));
        Self {
            matrix: CMatrix::<T>::identity(dim, dim) * w,
        }
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[T]) -> Result<Self> {
        let v = CVector::<T>::from_iterator(populations.len(), populations.iter().map(|&p| creal(p)));
        Self::new(CMatrix::<T>::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> T {
        self.matrix.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    /// `⟨k|ρ|k⟩` for a zero-based basis index.
    pub fn population(&self, k: usize) -> T {
        self.matrix[(k, k)].re
    }

    pub fn eigen(&self) -> EigenDecomposition<T> {
        EigenDecomposition::of_hermitian(&self.matrix)
    }

    /// Re-checks all invariants without clamping. Used to audit states that
    /// were produced internally.
    pub fn check_invariants(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.matrix);
        if dev > lit(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(to_f64(dev)));
        }
        if (self.trace() - T::one()).abs() > lit(TRACE_TOL) {
            return Err(Error::InvalidState(format!("trace {}", to_f64(self.trace()))));
        }
        let min = self.eigen().eigenvalues.last().copied().unwrap_or_else(T::zero);
        if min < -lit::<T>(PSD_TOL) {
            return Err(Error::InvalidState(format!("negative eigenvalue {:e}", to_f64(min))));
        }
        Ok(())
    }
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T: Real> {
    amplitudes: CVector<T>,
}

impl<T: Real> PureState<T> {
    pub fn new(amplitudes: CVector<T>) -> Result<Self> {
        let n2 = amplitudes.norm_squared();
        if (n2 - T::one()).abs() > lit(NORM_TOL) {
            return Err(Error::InvalidState(format!(
                "state norm² {} differs from 1",
                to_f64(n2)
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: CVector<T>) -> Result<Self> {
        let n = amplitudes.norm();
        if amplitudes.is_empty() || n <= T::zero() || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes / creal(n),
        })
    }

    /// Computational basis state `|index⟩` (zero-based).
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(invalid("index", format!("{index} outside 0..{dim}")));
        }
        let mut v = CVector::<T>::zeros(dim);
        v[index] = creal(T::one());
        Ok(Self { amplitudes: v })
    }

    /// Basis state `|x⟩` of the N-level sensing system.
    pub fn label(n: usize, x: Label) -> Result<Self> {
        Self::basis(n, x.index())
    }

    /// `|ψ_0⟩ = N^{-1/2} Σ_x |x⟩`.
    pub fn uniform(n: usize) -> Self {
        let a = creal(T::one() / from_usize::<T>(n).sqrt());
        Self {
            amplitudes: CVector::<T>::from_element(n, a),
        }
    }

    /// `|+⟩ = (|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        Self::uniform(2)
    }

    /// `|+⟩^{⊗m}`.
    pub fn plus_product(m: usize) -> Self {
        Self::uniform(1 << m)
    }

    /// `(|0…0⟩ + |1…1⟩)/√2` on `m` qubits. For `m = 0` this is the trivial
    /// one-dimensional state.
    pub fn ghz(m: usize) -> Self {
        let dim = 1usize << m;
        if dim == 1 {
            return Self::uniform(1);
        }
        let mut v = CVector::<T>::zeros(dim);
        let a = creal(T::one() / lit::<T>(2.0).sqrt());
        v[0] = a;
        v[dim - 1] = a;
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState<T>) -> Result<crate::scalar::C<T>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn tensor(&self, other: &PureState<T>) -> Self {
        Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }

    pub fn density(&self) -> DensityMatrix<T> {
        DensityMatrix::from_pure(self)
    }
}

/// Generating Hamiltonian of a unitary evolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian<T: Real> {
    /// `|x⟩⟨x|` on an N-level system.
    Projector { label: Label, dim: usize },
    /// Total excitation number `n̂` on `qubits` qubits.
    ExcitationNumber { qubits: usize },
    /// Arbitrary Hermitian matrix.
    Custom(CMatrix<T>),
}

impl<T: Real> Hamiltonian<T> {
    pub fn projector(x: usize, dim: usize) -> Result<Self> {
        Ok(Hamiltonian::Projector {
            label: Label::new(x, dim)?,
            dim,
        })
    }

    pub fn custom(matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("hamiltonian", "matrix is not square"));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > lit(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(to_f64(dev)));
        }
        Ok(Hamiltonian::Custom(hermitian_part(&matrix)))
    }

    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Projector { dim, .. } => *dim,
            Hamiltonian::ExcitationNumber { qubits } => 1 << qubits,
            Hamiltonian::Custom(m) => m.nrows(),
        }
    }

    pub fn matrix(&self) -> CMatrix<T> {
        match self {
            Hamiltonian::Projector { label, dim } => {
                let mut m = CMatrix::<T>::zeros(*dim, *dim);
                m[(label.index(), label.index())] = creal(T::one());
                m
            }
            Hamiltonian::ExcitationNumber { qubits } => {
                let dim = 1usize << qubits;
                let diag = CVector::<T>::from_fn(dim, |k, _| creal(from_usize(k.count_ones() as usize)));
                CMatrix::<T>::from_diagonal(&diag)
            }
            Hamiltonian::Custom(m) => m.clone(),
        }
    }

    /// Embeds the generator on subsystem `slot` of a composite with `dims`,
    /// acting as identity elsewhere.
    pub fn embed(&self, dims: &[usize], slot: usize) -> Result<Self> {
        if slot >= dims.len() {
            return Err(invalid("slot", format!("{slot} outside 0..{}", dims.len())));
        }
        if dims[slot] != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: dims[slot],
                found: self.dim(),
            });
        }
        let mut out = CMatrix::<T>::identity(1, 1);
        for (k, &d) in dims.iter().enumerate() {
            let factor = if k == slot {
                self.matrix()
            } else {
                CMatrix::<T>::identity(d, d)
            };
            out = kron(&out, &factor);
        }
        Ok(Hamiltonian::Custom(out))
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

/// `a ⊗ b` with the default dimension cap.
pub fn tensor<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    tensor_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn tensor_with_cap<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>, cap: usize) -> Result<DensityMatrix<T>> {
    let dim = a.dim() * b.dim();
    if dim > cap {
        return Err(Error::SizeLimit { dim, cap });
    }
    Ok(DensityMatrix::from_channel_output(kron(a.matrix(), b.matrix())))
}

/// Reduced state on the subsystems listed in `keep`. The result orders the
/// kept subsystems as they appear in `dims`.
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix<T>> {
    Ok(DensityMatrix::from_channel_output(partial_trace_matrix(
        rho.matrix(),
        keep,
        dims,
    )?))
}

/// Partial trace of an arbitrary operator (used for derivatives as well as
/// states).
pub fn partial_trace_matrix<T: Real>(m: &CMatrix<T>, keep: &[usize], dims: &[usize]) -> Result<CMatrix<T>> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != m.nrows() || !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: total,
        });
    }
    let mut kept = vec![false; dims.len()];
    for &k in keep {
        if k >= dims.len() {
            return Err(invalid("keep", format!("subsystem {k} outside 0..{}", dims.len())));
        }
        kept[k] = true;
    }
    let keep_dims: Vec<usize> = dims.iter().zip(&kept).filter(|(_, &k)| k).map(|(&d, _)| d).collect();
    let out_dim: usize = keep_dims.iter().product();
    let mut out = CMatrix::<T>::zeros(out_dim, out_dim);

    let mut di = vec![0usize; dims.len()];
    let mut dj = vec![0usize; dims.len()];
    for i in 0..total {
        split_index(i, dims, &mut di);
        for j in 0..total {
            split_index(j, dims, &mut dj);
            let traced_match = (0..dims.len()).all(|k| kept[k] || di[k] == dj[k]);
            if !traced_match {
                continue;
            }
            let (mut oi, mut oj) = (0usize, 0usize);
            for k in 0..dims.len() {
                if kept[k] {
                    oi = oi * dims[k] + di[k];
                    oj = oj * dims[k] + dj[k];
                }
            }
            out[(oi, oj)] += m[(i, j)];
        }
    }
    Ok(out)
}

/// `Tr(ρH)`; the imaginary part is discarded.
pub fn expectation<T: Real>(rho: &DensityMatrix<T>, h: &Hamiltonian<T>) -> Result<T> {
    h.check_dim(rho.dim())?;
    let hm = h.matrix();
    let mut acc = T::zero();
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += (rho.matrix()[(i, j)] * hm[(j, i)]).re;
        }
    }
    Ok(acc)
}

/// `⟨H²⟩ − ⟨H⟩²` for a pure state, clamped at zero.
pub fn variance<T: Real>(psi: &PureState<T>, h: &Hamiltonian<T>) -> Result<T> {
    h.check_dim(psi.dim())?;
    let hpsi = h.matrix() * psi.amplitudes();
    let mean = psi.amplitudes().dotc(&hpsi).re;
    let second = hpsi.norm_squared();
    let var = second - mean * mean;
    Ok(if var > T::zero() { var } else { T::zero() })
}

/// Largest entrywise distance between two matrices.
pub fn max_entry_distance<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    max_abs(&(a - b))
}
