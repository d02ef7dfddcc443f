//! Interrogation channels: dephasing, the oracle phase and their composition.
//!
//! Both the dephasing map and the oracle unitary are diagonal in the
//! computational basis of the sensing subsystem, so they act on a density
//! matrix as an entrywise (Schur) multiplication. Ancillas and other parallel
//! slots are left untouched.

use crate::error::{invalid, Error, Result};
use crate::linalg::{max_abs, unitarity_deviation};
use crate::protocol::SchemeConfig;
use crate::scalar::{cplx, creal, lit, to_f64, CMatrix, Real, C};
use crate::states::{DensityMatrix, Label};

/// Tolerance on `‖Σ K†K − I‖_max`.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Locates the sensing digit inside a composite index.
#[derive(Debug, Clone, PartialEq)]
struct SensingLayout {
    total: usize,
    sensing_dim: usize,
    stride: usize,
}

impl SensingLayout {
    fn new(dims: &[usize], slot: usize) -> Result<Self> {
        if slot >= dims.len() {
            return Err(invalid("slot", format!("{slot} outside 0..{}", dims.len())));
        }
        if dims.contains(&0) {
            return Err(invalid("dims", "zero-dimensional subsystem"));
        }
        Ok(Self {
            total: dims.iter().product(),
            sensing_dim: dims[slot],
            stride: dims[slot + 1..].iter().product(),
        })
    }

    #[inline]
    fn digit(&self, idx: usize) -> usize {
        (idx / self.stride) % self.sensing_dim
    }
}

fn check_dims<T: Real>(layout: &SensingLayout, m: &CMatrix<T>) -> Result<()> {
    if m.nrows() != layout.total || m.ncols() != layout.total {
        return Err(Error::DimensionMismatch {
            expected: layout.total,
            found: m.nrows(),
        });
    }
    Ok(())
}

/// Dephasing of the sensing subsystem: every coherence between distinct
/// sensing levels is multiplied by `η = e^{−γτ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingChannel<T: Real> {
    gamma: T,
    tau: T,
    layout: SensingLayout,
}

impl<T: Real> DephasingChannel<T> {
    /// Dephasing on subsystem `slot` of a composite with `dims`.
    pub fn new(dims: &[usize], slot: usize, gamma: T, tau: T) -> Result<Self> {
        if !(gamma >= T::zero()) || !gamma.is_finite() {
            return Err(invalid("gamma", "dephasing rate must be finite and nonnegative"));
        }
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(invalid("tau", "step time must be positive"));
        }
        Ok(Self {
            gamma,
            tau,
            layout: SensingLayout::new(dims, slot)?,
        })
    }

    /// N-level dephasing with no ancilla.
    pub fn n_level(n: usize, gamma: T, tau: T) -> Result<Self> {
        Self::new(&[n], 0, gamma, tau)
    }

    pub fn qubit(gamma: T, tau: T) -> Result<Self> {
        Self::n_level(2, gamma, tau)
    }

    /// Damping factor `e^{−γτ}`.
    pub fn eta(&self) -> T {
        (-(self.gamma * self.tau)).exp()
    }

    pub fn dim(&self) -> usize {
        self.layout.total
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        Ok(DensityMatrix::from_channel_output(self.apply_matrix(rho.matrix())?))
    }

    /// Linear action on an arbitrary operator.
    pub fn apply_matrix(&self, m: &CMatrix<T>) -> Result<CMatrix<T>> {
        check_dims(&self.layout, m)?;
        let eta = creal(self.eta());
        let mut out = m.clone();
        if self.eta() == T::one() {
            return Ok(out);
        }
        let n = self.layout.total;
        for j in 0..n {
            let sj = self.layout.digit(j);
            for i in 0..n {
                if self.layout.digit(i) != sj {
                    out[(i, j)] *= eta;
                }
            }
        }
        Ok(out)
    }

    /// Kraus form: `√η I` together with `√(1−η) P_k` for each sensing
    /// projector `P_k` (identity on the remaining subsystems).
    pub fn kraus(&self) -> KrausChannel<T> {
        let n = self.layout.total;
        let eta = self.eta();
        let mut ops = vec![CMatrix::<T>::identity(n, n) * creal(eta.sqrt())];
        let w = creal((T::one() - eta).sqrt());
        for k in 0..self.layout.sensing_dim {
            let mut p = CMatrix::<T>::zeros(n, n);
            for i in 0..n {
                if self.layout.digit(i) == k {
                    p[(i, i)] = w;
                }
            }
            ops.push(p);
        }
        KrausChannel { ops }
    }
}

/// `U = exp(−iωτ |x⟩⟨x|)` on the sensing subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleUnitary<T: Real> {
    label: Label,
    omega: T,
    tau: T,
    layout: SensingLayout,
}

impl<T: Real> OracleUnitary<T> {
    pub fn new(dims: &[usize], slot: usize, label: Label, omega: T, tau: T) -> Result<Self> {
        let layout = SensingLayout::new(dims, slot)?;
        if label.get() > layout.sensing_dim {
            return Err(invalid(
                "x",
                format!("label {label} outside 1..={}", layout.sensing_dim),
            ));
        }
        if !omega.is_finite() {
            return Err(invalid("omega", "frequency must be finite"));
        }
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(invalid("tau", "step time must be positive"));
        }
        Ok(Self {
            label,
            omega,
            tau,
            layout,
        })
    }

    pub fn n_level(n: usize, label: Label, omega: T, tau: T) -> Result<Self> {
        Self::new(&[n], 0, label, omega, tau)
    }

    pub fn dim(&self) -> usize {
        self.layout.total
    }

    fn phase(&self) -> C<T> {
        let a = -(self.omega * self.tau);
        cplx(a.cos(), a.sin())
    }

    #[inline]
    fn marked(&self, idx: usize) -> bool {
        self.layout.digit(idx) == self.label.index()
    }

    /// Dense diagonal matrix of the unitary.
    pub fn matrix(&self) -> CMatrix<T> {
        let n = self.layout.total;
        let mut u = CMatrix::<T>::identity(n, n);
        let ph = self.phase();
        for i in 0..n {
            if self.marked(i) {
                u[(i, i)] = ph;
            }
        }
        u
    }

    /// Generator `|x⟩⟨x| ⊗ I` on the full space.
    pub fn generator(&self) -> CMatrix<T> {
        let n = self.layout.total;
        let mut h = CMatrix::<T>::zeros(n, n);
        for i in 0..n {
            if self.marked(i) {
                h[(i, i)] = creal(T::one());
            }
        }
        h
    }

    /// `U m U†`.
    pub fn apply_matrix(&self, m: &CMatrix<T>) -> Result<CMatrix<T>> {
        check_dims(&self.layout, m)?;
        let ph = self.phase();
        let phc = ph.conj();
        let n = self.layout.total;
        let mut out = m.clone();
        for j in 0..n {
            let mj = self.marked(j);
            for i in 0..n {
                match (self.marked(i), mj) {
                    (true, false) => out[(i, j)] *= ph,
                    (false, true) => out[(i, j)] *= phc,
                    _ => {}
                }
            }
        }
        Ok(out)
    }

    /// `U† m U`.
    pub fn apply_adjoint_matrix(&self, m: &CMatrix<T>) -> Result<CMatrix<T>> {
        let inverse = Self {
            omega: -self.omega,
            ..self.clone()
        };
        inverse.apply_matrix(m)
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        Ok(DensityMatrix::from_channel_output(self.apply_matrix(rho.matrix())?))
    }

    /// `−iτ [|x⟩⟨x|, m]`, the ω-derivative of `U m U†` at fixed `m` after the
    /// rotation has been applied.
    fn derivative_term(&self, rotated: &CMatrix<T>) -> CMatrix<T> {
        let n = self.layout.total;
        let mut out = CMatrix::<T>::zeros(n, n);
        // −iτ (h_i − h_j) m_ij
        let minus_i_tau = cplx(T::zero(), -self.tau);
        for j in 0..n {
            let hj = self.marked(j);
            for i in 0..n {
                match (self.marked(i), hj) {
                    (true, false) => out[(i, j)] = rotated[(i, j)] * minus_i_tau,
                    (false, true) => out[(i, j)] = -(rotated[(i, j)] * minus_i_tau),
                    _ => {}
                }
            }
        }
        out
    }
}

/// Generic CPTP map `ρ ↦ Σ_k K_k ρ K_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel<T: Real> {
    ops: Vec<CMatrix<T>>,
}

impl<T: Real> KrausChannel<T> {
    pub fn new(ops: Vec<CMatrix<T>>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| invalid("kraus", "at least one operator required"))?;
        let dim = first.nrows();
        let mut sum = CMatrix::<T>::zeros(dim, dim);
        for k in &ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: k.nrows(),
                });
            }
            sum += k.adjoint() * k;
        }
        let dev = max_abs(&(sum - CMatrix::<T>::identity(dim, dim)));
        if dev > lit(COMPLETENESS_TOL) {
            return Err(invalid("kraus", format!("completeness violated by {:e}", to_f64(dev))));
        }
        Ok(Self { ops })
    }

    /// Unitary channel.
    pub fn unitary(u: CMatrix<T>) -> Result<Self> {
        if unitarity_deviation(&u) > lit(1e-12) {
            return Err(invalid("unitary", "matrix is not unitary"));
        }
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn operators(&self) -> &[CMatrix<T>] {
        &self.ops
    }

    /// `Λ ⊗ id_ancilla`.
    pub fn extend(&self, ancilla_dim: usize) -> Self {
        let id = CMatrix::<T>::identity(ancilla_dim, ancilla_dim);
        Self {
            ops: self.ops.iter().map(|k| k.kronecker(&id)).collect(),
        }
    }

    /// `Λ_2 ∘ Λ_1` where `self = Λ_1`.
    pub fn then(&self, next: &KrausChannel<T>) -> Result<Self> {
        if self.dim() != next.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: next.dim(),
            });
        }
        let ops = next
            .ops
            .iter()
            .flat_map(|b| self.ops.iter().map(move |a| b * a))
            .collect();
        Ok(Self { ops })
    }

    pub fn apply_matrix(&self, m: &CMatrix<T>) -> Result<CMatrix<T>> {
        if m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(self
            .ops
            .iter()
            .fold(CMatrix::<T>::zeros(self.dim(), self.dim()), |acc, k| {
                acc + k * m * k.adjoint()
            }))
    }

    pub fn apply(&self, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        Ok(DensityMatrix::from_channel_output(self.apply_matrix(rho.matrix())?))
    }
}

pub fn apply_dephasing<T: Real>(ch: &DephasingChannel<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    ch.apply(rho)
}

pub fn apply_oracle<T: Real>(u: &OracleUnitary<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    u.apply(rho)
}

/// The pair of maps making up one query of label `x` under `cfg`.
pub fn step_channels<T: Real>(x: Label, cfg: &SchemeConfig<T>) -> Result<(OracleUnitary<T>, DephasingChannel<T>)> {
    let dims = cfg.subsystem_dims();
    let oracle = OracleUnitary::new(&dims, 0, x, cfg.omega, cfg.tau)?;
    let deph = DephasingChannel::new(&dims, 0, cfg.gamma, cfg.tau)?;
    Ok((oracle, deph))
}

/// `Λ_τ(U^x ρ U^x†)`, one query without the intertwining unitary.
pub fn interrogation_step<T: Real>(
    x: Label,
    cfg: &SchemeConfig<T>,
    rho: &DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    let (oracle, deph) = step_channels(x, cfg)?;
    let rotated = oracle.apply_matrix(rho.matrix())?;
    Ok(DensityMatrix::from_channel_output(deph.apply_matrix(&rotated)?))
}

/// State and ω-derivative after one query followed by `v`.
///
/// Uses `∂_ω(UρU†) = −iτ[H^x, UρU†] + U(∂_ω ρ)U†`, then linearity of the
/// dephasing map and of conjugation by `v`.
pub(crate) fn propagate<T: Real>(
    oracle: &OracleUnitary<T>,
    deph: &DephasingChannel<T>,
    v: Option<&CMatrix<T>>,
    rho: &CMatrix<T>,
    drho: Option<&CMatrix<T>>,
) -> Result<(CMatrix<T>, CMatrix<T>)> {
    let rotated = oracle.apply_matrix(rho)?;
    let mut d = oracle.derivative_term(&rotated);
    if let Some(dr) = drho {
        d += oracle.apply_matrix(dr)?;
    }
    let mut next = deph.apply_matrix(&rotated)?;
    let mut dnext = deph.apply_matrix(&d)?;
    if let Some(v) = v {
        next = v * next * v.adjoint();
        dnext = v * dnext * v.adjoint();
    }
    Ok((next, dnext))
}

/// One full step of the scheme (query, dephasing, then the intertwining
/// unitary for step `step`, 1-based) together with the exact ω-derivative.
pub fn step_with_derivative<T: Real>(
    x: Label,
    cfg: &SchemeConfig<T>,
    step: usize,
    rho: &DensityMatrix<T>,
    drho: &CMatrix<T>,
) -> Result<(DensityMatrix<T>, CMatrix<T>)> {
    if drho.nrows() != rho.dim() || drho.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: drho.nrows(),
        });
    }
    let (oracle, deph) = step_channels(x, cfg)?;
    let v = cfg.intertwiner(step)?;
    let (next, dnext) = propagate(&oracle, &deph, v.as_ref(), rho.matrix(), Some(drho))?;
    Ok((DensityMatrix::from_channel_output(next), dnext))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bures_angle;
    use crate::linalg::{frobenius, hermitian_part};
    use crate::protocol::Intertwiner;
    use crate::random::{haar_unitary, random_density, random_kraus_ops, seeded_rng};
    use crate::states::{max_entry_distance, PureState};
    use approx::assert_abs_diff_eq;

    type Dm = DensityMatrix<f64>;

    fn diag_part(m: &CMatrix<f64>) -> CMatrix<f64> {
        CMatrix::from_diagonal(&m.diagonal())
    }

    #[test]
    fn qubit_dephasing_halves_coherence() {
        let ch = DephasingChannel::qubit(std::f64::consts::LN_2, 1.0).unwrap();
        let out = apply_dephasing(&ch, &PureState::plus().density()).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 1)].re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out.matrix()[(1, 0)].re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_rate_is_identity_and_diagonals_are_fixed() {
        let mut rng = seeded_rng(5);
        let rho: Dm = random_density(4, 4, &mut rng);
        let id = DephasingChannel::n_level(4, 0.0, 0.7).unwrap();
        assert_eq!(id.apply(&rho).unwrap().matrix(), rho.matrix());

        let d = Dm::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        for gt in [0.01, 1.0, 30.0] {
            let ch = DephasingChannel::n_level(4, gt, 1.0).unwrap();
            assert_eq!(ch.apply(&d).unwrap().matrix(), d.matrix());
            let out = ch.apply(&rho).unwrap();
            for k in 0..4 {
                assert_eq!(out.matrix()[(k, k)], rho.matrix()[(k, k)]);
            }
        }
    }

    #[test]
    fn dephasing_matches_convex_and_kraus_forms() {
        let mut rng = seeded_rng(6);
        for n in 2..6 {
            let rho: Dm = random_density(n, n, &mut rng);
            let ch = DephasingChannel::n_level(n, 0.37, 1.3).unwrap();
            let eta = ch.eta();
            let convex = rho.matrix() * creal(eta) + diag_part(rho.matrix()) * creal(1.0 - eta);
            let direct = ch.apply(&rho).unwrap();
            assert!(max_entry_distance(direct.matrix(), &convex) < 1e-15);
            let k = KrausChannel::new(ch.kraus().operators().to_vec()).unwrap();
            assert!(max_entry_distance(&k.apply_matrix(rho.matrix()).unwrap(), &convex) < 1e-14);
        }
    }

    #[test]
    fn dephasing_acts_only_on_sensing_slot() {
        let mut rng = seeded_rng(8);
        let a: Dm = random_density(3, 3, &mut rng);
        let b: Dm = random_density(2, 2, &mut rng);
        let ab = crate::states::tensor(&a, &b).unwrap();
        let ch = DephasingChannel::new(&[3, 2], 0, 0.8, 1.0).unwrap();
        let local = DephasingChannel::n_level(3, 0.8, 1.0).unwrap();
        let expected = crate::states::tensor(&local.apply(&a).unwrap(), &b).unwrap();
        assert!(max_entry_distance(ch.apply(&ab).unwrap().matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn complete_positivity_spot_check() {
        let mut rng = seeded_rng(9);
        let ch = DephasingChannel::new(&[3, 3], 0, 0.6, 1.0).unwrap();
        for _ in 0..20 {
            let rho: Dm = random_density(9, 9, &mut rng);
            ch.apply(&rho).unwrap().check_invariants().unwrap();
        }
    }

    #[test]
    fn phase_flip_for_pi() {
        let u = OracleUnitary::n_level(2, Label::new(1, 2).unwrap(), std::f64::consts::PI, 1.0).unwrap();
        let out = apply_oracle(&u, &PureState::plus().density()).unwrap();
        let mut minus = crate::scalar::CVector::<f64>::zeros(2);
        minus[0] = creal(0.5f64.sqrt());
        minus[1] = creal(-(0.5f64.sqrt()));
        let expected = PureState::new(minus).unwrap().density();
        assert!(max_entry_distance(out.matrix(), expected.matrix()) < 1e-15);
    }

    #[test]
    fn oracle_properties() {
        let mut rng = seeded_rng(10);
        let x = Label::new(3, 5).unwrap();
        let u = OracleUnitary::n_level(5, x, 1.7, 0.4).unwrap();
        assert!(unitarity_deviation(&u.matrix()) < 1e-12);
        let m = u.matrix();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(m[(i, j)], creal(0.0));
                }
            }
        }
        assert_abs_diff_eq!(m[(2, 2)].re, (-1.7f64 * 0.4).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(m[(2, 2)].im, (-1.7f64 * 0.4).sin(), epsilon = 1e-15);

        let d = Dm::diagonal(&[0.2; 5]).unwrap();
        assert_eq!(u.apply(&d).unwrap().matrix(), d.matrix());

        for _ in 0..10 {
            let rho: Dm = random_density(5, 5, &mut rng);
            let out = u.apply(&rho).unwrap();
            let dense = &m * rho.matrix() * m.adjoint();
            assert!(max_entry_distance(out.matrix(), &dense) < 1e-14);
            let (a, b) = (rho.eigen().eigenvalues, out.eigen().eigenvalues);
            for (p, q) in a.iter().zip(&b) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn composition_order_commutes_for_diagonal_maps() {
        let mut rng = seeded_rng(12);
        let x = Label::new(2, 4).unwrap();
        let u = OracleUnitary::n_level(4, x, 0.9, 0.5).unwrap();
        let ch = DephasingChannel::n_level(4, 0.4, 0.5).unwrap();
        for _ in 0..10 {
            let rho: Dm = random_density(4, 4, &mut rng);
            let a = ch.apply(&u.apply(&rho).unwrap()).unwrap();
            let b = u.apply(&ch.apply(&rho).unwrap()).unwrap();
            assert!(max_entry_distance(a.matrix(), b.matrix()) < 1e-15);
        }
    }

    fn cfg(n: usize, omega: f64, tau: f64, gamma: f64) -> SchemeConfig<f64> {
        SchemeConfig::new(n, 1, tau, omega, gamma, 0, Intertwiner::Identity).unwrap()
    }

    #[test]
    fn interrogation_step_limits() {
        let mut rng = seeded_rng(13);
        let x = Label::new(1, 3).unwrap();
        for _ in 0..10 {
            let rho: Dm = random_density(3, 3, &mut rng);
            let noiseless = interrogation_step(x, &cfg(3, 1.1, 0.5, 0.0), &rho).unwrap();
            let u = OracleUnitary::n_level(3, x, 1.1, 0.5).unwrap();
            assert_eq!(noiseless.matrix(), u.apply(&rho).unwrap().matrix());

            let still = interrogation_step(x, &cfg(3, 0.0, 0.5, 0.3), &rho).unwrap();
            let ch = DephasingChannel::n_level(3, 0.3, 0.5).unwrap();
            assert_eq!(still.matrix(), ch.apply(&rho).unwrap().matrix());

            let both = interrogation_step(x, &cfg(3, 2.0, 0.5, 0.3), &rho).unwrap();
            assert_abs_diff_eq!(both.trace(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn first_step_derivative_formula() {
        let x = Label::new(2, 3).unwrap();
        let c = cfg(3, 0.8, 0.6, 0.2);
        let rho0 = PureState::<f64>::uniform(3).density();
        let zero = CMatrix::<f64>::zeros(3, 3);
        let (_, d) = step_with_derivative(x, &c, 1, &rho0, &zero).unwrap();
        let (u, ch) = step_channels(x, &c).unwrap();
        let rot = u.apply_matrix(rho0.matrix()).unwrap();
        let h = u.generator();
        let comm = (&h * &rot - &rot * &h) * cplx(0.0, -0.6);
        let expected = ch.apply_matrix(&comm).unwrap();
        assert!(max_entry_distance(&d, &expected) < 1e-15);
    }

    #[test]
    fn strong_dephasing_kills_derivative_coherences() {
        let x = Label::new(1, 3).unwrap();
        let c = cfg(3, 0.8, 1.0, 60.0);
        let rho0 = PureState::<f64>::uniform(3).density();
        let (_, d) = step_with_derivative(x, &c, 1, &rho0, &CMatrix::zeros(3, 3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(d[(i, j)].norm() < 1e-25);
                }
            }
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        // Oracle: central differences of three full steps in ω.
        let mut rng = seeded_rng(14);
        for trial in 0..5 {
            let n = 3 + trial % 2;
            let v = haar_unitary::<f64, _>(n, &mut rng);
            let v2 = haar_unitary::<f64, _>(n, &mut rng);
            let v3 = haar_unitary::<f64, _>(n, &mut rng);
            let omega = 0.3 + trial as f64;
            let make = |w: f64| {
                SchemeConfig::new(
                    n,
                    3,
                    0.7,
                    w,
                    0.25,
                    0,
                    Intertwiner::Custom(vec![v.clone(), v2.clone(), v3.clone()]),
                )
                .unwrap()
            };
            let x = Label::new(2, n).unwrap();
            let rho0: Dm = random_density(n, 2, &mut rng);
            let run = |c: &SchemeConfig<f64>| {
                let mut rho = rho0.clone();
                let mut d = CMatrix::<f64>::zeros(n, n);
                for k in 1..=3 {
                    let (r, dd) = step_with_derivative(x, c, k, &rho, &d).unwrap();
                    rho = r;
                    d = dd;
                }
                (rho, d)
            };
            let (_, analytic) = run(&make(omega));
            let h = 1e-5 * omega.abs().max(1.0);
            let (plus, _) = run(&make(omega + h));
            let (minus, _) = run(&make(omega - h));
            let fd = (plus.matrix() - minus.matrix()) / creal(2.0 * h);
            let rel = frobenius(&(&analytic - &fd)) / frobenius(&analytic);
            assert!(rel < 1e-6, "relative error {rel}");
            assert!(crate::linalg::hermitian_deviation(&analytic) < 1e-14);
            assert!(analytic.trace().norm() < 1e-14);
        }
    }

    #[test]
    fn kraus_validation() {
        let mut rng = seeded_rng(15);
        let ops = random_kraus_ops::<f64, _>(3, 2, &mut rng);
        assert!(KrausChannel::new(ops.clone()).is_ok());
        let mut broken = ops;
        broken[0] *= creal(1.1);
        assert!(KrausChannel::new(broken).is_err());
        assert!(KrausChannel::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn bures_contractivity_under_dephasing() {
        let mut rng = seeded_rng(16);
        for _ in 0..50 {
            let n = 4;
            let rho: Dm = random_density(n, 2, &mut rng);
            let sigma: Dm = random_density(n, 3, &mut rng);
            let ch = DephasingChannel::n_level(n, 0.5, 1.0).unwrap();
            let before = bures_angle(&rho, &sigma).unwrap();
            let after = bures_angle(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap()).unwrap();
            assert!(after <= before + 1e-10);
        }
    }

    #[test]
    fn extended_random_channel_keeps_states_positive() {
        let mut rng = seeded_rng(17);
        for _ in 0..10 {
            let ch = KrausChannel::new(random_kraus_ops::<f64, _>(2, 3, &mut rng))
                .unwrap()
                .extend(3);
            let rho: Dm = random_density(6, 6, &mut rng);
            let out = ch.apply(&rho).unwrap();
            let herm = hermitian_part(out.matrix());
            Dm::new(herm).unwrap().check_invariants().unwrap();
        }
    }
}
