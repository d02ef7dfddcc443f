//! Uhlmann fidelity, Bures angle and quantum Fisher information.
//!
//! The root fidelity `Tr√(√ρ σ √ρ)` is evaluated as the nuclear norm of
//! `√ρ √σ`, written as `Re Tr(√ρ √σ W)` with `W` the polar unitary. This
//! avoids taking square roots of eigenvalues that are pure rounding noise.
//!
//! Close to `F = 1` the arccos is ill-conditioned, so small angles use
//! `‖√ρ − √σ W‖²_F = 2 − 2F` with `W` the polar unitary that attains the
//! fidelity. That difference carries no cancellation and gives
//! `D = 2 asin(‖√ρ − √σ W‖_F / 2)` to near machine precision.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{commutator, frobenius, hermitian_deviation, max_abs, polar_unitary, sqrt_psd, unitary_exp};
use crate::scalar::{cplx, lit, to_f64, CMatrix, Real};
use crate::states::{variance, DensityMatrix, Hamiltonian, PureState};

/// Pairs with `λ_i + λ_j` at or below this value are dropped from the SLD sum.
pub const SLD_CUTOFF: f64 = 1e-12;
/// Hermiticity and tracelessness tolerance for state derivatives.
pub const DERIVATIVE_TOL: f64 = 1e-9;
/// Step used by [`qfi_bures_consistency`].
pub const CONSISTENCY_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    PureVariance,
    SldEigen,
    FiniteDifferenceFidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QfiResult<T: Real> {
    pub value: T,
    pub method: QfiMethod,
    pub spectrum_cutoff_used: T,
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Fidelities above this switch the angle to the polar-difference route.
const SMALL_ANGLE_FIDELITY: f64 = 0.9;

/// Returns `(F, D)` with `cos D = F`.
fn fidelity_and_angle<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<(T, T)> {
    same_dim(rho.dim(), sigma.dim())?;
    if rho.matrix() == sigma.matrix() {
        return Ok((T::one(), T::zero()));
    }
    let sr = sqrt_psd(rho.matrix());
    let ss = sqrt_psd(sigma.matrix());
    let product = &sr * &ss;
    let w = polar_unitary(&product);
    let f = (&product * &w).trace().re.clamp(T::zero(), T::one());
    if f < lit(SMALL_ANGLE_FIDELITY) {
        return Ok((f, f.acos()));
    }
    let half_chord = (frobenius(&(sr - ss * w)) / lit(2.0)).min(T::one());
    let angle = lit::<T>(2.0) * half_chord.asin();
    Ok((angle.cos(), angle))
}

/// Root fidelity `Tr√(√ρ σ √ρ) ∈ [0, 1]`.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    Ok(fidelity_and_angle(rho, sigma)?.0)
}

/// Angular Bures distance `arccos F(ρ, σ) ∈ [0, π/2]`.
pub fn bures_angle<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    Ok(fidelity_and_angle(rho, sigma)?.1)
}

/// `4 s² Δ²G` for a pure state.
pub fn qfi_pure<T: Real>(psi: &PureState<T>, generator: &Hamiltonian<T>, scale: T) -> Result<QfiResult<T>> {
    let var = variance(psi, generator)?;
    Ok(QfiResult {
        value: lit::<T>(4.0) * scale * scale * var,
        method: QfiMethod::PureVariance,
        spectrum_cutoff_used: T::zero(),
    })
}

/// SLD quantum Fisher information
/// `F = 2 Σ_{λ_i+λ_j > cutoff} |⟨e_i|∂ρ|e_j⟩|² / (λ_i + λ_j)`.
pub fn qfi_sld<T: Real>(rho: &DensityMatrix<T>, drho: &CMatrix<T>) -> Result<QfiResult<T>> {
    same_dim(rho.dim(), drho.nrows())?;
    same_dim(rho.dim(), drho.ncols())?;
    let scale = max_abs(drho).max(T::one());
    let tol = lit::<T>(DERIVATIVE_TOL) * scale;
    let dev = hermitian_deviation(drho);
    if dev > tol {
        return Err(Error::NotHermitian(to_f64(dev)));
    }
    let tr = drho.trace();
    if tr.norm_sqr().sqrt() > tol {
        return Err(invalid(
            "drho",
            format!(
                "derivative of a unit-trace family must be traceless (trace {:e})",
                to_f64(tr.norm_sqr().sqrt())
            ),
        ));
    }

    let eig = rho.eigen();
    let rotated = eig.eigenvectors.adjoint() * drho * &eig.eigenvectors;
    let cutoff = lit::<T>(SLD_CUTOFF);
    let n = rho.dim();
    let mut acc = T::zero();
    for i in 0..n {
        let li = eig.eigenvalues[i].max(T::zero());
        for j in 0..n {
            let lj = eig.eigenvalues[j].max(T::zero());
            let s = li + lj;
            if s > cutoff {
                acc += rotated[(i, j)].norm_sqr() / s;
            }
        }
    }
    Ok(QfiResult {
        value: lit::<T>(2.0) * acc,
        method: QfiMethod::SldEigen,
        spectrum_cutoff_used: cutoff,
    })
}

/// QFI of `ρ_θ = e^{−iθ s G} ρ e^{iθ s G}` at `θ = 0`, from
/// `∂ρ = −i s [G, ρ]`.
pub fn qfi_unitary_generator<T: Real>(
    rho: &DensityMatrix<T>,
    generator: &Hamiltonian<T>,
    scale: T,
) -> Result<QfiResult<T>> {
    same_dim(generator.dim(), rho.dim())?;
    let drho = commutator(&generator.matrix(), rho.matrix()) * cplx(T::zero(), -scale);
    qfi_sld(rho, &drho)
}

/// Upper bound on the convex roof `min Σ p_i 4s²Δ²G` evaluated on the
/// eigendecomposition of `ρ`.
pub fn convex_roof_upper_bound<T: Real>(rho: &DensityMatrix<T>, generator: &Hamiltonian<T>, scale: T) -> Result<T> {
    same_dim(generator.dim(), rho.dim())?;
    let eig = rho.eigen();
    let mut acc = T::zero();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= T::zero() {
            continue;
        }
        let vec = PureState::normalized(eig.eigenvectors.column(k).into_owned())?;
        acc += lam * qfi_pure(&vec, generator, scale)?.value;
    }
    Ok(acc)
}

/// Finite-difference estimate `8 (1 − F(ρ_θ, ρ_{θ+ε})) / ε²`.
///
/// Amplifies rounding error as `1/ε²`; kept for cross-checks only.
pub fn qfi_fidelity_difference<T: Real, F: StateFamily<T> + ?Sized>(family: &F, at: T, eps: T) -> Result<QfiResult<T>> {
    let a = family.state(at)?;
    let b = family.state(at + eps)?;
    let f = fidelity(&a, &b)?;
    Ok(QfiResult {
        value: lit::<T>(8.0) * (T::one() - f) / (eps * eps),
        method: QfiMethod::FiniteDifferenceFidelity,
        spectrum_cutoff_used: T::zero(),
    })
}

/// One-parameter family of states with a known derivative.
pub trait StateFamily<T: Real> {
    fn state(&self, theta: T) -> Result<DensityMatrix<T>>;
    fn derivative(&self, theta: T) -> Result<CMatrix<T>>;
}

/// `ρ_θ = e^{−iθG} ρ₀ e^{iθG}`.
#[derive(Debug, Clone)]
pub struct UnitaryFamily<T: Real> {
    base: DensityMatrix<T>,
    generator: CMatrix<T>,
}

impl<T: Real> UnitaryFamily<T> {
    pub fn new(base: DensityMatrix<T>, generator: Hamiltonian<T>) -> Result<Self> {
        same_dim(base.dim(), generator.dim())?;
        Ok(Self {
            base,
            generator: generator.matrix(),
        })
    }
}

impl<T: Real> StateFamily<T> for UnitaryFamily<T> {
    fn state(&self, theta: T) -> Result<DensityMatrix<T>> {
        let u = unitary_exp(&self.generator, theta);
        Ok(DensityMatrix::from_channel_output(
            &u * self.base.matrix() * u.adjoint(),
        ))
    }

    fn derivative(&self, theta: T) -> Result<CMatrix<T>> {
        let rho = self.state(theta)?;
        Ok(commutator(&self.generator, rho.matrix()) * cplx(T::zero(), -T::one()))
    }
}

/// Family given by a closure returning `(ρ_θ, ∂_θ ρ_θ)`.
pub struct FnFamily<F>(pub F);

impl<T, F> StateFamily<T> for FnFamily<F>
where
    T: Real,
    F: Fn(T) -> Result<(DensityMatrix<T>, CMatrix<T>)>,
{
    fn state(&self, theta: T) -> Result<DensityMatrix<T>> {
        Ok((self.0)(theta)?.0)
    }

    fn derivative(&self, theta: T) -> Result<CMatrix<T>> {
        Ok((self.0)(theta)?.1)
    }
}

/// Both sides of the local relation `D(ρ_θ, ρ_{θ+ε}) ≈ ½√F ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeComparison<T: Real> {
    /// `2 D(ρ_θ, ρ_{θ+ε}) / ε`
    pub slope: T,
    pub sqrt_qfi: T,
    pub relative_error: T,
}

pub fn qfi_bures_slope<T: Real, F: StateFamily<T> + ?Sized>(family: &F, at: T, eps: T) -> Result<SlopeComparison<T>> {
    let here = family.state(at)?;
    let there = family.state(at + eps)?;
    let d = bures_angle(&here, &there)?;
    let slope = lit::<T>(2.0) * d / eps;
    let sqrt_qfi = qfi_sld(&here, &family.derivative(at)?)?.value.sqrt();
    // Below this the QFI is indistinguishable from zero; compare absolutely.
    let relative_error = if sqrt_qfi > lit(1e-8) {
        (slope - sqrt_qfi).abs() / sqrt_qfi
    } else {
        (slope - sqrt_qfi).abs()
    };
    Ok(SlopeComparison {
        slope,
        sqrt_qfi,
        relative_error,
    })
}

/// Relative mismatch `|2D/ε − √F| / √F` at `ε = 1e-4`.
pub fn qfi_bures_consistency<T: Real, F: StateFamily<T> + ?Sized>(family: &F, at: T) -> Result<T> {
    Ok(qfi_bures_slope(family, at, lit(CONSISTENCY_STEP))?.relative_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{DephasingChannel, KrausChannel, OracleUnitary};
    use crate::random::{haar_state, haar_unitary, random_density, random_hermitian, random_kraus_ops, seeded_rng};
    use crate::scalar::{creal, CVector};
    use crate::states::Label;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    type Dm = DensityMatrix<f64>;
    type Ps = PureState<f64>;

    #[test]
    fn fidelity_basic_cases() {
        let mut rng = seeded_rng(1);
        let rho: Dm = random_density(4, 4, &mut rng);
        assert_eq!(fidelity(&rho, &rho).unwrap(), 1.0);
        assert_eq!(bures_angle(&rho, &rho).unwrap(), 0.0);

        let a = Ps::basis(3, 0).unwrap().density();
        let b = Ps::basis(3, 2).unwrap().density();
        assert!(fidelity(&a, &b).unwrap() < 1e-15);
        assert_abs_diff_eq!(bures_angle(&a, &b).unwrap(), FRAC_PI_2, epsilon = 1e-12);
        assert!(fidelity(&a, &Dm::maximally_mixed(2)).is_err());
    }

    #[test]
    fn pure_state_fidelity_is_overlap_modulus() {
        let mut rng = seeded_rng(2);
        for dim in 2..7 {
            let psi: Ps = haar_state(dim, &mut rng);
            let phi: Ps = haar_state(dim, &mut rng);
            let overlap = psi.inner(&phi).unwrap().norm();
            let f = fidelity(&psi.density(), &phi.density()).unwrap();
            assert_abs_diff_eq!(f, overlap, epsilon = 1e-12);
        }
    }

    #[test]
    fn angle_of_rotated_qubit() {
        for theta in [0.01, 0.3, 1.0, 1.5] {
            let v = CVector::from_vec(vec![creal(f64::cos(theta)), creal(f64::sin(theta))]);
            let psi = Ps::new(v).unwrap();
            let zero = Ps::basis(2, 0).unwrap();
            assert_abs_diff_eq!(
                bures_angle(&zero.density(), &psi.density()).unwrap(),
                theta,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn pure_qfi_identities() {
        for m in 1..=5 {
            let nhat = Hamiltonian::ExcitationNumber { qubits: m };
            for tau in [0.5, 1.0, 2.0] {
                let prod = qfi_pure(&Ps::plus_product(m), &nhat, tau).unwrap().value;
                let ghz = qfi_pure(&Ps::ghz(m), &nhat, tau).unwrap().value;
                assert_abs_diff_eq!(prod, tau * tau * m as f64, epsilon = 1e-12);
                assert_abs_diff_eq!(ghz, tau * tau * (m * m) as f64, epsilon = 1e-12);
            }
        }
        let eig = Ps::basis(4, 3).unwrap();
        assert_eq!(
            qfi_pure(&eig, &Hamiltonian::ExcitationNumber { qubits: 2 }, 1.0)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn sld_agrees_with_pure_variance() {
        let mut rng = seeded_rng(3);
        for dim in 2..9 {
            let psi: Ps = haar_state(dim, &mut rng);
            let g = Hamiltonian::custom(random_hermitian(dim, &mut rng)).unwrap();
            let pure = qfi_pure(&psi, &g, 0.7).unwrap().value;
            let sld = qfi_unitary_generator(&psi.density(), &g, 0.7).unwrap();
            assert_eq!(sld.method, QfiMethod::SldEigen);
            assert!((sld.value - pure).abs() <= 1e-8 * pure.max(1e-300));
        }
        let two = Ps::plus_product(2);
        let f = qfi_unitary_generator(&two.density(), &Hamiltonian::ExcitationNumber { qubits: 2 }, 1.0)
            .unwrap()
            .value;
        assert_abs_diff_eq!(f, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn dephased_qubit_qfi_matches_fidelity_oracle() {
        // |+⟩ rotated by ω|1⟩⟨1| for τ = 1, then dephased with e^{−2γτ} = 1/2.
        let gamma = LN_2 / 2.0;
        let family = FnFamily(|omega: f64| {
            let x = Label::new(2, 2).unwrap();
            let u = OracleUnitary::n_level(2, x, omega, 1.0)?;
            let ch = DephasingChannel::qubit(gamma, 1.0)?;
            let rot = u.apply_matrix(Ps::plus().density().matrix())?;
            let d = commutator(&u.generator(), &rot) * cplx(0.0, -1.0);
            Ok((Dm::from_channel_output(ch.apply_matrix(&rot)?), ch.apply_matrix(&d)?))
        });
        let exact = qfi_sld(&family.state(0.4).unwrap(), &family.derivative(0.4).unwrap())
            .unwrap()
            .value;
        assert_abs_diff_eq!(exact, 0.5, epsilon = 1e-12);
        // Richardson extrapolation of the finite-difference oracle.
        let f1 = qfi_fidelity_difference(&family, 0.4, 2e-3).unwrap().value;
        let f2 = qfi_fidelity_difference(&family, 0.4, 1e-3).unwrap().value;
        let extrapolated = (4.0 * f2 - f1) / 3.0;
        assert_abs_diff_eq!(extrapolated, 0.5, epsilon = 1e-5);
    }

    #[test]
    fn insensitive_states_have_zero_qfi() {
        let mixed = Dm::maximally_mixed(3);
        let g = Hamiltonian::projector(2, 3).unwrap();
        assert_eq!(qfi_unitary_generator(&mixed, &g, 1.3).unwrap().value, 0.0);
        let diag = Dm::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        assert_eq!(qfi_unitary_generator(&diag, &g, 1.3).unwrap().value, 0.0);
        let plus = Ps::plus().density();
        let one = Hamiltonian::projector(2, 2).unwrap();
        let w = 1.7;
        assert_abs_diff_eq!(
            qfi_unitary_generator(&plus, &one, w).unwrap().value,
            w * w,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sld_rejects_bad_derivatives() {
        let rho = Dm::maximally_mixed(2);
        let mut d = CMatrix::<f64>::zeros(2, 2);
        d[(0, 1)] = creal(1.0);
        assert!(matches!(qfi_sld(&rho, &d), Err(Error::NotHermitian(_))));
        let traceful = CMatrix::<f64>::identity(2, 2);
        assert!(qfi_sld(&rho, &traceful).is_err());
        assert!(qfi_sld(&rho, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn convex_roof_cases() {
        let mut rng = seeded_rng(4);
        let psi: Ps = haar_state(4, &mut rng);
        let g = Hamiltonian::projector(3, 4).unwrap();
        let pure = qfi_pure(&psi, &g, 0.9).unwrap().value;
        assert_abs_diff_eq!(
            convex_roof_upper_bound(&psi.density(), &g, 0.9).unwrap(),
            pure,
            epsilon = 1e-12
        );

        let mixed = Dm::maximally_mixed(2);
        let one = Hamiltonian::projector(2, 2).unwrap();
        assert_abs_diff_eq!(
            convex_roof_upper_bound(&mixed, &one, 1.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );

        for _ in 0..50 {
            let rho: Dm = random_density(5, 3, &mut rng);
            let g = Hamiltonian::custom(random_hermitian(5, &mut rng)).unwrap();
            let sld = qfi_unitary_generator(&rho, &g, 1.0).unwrap().value;
            assert!(convex_roof_upper_bound(&rho, &g, 1.0).unwrap() >= sld - 1e-9);
        }
    }

    #[test]
    fn consistency_examples() {
        let mut rng = seeded_rng(5);
        let psi: Ps = haar_state(2, &mut rng);
        let g = Hamiltonian::projector(1, 2).unwrap();
        let fam = UnitaryFamily::new(psi.density(), g).unwrap();
        assert!(qfi_bures_consistency(&fam, 0.2).unwrap() <= 1e-6);

        let constant = FnFamily(|_: f64| Ok((Dm::maximally_mixed(3), CMatrix::zeros(3, 3))));
        assert_eq!(qfi_bures_consistency(&constant, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn dephased_family_consistency() {
        let gamma = LN_2 / 2.0;
        let family = FnFamily(|omega: f64| {
            let x = Label::new(2, 2).unwrap();
            let u = OracleUnitary::n_level(2, x, omega, 1.0)?;
            let ch = DephasingChannel::qubit(gamma, 1.0)?;
            let rot = u.apply_matrix(Ps::plus().density().matrix())?;
            let d = commutator(&u.generator(), &rot) * cplx(0.0, -1.0);
            Ok((Dm::from_channel_output(ch.apply_matrix(&rot)?), ch.apply_matrix(&d)?))
        });
        assert!(qfi_bures_consistency(&family, 0.9).unwrap() <= 1e-3);
    }

    #[test]
    fn random_channel_contracts_bures_angle() {
        let mut rng = seeded_rng(6);
        for _ in 0..40 {
            let dim = 3;
            let ch = KrausChannel::new(random_kraus_ops::<f64, _>(dim, 2, &mut rng)).unwrap();
            let rho: Dm = random_density(dim, 3, &mut rng);
            let sigma: Dm = random_density(dim, 1, &mut rng);
            let before = bures_angle(&rho, &sigma).unwrap();
            let after = bures_angle(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap()).unwrap();
            assert!(after <= before + 1e-10, "{after} > {before}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bures_angle_is_a_metric(seed in any::<u64>(), dim in 1usize..=8, r1 in 1usize..=8, r2 in 1usize..=8, r3 in 1usize..=8) {
            let mut rng = seeded_rng(seed);
            let a: Dm = random_density(dim, r1, &mut rng);
            let b: Dm = random_density(dim, r2, &mut rng);
            let c: Dm = random_density(dim, r3, &mut rng);
            let ab = bures_angle(&a, &b).unwrap();
            let ba = bures_angle(&b, &a).unwrap();
            let bc = bures_angle(&b, &c).unwrap();
            let ac = bures_angle(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-10);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!((0.0..=FRAC_PI_2).contains(&ab));
        }

        #[test]
        fn bures_angle_is_unitarily_invariant(seed in any::<u64>(), dim in 1usize..=8) {
            let mut rng = seeded_rng(seed);
            let a: Dm = random_density(dim, dim, &mut rng);
            let b: Dm = random_density(dim, 2.min(dim), &mut rng);
            let u = haar_unitary::<f64, _>(dim, &mut rng);
            let ua = Dm::from_channel_output(&u * a.matrix() * u.adjoint());
            let ub = Dm::from_channel_output(&u * b.matrix() * u.adjoint());
            let d0 = bures_angle(&a, &b).unwrap();
            let d1 = bures_angle(&ua, &ub).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-10);
        }
    }
}
