//! Closed-form precision and query-complexity bounds, plus the plumbing
//! used to compare them with simulated values.
//!
//! Every function here is pure. Dephasing formulas reject `γ = 0` with
//! [`Error::Divergent`] instead of returning infinity.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::qfi_unitary_generator;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::states::{DensityMatrix, Hamiltonian};

/// Tolerance used when deciding whether a measured value respects a bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Whether the bound value caps the measured value from above or below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `measured ≤ bound`
    Upper,
    /// `measured ≥ bound`
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub direction: Direction,
    pub parameters: BTreeMap<String, f64>,
    pub bound_value: f64,
    pub measured_value: Option<f64>,
    pub satisfied: Option<bool>,
    /// Distance to the bound, positive on the allowed side.
    pub margin: Option<f64>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, direction: Direction, bound_value: f64) -> Self {
        Self {
            bound_name: name.into(),
            direction,
            parameters: BTreeMap::new(),
            bound_value,
            measured_value: None,
            satisfied: None,
            margin: None,
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_owned(), value);
        self
    }

    pub fn measured(mut self, value: f64) -> Self {
        let margin = match self.direction {
            Direction::Upper => self.bound_value - value,
            Direction::Lower => value - self.bound_value,
        };
        self.measured_value = Some(value);
        self.margin = Some(margin);
        self.satisfied = Some(margin >= -BOUND_SLACK);
        self
    }

    pub fn failed(&self) -> bool {
        self.satisfied == Some(false)
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(invalid(name, format!("must be positive and finite, got {}", to_f64(v))));
    }
    Ok(())
}

fn rate<T: Real>(gamma: T) -> Result<()> {
    if gamma == T::zero() {
        return Err(Error::Divergent(
            "dephasing bound at gamma = 0; use the noiseless formulas",
        ));
    }
    positive("gamma", gamma)
}

fn database(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "database size must be at least 1"));
    }
    Ok(())
}

/// Cramér–Rao precision limit `δω ≥ 1/√F`.
pub fn cramer_rao<T: Real>(qfi: T) -> Result<T> {
    if !(qfi > T::zero()) {
        return Err(Error::Divergent("Cramer-Rao bound needs a positive Fisher information"));
    }
    Ok(T::one() / qfi.sqrt())
}

/// QFI cap for `M` steps of duration `τ` under dephasing:
/// `τ² e^{−2γτ} / (1 − e^{−2γτ}) · M`.
pub fn dephasing_qfi_bound<T: Real>(m: usize, tau: T, gamma: T) -> Result<T> {
    positive("tau", tau)?;
    rate(gamma)?;
    let e = (-lit::<T>(2.0) * gamma * tau).exp();
    // 1 − e^{−2γτ} without cancellation for small γτ.
    let denom = -(-lit::<T>(2.0) * gamma * tau).exp_m1();
    Ok(tau * tau * e / denom * from_usize::<T>(m))
}

/// Limit of the dephasing cap as `τ → 0` at fixed `T`: `T / 2γ`.
pub fn fundamental_dephasing_bound<T: Real>(total_time: T, gamma: T) -> Result<T> {
    positive("t", total_time)?;
    rate(gamma)?;
    Ok(total_time / (lit::<T>(2.0) * gamma))
}

/// Decoherence-free query bound `T ≥ (π / 4ω) √N`.
pub fn noiseless_query_bound<T: Real>(n: usize, omega: T) -> Result<T> {
    database(n)?;
    positive("omega", omega)?;
    Ok(T::frac_pi_4() / omega * from_usize::<T>(n).sqrt())
}

/// Query bound under dephasing `T ≥ N (π²/8) γ / ω²`.
pub fn dephasing_query_bound<T: Real>(n: usize, omega: T, gamma: T) -> Result<T> {
    database(n)?;
    positive("omega", omega)?;
    rate(gamma)?;
    let pi = T::pi();
    Ok(from_usize::<T>(n) * pi * pi / lit(8.0) * gamma / (omega * omega))
}

/// Earlier sequential, ancilla-free bound `T ≥ N · 2γ / (γ² + 4ω²)`.
pub fn temme_bound<T: Real>(n: usize, omega: T, gamma: T) -> Result<T> {
    database(n)?;
    positive("omega", omega)?;
    rate(gamma)?;
    Ok(from_usize::<T>(n) * lit::<T>(2.0) * gamma / (gamma * gamma + lit::<T>(4.0) * omega * omega))
}

/// Summed probe distance required for perfect discrimination: `N π / 4`.
pub fn distance_lower_bound<T: Real>(n: usize) -> Result<T> {
    if n < 2 {
        return Err(invalid("n", "discrimination needs at least two labels"));
    }
    Ok(from_usize::<T>(n) * T::frac_pi_4())
}

/// Time-way envelope `D̄_t ≤ t √N ω`.
pub fn time_way_distance_bound<T: Real>(t: T, n: usize, omega: T) -> Result<T> {
    database(n)?;
    if !(t >= T::zero()) {
        return Err(invalid("t", "time must be nonnegative"));
    }
    Ok(t * from_usize::<T>(n).sqrt() * omega.abs())
}

/// Frequency-way envelope under dephasing: `(ω / 2√(2γ)) √T` for one label,
/// `N` times that for the sum over labels.
pub fn frequency_way_distance_bound<T: Real>(
    total_time: T,
    omega: T,
    gamma: T,
    n: usize,
    per_label: bool,
) -> Result<T> {
    rate(gamma)?;
    if !(total_time >= T::zero()) {
        return Err(invalid("t", "time must be nonnegative"));
    }
    let one = omega.abs() / (lit::<T>(2.0) * (lit::<T>(2.0) * gamma).sqrt()) * total_time.sqrt();
    if per_label {
        Ok(one)
    } else {
        database(n)?;
        Ok(one * from_usize::<T>(n))
    }
}

/// Conjectured envelope `D̄_T ≤ c · (ω / 2√(2γ)) √T √N`. The constant is
/// not known; scans report the measured ratio instead of asserting this.
pub fn conjecture_distance_bound<T: Real>(total_time: T, omega: T, gamma: T, n: usize, constant: T) -> Result<T> {
    database(n)?;
    Ok(frequency_way_distance_bound(total_time, omega, gamma, n, true)? * from_usize::<T>(n).sqrt() * constant)
}

/// Frequency-way envelope for a noise model with QFI growing as
/// `F ≤ rate · T`: `(ω/2) √(rate · T)`. The rate is taken as given.
pub fn linear_rate_distance_bound<T: Real>(total_time: T, omega: T, qfi_rate: T) -> Result<T> {
    if !(total_time >= T::zero()) || !(qfi_rate >= T::zero()) {
        return Err(invalid("qfi_rate", "time and rate must be nonnegative"));
    }
    Ok(omega.abs() / lit(2.0) * (qfi_rate * total_time).sqrt())
}

/// QFIs `F^x = 4 ω² Δ²(|x⟩⟨x|)` of `ρ` for every label, with the projector
/// acting on slot 0 of `dims`.
pub fn label_generator_qfis<T: Real>(rho: &DensityMatrix<T>, dims: &[usize], omega: T) -> Result<Vec<T>> {
    let n = *dims.first().ok_or_else(|| invalid("dims", "empty subsystem list"))?;
    (1..=n)
        .map(|x| {
            let g = Hamiltonian::projector(x, n)?.embed(dims, 0)?;
            Ok(qfi_unitary_generator(rho, &g, omega)?.value)
        })
        .collect()
}

/// Caps on the label-generator QFIs: `Σ_x F^x ≤ 4ω²` and
/// `Σ_x √F^x ≤ 2ω√N`.
pub fn generator_sum_caps<T: Real>(n: usize, omega: T) -> Result<(T, T)> {
    database(n)?;
    let w = omega.abs();
    Ok((lit::<T>(4.0) * w * w, lit::<T>(2.0) * w * from_usize::<T>(n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverRow {
    pub n: usize,
    pub noiseless: f64,
    pub dephasing: f64,
    pub temme: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverTable {
    pub omega: f64,
    pub gamma: f64,
    pub rows: Vec<CrossoverRow>,
    /// Each column is nondecreasing in `N` over the scanned rows.
    pub monotone: bool,
    /// First scanned `N` at which the dephasing bound reaches the noiseless one.
    pub crossover_n: Option<usize>,
}

/// Tabulates the three query bounds over `ns` (sorted ascending).
pub fn crossover_scan(ns: &[usize], omega: f64, gamma: f64) -> Result<CrossoverTable> {
    let mut sorted = ns.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let rows = sorted
        .iter()
        .map(|&n| {
            Ok(CrossoverRow {
                n,
                noiseless: noiseless_query_bound(n, omega)?,
                dephasing: dephasing_query_bound(n, omega, gamma)?,
                temme: temme_bound(n, omega, gamma)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].noiseless >= w[0].noiseless && w[1].dephasing >= w[0].dephasing && w[1].temme >= w[0].temme);
    let crossover_n = rows.iter().find(|r| r.dephasing >= r.noiseless).map(|r| r.n);
    Ok(CrossoverTable {
        omega,
        gamma,
        rows,
        monotone,
        crossover_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, seeded_rng};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn cramer_rao_cases() {
        let t = 3.0f64;
        assert_abs_diff_eq!(cramer_rao(t * t).unwrap(), 1.0 / t, epsilon = 1e-15);
        let gamma = 0.25;
        assert_abs_diff_eq!(
            cramer_rao(t / (2.0 * gamma)).unwrap(),
            (2.0 * gamma / t).sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(cramer_rao(1.0f64).unwrap(), 1.0);
        assert!(cramer_rao(0.0f64).is_err());
    }

    #[test]
    fn dephasing_qfi_bound_cases() {
        let e = (-1.0f64).exp();
        let v = dephasing_qfi_bound(10, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(v, e / (1.0 - e) * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 5.81977, epsilon = 1e-5);
        assert_eq!(dephasing_qfi_bound(0, 1.0, 0.5).unwrap(), 0.0);
        assert!(matches!(dephasing_qfi_bound(3, 1.0, 0.0), Err(Error::Divergent(_))));
        assert!(dephasing_qfi_bound(3, 0.0, 1.0).is_err());

        // τ → 0 at fixed T approaches T/2γ from below.
        let (t, gamma) = (2.0, 0.3);
        let limit = fundamental_dephasing_bound(t, gamma).unwrap();
        let mut prev = 0.0;
        for m in [1usize, 2, 5, 10, 100, 1000, 100_000] {
            let v = dephasing_qfi_bound(m, t / m as f64, gamma).unwrap();
            assert!(v <= limit + 1e-12 && v >= prev);
            prev = v;
        }
        assert!((limit - prev) / limit < 1e-4);
    }

    #[test]
    fn fundamental_bound_dominates_grid() {
        assert_eq!(fundamental_dephasing_bound(10.0, 0.5).unwrap(), 10.0);
        for &gamma in &[0.01, 0.1, 1.0, 10.0] {
            for &t in &[0.1, 1.0, 7.0, 50.0] {
                let cap = fundamental_dephasing_bound(t, gamma).unwrap();
                assert!(fundamental_dephasing_bound(t * 1.1, gamma).unwrap() > cap);
                for m in 1..=60 {
                    assert!(dephasing_qfi_bound(m, t / m as f64, gamma).unwrap() <= cap * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn query_bound_values() {
        assert_abs_diff_eq!(noiseless_query_bound(100, PI).unwrap(), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(noiseless_query_bound(1, 2.0).unwrap(), PI / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dephasing_query_bound(8, PI, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            temme_bound(8, PI, 1.0).unwrap(),
            16.0 / (1.0 + 4.0 * PI * PI),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(temme_bound(8, PI, 1.0).unwrap(), 0.395272, epsilon = 1e-6);
        assert!(temme_bound(8, 1.0, 1e-12).unwrap() < 1e-10);
        assert!(temme_bound(8, 1.0, 1e12).unwrap() < 1e-10);
        assert!(noiseless_query_bound(0, 1.0).is_err());
        assert!(temme_bound(4, 1.0, 0.0).is_err());
        // Linear in N and γ.
        let base = dephasing_query_bound(3, 1.7, 0.2).unwrap();
        assert_abs_diff_eq!(dephasing_query_bound(6, 1.7, 0.2).unwrap(), 2.0 * base, epsilon = 1e-14);
        assert_abs_diff_eq!(dephasing_query_bound(3, 1.7, 0.6).unwrap(), 3.0 * base, epsilon = 1e-14);
    }

    #[test]
    fn distance_bounds() {
        assert_abs_diff_eq!(distance_lower_bound::<f64>(4).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(distance_lower_bound::<f64>(2).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert!(distance_lower_bound::<f64>(1).is_err());
        assert_abs_diff_eq!(
            frequency_way_distance_bound(1.0, 1.0, 0.5, 3, true).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            frequency_way_distance_bound(1.0, 1.0, 0.5, 3, false).unwrap(),
            1.5,
            epsilon = 1e-15
        );
        let a = frequency_way_distance_bound(2.0, 1.3, 0.4, 1, true).unwrap();
        let b = frequency_way_distance_bound(8.0, 1.3, 0.4, 1, true).unwrap();
        assert_abs_diff_eq!(b / a, 2.0, epsilon = 1e-14);
        assert!(frequency_way_distance_bound(1.0, 1.0, 0.0, 1, true).is_err());
        let c = conjecture_distance_bound(2.0, 1.3, 0.4, 9, 1.5).unwrap();
        assert_abs_diff_eq!(c, a * 3.0 * 1.5, epsilon = 1e-14);
        // The linear-rate hook with rate 1/2γ is the dephasing envelope.
        assert_abs_diff_eq!(
            linear_rate_distance_bound(2.0, 1.3, 1.0 / 0.8).unwrap(),
            a,
            epsilon = 1e-14
        );
    }

    #[test]
    fn lower_bound_with_time_way_recovers_query_bound() {
        // Nπ/4 ≤ T√N ω at T = (π/4ω)√N, with equality.
        for n in 2..40 {
            for &omega in &[0.3, 1.0, PI, 10.0] {
                let t = noiseless_query_bound(n, omega).unwrap();
                let envelope = time_way_distance_bound(t, n, omega).unwrap();
                let need = distance_lower_bound::<f64>(n).unwrap();
                assert_abs_diff_eq!(envelope, need, epsilon = 1e-12 * need);
                assert!(time_way_distance_bound(t * 0.99, n, omega).unwrap() < need);
            }
        }
    }

    #[test]
    fn bounds_are_bitwise_pure() {
        let a = dephasing_query_bound::<f64>(7, 0.37, 1.9).unwrap();
        let b = dephasing_query_bound::<f64>(7, 0.37, 1.9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn crossover_scan_table() {
        let (omega, gamma) = (2.0, 0.1);
        let ns: Vec<usize> = (1..=1000).collect();
        let table = crossover_scan(&ns, omega, gamma).unwrap();
        assert!(table.monotone);
        for r in &table.rows {
            assert!(r.noiseless >= 0.0 && r.dephasing >= 0.0 && r.temme >= 0.0);
            assert_abs_diff_eq!(
                r.dephasing / r.temme,
                table.rows[0].dephasing / table.rows[0].temme,
                epsilon = 1e-12
            );
        }
        // Brute force: first N with the linear bound at or above the √N one.
        let brute = ns
            .iter()
            .copied()
            .find(|&n| n as f64 * PI * PI / 8.0 * gamma / (omega * omega) >= PI / (4.0 * omega) * (n as f64).sqrt());
        assert_eq!(table.crossover_n, brute);
        // Closed-form crossover 4ω²/(π²γ²) ≈ 162.1.
        let star = 4.0 * omega * omega / (PI * PI * gamma * gamma);
        assert_eq!(table.crossover_n, Some(star.ceil() as usize));
    }

    #[test]
    fn report_direction_and_margin() {
        let r = BoundReport::new("x", Direction::Upper, 1.0).measured(1.0 + 5e-10);
        assert_eq!(r.satisfied, Some(true));
        let r = BoundReport::new("x", Direction::Upper, 1.0).measured(1.1);
        assert!(r.failed());
        let r = BoundReport::new("x", Direction::Lower, 1.0)
            .param("n", 4.0)
            .measured(1.5);
        assert_eq!(r.margin, Some(0.5));
        assert_eq!(r.parameters["n"], 4.0);
        assert!(BoundReport::new("x", Direction::Lower, 1.0).satisfied.is_none());
    }

    #[test]
    fn label_generator_sums_on_random_states() {
        let mut rng = seeded_rng(11);
        let omega = 0.8;
        for n in 2..=5 {
            let (cap_f, cap_sqrt) = generator_sum_caps(n, omega).unwrap();
            for rank in 1..=n {
                let rho = random_density::<f64, _>(n, rank, &mut rng);
                let f = label_generator_qfis(&rho, &[n], omega).unwrap();
                assert!(f.iter().sum::<f64>() <= cap_f + 1e-9);
                assert!(f.iter().map(|v| v.sqrt()).sum::<f64>() <= cap_sqrt + 1e-9);
            }
        }
    }
}
