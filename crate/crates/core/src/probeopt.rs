//! Pure-probe optimization of the summed root QFI `Σ_x √F^x_ω` in the
//! restricted (non-adaptive) scheme, and the scans built on it.
//!
//! The optimizer is multistart projected gradient ascent on the unit sphere
//! of `C^d`: Haar-random starts, central-difference gradients, step length
//! found by backtracking. Restart `k` draws from its own PRNG stream derived
//! from `(seed, k)`, so results do not depend on thread scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::frequency_way_distance_bound;
use crate::error::{Error, Result};
use crate::protocol::{average_distance, run_all_labels, run_scheme, Intertwiner, SchemeConfig};
use crate::random::{haar_state, stream_rng};
use crate::scalar::{cplx, from_usize, lit, to_f64, CVector, Real};
use crate::states::{Label, PureState};

/// QFI values below this are smoothed in the optimization objective.
pub const SMOOTHING_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub restarts: usize,
    /// Convergence when the objective improves by less than this.
    pub tol: f64,
    pub max_iterations: usize,
    /// Central-difference step for the gradient.
    pub gradient_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            tol: 1e-8,
            max_iterations: 5000,
            gradient_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<T: Real> {
    /// Exact (unsmoothed) objective at `best_probe`.
    pub best_value: T,
    pub best_probe: PureState<T>,
    pub restarts: usize,
    pub converged_fraction: f64,
    pub iterations_used: Vec<usize>,
    pub seed: u64,
}

/// Labels whose root QFIs are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    AllLabels,
    Single(Label),
}

fn check_restricted<T: Real>(cfg: &SchemeConfig<T>) -> Result<()> {
    cfg.validate()?;
    match cfg.v_sequence {
        Intertwiner::SwapParallel => Ok(()),
        Intertwiner::GroverDiffusion | Intertwiner::Identity if cfg.m <= 1 => Ok(()),
        _ => Err(Error::Unsupported(format!(
            "probe optimization needs the restricted scheme (swap_parallel, or a single step); got {} with M = {}",
            cfg.v_sequence.name(),
            cfg.m
        ))),
    }
}

fn labels<T: Real>(cfg: &SchemeConfig<T>, objective: Objective) -> Vec<Label> {
    match objective {
        Objective::AllLabels => Label::all(cfg.n).collect(),
        Objective::Single(x) => vec![x],
    }
}

/// QFI of the final state for each requested label.
fn label_qfis<T: Real>(probe: &PureState<T>, cfg: &SchemeConfig<T>, labels: &[Label]) -> Result<Vec<T>> {
    let rho = probe.density();
    labels
        .iter()
        .map(|&x| Ok(run_scheme(cfg, &rho, x)?.final_qfi()?.value))
        .collect()
}

/// `√F`, continued below `F = δ²` by its tangent `F/2δ + δ/2`.
fn smoothed_sqrt<T: Real>(f: T) -> T {
    let delta = lit::<T>(SMOOTHING_FLOOR).sqrt();
    if f >= delta * delta {
        f.sqrt()
    } else {
        f / (lit::<T>(2.0) * delta) + delta / lit(2.0)
    }
}

/// `Σ_x √F^x_ω` of the final states of the restricted scheme.
pub fn sum_sqrt_qfi<T: Real>(probe: &PureState<T>, cfg: &SchemeConfig<T>) -> Result<T> {
    check_restricted(cfg)?;
    objective_value(probe, cfg, Objective::AllLabels)
}

/// Exact objective value.
pub fn objective_value<T: Real>(probe: &PureState<T>, cfg: &SchemeConfig<T>, objective: Objective) -> Result<T> {
    let f = label_qfis(probe, cfg, &labels(cfg, objective))?;
    Ok(f.into_iter().fold(T::zero(), |acc, v| acc + v.max(T::zero()).sqrt()))
}

fn smoothed_objective<T: Real>(amps: &CVector<T>, cfg: &SchemeConfig<T>, labels: &[Label]) -> Result<T> {
    let probe = PureState::normalized(amps.clone())?;
    let f = label_qfis(&probe, cfg, labels)?;
    Ok(f.into_iter().fold(T::zero(), |acc, v| acc + smoothed_sqrt(v)))
}

/// Central-difference gradient of the smoothed objective with respect to
/// the real and imaginary parts of the amplitudes. Component `2k` is the
/// real direction of amplitude `k`, `2k+1` the imaginary one.
pub fn objective_gradient<T: Real>(
    probe: &PureState<T>,
    cfg: &SchemeConfig<T>,
    objective: Objective,
    step: f64,
) -> Result<Vec<T>> {
    let labels = labels(cfg, objective);
    let h = lit::<T>(step);
    let base = probe.amplitudes();
    let mut grad = Vec::with_capacity(2 * base.len());
    for k in 0..base.len() {
        for dir in [cplx(T::one(), T::zero()), cplx(T::zero(), T::one())] {
            let mut plus = base.clone();
            plus[k] += dir * cplx(h, T::zero());
            let mut minus = base.clone();
            minus[k] -= dir * cplx(h, T::zero());
            let fp = smoothed_objective(&plus, cfg, &labels)?;
            let fm = smoothed_objective(&minus, cfg, &labels)?;
            grad.push((fp - fm) / (lit::<T>(2.0) * h));
        }
    }
    Ok(grad)
}

struct RestartOutcome<T: Real> {
    value: T,
    probe: PureState<T>,
    iterations: usize,
    converged: bool,
}

fn ascend<T: Real>(
    start: PureState<T>,
    cfg: &SchemeConfig<T>,
    objective: Objective,
    opts: &OptimizerOptions,
) -> Result<RestartOutcome<T>> {
    let labels = labels(cfg, objective);
    let tol = lit::<T>(opts.tol);
    let mut psi = start.amplitudes().clone();
    let mut value = smoothed_objective(&psi, cfg, &labels)?;
    let mut step = lit::<T>(0.1);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let current = PureState::normalized(psi.clone())?;
        let g = objective_gradient(&current, cfg, objective, opts.gradient_step)?;
        let mut dir = CVector::<T>::from_fn(psi.len(), |k, _| cplx(g[2 * k], g[2 * k + 1]));
        // Project onto the tangent space of the sphere at ψ.
        let radial = psi.dotc(&dir).re;
        dir -= &psi * cplx(radial, T::zero());
        if dir.norm() <= lit(1e-14) {
            converged = true;
            break;
        }

        let mut accepted = None;
        let mut trial_step = step * lit(2.0);
        for _ in 0..50 {
            let trial = (&psi + &dir * cplx(trial_step, T::zero())).normalize();
            let trial_value = smoothed_objective(&trial, cfg, &labels)?;
            if trial_value > value {
                accepted = Some((trial, trial_value));
                break;
            }
            trial_step /= lit(2.0);
        }
        match accepted {
            Some((next, next_value)) => {
                let gain = next_value - value;
                psi = next;
                value = next_value;
                step = trial_step;
                if gain < tol {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    let probe = PureState::normalized(psi)?;
    let exact = objective_value(&probe, cfg, objective)?;
    Ok(RestartOutcome {
        value: exact,
        probe,
        iterations,
        converged,
    })
}

/// Maximizes the chosen objective over pure probes.
pub fn optimize<T: Real>(
    cfg: &SchemeConfig<T>,
    objective: Objective,
    opts: &OptimizerOptions,
    seed: u64,
) -> Result<OptimizationResult<T>> {
    check_restricted(cfg)?;
    if opts.restarts == 0 {
        return Err(crate::error::invalid("restarts", "at least one restart is required"));
    }
    if let Objective::Single(x) = objective {
        if x.get() > cfg.n {
            return Err(crate::error::invalid("x", format!("label {x} outside 1..={}", cfg.n)));
        }
    }
    let dim = cfg.total_dim();
    let outcomes = (0..opts.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            ascend(haar_state(dim, &mut rng), cfg, objective, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    // Max-reduce; ties go to the lowest restart index.
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (k, o)| if o.value > outcomes[best].value { k } else { best });
    let converged = outcomes.iter().filter(|o| o.converged).count();
    Ok(OptimizationResult {
        best_value: outcomes[best].value,
        best_probe: outcomes[best].probe.clone(),
        restarts: opts.restarts,
        converged_fraction: converged as f64 / opts.restarts as f64,
        iterations_used: outcomes.iter().map(|o| o.iterations).collect(),
        seed,
    })
}

/// Maximizes `Σ_x √F^x_ω` over pure probes with `restarts` Haar starts.
pub fn optimize_sum_sqrt_qfi<T: Real>(
    cfg: &SchemeConfig<T>,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationResult<T>> {
    let opts = OptimizerOptions {
        restarts,
        ..OptimizerOptions::default()
    };
    optimize(cfg, Objective::AllLabels, &opts, seed)
}

/// Optimized sides of `max Σ_x √F^x ≤ 2√N max √F^{x₀}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjectureCheck {
    /// `max Σ_x √F^x`
    pub lhs: f64,
    /// `2√N max √F^{x₀}` with `x₀ = 1`
    pub rhs: f64,
    /// `lhs / rhs`; 0 when both sides vanish.
    pub ratio: f64,
    /// Ratios above `2√N (1 + 1e-6)` are flagged as counterexample candidates.
    pub ratio_cap: f64,
    pub counterexample_candidate: bool,
    /// `lhs ≤ rhs` within `1e-6`.
    pub inequality_holds: bool,
}

pub fn conjecture_check<T: Real>(cfg: &SchemeConfig<T>, restarts: usize, seed: u64) -> Result<ConjectureCheck> {
    let opts = OptimizerOptions {
        restarts,
        ..OptimizerOptions::default()
    };
    let lhs = to_f64(optimize(cfg, Objective::AllLabels, &opts, seed)?.best_value);
    let x0 = Label::new(1, cfg.n)?;
    let single = to_f64(optimize(cfg, Objective::Single(x0), &opts, seed)?.best_value);
    let root_n = (cfg.n as f64).sqrt();
    let rhs = 2.0 * root_n * single;
    let ratio = if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let ratio_cap = 2.0 * root_n;
    Ok(ConjectureCheck {
        lhs,
        rhs,
        ratio,
        ratio_cap,
        counterexample_candidate: ratio > ratio_cap * (1.0 + 1e-6),
        inequality_holds: lhs <= rhs * (1.0 + 1e-6),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub steps: usize,
    pub t: f64,
    /// `D̄_T = Σ_x D(ρ^x_{T,ω}, ρ_T)`
    pub dbar: f64,
    /// `D̄_T / (√T √N)`, 0 at `T = 0`.
    pub ratio: f64,
    /// `N ω √T / 2√(2γ)`, absent without dephasing.
    pub envelope: Option<f64>,
    pub within_envelope: Option<bool>,
}

/// Least-squares exponent of a log-log fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Value of the variable held fixed (`N` for time fits, step count for
    /// size fits).
    pub held: usize,
    pub exponent: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingScan {
    pub rows: Vec<ScalingRow>,
    /// `β` in `D̄_T ∝ T^β`, per `N`, over the increasing run before saturation.
    pub time_exponents: Vec<ExponentFit>,
    /// `α` in `D̄_T ∝ N^α`, per step count.
    pub size_exponents: Vec<ExponentFit>,
    pub max_ratio: f64,
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Simulates the template for every `N` in `ns` up to `max_steps` queries
/// from the uniform probe, tabulating `D̄_T/(√T√N)` at each step.
pub fn conjecture_scaling_scan<T: Real>(
    ns: &[usize],
    max_steps: usize,
    template: &SchemeConfig<T>,
) -> Result<ScalingScan> {
    if !matches!(template.v_sequence, Intertwiner::GroverDiffusion) {
        return Err(Error::Unsupported(
            "the scaling scan runs the Grover diffusion layout".into(),
        ));
    }
    let per_n = ns
        .iter()
        .map(|&n| {
            let cfg = SchemeConfig {
                n,
                m: max_steps,
                ..template.clone()
            };
            cfg.validate()?;
            let probe = PureState::<T>::uniform(n).density();
            let series = average_distance(&run_all_labels(&cfg, &probe)?)?;
            Ok((n, series))
        })
        .collect::<Result<Vec<_>>>()?;

    let gamma = to_f64(template.gamma);
    let omega = to_f64(template.omega);
    let mut rows = Vec::new();
    for (n, series) in &per_n {
        for (k, (t, d)) in series.iter().enumerate() {
            let (t, dbar) = (to_f64(*t), to_f64(*d));
            let ratio = if t > 0.0 {
                dbar / (t.sqrt() * (*n as f64).sqrt())
            } else {
                0.0
            };
            let envelope = if gamma > 0.0 {
                Some(frequency_way_distance_bound(t, omega, gamma, *n, false)?)
            } else {
                None
            };
            rows.push(ScalingRow {
                n: *n,
                steps: k,
                t,
                dbar,
                ratio,
                envelope,
                within_envelope: envelope.map(|e| dbar <= e + crate::bounds::BOUND_SLACK),
            });
        }
    }

    let time_exponents = per_n
        .iter()
        .filter_map(|(n, series)| {
            let pts: Vec<(f64, f64)> = series.iter().map(|(t, d)| (to_f64(*t), to_f64(*d))).collect();
            let rising = increasing_prefix(&pts[1.min(pts.len())..]);
            log_log_slope(rising).map(|exponent| ExponentFit {
                held: *n,
                exponent,
                points: rising.len(),
            })
        })
        .collect();

    let size_exponents = (1..=max_steps)
        .filter_map(|k| {
            let pts: Vec<(f64, f64)> = per_n.iter().map(|(n, s)| (*n as f64, to_f64(s[k].1))).collect();
            log_log_slope(&pts).map(|exponent| ExponentFit {
                held: k,
                exponent,
                points: pts.len(),
            })
        })
        .collect();

    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ScalingScan {
        rows,
        time_exponents,
        size_exponents,
        max_ratio,
    })
}

/// Longest leading run with strictly increasing second coordinate.
fn increasing_prefix(points: &[(f64, f64)]) -> &[(f64, f64)] {
    let mut end = points.len().min(1);
    while end < points.len() && points[end].1 > points[end - 1].1 {
        end += 1;
    }
    &points[..end]
}

/// Best objective for every `γ` in `gammas`, same seed and budget each time.
pub fn dephasing_sweep<T: Real>(
    cfg: &SchemeConfig<T>,
    gammas: &[T],
    restarts: usize,
    seed: u64,
) -> Result<Vec<(T, T)>> {
    gammas
        .iter()
        .map(|&g| {
            let c = SchemeConfig {
                gamma: g,
                ..cfg.clone()
            };
            Ok((g, optimize_sum_sqrt_qfi(&c, restarts, seed)?.best_value))
        })
        .collect()
}

/// Cap `2 T √N` on `Σ_x √F^x_ω` for the ω-parameterized final states.
pub fn sum_sqrt_qfi_cap<T: Real>(cfg: &SchemeConfig<T>) -> T {
    lit::<T>(2.0) * cfg.total_time() * from_usize::<T>(cfg.n).sqrt()
}
