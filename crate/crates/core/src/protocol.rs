//! Simulator of the interrogation scheme: `M` queries of the oracle channel,
//! each followed by an intertwining unitary, run side by side with the
//! reference evolution in which the oracle phase is switched off.
//!
//! Layouts:
//! * `GroverDiffusion`: one N-level system, `V = 2|ψ₀⟩⟨ψ₀| − 1` after every
//!   query (the discrete Grover algorithm when `ωτ = π`).
//! * `SwapParallel`: `M` copies of the N-level system. After query `k < M`
//!   the sensing slot 0 is swapped with slot `k`, so every copy is queried
//!   once; the final `V` restores the original slot order.
//! * `Identity`: repeated queries on one system.
//! * `Custom`: one user-supplied unitary per step (adaptive strategies).

use rayon::prelude::*;

use crate::channels::{propagate, step_channels, OracleUnitary};
use crate::error::{invalid, Error, Result};
use crate::geometry::{bures_angle, qfi_sld, QfiResult, StateFamily};
use crate::linalg::{permute_subsystems, swap_subsystems, unitarity_deviation};
use crate::scalar::{creal, from_usize, lit, CMatrix, Real};
use crate::states::{DensityMatrix, Label, PureState, DEFAULT_DIM_CAP};

/// Default threshold on `⟨x|Tr_anc ρ|x⟩` for declaring a search successful.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.5;
/// Slack used by the inequality audits.
pub const AUDIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Intertwiner<T: Real> {
    GroverDiffusion,
    SwapParallel,
    Identity,
    Custom(Vec<CMatrix<T>>),
}

impl<T: Real> Intertwiner<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Intertwiner::GroverDiffusion => "grover_diffusion",
            Intertwiner::SwapParallel => "swap_parallel",
            Intertwiner::Identity => "identity",
            Intertwiner::Custom(_) => "custom",
        }
    }
}

/// Parameters of one run of the scheme. The total time `T = M τ` is always
/// derived, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig<T: Real> {
    /// Database size `N`.
    pub n: usize,
    /// Number of queries `M`.
    pub m: usize,
    pub tau: T,
    pub omega: T,
    pub gamma: T,
    /// Ancilla dimension, 0 for none.
    pub ancilla_dim: usize,
    pub v_sequence: Intertwiner<T>,
    pub dim_cap: usize,
}

impl<T: Real> SchemeConfig<T> {
    pub fn new(
        n: usize,
        m: usize,
        tau: T,
        omega: T,
        gamma: T,
        ancilla_dim: usize,
        v_sequence: Intertwiner<T>,
    ) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            tau,
            omega,
            gamma,
            ancilla_dim,
            v_sequence,
            dim_cap: DEFAULT_DIM_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Noiseless discrete Grover search: `ω = π`, `τ = π/ω = 1`.
    pub fn grover(n: usize, queries: usize) -> Result<Self> {
        Self::new(
            n,
            queries,
            T::one(),
            T::pi(),
            T::zero(),
            0,
            Intertwiner::GroverDiffusion,
        )
    }

    pub fn total_time(&self) -> T {
        from_usize::<T>(self.m) * self.tau
    }

    /// Copy of the configuration with a different frequency.
    pub fn with_omega(&self, omega: T) -> Self {
        Self { omega, ..self.clone() }
    }

    /// Subsystem dimensions; slot 0 is the sensing subsystem and an ancilla,
    /// when present, comes last.
    pub fn subsystem_dims(&self) -> Vec<usize> {
        let mut dims = match self.v_sequence {
            Intertwiner::SwapParallel => vec![self.n; self.m.max(1)],
            _ => vec![self.n],
        };
        if self.ancilla_dim > 0 {
            dims.push(self.ancilla_dim);
        }
        dims
    }

    /// Total Hilbert space dimension, saturating on overflow.
    pub fn total_dim(&self) -> usize {
        self.subsystem_dims()
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "database size must be positive"));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(invalid("tau", "step time must be positive and finite"));
        }
        if !self.omega.is_finite() {
            return Err(invalid("omega", "frequency must be finite"));
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return Err(invalid("gamma", "dephasing rate must be nonnegative and finite"));
        }
        let dim = self.total_dim();
        if dim > self.dim_cap {
            return Err(Error::SizeLimit { dim, cap: self.dim_cap });
        }
        match &self.v_sequence {
            Intertwiner::GroverDiffusion if self.ancilla_dim != 0 => {
                return Err(invalid(
                    "ancilla_dim",
                    "Grover diffusion acts on the bare N-level system; use ancilla_dim = 0",
                ));
            }
            Intertwiner::Custom(vs) => {
                if vs.len() != self.m {
                    return Err(invalid(
                        "v_sequence",
                        format!("{} custom unitaries supplied for {} steps", vs.len(), self.m),
                    ));
                }
                for (k, v) in vs.iter().enumerate() {
                    if v.nrows() != dim || v.ncols() != dim {
                        return Err(invalid(
                            "v_sequence",
                            format!("unitary {} is {}x{}, expected {dim}x{dim}", k + 1, v.nrows(), v.ncols()),
                        ));
                    }
                    if unitarity_deviation(v) > lit(1e-10) {
                        return Err(invalid("v_sequence", format!("matrix {} is not unitary", k + 1)));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Intertwining unitary applied after query `step` (1-based); `None`
    /// stands for the identity.
    pub fn intertwiner(&self, step: usize) -> Result<Option<CMatrix<T>>> {
        if step == 0 || step > self.m {
            return Err(invalid("step", format!("{step} outside 1..={}", self.m)));
        }
        Ok(match &self.v_sequence {
            Intertwiner::Identity => None,
            Intertwiner::GroverDiffusion => Some(grover_diffusion(self.n)),
            Intertwiner::Custom(vs) => Some(vs[step - 1].clone()),
            Intertwiner::SwapParallel => {
                let dims = self.subsystem_dims();
                if step < self.m {
                    Some(swap_subsystems(&dims, 0, step))
                } else {
                    let order = restore_order(dims.len(), self.m);
                    if order.iter().enumerate().all(|(k, &o)| k == o) {
                        None
                    } else {
                        Some(permute_subsystems(&dims, &order))
                    }
                }
            }
        })
    }

    fn intertwiners(&self) -> Result<Vec<Option<CMatrix<T>>>> {
        (1..=self.m).map(|k| self.intertwiner(k)).collect()
    }

    fn check_label(&self, x: Label) -> Result<()> {
        if x.get() > self.n {
            return Err(invalid("x", format!("label {x} outside 1..={}", self.n)));
        }
        Ok(())
    }
}

/// Slot order that undoes the swaps `(0,1), (0,2), …, (0,m−1)`.
fn restore_order(slots: usize, m: usize) -> Vec<usize> {
    let mut content: Vec<usize> = (0..slots).collect();
    for k in 1..m {
        content.swap(0, k);
    }
    (0..slots)
        .map(|orig| content.iter().position(|&c| c == orig).unwrap_or(orig))
        .collect()
}

/// `2|ψ₀⟩⟨ψ₀| − 1` on an N-level system.
pub fn grover_diffusion<T: Real>(n: usize) -> CMatrix<T> {
    let w = creal(lit::<T>(2.0) / from_usize::<T>(n));
    CMatrix::<T>::from_element(n, n, w) - CMatrix::<T>::identity(n, n)
}

/// Full record of one run for a fixed label `x`.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub label: Label,
    pub config: SchemeConfig<T>,
    /// `t_k = k τ`, `k = 0..=M`.
    pub times: Vec<T>,
    /// `ρ^x_{t,ω}`
    pub states_with_oracle: Vec<DensityMatrix<T>>,
    /// `ρ_t`, the same run with the oracle phase removed.
    pub states_reference: Vec<DensityMatrix<T>>,
    /// `∂_ω ρ^x_{t,ω}`
    pub derivatives: Vec<CMatrix<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn final_state(&self) -> &DensityMatrix<T> {
        self.states_with_oracle.last().expect("trajectory holds ρ₀")
    }

    pub fn final_reference(&self) -> &DensityMatrix<T> {
        self.states_reference.last().expect("trajectory holds ρ₀")
    }

    /// QFI with respect to ω of the state after `step` queries.
    pub fn qfi_at(&self, step: usize) -> Result<QfiResult<T>> {
        qfi_sld(&self.states_with_oracle[step], &self.derivatives[step])
    }

    pub fn final_qfi(&self) -> Result<QfiResult<T>> {
        self.qfi_at(self.steps())
    }

    /// `D(ρ^x_{t,ω}, ρ_t)` at every recorded time.
    pub fn distances(&self) -> Result<Vec<T>> {
        self.states_with_oracle
            .iter()
            .zip(&self.states_reference)
            .map(|(a, b)| bures_angle(a, b))
            .collect()
    }

    /// `⟨x|Tr_rest ρ^x_{T,ω}|x⟩` on the sensing subsystem.
    pub fn success_probability(&self) -> T {
        sensing_population(self.final_state(), &self.config.subsystem_dims(), self.label)
    }
}

/// Population of sensing level `x` (slot 0), summed over the other subsystems.
pub fn sensing_population<T: Real>(rho: &DensityMatrix<T>, dims: &[usize], x: Label) -> T {
    let stride: usize = dims[1..].iter().product();
    (0..stride)
        .map(|r| rho.population(x.index() * stride + r))
        .fold(T::zero(), |a, b| a + b)
}

/// Runs the scheme for label `x` starting from `probe`.
pub fn run_scheme<T: Real>(cfg: &SchemeConfig<T>, probe: &DensityMatrix<T>, x: Label) -> Result<Trajectory<T>> {
    cfg.validate()?;
    cfg.check_label(x)?;
    let dim = cfg.total_dim();
    if probe.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: probe.dim(),
        });
    }
    let vs = cfg.intertwiners()?;
    let (oracle, deph) = step_channels(x, cfg)?;

    let mut times = Vec::with_capacity(cfg.m + 1);
    let mut with_oracle = Vec::with_capacity(cfg.m + 1);
    let mut reference = Vec::with_capacity(cfg.m + 1);
    let mut derivatives = Vec::with_capacity(cfg.m + 1);
    times.push(T::zero());
    with_oracle.push(probe.clone());
    reference.push(probe.clone());
    derivatives.push(CMatrix::<T>::zeros(dim, dim));

    let mut rho = probe.matrix().clone();
    let mut drho: Option<CMatrix<T>> = None;
    let mut rho_ref = probe.matrix().clone();
    for (k, v) in vs.iter().enumerate() {
        let (next, dnext) = propagate(&oracle, &deph, v.as_ref(), &rho, drho.as_ref())?;
        let mut next_ref = deph.apply_matrix(&rho_ref)?;
        if let Some(v) = v {
            next_ref = v * next_ref * v.adjoint();
        }
        rho = next;
        rho_ref = next_ref;
        times.push(from_usize::<T>(k + 1) * cfg.tau);
        with_oracle.push(DensityMatrix::from_channel_output(rho.clone()));
        reference.push(DensityMatrix::from_channel_output(rho_ref.clone()));
        derivatives.push(dnext.clone());
        drho = Some(dnext);
    }

    Ok(Trajectory {
        label: x,
        config: cfg.clone(),
        times,
        states_with_oracle: with_oracle,
        states_reference: reference,
        derivatives,
    })
}

/// Runs the scheme for every label `x = 1..=N`, in parallel.
pub fn run_all_labels<T: Real>(cfg: &SchemeConfig<T>, probe: &DensityMatrix<T>) -> Result<Vec<Trajectory<T>>> {
    let labels: Vec<Label> = Label::all(cfg.n).collect();
    labels.par_iter().map(|&x| run_scheme(cfg, probe, x)).collect()
}

/// `D̄_t = Σ_x D(ρ^x_{t,ω}, ρ_t)` at every recorded time.
pub fn average_distance<T: Real>(trajectories: &[Trajectory<T>]) -> Result<Vec<(T, T)>> {
    let first = trajectories
        .first()
        .ok_or_else(|| invalid("trajectories", "at least one trajectory is required"))?;
    let n = first.config.n;
    if trajectories.len() != n {
        return Err(invalid(
            "trajectories",
            format!("expected one trajectory per label 1..={n}, got {}", trajectories.len()),
        ));
    }
    let mut seen = vec![false; n];
    for tr in trajectories {
        if tr.config != first.config {
            return Err(invalid(
                "trajectories",
                "trajectories come from different configurations",
            ));
        }
        let slot = &mut seen[tr.label.index()];
        if *slot {
            return Err(invalid("trajectories", format!("label {} appears twice", tr.label)));
        }
        *slot = true;
    }
    let per_label: Vec<Vec<T>> = trajectories.par_iter().map(|t| t.distances()).collect::<Result<_>>()?;
    Ok(first
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, per_label.iter().fold(T::zero(), |acc, d| acc + d[k])))
        .collect())
}

/// Success probability `⟨x|ρ_M|x⟩` for every label after `queries` rounds
/// of the noiseless discrete Grover algorithm.
pub fn grover_success_by_label<T: Real>(n: usize, queries: usize) -> Result<Vec<T>> {
    let cfg = SchemeConfig::<T>::grover(n, queries)?;
    let probe = PureState::<T>::uniform(n).density();
    Ok(run_all_labels(&cfg, &probe)?
        .iter()
        .map(|t| t.success_probability())
        .collect())
}

/// Worst-case success probability over labels of the discrete Grover
/// algorithm after `queries` oracle calls.
pub fn discrete_grover<T: Real>(n: usize, queries: usize) -> Result<T> {
    let probs = grover_success_by_label::<T>(n, queries)?;
    Ok(probs.into_iter().fold(T::one(), |a, b| a.min(b)))
}

/// Per-step check of
/// `D(ρ^x_{t+τ}, ρ_{t+τ}) − D(ρ^x_t, ρ_t) ≤ D(ρ_t, U^{x†} ρ_t U^x)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepMargin<T: Real> {
    pub step: usize,
    pub increment: T,
    pub bound: T,
    /// `bound − increment`; nonnegative when the inequality holds.
    pub margin: T,
}

pub fn stepwise_inequality_audit<T: Real>(trajectory: &Trajectory<T>) -> Result<Vec<StepMargin<T>>> {
    let cfg = &trajectory.config;
    let oracle = OracleUnitary::new(&cfg.subsystem_dims(), 0, trajectory.label, cfg.omega, cfg.tau)?;
    let d = trajectory.distances()?;
    (0..trajectory.steps())
        .map(|k| {
            let rho_t = &trajectory.states_reference[k];
            let pulled = DensityMatrix::from_channel_output(oracle.apply_adjoint_matrix(rho_t.matrix())?);
            let bound = bures_angle(rho_t, &pulled)?;
            let increment = d[k + 1] - d[k];
            Ok(StepMargin {
                step: k + 1,
                increment,
                bound,
                margin: bound - increment,
            })
        })
        .collect()
}

/// Final state of the scheme as a function of ω, for local geometry checks.
pub struct SchemeFamily<T: Real> {
    pub config: SchemeConfig<T>,
    pub probe: DensityMatrix<T>,
    pub label: Label,
}

impl<T: Real> SchemeFamily<T> {
    fn run(&self, omega: T) -> Result<Trajectory<T>> {
        run_scheme(&self.config.with_omega(omega), &self.probe, self.label)
    }
}

impl<T: Real> StateFamily<T> for SchemeFamily<T> {
    fn state(&self, omega: T) -> Result<DensityMatrix<T>> {
        Ok(self.run(omega)?.final_state().clone())
    }

    fn derivative(&self, omega: T) -> Result<CMatrix<T>> {
        Ok(self.run(omega)?.derivatives.pop().expect("trajectory holds ρ₀"))
    }
}

/// One row of a step-refinement scan at fixed total time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RefinementRow<T: Real> {
    pub steps: usize,
    pub tau: T,
    pub qfi: T,
}

/// QFI of label `x` at fixed `T` while halving `τ` (doubling `M`) `levels`
/// times, starting from `cfg`. Only layouts whose dimension does not grow
/// with `M` are accepted.
pub fn tau_refinement_scan<T: Real>(
    cfg: &SchemeConfig<T>,
    probe: &DensityMatrix<T>,
    x: Label,
    levels: usize,
) -> Result<Vec<RefinementRow<T>>> {
    if matches!(cfg.v_sequence, Intertwiner::SwapParallel | Intertwiner::Custom(_)) {
        return Err(Error::Unsupported(
            "step refinement needs a step-independent intertwiner (grover_diffusion or identity)".into(),
        ));
    }
    let mut rows = Vec::with_capacity(levels + 1);
    let mut current = cfg.clone();
    for _ in 0..=levels {
        let tr = run_scheme(&current, probe, x)?;
        rows.push(RefinementRow {
            steps: current.m,
            tau: current.tau,
            qfi: tr.final_qfi()?.value,
        });
        current.m *= 2;
        current.tau /= lit(2.0);
    }
    Ok(rows)
}
