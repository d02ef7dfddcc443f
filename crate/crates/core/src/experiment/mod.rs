//! Batch experiment runner behind the `metrosearch` binary.
//!
//! A run resolves a [`ExperimentConfig`], dispatches to the simulator, the
//! bound catalog or the optimizer, and produces a [`Report`] plus CSV
//! series. Output is a pure function of `(config, seed)`: maps serialize in
//! key order and parallel work is collected in index order.

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{Command, ExperimentConfig, Format, Layout, Probe, SchemeSection};
pub use output::{emit_plot_data, Column, Series};

use crate::bounds::{
    crossover_scan, dephasing_qfi_bound, dephasing_query_bound, distance_lower_bound, frequency_way_distance_bound,
    fundamental_dephasing_bound, noiseless_query_bound, temme_bound, time_way_distance_bound, BoundReport, Direction,
};
use crate::error::{Error, Result};
use crate::geometry::{bures_angle, qfi_bures_consistency};
use crate::probeopt::{conjecture_check, conjecture_scaling_scan, sum_sqrt_qfi_cap};
use crate::protocol::{
    average_distance, run_all_labels, stepwise_inequality_audit, SchemeConfig, SchemeFamily, Trajectory,
};
use crate::random::seeded_rng;
use crate::states::{DensityMatrix, PureState};

/// Exit status when every asserted bound holds.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status when a bound audit failed.
pub const EXIT_BOUND_FAILED: i32 = 2;

/// Success probabilities within this of 1 count as perfect discrimination.
const PERFECT_SUCCESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub seed: u64,
    /// Fully resolved configuration, sufficient to re-run.
    pub config: ExperimentConfig,
    pub results: Value,
    pub bounds: Vec<BoundReport>,
    pub all_satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub series: Vec<Series>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_satisfied {
            EXIT_OK
        } else {
            EXIT_BOUND_FAILED
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn report_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    /// Writes `report.json` and/or the CSV series into `dir`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if format.json() {
            let path = dir.join("report.json");
            fs::write(&path, self.report_json()?)?;
            written.push(path);
        }
        if format.csv() {
            written.extend(emit_plot_data(dir, &self.series)?);
        }
        Ok(written)
    }
}

/// Runs `command` (falling back to the config's `command` key).
pub fn run_experiment(cfg: &ExperimentConfig, command: Option<Command>) -> Result<Outcome> {
    let command = match (command, cfg.command) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "command: config asks for `{}` but `{}` was requested",
                b.name(),
                a.name()
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Config("command: no command given".into())),
    };
    let scheme = cfg.validate(command)?;
    let mut resolved = cfg.clone();
    resolved.command = Some(command);

    let (results, bounds, series) = match command {
        Command::Grover => grover(cfg, &scheme)?,
        Command::Bounds => bounds_table(cfg, &scheme)?,
        Command::Qfi => qfi(cfg, &scheme)?,
        Command::Conjecture => conjecture(cfg, &scheme)?,
        Command::Scan => scan(cfg, &scheme)?,
        Command::Audit => audit(cfg, &scheme)?,
    };
    let all_satisfied = bounds.iter().all(|b| !b.failed());
    Ok(Outcome {
        report: Report {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed,
            config: resolved,
            results,
            bounds,
            all_satisfied,
        },
        series,
    })
}

type Parts = (Value, Vec<BoundReport>, Vec<Series>);

fn probe_state(cfg: &ExperimentConfig, scheme: &SchemeConfig<f64>) -> DensityMatrix<f64> {
    let dim = scheme.total_dim();
    match cfg.probe {
        Probe::Uniform => PureState::uniform(dim).density(),
        Probe::Haar => crate::random::haar_state::<f64, _>(dim, &mut seeded_rng(cfg.seed)).density(),
    }
}

fn with_scheme(r: BoundReport, s: &SchemeConfig<f64>) -> BoundReport {
    r.param("n", s.n as f64)
        .param("m", s.m as f64)
        .param("tau", s.tau)
        .param("omega", s.omega)
        .param("gamma", s.gamma)
        .param("t", s.total_time())
}

type DbarSeries = (Vec<(f64, f64)>, Series, BoundReport);

/// Summed-distance series with the time-way envelope, plus the envelope
/// report for the worst step.
fn dbar_series(trs: &[Trajectory<f64>], s: &SchemeConfig<f64>) -> Result<DbarSeries> {
    let dbar = average_distance(trs)?;
    let mut series = Series::new(
        "dbar",
        "summed Bures angle between oracle and reference runs over all labels",
        &[
            ("t", "elapsed time k*tau"),
            ("dbar", "sum over labels of D(rho^x_t, rho_t)"),
            ("time_way_bound", "t*sqrt(N)*omega"),
        ],
    );
    let mut worst: Option<(f64, f64, f64)> = None;
    for &(t, d) in &dbar {
        let b = time_way_distance_bound(t, s.n, s.omega)?;
        series.push(vec![t, d, b]);
        if worst.is_none_or(|(_, wd, wb)| b - d < wb - wd) {
            worst = Some((t, d, b));
        }
    }
    let (t, d, b) = worst.expect("series holds t = 0");
    let report = with_scheme(BoundReport::new("time_way_distance_bound", Direction::Upper, b), s)
        .param("t_worst", t)
        .measured(d);
    Ok((dbar, series, report))
}

/// Per-label frequency-way check at the final time; `None` without dephasing.
fn frequency_way_report(trs: &[Trajectory<f64>], s: &SchemeConfig<f64>) -> Result<Option<BoundReport>> {
    if s.gamma <= 0.0 {
        return Ok(None);
    }
    let bound = frequency_way_distance_bound(s.total_time(), s.omega, s.gamma, s.n, true)?;
    let mut worst = 0.0f64;
    for tr in trs {
        worst = worst.max(bures_angle(tr.final_state(), tr.final_reference())?);
    }
    Ok(Some(
        with_scheme(
            BoundReport::new("frequency_way_distance_bound_per_label", Direction::Upper, bound),
            s,
        )
        .measured(worst),
    ))
}

fn perfect(min_success: f64) -> bool {
    min_success >= 1.0 - PERFECT_SUCCESS_TOL
}

fn grover(cfg: &ExperimentConfig, s: &SchemeConfig<f64>) -> Result<Parts> {
    let trs = run_all_labels(s, &probe_state(cfg, s))?;
    let success: Vec<f64> = trs.iter().map(|t| t.success_probability()).collect();
    let min_success = success.iter().copied().fold(1.0, f64::min);
    let (dbar, series, time_way) = dbar_series(&trs, s)?;
    let final_dbar = dbar.last().map_or(0.0, |p| p.1);

    let mut bounds = vec![time_way];
    bounds.extend(frequency_way_report(&trs, s)?);
    if perfect(min_success) && s.omega > 0.0 {
        bounds.push(
            with_scheme(
                BoundReport::new(
                    "noiseless_query_bound",
                    Direction::Lower,
                    noiseless_query_bound(s.n, s.omega)?,
                ),
                s,
            )
            .measured(s.total_time()),
        );
        if s.n >= 2 {
            bounds.push(
                with_scheme(
                    BoundReport::new("distance_lower_bound", Direction::Lower, distance_lower_bound(s.n)?),
                    s,
                )
                .measured(final_dbar),
            );
        }
    }
    let results = json!({
        "success_probability": min_success,
        "success_by_label": success,
        "succeeded": min_success >= cfg.success_threshold,
        "perfect_success": perfect(min_success),
        "total_time": s.total_time(),
        "dbar_final": final_dbar,
    });
    Ok((results, bounds, vec![series]))
}

fn bounds_table(cfg: &ExperimentConfig, s: &SchemeConfig<f64>) -> Result<Parts> {
    let mut bounds = vec![with_scheme(
        BoundReport::new(
            "noiseless_query_bound",
            Direction::Lower,
            noiseless_query_bound(s.n, s.omega)?,
        ),
        s,
    )];
    if s.n >= 2 {
        bounds.push(with_scheme(
            BoundReport::new("distance_lower_bound", Direction::Lower, distance_lower_bound(s.n)?),
            s,
        ));
    }
    let mut results = json!({ "dephasing": s.gamma > 0.0 });
    if s.gamma > 0.0 {
        let dq = dephasing_query_bound(s.n, s.omega, s.gamma)?;
        let tb = temme_bound(s.n, s.omega, s.gamma)?;
        bounds.push(with_scheme(
            BoundReport::new("dephasing_query_bound", Direction::Lower, dq),
            s,
        ));
        bounds.push(with_scheme(BoundReport::new("temme_bound", Direction::Lower, tb), s));
        bounds.push(with_scheme(
            BoundReport::new("dephasing_query_bound_vs_temme", Direction::Lower, tb).measured(dq),
            s,
        ));
        if s.m > 0 {
            bounds.push(with_scheme(
                BoundReport::new(
                    "dephasing_qfi_bound",
                    Direction::Upper,
                    dephasing_qfi_bound(s.m, s.tau, s.gamma)?,
                ),
                s,
            ));
            bounds.push(with_scheme(
                BoundReport::new(
                    "fundamental_dephasing_bound",
                    Direction::Upper,
                    fundamental_dephasing_bound(s.total_time(), s.gamma)?,
                ),
                s,
            ));
        }
        for (name, per_label) in [
            ("frequency_way_distance_bound_per_label", true),
            ("frequency_way_distance_bound", false),
        ] {
            bounds.push(with_scheme(
                BoundReport::new(
                    name,
                    Direction::Upper,
                    frequency_way_distance_bound(s.total_time(), s.omega, s.gamma, s.n, per_label)?,
                ),
                s,
            ));
        }
    }
    bounds.push(with_scheme(
        BoundReport::new(
            "time_way_distance_bound",
            Direction::Upper,
            time_way_distance_bound(s.total_time(), s.n, s.omega)?,
        ),
        s,
    ));

    let mut series = Vec::new();
    if s.gamma > 0.0 {
        let ns = cfg.n_values.clone().unwrap_or_else(|| (1..=64).collect());
        let table = crossover_scan(&ns, s.omega, s.gamma)?;
        let mut csv = Series::new(
            "crossover",
            "query-time lower bounds as a function of database size",
            &[
                ("n", "database size N"),
                ("noiseless", "(pi/(4 omega)) sqrt(N)"),
                ("dephasing", "N (pi^2/8) gamma/omega^2"),
                ("temme", "N 2 gamma/(gamma^2 + 4 omega^2)"),
            ],
        );
        for r in &table.rows {
            csv.push(vec![r.n as f64, r.noiseless, r.dephasing, r.temme]);
        }
        series.push(csv);
        results["crossover"] = serde_json::to_value(&table).map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok((results, bounds, series))
}

fn qfi(cfg: &ExperimentConfig, s: &SchemeConfig<f64>) -> Result<Parts> {
    let probe = probe_state(cfg, s);
    let trs = run_all_labels(s, &probe)?;
    let mut per_label = Vec::with_capacity(trs.len());
    let mut worst_consistency = 0.0f64;
    let mut csv = Series::new(
        "qfi",
        "quantum Fisher information of the final state with respect to omega",
        &[
            ("x", "label"),
            ("qfi", "F_omega^x"),
            (
                "bures_slope_error",
                "relative mismatch of 2D/eps and sqrt(F) at eps = 1e-4",
            ),
        ],
    );
    for tr in &trs {
        let f = tr.final_qfi()?.value;
        let family = SchemeFamily {
            config: s.clone(),
            probe: probe.clone(),
            label: tr.label,
        };
        let err = qfi_bures_consistency(&family, s.omega)?;
        worst_consistency = worst_consistency.max(err);
        csv.push(vec![tr.label.get() as f64, f, err]);
        per_label.push(f);
    }
    let max_f = per_label.iter().copied().fold(0.0, f64::max);
    let sum_sqrt: f64 = per_label.iter().map(|f| f.sqrt()).sum();

    let mut bounds = Vec::new();
    if s.gamma > 0.0 && s.m > 0 {
        bounds.push(
            with_scheme(
                BoundReport::new(
                    "dephasing_qfi_bound",
                    Direction::Upper,
                    dephasing_qfi_bound(s.m, s.tau, s.gamma)?,
                ),
                s,
            )
            .measured(max_f),
        );
        bounds.push(
            with_scheme(
                BoundReport::new(
                    "fundamental_dephasing_bound",
                    Direction::Upper,
                    fundamental_dephasing_bound(s.total_time(), s.gamma)?,
                ),
                s,
            )
            .measured(max_f),
        );
    }
    let t = s.total_time();
    bounds.push(with_scheme(BoundReport::new("noiseless_qfi_cap", Direction::Upper, t * t), s).measured(max_f));
    bounds.push(
        with_scheme(
            BoundReport::new("sum_sqrt_qfi_cap", Direction::Upper, sum_sqrt_qfi_cap(s)),
            s,
        )
        .measured(sum_sqrt),
    );
    bounds.push(
        with_scheme(
            BoundReport::new("qfi_bures_slope_consistency", Direction::Upper, 1e-3),
            s,
        )
        .measured(worst_consistency),
    );

    let results = json!({
        "qfi_by_label": per_label,
        "max_qfi": max_f,
        "sum_sqrt_qfi": sum_sqrt,
    });
    Ok((results, bounds, vec![csv]))
}

fn conjecture(cfg: &ExperimentConfig, s: &SchemeConfig<f64>) -> Result<Parts> {
    let check = conjecture_check(s, cfg.restarts, cfg.seed)?;
    let bounds = vec![
        with_scheme(
            BoundReport::new("sum_sqrt_qfi_cap", Direction::Upper, sum_sqrt_qfi_cap(s)),
            s,
        )
        .measured(check.lhs),
        with_scheme(
            BoundReport::new("conjecture_ratio", Direction::Upper, check.ratio_cap * (1.0 + 1e-6)),
            s,
        )
        .param("restarts", cfg.restarts as f64)
        .measured(check.ratio),
    ];
    let mut csv = Series::new(
        "conjecture",
        "optimized sides of max sum_x sqrt(F^x) <= 2 sqrt(N) max sqrt(F^x0)",
        &[
            ("n", "database size"),
            ("lhs", "max sum_x sqrt(F^x)"),
            ("rhs", "2 sqrt(N) max sqrt(F^1)"),
            ("ratio", "lhs/rhs"),
        ],
    );
    csv.push(vec![s.n as f64, check.lhs, check.rhs, check.ratio]);
    let results = serde_json::to_value(check).map_err(|e| Error::Config(e.to_string()))?;
    Ok((results, bounds, vec![csv]))
}

fn scan(cfg: &ExperimentConfig, s: &SchemeConfig<f64>) -> Result<Parts> {
    let ns = cfg.n_values.clone().unwrap_or_else(|| vec![s.n]);
    let table = conjecture_scaling_scan(&ns, s.m, s)?;
    let mut csv = Series::new(
        "scaling",
        "summed probe distance against time and database size",
        &[
            ("n", "database size"),
            ("steps", "queries so far"),
            ("t", "elapsed time"),
            ("dbar", "summed Bures angle"),
            ("ratio", "dbar/(sqrt(t) sqrt(N))"),
            ("envelope", "N omega sqrt(t)/(2 sqrt(2 gamma)); nan without dephasing"),
        ],
    );
    let mut bounds = Vec::new();
    let mut worst: Option<(f64, f64, usize, f64)> = None;
    for r in &table.rows {
        csv.push(vec![
            r.n as f64,
            r.steps as f64,
            r.t,
            r.dbar,
            r.ratio,
            r.envelope.unwrap_or(f64::NAN),
        ]);
        if let Some(e) = r.envelope {
            if worst.is_none_or(|(we, wd, _, _)| e - r.dbar < we - wd) {
                worst = Some((e, r.dbar, r.n, r.t));
            }
        }
    }
    if let Some((e, d, n, t)) = worst {
        bounds.push(
            with_scheme(BoundReport::new("frequency_way_distance_bound", Direction::Upper, e), s)
                .param("n_worst", n as f64)
                .param("t_worst", t)
                .measured(d),
        );
    }
    let results = serde_json::to_value(&table).map_err(|e| Error::Config(e.to_string()))?;
    Ok((results, bounds, vec![csv]))
}

fn audit(cfg: &ExperimentConfig, s: &SchemeConfig<f64>) -> Result<Parts> {
    let trs = run_all_labels(s, &probe_state(cfg, s))?;
    let (_, dbar_csv, time_way) = dbar_series(&trs, s)?;
    let mut steps_csv = Series::new(
        "stepwise",
        "per-step distance increments against the oracle displacement of the reference state",
        &[
            ("x", "label"),
            ("step", "query index"),
            ("increment", "D(rho^x_{t+tau}, rho_{t+tau}) - D(rho^x_t, rho_t)"),
            ("bound", "D(rho_t, U^dag rho_t U)"),
            ("margin", "bound - increment"),
        ],
    );
    let mut min_margin = f64::INFINITY;
    for tr in &trs {
        for m in stepwise_inequality_audit(tr)? {
            min_margin = min_margin.min(m.margin);
            steps_csv.push(vec![
                tr.label.get() as f64,
                m.step as f64,
                m.increment,
                m.bound,
                m.margin,
            ]);
        }
    }
    let mut bounds = vec![time_way];
    if min_margin.is_finite() {
        bounds
            .push(with_scheme(BoundReport::new("stepwise_inequality", Direction::Lower, 0.0), s).measured(min_margin));
    }
    bounds.extend(frequency_way_report(&trs, s)?);
    let min_success = trs.iter().map(|t| t.success_probability()).fold(1.0, f64::min);
    if perfect(min_success) && s.n >= 2 {
        let final_dbar = average_distance(&trs)?.last().map_or(0.0, |p| p.1);
        bounds.push(
            with_scheme(
                BoundReport::new("distance_lower_bound", Direction::Lower, distance_lower_bound(s.n)?),
                s,
            )
            .measured(final_dbar),
        );
    }
    let results = json!({
        "min_step_margin": if min_margin.is_finite() { Some(min_margin) } else { None },
        "success_probability": min_success,
    });
    let mut series = vec![dbar_csv];
    if !steps_csv.rows.is_empty() {
        series.push(steps_csv);
    }
    Ok((results, bounds, series))
}
