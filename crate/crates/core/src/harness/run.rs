//! Seeded trial execution and sweep aggregation.
//!
//! One trial draws a channel realization, runs the uplink training phase
//! once, and hands the identical estimates to every enabled scheme, so all
//! schemes are compared on the same channels and the same training noise.
//! Trials run concurrently; their seeds derive deterministically from
//! `(master_seed, sweep index, trial index)`, so results do not depend on
//! scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    dbm_to_milliwatts, generate_channels, Geometry, PathLossModel, RicianSpec,
};
use crate::error::{Error, Result};
use crate::numerics::CVec;
use crate::rate::{self, FeasibleSet, PrecoderSet};
use crate::solver_mu::{no_irs_baseline, pdd_solve};
use crate::solver_su::{
    bcd_refine_continuous, bcd_refine_discrete, solve_su_continuous, solve_su_discrete,
    su_objective, SuInit,
};
use crate::training::{
    design_patterns, error_covariance, ls_estimate, normalized_mse, simulate_uplink,
    ChannelEstimate,
};

use super::config::ExperimentConfig;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed.
pub fn derive_trial_seed(master_seed: u64, sweep_index: usize, trial_index: usize) -> u64 {
    let a = splitmix64(master_seed ^ 0xA076_1D64_78BD_642F);
    let b = splitmix64(a ^ (sweep_index as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    splitmix64(b ^ (trial_index as u64).wrapping_mul(0x8EBC_6AF0_9C88_C6E3))
}

/// What a trial executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    /// Training and estimation only (normalized-MSE experiments).
    EstimateOnly,
    /// Full pipeline with the solver route chosen from `k_users` and the
    /// feasible set.
    Solve,
    /// Full pipeline with the PDD solver regardless of the user count.
    SolveForceMu,
}

/// Per-scheme results of one trial.
#[derive(Debug, Clone)]
pub struct SchemeMetrics {
    pub sum_rate: f64,
    pub effective_sum_rate: f64,
    pub per_user_rates: Vec<f64>,
    pub eop: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Wall-clock solve time; informational only, never exported.
    pub wall_ms: f64,
}

/// Everything recorded for one `(sweep value, trial)` cell.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub seed: u64,
    pub sweep_value: Option<f64>,
    pub normalized_mse: f64,
    pub schemes: Vec<(String, SchemeMetrics)>,
}

fn sample_user_positions(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let c = cfg.geometry.cluster_center;
    let radius = cfg.geometry.cluster_radius;
    (0..cfg.system.k_users)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let angle = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            [c[0] + r * angle.cos(), c[1] + r * angle.sin(), c[2]]
        })
        .collect()
}

struct TrainedScene {
    estimates: Vec<ChannelEstimate>,
    normalized_mse: f64,
}

fn train_scene(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<TrainedScene> {
    let geometry = Geometry {
        ap_ref: cfg.geometry.ap,
        irs_ref: cfg.geometry.irs,
        user_positions: sample_user_positions(cfg, rng),
        ap_antennas: cfg.system.ap_antennas,
        irs_grid: (cfg.geometry.irs_rows_y, cfg.system.irs_elements / cfg.geometry.irs_rows_y),
        spacing_wavelengths: cfg.geometry.spacing_wavelengths,
    };
    let path_loss = PathLossModel {
        c0_db: cfg.path_loss.c0_db,
        alpha_au: cfg.path_loss.alpha_au,
        alpha_ai: cfg.path_loss.alpha_ai,
        alpha_iu: cfg.path_loss.alpha_iu,
    };
    let to_linear = |db: Option<f64>| db.map(crate::channel::db_to_linear).unwrap_or(0.0);
    let rician = RicianSpec {
        beta_au: to_linear(cfg.rician.beta_au_db),
        beta_ai: to_linear(cfg.rician.beta_ai_db),
        beta_iu: to_linear(cfg.rician.beta_iu_db),
    };
    let channels = generate_channels(&geometry, &path_loss, &rician, rng)?;

    // Fixed-phase data transmission (q_theta = 0) still trains with 1-bit
    // patterns; continuous control trains with DFT patterns.
    let q_train = match cfg.reflection.q_theta.bits() {
        None => None,
        Some(q) => Some(q.max(1)),
    };
    let patterns = design_patterns(cfg.system.irs_elements, cfg.n_pilots(), q_train)?;
    let p_u = dbm_to_milliwatts(cfg.power.p_u_dbm);
    let eps2 = dbm_to_milliwatts(cfg.power.training_noise_dbm);
    let v_bar = error_covariance(&patterns, eps2, p_u)?;

    let mut estimates = Vec::with_capacity(cfg.system.k_users);
    let mut mse_acc = 0.0;
    for k in 0..cfg.system.k_users {
        let y = simulate_uplink(&channels.stacked[k], &patterns, p_u, eps2, rng)?;
        let h_bar = ls_estimate(&y, &patterns, p_u)?;
        mse_acc += normalized_mse(&h_bar, &channels.stacked[k])?;
        estimates.push(ChannelEstimate::new(h_bar, v_bar.clone())?);
    }
    Ok(TrainedScene { estimates, normalized_mse: mse_acc / cfg.system.k_users as f64 })
}

fn overhead_factor(cfg: &ExperimentConfig) -> f64 {
    let t0 = cfg.system.frame_symbols as f64;
    (t0 - cfg.n_pilots() as f64) / t0
}

fn metrics_from_parts(
    cfg: &ExperimentConfig,
    per_user_rates: Vec<f64>,
    eop: f64,
    inner: usize,
    outer: usize,
    converged: bool,
    wall_ms: f64,
) -> SchemeMetrics {
    let sum_rate: f64 = per_user_rates.iter().sum();
    SchemeMetrics {
        sum_rate,
        effective_sum_rate: sum_rate * overhead_factor(cfg),
        per_user_rates,
        eop,
        inner_iterations: inner,
        outer_iterations: outer,
        converged,
        wall_ms,
    }
}

fn solve_proposed(
    cfg: &ExperimentConfig,
    scene: &TrainedScene,
    feasible: &FeasibleSet,
    force_mu: bool,
) -> Result<SchemeMetrics> {
    let power = dbm_to_milliwatts(cfg.power.p_dbm);
    let sigma2 = dbm_to_milliwatts(cfg.power.noise_dbm);
    let k = cfg.system.k_users;
    let started = std::time::Instant::now();
    if k == 1 && !force_mu && feasible.is_fully_discrete() {
        let report = solve_su_discrete(
            &scene.estimates[0],
            power,
            sigma2,
            feasible,
            &cfg.solver_su.su_config(),
        )?;
        return Ok(metrics_from_parts(
            cfg,
            vec![report.rate],
            report.eop,
            report.inner_iterations,
            report.outer_iterations,
            report.converged,
            started.elapsed().as_secs_f64() * 1e3,
        ));
    }
    if k == 1 && !force_mu && feasible.is_fully_continuous() {
        let report =
            solve_su_continuous(&scene.estimates[0], power, sigma2, &cfg.solver_su.su_config())?;
        return Ok(metrics_from_parts(
            cfg,
            vec![report.rate],
            report.eop,
            report.inner_iterations,
            report.outer_iterations,
            report.converged,
            started.elapsed().as_secs_f64() * 1e3,
        ));
    }
    let report = pdd_solve(
        &scene.estimates,
        power,
        &vec![sigma2; k],
        &vec![1.0; k],
        feasible,
        &cfg.solver_mu.mu_config(true),
    )?;
    Ok(metrics_from_parts(
        cfg,
        report.per_user_rates,
        report.eop,
        report.inner_iterations,
        report.outer_iterations,
        report.converged,
        started.elapsed().as_secs_f64() * 1e3,
    ))
}

fn solve_random_bcd(
    cfg: &ExperimentConfig,
    scene: &TrainedScene,
    feasible: &FeasibleSet,
    trial_seed: u64,
) -> Result<SchemeMetrics> {
    let power = dbm_to_milliwatts(cfg.power.p_dbm);
    let sigma2 = dbm_to_milliwatts(cfg.power.noise_dbm);
    let est = &scene.estimates[0];
    let n = est.n_elements();
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(trial_seed ^ 0x5EED_BCD0));
    let v0 = CVec::from_fn(n, |_, _| feasible.random_member(&mut rng));
    let tol = &cfg.solver_su;
    let (v, sweeps) = if feasible.is_fully_discrete() {
        let amps = feasible.amplitude_set().expect("discrete amplitudes");
        let phases = feasible.phase_set().expect("discrete phases");
        bcd_refine_discrete(&v0, est, power, sigma2, &amps, &phases, tol.eps_d, tol.max_sweeps)
    } else {
        bcd_refine_continuous(&v0, est, power, sigma2, tol.eps_c, tol.max_sweeps)
    };
    let rate = (1.0 + su_objective(&v, est, power, sigma2)).log2();
    Ok(metrics_from_parts(
        cfg,
        vec![rate],
        rate::eop(&v),
        0,
        sweeps,
        true,
        started.elapsed().as_secs_f64() * 1e3,
    ))
}

/// Runs the full pipeline for one seeded trial.
///
/// Every enabled scheme sees the same channel realization and the same
/// training noise; rates are evaluated against the true error statistics.
pub fn run_trial(
    cfg: &ExperimentConfig,
    kind: TrialKind,
    sweep_value: Option<f64>,
    seed: u64,
) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = train_scene(cfg, &mut rng)?;
    let mut record = TrialRecord {
        seed,
        sweep_value,
        normalized_mse: scene.normalized_mse,
        schemes: Vec::new(),
    };
    if kind == TrialKind::EstimateOnly {
        return Ok(record);
    }
    let force_mu = kind == TrialKind::SolveForceMu;
    let feasible = cfg.reflection.feasible_set();
    let power = dbm_to_milliwatts(cfg.power.p_dbm);
    let sigma2 = dbm_to_milliwatts(cfg.power.noise_dbm);
    let k = cfg.system.k_users;

    record
        .schemes
        .push(("proposed".into(), solve_proposed(cfg, &scene, &feasible, force_mu)?));

    let flags = cfg.experiment.baselines;
    if flags.no_irs {
        let started = std::time::Instant::now();
        let report = no_irs_baseline(
            &scene.estimates,
            power,
            &vec![sigma2; k],
            &vec![1.0; k],
            &cfg.solver_mu.mu_config(true),
        )?;
        record.schemes.push((
            "no_irs".into(),
            metrics_from_parts(
                cfg,
                report.per_user_rates,
                report.eop,
                report.inner_iterations,
                report.outer_iterations,
                report.converged,
                started.elapsed().as_secs_f64() * 1e3,
            ),
        ));
    }
    if flags.nonrobust {
        // The nonrobust baseline optimizes as if the estimates were exact
        // and is then scored against the true error statistics.
        let started = std::time::Instant::now();
        let report = pdd_solve(
            &scene.estimates,
            power,
            &vec![sigma2; k],
            &vec![1.0; k],
            &feasible,
            &cfg.solver_mu.mu_config(false),
        )?;
        record.schemes.push((
            "nonrobust".into(),
            metrics_from_parts(
                cfg,
                report.per_user_rates,
                report.eop,
                report.inner_iterations,
                report.outer_iterations,
                report.converged,
                started.elapsed().as_secs_f64() * 1e3,
            ),
        ));
    }
    if flags.random_bcd {
        record
            .schemes
            .push(("random_bcd".into(), solve_random_bcd(cfg, &scene, &feasible, seed)?));
    }
    Ok(record)
}

/// One aggregated export row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AggregateRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n_trials: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var.sqrt())
}

fn aggregate_cell(
    rows: &mut Vec<AggregateRow>,
    param: &str,
    value: f64,
    scheme: &str,
    metric: &str,
    values: Vec<f64>,
) {
    let n = values.len();
    let (mean, std) = mean_std(&values);
    rows.push(AggregateRow {
        sweep_param: param.to_string(),
        sweep_value: value,
        scheme: scheme.to_string(),
        metric: metric.to_string(),
        mean,
        std,
        n_trials: n,
    });
}

/// Runs every `(sweep value, trial)` cell and aggregates per-scheme metrics
/// into mean/std rows. Aggregation order is fixed by (sweep index, scheme,
/// metric), so the output is deterministic regardless of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig, kind: TrialKind) -> Result<Vec<AggregateRow>> {
    cfg.validate()?;
    let (param, values): (String, Vec<f64>) = match &cfg.sweep {
        Some(s) => (s.parameter.clone(), s.values.clone()),
        None => ("none".into(), vec![0.0]),
    };
    let mut rows = Vec::new();
    for (sweep_idx, &value) in values.iter().enumerate() {
        let point_cfg = if cfg.sweep.is_some() {
            cfg.with_sweep_value(&param, value)?
        } else {
            cfg.clone()
        };
        let trials = point_cfg.experiment.trials;
        let records: Vec<TrialRecord> = (0..trials)
            .into_par_iter()
            .map(|trial_idx| {
                let seed = derive_trial_seed(cfg.experiment.master_seed, sweep_idx, trial_idx);
                run_trial(&point_cfg, kind, Some(value), seed)
            })
            .collect::<Result<Vec<_>>>()?;

        aggregate_cell(
            &mut rows,
            &param,
            value,
            "estimate",
            "normalized_mse",
            records.iter().map(|r| r.normalized_mse).collect(),
        );
        if kind == TrialKind::EstimateOnly {
            continue;
        }
        let scheme_names: Vec<String> =
            records[0].schemes.iter().map(|(name, _)| name.clone()).collect();
        for scheme in &scheme_names {
            let metric_of = |f: &dyn Fn(&SchemeMetrics) -> f64| -> Vec<f64> {
                records
                    .iter()
                    .map(|r| {
                        let (_, m) = r
                            .schemes
                            .iter()
                            .find(|(name, _)| name == scheme)
                            .expect("scheme present in every trial");
                        f(m)
                    })
                    .collect()
            };
            aggregate_cell(&mut rows, &param, value, scheme, "sum_rate", metric_of(&|m| m.sum_rate));
            aggregate_cell(
                &mut rows,
                &param,
                value,
                scheme,
                "effective_sum_rate",
                metric_of(&|m| m.effective_sum_rate),
            );
            aggregate_cell(&mut rows, &param, value, scheme, "eop_percent", metric_of(&|m| m.eop));
            for user in 0..point_cfg.system.k_users {
                aggregate_cell(
                    &mut rows,
                    &param,
                    value,
                    scheme,
                    &format!("rate_user_{user}"),
                    metric_of(&|m| m.per_user_rates[user]),
                );
            }
            aggregate_cell(
                &mut rows,
                &param,
                value,
                scheme,
                "inner_iterations",
                metric_of(&|m| m.inner_iterations as f64),
            );
            aggregate_cell(
                &mut rows,
                &param,
                value,
                scheme,
                "outer_iterations",
                metric_of(&|m| m.outer_iterations as f64),
            );
            aggregate_cell(
                &mut rows,
                &param,
                value,
                scheme,
                "converged_fraction",
                metric_of(&|m| if m.converged { 1.0 } else { 0.0 }),
            );
        }
    }
    Ok(rows)
}

/// Convenience check used by tests and the high-power sanity example: with
/// near-perfect training, robust and nonrobust designs coincide.
pub fn robust_nonrobust_gap(record: &TrialRecord) -> Option<f64> {
    let get = |name: &str| {
        record
            .schemes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m.sum_rate)
    };
    match (get("proposed"), get("nonrobust")) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(extra: &str) -> ExperimentConfig {
        let base = "
[system]
k_users = 1
ap_antennas = 2
irs_elements = 4
frame_symbols = 200

[experiment]
trials = 3
master_seed = 7
";
        ExperimentConfig::from_toml_str(&format!("{base}\n{extra}")).unwrap()
    }

    #[test]
    fn trial_seeds_are_deterministic_and_spread() {
        let a = derive_trial_seed(1, 0, 0);
        let b = derive_trial_seed(1, 0, 0);
        assert_eq!(a, b);
        assert_ne!(derive_trial_seed(1, 0, 0), derive_trial_seed(1, 0, 1));
        assert_ne!(derive_trial_seed(1, 0, 0), derive_trial_seed(1, 1, 0));
        assert_ne!(derive_trial_seed(1, 0, 0), derive_trial_seed(2, 0, 0));
    }

    #[test]
    fn identical_seeds_reproduce_records() {
        let cfg = tiny_config("");
        let a = run_trial(&cfg, TrialKind::Solve, None, 99).unwrap();
        let b = run_trial(&cfg, TrialKind::Solve, None, 99).unwrap();
        assert_eq!(a.normalized_mse, b.normalized_mse);
        assert_eq!(a.schemes[0].1.sum_rate, b.schemes[0].1.sum_rate);
        assert_eq!(a.schemes[0].1.eop, b.schemes[0].1.eop);
    }

    #[test]
    fn overhead_factor_is_exact() {
        let cfg = tiny_config("");
        let record = run_trial(&cfg, TrialKind::Solve, None, 3).unwrap();
        let m = &record.schemes[0].1;
        let t0 = cfg.system.frame_symbols as f64;
        let expected = m.sum_rate * (t0 - cfg.n_pilots() as f64) / t0;
        assert!((m.effective_sum_rate - expected).abs() < 1e-15);
    }

    #[test]
    fn vanishing_error_limit_aligns_robust_and_nonrobust() {
        // p_u at 60 dBm makes training errors negligible. Two users keep
        // both schemes on the same (PDD) algorithm, so any rate gap is due
        // to the error statistics alone.
        let cfg = ExperimentConfig::from_toml_str(
            "
[system]
k_users = 2
ap_antennas = 2
irs_elements = 4
frame_symbols = 200

[experiment]
trials = 3
master_seed = 7

[power]
p_u_dbm = 60.0

[experiment.baselines]
nonrobust = true
",
        )
        .unwrap();
        let mut worst_gap: f64 = 0.0;
        for trial in 0..3 {
            let record = run_trial(&cfg, TrialKind::Solve, None, 1000 + trial).unwrap();
            assert!(record.normalized_mse < 1e-4, "nmse {}", record.normalized_mse);
            let gap = robust_nonrobust_gap(&record).unwrap();
            let scale = record.schemes[0].1.sum_rate;
            worst_gap = worst_gap.max(gap.abs() / scale);
        }
        assert!(worst_gap < 0.01, "relative robust/nonrobust gap {worst_gap}");
    }

    #[test]
    fn estimate_only_skips_solvers() {
        let cfg = tiny_config("");
        let record = run_trial(&cfg, TrialKind::EstimateOnly, None, 5).unwrap();
        assert!(record.schemes.is_empty());
        assert!(record.normalized_mse > 0.0);
    }

    #[test]
    fn sweep_without_sweep_table_is_single_point() {
        let cfg = tiny_config("");
        let rows = run_sweep(&cfg, TrialKind::EstimateOnly).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].sweep_param, "none");
        assert_eq!(rows[0].n_trials, 3);
    }

    #[test]
    fn mse_decreases_across_training_power_sweep() {
        let cfg = tiny_config("[sweep]\nparameter = \"p_u_dbm\"\nvalues = [0.0, 10.0, 20.0]\n");
        let rows = run_sweep(&cfg, TrialKind::EstimateOnly).unwrap();
        let mse: Vec<f64> = rows.iter().filter(|r| r.metric == "normalized_mse").map(|r| r.mean).collect();
        assert_eq!(mse.len(), 3);
        assert!(mse[0] > mse[1] && mse[1] > mse[2], "{mse:?}");
    }

    #[test]
    fn aggregates_of_constant_metric() {
        let values = [2.5, 2.5, 2.5];
        let (mean, std) = mean_std(&values);
        assert_eq!(mean, 2.5);
        assert_eq!(std, 0.0);
        let (mean, std) = mean_std(&[4.0]);
        assert_eq!(mean, 4.0);
        assert_eq!(std, 0.0);
    }

    #[test]
    fn all_baselines_run_and_report() {
        let cfg = tiny_config(
            "[experiment.baselines]\nno_irs = true\nnonrobust = true\nrandom_bcd = true\n",
        );
        let record = run_trial(&cfg, TrialKind::Solve, None, 11).unwrap();
        let names: Vec<&str> = record.schemes.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["proposed", "no_irs", "nonrobust", "random_bcd"]);
        for (_, m) in &record.schemes {
            assert!(m.sum_rate >= 0.0);
            assert!(m.eop >= 0.0 && m.eop <= 100.0);
        }
    }

    #[test]
    fn sweep_rows_are_scheduling_independent() {
        // Two runs of the same sweep must agree exactly even though trials
        // execute on a thread pool.
        let cfg = tiny_config("[sweep]\nparameter = \"p_u_dbm\"\nvalues = [5.0, 15.0]\n");
        let a = run_sweep(&cfg, TrialKind::Solve).unwrap();
        let b = run_sweep(&cfg, TrialKind::Solve).unwrap();
        assert_eq!(a, b);
    }
}
