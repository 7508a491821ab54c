//! Multiuser weighted sum-rate maximization via penalty dual decomposition
//! around weighted-MMSE block updates.
//!
//! The sum-rate objective is replaced by the weighted MSE objective
//! `sum_k alpha_k (q_k e_k - ln q_k)`, which shares its optima with the rate
//! problem once the receive scalars `g_k` and weights `q_k` are optimized.
//! The discrete reflection constraint is split onto a copy `u`, and the
//! augmented Lagrangian
//!
//! ```text
//! L = sum_k alpha_k (q_k e_k - ln q_k) + |v - u + beta mu|^2 / (2 beta)
//! ```
//!
//! is minimized block by block (`g -> q -> w -> v -> u`, each in closed form
//! or by bisection) in the inner loop, while the outer loop updates the dual
//! vector `mu`, shrinks `beta` and stops once `|v - u|_inf` is small. Every
//! block update is an exact minimizer, so `L` never increases inside an
//! inner loop.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{bisection_root, hermitian_solve, pseudo_inverse, CMat, CVec};
use crate::rate::{self, eop, FeasibleSet, PrecoderSet, ReflectionState};
use crate::solver_su::mrt_precoder;
use crate::training::ChannelEstimate;

/// Parameters of the PDD loop.
#[derive(Debug, Clone)]
pub struct MuSolverConfig {
    pub beta0: f64,
    /// Multiplicative penalty shrink factor in (0, 1).
    pub shrink: f64,
    /// Relative tolerance on the augmented-Lagrangian value (inner loop).
    pub eps_in: f64,
    /// Infinity-norm tolerance on `|v - u|` (outer loop).
    pub eps_out: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// When false, the optimizer sees zeroed error covariances; reported
    /// rates always use the true statistics.
    pub robust: bool,
}

impl Default for MuSolverConfig {
    fn default() -> Self {
        Self {
            beta0: 10.0,
            shrink: 0.6,
            eps_in: 1e-4,
            eps_out: 1e-4,
            max_inner: 200,
            max_outer: 50,
            robust: true,
        }
    }
}

/// Outcome of a multiuser solve.
#[derive(Debug, Clone)]
pub struct MuSolveReport {
    pub precoders: Vec<CVec>,
    pub v: CVec,
    pub per_user_rates: Vec<f64>,
    pub weighted_sum_rate: f64,
    /// Augmented-Lagrangian value after each of the five block updates, one
    /// `[g, q, w, v, u]` record per inner iteration, grouped per outer
    /// iteration.
    pub al_trace: Vec<Vec<[f64; 5]>>,
    pub violation_trace: Vec<f64>,
    pub eop: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
}

/// Per-user MSE for explicit receive/weight scalars (natural-log WMMSE
/// bookkeeping lives here, rates stay base-2).
fn weighted_mse_objective(
    g: &[Complex64],
    q: &[f64],
    v: &CVec,
    precoders: &PrecoderSet,
    estimates: &[ChannelEstimate],
) -> f64 {
    let mut total = 0.0;
    for k in 0..estimates.len() {
        let e = rate::mse(k, g[k], v, precoders, &estimates[k]);
        total += precoders.weights[k] * (q[k] * e - q[k].ln());
    }
    total
}

/// Augmented-Lagrangian value of the current block iterates.
pub fn al_objective(
    g: &[Complex64],
    q: &[f64],
    v: &CVec,
    u: &CVec,
    dual: &CVec,
    beta: f64,
    precoders: &PrecoderSet,
    estimates: &[ChannelEstimate],
) -> f64 {
    let mut penalty = 0.0;
    for i in 0..v.len() {
        penalty += (v[i] - u[i] + dual[i] * beta).norm_sqr();
    }
    weighted_mse_objective(g, q, v, precoders, estimates) + penalty / (2.0 * beta)
}

/// Precoder block: `w_k(nu) = alpha_k q_k (B + nu I)^{-1} h_k g_k` with the
/// shared matrix `B` collecting every user's quadratic MSE terms; `nu` is
/// raised by bisection until the power budget holds.
pub fn update_precoders(
    v: &CVec,
    g: &[Complex64],
    q: &[f64],
    estimates: &[ChannelEstimate],
    weights: &[f64],
    power: f64,
) -> Result<Vec<CVec>> {
    let k_users = estimates.len();
    let m_dim = estimates[0].n_antennas();
    let mut base = CMat::zeros(m_dim, m_dim);
    let mut shift = 0.0;
    let mut rhs: Vec<CVec> = Vec::with_capacity(k_users);
    let mut h_effs: Vec<CVec> = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let h_eff = estimates[k].effective_channel(v);
        let coeff = weights[k] * q[k] * g[k].norm_sqr();
        base += &h_eff * h_eff.adjoint() * Complex64::new(coeff, 0.0);
        shift += coeff * estimates[k].csi_penalty(v);
        rhs.push(&h_eff * (g[k] * weights[k] * q[k]));
        h_effs.push(h_eff);
    }
    for i in 0..m_dim {
        base[(i, i)] += Complex64::new(shift, 0.0);
    }

    if rhs.iter().all(|r| r.norm() == 0.0) {
        return Ok(vec![CVec::zeros(m_dim); k_users]);
    }

    let solve_all = |nu: f64| -> Result<Vec<CVec>> {
        let mut m = base.clone();
        for i in 0..m_dim {
            m[(i, i)] += Complex64::new(nu, 0.0);
        }
        rhs.iter().map(|r| hermitian_solve(&m, r)).collect()
    };

    let w0 = match solve_all(0.0) {
        Ok(w) => w,
        Err(_) => {
            // Zero CSI penalty with fewer users than antennas leaves B
            // singular; the minimum-norm stationary point works instead.
            let pinv = pseudo_inverse(&base)?;
            rhs.iter().map(|r| (&pinv * r).column(0).into_owned()).collect()
        }
    };
    let total0: f64 = w0.iter().map(|w| w.norm_squared()).sum();
    if total0 <= power {
        return Ok(w0);
    }
    let power_at = |nu: f64| -> f64 {
        solve_all(nu)
            .map(|ws| ws.iter().map(|w| w.norm_squared()).sum())
            .unwrap_or(f64::INFINITY)
    };
    // Tight tolerance keeps the block update an exact minimizer up to
    // negligible slack, preserving the monotonicity of the inner loop.
    let nu = bisection_root(power_at, power, 0.0, 1e-13 * power)?;
    solve_all(nu)
}

/// Reflection block: unconstrained quadratic minimizer `v = C^{-1} d`.
pub fn update_v_mu(
    g: &[Complex64],
    q: &[f64],
    precoders: &[CVec],
    estimates: &[ChannelEstimate],
    weights: &[f64],
    u: &CVec,
    dual: &CVec,
    beta: f64,
) -> Result<CVec> {
    let n = u.len();
    let k_users = estimates.len();
    let sum_power: f64 = precoders.iter().map(|w| w.norm_squared()).sum();
    let half_inv_beta = 1.0 / (2.0 * beta);

    let mut c_mat = CMat::zeros(n, n);
    let mut d_vec = CVec::zeros(n);
    for k in 0..k_users {
        let coeff = weights[k] * q[k] * g[k].norm_sqr();
        if g[k].norm_sqr() == 0.0 {
            continue;
        }
        let h_hat = estimates[k].cascaded();
        let h_d = estimates[k].direct();
        // B_k = H_hat_k [w_1 ... w_K]  (N x K)
        let mut b_k = CMat::zeros(n, k_users);
        for (j, w) in precoders.iter().enumerate() {
            let col = &h_hat * w;
            b_k.column_mut(j).copy_from(&col);
        }
        c_mat += &b_k * b_k.adjoint() * Complex64::new(coeff, 0.0);
        c_mat += estimates[k].r_mat() * Complex64::new(coeff * sum_power, 0.0);

        // d contributions: -coeff sum_j H w_j w_j^H h_d + alpha q conj(g) H w_k
        //                  - coeff sum_power r_k
        let mut wh = CVec::zeros(k_users);
        for (j, w) in precoders.iter().enumerate() {
            wh[j] = w.dotc(&h_d); // w_j^H h_d
        }
        d_vec -= (&b_k * wh) * Complex64::new(coeff, 0.0);
        d_vec += (&h_hat * &precoders[k]) * (g[k].conj() * (weights[k] * q[k]));
        d_vec -= estimates[k].r_vec() * Complex64::new(coeff * sum_power, 0.0);
    }
    for i in 0..n {
        c_mat[(i, i)] += Complex64::new(half_inv_beta, 0.0);
        d_vec[i] += (u[i] - dual[i] * beta) * half_inv_beta;
    }
    hermitian_solve(&c_mat, &d_vec)
}

/// Copy block: per-entry projection of `v + beta mu` onto the feasible set.
pub fn update_u_mu(v: &CVec, dual: &CVec, beta: f64, feasible: &FeasibleSet) -> CVec {
    CVec::from_fn(v.len(), |i, _| feasible.project(v[i] + dual[i] * beta))
}

/// Dual ascent step `mu <- mu + (v - u) / beta`.
pub fn dual_update(dual: &CVec, v: &CVec, u: &CVec, beta: f64) -> CVec {
    CVec::from_fn(dual.len(), |i, _| dual[i] + (v[i] - u[i]) / beta)
}

fn initial_precoders(
    v: &CVec,
    estimates: &[ChannelEstimate],
    power: f64,
) -> Result<Vec<CVec>> {
    let k_users = estimates.len();
    let share = power / k_users as f64;
    estimates
        .iter()
        .map(|est| {
            let h_eff = est.effective_channel(v);
            if h_eff.norm() == 0.0 {
                let mut w = CVec::zeros(est.n_antennas());
                w[0] = Complex64::new(share.sqrt(), 0.0);
                Ok(w)
            } else {
                mrt_precoder(&h_eff, share)
            }
        })
        .collect()
}

fn evaluate_report(
    v_final: CVec,
    precoders: Vec<CVec>,
    estimates_true: &[ChannelEstimate],
    weights: &[f64],
    noise: &[f64],
    power: f64,
    al_trace: Vec<Vec<[f64; 5]>>,
    violation_trace: Vec<f64>,
    outer_iterations: usize,
    inner_iterations: usize,
    converged: bool,
) -> MuSolveReport {
    let pre = PrecoderSet {
        w: precoders,
        power_budget: power,
        weights: weights.to_vec(),
        noise: noise.to_vec(),
    };
    let per_user_rates: Vec<f64> = (0..estimates_true.len())
        .map(|k| rate::achievable_rate(k, &v_final, &pre, &estimates_true[k]))
        .collect();
    let weighted: f64 = per_user_rates.iter().zip(weights).map(|(r, a)| r * a).sum();
    MuSolveReport {
        precoders: pre.w,
        eop: eop(&v_final),
        v: v_final,
        per_user_rates,
        weighted_sum_rate: weighted,
        al_trace,
        violation_trace,
        outer_iterations,
        inner_iterations,
        converged,
    }
}

/// Full PDD solve of the weighted sum-rate problem.
///
/// Inner loop: exact block minimizers for `g`, `q`, `w`, `v`, `u` until the
/// augmented Lagrangian stalls. Outer loop: dual update, penalty shrink,
/// stop at `|v - u|_inf <= eps_out`. Iterates warm-start across outer
/// iterations. The report's reflection vector is the feasible copy `u`.
pub fn pdd_solve(
    estimates: &[ChannelEstimate],
    power: f64,
    noise: &[f64],
    weights: &[f64],
    feasible: &FeasibleSet,
    config: &MuSolverConfig,
) -> Result<MuSolveReport> {
    let k_users = estimates.len();
    if k_users == 0 {
        return Err(Error::InvalidArgument("pdd_solve: need at least one user".into()));
    }
    if noise.len() != k_users || weights.len() != k_users {
        return Err(Error::InvalidArgument(format!(
            "pdd_solve: {} users but {} noise powers and {} weights",
            k_users,
            noise.len(),
            weights.len()
        )));
    }
    let n = estimates[0].n_elements();
    let opt_estimates: Vec<ChannelEstimate> = if config.robust {
        estimates.to_vec()
    } else {
        estimates.iter().map(|e| e.without_error_statistics()).collect()
    };

    let mut state = ReflectionState::full_reflection(n, *feasible);
    let mut precoders = initial_precoders(&state.v, &opt_estimates, power)?;
    let mut g = vec![Complex64::new(0.0, 0.0); k_users];
    let mut q = vec![1.0; k_users];
    let mut beta = config.beta0;

    let mut al_trace: Vec<Vec<[f64; 5]>> = Vec::new();
    let mut violation_trace = Vec::new();
    let mut inner_total = 0usize;
    let mut outer = 0usize;
    let mut converged = false;

    while outer < config.max_outer {
        outer += 1;
        let mut inner_records = Vec::new();
        let mut previous_al = f64::INFINITY;
        for _ in 0..config.max_inner {
            let pre = PrecoderSet {
                w: precoders.clone(),
                power_budget: power,
                weights: weights.to_vec(),
                noise: noise.to_vec(),
            };
            for k in 0..k_users {
                g[k] = rate::mmse_receiver(k, &state.v, &pre, &opt_estimates[k]);
            }
            let al_g = al_objective(&g, &q, &state.v, &state.u, &state.dual, beta, &pre, &opt_estimates);
            for k in 0..k_users {
                let e = rate::mse(k, g[k], &state.v, &pre, &opt_estimates[k]);
                q[k] = 1.0 / e;
            }
            let al_q = al_objective(&g, &q, &state.v, &state.u, &state.dual, beta, &pre, &opt_estimates);

            precoders = update_precoders(&state.v, &g, &q, &opt_estimates, weights, power)?;
            let pre = PrecoderSet {
                w: precoders.clone(),
                power_budget: power,
                weights: weights.to_vec(),
                noise: noise.to_vec(),
            };
            let al_w = al_objective(&g, &q, &state.v, &state.u, &state.dual, beta, &pre, &opt_estimates);

            state.v = update_v_mu(&g, &q, &precoders, &opt_estimates, weights, &state.u, &state.dual, beta)?;
            let al_v = al_objective(&g, &q, &state.v, &state.u, &state.dual, beta, &pre, &opt_estimates);

            state.u = update_u_mu(&state.v, &state.dual, beta, feasible);
            let al_u = al_objective(&g, &q, &state.v, &state.u, &state.dual, beta, &pre, &opt_estimates);

            inner_records.push([al_g, al_q, al_w, al_v, al_u]);
            inner_total += 1;
            let rel = (previous_al - al_u).abs() / previous_al.abs().max(1e-300);
            previous_al = al_u;
            if rel < config.eps_in {
                break;
            }
        }
        al_trace.push(inner_records);
        state.dual = dual_update(&state.dual, &state.v, &state.u, beta);
        let violation = state.violation();
        violation_trace.push(violation);
        if violation <= config.eps_out {
            converged = true;
            break;
        }
        beta *= config.shrink;
    }

    // Deploy the feasible copy.
    let v_final = state.u.clone();
    Ok(evaluate_report(
        v_final,
        precoders,
        estimates,
        weights,
        noise,
        power,
        al_trace,
        violation_trace,
        outer,
        inner_total,
        converged,
    ))
}

/// Baseline without the IRS: the reflection vector is frozen at zero.
///
/// Single user reduces to MRT on the estimated direct channel; multiple
/// users run the WMMSE blocks (`g`, `q`, `w`) with `v = u = 0`.
pub fn no_irs_baseline(
    estimates: &[ChannelEstimate],
    power: f64,
    noise: &[f64],
    weights: &[f64],
    config: &MuSolverConfig,
) -> Result<MuSolveReport> {
    let k_users = estimates.len();
    if k_users == 0 {
        return Err(Error::InvalidArgument("no_irs_baseline: need at least one user".into()));
    }
    let n = estimates[0].n_elements();
    let v_zero = CVec::zeros(n);
    let opt_estimates: Vec<ChannelEstimate> = if config.robust {
        estimates.to_vec()
    } else {
        estimates.iter().map(|e| e.without_error_statistics()).collect()
    };

    if k_users == 1 {
        let w = mrt_precoder(&opt_estimates[0].direct(), power)?;
        return Ok(evaluate_report(
            v_zero,
            vec![w],
            estimates,
            weights,
            noise,
            power,
            Vec::new(),
            Vec::new(),
            0,
            0,
            true,
        ));
    }

    let dual = CVec::zeros(n);
    let mut precoders = initial_precoders(&v_zero, &opt_estimates, power)?;
    let mut g = vec![Complex64::new(0.0, 0.0); k_users];
    let mut q = vec![1.0; k_users];
    let beta = config.beta0;
    let mut inner_records = Vec::new();
    let mut previous_al = f64::INFINITY;
    let mut converged = false;
    let mut inner_total = 0;
    for _ in 0..config.max_inner {
        let pre = PrecoderSet {
            w: precoders.clone(),
            power_budget: power,
            weights: weights.to_vec(),
            noise: noise.to_vec(),
        };
        for k in 0..k_users {
            g[k] = rate::mmse_receiver(k, &v_zero, &pre, &opt_estimates[k]);
        }
        let al_g = al_objective(&g, &q, &v_zero, &v_zero, &dual, beta, &pre, &opt_estimates);
        for k in 0..k_users {
            let e = rate::mse(k, g[k], &v_zero, &pre, &opt_estimates[k]);
            q[k] = 1.0 / e;
        }
        let al_q = al_objective(&g, &q, &v_zero, &v_zero, &dual, beta, &pre, &opt_estimates);
        precoders = update_precoders(&v_zero, &g, &q, &opt_estimates, weights, power)?;
        let pre = PrecoderSet {
            w: precoders.clone(),
            power_budget: power,
            weights: weights.to_vec(),
            noise: noise.to_vec(),
        };
        let al_w = al_objective(&g, &q, &v_zero, &v_zero, &dual, beta, &pre, &opt_estimates);
        inner_records.push([al_g, al_q, al_w, al_w, al_w]);
        inner_total += 1;
        let rel = (previous_al - al_w).abs() / previous_al.abs().max(1e-300);
        previous_al = al_w;
        if rel < config.eps_in {
            converged = true;
            break;
        }
    }

    Ok(evaluate_report(
        v_zero,
        precoders,
        estimates,
        weights,
        noise,
        power,
        vec![inner_records],
        vec![0.0],
        1,
        inner_total,
        converged,
    ))
}
