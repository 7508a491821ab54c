//! Single-user reflection optimization.
//!
//! The target is the MRT-reduced SINR ratio
//!
//! ```text
//!          P |H_hat^H v + h_d_hat|^2
//! F(v) = ------------------------------------
//!         P [1; v]^H V_bar [1; v] + sigma^2
//! ```
//!
//! maximized over per-element feasible sets. The main solver relaxes the
//! discrete constraints onto an auxiliary copy `u`, penalizes `|v - u|^2 / beta`
//! inside the denominator, and alternates a Dinkelbach step (ratio variable
//! `y`), a BSUM quadratic step for `v` (norm-ball constrained, dual variable
//! found by bisection) and a per-element projection for `u`, shrinking
//! `beta` until the copies agree. A final block-coordinate sweep refines each
//! coefficient by exhaustive search (discrete sets) or by enumerating the
//! stationary points of the per-element rational objective (continuous
//! sets).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{bisection_root, hermitian_solve, CMat, CVec};
use crate::rate::{circular_distance, eop, FeasibleSet};
use crate::training::ChannelEstimate;

/// Parameters of the penalized Dinkelbach-BSUM loop.
#[derive(Debug, Clone)]
pub struct SuSolverConfig {
    /// Initial penalty coefficient.
    pub beta0: f64,
    /// Multiplicative penalty shrink factor in (0, 1).
    pub shrink: f64,
    /// Relative tolerance on the Dinkelbach variable (inner loop) and on the
    /// coordinate-refinement objective in the discrete case.
    pub eps_d: f64,
    /// Infinity-norm tolerance on the constraint violation `|v - u|`.
    pub eps_p: f64,
    /// Relative tolerance of the continuous coordinate refinement.
    pub eps_c: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_sweeps: usize,
    /// Radius of the norm-ball safeguard on `v`; defaults to `N`.
    pub radius: Option<f64>,
    pub init: SuInit,
}

impl Default for SuSolverConfig {
    fn default() -> Self {
        Self {
            beta0: 10.0,
            shrink: 0.6,
            eps_d: 1e-4,
            eps_p: 1e-4,
            eps_c: 1e-4,
            max_inner: 100,
            max_outer: 60,
            max_sweeps: 50,
            radius: None,
            init: SuInit::Ones,
        }
    }
}

/// Starting point of the penalty loop.
#[derive(Debug, Clone, Copy)]
pub enum SuInit {
    /// Full reflection at zero phase (projected into the feasible set).
    Ones,
    /// Random feasible phases at full amplitude, seeded for reproducibility.
    Random(u64),
}

/// Outcome of a single-user solve.
#[derive(Debug, Clone)]
pub struct SuSolveReport {
    pub v: CVec,
    pub w: CVec,
    /// Dinkelbach-variable trace, one inner sequence per outer iteration.
    pub y_trace: Vec<Vec<f64>>,
    /// `|v - u|_inf` after each outer iteration.
    pub violation_trace: Vec<f64>,
    /// Achievable rate at the final reflection vector (bits).
    pub rate: f64,
    pub eop: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub bcd_sweeps: usize,
    pub converged: bool,
}

/// Maximum-ratio transmission: `w = sqrt(P) h / |h|`.
pub fn mrt_precoder(h_eff: &CVec, power: f64) -> Result<CVec> {
    let norm = h_eff.norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("mrt_precoder: zero effective channel".into()));
    }
    if power < 0.0 {
        return Err(Error::InvalidArgument(format!("mrt_precoder: power {power} is negative")));
    }
    Ok(h_eff * Complex64::new(power.sqrt() / norm, 0.0))
}

/// The single-user SINR ratio `F(v)` (MRT precoding folded in).
pub fn su_objective(v: &CVec, estimate: &ChannelEstimate, power: f64, sigma2: f64) -> f64 {
    let signal = estimate.effective_channel(v).norm_squared();
    power * signal / (power * estimate.csi_penalty(v) + sigma2)
}

/// Dinkelbach variable update: the penalized ratio evaluated at `(v, u)`.
pub fn dinkelbach_y(
    v: &CVec,
    u: &CVec,
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    beta: f64,
) -> f64 {
    let signal = estimate.effective_channel(v).norm_squared();
    let penalty = (v - u).norm_squared() / beta;
    power * signal / (power * estimate.csi_penalty(v) + sigma2 + penalty)
}

/// Solves the norm-ball constrained quadratic surrogate for `v`.
///
/// The unconstrained stationary point is
/// `(y P R + (y/beta + mu) I)^{-1} (y/beta u + P H_hat H_hat^H v_prev + P H_hat h_d_hat - y P r)`
/// with `mu = 0`; when its norm exceeds the ball radius the dual `mu` is
/// raised by bisection until the norm meets the radius.
pub fn update_v_su(
    v_prev: &CVec,
    u: &CVec,
    y: f64,
    estimate: &ChannelEstimate,
    power: f64,
    beta: f64,
    radius: f64,
) -> Result<CVec> {
    let n = v_prev.len();
    let h_hat = estimate.cascaded();
    let h_d = estimate.direct();
    // P H_hat (H_hat^H v_prev + h_d_hat)
    let channel_pull = &h_hat * (h_hat.ad_mul(v_prev) + &h_d) * Complex64::new(power, 0.0);
    let mut rhs = channel_pull;
    let r_vec = estimate.r_vec();
    for i in 0..n {
        rhs[i] += u[i] * (y / beta) - r_vec[i] * (y * power);
    }

    if y <= 0.0 {
        // Degenerate ratio: the surrogate is linear. Follow the pull
        // direction to the boundary, or stay at u when there is nothing to
        // follow.
        let norm = rhs.norm();
        if norm < 1e-300 {
            let u_norm = u.norm();
            return Ok(if u_norm <= radius { u.clone() } else { u * Complex64::new(radius / u_norm, 0.0) });
        }
        return Ok(&rhs * Complex64::new(radius / norm, 0.0));
    }

    let base = estimate.r_mat() * Complex64::new(y * power, 0.0);
    let solve_with = |mu: f64| -> Result<CVec> {
        let mut m = base.clone();
        let shift = Complex64::new(y / beta + mu, 0.0);
        for i in 0..n {
            m[(i, i)] += shift;
        }
        hermitian_solve(&m, &rhs)
    };

    let v0 = solve_with(0.0)?;
    if v0.norm() <= radius {
        return Ok(v0);
    }
    let norm_at = |mu: f64| solve_with(mu).map(|v| v.norm()).unwrap_or(f64::INFINITY);
    let tol = 1e-8_f64.min(1e-12 * radius.max(1.0));
    let mu = bisection_root(norm_at, radius, 0.0, tol)?;
    solve_with(mu)
}

/// Projects `x` onto the discrete set `{a e^{j theta}}`: nearest phase in
/// wrap-around distance first, then nearest amplitude along that phase.
/// Ties break toward the smaller phase, then the smaller amplitude.
pub fn project_discrete(x: Complex64, amplitudes: &[f64], phases: &[f64]) -> Complex64 {
    let angle = x.arg();
    let mut theta = phases[0];
    let mut best_d = circular_distance(angle, phases[0]);
    for &p in &phases[1..] {
        let d = circular_distance(angle, p);
        if d < best_d {
            theta = p;
            best_d = d;
        }
    }
    let mut best = Complex64::from_polar(amplitudes[0], theta);
    let mut best_dist = (best - x).norm();
    for &a in &amplitudes[1..] {
        let cand = Complex64::from_polar(a, theta);
        let d = (cand - x).norm();
        if d < best_dist {
            best = cand;
            best_dist = d;
        }
    }
    best
}

fn initial_reflection(n: usize, feasible: &FeasibleSet, init: SuInit) -> CVec {
    match init {
        SuInit::Ones => CVec::from_element(n, feasible.project(Complex64::new(1.0, 0.0))),
        SuInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            CVec::from_fn(n, |_, _| feasible.random_member(&mut rng))
        }
    }
}

struct PenaltyOutcome {
    u: CVec,
    y_trace: Vec<Vec<f64>>,
    violation_trace: Vec<f64>,
    outer_iterations: usize,
    inner_iterations: usize,
    converged: bool,
}

/// Shared penalized Dinkelbach-BSUM loop; the feasible set only enters via
/// the per-entry projection.
fn penalty_loop(
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    feasible: &FeasibleSet,
    config: &SuSolverConfig,
) -> Result<PenaltyOutcome> {
    let n = estimate.n_elements();
    let radius = config.radius.unwrap_or(n as f64);
    let mut v = initial_reflection(n, feasible, config.init);
    let mut u = v.clone();
    let mut beta = config.beta0;
    let mut y = dinkelbach_y(&v, &u, estimate, power, sigma2, beta);

    let mut y_trace = Vec::new();
    let mut violation_trace = Vec::new();
    let mut inner_total = 0usize;
    let mut outer = 0usize;
    let mut converged = false;

    while outer < config.max_outer {
        outer += 1;
        let mut inner_trace = Vec::new();
        for _ in 0..config.max_inner {
            v = update_v_su(&v, &u, y, estimate, power, beta, radius)?;
            for i in 0..n {
                u[i] = feasible.project(v[i]);
            }
            let y_next = dinkelbach_y(&v, &u, estimate, power, sigma2, beta);
            inner_trace.push(y_next);
            inner_total += 1;
            let rel = (y_next - y).abs() / y.abs().max(1e-300);
            y = y_next;
            if rel < config.eps_d {
                break;
            }
        }
        y_trace.push(inner_trace);
        let violation = (0..n).map(|i| (v[i] - u[i]).norm()).fold(0.0, f64::max);
        violation_trace.push(violation);
        if violation <= config.eps_p {
            converged = true;
            break;
        }
        beta *= config.shrink;
    }

    Ok(PenaltyOutcome {
        u,
        y_trace,
        violation_trace,
        outer_iterations: outer,
        inner_iterations: inner_total,
        converged,
    })
}

/// Coordinate refinement over a discrete feasible set: each element is set
/// to the exhaustive best of its `|A| x |S|` candidates, sweeping until the
/// relative objective gain drops below `eps`.
pub fn bcd_refine_discrete(
    v0: &CVec,
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    amplitudes: &[f64],
    phases: &[f64],
    eps: f64,
    max_sweeps: usize,
) -> (CVec, usize) {
    let n = v0.len();
    let mut v = v0.clone();
    let mut objective = su_objective(&v, estimate, power, sigma2);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let start = objective;
        for elem in 0..n {
            let current = v[elem];
            let mut best = current;
            let mut best_obj = objective;
            for &a in amplitudes {
                for &theta in phases {
                    let cand = Complex64::from_polar(a, theta);
                    if cand == current {
                        continue;
                    }
                    v[elem] = cand;
                    let obj = su_objective(&v, estimate, power, sigma2);
                    if obj > best_obj {
                        best_obj = obj;
                        best = cand;
                    }
                }
            }
            v[elem] = best;
            debug_assert!(best_obj >= objective - 1e-9 * objective.abs().max(1.0));
            objective = best_obj;
        }
        if (objective - start) < eps * start.abs().max(1e-300) {
            break;
        }
    }
    (v, sweeps)
}

/// Optimal coefficient of element `n` with every other coefficient frozen,
/// over the continuous disc `|v_n| <= 1`.
///
/// Enumerates the stationary points of the per-element rational objective:
/// the roots of the interior quadratic, both branches of the boundary
/// phase equation, the off state and the incumbent; the candidate with the
/// best objective wins (ties toward the off state).
pub fn per_element_continuous(
    n: usize,
    v: &CVec,
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
) -> Complex64 {
    // Masked quantities: contributions of every coefficient except v_n.
    let mut masked = v.clone();
    masked[n] = Complex64::new(0.0, 0.0);
    let h_masked = estimate.effective_channel(&masked);

    // Signal-side row of the quadratic form: row n+1 of H_bar.
    let h_bar = estimate.h_bar();
    let m_idx = n + 1;
    let m_dim = estimate.n_antennas();
    let mut x = Complex64::new(0.0, 0.0); // sum_j Phi[m,j] vt_j over j != m
    let mut a_nn = 0.0;
    for t in 0..m_dim {
        let row_entry = h_bar[(m_idx, t)];
        x += row_entry * h_masked[t];
        a_nn += row_entry.norm_sqr();
    }
    let z = h_masked.norm_squared();

    // Error-side quantities from V_bar.
    let v_bar = estimate.v_bar();
    let ext = crate::training::extend_reflection(&masked);
    let mut x_t = Complex64::new(0.0, 0.0);
    for j in 0..ext.nrows() {
        if j != m_idx {
            x_t += v_bar[(m_idx, j)] * ext[(j, 0)];
        }
    }
    let b_nn = v_bar[(m_idx, m_idx)].re;
    let mut z_t = 0.0;
    for i in 0..ext.nrows() {
        if i == m_idx {
            continue;
        }
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..ext.nrows() {
            if j != m_idx {
                row += v_bar[(i, j)] * ext[(j, 0)];
            }
        }
        z_t += (ext[(i, 0)].conj() * row).re;
    }

    let p = power;
    let objective = |vn: Complex64| -> f64 {
        let num = vn.norm_sqr() * a_nn + 2.0 * (vn.conj() * x).re + z;
        let den = vn.norm_sqr() * b_nn + 2.0 * (vn.conj() * x_t).re + z_t;
        p * num / (p * den + sigma2)
    };

    let mut candidates: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];

    // Interior stationary points: roots of the complex quadratic
    // a2 v^2 + a1 v + a0 = 0 from the first-order condition.
    let p2 = p * p;
    let a2 = x_t.conj() * (p2 * a_nn) - x.conj() * (p2 * b_nn);
    let a1 = Complex64::new(p2 * a_nn * z_t + p * a_nn * sigma2 - p2 * b_nn * z, 0.0)
        + x * x_t.conj() * p2
        - x_t * x.conj() * p2;
    let a0 = x * (p2 * z_t + p * sigma2) - x_t * (p2 * z);
    let scale = a1.norm() + a0.norm() + 1e-300;
    if a2.norm() > 1e-14 * scale {
        let disc = (a1 * a1 - a2 * a0 * 4.0).sqrt();
        // Numerically stable pairing of the two roots.
        let q = if (a1 + disc).norm() >= (a1 - disc).norm() {
            (a1 + disc) * -0.5
        } else {
            (a1 - disc) * -0.5
        };
        if q.norm() > 0.0 {
            for root in [q / a2, a0 / q] {
                if root.norm() < 1.0 {
                    candidates.push(root);
                }
            }
        }
    } else if a1.norm() > 1e-300 {
        let root = -a0 / a1;
        if root.norm() < 1.0 {
            candidates.push(root);
        }
    }

    // Boundary |v_n| = 1, parameterized v_n = e^{-j theta}: stationary phases
    // solve 2 rho cos(theta + psi) + c = 0.
    let a_t = p * a_nn + p * z;
    let b_t = p * b_nn + p * z_t + sigma2;
    let j = Complex64::new(0.0, 1.0);
    let w = j * x * (p * b_t) - j * x_t * (p * a_t);
    let rho = w.norm();
    let c = -4.0 * p2 * (x * x_t.conj()).im;
    if rho > 1e-300 {
        let psi = w.arg();
        let base = (-c / (2.0 * rho)).clamp(-1.0, 1.0).acos();
        for theta in [base - psi, -base - psi] {
            candidates.push(Complex64::from_polar(1.0, -theta));
        }
    } else {
        // Flat boundary derivative; any phase is stationary.
        candidates.push(Complex64::new(1.0, 0.0));
    }

    // Keep the incumbent so a sweep can never regress; clamp it in case the
    // caller handed in a point outside the disc.
    let incumbent_norm = v[n].norm();
    candidates.push(if incumbent_norm <= 1.0 { v[n] } else { v[n] / incumbent_norm });

    let mut best = candidates[0];
    let mut best_obj = objective(candidates[0]);
    for &cand in &candidates[1..] {
        let obj = objective(cand);
        if obj > best_obj {
            best_obj = obj;
            best = cand;
        }
    }
    best
}

/// Coordinate refinement with the continuous per-element update.
pub fn bcd_refine_continuous(
    v0: &CVec,
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    eps: f64,
    max_sweeps: usize,
) -> (CVec, usize) {
    let mut v = v0.clone();
    let mut objective = su_objective(&v, estimate, power, sigma2);
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let start = objective;
        for elem in 0..v.len() {
            v[elem] = per_element_continuous(elem, &v, estimate, power, sigma2);
            let obj = su_objective(&v, estimate, power, sigma2);
            debug_assert!(obj >= objective - 1e-9 * objective.abs().max(1.0));
            objective = obj;
        }
        if (objective - start) < eps * start.abs().max(1e-300) {
            break;
        }
    }
    (v, sweeps)
}

fn finish_report(
    v: CVec,
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    outcome: PenaltyOutcome,
    sweeps: usize,
) -> Result<SuSolveReport> {
    let h_eff = estimate.effective_channel(&v);
    let w = mrt_precoder(&h_eff, power)?;
    let rate = (1.0 + su_objective(&v, estimate, power, sigma2)).log2();
    Ok(SuSolveReport {
        eop: eop(&v),
        v,
        w,
        y_trace: outcome.y_trace,
        violation_trace: outcome.violation_trace,
        rate,
        outer_iterations: outcome.outer_iterations,
        inner_iterations: outcome.inner_iterations,
        bcd_sweeps: sweeps,
        converged: outcome.converged,
    })
}

/// Full single-user solve over a discrete feasible set.
pub fn solve_su_discrete(
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    feasible: &FeasibleSet,
    config: &SuSolverConfig,
) -> Result<SuSolveReport> {
    if !feasible.is_fully_discrete() {
        return Err(Error::InvalidArgument(
            "solve_su_discrete: feasible set must have discrete amplitude and phase".into(),
        ));
    }
    let amplitudes = feasible.amplitude_set().expect("discrete amplitudes");
    let phases = feasible.phase_set().expect("discrete phases");
    let outcome = penalty_loop(estimate, power, sigma2, feasible, config)?;
    let (v, sweeps) = bcd_refine_discrete(
        &outcome.u,
        estimate,
        power,
        sigma2,
        &amplitudes,
        &phases,
        config.eps_d,
        config.max_sweeps,
    );
    finish_report(v, estimate, power, sigma2, outcome, sweeps)
}

/// Full single-user solve over the continuous feasible set (unit disc per
/// element).
pub fn solve_su_continuous(
    estimate: &ChannelEstimate,
    power: f64,
    sigma2: f64,
    config: &SuSolverConfig,
) -> Result<SuSolveReport> {
    let feasible = FeasibleSet::continuous();
    let outcome = penalty_loop(estimate, power, sigma2, &feasible, config)?;
    let (v, sweeps) = bcd_refine_continuous(
        &outcome.u,
        estimate,
        power,
        sigma2,
        config.eps_c,
        config.max_sweeps,
    );
    finish_report(v, estimate, power, sigma2, outcome, sweeps)
}
