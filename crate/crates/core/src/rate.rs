//! Objective evaluation: interference-plus-noise power under CSI errors,
//! the achievable-rate lower bound, the MMSE receiver / MSE pair used by the
//! weighted-MMSE reformulation, per-element amplitude rate profiles and
//! reporting metrics.
//!
//! For user `k` with reflection vector `v`, the estimated effective channel
//! is `h_k(v) = H_hat_k^H v + h_d_hat_k` and the interference-plus-noise
//! power is
//!
//! ```text
//! Psi_k = sum_{j != k} |h_k^H w_j|^2
//!       + ([1; v]^H V_bar_k [1; v]) * sum_j |w_j|^2 + sigma_k^2,
//! ```
//!
//! giving the rate lower bound `log2(1 + |h_k^H w_k|^2 / Psi_k)`. Rates are
//! reported in bits; MSE identities use natural logarithms internally.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::CVec;
use crate::training::ChannelEstimate;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Amplitudes below this threshold count as "off" for the EOP metric.
pub const EOP_THRESHOLD: f64 = 1e-9;

/// Discrete/continuous feasible set for a single reflection coefficient.
///
/// `q_a`/`q_theta` give the control resolution in bits; `None` means
/// continuous. With `q_a` bits the amplitude set is `{k / (2^q_a - 1)}`
/// (just `{1}` for zero bits); with `q_theta` bits the phase set is the
/// uniform `2^q_theta`-point grid on `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibleSet {
    pub q_a: Option<u32>,
    pub q_theta: Option<u32>,
}

impl FeasibleSet {
    pub fn discrete(q_a: u32, q_theta: u32) -> Self {
        Self { q_a: Some(q_a), q_theta: Some(q_theta) }
    }

    pub fn continuous() -> Self {
        Self { q_a: None, q_theta: None }
    }

    pub fn is_fully_discrete(&self) -> bool {
        self.q_a.is_some() && self.q_theta.is_some()
    }

    pub fn is_fully_continuous(&self) -> bool {
        self.q_a.is_none() && self.q_theta.is_none()
    }

    /// The sorted amplitude levels, or `None` when amplitude is continuous
    /// on `[0, 1]`.
    pub fn amplitude_set(&self) -> Option<Vec<f64>> {
        self.q_a.map(|bits| {
            if bits == 0 {
                vec![1.0]
            } else {
                let count = 1usize << bits.min(20);
                (0..count).map(|k| k as f64 / (count - 1) as f64).collect()
            }
        })
    }

    /// The sorted phase levels, or `None` when phase is continuous on
    /// `[0, 2pi)`.
    pub fn phase_set(&self) -> Option<Vec<f64>> {
        self.q_theta.map(|bits| {
            let count = 1usize << bits.min(20);
            (0..count).map(|l| TWO_PI * l as f64 / count as f64).collect()
        })
    }

    /// Projects `x` onto the feasible set (nearest point in Euclidean
    /// distance; phases compared with wrap-around distance, ties toward the
    /// smaller phase then the smaller amplitude).
    pub fn project(&self, x: Complex64) -> Complex64 {
        match (self.amplitude_set(), self.phase_set()) {
            (Some(amps), Some(phases)) => crate::solver_su::project_discrete(x, &amps, &phases),
            (None, None) => {
                let r = x.norm();
                if r <= 1.0 {
                    x
                } else {
                    x / r
                }
            }
            // Continuous amplitude, discrete phase: snap the phase, then clamp
            // the amplitude along that direction.
            (None, Some(phases)) => {
                let theta = nearest_phase(x.arg(), &phases);
                let along = (x * Complex64::from_polar(1.0, -theta)).re;
                Complex64::from_polar(along.clamp(0.0, 1.0), theta)
            }
            // Discrete amplitude, continuous phase: keep the phase, snap the
            // modulus.
            (Some(amps), None) => {
                let r = x.norm();
                let theta = x.arg();
                let mut best = amps[0];
                let mut best_d = (amps[0] - r).abs();
                for &a in &amps[1..] {
                    let d = (a - r).abs();
                    if d < best_d {
                        best = a;
                        best_d = d;
                    }
                }
                Complex64::from_polar(best, theta)
            }
        }
    }

    /// Whether `x` already lies in the feasible set (up to `tol`).
    pub fn contains(&self, x: Complex64, tol: f64) -> bool {
        (self.project(x) - x).norm() <= tol
    }

    /// Random full-amplitude member with a feasible phase, used for
    /// random-initialization baselines.
    pub fn random_member(&self, rng: &mut impl Rng) -> Complex64 {
        let theta = match self.phase_set() {
            Some(phases) => phases[rng.gen_range(0..phases.len())],
            None => rng.gen_range(0.0..TWO_PI),
        };
        Complex64::from_polar(1.0, theta)
    }
}

fn nearest_phase(angle: f64, phases: &[f64]) -> f64 {
    let mut best = phases[0];
    let mut best_d = circular_distance(angle, phases[0]);
    for &p in &phases[1..] {
        let d = circular_distance(angle, p);
        if d < best_d {
            best = p;
            best_d = d;
        }
    }
    best
}

/// Wrap-around angular distance in `[0, pi]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TWO_PI);
    d.min(TWO_PI - d)
}

/// Reflection optimization state: the relaxed vector `v`, its feasible copy
/// `u`, the dual vector of the equality constraint and the feasible set all
/// three live in.
#[derive(Debug, Clone)]
pub struct ReflectionState {
    pub v: CVec,
    pub u: CVec,
    pub dual: CVec,
    pub feasible: FeasibleSet,
}

impl ReflectionState {
    /// Full-reflection start: `v = u = 1` projected into the feasible set,
    /// zero dual.
    pub fn full_reflection(n: usize, feasible: FeasibleSet) -> Self {
        let one = feasible.project(Complex64::new(1.0, 0.0));
        Self {
            v: CVec::from_element(n, one),
            u: CVec::from_element(n, one),
            dual: CVec::zeros(n),
            feasible,
        }
    }

    pub fn violation(&self) -> f64 {
        (0..self.v.len()).map(|i| (self.v[i] - self.u[i]).norm()).fold(0.0, f64::max)
    }
}

/// Transmit precoders with their power budget, rate weights and per-user
/// noise powers (all in milliwatts).
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub w: Vec<CVec>,
    pub power_budget: f64,
    pub weights: Vec<f64>,
    pub noise: Vec<f64>,
}

impl PrecoderSet {
    pub fn total_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    pub fn n_users(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.len() != self.weights.len() || self.w.len() != self.noise.len() {
            return Err(Error::InvalidArgument(format!(
                "PrecoderSet: {} precoders, {} weights, {} noise powers",
                self.w.len(),
                self.weights.len(),
                self.noise.len()
            )));
        }
        if self.total_power() > self.power_budget * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "PrecoderSet: total power {} exceeds budget {}",
                self.total_power(),
                self.power_budget
            )));
        }
        Ok(())
    }
}

/// Interference-plus-noise power seen by user `k`, in milliwatts.
pub fn psi(k: usize, v: &CVec, precoders: &PrecoderSet, estimate: &ChannelEstimate) -> f64 {
    let h_eff = estimate.effective_channel(v);
    let mut other_users = 0.0;
    let mut sum_power = 0.0;
    for (j, w) in precoders.w.iter().enumerate() {
        sum_power += w.norm_squared();
        if j != k {
            other_users += h_eff.dotc(w).norm_sqr();
        }
    }
    other_users + estimate.csi_penalty(v) * sum_power + precoders.noise[k]
}

/// Achievable-rate lower bound of user `k` in bits (base-2 logarithm).
pub fn achievable_rate(k: usize, v: &CVec, precoders: &PrecoderSet, estimate: &ChannelEstimate) -> f64 {
    let h_eff = estimate.effective_channel(v);
    let signal = h_eff.dotc(&precoders.w[k]).norm_sqr();
    if signal == 0.0 {
        return 0.0;
    }
    (1.0 + signal / psi(k, v, precoders, estimate)).log2()
}

/// Weighted sum of per-user achievable rates.
pub fn weighted_sum_rate(v: &CVec, precoders: &PrecoderSet, estimates: &[ChannelEstimate]) -> f64 {
    estimates
        .iter()
        .enumerate()
        .map(|(k, est)| precoders.weights[k] * achievable_rate(k, v, precoders, est))
        .sum()
}

/// Linear MMSE receive coefficient of user `k`: the desired-signal inner
/// product over the total received power.
pub fn mmse_receiver(k: usize, v: &CVec, precoders: &PrecoderSet, estimate: &ChannelEstimate) -> Complex64 {
    let h_eff = estimate.effective_channel(v);
    let desired = h_eff.dotc(&precoders.w[k]);
    let total = psi(k, v, precoders, estimate) + desired.norm_sqr();
    desired / total
}

/// Mean squared error of user `k` for receive coefficient `g`:
/// `|g|^2 * total_power - 2 Re(g^* h_k^H w_k) + 1`.
pub fn mse(k: usize, g: Complex64, v: &CVec, precoders: &PrecoderSet, estimate: &ChannelEstimate) -> f64 {
    let h_eff = estimate.effective_channel(v);
    let desired = h_eff.dotc(&precoders.w[k]);
    let total = psi(k, v, precoders, estimate) + desired.norm_sqr();
    g.norm_sqr() * total - 2.0 * (g.conj() * desired).re + 1.0
}

/// Quadratic rate profile of a single element's amplitude in the
/// single-user case.
///
/// With the phase of element `n` fixed at `theta_n` and every other
/// coefficient frozen, the rate is
/// `log2(1 + (quad a^2 + lin a + konst) / (quad' a^2 + lin' a + konst'))`.
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeProfile {
    pub signal: [f64; 3],
    pub interference: [f64; 3],
}

impl AmplitudeProfile {
    /// Rate at amplitude `a` (bits).
    pub fn rate_at(&self, a: f64) -> f64 {
        let num = self.signal[0] * a * a + self.signal[1] * a + self.signal[2];
        let den = self.interference[0] * a * a + self.interference[1] * a + self.interference[2];
        (1.0 + num / den).log2()
    }
}

/// Expands the single-user rate around element `n` as quadratics of its
/// amplitude, holding its phase at `theta_n` and the other coefficients at
/// their values in `v`.
pub fn amplitude_profile(
    n: usize,
    theta_n: f64,
    v: &CVec,
    precoders: &PrecoderSet,
    estimate: &ChannelEstimate,
) -> Result<AmplitudeProfile> {
    if precoders.n_users() != 1 {
        return Err(Error::InvalidArgument(
            "amplitude_profile: defined for the single-user case".into(),
        ));
    }
    if n >= v.len() {
        return Err(Error::InvalidArgument(format!(
            "amplitude_profile: element {n} out of range for N = {}",
            v.len()
        )));
    }
    let w = &precoders.w[0];
    let sigma2 = precoders.noise[0];
    let w_power = w.norm_squared();

    // Signal: |sum_{j != n} conj(v_j) t_j + s + a e^{j theta} t_n|^2 with
    // t = H_hat w and s = h_d_hat^H w.
    let t = estimate.cascaded() * w;
    let s = estimate.direct().dotc(w);
    let mut kappa = s;
    for j in 0..v.len() {
        if j != n {
            kappa += v[j].conj() * t[j];
        }
    }
    let rot = Complex64::from_polar(1.0, theta_n);
    let signal = [
        t[n].norm_sqr(),
        2.0 * (rot * t[n] * kappa.conj()).re,
        kappa.norm_sqr(),
    ];

    // Interference: |w|^2 [1; v]^H V_bar [1; v] + sigma^2 expanded in the
    // same way around entry n+1 of the extended vector.
    let v_bar = estimate.v_bar();
    let m_idx = n + 1;
    let ext = crate::training::extend_reflection(v);
    let mut cross = Complex64::new(0.0, 0.0);
    for j in 0..ext.nrows() {
        if j != m_idx {
            cross += v_bar[(m_idx, j)] * ext[(j, 0)];
        }
    }
    let mut konst = Complex64::new(0.0, 0.0);
    for i in 0..ext.nrows() {
        if i == m_idx {
            continue;
        }
        for j in 0..ext.nrows() {
            if j != m_idx {
                konst += ext[(i, 0)].conj() * v_bar[(i, j)] * ext[(j, 0)];
            }
        }
    }
    // conj(v_n) = a e^{j theta} multiplies the cross term.
    let interference = [
        w_power * v_bar[(m_idx, m_idx)].re,
        w_power * 2.0 * (rot * cross).re,
        w_power * konst.re + sigma2,
    ];

    Ok(AmplitudeProfile { signal, interference })
}

/// Percentage of reflection coefficients that are switched off.
pub fn eop(v: &CVec) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let off = v.iter().filter(|c| c.norm() < EOP_THRESHOLD).count();
    100.0 * off as f64 / v.len() as f64
}
