//! Uplink pilot training: reflection-pattern design, received-pilot
//! simulation, least-squares channel estimation and the exact second-order
//! statistics of the estimation error.
//!
//! During training every IRS element reflects at full amplitude while its
//! phase follows a pre-designed pattern per pilot symbol. Stacking the
//! extended reflection vectors `[1; v_n]` as columns gives the pattern matrix
//! `V`, and the LS estimate of the stacked channel is
//! `H_bar = ((1/sqrt(p_u)) Y V^+)^H`. The resulting error `H_bar - H_tilde`
//! has zero mean and per-column covariance
//! `V_bar = (eps^2 / p_u) (V^+)^H V^+`, which every solver consumes.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{all_finite, dft_matrix, pseudo_inverse, sylvester_hadamard, CMat, CVec};

/// Which family the training patterns were drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternSource {
    /// Columns of a DFT matrix (continuous phases).
    Dft,
    /// DFT entries with phases snapped to the discrete phase grid.
    QuantizedDft,
    /// Truncation of a Sylvester Hadamard matrix (1-bit phases).
    TruncatedHadamard,
}

/// Extended reflection patterns used during uplink training.
///
/// `v` is `(N+1) x N_r` with an all-ones first row; every entry has unit
/// modulus. `q_theta` records the phase resolution the patterns respect
/// (`None` for continuous).
#[derive(Debug, Clone)]
pub struct PatternMatrix {
    pub v: CMat,
    pub q_theta: Option<u32>,
    pub source: PatternSource,
}

impl PatternMatrix {
    pub fn n_elements(&self) -> usize {
        self.v.nrows() - 1
    }

    pub fn n_pilots(&self) -> usize {
        self.v.ncols()
    }
}

/// Designs the training pattern matrix for `N` IRS elements over `N_r`
/// pilots.
///
/// Continuous phases use the first `N+1` rows of the order-`N_r` DFT matrix;
/// 1-bit phases use the corresponding truncation of the smallest
/// power-of-two Sylvester Hadamard matrix of order at least `N_r`; `q >= 2`
/// bits project the DFT phases onto the `2^q`-point grid with wrap-around
/// distance. The first row is all ones in every case.
pub fn design_patterns(n: usize, n_r: usize, q_theta: Option<u32>) -> Result<PatternMatrix> {
    if n_r < n + 1 {
        return Err(Error::InvalidArgument(format!(
            "design_patterns: N_r = {n_r} pilots cannot identify N+1 = {} coefficients (need N_r >= N+1)",
            n + 1
        )));
    }
    let (v, source) = match q_theta {
        None => {
            let dft = dft_matrix(n_r)?;
            (dft.view((0, 0), (n + 1, n_r)).into_owned(), PatternSource::Dft)
        }
        Some(0) => {
            return Err(Error::InvalidArgument(
                "design_patterns: q_theta = 0 leaves a single phase and a rank-one pattern matrix".into(),
            ));
        }
        Some(1) => {
            let order = n_r.next_power_of_two();
            let hadamard = sylvester_hadamard(order)?;
            (
                hadamard.view((0, 0), (n + 1, n_r)).into_owned(),
                PatternSource::TruncatedHadamard,
            )
        }
        Some(q) => {
            let levels = 1u64 << q.min(62);
            let step = 2.0 * std::f64::consts::PI / levels as f64;
            let dft = dft_matrix(n_r)?;
            let mut v = dft.view((0, 0), (n + 1, n_r)).into_owned();
            for entry in v.iter_mut() {
                let angle = entry.arg().rem_euclid(2.0 * std::f64::consts::PI);
                let idx = (angle / step).round() as u64 % levels;
                *entry = Complex64::from_polar(1.0, step * idx as f64);
            }
            (v, PatternSource::QuantizedDft)
        }
    };
    let mut v = v;
    for c in 0..n_r {
        v[(0, c)] = Complex64::new(1.0, 0.0);
    }
    Ok(PatternMatrix { v, q_theta, source })
}

/// Simulates the received uplink pilot block `Y = sqrt(p_u) H_tilde^H V + N`
/// with noise entries i.i.d. `CN(0, eps2)`. The pilot symbol is 1.
pub fn simulate_uplink(
    h_tilde: &CMat,
    patterns: &PatternMatrix,
    p_u: f64,
    eps2: f64,
    rng: &mut impl Rng,
) -> Result<CMat> {
    if p_u <= 0.0 {
        return Err(Error::InvalidArgument(format!("simulate_uplink: p_u = {p_u} must be positive")));
    }
    if eps2 < 0.0 {
        return Err(Error::InvalidArgument(format!("simulate_uplink: eps2 = {eps2} must be nonnegative")));
    }
    if h_tilde.nrows() != patterns.v.nrows() {
        return Err(Error::InvalidArgument(format!(
            "simulate_uplink: stacked channel has {} rows but patterns have {}",
            h_tilde.nrows(),
            patterns.v.nrows()
        )));
    }
    let mut y = h_tilde.ad_mul(&patterns.v) * Complex64::new(p_u.sqrt(), 0.0);
    if eps2 > 0.0 {
        let sigma = (eps2 / 2.0).sqrt();
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                y[(i, j)] += Complex64::new(re * sigma, im * sigma);
            }
        }
    }
    Ok(y)
}

/// Least-squares channel estimate `H_bar = ((1/sqrt(p_u)) Y V^+)^H`,
/// dimensions `(N+1) x M`.
pub fn ls_estimate(y: &CMat, patterns: &PatternMatrix, p_u: f64) -> Result<CMat> {
    if p_u <= 0.0 {
        return Err(Error::InvalidArgument(format!("ls_estimate: p_u = {p_u} must be positive")));
    }
    if y.ncols() != patterns.v.ncols() {
        return Err(Error::InvalidArgument(format!(
            "ls_estimate: received block has {} columns but patterns have {}",
            y.ncols(),
            patterns.v.ncols()
        )));
    }
    let pinv = pseudo_inverse(&patterns.v)?;
    Ok((y * pinv * Complex64::new(1.0 / p_u.sqrt(), 0.0)).adjoint())
}

/// Exact covariance of each column of the LS estimation error:
/// entry `(i, j)` is `(eps2 / p_u)` times the conjugated dot product of
/// columns `i` and `j` of `V^+`.
///
/// Fails when the patterns are row-rank deficient (the channel is then not
/// identifiable).
pub fn error_covariance(patterns: &PatternMatrix, eps2: f64, p_u: f64) -> Result<CMat> {
    if p_u <= 0.0 {
        return Err(Error::InvalidArgument(format!("error_covariance: p_u = {p_u} must be positive")));
    }
    if eps2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "error_covariance: eps2 = {eps2} must be nonnegative"
        )));
    }
    let pinv = pseudo_inverse(&patterns.v)?;
    // Full row rank <=> V V^+ = I.
    let rows = patterns.v.nrows();
    let projector = &patterns.v * &pinv;
    if (projector - CMat::identity(rows, rows)).norm() > 1e-8 * (rows as f64).sqrt() {
        return Err(Error::NumericalFailure(
            "error_covariance: pattern matrix is row-rank deficient".into(),
        ));
    }
    let mut cov = pinv.ad_mul(&pinv) * Complex64::new(eps2 / p_u, 0.0);
    // Exact Hermitian symmetry for downstream quadratic forms.
    for i in 0..cov.nrows() {
        cov[(i, i)] = Complex64::new(cov[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = 0.5 * (cov[(i, j)] + cov[(j, i)].conj());
            cov[(i, j)] = avg;
            cov[(j, i)] = avg.conj();
        }
    }
    Ok(cov)
}

/// `|H_bar - H_tilde|_F^2 / |H_tilde|_F^2`.
pub fn normalized_mse(h_bar: &CMat, h_tilde: &CMat) -> Result<f64> {
    if h_bar.shape() != h_tilde.shape() {
        return Err(Error::InvalidArgument(format!(
            "normalized_mse: shapes {:?} and {:?} differ",
            h_bar.shape(),
            h_tilde.shape()
        )));
    }
    let denom = h_tilde.norm_squared();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("normalized_mse: reference channel is zero".into()));
    }
    Ok((h_bar - h_tilde).norm_squared() / denom)
}

/// A stacked channel estimate together with its error covariance.
///
/// `h_bar` is `(N+1) x M` with the direct-channel estimate in row 0; `v_bar`
/// is the `(N+1) x (N+1)` Hermitian PSD error covariance with block views
/// `v11` (scalar), `r_vec` (length `N`) and `r_mat` (`N x N`).
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    h_bar: CMat,
    v_bar: CMat,
}

impl ChannelEstimate {
    pub fn new(h_bar: CMat, v_bar: CMat) -> Result<Self> {
        if h_bar.nrows() < 2 {
            return Err(Error::InvalidArgument(
                "ChannelEstimate: stacked estimate needs a direct row plus IRS rows".into(),
            ));
        }
        if v_bar.nrows() != h_bar.nrows() || v_bar.ncols() != h_bar.nrows() {
            return Err(Error::InvalidArgument(format!(
                "ChannelEstimate: covariance is {}x{} but estimate has {} rows",
                v_bar.nrows(),
                v_bar.ncols(),
                h_bar.nrows()
            )));
        }
        if !all_finite(&h_bar) || !all_finite(&v_bar) {
            return Err(Error::InvalidArgument("ChannelEstimate: entries must be finite".into()));
        }
        Ok(Self { h_bar, v_bar })
    }

    pub fn n_elements(&self) -> usize {
        self.h_bar.nrows() - 1
    }

    pub fn n_antennas(&self) -> usize {
        self.h_bar.ncols()
    }

    pub fn h_bar(&self) -> &CMat {
        &self.h_bar
    }

    pub fn v_bar(&self) -> &CMat {
        &self.v_bar
    }

    /// Estimated direct channel `h_d` (row 0 of the stack, conjugated back
    /// to a column vector).
    pub fn direct(&self) -> CVec {
        CVec::from_iterator(self.n_antennas(), (0..self.n_antennas()).map(|j| self.h_bar[(0, j)].conj()))
    }

    /// Estimated cascaded channel, `N x M`.
    pub fn cascaded(&self) -> CMat {
        self.h_bar.view((1, 0), (self.n_elements(), self.n_antennas())).into_owned()
    }

    /// Top-left covariance entry (direct-channel error variance).
    pub fn v11(&self) -> f64 {
        self.v_bar[(0, 0)].re
    }

    /// Cross-covariance column `r` (length `N`).
    pub fn r_vec(&self) -> CVec {
        CVec::from_iterator(self.n_elements(), (1..=self.n_elements()).map(|i| self.v_bar[(i, 0)]))
    }

    /// Cascaded-error covariance block `R` (`N x N`).
    pub fn r_mat(&self) -> CMat {
        self.v_bar.view((1, 1), (self.n_elements(), self.n_elements())).into_owned()
    }

    /// Estimated effective downlink channel `H_hat^H v + h_d_hat` for a
    /// reflection vector `v`, equal to `H_bar^H [1; v]`.
    pub fn effective_channel(&self, v: &CVec) -> CVec {
        let ext = extend_reflection(v);
        self.h_bar.ad_mul(&ext).column(0).into_owned()
    }

    /// CSI-error quadratic form `[1; v]^H V_bar [1; v]` (real, nonnegative
    /// for PSD covariance).
    pub fn csi_penalty(&self, v: &CVec) -> f64 {
        let ext = extend_reflection(v);
        (ext.ad_mul(&(&self.v_bar * &ext)))[(0, 0)].re
    }

    /// Copy of this estimate with the error covariance zeroed, used by the
    /// nonrobust baseline during optimization.
    pub fn without_error_statistics(&self) -> Self {
        Self { h_bar: self.h_bar.clone(), v_bar: CMat::zeros(self.v_bar.nrows(), self.v_bar.ncols()) }
    }
}

/// `[1; v]` as a one-column matrix.
pub(crate) fn extend_reflection(v: &CVec) -> CMat {
    let mut ext = CMat::zeros(v.len() + 1, 1);
    ext[(0, 0)] = Complex64::new(1.0, 0.0);
    for i in 0..v.len() {
        ext[(i + 1, 0)] = v[i];
    }
    ext
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_stacked(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CMat {
        CMat::from_fn(n + 1, m, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    #[test]
    fn continuous_patterns_smallest_case() {
        let p = design_patterns(1, 2, None).unwrap();
        assert_eq!(p.source, PatternSource::Dft);
        assert!((p.v[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((p.v[(0, 1)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((p.v[(1, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((p.v[(1, 1)] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hadamard_patterns_are_orthogonal_when_square_fits() {
        let p = design_patterns(3, 4, Some(1)).unwrap();
        assert_eq!(p.source, PatternSource::TruncatedHadamard);
        let gram = &p.v * p.v.adjoint();
        let expected = CMat::identity(4, 4) * Complex64::new(4.0, 0.0);
        assert!((gram - expected).norm() < 1e-12);
    }

    #[test]
    fn oversampled_dft_rows_stay_orthogonal() {
        let p = design_patterns(4, 5, None).unwrap();
        let gram = &p.v * p.v.adjoint();
        let expected = CMat::identity(5, 5) * Complex64::new(5.0, 0.0);
        assert!((gram - expected).norm() < 1e-10);
    }

    #[test]
    fn quantized_patterns_live_on_phase_grid() {
        let p = design_patterns(6, 7, Some(2)).unwrap();
        assert_eq!(p.source, PatternSource::QuantizedDft);
        let step = 2.0 * std::f64::consts::PI / 4.0;
        for entry in p.v.iter() {
            assert!((entry.norm() - 1.0).abs() < 1e-12);
            let angle = entry.arg().rem_euclid(2.0 * std::f64::consts::PI);
            let frac = (angle / step).fract();
            assert!(frac < 1e-9 || frac > 1.0 - 1e-9, "angle {angle} off-grid");
        }
        for c in 0..7 {
            assert_eq!(p.v[(0, c)], Complex64::new(1.0, 0.0));
        }
        // Quantization must keep the rows identifiable.
        assert!(error_covariance(&p, 1e-8, 1.0).is_ok());
    }

    #[test]
    fn rejects_insufficient_pilots() {
        assert!(matches!(design_patterns(4, 4, None), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn noiseless_uplink_and_ls_recover_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, m) = (3, 2);
        let h = random_stacked(&mut rng, n, m);
        let p = design_patterns(n, n + 1, None).unwrap();
        let y = simulate_uplink(&h, &p, 2.0, 0.0, &mut rng).unwrap();
        let expected = h.ad_mul(&p.v) * Complex64::new(2.0_f64.sqrt(), 0.0);
        assert!((&y - expected).norm() < 1e-12);
        let h_bar = ls_estimate(&y, &p, 2.0).unwrap();
        assert!((h_bar - h).norm() < 1e-10);
    }

    #[test]
    fn pure_noise_uplink_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (n, m) = (3, 5);
        let h = CMat::zeros(n + 1, m);
        let p = design_patterns(n, n + 1, None).unwrap();
        let eps2 = 0.3;
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let y = simulate_uplink(&h, &p, 1.0, eps2, &mut rng).unwrap();
            acc += y.norm_squared();
            count += y.len();
        }
        let var = acc / count as f64;
        assert!((var - eps2).abs() / eps2 < 0.03, "var {var}");
    }

    #[test]
    fn uplink_is_seed_deterministic() {
        let mut rng_a = ChaCha8Rng::seed_from_u64(23);
        let mut rng_b = ChaCha8Rng::seed_from_u64(23);
        let h = random_stacked(&mut ChaCha8Rng::seed_from_u64(1), 2, 2);
        let p = design_patterns(2, 3, None).unwrap();
        let a = simulate_uplink(&h, &p, 1.0, 0.5, &mut rng_a).unwrap();
        let b = simulate_uplink(&h, &p, 1.0, 0.5, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dft_estimate_error_variance_matches_theory() {
        // With orthogonal patterns the per-entry error variance is
        // eps2 / ((N+1) p_u).
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let (n, m) = (3, 2);
        let h = random_stacked(&mut rng, n, m);
        let p = design_patterns(n, n + 1, None).unwrap();
        let (p_u, eps2) = (2.0, 0.4);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let y = simulate_uplink(&h, &p, p_u, eps2, &mut rng).unwrap();
            let h_bar = ls_estimate(&y, &p, p_u).unwrap();
            acc += (h_bar - &h).norm_squared();
        }
        let per_entry = acc / (trials * (n + 1) * m) as f64;
        let expected = eps2 / ((n as f64 + 1.0) * p_u);
        assert!((per_entry - expected).abs() / expected < 0.03, "{per_entry} vs {expected}");
    }

    #[test]
    fn hadamard_estimate_error_covariance_matches_formula() {
        // E{dH dH^H} = (M eps2 / p_u)(V V^H)^+ for oversampled 1-bit patterns.
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let (n, m, n_r) = (3, 2, 6);
        let h = random_stacked(&mut rng, n, m);
        let p = design_patterns(n, n_r, Some(1)).unwrap();
        let (p_u, eps2) = (1.5, 0.2);
        let trials = 10_000;
        let mut acc = CMat::zeros(n + 1, n + 1);
        for _ in 0..trials {
            let y = simulate_uplink(&h, &p, p_u, eps2, &mut rng).unwrap();
            let delta = ls_estimate(&y, &p, p_u).unwrap() - &h;
            acc += &delta * delta.adjoint();
        }
        let empirical = acc / Complex64::new(trials as f64, 0.0);
        let gram = &p.v * p.v.adjoint();
        let expected = pseudo_inverse(&gram).unwrap() * Complex64::new(m as f64 * eps2 / p_u, 0.0);
        assert!(
            (&empirical - &expected).norm() / expected.norm() < 0.05,
            "relative deviation {}",
            (&empirical - &expected).norm() / expected.norm()
        );
    }

    #[test]
    fn ls_errors_have_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let (n, m) = (3, 2);
        let h = random_stacked(&mut rng, n, m);
        let p = design_patterns(n, n + 1, Some(1)).unwrap();
        let trials = 10_000;
        let mut acc = CMat::zeros(n + 1, m);
        for _ in 0..trials {
            let y = simulate_uplink(&h, &p, 1.0, 0.3, &mut rng).unwrap();
            acc += ls_estimate(&y, &p, 1.0).unwrap() - &h;
        }
        let mean = acc / Complex64::new(trials as f64, 0.0);
        // Per-entry standard error is sqrt(var/trials); stay within 5 sigma.
        let sigma = (0.3 / (n as f64 + 1.0) / trials as f64).sqrt();
        assert!(mean.iter().all(|c| c.norm() < 5.0 * sigma), "mean norm {}", mean.norm());
    }

    #[test]
    fn covariance_dft_case_is_scaled_identity() {
        let p = design_patterns(4, 5, None).unwrap();
        let (p_u, eps2) = (2.0, 0.6);
        let cov = error_covariance(&p, eps2, p_u).unwrap();
        let expected = CMat::identity(5, 5) * Complex64::new(eps2 / (5.0 * p_u), 0.0);
        assert!((cov - expected).norm() < 1e-10);
    }

    #[test]
    fn covariance_zero_noise_is_zero() {
        let p = design_patterns(3, 4, Some(1)).unwrap();
        let cov = error_covariance(&p, 0.0, 1.0).unwrap();
        assert!(cov.norm() == 0.0);
    }

    #[test]
    fn covariance_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let (n, m, n_r) = (3, 2, 6);
        let h = random_stacked(&mut rng, n, m);
        let p = design_patterns(n, n_r, Some(1)).unwrap();
        let (p_u, eps2) = (1.0, 0.25);
        let formula = error_covariance(&p, eps2, p_u).unwrap();
        let trials = 10_000;
        let mut acc = CMat::zeros(n + 1, n + 1);
        for _ in 0..trials {
            let y = simulate_uplink(&h, &p, p_u, eps2, &mut rng).unwrap();
            let delta = ls_estimate(&y, &p, p_u).unwrap() - &h;
            // Columns are i.i.d. with covariance V_bar, so average their
            // outer products.
            acc += &delta * delta.adjoint();
        }
        let empirical = acc / Complex64::new((trials * m) as f64, 0.0);
        assert!(
            (&empirical - &formula).norm() / formula.norm() < 0.05,
            "relative deviation {}",
            (&empirical - &formula).norm() / formula.norm()
        );
    }

    #[test]
    fn covariance_identity_pinv_vs_gram_inverse() {
        // (eps2/p_u)(V^+)^H V^+ equals (eps2/p_u)(V V^H)^{-1} for full row rank.
        for q in [Some(1), Some(2), None] {
            let p = design_patterns(4, 6, q).unwrap();
            let cov = error_covariance(&p, 0.7, 1.3).unwrap();
            let gram = &p.v * p.v.adjoint();
            let gram_inv = pseudo_inverse(&gram).unwrap() * Complex64::new(0.7 / 1.3, 0.0);
            assert!((&cov - &gram_inv).norm() / gram_inv.norm() < 1e-10);
        }
    }

    #[test]
    fn normalized_mse_basic_cases() {
        let h = CMat::from_element(2, 2, Complex64::new(1.0, 1.0));
        assert_eq!(normalized_mse(&h, &h).unwrap(), 0.0);
        let zero = CMat::zeros(2, 2);
        assert_eq!(normalized_mse(&zero, &h).unwrap(), 1.0);
        let double = &h * Complex64::new(2.0, 0.0);
        assert!((normalized_mse(&double, &h).unwrap() - 1.0).abs() < 1e-12);
        assert!(normalized_mse(&h, &zero).is_err());
    }

    #[test]
    fn mse_improves_with_training_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let (n, m) = (4, 2);
        let p = design_patterns(n, n + 1, Some(1)).unwrap();
        let eps2 = 0.5;
        let mut means = Vec::new();
        for p_u in [0.5, 2.0, 8.0] {
            let mut acc = 0.0;
            for _ in 0..200 {
                let h = random_stacked(&mut rng, n, m);
                let y = simulate_uplink(&h, &p, p_u, eps2, &mut rng).unwrap();
                let h_bar = ls_estimate(&y, &p, p_u).unwrap();
                acc += normalized_mse(&h_bar, &h).unwrap();
            }
            means.push(acc / 200.0);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "means {means:?}");
    }

    #[test]
    fn estimate_accessors_expose_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (n, m) = (3, 2);
        let h = random_stacked(&mut rng, n, m);
        let p = design_patterns(n, n + 1, Some(1)).unwrap();
        let cov = error_covariance(&p, 0.2, 1.0).unwrap();
        let est = ChannelEstimate::new(h.clone(), cov.clone()).unwrap();
        assert_eq!(est.n_elements(), n);
        assert_eq!(est.n_antennas(), m);
        for j in 0..m {
            assert_eq!(est.direct()[j], h[(0, j)].conj());
        }
        assert_eq!(est.r_mat()[(0, 0)], cov[(1, 1)]);
        assert_eq!(est.r_vec()[0], cov[(1, 0)]);
        assert!((est.v11() - cov[(0, 0)].re).abs() < 1e-15);
        // Block decomposition reassembles the full quadratic form.
        let v = CVec::from_fn(n, |i, _| Complex64::from_polar(0.5, i as f64));
        let direct_quad = est.csi_penalty(&v);
        let r = est.r_vec();
        let rm = est.r_mat();
        let mut cross = Complex64::new(0.0, 0.0);
        for i in 0..n {
            cross += v[i].conj() * r[i];
        }
        let manual = est.v11() + 2.0 * cross.re + (v.ad_mul(&(&rm * &v)))[(0, 0)].re;
        assert!((direct_quad - manual).abs() < 1e-12);
    }
}
