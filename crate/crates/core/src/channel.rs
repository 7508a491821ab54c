//! Ground-truth propagation environment: node geometry, distance-dependent
//! path loss, Rician small-scale fading and the cascaded AP-IRS-user channel.
//!
//! All powers are carried in milliwatts so that dBm configuration values
//! convert as `10^(x/10)`; dB/dBm conversion is centralized here.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{all_finite, CMat, CVec};

/// Converts a dB quantity to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts dBm to milliwatts.
pub fn dbm_to_milliwatts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Rician factors at or above this value are treated as a pure line-of-sight
/// channel.
pub const RICIAN_FACTOR_CAP: f64 = 1e12;

/// Node placement and array layout.
///
/// The AP carries a uniform linear array along the x-axis; the IRS is a
/// uniform planar array in the y-z plane with `n_y * n_z` elements. Array
/// spacing is expressed in carrier wavelengths (half-wavelength by default),
/// which is the only form in which spacing enters the steering phases.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub ap_ref: [f64; 3],
    pub irs_ref: [f64; 3],
    pub user_positions: Vec<[f64; 3]>,
    pub ap_antennas: usize,
    /// (n_y, n_z) grid of the IRS; the element count is `n_y * n_z`.
    pub irs_grid: (usize, usize),
    pub spacing_wavelengths: f64,
}

impl Geometry {
    pub fn irs_elements(&self) -> usize {
        self.irs_grid.0 * self.irs_grid.1
    }

    pub fn validate(&self) -> Result<()> {
        if self.ap_antennas == 0 {
            return Err(Error::InvalidArgument("geometry: need at least one AP antenna".into()));
        }
        if self.irs_grid.0 == 0 || self.irs_grid.1 == 0 {
            return Err(Error::InvalidArgument("geometry: IRS grid must be nonempty".into()));
        }
        if self.user_positions.is_empty() {
            return Err(Error::InvalidArgument("geometry: need at least one user".into()));
        }
        let finite = |p: &[f64; 3]| p.iter().all(|x| x.is_finite());
        if !finite(&self.ap_ref)
            || !finite(&self.irs_ref)
            || !self.user_positions.iter().all(finite)
        {
            return Err(Error::InvalidArgument("geometry: positions must be finite".into()));
        }
        Ok(())
    }
}

/// Distance-dependent path loss `C0 * (d / d0)^(-alpha)` with `d0 = 1 m`.
#[derive(Debug, Clone)]
pub struct PathLossModel {
    /// Path loss at the 1 m reference distance, in dB.
    pub c0_db: f64,
    pub alpha_au: f64,
    pub alpha_ai: f64,
    pub alpha_iu: f64,
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_au <= 0.0 || self.alpha_ai <= 0.0 || self.alpha_iu <= 0.0 {
            return Err(Error::InvalidArgument("path loss exponents must be positive".into()));
        }
        Ok(())
    }
}

/// Per-link Rician factors in linear scale (0 means Rayleigh fading).
#[derive(Debug, Clone)]
pub struct RicianSpec {
    pub beta_au: f64,
    pub beta_ai: f64,
    pub beta_iu: f64,
}

impl RicianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.beta_au < 0.0 || self.beta_ai < 0.0 || self.beta_iu < 0.0 {
            return Err(Error::InvalidArgument("Rician factors must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One realization of every channel in the system.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// AP-IRS channel, `N x M`.
    pub g: CMat,
    /// Direct AP-user channels, one `M`-vector per user.
    pub h_d: Vec<CVec>,
    /// IRS-user channels, one `N`-vector per user.
    pub h_r: Vec<CVec>,
    /// Cascaded channels `H_k = diag(h_r_k^H) G`, `N x M` each.
    pub cascaded: Vec<CMat>,
    /// Stacked channels `[h_d_k^H; H_k]`, `(N+1) x M` each.
    pub stacked: Vec<CMat>,
}

/// Linear power gain of a link of length `d` meters.
pub fn path_loss(d: f64, alpha: f64, model: &PathLossModel) -> Result<f64> {
    if d <= 0.0 {
        return Err(Error::InvalidArgument(format!("path_loss: distance {d} must be positive")));
    }
    Ok(db_to_linear(model.c0_db) * d.powf(-alpha))
}

fn standard_complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws a Rician-faded channel block.
///
/// Returns `sqrt(gain) * (sqrt(beta/(1+beta)) * los + sqrt(1/(1+beta)) * nlos)`
/// where the NLoS entries are i.i.d. standard circular complex Gaussians.
/// Factors at or above [`RICIAN_FACTOR_CAP`] short-circuit to the pure LoS
/// component.
pub fn rician_channel(
    rows: usize,
    cols: usize,
    rician_factor: f64,
    los_component: &CMat,
    gain: f64,
    rng: &mut impl Rng,
) -> Result<CMat> {
    if rician_factor < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rician_channel: factor {rician_factor} must be nonnegative"
        )));
    }
    if gain <= 0.0 {
        return Err(Error::InvalidArgument(format!("rician_channel: gain {gain} must be positive")));
    }
    if los_component.nrows() != rows || los_component.ncols() != cols {
        return Err(Error::InvalidArgument(format!(
            "rician_channel: LoS component is {}x{}, expected {rows}x{cols}",
            los_component.nrows(),
            los_component.ncols()
        )));
    }
    let amp = gain.sqrt();
    if rician_factor >= RICIAN_FACTOR_CAP {
        return Ok(los_component * Complex64::new(amp, 0.0));
    }
    let los_w = (rician_factor / (1.0 + rician_factor)).sqrt();
    let nlos_w = (1.0 / (1.0 + rician_factor)).sqrt();
    // Row-major draw order keeps realizations reproducible for a fixed seed.
    let mut out = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let nlos = standard_complex_gaussian(rng);
            out[(i, j)] = (los_component[(i, j)] * los_w + nlos * nlos_w) * amp;
        }
    }
    Ok(out)
}

/// Cascaded AP-IRS-user channel `diag(h_r^H) G`: row `n` of the result is
/// `conj(h_r[n])` times row `n` of `G`.
pub fn cascaded_channel(h_r: &CVec, g: &CMat) -> Result<CMat> {
    if h_r.len() != g.nrows() {
        return Err(Error::InvalidArgument(format!(
            "cascaded_channel: h_r has length {} but G has {} rows",
            h_r.len(),
            g.nrows()
        )));
    }
    let mut out = g.clone();
    for n in 0..g.nrows() {
        let scale = h_r[n].conj();
        for m in 0..g.ncols() {
            out[(n, m)] *= scale;
        }
    }
    Ok(out)
}

fn unit_direction(from: &[f64; 3], to: &[f64; 3]) -> [f64; 3] {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    [d[0] / norm, d[1] / norm, d[2] / norm]
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Steering vector of an array whose element `i` sits at integer offset
/// `offsets[i]` (in units of the element spacing) for a departure direction
/// `direction`.
fn steering(offsets: &[[f64; 3]], direction: [f64; 3], spacing_wavelengths: f64) -> CVec {
    let k = -2.0 * std::f64::consts::PI * spacing_wavelengths;
    CVec::from_iterator(
        offsets.len(),
        offsets.iter().map(|r| {
            let phase = k * (r[0] * direction[0] + r[1] * direction[1] + r[2] * direction[2]);
            Complex64::from_polar(1.0, phase)
        }),
    )
}

fn ap_offsets(m: usize) -> Vec<[f64; 3]> {
    (0..m).map(|i| [i as f64, 0.0, 0.0]).collect()
}

fn irs_offsets(n_y: usize, n_z: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(n_y * n_z);
    for iz in 0..n_z {
        for iy in 0..n_y {
            out.push([0.0, iy as f64, iz as f64]);
        }
    }
    out
}

/// Generates a full [`ChannelSet`] for the given geometry.
///
/// Per-link gains come from [`path_loss`] at the exact Euclidean distances;
/// LoS components are steering vectors along the exact geometric directions.
/// Identical `(inputs, rng seed)` produce a bit-identical channel set.
pub fn generate_channels(
    geometry: &Geometry,
    path_loss_model: &PathLossModel,
    rician_spec: &RicianSpec,
    rng: &mut impl Rng,
) -> Result<ChannelSet> {
    geometry.validate()?;
    path_loss_model.validate()?;
    rician_spec.validate()?;

    let m = geometry.ap_antennas;
    let n = geometry.irs_elements();
    let sp = geometry.spacing_wavelengths;
    let ap_off = ap_offsets(m);
    let irs_off = irs_offsets(geometry.irs_grid.0, geometry.irs_grid.1);

    let d_ai = distance(&geometry.ap_ref, &geometry.irs_ref);
    let gain_ai = path_loss(d_ai, path_loss_model.alpha_ai, path_loss_model)?;
    let a_irs = steering(&irs_off, unit_direction(&geometry.irs_ref, &geometry.ap_ref), sp);
    let a_ap = steering(&ap_off, unit_direction(&geometry.ap_ref, &geometry.irs_ref), sp);
    let g_los: CMat = &a_irs * a_ap.adjoint();
    let g = rician_channel(n, m, rician_spec.beta_ai, &g_los, gain_ai, rng)?;

    let mut h_d = Vec::with_capacity(geometry.user_positions.len());
    let mut h_r = Vec::with_capacity(geometry.user_positions.len());
    let mut cascaded = Vec::with_capacity(geometry.user_positions.len());
    let mut stacked = Vec::with_capacity(geometry.user_positions.len());
    for user in &geometry.user_positions {
        let d_au = distance(&geometry.ap_ref, user);
        let gain_au = path_loss(d_au, path_loss_model.alpha_au, path_loss_model)?;
        let los_d = steering(&ap_off, unit_direction(&geometry.ap_ref, user), sp);
        let hd = rician_channel(m, 1, rician_spec.beta_au, &DMatrix::from_column_slice(m, 1, los_d.as_slice()), gain_au, rng)?
            .column(0)
            .into_owned();

        let d_iu = distance(&geometry.irs_ref, user);
        let gain_iu = path_loss(d_iu, path_loss_model.alpha_iu, path_loss_model)?;
        let los_r = steering(&irs_off, unit_direction(&geometry.irs_ref, user), sp);
        let hr = rician_channel(n, 1, rician_spec.beta_iu, &DMatrix::from_column_slice(n, 1, los_r.as_slice()), gain_iu, rng)?
            .column(0)
            .into_owned();

        let h_k = cascaded_channel(&hr, &g)?;
        let mut tilde = CMat::zeros(n + 1, m);
        for j in 0..m {
            tilde[(0, j)] = hd[j].conj();
        }
        tilde.view_mut((1, 0), (n, m)).copy_from(&h_k);

        debug_assert!(all_finite(&tilde));
        h_d.push(hd);
        h_r.push(hr);
        cascaded.push(h_k);
        stacked.push(tilde);
    }

    Ok(ChannelSet { g, h_d, h_r, cascaded, stacked })
}
