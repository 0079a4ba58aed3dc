//! Array responses, large-scale gains, and per-resource-element channel
//! realizations.
//!
//! Angle convention: azimuth is measured in the horizontal plane from the
//! global x-axis, elevation from the horizontal plane. A ULA along the y-axis
//! has element `n` phase `2π·spacing·n·cos(el)·sin(az)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ArrayAxis, ArrayConfig, Position3D, TargetState};
use crate::transmit::OfdmNumerology;
use crate::{db_to_linear, Error, Result, SPEED_OF_LIGHT};

/// Array response toward one direction; all entries have unit modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub DVector<Complex64>);

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<Complex64> {
        self.0
    }
}

pub fn steering_vector(arr: &ArrayConfig, azimuth: f64, elevation: f64) -> SteeringVector {
    let direction_cosine = match arr.axis {
        ArrayAxis::Y => elevation.cos() * azimuth.sin(),
        ArrayAxis::X => elevation.cos() * azimuth.cos(),
    };
    let step = TAU * arr.spacing * direction_cosine;
    SteeringVector(DVector::from_fn(arr.num_elements, |n, _| {
        Complex64::from_polar(1.0, step * n as f64)
    }))
}

/// Azimuth in (−π, π] and elevation in [−π/2, π/2] of `to` seen from `from`.
pub fn angles_between(from: Position3D, to: Position3D) -> Result<(f64, f64)> {
    let d = to - from;
    let horizontal = d.x.hypot(d.y);
    if horizontal == 0.0 && d.z == 0.0 {
        return Err(Error::DegenerateGeometry("coincident points have no direction"));
    }
    let mut azimuth = d.y.atan2(d.x);
    if azimuth == -PI {
        azimuth = PI;
    }
    Ok((azimuth, d.z.atan2(horizontal)))
}

/// Steering vector of the array at `from` pointing toward `to`.
pub fn steering_toward(arr: &ArrayConfig, from: Position3D, to: Position3D) -> Result<SteeringVector> {
    let (az, el) = angles_between(from, to)?;
    Ok(steering_vector(arr, az, el))
}

fn leg(a: Position3D, b: Position3D) -> Result<f64> {
    let d = a.distance(b);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry("zero-length propagation leg"));
    }
    Ok(d)
}

/// Geometric gain of the tx → target → rx path, `λ²/((4π)³ d_tx² d_rx²)`.
/// The reflectivity is carried separately by the complex RCS draw.
pub fn target_lsf_bistatic(tx: Position3D, p: Position3D, rx: Position3D, wavelength: f64) -> Result<f64> {
    let d_tx = leg(tx, p)?;
    let d_rx = leg(p, rx)?;
    Ok(wavelength.powi(2) / ((4.0 * PI).powi(3) * d_tx.powi(2) * d_rx.powi(2)))
}

/// Propagation delay (s) and Doppler shift (Hz) of the tx → target → rx path.
pub fn bistatic_delay_doppler(
    tx: Position3D,
    p: Position3D,
    rx: Position3D,
    velocity: Position3D,
    wavelength: f64,
) -> Result<(f64, f64)> {
    let d_tx = leg(tx, p)?;
    let d_rx = leg(p, rx)?;
    let u_tx = (tx - p) * (1.0 / d_tx);
    let u_rx = (rx - p) * (1.0 / d_rx);
    let delay = (d_tx + d_rx) / SPEED_OF_LIGHT;
    let doppler = (velocity.dot(u_tx) + velocity.dot(u_rx)) / wavelength;
    Ok((delay, doppler))
}

/// Single line-of-sight path tx node → target → rx node.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetLink {
    pub lsf_gain: f64,
    pub delay: f64,
    pub doppler_hz: f64,
    pub rcs_draw: Complex64,
    /// (azimuth, elevation) of departure at the tx node.
    pub aod: (f64, f64),
    /// (azimuth, elevation) of arrival at the rx node.
    pub aoa: (f64, f64),
}

impl TargetLink {
    /// Builds the path geometry with a unit reflectivity draw.
    ///
    /// Fails when the Doppler shift is not below 1% of the subcarrier spacing.
    pub fn new(
        tx: Position3D,
        rx: Position3D,
        target: &TargetState,
        wavelength: f64,
        numerology: &OfdmNumerology,
    ) -> Result<Self> {
        let p = target.position;
        let lsf_gain = target_lsf_bistatic(tx, p, rx, wavelength)?;
        let (delay, doppler_hz) = bistatic_delay_doppler(tx, p, rx, target.velocity, wavelength)?;
        if doppler_hz.abs() >= 0.01 * numerology.scs_hz {
            return Err(Error::DopplerTooLarge {
                doppler_hz,
                scs_hz: numerology.scs_hz,
            });
        }
        Ok(Self {
            lsf_gain,
            delay,
            doppler_hz,
            rcs_draw: Complex64::new(1.0, 0.0),
            aod: angles_between(tx, p)?,
            aoa: angles_between(rx, p)?,
        })
    }

    /// Co-located transmit/receive arrays: AoA and AoD coincide.
    pub fn monostatic(
        node: Position3D,
        target: &TargetState,
        wavelength: f64,
        numerology: &OfdmNumerology,
    ) -> Result<Self> {
        Self::new(node, node, target, wavelength, numerology)
    }

    pub fn with_rcs(mut self, alpha: Complex64) -> Self {
        self.rcs_draw = alpha;
        self
    }

    /// `exp(−j2π n Δf τ)`
    pub fn delay_phase(&self, n: usize, numerology: &OfdmNumerology) -> Complex64 {
        Complex64::from_polar(1.0, -TAU * n as f64 * numerology.scs_hz * self.delay)
    }

    /// `exp(j2π n' f_d T_s)`
    pub fn doppler_phase(&self, n_sym: usize, numerology: &OfdmNumerology) -> Complex64 {
        Complex64::from_polar(
            1.0,
            TAU * n_sym as f64 * self.doppler_hz * numerology.symbol_duration(),
        )
    }
}

fn check_re(n: usize, n_sym: usize, numerology: &OfdmNumerology) -> Result<()> {
    if n >= numerology.n_subcarriers {
        return Err(Error::IndexOutOfRange {
            what: "subcarrier",
            index: n,
            len: numerology.n_subcarriers,
        });
    }
    if n_sym >= numerology.n_symbols {
        return Err(Error::IndexOutOfRange {
            what: "OFDM symbol",
            index: n_sym,
            len: numerology.n_symbols,
        });
    }
    Ok(())
}

/// Rank-one bistatic target channel `α√β · a_rx a_txᴴ · ρ(n) ξ(n')`.
pub fn target_channel_cf(
    link: &TargetLink,
    tx_array: &ArrayConfig,
    rx_array: &ArrayConfig,
    n: usize,
    n_sym: usize,
    numerology: &OfdmNumerology,
) -> Result<DMatrix<Complex64>> {
    check_re(n, n_sym, numerology)?;
    let a_tx = steering_vector(tx_array, link.aod.0, link.aod.1);
    let a_rx = steering_vector(rx_array, link.aoa.0, link.aoa.1);
    let gain = link.rcs_draw
        * link.lsf_gain.sqrt()
        * link.delay_phase(n, numerology)
        * link.doppler_phase(n_sym, numerology);
    Ok(a_rx.0 * a_tx.0.adjoint() * gain)
}

/// Monostatic target channel of a BS with co-located arrays; the link must
/// come from [`TargetLink::monostatic`].
pub fn target_channel_mc(
    link: &TargetLink,
    tx_array: &ArrayConfig,
    rx_array: &ArrayConfig,
    n: usize,
    n_sym: usize,
    numerology: &OfdmNumerology,
) -> Result<DMatrix<Complex64>> {
    if link.aoa != link.aod {
        return Err(Error::DimensionMismatch(
            "monostatic channel needs coinciding AoA and AoD".into(),
        ));
    }
    target_channel_cf(link, tx_array, rx_array, n, n_sym, numerology)
}

/// One circularly-symmetric complex Gaussian draw with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// Log-distance path loss with log-normal shadowing:
/// `β_dB = intercept − 10·exponent·log10(d / 1 m) + N(0, σ_sh²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub exponent: f64,
    pub shadow_sigma_db: f64,
}

impl PathLossModel {
    pub fn gain<R: Rng + ?Sized>(&self, a: Position3D, b: Position3D, rng: &mut R) -> f64 {
        let d = a.distance(b).max(1.0);
        let shadow: f64 = StandardNormal.sample(rng);
        db_to_linear(self.intercept_db - 10.0 * self.exponent * d.log10() + self.shadow_sigma_db * shadow)
    }
}

/// One Rician realization `√(β/(1+K)) · (g_nlos + √K e^{jψ} · v_los)`.
///
/// Vectors are flattened; AP–AP matrices are stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RicianChannel {
    pub lsf: f64,
    pub k_factor: f64,
    pub nlos_draw: DVector<Complex64>,
    pub phase_offset: f64,
    pub los_component: DVector<Complex64>,
}

impl RicianChannel {
    pub fn realize(&self) -> DVector<Complex64> {
        let scale = (self.lsf / (1.0 + self.k_factor)).sqrt();
        let los = Complex64::from_polar(self.k_factor.sqrt(), self.phase_offset);
        (&self.nlos_draw + &self.los_component * los) * Complex64::new(scale, 0.0)
    }

    pub fn realize_matrix(&self, nrows: usize) -> DMatrix<Complex64> {
        let v = self.realize();
        let ncols = v.len() / nrows;
        DMatrix::from_column_slice(nrows, ncols, v.as_slice())
    }
}

/// Draws a Rician channel with identity NLoS covariance around the given
/// LoS response. Used for AP–AP/BS–BS links and UE links alike.
pub fn rician_channel<R: Rng + ?Sized>(
    lsf: f64,
    k_factor: f64,
    los_component: DVector<Complex64>,
    rng: &mut R,
) -> RicianChannel {
    let nlos_draw = DVector::from_fn(los_component.len(), |_, _| complex_normal(rng));
    RicianChannel {
        lsf,
        k_factor,
        nlos_draw,
        phase_offset: rng.random::<f64>() * TAU,
        los_component,
    }
}

/// LoS response `a_rx a_txᴴ` between two arrays, flattened column-major.
pub fn node_to_node_los(
    rx_array: &ArrayConfig,
    rx: Position3D,
    tx_array: &ArrayConfig,
    tx: Position3D,
) -> Result<DVector<Complex64>> {
    let a_rx = steering_toward(rx_array, rx, tx)?;
    let a_tx = steering_toward(tx_array, tx, rx)?;
    let m = a_rx.0 * a_tx.0.adjoint();
    Ok(DVector::from_column_slice(m.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    #[default]
    Mmse,
}

/// Uplink pilot setup for channel estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig {
    pub mode: CsiMode,
    pub power_w: f64,
    pub length: usize,
    pub users: usize,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub estimate: DVector<Complex64>,
    /// Per-entry estimation error variance.
    pub error_variance: f64,
    /// Analytic `E[‖ĥ‖²]`.
    pub expected_norm_sq: f64,
}

/// Per-antenna linear MMSE estimate with orthogonal pilots, treating the
/// channel as `CN(0, β I)`:
/// `ĥ = c·(h + n/√(p τ_p))`, `c = p τ_p β / (p τ_p β + σ²)`.
pub fn estimate_ue_channel<R: Rng + ?Sized>(
    h: &DVector<Complex64>,
    lsf: f64,
    pilot: &PilotConfig,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    if pilot.length < pilot.users {
        return Err(Error::PilotContamination {
            pilot_len: pilot.length,
            users: pilot.users,
        });
    }
    let n = h.len() as f64;
    if pilot.mode == CsiMode::Perfect {
        return Ok(ChannelEstimate {
            estimate: h.clone(),
            error_variance: 0.0,
            expected_norm_sq: n * lsf,
        });
    }
    let ptau = pilot.power_w * pilot.length as f64;
    let denom = ptau * lsf + pilot.noise_variance;
    let (shrink, error_variance) = if denom > 0.0 && denom.is_finite() {
        (ptau * lsf / denom, lsf - lsf * lsf * ptau / denom)
    } else {
        (0.0, lsf)
    };
    let noise_scale = if ptau > 0.0 {
        (pilot.noise_variance / ptau).sqrt()
    } else {
        0.0
    };
    let estimate = if shrink == 0.0 {
        DVector::zeros(h.len())
    } else {
        h.map(|x| (x + complex_normal(rng) * noise_scale) * shrink)
    };
    Ok(ChannelEstimate {
        estimate,
        error_variance,
        expected_norm_sq: n * (lsf - error_variance),
    })
}
