use serde::{Deserialize, Serialize};

use crate::channels::CsiMode;
use crate::geometry::{SensingAssociation, ServiceArea};
use crate::transmit::{OfdmNumerology, SteeringNorm, SymbolAlphabet};
use crate::{db_to_linear, dbm_to_watts, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// AP positions and roles are re-drawn every trial.
    #[default]
    Random,
    /// One AP layout, derived from the master seed, is shared by all trials.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Study {
    A,
    B,
    C,
    #[default]
    #[serde(rename = "custom")]
    Custom,
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Study::A),
            "B" | "b" => Ok(Study::B),
            "C" | "c" => Ok(Study::C),
            "custom" => Ok(Study::Custom),
            other => Err(Error::config("experiment", format!("unknown study {other:?}"))),
        }
    }
}

/// Flat experiment configuration. Absent keys take the defaults of the
/// reference scenario: 1 km² area, 16 UEs, 32 APs with 4 antennas, 12
/// subcarriers × 14 symbols at 30 kHz, 3 GHz carrier, 10 dBsm target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Study,
    pub area_m: f64,
    pub k_ues: usize,
    pub m_cf: usize,
    pub na_cf: usize,
    pub m_tx: usize,
    pub m_rx: usize,
    pub n_subcarriers: usize,
    pub scs_hz: f64,
    pub cp_s: f64,
    pub n_symbols: usize,
    pub carrier_hz: f64,
    /// Per-resource-element transmit budget of one tAP, W.
    pub p_per_tap_w: f64,
    pub rcs_dbsm: f64,
    /// Correlation of reflectivities seen by different tAPs.
    pub rcs_correlation: f64,
    pub noise_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub k_factor_db: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_exponent: f64,
    pub shadow_sigma_db: f64,
    pub target_speed_mps: f64,
    pub target_z_min_m: f64,
    pub target_z_max_m: f64,
    pub ue_height_m: f64,
    pub ap_height_m: f64,
    pub pilot_power_w: f64,
    pub trials: usize,
    pub seed: u64,
    pub csi_mode: CsiMode,
    pub steering_norm: SteeringNorm,
    pub layout: Layout,
    pub symbols: SymbolAlphabet,
    pub sensing_assoc: SensingAssociation,
    pub n_zones: usize,
    /// Nearest tAPs serving each UE; 0 means every tAP.
    pub serving_aps: usize,
    /// Whether nodes spend power on a dedicated sensing beam.
    pub sense_beam: bool,
    pub nc_sweep: Vec<usize>,
    pub case_a_splits: Vec<[usize; 2]>,
    pub case_b_splits: Vec<[usize; 2]>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Study::Custom,
            area_m: 1000.0,
            k_ues: 16,
            m_cf: 32,
            na_cf: 4,
            m_tx: 24,
            m_rx: 8,
            n_subcarriers: 12,
            scs_hz: 30e3,
            cp_s: 2.34e-6,
            n_symbols: 14,
            carrier_hz: 3e9,
            p_per_tap_w: 1.0,
            rcs_dbsm: 10.0,
            rcs_correlation: 0.0,
            noise_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            k_factor_db: 10.0,
            pathloss_intercept_db: -30.5,
            pathloss_exponent: 3.67,
            shadow_sigma_db: 4.0,
            target_speed_mps: 10.0,
            target_z_min_m: 20.0,
            target_z_max_m: 100.0,
            ue_height_m: 1.65,
            ap_height_m: 10.0,
            pilot_power_w: 0.1,
            trials: 1000,
            seed: 1,
            csi_mode: CsiMode::Mmse,
            steering_norm: SteeringNorm::Unit,
            layout: Layout::Random,
            symbols: SymbolAlphabet::Psk,
            sensing_assoc: SensingAssociation::Full,
            n_zones: 4,
            serving_aps: 0,
            sense_beam: true,
            nc_sweep: (1..=12).collect(),
            case_a_splits: vec![[30, 2], [24, 8]],
            case_b_splits: vec![[31, 1], [24, 8], [1, 31]],
        }
    }
}

fn positive(key: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn nonzero(key: &'static str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::config(key, "must be at least 1"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    /// Checks every constraint, naming the offending key. Study-specific
    /// lists (`case_a_splits`, `case_b_splits`) are checked by the study.
    pub fn validate(&self) -> Result<()> {
        positive("area_m", self.area_m)?;
        nonzero("m_cf", self.m_cf)?;
        nonzero("na_cf", self.na_cf)?;
        nonzero("m_tx", self.m_tx)?;
        nonzero("m_rx", self.m_rx)?;
        if self.m_tx + self.m_rx != self.m_cf {
            return Err(Error::config("m_tx", format!(
                "m_tx + m_rx = {} must equal m_cf = {}",
                self.m_tx + self.m_rx,
                self.m_cf
            )));
        }
        nonzero("n_subcarriers", self.n_subcarriers)?;
        nonzero("n_symbols", self.n_symbols)?;
        positive("scs_hz", self.scs_hz)?;
        if !(self.cp_s >= 0.0 && self.cp_s.is_finite()) {
            return Err(Error::config("cp_s", "cyclic prefix must be non-negative"));
        }
        positive("carrier_hz", self.carrier_hz)?;
        if !(self.p_per_tap_w >= 0.0 && self.p_per_tap_w.is_finite()) {
            return Err(Error::config("p_per_tap_w", "power must be non-negative"));
        }
        if !self.rcs_dbsm.is_finite() {
            return Err(Error::config("rcs_dbsm", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.rcs_correlation) {
            return Err(Error::config("rcs_correlation", "must lie in [0, 1]"));
        }
        if !self.noise_dbm_hz.is_finite() {
            return Err(Error::config("noise_dbm_hz", "must be finite"));
        }
        if !(self.noise_figure_db >= 0.0 && self.noise_figure_db.is_finite()) {
            return Err(Error::config("noise_figure_db", "noise figure must be >= 0 dB"));
        }
        if !self.k_factor_db.is_finite() {
            return Err(Error::config("k_factor_db", "must be finite"));
        }
        if !self.pathloss_intercept_db.is_finite() {
            return Err(Error::config("pathloss_intercept_db", "must be finite"));
        }
        if !(self.pathloss_exponent >= 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::config("pathloss_exponent", "must be non-negative"));
        }
        if !(self.shadow_sigma_db >= 0.0 && self.shadow_sigma_db.is_finite()) {
            return Err(Error::config("shadow_sigma_db", "must be non-negative"));
        }
        if !(self.target_speed_mps >= 0.0 && self.target_speed_mps.is_finite()) {
            return Err(Error::config("target_speed_mps", "must be non-negative"));
        }
        if !(self.target_z_min_m >= 0.0 && self.target_z_min_m <= self.target_z_max_m) {
            return Err(Error::config("target_z_min_m", "need 0 <= target_z_min_m <= target_z_max_m"));
        }
        if !self.target_z_max_m.is_finite() {
            return Err(Error::config("target_z_max_m", "must be finite"));
        }
        if !(self.ue_height_m >= 0.0 && self.ue_height_m.is_finite()) {
            return Err(Error::config("ue_height_m", "must be non-negative"));
        }
        if !(self.ap_height_m >= 0.0 && self.ap_height_m.is_finite()) {
            return Err(Error::config("ap_height_m", "must be non-negative"));
        }
        positive("pilot_power_w", self.pilot_power_w)?;
        nonzero("trials", self.trials)?;
        if self.trials > u32::MAX as usize {
            return Err(Error::config("trials", "at most 2^32 - 1 trials"));
        }
        ServiceArea::new(self.area_m)?.tile(self.n_zones).map_err(|_| {
            Error::config("n_zones", "must be 1, 2, or a perfect square")
        })?;
        if self.serving_aps > self.m_tx {
            return Err(Error::config("serving_aps", "cannot exceed m_tx"));
        }
        if self.nc_sweep.is_empty() {
            return Err(Error::config("nc_sweep", "must list at least one value"));
        }
        if self.nc_sweep.contains(&0) {
            return Err(Error::config("nc_sweep", "every entry must be at least 1"));
        }
        Ok(())
    }

    /// Validated tx/rx splits of a study list.
    pub fn splits(&self, key: &'static str) -> Result<&[[usize; 2]]> {
        let splits = match key {
            "case_a_splits" => &self.case_a_splits,
            "case_b_splits" => &self.case_b_splits,
            _ => return Err(Error::config(key, "unknown split list")),
        };
        if splits.is_empty() {
            return Err(Error::config(key, "must list at least one split"));
        }
        for &[tx, rx] in splits.iter() {
            if tx == 0 || rx == 0 || tx + rx != self.m_cf {
                return Err(Error::config(
                    key,
                    format!("split ({tx}, {rx}) needs both parts >= 1 and a sum of m_cf = {}", self.m_cf),
                ));
            }
        }
        Ok(splits)
    }

    pub fn numerology(&self, n_subcarriers: usize) -> Result<OfdmNumerology> {
        OfdmNumerology::new(n_subcarriers, self.scs_hz, self.cp_s, self.n_symbols)
    }

    pub fn wavelength(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_hz
    }

    /// `σ_α²` in m².
    pub fn rcs_variance(&self) -> f64 {
        db_to_linear(self.rcs_dbsm)
    }

    /// Noise power in dBm over the occupied bandwidth `N_c Δf`.
    pub fn noise_dbm(&self, n_subcarriers: usize) -> f64 {
        self.noise_dbm_hz + self.noise_figure_db + 10.0 * (n_subcarriers as f64 * self.scs_hz).log10()
    }

    /// `σ_z²` in W.
    pub fn noise_variance(&self, n_subcarriers: usize) -> f64 {
        dbm_to_watts(self.noise_dbm(n_subcarriers))
    }

    pub fn k_factor(&self) -> f64 {
        db_to_linear(self.k_factor_db)
    }
}
