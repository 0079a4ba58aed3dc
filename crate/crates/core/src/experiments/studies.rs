use rayon::prelude::*;

use super::cdf::{exceed_fraction, EmpiricalCdf};
use super::config::{ExperimentConfig, Study};
use super::trial::{run_trial, Architecture, SnrSample, SweepPoint};
use crate::geometry::{map_cf_to_fair_mc, CfParams, McParams, ServiceArea, UeAssociation};
use crate::{Error, Result};

fn cf_params(cfg: &ExperimentConfig, m_cf: usize, na_cf: usize, m_tx: usize, power_w: f64) -> Result<CfParams> {
    Ok(CfParams {
        area: ServiceArea::new(cfg.area_m)?,
        m_cf,
        na_cf,
        m_tx,
        m_rx: m_cf - m_tx,
        per_ap_power_w: power_w,
        ap_height_m: cfg.ap_height_m,
        n_zones: cfg.n_zones,
        sensing: cfg.sensing_assoc,
        ue_association: match cfg.serving_aps {
            0 => UeAssociation::AllTx,
            q => UeAssociation::NearestTx(q),
        },
    })
}

fn fair_point(cfg: &ExperimentConfig, id: String, m_tx: usize, n_subcarriers: usize) -> Result<SweepPoint> {
    let cf = cf_params(cfg, cfg.m_cf, cfg.na_cf, m_tx, cfg.p_per_tap_w)?;
    Ok(SweepPoint {
        id,
        mc: map_cf_to_fair_mc(&cf),
        cf,
        numerology: cfg.numerology(n_subcarriers)?,
    })
}

/// Single point from the flat config keys.
pub fn custom_point(cfg: &ExperimentConfig) -> Result<SweepPoint> {
    fair_point(cfg, "custom".into(), cfg.m_tx, cfg.n_subcarriers)
}

/// Subcarrier sweep for every configured tx/rx split.
pub fn case_a_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::new();
    for &[tx, rx] in cfg.splits("case_a_splits")? {
        for &nc in &cfg.nc_sweep {
            points.push(fair_point(cfg, format!("A_tx{tx}_rx{rx}_nc{nc}"), tx, nc)?);
        }
    }
    Ok(points)
}

/// Tx/rx role splits at fixed `M^CF`, `N_a^CF`.
pub fn case_b_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.splits("case_b_splits")?
        .iter()
        .map(|&[tx, rx]| fair_point(cfg, format!("B_tx{tx}_rx{rx}"), tx, cfg.n_subcarriers))
        .collect()
}

pub const CASE_C_CF_ANTENNAS: [usize; 2] = [1, 4];
pub const CASE_C_MC_NODES: [usize; 3] = [1, 2, 4];

/// 75 % of `n` rounded to the nearest integer, remainder to receive.
fn three_quarter_split(n: usize) -> (usize, usize) {
    let tx = (0.75 * n as f64).round() as usize;
    (tx, n - tx)
}

/// Antenna distribution at fixed `N_total = M^CF · N_a^CF`: CF with
/// `N_a ∈ {1, 4}` against MC with `M^MC ∈ {1, 2, 4}`. Network transmit
/// power is held at `M^CF · P^CF` of the base configuration in every variant.
pub fn case_c_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let n_total = cfg.m_cf * cfg.na_cf;
    let network_power = cfg.m_cf as f64 * cfg.p_per_tap_w;
    for d in CASE_C_CF_ANTENNAS.iter().chain(&CASE_C_MC_NODES) {
        if !n_total.is_multiple_of(*d) {
            return Err(Error::config(
                "m_cf",
                format!("total antenna count {n_total} must be divisible by {d}"),
            ));
        }
    }
    let area = ServiceArea::new(cfg.area_m)?;
    let numerology = cfg.numerology(cfg.n_subcarriers)?;
    let mut points = Vec::new();
    for na in CASE_C_CF_ANTENNAS {
        let m_cf = n_total / na;
        let (m_tx, m_rx) = three_quarter_split(m_cf);
        if m_tx == 0 || m_rx == 0 {
            return Err(Error::config("m_cf", format!("{m_cf} APs cannot be split 75/25")));
        }
        let cf = cf_params(cfg, m_cf, na, m_tx, network_power / m_cf as f64)?;
        for m_mc in CASE_C_MC_NODES {
            let (n_tx, n_rx) = three_quarter_split(n_total / m_mc);
            if n_tx == 0 || n_rx == 0 {
                return Err(Error::config("m_cf", "BS arrays too small for a 75/25 split"));
            }
            let mc = McParams {
                area,
                m_mc,
                n_tx,
                n_rx,
                per_bs_power_w: network_power / m_mc as f64,
                bs_height_m: cfg.ap_height_m,
            };
            points.push(SweepPoint {
                id: format!("C_cfna{na}_mc{m_mc}"),
                cf: cf.clone(),
                mc,
                numerology,
            });
        }
    }
    Ok(points)
}

pub fn study_points(cfg: &ExperimentConfig, study: Study) -> Result<Vec<SweepPoint>> {
    match study {
        Study::A => case_a_points(cfg),
        Study::B => case_b_points(cfg),
        Study::C => case_c_points(cfg),
        Study::Custom => Ok(vec![custom_point(cfg)?]),
    }
}

/// Paired samples of every sweep point, ordered by sweep point then trial.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub points: Vec<SweepPoint>,
    pub samples: Vec<SnrSample>,
}

impl StudyResult {
    pub fn curve(&self, sweep_id: &str, arch: Architecture) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.arch == arch && s.sweep_id == sweep_id)
            .map(|s| s.gamma_db)
            .collect()
    }

    pub fn cdf(&self, sweep_id: &str, arch: Architecture) -> Result<EmpiricalCdf> {
        EmpiricalCdf::new(&self.curve(sweep_id, arch))
    }

    /// Fraction of trials at `sweep_id` where CF strictly beats MC.
    pub fn cf_exceeds_mc(&self, sweep_id: &str) -> Result<f64> {
        exceed_fraction(&self.curve(sweep_id, Architecture::Cf), &self.curve(sweep_id, Architecture::Mc))
    }

    /// Number of emitted CDFs (one per architecture per sweep point).
    pub fn curve_count(&self) -> usize {
        2 * self.points.len()
    }
}

/// Runs `trials` paired trials at every point on a pool of `workers`
/// threads. Output order and content do not depend on `workers`.
pub fn run_points(cfg: &ExperimentConfig, points: Vec<SweepPoint>, workers: usize) -> Result<StudyResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let outcomes = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, t)| run_trial(cfg, &points[s], s, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut samples = Vec::with_capacity(2 * outcomes.len());
    for s in 0..points.len() {
        let block = &outcomes[s * cfg.trials..(s + 1) * cfg.trials];
        samples.extend(block.iter().map(|o| o.cf.clone()));
        samples.extend(block.iter().map(|o| o.mc.clone()));
    }
    Ok(StudyResult { points, samples })
}

pub fn run_study(cfg: &ExperimentConfig, study: Study, workers: usize) -> Result<StudyResult> {
    run_points(cfg, study_points(cfg, study)?, workers)
}

pub fn run_case_study_a(cfg: &ExperimentConfig, workers: usize) -> Result<StudyResult> {
    run_study(cfg, Study::A, workers)
}

pub fn run_case_study_b(cfg: &ExperimentConfig, workers: usize) -> Result<StudyResult> {
    run_study(cfg, Study::B, workers)
}

pub fn run_case_study_c(cfg: &ExperimentConfig, workers: usize) -> Result<StudyResult> {
    run_study(cfg, Study::C, workers)
}
