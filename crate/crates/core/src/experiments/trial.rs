use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Layout};
use crate::channels::{
    estimate_ue_channel, rician_channel, steering_toward, CsiMode, PathLossModel, PilotConfig,
};
use crate::detector::{build_response, sensing_snr_cf, sensing_snr_mc, RcsCovariance, TxContribution};
use crate::geometry::{
    drop_cf_deployment, drop_entities, drop_mc_deployment, ArrayConfig, CfDeployment, CfParams,
    EntityParams, McDeployment, McParams, Position3D, ServiceArea, TargetState,
};
use crate::transmit::{
    allocate_power_uniform, build_comm_precoder, build_sense_precoder, synthesize_grid, CommBeam,
    NodePrecoders, OfdmNumerology, PrecoderSet, SenseBeam, SteeringNorm, SymbolAlphabet,
};
use crate::{linear_to_db, Error, Result};

/// Random-stream roles within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Entities = 1,
    Layout = 2,
    CfChannels = 3,
    CfSymbols = 4,
    McChannels = 5,
    McSymbols = 6,
}

/// Sweep index reserved for streams shared by every sweep point.
const SHARED_SWEEP: u64 = (1 << 24) - 1;

/// Generator for `(master, sweep, trial, purpose)`.
///
/// All streams share the ChaCha key derived from the master seed; the
/// 64-bit stream id packs `sweep` (24 bits), `trial` (32 bits) and
/// `purpose` (8 bits), so every combination is an independent keystream.
pub fn stream_rng(master: u64, sweep: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    debug_assert!(sweep <= SHARED_SWEEP && trial <= u32::MAX as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((sweep << 40) | (trial << 8) | purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cf,
    Mc,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::Cf => "cf",
            Architecture::Mc => "mc",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSample {
    pub trial: usize,
    pub arch: Architecture,
    pub sweep_id: String,
    pub gamma_linear: f64,
    pub gamma_db: f64,
}

impl SnrSample {
    pub fn new(trial: usize, arch: Architecture, sweep_id: &str, gamma_linear: f64) -> Self {
        Self {
            trial,
            arch,
            sweep_id: sweep_id.to_owned(),
            gamma_linear,
            gamma_db: linear_to_db(gamma_linear),
        }
    }
}

/// One configuration evaluated for both architectures.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub id: String,
    pub cf: CfParams,
    pub mc: McParams,
    pub numerology: OfdmNumerology,
}

/// Physical constants shared by both architectures at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPhysics {
    pub wavelength: f64,
    pub noise_variance: f64,
    pub rcs_correlation: f64,
    pub k_factor: f64,
    pub pathloss: PathLossModel,
    pub pilot_power_w: f64,
    pub csi_mode: CsiMode,
    pub steering_norm: SteeringNorm,
    pub symbols: SymbolAlphabet,
    pub sense_beam: bool,
}

impl LinkPhysics {
    pub fn from_config(cfg: &ExperimentConfig, numerology: &OfdmNumerology) -> Self {
        Self {
            wavelength: cfg.wavelength(),
            noise_variance: cfg.noise_variance(numerology.n_subcarriers),
            rcs_correlation: cfg.rcs_correlation,
            k_factor: cfg.k_factor(),
            pathloss: PathLossModel {
                intercept_db: cfg.pathloss_intercept_db,
                exponent: cfg.pathloss_exponent,
                shadow_sigma_db: cfg.shadow_sigma_db,
            },
            pilot_power_w: cfg.pilot_power_w,
            csi_mode: cfg.csi_mode,
            steering_norm: cfg.steering_norm,
            symbols: cfg.symbols,
            sense_beam: cfg.sense_beam,
        }
    }

    fn pilot(&self, users: usize) -> PilotConfig {
        PilotConfig {
            mode: self.csi_mode,
            power_w: self.pilot_power_w,
            length: users,
            users,
            noise_variance: self.noise_variance,
        }
    }
}

pub fn entity_params(cfg: &ExperimentConfig) -> Result<EntityParams> {
    Ok(EntityParams {
        area: ServiceArea::new(cfg.area_m)?,
        k_ues: cfg.k_ues,
        ue_height_m: cfg.ue_height_m,
        target_z_min_m: cfg.target_z_min_m,
        target_z_max_m: cfg.target_z_max_m,
        target_speed_mps: cfg.target_speed_mps,
        rcs_variance: cfg.rcs_variance(),
    })
}

/// UE and target drop of a trial; identical for every sweep point.
pub fn trial_entities(cfg: &ExperimentConfig, trial: usize) -> Result<(Vec<Position3D>, TargetState)> {
    let mut rng = stream_rng(cfg.seed, SHARED_SWEEP, trial as u64, Purpose::Entities);
    Ok(drop_entities(&entity_params(cfg)?, &mut rng))
}

/// Estimated-CSI conjugate beam from one node toward one UE, one precoder
/// per subcarrier. NLoS and LoS phase are redrawn on every subcarrier.
fn comm_beam<R: Rng + ?Sized>(
    phys: &LinkPhysics,
    array: &ArrayConfig,
    node: Position3D,
    ue: Position3D,
    ue_index: usize,
    users: usize,
    power_w: f64,
    numerology: &OfdmNumerology,
    rng: &mut R,
) -> Result<CommBeam> {
    let lsf = phys.pathloss.gain(node, ue, rng);
    let los = steering_toward(array, node, ue)?.into_vector();
    let pilot = phys.pilot(users);
    let per_subcarrier = (0..numerology.n_subcarriers)
        .map(|_| {
            let h = rician_channel(lsf, phys.k_factor, los.clone(), rng).realize();
            let est = estimate_ue_channel(&h, lsf, &pilot, rng)?;
            build_comm_precoder(&est)
        })
        .collect::<Result<Vec<DVector<Complex64>>>>()?;
    Ok(CommBeam {
        ue: ue_index,
        power_w,
        per_subcarrier,
    })
}

fn node_precoders<R: Rng + ?Sized>(
    phys: &LinkPhysics,
    array: &ArrayConfig,
    node: Position3D,
    budget_w: f64,
    served: &[usize],
    ues: &[Position3D],
    target: &TargetState,
    numerology: &OfdmNumerology,
    rng: &mut R,
) -> Result<NodePrecoders> {
    let n_cells = usize::from(phys.sense_beam);
    let split = allocate_power_uniform(budget_w, served.len(), n_cells)?;
    let comm = served
        .iter()
        .map(|&k| comm_beam(phys, array, node, ues[k], k, ues.len(), split.per_ue_w, numerology, rng))
        .collect::<Result<Vec<_>>>()?;
    let sense = if phys.sense_beam {
        vec![SenseBeam {
            power_w: split.per_cell_w,
            weights: build_sense_precoder(array, node, target.position, phys.steering_norm)?,
        }]
    } else {
        Vec::new()
    };
    Ok(NodePrecoders {
        n_antennas: array.num_elements,
        budget_w,
        comm,
        sense,
    })
}

/// CF sensing SNR of the zone containing the target.
pub fn evaluate_cf<R: Rng + ?Sized, S: Rng + ?Sized>(
    dep: &CfDeployment,
    ues: &[Position3D],
    target: &TargetState,
    phys: &LinkPhysics,
    numerology: &OfdmNumerology,
    channel_rng: &mut R,
    symbol_rng: &mut S,
) -> Result<f64> {
    let sensing = dep.sensing_set_for(target.position)?;
    let serving = dep.serving_sets(ues);
    let mut nodes = Vec::with_capacity(sensing.tx.len());
    for &m in &sensing.tx {
        let served: Vec<usize> = (0..ues.len())
            .filter(|&k| serving[k].binary_search(&m).is_ok())
            .collect();
        nodes.push(node_precoders(
            phys,
            &dep.ap_array,
            dep.ap_positions[m],
            dep.per_ap_power_w,
            &served,
            ues,
            target,
            numerology,
            channel_rng,
        )?);
    }
    let precoders = PrecoderSet { nodes };
    precoders.check_budgets()?;
    let grid = synthesize_grid(&precoders, numerology, phys.symbols, symbol_rng)?;
    let contributions: Vec<TxContribution<'_>> = sensing
        .tx
        .iter()
        .zip(&grid.nodes)
        .map(|(&m, signal)| TxContribution {
            position: dep.ap_positions[m],
            array: &dep.ap_array,
            signal,
        })
        .collect();
    let responses = sensing
        .rx
        .iter()
        .map(|&l| {
            build_response(
                dep.ap_positions[l],
                &dep.ap_array,
                &contributions,
                target,
                phys.wavelength,
                numerology,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let rcs = RcsCovariance::correlated(target.rcs_variance, phys.rcs_correlation, contributions.len());
    sensing_snr_cf(&responses, &rcs, phys.noise_variance)
}

/// Monostatic SNR of the BS responsible for the target's cell.
pub fn evaluate_mc<R: Rng + ?Sized, S: Rng + ?Sized>(
    dep: &McDeployment,
    ues: &[Position3D],
    target: &TargetState,
    phys: &LinkPhysics,
    numerology: &OfdmNumerology,
    channel_rng: &mut R,
    symbol_rng: &mut S,
) -> Result<f64> {
    let bs = dep.responsible_bs(target.position)?;
    let served = &dep.assign_users(ues)?[bs];
    let position = dep.bs_positions[bs];
    let node = node_precoders(
        phys,
        &dep.tx_array,
        position,
        dep.per_bs_power_w,
        served,
        ues,
        target,
        numerology,
        channel_rng,
    )?;
    let precoders = PrecoderSet { nodes: vec![node] };
    precoders.check_budgets()?;
    let grid = synthesize_grid(&precoders, numerology, phys.symbols, symbol_rng)?;
    let response = build_response(
        position,
        &dep.rx_array,
        &[TxContribution {
            position,
            array: &dep.tx_array,
            signal: &grid.nodes[0],
        }],
        target,
        phys.wavelength,
        numerology,
    )?;
    sensing_snr_mc(&response, target.rcs_variance, phys.noise_variance)
}

/// AP layout for a trial at a sweep point.
pub fn trial_cf_deployment(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    sweep: usize,
    trial: usize,
) -> Result<CfDeployment> {
    let mut rng = match cfg.layout {
        Layout::Random => stream_rng(cfg.seed, sweep as u64, trial as u64, Purpose::Layout),
        Layout::Fixed => stream_rng(cfg.seed, SHARED_SWEEP, 0, Purpose::Layout),
    };
    drop_cf_deployment(&point.cf, &mut rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub cf: SnrSample,
    pub mc: SnrSample,
}

/// One paired realization at a sweep point. Errors carry the trial index
/// and sweep id.
pub fn run_trial(cfg: &ExperimentConfig, point: &SweepPoint, sweep: usize, trial: usize) -> Result<TrialOutcome> {
    run_trial_inner(cfg, point, sweep, trial).map_err(|e| Error::Trial {
        trial,
        sweep: point.id.clone(),
        source: Box::new(e),
    })
}

fn run_trial_inner(cfg: &ExperimentConfig, point: &SweepPoint, sweep: usize, trial: usize) -> Result<TrialOutcome> {
    let (ues, target) = trial_entities(cfg, trial)?;
    let phys = LinkPhysics::from_config(cfg, &point.numerology);
    let s = sweep as u64;
    let t = trial as u64;

    let cf_dep = trial_cf_deployment(cfg, point, sweep, trial)?;
    let gamma_cf = evaluate_cf(
        &cf_dep,
        &ues,
        &target,
        &phys,
        &point.numerology,
        &mut stream_rng(cfg.seed, s, t, Purpose::CfChannels),
        &mut stream_rng(cfg.seed, s, t, Purpose::CfSymbols),
    )?;

    let mc_dep = drop_mc_deployment(&point.mc)?;
    let gamma_mc = evaluate_mc(
        &mc_dep,
        &ues,
        &target,
        &phys,
        &point.numerology,
        &mut stream_rng(cfg.seed, s, t, Purpose::McChannels),
        &mut stream_rng(cfg.seed, s, t, Purpose::McSymbols),
    )?;

    Ok(TrialOutcome {
        cf: SnrSample::new(trial, Architecture::Cf, &point.id, gamma_cf),
        mc: SnrSample::new(trial, Architecture::Mc, &point.id, gamma_mc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::studies::custom_point;
    use rand::RngCore;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let mut a = stream_rng(7, 0, 0, Purpose::Layout);
        let mut b = stream_rng(7, 0, 0, Purpose::Layout);
        assert_eq!(a.next_u64(), b.next_u64());
        let x = stream_rng(7, 0, 1, Purpose::Layout).next_u64();
        let y = stream_rng(7, 1, 0, Purpose::Layout).next_u64();
        let z = stream_rng(7, 0, 0, Purpose::Entities).next_u64();
        let w = stream_rng(8, 0, 0, Purpose::Layout).next_u64();
        let mut seen = vec![a.next_u64(), x, y, z, w];
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn trial_is_bit_reproducible() {
        let cfg = ExperimentConfig { n_subcarriers: 2, n_symbols: 2, ..Default::default() };
        let point = custom_point(&cfg).unwrap();
        let a = run_trial(&cfg, &point, 0, 3).unwrap();
        let b = run_trial(&cfg, &point, 0, 3).unwrap();
        assert_eq!(a.cf.gamma_linear.to_bits(), b.cf.gamma_linear.to_bits());
        assert_eq!(a.mc.gamma_linear.to_bits(), b.mc.gamma_linear.to_bits());
        assert!(a.cf.gamma_linear > 0.0 && a.mc.gamma_linear > 0.0);
    }

    #[test]
    fn comm_only_illumination_is_nonzero() {
        let cfg = ExperimentConfig {
            n_subcarriers: 2,
            n_symbols: 2,
            sense_beam: false,
            ..Default::default()
        };
        let point = custom_point(&cfg).unwrap();
        let out = run_trial(&cfg, &point, 0, 0).unwrap();
        assert!(out.cf.gamma_linear > 0.0 && out.mc.gamma_linear > 0.0);
    }

    #[test]
    fn errors_carry_trial_index() {
        let cfg = ExperimentConfig { n_subcarriers: 2, n_symbols: 2, ..Default::default() };
        let mut point = custom_point(&cfg).unwrap();
        point.cf.m_rx = 0;
        match run_trial(&cfg, &point, 0, 5) {
            Err(Error::Trial { trial, .. }) => assert_eq!(trial, 5),
            other => panic!("{other:?}"),
        }
    }
}
