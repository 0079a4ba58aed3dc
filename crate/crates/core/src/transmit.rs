//! OFDM numerology, precoders, power allocation, and synthesis of the
//! dual-purpose (communication + sensing) downlink grid.
//!
//! Resource elements are indexed `re = n + N_c·n'` (subcarrier fastest).

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{steering_toward, ChannelEstimate};
use crate::geometry::{ArrayConfig, Position3D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmNumerology {
    pub n_subcarriers: usize,
    pub scs_hz: f64,
    pub cp_s: f64,
    pub n_symbols: usize,
}

impl OfdmNumerology {
    pub fn new(n_subcarriers: usize, scs_hz: f64, cp_s: f64, n_symbols: usize) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::config("n_subcarriers", "must be at least 1"));
        }
        if n_symbols == 0 {
            return Err(Error::config("n_symbols", "must be at least 1"));
        }
        if !(scs_hz > 0.0 && scs_hz.is_finite()) {
            return Err(Error::config("scs_hz", "must be positive"));
        }
        if !(cp_s >= 0.0 && cp_s.is_finite()) {
            return Err(Error::config("cp_s", "must be non-negative"));
        }
        Ok(Self {
            n_subcarriers,
            scs_hz,
            cp_s,
            n_symbols,
        })
    }

    /// `B = N_c Δf`
    pub fn bandwidth(&self) -> f64 {
        self.n_subcarriers as f64 * self.scs_hz
    }

    /// `T_s = 1/Δf + T_CP`
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.scs_hz + self.cp_s
    }

    pub fn resource_elements(&self) -> usize {
        self.n_subcarriers * self.n_symbols
    }

    pub fn re_index(&self, n: usize, n_sym: usize) -> usize {
        n + self.n_subcarriers * n_sym
    }
}

/// Scaling of the sensing (steering) precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeringNorm {
    /// `a/√N_a`, so the sensing power coefficient is radiated power.
    #[default]
    Unit,
    /// The bare steering vector, `‖w‖² = N_a`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolAlphabet {
    /// Phase uniform on [0, 2π).
    #[default]
    Psk,
    Qpsk,
}

impl SymbolAlphabet {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            SymbolAlphabet::Psk => Complex64::from_polar(1.0, rng.random::<f64>() * TAU),
            SymbolAlphabet::Qpsk => {
                let q = rng.random_range(0..4u8) as f64;
                Complex64::from_polar(1.0, FRAC_PI_2 * q + 0.5 * FRAC_PI_2)
            }
        }
    }
}

/// Conjugate-beamforming precoder `ĥ*/√E[‖ĥ‖²]`, normalized by the analytic
/// ensemble mean rather than by the realization.
pub fn build_comm_precoder(estimate: &ChannelEstimate) -> Result<DVector<Complex64>> {
    if !(estimate.expected_norm_sq > 0.0) {
        return Err(Error::DegenerateChannel);
    }
    Ok(estimate.estimate.map(|x| x.conj()) / Complex64::new(estimate.expected_norm_sq.sqrt(), 0.0))
}

/// Steering-vector precoder from `node` toward the probed position.
pub fn build_sense_precoder(
    arr: &ArrayConfig,
    node: Position3D,
    probed: Position3D,
    norm: SteeringNorm,
) -> Result<DVector<Complex64>> {
    let a = steering_toward(arr, node, probed)?.into_vector();
    Ok(match norm {
        SteeringNorm::Unit => a / Complex64::new((arr.num_elements as f64).sqrt(), 0.0),
        SteeringNorm::Literal => a,
    })
}

/// Power coefficients of one transmit node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    /// μ for every served UE.
    pub per_ue_w: f64,
    /// η for every probed cell.
    pub per_cell_w: f64,
}

impl PowerSplit {
    pub fn total(&self, n_ues: usize, n_cells: usize) -> f64 {
        self.per_ue_w * n_ues as f64 + self.per_cell_w * n_cells as f64
    }
}

/// Uniform split of `budget_w` over served UEs and probed cells. A node
/// serving nothing stays silent.
pub fn allocate_power_uniform(budget_w: f64, n_ues: usize, n_cells: usize) -> Result<PowerSplit> {
    if !(budget_w >= 0.0 && budget_w.is_finite()) {
        return Err(Error::config("p_per_tap_w", "power budget must be non-negative"));
    }
    let consumers = n_ues + n_cells;
    if consumers == 0 {
        return Ok(PowerSplit {
            per_ue_w: 0.0,
            per_cell_w: 0.0,
        });
    }
    let share = budget_w / consumers as f64;
    Ok(PowerSplit {
        per_ue_w: share,
        per_cell_w: share,
    })
}

/// Communication beam toward one UE; precoders vary per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct CommBeam {
    pub ue: usize,
    pub power_w: f64,
    pub per_subcarrier: Vec<DVector<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseBeam {
    pub power_w: f64,
    pub weights: DVector<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePrecoders {
    pub n_antennas: usize,
    pub budget_w: f64,
    pub comm: Vec<CommBeam>,
    pub sense: Vec<SenseBeam>,
}

impl NodePrecoders {
    pub fn allocated_power(&self) -> f64 {
        self.comm.iter().map(|b| b.power_w).sum::<f64>()
            + self.sense.iter().map(|b| b.power_w).sum::<f64>()
    }
}

/// Precoders of every transmit node of one architecture.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecoderSet {
    pub nodes: Vec<NodePrecoders>,
}

impl PrecoderSet {
    /// Checks the per-node budget `Σμ + Ση ≤ P_m` (1e−9 relative slack).
    pub fn check_budgets(&self) -> Result<()> {
        for (m, node) in self.nodes.iter().enumerate() {
            if node.allocated_power() > node.budget_w * (1.0 + 1e-9) {
                return Err(Error::DimensionMismatch(format!(
                    "node {m} allocates {} W above its {} W budget",
                    node.allocated_power(),
                    node.budget_w
                )));
            }
        }
        Ok(())
    }
}

/// Signal of one transmit node over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignal {
    pub n_antennas: usize,
    /// `samples[re·N_a + a]`
    pub samples: Vec<Complex64>,
    /// Data symbols `x_{k,m}` per comm beam, indexed by resource element.
    pub comm_symbols: Vec<Vec<Complex64>>,
    /// Sensing symbols `x_{0,m}` per sense beam.
    pub sense_symbols: Vec<Vec<Complex64>>,
}

impl NodeSignal {
    pub fn at(&self, re: usize) -> &[Complex64] {
        &self.samples[re * self.n_antennas..(re + 1) * self.n_antennas]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitGrid {
    pub numerology: OfdmNumerology,
    pub nodes: Vec<NodeSignal>,
}

impl TransmitGrid {
    /// `s_m(n, n')`
    pub fn signal(&self, node: usize, n: usize, n_sym: usize) -> &[Complex64] {
        self.nodes[node].at(self.numerology.re_index(n, n_sym))
    }
}

/// Builds `s_m(n,n') = Σ_k √μ w_k(n) x_k(n,n') + Σ_i √η w_0 x_0(n,n')` for
/// every node, with independent unit-modulus symbols.
pub fn synthesize_grid<R: Rng + ?Sized>(
    precoders: &PrecoderSet,
    numerology: &OfdmNumerology,
    alphabet: SymbolAlphabet,
    rng: &mut R,
) -> Result<TransmitGrid> {
    let n_re = numerology.resource_elements();
    let mut nodes = Vec::with_capacity(precoders.nodes.len());
    for node in &precoders.nodes {
        let na = node.n_antennas;
        let mut samples = vec![Complex64::new(0.0, 0.0); n_re * na];
        let mut comm_symbols = Vec::with_capacity(node.comm.len());
        for beam in &node.comm {
            if beam.per_subcarrier.len() != numerology.n_subcarriers {
                return Err(Error::DimensionMismatch(format!(
                    "comm beam has {} subcarrier precoders, grid has {}",
                    beam.per_subcarrier.len(),
                    numerology.n_subcarriers
                )));
            }
            let amp = beam.power_w.sqrt();
            let symbols: Vec<Complex64> = (0..n_re).map(|_| alphabet.draw(rng)).collect();
            for (re, x) in symbols.iter().enumerate() {
                let w = &beam.per_subcarrier[re % numerology.n_subcarriers];
                check_len(w.len(), na)?;
                let coeff = x * amp;
                for (s, wi) in samples[re * na..(re + 1) * na].iter_mut().zip(w.iter()) {
                    *s += wi * coeff;
                }
            }
            comm_symbols.push(symbols);
        }
        let mut sense_symbols = Vec::with_capacity(node.sense.len());
        for beam in &node.sense {
            check_len(beam.weights.len(), na)?;
            let amp = beam.power_w.sqrt();
            let symbols: Vec<Complex64> = (0..n_re).map(|_| alphabet.draw(rng)).collect();
            for (re, x) in symbols.iter().enumerate() {
                let coeff = x * amp;
                for (s, wi) in samples[re * na..(re + 1) * na].iter_mut().zip(beam.weights.iter()) {
                    *s += wi * coeff;
                }
            }
            sense_symbols.push(symbols);
        }
        nodes.push(NodeSignal {
            n_antennas: na,
            samples,
            comm_symbols,
            sense_symbols,
        });
    }
    Ok(TransmitGrid {
        numerology: *numerology,
        nodes,
    })
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!(
            "precoder length {got} does not match {want} antennas"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{complex_normal, estimate_ue_channel, CsiMode, PilotConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(phase: f64) -> Complex64 {
        Complex64::from_polar(1.0, phase)
    }

    fn num(nc: usize, ns: usize) -> OfdmNumerology {
        OfdmNumerology::new(nc, 30e3, 2.34e-6, ns).unwrap()
    }

    #[test]
    fn numerology_derived_quantities() {
        let n = num(12, 14);
        assert_eq!(n.bandwidth(), 360e3);
        assert!((n.symbol_duration() - (1.0 / 30e3 + 2.34e-6)).abs() < 1e-18);
        assert!(OfdmNumerology::new(0, 30e3, 0.0, 14).is_err());
        assert!(OfdmNumerology::new(1, 30e3, 0.0, 0).is_err());
    }

    fn perfect_estimate(h: DVector<Complex64>, lsf: f64) -> ChannelEstimate {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pilot = PilotConfig {
            mode: CsiMode::Perfect,
            power_w: 0.1,
            length: 1,
            users: 1,
            noise_variance: 1.0,
        };
        estimate_ue_channel(&h, lsf, &pilot, &mut rng).unwrap()
    }

    #[test]
    fn comm_precoder_at_mean_norm_is_unit() {
        let h = DVector::from_vec(vec![unit(0.2) * 2f64.sqrt(), unit(-1.0) * 2f64.sqrt()]);
        let w = build_comm_precoder(&perfect_estimate(h.clone(), 2.0)).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-14);
        let w3 = build_comm_precoder(&perfect_estimate(h * Complex64::new(3.0, 0.0), 2.0)).unwrap();
        assert!((w3 - w * Complex64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn comm_precoder_rejects_zero_mean_norm() {
        let est = perfect_estimate(DVector::zeros(2), 0.0);
        assert!(matches!(build_comm_precoder(&est), Err(Error::DegenerateChannel)));
    }

    #[test]
    fn comm_precoder_ensemble_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pilot = PilotConfig {
            mode: CsiMode::Mmse,
            power_w: 0.1,
            length: 4,
            users: 4,
            noise_variance: 0.3,
        };
        let beta: f64 = 0.7;
        let n = 10_000;
        let mean = (0..n)
            .map(|_| {
                let h = DVector::from_fn(4, |_, _| complex_normal(&mut rng) * beta.sqrt());
                let est = estimate_ue_channel(&h, beta, &pilot, &mut rng).unwrap();
                build_comm_precoder(&est).unwrap().norm_squared()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn sense_precoder_norms_and_gain() {
        let arr = ArrayConfig::ula(8).unwrap();
        let node = Position3D::new(0.0, 0.0, 10.0);
        let p = Position3D::new(300.0, 400.0, 60.0);
        let w = build_sense_precoder(&arr, node, p, SteeringNorm::Unit).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-14);
        let lit = build_sense_precoder(&arr, node, p, SteeringNorm::Literal).unwrap();
        assert!((lit.norm_squared() - 8.0).abs() < 1e-12);
        let a = steering_toward(&arr, node, p).unwrap().into_vector();
        let gain = a.dotc(&w).norm_sqr();
        assert!((gain - 8.0).abs() < 1e-12);
        assert!(build_sense_precoder(&arr, node, node, SteeringNorm::Unit).is_err());
    }

    #[test]
    fn uniform_power_examples() {
        let s = allocate_power_uniform(1.0, 16, 1).unwrap();
        assert!((s.per_ue_w - 1.0 / 17.0).abs() < 1e-15);
        assert!((s.total(16, 1) - 1.0).abs() < 1e-15);
        let s = allocate_power_uniform(2.5, 0, 1).unwrap();
        assert_eq!(s.per_cell_w, 2.5);
        let s = allocate_power_uniform(2.5, 0, 0).unwrap();
        assert_eq!(s.total(0, 0), 0.0);
    }

    fn sense_only(power: f64, w: DVector<Complex64>) -> PrecoderSet {
        PrecoderSet {
            nodes: vec![NodePrecoders {
                n_antennas: w.len(),
                budget_w: power,
                comm: vec![],
                sense: vec![SenseBeam { power_w: power, weights: w }],
            }],
        }
    }

    #[test]
    fn lone_unit_sense_beam_has_unit_norm_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let arr = ArrayConfig::ula(4).unwrap();
        let w = build_sense_precoder(
            &arr,
            Position3D::new(0.0, 0.0, 10.0),
            Position3D::new(100.0, 30.0, 50.0),
            SteeringNorm::Unit,
        )
        .unwrap();
        let numer = num(3, 2);
        let grid = synthesize_grid(&sense_only(1.0, w), &numer, SymbolAlphabet::Psk, &mut rng).unwrap();
        for n in 0..3 {
            for ns in 0..2 {
                let s = grid.signal(0, n, ns);
                let e: f64 = s.iter().map(|x| x.norm_sqr()).sum();
                assert!((e - 1.0).abs() < 1e-14);
            }
        }
        for sym in grid.nodes[0].sense_symbols[0].iter() {
            assert!((sym.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_power_gives_silent_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = DVector::from_element(3, unit(0.0));
        let grid = synthesize_grid(&sense_only(0.0, w), &num(2, 2), SymbolAlphabet::Qpsk, &mut rng).unwrap();
        assert!(grid.nodes[0].samples.iter().all(|x| x.norm() == 0.0));
    }

    fn mixed_node(rng: &mut ChaCha8Rng, scale: f64) -> PrecoderSet {
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let comm = (0..3)
            .map(|k| CommBeam {
                ue: k,
                power_w: 0.2 * scale,
                per_subcarrier: (0..2)
                    .map(|_| DVector::from_fn(4, |_, _| complex_normal(&mut r2)))
                    .collect(),
            })
            .collect();
        let _ = rng;
        PrecoderSet {
            nodes: vec![NodePrecoders {
                n_antennas: 4,
                budget_w: scale,
                comm,
                sense: vec![SenseBeam {
                    power_w: 0.4 * scale,
                    weights: DVector::from_element(4, unit(0.3) * 0.5),
                }],
            }],
        }
    }

    #[test]
    fn grid_energy_matches_allocation_on_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = mixed_node(&mut rng, 1.0);
        let numer = num(2, 1);
        let draws = 10_000;
        let mut mean = [0.0; 2];
        for _ in 0..draws {
            let g = synthesize_grid(&set, &numer, SymbolAlphabet::Psk, &mut rng).unwrap();
            for (n, m) in mean.iter_mut().enumerate() {
                *m += g.signal(0, n, 0).iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
        }
        let node = &set.nodes[0];
        for (n, m) in mean.iter().enumerate() {
            let expect: f64 = node.comm.iter().map(|b| b.power_w * b.per_subcarrier[n].norm_squared()).sum::<f64>()
                + node.sense.iter().map(|b| b.power_w * b.weights.norm_squared()).sum::<f64>();
            let got = m / draws as f64;
            assert!((got - expect).abs() < 0.02 * expect, "{got} vs {expect}");
        }
    }

    #[test]
    fn budget_check_flags_overspend() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut set = mixed_node(&mut rng, 1.0);
        assert!(set.check_budgets().is_ok());
        set.nodes[0].budget_w = 0.5;
        assert!(set.check_budgets().is_err());
    }

    #[test]
    fn power_scaling_scales_grid_energy_exactly() {
        let numer = num(2, 3);
        let a = synthesize_grid(&mixed_node(&mut ChaCha8Rng::seed_from_u64(6), 1.0), &numer, SymbolAlphabet::Psk, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = synthesize_grid(&mixed_node(&mut ChaCha8Rng::seed_from_u64(6), 4.0), &numer, SymbolAlphabet::Psk, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        for (x, y) in a.nodes[0].samples.iter().zip(&b.nodes[0].samples) {
            assert!((x * 2.0 - y).norm() < 1e-13);
        }
    }
}
