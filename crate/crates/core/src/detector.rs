//! Stacked sensing responses, GLRT statistics, false-alarm thresholds, and
//! sensing SNR for both architectures.
//!
//! Every line-of-sight target channel is rank one, so the response seen by a
//! receive array factors as `column_m = c_m ⊗ a_rx`: a per-resource-element
//! coefficient sequence `c_m` times the receive steering vector. The stacked
//! matrix (antenna fastest, then subcarrier, then symbol) is therefore kept as
//! the pair `(a_rx, C)` and only materialized for reference computations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::channels::{complex_normal, steering_vector, TargetLink};
use crate::geometry::{ArrayConfig, Position3D, TargetState};
use crate::transmit::{NodeSignal, OfdmNumerology};
use crate::{Error, Result};

/// Stacked response `D̈` of one receive node, stored in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedResponse {
    /// Receive steering vector (length `N_rx`).
    pub rx_steering: DVector<Complex64>,
    /// `coeffs[(re, m)]`: contribution of transmitter `m` at resource element `re`.
    pub coeffs: DMatrix<Complex64>,
}

impl StackedResponse {
    /// Wraps an arbitrary `rows × cols` matrix (single receive antenna).
    pub fn from_matrix(d: DMatrix<Complex64>) -> Self {
        Self {
            rx_steering: DVector::from_element(1, Complex64::new(1.0, 0.0)),
            coeffs: d,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rx_steering.len() * self.coeffs.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Explicit `(N_rx·N_c·N_s) × |M^tx|` matrix.
    pub fn materialize(&self) -> DMatrix<Complex64> {
        let nrx = self.rx_steering.len();
        DMatrix::from_fn(self.nrows(), self.ncols(), |row, m| {
            self.rx_steering[row % nrx] * self.coeffs[(row / nrx, m)]
        })
    }

    /// `D̈ᴴD̈`, accumulated over resource elements.
    pub fn gram(&self) -> DMatrix<Complex64> {
        self.coeffs.ad_mul(&self.coeffs) * Complex64::new(self.rx_steering.norm_squared(), 0.0)
    }

    /// `D̈ᴴ ÿ`
    pub fn adjoint_apply(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if y.len() != self.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "observation has {} entries, response has {} rows",
                y.len(),
                self.nrows()
            )));
        }
        let nrx = self.rx_steering.len();
        let beamformed = DVector::from_fn(self.coeffs.nrows(), |re, _| {
            let block = y.rows(re * nrx, nrx);
            self.rx_steering.dotc(&block)
        });
        Ok(self.coeffs.ad_mul(&beamformed))
    }

    /// `D̈ α`
    pub fn apply(&self, alpha: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if alpha.len() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "reflectivity vector has {} entries, response has {} columns",
                alpha.len(),
                self.ncols()
            )));
        }
        let per_re = &self.coeffs * alpha;
        let nrx = self.rx_steering.len();
        Ok(DVector::from_fn(self.nrows(), |row, _| {
            self.rx_steering[row % nrx] * per_re[row / nrx]
        }))
    }

    pub fn column_energy(&self, m: usize) -> f64 {
        self.rx_steering.norm_squared() * self.coeffs.column(m).norm_squared()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.rx_steering.norm_squared() * self.coeffs.norm_squared()
    }

    /// Singular values of `D̈`, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.coeffs.is_empty() {
            return Vec::new();
        }
        let scale = self.rx_steering.norm();
        let (values, norm) = normalized_singular_values(&self.coeffs);
        let mut sv: Vec<f64> = values.iter().map(|s| s * norm * scale).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Numerical rank with tolerance `max(rows, cols)·ε·σ_max`.
    pub fn rank(&self) -> usize {
        let sv = self.singular_values();
        let tol = rank_tolerance(self.nrows(), self.ncols(), &sv);
        sv.iter().filter(|&&s| s > tol).count()
    }
}

/// Singular values of `m / ‖m‖_F`, returned with `‖m‖_F`. nalgebra's
/// iteration loses accuracy on matrices with entries far from unit
/// magnitude (path gains put response entries near 1e-7).
fn normalized_singular_values(m: &DMatrix<Complex64>) -> (DVector<f64>, f64) {
    let norm = m.norm();
    let scaled = if norm > 0.0 { m / Complex64::new(norm, 0.0) } else { m.clone() };
    (scaled.svd(false, false).singular_values, norm)
}

fn rank_tolerance(rows: usize, cols: usize, sv: &[f64]) -> f64 {
    let largest = sv.first().copied().unwrap_or(0.0);
    rows.max(cols) as f64 * f64::EPSILON * largest
}

/// One transmitter contributing a column to a stacked response.
#[derive(Debug, Clone, Copy)]
pub struct TxContribution<'a> {
    pub position: Position3D,
    pub array: &'a ArrayConfig,
    pub signal: &'a NodeSignal,
}

/// Builds `D̈` for a receive node: column `m` stacks
/// `√β · a_rx (a_txᴴ s_m(n,n')) · ρ(n) ξ(n')` over the grid, with the true
/// delay, Doppler, and angles of each path.
pub fn build_response(
    rx_position: Position3D,
    rx_array: &ArrayConfig,
    transmitters: &[TxContribution<'_>],
    target: &TargetState,
    wavelength: f64,
    numerology: &OfdmNumerology,
) -> Result<StackedResponse> {
    let n_re = numerology.resource_elements();
    let mut coeffs = DMatrix::zeros(n_re, transmitters.len());
    let mut rx_steering = None;
    for (m, tx) in transmitters.iter().enumerate() {
        if tx.signal.n_antennas != tx.array.num_elements {
            return Err(Error::DimensionMismatch(format!(
                "transmitter {m} signal has {} antennas, array has {}",
                tx.signal.n_antennas, tx.array.num_elements
            )));
        }
        if tx.signal.samples.len() != n_re * tx.signal.n_antennas {
            return Err(Error::DimensionMismatch(format!(
                "transmitter {m} signal does not cover the {n_re}-element grid"
            )));
        }
        let link = TargetLink::new(tx.position, rx_position, target, wavelength, numerology)?;
        if rx_steering.is_none() {
            rx_steering = Some(steering_vector(rx_array, link.aoa.0, link.aoa.1).into_vector());
        }
        let a_tx = steering_vector(tx.array, link.aod.0, link.aod.1).into_vector();
        let amp = link.lsf_gain.sqrt();
        let delay: Vec<Complex64> = (0..numerology.n_subcarriers)
            .map(|n| link.delay_phase(n, numerology))
            .collect();
        for n_sym in 0..numerology.n_symbols {
            let doppler = link.doppler_phase(n_sym, numerology) * amp;
            for (n, rho) in delay.iter().enumerate() {
                let re = numerology.re_index(n, n_sym);
                let s = tx.signal.at(re);
                let beam: Complex64 = a_tx.iter().zip(s).map(|(a, x)| a.conj() * x).sum();
                coeffs[(re, m)] = beam * rho * doppler;
            }
        }
    }
    let rx_steering = match rx_steering {
        Some(a) => a,
        None => {
            let (az, el) = crate::channels::angles_between(rx_position, target.position)?;
            steering_vector(rx_array, az, el).into_vector()
        }
    };
    Ok(StackedResponse { rx_steering, coeffs })
}

/// Reflectivity covariance `R = E[ααᴴ]` across transmitters.
#[derive(Debug, Clone, PartialEq)]
pub struct RcsCovariance {
    pub matrix: DMatrix<Complex64>,
}

impl RcsCovariance {
    /// Independent reflectivities with common variance, `σ_α² I`.
    pub fn iid(variance: f64, n: usize) -> Self {
        Self::correlated(variance, 0.0, n)
    }

    /// `σ_α²((1−ρ)I + ρ 11ᵀ)`
    pub fn correlated(variance: f64, rho: f64, n: usize) -> Self {
        Self {
            matrix: DMatrix::from_fn(n, n, |i, j| {
                let c = if i == j { 1.0 } else { rho };
                Complex64::new(variance * c, 0.0)
            }),
        }
    }

    /// Accepts any Hermitian positive semidefinite matrix.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("RCS covariance must be square".into()));
        }
        let scale = matrix.norm().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::DimensionMismatch("RCS covariance must be Hermitian".into()));
        }
        let min_eig = matrix.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-12 * scale {
            return Err(Error::DimensionMismatch(
                "RCS covariance must be positive semidefinite".into(),
            ));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// One draw `α ~ CN(0, R)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<Complex64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let g = DVector::from_fn(self.dim(), |i, _| {
            complex_normal(rng) * eig.eigenvalues[i].max(0.0).sqrt()
        });
        &eig.eigenvectors * g
    }
}

/// `ÿ = D̈α + z̈` (H1) or `ÿ = z̈` (H0, `alpha = None`) with `z̈ ~ CN(0, σ²I)`.
pub fn simulate_observation<R: Rng + ?Sized>(
    response: &StackedResponse,
    alpha: Option<&DVector<Complex64>>,
    noise_variance: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    let sigma = noise_variance.sqrt();
    let mut y = match alpha {
        Some(a) => response.apply(a)?,
        None => DVector::zeros(response.nrows()),
    };
    if sigma > 0.0 {
        for v in y.iter_mut() {
            *v += complex_normal(rng) * sigma;
        }
    }
    Ok(y)
}

/// Projection energy and ML reflectivity estimate at one receive node.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub energy: f64,
    pub alpha_estimate: DVector<Complex64>,
    pub rank: usize,
}

/// `‖D̈D̈†ÿ‖²` and `α̂ = D̈†ÿ` through the Gram matrix.
///
/// Columns are first equilibrated, `G' = S D̈ᴴD̈ S` with `S = diag(1/‖d_m‖)`,
/// since path-loss spreads between transmitters otherwise dominate the
/// conditioning. With `G' = UΛUᴴ` restricted to the numerical rank of `D̈`,
/// the energy is `Σ |u_iᴴ S D̈ᴴÿ|²/λ_i`.
pub fn project_gram(response: &StackedResponse, y: &DVector<Complex64>) -> Result<Projection> {
    let rank = response.rank();
    let b = response.adjoint_apply(y)?;
    let mut alpha = DVector::zeros(response.ncols());
    if rank == 0 {
        return Ok(Projection {
            energy: 0.0,
            alpha_estimate: alpha,
            rank,
        });
    }
    let gram = response.gram();
    let scale = DVector::from_fn(gram.nrows(), |m, _| {
        let g = gram[(m, m)].re;
        if g > 0.0 {
            1.0 / g.sqrt()
        } else {
            0.0
        }
    });
    let scaled = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| gram[(i, j)] * (scale[i] * scale[j]));
    let sb = b.zip_map(&scale, |v, s| v * s);
    let eig = scaled.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut energy = 0.0;
    for &i in order.iter().take(rank) {
        let u = eig.eigenvectors.column(i);
        let coord = u.dotc(&sb);
        let lambda = eig.eigenvalues[i];
        energy += coord.norm_sqr() / lambda;
        alpha += u * (coord / lambda);
    }
    let alpha_estimate = alpha.zip_map(&scale, |a, s| a * s);
    Ok(Projection {
        energy,
        alpha_estimate,
        rank,
    })
}

/// Reference path: `‖Q_rᴴ ÿ‖²` on the materialized `D̈`, with `Q_r` the
/// leading `r` columns of a column-pivoted Householder QR and `r` the rank
/// of the factored form. The pivoted QR is used instead of an SVD because
/// nalgebra's complex SVD can lose accuracy when a singular value is exactly
/// zero, which happens whenever the grid has fewer elements than columns.
pub fn project_explicit(response: &StackedResponse, y: &DVector<Complex64>) -> Result<f64> {
    if y.len() != response.nrows() {
        return Err(Error::DimensionMismatch("observation length".into()));
    }
    let rank = response.rank();
    if rank == 0 {
        return Ok(0.0);
    }
    let q = response.materialize().col_piv_qr().q();
    Ok(q.columns(0, rank).ad_mul(y).norm_squared())
}

fn check_pairs(responses: &[StackedResponse], observations: &[DVector<Complex64>]) -> Result<()> {
    if responses.len() != observations.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses but {} observations",
            responses.len(),
            observations.len()
        )));
    }
    Ok(())
}

/// CF statistic `Σ_l ‖D̈_l D̈_l† ÿ_l‖²` (Gram path).
pub fn glrt_statistic_cf(responses: &[StackedResponse], observations: &[DVector<Complex64>]) -> Result<f64> {
    check_pairs(responses, observations)?;
    let mut total = 0.0;
    let mut any = false;
    for (d, y) in responses.iter().zip(observations) {
        let p = project_gram(d, y)?;
        any |= p.rank > 0;
        total += p.energy;
    }
    if !any {
        return Err(Error::UndefinedTest);
    }
    Ok(total)
}

/// CF statistic through the explicit SVD projection.
pub fn glrt_statistic_cf_explicit(
    responses: &[StackedResponse],
    observations: &[DVector<Complex64>],
) -> Result<f64> {
    check_pairs(responses, observations)?;
    if responses.iter().all(|d| d.frobenius_sq() == 0.0) {
        return Err(Error::UndefinedTest);
    }
    responses
        .iter()
        .zip(observations)
        .map(|(d, y)| project_explicit(d, y))
        .sum()
}

/// MC matched-filter statistic `|d̈ᴴÿ|²/‖d̈‖²`.
pub fn glrt_statistic_mc(response: &StackedResponse, y: &DVector<Complex64>) -> Result<f64> {
    if response.ncols() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "MC response must have one column, got {}",
            response.ncols()
        )));
    }
    let energy = response.frobenius_sq();
    if energy == 0.0 {
        return Err(Error::UndefinedTest);
    }
    let b = response.adjoint_apply(y)?;
    Ok(b[0].norm_sqr() / energy)
}

/// Threshold `δ'` on the projection statistic for a false-alarm level.
///
/// Under H0 the statistic is the energy of white noise projected onto a
/// subspace of dimension `total_rank`, i.e. Gamma(shape = rank, scale = σ²).
pub fn threshold_from_pfa(total_rank: usize, noise_variance: f64, pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidPfa(pfa));
    }
    if total_rank == 0 {
        return Err(Error::UndefinedTest);
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::config("noise", "noise variance must be positive"));
    }
    let law = Gamma::new(total_rank as f64, 1.0).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok(noise_variance * law.inverse_cdf(1.0 - pfa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlrtOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Hypothesis,
    /// One ML estimate per receive node (a single entry per node for MC).
    pub alpha_estimate: Vec<DVector<Complex64>>,
}

/// Full CF test at false-alarm level `pfa`.
pub fn glrt_test_cf(
    responses: &[StackedResponse],
    observations: &[DVector<Complex64>],
    noise_variance: f64,
    pfa: f64,
) -> Result<GlrtOutcome> {
    check_pairs(responses, observations)?;
    let mut statistic = 0.0;
    let mut rank = 0;
    let mut alpha_estimate = Vec::with_capacity(responses.len());
    for (d, y) in responses.iter().zip(observations) {
        let p = project_gram(d, y)?;
        statistic += p.energy;
        rank += p.rank;
        alpha_estimate.push(p.alpha_estimate);
    }
    let threshold = threshold_from_pfa(rank, noise_variance, pfa)?;
    Ok(GlrtOutcome {
        statistic,
        threshold,
        decision: if statistic > threshold { Hypothesis::H1 } else { Hypothesis::H0 },
        alpha_estimate,
    })
}

pub fn total_rank(responses: &[StackedResponse]) -> usize {
    responses.iter().map(StackedResponse::rank).sum()
}

/// `γ = Σ_l tr(D̈_l R D̈_lᴴ) / (σ² Σ_l r_l)`
pub fn sensing_snr_cf(responses: &[StackedResponse], rcs: &RcsCovariance, noise_variance: f64) -> Result<f64> {
    let mut signal = 0.0;
    let mut rank = 0;
    for d in responses {
        if d.ncols() != rcs.dim() {
            return Err(Error::DimensionMismatch(format!(
                "RCS covariance is {}×{}, response has {} columns",
                rcs.dim(),
                rcs.dim(),
                d.ncols()
            )));
        }
        rank += d.rank();
        signal += (&rcs.matrix * d.gram()).trace().re;
    }
    if rank == 0 {
        return Err(Error::UndefinedSnr);
    }
    Ok(signal / (noise_variance * rank as f64))
}

/// `γ = σ_α² ‖d̈‖² / σ²`
pub fn sensing_snr_mc(response: &StackedResponse, rcs_variance: f64, noise_variance: f64) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(Error::config("noise", "noise variance must be positive"));
    }
    Ok(rcs_variance * response.frobenius_sq() / noise_variance)
}

/// Monte-Carlo detection probability with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEstimate {
    pub pd: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: usize,
}

fn wilson(successes: usize, trials: usize) -> DetectionEstimate {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let centre = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + Z * Z / (4.0 * n * n)).sqrt() / denom;
    DetectionEstimate {
        pd: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
        trials,
    }
}

/// Fraction of H1 draws (`α ~ CN(0, R)` independently per receive node)
/// whose GLRT statistic exceeds the `pfa` threshold.
pub fn detection_probability<R: Rng + ?Sized>(
    responses: &[StackedResponse],
    rcs: &RcsCovariance,
    noise_variance: f64,
    pfa: f64,
    trials: usize,
    rng: &mut R,
) -> Result<DetectionEstimate> {
    if trials == 0 {
        return Err(Error::config("trials", "need at least one trial"));
    }
    let threshold = threshold_from_pfa(total_rank(responses), noise_variance, pfa)?;
    let mut hits = 0;
    for _ in 0..trials {
        let obs = responses
            .iter()
            .map(|d| simulate_observation(d, Some(&rcs.draw(rng)), noise_variance, rng))
            .collect::<Result<Vec<_>>>()?;
        if glrt_statistic_cf(responses, &obs)? > threshold {
            hits += 1;
        }
    }
    Ok(wilson(hits, trials))
}

/// Scalar-reflectivity (MC) detection probability.
pub fn detection_probability_mc<R: Rng + ?Sized>(
    response: &StackedResponse,
    rcs_variance: f64,
    noise_variance: f64,
    pfa: f64,
    trials: usize,
    rng: &mut R,
) -> Result<DetectionEstimate> {
    if response.ncols() != 1 {
        return Err(Error::DimensionMismatch("MC response must have one column".into()));
    }
    detection_probability(
        std::slice::from_ref(response),
        &RcsCovariance::iid(rcs_variance, 1),
        noise_variance,
        pfa,
        trials,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(r, c, |_, _| complex_normal(rng))
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
        DVector::from_fn(n, |_, _| complex_normal(rng))
    }

    fn factored(rng: &mut ChaCha8Rng, nrx: usize, n_re: usize, cols: usize) -> StackedResponse {
        StackedResponse {
            rx_steering: random_vector(rng, nrx),
            coeffs: random_matrix(rng, n_re, cols),
        }
    }

    /// `‖D(DᴴD)⁻¹Dᴴy‖²` with an explicit inverse; full column rank only.
    fn oracle_projection(d: &DMatrix<Complex64>, y: &DVector<Complex64>) -> f64 {
        let g_inv = (d.adjoint() * d).try_inverse().unwrap();
        (d * g_inv * d.adjoint() * y).norm_squared()
    }

    #[test]
    fn materialize_orders_antenna_fastest() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = factored(&mut rng, 3, 4, 2);
        let d = r.materialize();
        assert_eq!(d.shape(), (12, 2));
        assert_eq!(d[(5, 1)], r.rx_steering[2] * r.coeffs[(1, 1)]);
        let gram_err = (r.gram() - d.adjoint() * &d).norm();
        assert!(gram_err < 1e-12 * r.gram().norm());
    }

    #[test]
    fn zero_response_has_rank_zero() {
        let r = StackedResponse {
            rx_steering: DVector::from_element(2, Complex64::new(1.0, 0.0)),
            coeffs: DMatrix::zeros(5, 3),
        };
        assert_eq!(r.rank(), 0);
        let y = DVector::zeros(10);
        assert!(matches!(glrt_statistic_cf(std::slice::from_ref(&r), &[y]), Err(Error::UndefinedTest)));
        assert!(matches!(
            sensing_snr_cf(&[r], &RcsCovariance::iid(1.0, 3), 1.0),
            Err(Error::UndefinedSnr)
        ));
    }

    #[test]
    fn rank_of_structured_response_is_bounded_by_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = factored(&mut rng, 4, 3, 7);
        assert_eq!(r.rank(), 3);
        let r = factored(&mut rng, 4, 9, 7);
        assert_eq!(r.rank(), 7);
    }

    #[test]
    fn statistic_vanishes_on_orthogonal_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_matrix(&mut rng, 6, 2);
        let r = StackedResponse::from_matrix(d.clone());
        let y = random_vector(&mut rng, 6);
        let q = d.clone().qr().q();
        let y_perp = &y - &q * (q.adjoint() * &y);
        let s = glrt_statistic_cf(&[r], &[y_perp.clone()]).unwrap();
        assert!(s < 1e-20 * y_perp.norm_squared().max(1.0));
    }

    #[test]
    fn statistic_equals_energy_on_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_matrix(&mut rng, 6, 2);
        let y = &d * random_vector(&mut rng, 2);
        let s = glrt_statistic_cf(&[StackedResponse::from_matrix(d)], &[y.clone()]).unwrap();
        assert!((s - y.norm_squared()).abs() < 1e-10 * y.norm_squared());
    }

    #[test]
    fn gram_path_matches_inverse_oracle_on_6x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let d = random_matrix(&mut rng, 6, 2);
            let y = random_vector(&mut rng, 6);
            let expect = oracle_projection(&d, &y);
            let r = StackedResponse::from_matrix(d);
            let gram = glrt_statistic_cf(&[r.clone()], &[y.clone()]).unwrap();
            let explicit = glrt_statistic_cf_explicit(&[r], &[y]).unwrap();
            assert!((gram - expect).abs() <= 1e-10 * expect);
            assert!((explicit - expect).abs() <= 1e-10 * expect);
        }
    }

    #[test]
    fn explicit_path_is_accurate_at_path_loss_scale() {
        // rank(C) = n_re, so the range is a ⊗ ℂ^{n_re} and the energy is
        // Σ_re |aᴴ y_re|² / ‖a‖²
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..200 {
            let mut r = factored(&mut rng, 3, 2, 3);
            r.coeffs *= Complex64::new(1e-7, 0.0);
            let y = random_vector(&mut rng, 6) * Complex64::new(3e-7, 0.0);
            let truth: f64 = (0..2)
                .map(|re| r.rx_steering.dotc(&y.rows(re * 3, 3)).norm_sqr())
                .sum::<f64>()
                / r.rx_steering.norm_squared();
            let explicit = project_explicit(&r, &y).unwrap();
            let gram = project_gram(&r, &y).unwrap().energy;
            assert!((explicit - truth).abs() <= 1e-12 * truth, "{explicit:e} vs {truth:e}");
            assert!((gram - truth).abs() <= 1e-12 * truth, "{gram:e} vs {truth:e}");
        }
    }

    #[test]
    fn ml_residual_is_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = factored(&mut rng, 3, 4, 3);
        let y = random_vector(&mut rng, 12);
        let p = project_gram(&r, &y).unwrap();
        let resid = &y - r.apply(&p.alpha_estimate).unwrap();
        let d = r.materialize();
        for m in 0..3 {
            let ip = d.column(m).dotc(&resid).norm();
            assert!(ip < 1e-9 * d.column(m).norm() * y.norm());
        }
    }

    #[test]
    fn mc_statistic_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = factored(&mut rng, 4, 5, 1);
        let d = r.materialize().column(0).into_owned();
        let s = glrt_statistic_mc(&r, &d).unwrap();
        assert!((s - d.norm_squared()).abs() < 1e-12 * d.norm_squared());
        let y = random_vector(&mut rng, 20);
        let y_perp = &y - &d * (d.dotc(&y) / Complex64::new(d.norm_squared(), 0.0));
        assert!(glrt_statistic_mc(&r, &y_perp).unwrap() < 1e-20 * y.norm_squared());
        let cf = glrt_statistic_cf(&[r.clone()], &[y.clone()]).unwrap();
        let mc = glrt_statistic_mc(&r, &y).unwrap();
        assert!((cf - mc).abs() <= 1e-10 * mc);
        let zero = StackedResponse::from_matrix(DMatrix::zeros(3, 1));
        assert!(matches!(glrt_statistic_mc(&zero, &DVector::zeros(3)), Err(Error::UndefinedTest)));
    }

    #[test]
    fn exponential_threshold_at_inverse_e() {
        let t = threshold_from_pfa(1, 2.5, (-1f64).exp()).unwrap();
        assert!((t - 2.5).abs() < 1e-9);
        assert!(threshold_from_pfa(3, 1.0, 1.0 - 1e-12).unwrap() < 1e-3);
        assert!(matches!(threshold_from_pfa(1, 1.0, 0.0), Err(Error::InvalidPfa(_))));
        assert!(matches!(threshold_from_pfa(1, 1.0, 1.0), Err(Error::InvalidPfa(_))));
    }

    #[test]
    fn shape_three_threshold_is_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = threshold_from_pfa(3, 1.0, 0.01).unwrap();
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| (0..3).map(|_| complex_normal(&mut rng).norm_sqr()).sum::<f64>() > t)
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.01).abs() < 0.001, "{rate}");
    }

    #[test]
    fn h0_observation_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r = StackedResponse::from_matrix(DMatrix::zeros(100_000, 1));
        let y = simulate_observation(&r, None, 0.7, &mut rng).unwrap();
        let var = y.norm_squared() / y.len() as f64;
        assert!((var - 0.7).abs() < 0.02 * 0.7);
    }

    #[test]
    fn noiseless_h1_lies_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = factored(&mut rng, 2, 5, 3);
        let alpha = random_vector(&mut rng, 3);
        let y = simulate_observation(&r, Some(&alpha), 0.0, &mut rng).unwrap();
        let s = glrt_statistic_cf(&[r], &[y.clone()]).unwrap();
        assert!((s - y.norm_squared()).abs() < 1e-10 * y.norm_squared());
    }

    #[test]
    fn snr_reduces_to_scalar_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let r = factored(&mut rng, 4, 6, 1);
        let cf = sensing_snr_cf(&[r.clone()], &RcsCovariance::iid(10.0, 1), 0.3).unwrap();
        let mc = sensing_snr_mc(&r, 10.0, 0.3).unwrap();
        assert!((cf - mc).abs() <= 1e-12 * mc);
        let zero = RcsCovariance::iid(0.0, 1);
        assert_eq!(sensing_snr_cf(&[r], &zero, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn snr_with_zero_response_is_zero_for_mc() {
        let r = StackedResponse::from_matrix(DMatrix::zeros(4, 1));
        assert_eq!(sensing_snr_mc(&r, 10.0, 1.0).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = factored(&mut rng, 2, 3, 1);
        let a = sensing_snr_mc(&r, 10.0, 1.0).unwrap();
        let b = sensing_snr_mc(&r, 10.0, 2.0).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12 * a);
    }

    #[test]
    fn correlated_rcs_draws_match_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rcs = RcsCovariance::correlated(2.0, 0.5, 2);
        let n = 50_000;
        let mut acc = DMatrix::<Complex64>::zeros(2, 2);
        for _ in 0..n {
            let a = rcs.draw(&mut rng);
            acc += &a * a.adjoint();
        }
        acc /= Complex64::new(n as f64, 0.0);
        assert!((acc - &rcs.matrix).norm() < 0.05 * rcs.matrix.norm());
        assert!(RcsCovariance::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)]
        ))
        .is_err());
    }

    #[test]
    fn zero_rcs_gives_pfa() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r = factored(&mut rng, 2, 3, 1);
        let est = detection_probability_mc(&r, 0.0, 1.0, 0.1, 20_000, &mut rng).unwrap();
        assert!(est.lower <= 0.1 && 0.1 <= est.upper, "{est:?}");
    }

    #[test]
    fn vanishing_noise_gives_certain_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let r = factored(&mut rng, 2, 3, 1);
        let est = detection_probability_mc(&r, 1.0, 1e-12, 0.01, 2_000, &mut rng).unwrap();
        assert!(est.pd > 0.99);
    }

    #[test]
    fn glrt_outcome_decision_matches_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let r = factored(&mut rng, 3, 4, 2);
        let y = simulate_observation(&r, Some(&random_vector(&mut rng, 2)), 1e-3, &mut rng).unwrap();
        let out = glrt_test_cf(&[r], &[y], 1e-3, 0.01).unwrap();
        assert_eq!(out.decision == Hypothesis::H1, out.statistic > out.threshold);
        assert_eq!(out.decision, Hypothesis::H1);
        assert_eq!(out.alpha_estimate[0].len(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn projection_is_bounded_and_idempotent(
                seed in any::<u64>(), nrx in 1usize..4, n_re in 1usize..6, cols in 1usize..4
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = factored(&mut rng, nrx, n_re, cols);
                let y = random_vector(&mut rng, nrx * n_re);
                let p = project_gram(&r, &y).unwrap();
                prop_assert!(p.energy >= 0.0);
                prop_assert!(p.energy <= y.norm_squared() * (1.0 + 1e-10));
                let projected = r.apply(&p.alpha_estimate).unwrap();
                let again = project_gram(&r, &projected).unwrap();
                prop_assert!((again.energy - p.energy).abs() <= 1e-9 * p.energy.max(1e-300));
                let twice = r.apply(&again.alpha_estimate).unwrap();
                prop_assert!((&twice - &projected).norm() <= 1e-9 * projected.norm().max(1e-300));
            }

            #[test]
            fn snr_times_noise_is_noise_invariant(
                seed in any::<u64>(), noise in 1e-6f64..1e3, scale in 1e-3f64..1e3
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = factored(&mut rng, 2, 4, 3);
                let rcs = RcsCovariance::iid(10.0, 3);
                let a = sensing_snr_cf(&[r.clone()], &rcs, 1.0).unwrap();
                let b = sensing_snr_cf(&[r.clone()], &rcs, noise).unwrap();
                prop_assert!((a - b * noise).abs() <= 1e-12 * a);
                let mut scaled = r.clone();
                scaled.coeffs *= Complex64::new(scale.sqrt(), 0.0);
                let c = sensing_snr_cf(&[scaled], &rcs, 1.0).unwrap();
                prop_assert!((c - a * scale).abs() <= 1e-12 * c);
            }
        }
    }
}
