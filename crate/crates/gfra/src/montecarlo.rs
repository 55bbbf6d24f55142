//! Link-level simulation of one grant-free RA slot.
//!
//! Per trial: every UE picks a preamble uniformly from a pool of `P`,
//! colliding picks are marked, the base station forms LS channel estimates
//! for the non-collided UEs and detects their data with conjugate
//! beamforming. The instantaneous SINR of a non-collided UE `i` is
//!
//! ```text
//!            rho * M^2
//! ---------------------------------------------------------
//! rho*|hhat_i^H h_i - M|^2 + sum_{k != i} rho*|hhat_i^H h_k|^2 + N_i
//! ```
//!
//! where the numerator uses the deterministic mean `E[hhat_i^H h_i] = M` and
//! every UE interferes, collided or not. `N_i` is the effective noise power
//! at the combiner output; see [`NoisePowerModel`]. Collided UEs keep SINR
//! and SE of zero.
//!
//! # Modeling notes
//!
//! * Noise power is normalized to 1 and the per-antenna receive power equals
//!   the linear SNR `rho`; only the ratio enters any result.
//! * Large-scale fading is 1 for all UEs (perfect power control).
//! * Preamble waveforms are never materialized on the default path:
//!   orthogonality makes the LS estimate exactly `h_i` plus white noise of
//!   per-entry variance `1/(rho*P)`, which the engine synthesizes directly
//!   (O(M*N) per trial instead of O(M*N*P)). The slow
//!   [`EstimationPath::ExplicitPreambles`] path keeps length-`P` DFT columns
//!   (entries of unit modulus, `p^H p = P`) and runs the full received-matrix
//!   computation; it exists to validate the shortcut.
//! * Collision detection is genie-aided (read from the assignment), matching
//!   the assumption that non-collided preambles are always detected.
//!
//! # Reproducibility
//!
//! Trial `t` of a campaign draws everything from a dedicated ChaCha12 stream
//! (key = campaign seed, stream = `t`) in a fixed order: preamble choices,
//! channel matrix, estimation noise, data noise. Campaign reduction runs
//! over fixed 1024-trial chunks in index order, so summaries are
//! bit-identical for any parallelism degree.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::se_from_sinr;
use crate::config::{ConfigError, SystemConfig};
use crate::parallel::map_indexed;
use crate::seed::trial_rng;

/// Instantaneous SINR is clamped here to avoid infinities in noiseless
/// degenerate cases; the cap is reported in campaign summaries.
pub const SINR_CAP: f64 = 1e12;

/// Trials per reduction chunk. Fixed (not tied to the thread count) so the
/// floating-point reduction order never depends on parallelism.
const CHUNK_TRIALS: u64 = 1024;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("campaign needs at least one trial")]
    ZeroTrials,
}

/// Column-major complex matrix; columns are per-UE (or per-symbol) vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    fn fill_standard_complex<R: Rng>(&mut self, rng: &mut R) {
        fill_cn01(&mut self.data, rng);
    }
}

/// i.i.d. circularly-symmetric complex Gaussian entries of unit variance.
fn fill_cn01<R: Rng>(buf: &mut [Complex64], rng: &mut R) {
    for z in buf.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2);
    }
}

/// Per-UE preamble picks and the induced collision flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleAssignment {
    /// Preamble index per UE, uniform over `0..P`.
    pub choices: Vec<u32>,
    /// `collided[i]` is true exactly when `choices[i]` occurs more than once.
    pub collided: Vec<bool>,
}

/// One slot's random draws: channel, preamble-phase noise, data-phase noise.
///
/// Noise entries are stored with unit variance and scaled by `1/sqrt(rho)`
/// where they are used, so the noiseless limit is reached smoothly at high
/// SNR instead of through an infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `M x N` small-scale fading, entries CN(0, 1).
    pub h: ComplexMatrix,
    /// `M x P` preamble-phase noise, unit-variance entries (explicit path).
    pub preamble_noise: ComplexMatrix,
    /// Length-`M` data-phase noise, unit-variance entries.
    pub data_noise: Vec<Complex64>,
}

/// Per-UE result of one RA slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub per_ue_collided: Vec<bool>,
    /// Instantaneous SINR, 0 for collided UEs, clamped at [`SINR_CAP`].
    pub per_ue_sinr: Vec<f64>,
    /// `(1 - P/L) * log2(1 + SINR)`, 0 for collided UEs.
    pub per_ue_se: Vec<f64>,
}

/// How LS channel estimates are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimationPath {
    /// Estimate = channel + white noise of per-entry variance `1/(rho*P)`;
    /// mathematically identical to the explicit computation under preamble
    /// orthogonality. Default.
    Synthetic,
    /// Materialize the received preamble matrix with DFT preamble columns
    /// and correlate. O(M*N*P) per trial; verification only.
    ExplicitPreambles,
}

/// Effective noise power at the conjugate-beamforming output for UE `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoisePowerModel {
    /// `||hhat_i||^2` (times the unit noise power): the noise power averaged
    /// over the data block, conditioned on the channel. Default; this is the
    /// quantity whose log matches the analytic curves.
    BlockAverage,
    /// `|hhat_i^H nbar|^2` on a single drawn noise vector; kept for
    /// verification of the averaged model.
    SingleRealization,
}

/// Full campaign specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub cfg: SystemConfig,
    /// Integer preamble length, `1 <= P <= L`.
    pub preamble_len: u32,
    pub n_trials: u64,
    pub master_seed: u64,
    /// 0 = default thread count, 1 = sequential, k = k threads. Has no
    /// effect on results.
    pub parallelism: usize,
    pub estimation: EstimationPath,
    pub noise_model: NoisePowerModel,
}

impl CampaignOptions {
    pub fn new(cfg: SystemConfig, preamble_len: u32, n_trials: u64, master_seed: u64) -> Self {
        Self {
            cfg,
            preamble_len,
            n_trials,
            master_seed,
            parallelism: 0,
            estimation: EstimationPath::Synthetic,
            noise_model: NoisePowerModel::BlockAverage,
        }
    }

    fn validate(&self) -> Result<(), CampaignError> {
        self.cfg.validate()?;
        if self.preamble_len < 1 || self.preamble_len > self.cfg.packet_len {
            return Err(CampaignError::Config(ConfigError::BadPreambleLen {
                got: f64::from(self.preamble_len),
                max: self.cfg.packet_len,
            }));
        }
        if self.n_trials == 0 {
            return Err(CampaignError::ZeroTrials);
        }
        Ok(())
    }
}

/// Campaign aggregate. `mean_sinr` / `mean_se` average over non-collided
/// (trial, UE) pairs; `mean_ase` averages the per-trial mean SE with
/// collided UEs contributing zero, which is the simulated counterpart of the
/// analytic average SE. `collision_rate` is the collided fraction of all
/// (trial, UE) pairs. Confidence half-widths are 95% normal approximations;
/// the ASE and collision ones treat trials as the independent unit, the SINR
/// and SE ones treat non-collided pairs as independent (within-trial
/// correlation ignored; good to a few percent of the half-width itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub m: u32,
    pub n: u32,
    pub l: u32,
    pub p: u32,
    pub snr_db: f64,
    pub trials: u64,
    pub seed: u64,
    pub collision_rate: f64,
    pub mean_sinr: f64,
    pub mean_se: f64,
    pub mean_ase: f64,
    pub ci_ase: f64,
    pub var_collision: f64,
    pub var_sinr: f64,
    pub var_se: f64,
    pub var_ase: f64,
    pub ci_collision: f64,
    pub ci_sinr: f64,
    pub ci_se: f64,
    pub non_collided_pairs: u64,
    pub sinr_cap: f64,
}

impl CampaignSummary {
    /// Column order of [`CampaignSummary::to_csv_row`].
    pub const CSV_HEADER: &'static str =
        "m,n,l,p,snr_db,trials,seed,collision_rate,mean_sinr,mean_se,mean_ase,ci_ase";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.m,
            self.n,
            self.l,
            self.p,
            self.snr_db,
            self.trials,
            self.seed,
            self.collision_rate,
            self.mean_sinr,
            self.mean_se,
            self.mean_ase,
            self.ci_ase
        )
    }

    /// JSON object with exactly the documented CSV columns as keys.
    pub fn to_wire_json(&self) -> String {
        let v = serde_json::json!({
            "m": self.m,
            "n": self.n,
            "l": self.l,
            "p": self.p,
            "snr_db": self.snr_db,
            "trials": self.trials,
            "seed": self.seed,
            "collision_rate": self.collision_rate,
            "mean_sinr": self.mean_sinr,
            "mean_se": self.mean_se,
            "mean_ase": self.mean_ase,
            "ci_ase": self.ci_ase,
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }
}

/// Collision-only aggregate from the assignment prefix of each trial's RNG
/// stream; bit-consistent with the collision statistics of a full campaign
/// under the same seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionStats {
    pub trials: u64,
    pub n_ues: u32,
    pub collided_ue_slots: u64,
}

impl CollisionStats {
    pub fn collision_rate(&self) -> f64 {
        self.collided_ue_slots as f64 / (self.trials as f64 * f64::from(self.n_ues))
    }

    pub fn collision_free_rate(&self) -> f64 {
        1.0 - self.collision_rate()
    }
}

/// Draws one uniform preamble pick per UE and marks collisions.
pub fn draw_assignment(cfg: &SystemConfig, p: u32, rng: &mut ChaCha12Rng) -> PreambleAssignment {
    let n = cfg.n_ues as usize;
    let mut choices = vec![0u32; n];
    let mut collided = vec![false; n];
    let mut counts = vec![0u32; p as usize];
    fill_assignment(&mut choices, &mut collided, &mut counts, p, rng);
    PreambleAssignment { choices, collided }
}

fn fill_assignment(
    choices: &mut [u32],
    collided: &mut [bool],
    counts: &mut [u32],
    p: u32,
    rng: &mut ChaCha12Rng,
) {
    counts.fill(0);
    for c in choices.iter_mut() {
        *c = rng.random_range(0..p);
        counts[*c as usize] += 1;
    }
    for (flag, c) in collided.iter_mut().zip(choices.iter()) {
        *flag = counts[*c as usize] > 1;
    }
}

/// Draws the channel matrix and both noise blocks for one slot.
pub fn draw_realization(cfg: &SystemConfig, p: u32, rng: &mut ChaCha12Rng) -> ChannelRealization {
    let m = cfg.m_antennas as usize;
    let n = cfg.n_ues as usize;
    let mut h = ComplexMatrix::zeros(m, n);
    h.fill_standard_complex(rng);
    let mut preamble_noise = ComplexMatrix::zeros(m, p as usize);
    preamble_noise.fill_standard_complex(rng);
    let mut data_noise = vec![Complex64::new(0.0, 0.0); m];
    fill_cn01(&mut data_noise, rng);
    ChannelRealization { h, preamble_noise, data_noise }
}

/// LS channel estimation through the explicit preamble pipeline.
///
/// Builds the (power-normalized) received matrix `Y = sum_i h_i p_{c_i}^T +
/// noise/sqrt(rho)` with DFT preamble columns and correlates:
/// `hhat_i = Y p_{c_i}^* / P`. Columns of collided UEs are left at zero;
/// their estimates are unusable by assumption.
pub fn ls_estimate(
    realization: &ChannelRealization,
    assignment: &PreambleAssignment,
    cfg: &SystemConfig,
    p: u32,
) -> ComplexMatrix {
    let m = cfg.m_antennas as usize;
    let n = cfg.n_ues as usize;
    let p_usize = p as usize;
    let noise_scale = 1.0 / cfg.snr_linear().sqrt();

    // Y, starting from the scaled preamble-phase noise.
    let mut y = ComplexMatrix::zeros(m, p_usize);
    for k in 0..p_usize {
        let src = realization.preamble_noise.col(k);
        for (dst, s) in y.col_mut(k).iter_mut().zip(src) {
            *dst = s * noise_scale;
        }
    }
    for i in 0..n {
        let h_i = realization.h.col(i);
        let c = assignment.choices[i];
        for k in 0..p_usize {
            let w = dft_entry(c, k as u32, p);
            for (dst, hv) in y.col_mut(k).iter_mut().zip(h_i) {
                *dst += hv * w;
            }
        }
    }

    let mut estimates = ComplexMatrix::zeros(m, n);
    let inv_p = 1.0 / f64::from(p);
    for i in 0..n {
        if assignment.collided[i] {
            continue;
        }
        let c = assignment.choices[i];
        for k in 0..p_usize {
            let w = dft_entry(c, k as u32, p).conj();
            let src = y.col(k);
            for (dst, yv) in estimates.col_mut(i).iter_mut().zip(src) {
                *dst += yv * w;
            }
        }
        for dst in estimates.col_mut(i).iter_mut() {
            *dst *= inv_p;
        }
    }
    estimates
}

/// Entry `k` of DFT preamble `c` (unit modulus, so `p^H p = P`).
fn dft_entry(c: u32, k: u32, p: u32) -> Complex64 {
    let theta = 2.0 * std::f64::consts::PI * ((c as u64 * k as u64) % p as u64) as f64 / f64::from(p);
    Complex64::new(theta.cos(), theta.sin())
}

/// Shortcut LS estimates: `hhat_i = h_i + noise / sqrt(rho * P)` with fresh
/// white noise, statistically identical to [`ls_estimate`] for non-collided
/// UEs.
pub fn synthetic_estimates(
    cfg: &SystemConfig,
    p: u32,
    h: &ComplexMatrix,
    rng: &mut ChaCha12Rng,
) -> ComplexMatrix {
    let mut estimates = ComplexMatrix::zeros(h.rows(), h.cols());
    estimates.fill_standard_complex(rng);
    let scale = 1.0 / (cfg.snr_linear() * f64::from(p)).sqrt();
    for (e, hv) in estimates.data.iter_mut().zip(h.data.iter()) {
        *e = hv + *e * scale;
    }
    estimates
}

/// Conjugate-beamforming detection with the default block-averaged noise
/// power; see [`cb_detect_with`].
pub fn cb_detect(
    realization: &ChannelRealization,
    assignment: &PreambleAssignment,
    estimates: &ComplexMatrix,
    cfg: &SystemConfig,
    p: u32,
) -> TrialOutcome {
    cb_detect_with(realization, assignment, estimates, cfg, p, NoisePowerModel::BlockAverage)
}

/// Conjugate-beamforming detection: per-UE instantaneous SINR and SE for one
/// realization. Collided UEs get zeros; all UEs contribute interference.
pub fn cb_detect_with(
    realization: &ChannelRealization,
    assignment: &PreambleAssignment,
    estimates: &ComplexMatrix,
    cfg: &SystemConfig,
    p: u32,
    noise_model: NoisePowerModel,
) -> TrialOutcome {
    let n = cfg.n_ues as usize;
    let mut outcome = TrialOutcome {
        per_ue_collided: assignment.collided.clone(),
        per_ue_sinr: vec![0.0; n],
        per_ue_se: vec![0.0; n],
    };
    detect_into(
        &realization.h,
        estimates,
        &realization.data_noise,
        &assignment.collided,
        cfg,
        p,
        noise_model,
        &mut outcome.per_ue_sinr,
        &mut outcome.per_ue_se,
    );
    outcome
}

#[allow(clippy::too_many_arguments)]
fn detect_into(
    h: &ComplexMatrix,
    estimates: &ComplexMatrix,
    data_noise: &[Complex64],
    collided: &[bool],
    cfg: &SystemConfig,
    p: u32,
    noise_model: NoisePowerModel,
    sinr_out: &mut [f64],
    se_out: &mut [f64],
) {
    let n = cfg.n_ues as usize;
    let m_f = f64::from(cfg.m_antennas);
    let rho = cfg.snr_linear();

    for i in 0..n {
        if collided[i] {
            sinr_out[i] = 0.0;
            se_out[i] = 0.0;
            continue;
        }
        let hh_i = estimates.col(i);
        let mut self_dev = Complex64::new(-m_f, 0.0);
        let mut interference = 0.0;
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in hh_i.iter().zip(h.col(k)) {
                acc += a.conj() * b;
            }
            if k == i {
                self_dev += acc;
            } else {
                interference += acc.norm_sqr();
            }
        }
        let noise_power = match noise_model {
            NoisePowerModel::BlockAverage => hh_i.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            NoisePowerModel::SingleRealization => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in hh_i.iter().zip(data_noise) {
                    acc += a.conj() * b;
                }
                acc.norm_sqr()
            }
        };
        // numerator and denominator divided by rho; noise/rho vanishes
        // smoothly in the high-SNR limit
        let denom = self_dev.norm_sqr() + interference + noise_power / rho;
        let sinr = (m_f * m_f / denom).min(SINR_CAP);
        sinr_out[i] = sinr;
        se_out[i] = se_from_sinr(cfg.packet_len, f64::from(p), sinr);
    }
}

/// Runs a single trial of a campaign, exactly as [`run_campaign_with`] would
/// execute it for the given trial index.
pub fn run_trial(
    opts: &CampaignOptions,
    trial_index: u64,
) -> Result<TrialOutcome, CampaignError> {
    opts.cfg.validate()?;
    let mut ws = Workspace::new(&opts.cfg, opts.preamble_len, opts.estimation);
    let mut rng = trial_rng(opts.master_seed, trial_index);
    run_trial_into(opts, &mut rng, &mut ws);
    Ok(TrialOutcome {
        per_ue_collided: ws.collided.clone(),
        per_ue_sinr: ws.sinr.clone(),
        per_ue_se: ws.se.clone(),
    })
}

/// Monte Carlo campaign with the default synthetic estimation path and
/// block-averaged noise power. `parallelism` selects the thread count
/// (0 = default, 1 = sequential) and never affects the result.
pub fn run_campaign(
    cfg: &SystemConfig,
    preamble_len: u32,
    n_trials: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<CampaignSummary, CampaignError> {
    let mut opts = CampaignOptions::new(*cfg, preamble_len, n_trials, master_seed);
    opts.parallelism = parallelism;
    run_campaign_with(&opts)
}

/// Monte Carlo campaign with explicit options.
pub fn run_campaign_with(opts: &CampaignOptions) -> Result<CampaignSummary, CampaignError> {
    opts.validate()?;
    let n_chunks = opts.n_trials.div_ceil(CHUNK_TRIALS) as usize;
    let chunk_stats: Vec<Accum> = map_indexed(n_chunks, opts.parallelism, |ci| {
        let mut ws = Workspace::new(&opts.cfg, opts.preamble_len, opts.estimation);
        let mut acc = Accum::default();
        let start = ci as u64 * CHUNK_TRIALS;
        let end = (start + CHUNK_TRIALS).min(opts.n_trials);
        for t in start..end {
            let mut rng = trial_rng(opts.master_seed, t);
            run_trial_into(opts, &mut rng, &mut ws);
            acc.add_trial(&ws);
        }
        acc
    });
    let total = chunk_stats.into_iter().fold(Accum::default(), Accum::merge);
    Ok(total.into_summary(opts))
}

/// Collision statistics alone, reading only the assignment prefix of each
/// trial's RNG stream. Orders of magnitude faster than a full campaign and
/// bit-consistent with its collision counts.
pub fn collision_campaign(
    cfg: &SystemConfig,
    preamble_len: u32,
    n_trials: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<CollisionStats, CampaignError> {
    let opts = CampaignOptions::new(*cfg, preamble_len, n_trials, master_seed);
    opts.validate()?;
    let n = cfg.n_ues as usize;
    let n_chunks = n_trials.div_ceil(CHUNK_TRIALS) as usize;
    let counts: Vec<u64> = map_indexed(n_chunks, parallelism, |ci| {
        let mut choices = vec![0u32; n];
        let mut collided = vec![false; n];
        let mut counts = vec![0u32; preamble_len as usize];
        let start = ci as u64 * CHUNK_TRIALS;
        let end = (start + CHUNK_TRIALS).min(n_trials);
        let mut collided_slots = 0u64;
        for t in start..end {
            let mut rng = trial_rng(master_seed, t);
            fill_assignment(&mut choices, &mut collided, &mut counts, preamble_len, &mut rng);
            collided_slots += collided.iter().filter(|&&c| c).count() as u64;
        }
        collided_slots
    });
    Ok(CollisionStats {
        trials: n_trials,
        n_ues: cfg.n_ues,
        collided_ue_slots: counts.iter().sum(),
    })
}

/// Scratch buffers for one worker; reused across the trials of a chunk.
struct Workspace {
    p: u32,
    choices: Vec<u32>,
    collided: Vec<bool>,
    counts: Vec<u32>,
    h: ComplexMatrix,
    estimates: ComplexMatrix,
    data_noise: Vec<Complex64>,
    sinr: Vec<f64>,
    se: Vec<f64>,
    /// Preamble-phase noise buffer, only allocated for the explicit path.
    preamble_noise: Option<ComplexMatrix>,
}

impl Workspace {
    fn new(cfg: &SystemConfig, p: u32, estimation: EstimationPath) -> Self {
        let m = cfg.m_antennas as usize;
        let n = cfg.n_ues as usize;
        Self {
            p,
            choices: vec![0; n],
            collided: vec![false; n],
            counts: vec![0; p as usize],
            h: ComplexMatrix::zeros(m, n),
            estimates: ComplexMatrix::zeros(m, n),
            data_noise: vec![Complex64::new(0.0, 0.0); m],
            sinr: vec![0.0; n],
            se: vec![0.0; n],
            preamble_noise: match estimation {
                EstimationPath::Synthetic => None,
                EstimationPath::ExplicitPreambles => Some(ComplexMatrix::zeros(m, p as usize)),
            },
        }
    }
}

/// One trial, drawing from `rng` in the documented order.
fn run_trial_into(opts: &CampaignOptions, rng: &mut ChaCha12Rng, ws: &mut Workspace) {
    let cfg = &opts.cfg;
    let p = ws.p;
    fill_assignment(&mut ws.choices, &mut ws.collided, &mut ws.counts, p, rng);
    ws.h.fill_standard_complex(rng);

    match (opts.estimation, ws.preamble_noise.as_mut()) {
        (EstimationPath::Synthetic, _) => {
            ws.estimates.fill_standard_complex(rng);
            let scale = 1.0 / (cfg.snr_linear() * f64::from(p)).sqrt();
            for (e, hv) in ws.estimates.data.iter_mut().zip(ws.h.data.iter()) {
                *e = hv + *e * scale;
            }
        }
        (EstimationPath::ExplicitPreambles, Some(noise)) => {
            noise.fill_standard_complex(rng);
            fill_cn01(&mut ws.data_noise, rng);
            let realization = ChannelRealization {
                h: ws.h.clone(),
                preamble_noise: noise.clone(),
                data_noise: ws.data_noise.clone(),
            };
            let assignment =
                PreambleAssignment { choices: ws.choices.clone(), collided: ws.collided.clone() };
            ws.estimates = ls_estimate(&realization, &assignment, cfg, p);
            detect_into(
                &ws.h,
                &ws.estimates,
                &ws.data_noise,
                &ws.collided,
                cfg,
                p,
                opts.noise_model,
                &mut ws.sinr,
                &mut ws.se,
            );
            return;
        }
        (EstimationPath::ExplicitPreambles, None) => unreachable!("workspace built for path"),
    }

    fill_cn01(&mut ws.data_noise, rng);
    detect_into(
        &ws.h,
        &ws.estimates,
        &ws.data_noise,
        &ws.collided,
        cfg,
        p,
        opts.noise_model,
        &mut ws.sinr,
        &mut ws.se,
    );
}

/// Deterministic running sums for one chunk of trials.
#[derive(Debug, Default, Clone, Copy)]
struct Accum {
    trials: u64,
    pairs: u64,
    collided: u64,
    nc_pairs: u64,
    sum_sinr: f64,
    sumsq_sinr: f64,
    sum_se: f64,
    sumsq_se: f64,
    sum_ase_t: f64,
    sumsq_ase_t: f64,
    sum_col_t: f64,
    sumsq_col_t: f64,
}

impl Accum {
    fn add_trial(&mut self, ws: &Workspace) {
        let n = ws.collided.len();
        self.trials += 1;
        self.pairs += n as u64;
        let mut collided_count = 0u64;
        let mut se_sum_trial = 0.0;
        for i in 0..n {
            if ws.collided[i] {
                debug_assert_eq!(ws.se[i], 0.0);
                collided_count += 1;
            } else {
                self.nc_pairs += 1;
                self.sum_sinr += ws.sinr[i];
                self.sumsq_sinr += ws.sinr[i] * ws.sinr[i];
                self.sum_se += ws.se[i];
                self.sumsq_se += ws.se[i] * ws.se[i];
                se_sum_trial += ws.se[i];
            }
        }
        self.collided += collided_count;
        let ase_t = se_sum_trial / n as f64;
        self.sum_ase_t += ase_t;
        self.sumsq_ase_t += ase_t * ase_t;
        let col_t = collided_count as f64 / n as f64;
        self.sum_col_t += col_t;
        self.sumsq_col_t += col_t * col_t;
    }

    fn merge(mut self, other: Accum) -> Accum {
        self.trials += other.trials;
        self.pairs += other.pairs;
        self.collided += other.collided;
        self.nc_pairs += other.nc_pairs;
        self.sum_sinr += other.sum_sinr;
        self.sumsq_sinr += other.sumsq_sinr;
        self.sum_se += other.sum_se;
        self.sumsq_se += other.sumsq_se;
        self.sum_ase_t += other.sum_ase_t;
        self.sumsq_ase_t += other.sumsq_ase_t;
        self.sum_col_t += other.sum_col_t;
        self.sumsq_col_t += other.sumsq_col_t;
        self
    }

    fn into_summary(self, opts: &CampaignOptions) -> CampaignSummary {
        let t = self.trials as f64;
        let (mean_sinr, var_sinr) = mean_var(self.sum_sinr, self.sumsq_sinr, self.nc_pairs);
        let (mean_se, var_se) = mean_var(self.sum_se, self.sumsq_se, self.nc_pairs);
        let (mean_ase, var_ase) = mean_var(self.sum_ase_t, self.sumsq_ase_t, self.trials);
        let (col_rate_t, var_col) = mean_var(self.sum_col_t, self.sumsq_col_t, self.trials);
        let _ = col_rate_t; // identical to the pair-level rate below
        CampaignSummary {
            m: opts.cfg.m_antennas,
            n: opts.cfg.n_ues,
            l: opts.cfg.packet_len,
            p: opts.preamble_len,
            snr_db: opts.cfg.snr_db,
            trials: self.trials,
            seed: opts.master_seed,
            collision_rate: self.collided as f64 / self.pairs as f64,
            mean_sinr,
            mean_se,
            mean_ase,
            ci_ase: ci_half_width(var_ase, t),
            var_collision: var_col,
            var_sinr,
            var_se,
            var_ase,
            ci_collision: ci_half_width(var_col, t),
            ci_sinr: ci_half_width(var_sinr, self.nc_pairs as f64),
            ci_se: ci_half_width(var_se, self.nc_pairs as f64),
            non_collided_pairs: self.nc_pairs,
            sinr_cap: SINR_CAP,
        }
    }
}

fn mean_var(sum: f64, sumsq: f64, count: u64) -> (f64, f64) {
    if count == 0 {
        return (0.0, 0.0);
    }
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sumsq - sum * sum / n) / (n - 1.0)).max(0.0);
    (mean, var)
}

fn ci_half_width(var: f64, n: f64) -> f64 {
    if n < 1.0 {
        0.0
    } else {
        1.96 * (var / n).sqrt()
    }
}
