//! Statistical validation of the link-level engine against the closed-form
//! model, plus the reproducibility contract. Every test uses a fixed seed,
//! so outcomes are deterministic; tolerances are set from binomial or
//! large-sample error bounds at the stated trial counts.

use gfra::analytic::{asymptotic_sinr, average_se, collision_free_prob, spectral_efficiency};
use gfra::montecarlo::{
    collision_campaign, draw_assignment, draw_realization, ls_estimate, run_campaign,
    run_campaign_with, synthetic_estimates, CampaignOptions, EstimationPath, NoisePowerModel,
};
use gfra::{PreambleLength, SystemConfig};

mod common;
use common::trial_rng;

fn cfg(m: u32, n: u32, l: u32, snr_db: f64) -> SystemConfig {
    SystemConfig::new(m, n, l, snr_db).unwrap()
}

#[test]
fn collision_free_rate_matches_formula_within_3_sigma() {
    let c = cfg(4, 10, 200, 0.0);
    let trials = 200_000u64;
    let stats = collision_campaign(&c, 64, trials, 20_240_601, 0).unwrap();
    let p = collision_free_prob(&c, PreambleLength::new(64.0, &c).unwrap());
    let sigma = (p * (1.0 - p) / (trials as f64 * 10.0)).sqrt();
    let dev = (stats.collision_free_rate() - p).abs();
    assert!(dev < 3.0 * sigma, "dev {dev} vs 3 sigma {}", 3.0 * sigma);
}

#[test]
fn estimation_error_variance_is_inverse_rho_p() {
    // E ||hhat - h||^2 / M = 1 / (rho * P); synthetic path at 2%
    let c = cfg(100, 10, 200, 0.0);
    let p = 40u32;
    let trials = 10_000;
    let mut err = 0.0;
    let mut count = 0u64;
    for t in 0..trials {
        let mut rng = trial_rng(1, t);
        let real = draw_realization(&c, p, &mut rng);
        let est = synthetic_estimates(&c, p, &real.h, &mut rng);
        for i in 0..10 {
            err += est
                .col(i)
                .iter()
                .zip(real.h.col(i))
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
            count += 1;
        }
    }
    let per_entry = err / (count as f64 * 100.0);
    let expect = 1.0 / (c.snr_linear() * f64::from(p));
    assert!(
        (per_entry - expect).abs() / expect < 0.02,
        "variance {per_entry} vs {expect}"
    );
}

#[test]
fn doubling_preamble_halves_estimation_error() {
    let c = cfg(64, 4, 200, -3.0);
    let var_at = |p: u32, seed: u64| {
        let mut err = 0.0;
        for t in 0..4000u64 {
            let mut rng = trial_rng(seed, t);
            let real = draw_realization(&c, p, &mut rng);
            let est = synthetic_estimates(&c, p, &real.h, &mut rng);
            err += est
                .col(0)
                .iter()
                .zip(real.h.col(0))
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
        }
        err
    };
    let ratio = var_at(20, 2) / var_at(40, 3);
    assert!((ratio - 2.0).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn explicit_preamble_path_validates_shortcut() {
    // same 1/(rho*P) error variance through the full received-matrix pipeline
    let c = cfg(32, 4, 64, 0.0);
    let p = 16u32;
    let mut err = 0.0;
    let mut count = 0u64;
    for t in 0..2000u64 {
        let mut rng = trial_rng(5, t);
        let real = draw_realization(&c, p, &mut rng);
        let assignment = draw_assignment(&c, p, &mut rng);
        let est = ls_estimate(&real, &assignment, &c, p);
        for i in 0..4 {
            if assignment.collided[i] {
                continue;
            }
            err += est
                .col(i)
                .iter()
                .zip(real.h.col(i))
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
            count += 32;
        }
    }
    let per_entry = err / count as f64;
    let expect = 1.0 / (c.snr_linear() * f64::from(p));
    assert!(
        (per_entry - expect).abs() / expect < 0.05,
        "variance {per_entry} vs {expect}"
    );
}

#[test]
fn channel_columns_concentrate_at_m() {
    // sample mean of ||h_i||^2 / M within 5 sigma of 1
    let c = cfg(64, 8, 32, 0.0);
    let trials = 2000u64;
    let mut acc = 0.0;
    for t in 0..trials {
        let mut rng = trial_rng(8, t);
        let real = draw_realization(&c, 4, &mut rng);
        for i in 0..8 {
            acc += real.h.col(i).iter().map(|z| z.norm_sqr()).sum::<f64>() / 64.0;
        }
    }
    let mean = acc / (trials as f64 * 8.0);
    let sigma = (1.0 / (64.0 * trials as f64 * 8.0)).sqrt();
    assert!((mean - 1.0).abs() < 5.0 * sigma, "mean {mean}, sigma {sigma}");
}

#[test]
fn mean_sinr_and_ase_track_analytic_at_m100() {
    // the spec'd operating point: M=100, N=10, L=200, 0 dB, P=40
    let c = cfg(100, 10, 200, 0.0);
    let p = PreambleLength::new(40.0, &c).unwrap();
    let summary = run_campaign(&c, 40, 100_000, 77, 0).unwrap();

    let sinr_ref = asymptotic_sinr(&c, p); // 9.7323600973...
    let rel_sinr = (summary.mean_sinr - sinr_ref).abs() / sinr_ref;
    assert!(rel_sinr < 0.05, "mean sinr {} vs {sinr_ref}", summary.mean_sinr);

    let ase_ref = average_se(&c, p); // 2.1809817152...
    let rel_ase = (summary.mean_ase - ase_ref).abs() / ase_ref;
    assert!(rel_ase < 0.05, "mean ase {} vs {ase_ref}", summary.mean_ase);

    // collision rate folded into the ASE is consistent with Eq.-style value
    let cfp = collision_free_prob(&c, p);
    assert!((1.0 - summary.collision_rate - cfp).abs() < 0.01);
}

#[test]
fn favorable_propagation_tightens_with_antennas() {
    // within 2% of the asymptotic SE already at M=500
    let c = cfg(500, 10, 200, 0.0);
    let p = PreambleLength::new(40.0, &c).unwrap();
    let summary = run_campaign(&c, 40, 20_000, 99, 0).unwrap();
    let se_ref = spectral_efficiency(&c, p);
    let rel = (summary.mean_se - se_ref).abs() / se_ref;
    assert!(rel < 0.02, "mean se {} vs {se_ref} ({rel})", summary.mean_se);
}

#[test]
fn summaries_identical_across_parallelism() {
    let c = cfg(50, 10, 200, -5.0);
    let s1 = run_campaign(&c, 32, 3000, 1234, 1).unwrap();
    let s8 = run_campaign(&c, 32, 3000, 1234, 8).unwrap();
    assert_eq!(s1, s8);
}

#[test]
fn noise_models_agree_on_average() {
    // the block-averaged noise power is the conditional mean of the
    // single-realization one; mean SINRs stay within a few percent at 0 dB
    let c = cfg(64, 4, 200, 0.0);
    let mut avg = CampaignOptions::new(c, 32, 20_000, 6);
    avg.parallelism = 0;
    let mut single = avg.clone();
    single.noise_model = NoisePowerModel::SingleRealization;
    let a = run_campaign_with(&avg).unwrap();
    let s = run_campaign_with(&single).unwrap();
    assert_eq!(a.collision_rate, s.collision_rate); // same substreams
    let rel = (a.mean_se - s.mean_se).abs() / a.mean_se;
    assert!(rel < 0.05, "block {} vs single {}", a.mean_se, s.mean_se);
}

#[test]
fn explicit_campaign_statistically_matches_synthetic() {
    let c = cfg(24, 4, 64, 0.0);
    let mut synth = CampaignOptions::new(c, 16, 6000, 11);
    synth.parallelism = 0;
    let mut explicit = synth.clone();
    explicit.estimation = EstimationPath::ExplicitPreambles;
    let a = run_campaign_with(&synth).unwrap();
    let b = run_campaign_with(&explicit).unwrap();
    assert_eq!(a.collision_rate, b.collision_rate); // same assignment prefix
    let rel = (a.mean_sinr - b.mean_sinr).abs() / a.mean_sinr;
    assert!(rel < 0.1, "synthetic {} vs explicit {}", a.mean_sinr, b.mean_sinr);
}

#[test]
fn collision_ci_shrinks_with_sqrt_trials() {
    let c = cfg(4, 10, 200, 0.0);
    let small = run_campaign(&c, 64, 10_000, 3, 0).unwrap();
    let large = run_campaign(&c, 64, 1_000_000, 3, 0).unwrap();
    let ratio = small.ci_collision / large.ci_collision;
    assert!((ratio - 10.0).abs() < 1.5, "CI ratio {ratio}, expected ~10");
}
