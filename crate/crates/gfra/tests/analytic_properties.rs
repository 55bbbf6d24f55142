//! Property-based checks of the closed-form model: monotonicity, bounds,
//! exactness of the stationary point, and agreement between the analytic
//! derivatives and a finite-difference oracle.

use proptest::prelude::*;

use gfra::analytic::{
    ase_derivatives, asymptotic_sinr, average_se, collision_free_prob,
    collision_overhead_derivative, p1_stationary_point, spectral_efficiency,
};
use gfra::{PreambleLength, SystemConfig};

fn config() -> impl Strategy<Value = SystemConfig> {
    (1u32..=600, 1u32..=60, 2u32..=500, -25.0f64..15.0)
        .prop_map(|(m, n, l, snr)| SystemConfig::new(m, n, l, snr).unwrap())
}

/// Interior evaluation point for derivative checks: comfortably inside
/// `(1, L)` so the finite-difference stencil stays in the domain.
fn interior_point(cfg: &SystemConfig) -> impl Strategy<Value = f64> {
    let l = f64::from(cfg.packet_len);
    (0.002f64..0.998).prop_map(move |t| 1.0 + t * (l - 1.0)).prop_filter(
        "strictly interior with stencil margin",
        move |&p| p > 1.001 && p < l * 0.9995,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinr_monotone_in_antennas_and_preamble(cfg in config(), t in 0.0f64..1.0) {
        let l = f64::from(cfg.packet_len);
        let p1 = 1.0 + t * (l - 1.0) * 0.5;
        let p2 = p1 + 0.5 * (l - p1).max(1.0).min(l - p1);
        prop_assume!(p2 > p1 && p2 <= l);
        let pa = PreambleLength::new(p1, &cfg).unwrap();
        let pb = PreambleLength::new(p2, &cfg).unwrap();
        // longer preamble: strictly better estimation, higher SINR
        prop_assert!(asymptotic_sinr(&cfg, pb) > asymptotic_sinr(&cfg, pa));
        // more antennas: strictly higher SINR
        let bigger = SystemConfig::new(cfg.m_antennas + 13, cfg.n_ues, cfg.packet_len, cfg.snr_db).unwrap();
        prop_assert!(asymptotic_sinr(&bigger, pa) > asymptotic_sinr(&cfg, pa));
    }

    #[test]
    fn sinr_decreases_with_more_ues(cfg in config(), t in 0.0f64..1.0, dn in 1u32..20) {
        let l = f64::from(cfg.packet_len);
        let p = PreambleLength::new(1.0 + t * (l - 1.0), &cfg).unwrap();
        let crowded = SystemConfig::new(cfg.m_antennas, cfg.n_ues + dn, cfg.packet_len, cfg.snr_db).unwrap();
        let p2 = PreambleLength::new(p.get(), &crowded).unwrap();
        prop_assert!(asymptotic_sinr(&crowded, p2) < asymptotic_sinr(&cfg, p));
    }

    #[test]
    fn average_se_bounded_by_se(cfg in config(), t in 0.0f64..=1.0) {
        let l = f64::from(cfg.packet_len);
        let p = PreambleLength::new(1.0 + t * (l - 1.0), &cfg).unwrap();
        let ase = average_se(&cfg, p);
        let se = spectral_efficiency(&cfg, p);
        prop_assert!(ase >= 0.0);
        prop_assert!(ase <= se);
        let cfp = collision_free_prob(&cfg, p);
        prop_assert!((0.0..=1.0).contains(&cfp));
    }

    #[test]
    fn stationary_point_zeroes_f_derivative(cfg in config()) {
        let p1 = p1_stationary_point(&cfg);
        let l = f64::from(cfg.packet_len);
        prop_assert!((1.0..l).contains(&p1));
        if cfg.n_ues >= 2 {
            // the closed form must hit the root of f' to full precision
            prop_assert!(collision_overhead_derivative(&cfg, p1).abs() < 1e-9);
        } else {
            prop_assert_eq!(p1, 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Analytic ASE derivatives against central finite differences at step
    /// `h = 1e-4 * P`: relative error within 1e-6 wherever the oracle itself
    /// is that accurate, with an absolute floor covering the oracle's own
    /// subtractive-cancellation noise near stationary points.
    #[test]
    fn derivatives_match_finite_differences(
        (cfg, p) in config().prop_flat_map(|c| (Just(c), interior_point(&c)))
    ) {
        let h = 1e-4 * p;
        let (d1, d2) = ase_derivatives(&cfg, p).unwrap();
        let at = |x: f64| average_se(&cfg, PreambleLength::new(x, &cfg).unwrap());
        let (fp, f0, fm) = (at(p + h), at(p), at(p - h));
        let fd1 = (fp - fm) / (2.0 * h);
        let fd2 = (fp - 2.0 * f0 + fm) / (h * h);

        let eps = f64::EPSILON;
        let noise1 = 4.0 * eps * f0.abs() / (2.0 * h);
        let noise2 = 8.0 * eps * f0.abs() / (h * h);
        let tol1 = 1e-6 * d1.abs().max(fd1.abs()) + 1e-9 + 4.0 * noise1;
        let tol2 = 1e-6 * d2.abs().max(fd2.abs()) + 1e-9 + 4.0 * noise2;
        prop_assert!((d1 - fd1).abs() <= tol1, "P={p} d1={d1} fd1={fd1} tol={tol1}");
        prop_assert!((d2 - fd2).abs() <= tol2, "P={p} d2={d2} fd2={fd2} tol={tol2}");
    }
}

/// The collision-free formula equals the exhaustive probability that a
/// marked UE's uniform choice differs from all `N-1` others.
#[test]
fn collision_free_prob_matches_enumeration() {
    for n in 1u32..=4 {
        for p in 1u32..=6 {
            let total = (p as u64).pow(n);
            let mut favorable = 0u64;
            for code in 0..total {
                let mut digits = code;
                let marked = (digits % p as u64) as u32;
                digits /= p as u64;
                let mut clash = false;
                for _ in 1..n {
                    if (digits % p as u64) as u32 == marked {
                        clash = true;
                    }
                    digits /= p as u64;
                }
                if !clash {
                    favorable += 1;
                }
            }
            let exact = favorable as f64 / total as f64;
            let cfg = SystemConfig::new(16, n, 600, 0.0).unwrap();
            let got = collision_free_prob(&cfg, PreambleLength::new(f64::from(p), &cfg).unwrap());
            assert!(
                (got - exact).abs() <= 1e-12,
                "N={n} P={p}: formula {got} vs enumeration {exact}"
            );
        }
    }
}

/// ASE rises on [1, P1] and is concave on [P1, L]; a compact version of the
/// full acceptance check, on a handful of fixed configs.
#[test]
fn ase_shape_matches_lemma_structure() {
    for (n, l, snr) in [(10u32, 200u32, 0.0), (2, 120, -8.0), (25, 400, 5.0)] {
        let cfg = SystemConfig::new(128, n, l, snr).unwrap();
        let p1 = p1_stationary_point(&cfg);
        let grid: Vec<f64> = (0..1000)
            .map(|i| 1.0 + (f64::from(l) - 1.0) * i as f64 / 999.0)
            .collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&p| average_se(&cfg, PreambleLength::new(p, &cfg).unwrap()))
            .collect();
        for i in 0..999 {
            if grid[i + 1] <= p1 {
                assert!(vals[i + 1] > vals[i], "not increasing at {}", grid[i]);
            }
        }
        for i in 0..998 {
            if grid[i] >= p1 {
                let second = vals[i + 2] - 2.0 * vals[i + 1] + vals[i];
                assert!(second < 0.0, "not concave at {}", grid[i]);
            }
        }
    }
}
