//! Closed-form average spectral efficiency versus preamble length.
//!
//! For `N` UEs picking uniformly from a pool of `P` orthogonal preambles, a
//! marked UE escapes collision with probability `(1 - 1/P)^(N-1)`. A
//! non-collided UE is detected with conjugate beamforming after LS channel
//! estimation; in the large-antenna limit its SINR is
//!
//! ```text
//! SINR(P) = M * rho / (N/P + (N-1)*rho + 1 + 1/(rho*P))
//! ```
//!
//! giving the spectral efficiency `SE(P) = (1 - P/L) * log2(1 + SINR(P))`
//! (the pre-log factor is the preamble overhead) and the average SE
//!
//! ```text
//! ASE(P) = (1 - 1/P)^(N-1) * SE(P) = f(P) * g(P)
//! ```
//!
//! with `f(P) = (1 - 1/P)^(N-1) * (1 - P/L)` collecting the collision and
//! overhead factors and `g(P) = log2(1 + SINR(P))` the rate factor. `f` has a
//! unique stationary point
//!
//! ```text
//! P1 = (-N + 2 + sqrt(N^2 + 4N(L-1) + 4 - 4L)) / 2
//! ```
//!
//! on `[1, L]`; ASE is strictly increasing left of `P1` and strictly concave
//! on `[P1, L]`, which is what the optimizer exploits. First and second ASE
//! derivatives are implemented in closed form (`ASE' = f'g + fg'`,
//! `ASE'' = f''g + 2f'g' + fg''`) so Newton's method gets exact curvature;
//! finite differences are reserved for tests.
//!
//! Everything here is a pure function of its arguments and safe to call from
//! any number of threads.

use crate::config::{ConfigError, PreambleLength, SystemConfig};

/// Probability that a marked UE's uniform preamble choice differs from all
/// `N-1` others: `(1 - 1/P)^(N-1)`. Exactly 1 for `N = 1`, exactly 0 at
/// `P = 1` with `N >= 2`.
pub fn collision_free_prob(cfg: &SystemConfig, p: PreambleLength) -> f64 {
    let base = 1.0 - 1.0 / p.get();
    base.powi(cfg.n_ues as i32 - 1)
}

/// Large-antenna-limit SINR of a non-collided UE, in linear scale.
///
/// Strictly increasing in `P` and `M`, strictly decreasing in `N`.
pub fn asymptotic_sinr(cfg: &SystemConfig, p: PreambleLength) -> f64 {
    let rho = cfg.snr_linear();
    let n = f64::from(cfg.n_ues);
    let m = f64::from(cfg.m_antennas);
    let p = p.get();
    m * rho / (n / p + (n - 1.0) * rho + 1.0 + 1.0 / (rho * p))
}

/// Spectral efficiency of a non-collided UE, `(1 - P/L) * log2(1 + SINR)`,
/// in bits/s/Hz. Exactly 0 at `P = L`.
pub fn spectral_efficiency(cfg: &SystemConfig, p: PreambleLength) -> f64 {
    se_from_sinr(cfg.packet_len, p.get(), asymptotic_sinr(cfg, p))
}

/// Average spectral efficiency: collision-free probability times [`spectral_efficiency`].
pub fn average_se(cfg: &SystemConfig, p: PreambleLength) -> f64 {
    collision_free_prob(cfg, p) * spectral_efficiency(cfg, p)
}

/// Overhead-discounted rate for a given instantaneous SINR; shared with the
/// simulator so both paths use the identical formula.
pub(crate) fn se_from_sinr(packet_len: u32, p: f64, sinr: f64) -> f64 {
    (1.0 - p / f64::from(packet_len)) * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Unchecked ASE evaluation for solver/oracle hot loops; assumes `1 <= p <= L`.
pub(crate) fn average_se_raw(cfg: &SystemConfig, p: f64) -> f64 {
    let base = 1.0 - 1.0 / p;
    let cfp = base.powi(cfg.n_ues as i32 - 1);
    let rho = cfg.snr_linear();
    let n = f64::from(cfg.n_ues);
    let m = f64::from(cfg.m_antennas);
    let sinr = m * rho / (n / p + (n - 1.0) * rho + 1.0 + 1.0 / (rho * p));
    cfp * se_from_sinr(cfg.packet_len, p, sinr)
}

/// Unchecked SE evaluation (no collision factor); assumes `1 <= p <= L`.
pub(crate) fn spectral_efficiency_raw(cfg: &SystemConfig, p: f64) -> f64 {
    let rho = cfg.snr_linear();
    let n = f64::from(cfg.n_ues);
    let m = f64::from(cfg.m_antennas);
    let sinr = m * rho / (n / p + (n - 1.0) * rho + 1.0 + 1.0 / (rho * p));
    se_from_sinr(cfg.packet_len, p, sinr)
}

/// Value and first two derivatives of a factor, evaluated at one point.
#[derive(Debug, Clone, Copy)]
struct Parts {
    v: f64,
    d1: f64,
    d2: f64,
}

/// `f(P) = (1 - 1/P)^(N-1) * (1 - P/L)` and derivatives; needs `P > 1`.
fn collision_overhead_parts(n_ues: u32, packet_len: u32, p: f64) -> Parts {
    let l = f64::from(packet_len);
    let v = 1.0 - p / l;
    let v1 = -1.0 / l;
    let (u, u1, u2) = if n_ues == 1 {
        (1.0, 0.0, 0.0)
    } else {
        let k = f64::from(n_ues - 1);
        let t = 1.0 - 1.0 / p;
        let p2 = p * p;
        let u = t.powi(n_ues as i32 - 1);
        let u1 = k * t.powi(n_ues as i32 - 2) / p2;
        // second term of u'' cancels for N = 2 through the (N-2) coefficient
        let u2 = k * (k - 1.0) * t.powi(n_ues as i32 - 3) / (p2 * p2)
            - 2.0 * k * t.powi(n_ues as i32 - 2) / (p2 * p);
        (u, u1, u2)
    };
    Parts {
        v: u * v,
        d1: u1 * v + u * v1,
        d2: u2 * v + 2.0 * u1 * v1,
    }
}

/// `g(P) = log2(1 + SINR(P))` and derivatives. Writing the SINR as
/// `S = M*rho*P / (a + b*P)` with `a = N + 1/rho`, `b = (N-1)*rho + 1` keeps
/// the algebra short: `S' = M*rho*a/(a+bP)^2`, `S'' = -2b S'/(a+bP)`.
fn rate_parts(cfg: &SystemConfig, p: f64) -> Parts {
    let rho = cfg.snr_linear();
    let n = f64::from(cfg.n_ues);
    let m = f64::from(cfg.m_antennas);
    let a = n + 1.0 / rho;
    let b = (n - 1.0) * rho + 1.0;
    let den = a + b * p;
    let s = m * rho * p / den;
    let s1 = m * rho * a / (den * den);
    let s2 = -2.0 * b * s1 / den;
    let ln2 = std::f64::consts::LN_2;
    let one_s = 1.0 + s;
    Parts {
        v: s.ln_1p() / ln2,
        d1: s1 / (one_s * ln2),
        d2: (s2 * one_s - s1 * s1) / (one_s * one_s * ln2),
    }
}

/// First and second derivative of the average SE with respect to `P`,
/// in closed form. Requires an interior point `1 < P < L`; the collision
/// factor's derivatives are singular at `P = 1`.
pub fn ase_derivatives(cfg: &SystemConfig, p: f64) -> Result<(f64, f64), ConfigError> {
    let l = f64::from(cfg.packet_len);
    if !p.is_finite() || p <= 1.0 || p >= l {
        return Err(ConfigError::PreambleNotInterior { got: p, max: cfg.packet_len });
    }
    let f = collision_overhead_parts(cfg.n_ues, cfg.packet_len, p);
    let g = rate_parts(cfg, p);
    Ok((
        f.d1 * g.v + f.v * g.d1,
        f.d2 * g.v + 2.0 * f.d1 * g.d1 + f.v * g.d2,
    ))
}

/// Derivative of the collision-times-overhead factor `f` alone; exposed so
/// the stationary point can be verified directly. Requires `P > 1`.
pub fn collision_overhead_derivative(cfg: &SystemConfig, p: f64) -> f64 {
    collision_overhead_parts(cfg.n_ues, cfg.packet_len, p).d1
}

/// Unique positive root `P1` of `f'(P) = 0`:
/// `P1 = (-N + 2 + sqrt((N-2)^2 + 4(N-1)L)) / 2`, which equals the
/// discriminant form `N^2 + 4N(L-1) + 4 - 4L` but avoids cancellation.
/// Satisfies `1 <= P1 < L`, with `P1 = 1` exactly when `N = 1`.
pub fn p1_stationary_point(cfg: &SystemConfig) -> f64 {
    let n = f64::from(cfg.n_ues);
    let l = f64::from(cfg.packet_len);
    let disc = (n - 2.0) * (n - 2.0) + 4.0 * (n - 1.0) * l;
    (-n + 2.0 + disc.sqrt()) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: u32, n: u32, l: u32, snr_db: f64) -> SystemConfig {
        SystemConfig::new(m, n, l, snr_db).unwrap()
    }

    fn pl(p: f64, c: &SystemConfig) -> PreambleLength {
        PreambleLength::new(p, c).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn collision_free_prob_trivial_cases() {
        let c1 = cfg(100, 1, 200, 0.0);
        assert_eq!(collision_free_prob(&c1, pl(5.0, &c1)), 1.0);
        let c2 = cfg(100, 2, 200, 0.0);
        assert_eq!(collision_free_prob(&c2, pl(1.0, &c2)), 0.0);
    }

    #[test]
    fn collision_free_prob_derived_value() {
        // (63/64)^9, frozen from a 40-digit evaluation.
        let c = cfg(100, 10, 200, 0.0);
        let got = collision_free_prob(&c, pl(64.0, &c));
        assert!(rel_close(got, 0.86785102198249214, 1e-14), "got {got}");
    }

    #[test]
    fn sinr_derived_value_and_monotonicity() {
        // 100 / (0.25 + 9 + 1 + 0.025), frozen from exact rational evaluation.
        let c = cfg(100, 10, 200, 0.0);
        let got = asymptotic_sinr(&c, pl(40.0, &c));
        assert!(rel_close(got, 9.7323600973236009732, 1e-14), "got {got}");

        // doubling P strictly increases the SINR
        for p in [2.0, 10.0, 50.0, 99.0] {
            assert!(asymptotic_sinr(&c, pl(2.0 * p, &c)) > asymptotic_sinr(&c, pl(p, &c)));
        }
    }

    #[test]
    fn sinr_limit_n1() {
        // N = 1: denominator tends to 1 as P grows, so SINR -> M * rho.
        let c = cfg(1, 1, 2000, 0.0);
        let s = asymptotic_sinr(&c, pl(2000.0, &c));
        assert!((s - 1.0).abs() < 1e-3, "got {s}");
    }

    #[test]
    fn se_derived_and_boundary() {
        let c = cfg(100, 10, 200, 0.0);
        let got = spectral_efficiency(&c, pl(40.0, &c));
        assert!(rel_close(got, 2.7391163691284277, 1e-14), "got {got}");
        assert_eq!(spectral_efficiency(&c, pl(200.0, &c)), 0.0);
    }

    #[test]
    fn se_grows_like_log2_m() {
        // with SINR linear in M, doubling M adds ~ (1 - P/L) bits at large M
        let p = 40.0;
        let prelog = 1.0 - p / 200.0;
        let c1 = cfg(1 << 20, 10, 200, 0.0);
        let c2 = cfg(1 << 21, 10, 200, 0.0);
        let d = spectral_efficiency(&c2, pl(p, &c2)) - spectral_efficiency(&c1, pl(p, &c1));
        assert!((d - prelog).abs() < 1e-4, "got increment {d}");
    }

    #[test]
    fn average_se_derived_and_trivial() {
        let c = cfg(100, 10, 200, 0.0);
        let got = average_se(&c, pl(40.0, &c));
        assert!(rel_close(got, 2.1809817152073177, 1e-14), "got {got}");

        // collision certain at P = 1 with N >= 2
        assert_eq!(average_se(&c, pl(1.0, &c)), 0.0);
        // zero at P = L
        assert_eq!(average_se(&c, pl(200.0, &c)), 0.0);

        // N = 1: ASE equals SE exactly
        let c1 = cfg(100, 1, 200, 0.0);
        for p in [1.0, 17.0, 123.5, 200.0] {
            assert_eq!(average_se(&c1, pl(p, &c1)), spectral_efficiency(&c1, pl(p, &c1)));
        }
    }

    #[test]
    fn raw_matches_checked() {
        let c = cfg(300, 7, 150, -5.0);
        for p in [1.0, 2.5, 77.0, 150.0] {
            assert_eq!(average_se_raw(&c, p), average_se(&c, pl(p, &c)));
            assert_eq!(spectral_efficiency_raw(&c, p), spectral_efficiency(&c, pl(p, &c)));
        }
    }

    #[test]
    fn p1_closed_form() {
        // N = 1 collapses to the lower bound
        assert_eq!(p1_stationary_point(&cfg(100, 1, 200, 0.0)), 1.0);
        // (-8 + sqrt(7264)) / 2
        let p1 = p1_stationary_point(&cfg(100, 10, 200, 0.0));
        assert!(rel_close(p1, 38.614551505325032577, 1e-14), "got {p1}");
        // N = 2: the quadratic reduces to P1 = sqrt(L)
        let p1b = p1_stationary_point(&cfg(100, 2, 200, 0.0));
        assert!(rel_close(p1b, 200f64.sqrt(), 1e-14), "got {p1b}");
    }

    #[test]
    fn p1_zeroes_f_derivative() {
        for (n, l) in [(2u32, 200u32), (10, 200), (10, 50), (50, 500), (3, 777)] {
            let c = cfg(100, n, l, 0.0);
            let p1 = p1_stationary_point(&c);
            assert!(p1 > 1.0 && p1 < f64::from(l));
            let d = collision_overhead_derivative(&c, p1);
            assert!(d.abs() < 1e-9, "f'(P1) = {d} for N={n} L={l}");
        }
    }

    #[test]
    fn derivatives_reject_boundary() {
        let c = cfg(100, 10, 200, 0.0);
        assert!(ase_derivatives(&c, 1.0).is_err());
        assert!(ase_derivatives(&c, 200.0).is_err());
        assert!(ase_derivatives(&c, 250.0).is_err());
        assert!(ase_derivatives(&c, f64::NAN).is_err());
        assert!(ase_derivatives(&c, 1.5).is_ok());
    }

    #[test]
    fn derivative_signs_around_stationary_point() {
        let c = cfg(100, 10, 200, 0.0);
        let p1 = p1_stationary_point(&c);
        // f'(P1) = 0, so ASE'(P1) = f(P1) g'(P1) > 0
        let (d1, d2) = ase_derivatives(&c, p1).unwrap();
        assert!(d1 > 0.0);
        assert!(d2 < 0.0);
        // toward the packet boundary ASE decreases
        let (d1_near_l, _) = ase_derivatives(&c, 199.999).unwrap();
        assert!(d1_near_l < 0.0);
        // spec'd numeric case: negative slope at P = 100
        let (d1_100, _) = ase_derivatives(&c, 100.0).unwrap();
        assert!(d1_100 < 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences_spot() {
        // dense check lives in the property suite; spot-check a few points here
        for (c, p) in [
            (cfg(100, 10, 200, 0.0), 100.0),
            (cfg(100, 10, 200, 0.0), 5.0),
            (cfg(500, 2, 120, -12.0), 60.0),
            (cfg(64, 1, 200, 7.0), 40.0),
        ] {
            let h = 1e-4 * p;
            let (d1, d2) = ase_derivatives(&c, p).unwrap();
            let fp = average_se_raw(&c, p + h);
            let fm = average_se_raw(&c, p - h);
            let f0 = average_se_raw(&c, p);
            let fd1 = (fp - fm) / (2.0 * h);
            let fd2 = (fp - 2.0 * f0 + fm) / (h * h);
            assert!((d1 - fd1).abs() <= 1e-6 * fd1.abs().max(1e-3), "d1={d1} fd1={fd1}");
            assert!((d2 - fd2).abs() <= 1e-5 * fd2.abs().max(1e-3), "d2={d2} fd2={fd2}");
        }
    }
}
