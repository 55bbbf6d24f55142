//! SE-maximizing preamble length.
//!
//! The average SE is strictly increasing on `[1, P1)` and strictly concave on
//! `[P1, L]`, with `ASE'(P1) > 0` and `ASE'(L) < 0`, so the global maximizer
//! lives in `[P1, L]` and is the unique root of `ASE'` there. We run Newton's
//! method on `ASE'` starting from `P1`, safeguarded by bisection: the sign of
//! `ASE'` maintains a bracket and any Newton step leaving it is replaced by
//! the midpoint.
//!
//! The granted-access baseline (dedicated preambles, no collisions) maximizes
//! the plain SE on `[N, L]`. That objective is not assumed unimodal: a
//! 1024-point coarse scan selects the bracket and golden-section search
//! refines it.
//!
//! [`grid_oracle`] is a deliberately naive exhaustive scan used by the test
//! suites to certify both solvers; it must stay independent of them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic;
use crate::config::SystemConfig;

/// Newton iteration budget.
pub const MAX_NEWTON_ITERATIONS: u32 = 100;

/// Scale-free stop: `|ASE'(P)| <= RESIDUAL_TOL * max(1, |ASE''(P)|)`.
const RESIDUAL_TOL: f64 = 1e-12;

/// Secondary stop on the safeguarding bracket width.
const BRACKET_TOL: f64 = 1e-9;

/// Absolute tolerance in `P` for the golden-section refinement.
const GOLDEN_XATOL: f64 = 1e-6;

const COARSE_POINTS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("granted access needs N <= L, got N = {n} > L = {l}")]
    UeCountExceedsPacket { n: u32, l: u32 },
    #[error("grid oracle needs lo < hi, got [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("grid oracle needs a positive finite resolution, got {0}")]
    BadResolution(f64),
    #[error("objective returned a non-finite value at {at}")]
    NonFiniteObjective { at: f64 },
}

/// Solver output: the Lemma-style stationary point `P1`, the grant-free
/// optimum `P*` (continuous and integer-rounded), the granted-access optimum
/// `P_hat*`, the achieved objective values, and convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub config: SystemConfig,
    /// Stationary point of the collision-times-overhead factor.
    pub p1: f64,
    /// Continuous maximizer of the average SE on `[P1, L]`.
    pub p_star: f64,
    /// Better of floor/ceil of `p_star` under the average SE; ties break low.
    pub p_star_int: u32,
    /// Granted-access maximizer of the SE on `[N, L]`.
    pub p_hat_star: f64,
    pub ase_at_star: f64,
    pub se_at_hat_star: f64,
    pub iterations: u32,
    pub converged: bool,
    /// `|ASE'(p_star)|`, or 0 when the optimum sits on an interval boundary.
    pub residual: f64,
}

impl OptimumReport {
    /// Column order of [`OptimumReport::to_csv_row`].
    pub const CSV_HEADER: &'static str = "m,n,l,snr_db,p1,p_star,p_star_int,p_hat_star,ase_at_star,se_at_hat_star,iterations,converged,residual";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config.m_antennas,
            self.config.n_ues,
            self.config.packet_len,
            self.config.snr_db,
            self.p1,
            self.p_star,
            self.p_star_int,
            self.p_hat_star,
            self.ase_at_star,
            self.se_at_hat_star,
            self.iterations,
            self.converged,
            self.residual
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Maximizes the average SE over the preamble length (grant-free access).
///
/// For `N >= 2` this is safeguarded Newton on `ASE'` over `[P1, L - eps]`.
/// For `N = 1` the collision factor is identically 1 and the problem reduces
/// to the granted objective on `[1, L]`.
pub fn optimize_grant_free(cfg: &SystemConfig) -> Result<OptimumReport, OptimizerError> {
    let l = f64::from(cfg.packet_len);
    let p1 = analytic::p1_stationary_point(cfg);

    if cfg.n_ues == 1 {
        let (p_star, iterations) = maximize_se(cfg, 1.0, l);
        return Ok(finish_report(cfg, p1, p_star, p_star, iterations, true));
    }

    let p_hat_star = optimize_granted(cfg)?;

    // eps keeps the right end away from the f = 0 endpoint at P = L.
    let mut lo = p1;
    let mut hi = l * (1.0 - 1e-9);
    let mut x = p1;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let (d1, d2) = analytic::ase_derivatives(cfg, x).expect("iterate stays interior");
        if d1 > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if d1.abs() <= RESIDUAL_TOL * d2.abs().max(1.0) {
            converged = true;
            break;
        }
        if hi - lo <= BRACKET_TOL {
            x = 0.5 * (lo + hi);
            converged = true;
            break;
        }
        let newton = x - d1 / d2;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if !converged {
        x = 0.5 * (lo + hi); // best bracketed estimate
    }

    let mut report = finish_report(cfg, p1, x, p_hat_star, iterations, converged);
    report.residual = analytic::ase_derivatives(cfg, x).map(|(d1, _)| d1.abs()).unwrap_or(0.0);
    Ok(report)
}

/// Granted-access baseline: maximizes the SE (no collision factor) over
/// `N <= P <= L` to about `1e-6` absolute tolerance in `P`.
pub fn optimize_granted(cfg: &SystemConfig) -> Result<f64, OptimizerError> {
    if cfg.n_ues > cfg.packet_len {
        return Err(OptimizerError::UeCountExceedsPacket { n: cfg.n_ues, l: cfg.packet_len });
    }
    let (p, _) = maximize_se(cfg, f64::from(cfg.n_ues), f64::from(cfg.packet_len));
    Ok(p)
}

/// Exhaustive scan of `objective` over `lo, lo+res, ...` up to and including
/// `hi`. Ties break toward the smallest argument. Used in tests to certify
/// the solvers, so it must stay a plain scan.
pub fn grid_oracle<F>(objective: F, lo: f64, hi: f64, resolution: f64) -> Result<(f64, f64), OptimizerError>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(OptimizerError::BadInterval { lo, hi });
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(OptimizerError::BadResolution(resolution));
    }
    let steps = ((hi - lo) / resolution).floor() as u64;
    let mut best_x = f64::NAN;
    let mut best_v = f64::NEG_INFINITY;
    let mut probe = |x: f64| -> Result<(), OptimizerError> {
        let v = objective(x);
        if !v.is_finite() {
            return Err(OptimizerError::NonFiniteObjective { at: x });
        }
        if v > best_v {
            best_v = v;
            best_x = x;
        }
        Ok(())
    };
    for k in 0..=steps {
        probe(lo + k as f64 * resolution)?;
    }
    // cover hi when the last lattice point fell short of it
    if lo + steps as f64 * resolution < hi - 1e-12 * resolution {
        probe(hi)?;
    }
    Ok((best_x, best_v))
}

fn finish_report(
    cfg: &SystemConfig,
    p1: f64,
    p_star: f64,
    p_hat_star: f64,
    iterations: u32,
    converged: bool,
) -> OptimumReport {
    OptimumReport {
        config: *cfg,
        p1,
        p_star,
        p_star_int: round_to_better_integer(cfg, p_star),
        p_hat_star,
        ase_at_star: analytic::average_se_raw(cfg, p_star),
        se_at_hat_star: analytic::spectral_efficiency_raw(cfg, p_hat_star),
        iterations,
        converged,
        residual: 0.0,
    }
}

/// Evaluates the ASE at both neighboring integers and keeps the larger;
/// ties break to the smaller P (less overhead).
fn round_to_better_integer(cfg: &SystemConfig, p_star: f64) -> u32 {
    let l = f64::from(cfg.packet_len);
    let lo = p_star.floor().clamp(1.0, l);
    let hi = p_star.ceil().clamp(1.0, l);
    if analytic::average_se_raw(cfg, hi) > analytic::average_se_raw(cfg, lo) {
        hi as u32
    } else {
        lo as u32
    }
}

/// Coarse scan plus golden-section refinement of the SE on `[lo, hi]`.
/// Returns the maximizer and the number of golden-section iterations.
fn maximize_se(cfg: &SystemConfig, lo: f64, hi: f64) -> (f64, u32) {
    let f = |p: f64| analytic::spectral_efficiency_raw(cfg, p);
    if hi - lo <= GOLDEN_XATOL {
        return (lo, 0);
    }
    let step = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let mut best_k = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..COARSE_POINTS {
        let v = f(lo + k as f64 * step);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let a = lo + best_k.saturating_sub(1) as f64 * step;
    let b = (lo + (best_k + 1) as f64 * step).min(hi);
    golden_section_max(f, a, b)
}

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, u32) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while b - a > GOLDEN_XATOL {
        iterations += 1;
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    (0.5 * (a + b), iterations)
}
