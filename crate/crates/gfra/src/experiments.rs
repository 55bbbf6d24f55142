//! Sweep harnesses that reproduce the headline figures as CSV tables.
//!
//! * [`run_fig4`] — average SE versus preamble length at fixed SNR, analytic
//!   and (optionally) simulated with confidence intervals;
//! * [`run_fig5`] — optimal preamble lengths (`P*`, granted `P_hat*`, and the
//!   stationary point `P1`) versus SNR for several antenna counts;
//! * [`run_fig6`] — average SE versus antenna count under preamble-length
//!   policies (`P*`, `P1`, `P_hat*`, `L/2`, fixed).
//!
//! Grid points evaluate in parallel, each with a campaign seed derived from
//! the sweep master seed and the point index; rows are emitted in grid order
//! after the parallel map completes, so every table is a deterministic
//! function of (spec, master seed). Analytic columns never depend on trials
//! or seed. Each CSV writer has a JSON sidecar carrying the fully resolved
//! spec for provenance.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic;
use crate::config::{ConfigError, PreambleLength, SystemConfig};
use crate::montecarlo::{run_campaign_with, CampaignError, CampaignOptions, SINR_CAP};
use crate::optimizer::{optimize_grant_free, OptimizerError};
use crate::parallel::map_indexed;
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("sweep grid must be nonempty")]
    EmptyGrid,
    #[error("sweep grid must be strictly increasing (violated at index {0})")]
    GridNotIncreasing(usize),
    #[error("this operation sweeps {expected:?}, spec says {got:?}")]
    WrongAxis { expected: SweepAxis, got: SweepAxis },
    #[error("simulation needs an integer preamble grid, got {0}")]
    NonIntegerGrid(f64),
    #[error("antenna grid values must be positive integers, got {0}")]
    BadAntennaGrid(f64),
    #[error("policy sweep needs at least one policy")]
    NoPolicies,
    #[error("fig5 needs at least one antenna count")]
    NoAntennaValues,
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Axis swept by a [`SweepSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PreambleLen,
    SnrDb,
    MAntennas,
}

/// Preamble-length policy evaluated per antenna count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Grant-free optimum `P*`.
    PStar,
    /// Stationary point of the collision-times-overhead factor.
    P1,
    /// Granted-access optimum `P_hat*`.
    PHatStar,
    /// Half the packet.
    HalfL,
    /// A fixed preamble length.
    Fixed(u32),
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::PStar => "p_star".into(),
            Policy::P1 => "p1".into(),
            Policy::PHatStar => "p_hat_star".into(),
            Policy::HalfL => "half_l".into(),
            Policy::Fixed(p) => format!("fixed_{p}"),
        }
    }
}

/// Declarative sweep: a base scenario, the varied axis with its grid, the
/// policies (fig6-style sweeps), the per-point trial count (0 = analytic
/// only) and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub vary: SweepAxis,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub policies: Vec<Policy>,
    #[serde(default)]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        self.base.validate()?;
        if self.grid.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        for (i, w) in self.grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(SweepError::GridNotIncreasing(i + 1));
            }
        }
        Ok(())
    }

    fn expect_axis(&self, expected: SweepAxis) -> Result<(), SweepError> {
        if self.vary != expected {
            return Err(SweepError::WrongAxis { expected, got: self.vary });
        }
        Ok(())
    }
}

/// Provenance for a sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub config: SystemConfig,
    pub master_seed: u64,
    pub trials: u64,
}

/// Sampled ASE-versus-preamble-length curve at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AseCurve {
    pub snr_db: f64,
    pub preamble_grid: Vec<f64>,
    pub analytic_ase: Vec<f64>,
    /// Monte Carlo mean ASE per grid point; `None` when `trials == 0`.
    pub empirical_ase: Option<Vec<f64>>,
    /// 95% confidence half-widths matching `empirical_ase`.
    pub ci_half_width: Option<Vec<f64>>,
    pub meta: SweepMeta,
}

/// One ASE-vs-P curve at the spec's base SNR. Grid values must lie in
/// `[1, L]` and be integers whenever `trials > 0`.
pub fn run_fig4(spec: &SweepSpec, parallelism: usize) -> Result<AseCurve, SweepError> {
    spec.validate()?;
    spec.expect_axis(SweepAxis::PreambleLen)?;
    let cfg = spec.base;
    for &p in &spec.grid {
        PreambleLength::new(p, &cfg)?;
        if spec.trials > 0 && p.fract() != 0.0 {
            return Err(SweepError::NonIntegerGrid(p));
        }
    }

    let analytic_ase: Vec<f64> = spec
        .grid
        .iter()
        .map(|&p| analytic::average_se(&cfg, PreambleLength::new(p, &cfg).expect("validated")))
        .collect();

    let (empirical_ase, ci_half_width) = if spec.trials > 0 {
        let summaries = map_indexed(spec.grid.len(), parallelism, |i| {
            let mut opts = CampaignOptions::new(cfg, spec.grid[i] as u32, spec.trials, derive_seed(spec.master_seed, i as u64));
            opts.parallelism = 1; // points already run in parallel
            run_campaign_with(&opts)
        });
        let mut means = Vec::with_capacity(summaries.len());
        let mut cis = Vec::with_capacity(summaries.len());
        for s in summaries {
            let s = s?;
            means.push(s.mean_ase);
            cis.push(s.ci_ase);
        }
        (Some(means), Some(cis))
    } else {
        (None, None)
    };

    Ok(AseCurve {
        snr_db: cfg.snr_db,
        preamble_grid: spec.grid.clone(),
        analytic_ase,
        empirical_ase,
        ci_half_width,
        meta: SweepMeta { config: cfg, master_seed: spec.master_seed, trials: spec.trials },
    })
}

/// One curve per SNR value, each with its own derived master seed.
pub fn run_fig4_multi(
    spec: &SweepSpec,
    snrs_db: &[f64],
    parallelism: usize,
) -> Result<Vec<AseCurve>, SweepError> {
    snrs_db
        .iter()
        .enumerate()
        .map(|(j, &snr)| {
            let mut sub = spec.clone();
            sub.base.snr_db = snr;
            sub.master_seed = derive_seed(spec.master_seed, 0x4000_0000_0000_0000 | j as u64);
            run_fig4(&sub, parallelism)
        })
        .collect()
}

/// Optimal preamble lengths for one (SNR, M) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig5Row {
    pub snr_db: f64,
    pub m_antennas: u32,
    pub p1: f64,
    pub p_star: f64,
    pub p_hat_star: f64,
    pub converged: bool,
}

/// Optimal-preamble-length table over the spec's SNR grid, one block of rows
/// per antenna count (SNR varying fastest within a block).
pub fn run_fig5(
    spec: &SweepSpec,
    m_values: &[u32],
    parallelism: usize,
) -> Result<Vec<Fig5Row>, SweepError> {
    spec.validate()?;
    spec.expect_axis(SweepAxis::SnrDb)?;
    if m_values.is_empty() {
        return Err(SweepError::NoAntennaValues);
    }
    let n_cells = m_values.len() * spec.grid.len();
    let cells = map_indexed(n_cells, parallelism, |idx| {
        let m = m_values[idx / spec.grid.len()];
        let snr_db = spec.grid[idx % spec.grid.len()];
        let cfg = SystemConfig::new(m, spec.base.n_ues, spec.base.packet_len, snr_db)?;
        let report = optimize_grant_free(&cfg)?;
        Ok::<Fig5Row, SweepError>(Fig5Row {
            snr_db,
            m_antennas: m,
            p1: report.p1,
            p_star: report.p_star,
            p_hat_star: report.p_hat_star,
            converged: report.converged,
        })
    });
    let rows: Vec<Fig5Row> = cells.into_iter().collect::<Result<_, _>>()?;

    // both optima are non-increasing along SNR for each M (solver tolerance)
    #[cfg(debug_assertions)]
    for block in rows.chunks(spec.grid.len()) {
        for w in block.windows(2) {
            debug_assert!(w[1].p_star <= w[0].p_star + 1e-6, "{w:?}");
            debug_assert!(w[1].p_hat_star <= w[0].p_hat_star + 1e-6, "{w:?}");
        }
    }
    Ok(rows)
}

/// ASE of one policy at one antenna count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig6Row {
    pub m_antennas: u32,
    pub policy: Policy,
    /// The preamble length the policy resolved to.
    pub preamble_len: f64,
    pub ase: f64,
}

/// ASE-versus-M table under the spec's policies at the base SNR. The grid
/// carries the antenna counts; rows come out M-major in policy order.
pub fn run_fig6(spec: &SweepSpec, parallelism: usize) -> Result<Vec<Fig6Row>, SweepError> {
    spec.validate()?;
    spec.expect_axis(SweepAxis::MAntennas)?;
    if spec.policies.is_empty() {
        return Err(SweepError::NoPolicies);
    }
    for &m in &spec.grid {
        if m.fract() != 0.0 || m < 1.0 {
            return Err(SweepError::BadAntennaGrid(m));
        }
    }
    let blocks = map_indexed(spec.grid.len(), parallelism, |i| {
        let m = spec.grid[i] as u32;
        let cfg = SystemConfig::new(m, spec.base.n_ues, spec.base.packet_len, spec.base.snr_db)?;
        let report = optimize_grant_free(&cfg)?;
        let mut rows = Vec::with_capacity(spec.policies.len());
        for &policy in &spec.policies {
            let p = match policy {
                Policy::PStar => report.p_star,
                Policy::P1 => report.p1,
                Policy::PHatStar => report.p_hat_star,
                Policy::HalfL => f64::from(cfg.packet_len) / 2.0,
                Policy::Fixed(k) => f64::from(k),
            };
            let p = PreambleLength::new(p, &cfg)?;
            rows.push(Fig6Row {
                m_antennas: m,
                policy,
                preamble_len: p.get(),
                ase: analytic::average_se(&cfg, p),
            });
        }
        Ok::<Vec<Fig6Row>, SweepError>(rows)
    });
    let mut rows = Vec::with_capacity(spec.grid.len() * spec.policies.len());
    for block in blocks {
        rows.extend(block?);
    }
    Ok(rows)
}

/// `snr_db,p,ase_analytic,ase_empirical,ci_half_width`; the last two columns
/// stay empty for analytic-only curves.
pub fn write_fig4_csv<W: Write>(w: &mut W, curves: &[AseCurve]) -> Result<(), SweepError> {
    writeln!(w, "snr_db,p,ase_analytic,ase_empirical,ci_half_width")?;
    for curve in curves {
        for (i, &p) in curve.preamble_grid.iter().enumerate() {
            let emp = curve.empirical_ase.as_ref().map_or(String::new(), |v| v[i].to_string());
            let ci = curve.ci_half_width.as_ref().map_or(String::new(), |v| v[i].to_string());
            writeln!(w, "{},{},{},{},{}", curve.snr_db, p, curve.analytic_ase[i], emp, ci)?;
        }
    }
    Ok(())
}

/// `snr_db,m,p1,p_star,p_hat_star,converged`.
pub fn write_fig5_csv<W: Write>(w: &mut W, rows: &[Fig5Row]) -> Result<(), SweepError> {
    writeln!(w, "snr_db,m,p1,p_star,p_hat_star,converged")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.snr_db, r.m_antennas, r.p1, r.p_star, r.p_hat_star, r.converged)?;
    }
    Ok(())
}

/// `m,policy,p,ase`.
pub fn write_fig6_csv<W: Write>(w: &mut W, rows: &[Fig6Row]) -> Result<(), SweepError> {
    writeln!(w, "m,policy,p,ase")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.m_antennas, r.policy.label(), r.preamble_len, r.ase)?;
    }
    Ok(())
}

/// Provenance sidecar written next to each CSV: the fully resolved spec plus
/// engine constants. Deliberately timestamp-free so outputs stay
/// byte-reproducible.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub figure: &'a str,
    pub spec: &'a SweepSpec,
    /// SNR list for multi-curve fig4 outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_values_db: Option<Vec<f64>>,
    /// Antenna list for fig5 outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<u32>>,
    pub sinr_cap: f64,
    pub rng: &'a str,
}

impl<'a> Sidecar<'a> {
    pub fn new(figure: &'a str, spec: &'a SweepSpec) -> Self {
        Self {
            figure,
            spec,
            snr_values_db: None,
            m_values: None,
            sinr_cap: SINR_CAP,
            rng: "chacha12; key = seed, stream = trial index; point seeds via splitmix64",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }
}
