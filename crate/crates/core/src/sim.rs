//! Simultaneous uplink/downlink scheme.
//!
//! Three TDMA phases: two-way user 1 ↔ BS (fraction α), two-way
//! user 2 ↔ BS (β), and compute-forward two-way relaying between user 2 and
//! the BS through user 1 (γ). A user idle in one phase spends its saved
//! energy in the others, so user 1 transmits at `P1/(1−β)` and user 2 at
//! `P2/(1−α)`.

use crate::error::{Error, Result};
use crate::model::{cap, cap_plus, NetworkConfig};
use crate::optimizer::{refine_grid_max, SearchDomain, SearchProfile, SearchResult};

const SIMPLEX_TOL: f64 = 1e-12;

/// Phase durations `(α, β, γ)`, nonnegative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeShare {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl TimeShare {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        let ok = in_unit(alpha)
            && in_unit(beta)
            && in_unit(gamma)
            && (alpha + beta + gamma - 1.0).abs() <= SIMPLEX_TOL;
        if ok {
            Ok(Self { alpha, beta, gamma })
        } else {
            Err(Error::TimeShare { alpha, beta, gamma })
        }
    }

    /// `γ = 1 − α − β`, with rounding below zero clipped.
    pub fn from_alpha_beta(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, (1.0 - alpha - beta).max(0.0))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Per-phase rate bounds of the simultaneous scheme at a fixed time share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRateComponents {
    /// BS → user 1 over phase 1.
    pub r13_bar: f64,
    /// User 1 → BS over phase 1.
    pub r31_bar: f64,
    /// User 2 → BS over phase 2.
    pub ru2_bar: f64,
    /// BS → user 2 over phase 2.
    pub ru3_bar: f64,
    /// Relayed exchange between user 2 and the BS over phase 3.
    pub rb_bar: f64,
}

impl SimRateComponents {
    /// Largest rate all four messages can share.
    pub fn symmetric_rate(&self) -> f64 {
        self.r13_bar
            .min(self.r31_bar)
            .min(self.rb_bar + self.ru3_bar)
            .min(self.rb_bar + self.ru2_bar)
    }
}

pub fn sim_components(cfg: &NetworkConfig, ts: &TimeShare) -> SimRateComponents {
    let g = cfg.gains();
    let (h1s, h2s, h3s) = (g.h1_sq(), g.h2_sq(), g.h3_sq());
    let (p1, p2, p3) = (cfg.p1(), cfg.p2(), cfg.p3());
    let TimeShare { alpha, beta, gamma } = *ts;
    let alpha_bar = 1.0 - alpha;
    let beta_bar = 1.0 - beta;

    // A zero complement forces the other two fractions to zero, so the
    // affected phase rates vanish.
    let r13_bar = alpha * cap(h2s * p3);
    let r31_bar = if beta_bar > 0.0 { alpha * cap(h2s * p1 / beta_bar) } else { 0.0 };
    let ru2_bar = if alpha_bar > 0.0 { beta * cap(h1s * p2 / alpha_bar) } else { 0.0 };
    let ru3_bar = beta * cap(h1s * p3);
    let rb_bar = if alpha_bar > 0.0 && beta_bar > 0.0 && gamma > 0.0 {
        let relay_in = cap_plus(h3s * p2 / alpha_bar - 0.5).min(cap_plus(h2s * p3 - 0.5));
        let relay_out = cap(h2s * p1 / beta_bar).min(cap(h3s * p1 / beta_bar));
        gamma * relay_in.min(relay_out)
    } else {
        0.0
    };

    SimRateComponents {
        r13_bar,
        r31_bar,
        ru2_bar,
        ru3_bar,
        rb_bar,
    }
}

pub fn sim_rate_at(cfg: &NetworkConfig, ts: &TimeShare) -> f64 {
    sim_components(cfg, ts).symmetric_rate()
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

// Rough bound on how fast the objective moves per unit of time fraction.
fn rate_scale(cfg: &NetworkConfig) -> f64 {
    let g = cfg.gains();
    let gain = g.h1_sq().max(g.h2_sq()).max(g.h3_sq());
    let power = cfg.p1().max(cfg.p2()).max(cfg.p3());
    1.0 + cap(gain * power)
}

fn profile_for(cfg: &NetworkConfig, tol: f64) -> SearchProfile {
    SearchProfile::with_resolution(17, 4.0, tol / (4.0 * rate_scale(cfg)), tol / 4.0)
}

/// Maximizes the symmetric rate over all time shares.
///
/// The search runs over `(α, β)` with `α + β ≤ 1`; `γ` is the remainder.
pub fn optimize_sim(cfg: &NetworkConfig, tol: f64) -> Result<SearchResult<TimeShare>> {
    check_tol(tol)?;
    let domain = SearchDomain::new().simplex(2, 1.0);
    let objective = |x: &[f64]| match TimeShare::from_alpha_beta(x[0], x[1]) {
        Ok(ts) => sim_rate_at(cfg, &ts),
        Err(_) => f64::NAN,
    };
    let res = refine_grid_max(objective, &domain, &profile_for(cfg, tol))?;
    let ts = TimeShare::from_alpha_beta(res.argmax[0], res.argmax[1])?;
    Ok(res.map_argmax(|_| ts))
}

/// Same as [`optimize_sim`] with the relaying phase switched off (`γ = 0`).
pub fn optimize_sim_two_way(cfg: &NetworkConfig, tol: f64) -> Result<SearchResult<TimeShare>> {
    check_tol(tol)?;
    let domain = SearchDomain::new().interval(0.0, 1.0);
    let ts_of = |alpha: f64| TimeShare::new(alpha, 1.0 - alpha, 0.0);
    let objective = |x: &[f64]| match ts_of(x[0]) {
        Ok(ts) => sim_rate_at(cfg, &ts),
        Err(_) => f64::NAN,
    };
    let res = refine_grid_max(objective, &domain, &profile_for(cfg, tol))?;
    let ts = ts_of(res.argmax[0])?;
    Ok(res.map_argmax(|_| ts))
}

/// Closed-form two-way-only rate `C1·C2/(C1 + C2)` with `Ci = C(hi²P)`.
///
/// Only valid when all three powers are equal; then the boosted uplink terms
/// never bind and the optimum equalizes `α·C2` with `β·C1`.
pub fn harmonic_two_way_rate(cfg: &NetworkConfig) -> Result<f64> {
    let (p1, p2, p3) = (cfg.p1(), cfg.p2(), cfg.p3());
    if p1 != p3 || p2 != p3 {
        return Err(Error::Unsupported(format!(
            "harmonic closed form needs P1 = P2 = P3, got ({p1}, {p2}, {p3})"
        )));
    }
    let g = cfg.gains();
    let c1 = cap(g.h1_sq() * p3);
    let c2 = cap(g.h2_sq() * p3);
    if c1 + c2 == 0.0 {
        return Ok(0.0);
    }
    Ok(c1 * c2 / (c1 + c2))
}
