//! Separated uplink/downlink scheme.
//!
//! A fraction `τ` of the time is a cooperative multiple-access phase, the
//! rest a cooperative broadcast phase. Within each phase the symmetric rate
//! is itself a maximin over power splits, so the overall search is nested:
//! outer `(τ, p1ᵘ, p2ᵘ)`, inner MAC and BC power splits.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::model::{cap, Gains, NetworkConfig};
use crate::optimizer::{refine_grid_max, SearchDomain, SearchProfile, SearchResult};

/// Exponent of `|h3|` in the compress-forward gain of the user-1 downlink rate.
///
/// Received powers scale with squared gains everywhere else, so `Squared` is
/// the default; `Cubed` reproduces the expression as originally printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CfExponent {
    #[default]
    Squared,
    Cubed,
}

impl CfExponent {
    pub fn value(self) -> i32 {
        match self {
            CfExponent::Squared => 2,
            CfExponent::Cubed => 3,
        }
    }
}

impl TryFrom<u8> for CfExponent {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(CfExponent::Squared),
            3 => Ok(CfExponent::Cubed),
            _ => Err(Error::Unsupported(format!("cf exponent must be 2 or 3, got {v}"))),
        }
    }
}

impl fmt::Display for CfExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Uplink power split. For user `i`: `p_ji` feeds the D2D cooperation
/// signal, `p_3i` the private signal to the BS, `p_ci` the common signal
/// sent coherently by both users.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MacPowerSplit {
    pub p21: f64,
    pub p31: f64,
    pub pc1: f64,
    pub p12: f64,
    pub p32: f64,
    pub pc2: f64,
}

impl MacPowerSplit {
    /// Split that spends each budget in full: the private powers take the
    /// remainder.
    pub fn exhausting(budget1: f64, budget2: f64, p21: f64, pc1: f64, p12: f64, pc2: f64) -> Self {
        Self {
            p21,
            pc1,
            p31: (budget1 - p21 - pc1).max(0.0),
            p12,
            pc2,
            p32: (budget2 - p12 - pc2).max(0.0),
        }
    }

    pub fn user1_total(&self) -> f64 {
        self.p21 + self.p31 + self.pc1
    }

    pub fn user2_total(&self) -> f64 {
        self.p12 + self.p32 + self.pc2
    }

    fn check(&self, budget1: f64, budget2: f64) -> Result<()> {
        let parts = [self.p21, self.p31, self.pc1, self.p12, self.p32, self.pc2];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InfeasibleSplit(format!("negative or non-finite MAC power in {self:?}")));
        }
        check_budget("user 1 uplink", self.user1_total(), budget1)?;
        check_budget("user 2 uplink", self.user2_total(), budget2)
    }
}

/// Downlink power split. The BS sends a common/cooperation layer `pc3`, a
/// layer `p23` for user 2 that user 1 reinforces coherently, and a private
/// layer `p13` for user 1; `p2` is user 2's compress-forward power.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BcPowerSplit {
    pub pc3: f64,
    pub p23: f64,
    pub p13: f64,
    pub p2: f64,
}

impl BcPowerSplit {
    pub fn bs_total(&self) -> f64 {
        self.pc3 + self.p23 + self.p13
    }
}

/// Budgets the downlink split is checked against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownlinkBudget {
    /// Power user 1 spends relaying the cooperation layer.
    pub relay_power: f64,
    pub user2: f64,
    pub bs: f64,
}

fn check_budget(what: &str, used: f64, budget: f64) -> Result<()> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::InfeasibleSplit(format!("{what} budget {budget} is invalid")));
    }
    if used > budget + 1e-12 * budget.max(1.0) {
        return Err(Error::InfeasibleSplit(format!("{what} uses {used} > budget {budget}")));
    }
    Ok(())
}

/// Squared gains, hoisted out of the inner loops.
#[derive(Clone, Copy)]
struct Sq {
    h1: f64,
    h2: f64,
    h3: f64,
    h3_abs: f64,
}

impl From<&Gains> for Sq {
    fn from(g: &Gains) -> Self {
        Sq {
            h1: g.h1_sq(),
            h2: g.h2_sq(),
            h3: g.h3_sq(),
            h3_abs: g.h3.abs(),
        }
    }
}

fn mac_rate(g: Sq, budget1: f64, budget2: f64, s: &MacPowerSplit) -> f64 {
    let a1 = cap(g.h3 * s.p21 / (1.0 + g.h3 * s.p31));
    let a2 = cap(g.h3 * s.p12 / (1.0 + g.h3 * s.p32));
    let r1 = a1 + cap(g.h2 * s.p31);
    let r2 = a2 + cap(g.h1 * s.p32);
    let sum_coherent = cap(g.h2 * budget1 + g.h1 * budget2 + 2.0 * (g.h1 * g.h2 * s.pc1 * s.pc2).sqrt());
    let sum_private = cap(g.h2 * s.p31 + g.h1 * s.p32) + a1 + a2;
    r1.min(r2).min(0.5 * sum_coherent).min(0.5 * sum_private)
}

fn bc_user1(g: Sq, s: &BcPowerSplit, e: CfExponent) -> f64 {
    let h3_pow = g.h3_abs.powi(e.value());
    let cf = g.h1 * h3_pow * s.p13 * s.p2 / (1.0 + g.h3 * s.p2 + (g.h1 + g.h2) * s.p13);
    cap(g.h2 * s.p13 + cf)
}

/// User 2's message rate at user 2 and at user 1.
fn bc_user2(g: Sq, relay_power: f64, s: &BcPowerSplit) -> (f64, f64) {
    let coherent = g.h1 * (s.pc3 + s.p23) + g.h3 * relay_power + 2.0 * (g.h1 * g.h3 * s.p23 * relay_power).sqrt();
    let at_2 = cap(coherent / (1.0 + g.h1 * s.p13));
    let at_1 = cap(g.h2 * s.pc3 / (1.0 + g.h2 * s.p13));
    (at_2, at_1)
}

fn bc_rate(g: Sq, relay_power: f64, s: &BcPowerSplit, e: CfExponent) -> f64 {
    let (at_2, at_1) = bc_user2(g, relay_power, s);
    bc_user1(g, s, e).min(at_2).min(at_1)
}

/// Symmetric uplink rate of the cooperative MAC at a fixed split.
///
/// `budgets` are the per-user totals; the coherent sum-rate term is written
/// in terms of them rather than the allocated powers.
pub fn mac_c_rate_at(gains: &Gains, budgets: (f64, f64), split: &MacPowerSplit) -> Result<f64> {
    split.check(budgets.0, budgets.1)?;
    Ok(mac_rate(gains.into(), budgets.0, budgets.1, split))
}

/// Symmetric downlink rate of the cooperative BC at a fixed split.
pub fn bc_c_rate_at(gains: &Gains, budget: &DownlinkBudget, split: &BcPowerSplit, e: CfExponent) -> Result<f64> {
    let parts = [split.pc3, split.p23, split.p13, split.p2];
    if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InfeasibleSplit(format!("negative or non-finite BC power in {split:?}")));
    }
    if !(budget.relay_power.is_finite() && budget.relay_power >= 0.0) {
        return Err(Error::InfeasibleSplit(format!("relay power {} is invalid", budget.relay_power)));
    }
    check_budget("BS downlink", split.bs_total(), budget.bs)?;
    check_budget("user 2 compress-forward", split.p2, budget.user2)?;
    Ok(bc_rate(gains.into(), budget.relay_power, split, e))
}

// Each power term moves the rate by at most ~1/(2 ln 2) bits per unit of
// relative power change, so a relative grid resolution suffices.
const POWER_RATE_SCALE: f64 = 2.0;

fn inner_profile(tol: f64, points: usize) -> SearchProfile {
    SearchProfile::with_resolution(points, 4.0, tol / (4.0 * POWER_RATE_SCALE), tol / 4.0)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

fn check_budget_value(what: &str, b: f64) -> Result<()> {
    if b.is_finite() && b >= 0.0 {
        Ok(())
    } else {
        Err(Error::InfeasibleSplit(format!("{what} budget {b} is invalid")))
    }
}

/// Best symmetric uplink rate over all splits that exhaust both budgets.
pub fn mac_c_optimize(gains: &Gains, budget1: f64, budget2: f64, tol: f64) -> Result<SearchResult<MacPowerSplit>> {
    check_tol(tol)?;
    check_budget_value("user 1", budget1)?;
    check_budget_value("user 2", budget2)?;
    let g = Sq::from(gains);
    let split_of = |x: &[f64]| MacPowerSplit::exhausting(budget1, budget2, x[0], x[1], x[2], x[3]);
    let domain = SearchDomain::new().simplex(2, budget1).simplex(2, budget2);
    let res = refine_grid_max(|x| mac_rate(g, budget1, budget2, &split_of(x)), &domain, &inner_profile(tol, 9))?;
    let split = split_of(&res.argmax);
    Ok(res.map_argmax(|_| split))
}

/// Best symmetric downlink rate.
///
/// User 2's compress-forward power is pinned to its budget (the only term it
/// enters is nondecreasing in it) and the BS budget is spent in full. The
/// rest is solved by nested bisection rather than a grid: for fixed `p13`
/// the rate of user 2 at user 1 is nondecreasing in `pc3` while the rate at
/// user 2 is nonincreasing (the coherent part shrinks with `p23`), so the
/// best `pc3` sits at their crossing. That inner optimum is nonincreasing in
/// `p13` and user 1's rate is nondecreasing in it, so the outer optimum is
/// again a crossing. Each bisection stops once the bracket certifies a gap
/// below the tolerance.
pub fn bc_c_optimize(
    gains: &Gains,
    budget: &DownlinkBudget,
    tol: f64,
    e: CfExponent,
) -> Result<SearchResult<BcPowerSplit>> {
    check_tol(tol)?;
    check_budget_value("relay", budget.relay_power)?;
    check_budget_value("user 2", budget.user2)?;
    check_budget_value("BS", budget.bs)?;
    let g = Sq::from(gains);
    let (bs, p2, relay) = (budget.bs, budget.user2, budget.relay_power);
    let mut evaluations = 0usize;

    let best_pc3 = |p13: f64, evaluations: &mut usize| -> (f64, f64) {
        let rest = (bs - p13).max(0.0);
        let at = |pc3: f64| BcPowerSplit { pc3, p23: (rest - pc3).max(0.0), p13, p2 };
        let mut eval = |pc3: f64| {
            *evaluations += 1;
            bc_user2(g, relay, &at(pc3))
        };
        // (at_2, at_1) with at_1 rising and at_2 falling in pc3
        let top = eval(rest);
        if top.1 <= top.0 {
            return (rest, top.1);
        }
        let bottom = eval(0.0);
        if bottom.1 >= bottom.0 {
            return (0.0, bottom.0);
        }
        let (mut lo, mut hi, mut f_lo, mut f_hi) = (0.0, rest, bottom, top);
        while hi - lo > f64::EPSILON * rest && (f_hi.1 - f_lo.1).min(f_lo.0 - f_hi.0) > tol / 64.0 {
            let mid = 0.5 * (lo + hi);
            let f = eval(mid);
            if f.1 < f.0 {
                (lo, f_lo) = (mid, f);
            } else {
                (hi, f_hi) = (mid, f);
            }
        }
        if f_lo.1 >= f_hi.0 {
            (lo, f_lo.1)
        } else {
            (hi, f_hi.0)
        }
    };

    let point = |p13: f64, evaluations: &mut usize| -> (f64, f64, f64) {
        let (pc3, user2) = best_pc3(p13, evaluations);
        let user1 = bc_user1(g, &BcPowerSplit { pc3, p23: 0.0, p13, p2 }, e);
        (pc3, user1, user2)
    };

    let (p13, pc3, width) = {
        let top = point(bs, &mut evaluations);
        let bottom = point(0.0, &mut evaluations);
        if top.1 <= top.2 {
            (bs, top.0, 0.0)
        } else if bottom.1 >= bottom.2 {
            (0.0, bottom.0, 0.0)
        } else {
            let (mut lo, mut hi, mut f_lo, mut f_hi) = (0.0, bs, bottom, top);
            while hi - lo > f64::EPSILON * bs && (f_hi.1 - f_lo.1).min(f_lo.2 - f_hi.2) > tol / 8.0 {
                let mid = 0.5 * (lo + hi);
                let f = point(mid, &mut evaluations);
                if f.1 < f.2 {
                    (lo, f_lo) = (mid, f);
                } else {
                    (hi, f_hi) = (mid, f);
                }
            }
            if f_lo.1 >= f_hi.2 {
                (lo, f_lo.0, hi - lo)
            } else {
                (hi, f_hi.0, hi - lo)
            }
        }
    };
    let rest = (bs - p13).max(0.0);
    let split = BcPowerSplit { pc3, p23: (rest - pc3).max(0.0), p13, p2 };
    Ok(SearchResult {
        value: bc_rate(g, relay, &split, e),
        argmax: split,
        evaluations,
        converged: true,
        // final p13 bracket; pc3 is bracketed more tightly
        resolution: vec![width],
    })
}

/// Outer parameters: uplink time fraction and the users' uplink powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SepOuterPoint {
    pub tau: f64,
    pub p1u: f64,
    pub p2u: f64,
}

impl SepOuterPoint {
    pub fn new(cfg: &NetworkConfig, tau: f64, p1u: f64, p2u: f64) -> Result<Self> {
        let pt = Self { tau, p1u, p2u };
        pt.check(cfg)?;
        Ok(pt)
    }

    fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.tau)
            && (0.0..=cfg.p1()).contains(&self.p1u)
            && (0.0..=cfg.p2()).contains(&self.p2u);
        if ok {
            Ok(())
        } else {
            Err(Error::OuterPoint(format!(
                "need tau in [0,1], p1u in [0,{}], p2u in [0,{}]; got {self:?}",
                cfg.p1(),
                cfg.p2()
            )))
        }
    }

    /// Downlink powers `(P_i − τ·p_iᵘ)/(1 − τ)`; `None` when `τ = 1`.
    pub fn downlink_powers(&self, cfg: &NetworkConfig) -> Option<(f64, f64)> {
        let tau_bar = 1.0 - self.tau;
        (tau_bar > 0.0).then(|| {
            (
                ((cfg.p1() - self.tau * self.p1u) / tau_bar).max(0.0),
                ((cfg.p2() - self.tau * self.p2u) / tau_bar).max(0.0),
            )
        })
    }
}

/// Outcome of the separated scheme at one outer point, with the inner
/// optimizers' splits. Splits are `None` when `τ ∈ {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SepSolution {
    pub point: SepOuterPoint,
    pub rate: f64,
    pub uplink_rate: f64,
    pub downlink_rate: f64,
    pub mac: Option<MacPowerSplit>,
    pub bc: Option<BcPowerSplit>,
}

#[derive(Clone, Copy)]
struct SepMode {
    e: CfExponent,
    relay: bool,
}

fn sep_solution(cfg: &NetworkConfig, pt: &SepOuterPoint, tol: f64, mode: SepMode, mac_cache: Option<&MacCache>) -> Result<SepSolution> {
    let tau = pt.tau;
    let endpoint = SepSolution {
        point: *pt,
        rate: 0.0,
        uplink_rate: 0.0,
        downlink_rate: 0.0,
        mac: None,
        bc: None,
    };
    let Some((p1d, p2d)) = pt.downlink_powers(cfg).filter(|_| tau > 0.0) else {
        return Ok(endpoint);
    };
    let gains = cfg.gains();
    let inner_tol = tol / 4.0;

    let (uplink_rate, mac) = match mac_cache {
        Some(cache) => cache.get(&gains, pt.p1u, pt.p2u, inner_tol)?,
        None => {
            let r = mac_c_optimize(&gains, pt.p1u, pt.p2u, inner_tol)?;
            (r.value, r.argmax)
        }
    };
    let budget = DownlinkBudget {
        relay_power: if mode.relay { p1d } else { 0.0 },
        user2: p2d,
        bs: cfg.p3() / (1.0 - tau),
    };
    let down = bc_c_optimize(&gains, &budget, inner_tol, mode.e)?;
    let up = tau * uplink_rate;
    let dn = (1.0 - tau) * down.value;
    Ok(SepSolution {
        point: *pt,
        rate: up.min(dn),
        uplink_rate,
        downlink_rate: down.value,
        mac: Some(mac),
        bc: Some(down.argmax),
    })
}

/// Uplink optima keyed by the exact uplink budgets; they do not depend on τ.
struct MacCache(Mutex<HashMap<(u64, u64), (f64, MacPowerSplit)>>);

impl MacCache {
    fn new() -> Self {
        MacCache(Mutex::new(HashMap::new()))
    }

    fn get(&self, gains: &Gains, b1: f64, b2: f64, tol: f64) -> Result<(f64, MacPowerSplit)> {
        let key = (b1.to_bits(), b2.to_bits());
        if let Some(hit) = self.0.lock().expect("cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let r = mac_c_optimize(gains, b1, b2, tol)?;
        let entry = (r.value, r.argmax);
        self.0.lock().expect("cache poisoned").insert(key, entry);
        Ok(entry)
    }
}

/// Symmetric rate of the separated scheme at a fixed outer point, with the
/// inner MAC/BC problems solved to `tol/4`.
pub fn sep_rate_at(cfg: &NetworkConfig, pt: &SepOuterPoint, tol: f64, e: CfExponent) -> Result<f64> {
    sep_solution_at(cfg, pt, tol, e).map(|s| s.rate)
}

pub fn sep_solution_at(cfg: &NetworkConfig, pt: &SepOuterPoint, tol: f64, e: CfExponent) -> Result<SepSolution> {
    check_tol(tol)?;
    pt.check(cfg)?;
    sep_solution(cfg, pt, tol, SepMode { e, relay: true }, None)
}

fn outer_profile(cfg: &NetworkConfig, tol: f64) -> SearchProfile {
    let g = cfg.gains();
    let pmax = cfg.p1().max(cfg.p2()).max(cfg.p3());
    let scale = 1.0 + cap((g.h1_sq() + g.h2_sq() + g.h3_sq()) * pmax);
    SearchProfile::with_resolution(9, 4.0, tol / (4.0 * scale), tol / 4.0)
}

fn optimize_sep_mode(cfg: &NetworkConfig, tol: f64, mode: SepMode) -> Result<SearchResult<SepSolution>> {
    check_tol(tol)?;
    let domain = SearchDomain::new()
        .interval(0.0, 1.0)
        .interval(0.0, cfg.p1())
        .interval(0.0, cfg.p2());
    let cache = MacCache::new();
    let objective = |x: &[f64]| {
        let pt = SepOuterPoint { tau: x[0], p1u: x[1], p2u: x[2] };
        sep_solution(cfg, &pt, tol, mode, Some(&cache)).map_or(f64::NAN, |s| s.rate)
    };
    let res = refine_grid_max(objective, &domain, &outer_profile(cfg, tol))?;
    let pt = SepOuterPoint {
        tau: res.argmax[0],
        p1u: res.argmax[1],
        p2u: res.argmax[2],
    };
    let sol = sep_solution(cfg, &pt, tol, mode, None)?;
    debug_assert_eq!(sol.rate, res.value);
    Ok(res.map_argmax(|_| sol))
}

/// Maximizes the separated-scheme symmetric rate over `(τ, p1ᵘ, p2ᵘ)`.
pub fn optimize_sep(cfg: &NetworkConfig, tol: f64, e: CfExponent) -> Result<SearchResult<SepSolution>> {
    optimize_sep_mode(cfg, tol, SepMode { e, relay: true })
}

/// Time-shared MAC/BC without cooperation: the separated scheme with the
/// D2D gain and user 1's relay power forced to zero.
pub fn baseline_no_cooperation(cfg: &NetworkConfig, tol: f64) -> Result<SearchResult<SepSolution>> {
    let isolated = cfg.with_h3(0.0)?;
    optimize_sep_mode(&isolated, tol, SepMode { e: CfExponent::Squared, relay: false })
}
