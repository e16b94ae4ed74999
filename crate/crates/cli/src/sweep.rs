//! One-dimensional parameter sweeps written as CSV.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use drcn_core::model::RawConfig;
use drcn_core::{baseline_no_cooperation, optimize_sep, optimize_sim, validate_config, CfExponent, NetworkConfig};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::format::sig15;

pub const DEFAULT_TOL_SIM: f64 = 1e-3;
pub const DEFAULT_TOL_SEP: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// D2D gain.
    H3,
    /// `SNR2 = h2²P` in dB, with `P1 = P2 = P3 = P`.
    Snr2Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Schemes {
    pub sim: bool,
    pub sep: bool,
    pub baseline: bool,
}

impl Schemes {
    pub const ALL: Schemes = Schemes { sim: true, sep: true, baseline: true };

    pub fn is_empty(&self) -> bool {
        !(self.sim || self.sep || self.baseline)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub spacing: Spacing,
    /// Fixed fields; the swept ones are overwritten per row.
    pub base: RawConfig,
    pub schemes: Schemes,
    pub cf_exponent: CfExponent,
    pub tol_sim: f64,
    pub tol_sep: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.from.is_finite() && self.to.is_finite() && self.from < self.to) {
            return Err(CliError::Spec(format!("need from < to, got {} .. {}", self.from, self.to)));
        }
        if self.points < 2 {
            return Err(CliError::Spec(format!("need at least 2 points, got {}", self.points)));
        }
        if self.spacing == Spacing::Log && self.from <= 0.0 {
            return Err(CliError::Spec("log spacing needs from > 0".into()));
        }
        if self.schemes.is_empty() {
            return Err(CliError::Spec("no scheme selected".into()));
        }
        if !(self.tol_sim > 0.0 && self.tol_sep > 0.0) {
            return Err(CliError::Spec("tolerances must be positive".into()));
        }
        // surfaces ordering / power errors before any work is done
        self.config_at(self.from)?;
        Ok(())
    }

    pub fn abscissas(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                if k == 0 {
                    return self.from;
                }
                if k + 1 == n {
                    return self.to;
                }
                let t = k as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.from + (self.to - self.from) * t,
                    Spacing::Log => self.from * (self.to / self.from).powf(t),
                }
            })
            .collect()
    }

    pub fn config_at(&self, x: f64) -> Result<NetworkConfig> {
        let mut raw = self.base;
        match self.var {
            SweepVar::H3 => raw.h3 = x,
            SweepVar::Snr2Db => {
                let h2_sq = raw.h2 * raw.h2;
                if h2_sq == 0.0 {
                    return Err(CliError::Spec("snr2 sweep needs h2 != 0".into()));
                }
                let p = 10f64.powf(x / 10.0) / h2_sq;
                raw.p1 = p;
                raw.p2 = p;
                raw.p3 = p;
            }
        }
        Ok(validate_config(raw)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub abscissa: f64,
    pub r_sim: Option<f64>,
    pub r_sep: Option<f64>,
    pub r_nocoop: Option<f64>,
}

/// Evaluates every row; rows may run concurrently but come back in
/// abscissa order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    // The baseline ignores h3, so an h3 sweep shares one baseline value.
    let baselines: Mutex<HashMap<[u64; 5], f64>> = Mutex::new(HashMap::new());
    spec.abscissas()
        .into_par_iter()
        .map(|x| {
            let cfg = spec.config_at(x)?;
            let r_sim = spec
                .schemes
                .sim
                .then(|| optimize_sim(&cfg, spec.tol_sim).map(|r| r.value))
                .transpose()?;
            let r_sep = spec
                .schemes
                .sep
                .then(|| optimize_sep(&cfg, spec.tol_sep, spec.cf_exponent).map(|r| r.value))
                .transpose()?;
            let r_nocoop = if spec.schemes.baseline {
                let key = [cfg.h1(), cfg.h2(), cfg.p1(), cfg.p2(), cfg.p3()].map(f64::to_bits);
                let cached = baselines.lock().expect("poisoned").get(&key).copied();
                let v = match cached {
                    Some(v) => v,
                    None => {
                        let v = baseline_no_cooperation(&cfg, spec.tol_sep)?.value;
                        baselines.lock().expect("poisoned").insert(key, v);
                        v
                    }
                };
                Some(v)
            } else {
                None
            };
            Ok(SweepRow { abscissa: x, r_sim, r_sep, r_nocoop })
        })
        .collect()
}

pub fn header(schemes: &Schemes) -> Vec<&'static str> {
    let mut cols = vec!["abscissa"];
    if schemes.sim {
        cols.push("r_sim");
    }
    if schemes.sep {
        cols.push("r_sep");
    }
    if schemes.baseline {
        cols.push("r_nocoop");
    }
    cols
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], schemes: &Schemes, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header(schemes))?;
    for row in rows {
        let mut rec = vec![sig15(row.abscissa)];
        rec.extend([row.r_sim, row.r_sep, row.r_nocoop].into_iter().flatten().map(sig15));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io("<csv output>", e))?;
    Ok(())
}
