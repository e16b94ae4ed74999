//! Reference curves of the two comparison figures, embedded at build time.

use std::fmt;
use std::str::FromStr;

use drcn_core::NetworkConfig;
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const REFERENCE_CSV: &str = include_str!("../assets/reference.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureName {
    Fig3,
    Fig4,
}

impl FigureName {
    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Fig3 => "fig3",
            FigureName::Fig4 => "fig4",
        }
    }

    pub fn abscissa_label(self) -> &'static str {
        match self {
            FigureName::Fig3 => "h3",
            FigureName::Fig4 => "SNR2 (linear)",
        }
    }

    /// Network at one abscissa: fig3 sweeps the D2D gain with
    /// `h1 = 0.15, h2 = 1, P = 100`; fig4 sweeps `SNR2 = h2²P` with
    /// `h1 = 0.5, h2 = 1, h3 = 2`.
    pub fn config_at(self, abscissa: f64) -> drcn_core::Result<NetworkConfig> {
        match self {
            FigureName::Fig3 => NetworkConfig::with_common_power(0.15, 1.0, abscissa, 100.0),
            FigureName::Fig4 => {
                let h2: f64 = 1.0;
                NetworkConfig::with_common_power(0.5, h2, 2.0, abscissa / (h2 * h2))
            }
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig3" => Ok(FigureName::Fig3),
            "fig4" => Ok(FigureName::Fig4),
            other => Err(format!("unknown figure `{other}` (expected fig3 or fig4)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
pub enum Curve {
    #[serde(rename = "r_sim")]
    Sim,
    #[serde(rename = "r_sep")]
    Sep,
    #[serde(rename = "r_nocoop")]
    NoCoop,
    #[serde(rename = "upper_bound")]
    UpperBound,
}

impl Curve {
    pub const ALL: [Curve; 4] = [Curve::Sim, Curve::Sep, Curve::NoCoop, Curve::UpperBound];

    pub fn column(self) -> &'static str {
        match self {
            Curve::Sim => "r_sim",
            Curve::Sep => "r_sep",
            Curve::NoCoop => "r_nocoop",
            Curve::UpperBound => "upper_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub figure: FigureName,
    pub curve: Curve,
    pub abscissa: f64,
    pub value: f64,
}

/// All reference points of one figure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDataset {
    pub figure: FigureName,
    rows: Vec<ReferenceRow>,
}

impl ReferenceDataset {
    /// The embedded dataset for `figure`.
    pub fn load(figure: FigureName) -> Result<Self> {
        Self::parse(REFERENCE_CSV, figure)
    }

    pub fn parse(text: &str, figure: FigureName) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for row in reader.deserialize::<ReferenceRow>() {
            let row = row?;
            if row.figure == figure {
                rows.push(row);
            }
        }
        let data = Self { figure, rows };
        for curve in Curve::ALL {
            let pts = data.curve(curve);
            if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(CliError::Reference(format!(
                    "{figure} {}: abscissas not strictly increasing",
                    curve.column()
                )));
            }
        }
        Ok(data)
    }

    pub fn rows(&self) -> &[ReferenceRow] {
        &self.rows
    }

    /// `(abscissa, value)` pairs of one curve in file order.
    pub fn curve(&self, curve: Curve) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.curve == curve)
            .map(|r| (r.abscissa, r.value))
            .collect()
    }

    pub fn value_at(&self, curve: Curve, abscissa: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.curve == curve && r.abscissa == abscissa)
            .map(|r| r.value)
    }

    /// Union of all abscissas, ascending.
    pub fn abscissas(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.rows.iter().map(|r| r.abscissa).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}
