//! Named parameter presets used throughout the toolkit and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::ModelParams;

/// Built-in parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Estimated rates: Λ=4, α=0.14, ε=0.03, δ=0.10, μ=0.10, ν=0.05, Φ=0.01.
    #[serde(rename = "table1")]
    Table1,
    /// Simulation-figure rates: as `table1` but ε=0.26, Φ=0.0074, Λ=2.
    #[serde(rename = "fig-sim")]
    FigSim,
    /// Peak-comparison rates: as `fig-sim` but Λ=4.
    #[serde(rename = "fig-peak")]
    FigPeak,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Table1, Preset::FigSim, Preset::FigPeak];

    pub fn params(self) -> ModelParams {
        match self {
            Preset::Table1 => ModelParams {
                lambda: 4.0,
                alpha: 0.14,
                epsilon0: 0.03,
                delta: 0.10,
                mu: 0.10,
                nu: 0.05,
                phi: 0.01,
            },
            Preset::FigSim => ModelParams {
                lambda: 2.0,
                alpha: 0.14,
                epsilon0: 0.26,
                delta: 0.10,
                mu: 0.10,
                nu: 0.05,
                phi: 0.0074,
            },
            Preset::FigPeak => ModelParams {
                lambda: 4.0,
                alpha: 0.14,
                epsilon0: 0.26,
                delta: 0.10,
                mu: 0.10,
                nu: 0.05,
                phi: 0.0074,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::FigSim => "fig-sim",
            Preset::FigPeak => "fig-peak",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "table1" => Ok(Preset::Table1),
            "fig-sim" => Ok(Preset::FigSim),
            "fig-peak" => Ok(Preset::FigPeak),
            other => Err(Error::ConfigInvalid(format!(
                "unknown preset {other:?}; expected one of table1, fig-sim, fig-peak"
            ))),
        }
    }
}
