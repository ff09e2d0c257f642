//! Run specification files (TOML).

use std::path::Path;

use kerr_tfd::fock::{coherent_state_rho, number_state_rho, thermal_state_rho};
use kerr_tfd::oracle::DEFAULT_DENSE_CAP;
use kerr_tfd::{Complex64, DoubledIndex, FockCutoff, LiouvilleState, Space, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// One damped Kerr mode.
    KerrSu2Damped,
    /// `N` damped Kerr modes with cross-Kerr coupling.
    CoupledKerr,
    /// Damped harmonic oscillator coupled to a thermal reservoir.
    DampedOscillatorSu11,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    ClosedForm,
    OracleExact,
    OracleOde,
    Compare,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::ClosedForm => "closed_form",
            Engine::OracleExact => "oracle_exact",
            Engine::OracleOde => "oracle_ode",
            Engine::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Initial density operator; per-mode lists build a product state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    /// `alpha = [[re, im], …]`, one pair per mode.
    Coherent {
        alpha: Vec<[f64; 2]>,
    },
    Thermal {
        nbar: Vec<f64>,
    },
    Number {
        k: Vec<usize>,
    },
    Explicit {
        entries: Vec<Entry>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// `steps + 1` equally spaced points from `start` to `end`.
    pub fn points(&self) -> Vec<f64> {
        let h = (self.end - self.start) / self.steps as f64;
        (0..=self.steps)
            .map(|k| {
                if k == self.steps {
                    self.end
                } else {
                    self.start + h * k as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub path: String,
    #[serde(default = "default_format")]
    pub format: String,
}

fn default_format() -> String {
    "csv".into()
}

fn default_ode_step() -> f64 {
    1e-3
}

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub system: SystemKind,
    pub engine: Engine,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_ode_step")]
    pub ode_step: f64,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
    pub config: SystemConfig,
    pub initial: Initial,
    pub times: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

impl RunSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let t = &self.times;
        if !(t.start.is_finite() && t.end.is_finite()) || t.start < 0.0 {
            return bad("times must be finite and start must be non-negative".into());
        }
        if t.end < t.start {
            return bad(format!(
                "times.end = {} precedes times.start = {}",
                t.end, t.start
            ));
        }
        if t.steps == 0 {
            return bad("times.steps must be at least 1".into());
        }
        let modes = self.config.modes();
        match self.system {
            SystemKind::KerrSu2Damped | SystemKind::DampedOscillatorSu11 if modes != 1 => {
                return bad(format!(
                    "system {:?} takes one mode, config has {modes}",
                    self.system
                ));
            }
            SystemKind::DampedOscillatorSu11
                if matches!(self.engine, Engine::ClosedForm | Engine::Compare) =>
            {
                return bad("no closed form exists for damped_oscillator_su11; use oracle_exact or oracle_ode".into());
            }
            _ => {}
        }
        if !(self.ode_step.is_finite() && self.ode_step > 0.0) {
            return bad("ode_step must be positive".into());
        }
        if let Some(out) = &self.output {
            if out.format != "csv" {
                return bad(format!("unsupported output format {:?}", out.format));
            }
        }
        let per_mode = |len: usize, field: &str| {
            if len == modes {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "initial.{field} has {len} entries for {modes} modes"
                )))
            }
        };
        match &self.initial {
            Initial::Coherent { alpha } => per_mode(alpha.len(), "alpha")?,
            Initial::Thermal { nbar } => per_mode(nbar.len(), "nbar")?,
            Initial::Number { k } => per_mode(k.len(), "k")?,
            Initial::Explicit { entries } => {
                if entries.is_empty() {
                    return bad("initial.entries is empty".into());
                }
                for e in entries {
                    per_mode(e.m.len(), "entries.m")?;
                    per_mode(e.n.len(), "entries.n")?;
                }
            }
        }
        Ok(())
    }

    /// The initial state at the config cutoff, with the discarded weight of
    /// truncated product states.
    pub fn initial_state(&self) -> Result<(LiouvilleState, f64), CliError> {
        let cutoff = self.config.cutoff();
        let modes = self.config.modes();
        let product =
            |parts: Vec<(LiouvilleState, f64)>| -> Result<(LiouvilleState, f64), CliError> {
                let mut it = parts.into_iter();
                let (mut acc, mut lost) = it.next().expect("at least one mode");
                for (p, w) in it {
                    acc = acc.tensor(&p)?;
                    lost = lost.max(w);
                }
                Ok((acc, lost))
            };
        match &self.initial {
            Initial::Coherent { alpha } => product(
                alpha
                    .iter()
                    .map(|&[re, im]| {
                        coherent_state_rho(Complex64::new(re, im), cutoff)
                            .map(|p| (p.state, p.neglected_weight))
                    })
                    .collect::<Result<_, _>>()?,
            ),
            Initial::Thermal { nbar } => product(
                nbar.iter()
                    .map(|&x| thermal_state_rho(x, cutoff).map(|p| (p.state, p.neglected_weight)))
                    .collect::<Result<_, _>>()?,
            ),
            Initial::Number { k } => product(
                k.iter()
                    .map(|&x| number_state_rho(x, cutoff).map(|p| (p.state, p.neglected_weight)))
                    .collect::<Result<_, _>>()?,
            ),
            Initial::Explicit { entries } => {
                let space = Space::new(cutoff, modes)?;
                let state = LiouvilleState::from_entries(
                    space,
                    entries.iter().map(|e| {
                        (
                            DoubledIndex::new(e.m.clone(), e.n.clone()),
                            Complex64::new(e.re, e.im),
                        )
                    }),
                )?;
                Ok((state, 0.0))
            }
        }
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.config.cutoff()
    }
}
