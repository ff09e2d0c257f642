//! Trajectories on a time grid and their CSV / JSON output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kerr_tfd::fock::{expectation, lowering, number};
use kerr_tfd::oracle::ExactEvolver;
use kerr_tfd::{
    damped_oscillator_liouvillian, damped_su2_generator_on, evolve_ode,
    propagate_closed_form_multimode, BlockStrategy, Complex64, LiouvilleState, OracleOptions,
    PropagationOptions, Register, Space, SparseOperator, TildeOrdering,
};
use serde::Serialize;

use crate::error::CliError;
use crate::runspec::{Engine, RunSpec, SystemKind};

pub const BASE_COLUMNS: [&str; 7] = [
    "t",
    "observable",
    "re",
    "im",
    "trace_re",
    "trace_im",
    "herm_defect",
];
pub const COMPARE_COLUMN: &str = "compare_defect";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub observable: String,
    pub value: Complex64,
    pub trace: Complex64,
    pub herm_defect: f64,
    pub compare_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub engine: Engine,
    pub rows: Vec<Row>,
    /// Cutoff the evolved states live at (the sector closure for Kerr systems).
    pub evolution_cutoff: usize,
    pub initial_neglected_weight: f64,
}

impl Trajectory {
    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = BASE_COLUMNS.to_vec();
        if self.engine == Engine::Compare {
            cols.push(COMPARE_COLUMN);
        }
        cols
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns().join(",");
        out.push('\n');
        for r in &self.rows {
            write!(
                out,
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t, r.observable, r.value.re, r.value.im, r.trace.re, r.trace.im, r.herm_defect
            )
            .unwrap();
            if let Some(d) = r.compare_defect {
                write!(out, ",{d:.17e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Rows of one observable, in time order.
    pub fn series(&self, observable: &str) -> Vec<&Row> {
        self.rows
            .iter()
            .filter(|r| r.observable == observable)
            .collect()
    }
}

struct Observables {
    space: Space,
    number: Vec<SparseOperator>,
    lowering: Vec<SparseOperator>,
}

impl Observables {
    fn new(space: Space) -> Self {
        let modes = 0..space.modes();
        Self {
            space,
            number: modes
                .clone()
                .map(|i| number(&space, i, Register::Physical).unwrap())
                .collect(),
            lowering: modes
                .map(|i| lowering(&space, i, Register::Physical).unwrap())
                .collect(),
        }
    }

    fn rows(
        &self,
        t: f64,
        state: &LiouvilleState,
        compare_defect: Option<f64>,
    ) -> Result<Vec<Row>, CliError> {
        debug_assert_eq!(state.space(), self.space);
        let trace = state.trace();
        let herm_defect = state.hermiticity_defect();
        let row = |observable: String, value: Complex64| Row {
            t,
            observable,
            value,
            trace,
            herm_defect,
            compare_defect,
        };
        let mut out = Vec::new();
        for (i, op) in self.number.iter().enumerate() {
            out.push(row(format!("n[{i}]"), expectation(op, state)?));
        }
        for (i, op) in self.lowering.iter().enumerate() {
            out.push(row(format!("a[{i}]"), expectation(op, state)?));
        }
        out.push(row("trace".into(), trace));
        out.push(row("herm_defect".into(), Complex64::new(herm_defect, 0.0)));
        out.push(row("purity".into(), Complex64::new(state.purity(), 0.0)));
        Ok(out)
    }
}

fn check_finite(state: &LiouvilleState, t: f64) -> Result<(), CliError> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("non-finite state at t = {t}")))
    }
}

/// Evolve the initial state of `spec` over its time grid. `strict` overrides
/// the spec's own flag when set.
pub fn simulate(spec: &RunSpec, strict: bool) -> Result<Trajectory, CliError> {
    spec.validate()?;
    let strict = strict || spec.strict;
    let (initial, lost) = spec.initial_state()?;
    let times = spec.times.points();
    let options = OracleOptions {
        strategy: match spec.system {
            SystemKind::DampedOscillatorSu11 => BlockStrategy::Connected,
            _ => BlockStrategy::Sectors,
        },
        dense_cap: spec.dense_cap,
        ..OracleOptions::default()
    };
    let (generator, start) = match spec.system {
        SystemKind::DampedOscillatorSu11 => (
            damped_oscillator_liouvillian(&spec.config, TildeOrdering::Normal)?,
            initial.clone(),
        ),
        _ => {
            let closure = initial.closure_cutoff();
            (
                damped_su2_generator_on(&spec.config, closure)?,
                initial.embed(closure)?,
            )
        }
    };
    let space = start.space();
    let obs = Observables::new(space);
    let propagation = if strict {
        PropagationOptions::strict()
    } else {
        PropagationOptions::default()
    };
    let mut rows = Vec::new();
    match spec.engine {
        Engine::ClosedForm => {
            for &t in &times {
                let x = propagate_closed_form_multimode(&start, &spec.config, t, &propagation)?;
                rows.extend(obs.rows(t, &x, None)?);
            }
        }
        Engine::OracleExact => {
            let evolver = ExactEvolver::new(&generator, &start, options)?;
            for &t in &times {
                let x = evolver.evolve(&start, t)?;
                check_finite(&x, t)?;
                rows.extend(obs.rows(t, &x, None)?);
            }
        }
        Engine::OracleOde => {
            let mut x = start.clone();
            let mut now = 0.0;
            for &t in &times {
                if t > now {
                    x = evolve_ode(&x, &generator, t - now, spec.ode_step)?.state;
                    now = t;
                }
                rows.extend(obs.rows(t, &x, None)?);
            }
        }
        Engine::Compare => {
            let evolver = ExactEvolver::new(&generator, &start, options)?;
            for &t in &times {
                let closed =
                    propagate_closed_form_multimode(&start, &spec.config, t, &propagation)?;
                let exact = evolver.evolve(&start, t)?;
                check_finite(&exact, t)?;
                let defect = closed.max_abs_diff(&exact)?;
                rows.extend(obs.rows(t, &closed, Some(defect))?);
            }
        }
    }
    Ok(Trajectory {
        engine: spec.engine,
        rows,
        evolution_cutoff: space.cutoff().get(),
        initial_neglected_weight: lost,
    })
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub package: &'static str,
    pub code_version: &'static str,
    pub engine: &'static str,
    pub strict: bool,
    pub columns: Vec<&'static str>,
    pub time_points: usize,
    pub evolution_cutoff: usize,
    pub initial_neglected_weight: f64,
    pub runspec: &'a RunSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

/// Sidecar path: `trajectory.csv` → `trajectory.meta.json`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Write the CSV and its metadata sidecar.
pub fn write_outputs(
    spec: &RunSpec,
    trajectory: &Trajectory,
    csv_path: &Path,
    strict: bool,
    timestamp: bool,
) -> Result<PathBuf, CliError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e| CliError::io(p, e)
    };
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    std::fs::write(csv_path, trajectory.to_csv()).map_err(io(csv_path))?;
    let meta = Metadata {
        package: env!("CARGO_PKG_NAME"),
        code_version: env!("CARGO_PKG_VERSION"),
        engine: trajectory.engine.name(),
        strict: strict || spec.strict,
        columns: trajectory.columns(),
        time_points: spec.times.steps + 1,
        evolution_cutoff: trajectory.evolution_cutoff,
        initial_neglected_weight: trajectory.initial_neglected_weight,
        runspec: spec,
        timestamp_unix: timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }),
    };
    let meta_path = metadata_path(csv_path);
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    std::fs::write(&meta_path, text).map_err(io(&meta_path))?;
    Ok(meta_path)
}
