//! Wall-clock comparison of the three evolution paths.

use std::time::Instant;

use kerr_tfd::fock::coherent_state_rho;
use kerr_tfd::oracle::Precision;
use kerr_tfd::{
    damped_su2_generator_on, evolve_exact, propagate_closed_form_multimode, BlockStrategy,
    Complex64, Convention, FockCutoff, LiouvilleState, OracleOptions, PropagationOptions,
    SystemConfig, SystemParams,
};

use crate::error::CliError;

pub const CUTOFFS: [usize; 4] = [10, 20, 40, 80];
pub const MODES: [usize; 2] = [1, 2];
/// Largest space for which the sparse generator is assembled at all.
pub const GENERATOR_CAP: usize = 1 << 20;
/// Default dense cap for timing; a full 1600-dimensional exponential already
/// takes minutes per repetition.
pub const BENCH_DENSE_CAP: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: &'static str,
    pub modes: usize,
    pub cutoff: usize,
    pub dim: usize,
    /// `(mean, standard deviation)` in milliseconds, or the reason for skipping.
    pub timing: Result<(f64, f64), String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub repeats: usize,
    pub dense_cap: usize,
    pub t: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repeats: 5,
            dense_cap: BENCH_DENSE_CAP,
            t: 1.0,
        }
    }
}

fn config(modes: usize, cutoff: FockCutoff) -> Result<SystemConfig, CliError> {
    let mut chi = vec![vec![0.1; modes]; modes];
    for (i, row) in chi.iter_mut().enumerate() {
        row[i] = 0.3;
    }
    Ok(SystemConfig::new(SystemParams {
        omega: vec![1.0; modes],
        chi,
        gamma: vec![0.2; modes],
        kappa: 0.0,
        nbar: 0.0,
        cutoff,
        convention: Convention::Spin,
    })?)
}

/// Coherent `α = 0.8` in every mode, with entries below `1e−14` of the largest dropped.
fn bench_state(modes: usize, cutoff: FockCutoff) -> Result<LiouvilleState, CliError> {
    let one = coherent_state_rho(Complex64::new(0.8, 0.0), cutoff)?.state;
    let floor = one.max_abs() * 1e-14;
    let one =
        LiouvilleState::from_entries(one.space(), one.iter().filter(|(_, v)| v.norm() >= floor))?;
    let mut acc = one.clone();
    for _ in 1..modes {
        acc = acc.tensor(&one)?;
    }
    Ok(acc)
}

fn time<F: FnMut() -> Result<(), CliError>>(
    repeats: usize,
    mut f: F,
) -> Result<(f64, f64), CliError> {
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, var.sqrt()))
}

pub fn run(options: BenchOptions) -> Result<Vec<BenchRow>, CliError> {
    let mut rows = Vec::new();
    run_with(options, |r| rows.push(r.clone()))?;
    Ok(rows)
}

/// [`run`], handing each row to `on_row` as soon as it is measured.
pub fn run_with(options: BenchOptions, mut on_row: impl FnMut(&BenchRow)) -> Result<(), CliError> {
    let mut emit = |row: BenchRow| on_row(&row);
    for &modes in &MODES {
        for &c in &CUTOFFS {
            let cutoff = FockCutoff::new(c)?;
            let cfg = config(modes, cutoff)?;
            let state = bench_state(modes, cutoff)?;
            let dim = cfg.space().dim();
            let strict = PropagationOptions::strict();
            emit(BenchRow {
                method: "closed_form",
                modes,
                cutoff: c,
                dim,
                timing: Ok(time(options.repeats, || {
                    propagate_closed_form_multimode(&state, &cfg, options.t, &strict)?;
                    Ok(())
                })?),
            });
            let generator = if dim <= GENERATOR_CAP {
                Some(damped_su2_generator_on(&cfg, cutoff)?)
            } else {
                None
            };
            for (method, strategy) in [
                ("sector_exact", BlockStrategy::Sectors),
                ("dense_full", BlockStrategy::Dense),
            ] {
                let cap = match strategy {
                    BlockStrategy::Dense => options.dense_cap,
                    _ => GENERATOR_CAP,
                };
                let timing = match &generator {
                    Some(g) if dim <= cap => {
                        let opts = OracleOptions {
                            strategy,
                            dense_cap: options.dense_cap,
                            precision: Precision::Double,
                        };
                        time(options.repeats, || {
                            evolve_exact(&state, g, options.t, opts)?;
                            Ok(())
                        })
                        .map_err(|e| format!("skipped: {e}"))
                    }
                    _ => Err(format!("skipped: dimension {dim} above cap {cap}")),
                };
                emit(BenchRow {
                    method,
                    modes,
                    cutoff: c,
                    dim,
                    timing,
                });
            }
        }
    }
    Ok(())
}

pub fn render(rows: &[BenchRow], repeats: usize) -> String {
    let mut out = header();
    for r in rows {
        out.push_str(&format_row(r));
    }
    out.push_str(&footer(repeats));
    out
}

pub fn header() -> String {
    format!(
        "{:<13} {:>5} {:>6} {:>10} {:>12} {:>12}\n",
        "method", "modes", "cutoff", "dim", "mean_ms", "std_ms"
    )
}

pub fn format_row(r: &BenchRow) -> String {
    match &r.timing {
        Ok((mean, sd)) => format!(
            "{:<13} {:>5} {:>6} {:>10} {:>12.3} {:>12.3}\n",
            r.method, r.modes, r.cutoff, r.dim, mean, sd
        ),
        Err(why) => format!(
            "{:<13} {:>5} {:>6} {:>10} {}\n",
            r.method, r.modes, r.cutoff, r.dim, why
        ),
    }
}

pub fn footer(repeats: usize) -> String {
    format!("{repeats} repetitions per row; std_ms is the sample standard deviation\n")
}
