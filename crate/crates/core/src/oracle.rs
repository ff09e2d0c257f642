//! Brute-force evolution `|ρ(t)⟩ = exp(tG)|ρ(0)⟩` for a sparse generator `G`.
//!
//! The generator is cut into invariant blocks, each block is exponentiated
//! densely with [`crate::expm::expm_apply`] (Padé scaling and squaring), and the
//! blocks are applied to the matching components of the state. Nothing here
//! touches the disentangling or closed-form code.
//!
//! * [`BlockStrategy::Sectors`]: blocks are joint excitation sectors
//!   `(M_1, …, M_N)`; a generator entry crossing sectors is an error.
//! * [`BlockStrategy::Connected`]: blocks are connected components of the
//!   generator's sparsity graph reachable from the support. Needed for the
//!   damped oscillator, which changes `m + n` but conserves `m − n`.
//! * [`BlockStrategy::Dense`]: one block holding the whole space.
//!
//! Damped Kerr blocks can have exponentials whose entries span thirty orders
//! of magnitude, and a state concentrated on the slowly growing part of the
//! block then loses most of its digits in f64. [`Precision::Adaptive`]
//! compares `exp(tB)x` with `exp(tB/3)³x` per block and redoes the block in
//! double-double arithmetic when they differ by more than
//! [`ADAPTIVE_TOLERANCE`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
// `Float` supplies f64 math without std; it goes unused when std is linked.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use thiserror::Error;

use crate::algebra::{
    damped_oscillator_liouvillian, damped_su2_generator_on, sector_basis, ConfigError,
    SystemConfig, TildeOrdering,
};
use crate::expm::{expm_apply, expm_extended};
use crate::fock::{
    expectation, number, FockError, LiouvilleState, Register, Space, SparseOperator,
};

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Largest acceptable f64 error estimate of a block, relative to
/// `max(1, max|ρ(t)|)` over the whole evolved state, before the adaptive
/// oracle redoes that block in double-double.
pub const ADAPTIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("generator has non-finite entries")]
    NonFiniteGenerator,
    #[error("generator couples excitation sectors {from:?} and {to:?}")]
    NotBlockDiagonal { from: Vec<usize>, to: Vec<usize> },
    #[error(
        "dense block of dimension {dim} exceeds the cap {cap}; lower the cutoff or raise the cap"
    )]
    DenseTooLarge { dim: usize, cap: usize },
    #[error("matrix exponential failed at t = {t}")]
    Exponential { t: f64 },
    #[error("non-finite state at t = {t}")]
    Diverged { t: f64 },
    #[error("step must be positive and finite")]
    InvalidStep,
    #[error("time must be finite and non-negative")]
    InvalidTime,
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum BlockStrategy {
    #[default]
    Sectors,
    Connected,
    Dense,
}

/// Arithmetic used for the block exponentials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Precision {
    Double,
    Extended,
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub strategy: BlockStrategy,
    /// Largest dense block that will be exponentiated.
    pub dense_cap: usize,
    pub precision: Precision,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            strategy: BlockStrategy::Sectors,
            dense_cap: DEFAULT_DENSE_CAP,
            precision: Precision::Adaptive,
        }
    }
}

impl OracleOptions {
    pub fn with_strategy(strategy: BlockStrategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }
}

/// The generator restricted to one invariant block.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBlock {
    /// Joint excitation sector, when the block is one.
    pub excitations: Option<Vec<usize>>,
    /// Flat basis indices, ascending.
    pub basis: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

impl SectorBlock {
    fn build(
        generator: &SparseOperator,
        basis: Vec<usize>,
        excitations: Option<Vec<usize>>,
    ) -> Self {
        let dim = basis.len();
        let mut matrix = DMatrix::from_element(dim, dim, Complex64::zero());
        for (col_pos, &col) in basis.iter().enumerate() {
            for &(row, v) in generator.column(col) {
                let row_pos = basis
                    .binary_search(&row)
                    .expect("block basis is closed under the generator");
                matrix[(row_pos, col_pos)] = v;
            }
        }
        Self {
            excitations,
            basis,
            matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Diagnostics of one sampled state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub trace: Complex64,
    pub hermiticity_defect: f64,
    pub norm: f64,
}

impl Diagnostics {
    pub fn of(t: f64, state: &LiouvilleState) -> Self {
        Self {
            t,
            trace: state.trace(),
            hermiticity_defect: state.hermiticity_defect(),
            norm: state.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub state: LiouvilleState,
    pub diagnostics: Vec<Diagnostics>,
}

/// Precomputed invariant blocks of a generator, covering a given support.
#[derive(Debug, Clone)]
pub struct ExactEvolver {
    space: Space,
    blocks: Vec<SectorBlock>,
    options: OracleOptions,
}

impl ExactEvolver {
    /// Blocks of `generator` that cover the support of `support`.
    pub fn new(
        generator: &SparseOperator,
        support: &LiouvilleState,
        options: OracleOptions,
    ) -> Result<Self, OracleError> {
        let space = generator.space();
        space.check_same(&support.space())?;
        if !generator.is_finite() {
            return Err(OracleError::NonFiniteGenerator);
        }
        let blocks = match options.strategy {
            BlockStrategy::Sectors => sector_blocks(generator, support)?,
            BlockStrategy::Connected => connected_blocks(generator, support),
            BlockStrategy::Dense => {
                if space.dim() > options.dense_cap {
                    return Err(OracleError::DenseTooLarge {
                        dim: space.dim(),
                        cap: options.dense_cap,
                    });
                }
                vec![SectorBlock::build(
                    generator,
                    (0..space.dim()).collect(),
                    None,
                )]
            }
        };
        if let Some(b) = blocks.iter().find(|b| b.dim() > options.dense_cap) {
            return Err(OracleError::DenseTooLarge {
                dim: b.dim(),
                cap: options.dense_cap,
            });
        }
        Ok(Self {
            space,
            blocks,
            options,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn blocks(&self) -> &[SectorBlock] {
        &self.blocks
    }

    /// `exp(tG)|ρ⟩` for a state inside the covered support.
    pub fn evolve(&self, state: &LiouvilleState, t: f64) -> Result<LiouvilleState, OracleError> {
        if !t.is_finite() {
            return Err(OracleError::InvalidTime);
        }
        self.space.check_same(&state.space())?;
        let mut pending = Vec::new();
        let mut covered = 0;
        for block in &self.blocks {
            let x = DVector::from_iterator(
                block.dim(),
                block.basis.iter().map(|&i| state.amplitude(i)),
            );
            if x.iter().all(|z| z.is_zero()) {
                continue;
            }
            covered += x.iter().filter(|z| !z.is_zero()).count();
            let a = &block.matrix * Complex64::new(t, 0.0);
            let (y, estimate) = match self.options.precision {
                Precision::Extended => (extended(&a, &x, t)?, 0.0),
                Precision::Double => (
                    expm_apply(&a, &x, 1).ok_or(OracleError::Exponential { t })?,
                    0.0,
                ),
                Precision::Adaptive => {
                    let y = expm_apply(&a, &x, 1).ok_or(OracleError::Exponential { t })?;
                    // A second evaluation through exp(A/3)^3 rounds
                    // differently; the gap between the two estimates the f64
                    // error of either.
                    let check = expm_apply(&(&a / Complex64::new(3.0, 0.0)), &x, 3)
                        .ok_or(OracleError::Exponential { t })?;
                    let gap = (&y - check).iter().map(|z| z.norm()).fold(0.0, f64::max);
                    (y, if gap.is_nan() { f64::INFINITY } else { gap })
                }
            };
            pending.push((block, a, x, y, estimate));
        }
        let nonzero = state.iter_raw().filter(|(_, v)| !v.is_zero()).count();
        debug_assert_eq!(
            covered, nonzero,
            "state support outside the evolver's blocks"
        );
        let scale = pending
            .iter()
            .flat_map(|p| p.3.iter())
            .map(|z| z.norm())
            .fold(1.0, f64::max);
        let mut out = BTreeMap::new();
        for (block, a, x, mut y, estimate) in pending {
            if self.options.precision == Precision::Adaptive
                && estimate > ADAPTIVE_TOLERANCE * scale
            {
                y = extended(&a, &x, t)?;
            }
            for (&i, &v) in block.basis.iter().zip(y.iter()) {
                if !v.is_zero() {
                    out.insert(i, v);
                }
            }
        }
        let result = LiouvilleState::from_map(self.space, out);
        if !result.is_finite() {
            return Err(OracleError::Diverged { t });
        }
        Ok(result)
    }
}

fn extended(
    a: &DMatrix<Complex64>,
    x: &DVector<Complex64>,
    t: f64,
) -> Result<DVector<Complex64>, OracleError> {
    expm_extended(a)
        .map(|e| e * x)
        .ok_or(OracleError::Exponential { t })
}

fn sector_blocks(
    generator: &SparseOperator,
    support: &LiouvilleState,
) -> Result<Vec<SectorBlock>, OracleError> {
    let space = generator.space();
    let sectors: BTreeSet<Vec<usize>> = support
        .iter_raw()
        .map(|(i, _)| space.excitations(i))
        .collect();
    let mut blocks = Vec::with_capacity(sectors.len());
    for sector in sectors {
        let basis = sector_basis(&space, &sector);
        for &col in &basis {
            for &(row, _) in generator.column(col) {
                let to = space.excitations(row);
                if to != sector {
                    return Err(OracleError::NotBlockDiagonal { from: sector, to });
                }
            }
        }
        blocks.push(SectorBlock::build(generator, basis, Some(sector)));
    }
    Ok(blocks)
}

fn connected_blocks(generator: &SparseOperator, support: &LiouvilleState) -> Vec<SectorBlock> {
    let space = generator.space();
    // undirected adjacency: columns give col → row, the transpose gives row → col
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); space.dim()];
    for (row, col, _) in generator.iter() {
        reverse[row].push(col);
    }
    let mut seen = vec![false; space.dim()];
    let mut blocks = Vec::new();
    for (start, _) in support.iter_raw() {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(i);
            let forward = generator.column(i).iter().map(|&(r, _)| r);
            for j in forward.chain(reverse[i].iter().copied()) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        blocks.push(SectorBlock::build(generator, members, None));
    }
    blocks
}

/// `exp(tG)|ρ⟩`, with diagnostics at `0` and `t`. A state with a smaller
/// cutoff than the generator is embedded first.
pub fn evolve_exact(
    state: &LiouvilleState,
    generator: &SparseOperator,
    t: f64,
    options: OracleOptions,
) -> Result<EvolutionResult, OracleError> {
    if !t.is_finite() || t < 0.0 {
        return Err(OracleError::InvalidTime);
    }
    let state = state.embed(generator.space().cutoff())?;
    let evolver = ExactEvolver::new(generator, &state, options)?;
    let out = evolver.evolve(&state, t)?;
    Ok(EvolutionResult {
        diagnostics: vec![Diagnostics::of(0.0, &state), Diagnostics::of(t, &out)],
        state: out,
    })
}

/// Classical fourth-order Runge–Kutta integration of `d|ρ⟩/dt = G|ρ⟩` with
/// `⌈t/step⌉` equal steps; diagnostics after every step.
pub fn evolve_ode(
    state: &LiouvilleState,
    generator: &SparseOperator,
    t: f64,
    step: f64,
) -> Result<EvolutionResult, OracleError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(OracleError::InvalidStep);
    }
    if !t.is_finite() || t < 0.0 {
        return Err(OracleError::InvalidTime);
    }
    if !generator.is_finite() {
        return Err(OracleError::NonFiniteGenerator);
    }
    let mut x = state.embed(generator.space().cutoff())?;
    let steps = (t / step).ceil().max(if t > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if steps > 0 { t / steps as f64 } else { 0.0 };
    let mut diagnostics = Vec::with_capacity(steps + 1);
    diagnostics.push(Diagnostics::of(0.0, &x));
    let half = Complex64::new(h / 2.0, 0.0);
    let full = Complex64::new(h, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    for k in 1..=steps {
        let k1 = generator.apply(&x)?;
        let k2 = generator.apply(&x.add_scaled(half, &k1)?)?;
        let k3 = generator.apply(&x.add_scaled(half, &k2)?)?;
        let k4 = generator.apply(&x.add_scaled(full, &k3)?)?;
        let incr = k1
            .add_scaled(two, &k2)?
            .add_scaled(two, &k3)?
            .add_scaled(Complex64::new(1.0, 0.0), &k4)?;
        x = x.add_scaled(sixth, &incr)?;
        let now = h * k as f64;
        if !x.is_finite() {
            return Err(OracleError::Diverged { t: now });
        }
        diagnostics.push(Diagnostics::of(now, &x));
    }
    Ok(EvolutionResult {
        state: x,
        diagnostics,
    })
}

/// Evolve under the damped SU(2) generator built at the sector-closure
/// cutoff of `state`, at each requested time.
pub fn evolve_damped_kerr_exact(
    config: &SystemConfig,
    state: &LiouvilleState,
    times: &[f64],
    options: OracleOptions,
) -> Result<Vec<LiouvilleState>, OracleError> {
    let cutoff = state.closure_cutoff();
    let generator = damped_su2_generator_on(config, cutoff)?;
    let state = state.embed(cutoff)?;
    let evolver = ExactEvolver::new(&generator, &state, options)?;
    times.iter().map(|&t| evolver.evolve(&state, t)).collect()
}

/// Least-squares fit `⟨n⟩(t) − n̄ ≈ A e^{−rt}` on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub rate: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the fitted curve against `⟨n⟩(t)`.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub times: Vec<f64>,
    pub mean_number: Vec<f64>,
    pub trace: Vec<Complex64>,
    pub hermiticity_defect: Vec<f64>,
    pub fit: Option<ExponentialFit>,
}

impl Relaxation {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.mean_number.windows(2).all(|w| w[1] < w[0])
    }
}

/// `⟨a†a⟩(t)` of the damped oscillator (trace-preserving ordering) by exact
/// block exponentials at the config cutoff.
pub fn damped_oscillator_relaxation(
    config: &SystemConfig,
    initial: &LiouvilleState,
    times: &[f64],
    options: OracleOptions,
) -> Result<Relaxation, OracleError> {
    let generator = damped_oscillator_liouvillian(config, TildeOrdering::Normal)?;
    let space = generator.space();
    let initial = initial.embed(space.cutoff())?;
    let options = OracleOptions {
        strategy: match options.strategy {
            BlockStrategy::Sectors => BlockStrategy::Connected,
            s => s,
        },
        ..options
    };
    let evolver = ExactEvolver::new(&generator, &initial, options)?;
    let n_op = number(&space, 0, Register::Physical)?;
    let mut out = Relaxation {
        times: times.to_vec(),
        mean_number: Vec::with_capacity(times.len()),
        trace: Vec::with_capacity(times.len()),
        hermiticity_defect: Vec::with_capacity(times.len()),
        fit: None,
    };
    for &t in times {
        let rho = evolver.evolve(&initial, t)?;
        out.mean_number.push(expectation(&n_op, &rho)?.re);
        out.trace.push(rho.trace());
        out.hermiticity_defect.push(rho.hermiticity_defect());
    }
    out.fit = fit_exponential(times, &out.mean_number, config.nbar());
    Ok(out)
}

fn fit_exponential(times: &[f64], values: &[f64], floor: f64) -> Option<ExponentialFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v - floor > 1e-300)
        .map(|(&t, &v)| (t, (v - floor).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let amplitude = (my - slope * mt).exp();
    let rate = -slope;
    let sq: f64 = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| {
            let r = v - (floor + amplitude * (-rate * t).exp());
            r * r
        })
        .sum();
    Some(ExponentialFit {
        rate,
        amplitude,
        rms_residual: (sq / times.len() as f64).sqrt(),
    })
}
