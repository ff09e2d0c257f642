//! Closed-form evolution of `|ρ⟩` under the disentangled propagator.
//!
//! For one mode in excitation sector `M = m + n`, a basis term `|m, n⟩` maps to
//!
//! ```text
//! Σ_{r=0}^{m} (Γ₋)^r/r! Σ_{s=0}^{n+r} (Γ₊)^s/s! · (e^{Γ₃/2})^{m−n−2r}
//!     · √[(m)_r (n+1)^{(r)} (n+r)_s (m−r+1)^{(s)}] · |m−r+s, n+r−s⟩
//! ```
//!
//! with `(J)_k` the falling and `(J)^{(k)}` the rising factorial. Several modes
//! are handled by applying the single-mode kernel register pair by register
//! pair; the Kerr cross terms only enter through the joint-sector factors.
//!
//! The output lives at the sector-closure cutoff of the input (`max M + 1`),
//! so no amplitude is lost: `𝒮₊` can move `|0, M⟩` to `|M, 0⟩`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;
// `Float` supplies f64 math without std; it goes unused when std is linked.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::{ConfigError, SystemConfig};
use crate::disentangle::{gauss_factorize, sector_coefficients, DisentangleError, GaussFactors};
use crate::fock::{FockError, LiouvilleState, Register, Space};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagateError {
    #[error("state has {state} modes, config has {config}")]
    ModeMismatch { state: usize, config: usize },
    #[error("single-mode propagation requested for {0} modes")]
    NotSingleMode(usize),
    #[error("time must be finite")]
    NonFiniteTime,
    #[error("sector {excitations:?}, mode {mode}: {source}")]
    Factorization {
        excitations: Vec<usize>,
        mode: usize,
        source: DisentangleError,
    },
    #[error("internal error: output label left the sector closure")]
    SectorLeak,
    #[error("propagation produced non-finite amplitudes")]
    NonFiniteResult,
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Falling factorial `J(J−1)⋯(J−n+1)`; `1` for `n = 0`.
///
/// # Panics
/// On `u128` overflow.
pub fn pochhammer_falling(j: u64, n: u64) -> u128 {
    (0..n).fold(1u128, |acc, k| {
        let f = u128::from(j).saturating_sub(u128::from(k));
        acc.checked_mul(f)
            .expect("falling factorial overflows u128")
    })
}

/// Rising factorial `J(J+1)⋯(J+n−1)`; `1` for `n = 0`.
///
/// # Panics
/// On `u128` overflow.
pub fn pochhammer_rising(j: u64, n: u64) -> u128 {
    (0..n).fold(1u128, |acc, k| {
        acc.checked_mul(u128::from(j) + u128::from(k))
            .expect("rising factorial overflows u128")
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    /// Disable tail pruning in the `s` sum.
    pub strict: bool,
    /// Pruning threshold relative to the running magnitude of the term.
    pub prune_tolerance: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            strict: false,
            prune_tolerance: 1e-18,
        }
    }
}

impl PropagationOptions {
    pub fn strict() -> Self {
        Self {
            strict: true,
            ..Self::default()
        }
    }
}

/// Gauss factors of every joint sector touched by a state, at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorFactorTable {
    t: f64,
    factors: BTreeMap<Vec<usize>, Vec<GaussFactors>>,
}

impl SectorFactorTable {
    /// Factor every joint sector in the support of `state`.
    pub fn for_state(
        config: &SystemConfig,
        state: &LiouvilleState,
        t: f64,
    ) -> Result<Self, PropagateError> {
        let space = state.space();
        let mut table = Self {
            t,
            factors: BTreeMap::new(),
        };
        for (idx, _) in state.iter_raw() {
            table.ensure(config, space.excitations(idx))?;
        }
        Ok(table)
    }

    fn ensure(
        &mut self,
        config: &SystemConfig,
        excitations: Vec<usize>,
    ) -> Result<(), PropagateError> {
        if self.factors.contains_key(&excitations) {
            return Ok(());
        }
        let per_mode = (0..config.modes())
            .map(|mode| {
                let co = sector_coefficients(config, mode, &excitations, self.t);
                gauss_factorize(&co).map_err(|source| PropagateError::Factorization {
                    excitations: excitations.clone(),
                    mode,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.factors.insert(excitations, per_mode);
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Per-mode factors of a joint sector.
    pub fn get(&self, excitations: &[usize]) -> Option<&[GaussFactors]> {
        self.factors.get(excitations).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Apply the single-mode kernel of `mode` to one basis term, pushing the
/// resulting terms into `out`.
fn mode_kernel(
    space: &Space,
    mode: usize,
    factors: &GaussFactors,
    index: usize,
    coeff: Complex64,
    options: &PropagationOptions,
    out: &mut Vec<(usize, Complex64)>,
) -> Result<(), PropagateError> {
    let c = space.cutoff().get();
    let m = space.occupation(index, mode, Register::Physical);
    let n = space.occupation(index, mode, Register::Tilde);
    let sector = m + n;
    let h = factors.gamma_3_half_exp;
    let (gp, gm) = (factors.gamma_plus, factors.gamma_minus);
    let gp_abs = gp.norm();

    // a_r = Γ₋^r/r! · √[(m)_r (n+1)^{(r)}]
    let mut a_r = Complex64::one();
    for r in 0..=m {
        if r > 0 {
            a_r = a_r * gm * (((m - r + 1) * (n + r)) as f64).sqrt() / r as f64;
            if a_r.is_zero() {
                break;
            }
        }
        let exponent = m as i32 - n as i32 - 2 * r as i32;
        let base = coeff * a_r * h.powi(exponent);
        let top = n + r;
        // b_s = Γ₊^s/s! · √[(n+r)_s (m−r+1)^{(s)}]
        let mut b_s = Complex64::one();
        let mut running = 0.0_f64;
        for s in 0..=top {
            if s > 0 {
                b_s = b_s * gp * (((top - s + 1) * (m - r + s)) as f64).sqrt() / s as f64;
                if b_s.is_zero() {
                    break;
                }
            }
            let (p, q) = (m - r + s, top - s);
            if p >= c || q >= c {
                return Err(PropagateError::SectorLeak);
            }
            debug_assert_eq!(p + q, sector);
            let term = base * b_s;
            let mut j = space.with_occupation(index, mode, Register::Physical, p);
            j = space.with_occupation(j, mode, Register::Tilde, q);
            out.push((j, term));

            if !options.strict {
                // |b_{s+1}/b_s| ≤ |Γ₊|(M+1)/(2(s+1)) by AM-GM; once that ratio
                // is below one the remaining terms form a dominated geometric tail.
                let mag = term.norm();
                running = running.max(mag);
                let ratio = gp_abs * (sector + 1) as f64 / (2.0 * (s + 1) as f64);
                if ratio < 1.0 && mag * ratio / (1.0 - ratio) < options.prune_tolerance * running {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Single-mode closed-form propagation to time `t`.
pub fn propagate_closed_form(
    state: &LiouvilleState,
    config: &SystemConfig,
    t: f64,
    options: &PropagationOptions,
) -> Result<LiouvilleState, PropagateError> {
    if state.modes() != 1 {
        return Err(PropagateError::NotSingleMode(state.modes()));
    }
    propagate_closed_form_multimode(state, config, t, options)
}

/// Closed-form propagation for `N` coupled modes. The result is expressed at
/// the sector-closure cutoff of `state`.
pub fn propagate_closed_form_multimode(
    state: &LiouvilleState,
    config: &SystemConfig,
    t: f64,
    options: &PropagationOptions,
) -> Result<LiouvilleState, PropagateError> {
    if state.modes() != config.modes() {
        return Err(PropagateError::ModeMismatch {
            state: state.modes(),
            config: config.modes(),
        });
    }
    if !t.is_finite() {
        return Err(PropagateError::NonFiniteTime);
    }
    let input = state.embed(state.closure_cutoff())?;
    let table = SectorFactorTable::for_state(config, &input, t)?;
    propagate_with_table(&input, &table, options)
}

/// Propagate with precomputed factors. `state` must already sit at its
/// sector-closure cutoff.
pub fn propagate_with_table(
    state: &LiouvilleState,
    table: &SectorFactorTable,
    options: &PropagationOptions,
) -> Result<LiouvilleState, PropagateError> {
    let space = state.space();
    // Each mode kernel keeps the excitation tuple, so the kernels can be
    // applied to the whole state one mode at a time, merging equal indices
    // between modes.
    let mut current: BTreeMap<usize, Complex64> =
        state.iter_raw().filter(|(_, v)| !v.is_zero()).collect();
    let mut buf = Vec::new();
    for mode in 0..space.modes() {
        let mut next: BTreeMap<usize, Complex64> = BTreeMap::new();
        for (&idx, &coeff) in &current {
            let excitations = space.excitations(idx);
            let factors = table.get(&excitations).ok_or(PropagateError::SectorLeak)?;
            buf.clear();
            mode_kernel(&space, mode, &factors[mode], idx, coeff, options, &mut buf)?;
            for &(j, v) in &buf {
                *next.entry(j).or_insert_with(Complex64::zero) += v;
            }
        }
        current = next;
    }
    let out = LiouvilleState::from_map(space, current);
    if !out.is_finite() {
        return Err(PropagateError::NonFiniteResult);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state_rho, DoubledIndex, FockCutoff};

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer_falling(5, 2), 20);
        assert_eq!(pochhammer_rising(3, 3), 60);
        assert_eq!(pochhammer_falling(7, 0), 1);
        assert_eq!(pochhammer_rising(0, 0), 1);
        assert_eq!(pochhammer_falling(3, 5), 0);
        assert_eq!(pochhammer_rising(1, 5), 120);
    }

    #[test]
    fn time_zero_is_identity() {
        let cfg = SystemConfig::single_mode(1.0, 0.5, 0.3, cut(8)).unwrap();
        let rho = coherent_state_rho(Complex64::new(0.6, 0.2), cut(8))
            .unwrap()
            .state;
        let out = propagate_closed_form(&rho, &cfg, 0.0, &PropagationOptions::strict()).unwrap();
        assert!(rho.max_abs_diff(&out).unwrap() < 1e-15);
    }

    #[test]
    fn rotation_limit() {
        use crate::algebra::Convention;
        let cfg = SystemConfig::single_mode(1.3, 0.0, 0.0, cut(6))
            .unwrap()
            .with_convention(Convention::Number);
        let rho = coherent_state_rho(Complex64::new(0.5, -0.4), cut(6))
            .unwrap()
            .state;
        let t = 0.77;
        let out = propagate_closed_form(&rho, &cfg, t, &PropagationOptions::strict()).unwrap();
        for (label, v) in rho.iter() {
            let phase =
                Complex64::new(0.0, -1.3 * (label.m[0] as f64 - label.n[0] as f64) * t).exp();
            assert!((out.get(&label) - v * phase).norm() < 1e-14);
        }
    }

    #[test]
    fn output_stays_in_sector() {
        let cfg = SystemConfig::single_mode(0.4, 0.3, 0.5, cut(8)).unwrap();
        let s = Space::single(cut(8));
        for m in 0..8 {
            for n in 0..8 {
                let rho = LiouvilleState::basis(s, &DoubledIndex::single(m, n)).unwrap();
                let out =
                    propagate_closed_form(&rho, &cfg, 0.9, &PropagationOptions::strict()).unwrap();
                for (label, _) in out.iter() {
                    assert_eq!(label.m[0] + label.n[0], m + n);
                }
            }
        }
    }

    #[test]
    fn pruning_changes_little() {
        let cfg = SystemConfig::single_mode(0.4, 0.3, 0.5, cut(12)).unwrap();
        let rho = coherent_state_rho(Complex64::new(1.0, 0.3), cut(12))
            .unwrap()
            .state;
        let strict = propagate_closed_form(&rho, &cfg, 1.1, &PropagationOptions::strict()).unwrap();
        let loose = propagate_closed_form(&rho, &cfg, 1.1, &PropagationOptions::default()).unwrap();
        assert!(strict.max_abs_diff(&loose).unwrap() <= 1e-15 * strict.max_abs().max(1.0) * 10.0);
    }

    #[test]
    fn mode_mismatch_is_an_error() {
        let cfg = SystemConfig::single_mode(0.4, 0.3, 0.5, cut(4)).unwrap();
        let rho = coherent_state_rho(Complex64::new(0.1, 0.0), cut(4))
            .unwrap()
            .state;
        let two = rho.tensor(&rho).unwrap();
        assert!(matches!(
            propagate_closed_form(&two, &cfg, 1.0, &PropagationOptions::strict()),
            Err(PropagateError::NotSingleMode(2))
        ));
        assert!(matches!(
            propagate_closed_form_multimode(&two, &cfg, 1.0, &PropagationOptions::strict()),
            Err(PropagateError::ModeMismatch { .. })
        ));
        assert!(
            propagate_closed_form(&rho, &cfg, f64::NAN, &PropagationOptions::strict()).is_err()
        );
    }
}
