//! SU(2) and SU(1,1) generators on the doubled space, the system
//! configuration, and every generator of motion `−iĤ` used by the crate.
//!
//! All Hamiltonians are assembled from ladder-operator products; the
//! generator-form expressions are checked against those in the tests.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{number, FockCutoff, FockError, LadderSet, Register, Space, SparseOperator};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{field} has {found} entries, expected {expected}")]
    Length {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("at least one mode is required")]
    NoModes,
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("{0} must be non-negative")]
    Negative(&'static str),
    #[error("chi is not symmetric: chi[{i}][{j}] = {a} but chi[{j}][{i}] = {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("this construction needs a single mode, config has {0}")]
    NotSingleMode(usize),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// How the frequency and Kerr terms couple to `𝒮₃` in the damped generator.
///
/// `Spin`: `Ĥ_D = ω𝒮₃ + χ𝒮₀𝒮₃ + iγ(𝒮₊ + 𝒮₋ − 𝒮₃)`.
///
/// `Number`: `ω` and `χ` multiply `a†a − ã†ã = 2𝒮₃`, so at `γ = 0` the
/// generator is exactly the Liouvillian of `H = ωa†a + χ(a†a)²`. The damping
/// terms are the same in both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Convention {
    #[default]
    Spin,
    Number,
}

impl Convention {
    /// Factor multiplying `ω` and `χ` in front of `𝒮₃`.
    pub fn scale(self) -> f64 {
        match self {
            Convention::Spin => 1.0,
            Convention::Number => 2.0,
        }
    }
}

/// Plain-data form of [`SystemConfig`], used for (de)serialization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SystemParams {
    pub omega: Vec<f64>,
    pub chi: Vec<Vec<f64>>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub gamma: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub kappa: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub nbar: f64,
    pub cutoff: FockCutoff,
    #[cfg_attr(feature = "serde", serde(default))]
    pub convention: Convention,
}

/// Validated physical parameters: `ω_i`, symmetric `χ_ij`, decay `γ_i`,
/// oscillator decay `κ`, thermal occupation `n̄`, and the Fock cutoff.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "SystemParams", into = "SystemParams")
)]
pub struct SystemConfig {
    params: SystemParams,
}

impl TryFrom<SystemParams> for SystemConfig {
    type Error = ConfigError;

    fn try_from(mut params: SystemParams) -> Result<Self, ConfigError> {
        let n = params.omega.len();
        if n == 0 {
            return Err(ConfigError::NoModes);
        }
        if params.gamma.is_empty() {
            params.gamma = vec![0.0; n];
        }
        let check_len = |field, found| {
            if found == n {
                Ok(())
            } else {
                Err(ConfigError::Length {
                    field,
                    expected: n,
                    found,
                })
            }
        };
        check_len("gamma", params.gamma.len())?;
        check_len("chi", params.chi.len())?;
        for row in &params.chi {
            check_len("chi row", row.len())?;
        }
        let finite = |name, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::NonFinite(name))
            }
        };
        for &w in &params.omega {
            finite("omega", w)?;
        }
        for &x in params.chi.iter().flatten() {
            finite("chi", x)?;
        }
        for &g in &params.gamma {
            finite("gamma", g)?;
            if g < 0.0 {
                return Err(ConfigError::Negative("gamma"));
            }
        }
        for (name, v) in [("kappa", params.kappa), ("nbar", params.nbar)] {
            finite(name, v)?;
            if v < 0.0 {
                return Err(ConfigError::Negative(name));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (params.chi[i][j], params.chi[j][i]);
                if a != b {
                    return Err(ConfigError::Asymmetric { i, j, a, b });
                }
            }
        }
        Space::new(params.cutoff, n)?;
        Ok(Self { params })
    }
}

impl From<SystemConfig> for SystemParams {
    fn from(value: SystemConfig) -> Self {
        value.params
    }
}

impl SystemConfig {
    pub fn new(params: SystemParams) -> Result<Self, ConfigError> {
        Self::try_from(params)
    }

    /// One mode with `ω`, `χ`, `γ`; no oscillator reservoir.
    pub fn single_mode(
        omega: f64,
        chi: f64,
        gamma: f64,
        cutoff: FockCutoff,
    ) -> Result<Self, ConfigError> {
        Self::new(SystemParams {
            omega: vec![omega],
            chi: vec![vec![chi]],
            gamma: vec![gamma],
            kappa: 0.0,
            nbar: 0.0,
            cutoff,
            convention: Convention::Spin,
        })
    }

    /// Single-mode damped harmonic oscillator (`κ`, `n̄`, `ω`).
    pub fn oscillator(
        omega: f64,
        kappa: f64,
        nbar: f64,
        cutoff: FockCutoff,
    ) -> Result<Self, ConfigError> {
        Self::new(SystemParams {
            omega: vec![omega],
            chi: vec![vec![0.0]],
            gamma: vec![0.0],
            kappa,
            nbar,
            cutoff,
            convention: Convention::Spin,
        })
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.params.convention = convention;
        self
    }

    pub fn with_cutoff(mut self, cutoff: FockCutoff) -> Result<Self, ConfigError> {
        Space::new(cutoff, self.modes())?;
        self.params.cutoff = cutoff;
        Ok(self)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn modes(&self) -> usize {
        self.params.omega.len()
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.params.omega[i]
    }

    pub fn chi(&self, i: usize, j: usize) -> f64 {
        self.params.chi[i][j]
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.params.gamma[i]
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }

    pub fn nbar(&self) -> f64 {
        self.params.nbar
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.params.cutoff
    }

    pub fn convention(&self) -> Convention {
        self.params.convention
    }

    pub fn space(&self) -> Space {
        Space::new(self.params.cutoff, self.modes()).expect("validated at construction")
    }

    fn space_with(&self, cutoff: FockCutoff) -> Result<Space, ConfigError> {
        Ok(Space::new(cutoff, self.modes())?)
    }

    fn require_single_mode(&self) -> Result<(), ConfigError> {
        match self.modes() {
            1 => Ok(()),
            n => Err(ConfigError::NotSingleMode(n)),
        }
    }
}

/// `𝒮₀ = a†a + ã†ã`, `𝒮₃ = (a†a − ã†ã)/2`, `𝒮₊ = a†ã`, `𝒮₋ = aã†` for one mode.
#[derive(Debug, Clone)]
pub struct Su2Generators {
    pub s0: SparseOperator,
    pub s3: SparseOperator,
    pub s_plus: SparseOperator,
    pub s_minus: SparseOperator,
}

impl Su2Generators {
    pub fn new(space: &Space, mode: usize) -> Result<Self, FockError> {
        let l = LadderSet::new(space, mode)?;
        let n = &l.a_dag * &l.a;
        let nt = &l.a_tilde_dag * &l.a_tilde;
        Ok(Self {
            s0: &n + &nt,
            s3: 0.5 * &(&n - &nt),
            s_plus: &l.a_dag * &l.a_tilde,
            s_minus: &l.a * &l.a_tilde_dag,
        })
    }
}

/// `𝒦₀ = a†a − ã†ã`, `𝒦₃ = (a†a + ã†ã + 1)/2`, `𝒦₊ = a†ã†`, `𝒦₋ = aã`.
#[derive(Debug, Clone)]
pub struct Su11Generators {
    pub k0: SparseOperator,
    pub k3: SparseOperator,
    pub k_plus: SparseOperator,
    pub k_minus: SparseOperator,
}

impl Su11Generators {
    pub fn new(space: &Space, mode: usize) -> Result<Self, FockError> {
        let l = LadderSet::new(space, mode)?;
        let n = &l.a_dag * &l.a;
        let nt = &l.a_tilde_dag * &l.a_tilde;
        let id = SparseOperator::identity(*space);
        Ok(Self {
            k0: &n - &nt,
            k3: 0.5 * &(&(&n + &nt) + &id),
            k_plus: &l.a_dag * &l.a_tilde_dag,
            k_minus: &l.a * &l.a_tilde,
        })
    }
}

/// `[left, right] = expected`.
#[derive(Debug, Clone)]
pub struct Relation<'a> {
    pub name: &'static str,
    pub left: &'a SparseOperator,
    pub right: &'a SparseOperator,
    pub expected: SparseOperator,
}

impl Relation<'_> {
    /// Max entrywise defect over columns whose labels sit at least one step
    /// below the cutoff in every register, so no intermediate hits truncation.
    pub fn defect(&self) -> f64 {
        let space = self.left.space();
        self.left
            .commutator(self.right)
            .max_abs_diff_where(&self.expected, |c| space.is_interior(c, 1))
    }

    /// [`Relation::defect`] divided by `max(1, max|AB|, max|BA|)` over the
    /// same columns, the size of the terms that cancel in the bracket.
    pub fn scaled_defect(&self) -> f64 {
        let space = self.left.space();
        let zero = SparseOperator::zero(space);
        let size = |op: SparseOperator| op.max_abs_diff_where(&zero, |c| space.is_interior(c, 1));
        let scale = size(self.left.compose(self.right))
            .max(size(self.right.compose(self.left)))
            .max(1.0);
        self.defect() / scale
    }
}

/// A set of generators with its bracket relations.
pub trait LieRelations {
    fn relations(&self) -> Vec<Relation<'_>>;
}

impl LieRelations for Su2Generators {
    fn relations(&self) -> Vec<Relation<'_>> {
        vec![
            Relation {
                name: "[S3,S+] = S+",
                left: &self.s3,
                right: &self.s_plus,
                expected: self.s_plus.clone(),
            },
            Relation {
                name: "[S3,S-] = -S-",
                left: &self.s3,
                right: &self.s_minus,
                expected: -&self.s_minus,
            },
            Relation {
                name: "[S+,S-] = 2S3",
                left: &self.s_plus,
                right: &self.s_minus,
                expected: 2.0 * &self.s3,
            },
            Relation {
                name: "[S0,S+] = 0",
                left: &self.s0,
                right: &self.s_plus,
                expected: SparseOperator::zero(self.s0.space()),
            },
            Relation {
                name: "[S0,S-] = 0",
                left: &self.s0,
                right: &self.s_minus,
                expected: SparseOperator::zero(self.s0.space()),
            },
        ]
    }
}

impl LieRelations for Su11Generators {
    fn relations(&self) -> Vec<Relation<'_>> {
        vec![
            Relation {
                name: "[K3,K+] = K+",
                left: &self.k3,
                right: &self.k_plus,
                expected: self.k_plus.clone(),
            },
            Relation {
                name: "[K3,K-] = -K-",
                left: &self.k3,
                right: &self.k_minus,
                expected: -&self.k_minus,
            },
            Relation {
                name: "[K+,K-] = -2K3",
                left: &self.k_plus,
                right: &self.k_minus,
                expected: -2.0 * &self.k3,
            },
            Relation {
                name: "[K0,K+] = 0",
                left: &self.k0,
                right: &self.k_plus,
                expected: SparseOperator::zero(self.k0.space()),
            },
            Relation {
                name: "[K0,K-] = 0",
                left: &self.k0,
                right: &self.k_minus,
                expected: SparseOperator::zero(self.k0.space()),
            },
        ]
    }
}

impl Su11Generators {
    /// The sign variants `[𝒦₃,𝒦₋] = +𝒦₋` and `[𝒦₊,𝒦₋] = +2𝒦₃`. These do not
    /// hold for this realization; their defects are reported, not asserted.
    pub fn sign_variant_relations(&self) -> Vec<Relation<'_>> {
        vec![
            Relation {
                name: "[K3,K-] = +K- (sign variant)",
                left: &self.k3,
                right: &self.k_minus,
                expected: self.k_minus.clone(),
            },
            Relation {
                name: "[K+,K-] = +2K3 (sign variant)",
                left: &self.k_plus,
                right: &self.k_minus,
                expected: 2.0 * &self.k3,
            },
        ]
    }
}

/// Largest defect over all bracket relations of `gens`.
pub fn commutator_defect(gens: &impl LieRelations) -> f64 {
    gens.relations()
        .iter()
        .map(Relation::defect)
        .fold(0.0, f64::max)
}

/// Named defect of every relation.
pub fn relation_defects(gens: &impl LieRelations) -> Vec<(String, f64)> {
    gens.relations()
        .iter()
        .map(|r| (String::from(r.name), r.defect()))
        .collect()
}

/// Single-mode SU(2) generators for `config`'s space.
pub fn build_su2(config: &SystemConfig, mode: usize) -> Result<Su2Generators, FockError> {
    Su2Generators::new(&config.space(), mode)
}

/// Single-mode SU(1,1) generators for `config`'s space.
pub fn build_su11(config: &SystemConfig) -> Result<Su11Generators, ConfigError> {
    config.require_single_mode()?;
    Ok(Su11Generators::new(&config.space(), 0)?)
}

/// `−iĤ` of the undamped Kerr medium from ladder products:
/// `−i Σ ω_i(N_i − Ñ_i) − i Σ χ_ij (N_i N_j − Ñ_i Ñ_j)` with `N = a†a`.
pub fn kerr_generator(config: &SystemConfig) -> SparseOperator {
    kerr_generator_on(config, config.space())
}

/// [`kerr_generator`] on a space with another cutoff.
pub fn kerr_generator_on(config: &SystemConfig, space: Space) -> SparseOperator {
    let ladders: Vec<_> = (0..config.modes())
        .map(|i| LadderSet::new(&space, i).expect("mode in range"))
        .collect();
    let n: Vec<_> = ladders.iter().map(|l| &l.a_dag * &l.a).collect();
    let nt: Vec<_> = ladders
        .iter()
        .map(|l| &l.a_tilde_dag * &l.a_tilde)
        .collect();
    let mut h = SparseOperator::zero(space);
    for i in 0..config.modes() {
        h = &h + &(config.omega(i) * &(&n[i] - &nt[i]));
        for j in 0..config.modes() {
            let quartic = &(&n[i] * &n[j]) - &(&nt[i] * &nt[j]);
            h = &h + &(config.chi(i, j) * &quartic);
        }
    }
    (-I) * &h
}

/// The same generator written with SU(2) generators:
/// `−i Σ 2ω_i 𝒮₃ⁱ − i Σ 2χ_ij 𝒮₀ʲ 𝒮₃ⁱ`.
pub fn kerr_generator_su2_form(config: &SystemConfig) -> SparseOperator {
    let space = config.space();
    let gens: Vec<_> = (0..config.modes())
        .map(|i| Su2Generators::new(&space, i).expect("mode in range"))
        .collect();
    let mut h = SparseOperator::zero(space);
    for i in 0..config.modes() {
        h = &h + &((2.0 * config.omega(i)) * &gens[i].s3);
        for j in 0..config.modes() {
            h = &h + &((2.0 * config.chi(i, j)) * &(&gens[j].s0 * &gens[i].s3));
        }
    }
    (-I) * &h
}

/// `−iĤ_D = Σ_i [−i s ω_i 𝒮₃ⁱ − i s Σ_j χ_ij 𝒮₀ʲ 𝒮₃ⁱ + γ_i (𝒮₊ⁱ + 𝒮₋ⁱ − 𝒮₃ⁱ)]`
/// with `s` from the configured [`Convention`].
pub fn damped_su2_generator(config: &SystemConfig) -> SparseOperator {
    damped_su2_generator_on(config, config.cutoff()).expect("config space is valid")
}

/// [`damped_su2_generator`] on a space with another cutoff (the oracle uses
/// the sector-closure cutoff of the initial state).
pub fn damped_su2_generator_on(
    config: &SystemConfig,
    cutoff: FockCutoff,
) -> Result<SparseOperator, ConfigError> {
    let space = config.space_with(cutoff)?;
    let scale = config.convention().scale();
    let gens: Vec<_> = (0..config.modes())
        .map(|i| Su2Generators::new(&space, i))
        .collect::<Result<_, _>>()?;
    let mut g = SparseOperator::zero(space);
    for (i, gi) in gens.iter().enumerate() {
        let gamma = config.gamma(i);
        g = &g + &(Complex64::new(-gamma, -scale * config.omega(i)) * &gi.s3);
        for (j, gj) in gens.iter().enumerate() {
            let chi = config.chi(i, j);
            if chi != 0.0 {
                g = &g + &(Complex64::new(0.0, -scale * chi) * &(&gj.s0 * &gi.s3));
            }
        }
        g = &g + &(gamma * &(&gi.s_plus + &gi.s_minus));
    }
    Ok(g)
}

/// Placement of the tilde operators in the anticommutator terms of the
/// damped-oscillator generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum TildeOrdering {
    /// `ρA ↦ Ã†|ρ⟩`: `κ(n̄+1)/2 (2aã − a†a − ã†ã) + κn̄/2 (2a†ã† − aa† − ãã†) − iω(a†a − ã†ã)`.
    /// Trace preserving, with the thermal state as fixed point.
    #[default]
    Normal,
    /// `ãã†` and `ã†ã` exchanged (and `−iω(a†a − ãã†)`); differs from
    /// `Normal` by `(−κ/2 + iω)·𝟙` away from the truncation boundary.
    Swapped,
}

/// Generator of the damped harmonic oscillator master equation (single mode,
/// parameters `ω`, `κ`, `n̄`).
pub fn damped_oscillator_liouvillian(
    config: &SystemConfig,
    ordering: TildeOrdering,
) -> Result<SparseOperator, ConfigError> {
    config.require_single_mode()?;
    let space = config.space();
    let l = LadderSet::new(&space, 0)?;
    let (kappa, nbar, omega) = (config.kappa(), config.nbar(), config.omega(0));
    let n = &l.a_dag * &l.a;
    let anti_n = &l.a * &l.a_dag;
    let nt = &l.a_tilde_dag * &l.a_tilde;
    let anti_nt = &l.a_tilde * &l.a_tilde_dag;
    let (loss_tilde, gain_tilde) = match ordering {
        TildeOrdering::Normal => (&nt, &anti_nt),
        TildeOrdering::Swapped => (&anti_nt, &nt),
    };
    let loss = &(&(2.0 * &(&l.a * &l.a_tilde)) - &n) - loss_tilde;
    let gain = &(&(2.0 * &(&l.a_dag * &l.a_tilde_dag)) - &anti_n) - gain_tilde;
    let rotation = &n - loss_tilde;
    let g = &(&((kappa * (nbar + 1.0) / 2.0) * &loss) + &((kappa * nbar / 2.0) * &gain))
        + &(Complex64::new(0.0, -omega) * &rotation);
    Ok(g)
}

/// `−iω𝒦₀ + κ(n̄+1)𝒦₋ + κn̄𝒦₊ − κ(2n̄+1)𝒦₃ + c·𝟙` for a constant `c`.
pub fn damped_oscillator_su11_form(
    config: &SystemConfig,
    constant: Complex64,
) -> Result<SparseOperator, ConfigError> {
    let k = build_su11(config)?;
    let (kappa, nbar, omega) = (config.kappa(), config.nbar(), config.omega(0));
    let id = SparseOperator::identity(config.space());
    let g = &(&(&(Complex64::new(0.0, -omega) * &k.k0) + &((kappa * (nbar + 1.0)) * &k.k_minus))
        + &(&((kappa * nbar) * &k.k_plus) - &((kappa * (2.0 * nbar + 1.0)) * &k.k3)))
        + &(constant * &id);
    Ok(g)
}

/// Per-mode excitation values `M = m + n` that fit a cutoff.
pub fn excitation_sectors(cutoff: FockCutoff) -> RangeInclusive<usize> {
    0..=2 * (cutoff.get() - 1)
}

/// Whether all `M + 1` labels of sector `M` fit below the cutoff.
pub fn sector_is_complete(cutoff: FockCutoff, excitation: usize) -> bool {
    excitation < cutoff.get()
}

/// Per-mode excitations of a flat index.
pub fn sector_of(space: &Space, index: usize) -> Vec<usize> {
    space.excitations(index)
}

/// Flat indices of the joint sector `(M_1, …, M_N)` that fit the space,
/// ascending.
pub fn sector_basis(space: &Space, excitations: &[usize]) -> Vec<usize> {
    assert_eq!(excitations.len(), space.modes(), "one excitation per mode");
    let c = space.cutoff().get();
    let mut out = vec![0usize];
    for (mode, &big_m) in excitations.iter().enumerate() {
        let lo = big_m.saturating_sub(c - 1);
        let hi = big_m.min(c - 1);
        let mut next = Vec::new();
        for &base in &out {
            for m in lo..=hi {
                let idx = space.with_occupation(base, mode, Register::Physical, m);
                next.push(space.with_occupation(idx, mode, Register::Tilde, big_m - m));
            }
        }
        out = next;
    }
    out.sort_unstable();
    out
}

/// Total occupation operator `Σ_i a_i†a_i` (physical register).
pub fn total_number(space: &Space) -> SparseOperator {
    let mut acc = SparseOperator::zero(*space);
    for i in 0..space.modes() {
        acc = &acc + &number(space, i, Register::Physical).expect("mode in range");
    }
    acc
}
