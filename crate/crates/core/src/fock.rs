//! Truncated doubled Fock space.
//!
//! A density operator `ρ = Σ ρ_{m,n} |m⟩⟨n|` is carried as the vector
//! `|ρ⟩ = Σ ρ_{m,n} |m, ñ⟩` in `H ⊗ H*`. For `N` modes every basis label has
//! `2N` registers: the physical occupations `m_1..m_N` followed by the tilde
//! occupations `n_1..n_N`. Each register holds an occupation below the
//! cutoff, and a basis label is packed into a flat index with `m_1` as the
//! most significant digit (single mode: `index = m·c + n`).
//!
//! Raising operators annihilate the top occupation `c − 1`, so every operator
//! stays inside the truncated space.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
// `Float` supplies f64 math without std; it goes unused when std is linked.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use thiserror::Error;

/// Weight below which the part of an initial state cut off by truncation is
/// considered negligible.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FockError {
    #[error("cutoff must be at least 1")]
    InvalidCutoff,
    #[error("mode count must be at least 1")]
    InvalidModes,
    #[error("space with cutoff {cutoff} and {modes} modes is too large to index")]
    DimensionOverflow { cutoff: usize, modes: usize },
    #[error("basis label does not fit the space (cutoff {cutoff}, {modes} modes)")]
    IndexOutOfRange { cutoff: usize, modes: usize },
    #[error("mode {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: Space, right: Space },
    #[error("cannot shrink a state from cutoff {from} to {to} by embedding")]
    CannotEmbed { from: usize, to: usize },
    #[error("non-finite parameter")]
    NonFinite,
}

/// Exclusive upper bound on the occupation of every register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "usize", into = "usize")
)]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub fn new(levels: usize) -> Result<Self, FockError> {
        if levels == 0 {
            return Err(FockError::InvalidCutoff);
        }
        Ok(Self(levels))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for FockCutoff {
    type Error = FockError;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FockCutoff> for usize {
    fn from(value: FockCutoff) -> Self {
        value.0
    }
}

impl fmt::Display for FockCutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which half of the doubled space a register belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Register {
    Physical,
    Tilde,
}

/// Basis label `|m, ñ⟩`; multimode labels carry one occupation per mode in
/// each half.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DoubledIndex {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
}

impl DoubledIndex {
    pub fn new(m: Vec<usize>, n: Vec<usize>) -> Self {
        Self { m, n }
    }

    pub fn single(m: usize, n: usize) -> Self {
        Self {
            m: vec![m],
            n: vec![n],
        }
    }

    pub fn modes(&self) -> usize {
        self.m.len()
    }

    /// Per-mode excitation `m_i + n_i`.
    pub fn excitations(&self) -> Vec<usize> {
        self.m.iter().zip(&self.n).map(|(a, b)| a + b).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.m == self.n
    }
}

/// Shape of a truncated doubled space: cutoff per register and mode count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Space {
    cutoff: FockCutoff,
    modes: usize,
    dim: usize,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cutoff {} x {} modes", self.cutoff, self.modes)
    }
}

impl Space {
    pub fn new(cutoff: FockCutoff, modes: usize) -> Result<Self, FockError> {
        if modes == 0 {
            return Err(FockError::InvalidModes);
        }
        let overflow = FockError::DimensionOverflow {
            cutoff: cutoff.get(),
            modes,
        };
        let registers = u32::try_from(2 * modes).map_err(|_| overflow.clone())?;
        let dim = cutoff.get().checked_pow(registers).ok_or(overflow)?;
        Ok(Self { cutoff, modes, dim })
    }

    pub fn single(cutoff: FockCutoff) -> Self {
        Self::new(cutoff, 1).expect("a single mode always fits when the cutoff squared does")
    }

    #[inline]
    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of basis states, `c^(2N)`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_cutoff(&self, cutoff: FockCutoff) -> Result<Self, FockError> {
        Self::new(cutoff, self.modes)
    }

    #[inline]
    fn register(&self, mode: usize, register: Register) -> usize {
        match register {
            Register::Physical => mode,
            Register::Tilde => self.modes + mode,
        }
    }

    #[inline]
    fn stride(&self, reg: usize) -> usize {
        let c = self.cutoff.get();
        let mut s = 1;
        for _ in reg + 1..2 * self.modes {
            s *= c;
        }
        s
    }

    /// Occupation stored in `register` of `mode` at flat `index`.
    #[inline]
    pub fn occupation(&self, index: usize, mode: usize, register: Register) -> usize {
        let reg = self.register(mode, register);
        (index / self.stride(reg)) % self.cutoff.get()
    }

    /// `index` with one register replaced. The new value must be below the cutoff.
    #[inline]
    pub fn with_occupation(
        &self,
        index: usize,
        mode: usize,
        register: Register,
        value: usize,
    ) -> usize {
        debug_assert!(value < self.cutoff.get());
        let stride = self.stride(self.register(mode, register));
        let old = (index / stride) % self.cutoff.get();
        index - old * stride + value * stride
    }

    pub fn encode(&self, label: &DoubledIndex) -> Result<usize, FockError> {
        let c = self.cutoff.get();
        let out_of_range = FockError::IndexOutOfRange {
            cutoff: c,
            modes: self.modes,
        };
        if label.m.len() != self.modes || label.n.len() != self.modes {
            return Err(out_of_range);
        }
        let mut index = 0;
        for &d in label.m.iter().chain(&label.n) {
            if d >= c {
                return Err(out_of_range);
            }
            index = index * c + d;
        }
        Ok(index)
    }

    pub fn decode(&self, mut index: usize) -> DoubledIndex {
        let c = self.cutoff.get();
        let mut digits = vec![0; 2 * self.modes];
        for slot in digits.iter_mut().rev() {
            *slot = index % c;
            index /= c;
        }
        let n = digits.split_off(self.modes);
        DoubledIndex { m: digits, n }
    }

    /// `m_i == n_i` for every mode.
    pub fn is_diagonal(&self, index: usize) -> bool {
        (0..self.modes).all(|i| {
            self.occupation(index, i, Register::Physical)
                == self.occupation(index, i, Register::Tilde)
        })
    }

    /// Exchange the physical and tilde halves of a label.
    pub fn swap_halves(&self, index: usize) -> usize {
        let half = self.stride(self.modes - 1);
        let high = index / half;
        let low = index % half;
        low * half + high
    }

    /// Per-mode excitation `m_i + n_i` of a flat index.
    pub fn excitations(&self, index: usize) -> Vec<usize> {
        (0..self.modes)
            .map(|i| {
                self.occupation(index, i, Register::Physical)
                    + self.occupation(index, i, Register::Tilde)
            })
            .collect()
    }

    /// Every register occupation is at most `c − 1 − margin`.
    pub fn is_interior(&self, index: usize, margin: usize) -> bool {
        let c = self.cutoff.get();
        let mut rest = index;
        for _ in 0..2 * self.modes {
            if rest % c + margin >= c {
                return false;
            }
            rest /= c;
        }
        true
    }

    /// Re-encode a flat index of this space into `target` (must hold the label).
    pub fn reindex(&self, index: usize, target: &Space) -> Option<usize> {
        if target == self {
            return Some(index);
        }
        let label = self.decode(index);
        target.encode(&label).ok()
    }

    pub fn check_same(&self, other: &Space) -> Result<(), FockError> {
        if self == other {
            Ok(())
        } else {
            Err(FockError::SpaceMismatch {
                left: *self,
                right: *other,
            })
        }
    }
}

/// Coefficients `ρ_{m,n}` of `|ρ⟩` over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleState {
    space: Space,
    coeffs: BTreeMap<usize, Complex64>,
}

impl LiouvilleState {
    pub fn zero(space: Space) -> Self {
        Self {
            space,
            coeffs: BTreeMap::new(),
        }
    }

    /// A single basis vector `|m, ñ⟩`.
    pub fn basis(space: Space, label: &DoubledIndex) -> Result<Self, FockError> {
        let mut state = Self::zero(space);
        state
            .coeffs
            .insert(space.encode(label)?, Complex64::new(1.0, 0.0));
        Ok(state)
    }

    /// Sum of the given terms; repeated labels accumulate.
    pub fn from_entries<I>(space: Space, entries: I) -> Result<Self, FockError>
    where
        I: IntoIterator<Item = (DoubledIndex, Complex64)>,
    {
        let mut state = Self::zero(space);
        for (label, value) in entries {
            state.add_at(space.encode(&label)?, value);
        }
        Ok(state)
    }

    pub(crate) fn from_map(space: Space, coeffs: BTreeMap<usize, Complex64>) -> Self {
        Self { space, coeffs }
    }

    #[inline]
    pub fn space(&self) -> Space {
        self.space
    }

    #[inline]
    pub fn cutoff(&self) -> FockCutoff {
        self.space.cutoff
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.space.modes
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `ρ_{m,n}`; zero off the support or outside the space.
    pub fn get(&self, label: &DoubledIndex) -> Complex64 {
        self.space
            .encode(label)
            .ok()
            .and_then(|i| self.coeffs.get(&i).copied())
            .unwrap_or_else(Complex64::zero)
    }

    #[inline]
    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.coeffs
            .get(&index)
            .copied()
            .unwrap_or_else(Complex64::zero)
    }

    pub fn add_at(&mut self, index: usize, value: Complex64) {
        debug_assert!(index < self.space.dim);
        *self.coeffs.entry(index).or_insert_with(Complex64::zero) += value;
    }

    /// Flat index and coefficient, in ascending index order.
    pub fn iter_raw(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.coeffs.iter().map(|(&i, &v)| (i, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (DoubledIndex, Complex64)> + '_ {
        self.coeffs.iter().map(|(&i, &v)| (self.space.decode(i), v))
    }

    /// `Σ_m ρ_{m,m}`, i.e. `⟨I|ρ⟩`.
    pub fn trace(&self) -> Complex64 {
        self.coeffs
            .iter()
            .filter(|(&i, _)| self.space.is_diagonal(i))
            .map(|(_, &v)| v)
            .sum()
    }

    /// `max |ρ_{m,n} − conj(ρ_{n,m})|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(&i, &v)| (v - self.amplitude(self.space.swap_halves(i)).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ |ρ_{m,n}|²`, equal to `Tr ρ²` for hermitian `ρ`.
    pub fn purity(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.purity().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest per-mode excitation `m_i + n_i` over the support.
    pub fn max_excitation(&self) -> usize {
        self.coeffs
            .keys()
            .flat_map(|&i| self.space.excitations(i))
            .max()
            .unwrap_or(0)
    }

    /// Smallest cutoff at which every excitation sector touched by the support
    /// is complete (`M + 1` states per mode), and never below the current one.
    pub fn closure_cutoff(&self) -> FockCutoff {
        let needed = self.max_excitation() + 1;
        FockCutoff(needed.max(self.cutoff().get()))
    }

    /// The same state in a space with a larger (or equal) cutoff.
    pub fn embed(&self, cutoff: FockCutoff) -> Result<Self, FockError> {
        if cutoff < self.cutoff() {
            return Err(FockError::CannotEmbed {
                from: self.cutoff().get(),
                to: cutoff.get(),
            });
        }
        let space = self.space.with_cutoff(cutoff)?;
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&i, &v)| {
                (
                    self.space
                        .reindex(i, &space)
                        .expect("embedding preserves labels"),
                    v,
                )
            })
            .collect();
        Ok(Self { space, coeffs })
    }

    /// Restriction to a (usually smaller) cutoff; labels that do not fit are dropped.
    pub fn project(&self, cutoff: FockCutoff) -> Result<Self, FockError> {
        let space = self.space.with_cutoff(cutoff)?;
        let coeffs = self
            .coeffs
            .iter()
            .filter_map(|(&i, &v)| self.space.reindex(i, &space).map(|j| (j, v)))
            .collect();
        Ok(Self { space, coeffs })
    }

    /// Product state `|ρ_1⟩ ⊗ |ρ_2⟩` with the modes of `self` first.
    pub fn tensor(&self, other: &Self) -> Result<Self, FockError> {
        if self.cutoff() != other.cutoff() {
            return Err(FockError::SpaceMismatch {
                left: self.space,
                right: other.space,
            });
        }
        let space = Space::new(self.cutoff(), self.modes() + other.modes())?;
        let mut out = Self::zero(space);
        for (a, x) in self.iter() {
            for (b, y) in other.iter() {
                let mut m = a.m.clone();
                m.extend_from_slice(&b.m);
                let mut n = a.n.clone();
                n.extend_from_slice(&b.n);
                out.add_at(space.encode(&DoubledIndex { m, n })?, x * y);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            space: self.space,
            coeffs: self.coeffs.iter().map(|(&i, &v)| (i, v * factor)).collect(),
        }
    }

    /// `self + factor·other`.
    pub fn add_scaled(&self, factor: Complex64, other: &Self) -> Result<Self, FockError> {
        self.space.check_same(&other.space)?;
        let mut out = self.clone();
        for (i, v) in other.iter_raw() {
            out.add_at(i, v * factor);
        }
        Ok(out)
    }

    /// Max entrywise difference. States with different cutoffs are compared
    /// label by label over the union of their supports.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, FockError> {
        if self.modes() != other.modes() {
            return Err(FockError::SpaceMismatch {
                left: self.space,
                right: other.space,
            });
        }
        let cutoff = self.cutoff().max(other.cutoff());
        let a = self.embed(cutoff)?;
        let b = other.embed(cutoff)?;
        let mut worst = 0.0_f64;
        for (i, v) in a.iter_raw() {
            worst = worst.max((v - b.amplitude(i)).norm());
        }
        for (i, v) in b.iter_raw() {
            if !a.coeffs.contains_key(&i) {
                worst = worst.max(v.norm());
            }
        }
        Ok(worst)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .values()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `|I⟩ = Σ |n, ñ⟩`: unit coefficient on every label with `m = n`.
pub fn identity_vector(cutoff: FockCutoff, modes: usize) -> Result<LiouvilleState, FockError> {
    let space = Space::new(cutoff, modes)?;
    let c = cutoff.get();
    let one = Complex64::new(1.0, 0.0);
    let mut state = LiouvilleState::zero(space);
    let count = c.pow(modes as u32);
    for k in 0..count {
        let mut digits = vec![0; modes];
        let mut rest = k;
        for slot in digits.iter_mut().rev() {
            *slot = rest % c;
            rest /= c;
        }
        let label = DoubledIndex {
            m: digits.clone(),
            n: digits,
        };
        state.coeffs.insert(space.encode(&label)?, one);
    }
    Ok(state)
}

/// Sparse complex matrix on a doubled space, stored by column with rows
/// ascending. Exact zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    space: Space,
    cols: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOperator {
    pub fn zero(space: Space) -> Self {
        Self {
            space,
            cols: vec![Vec::new(); space.dim],
        }
    }

    pub fn identity(space: Space) -> Self {
        Self::diagonal(space, |_| Complex64::new(1.0, 0.0))
    }

    /// Diagonal operator with entry `f(index)`.
    pub fn diagonal(space: Space, f: impl Fn(usize) -> Complex64) -> Self {
        let cols = (0..space.dim)
            .map(|i| {
                let v = f(i);
                if v.is_zero() {
                    Vec::new()
                } else {
                    vec![(i, v)]
                }
            })
            .collect();
        Self { space, cols }
    }

    /// Build from `(row, col, value)` triplets over flat indices; duplicates add.
    pub fn from_triplets<I>(space: Space, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut acc: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); space.dim];
        for (row, col, v) in triplets {
            assert!(
                row < space.dim && col < space.dim,
                "triplet outside the space"
            );
            *acc[col].entry(row).or_insert_with(Complex64::zero) += v;
        }
        Self::from_columns(space, acc)
    }

    fn from_columns(space: Space, acc: Vec<BTreeMap<usize, Complex64>>) -> Self {
        let cols = acc
            .into_iter()
            .map(|c| c.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        Self { space, cols }
    }

    #[inline]
    pub fn space(&self) -> Space {
        self.space
    }

    /// Stored entries of column `col`, rows ascending.
    #[inline]
    pub fn column(&self, col: usize) -> &[(usize, Complex64)] {
        &self.cols[col]
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.cols[col]
            .binary_search_by_key(&row, |&(r, _)| r)
            .map(|k| self.cols[col][k].1)
            .unwrap_or_else(|_| Complex64::zero())
    }

    /// `⟨row| A |col⟩` by basis label.
    pub fn element(&self, row: &DoubledIndex, col: &DoubledIndex) -> Result<Complex64, FockError> {
        Ok(self.entry(self.space.encode(row)?, self.space.encode(col)?))
    }

    /// `(row, col, value)` over flat indices in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(c, col)| col.iter().map(move |&(r, v)| (r, c, v)))
    }

    pub fn iter_labeled(
        &self,
    ) -> impl Iterator<Item = (DoubledIndex, DoubledIndex, Complex64)> + '_ {
        self.iter()
            .map(|(r, c, v)| (self.space.decode(r), self.space.decode(c), v))
    }

    pub fn is_finite(&self) -> bool {
        self.iter()
            .all(|(_, _, v)| v.re.is_finite() && v.im.is_finite())
    }

    /// `A|ρ⟩`.
    pub fn apply(&self, state: &LiouvilleState) -> Result<LiouvilleState, FockError> {
        self.space.check_same(&state.space)?;
        let mut out = BTreeMap::new();
        for (j, x) in state.iter_raw() {
            for &(i, a) in &self.cols[j] {
                *out.entry(i).or_insert_with(Complex64::zero) += a * x;
            }
        }
        Ok(LiouvilleState::from_map(self.space, out))
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        self.space
            .check_same(&rhs.space)
            .expect("operator spaces differ");
        let acc = rhs
            .cols
            .iter()
            .map(|col| {
                let mut out = BTreeMap::new();
                for &(k, b) in col {
                    for &(i, a) in &self.cols[k] {
                        *out.entry(i).or_insert_with(Complex64::zero) += a * b;
                    }
                }
                out
            })
            .collect();
        Self::from_columns(self.space, acc)
    }

    /// `[self, rhs]`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.compose(rhs) - &rhs.compose(self)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        self.space
            .check_same(&rhs.space)
            .expect("operator spaces differ");
        let zero = Complex64::zero();
        let cols = self
            .cols
            .iter()
            .zip(&rhs.cols)
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len().max(b.len()));
                let (mut p, mut q) = (0, 0);
                while p < a.len() || q < b.len() {
                    let (row, v) = match (a.get(p), b.get(q)) {
                        (Some(&(ra, va)), Some(&(rb, vb))) if ra == rb => {
                            p += 1;
                            q += 1;
                            (ra, f(va, vb))
                        }
                        (Some(&(ra, va)), Some(&(rb, _))) if ra < rb => {
                            p += 1;
                            (ra, f(va, zero))
                        }
                        (Some(_), Some(&(rb, vb))) => {
                            q += 1;
                            (rb, f(zero, vb))
                        }
                        (Some(&(ra, va)), None) => {
                            p += 1;
                            (ra, f(va, zero))
                        }
                        (None, Some(&(rb, vb))) => {
                            q += 1;
                            (rb, f(zero, vb))
                        }
                        (None, None) => unreachable!(),
                    };
                    if !v.is_zero() {
                        out.push((row, v));
                    }
                }
                out
            })
            .collect();
        Self {
            space: self.space,
            cols,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        if factor.is_zero() {
            return Self::zero(self.space);
        }
        Self {
            space: self.space,
            cols: self
                .cols
                .iter()
                .map(|c| c.iter().map(|&(r, v)| (r, v * factor)).collect())
                .collect(),
        }
    }

    /// Hermitian adjoint.
    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.space, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    /// Tilde conjugation: swap the physical and tilde halves of every label
    /// and conjugate every value (`a ↔ ã`, `c ↦ c*`).
    pub fn tilde(&self) -> Self {
        let s = self.space;
        Self::from_triplets(
            s,
            self.iter()
                .map(|(r, c, v)| (s.swap_halves(r), s.swap_halves(c), v.conj())),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    /// Max entrywise difference over columns selected by `keep_col`.
    pub fn max_abs_diff_where(&self, other: &Self, keep_col: impl Fn(usize) -> bool) -> f64 {
        let diff = self - other;
        diff.cols
            .iter()
            .enumerate()
            .filter(|(c, _)| keep_col(*c))
            .flat_map(|(_, col)| col.iter().map(|(_, v)| v.norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.max_abs_diff_where(other, |_| true)
    }

    /// Column-wise sums of the rows with `m = n`: the components of `⟨I|A`.
    pub fn trace_row(&self) -> Vec<Complex64> {
        self.cols
            .iter()
            .map(|col| {
                col.iter()
                    .filter(|(r, _)| self.space.is_diagonal(*r))
                    .map(|&(_, v)| v)
                    .sum()
            })
            .collect()
    }
}

impl Add for &SparseOperator {
    type Output = SparseOperator;

    fn add(self, rhs: Self) -> SparseOperator {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SparseOperator {
    type Output = SparseOperator;

    fn sub(self, rhs: Self) -> SparseOperator {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &SparseOperator {
    type Output = SparseOperator;

    fn mul(self, rhs: Self) -> SparseOperator {
        self.compose(rhs)
    }
}

impl Mul<&SparseOperator> for Complex64 {
    type Output = SparseOperator;

    fn mul(self, rhs: &SparseOperator) -> SparseOperator {
        rhs.scale(self)
    }
}

impl Mul<&SparseOperator> for f64 {
    type Output = SparseOperator;

    fn mul(self, rhs: &SparseOperator) -> SparseOperator {
        rhs.scale(Complex64::new(self, 0.0))
    }
}

impl Neg for &SparseOperator {
    type Output = SparseOperator;

    fn neg(self) -> SparseOperator {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// `⟨I| A |ρ⟩ = Tr(Aρ)`.
pub fn expectation(op: &SparseOperator, state: &LiouvilleState) -> Result<Complex64, FockError> {
    op.space.check_same(&state.space)?;
    let mut acc = Complex64::zero();
    for (j, x) in state.iter_raw() {
        for &(i, a) in &op.cols[j] {
            if op.space.is_diagonal(i) {
                acc += a * x;
            }
        }
    }
    Ok(acc)
}

/// `tilde_conjugate(A)`; see [`SparseOperator::tilde`].
pub fn tilde_conjugate(op: &SparseOperator) -> SparseOperator {
    op.tilde()
}

fn ladder(
    space: &Space,
    mode: usize,
    register: Register,
    raise: bool,
) -> Result<SparseOperator, FockError> {
    if mode >= space.modes {
        return Err(FockError::ModeOutOfRange {
            mode,
            modes: space.modes,
        });
    }
    let c = space.cutoff.get();
    let triplets = (0..space.dim).filter_map(|col| {
        let occ = space.occupation(col, mode, register);
        if raise {
            // top state is annihilated
            (occ + 1 < c).then(|| {
                let row = space.with_occupation(col, mode, register, occ + 1);
                (row, col, Complex64::new(((occ + 1) as f64).sqrt(), 0.0))
            })
        } else {
            (occ > 0).then(|| {
                let row = space.with_occupation(col, mode, register, occ - 1);
                (row, col, Complex64::new((occ as f64).sqrt(), 0.0))
            })
        }
    });
    Ok(SparseOperator::from_triplets(*space, triplets))
}

/// `a_i` (physical) or `ã_i` (tilde).
pub fn lowering(
    space: &Space,
    mode: usize,
    register: Register,
) -> Result<SparseOperator, FockError> {
    ladder(space, mode, register, false)
}

/// `a_i†` (physical) or `ã_i†` (tilde); annihilates the top occupation.
pub fn raising(
    space: &Space,
    mode: usize,
    register: Register,
) -> Result<SparseOperator, FockError> {
    ladder(space, mode, register, true)
}

/// Diagonal occupation operator `a_i†a_i` or `ã_i†ã_i`.
pub fn number(space: &Space, mode: usize, register: Register) -> Result<SparseOperator, FockError> {
    if mode >= space.modes {
        return Err(FockError::ModeOutOfRange {
            mode,
            modes: space.modes,
        });
    }
    Ok(SparseOperator::diagonal(*space, |i| {
        Complex64::new(space.occupation(i, mode, register) as f64, 0.0)
    }))
}

/// `a, a†, ã, ã†` for one mode.
#[derive(Debug, Clone)]
pub struct LadderSet {
    pub a: SparseOperator,
    pub a_dag: SparseOperator,
    pub a_tilde: SparseOperator,
    pub a_tilde_dag: SparseOperator,
}

impl LadderSet {
    pub fn new(space: &Space, mode: usize) -> Result<Self, FockError> {
        Ok(Self {
            a: lowering(space, mode, Register::Physical)?,
            a_dag: raising(space, mode, Register::Physical)?,
            a_tilde: lowering(space, mode, Register::Tilde)?,
            a_tilde_dag: raising(space, mode, Register::Tilde)?,
        })
    }
}

/// Ladder operators of every mode.
pub fn ladder_operators(space: &Space) -> Vec<LadderSet> {
    (0..space.modes)
        .map(|i| LadderSet::new(space, i).expect("mode in range"))
        .collect()
}

/// An initial state together with the weight its truncation discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub state: LiouvilleState,
    pub neglected_weight: f64,
}

impl Prepared {
    /// The discarded weight exceeds [`NEGLIGIBLE_WEIGHT`].
    pub fn is_truncated(&self) -> bool {
        self.neglected_weight > NEGLIGIBLE_WEIGHT
    }
}

fn pure_state(space: Space, psi: &[Complex64]) -> LiouvilleState {
    let mut coeffs = BTreeMap::new();
    let c = space.cutoff.get();
    for (m, &x) in psi.iter().enumerate() {
        for (n, &y) in psi.iter().enumerate() {
            let v = x * y.conj();
            if !v.is_zero() {
                coeffs.insert(m * c + n, v);
            }
        }
    }
    LiouvilleState::from_map(space, coeffs)
}

/// Fock amplitudes `e^{−|α|²/2} αᵐ / √m!` for `m < cutoff`.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: FockCutoff) -> Vec<Complex64> {
    let mut psi = Vec::with_capacity(cutoff.get());
    let mut amp = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for m in 0..cutoff.get() {
        if m > 0 {
            amp = amp * alpha / (m as f64).sqrt();
        }
        psi.push(amp);
    }
    psi
}

/// Poisson tail `Σ_{m ≥ c} e^{−x} xᵐ/m!`.
fn poisson_tail(x: f64, c: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut p = (-x).exp();
    for m in 1..=c {
        p *= x / m as f64;
    }
    let mut tail = 0.0;
    let mut m = c;
    loop {
        tail += p;
        m += 1;
        p *= x / m as f64;
        if (m as f64) > x && p <= tail * 1e-18 {
            break;
        }
        if m > c + 100_000 {
            break;
        }
    }
    tail
}

/// `ρ = |α⟩⟨α|`: `ρ_{m,n} = e^{−|α|²} αᵐ (α*)ⁿ / √(m! n!)`.
pub fn coherent_state_rho(alpha: Complex64, cutoff: FockCutoff) -> Result<Prepared, FockError> {
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(FockError::NonFinite);
    }
    let space = Space::single(cutoff);
    let psi = coherent_amplitudes(alpha, cutoff);
    Ok(Prepared {
        state: pure_state(space, &psi),
        neglected_weight: poisson_tail(alpha.norm_sqr(), cutoff.get()),
    })
}

/// Thermal state with mean occupation `n̄`: diagonal `n̄ᵐ / (1 + n̄)^{m+1}`.
pub fn thermal_state_rho(nbar: f64, cutoff: FockCutoff) -> Result<Prepared, FockError> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(FockError::NonFinite);
    }
    let space = Space::single(cutoff);
    let c = cutoff.get();
    let ratio = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    let mut coeffs = BTreeMap::new();
    for m in 0..c {
        if p != 0.0 {
            coeffs.insert(m * c + m, Complex64::new(p, 0.0));
        }
        p *= ratio;
    }
    Ok(Prepared {
        state: LiouvilleState::from_map(space, coeffs),
        neglected_weight: ratio.powi(c as i32),
    })
}

/// `|k⟩⟨k|`.
pub fn number_state_rho(k: usize, cutoff: FockCutoff) -> Result<Prepared, FockError> {
    let space = Space::single(cutoff);
    Ok(Prepared {
        state: LiouvilleState::basis(space, &DoubledIndex::single(k, k))?,
        neglected_weight: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cut(n: usize) -> FockCutoff {
        FockCutoff::new(n).unwrap()
    }

    #[test]
    fn cutoff_must_be_positive() {
        assert_eq!(FockCutoff::new(0), Err(FockError::InvalidCutoff));
        assert!(Space::new(cut(3), 0).is_err());
        assert!(Space::new(cut(1 << 20), 8).is_err());
    }

    #[test]
    fn encode_decode_layout() {
        let s = Space::new(cut(3), 2).unwrap();
        let label = DoubledIndex::new(vec![2, 1], vec![0, 2]);
        let i = s.encode(&label).unwrap();
        assert_eq!(i, ((2 * 3 + 1) * 3 + 0) * 3 + 2);
        assert_eq!(s.decode(i), label);
        assert_eq!(s.occupation(i, 1, Register::Physical), 1);
        assert_eq!(s.occupation(i, 1, Register::Tilde), 2);
        assert_eq!(
            s.decode(s.swap_halves(i)),
            DoubledIndex::new(vec![0, 2], vec![2, 1])
        );
        assert!(s
            .encode(&DoubledIndex::new(vec![3, 0], vec![0, 0]))
            .is_err());
        let single = Space::single(cut(5));
        assert_eq!(single.encode(&DoubledIndex::single(3, 1)).unwrap(), 16);
    }

    #[test]
    fn identity_vector_examples() {
        let v = identity_vector(cut(2), 1).unwrap();
        let entries: Vec<_> = v.iter().collect();
        assert_eq!(
            entries,
            vec![
                (DoubledIndex::single(0, 0), c(1.0, 0.0)),
                (DoubledIndex::single(1, 1), c(1.0, 0.0))
            ]
        );
        let v = identity_vector(cut(1), 1).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.get(&DoubledIndex::single(0, 0)), c(1.0, 0.0));
        let v = identity_vector(cut(2), 2).unwrap();
        assert_eq!(v.len(), 4);
        for (label, x) in v.iter() {
            assert_eq!(label.m, label.n);
            assert_eq!(x, c(1.0, 0.0));
        }
    }

    #[test]
    fn ladder_matrix_elements() {
        let s = Space::single(cut(4));
        let l = LadderSet::new(&s, 0).unwrap();
        let one = LiouvilleState::basis(s, &DoubledIndex::single(1, 0)).unwrap();
        let out = l.a.apply(&one).unwrap();
        assert_eq!(out.get(&DoubledIndex::single(0, 0)), c(1.0, 0.0));

        let x = LiouvilleState::basis(s, &DoubledIndex::single(0, 1)).unwrap();
        let out = l.a_tilde_dag.apply(&x).unwrap();
        assert!((out.get(&DoubledIndex::single(0, 2)) - c(2f64.sqrt(), 0.0)).norm() < 1e-15);

        let top = LiouvilleState::basis(s, &DoubledIndex::single(3, 2)).unwrap();
        let out = l.a_dag.apply(&top).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn tilde_rules() {
        let s = Space::single(cut(5));
        let l = LadderSet::new(&s, 0).unwrap();
        assert_eq!(l.a.tilde(), l.a_tilde);
        assert_eq!(l.a_dag.tilde(), l.a_tilde_dag);
        let x = c(0.0, 1.0) * &(&l.a_dag * &l.a);
        let expected = c(0.0, -1.0) * &(&l.a_tilde_dag * &l.a_tilde);
        assert!(x.tilde().max_abs_diff(&expected) < 1e-15);
        let y = &(c(0.3, -0.7) * &l.a_dag) + &(&l.a_tilde * &l.a);
        assert_eq!(y.tilde().tilde(), y);
    }

    #[test]
    fn tilde_and_physical_commute_exactly() {
        let s = Space::new(cut(4), 2).unwrap();
        let ls = ladder_operators(&s);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(ls[i].a.commutator(&ls[j].a_tilde).nnz(), 0);
                assert_eq!(ls[i].a.commutator(&ls[j].a_tilde_dag).nnz(), 0);
                if i != j {
                    assert_eq!(ls[i].a.commutator(&ls[j].a_dag).nnz(), 0);
                }
            }
        }
    }

    #[test]
    fn expectation_and_trace() {
        let cutoff = cut(40);
        let s = Space::single(cutoff);
        let rho = coherent_state_rho(c(1.0, 0.0), cutoff).unwrap();
        assert!(!rho.is_truncated());
        let n = number(&s, 0, Register::Physical).unwrap();
        let mean = expectation(&n, &rho.state).unwrap();
        // Σ m e^{-1}/m! over m < 40
        let mut oracle = 0.0;
        let mut p = (-1.0f64).exp();
        for m in 0..40 {
            if m > 0 {
                p /= m as f64;
            }
            oracle += m as f64 * p;
        }
        assert!((mean.re - oracle).abs() < 1e-14);
        assert!((mean.re - 1.0).abs() < 1e-12);
        assert!((rho.state.trace().re - 1.0).abs() < 1e-12);
        assert_eq!(rho.state.hermiticity_defect(), 0.0);
        assert!(
            (rho.state.get(&DoubledIndex::single(0, 0)).re - 0.36787944117144233).abs() < 1e-15
        );

        let id = SparseOperator::identity(s);
        assert_eq!(expectation(&id, &rho.state).unwrap(), rho.state.trace());

        let k3 = number_state_rho(3, cut(6)).unwrap().state;
        let n6 = number(&Space::single(cut(6)), 0, Register::Physical).unwrap();
        assert_eq!(expectation(&n6, &k3).unwrap(), c(3.0, 0.0));
        assert_eq!(k3.trace(), c(1.0, 0.0));
        assert!(expectation(&n6, &rho.state).is_err());
    }

    #[test]
    fn initial_state_edge_cases() {
        let vac = coherent_state_rho(c(0.0, 0.0), cut(5)).unwrap();
        assert_eq!(
            vac.state.iter().collect::<Vec<_>>(),
            vec![(DoubledIndex::single(0, 0), c(1.0, 0.0))]
        );
        let th = thermal_state_rho(0.0, cut(5)).unwrap();
        assert_eq!(
            th.state.iter().collect::<Vec<_>>(),
            vec![(DoubledIndex::single(0, 0), c(1.0, 0.0))]
        );
        assert!(number_state_rho(5, cut(5)).is_err());

        let small = coherent_state_rho(c(2.0, 0.0), cut(5)).unwrap();
        assert!(small.is_truncated());
        assert!((small.neglected_weight - (1.0 - small.state.trace().re)).abs() < 1e-14);
        let th = thermal_state_rho(2.0, cut(10)).unwrap();
        assert!((th.neglected_weight - (1.0 - th.state.trace().re)).abs() < 1e-14);
    }

    #[test]
    fn embed_project_tensor() {
        let a = coherent_state_rho(c(0.3, 0.1), cut(3)).unwrap().state;
        let big = a.embed(cut(6)).unwrap();
        assert_eq!(big.len(), a.len());
        assert_eq!(big.project(cut(3)).unwrap(), a);
        assert!(a.embed(cut(2)).is_err());
        assert_eq!(a.max_abs_diff(&big).unwrap(), 0.0);
        assert_eq!(a.closure_cutoff(), cut(5));

        let b = number_state_rho(1, cut(3)).unwrap().state;
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.modes(), 2);
        assert_eq!(
            ab.get(&DoubledIndex::new(vec![1, 1], vec![0, 1])),
            a.get(&DoubledIndex::single(1, 0))
        );
        assert!((ab.trace() - a.trace()).norm() < 1e-15);
    }
}
