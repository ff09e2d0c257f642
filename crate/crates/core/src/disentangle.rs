//! Gauss factorization of the SU(2) exponential
//!
//! ```text
//! exp(γ₊𝒮₊ + γ₃𝒮₃ + γ₋𝒮₋) = exp(Γ₊𝒮₊) · exp(Γ₃𝒮₃) · exp(Γ₋𝒮₋)
//! ```
//!
//! with `[𝒮₃, 𝒮±] = ±𝒮±`, `[𝒮₊, 𝒮₋] = 2𝒮₃`. The identity is a group identity,
//! so it holds in every representation once it holds in the fundamental one,
//! where `𝒮₃ = diag(½, −½)`, `𝒮₊ = [[0,1],[0,0]]`, `𝒮₋ = [[0,0],[1,0]]`.
//! There the exponent `A` squares to `λ²·𝟙` with
//!
//! ```text
//! λ² = γ₃²/4 + γ₊γ₋
//! exp(A) = cosh λ · 𝟙 + (sinh λ / λ) · A
//! ```
//!
//! and matching against the ordered product gives
//!
//! ```text
//! e^{−Γ₃/2} = cosh λ − (γ₃/2) sinh λ / λ
//! Γ± = γ± (sinh λ / λ) · e^{Γ₃/2}
//! ```
//!
//! `cosh λ` and `sinh λ / λ` are even in `λ`, so the root is never chosen:
//! both are evaluated from `λ²` (Taylor series near zero, `e^{−2λ}`-scaled
//! closed forms elsewhere). `Γ₃` itself is never formed; consumers need only
//! integer powers of `e^{Γ₃/2}`, which avoids every logarithm branch.
//!
//! The frequently quoted form `λ² = γ₃² + γ₊γ₋`,
//! `Γ₃ = ln(λ / (λ cosh λ − γ₃ sinh λ))` is the same factorization for a
//! diagonal generator normalized like `σ_z = 2𝒮₃`; it is available as
//! [`sigma_z_normalized_factors`] and does not satisfy the identity above.

use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::algebra::SystemConfig;

/// Below this `|λ²|` the even functions are summed as power series.
const SERIES_RADIUS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DisentangleError {
    /// The lower-right entry of the fundamental exponential vanishes: no
    /// Gauss decomposition exists at this parameter point.
    #[error("Gauss factorization is singular at these coefficients")]
    Singular,
    #[error("non-finite coefficients")]
    NonFinite,
}

/// `(γ₊, γ₃, γ₋)` of the exponent, already multiplied by time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Coefficients {
    pub gamma_plus: Complex64,
    pub gamma_minus: Complex64,
    pub gamma_3: Complex64,
}

impl Su2Coefficients {
    pub fn new(gamma_plus: Complex64, gamma_3: Complex64, gamma_minus: Complex64) -> Self {
        Self {
            gamma_plus,
            gamma_minus,
            gamma_3,
        }
    }

    pub fn zero() -> Self {
        Self::new(Complex64::zero(), Complex64::zero(), Complex64::zero())
    }

    /// `γ₃²/4 + γ₊γ₋`.
    pub fn lambda_squared(&self) -> Complex64 {
        self.gamma_3 * self.gamma_3 / 4.0 + self.gamma_plus * self.gamma_minus
    }

    pub fn is_finite(&self) -> bool {
        [self.gamma_plus, self.gamma_minus, self.gamma_3]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// `(Γ₊, e^{Γ₃/2}, Γ₋)` and the principal `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussFactors {
    pub gamma_plus: Complex64,
    pub gamma_minus: Complex64,
    /// `e^{Γ₃/2}`.
    pub gamma_3_half_exp: Complex64,
    pub lambda: Complex64,
}

impl GaussFactors {
    pub fn identity() -> Self {
        Self {
            gamma_plus: Complex64::zero(),
            gamma_minus: Complex64::zero(),
            gamma_3_half_exp: Complex64::one(),
            lambda: Complex64::zero(),
        }
    }

    /// `exp(Γ₊𝒮₊)·exp(Γ₃𝒮₃)·exp(Γ₋𝒮₋)` in the fundamental representation.
    pub fn fundamental_product(&self) -> Mat2 {
        let h = self.gamma_3_half_exp;
        let hinv = h.inv();
        let (p, m) = (self.gamma_plus, self.gamma_minus);
        [[h + p * m * hinv, p * hinv], [m * hinv, hinv]]
    }
}

pub type Mat2 = [[Complex64; 2]; 2];

/// `γ₊ = γ₋ = γ_i t` and `γ₃ = −(i s ω_i + γ_i + i s Σ_j χ_ij M_j) t` for mode
/// `mode` in the joint excitation sector `excitations = (M_1, …, M_N)`, where
/// `s` is the configured convention scale.
pub fn sector_coefficients(
    config: &SystemConfig,
    mode: usize,
    excitations: &[usize],
    t: f64,
) -> Su2Coefficients {
    assert_eq!(excitations.len(), config.modes(), "one excitation per mode");
    let scale = config.convention().scale();
    let kerr: f64 = excitations
        .iter()
        .enumerate()
        .map(|(j, &m)| config.chi(mode, j) * m as f64)
        .sum();
    let g = Complex64::new(config.gamma(mode) * t, 0.0);
    let gamma_3 = -Complex64::new(config.gamma(mode), scale * (config.omega(mode) + kerr)) * t;
    Su2Coefficients::new(g, gamma_3, g)
}

/// `(cosh λ, sinh λ / λ)` as functions of `λ²`.
fn even_functions(lambda_sq: Complex64) -> (Complex64, Complex64, Complex64) {
    let lambda = lambda_sq.sqrt();
    if lambda_sq.norm() < SERIES_RADIUS {
        let mut cosh = Complex64::zero();
        let mut sinhc = Complex64::zero();
        let mut term = Complex64::one();
        for k in 0..8u32 {
            // term = z^k / (2k)!
            cosh += term;
            sinhc += term / (2 * k + 1) as f64;
            term = term * lambda_sq / ((2 * k + 1) * (2 * k + 2)) as f64;
        }
        (cosh, sinhc, lambda)
    } else {
        (lambda.cosh(), lambda.sinh() / lambda, lambda)
    }
}

/// The fundamental-representation exponential `exp(γ₊𝒮₊ + γ₃𝒮₃ + γ₋𝒮₋)`.
pub fn fundamental_exp(c: &Su2Coefficients) -> Mat2 {
    let (cosh, sinhc, _) = even_functions(c.lambda_squared());
    let half = c.gamma_3 / 2.0;
    [
        [cosh + half * sinhc, c.gamma_plus * sinhc],
        [c.gamma_minus * sinhc, cosh - half * sinhc],
    ]
}

/// Factor `exp(γ₊𝒮₊ + γ₃𝒮₃ + γ₋𝒮₋)`.
pub fn gauss_factorize(c: &Su2Coefficients) -> Result<GaussFactors, DisentangleError> {
    if !c.is_finite() {
        return Err(DisentangleError::NonFinite);
    }
    let lambda_sq = c.lambda_squared();
    let half = c.gamma_3 / 2.0;
    let lambda = lambda_sq.sqrt();
    let (gamma_3_half_exp, sinhc_over_e22) = if lambda_sq.norm() < SERIES_RADIUS {
        let (cosh, sinhc, _) = even_functions(lambda_sq);
        let e22 = cosh - half * sinhc;
        if e22.is_zero() {
            return Err(DisentangleError::Singular);
        }
        (e22.inv(), sinhc / e22)
    } else {
        // Re λ ≥ 0 for the principal root, so q = e^{−2λ} is bounded and
        // cosh λ = e^λ(1+q)/2, sinh λ = e^λ(1−q)/2 never overflow the ratios.
        let q = (-2.0 * lambda).exp();
        let d = (Complex64::one() + q) - half * (Complex64::one() - q) / lambda;
        if d.is_zero() {
            return Err(DisentangleError::Singular);
        }
        (
            2.0 * (-lambda).exp() / d,
            (Complex64::one() - q) / (lambda * d),
        )
    };
    let factors = GaussFactors {
        gamma_plus: c.gamma_plus * sinhc_over_e22,
        gamma_minus: c.gamma_minus * sinhc_over_e22,
        gamma_3_half_exp,
        lambda,
    };
    let finite = [
        factors.gamma_plus,
        factors.gamma_minus,
        factors.gamma_3_half_exp,
    ]
    .iter()
    .all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite || factors.gamma_3_half_exp.is_zero() {
        return Err(DisentangleError::Singular);
    }
    Ok(factors)
}

/// Max-norm difference between `exp(γ₊𝒮₊ + γ₃𝒮₃ + γ₋𝒮₋)` and the ordered
/// product built from `f`, in the fundamental representation.
pub fn fundamental_rep_defect(c: &Su2Coefficients, f: &GaussFactors) -> f64 {
    let lhs = fundamental_exp(c);
    let rhs = f.fundamental_product();
    let mut worst = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((lhs[i][j] - rhs[i][j]).norm());
        }
    }
    worst
}

/// Factors in the `σ_z` normalization: `λ'² = γ₃² + γ₊γ₋`,
/// `Γ± = γ± sinh λ' / (λ' cosh λ' − γ₃ sinh λ')`,
/// `e^{Γ₃'} = λ' / (λ' cosh λ' − γ₃ sinh λ')`. These satisfy
/// `exp(γ₊𝒮₊ + 2γ₃𝒮₃ + γ₋𝒮₋) = exp(Γ₊𝒮₊) exp(2Γ₃'𝒮₃) exp(Γ₋𝒮₋)`, i.e. the
/// returned `gamma_3_half_exp` holds `e^{Γ₃'}`.
pub fn sigma_z_normalized_factors(c: &Su2Coefficients) -> Result<GaussFactors, DisentangleError> {
    let doubled = Su2Coefficients::new(c.gamma_plus, 2.0 * c.gamma_3, c.gamma_minus);
    let mut f = gauss_factorize(&doubled)?;
    f.lambda = (c.gamma_3 * c.gamma_3 + c.gamma_plus * c.gamma_minus).sqrt();
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockCutoff;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    type M = [[Complex64; 2]; 2];

    fn mul(a: &M, b: &M) -> M {
        let mut out = [[Complex64::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    /// Scaling-and-squaring Taylor exponential; independent of the closed form.
    fn brute_exp(a: &M) -> M {
        let norm = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        let mut s = 0;
        while norm / f64::from(1u32 << s.min(30)) > 0.25 && s < 60 {
            s += 1;
        }
        let scale = 0.5f64.powi(s);
        let x: M = [
            [a[0][0] * scale, a[0][1] * scale],
            [a[1][0] * scale, a[1][1] * scale],
        ];
        let mut sum: M = [
            [Complex64::one(), Complex64::zero()],
            [Complex64::zero(), Complex64::one()],
        ];
        let mut term = sum;
        for k in 1..30 {
            term = mul(&term, &x);
            for row in term.iter_mut() {
                for z in row.iter_mut() {
                    *z /= k as f64;
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..s {
            sum = mul(&sum, &sum);
        }
        sum
    }

    fn exponent(co: &Su2Coefficients) -> M {
        [
            [co.gamma_3 / 2.0, co.gamma_plus],
            [co.gamma_minus, -co.gamma_3 / 2.0],
        ]
    }

    fn max_diff(a: &M, b: &M) -> f64 {
        let mut w = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                w = w.max((a[i][j] - b[i][j]).norm());
            }
        }
        w
    }

    #[test]
    fn coefficient_substitution() {
        let cut = FockCutoff::new(4).unwrap();
        let cfg = SystemConfig::single_mode(1.0, 0.0, 0.0, cut).unwrap();
        let co = sector_coefficients(&cfg, 0, &[3], 2.0);
        assert_eq!(
            co,
            Su2Coefficients::new(c(0.0, 0.0), c(0.0, -2.0), c(0.0, 0.0))
        );
        let co = sector_coefficients(&cfg, 0, &[3], 0.0);
        assert_eq!(co.gamma_3.norm(), 0.0);
        let cfg = SystemConfig::single_mode(1.0, 0.5, 0.3, cut).unwrap();
        let co = sector_coefficients(&cfg, 0, &[2], 1.0);
        assert!((co.gamma_plus - c(0.3, 0.0)).norm() < 1e-15);
        assert!((co.gamma_minus - c(0.3, 0.0)).norm() < 1e-15);
        assert!((co.gamma_3 - c(-0.3, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn trivial_factorizations() {
        let f = gauss_factorize(&Su2Coefficients::zero()).unwrap();
        assert_eq!(f.gamma_plus, Complex64::zero());
        assert!((f.gamma_3_half_exp - Complex64::one()).norm() < 1e-15);
        let g3 = c(-0.4, 1.3);
        let f = gauss_factorize(&Su2Coefficients::new(
            Complex64::zero(),
            g3,
            Complex64::zero(),
        ))
        .unwrap();
        assert_eq!(f.gamma_plus, Complex64::zero());
        assert!((f.gamma_3_half_exp - (g3 / 2.0).exp()).norm() < 1e-14);
        assert_eq!(
            fundamental_rep_defect(&Su2Coefficients::zero(), &GaussFactors::identity()),
            0.0
        );
    }

    #[test]
    fn closed_form_matches_brute_force_exponential() {
        let co = Su2Coefficients::new(c(0.3, 0.0), c(-0.3, -2.0), c(0.3, 0.0));
        let oracle = brute_exp(&exponent(&co));
        assert!(max_diff(&fundamental_exp(&co), &oracle) < 1e-13);
        let f = gauss_factorize(&co).unwrap();
        // factors read from the oracle's entries
        let e22 = oracle[1][1];
        assert!((f.gamma_3_half_exp - e22.inv()).norm() < 1e-13);
        assert!((f.gamma_plus - oracle[0][1] / e22).norm() < 1e-13);
        assert!((f.gamma_minus - oracle[1][0] / e22).norm() < 1e-13);
        assert!(max_diff(&f.fundamental_product(), &oracle) < 1e-13);
    }

    #[test]
    fn perturbed_factors_fail() {
        let co = Su2Coefficients::new(c(0.3, 0.0), c(-0.3, -2.0), c(0.3, 0.0));
        let mut f = gauss_factorize(&co).unwrap();
        f.gamma_plus += 1e-3;
        assert!(fundamental_rep_defect(&co, &f) >= 1e-4);
    }

    #[test]
    fn singular_point_is_reported() {
        // λ² = −π²/4·… choose γ± = 0 and γ₃ with cosh λ − (γ₃/2)·sinhc = e^{−γ₃/2} ≠ 0:
        // never singular; instead pick γ₃ = 0, γ₊γ₋ = −π²/4 so that cosh λ = 0.
        let g = c(0.0, core::f64::consts::FRAC_PI_2);
        let co = Su2Coefficients::new(g, Complex64::zero(), g);
        match gauss_factorize(&co) {
            Err(DisentangleError::Singular) => {}
            Ok(f) => assert!(
                f.gamma_plus.norm() > 1e12,
                "near-singular point should blow up"
            ),
            Err(e) => panic!("unexpected {e}"),
        }
        let bad = Su2Coefficients::new(c(f64::NAN, 0.0), Complex64::zero(), Complex64::zero());
        assert_eq!(gauss_factorize(&bad), Err(DisentangleError::NonFinite));
    }

    #[test]
    fn root_sign_is_immaterial() {
        let co = Su2Coefficients::new(c(0.7, -0.2), c(0.4, 1.1), c(-0.3, 0.5));
        let z = co.lambda_squared();
        let l = z.sqrt();
        for lam in [l, -l] {
            let cosh = lam.cosh();
            let sinhc = lam.sinh() / lam;
            let e22 = cosh - co.gamma_3 / 2.0 * sinhc;
            let f = gauss_factorize(&co).unwrap();
            assert!((f.gamma_3_half_exp - e22.inv()).norm() < 1e-13);
        }
    }

    #[test]
    fn near_degenerate_matches_series_limit() {
        // λ² = 1e−20: γ₃ = 0, γ± = 1e−10
        let co = Su2Coefficients::new(c(1e-10, 0.0), Complex64::zero(), c(1e-10, 0.0));
        let f = gauss_factorize(&co).unwrap();
        assert!((f.gamma_plus - c(1e-10, 0.0)).norm() < 1e-8);
        assert!((f.gamma_3_half_exp - Complex64::one()).norm() < 1e-8);
        // λ² ≈ 0 with γ₃ ≠ 0: limits Γ± = γ±/(1 − γ₃/2), e^{Γ₃/2} = 1/(1 − γ₃/2)
        let g3 = c(0.0, 2.0);
        let co = Su2Coefficients::new(Complex64::one(), g3, Complex64::one());
        assert!(co.lambda_squared().norm() < 1e-15);
        let f = gauss_factorize(&co).unwrap();
        let denom = Complex64::one() - g3 / 2.0;
        assert!((f.gamma_plus - denom.inv()).norm() < 1e-8);
        assert!((f.gamma_3_half_exp - denom.inv()).norm() < 1e-8);
        assert!(fundamental_rep_defect(&co, &f) < 1e-12);
    }

    #[test]
    fn unitary_parameters_give_unit_determinant() {
        // anti-hermitian exponent: γ₃ imaginary, γ₊ = −conj(γ₋)
        let gm = c(0.4, -0.9);
        let co = Su2Coefficients::new(-gm.conj(), c(0.0, 1.7), gm);
        let f = gauss_factorize(&co).unwrap();
        let p = f.fundamental_product();
        let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
        assert!((det.norm() - 1.0).abs() < 1e-12);
        // columns orthonormal
        let dot = p[0][0].conj() * p[0][1] + p[1][0].conj() * p[1][1];
        assert!(dot.norm() < 1e-12);
    }

    #[test]
    fn sigma_z_form_fails_the_spin_identity_but_fits_doubled_generator() {
        let co = Su2Coefficients::new(c(0.3, 0.0), c(-0.3, -2.0), c(0.3, 0.0));
        let f = sigma_z_normalized_factors(&co).unwrap();
        // as printed: Γ± = γ± sinh λ'/(λ' cosh λ' − γ₃ sinh λ')
        let lp = (co.gamma_3 * co.gamma_3 + co.gamma_plus * co.gamma_minus).sqrt();
        let denom = lp * lp.cosh() - co.gamma_3 * lp.sinh();
        assert!((f.gamma_plus - co.gamma_plus * lp.sinh() / denom).norm() < 1e-13);
        assert!((f.gamma_3_half_exp - lp / denom).norm() < 1e-13);
        assert!(fundamental_rep_defect(&co, &f) > 1e-2);
        let doubled = Su2Coefficients::new(co.gamma_plus, 2.0 * co.gamma_3, co.gamma_minus);
        assert!(fundamental_rep_defect(&doubled, &f) < 1e-13);
    }
}
