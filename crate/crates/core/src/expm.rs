//! Dense complex matrix exponential by scaling and squaring with diagonal
//! Padé approximants of degree 3, 5, 7, 9 or 13, selected from the 1-norm
//! (Higham 2005). Deterministic: no randomized norm estimation.
//!
//! [`expm_extended`] runs degree-13 Padé scaling and squaring in
//! double-double arithmetic for blocks whose exponential has entries many
//! orders of magnitude apart, where f64 rounding in the squarings swamps the
//! small columns.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
// `Float` supplies f64 math without std; it goes unused when std is linked.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::dd::{Cdd, Dd};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

type Mat = DMatrix<Complex64>;

fn one_norm(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `a · b`, skipping zero entries of `a` when it is mostly empty (powers of a
/// banded generator stay banded through the Padé numerator).
fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let nonzero = a.iter().filter(|z| !z.is_zero()).count();
    if 4 * nonzero >= n * a.ncols() {
        return a * b;
    }
    let mut out = Mat::zeros(n, b.ncols());
    for (k, col) in a.column_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v.is_zero() {
                continue;
            }
            for j in 0..b.ncols() {
                out[(i, j)] += v * b[(k, j)];
            }
        }
    }
    out
}

fn scaled(a: &Mat, x: f64) -> Mat {
    a * Complex64::new(x, 0.0)
}

/// `(U, V)` for a low-degree approximant: `U = A Σ b_{2k+1} A^{2k}`,
/// `V = Σ b_{2k} A^{2k}`.
fn pade_low(a: &Mat, b: &[f64]) -> (Mat, Mat) {
    let n = a.nrows();
    let a2 = mul(a, a);
    let mut u = scaled(&Mat::identity(n, n), b[1]);
    let mut v = scaled(&Mat::identity(n, n), b[0]);
    let mut power = Mat::identity(n, n);
    for k in 1..b.len() / 2 {
        power = mul(&power, &a2);
        u += scaled(&power, b[2 * k + 1]);
        v += scaled(&power, b[2 * k]);
    }
    (mul(a, &u), v)
}

fn pade_13(a: &Mat) -> (Mat, Mat) {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let a2 = mul(a, a);
    let a4 = mul(&a2, &a2);
    let a6 = mul(&a4, &a2);
    let b = &B13;
    let inner_u = mul(
        &a6,
        &(scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9])),
    ) + scaled(&a6, b[7])
        + scaled(&a4, b[5])
        + scaled(&a2, b[3])
        + scaled(&id, b[1]);
    let u = mul(a, &inner_u);
    let v = mul(
        &a6,
        &(scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8])),
    ) + scaled(&a6, b[6])
        + scaled(&a4, b[4])
        + scaled(&a2, b[2])
        + scaled(&id, b[0]);
    (u, v)
}

/// `(exp(A / 2^s), s)`; the caller squares `s` times.
fn scaled_pade(a: &Mat) -> Option<(Mat, u32)> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let norm = one_norm(a);
    let solve = |u: Mat, v: Mat| -> Option<Mat> { (&v - &u).lu().solve(&(&v + &u)) };
    for (degree, theta) in THETA {
        if norm <= theta {
            let b: &[f64] = match degree {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b);
            return Some((solve(u, v)?, 0));
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let a_scaled = scaled(a, 0.5f64.powi(s as i32));
    let (u, v) = pade_13(&a_scaled);
    Some((solve(u, v)?, s))
}

fn all_finite<'a>(mut z: impl Iterator<Item = &'a Complex64>) -> bool {
    z.all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `exp(A)`; `None` if `A` has non-finite entries or the Padé denominator is
/// singular.
pub fn expm(a: &Mat) -> Option<Mat> {
    if a.nrows() == 0 {
        return Some(a.clone());
    }
    let (mut x, s) = scaled_pade(a)?;
    for _ in 0..s {
        x = &x * &x;
    }
    all_finite(x.iter()).then_some(x)
}

/// `exp(A)^k x` without forming `exp(A)`: the last squarings are replaced by
/// repeated matrix-vector products where that is cheaper.
pub fn expm_apply(a: &Mat, x: &DVector<Complex64>, k: u32) -> Option<DVector<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(x.clone());
    }
    let (mut r, s) = scaled_pade(a)?;
    // j squarings cost j·n³, the remaining k·2^(s−j) products k·2^(s−j)·n².
    let cost = |j: u32| j as f64 * n as f64 + k as f64 * 2f64.powi((s - j) as i32);
    let squarings = (0..=s)
        .min_by(|&i, &j| cost(i).total_cmp(&cost(j)))
        .unwrap_or(s);
    for _ in 0..squarings {
        r = &r * &r;
    }
    let mut y = x.clone();
    for _ in 0..u64::from(k) << (s - squarings) {
        y = &r * y;
    }
    all_finite(y.iter()).then_some(y)
}

// Padé 13 truncation error stays below double-double rounding for norms up to 1.
const THETA_13_EXTENDED: f64 = 1.0;

/// Row-major square matrix of double-double complex numbers.
struct DdMat {
    n: usize,
    data: Vec<Cdd>,
}

impl DdMat {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Cdd::ZERO; n * n],
        }
    }

    fn identity_times(n: usize, x: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Cdd::new(x, 0.0);
        }
        m
    }

    fn mul(&self, b: &DdMat) -> DdMat {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Cdd::ZERO {
                    continue;
                }
                for (o, &bv) in row.iter_mut().zip(&b.data[k * n..(k + 1) * n]) {
                    *o = *o + a * bv;
                }
            }
        }
        out
    }

    /// `self += x · b`
    fn add_scaled(&mut self, b: &DdMat, x: f64) {
        let x = Dd::new(x);
        for (o, &v) in self.data.iter_mut().zip(&b.data) {
            *o = *o + v.scale(x);
        }
    }

    fn combine(&self, b: &DdMat, f: impl Fn(Cdd, Cdd) -> Cdd) -> DdMat {
        DdMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&b.data)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    /// `self⁻¹ · rhs` by LU with partial pivoting; `None` if singular.
    fn solve(mut self, mut rhs: DdMat) -> Option<DdMat> {
        let n = self.n;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    self.data[i * n + col]
                        .abs_approx()
                        .partial_cmp(&self.data[j * n + col].abs_approx())
                        .unwrap_or(core::cmp::Ordering::Equal)
                })
                .expect("non-empty range");
            let p = self.data[pivot * n + col];
            if p.abs_approx() == 0.0 || !p.abs_approx().is_finite() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    self.data.swap(pivot * n + j, col * n + j);
                    rhs.data.swap(pivot * n + j, col * n + j);
                }
            }
            for i in col + 1..n {
                let f = self.data[i * n + col].div(p);
                if f == Cdd::ZERO {
                    continue;
                }
                for j in col..n {
                    let v = self.data[col * n + j];
                    self.data[i * n + j] = self.data[i * n + j] - f * v;
                }
                for j in 0..n {
                    let v = rhs.data[col * n + j];
                    rhs.data[i * n + j] = rhs.data[i * n + j] - f * v;
                }
            }
        }
        for col in (0..n).rev() {
            let p = self.data[col * n + col];
            for j in 0..n {
                let mut acc = rhs.data[col * n + j];
                for k in col + 1..n {
                    acc = acc - self.data[col * n + k] * rhs.data[k * n + j];
                }
                rhs.data[col * n + j] = acc.div(p);
            }
        }
        Some(rhs)
    }
}

/// `exp(A)` evaluated in double-double arithmetic and rounded to f64. Much
/// slower than [`expm`]; `None` under the same conditions.
pub fn expm_extended(a: &Mat) -> Option<Mat> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return Some(a.clone());
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let norm = one_norm(a);
    let s = if norm > THETA_13_EXTENDED {
        (norm / THETA_13_EXTENDED).log2().ceil() as i32
    } else {
        0
    };
    let mut x = DdMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            x.data[i * n + j] = Cdd::new(z.re, z.im).ldexp(-s);
        }
    }
    let b = &B13;
    let a2 = x.mul(&x);
    let a4 = a2.mul(&a2);
    let a6 = a4.mul(&a2);
    let mut high = DdMat::zeros(n);
    high.add_scaled(&a6, b[13]);
    high.add_scaled(&a4, b[11]);
    high.add_scaled(&a2, b[9]);
    let mut inner = a6.mul(&high);
    inner.add_scaled(&a6, b[7]);
    inner.add_scaled(&a4, b[5]);
    inner.add_scaled(&a2, b[3]);
    inner.add_scaled(&DdMat::identity_times(n, b[1]), 1.0);
    let u = x.mul(&inner);
    let mut high = DdMat::zeros(n);
    high.add_scaled(&a6, b[12]);
    high.add_scaled(&a4, b[10]);
    high.add_scaled(&a2, b[8]);
    let mut v = a6.mul(&high);
    v.add_scaled(&a6, b[6]);
    v.add_scaled(&a4, b[4]);
    v.add_scaled(&a2, b[2]);
    v.add_scaled(&DdMat::identity_times(n, b[0]), 1.0);
    let mut r = v
        .combine(&u, |p, q| p - q)
        .solve(v.combine(&u, |p, q| p + q))?;
    for _ in 0..s {
        r = r.mul(&r);
    }
    let out = Mat::from_fn(n, n, |i, j| {
        let z = r.data[i * n + j];
        Complex64::new(z.re.to_f64(), z.im.to_f64())
    });
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(out)
}
