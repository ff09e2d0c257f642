//! Double-double arithmetic (about 32 significant digits) built from pairs of
//! f64 with error-free transformations. Only what the extended-precision
//! matrix exponential needs.

use core::ops::{Add, Mul, Neg, Sub};

// `Float` supplies f64 math without std; it goes unused when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    // Veltkamp splitting; inputs stay far below the overflow threshold.
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact scaling by a power of two.
    pub fn ldexp(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn abs_approx(self) -> f64 {
        self.hi.abs()
    }

    pub fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e } + Dd::new(q3)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + -b
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };

    pub fn new(re: f64, im: f64) -> Self {
        Cdd {
            re: Dd::new(re),
            im: Dd::new(im),
        }
    }

    pub fn scale(self, x: Dd) -> Self {
        Cdd {
            re: self.re * x,
            im: self.im * x,
        }
    }

    pub fn ldexp(self, k: i32) -> Self {
        Cdd {
            re: self.re.ldexp(k),
            im: self.im.ldexp(k),
        }
    }

    pub fn abs_approx(self) -> f64 {
        self.re.abs_approx() + self.im.abs_approx()
    }

    pub fn div(self, b: Cdd) -> Cdd {
        let den = b.re * b.re + b.im * b.im;
        let num = Cdd {
            re: self.re * b.re + self.im * b.im,
            im: self.im * b.re - self.re * b.im,
        };
        Cdd {
            re: num.re.div(den),
            im: num.im.div(den),
        }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    #[inline]
    fn add(self, b: Cdd) -> Cdd {
        Cdd {
            re: self.re + b.re,
            im: self.im + b.im,
        }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    #[inline]
    fn sub(self, b: Cdd) -> Cdd {
        Cdd {
            re: self.re - b.re,
            im: self.im - b.im,
        }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    #[inline]
    fn mul(self, b: Cdd) -> Cdd {
        Cdd {
            re: self.re * b.re - self.im * b.im,
            im: self.re * b.im + self.im * b.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_digits_f64_drops() {
        let third = Dd::new(1.0).div(Dd::new(3.0));
        let back = third * Dd::new(3.0) - Dd::new(1.0);
        assert!(back.to_f64().abs() < 1e-31);
        let tiny = Dd::new(1.0) + Dd::new(1e-20) - Dd::new(1.0);
        assert!((tiny.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn complex_division_inverts_multiplication() {
        let a = Cdd::new(0.3, -1.7);
        let b = Cdd::new(-2.25, 0.125);
        let q = (a * b).div(b) - a;
        assert!(q.abs_approx() < 1e-31);
    }
}
