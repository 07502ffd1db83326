//! Differentiable scalar types.
//!
//! Everything numeric in the learned-model stack is generic over [`Scalar`]:
//!
//! * `f64` — plain evaluation / first-order reverse mode,
//! * [`Dual`] — one forward tangent; a reverse pass over `Dual` arithmetic is
//!   the forward-over-reverse composition that yields mixed second-order
//!   derivatives,
//! * [`HyperDual`] — two tangents plus their cross term; a reverse pass over
//!   `HyperDual` arithmetic yields the mixed third-order directional
//!   derivatives the Euler-Lagrange loss gradient needs.

use crate::math;
use core::ops::{Add, Div, Mul, Neg, Sub};

/// Closed primitive set: +, -, *, /, neg, sin, cos, exp, ln, softplus,
/// sigmoid. Adding a primitive means adding a derivative rule here and a
/// finite-difference test next to it.
pub trait Scalar:
    Copy
    + core::fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(v: f64) -> Self;
    /// The primal (value) part.
    fn value(self) -> f64;
    /// Multiply by a plain constant.
    fn scale(self, k: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn softplus(self) -> Self;
    fn sigmoid(self) -> Self;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn value(self) -> f64 {
        self
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline(always)]
    fn sin(self) -> Self {
        math::sin(self)
    }
    #[inline(always)]
    fn cos(self) -> Self {
        math::cos(self)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        math::exp(self)
    }
    #[inline(always)]
    fn ln(self) -> Self {
        math::ln(self)
    }
    #[inline(always)]
    fn softplus(self) -> Self {
        math::softplus(self)
    }
    #[inline(always)]
    fn sigmoid(self) -> Self {
        math::sigmoid(self)
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// First-order dual number: value + one tangent component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub t: f64,
}

impl Dual {
    #[inline(always)]
    pub fn new(v: f64, t: f64) -> Self {
        Dual { v, t }
    }

    /// Lift a unary primitive given its value and first derivative at `self.v`.
    #[inline(always)]
    fn chain(self, f: f64, df: f64) -> Self {
        Dual {
            v: f,
            t: df * self.t,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline(always)]
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.t + o.t)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline(always)]
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.t - o.t)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline(always)]
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.v * o.t + self.t * o.v)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline(always)]
    fn div(self, o: Dual) -> Dual {
        let q = self.v / o.v;
        Dual::new(q, (self.t - q * o.t) / o.v)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline(always)]
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.t)
    }
}

impl Scalar for Dual {
    const ZERO: Self = Dual { v: 0.0, t: 0.0 };
    const ONE: Self = Dual { v: 1.0, t: 0.0 };

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    #[inline(always)]
    fn value(self) -> f64 {
        self.v
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        Dual::new(self.v * k, self.t * k)
    }
    #[inline(always)]
    fn sin(self) -> Self {
        self.chain(math::sin(self.v), math::cos(self.v))
    }
    #[inline(always)]
    fn cos(self) -> Self {
        self.chain(math::cos(self.v), -math::sin(self.v))
    }
    #[inline(always)]
    fn exp(self) -> Self {
        let e = math::exp(self.v);
        self.chain(e, e)
    }
    #[inline(always)]
    fn ln(self) -> Self {
        self.chain(math::ln(self.v), 1.0 / self.v)
    }
    #[inline(always)]
    fn softplus(self) -> Self {
        self.chain(math::softplus(self.v), math::sigmoid(self.v))
    }
    #[inline(always)]
    fn sigmoid(self) -> Self {
        let s = math::sigmoid(self.v);
        self.chain(s, s * (1.0 - s))
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.t.is_finite()
    }
}

/// Second-order hyper-dual number: value, two independent tangents and the
/// mixed second-order component `t12` along those two directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual {
    pub v: f64,
    pub t1: f64,
    pub t2: f64,
    pub t12: f64,
}

impl HyperDual {
    #[inline(always)]
    pub fn new(v: f64, t1: f64, t2: f64, t12: f64) -> Self {
        HyperDual { v, t1, t2, t12 }
    }

    /// Lift a unary primitive from its value, first and second derivative.
    #[inline(always)]
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual {
            v: f,
            t1: df * self.t1,
            t2: df * self.t2,
            t12: df * self.t12 + d2f * self.t1 * self.t2,
        }
    }

    #[inline(always)]
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Add for HyperDual {
    type Output = HyperDual;
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        HyperDual::new(
            self.v + o.v,
            self.t1 + o.t1,
            self.t2 + o.t2,
            self.t12 + o.t12,
        )
    }
}

impl Sub for HyperDual {
    type Output = HyperDual;
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        HyperDual::new(
            self.v - o.v,
            self.t1 - o.t1,
            self.t2 - o.t2,
            self.t12 - o.t12,
        )
    }
}

impl Mul for HyperDual {
    type Output = HyperDual;
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        HyperDual::new(
            self.v * o.v,
            self.v * o.t1 + self.t1 * o.v,
            self.v * o.t2 + self.t2 * o.v,
            self.v * o.t12 + self.t12 * o.v + self.t1 * o.t2 + self.t2 * o.t1,
        )
    }
}

impl Div for HyperDual {
    type Output = HyperDual;
    #[inline(always)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for HyperDual {
    type Output = HyperDual;
    #[inline(always)]
    fn neg(self) -> Self {
        HyperDual::new(-self.v, -self.t1, -self.t2, -self.t12)
    }
}

impl Scalar for HyperDual {
    const ZERO: Self = HyperDual {
        v: 0.0,
        t1: 0.0,
        t2: 0.0,
        t12: 0.0,
    };
    const ONE: Self = HyperDual {
        v: 1.0,
        t1: 0.0,
        t2: 0.0,
        t12: 0.0,
    };

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        HyperDual::new(v, 0.0, 0.0, 0.0)
    }
    #[inline(always)]
    fn value(self) -> f64 {
        self.v
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        HyperDual::new(self.v * k, self.t1 * k, self.t2 * k, self.t12 * k)
    }
    #[inline(always)]
    fn sin(self) -> Self {
        let (s, c) = (math::sin(self.v), math::cos(self.v));
        self.chain(s, c, -s)
    }
    #[inline(always)]
    fn cos(self) -> Self {
        let (s, c) = (math::sin(self.v), math::cos(self.v));
        self.chain(c, -s, -c)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        let e = math::exp(self.v);
        self.chain(e, e, e)
    }
    #[inline(always)]
    fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(math::ln(self.v), r, -r * r)
    }
    #[inline(always)]
    fn softplus(self) -> Self {
        let s = math::sigmoid(self.v);
        self.chain(math::softplus(self.v), s, s * (1.0 - s))
    }
    #[inline(always)]
    fn sigmoid(self) -> Self {
        let s = math::sigmoid(self.v);
        let ds = s * (1.0 - s);
        self.chain(s, ds, ds * (1.0 - 2.0 * s))
    }
    #[inline(always)]
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.t1.is_finite() && self.t2.is_finite() && self.t12.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    /// Every primitive's Dual tangent matches central finite differences.
    #[test]
    fn dual_primitives_match_finite_differences() {
        let cases: [(&str, fn(Dual) -> Dual, fn(f64) -> f64, &[f64]); 6] = [
            ("sin", Scalar::sin, math::sin, &[-2.0, -0.3, 0.0, 1.1, 2.9]),
            ("cos", Scalar::cos, math::cos, &[-2.0, -0.3, 0.0, 1.1, 2.9]),
            ("exp", Scalar::exp, math::exp, &[-2.0, -0.3, 0.0, 1.1, 2.9]),
            ("ln", Scalar::ln, math::ln, &[0.1, 0.7, 1.0, 3.5, 10.0]),
            (
                "softplus",
                Scalar::softplus,
                math::softplus,
                &[-20.0, -2.0, 0.0, 1.1, 30.0],
            ),
            (
                "sigmoid",
                Scalar::sigmoid,
                math::sigmoid,
                &[-8.0, -2.0, 0.0, 1.1, 8.0],
            ),
        ];
        for (name, fdual, fval, xs) in cases {
            for &x in xs {
                let d = fdual(Dual::new(x, 1.0));
                let fd = fd_central(fval, x, 1e-6 * (1.0 + x.abs()));
                assert!(
                    (d.t - fd).abs() <= 1e-5 * (1.0 + d.t.abs()),
                    "{name} at {x}: dual {} vs fd {fd}",
                    d.t
                );
            }
        }
    }

    #[test]
    fn dual_division_rule() {
        let a = Dual::new(3.0, 1.0);
        let b = Dual::new(2.0, 0.0);
        let q = a / b;
        assert_eq!(q.v, 1.5);
        assert_eq!(q.t, 0.5);
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let c = Dual::from_f64(4.2);
        let y = c * c + c.sin();
        assert_eq!(y.t, 0.0);
    }

    /// HyperDual t12 equals the second derivative for f(x) along (1, 1).
    #[test]
    fn hyperdual_second_derivative() {
        // f(x) = softplus(x)^2: f'' = 2(sigma^2 + softplus * sigma').
        let x = 0.7;
        let h = HyperDual::new(x, 1.0, 1.0, 0.0);
        let y = h.softplus() * h.softplus();
        let sp = math::softplus(x);
        let s = math::sigmoid(x);
        let expect = 2.0 * (s * s + sp * s * (1.0 - s));
        assert!((y.t12 - expect).abs() < 1e-12);
        // Cross-check with finite differences of the dual derivative.
        let g = |x: f64| {
            let d = Dual::new(x, 1.0);
            (d.softplus() * d.softplus()).t
        };
        let fd = fd_central(g, x, 1e-6);
        assert!((y.t12 - fd).abs() < 1e-5);
    }

    #[test]
    fn hyperdual_mixed_directions() {
        // f(x, y) = sin(x) * exp(y); d2f/dxdy = cos(x) exp(y).
        let (x, y) = (0.4, -0.8);
        let hx = HyperDual::new(x, 1.0, 0.0, 0.0);
        let hy = HyperDual::new(y, 0.0, 1.0, 0.0);
        let f = hx.sin() * hy.exp();
        assert!((f.t12 - math::cos(x) * math::exp(y)).abs() < 1e-14);
        assert!((f.t1 - math::cos(x) * math::exp(y)).abs() < 1e-14);
        assert!((f.t2 - math::sin(x) * math::exp(y)).abs() < 1e-14);
    }
}
