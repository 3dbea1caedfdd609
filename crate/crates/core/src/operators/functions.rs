//! Compactly supported, twice differentiable test functions with analytic
//! derivatives, built from the smooth step `psi_K`.
//!
//! `psi_K` equals 1 below `K`, 0 above `K + w` and on `[K, K + w]` falls as one
//! minus the normalized integral of the unit bump `b(s) = exp(-1/(1 - s^2))`
//! rescaled onto that interval.

use std::fmt::Debug;
use std::sync::OnceLock;

use crate::quadrature::{gauss_legendre, integrate_adaptive, Rule};

/// A real function of one state variable.
pub trait ScalarFunction: Debug + Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    /// Everything vanishes for `x > support_bound()`.
    fn support_bound(&self) -> f64;
}

/// A real function of the Erlang state `(lambda, xi)`.
pub trait PlanarFunction: Debug + Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    /// `(d/dx, d/dy)`.
    fn gradient(&self, x: f64, y: f64) -> (f64, f64);
    /// `(d2/dx2, d2/dxdy, d2/dy2)`.
    fn hessian(&self, x: f64, y: f64) -> (f64, f64, f64);
    /// Everything vanishes when either coordinate exceeds this bound.
    fn support_bound(&self) -> f64;
}

#[inline]
fn unit_bump(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

#[inline]
fn unit_bump_d1(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp() * (-2.0 * s / (q * q))
    }
}

const HALF_RULE_NODES: usize = 64;

struct BumpTables {
    rule: Rule,
    /// `int_{-1}^{1} b`.
    total: f64,
}

fn tables() -> &'static BumpTables {
    static TABLES: OnceLock<BumpTables> = OnceLock::new();
    TABLES.get_or_init(|| BumpTables {
        rule: gauss_legendre(HALF_RULE_NODES),
        total: integrate_adaptive(unit_bump, -1.0, 1.0, 1e-12),
    })
}

/// `int_{-1}^{1} exp(-1/(1-s^2)) ds`, computed once by adaptive quadrature.
pub fn bump_normalizer() -> f64 {
    tables().total
}

/// `int_{-1}^{m} b` for `m <= 0` by a fixed Gauss–Legendre rule.
fn left_mass(m: f64) -> f64 {
    let rule = &tables().rule;
    let half = 0.5 * (m + 1.0);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * unit_bump(-1.0 + half * (x + 1.0));
    }
    acc * half
}

/// Normalized cumulative bump `S(s) = int_{-1}^{s} b / int_{-1}^{1} b`.
fn cumulative(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let j = tables().total;
    if s <= 0.0 {
        left_mass(s) / j
    } else {
        1.0 - left_mass(-s) / j
    }
}

/// `psi_K`: 1 below `start`, 0 above `start + width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothStep {
    pub start: f64,
    pub width: f64,
}

impl SmoothStep {
    pub fn new(start: f64, width: f64) -> Self {
        assert!(width > 0.0, "smooth step needs a positive width");
        Self { start, width }
    }

    #[inline]
    fn local(&self, x: f64) -> f64 {
        2.0 * (x - self.start) / self.width - 1.0
    }
}

/// `psi_K` with unit transition width on `[K, K + 1]`.
pub fn make_psi(k: f64) -> SmoothStep {
    assert!(k > 0.0, "psi_K needs K > 0");
    SmoothStep::new(k, 1.0)
}

impl ScalarFunction for SmoothStep {
    fn value(&self, x: f64) -> f64 {
        if x <= self.start {
            1.0
        } else if x >= self.start + self.width {
            0.0
        } else {
            1.0 - cumulative(self.local(x))
        }
    }

    fn d1(&self, x: f64) -> f64 {
        if x <= self.start || x >= self.start + self.width {
            return 0.0;
        }
        -2.0 * unit_bump(self.local(x)) / (bump_normalizer() * self.width)
    }

    fn d2(&self, x: f64) -> f64 {
        if x <= self.start || x >= self.start + self.width {
            return 0.0;
        }
        -4.0 * unit_bump_d1(self.local(x)) / (bump_normalizer() * self.width * self.width)
    }

    fn support_bound(&self) -> f64 {
        self.start + self.width
    }
}

/// `(1 - psi_rise) psi_fall`: rises on `[rise, rise + width]`, falls on
/// `[fall, fall + width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    rise: SmoothStep,
    fall: SmoothStep,
}

impl Bump {
    pub fn new(rise: f64, fall: f64, width: f64) -> Self {
        assert!(rise + width <= fall, "bump transitions overlap");
        Self {
            rise: SmoothStep::new(rise, width),
            fall: SmoothStep::new(fall, width),
        }
    }
}

impl ScalarFunction for Bump {
    fn value(&self, x: f64) -> f64 {
        (1.0 - self.rise.value(x)) * self.fall.value(x)
    }

    fn d1(&self, x: f64) -> f64 {
        let (r, r1) = (self.rise.value(x), self.rise.d1(x));
        let (f, f1) = (self.fall.value(x), self.fall.d1(x));
        -r1 * f + (1.0 - r) * f1
    }

    fn d2(&self, x: f64) -> f64 {
        let (r, r1, r2) = (self.rise.value(x), self.rise.d1(x), self.rise.d2(x));
        let (f, f1, f2) = (self.fall.value(x), self.fall.d1(x), self.fall.d2(x));
        -r2 * f - 2.0 * r1 * f1 + (1.0 - r) * f2
    }

    fn support_bound(&self) -> f64 {
        self.fall.support_bound()
    }
}

/// `psi(x) p(x)` for a polynomial `p` of degree at most 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyBump {
    step: SmoothStep,
    coeffs: [f64; 3],
}

impl PolyBump {
    pub fn new(step: SmoothStep, coeffs: [f64; 3]) -> Self {
        Self { step, coeffs }
    }
}

impl ScalarFunction for PolyBump {
    fn value(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        self.step.value(x) * (c0 + c1 * x + c2 * x * x)
    }

    fn d1(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        let p = c0 + c1 * x + c2 * x * x;
        self.step.d1(x) * p + self.step.value(x) * (c1 + 2.0 * c2 * x)
    }

    fn d2(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        let p = c0 + c1 * x + c2 * x * x;
        let p1 = c1 + 2.0 * c2 * x;
        self.step.d2(x) * p + 2.0 * self.step.d1(x) * p1 + self.step.value(x) * 2.0 * c2
    }

    fn support_bound(&self) -> f64 {
        self.step.support_bound()
    }
}

/// The zero function.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Zero;

impl ScalarFunction for Zero {
    fn value(&self, _: f64) -> f64 {
        0.0
    }
    fn d1(&self, _: f64) -> f64 {
        0.0
    }
    fn d2(&self, _: f64) -> f64 {
        0.0
    }
    fn support_bound(&self) -> f64 {
        0.0
    }
}

impl PlanarFunction for Zero {
    fn value(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn gradient(&self, _: f64, _: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn hessian(&self, _: f64, _: f64) -> (f64, f64, f64) {
        (0.0, 0.0, 0.0)
    }
    fn support_bound(&self) -> f64 {
        0.0
    }
}

/// The constant 1. Not compactly supported; used for conservativity checks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct One;

impl ScalarFunction for One {
    fn value(&self, _: f64) -> f64 {
        1.0
    }
    fn d1(&self, _: f64) -> f64 {
        0.0
    }
    fn d2(&self, _: f64) -> f64 {
        0.0
    }
    fn support_bound(&self) -> f64 {
        f64::INFINITY
    }
}

impl PlanarFunction for One {
    fn value(&self, _: f64, _: f64) -> f64 {
        1.0
    }
    fn gradient(&self, _: f64, _: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn hessian(&self, _: f64, _: f64) -> (f64, f64, f64) {
        (0.0, 0.0, 0.0)
    }
    fn support_bound(&self) -> f64 {
        f64::INFINITY
    }
}

/// `g(x) k(y)`.
#[derive(Debug)]
pub struct Tensor<G, K> {
    pub first: G,
    pub second: K,
}

impl<G: ScalarFunction, K: ScalarFunction> Tensor<G, K> {
    pub fn new(first: G, second: K) -> Self {
        Self { first, second }
    }
}

impl<G: ScalarFunction, K: ScalarFunction> PlanarFunction for Tensor<G, K> {
    fn value(&self, x: f64, y: f64) -> f64 {
        let g = self.first.value(x);
        if g == 0.0 {
            return 0.0;
        }
        g * self.second.value(y)
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let (g, g1) = (self.first.value(x), self.first.d1(x));
        let (k, k1) = (self.second.value(y), self.second.d1(y));
        (g1 * k, g * k1)
    }

    fn hessian(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (g, g1, g2) = (self.first.value(x), self.first.d1(x), self.first.d2(x));
        let (k, k1, k2) = (self.second.value(y), self.second.d1(y), self.second.d2(y));
        (g2 * k, g1 * k1, g * k2)
    }

    fn support_bound(&self) -> f64 {
        self.first.support_bound().max(self.second.support_bound())
    }
}

pub fn narrow_bump() -> Bump {
    Bump::new(2.0, 4.0, 0.5)
}

pub fn mid_bump() -> Bump {
    Bump::new(1.0, 6.0, 1.0)
}

/// Supported in `[0, 10]`, already rising at 0 so that `f'(0) != 0`.
pub fn wide_bump() -> Bump {
    Bump::new(-1.0, 8.0, 2.0)
}

pub fn plateau() -> SmoothStep {
    make_psi(10.0)
}

/// `psi_10(x) (1 + 0.2 x - 0.02 x^2)`.
pub fn poly_bump() -> PolyBump {
    PolyBump::new(make_psi(10.0), [1.0, 0.2, -0.02])
}

/// Shipped one-dimensional family, by name.
pub fn scalar_family() -> Vec<(&'static str, Box<dyn ScalarFunction>)> {
    vec![
        ("bump_narrow", Box::new(narrow_bump())),
        ("bump_mid", Box::new(mid_bump())),
        ("bump_wide", Box::new(wide_bump())),
        ("psi_plateau", Box::new(plateau())),
        ("poly_bump", Box::new(poly_bump())),
        ("zero", Box::new(Zero)),
    ]
}

/// Shipped two-dimensional family, by name.
pub fn planar_family() -> Vec<(&'static str, Box<dyn PlanarFunction>)> {
    vec![
        (
            "tensor_narrow",
            Box::new(Tensor::new(narrow_bump(), mid_bump())),
        ),
        ("tensor_mid", Box::new(Tensor::new(mid_bump(), mid_bump()))),
        (
            "tensor_wide",
            Box::new(Tensor::new(wide_bump(), wide_bump())),
        ),
        ("tensor_poly", Box::new(Tensor::new(poly_bump(), plateau()))),
        ("zero", Box::new(Zero)),
    ]
}

pub fn scalar_function(name: &str) -> Option<Box<dyn ScalarFunction>> {
    scalar_family()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f)
}

pub fn planar_function(name: &str) -> Option<Box<dyn PlanarFunction>> {
    planar_family()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f)
}
