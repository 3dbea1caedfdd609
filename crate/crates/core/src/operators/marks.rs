//! Discrete rules for integrals against the mark distribution.

use serde::{Deserialize, Serialize};

use super::OperatorError;
use crate::model::MarkDistribution;
use crate::quadrature::{gauss_laguerre, gauss_legendre};
use crate::rng::{PathRng, PathSeed};

/// How `int g(z) dnu(z)` is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MarkQuadrature {
    /// Exact atoms for constant and empirical marks, quantile Legendre for
    /// exponential marks.
    #[default]
    Auto,
    /// Point mass or empirical atoms; exact.
    Exact,
    /// Gauss–Laguerre in `z r` (exponential marks only).
    GaussLaguerre { nodes: usize },
    /// Composite Gauss–Legendre in the quantile `u = 1 - e^{-r z}`
    /// (exponential marks only).
    QuantileLegendre { panels: usize, order: usize },
    /// Equal-weight sample of the mark law.
    MonteCarlo { samples: usize, seed: u64 },
}

pub const DEFAULT_PANELS: usize = 32;
pub const DEFAULT_ORDER: usize = 8;

/// Resolved nodes and weights; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MarkRule {
    pub fn largest_node(&self) -> f64 {
        self.nodes.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum w_i g(z_i)`.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * g(z))
            .sum()
    }

    pub fn resolve(
        marks: &MarkDistribution,
        rule: MarkQuadrature,
        fallback: Option<MarkQuadrature>,
    ) -> Result<Self, OperatorError> {
        match Self::try_resolve(marks, rule) {
            Some(r) => Ok(r),
            None => match fallback.and_then(|fb| Self::try_resolve(marks, fb)) {
                Some(r) => Ok(r),
                None => Err(OperatorError::QuadratureUnavailable {
                    rule,
                    marks: describe(marks),
                }),
            },
        }
    }

    fn try_resolve(marks: &MarkDistribution, rule: MarkQuadrature) -> Option<Self> {
        use MarkDistribution as M;
        match (rule, marks) {
            (MarkQuadrature::Auto | MarkQuadrature::Exact, M::Constant(c)) => Some(Self {
                nodes: vec![*c],
                weights: vec![1.0],
            }),
            (MarkQuadrature::Auto | MarkQuadrature::Exact, M::Empirical(s)) => {
                let w = 1.0 / s.len() as f64;
                Some(Self {
                    nodes: s.clone(),
                    weights: vec![w; s.len()],
                })
            }
            (MarkQuadrature::Auto, M::ExponentialRate(r)) => {
                Some(quantile_legendre(*r, DEFAULT_PANELS, DEFAULT_ORDER))
            }
            (MarkQuadrature::QuantileLegendre { panels, order }, M::ExponentialRate(r))
                if panels > 0 && order > 0 =>
            {
                Some(quantile_legendre(*r, panels, order))
            }
            (MarkQuadrature::GaussLaguerre { nodes }, M::ExponentialRate(r)) if nodes > 0 => {
                let rule = gauss_laguerre(nodes);
                Some(Self {
                    nodes: rule.nodes.iter().map(|x| x / r).collect(),
                    weights: rule.weights,
                })
            }
            (MarkQuadrature::MonteCarlo { samples, seed }, _) if samples > 0 => {
                let mut rng = PathRng::new(PathSeed::new(seed, 0));
                let nodes: Vec<f64> = (0..samples).map(|_| marks.sample(&mut rng)).collect();
                Some(Self {
                    weights: vec![1.0 / samples as f64; samples],
                    nodes,
                })
            }
            _ => None,
        }
    }
}

fn describe(marks: &MarkDistribution) -> &'static str {
    match marks {
        MarkDistribution::Constant(_) => "constant",
        MarkDistribution::ExponentialRate(_) => "exponential",
        MarkDistribution::Empirical(_) => "empirical",
    }
}

fn quantile_legendre(rate: f64, panels: usize, order: usize) -> MarkRule {
    let base = gauss_legendre(order);
    let width = 1.0 / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = p as f64 * width;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            let u = lo + 0.5 * width * (x + 1.0);
            nodes.push(-(-u).ln_1p() / rate);
            weights.push(0.5 * width * w);
        }
    }
    MarkRule { nodes, weights }
}
