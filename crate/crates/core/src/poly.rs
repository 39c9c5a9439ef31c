//! Sparse multivariate polynomials over the joint strategy vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest total degree accepted for user-supplied payoff polynomials.
pub const MAX_DEGREE: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    /// One exponent per player strategy.
    pub pow: Vec<u32>,
}

impl Term {
    pub fn degree(&self) -> u32 {
        self.pow.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn new(terms: Vec<Term>) -> Self {
        Polynomial { terms }
    }

    pub fn zero() -> Self {
        Polynomial::default()
    }

    /// Checks every term has `n_vars` exponents, finite coefficients, and
    /// total degree at most [`MAX_DEGREE`].
    pub fn validate(&self, n_vars: usize) -> Result<()> {
        for (idx, t) in self.terms.iter().enumerate() {
            if t.pow.len() != n_vars {
                return Err(Error::config(format!(
                    "term {idx}: expected {n_vars} exponents, got {}",
                    t.pow.len()
                )));
            }
            if !t.coef.is_finite() {
                return Err(Error::config(format!("term {idx}: non-finite coefficient")));
            }
            if t.degree() > MAX_DEGREE {
                return Err(Error::config(format!(
                    "term {idx}: total degree {} exceeds {MAX_DEGREE}",
                    t.degree()
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.pow
                    .iter()
                    .zip(x)
                    .fold(t.coef, |acc, (&p, &xi)| acc * xi.powi(p as i32))
            })
            .sum()
    }

    /// Partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.pow[var] > 0)
            .map(|t| {
                let mut pow = t.pow.clone();
                let p = pow[var];
                pow[var] -= 1;
                Term {
                    coef: t.coef * p as f64,
                    pow,
                }
            })
            .collect();
        Polynomial { terms }
    }

    /// Degree in a single variable, ignoring zero coefficients.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms
            .iter()
            .filter(|t| t.coef != 0.0)
            .map(|t| t.pow[var])
            .max()
            .unwrap_or(0)
    }
}
