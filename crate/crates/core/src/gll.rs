//! Gauss-Lobatto-Legendre nodes, weights and the nodal Lagrange basis.
//!
//! The N+1 GLL nodes are the roots of (1-ξ²)P'_N(ξ). They serve both as
//! interpolation nodes and as quadrature points, which is what makes the
//! assembled mass matrix diagonal.

use std::f64::consts::PI;

use thiserror::Error;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GllError {
    #[error("invalid polynomial degree {0}: must be between 1 and {MAX_DEGREE}")]
    InvalidDegree(usize),
    #[error("reference coordinate {0} lies outside [-1, 1]")]
    OutOfReferenceDomain(f64),
    #[error("basis index {index} out of range for degree {degree}")]
    InvalidIndex { index: usize, degree: usize },
}

/// 1D Gauss-Lobatto-Legendre rule of a given degree.
#[derive(Debug, Clone, PartialEq)]
pub struct GllRule {
    degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Barycentric weights 1 / Π_{j≠i}(ξ_i - ξ_j).
    bary: Vec<f64>,
}

/// Legendre polynomial P_n and its derivative at `x`, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        let dp_next = dp_prev + (2.0 * kf - 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Builds the GLL rule of the given degree.
pub fn gll_rule(degree: usize) -> Result<GllRule, GllError> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(GllError::InvalidDegree(degree));
    }
    let n = degree;
    let nn = (n * (n + 1)) as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[0] = -1.0;
    nodes[n] = 1.0;

    // Interior nodes are roots of P'_N. Newton on (1-x²)P'_N uses the identity
    // d/dx[(1-x²)P'_N] = -N(N+1)P_N.
    for (j, node) in nodes.iter_mut().enumerate().take(n).skip(1) {
        let mut x = -(PI * j as f64 / n as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let step = (1.0 - x * x) * dp / (nn * p);
            x += step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        *node = x;
    }

    // Exact antisymmetry: mirror the negative half onto the positive half.
    for j in 0..(n + 1) / 2 {
        let mirrored = 0.5 * (nodes[n - j] - nodes[j]);
        nodes[j] = -mirrored;
        nodes[n - j] = mirrored;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }
    nodes[0] = -1.0;
    nodes[n] = 1.0;

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre(n, x);
            2.0 / (nn * p * p)
        })
        .collect();
    for j in 0..(n + 1) / 2 {
        let w = 0.5 * (weights[j] + weights[n - j]);
        weights[j] = w;
        weights[n - j] = w;
    }

    let bary = (0..=n)
        .map(|i| {
            let prod: f64 = (0..=n).filter(|&j| j != i).map(|j| nodes[i] - nodes[j]).product();
            1.0 / prod
        })
        .collect();

    Ok(GllRule { degree, nodes, weights, bary })
}

impl GllRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, N+1.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lagrange basis ℓ_i(ξ) by the product formula.
    pub fn lagrange_eval(&self, i: usize, xi: f64) -> Result<f64, GllError> {
        self.check(i, xi)?;
        Ok(self.basis_unchecked(i, xi))
    }

    /// Derivative ℓ'_i(ξ).
    pub fn lagrange_deriv(&self, i: usize, xi: f64) -> Result<f64, GllError> {
        self.check(i, xi)?;
        let x = &self.nodes;
        let mut total = 0.0;
        for m in 0..=self.degree {
            if m == i {
                continue;
            }
            let mut term = 1.0 / (x[i] - x[m]);
            for j in 0..=self.degree {
                if j != i && j != m {
                    term *= (xi - x[j]) / (x[i] - x[j]);
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// All basis values at ξ.
    pub fn basis_values(&self, xi: f64) -> Result<Vec<f64>, GllError> {
        self.check(0, xi)?;
        Ok((0..=self.degree).map(|i| self.basis_unchecked(i, xi)).collect())
    }

    /// All basis derivatives at ξ.
    pub fn basis_derivs(&self, xi: f64) -> Result<Vec<f64>, GllError> {
        (0..=self.degree).map(|i| self.lagrange_deriv(i, xi)).collect()
    }

    fn basis_unchecked(&self, i: usize, xi: f64) -> f64 {
        let x = &self.nodes;
        (0..=self.degree)
            .filter(|&j| j != i)
            .map(|j| (xi - x[j]) / (x[i] - x[j]))
            .product()
    }

    fn check(&self, i: usize, xi: f64) -> Result<(), GllError> {
        if i > self.degree {
            return Err(GllError::InvalidIndex { index: i, degree: self.degree });
        }
        if !(-1.0..=1.0).contains(&xi) {
            return Err(GllError::OutOfReferenceDomain(xi));
        }
        Ok(())
    }
}

/// Derivative table D_ij = ℓ'_j(ξ_i) at the GLL nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeTable {
    degree: usize,
    /// Row-major (N+1)×(N+1).
    deriv: Vec<f64>,
}

/// Differentiation matrix for the rule, from barycentric weights.
pub fn derivative_matrix(rule: &GllRule) -> LagrangeTable {
    let n = rule.len();
    let x = rule.nodes();
    let b = &rule.bary;
    let mut deriv = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let d = (b[j] / b[i]) / (x[i] - x[j]);
                deriv[i * n + j] = d;
                diag -= d;
            }
        }
        deriv[i * n + i] = diag;
    }
    LagrangeTable { degree: rule.degree(), deriv }
}

impl LagrangeTable {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// D_ij = ℓ'_j(ξ_i).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.deriv[i * (self.degree + 1) + j]
    }

    /// Row-major matrix entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.deriv
    }

    /// Differentiates nodal samples: returns (D f)_i.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        let n = self.degree + 1;
        assert_eq!(samples.len(), n, "sample count must match the rule");
        (0..n)
            .map(|i| (0..n).map(|j| self.deriv[i * n + j] * samples[j]).sum())
            .collect()
    }
}
