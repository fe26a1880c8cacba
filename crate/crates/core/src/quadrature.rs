//! Velocity-space quadrature rules.
//!
//! Two families are provided: a composite 4-point Gauss–Legendre rule on a
//! truncated ordinate interval `[-L, L]` (the reference measure for every
//! velocity integral in the transport path), and Gauss–Hermite rules for the
//! weight `exp(-x^2)` used by the linearized-stability audits.

use crate::error::{Error, Result};

/// Support of a quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Lebesgue measure on `[-half_width, half_width]`.
    Truncated { half_width: f64 },
    /// Weight `exp(-x^2)` on the real line.
    Hermite,
    /// Arbitrary user-provided nodes (e.g. a single discrete velocity).
    Discrete,
}

/// Nodes and strictly positive weights of a 1D quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    domain: Domain,
}

const GL4_NODES: [f64; 4] =
    [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_WEIGHTS: [f64; 4] =
    [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// Largest supported Gauss–Hermite order.
pub const MAX_HERMITE_ORDER: usize = 64;

impl QuadratureRule {
    /// Builds a rule from explicit nodes and weights, checking the invariants
    /// (equal lengths, finite values, positive weights, strictly increasing
    /// nodes, nodes inside the truncation interval when there is one).
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, domain: Domain) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Parameter(format!(
                "quadrature needs matching non-empty nodes/weights, got {} and {}",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("quadrature nodes and weights must be finite".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::Parameter("quadrature weights must be strictly positive".into()));
        }
        if nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Parameter("quadrature nodes must be strictly increasing".into()));
        }
        if let Domain::Truncated { half_width } = domain {
            if !(half_width > 0.0) || nodes.iter().any(|x| x.abs() > half_width) {
                return Err(Error::Parameter(format!(
                    "truncated rule nodes must lie in [-{half_width}, {half_width}]"
                )));
            }
        }
        Ok(Self { nodes, weights, domain })
    }

    /// Gauss–Hermite rule with `n` nodes for the weight `exp(-x^2)`.
    ///
    /// Nodes are found by Newton iteration on the orthonormal Hermite
    /// recurrence, which stays accurate well past `n = 64`.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_HERMITE_ORDER {
            return Err(Error::Parameter(format!("Gauss-Hermite order must be in 1..={MAX_HERMITE_ORDER}, got {n}")));
        }
        // pi^{-1/4}
        const PIM4: f64 = 0.751_125_544_464_942_5;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        // Newton returns nodes in decreasing order.
        x.reverse();
        w.reverse();
        Self::new(x, w, Domain::Hermite)
    }

    /// Composite 4-point Gauss–Legendre rule on `cells` equal subintervals of
    /// `[-half_width, half_width]`.
    pub fn truncated(half_width: f64, cells: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Parameter(format!("velocity half-width must be positive, got {half_width}")));
        }
        if cells == 0 {
            return Err(Error::Parameter("velocity cells must be at least 1".into()));
        }
        let h = 2.0 * half_width / cells as f64;
        let mut nodes = Vec::with_capacity(4 * cells);
        let mut weights = Vec::with_capacity(4 * cells);
        for c in 0..cells {
            let left = -half_width + c as f64 * h;
            let mid = left + 0.5 * h;
            for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        Self::new(nodes, weights, Domain::Truncated { half_width })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest `|node|`; equals the supremum of the transport speed on the grid.
    pub fn max_speed(&self) -> f64 {
        self.nodes.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// The truncation half-width, when the rule lives on `[-L, L]`.
    pub fn half_width(&self) -> Option<f64> {
        match self.domain {
            Domain::Truncated { half_width } => Some(half_width),
            _ => None,
        }
    }

    /// `sum_i weights[i] * values[i]`, summed left to right.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(Error::Parameter(format!(
                "integrand has {} values but the rule has {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(self.sum(values))
    }

    /// Unchecked weighted sum for internal callers that build `values`
    /// from this rule's own nodes.
    #[inline]
    pub(crate) fn sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).fold(0.0, |acc, (w, v)| acc + w * v)
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).fold(0.0, |acc, (&x, &w)| acc + w * f(x))
    }

    /// `sum_i w_i f(i, x_i)`.
    #[inline]
    pub fn integrate_fn_indexed(&self, f: impl Fn(usize, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, (&x, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            acc += w * f(i, x);
        }
        acc
    }

    /// `sum_i w_i a_i b_i`.
    #[inline]
    pub(crate) fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.weights.len());
        debug_assert_eq!(b.len(), self.weights.len());
        let mut acc = 0.0;
        for i in 0..self.weights.len() {
            acc += self.weights[i] * a[i] * b[i];
        }
        acc
    }
}

/// Default truncation half-width for flows with speeds up to `u_max` and
/// temperatures up to `theta_max`.
pub fn default_half_width(u_max: f64, theta_max: f64) -> f64 {
    u_max.abs() + 8.0 * theta_max.sqrt()
}
