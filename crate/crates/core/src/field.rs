//! Spatially sampled multi-agent fields on a uniform grid of (0,1), with
//! discrete Sobolev norms, finite-difference derivatives and boundary traces.
//!
//! All quadrature is composite trapezoid on the grid; boundary derivatives
//! use second-order one-sided stencils so the H1/H2 norms stay second-order
//! accurate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("grid too coarse: {required} nodes required, got {actual}")]
    GridTooCoarse { required: usize, actual: usize },
    #[error("non-finite value at agent {agent}, node {node}")]
    NonFinite { agent: usize, node: usize },
    #[error("unsupported derivative order {0} (expected 1 or 2)")]
    BadDerivativeOrder(usize),
    #[error("unsupported Sobolev order {0} (expected 0, 1 or 2)")]
    BadSobolevOrder(usize),
}

/// Uniform grid with nodes `j * h`, `j = 0..n-1`, `h = 1/(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    node_count: usize,
}

impl Grid {
    pub fn new(node_count: usize) -> Result<Self, FieldError> {
        if node_count < 3 {
            return Err(FieldError::GridTooCoarse {
                required: 3,
                actual: node_count,
            });
        }
        Ok(Grid { node_count })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.node_count - 1) as f64
    }

    /// Coordinate of node `j`; the endpoints are exact.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.node_count - 1 {
            1.0
        } else {
            j as f64 * self.spacing()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// N x n array of per-agent field samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentField {
    values: DMatrix<f64>,
    grid: Grid,
}

impl AgentField {
    /// Wraps raw samples, rejecting NaN/Inf entries.
    pub fn new(values: DMatrix<f64>, grid: Grid) -> Result<Self, FieldError> {
        assert_eq!(values.ncols(), grid.node_count(), "shape/grid mismatch");
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                if !values[(i, j)].is_finite() {
                    return Err(FieldError::NonFinite { agent: i + 1, node: j });
                }
            }
        }
        Ok(AgentField { values, grid })
    }

    pub fn zeros(agent_count: usize, grid: Grid) -> Self {
        AgentField {
            values: DMatrix::zeros(agent_count, grid.node_count()),
            grid,
        }
    }

    /// Pointwise samples of per-agent closed-form profiles.
    pub fn sample_profile<F>(grid: Grid, agent_count: usize, profile: F) -> Self
    where
        F: Fn(usize, f64) -> f64,
    {
        let values =
            DMatrix::from_fn(agent_count, grid.node_count(), |i, j| profile(i + 1, grid.node(j)));
        AgentField { values, grid }
    }

    pub fn agent_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First non-finite entry, if any, as (agent, node) 1-based/0-based.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        for i in 0..self.values.nrows() {
            for j in 0..self.values.ncols() {
                if !self.values[(i, j)].is_finite() {
                    return Some((i + 1, j));
                }
            }
        }
        None
    }

    /// Finite-difference spatial derivative of order 1 or 2, central at
    /// interior nodes, second-order one-sided at the boundaries.
    pub fn spatial_derivative(&self, order: usize) -> Result<AgentField, FieldError> {
        let n = self.grid.node_count();
        let h = self.grid.spacing();
        let min_nodes = match order {
            1 => 3,
            2 => 5,
            other => return Err(FieldError::BadDerivativeOrder(other)),
        };
        if n < min_nodes {
            return Err(FieldError::GridTooCoarse {
                required: min_nodes,
                actual: n,
            });
        }
        let v = &self.values;
        let mut out = DMatrix::zeros(v.nrows(), n);
        for i in 0..v.nrows() {
            match order {
                1 => {
                    out[(i, 0)] = (-3.0 * v[(i, 0)] + 4.0 * v[(i, 1)] - v[(i, 2)]) / (2.0 * h);
                    for j in 1..n - 1 {
                        out[(i, j)] = (v[(i, j + 1)] - v[(i, j - 1)]) / (2.0 * h);
                    }
                    out[(i, n - 1)] =
                        (3.0 * v[(i, n - 1)] - 4.0 * v[(i, n - 2)] + v[(i, n - 3)]) / (2.0 * h);
                }
                2 => {
                    let h2 = h * h;
                    out[(i, 0)] =
                        (2.0 * v[(i, 0)] - 5.0 * v[(i, 1)] + 4.0 * v[(i, 2)] - v[(i, 3)]) / h2;
                    for j in 1..n - 1 {
                        out[(i, j)] = (v[(i, j - 1)] - 2.0 * v[(i, j)] + v[(i, j + 1)]) / h2;
                    }
                    out[(i, n - 1)] = (2.0 * v[(i, n - 1)] - 5.0 * v[(i, n - 2)]
                        + 4.0 * v[(i, n - 3)]
                        - v[(i, n - 4)])
                        / h2;
                }
                _ => unreachable!(),
            }
        }
        Ok(AgentField {
            values: out,
            grid: self.grid,
        })
    }

    /// Trapezoid integral of one agent's samples.
    pub fn trapezoid_row(&self, agent: usize) -> f64 {
        let n = self.grid.node_count();
        let h = self.grid.spacing();
        let row = self.values.row(agent);
        let mut acc = 0.5 * (row[0] + row[n - 1]);
        for j in 1..n - 1 {
            acc += row[j];
        }
        acc * h
    }

    /// Sum over agents of the trapezoid integrals (total mass).
    pub fn total_mass(&self) -> f64 {
        (0..self.agent_count()).map(|i| self.trapezoid_row(i)).sum()
    }

    fn squared_l2_trapezoid(&self) -> f64 {
        let n = self.grid.node_count();
        let h = self.grid.spacing();
        let mut acc = 0.0;
        for i in 0..self.agent_count() {
            let row = self.values.row(i);
            let mut s = 0.5 * (row[0] * row[0] + row[n - 1] * row[n - 1]);
            for j in 1..n - 1 {
                s += row[j] * row[j];
            }
            acc += s;
        }
        acc * h
    }

    /// Discrete `H^{r,N}` norm: square root of the summed trapezoid
    /// integrals of squared derivatives up to order `r`.
    pub fn h_norm(&self, order: usize) -> Result<f64, FieldError> {
        Ok(self.h_norm_squared(order)?.sqrt())
    }

    pub fn h_norm_squared(&self, order: usize) -> Result<f64, FieldError> {
        if order > 2 {
            return Err(FieldError::BadSobolevOrder(order));
        }
        let mut acc = self.squared_l2_trapezoid();
        if order >= 1 {
            acc += self.spatial_derivative(1)?.squared_l2_trapezoid();
        }
        if order >= 2 {
            acc += self.spatial_derivative(2)?.squared_l2_trapezoid();
        }
        Ok(acc)
    }

    pub fn boundary_trace(&self, side: Side) -> DVector<f64> {
        let col = match side {
            Side::Left => 0,
            Side::Right => self.grid.node_count() - 1,
        };
        DVector::from_column_slice(self.values.column(col).as_slice())
    }

    /// Slack of the boundary trace estimate
    /// `||b||^2 <= 2(||b(i)||_2^2 + ||b_s||^2)` in discrete norms.
    pub fn lemma1_residual(&self, side: Side) -> Result<f64, FieldError> {
        let trace = self.boundary_trace(side);
        let deriv = self.spatial_derivative(1)?;
        Ok(2.0 * (trace.norm_squared() + deriv.squared_l2_trapezoid())
            - self.squared_l2_trapezoid())
    }
}
