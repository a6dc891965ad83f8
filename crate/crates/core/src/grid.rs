//! Uniform node-centred mesh on an interval, nodal fields and the discrete
//! operators used by the solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite() && x_left < x_right) {
            return Err(Error::InvalidGrid(format!("need x_left < x_right, got ({x_left}, {x_right})")));
        }
        if n_cells < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells, got {n_cells}")));
        }
        Ok(Self { x_left, x_right, n_cells })
    }

    /// The unit interval with `n_cells` cells.
    pub fn unit(n_cells: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_cells)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        (self.x_right - self.x_left) / self.n_cells as f64
    }

    /// `|Ω|`
    pub fn measure(&self) -> f64 {
        self.x_right - self.x_left
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_right
        } else {
            self.x_left + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bc {
    DirichletZero,
    NeumannZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub bc: Bc,
}

impl Field {
    pub fn new(values: Vec<f64>, bc: Bc) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite value".into()));
        }
        if values.len() < 5 {
            return Err(Error::InvalidField(format!("{} nodes is too few", values.len())));
        }
        if bc == Bc::DirichletZero && (values[0] != 0.0 || values[values.len() - 1] != 0.0) {
            return Err(Error::InvalidField("Dirichlet field must vanish at both endpoints".into()));
        }
        Ok(Self { values, bc })
    }

    pub fn zeros(grid: &Grid1D, bc: Bc) -> Self {
        Self { values: vec![0.0; grid.n_nodes()], bc }
    }

    /// Samples `profile` at the nodes. Dirichlet endpoint values within
    /// `1e-12·(1 + max|profile|)` of zero are snapped to exactly zero; larger
    /// values are an error.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Grid1D, bc: Bc, profile: F) -> Result<Self> {
        let mut values: Vec<f64> = grid.nodes().into_iter().map(profile).collect();
        if bc == Bc::DirichletZero {
            let scale = 1.0 + values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let n = values.len() - 1;
            for i in [0, n] {
                if values[i].abs() > 1e-12 * scale {
                    return Err(Error::InvalidField(format!(
                        "Dirichlet profile is {} at endpoint x = {}",
                        values[i],
                        grid.node(i)
                    )));
                }
                values[i] = 0.0;
            }
        }
        Self::new(values, bc)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Nodal first derivative.
///
/// Interior nodes use centred differences. Dirichlet fields take second-order
/// one-sided differences at the endpoints; Neumann fields reflect a ghost node,
/// which makes the endpoint derivative zero.
pub fn gradient(field: &Field, grid: &Grid1D) -> Vec<f64> {
    let u = &field.values;
    let n = u.len() - 1;
    let h = grid.h();
    let mut g = vec![0.0; n + 1];
    for i in 1..n {
        g[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    if field.bc == Bc::DirichletZero {
        g[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
        g[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
    }
    g
}

/// Cell differences `(u_{i+1} - u_i)/h`, one per cell.
pub fn face_gradient(values: &[f64], grid: &Grid1D) -> Vec<f64> {
    let h = grid.h();
    values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

/// Arithmetic means of nodal coefficients on cell faces.
pub fn face_average(nodal: &[f64]) -> Vec<f64> {
    nodal.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Flux-form `∇·(γ∇u)` for a Dirichlet field, with face coefficients taken as
/// arithmetic means of the nodal `γ`. Endpoint rows are zero.
pub fn div_gamma_grad(field: &Field, gamma_nodal: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    check_positive(gamma_nodal)?;
    let u = &field.values;
    let n = u.len() - 1;
    let h2 = grid.h() * grid.h();
    let gf = face_average(gamma_nodal);
    let mut out = vec![0.0; n + 1];
    for i in 1..n {
        out[i] = (gf[i] * (u[i + 1] - u[i]) - gf[i - 1] * (u[i] - u[i - 1])) / h2;
    }
    Ok(out)
}

pub(crate) fn check_positive(gamma_nodal: &[f64]) -> Result<()> {
    match gamma_nodal.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
        Some(index) => Err(Error::NonpositiveCoefficient { index, value: gamma_nodal[index] }),
        None => Ok(()),
    }
}

/// Three-point Laplacian with reflected ghost nodes (`Θ_{-1} = Θ_1`).
pub fn laplacian_neumann(field: &Field, grid: &Grid1D) -> Vec<f64> {
    let u = &field.values;
    let n = u.len() - 1;
    let h2 = grid.h() * grid.h();
    let mut out = vec![0.0; n + 1];
    out[0] = 2.0 * (u[1] - u[0]) / h2;
    out[n] = 2.0 * (u[n - 1] - u[n]) / h2;
    for i in 1..n {
        out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / h2;
    }
    out
}

/// Composite trapezoid rule over the nodes.
pub fn integrate(values: &[f64], grid: &Grid1D) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    grid.h() * (inner + 0.5 * (values[0] + values[n]))
}

/// `∫|∇u|²` of the piecewise-linear interpolant, `Σ h·((u_{i+1}-u_i)/h)²`.
pub fn dirichlet_energy(values: &[f64], grid: &Grid1D) -> f64 {
    let h = grid.h();
    values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h
}

/// `∫γ|∇u|²` with face-averaged `γ`; the quadratic form of [`div_gamma_grad`].
pub fn weighted_dirichlet_energy(values: &[f64], gamma_nodal: &[f64], grid: &Grid1D) -> f64 {
    let h = grid.h();
    values
        .windows(2)
        .zip(gamma_nodal.windows(2))
        .map(|(u, g)| 0.5 * (g[0] + g[1]) * (u[1] - u[0]).powi(2))
        .sum::<f64>()
        / h
}
