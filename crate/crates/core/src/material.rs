//! Density-to-property interpolation.
//!
//! A design variable `b ∈ [0, 1]` is mapped to a volume fraction through a
//! smoothed Heaviside projection, to a relative stiffness through the RAMP law,
//! and both are floored by an Ersatz parameter so the assembled system never
//! becomes singular.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Young's modulus of the solid phase (Pa).
    pub e0: f64,
    pub nu: f64,
    /// Mass density of the solid phase (kg/m³).
    pub rho0: f64,
    /// Projection sharpness.
    pub chi: f64,
    /// Projection threshold.
    pub eta: f64,
    /// RAMP penalty.
    pub kappa: f64,
    pub ersatz: f64,
    /// Mass-proportional Rayleigh coefficient (1/s).
    pub alpha_m: f64,
    /// Stiffness-proportional Rayleigh coefficient (s).
    pub alpha_k: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::steel()
    }
}

impl MaterialParams {
    pub fn steel() -> Self {
        Self {
            e0: 200e9,
            nu: 0.3,
            rho0: 7800.0,
            chi: 8.0,
            eta: 0.5,
            kappa: 8.0,
            ersatz: 1e-4,
            alpha_m: 10.0,
            alpha_k: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > 0.0) {
            return Err(invalid("e0 must be positive"));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(invalid("nu must lie in [0, 0.5)"));
        }
        if !(self.rho0 > 0.0) {
            return Err(invalid("rho0 must be positive"));
        }
        if !(self.chi > 0.0) {
            return Err(invalid("chi must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid("eta must lie in (0, 1)"));
        }
        if !(self.kappa >= 0.0) {
            return Err(invalid("kappa must be non-negative"));
        }
        if !(self.ersatz > 0.0 && self.ersatz < 1e-2) {
            return Err(invalid("ersatz must lie in (0, 1e-2)"));
        }
        if !(self.alpha_m >= 0.0 && self.alpha_k >= 0.0) {
            return Err(invalid("Rayleigh coefficients must be non-negative"));
        }
        Ok(())
    }

    /// Blended volume fraction `V̄(b)`; scales element mass.
    pub fn mass_scale(&self, b: f64) -> f64 {
        ersatz_blend(volume_projection(b, self.chi, self.eta), self.ersatz)
    }

    /// Blended relative stiffness `Ē(b)`; scales element stiffness.
    pub fn stiffness_scale(&self, b: f64) -> f64 {
        let v = volume_projection(b, self.chi, self.eta);
        ersatz_blend(stiffness_interp(v, self.kappa), self.ersatz)
    }
}

/// Smoothed Heaviside threshold projection.
pub fn volume_projection(b: f64, chi: f64, eta: f64) -> f64 {
    let num = (chi * eta).tanh() + (chi * (b - eta)).tanh();
    let den = (chi * eta).tanh() + (chi * (1.0 - eta)).tanh();
    num / den
}

fn volume_projection_derivative(b: f64, chi: f64, eta: f64) -> f64 {
    let den = (chi * eta).tanh() + (chi * (1.0 - eta)).tanh();
    let t = (chi * (b - eta)).tanh();
    chi * (1.0 - t * t) / den
}

/// RAMP stiffness law `V / (1 + κ(1 − V))`.
pub fn stiffness_interp(v: f64, kappa: f64) -> f64 {
    v / (1.0 + kappa * (1.0 - v))
}

fn stiffness_interp_derivative(v: f64, kappa: f64) -> f64 {
    let d = 1.0 + kappa * (1.0 - v);
    (1.0 + kappa) / (d * d)
}

pub fn ersatz_blend(x: f64, ersatz: f64) -> f64 {
    ersatz + (1.0 - ersatz) * x
}

/// Analytic derivatives `(dV̄/db, dĒ/db)`.
pub fn interp_derivatives(b: f64, params: &MaterialParams) -> (f64, f64) {
    let v = volume_projection(b, params.chi, params.eta);
    let dv = volume_projection_derivative(b, params.chi, params.eta);
    let de_dv = stiffness_interp_derivative(v, params.kappa);
    let scale = 1.0 - params.ersatz;
    (scale * dv, scale * de_dv * dv)
}

/// Per-element design variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(invalid(format!(
                "density {v} at element {i} outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

/// Linear cone-weight density filter `b̃ = H·b / Σ H`.
#[derive(Clone, Debug)]
pub struct DensityFilter {
    radius: f64,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl DensityFilter {
    pub fn new(mesh: &Mesh, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("filter radius must be positive"));
        }
        let (dx, dy) = mesh.element_size();
        let rx = (radius / dx).ceil() as isize;
        let ry = (radius / dy).ceil() as isize;
        let (nx, ny) = (mesh.nx() as isize, mesh.ny() as isize);
        let mut neighbors = Vec::with_capacity(mesh.n_elements());
        for ey in 0..ny {
            for ex in 0..nx {
                let mut row = Vec::new();
                let mut total = 0.0;
                for jy in (ey - ry).max(0)..=(ey + ry).min(ny - 1) {
                    for jx in (ex - rx).max(0)..=(ex + rx).min(nx - 1) {
                        let dist = (((jx - ex) as f64 * dx).powi(2)
                            + ((jy - ey) as f64 * dy).powi(2))
                        .sqrt();
                        let w = radius - dist;
                        if w > 0.0 {
                            row.push(((jy * nx + jx) as usize, w));
                            total += w;
                        }
                    }
                }
                row.iter_mut().for_each(|(_, w)| *w /= total);
                neighbors.push(row);
            }
        }
        Ok(Self { radius, neighbors })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * b[j]).sum())
            .collect()
    }

    /// Chain rule: maps `df/db̃` to `df/db`.
    pub fn backpropagate(&self, grad_filtered: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; grad_filtered.len()];
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                out[j] += w * grad_filtered[i];
            }
        }
        out
    }
}
