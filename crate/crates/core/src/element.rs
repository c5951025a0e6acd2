//! Bilinear plane-stress quadrilateral on an axis-aligned `dx × dy` cell.
//!
//! Local node order is counter-clockwise from the lower-left corner; local
//! dofs are `(u_x, u_y)` interleaved per node.

use nalgebra::{SMatrix, SVector};

use crate::error::{invalid, Result};

pub type ElementMatrix = SMatrix<f64, 8, 8>;
pub type ElementVector = SVector<f64, 8>;

const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

fn gauss_2() -> [(f64, f64); 2] {
    let g = 1.0 / 3f64.sqrt();
    [(-g, 1.0), (g, 1.0)]
}

fn shape(xi: f64, eta: f64) -> [f64; 4] {
    std::array::from_fn(|i| 0.25 * (1.0 + XI[i] * xi) * (1.0 + ETA[i] * eta))
}

fn strain_displacement(xi: f64, eta: f64, dx: f64, dy: f64) -> SMatrix<f64, 3, 8> {
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for i in 0..4 {
        let dn_dx = 0.25 * XI[i] * (1.0 + ETA[i] * eta) * 2.0 / dx;
        let dn_dy = 0.25 * ETA[i] * (1.0 + XI[i] * xi) * 2.0 / dy;
        b[(0, 2 * i)] = dn_dx;
        b[(1, 2 * i + 1)] = dn_dy;
        b[(2, 2 * i)] = dn_dy;
        b[(2, 2 * i + 1)] = dn_dx;
    }
    b
}

pub fn plane_stress_constitutive(e: f64, nu: f64) -> SMatrix<f64, 3, 3> {
    let c = e / (1.0 - nu * nu);
    SMatrix::<f64, 3, 3>::new(
        c,
        c * nu,
        0.0,
        c * nu,
        c,
        0.0,
        0.0,
        0.0,
        c * (1.0 - nu) / 2.0,
    )
}

/// Element stiffness with 2×2 Gauss quadrature.
pub fn element_stiffness(
    e: f64,
    nu: f64,
    thickness: f64,
    dx: f64,
    dy: f64,
) -> Result<ElementMatrix> {
    if !(e > 0.0) {
        return Err(invalid("Young's modulus must be positive"));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(invalid("Poisson's ratio must lie in [0, 0.5)"));
    }
    check_geometry(thickness, dx, dy)?;
    let d = plane_stress_constitutive(e, nu);
    let det_j = dx * dy / 4.0;
    let mut k = ElementMatrix::zeros();
    for (xi, wx) in gauss_2() {
        for (eta, wy) in gauss_2() {
            let b = strain_displacement(xi, eta, dx, dy);
            k += b.transpose() * d * b * (thickness * det_j * wx * wy);
        }
    }
    Ok(symmetrize(k))
}

/// Consistent element mass (2×2 Gauss integrates the bilinear products exactly).
pub fn element_mass(rho: f64, thickness: f64, dx: f64, dy: f64) -> Result<ElementMatrix> {
    if !(rho > 0.0) {
        return Err(invalid("mass density must be positive"));
    }
    check_geometry(thickness, dx, dy)?;
    let det_j = dx * dy / 4.0;
    let mut m = ElementMatrix::zeros();
    for (xi, wx) in gauss_2() {
        for (eta, wy) in gauss_2() {
            let n = shape(xi, eta);
            let w = rho * thickness * det_j * wx * wy;
            for a in 0..4 {
                for b in 0..4 {
                    let v = w * n[a] * n[b];
                    m[(2 * a, 2 * b)] += v;
                    m[(2 * a + 1, 2 * b + 1)] += v;
                }
            }
        }
    }
    Ok(symmetrize(m))
}

fn check_geometry(thickness: f64, dx: f64, dy: f64) -> Result<()> {
    if !(thickness > 0.0 && dx > 0.0 && dy > 0.0) {
        return Err(invalid("element thickness and size must be positive"));
    }
    Ok(())
}

fn symmetrize(m: ElementMatrix) -> ElementMatrix {
    (m + m.transpose()) * 0.5
}
