//! Global assembly of mass, stiffness, and Rayleigh damping on the free dofs.

use nalgebra::DVector;

use crate::element::{element_mass, element_stiffness, ElementMatrix, ElementVector};
use crate::error::{check_len, invalid, Error, Result};
use crate::load::LumpedMass;
use crate::material::{interp_derivatives, MaterialParams};
use crate::mesh::{Direction, DofMap, Mesh};
use crate::sparse::CsrMatrix;

/// Assembled system on the free dofs, plus the element-level data needed to
/// differentiate it with respect to the element densities.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    m: CsrMatrix,
    k: CsrMatrix,
    c: CsrMatrix,
    dofs: DofMap,
    element_dofs: Vec<[Option<usize>; 8]>,
    ke_unit: ElementMatrix,
    me_unit: ElementMatrix,
    mass_scale: Vec<f64>,
    stiffness_scale: Vec<f64>,
    dmass_scale: Vec<f64>,
    dstiffness_scale: Vec<f64>,
    alpha_m: f64,
    alpha_k: f64,
}

/// Assembles `M`, `K` and `C = α_M·M + α_K·K` for the physical densities
/// `density`. Constrained dofs are eliminated.
pub fn assemble(
    mesh: &Mesh,
    density: &[f64],
    material: &MaterialParams,
    lumped: &[LumpedMass],
) -> Result<SystemMatrices> {
    material.validate()?;
    check_len("assemble (density)", mesh.n_elements(), density.len())?;
    if let Some(b) = density.iter().find(|b| !(0.0..=1.0).contains(*b)) {
        return Err(invalid(format!("density {b} outside [0, 1]")));
    }
    let dofs = mesh.dof_map();
    let n = dofs.n_free();
    if n == 0 {
        return Err(Error::Singular(
            "every dof is constrained; mass matrix is empty".into(),
        ));
    }
    let (dx, dy) = mesh.element_size();
    let ke_unit = element_stiffness(material.e0, material.nu, mesh.thickness(), dx, dy)?;
    let me_unit = element_mass(material.rho0, mesh.thickness(), dx, dy)?;

    let mass_scale: Vec<f64> = density.iter().map(|&b| material.mass_scale(b)).collect();
    let stiffness_scale: Vec<f64> = density
        .iter()
        .map(|&b| material.stiffness_scale(b))
        .collect();
    let (dmass_scale, dstiffness_scale): (Vec<f64>, Vec<f64>) = density
        .iter()
        .map(|&b| interp_derivatives(b, material))
        .unzip();

    let element_dofs: Vec<[Option<usize>; 8]> = (0..mesh.n_elements())
        .map(|e| mesh.element_dofs(e).map(|g| dofs.free(g)))
        .collect();

    let mut tm = Vec::with_capacity(64 * mesh.n_elements() + lumped.len() * 2);
    let mut tk = Vec::with_capacity(64 * mesh.n_elements());
    for (e, ed) in element_dofs.iter().enumerate() {
        for a in 0..8 {
            let Some(i) = ed[a] else { continue };
            for b in 0..8 {
                let Some(j) = ed[b] else { continue };
                tm.push((i, j, mass_scale[e] * me_unit[(a, b)]));
                tk.push((i, j, stiffness_scale[e] * ke_unit[(a, b)]));
            }
        }
    }
    for lm in lumped {
        if lm.node >= mesh.n_nodes() {
            return Err(invalid(format!(
                "lumped mass node {} out of range",
                lm.node
            )));
        }
        for dir in [Direction::X, Direction::Y] {
            if let Some(i) = dofs.free(Mesh::dof(lm.node, dir)) {
                tm.push((i, i, lm.mass));
                tk.push((i, i, 0.0));
            }
        }
    }
    let m = CsrMatrix::from_triplets(n, n, &tm);
    let k = CsrMatrix::from_triplets(n, n, &tk);
    let c = CsrMatrix::linear_combination(&[(material.alpha_m, &m), (material.alpha_k, &k)])?;

    Ok(SystemMatrices {
        m,
        k,
        c,
        dofs,
        element_dofs,
        ke_unit,
        me_unit,
        mass_scale,
        stiffness_scale,
        dmass_scale,
        dstiffness_scale,
        alpha_m: material.alpha_m,
        alpha_k: material.alpha_k,
    })
}

impl SystemMatrices {
    /// A system given directly by its matrices, with no mesh behind it. All
    /// three must share one sparsity pattern. Design derivatives are
    /// unavailable on such a system (it has no elements).
    pub fn from_matrices(m: CsrMatrix, c: CsrMatrix, k: CsrMatrix) -> Result<Self> {
        if !(m.same_pattern(&k) && m.same_pattern(&c)) {
            return Err(invalid("M, C and K must share a sparsity pattern"));
        }
        let n = m.nrows();
        if n == 0 {
            return Err(Error::Singular("empty system".into()));
        }
        Ok(Self {
            m,
            k,
            c,
            dofs: DofMap::new(n, &Default::default()),
            element_dofs: Vec::new(),
            ke_unit: ElementMatrix::zeros(),
            me_unit: ElementMatrix::zeros(),
            mass_scale: Vec::new(),
            stiffness_scale: Vec::new(),
            dmass_scale: Vec::new(),
            dstiffness_scale: Vec::new(),
            alpha_m: 0.0,
            alpha_k: 0.0,
        })
    }

    pub fn m(&self) -> &CsrMatrix {
        &self.m
    }

    pub fn k(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn c(&self) -> &CsrMatrix {
        &self.c
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free()
    }

    pub fn n_elements(&self) -> usize {
        self.element_dofs.len()
    }

    pub fn rayleigh(&self) -> (f64, f64) {
        (self.alpha_m, self.alpha_k)
    }

    /// Stiffness matrix of one element at full density (`Ē = 1`).
    pub fn unit_stiffness(&self) -> &ElementMatrix {
        &self.ke_unit
    }

    /// Mass matrix of one element at full density (`V̄ = 1`).
    pub fn unit_mass(&self) -> &ElementMatrix {
        &self.me_unit
    }

    pub fn mass_scale(&self) -> &[f64] {
        &self.mass_scale
    }

    pub fn stiffness_scale(&self) -> &[f64] {
        &self.stiffness_scale
    }

    /// `dV̄_e/db_e` for every element.
    pub fn mass_scale_derivative(&self) -> &[f64] {
        &self.dmass_scale
    }

    /// `dĒ_e/db_e` for every element.
    pub fn stiffness_scale_derivative(&self) -> &[f64] {
        &self.dstiffness_scale
    }

    pub fn element_free_dofs(&self, e: usize) -> &[Option<usize>; 8] {
        &self.element_dofs[e]
    }

    /// Element-local slice of a free-dof vector; constrained entries are zero.
    pub fn gather(&self, e: usize, v: &DVector<f64>) -> ElementVector {
        let ed = &self.element_dofs[e];
        ElementVector::from_fn(|a, _| ed[a].map_or(0.0, |i| v[i]))
    }

    /// Influence vector `ι` selecting every free dof in `direction`.
    pub fn influence_vector(&self, direction: Direction) -> DVector<f64> {
        DVector::from_fn(self.n_free(), |i, _| {
            if self.dofs.global(i) % 2 == direction.offset() {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Element-local influence vector (constrained dofs zeroed).
    pub fn element_influence(&self, e: usize, direction: Direction) -> ElementVector {
        let ed = &self.element_dofs[e];
        ElementVector::from_fn(|a, _| {
            if ed[a].is_some() && a % 2 == direction.offset() {
                1.0
            } else {
                0.0
            }
        })
    }
}
