//! Galerkin projection of the adjoint recursion, the reduced backward solve,
//! and the full-order residual of a lifted solution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::adjoint::{initial_forcing, running_forcing, running_terms};
use crate::assembly::SystemMatrices;
use crate::error::{check_len, Error, Result};
use crate::rom::pod::ReducedBasis;
use crate::sparse::CsrMatrix;
use crate::time::{EffectiveOperators, HhtParams, TimeGrid};

/// `M̂₁ʳ = rᵀM̂₁r`, `M̂₀ʳ = rᵀM̂₀r`, `Mʳ = rᵀMr` (N_r × N_r) and
/// `Kʳ = Kr`, `Ĉ₀ʳ = Ĉ₀r` (N_f × N_r).
#[derive(Clone, Debug)]
pub struct ReducedOperators {
    pub m_hat1: DMatrix<f64>,
    pub m_hat0: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub c_hat0: DMatrix<f64>,
    basis: ReducedBasis,
    factor_m_hat1: Cholesky<f64, Dyn>,
    factor_m: Cholesky<f64, Dyn>,
}

fn congruence(a: &CsrMatrix, r: &DMatrix<f64>) -> DMatrix<f64> {
    let ar = a.mul_dense(r);
    let g = r.tr_mul(&ar);
    (&g + g.transpose()) * 0.5
}

pub fn project_operators(
    sys: &SystemMatrices,
    eff: &EffectiveOperators,
    basis: &ReducedBasis,
) -> Result<ReducedOperators> {
    check_len("project operators", sys.n_free(), basis.n_full())?;
    let r = basis.matrix();
    let m_hat1 = congruence(&eff.m_hat1, r);
    let m_hat0 = congruence(&eff.m_hat0, r);
    let m = congruence(sys.m(), r);
    let k = sys.k().mul_dense(r);
    let c_hat0 = eff.c_hat0.mul_dense(r);
    let factor_m_hat1 = Cholesky::new(m_hat1.clone()).ok_or_else(|| {
        Error::Singular("reduced M̂₁ is not positive definite (degenerate basis)".into())
    })?;
    let factor_m = Cholesky::new(m.clone()).ok_or_else(|| {
        Error::Singular("reduced M is not positive definite (degenerate basis)".into())
    })?;
    Ok(ReducedOperators {
        m_hat1,
        m_hat0,
        m,
        k,
        c_hat0,
        basis: basis.clone(),
        factor_m_hat1,
        factor_m,
    })
}

impl ReducedOperators {
    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }

    pub fn n_basis(&self) -> usize {
        self.basis.n_basis()
    }

    /// Dimension of the dense systems solved at every reduced step.
    pub fn solve_dim(&self) -> usize {
        self.m_hat1.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct ReducedAdjoint {
    /// Generalized coordinates `a_i`, `i = 0 … N_t`.
    pub coords: Vec<DVector<f64>>,
    /// Lifted adjoint `S_i = r a_i`.
    pub lifted: Vec<DVector<f64>>,
}

/// Backward recursion in the reduced space. The running vectors `ς`, `τ`
/// stay full-dimensional; right-hand sides are projected with `rᵀ`.
pub fn solve_adjoint_reduced(
    red: &ReducedOperators,
    partials: &[DVector<f64>],
    grid: &TimeGrid,
    hht: &HhtParams,
) -> Result<ReducedAdjoint> {
    let nf = red.basis.n_full();
    let nr = red.n_basis();
    let nt = grid.n_steps();
    check_len("reduced adjoint (state partials)", nt + 1, partials.len())?;
    for p in partials {
        check_len("reduced adjoint (partial length)", nf, p.len())?;
    }
    let dt = grid.dt();
    let zero = DVector::zeros(nf);
    let mut coords = vec![DVector::zeros(nr); nt + 1];

    let mut s = partials[nt].clone();
    let mut t = zero.clone();
    let rhs = red
        .basis
        .project(&running_forcing(&s, &zero, &t, &zero, hht, dt));
    coords[nt] = red.factor_m_hat1.solve(&rhs);

    let mut k_x = zero.clone();
    let mut c_x = zero;
    for i in (2..=nt).rev() {
        k_x.gemv(1.0, &red.k, &coords[i], 0.0);
        c_x.gemv(1.0, &red.c_hat0, &coords[i], 0.0);
        let (s_prev, t_prev) = running_terms(&partials[i - 1], &k_x, &c_x, &s, &t, dt);
        let mut rhs = red
            .basis
            .project(&running_forcing(&s_prev, &s, &t_prev, &t, hht, dt));
        rhs.gemv(-1.0, &red.m_hat0, &coords[i], 1.0);
        coords[i - 1] = red.factor_m_hat1.solve(&rhs);
        s = s_prev;
        t = t_prev;
    }
    let mut rhs0 = red.basis.project(&initial_forcing(&s, &t, hht, dt));
    rhs0.gemv(-1.0, &red.m_hat0, &coords[1], 1.0);
    coords[0] = red.factor_m.solve(&rhs0);

    let lifted = coords.iter().map(|a| red.basis.lift(a)).collect();
    Ok(ReducedAdjoint { coords, lifted })
}

/// Full-order defect of an approximate adjoint history.
#[derive(Clone, Debug)]
pub struct ResidualHistory {
    /// `R_i`: defect of the equation that defines `ϑ_i`, `i = 0 … N_t`.
    pub residuals: Vec<DVector<f64>>,
    pub norms: Vec<f64>,
}

/// Evaluates the full-order adjoint recursion at `lifted` (with `ς`, `τ`
/// rebuilt from `lifted`) and records the per-step defect.
pub fn compute_residuals(
    sys: &SystemMatrices,
    eff: &EffectiveOperators,
    lifted: &[DVector<f64>],
    partials: &[DVector<f64>],
    grid: &TimeGrid,
    hht: &HhtParams,
) -> Result<ResidualHistory> {
    let n = sys.n_free();
    let nt = grid.n_steps();
    check_len("residuals (lifted steps)", nt + 1, lifted.len())?;
    check_len("residuals (state partials)", nt + 1, partials.len())?;
    for (x, p) in lifted.iter().zip(partials) {
        check_len("residuals (lifted length)", n, x.len())?;
        check_len("residuals (partial length)", n, p.len())?;
    }
    let dt = grid.dt();
    let zero = DVector::zeros(n);
    let mut residuals = vec![zero.clone(); nt + 1];

    let mut s = partials[nt].clone();
    let mut t = zero.clone();
    let mut r = eff.m_hat1.mul_vec(&lifted[nt]);
    r -= running_forcing(&s, &zero, &t, &zero, hht, dt);
    residuals[nt] = r;

    let mut k_x = zero.clone();
    let mut c_x = zero;
    for i in (2..=nt).rev() {
        sys.k()
            .mul_vec_into(lifted[i].as_slice(), k_x.as_mut_slice());
        eff.c_hat0
            .mul_vec_into(lifted[i].as_slice(), c_x.as_mut_slice());
        let (s_prev, t_prev) = running_terms(&partials[i - 1], &k_x, &c_x, &s, &t, dt);
        let mut r = eff.m_hat1.mul_vec(&lifted[i - 1]);
        eff.m_hat0
            .mul_vec_add(1.0, lifted[i].as_slice(), r.as_mut_slice());
        r -= running_forcing(&s_prev, &s, &t_prev, &t, hht, dt);
        residuals[i - 1] = r;
        s = s_prev;
        t = t_prev;
    }
    let mut r0 = sys.m().mul_vec(&lifted[0]);
    eff.m_hat0
        .mul_vec_add(1.0, lifted[1].as_slice(), r0.as_mut_slice());
    r0 -= initial_forcing(&s, &t, hht, dt);
    residuals[0] = r0;

    let norms = residuals.iter().map(|r| r.norm()).collect();
    Ok(ResidualHistory { residuals, norms })
}
