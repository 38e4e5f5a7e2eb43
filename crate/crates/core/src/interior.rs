//! Interior semi-discrete right-hand side: skew-symmetric split advection and
//! the rescaled stress divergence, without boundary penalties.

use crate::fields::{StateField, StressField};
use crate::grid::TensorOps2D;

/// Nodal coefficient fields of `Ãⱼ = diag(uⱼ, uⱼ, uⱼ, 0)`, `B̃ = diag(0, 1/φ₀, 1/φ₀, 1)`
/// and the singular mass matrix `Ĩ = diag(1, 1, 1, 0)`.
#[derive(Debug, Clone)]
pub struct CoeffFields {
    pub a_coeff: [Vec<f64>; 2],
    pub b_coeff: Vec<f64>,
    pub i_mask: [f64; 4],
}

impl CoeffFields {
    pub fn from_state(state: &StateField) -> Self {
        CoeffFields {
            a_coeff: state.velocity(),
            b_coeff: state.phi0.iter().map(|p| 1.0 / p).collect(),
            i_mask: [1.0, 1.0, 1.0, 0.0],
        }
    }
}

/// Tendencies for `φ₀, φ₁, φ₂` and the residual of the constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsField {
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Residual of `0 = 𝔻ⱼS₃ⱼ + SAT`, not a tendency.
    pub r3: Vec<f64>,
}

impl RhsField {
    pub fn zeros(n: usize) -> Self {
        RhsField {
            r0: vec![0.0; n],
            r1: vec![0.0; n],
            r2: vec![0.0; n],
            r3: vec![0.0; n],
        }
    }

    pub fn row(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.r0,
            1 => &self.r1,
            2 => &self.r2,
            3 => &self.r3,
            _ => panic!("four rows"),
        }
    }

    pub fn row_mut(&mut self, k: usize) -> &mut Vec<f64> {
        match k {
            0 => &mut self.r0,
            1 => &mut self.r1,
            2 => &mut self.r2,
            3 => &mut self.r3,
            _ => panic!("four rows"),
        }
    }

    pub fn add_assign(&mut self, other: &RhsField) {
        for k in 0..4 {
            for (a, b) in self.row_mut(k).iter_mut().zip(other.row(k)) {
                *a += b;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.r0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r0.is_empty()
    }

    pub fn evolved(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(3 * self.len());
        y.extend_from_slice(&self.r0);
        y.extend_from_slice(&self.r1);
        y.extend_from_slice(&self.r2);
        y
    }
}

/// `−½[𝔻ⱼ(uⱼ φₖ) + uⱼ 𝔻ⱼ φₖ]` for `k = 0, 1, 2` with advection speeds taken
/// from `velocity`. Row 3 is zero.
pub fn advective_rhs_with(components: [&[f64]; 3], velocity: &[Vec<f64>; 2], ops: &TensorOps2D) -> RhsField {
    let n = ops.len();
    let mut out = RhsField::zeros(n);
    let mut flux = vec![0.0; n];
    let mut dflux = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    for (k, phi) in components.iter().enumerate() {
        let row = out.row_mut(k);
        for (j, u) in velocity.iter().enumerate() {
            for m in 0..n {
                flux[m] = u[m] * phi[m];
            }
            if j == 0 {
                ops.dx_into(&flux, &mut dflux);
                ops.dx_into(phi, &mut dphi);
            } else {
                ops.dy_into(&flux, &mut dflux);
                ops.dy_into(phi, &mut dphi);
            }
            for m in 0..n {
                row[m] -= 0.5 * (dflux[m] + u[m] * dphi[m]);
            }
        }
    }
    out
}

pub fn advective_rhs(state: &StateField, ops: &TensorOps2D) -> RhsField {
    let velocity = state.velocity();
    advective_rhs_with([&state.phi0, &state.phi1, &state.phi2], &velocity, ops)
}

/// `B̃ 𝔻ⱼ Sⱼ`: rows 1, 2 get `(1/φ₀) 𝔻ⱼ Sᵢⱼ`, row 3 gets `𝔻ⱼ S₃ⱼ = −(𝔻₁u₁ + 𝔻₂u₂)`.
pub fn viscous_rhs(state: &StateField, stress: &StressField, ops: &TensorOps2D) -> RhsField {
    let n = ops.len();
    let mut out = RhsField::zeros(n);
    for i in 0..2 {
        let sx = ops.dx(&stress.flux(i, 0));
        let sy = ops.dy(&stress.flux(i, 1));
        let row = out.row_mut(i + 1);
        for m in 0..n {
            row[m] = (sx[m] + sy[m]) / state.phi0[m];
        }
    }
    let div = divergence_of(&stress.u, ops);
    for m in 0..n {
        out.r3[m] = -div[m];
    }
    out
}

/// `𝔻₁u₁ + 𝔻₂u₂`.
pub fn divergence_of(u: &[Vec<f64>; 2], ops: &TensorOps2D) -> Vec<f64> {
    let mut div = ops.dx(&u[0]);
    let dy = ops.dy(&u[1]);
    for (a, b) in div.iter_mut().zip(dy) {
        *a += b;
    }
    div
}

/// Discrete divergence of the recovered velocity; the negative of the
/// interior constraint row.
pub fn divergence_residual(state: &StateField, ops: &TensorOps2D) -> Vec<f64> {
    divergence_of(&state.velocity(), ops)
}

/// `Φᵀ(𝔹ⱼAⱼ)Φ` by direct boundary quadrature of `uₙ (φ₀² + φ₁² + φ₂²)`.
pub fn advective_boundary_form(a: [&[f64]; 3], b: [&[f64]; 3], velocity: &[Vec<f64>; 2], ops: &TensorOps2D) -> f64 {
    let mut acc = 0.0;
    for j in 0..2 {
        let mut ub = vec![0.0; ops.len()];
        for (ca, cb) in a.iter().zip(b.iter()) {
            for (m, v) in ub.iter_mut().enumerate() {
                *v = velocity[j][m] * cb[m];
            }
            acc += ops.boundary_form(j, ca, &ub);
        }
    }
    acc
}

/// `Σₖ aₖᵀ ℙ bₖ` over the three evolved rows (the `Ĩ`-masked inner product).
pub fn masked_inner(a: [&[f64]; 3], b: [&[f64]; 3], ops: &TensorOps2D) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| ops.inner(x, y)).sum()
}
