//! Term-by-term semi-discrete energy rate, mass and constraint monitors.

use crate::boundary::boundary_energy_quadrature;
use crate::error::{Error, Result};
use crate::fields::{dissipation, FluidPair, StateField};
use crate::grid::TensorOps2D;
use crate::interior::{divergence_residual, masked_inner};
use crate::problem::Evaluation;

/// One record of the energy rate identity
/// `dE/dt + dissipation + bt_advective + bt_viscous − sat_energy − constraint_work − forcing_work = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBudget {
    pub t: f64,
    /// `Φᵀℙ̃Φ`.
    pub energy: f64,
    /// `2Φᵀℙ̃ dΦ/dt` from the assembled right-hand side.
    pub de_dt: f64,
    /// `2(𝔻ⱼuᵢ)ᵀℙτ*ᵢⱼ`.
    pub dissipation: f64,
    /// `Φᵀ(𝔹ⱼAⱼ)Φ`.
    pub bt_advective: f64,
    /// `−2uᵢᵀ𝔹ⱼτᵢⱼ`.
    pub bt_viscous: f64,
    /// `2Φᵀℙ·SAT` over all four rows, from node-local boundary formulas.
    pub sat_energy: f64,
    /// `−2pᵀℙr₃`.
    pub constraint_work: f64,
    /// `2Φᵀℙ̃f` for body forcing `f`.
    pub forcing_work: f64,
    /// `∮ GᵀG ds`.
    pub data_flux: f64,
    pub residual: f64,
    /// `max(1, |E|, Σ|terms|)`.
    pub scale: f64,
}

impl EnergyBudget {
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.scale
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        if self.residual.is_finite() && self.residual.abs() <= tol * self.scale {
            Ok(())
        } else {
            Err(Error::IdentityViolation {
                t: self.t,
                residual: self.residual,
                bound: tol * self.scale,
            })
        }
    }
}

/// `Σ ℙ (φ₀² + φ₁² + φ₂²)`.
pub fn energy_norm(state: &StateField, ops: &TensorOps2D) -> f64 {
    let c = [state.phi0.as_slice(), &state.phi1, &state.phi2];
    masked_inner(c, c, ops)
}

/// Budget for `eval`, which must have been produced from `state`.
pub fn energy_budget(state: &StateField, eval: &Evaluation, ops: &TensorOps2D) -> EnergyBudget {
    let c = [state.phi0.as_slice(), &state.phi1, &state.phi2];
    let r = &eval.rhs;
    let energy = masked_inner(c, c, ops);
    let de_dt = 2.0 * masked_inner(c, [&r.r0, &r.r1, &r.r2], ops);
    let diss = dissipation(&eval.stress, ops);
    let edges = boundary_energy_quadrature(state, &eval.stress, ops);
    let bt_advective: f64 = edges.iter().map(|e| e.advective).sum();
    let bt_viscous: f64 = edges.iter().map(|e| e.viscous).sum();
    let sat_energy = eval.sat.energy;
    let constraint_work = -2.0 * ops.inner(&state.phi3, &r.r3);
    let forcing_work = 2.0 * (ops.inner(&state.phi1, &eval.forcing[0]) + ops.inner(&state.phi2, &eval.forcing[1]));
    let terms = [
        de_dt,
        diss,
        bt_advective,
        bt_viscous,
        sat_energy,
        constraint_work,
        forcing_work,
    ];
    let residual = de_dt + diss + bt_advective + bt_viscous - sat_energy - constraint_work - forcing_work;
    let scale = terms.iter().map(|v| v.abs()).sum::<f64>().max(energy.abs()).max(1.0);
    EnergyBudget {
        t: eval.t,
        energy,
        de_dt,
        dissipation: diss,
        bt_advective,
        bt_viscous,
        sat_energy,
        constraint_work,
        forcing_work,
        data_flux: eval.sat.data_flux,
        residual,
        scale,
    }
}

/// `Φᵀ(𝔹ⱼAⱼ)Φ` through the volume identity `−2Φᵀℙ̃·adv(Φ)`.
pub fn bt_advective_volume(state: &StateField, eval: &Evaluation, ops: &TensorOps2D) -> f64 {
    let a = &eval.advective;
    -2.0 * masked_inner([&state.phi0, &state.phi1, &state.phi2], [&a.r0, &a.r1, &a.r2], ops)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassReport {
    /// `∫ρ dΩ`.
    pub total_mass: f64,
    /// `∮ ρ uₙ ds`.
    pub mass_flux: f64,
    /// `total_mass − initial + ∫ mass_flux dt` as accumulated by the caller.
    pub drift: f64,
}

pub fn mass_report(state: &StateField, ops: &TensorOps2D) -> MassReport {
    let rho: Vec<f64> = state.phi0.iter().map(|p| p * p).collect();
    let total_mass = ops.pp.iter().zip(&rho).map(|(w, r)| w * r).sum();
    let mut mass_flux = 0.0;
    for geom in &ops.edges {
        for (&k, &w) in geom.nodes.iter().zip(&geom.weights) {
            mass_flux += w * state.phi0[k] * (state.phi1[k] * geom.normal[0] + state.phi2[k] * geom.normal[1]);
        }
    }
    MassReport {
        total_mass,
        mass_flux,
        drift: 0.0,
    }
}

/// `‖𝔻ⱼuⱼ‖_ℙ`.
pub fn constraint_monitor(state: &StateField, ops: &TensorOps2D) -> f64 {
    ops.norm(&divergence_residual(state, ops))
}

/// Smallest and largest recovered volume fraction.
pub fn alpha_range(state: &StateField, fluids: &FluidPair) -> (f64, f64) {
    state
        .alpha(fluids)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| (lo.min(a), hi.max(a)))
}
