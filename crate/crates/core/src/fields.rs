//! Physical state, material constants, variable changes and stresses.
//!
//! The evolved variables are `Φ = (√ρ, √ρ u₁, √ρ u₂, p)`. Velocity is always
//! recovered as `uⱼ = φⱼ / φ₀`; no other definition is used anywhere.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, TensorOps2D};

/// Out-of-range tolerance for the recovered volume fraction.
pub const ALPHA_TOL: f64 = 1e-6;

/// Runs abort when `φ₀` drops below this multiple of `√ρ_g`.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidPair {
    pub rho_l: f64,
    pub rho_g: f64,
    pub mu_l: f64,
    pub mu_g: f64,
}

impl FluidPair {
    pub fn new(rho_l: f64, rho_g: f64, mu_l: f64, mu_g: f64) -> Result<Self> {
        let all = [rho_l, rho_g, mu_l, mu_g];
        if !all.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidFluids(format!(
                "densities and viscosities must be positive (rho_l={rho_l}, rho_g={rho_g}, mu_l={mu_l}, mu_g={mu_g})"
            )));
        }
        if rho_l < rho_g {
            return Err(Error::InvalidFluids(format!(
                "liquid must be the denser phase (rho_l={rho_l} < rho_g={rho_g})"
            )));
        }
        Ok(FluidPair {
            rho_l,
            rho_g,
            mu_l,
            mu_g,
        })
    }

    /// Single phase with density `rho` and viscosity `mu`.
    pub fn single(rho: f64, mu: f64) -> Result<Self> {
        Self::new(rho, rho, mu, mu)
    }

    pub fn density(&self, alpha: f64) -> f64 {
        alpha * self.rho_l + (1.0 - alpha) * self.rho_g
    }

    pub fn viscosity(&self, alpha: f64) -> f64 {
        alpha * self.mu_l + (1.0 - alpha) * self.mu_g
    }

    /// Volume fraction from `φ₀ = √ρ`. With equal densities the fraction is
    /// not recoverable from the state and is reported as zero.
    pub fn alpha_from_phi0(&self, phi0: f64) -> f64 {
        let drho = self.rho_l - self.rho_g;
        if drho == 0.0 {
            0.0
        } else {
            (phi0 * phi0 - self.rho_g) / drho
        }
    }

    pub fn viscosity_from_phi0(&self, phi0: f64) -> f64 {
        self.viscosity(self.alpha_from_phi0(phi0))
    }

    pub fn phi0_floor(&self) -> f64 {
        POSITIVITY_FLOOR * self.rho_g.sqrt()
    }
}

pub fn mixture_density(alpha: &[f64], fluids: &FluidPair) -> Vec<f64> {
    alpha.iter().map(|&a| fluids.density(a)).collect()
}

pub fn mixture_viscosity(alpha: &[f64], fluids: &FluidPair) -> Vec<f64> {
    alpha.iter().map(|&a| fluids.viscosity(a)).collect()
}

/// `Φ = (φ₀, φ₁, φ₂, φ₃)` as nodal fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi3: Vec<f64>,
}

impl StateField {
    pub fn zeros(n: usize) -> Self {
        StateField {
            phi0: vec![0.0; n],
            phi1: vec![0.0; n],
            phi2: vec![0.0; n],
            phi3: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.phi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi0.is_empty()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.phi0,
            1 => &self.phi1,
            2 => &self.phi2,
            3 => &self.phi3,
            _ => panic!("state has four components"),
        }
    }

    pub fn component_mut(&mut self, k: usize) -> &mut Vec<f64> {
        match k {
            0 => &mut self.phi0,
            1 => &mut self.phi1,
            2 => &mut self.phi2,
            3 => &mut self.phi3,
            _ => panic!("state has four components"),
        }
    }

    /// `uⱼ = φⱼ / φ₀`.
    pub fn velocity(&self) -> [Vec<f64>; 2] {
        let u1 = self.phi1.iter().zip(&self.phi0).map(|(a, b)| a / b).collect();
        let u2 = self.phi2.iter().zip(&self.phi0).map(|(a, b)| a / b).collect();
        [u1, u2]
    }

    /// Reject states where `φ₀` is at or below the positivity floor.
    pub fn check_positivity(&self, fluids: &FluidPair) -> Result<()> {
        let floor = fluids.phi0_floor();
        for (node, &value) in self.phi0.iter().enumerate() {
            if !(value >= floor) {
                return Err(Error::Positivity { node, value, floor });
            }
        }
        Ok(())
    }

    pub fn alpha(&self, fluids: &FluidPair) -> Vec<f64> {
        self.phi0.iter().map(|&p| fluids.alpha_from_phi0(p)).collect()
    }

    /// Number of nodes whose recovered volume fraction lies outside
    /// `[-ALPHA_TOL, 1 + ALPHA_TOL]`.
    pub fn alpha_violations(&self, fluids: &FluidPair) -> usize {
        self.alpha(fluids)
            .iter()
            .filter(|&&a| !(-ALPHA_TOL..=1.0 + ALPHA_TOL).contains(&a))
            .count()
    }

    /// The three evolved components stacked into one vector.
    pub fn evolved(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(3 * self.len());
        y.extend_from_slice(&self.phi0);
        y.extend_from_slice(&self.phi1);
        y.extend_from_slice(&self.phi2);
        y
    }

    /// Overwrite the evolved components from a stacked vector.
    pub fn set_evolved(&mut self, y: &[f64]) {
        let n = self.len();
        assert_eq!(y.len(), 3 * n);
        self.phi0.copy_from_slice(&y[..n]);
        self.phi1.copy_from_slice(&y[n..2 * n]);
        self.phi2.copy_from_slice(&y[2 * n..]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveField {
    pub alpha: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub p: Vec<f64>,
}

pub fn primitives_to_state(prim: &PrimitiveField, fluids: &FluidPair, grid: &Grid2D) -> Result<StateField> {
    let n = prim.alpha.len();
    if [prim.u1.len(), prim.u2.len(), prim.p.len()].iter().any(|&l| l != n) {
        return Err(Error::SizeMismatch("primitive fields differ in length".into()));
    }
    let rho = mixture_density(&prim.alpha, fluids);
    let mut state = StateField::zeros(n);
    for k in 0..n {
        if !(rho[k] > 0.0) {
            let (x, y) = if n == grid.len() {
                grid.coords(k)
            } else {
                (f64::NAN, f64::NAN)
            };
            return Err(Error::NonPositiveDensity {
                node: k,
                x,
                y,
                value: rho[k],
            });
        }
        let s = rho[k].sqrt();
        state.phi0[k] = s;
        state.phi1[k] = s * prim.u1[k];
        state.phi2[k] = s * prim.u2[k];
        state.phi3[k] = prim.p[k];
    }
    Ok(state)
}

pub fn state_to_primitives(state: &StateField, fluids: &FluidPair) -> PrimitiveField {
    let [u1, u2] = state.velocity();
    PrimitiveField {
        alpha: state.alpha(fluids),
        u1,
        u2,
        p: state.phi3.clone(),
    }
}

/// Viscous stress and the fluxes `Sⱼ` at every node.
#[derive(Debug, Clone)]
pub struct StressField {
    /// Recovered velocity `u = φ/φ₀`.
    pub u: [Vec<f64>; 2],
    /// `grad[i][j] = 𝔻ⱼ uᵢ`.
    pub grad: [[Vec<f64>; 2]; 2],
    pub mu: Vec<f64>,
    pub tau_star_11: Vec<f64>,
    pub tau_star_12: Vec<f64>,
    pub tau_star_22: Vec<f64>,
    pub p: Vec<f64>,
}

impl StressField {
    /// `τ*ᵢⱼ`, symmetric.
    pub fn tau_star(&self, i: usize, j: usize) -> &[f64] {
        match (i, j) {
            (0, 0) => &self.tau_star_11,
            (1, 1) => &self.tau_star_22,
            _ => &self.tau_star_12,
        }
    }

    /// Flux `Sᵢⱼ = τ*ᵢⱼ − δᵢⱼ p` for `i ∈ {0, 1}`, and `S₃ⱼ = −uⱼ` for `i = 2`.
    pub fn flux(&self, i: usize, j: usize) -> Vec<f64> {
        if i == 2 {
            return self.u[j].iter().map(|v| -v).collect();
        }
        let tau = self.tau_star(i, j);
        if i == j {
            tau.iter().zip(&self.p).map(|(t, p)| t - p).collect()
        } else {
            tau.to_vec()
        }
    }

    /// Total stress `τᵢⱼ = τ*ᵢⱼ − δᵢⱼ p` at one node.
    pub fn total(&self, i: usize, j: usize, k: usize) -> f64 {
        let t = self.tau_star(i, j)[k];
        if i == j {
            t - self.p[k]
        } else {
            t
        }
    }
}

pub fn compute_stress(state: &StateField, fluids: &FluidPair, ops: &TensorOps2D) -> Result<StressField> {
    state.check_positivity(fluids)?;
    let u = state.velocity();
    let grad = [[ops.dx(&u[0]), ops.dy(&u[0])], [ops.dx(&u[1]), ops.dy(&u[1])]];
    let mu: Vec<f64> = state.phi0.iter().map(|&p| fluids.viscosity_from_phi0(p)).collect();
    let n = state.len();
    let mut t11 = vec![0.0; n];
    let mut t12 = vec![0.0; n];
    let mut t22 = vec![0.0; n];
    for k in 0..n {
        t11[k] = 2.0 * mu[k] * grad[0][0][k];
        t12[k] = mu[k] * (grad[0][1][k] + grad[1][0][k]);
        t22[k] = 2.0 * mu[k] * grad[1][1][k];
    }
    Ok(StressField {
        u,
        grad,
        mu,
        tau_star_11: t11,
        tau_star_12: t12,
        tau_star_22: t22,
        p: state.phi3.clone(),
    })
}

/// `2 (𝔻ⱼuᵢ)ᵀ ℙ τ*ᵢⱼ`, the discrete viscous dissipation.
pub fn dissipation(stress: &StressField, ops: &TensorOps2D) -> f64 {
    let mut acc = 0.0;
    for k in 0..ops.len() {
        let g = &stress.grad;
        let local = g[0][0][k] * stress.tau_star_11[k]
            + (g[0][1][k] + g[1][0][k]) * stress.tau_star_12[k]
            + g[1][1][k] * stress.tau_star_22[k];
        acc += ops.pp[k] * local;
    }
    2.0 * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ops(n: usize, order: usize) -> TensorOps2D {
        TensorOps2D::new(&Grid2D::unit(n, order).unwrap(), order).unwrap()
    }

    #[test]
    fn mixture_endpoints_and_midpoint() {
        let f = FluidPair::new(1000.0, 1.0, 1e-3, 1e-5).unwrap();
        assert_eq!(mixture_density(&[1.0, 0.0], &f), vec![1000.0, 1.0]);
        assert_eq!(mixture_density(&[0.5], &f), vec![500.5]);
        assert_eq!(mixture_viscosity(&[1.0, 0.0], &f), vec![1e-3, 1e-5]);
    }

    #[test]
    fn fluid_validation() {
        assert!(FluidPair::new(1.0, 2.0, 1.0, 1.0).is_err());
        assert!(FluidPair::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(FluidPair::new(1.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn conversion_examples() {
        let grid = Grid2D::unit(4, 2).unwrap();
        // rho = 4 via alpha with rho_l = 7, rho_g = 1: alpha = 0.5
        let f = FluidPair::new(7.0, 1.0, 1.0, 1.0).unwrap();
        let n = grid.len();
        let prim = PrimitiveField {
            alpha: vec![0.5; n],
            u1: vec![1.0; n],
            u2: vec![2.0; n],
            p: vec![3.0; n],
        };
        let s = primitives_to_state(&prim, &f, &grid).unwrap();
        assert_eq!((s.phi0[0], s.phi1[0], s.phi2[0], s.phi3[0]), (2.0, 2.0, 4.0, 3.0));

        let quiet = PrimitiveField {
            alpha: vec![0.3; n],
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            p: vec![0.0; n],
        };
        let s = primitives_to_state(&quiet, &f, &grid).unwrap();
        assert!((s.phi0[0] - f.density(0.3).sqrt()).abs() < 1e-15);
        assert_eq!((s.phi1[0], s.phi2[0], s.phi3[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn non_positive_density_is_located() {
        let grid = Grid2D::unit(4, 2).unwrap();
        let f = FluidPair::new(2.0, 1.0, 1.0, 1.0).unwrap();
        let n = grid.len();
        let mut alpha = vec![0.5; n];
        alpha[5] = -3.0;
        let prim = PrimitiveField {
            alpha,
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            p: vec![0.0; n],
        };
        match primitives_to_state(&prim, &f, &grid) {
            Err(Error::NonPositiveDensity { node, .. }) => assert_eq!(node, 5),
            other => panic!("expected density error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn primitive_round_trip(alpha in 0.0f64..=1.0, u1 in -5.0f64..5.0, u2 in -5.0f64..5.0, p in -10.0f64..10.0) {
            let grid = Grid2D::unit(4, 2).unwrap();
            let f = FluidPair::new(1000.0, 1.0, 1e-3, 1e-5).unwrap();
            let n = grid.len();
            let prim = PrimitiveField { alpha: vec![alpha; n], u1: vec![u1; n], u2: vec![u2; n], p: vec![p; n] };
            let back = state_to_primitives(&primitives_to_state(&prim, &f, &grid).unwrap(), &f);
            prop_assert!((back.alpha[3] - alpha).abs() <= 1e-13);
            prop_assert!((back.u1[3] - u1).abs() <= 1e-13 * u1.abs().max(1.0));
            prop_assert!((back.u2[3] - u2).abs() <= 1e-13 * u2.abs().max(1.0));
            prop_assert_eq!(back.p[3], p);
        }
    }

    fn state_from_velocity(ops: &TensorOps2D, u1: impl Fn(f64, f64) -> f64, u2: impl Fn(f64, f64) -> f64) -> StateField {
        let g = &ops.grid;
        let n = g.len();
        StateField {
            phi0: vec![1.0; n],
            phi1: g.sample(u1),
            phi2: g.sample(u2),
            phi3: vec![0.0; n],
        }
    }

    #[test]
    fn stress_examples() {
        let f = FluidPair::single(1.0, 1.0).unwrap();
        for order in [2, 4] {
            let ops = ops(9, order);
            let s = compute_stress(&state_from_velocity(&ops, |_, _| 0.7, |_, _| -0.2), &f, &ops).unwrap();
            assert!(s
                .tau_star_11
                .iter()
                .chain(&s.tau_star_12)
                .chain(&s.tau_star_22)
                .all(|v| v.abs() < 1e-12));

            let s = compute_stress(&state_from_velocity(&ops, |_, y| y, |_, _| 0.0), &f, &ops).unwrap();
            assert!(s.tau_star_12.iter().all(|v| (v - 1.0).abs() < 1e-12));
            assert!(s.tau_star_11.iter().chain(&s.tau_star_22).all(|v| v.abs() < 1e-12));

            let s = compute_stress(&state_from_velocity(&ops, |_, y| -y, |x, _| x), &f, &ops).unwrap();
            assert!(s.tau_star_12.iter().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn dissipation_is_non_negative() {
        let f = FluidPair::new(1000.0, 1.0, 0.3, 0.01).unwrap();
        let ops = ops(11, 4);
        let g = &ops.grid;
        for seed in 0..10 {
            let a = seed as f64;
            let mut s = state_from_velocity(&ops, |x, y| (a * x + 2.0 * y).sin(), |x, y| (x * y * a).cos() - x);
            s.phi0 = g.sample(|x, y| f.density(0.5 + 0.5 * (3.0 * x - a * y).sin()).sqrt());
            let st = compute_stress(&s, &f, &ops).unwrap();
            assert!(dissipation(&st, &ops) >= -1e-12);
        }
    }

    #[test]
    fn positivity_floor_rejects() {
        let f = FluidPair::new(1000.0, 1.0, 1.0, 1.0).unwrap();
        let ops = ops(5, 2);
        let mut s = state_from_velocity(&ops, |_, _| 0.0, |_, _| 0.0);
        s.phi0[7] = 1e-9;
        assert!(matches!(compute_stress(&s, &f, &ops), Err(Error::Positivity { node: 7, .. })));
    }
}
