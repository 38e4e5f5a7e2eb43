//! Full semi-discrete right-hand side: interior terms, boundary penalties,
//! optional body forcing, and the pressure closure.

use std::fmt;
use std::sync::Arc;

use crate::boundary::{boundary_sats, BoundarySpec, Classification, SatOutput};
use crate::error::Result;
use crate::fields::{compute_stress, FluidPair, StateField, StressField};
use crate::grid::TensorOps2D;
use crate::interior::{advective_rhs, viscous_rhs, RhsField};
use crate::pressure;

/// Body acceleration `F(t, x, y)`; enters the momentum rows as `φ₀ F`.
pub type Forcing = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct Problem {
    pub ops: TensorOps2D,
    pub fluids: FluidPair,
    pub bcs: BoundarySpec,
    /// Constraint drift damping rate.
    pub kappa: f64,
    pub forcing: Option<Forcing>,
    pub factors: pressure::FactorCache,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("grid", &self.ops.grid)
            .field("order", &self.ops.order())
            .field("fluids", &self.fluids)
            .field("bcs", &self.bcs)
            .field("kappa", &self.kappa)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

/// One evaluation of the semi-discrete operator at a given state (pressure included).
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub t: f64,
    /// Rows 0–2: `dΦ/dt`. Row 3: constraint residual.
    pub rhs: RhsField,
    pub advective: RhsField,
    pub viscous: RhsField,
    pub sat: SatOutput,
    /// Momentum forcing rows `φ₀ Fᵢ`, zero without forcing.
    pub forcing: [Vec<f64>; 2],
    pub stress: StressField,
    pub classes: Classification,
}

impl Problem {
    pub fn new(ops: TensorOps2D, fluids: FluidPair, bcs: BoundarySpec) -> Self {
        Problem {
            ops,
            fluids,
            bcs,
            kappa: 0.0,
            forcing: None,
            factors: Default::default(),
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn classify(&self, state: &StateField) -> Classification {
        Classification::classify(state, &self.ops, &self.bcs)
    }

    /// Evaluate with the pressure currently stored in `state.phi3`.
    pub fn evaluate(&self, state: &StateField, t: f64) -> Result<Evaluation> {
        self.evaluate_with(state, t, self.classify(state))
    }

    pub fn evaluate_with(&self, state: &StateField, t: f64, classes: Classification) -> Result<Evaluation> {
        let ops = &self.ops;
        let n = ops.len();
        let stress = compute_stress(state, &self.fluids, ops)?;
        let advective = advective_rhs(state, ops);
        let viscous = viscous_rhs(state, &stress, ops);
        let sat = boundary_sats(state, &stress, ops, &self.bcs, &classes, &self.fluids)?;
        let mut forcing = [vec![0.0; n], vec![0.0; n]];
        if let Some(f) = &self.forcing {
            for k in 0..n {
                let (x, y) = ops.grid.coords(k);
                let a = f(t, x, y);
                forcing[0][k] = state.phi0[k] * a[0];
                forcing[1][k] = state.phi0[k] * a[1];
            }
        }
        let mut rhs = advective.clone();
        rhs.add_assign(&viscous);
        rhs.add_assign(&sat.rows);
        for i in 0..2 {
            for (r, f) in rhs.row_mut(i + 1).iter_mut().zip(&forcing[i]) {
                *r += f;
            }
        }
        Ok(Evaluation {
            t,
            rhs,
            advective,
            viscous,
            sat,
            forcing,
            stress,
            classes,
        })
    }

    /// Solve the pressure closure for `state`'s velocity and evaluate the
    /// operator with that pressure. Returns the state carrying the new pressure.
    pub fn rhs_full(&self, state: &StateField, t: f64) -> Result<(StateField, Evaluation)> {
        let classes = self.classify(state);
        let mut s = state.clone();
        s.phi3.iter_mut().for_each(|p| *p = 0.0);
        let base = self.evaluate_with(&s, t, classes.clone())?;
        s.phi3 = pressure::solve_pressure(self, &s, &base)?.p;
        let eval = self.evaluate_with(&s, t, classes)?;
        Ok((s, eval))
    }
}
