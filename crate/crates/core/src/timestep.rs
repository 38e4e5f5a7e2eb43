//! Classical four-stage Runge–Kutta integration of the evolved rows with the
//! pressure closure solved inside every stage.

use crate::diagnostics::{energy_budget, EnergyBudget};
use crate::error::{Error, Result};
use crate::fields::{FluidPair, StateField};
use crate::grid::Grid2D;
use crate::pressure::project_velocity;
use crate::problem::{Evaluation, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtMode {
    Fixed,
    Cfl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControls {
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub dt_max: f64,
    pub mode: DtMode,
    /// Hard cap on the number of steps; zero means unlimited.
    pub max_steps: usize,
}

impl TimeControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("time.t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 2.0) {
            return Err(Error::Config(format!("time.cfl must lie in (0, 2], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Config(format!("time.dt_max must be positive, got {}", self.dt_max)));
        }
        Ok(())
    }
}

/// One classical RK4 step for `y' = f(t, y)`.
pub fn rk4_step<F>(y: &[f64], t: f64, dt: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k1))?;
    let k3 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k2))?;
    let k4 = f(t + dt, &axpy(dt, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// `cfl / [max|u₁|/hx + max|u₂|/hy + 2 max(μ/ρ)(1/hx² + 1/hy²)]`, or `dt_max` without wave speeds.
pub fn stable_dt(state: &StateField, grid: &Grid2D, fluids: &FluidPair, cfl: f64, dt_max: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 2.0) {
        return Err(Error::Config(format!("cfl must lie in (0, 2], got {cfl}")));
    }
    let [u1, u2] = state.velocity();
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let nu = state
        .phi0
        .iter()
        .map(|&p| fluids.viscosity_from_phi0(p) / (p * p))
        .fold(0.0f64, f64::max);
    let denom =
        max_abs(&u1) / grid.hx + max_abs(&u2) / grid.hy + 2.0 * nu * (1.0 / (grid.hx * grid.hx) + 1.0 / (grid.hy * grid.hy));
    if denom > 0.0 {
        Ok((cfl / denom).min(dt_max))
    } else {
        Ok(dt_max)
    }
}

/// Integrator holding the current state with its pressure and evaluation.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub problem: Problem,
    pub state: StateField,
    pub t: f64,
    pub eval: Evaluation,
    /// Project the velocity onto the discrete constraint after every step.
    pub reproject: bool,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Budgets at the four stage evaluations.
    pub stages: Vec<EnergyBudget>,
    /// Budget at the accepted state.
    pub accepted: EnergyBudget,
}

impl Stepper {
    pub fn new(problem: Problem, state: StateField, t: f64) -> Result<Self> {
        let (state, eval) = problem.rhs_full(&state, t)?;
        Ok(Stepper {
            problem,
            state,
            t,
            eval,
            reproject: true,
        })
    }

    pub fn budget(&self) -> EnergyBudget {
        energy_budget(&self.state, &self.eval, &self.problem.ops)
    }

    /// Advance by `dt`. On error the stepper keeps the last valid state.
    pub fn step(&mut self, dt: f64) -> Result<StepRecord> {
        let mut stages = vec![self.budget()];
        let y0 = self.state.evolved();
        let template = self.state.clone();
        let mut first = Some(self.eval.rhs.evolved());
        let problem = &self.problem;
        let y1 = rk4_step(&y0, self.t, dt, |t, y| {
            if let Some(k) = first.take() {
                return Ok(k);
            }
            let mut s = template.clone();
            s.set_evolved(y);
            let (s, e) = problem.rhs_full(&s, t)?;
            stages.push(energy_budget(&s, &e, &problem.ops));
            Ok(e.rhs.evolved())
        })?;
        let mut next = template;
        next.set_evolved(&y1);
        if self.reproject {
            next = project_velocity(&self.problem, &next)?;
        }
        let (state, eval) = self.problem.rhs_full(&next, self.t + dt)?;
        self.state = state;
        self.eval = eval;
        self.t += dt;
        Ok(StepRecord {
            stages,
            accepted: self.budget(),
        })
    }
}
