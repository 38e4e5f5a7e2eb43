//! Pressure closure of the divergence constraint.
//!
//! The constraint row `r₃ = −𝔻ⱼuⱼ + SAT₃` is split by node type. At nodes that
//! carry a characteristic penalty, `r₃` depends on the local pressure directly
//! and is set to zero algebraically. Everywhere else `r₃` depends on velocity
//! only, and the pressure is chosen so that `d r₃/dt = −κ r₃`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex};

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::solvers::Solve;
use faer::matrix_free::bicgstab::{bicgstab, bicgstab_scratch, BicgParams};
use faer::matrix_free::{IdentityPrecond, LinOp, Precond};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, MatRef, Par};

use crate::boundary::{char_transpose, Classification, NodeClass};
use crate::error::{Error, Result};
use crate::fields::StateField;
use crate::grid::TensorOps2D;
use crate::problem::{Evaluation, Problem};

/// Assembled linear system for the pressure.
#[derive(Debug, Clone)]
pub struct PressureSystem {
    pub n: usize,
    /// Sparse rows `(column, value)` in ascending column order.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    /// Nodes whose row is the algebraic condition `r₃ = 0`.
    pub algebraic: Vec<bool>,
    /// Row replaced by `p = 0` when the operator has a constant null mode.
    pub pinned: Option<usize>,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct PressureSolution {
    pub p: Vec<f64>,
    /// `‖L p − b‖∞ / max(‖b‖∞, ‖L‖∞ ‖p‖∞)` before the mean shift.
    pub relative_residual: f64,
}

impl PressureSystem {
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(c, v)| v * p[c]).sum()).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        crate::sbp::write_dense_csv(w, self.n, self.n, |i, j| {
            self.rows[i].iter().find(|(c, _)| *c == j).map_or(0.0, |(_, v)| *v)
        })
    }
}

/// `J w`: rate of the velocity-dependent constraint residual for a velocity rate `w`.
pub fn constraint_jacobian_apply(problem: &Problem, classes: &Classification, w: &[Vec<f64>; 2]) -> Vec<f64> {
    let ops = &problem.ops;
    let mut out = ops.dx(&w[0]);
    let dy = ops.dy(&w[1]);
    for (o, d) in out.iter_mut().zip(dy) {
        *o = -(*o + d);
    }
    let sigma2 = problem.bcs.penalties.sigma2;
    for (geom, cls) in ops.edges.iter().zip(&classes.edges) {
        for (i, &k) in geom.nodes.iter().enumerate() {
            if cls[i] == NodeClass::Wall {
                let wn = geom.normal[0] * w[0][k] + geom.normal[1] * w[1][k];
                out[k] -= sigma2 * geom.weights[i] / ops.pp[k] * wn;
            }
        }
    }
    out
}

/// Nonzeros of row `k` of `J` as `(direction, node, coefficient)`.
fn jacobian_row(problem: &Problem, classes: &Classification, k: usize) -> Vec<(usize, usize, f64)> {
    let ops = &problem.ops;
    let mut row: Vec<(usize, usize, f64)> = Vec::new();
    for j in 0..2 {
        row.extend(ops.d_row(j, k).map(|(m, c)| (j, m, -c)));
    }
    let sigma2 = problem.bcs.penalties.sigma2;
    for (geom, cls) in ops.edges.iter().zip(&classes.edges) {
        if let Some(i) = geom.nodes.iter().position(|&b| b == k) {
            if cls[i] == NodeClass::Wall {
                for j in 0..2 {
                    if geom.normal[j] != 0.0 {
                        row.push((j, k, -sigma2 * geom.weights[i] / ops.pp[k] * geom.normal[j]));
                    }
                }
            }
        }
    }
    row
}

/// Velocity rate produced by a unit pressure at a characteristic node `b`, and
/// the resulting `∂r₃(b)/∂p_b`.
fn characteristic_column(problem: &Problem, state: &StateField, eval: &Evaluation, b: usize) -> (Vec<(usize, usize, f64)>, f64) {
    let ops = &problem.ops;
    let sigma0 = problem.bcs.penalties.sigma0;
    let mut phi_rate: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut diag = 0.0;
    for (geom, cls) in ops.edges.iter().zip(&eval.classes.edges) {
        let Some(i) = geom.nodes.iter().position(|&m| m == b) else {
            continue;
        };
        if cls[i] == NodeClass::Wall {
            continue;
        }
        let w_b = geom.weights[i];
        let un = eval.stress.u[0][b] * geom.normal[0] + eval.stress.u[1][b] * geom.normal[1];
        // ∂π/∂p_b = σ₀ |Λ| ∂W⁻/∂p_b with ∂W⁻/∂p_b = (0, 1/φ₀, 0)
        let dpi = [0.0, sigma0 / un.abs() / state.phi0[b], 0.0];
        char_transpose(ops, state, &eval.stress, geom, i, cls[i], dpi, &mut |row, m, v| {
            let lifted = -w_b / ops.pp[m] * v;
            if row == 3 {
                debug_assert_eq!(m, b);
                diag += lifted;
            } else {
                *phi_rate.entry((row, m)).or_insert(0.0) += lifted;
            }
        });
    }
    // u̇ᵢ = (φ̇ᵢ − uᵢ φ̇₀) / φ₀
    let mut vel: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(row, m), &v) in &phi_rate {
        if row == 0 {
            for i in 0..2 {
                *vel.entry((i, m)).or_insert(0.0) -= eval.stress.u[i][m] * v / state.phi0[m];
            }
        } else {
            *vel.entry((row - 1, m)).or_insert(0.0) += v / state.phi0[m];
        }
    }
    (vel.into_iter().map(|((i, m), v)| (i, m, v)).collect(), diag)
}

/// Assemble the pressure operator. `include_characteristic` adds the coupling
/// through characteristic penalties; without it, characteristic rows become `p_b = 0`.
fn assemble(problem: &Problem, state: &StateField, eval: &Evaluation, include_characteristic: bool) -> PressureSystem {
    let ops = &problem.ops;
    let n = ops.len();
    let classes = &eval.classes;
    let algebraic = classes.characteristic_nodes(ops);
    let inv_phi0_sq: Vec<f64> = state.phi0.iter().map(|p| 1.0 / (p * p)).collect();

    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    // columns of J restricted to differential rows: (direction, node) -> [(row, coefficient)]
    let mut jt: [Vec<Vec<(usize, f64)>>; 2] = [vec![Vec::new(); n], vec![Vec::new(); n]];
    for k in 0..n {
        if algebraic[k] {
            continue;
        }
        // interior coupling: u̇ᵢ(m) = −𝔻ᵢ(m, c) p_c / φ₀(m)²
        for (i, m, jc) in jacobian_row(problem, classes, k) {
            jt[i][m].push((k, jc));
            for (c, dc) in ops.d_row(i, m) {
                if algebraic[c] && !include_characteristic {
                    continue;
                }
                *rows[k].entry(c).or_insert(0.0) -= jc * dc * inv_phi0_sq[m];
            }
        }
    }
    if include_characteristic {
        for b in (0..n).filter(|&b| algebraic[b]) {
            let (vel, diag) = characteristic_column(problem, state, eval, b);
            rows[b].insert(b, diag);
            for &(i, m, v) in &vel {
                for &(k, jc) in &jt[i][m] {
                    *rows[k].entry(b).or_insert(0.0) += jc * v;
                }
            }
        }
    } else {
        for b in (0..n).filter(|&b| algebraic[b]) {
            rows[b].insert(b, 1.0);
        }
    }
    let mut pinned = None;
    if !algebraic.iter().any(|&a| a) {
        rows[0] = BTreeMap::from([(0, 1.0)]);
        pinned = Some(0);
    }
    PressureSystem {
        n,
        rows: rows
            .into_iter()
            .map(|r| r.into_iter().filter(|(_, v)| *v != 0.0).collect())
            .collect(),
        rhs: vec![0.0; n],
        algebraic,
        pinned,
        kappa: problem.kappa,
    }
}

/// Assemble the operator and right-hand side from an evaluation at zero pressure.
pub fn assemble_pressure_operator(problem: &Problem, state: &StateField, base: &Evaluation) -> PressureSystem {
    let mut sys = assemble(problem, state, base, true);
    let n = sys.n;
    let r = &base.rhs;
    let a: [Vec<f64>; 2] = std::array::from_fn(|i| {
        (0..n)
            .map(|m| (r.row(i + 1)[m] - base.stress.u[i][m] * r.r0[m]) / state.phi0[m])
            .collect()
    });
    let ja = constraint_jacobian_apply(problem, &base.classes, &a);
    for k in 0..n {
        sys.rhs[k] = if sys.algebraic[k] {
            -r.r3[k]
        } else {
            -problem.kappa * r.r3[k] - ja[k]
        };
    }
    if let Some(k) = sys.pinned {
        sys.rhs[k] = 0.0;
    }
    sys
}

/// Last factorization, reused as a preconditioner for later operators.
#[derive(Default)]
pub struct FactorCache {
    slot: Mutex<Option<Arc<Factored>>>,
}

impl Clone for FactorCache {
    fn clone(&self) -> Self {
        FactorCache::default()
    }
}

impl fmt::Debug for FactorCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let filled = self.slot.lock().map(|s| s.is_some()).unwrap_or(false);
        f.debug_struct("FactorCache").field("filled", &filled).finish()
    }
}

fn sparse_matrix(sys: &PressureSystem) -> Result<SparseColMat<usize, f64>> {
    let mut triplets = Vec::new();
    for (r, row) in sys.rows.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::Solver(format!("empty pressure row {r}")));
        }
        triplets.extend(row.iter().map(|&(c, v)| Triplet::new(r, c, v)));
    }
    SparseColMat::try_new_from_triplets(sys.n, sys.n, &triplets).map_err(|e| Error::Solver(format!("assembly failed: {e:?}")))
}

fn factor(sys: &PressureSystem) -> Result<Lu<usize, f64>> {
    log::debug!("factorizing pressure operator, n = {}", sys.n);
    sparse_matrix(sys)?
        .sp_lu()
        .map_err(|e| Error::Solver(format!("factorization failed: {e:?}")))
}

/// Solve with the exact factorization `lu` of `sys`, with iterative refinement.
fn solve_factored(lu: &Lu<usize, f64>, sys: &PressureSystem) -> Result<Vec<f64>> {
    let n = sys.n;
    let b = Mat::from_fn(n, 1, |i, _| sys.rhs[i]);
    let x = lu.solve(&b);
    let mut p: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let mut last = f64::INFINITY;
    for _ in 0..REFINEMENT_STEPS {
        let lp = sys.apply(&p);
        let res = Mat::from_fn(n, 1, |i, _| sys.rhs[i] - lp[i]);
        let dx = lu.solve(&res);
        let mut step = 0.0f64;
        for (i, v) in p.iter_mut().enumerate() {
            *v += dx[(i, 0)];
            step = step.max(dx[(i, 0)].abs());
        }
        let size = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if step <= 1e-15 * size || step >= last {
            break;
        }
        last = step;
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver("non-finite pressure (singular operator?)".into()));
    }
    Ok(p)
}

const REFINEMENT_STEPS: usize = 4;
const KRYLOV_ITERS: usize = 30;
const KRYLOV_TOL: f64 = 1e-14;
const REFRESH_ITERS: usize = 8;

#[derive(Debug)]
struct Factored {
    n: usize,
    lu: Lu<usize, f64>,
}

impl LinOp<f64> for Factored {
    fn apply_scratch(&self, _rhs_ncols: usize, _par: Par) -> StackReq {
        StackReq::EMPTY
    }

    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn apply(&self, mut out: MatMut<'_, f64>, rhs: MatRef<'_, f64>, _par: Par, _stack: &mut MemStack) {
        out.copy_from(rhs);
        self.lu.solve_in_place(out);
    }

    fn conj_apply(&self, out: MatMut<'_, f64>, rhs: MatRef<'_, f64>, par: Par, stack: &mut MemStack) {
        self.apply(out, rhs, par, stack);
    }
}

impl Precond<f64> for Factored {}

/// BiCGSTAB on `sys`, right-preconditioned with the factorization of an
/// earlier operator. Returns the solution and iteration count, `None` if it
/// does not converge.
fn solve_preconditioned(f: &Factored, sys: &PressureSystem) -> Option<(Vec<f64>, usize)> {
    if f.n != sys.n {
        return None;
    }
    let mat = sparse_matrix(sys).ok()?;
    let b = Mat::from_fn(sys.n, 1, |i, _| sys.rhs[i]);
    let mut x = f.lu.solve(&b);
    let identity = IdentityPrecond { dim: sys.n };
    let par = Par::Seq;
    let mut mem = MemBuffer::new(bicgstab_scratch(identity, f, &mat, 1, par));
    let params = BicgParams {
        rel_tolerance: KRYLOV_TOL,
        max_iters: KRYLOV_ITERS,
        ..Default::default()
    };
    let info = bicgstab(
        x.as_mut(),
        identity,
        f,
        &mat,
        b.as_ref(),
        params,
        |_| {},
        par,
        MemStack::new(&mut mem),
    )
    .ok()?;
    log::trace!(
        "pressure bicgstab: {} iterations, residual {:e}",
        info.iter_count,
        info.rel_residual
    );
    let p: Vec<f64> = (0..sys.n).map(|i| x[(i, 0)]).collect();
    p.iter().all(|v| v.is_finite()).then_some((p, info.iter_count))
}

pub fn solve_system(sys: &PressureSystem) -> Result<Vec<f64>> {
    solve_factored(&factor(sys)?, sys)
}

/// As [`solve_system`], preconditioning with the cached factorization and
/// refactorizing when the Krylov solve does not converge.
pub fn solve_system_cached(sys: &PressureSystem, cache: &FactorCache) -> Result<Vec<f64>> {
    let cached = cache.slot.lock().ok().and_then(|s| s.clone());
    if let Some((p, iters)) = cached.and_then(|f| solve_preconditioned(&f, sys)) {
        if iters > REFRESH_ITERS {
            if let Ok(mut slot) = cache.slot.lock() {
                *slot = None;
            }
        }
        return Ok(p);
    }
    let f = Arc::new(Factored {
        n: sys.n,
        lu: factor(sys)?,
    });
    if let Ok(mut slot) = cache.slot.lock() {
        *slot = Some(f.clone());
    }
    solve_factored(&f.lu, sys)
}

fn relative_residual(sys: &PressureSystem, p: &[f64]) -> f64 {
    let lp = sys.apply(p);
    let res = lp.iter().zip(&sys.rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let bnorm = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lnorm = sys
        .rows
        .iter()
        .map(|r| r.iter().map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let pnorm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = bnorm.max(lnorm * pnorm);
    if scale == 0.0 {
        0.0
    } else {
        res / scale
    }
}

/// Remove the `ℙ`-weighted mean.
pub fn subtract_mean(ops: &TensorOps2D, p: &mut [f64]) {
    let mean = ops.pp.iter().zip(p.iter()).map(|(w, v)| w * v).sum::<f64>() / ops.pp.iter().sum::<f64>();
    p.iter_mut().for_each(|v| *v -= mean);
}

/// Pressure for `state`'s velocity. `base` must be the evaluation at this
/// velocity with zero pressure.
pub fn solve_pressure(problem: &Problem, state: &StateField, base: &Evaluation) -> Result<PressureSolution> {
    let sys = assemble_pressure_operator(problem, state, base);
    let mut p = solve_system_cached(&sys, &problem.factors)?;
    let relative_residual = relative_residual(&sys, &p);
    if relative_residual > 1e-8 {
        return Err(Error::Solver(format!("pressure solve residual {relative_residual:e}")));
    }
    if sys.pinned.is_some() {
        subtract_mean(&problem.ops, &mut p);
    }
    Ok(PressureSolution { p, relative_residual })
}

/// Discrete projection `u ← u − φ₀⁻² 𝔻 q` so that the velocity-dependent
/// constraint residual vanishes at every non-characteristic node.
pub fn project_velocity(problem: &Problem, state: &StateField) -> Result<StateField> {
    let mut s = state.clone();
    s.phi3.iter_mut().for_each(|p| *p = 0.0);
    let base = problem.evaluate(&s, 0.0)?;
    let mut sys = assemble(problem, &s, &base, false);
    let c = constraint_jacobian_apply(problem, &base.classes, &base.stress.u);
    for k in 0..sys.n {
        sys.rhs[k] = if sys.algebraic[k] { 0.0 } else { -c[k] };
    }
    if let Some(k) = sys.pinned {
        sys.rhs[k] = 0.0;
    }
    let q = solve_system_cached(&sys, &problem.factors)?;
    let ops = &problem.ops;
    let mut u = base.stress.u.clone();
    for (i, ui) in u.iter_mut().enumerate() {
        let dq = ops.d(i, &q);
        for m in 0..ops.len() {
            ui[m] -= dq[m] / (s.phi0[m] * s.phi0[m]);
        }
    }
    for m in 0..ops.len() {
        s.phi1[m] = s.phi0[m] * u[0][m];
        s.phi2[m] = s.phi0[m] * u[1][m];
    }
    Ok(s)
}

/// Velocity-dependent constraint residual at non-characteristic nodes, `ℙ`-weighted norm.
pub fn constraint_norm(problem: &Problem, state: &StateField, classes: &Classification) -> f64 {
    let c = constraint_jacobian_apply(problem, classes, &state.velocity());
    let alg = classes.characteristic_nodes(&problem.ops);
    let masked: Vec<f64> = c.iter().zip(&alg).map(|(v, &a)| if a { 0.0 } else { *v }).collect();
    problem.ops.norm(&masked)
}
