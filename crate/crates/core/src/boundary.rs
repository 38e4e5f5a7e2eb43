//! Weak boundary conditions: characteristic inflow/outflow penalties and
//! solid-wall penalties, realized as discrete liftings.
//!
//! Every penalty is written as `Σ·𝔹C` at a boundary node `b` and lifted into
//! the right-hand side as `−(w_b / ℙ_m) (Σ·𝔹C)_m` at each receiving node `m`.
//! The receiving nodes are `b` itself and, for the stress-dependent parts,
//! every node in the derivative stencils of row `b`.

use crate::error::{Error, Result};
use crate::fields::{FluidPair, StateField, StressField};
use crate::grid::{Edge, EdgeGeometry, TensorOps2D};
use crate::interior::RhsField;

/// Nodes with `|uₙ| ≤ UN_THRESHOLD · u_scale` on non-wall edges are treated as wall nodes.
pub const UN_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Wall,
    Inflow,
    Outflow,
    Auto,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Wall => "wall",
            EdgeKind::Inflow => "inflow",
            EdgeKind::Outflow => "outflow",
            EdgeKind::Auto => "auto",
        }
    }

    pub fn from_name(s: &str) -> Option<EdgeKind> {
        [EdgeKind::Wall, EdgeKind::Inflow, EdgeKind::Outflow, EdgeKind::Auto]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// External data for the characteristic condition.
#[derive(Debug, Clone, PartialEq)]
pub enum DataProfile {
    Zero,
    /// `G` given directly.
    Constant([f64; 3]),
    /// Target state with constant velocity `(u1, u2)`, volume fraction, pressure and zero viscous traction.
    Uniform {
        alpha: f64,
        u1: f64,
        u2: f64,
        p: f64,
    },
    /// Target velocity `4 umax s (1 − s)` directed into the domain.
    Parabolic {
        alpha: f64,
        umax: f64,
        p: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBc {
    pub kind: EdgeKind,
    pub data: DataProfile,
}

impl EdgeBc {
    pub fn wall() -> Self {
        EdgeBc {
            kind: EdgeKind::Wall,
            data: DataProfile::Zero,
        }
    }

    pub fn new(kind: EdgeKind, data: DataProfile) -> Self {
        EdgeBc { kind, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            sigma0: 1.0,
            sigma1: -0.5,
            sigma2: -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    /// West, east, south, north.
    pub edges: [EdgeBc; 4],
    pub penalties: Penalties,
}

impl BoundarySpec {
    pub fn new(edges: [EdgeBc; 4], penalties: Penalties) -> Result<Self> {
        if !(penalties.sigma0 >= 0.5) {
            return Err(Error::InvalidPenalty(format!("sigma0 = {} is below 1/2", penalties.sigma0)));
        }
        if !penalties.sigma1.is_finite() || !penalties.sigma2.is_finite() {
            return Err(Error::InvalidPenalty("wall penalties must be finite".into()));
        }
        for (edge, bc) in Edge::ALL.iter().zip(&edges) {
            match (&bc.kind, &bc.data) {
                (EdgeKind::Wall, DataProfile::Zero) => {}
                (EdgeKind::Wall, _) => {
                    return Err(Error::BoundaryData(format!("wall edge {} carries data", edge.name())));
                }
                (EdgeKind::Outflow, DataProfile::Constant(g)) if g[0] != 0.0 => {
                    return Err(Error::BoundaryData(format!(
                        "outflow edge {} takes two data components, got G0 = {}",
                        edge.name(),
                        g[0]
                    )));
                }
                (_, DataProfile::Constant(g)) if !g.iter().all(|v| v.is_finite()) => {
                    return Err(Error::BoundaryData(format!("non-finite data on edge {}", edge.name())));
                }
                _ => {}
            }
        }
        Ok(BoundarySpec { edges, penalties })
    }

    pub fn all_walls() -> Self {
        BoundarySpec {
            edges: [EdgeBc::wall(), EdgeBc::wall(), EdgeBc::wall(), EdgeBc::wall()],
            penalties: Penalties::default(),
        }
    }

    pub fn edge(&self, e: Edge) -> &EdgeBc {
        &self.edges[e as usize]
    }
}

/// Per-node treatment chosen for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Wall,
    /// `uₙ < 0`, penalize `W₁`.
    Inflow,
    /// `uₙ > 0`, penalize `W₂`.
    Outflow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub edges: [Vec<NodeClass>; 4],
}

impl Classification {
    pub fn classify(state: &StateField, ops: &TensorOps2D, spec: &BoundarySpec) -> Self {
        let vel = state.velocity();
        let u_scale = vel[0].iter().chain(&vel[1]).fold(0.0f64, |m, v| m.max(v.abs()));
        let edges = std::array::from_fn(|e| {
            let geom = &ops.edges[e];
            geom.nodes
                .iter()
                .map(|&k| {
                    if spec.edges[e].kind == EdgeKind::Wall {
                        return NodeClass::Wall;
                    }
                    let un = vel[0][k] * geom.normal[0] + vel[1][k] * geom.normal[1];
                    if un.abs() <= UN_THRESHOLD * u_scale {
                        NodeClass::Wall
                    } else if un < 0.0 {
                        NodeClass::Inflow
                    } else {
                        NodeClass::Outflow
                    }
                })
                .collect()
        });
        Classification { edges }
    }

    /// Nodes that receive at least one characteristic penalty.
    pub fn characteristic_nodes(&self, ops: &TensorOps2D) -> Vec<bool> {
        let mut mask = vec![false; ops.len()];
        for (geom, classes) in ops.edges.iter().zip(&self.edges) {
            for (&k, c) in geom.nodes.iter().zip(classes) {
                if *c != NodeClass::Wall {
                    mask[k] = true;
                }
            }
        }
        mask
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.edges.iter().flatten().filter(|&&c| c == class).count()
    }
}

/// `(u·n, u·t)` with `t = (−n₂, n₁)`.
pub fn rotate_to_normal(u: [f64; 2], normal: [f64; 2]) -> (f64, f64) {
    let [n1, n2] = normal;
    (u[0] * n1 + u[1] * n2, -u[0] * n2 + u[1] * n1)
}

/// `(τₙ, τ_t)` from the viscous traction `τᵢ = τ*ᵢⱼnⱼ` at node `k`.
pub fn boundary_stress(stress: &StressField, k: usize, normal: [f64; 2]) -> (f64, f64) {
    let t1 = stress.tau_star_11[k] * normal[0] + stress.tau_star_12[k] * normal[1];
    let t2 = stress.tau_star_12[k] * normal[0] + stress.tau_star_22[k] * normal[1];
    rotate_to_normal([t1, t2], normal)
}

/// Boundary quantities at one node in normal/tangential coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharVars {
    pub phi0: f64,
    pub phi_n: f64,
    pub phi_t: f64,
    pub p: f64,
    pub tau_n: f64,
    pub tau_t: f64,
    pub un: f64,
    pub ut: f64,
    pub w1: [f64; 3],
    pub w2: [f64; 3],
}

impl CharVars {
    pub fn new(phi0: f64, phi: [f64; 2], p: f64, tau_n: f64, tau_t: f64, normal: [f64; 2]) -> Self {
        let (phi_n, phi_t) = rotate_to_normal(phi, normal);
        let w2 = [0.0, (p - tau_n) / phi0, -tau_t / phi0];
        let w1 = [phi_n, phi_n * phi_n / phi0 + w2[1], phi_n * phi_t / phi0 + w2[2]];
        CharVars {
            phi0,
            phi_n,
            phi_t,
            p,
            tau_n,
            tau_t,
            un: phi_n / phi0,
            ut: phi_t / phi0,
            w1,
            w2,
        }
    }

    /// `Φ₁ᵀAΦ₁ + 2Φ₁ᵀBΦ₂`.
    pub fn raw_bt(&self) -> f64 {
        self.advective_bt() + self.viscous_bt()
    }

    /// `uₙ (φ₀² + φₙ² + φ_t²)`.
    pub fn advective_bt(&self) -> f64 {
        self.un * (self.phi0 * self.phi0 + self.phi_n * self.phi_n + self.phi_t * self.phi_t)
    }

    /// `2[uₙ(p − τₙ) − u_t τ_t]`.
    pub fn viscous_bt(&self) -> f64 {
        2.0 * (self.un * (self.p - self.tau_n) - self.ut * self.tau_t)
    }

    /// `W₁ᵀΛ₁W₁ + W₂ᵀΛ₂W₂` with `Λ₁ = I/uₙ = −Λ₂`.
    pub fn diagonal_bt(&self) -> f64 {
        (dot(&self.w1, &self.w1) - dot(&self.w2, &self.w2)) / self.un
    }

    /// Incoming characteristic `W⁻` for the given class.
    pub fn incoming(&self, class: NodeClass) -> [f64; 3] {
        match class {
            NodeClass::Inflow => self.w1,
            _ => self.w2,
        }
    }

    pub fn outgoing(&self, class: NodeClass) -> [f64; 3] {
        match class {
            NodeClass::Inflow => self.w2,
            _ => self.w1,
        }
    }

    /// `|Λ| = 1/|uₙ|`.
    pub fn lambda_abs(&self) -> f64 {
        1.0 / self.un.abs()
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn char_decomposition(state: &StateField, stress: &StressField, geom: &EdgeGeometry, i: usize) -> CharVars {
    let k = geom.nodes[i];
    let (tau_n, tau_t) = boundary_stress(stress, k, geom.normal);
    CharVars::new(
        state.phi0[k],
        [state.phi1[k], state.phi2[k]],
        state.phi3[k],
        tau_n,
        tau_t,
        geom.normal,
    )
}

impl DataProfile {
    /// Boundary data `G = √|Λ*| W⁻(target)` for a node of the given class at arc position `s`.
    pub fn eval(&self, s: f64, normal: [f64; 2], fluids: &FluidPair, class: NodeClass) -> Result<[f64; 3]> {
        let (alpha, u, p) = match *self {
            DataProfile::Zero => return Ok([0.0; 3]),
            // outflow nodes take two conditions; the first component is dropped
            DataProfile::Constant(g) => {
                return Ok(if class == NodeClass::Outflow { [0.0, g[1], g[2]] } else { g });
            }
            DataProfile::Uniform { alpha, u1, u2, p } => (alpha, [u1, u2], p),
            DataProfile::Parabolic { alpha, umax, p } => {
                let speed = 4.0 * umax * s * (1.0 - s);
                (alpha, [-speed * normal[0], -speed * normal[1]], p)
            }
        };
        let rho = fluids.density(alpha);
        if !(rho > 0.0) {
            return Err(Error::BoundaryData(format!("target density {rho} is not positive")));
        }
        let phi0 = rho.sqrt();
        let target = CharVars::new(phi0, [phi0 * u[0], phi0 * u[1]], p, 0.0, 0.0, normal);
        let scale = u[0].abs().max(u[1].abs());
        if target.un.abs() <= UN_THRESHOLD * scale || target.un == 0.0 {
            return Ok([0.0; 3]);
        }
        let s_star = target.lambda_abs().sqrt();
        let w = target.incoming(class);
        Ok([s_star * w[0], s_star * w[1], s_star * w[2]])
    }
}

/// Lifted boundary contributions and their independently evaluated energy.
#[derive(Debug, Clone)]
pub struct SatOutput {
    /// Tendencies for rows 0–2 and the constraint-row contribution in row 3.
    pub rows: RhsField,
    /// `2Φᵀℙ·SAT` over all four rows, evaluated node-locally at the boundary.
    pub energy: f64,
    /// `Σ w_b |G|²` over characteristic nodes.
    pub data_flux: f64,
}

impl SatOutput {
    pub fn zeros(n: usize) -> Self {
        SatOutput {
            rows: RhsField::zeros(n),
            energy: 0.0,
            data_flux: 0.0,
        }
    }

    fn sink<'a>(&'a mut self, ops: &'a TensorOps2D, w_b: f64) -> impl FnMut(usize, usize, f64) + 'a {
        move |row, m, v| self.rows.row_mut(row)[m] -= w_b / ops.pp[m] * v
    }
}

/// Transpose of the frozen-coefficient traction functional `λᵢ τ*ᵢⱼ(b) nⱼ`
/// with respect to `φᵢ`, emitted as `(row, node, value)`.
pub fn traction_adjoint(
    ops: &TensorOps2D,
    state: &StateField,
    mu_b: f64,
    b: usize,
    normal: [f64; 2],
    lambda: [f64; 2],
    emit: &mut dyn FnMut(usize, usize, f64),
) {
    for j in 0..2 {
        for (m, c) in ops.d_row(j, b) {
            let mut d = [0.0; 2];
            d[j] = c;
            let nd = normal[0] * d[0] + normal[1] * d[1];
            let ld = lambda[0] * d[0] + lambda[1] * d[1];
            for i in 0..2 {
                let v = mu_b * (lambda[i] * nd + normal[i] * ld) / state.phi0[m];
                if v != 0.0 {
                    emit(i + 1, m, v);
                }
            }
        }
    }
}

/// `Σ₁𝔹C₁ + Σ₂𝔹C₂` at wall node `b`, unlifted. Returns the node-local energy
/// `Φᵀ(Σ₁𝔹C₁ + Σ₂𝔹C₂)`.
fn wall_node(
    ops: &TensorOps2D,
    state: &StateField,
    stress: &StressField,
    geom: &EdgeGeometry,
    i: usize,
    pen: &Penalties,
    emit: &mut dyn FnMut(usize, usize, f64),
) -> f64 {
    let b = geom.nodes[i];
    let cv = char_decomposition(state, stress, geom, i);
    let n = geom.normal;
    for row in 0..3 {
        emit(row, b, pen.sigma1 * cv.un * state.component(row)[b]);
    }
    emit(3, b, pen.sigma2 * cv.un);
    let u = [stress.u[0][b], stress.u[1][b]];
    traction_adjoint(ops, state, stress.mu[b], b, n, [-pen.sigma2 * u[0], -pen.sigma2 * u[1]], emit);
    let phi_sq = cv.phi0 * cv.phi0 + cv.phi_n * cv.phi_n + cv.phi_t * cv.phi_t;
    pen.sigma1 * cv.un * phi_sq + pen.sigma2 * (cv.p * cv.un - cv.tau_n * cv.un - cv.tau_t * cv.ut)
}

/// `Tᵀπ` at node `b` for the class's characteristic map, unlifted.
pub fn char_transpose(
    ops: &TensorOps2D,
    state: &StateField,
    stress: &StressField,
    geom: &EdgeGeometry,
    i: usize,
    class: NodeClass,
    pi: [f64; 3],
    emit: &mut dyn FnMut(usize, usize, f64),
) {
    let b = geom.nodes[i];
    let n = geom.normal;
    let t = geom.tangent();
    let phi0 = state.phi0[b];
    if class == NodeClass::Inflow {
        let un = stress.u[0][b] * n[0] + stress.u[1][b] * n[1];
        emit(0, b, un * pi[0]);
        for c in 0..2 {
            emit(c + 1, b, un * (pi[1] * n[c] + pi[2] * t[c]));
        }
    }
    emit(3, b, pi[1] / phi0);
    let lambda = [-(pi[1] * n[0] + pi[2] * t[0]) / phi0, -(pi[1] * n[1] + pi[2] * t[1]) / phi0];
    traction_adjoint(ops, state, stress.mu[b], b, n, lambda, emit);
}

/// Penalty `π = σ₀ √|Λ⁻| (√|Λ⁻| W⁻ − G)` for a characteristic node.
pub fn char_penalty(cv: &CharVars, class: NodeClass, g: &[f64; 3], sigma0: f64) -> [f64; 3] {
    let s = cv.lambda_abs().sqrt();
    let w = cv.incoming(class);
    std::array::from_fn(|c| sigma0 * s * (s * w[c] - g[c]))
}

/// Node-local `Φᵀ Tᵀπ = W⁻·π`.
pub fn char_energy(cv: &CharVars, class: NodeClass, g: &[f64; 3], sigma0: f64) -> f64 {
    let s = cv.lambda_abs().sqrt();
    let w = cv.incoming(class);
    sigma0 * (cv.lambda_abs() * dot(&w, &w) - s * dot(&w, g))
}

/// Wall penalties on every node of `edge`.
pub fn wall_sat(state: &StateField, stress: &StressField, ops: &TensorOps2D, edge: Edge, pen: &Penalties) -> SatOutput {
    let mut out = SatOutput::zeros(ops.len());
    let geom = ops.edge(edge);
    for i in 0..geom.len() {
        add_wall(&mut out, ops, state, stress, geom, i, pen);
    }
    out
}

fn add_wall(
    out: &mut SatOutput,
    ops: &TensorOps2D,
    state: &StateField,
    stress: &StressField,
    geom: &EdgeGeometry,
    i: usize,
    pen: &Penalties,
) {
    let w_b = geom.weights[i];
    let e = wall_node(ops, state, stress, geom, i, pen, &mut out.sink(ops, w_b));
    out.energy -= 2.0 * w_b * e;
}

#[allow(clippy::too_many_arguments)]
fn add_char(
    out: &mut SatOutput,
    ops: &TensorOps2D,
    state: &StateField,
    stress: &StressField,
    geom: &EdgeGeometry,
    i: usize,
    class: NodeClass,
    g: &[f64; 3],
    sigma0: f64,
) {
    let w_b = geom.weights[i];
    let cv = char_decomposition(state, stress, geom, i);
    let pi = char_penalty(&cv, class, g, sigma0);
    char_transpose(ops, state, stress, geom, i, class, pi, &mut out.sink(ops, w_b));
    out.energy -= 2.0 * w_b * char_energy(&cv, class, g, sigma0);
    out.data_flux += w_b * dot(g, g);
}

/// Characteristic penalties on every node of `edge`, classified by the sign of `uₙ`.
/// Nodes with `uₙ = 0` fall back to the wall treatment.
pub fn inflow_outflow_sat(
    state: &StateField,
    stress: &StressField,
    ops: &TensorOps2D,
    edge: Edge,
    data: &dyn Fn(usize, NodeClass) -> Result<[f64; 3]>,
    pen: &Penalties,
) -> Result<SatOutput> {
    if !(pen.sigma0 >= 0.5) {
        return Err(Error::InvalidPenalty(format!("sigma0 = {} is below 1/2", pen.sigma0)));
    }
    let mut out = SatOutput::zeros(ops.len());
    let geom = ops.edge(edge);
    for i in 0..geom.len() {
        let cv = char_decomposition(state, stress, geom, i);
        if cv.un == 0.0 {
            add_wall(&mut out, ops, state, stress, geom, i, pen);
            continue;
        }
        let class = if cv.un < 0.0 { NodeClass::Inflow } else { NodeClass::Outflow };
        let g = data(i, class)?;
        add_char(&mut out, ops, state, stress, geom, i, class, &g, pen.sigma0);
    }
    Ok(out)
}

/// All boundary penalties for the given classification.
pub fn boundary_sats(
    state: &StateField,
    stress: &StressField,
    ops: &TensorOps2D,
    spec: &BoundarySpec,
    classes: &Classification,
    fluids: &FluidPair,
) -> Result<SatOutput> {
    let pen = &spec.penalties;
    let mut out = SatOutput::zeros(ops.len());
    for (e, geom) in ops.edges.iter().enumerate() {
        for i in 0..geom.len() {
            match classes.edges[e][i] {
                NodeClass::Wall => add_wall(&mut out, ops, state, stress, geom, i, pen),
                class => {
                    let g = spec.edges[e].data.eval(geom.s[i], geom.normal, fluids, class)?;
                    add_char(&mut out, ops, state, stress, geom, i, class, &g, pen.sigma0);
                }
            }
        }
    }
    Ok(out)
}

/// Per-edge boundary quadrature of the energy boundary term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeEnergy {
    /// `∮ uₙ|Φ₁|² ds`.
    pub advective: f64,
    /// `∮ 2[uₙ(p − τₙ) − u_t τ_t] ds`.
    pub viscous: f64,
    /// Characteristic form summed over nodes with `uₙ ≠ 0`, raw form elsewhere.
    pub diagonal: f64,
}

impl EdgeEnergy {
    pub fn raw(&self) -> f64 {
        self.advective + self.viscous
    }
}

pub fn boundary_energy_quadrature(state: &StateField, stress: &StressField, ops: &TensorOps2D) -> [EdgeEnergy; 4] {
    std::array::from_fn(|e| {
        let geom = &ops.edges[e];
        let mut acc = EdgeEnergy::default();
        for i in 0..geom.len() {
            let w = geom.weights[i];
            let cv = char_decomposition(state, stress, geom, i);
            acc.advective += w * cv.advective_bt();
            acc.viscous += w * cv.viscous_bt();
            acc.diagonal += w * if cv.un != 0.0 { cv.diagonal_bt() } else { cv.raw_bt() };
        }
        acc
    })
}
