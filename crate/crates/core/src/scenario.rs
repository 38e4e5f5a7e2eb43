//! Initial conditions, default boundary setups and analytic forcing for the
//! preset scenarios.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::{DataProfile, EdgeBc, EdgeKind};
use crate::error::{Error, Result};
use crate::fields::{primitives_to_state, FluidPair, PrimitiveField, StateField};
use crate::grid::Grid2D;
use crate::problem::Forcing;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Fluid at rest; liquid below `interface` (in y), smooth `tanh` transition of
    /// the given width, or a sharp step for width 0.
    QuiescentBox { interface: f64, width: f64 },
    /// Bump of compact support `radius` carried by a uniform velocity. The bump
    /// is a `cos⁴` profile in `√ρ` between the background and peak fractions.
    AdvectedBlob {
        u1: f64,
        u2: f64,
        x: f64,
        y: f64,
        radius: f64,
        alpha_bg: f64,
        alpha_peak: f64,
    },
    /// Parabolic channel flow, walls at the bottom and top.
    ShearChannel { umax: f64, alpha: f64 },
    /// Constant-density forced flow with the exact solution
    /// `ψ = A(t) sin²(πx) sin²(πy)`, `p = B(t) cos(πx) cos(πy)`.
    Manufactured { amp_u: f64, amp_p: f64 },
    /// Random smooth velocity on top of a mean flow `(u1, u2)`, random volume fraction.
    RandomBox {
        seed: u64,
        modes: usize,
        amp: f64,
        u1: f64,
        u2: f64,
    },
}

/// Parameter names accepted by each scenario, with defaults.
pub fn scenario_params(name: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match name {
        "quiescent-box" => &[("interface", 0.5), ("width", 0.05)],
        "advected-blob" => &[
            ("u1", 1.0),
            ("u2", 0.5),
            ("x", 0.35),
            ("y", 0.35),
            ("radius", 0.3),
            ("alpha_bg", 0.05),
            ("alpha_peak", 0.95),
        ],
        "shear-channel" => &[("umax", 1.0), ("alpha", 1.0)],
        "manufactured" => &[("amp_u", 1.0), ("amp_p", 1.0)],
        "random-box" => &[("seed", 0.0), ("modes", 3.0), ("amp", 1.0), ("u1", 0.0), ("u2", 0.0)],
        _ => return None,
    })
}

impl Scenario {
    /// Build from a name and parameter lookup (missing entries take defaults).
    pub fn from_params(name: &str, get: impl Fn(&str) -> Option<f64>) -> Result<Self> {
        let defaults = scenario_params(name).ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))?;
        let v = |key: &str| -> f64 {
            get(key).unwrap_or_else(|| defaults.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or(f64::NAN))
        };
        let s = match name {
            "quiescent-box" => Scenario::QuiescentBox {
                interface: v("interface"),
                width: v("width"),
            },
            "advected-blob" => Scenario::AdvectedBlob {
                u1: v("u1"),
                u2: v("u2"),
                x: v("x"),
                y: v("y"),
                radius: v("radius"),
                alpha_bg: v("alpha_bg"),
                alpha_peak: v("alpha_peak"),
            },
            "shear-channel" => Scenario::ShearChannel {
                umax: v("umax"),
                alpha: v("alpha"),
            },
            "manufactured" => Scenario::Manufactured {
                amp_u: v("amp_u"),
                amp_p: v("amp_p"),
            },
            "random-box" => {
                let (seed, modes) = (v("seed"), v("modes"));
                if seed < 0.0 || seed.fract() != 0.0 || modes < 1.0 || modes.fract() != 0.0 {
                    return Err(Error::Config(
                        "random-box seed and modes must be non-negative integers (modes >= 1)".into(),
                    ));
                }
                Scenario::RandomBox {
                    seed: seed as u64,
                    modes: modes as usize,
                    amp: v("amp"),
                    u1: v("u1"),
                    u2: v("u2"),
                }
            }
            _ => unreachable!(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::QuiescentBox { .. } => "quiescent-box",
            Scenario::AdvectedBlob { .. } => "advected-blob",
            Scenario::ShearChannel { .. } => "shear-channel",
            Scenario::Manufactured { .. } => "manufactured",
            Scenario::RandomBox { .. } => "random-box",
        }
    }

    /// Parameters in the order of `scenario_params`.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Scenario::QuiescentBox { interface, width } => {
                vec![("interface", interface), ("width", width)]
            }
            Scenario::AdvectedBlob {
                u1,
                u2,
                x,
                y,
                radius,
                alpha_bg,
                alpha_peak,
            } => vec![
                ("u1", u1),
                ("u2", u2),
                ("x", x),
                ("y", y),
                ("radius", radius),
                ("alpha_bg", alpha_bg),
                ("alpha_peak", alpha_peak),
            ],
            Scenario::ShearChannel { umax, alpha } => vec![("umax", umax), ("alpha", alpha)],
            Scenario::Manufactured { amp_u, amp_p } => vec![("amp_u", amp_u), ("amp_p", amp_p)],
            Scenario::RandomBox {
                seed,
                modes,
                amp,
                u1,
                u2,
            } => {
                vec![
                    ("seed", seed as f64),
                    ("modes", modes as f64),
                    ("amp", amp),
                    ("u1", u1),
                    ("u2", u2),
                ]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{}: {msg}", self.name())));
        if self.params().iter().any(|(_, v)| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        let unit = |a: f64| (0.0..=1.0).contains(&a);
        match *self {
            Scenario::QuiescentBox { width, .. } if width < 0.0 => bad("width must be non-negative"),
            Scenario::AdvectedBlob {
                radius,
                alpha_bg,
                alpha_peak,
                ..
            } => {
                if radius <= 0.0 {
                    bad("radius must be positive")
                } else if !unit(alpha_bg) || !unit(alpha_peak) {
                    bad("volume fractions must lie in [0, 1]")
                } else {
                    Ok(())
                }
            }
            Scenario::ShearChannel { alpha, .. } if !unit(alpha) => bad("alpha must lie in [0, 1]"),
            _ => Ok(()),
        }
    }

    /// Boundary setup used when the configuration does not override an edge.
    pub fn default_bcs(&self) -> [EdgeBc; 4] {
        match *self {
            Scenario::AdvectedBlob { u1, u2, alpha_bg, .. } => {
                let data = DataProfile::Uniform {
                    alpha: alpha_bg,
                    u1,
                    u2,
                    p: 0.0,
                };
                std::array::from_fn(|_| EdgeBc::new(EdgeKind::Auto, data.clone()))
            }
            Scenario::ShearChannel { umax, alpha } => [
                EdgeBc::new(EdgeKind::Inflow, DataProfile::Parabolic { alpha, umax, p: 0.0 }),
                EdgeBc::new(EdgeKind::Outflow, DataProfile::Zero),
                EdgeBc::wall(),
                EdgeBc::wall(),
            ],
            _ => std::array::from_fn(|_| EdgeBc::wall()),
        }
    }

    pub fn check_fluids(&self, fluids: &FluidPair) -> Result<()> {
        if matches!(self, Scenario::Manufactured { .. }) && fluids.rho_l != fluids.rho_g {
            return Err(Error::Config("manufactured scenario needs rho_l = rho_g".into()));
        }
        Ok(())
    }

    /// Initial primitive fields before projection.
    pub fn initial_primitives(&self, grid: &Grid2D, fluids: &FluidPair) -> Result<PrimitiveField> {
        self.check_fluids(fluids)?;
        let n = grid.len();
        let zeros = vec![0.0; n];
        let height = grid.y1 - grid.y0;
        Ok(match *self {
            Scenario::QuiescentBox { interface, width } => {
                let y_if = grid.y0 + interface * height;
                let alpha = grid.sample(|_, y| {
                    if width == 0.0 {
                        if y < y_if {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        0.5 * (1.0 - ((y - y_if) / width).tanh())
                    }
                });
                PrimitiveField {
                    alpha,
                    u1: zeros.clone(),
                    u2: zeros.clone(),
                    p: zeros,
                }
            }
            Scenario::AdvectedBlob {
                u1,
                u2,
                x,
                y,
                radius,
                alpha_bg,
                alpha_peak,
            } => {
                let (lo, hi) = (fluids.density(alpha_bg).sqrt(), fluids.density(alpha_peak).sqrt());
                let alpha = grid.sample(|px, py| {
                    let s = ((px - x).powi(2) + (py - y).powi(2)).sqrt() / radius;
                    if s >= 1.0 {
                        return alpha_bg;
                    }
                    let phi0 = lo + (hi - lo) * (0.5 * PI * s).cos().powi(4);
                    fluids
                        .alpha_from_phi0(phi0)
                        .clamp(alpha_bg.min(alpha_peak), alpha_bg.max(alpha_peak))
                });
                PrimitiveField {
                    alpha,
                    u1: vec![u1; n],
                    u2: vec![u2; n],
                    p: zeros,
                }
            }
            Scenario::ShearChannel { umax, alpha } => {
                let u1 = grid.sample(|_, y| {
                    let s = (y - grid.y0) / height;
                    4.0 * umax * s * (1.0 - s)
                });
                PrimitiveField {
                    alpha: vec![alpha; n],
                    u1,
                    u2: zeros.clone(),
                    p: zeros,
                }
            }
            Scenario::Manufactured { .. } => {
                let [u1, u2] = self.exact_velocity_field(grid, 0.0).expect("analytic");
                PrimitiveField {
                    alpha: zeros.clone(),
                    u1,
                    u2,
                    p: zeros,
                }
            }
            Scenario::RandomBox {
                seed,
                modes,
                amp,
                u1: mean_u1,
                u2: mean_u2,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut psi_terms = Vec::new();
                for _ in 0..modes {
                    let (kx, ky) = (rng.gen_range(1..=3) as f64, rng.gen_range(1..=3) as f64);
                    psi_terms.push((
                        kx,
                        ky,
                        rng.gen_range(-1.0..1.0) * amp / (kx + ky),
                        rng.gen_range(0.0..2.0 * PI),
                    ));
                }
                let (ax, ay, ph) = (rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0), rng.gen_range(0.0..2.0 * PI));
                let lx = grid.x1 - grid.x0;
                // velocity from a stream function, then projected by the caller
                let psi_grad = |x: f64, y: f64| -> [f64; 2] {
                    let (mut dx, mut dy) = (0.0, 0.0);
                    for &(kx, ky, a, phase) in &psi_terms {
                        let (sx, cx) = (PI * kx * (x - grid.x0) / lx + phase).sin_cos();
                        let (sy, cy) = (PI * ky * (y - grid.y0) / height).sin_cos();
                        dx += a * PI * kx / lx * cx * sy;
                        dy += a * PI * ky / height * sx * cy;
                    }
                    [dx, dy]
                };
                let alpha = grid.sample(|x, y| 0.5 + 0.5 * (ax * x + ay * y + ph).sin() * (ay * x - ax * y).cos());
                let u1 = grid.sample(|x, y| mean_u1 + psi_grad(x, y)[1]);
                let u2 = grid.sample(|x, y| mean_u2 - psi_grad(x, y)[0]);
                PrimitiveField { alpha, u1, u2, p: zeros }
            }
        })
    }

    pub fn initial_state(&self, grid: &Grid2D, fluids: &FluidPair) -> Result<StateField> {
        primitives_to_state(&self.initial_primitives(grid, fluids)?, fluids, grid)
    }

    /// Body acceleration for scenarios that need one.
    pub fn forcing(&self, fluids: &FluidPair) -> Option<Forcing> {
        match *self {
            Scenario::Manufactured { amp_u, amp_p } => {
                let m = Manufactured {
                    amp_u,
                    amp_p,
                    rho: fluids.rho_l,
                    mu: fluids.mu_l,
                };
                Some(Arc::new(move |t, x, y| m.forcing(t, x, y)))
            }
            _ => None,
        }
    }

    pub fn exact_velocity_field(&self, grid: &Grid2D, t: f64) -> Option<[Vec<f64>; 2]> {
        match *self {
            Scenario::Manufactured { amp_u, amp_p } => {
                let m = Manufactured {
                    amp_u,
                    amp_p,
                    rho: 1.0,
                    mu: 0.0,
                };
                Some([
                    grid.sample(|x, y| m.velocity(t, x, y)[0]),
                    grid.sample(|x, y| m.velocity(t, x, y)[1]),
                ])
            }
            _ => None,
        }
    }
}

/// Analytic manufactured solution on the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub amp_u: f64,
    pub amp_p: f64,
    pub rho: f64,
    pub mu: f64,
}

/// `S(z) = sin²(πz)` and its first three derivatives.
fn s_profile(z: f64) -> [f64; 4] {
    let s = (PI * z).sin();
    let (s2, c2) = (2.0 * PI * z).sin_cos();
    [s * s, PI * s2, 2.0 * PI * PI * c2, -4.0 * PI.powi(3) * s2]
}

impl Manufactured {
    pub fn a(&self, t: f64) -> (f64, f64) {
        (self.amp_u * (1.0 + 0.5 * t.sin()), self.amp_u * 0.5 * t.cos())
    }

    pub fn b(&self, t: f64) -> f64 {
        self.amp_p * t.cos()
    }

    pub fn velocity(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let (a, _) = self.a(t);
        let (sx, sy) = (s_profile(x), s_profile(y));
        [a * sx[0] * sy[1], -a * sx[1] * sy[0]]
    }

    pub fn pressure(&self, t: f64, x: f64, y: f64) -> f64 {
        self.b(t) * (PI * x).cos() * (PI * y).cos()
    }

    /// `∂ₜu + u·∇u − (μ/ρ)Δu + ∇p/ρ`.
    pub fn forcing(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let (a, at) = self.a(t);
        let (sx, sy) = (s_profile(x), s_profile(y));
        let u = [a * sx[0] * sy[1], -a * sx[1] * sy[0]];
        let grad_u1 = [a * sx[1] * sy[1], a * sx[0] * sy[2]];
        let grad_u2 = [-a * sx[2] * sy[0], -a * sx[1] * sy[1]];
        let lap_u1 = a * (sx[2] * sy[1] + sx[0] * sy[3]);
        let lap_u2 = -a * (sx[3] * sy[0] + sx[1] * sy[2]);
        let b = self.b(t);
        let grad_p = [
            -b * PI * (PI * x).sin() * (PI * y).cos(),
            -b * PI * (PI * x).cos() * (PI * y).sin(),
        ];
        let nu = self.mu / self.rho;
        [
            at * sx[0] * sy[1] + u[0] * grad_u1[0] + u[1] * grad_u1[1] - nu * lap_u1 + grad_p[0] / self.rho,
            -at * sx[1] * sy[0] + u[0] * grad_u2[0] + u[1] * grad_u2[1] - nu * lap_u2 + grad_p[1] / self.rho,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_forcing_matches_finite_differences() {
        let m = Manufactured {
            amp_u: 0.8,
            amp_p: 1.3,
            rho: 2.0,
            mu: 0.07,
        };
        let h = 1e-4;
        let vel = |t: f64, x: f64, y: f64| m.velocity(t, x, y);
        for &(t, x, y) in &[(0.1, 0.3, 0.7), (0.7, 0.55, 0.2), (1.3, 0.9, 0.45)] {
            let d = |f: &dyn Fn(f64) -> [f64; 2]| {
                let (p, q) = (f(h), f(-h));
                [(p[0] - q[0]) / (2.0 * h), (p[1] - q[1]) / (2.0 * h)]
            };
            let dd = |f: &dyn Fn(f64) -> [f64; 2]| {
                let (p, c, q) = (f(h), f(0.0), f(-h));
                [(p[0] - 2.0 * c[0] + q[0]) / (h * h), (p[1] - 2.0 * c[1] + q[1]) / (h * h)]
            };
            let ut = d(&|e| vel(t + e, x, y));
            let ux = d(&|e| vel(t, x + e, y));
            let uy = d(&|e| vel(t, x, y + e));
            let uxx = dd(&|e| vel(t, x + e, y));
            let uyy = dd(&|e| vel(t, x, y + e));
            let px = (m.pressure(t, x + h, y) - m.pressure(t, x - h, y)) / (2.0 * h);
            let py = (m.pressure(t, x, y + h) - m.pressure(t, x, y - h)) / (2.0 * h);
            let u = vel(t, x, y);
            let nu = m.mu / m.rho;
            let fd = [
                ut[0] + u[0] * ux[0] + u[1] * uy[0] - nu * (uxx[0] + uyy[0]) + px / m.rho,
                ut[1] + u[0] * ux[1] + u[1] * uy[1] - nu * (uxx[1] + uyy[1]) + py / m.rho,
            ];
            let f = m.forcing(t, x, y);
            for i in 0..2 {
                assert!(
                    (f[i] - fd[i]).abs() < 1e-5 * fd[i].abs().max(1.0),
                    "{i}: {} vs {}",
                    f[i],
                    fd[i]
                );
            }
            // divergence free
            assert!((ux[0] + uy[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn manufactured_velocity_vanishes_on_walls() {
        let m = Manufactured {
            amp_u: 1.0,
            amp_p: 1.0,
            rho: 1.0,
            mu: 0.1,
        };
        for s in [0.0, 0.3, 1.0] {
            for (x, y) in [(0.0, s), (1.0, s), (s, 0.0), (s, 1.0)] {
                let u = m.velocity(0.4, x, y);
                assert!(u[0].abs() < 1e-14 && u[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn presets_build() {
        let grid = Grid2D::unit(9, 2).unwrap();
        let f = FluidPair::new(1000.0, 1.0, 1e-3, 1e-5).unwrap();
        for name in ["quiescent-box", "advected-blob", "shear-channel", "random-box"] {
            let s = Scenario::from_params(name, |_| None).unwrap();
            assert_eq!(s.name(), name);
            let st = s.initial_state(&grid, &f).unwrap();
            assert_eq!(st.alpha_violations(&f), 0, "{name}");
        }
        assert!(Scenario::from_params("vortex", |_| None).is_err());
        assert!(Scenario::from_params("advected-blob", |k| (k == "radius").then_some(-1.0)).is_err());
        let m = Scenario::from_params("manufactured", |_| None).unwrap();
        assert!(m.initial_state(&grid, &f).is_err());
        assert!(m.initial_state(&grid, &FluidPair::single(1.0, 0.1).unwrap()).is_ok());
    }

    #[test]
    fn random_box_is_reproducible() {
        let grid = Grid2D::unit(9, 2).unwrap();
        let f = FluidPair::new(1000.0, 1.0, 1e-3, 1e-5).unwrap();
        let s = Scenario::RandomBox {
            seed: 4,
            modes: 3,
            amp: 1.0,
            u1: 0.0,
            u2: 0.0,
        };
        assert_eq!(s.initial_state(&grid, &f).unwrap(), s.initial_state(&grid, &f).unwrap());
        let t = Scenario::RandomBox {
            seed: 5,
            modes: 3,
            amp: 1.0,
            u1: 0.0,
            u2: 0.0,
        };
        assert_ne!(s.initial_state(&grid, &f).unwrap(), t.initial_state(&grid, &f).unwrap());
    }
}
