//! Flat `key = value` run configuration with dotted sections.
//!
//! ```text
//! # comment
//! grid.nx = 33
//! sbp.order = 2
//! bc.west = inflow
//! bc.west.profile = parabolic
//! bc.west.umax = 1.0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::boundary::{BoundarySpec, DataProfile, EdgeBc, EdgeKind, Penalties};
use crate::error::{Error, Result};
use crate::fields::FluidPair;
use crate::grid::{Edge, Grid2D};
use crate::scenario::{scenario_params, Scenario};
use crate::timestep::{DtMode, TimeControls};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub extents: [f64; 4],
    pub order: usize,
    pub fluids: FluidPair,
    pub bcs: BoundarySpec,
    pub time: TimeControls,
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub snapshot_every: usize,
    pub assert_identity: bool,
    /// Identity residual bound relative to the budget scale.
    pub tolerance: f64,
    pub kappa: f64,
    pub reproject: bool,
}

const FIXED_KEYS: &[&str] = &[
    "grid.nx",
    "grid.ny",
    "grid.x0",
    "grid.x1",
    "grid.y0",
    "grid.y1",
    "sbp.order",
    "fluid.rho_l",
    "fluid.rho_g",
    "fluid.mu_l",
    "fluid.mu_g",
    "sat.sigma0",
    "time.dt",
    "time.t_end",
    "time.cfl",
    "time.dt_max",
    "time.mode",
    "time.max_steps",
    "scenario.name",
    "output.dir",
    "output.snapshot_every",
    "run.assert",
    "run.tolerance",
    "run.kappa",
    "run.reproject",
];

const PROFILE_KEYS: &[(&str, &[&str])] = &[
    ("zero", &[]),
    ("constant", &["g"]),
    ("uniform", &["alpha", "u1", "u2", "p"]),
    ("parabolic", &["alpha", "umax", "p"]),
];

/// Parse `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", lineno + 1)));
        }
    }
    Ok(map)
}

struct Reader {
    map: BTreeMap<String, String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'"))),
        }
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'"))))
            .transpose()
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).as_deref() {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(Error::Config(format!("{key}: expected true/false, got '{v}'"))),
        }
    }
}

fn parse_edge(r: &mut Reader, edge: Edge, default: &EdgeBc) -> Result<EdgeBc> {
    let base = format!("bc.{}", edge.name());
    let kind = match r.take(&base) {
        None => default.kind,
        Some(v) => EdgeKind::from_name(&v).ok_or_else(|| Error::Config(format!("{base}: unknown kind '{v}'")))?,
    };
    let profile_key = format!("{base}.profile");
    let profile = match r.take(&profile_key) {
        Some(p) => p,
        None => {
            // any explicit data key without a profile is an error; otherwise keep the default data
            let stray = PROFILE_KEYS
                .iter()
                .flat_map(|(_, ks)| ks.iter())
                .find(|k| r.map.contains_key(&format!("{base}.{k}")));
            if let Some(k) = stray {
                return Err(Error::Config(format!("{base}.{k} given without {profile_key}")));
            }
            let data = if kind == EdgeKind::Wall {
                DataProfile::Zero
            } else {
                default.data.clone()
            };
            return Ok(EdgeBc::new(kind, data));
        }
    };
    let keys = PROFILE_KEYS
        .iter()
        .find(|(name, _)| *name == profile)
        .map(|(_, ks)| *ks)
        .ok_or_else(|| Error::Config(format!("{profile_key}: unknown profile '{profile}'")))?;
    let mut get = |k: &str, d: f64| r.num(&format!("{base}.{k}"), d);
    let data = match profile.as_str() {
        "zero" => DataProfile::Zero,
        "constant" => {
            let raw = r
                .take(&format!("{base}.g"))
                .ok_or_else(|| Error::Config(format!("{base}.g is required")))?;
            let parts: Vec<f64> = raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("{base}.g: cannot parse '{raw}'")))?;
            let g: [f64; 3] = parts
                .try_into()
                .map_err(|p: Vec<f64>| Error::Config(format!("{base}.g: expected 3 components, got {}", p.len())))?;
            DataProfile::Constant(g)
        }
        "uniform" => DataProfile::Uniform {
            alpha: get("alpha", 0.0)?,
            u1: get("u1", 0.0)?,
            u2: get("u2", 0.0)?,
            p: get("p", 0.0)?,
        },
        "parabolic" => DataProfile::Parabolic {
            alpha: get("alpha", 0.0)?,
            umax: get("umax", 1.0)?,
            p: get("p", 0.0)?,
        },
        _ => unreachable!(),
    };
    for (_, ks) in PROFILE_KEYS {
        for k in ks.iter().filter(|k| !keys.contains(k)) {
            if r.map.contains_key(&format!("{base}.{k}")) {
                return Err(Error::Config(format!("{base}.{k} does not apply to profile '{profile}'")));
            }
        }
    }
    Ok(EdgeBc::new(kind, data))
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_pairs(map: BTreeMap<String, String>) -> Result<Self> {
        let mut r = Reader { map };
        let nx = r.num("grid.nx", 33usize)?;
        let ny = r.num("grid.ny", nx)?;
        let extents = [
            r.num("grid.x0", 0.0)?,
            r.num("grid.x1", 1.0)?,
            r.num("grid.y0", 0.0)?,
            r.num("grid.y1", 1.0)?,
        ];
        let order = r.num("sbp.order", 2usize)?;
        let fluids = FluidPair::new(
            r.num("fluid.rho_l", 1000.0)?,
            r.num("fluid.rho_g", 1.0)?,
            r.num("fluid.mu_l", 1e-3)?,
            r.num("fluid.mu_g", 1e-5)?,
        )?;

        let name = r.take("scenario.name").unwrap_or_else(|| "quiescent-box".into());
        let params = scenario_params(&name).ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))?;
        let mut values = BTreeMap::new();
        for (k, _) in params {
            if let Some(v) = r.opt_f64(&format!("scenario.{k}"))? {
                values.insert(*k, v);
            }
        }
        let scenario = Scenario::from_params(&name, |k| values.get(k).copied())?;

        let defaults = scenario.default_bcs();
        let mut edges = defaults.clone();
        for e in Edge::ALL {
            edges[e as usize] = parse_edge(&mut r, e, &defaults[e as usize])?;
        }
        let penalties = Penalties {
            sigma0: r.num("sat.sigma0", 1.0)?,
            ..Penalties::default()
        };
        let bcs = BoundarySpec::new(edges, penalties)?;

        let mode = match r.take("time.mode").as_deref() {
            None | Some("cfl") => DtMode::Cfl,
            Some("fixed") => DtMode::Fixed,
            Some(v) => return Err(Error::Config(format!("time.mode: expected fixed or cfl, got '{v}'"))),
        };
        let time = TimeControls {
            dt: r.num("time.dt", 1e-3)?,
            t_end: r.num("time.t_end", 0.1)?,
            cfl: r.num("time.cfl", 0.5)?,
            dt_max: r.num("time.dt_max", 1e-2)?,
            mode,
            max_steps: r.num("time.max_steps", 0usize)?,
        };
        time.validate()?;

        let out_dir = PathBuf::from(r.take("output.dir").unwrap_or_else(|| "out".into()));
        let snapshot_every = r.num("output.snapshot_every", 0usize)?;
        let assert_identity = r.flag("run.assert", false)?;
        let tolerance = r.num("run.tolerance", 1e-11f64)?;
        let kappa = r.num("run.kappa", 0.0f64)?;
        let reproject = r.flag("run.reproject", true)?;
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Config(format!("run.kappa must be non-negative, got {kappa}")));
        }
        if !(tolerance > 0.0) {
            return Err(Error::Config(format!("run.tolerance must be positive, got {tolerance}")));
        }

        if let Some(k) = r.map.keys().next() {
            let known = FIXED_KEYS.contains(&k.as_str());
            let hint = if known {
                "given twice or not applicable"
            } else {
                "unknown key"
            };
            return Err(Error::Config(format!("{hint}: '{k}'")));
        }

        let cfg = RunConfig {
            nx,
            ny,
            extents,
            order,
            fluids,
            bcs,
            time,
            scenario,
            out_dir,
            snapshot_every,
            assert_identity,
            tolerance,
            kappa,
            reproject,
        };
        cfg.grid()?;
        if matches!(cfg.scenario, Scenario::Manufactured { .. }) && cfg.extents != [0.0, 1.0, 0.0, 1.0] {
            return Err(Error::Config("manufactured scenario runs on the unit square".into()));
        }
        cfg.scenario.check_fluids(&cfg.fluids)?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<Grid2D> {
        let [x0, x1, y0, y1] = self.extents;
        Grid2D::new(self.nx, self.ny, x0, x1, y0, y1, self.order).map_err(|e| Error::Config(e.to_string()))
    }

    /// Effective configuration with every key spelled out; parsing it yields `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.nx", self.nx.to_string());
        kv("grid.ny", self.ny.to_string());
        for (k, v) in ["grid.x0", "grid.x1", "grid.y0", "grid.y1"].iter().zip(self.extents) {
            kv(k, fmt_f64(v));
        }
        kv("sbp.order", self.order.to_string());
        kv("fluid.rho_l", fmt_f64(self.fluids.rho_l));
        kv("fluid.rho_g", fmt_f64(self.fluids.rho_g));
        kv("fluid.mu_l", fmt_f64(self.fluids.mu_l));
        kv("fluid.mu_g", fmt_f64(self.fluids.mu_g));
        for e in Edge::ALL {
            let bc = self.bcs.edge(e);
            let base = format!("bc.{}", e.name());
            kv(&base, bc.kind.name().into());
            match &bc.data {
                DataProfile::Zero => kv(&format!("{base}.profile"), "zero".into()),
                DataProfile::Constant(g) => {
                    kv(&format!("{base}.profile"), "constant".into());
                    kv(
                        &format!("{base}.g"),
                        g.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","),
                    );
                }
                DataProfile::Uniform { alpha, u1, u2, p } => {
                    kv(&format!("{base}.profile"), "uniform".into());
                    for (k, v) in [("alpha", alpha), ("u1", u1), ("u2", u2), ("p", p)] {
                        kv(&format!("{base}.{k}"), fmt_f64(*v));
                    }
                }
                DataProfile::Parabolic { alpha, umax, p } => {
                    kv(&format!("{base}.profile"), "parabolic".into());
                    for (k, v) in [("alpha", alpha), ("umax", umax), ("p", p)] {
                        kv(&format!("{base}.{k}"), fmt_f64(*v));
                    }
                }
            }
        }
        kv("sat.sigma0", fmt_f64(self.bcs.penalties.sigma0));
        kv("time.dt", fmt_f64(self.time.dt));
        kv("time.t_end", fmt_f64(self.time.t_end));
        kv("time.cfl", fmt_f64(self.time.cfl));
        kv("time.dt_max", fmt_f64(self.time.dt_max));
        kv(
            "time.mode",
            if self.time.mode == DtMode::Fixed { "fixed" } else { "cfl" }.into(),
        );
        kv("time.max_steps", self.time.max_steps.to_string());
        kv("scenario.name", self.scenario.name().into());
        for (k, v) in self.scenario.params() {
            kv(&format!("scenario.{k}"), fmt_f64(v));
        }
        kv("output.dir", self.out_dir.display().to_string());
        kv("output.snapshot_every", self.snapshot_every.to_string());
        kv("run.assert", self.assert_identity.to_string());
        kv("run.tolerance", fmt_f64(self.tolerance));
        kv("run.kappa", fmt_f64(self.kappa));
        kv("run.reproject", self.reproject.to_string());
        s
    }
}

/// Shortest representation that parses back to the same value.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
