//! Flat JSON scenario configuration. Unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::evolution::InnerSolver;
use crate::exhaustion::{annulus_mesh, disk_mesh, load_mesh, SurfaceMesh};
use crate::geometry::{BoundaryGrid, ProfileSpec, WarpedGeometry};
use crate::potential::PotentialSpec;

pub const SCENARIOS: [&str; 12] = [
    "dn-compute",
    "riccati-check",
    "evolve-check",
    "kernel-check",
    "bvp-headline",
    "layer-strip",
    "null-test",
    "oducp-probe",
    "conformal-check",
    "exhaustion",
    "global-march",
    "convergence-study",
];

/// Every key a config file may hold. Keys irrelevant to a scenario are
/// accepted and ignored; keys required by it must be present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<String>,
    /// `flat-cylinder`, `annulus`, `disk` or `custom`.
    pub profile: Option<String>,
    /// Length of a flat cylinder or custom profile.
    pub depth: Option<f64>,
    /// Inner radius of the annulus.
    pub rho: Option<f64>,
    /// `r` samples of a custom profile.
    pub profile_samples: Option<Vec<f64>>,
    /// `circle` (default) or `torus`.
    pub grid: Option<String>,
    pub n: Option<usize>,
    /// Second torus axis; defaults to `n`.
    pub n2: Option<usize>,
    pub m: Option<usize>,
    pub eps: Option<f64>,
    /// `zero`, `constant(c)`, `bump(θ₀…, t₀, width, amplitude)` or `file:<path>`.
    pub q1: Option<String>,
    pub q2: Option<String>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Terminal sign `s₁` of the source problem.
    pub s1: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    /// Refinement levels `NxM,NxM,…`.
    pub levels: Option<String>,
    /// Gradient probe exponent; defaults to the critical one.
    pub p: Option<f64>,
    /// `disk(rings,sectors)`, `annulus(rings,sectors,inner)` or an OFF path.
    pub mesh: Option<String>,
    pub samples_per_cell: Option<usize>,
    /// Points in the smooth-min sweep.
    pub sweep: Option<usize>,
    /// `γ(t) = gamma_scale · exp(gamma_rate · t)`.
    pub gamma_scale: Option<f64>,
    pub gamma_rate: Option<f64>,
    /// Largest `|k|` of the conformal check.
    pub kmax: Option<usize>,
    /// Cap on global-march windows.
    pub windows: Option<usize>,
    /// Write solution fields as EVSQ bundles.
    pub persist: Option<bool>,
}

fn required(scenario: &str) -> &'static [&'static str] {
    match scenario {
        "dn-compute" | "riccati-check" | "evolve-check" | "kernel-check" | "conformal-check" => &["profile", "n", "m", "eps"],
        "bvp-headline" | "layer-strip" | "null-test" | "oducp-probe" | "global-march" => {
            &["profile", "n", "m", "eps", "q1", "q2"]
        }
        "convergence-study" => &["profile", "eps", "q1", "q2"],
        "exhaustion" => &["mesh"],
        _ => &[],
    }
}

impl ScenarioConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &[])
    }

    /// Parses a JSON object and applies `key=value` overrides; values parse
    /// as JSON when they can and as strings otherwise.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
        let Value::Object(mut map) = value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        apply_overrides(&mut map, overrides)?;
        Self::from_value(Value::Object(map))
    }

    /// Checks required keys for `scenario` and basic ranges.
    pub fn validate(&self, scenario: &str) -> Result<()> {
        if !SCENARIOS.contains(&scenario) {
            return Err(Error::UnknownScenario(scenario.to_string()));
        }
        if let Some(s) = &self.scenario {
            if s != scenario {
                return Err(Error::Config(format!("config is for scenario `{s}`, not `{scenario}`")));
            }
        }
        let value = serde_json::to_value(self)?;
        let missing: Vec<&str> = required(scenario).iter().copied().filter(|k| value[*k].is_null()).collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing required keys for {scenario}: {}", missing.join(", "))));
        }
        for (key, v) in [("n", self.n), ("n2", self.n2)] {
            if let Some(n) = v {
                if n % 2 != 0 || n < 8 {
                    return Err(Error::Config(format!("{key} = {n} must be even and >= 8")));
                }
            }
        }
        for (key, v) in [("tolerance", self.tolerance), ("eps", self.eps)] {
            if let Some(x) = v {
                if !(x > 0.0) {
                    return Err(Error::Config(format!("{key} = {x} must be positive")));
                }
            }
        }
        if self.m.is_some_and(|m| m < 2) {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if self.samples_per_cell.is_some_and(|s| s < 4) {
            return Err(Error::Config("samples_per_cell must be at least 4".into()));
        }
        if let Some(s) = self.s1 {
            if s != 1.0 && s != -1.0 {
                return Err(Error::Config(format!("s1 = {s} must be +1 or -1")));
            }
        }
        self.levels()?;
        Ok(())
    }

    pub fn profile_spec(&self) -> Result<ProfileSpec> {
        let name = self.profile.as_deref().ok_or_else(|| Error::Config("missing key: profile".into()))?;
        let need = |key: &str, v: Option<f64>| v.ok_or_else(|| Error::Config(format!("profile {name} needs `{key}`")));
        let spec = match name {
            "flat-cylinder" => ProfileSpec::FlatCylinder { depth: self.depth.unwrap_or(1.0) },
            "annulus" => ProfileSpec::Annulus { rho: need("rho", self.rho)? },
            "disk" => ProfileSpec::Disk,
            "custom" => ProfileSpec::Custom {
                depth: need("depth", self.depth)?,
                samples: self.profile_samples.clone().ok_or_else(|| Error::Config("profile custom needs `profile_samples`".into()))?,
            },
            other => return Err(Error::Config(format!("unknown profile `{other}`"))),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn boundary_grid(&self, n: usize) -> Result<BoundaryGrid> {
        match self.grid.as_deref().unwrap_or("circle") {
            "circle" => Ok(BoundaryGrid::Circle { n }),
            "torus" => Ok(BoundaryGrid::Torus { n1: n, n2: self.n2.unwrap_or(n) }),
            other => Err(Error::Config(format!("unknown grid `{other}`"))),
        }
    }

    /// Geometry at the configured resolution.
    pub fn geometry(&self) -> Result<WarpedGeometry<f64>> {
        let n = self.n.ok_or_else(|| Error::Config("missing key: n".into()))?;
        let m = self.m.ok_or_else(|| Error::Config("missing key: m".into()))?;
        self.geometry_at(n, m)
    }

    pub fn geometry_at(&self, n: usize, m: usize) -> Result<WarpedGeometry<f64>> {
        let eps = self.eps.ok_or_else(|| Error::Config("missing key: eps".into()))?;
        WarpedGeometry::new(&self.profile_spec()?, self.boundary_grid(n)?, m, eps, 0.0)
    }

    pub fn solver(&self) -> InnerSolver {
        let d = InnerSolver::default();
        InnerSolver { tolerance: self.tolerance.unwrap_or(d.tolerance), max_iterations: self.max_iterations.unwrap_or(d.max_iterations) }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn levels(&self) -> Result<Vec<(usize, usize)>> {
        let text = self.levels.as_deref().unwrap_or("16x64,32x128,64x256");
        let levels = text
            .split(',')
            .map(|item| {
                let (n, m) = item.trim().split_once('x').ok_or_else(|| Error::Config(format!("bad level `{item}`, expected NxM")))?;
                let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad level `{item}`")));
                Ok((parse(n)?, parse(m)?))
            })
            .collect::<Result<Vec<_>>>()?;
        if levels.len() < 2 {
            return Err(Error::Config("levels needs at least two entries".into()));
        }
        Ok(levels)
    }

    /// Potential `key` (`q1` or `q2`) for a boundary of dimension `dim`.
    pub fn potential(&self, key: &str, dim: usize) -> Result<PotentialSpec> {
        let text = match key {
            "q1" => self.q1.as_deref(),
            "q2" => self.q2.as_deref(),
            _ => None,
        }
        .unwrap_or("zero");
        parse_potential(text, dim).map_err(|e| Error::Config(format!("{key}: {e}")))
    }

    pub fn mesh(&self) -> Result<SurfaceMesh> {
        let text = self.mesh.as_deref().ok_or_else(|| Error::Config("missing key: mesh".into()))?;
        if let Some(args) = call_args(text, "disk") {
            let a = numbers(&args)?;
            if a.len() != 2 {
                return Err(Error::Config(format!("disk mesh takes (rings, sectors): `{text}`")));
            }
            return Ok(disk_mesh(a[0] as usize, a[1] as usize));
        }
        if let Some(args) = call_args(text, "annulus") {
            let a = numbers(&args)?;
            if a.len() != 3 {
                return Err(Error::Config(format!("annulus mesh takes (rings, sectors, inner): `{text}`")));
            }
            return Ok(annulus_mesh(a[0] as usize, a[1] as usize, a[2]));
        }
        load_mesh(Path::new(text))
    }
}

fn apply_overrides(map: &mut Map<String, Value>, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        map.insert(key.trim().to_string(), value);
    }
    Ok(())
}

fn call_args(text: &str, name: &str) -> Option<String> {
    let rest = text.trim().strip_prefix(name)?.trim_start();
    Some(rest.strip_prefix('(')?.strip_suffix(')')?.to_string())
}

fn numbers(args: &str) -> Result<Vec<f64>> {
    args.split(',')
        .map(|s| {
            let s = s.trim();
            match s {
                "pi" => Ok(std::f64::consts::PI),
                _ => s.parse::<f64>().map_err(|_| Error::Config(format!("`{s}` is not a number"))),
            }
        })
        .collect()
}

pub fn parse_potential(text: &str, dim: usize) -> Result<PotentialSpec> {
    let text = text.trim();
    if text == "zero" {
        return Ok(PotentialSpec::Zero);
    }
    if let Some(args) = call_args(text, "constant") {
        let a = numbers(&args)?;
        return match a[..] {
            [c] => Ok(PotentialSpec::Constant { c }),
            _ => Err(Error::Config(format!("constant takes one value: `{text}`"))),
        };
    }
    if let Some(args) = call_args(text, "bump") {
        let a = numbers(&args)?;
        if a.len() != dim + 3 {
            return Err(Error::Config(format!("bump on a {dim}-dimensional boundary takes {} values: `{text}`", dim + 3)));
        }
        return Ok(PotentialSpec::Bump { theta0: a[..dim].to_vec(), t0: a[dim], width: a[dim + 1], amplitude: a[dim + 2] });
    }
    if let Some(path) = text.strip_prefix("file:") {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Sampled {
            depths: Vec<f64>,
            values: Vec<Vec<f64>>,
        }
        let path = Path::new(path);
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Sampled = serde_json::from_str(&body).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        return Ok(PotentialSpec::Sampled { depths: s.depths, values: s.values });
    }
    Err(Error::Config(format!("unknown potential `{text}`")))
}
