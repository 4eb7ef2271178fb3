//! Config-driven scenario runner: every scenario writes `summary.json` with
//! one PASS/FAIL entry per criterion it covers, plus CSV tables and arrays.

mod bvp;
mod config;
mod dn;
mod mesh;
mod study;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryGrid, WarpedGeometry};

pub use config::{parse_potential, ScenarioConfig, SCENARIOS};

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: String,
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub criteria: Vec<Criterion>,
    pub metrics: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Output sink shared by the scenario implementations.
pub(crate) struct Run<'a> {
    pub config: &'a ScenarioConfig,
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub criteria: Vec<Criterion>,
    pub metrics: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Run<'_> {
    pub fn check(&mut self, id: &str, name: &str, pass: bool, detail: Value) {
        self.criteria.push(Criterion { id: id.into(), name: name.into(), pass, detail });
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.metrics.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed());
        rng.set_stream(stream);
        rng
    }
}

/// Least-squares slope of `log e` against `log h`; `NaN` when any error is
/// not positive.
pub fn observed_rate(h: &[f64], e: &[f64]) -> f64 {
    if e.iter().any(|&v| !(v > 0.0)) || h.len() < 2 {
        return f64::NAN;
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// A fixed smooth function on the boundary: a few low Fourier waves with
/// seeded amplitudes and phases, the same function at every resolution.
#[derive(Clone, Debug)]
pub(crate) struct SmoothData {
    waves: Vec<(Vec<f64>, f64, f64)>,
}

impl SmoothData {
    pub fn new(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let vectors: Vec<Vec<f64>> = match dim {
            1 => (0..=4).map(|k| vec![k as f64]).collect(),
            _ => (0..=2).flat_map(|a| (-2..=2).map(move |b| vec![a as f64, b as f64])).filter(|k| k[0] > 0.0 || k[1] >= 0.0).collect(),
        };
        let waves = vectors.into_iter().map(|k| (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))).collect();
        Self { waves }
    }

    pub fn sample(&self, grid: &BoundaryGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let theta = grid.angles::<f64>(i);
                self.waves.iter().map(|(k, a, phase)| a * (k.iter().zip(&theta).map(|(k, t)| k * t).sum::<f64>() + phase).cos()).sum()
            })
            .collect()
    }
}

pub(crate) fn geometry_metrics(g: &WarpedGeometry<f64>) -> Value {
    serde_json::json!({
        "N": g.boundary_len(),
        "M": g.steps(),
        "eps": g.eps(),
        "offset": g.offset(),
        "profile": g.profile(),
        "grid": g.grid(),
        "geometry_hash": g.hash(),
    })
}

/// Runs `scenario` and writes its reports into `out`.
pub fn run_scenario(scenario: &str, config: &ScenarioConfig, out: &Path) -> Result<Outcome> {
    config.validate(scenario)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut run = Run {
        config,
        out: out.to_path_buf(),
        files: Vec::new(),
        criteria: Vec::new(),
        metrics: Map::new(),
        warnings: Vec::new(),
    };
    let result = match scenario {
        "dn-compute" => dn::dn_compute(&mut run),
        "riccati-check" => dn::riccati_check(&mut run),
        "evolve-check" => dn::evolve_check(&mut run),
        "kernel-check" => dn::kernel_check(&mut run),
        "conformal-check" => dn::conformal_check(&mut run),
        "bvp-headline" => bvp::bvp_headline(&mut run),
        "layer-strip" => bvp::layer_strip(&mut run),
        "null-test" => bvp::null_test(&mut run),
        "oducp-probe" => bvp::oducp_probe(&mut run),
        "global-march" => bvp::global_march(&mut run),
        "exhaustion" => mesh::exhaustion(&mut run),
        "convergence-study" => study::convergence_study(&mut run),
        other => Err(Error::UnknownScenario(other.to_string())),
    };
    result.map_err(|e| e.context(scenario))?;
    let summary = Summary {
        scenario: scenario.to_string(),
        config: config.clone(),
        criteria: run.criteria,
        metrics: run.metrics,
        warnings: run.warnings,
    };
    let path = out.join("summary.json");
    std::fs::write(&path, summary.to_json()?).map_err(|e| Error::io(&path, e))?;
    let mut files = run.files;
    files.push(path);
    Ok(Outcome { summary, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        assert!((observed_rate(&h, &e) - 2.0).abs() < 1e-12);
        assert!(observed_rate(&h, &[1.0, 0.0, 1.0]).is_nan());
    }

    #[test]
    fn smooth_data_is_resolution_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = SmoothData::new(&mut rng, 1);
        let a = d.sample(&BoundaryGrid::Circle { n: 8 });
        let b = d.sample(&BoundaryGrid::Circle { n: 16 });
        for i in 0..8 {
            assert!((a[i] - b[2 * i]).abs() < 1e-12);
        }
    }
}
