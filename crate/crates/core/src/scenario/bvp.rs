//! Source-problem scenarios.

use rand::Rng;
use serde_json::json;

use super::{geometry_metrics, Run};
use crate::dnmap::{dn_family, DnFamily};
use crate::error::{Error, Result};
use crate::geometry::WarpedGeometry;
use crate::io::{write_field, Sidecar};
use crate::linalg::Matrix;
use crate::oducp_probe::{gradient_blowup_probe, null_test as null_report, offdiagonal_shell_profile, zeta_pairing};
use crate::source_bvp::{assemble_diagonal_source, headline_check, layer_strip_check, solve_source_bvp, BvpSettings, BvpSolution};

const HEADLINE_TOL: f64 = 5e-2;
const LAYER_STRIP_TOL: f64 = 1e-3;
const CONSERVATION_TOL: f64 = 1e-12;
const ZETA_KS: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
const ZETA_EPS: f64 = 1e-2;

pub(crate) struct Solved {
    pub q1: Matrix<f64>,
    pub q2: Matrix<f64>,
    pub l1: DnFamily<f64>,
    pub l2: DnFamily<f64>,
    pub solution: BvpSolution<f64>,
}

pub(crate) fn solve(run: &Run, g: &WarpedGeometry<f64>, k1: &str, k2: &str) -> Result<Solved> {
    let dim = g.grid().dimension();
    let q1 = run.config.potential(k1, dim)?.sample(g)?;
    let q2 = run.config.potential(k2, dim)?.sample(g)?;
    let (l1, l2) = (dn_family(g, &q1)?, dn_family(g, &q2)?);
    let source = assemble_diagonal_source(g, &q1, &q2)?;
    let settings = BvpSettings { terminal_sign: run.config.s1.unwrap_or(1.0), solver: run.config.solver() };
    let solution = solve_source_bvp(&l1, &l2, g, &source, settings)?;
    Ok(Solved { q1, q2, l1, l2, solution })
}

fn max_abs(m: &Matrix<f64>) -> f64 {
    m.max_abs()
}

fn persist(run: &mut Run, g: &WarpedGeometry<f64>, solution: &BvpSolution<f64>) -> Result<()> {
    if !run.config.persist.unwrap_or(false) {
        return Ok(());
    }
    let dir = run.path("fields");
    for (name, field) in [("phi", &solution.phi), ("psi", &solution.psi)] {
        let side = Sidecar {
            kind: name.into(),
            t: None,
            n: g.boundary_len(),
            m: g.steps(),
            geometry_hash: g.hash(),
            provenance: "source-bvp".into(),
        };
        let manifest = write_field(&dir, name, field, &side)?;
        run.files.extend(manifest.files.iter().map(|f| dir.join(f)));
        run.files.push(dir.join(format!("{name}.json")));
    }
    Ok(())
}

pub(super) fn bvp_headline(run: &mut Run) -> Result<()> {
    let g = run.config.geometry()?;
    let s = solve(run, &g, "q1", "q2")?;
    let h = headline_check(&s.solution, &s.l1.first().matrix, &s.l2.first().matrix, &g)?;
    run.metric("geometry", geometry_metrics(&g))?;
    run.write_text(
        "headline.csv",
        &format!("scenario,N,M,error,sign\nbvp-headline,{},{},{},{}\n", g.boundary_len(), g.steps(), h.relative_error, h.sign),
    )?;
    run.check("6", "headline", h.relative_error < HEADLINE_TOL, json!({ "relative_error": h.relative_error, "sign": h.sign, "errors": h.errors, "tolerance": HEADLINE_TOL }));
    persist(run, &g, &s.solution)
}

pub(super) fn layer_strip(run: &mut Run) -> Result<()> {
    let g = run.config.geometry()?;
    let dim = g.grid().dimension();
    let q1 = run.config.potential("q1", dim)?.sample(&g)?;
    let q2 = run.config.potential("q2", dim)?.sample(&g)?;
    let mut rng = run.rng(4);
    let n = g.boundary_len();
    let f1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c = layer_strip_check(&g, &q1, &q2, &f1, &f2)?;
    let nl = layer_strip_check(&g, &q1, &q1, &f1, &f2)?;
    run.metric("geometry", geometry_metrics(&g))?;
    run.check("7", "layer-strip", c.residual < LAYER_STRIP_TOL, json!({ "check": c, "tolerance": LAYER_STRIP_TOL }));
    run.check("7", "layer-strip-null", nl.residual < LAYER_STRIP_TOL && nl.lhs.abs() < LAYER_STRIP_TOL, json!({ "check": nl }));
    Ok(())
}

pub(super) fn null_test(run: &mut Run) -> Result<()> {
    let g = run.config.geometry()?;
    let s = solve(run, &g, "q1", "q1")?;
    let scale = 1f64.max(max_abs(&s.l1.first().matrix)).max(max_abs(&s.q1));
    let r = null_report(&s.solution, &g, scale)?;
    run.metric("geometry", geometry_metrics(&g))?;
    run.check("8", "null-test", r.pass, json!(r));
    Ok(())
}

pub(super) fn oducp_probe(run: &mut Run) -> Result<()> {
    let g = run.config.geometry()?;
    let s = solve(run, &g, "q1", "q2")?;
    let diff = max_abs(&s.q1.sub(&s.q2));
    let scale = if diff > 0.0 { diff } else { 1.0 };
    let profile = offdiagonal_shell_profile(&s.solution.phi, &g);
    run.metric("geometry", geometry_metrics(&g))?;
    run.check(
        "9",
        "offdiagonal-nonvanishing",
        profile.nonvanishing(scale),
        json!({ "binned_mass": profile.binned_mass(), "scale": scale, "shells": profile.shells.len() }),
    );
    run.check(
        "9",
        "mass-conservation",
        profile.conservation_error < CONSERVATION_TOL,
        json!({ "conservation_error": profile.conservation_error, "tolerance": CONSERVATION_TOL }),
    );

    let mut probes = Vec::new();
    let critical = run.config.p;
    for p in [critical, Some(1.0)] {
        let p = match p {
            Some(p) => p,
            None => {
                let n = 2 * g.grid().dimension() + 1;
                n as f64 / (n as f64 - 1.0)
            }
        };
        match gradient_blowup_probe(&s.solution.phi, &g, p) {
            Ok(probe) => probes.push(probe),
            Err(e @ Error::InsufficientShells { .. }) => run.warnings.push(format!("gradient probe at p = {p}: {e}")),
            Err(e) => return Err(e),
        }
    }
    run.write_text("shells.csv", &profile.to_csv(probes.first()))?;
    run.metric("gradient_probes", &probes)?;
    let zeta = zeta_pairing(&s.solution.phi, &g, &ZETA_KS, ZETA_EPS);
    run.metric("zeta", zeta.iter().map(|(k, v)| json!({ "k": k, "value": v })).collect::<Vec<_>>())?;
    run.metric("shell_profile", &profile)?;
    persist(run, &g, &s.solution)
}

pub(super) fn global_march(run: &mut Run) -> Result<()> {
    let base = run.config.geometry()?;
    let limit = run.config.windows.unwrap_or(usize::MAX);
    let mut rows = Vec::new();
    let mut last_verified = 0.0;
    let mut stop = "window-limit";
    let mut all_pass = true;
    for k in 0..limit {
        let g = match base.rebased(k as f64 * base.eps()) {
            Ok(g) => g,
            Err(Error::DepthExceedsManifold { .. }) => {
                stop = "cap";
                break;
            }
            Err(e) => return Err(e),
        };
        let s = solve(run, &g, "q1", "q2")?;
        let head = match headline_check(&s.solution, &s.l1.first().matrix, &s.l2.first().matrix, &g) {
            Ok(h) => Some(h),
            Err(Error::NullComparison) => None,
            Err(e) => return Err(e),
        };
        let z = solve(run, &g, "q1", "q1")?;
        let scale = 1f64.max(max_abs(&z.l1.first().matrix)).max(max_abs(&z.q1));
        let nr = null_report(&z.solution, &g, scale)?;
        let pass = head.as_ref().is_none_or(|h| h.relative_error < HEADLINE_TOL) && nr.pass;
        rows.push(json!({
            "window": k,
            "offset": g.offset(),
            "headline_error": head.as_ref().map(|h| h.relative_error),
            "sign": head.as_ref().map(|h| h.sign),
            "null_pass": nr.pass,
            "pass": pass,
        }));
        if !pass {
            all_pass = false;
            stop = "fail";
            break;
        }
        last_verified = g.offset() + g.eps();
    }
    run.metric("geometry", geometry_metrics(&base))?;
    run.metric("stop_reason", stop)?;
    run.metric("last_verified_depth", last_verified)?;
    let windows = rows.len();
    run.metric("windows", rows)?;
    run.check("6", "global-march", all_pass && windows > 0, json!({ "windows": windows, "last_verified_depth": last_verified, "stop": stop }));
    Ok(())
}
