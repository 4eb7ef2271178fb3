use rand::Rng;
use serde_json::json;

use super::Run;
use crate::error::Result;
use crate::exhaustion::{exhaustion_order, smooth_min_pair, verify_order, CollarSampler};

const SWEEP_EPS: f64 = 1e-3;
const INJECTIVITY_TOL: f64 = 1e-9;

pub(super) fn exhaustion(run: &mut Run) -> Result<()> {
    let mesh = run.config.mesh()?;
    let order = exhaustion_order(&mesh)?;
    let check = verify_order(&mesh, &order);
    run.metric("faces", mesh.len())?;
    run.metric("collar_len", order.collar_len)?;
    run.check("10", "exhaustion-order", check.valid, json!({ "problems": check.problems }));

    let count = run.config.sweep.unwrap_or(1_000_000);
    let mut rng = run.rng(5);
    let mut bad = 0usize;
    for _ in 0..count {
        let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let v = smooth_min_pair(x, y, SWEEP_EPS);
        let m = f64::min(x, y);
        if !(v >= m && v <= m + SWEEP_EPS / 2.0) {
            bad += 1;
        }
    }
    run.check("10", "smooth-min-bounds", bad == 0, json!({ "points": count, "eps": SWEEP_EPS, "violations": bad }));

    let spc = run.config.samples_per_cell.unwrap_or(8);
    let mut sampler = CollarSampler::new(&mesh, &order, spc)?;
    let collar = sampler.injectivity(INJECTIVITY_TOL);
    run.check("10", "collar-injectivity", collar.injective(), json!(collar));

    sampler.run();
    let unsampled = sampler.unsampled();
    let chain = sampler.injectivity(INJECTIVITY_TOL);
    run.metric("samples", sampler.samples().len())?;
    run.metric("unsampled_faces", unsampled.len())?;
    run.metric("chain_injectivity", &chain)?;
    let text = sampler.to_csv();
    run.write_text("collar_samples.csv", &text)?;
    Ok(())
}
