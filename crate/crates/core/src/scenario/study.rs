use serde_json::json;

use super::bvp::solve;
use super::{observed_rate, Run};
use crate::dnmap::riccati_residual;
use crate::error::Result;
use crate::source_bvp::headline_check;

const RATE: f64 = 1.5;

pub(super) fn convergence_study(run: &mut Run) -> Result<()> {
    let mut csv = String::from("N,M,h,riccati_residual,headline_error,sign\n");
    let (mut hs, mut ric, mut head, mut signs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (n, m) in run.config.levels()? {
        let g = run.config.geometry_at(n, m)?;
        let s = solve(run, &g, "q1", "q2")?;
        let r = riccati_residual(&s.l1, &g, &s.q1)?.max;
        let h = headline_check(&s.solution, &s.l1.first().matrix, &s.l2.first().matrix, &g)?;
        csv += &format!("{n},{m},{},{r},{},{}\n", g.step(), h.relative_error, h.sign);
        hs.push(g.step());
        ric.push(r);
        head.push(h.relative_error);
        signs.push(h.sign);
    }
    run.write_text("convergence.csv", &csv)?;
    let ric_rate = observed_rate(&hs, &ric);
    let head_rate = observed_rate(&hs, &head);
    run.check("2", "riccati-residual-rate", ric_rate >= RATE, json!({ "residuals": ric, "rate": ric_rate, "threshold": RATE }));
    run.check("6", "headline-rate", head_rate >= RATE, json!({ "errors": head, "rate": head_rate, "threshold": RATE }));
    let decreasing = head.windows(2).all(|w| w[1] < w[0]);
    let stable = signs.windows(2).all(|w| w[0] == w[1]);
    run.check("6", "headline-refinement", decreasing && stable, json!({ "errors": head, "signs": signs }));
    Ok(())
}
