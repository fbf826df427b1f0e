//! Single-site Gibbs baseline: flips one change indicator at a time.

use rand::Rng;

use crate::error::Result;
use crate::prior::{change_prob_by, GraphParams, HiddenStateMatrix};
use crate::segment::SegmentDensities;

/// Sweeps `t = 2..=T` of series `j`, redrawing each `U_{j,t}` from its full
/// conditional. Flipping `U_{j,t}` re-segments series `j` up to its next
/// change-point.
pub fn single_site_update<R: Rng + ?Sized>(
    j: usize,
    x: &mut HiddenStateMatrix,
    g: &GraphParams,
    dens: &mut SegmentDensities<'_>,
    rng: &mut R,
) -> Result<()> {
    let len = x.len();
    let children: Vec<usize> = g.children(j).collect();
    for t in 2..=len {
        let prev = x.get(j, t - 1);
        let cur = x.get(j, t);
        let mut end = t;
        while end < len && x.get(j, end + 1) == cur {
            end += 1;
        }

        let p = change_prob_by(g, j, t, |i| x.get(i, t - 1));
        let mut log_change = p.ln() + dens.log_marginal(j, prev, t - 1)? + dens.log_marginal(j, t - 1, end)?;
        let mut log_stay = (-p).ln_1p() + dens.log_marginal(j, prev, end)?;
        for &i in &children {
            for u in t..=end.min(len - 1) {
                let changed = x.indicator(i, u + 1);
                let branch = |v: usize| {
                    let pi = change_prob_by(g, i, u + 1, |k| if k == j { v } else { x.get(k, u) });
                    if changed {
                        pi.ln()
                    } else {
                        (-pi).ln_1p()
                    }
                };
                log_change += branch(t - 1);
                log_stay += branch(prev);
            }
        }

        let pr_change = 1.0 / (1.0 + (log_stay - log_change).exp());
        let v = if rng.random::<f64>() < pr_change { t - 1 } else { prev };
        if v != cur {
            for u in t..=end {
                x.set(j, u, v);
            }
        }
    }
    Ok(())
}
