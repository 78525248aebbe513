use super::select::{scan_best, BlockMax};
use super::{CdState, GreedyScan, SolveTrace, SolverConfig};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::signal::{Dictionary, MultivariateSignal, SparseCode};

/// Greedy coordinate descent: at every iteration update the coordinate with
/// the largest `|ΔZ|` (ties to the smallest `(k, t)`), until it drops below `eps`.
pub fn greedy_cd<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &SolverConfig<F>,
) -> Result<(SparseCode<F>, SolveTrace<F>)> {
    let mut st = CdState::new(x, dict, cfg)?;
    let (k_count, l, w) = (st.n_atoms(), st.code_len(), dict.width());
    let mut evaluations = (k_count * l) as u64;

    let mut blocks = match cfg.scan {
        GreedyScan::Blocked => Some(BlockMax::new(k_count, l, w, |k, t| st.abs_dz(k, t))),
        GreedyScan::Naive => None,
    };

    loop {
        let best = match &blocks {
            Some(b) => b.best(),
            None => scan_best(k_count, 0..l, |k, t| st.abs_dz(k, t)),
        };
        if best.abs_dz < cfg.eps {
            return st.finish(true, best.abs_dz, evaluations);
        }
        if st.updates >= cfg.max_iter {
            return st.finish(false, best.abs_dz, evaluations);
        }
        st.apply(best.k, best.t)?;
        match blocks.as_mut() {
            Some(b) => {
                let lo = best.t.saturating_sub(w - 1);
                evaluations += b.refresh(lo, best.t + w, |k, t| st.abs_dz(k, t));
            }
            None => evaluations += (k_count * l) as u64,
        }
    }
}
