use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::select::{balanced_ranges, scan_best};
use super::{CdState, SolveTrace, SolverConfig};
use crate::error::{CscError, Result};
use crate::scalar::Scalar;
use crate::signal::{Dictionary, MultivariateSignal, SparseCode};

/// Locally greedy coordinate descent over `cfg.segments` contiguous segments.
///
/// Each iteration draws a segment uniformly and applies its best coordinate.
/// `dz[m]` holds the last local maximum seen on segment `m`; once all of them
/// are below `eps`, a full scan decides whether to stop or to refresh `dz`.
/// Sub-`eps` local maxima are recorded but not applied.
pub fn seq_dicod<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &SolverConfig<F>,
) -> Result<(SparseCode<F>, SolveTrace<F>)> {
    let mut st = CdState::new(x, dict, cfg)?;
    let (k_count, l) = (st.n_atoms(), st.code_len());
    if cfg.segments > l {
        return Err(CscError::config(format!(
            "{} segments for {l} coordinates",
            cfg.segments
        )));
    }
    let segments = balanced_ranges(l, cfg.segments);
    let mut dz = vec![F::infinity(); segments.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluations = 0u64;
    let mut draws = 0usize;

    loop {
        if dz.iter().all(|&v| v < cfg.eps) {
            let mut global = F::zero();
            for (m, seg) in segments.iter().enumerate() {
                dz[m] = scan_best(k_count, seg.clone(), |k, t| st.abs_dz(k, t)).abs_dz;
                global = global.max(dz[m]);
            }
            if global < cfg.eps {
                return st.finish(true, global, evaluations);
            }
        }
        if draws >= cfg.max_iter {
            let global = st.max_dz();
            return st.finish(false, global, evaluations);
        }
        let m = rng.random_range(0..segments.len());
        draws += 1;
        let seg = segments[m].clone();
        evaluations += (k_count * seg.len()) as u64;
        let best = scan_best(k_count, seg, |k, t| st.abs_dz(k, t));
        dz[m] = best.abs_dz;
        if best.abs_dz >= cfg.eps {
            st.apply(best.k, best.t)?;
        }
    }
}
