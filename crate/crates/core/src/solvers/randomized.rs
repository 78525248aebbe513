use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CdState, SolveTrace, SolverConfig};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::signal::{Dictionary, MultivariateSignal, SparseCode};

/// Randomized coordinate descent with uniform draws.
///
/// A window of `K L` consecutive draws all with `|ΔZ| < eps` triggers a full
/// scan, which stops the solver if it confirms `max |ΔZ| < eps` and restarts
/// the window otherwise. `max_iter` caps the number of draws.
pub fn randomized_cd<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &SolverConfig<F>,
) -> Result<(SparseCode<F>, SolveTrace<F>)> {
    let mut st = CdState::new(x, dict, cfg)?;
    let (k_count, l) = (st.n_atoms(), st.code_len());
    let window = k_count * l;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut quiet = 0usize;
    let mut draws = 0usize;
    let mut converged = false;

    while draws < cfg.max_iter {
        let k = rng.random_range(0..k_count);
        let t = rng.random_range(0..l);
        draws += 1;
        let dz = st.abs_dz(k, t);
        if dz > F::zero() {
            st.apply(k, t)?;
        }
        if dz < cfg.eps {
            quiet += 1;
            if quiet >= window {
                if st.max_dz() < cfg.eps {
                    converged = true;
                    break;
                }
                quiet = 0;
            }
        } else {
            quiet = 0;
        }
    }
    let final_dz = st.max_dz();
    st.finish(converged, final_dz, draws as u64)
}
