//! Coordinate descent algebra for the convolutional LASSO.
//!
//! `β_k[t]` is the correlation of atom `k` placed at `t` with the residual in
//! which coordinate `(k, t)` is masked out. The optimal value of a single
//! coordinate is then `Sh(β_k[t], λ) / ‖D_k‖²`, and changing `Z_{k0}[t0]` by
//! `ΔZ = old - new` moves every `β_k[t]` with `|t - t0| < W` by
//! `S_{k,k0}[t - t0] · ΔZ`.

use ndarray::Array2;

use crate::error::{CscError, Result};
use crate::scalar::Scalar;
use crate::signal::{
    check_problem, correlate, correlate_range, residual, CrossCorrTable, Dictionary,
    MultivariateSignal, SparseCode,
};

/// `sign(u) · max(|u| - λ, 0)`.
#[inline]
pub fn soft_threshold<F: Scalar>(u: F, lambda: F) -> F {
    let shrunk = u.abs() - lambda;
    if shrunk > F::zero() {
        shrunk.copysign(u)
    } else {
        F::zero()
    }
}

/// Optimal value of one coordinate given its β.
#[inline]
pub fn coordinate_target<F: Scalar>(beta: F, lambda: F, sq_norm: F) -> F {
    soft_threshold(beta, lambda) / sq_norm
}

/// Cost decrease `E(Z) - E(Z')` when coordinate `(k0, t0)` moves from
/// `current` to `u`, everything else fixed.
#[inline]
pub fn delta_cost_single<F: Scalar>(current: F, u: F, beta: F, sq_norm: F, lambda: F) -> F {
    F::lit(0.5) * sq_norm * (current * current - u * u) - beta * (current - u)
        + lambda * (current.abs() - u.abs())
}

/// A single coordinate change. `delta` is `old_value - new_value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateUpdate<F> {
    pub k0: usize,
    pub t0: usize,
    pub old_value: F,
    pub new_value: F,
    pub delta: F,
}

impl<F: Scalar> CoordinateUpdate<F> {
    pub fn new(k0: usize, t0: usize, old_value: F, new_value: F) -> Self {
        Self {
            k0,
            t0,
            old_value,
            new_value,
            delta: old_value - new_value,
        }
    }
}

/// Cost decrease of two simultaneous updates, given their individual decreases.
///
/// The cross term is `S_{k0,k1}[t0 - t1] ΔZ0 ΔZ1`, the inner product of the two
/// placed atom copies.
pub fn delta_cost_pair<F: Scalar>(
    upd0: &CoordinateUpdate<F>,
    upd1: &CoordinateUpdate<F>,
    s: &CrossCorrTable<F>,
    de0: F,
    de1: F,
) -> Result<F> {
    if upd0.k0 == upd1.k0 && upd0.t0 == upd1.t0 {
        return Err(CscError::config(
            "pair updates must target distinct coordinates",
        ));
    }
    let lag = upd0.t0 as isize - upd1.t0 as isize;
    Ok(de0 + de1 - s.get(upd0.k0, upd1.k0, lag) * upd0.delta * upd1.delta)
}

/// Lower bound on the cost decrease of two interfering optimal updates,
/// `ΔE0 + ΔE1 - 2|C| √(ΔE0 ΔE1)`, with `C` the normalized correlation of the
/// two placed atoms.
pub fn interference_lower_bound<F: Scalar>(de0: F, de1: F, coherence: F) -> F {
    de0 + de1 - F::lit(2.0) * coherence.abs() * (de0 * de1).max(F::zero()).sqrt()
}

/// `S_{k0,k1}[lag] / (‖D_k0‖ ‖D_k1‖)`.
pub fn coherence<F: Scalar>(dict: &Dictionary<F>, k0: usize, k1: usize, lag: isize) -> F {
    let n = dict.sq_norms();
    dict.cross_corr().get(k0, k1, lag) / (n[k0].sqrt() * n[k1].sqrt())
}

/// Worst normalized correlation found by [`check_h1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCoherence<F> {
    pub k0: usize,
    pub k1: usize,
    pub lag: isize,
    pub value: F,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Report<F> {
    pub holds: bool,
    /// `None` only when there is no pair to check (one atom of width 1).
    pub worst: Option<WorstCoherence<F>>,
}

impl<F: Scalar> H1Report<F> {
    pub const CSV_HEADER: &'static str = "holds,k0,k1,lag,coherence";

    pub fn csv_row(&self) -> String {
        match self.worst {
            Some(w) => format!("{},{},{},{},{}", self.holds, w.k0, w.k1, w.lag, w.value),
            None => format!("{},,,,", self.holds),
        }
    }
}

/// Checks that no two distinct coordinates have atoms with normalized
/// correlation of magnitude 1: every lag `t ≠ 0` for all atom pairs, and
/// `t = 0` for distinct atoms.
///
/// Values within a few ulps of 1 count as 1, so a duplicated atom is reported.
pub fn check_h1<F: Scalar>(dict: &Dictionary<F>) -> H1Report<F> {
    let k_count = dict.n_atoms();
    let w = dict.width() as isize;
    let mut worst: Option<WorstCoherence<F>> = None;
    for k0 in 0..k_count {
        for k1 in 0..k_count {
            for lag in (-w + 1)..w {
                if k0 == k1 && lag == 0 {
                    continue;
                }
                let value = coherence(dict, k0, k1, lag);
                if worst.is_none_or(|cur| value.abs() > cur.value.abs()) {
                    worst = Some(WorstCoherence { k0, k1, lag, value });
                }
            }
        }
    }
    let limit = F::one() - F::lit(64.0) * F::epsilon();
    H1Report {
        holds: worst.is_none_or(|w| w.value.abs() < limit),
        worst,
    }
}

/// The `K × L` array β, stored for absolute time indices `[origin, origin + len)`.
///
/// The full problem uses `origin = 0` and `len = L`; a distributed worker keeps
/// its segment plus a halo.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaState<F> {
    beta: Array2<F>,
    origin: usize,
}

/// β for the full problem at the given code, recomputed from scratch.
pub fn beta_init<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    z: &SparseCode<F>,
) -> Result<BetaState<F>> {
    check_problem(x, dict, z)?;
    let l = z.len();
    let mut beta = Array2::zeros((dict.n_atoms(), l));
    if z.nnz() == 0 {
        for (k, atom) in dict.atoms().iter().enumerate() {
            beta.row_mut(k).assign(&correlate(atom, x)?);
        }
    } else {
        let r = residual(x, dict, z)?;
        for (k, atom) in dict.atoms().iter().enumerate() {
            let c = correlate(atom, &r)?;
            let n = dict.sq_norms()[k];
            for t in 0..l {
                beta[[k, t]] = c[t] + n * z.get(k, t as isize);
            }
        }
    }
    Ok(BetaState { beta, origin: 0 })
}

impl<F: Scalar> BetaState<F> {
    /// β at `Z = 0` for absolute positions `[lo, hi)`.
    pub fn at_zero(
        x: &MultivariateSignal<F>,
        dict: &Dictionary<F>,
        lo: usize,
        hi: usize,
    ) -> Result<Self> {
        let mut beta = Array2::zeros((dict.n_atoms(), hi.saturating_sub(lo)));
        for (k, atom) in dict.atoms().iter().enumerate() {
            beta.row_mut(k).assign(&correlate_range(atom, x, lo, hi)?);
        }
        Ok(Self { beta, origin: lo })
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// One past the last stored absolute position.
    pub fn end(&self) -> usize {
        self.origin + self.beta.ncols()
    }

    pub fn n_atoms(&self) -> usize {
        self.beta.nrows()
    }

    pub fn values(&self) -> &Array2<F> {
        &self.beta
    }

    /// β at absolute position `t`.
    #[inline]
    pub fn get(&self, k: usize, t: usize) -> F {
        self.beta[[k, t - self.origin]]
    }

    /// Optimal value for coordinate `(k, t)`.
    #[inline]
    pub fn target(&self, k: usize, t: usize, lambda: F, sq_norms: &[F]) -> F {
        coordinate_target(self.get(k, t), lambda, sq_norms[k])
    }

    /// Applies a coordinate update whose position lies in the stored range.
    /// `β_{k0}[t0]` itself is left as is.
    pub fn apply_update(
        &mut self,
        upd: &CoordinateUpdate<F>,
        s: &CrossCorrTable<F>,
    ) -> Result<usize> {
        if upd.k0 >= self.n_atoms() || upd.t0 < self.origin || upd.t0 >= self.end() {
            return Err(CscError::Index(format!(
                "update ({}, {}) outside [0, {}) x [{}, {})",
                upd.k0,
                upd.t0,
                self.n_atoms(),
                self.origin,
                self.end()
            )));
        }
        Ok(self.apply_delta(upd.k0, upd.t0, upd.delta, s))
    }

    /// Propagates a change `delta = old - new` at `(k0, t0)` to every stored
    /// entry within `W - 1` of `t0`; `t0` itself may lie outside the stored
    /// range. Returns the number of entries written.
    pub fn apply_delta(&mut self, k0: usize, t0: usize, delta: F, s: &CrossCorrTable<F>) -> usize {
        if delta.is_zero() {
            return 0;
        }
        let reach = s.width() - 1;
        let lo = self.origin.max(t0.saturating_sub(reach));
        let hi = self.end().min(t0 + reach + 1);
        if lo >= hi {
            return 0;
        }
        let mut touched = 0;
        for k in 0..self.n_atoms() {
            let lags = s.lags(k, k0);
            let mut row = self.beta.row_mut(k);
            for t in lo..hi {
                if k == k0 && t == t0 {
                    continue;
                }
                row[t - self.origin] += lags[t + reach - t0] * delta;
                touched += 1;
            }
        }
        touched
    }
}
