use ndarray::Array2;

use super::{Recorder, SolveTrace};
use crate::error::{CscError, Result};
use crate::objective::soft_threshold;
use crate::scalar::{compensated_sum, Scalar};
use crate::signal::{correlate, cost, residual, Dictionary, MultivariateSignal, SparseCode};

/// Proximal gradient reference solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxConfig<F> {
    pub lambda: F,
    /// Maximum number of iterations.
    pub iters: usize,
    /// Nesterov momentum with restart on cost increase.
    pub accel: bool,
    /// Stop early once an iteration moves no entry by more than `tol`.
    /// Zero only stops at an exact fixed point.
    pub tol: F,
    pub log_every: usize,
    pub power_iters: usize,
}

impl<F: Scalar> ProxConfig<F> {
    pub fn new(lambda: F, iters: usize) -> Self {
        Self {
            lambda,
            iters,
            accel: true,
            tol: F::zero(),
            log_every: 100,
            power_iters: 50,
        }
    }
}

/// `A^T A v` where `A: Z ↦ Σ_k Z_k ∗ D_k`.
fn normal_operator<F: Scalar>(dict: &Dictionary<F>, v: &SparseCode<F>) -> Result<Array2<F>> {
    let l = v.len();
    // residual(0 - A v) = A v up to sign; the sign cancels after correlation.
    let zero = MultivariateSignal::zeros(l + dict.width() - 1, dict.n_channels());
    let av = residual(&zero, dict, v)?;
    let mut out = Array2::zeros((dict.n_atoms(), l));
    for (k, atom) in dict.atoms().iter().enumerate() {
        let c = correlate(atom, &av)?;
        out.row_mut(k).assign(&c.mapv(|x| -x));
    }
    Ok(out)
}

/// Largest eigenvalue of `A^T A` by power iteration from the all-ones vector.
pub fn estimate_lipschitz<F: Scalar>(
    dict: &Dictionary<F>,
    code_len: usize,
    iters: usize,
) -> Result<F> {
    let k_count = dict.n_atoms();
    let norm = |a: &Array2<F>| compensated_sum(a.iter().map(|&x| x * x)).sqrt();
    let mut v = Array2::from_elem((k_count, code_len), F::one());
    let n0 = norm(&v);
    v.mapv_inplace(|x| x / n0);
    let mut estimate = F::zero();
    for _ in 0..iters.max(1) {
        let w = normal_operator(dict, &SparseCode::new(v.clone()))?;
        estimate = norm(&w);
        if estimate.is_zero() {
            return Err(CscError::dim("degenerate dictionary operator"));
        }
        v = w.mapv(|x| x / estimate);
    }
    Ok(estimate)
}

/// Proximal gradient descent on the convolutional LASSO, optionally
/// accelerated. Used as an optimality reference for the coordinate solvers.
///
/// The step is `1 / L̂` where `L̂` is the power-iteration estimate inflated by
/// 5%, since power iteration approaches the top eigenvalue from below.
pub fn prox_gradient_baseline<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    cfg: &ProxConfig<F>,
) -> Result<(SparseCode<F>, SolveTrace<F>)> {
    if cfg.iters == 0 || cfg.log_every == 0 {
        return Err(CscError::config("iters and log_every must be positive"));
    }
    if !(cfg.lambda > F::zero()) {
        return Err(CscError::config("lambda must be positive"));
    }
    let l = dict.code_len(x.len())?;
    let k_count = dict.n_atoms();
    let mut recorder = Recorder::new(cfg.log_every);
    let lip = estimate_lipschitz(dict, l, cfg.power_iters)? * F::lit(1.05);
    let step = F::one() / lip;
    let threshold = step * cfg.lambda;

    let mut z = SparseCode::zeros(k_count, l);
    let mut z_cost = cost(x, dict, &z, cfg.lambda)?;
    recorder.force(0, || Ok(z_cost))?;
    let mut y = z.clone();
    let mut momentum = F::one();
    let mut converged = false;
    let mut last_change = F::infinity();
    let mut iterations = 0;

    let prox_step = |from: &SparseCode<F>| -> Result<SparseCode<F>> {
        let r = residual(x, dict, from)?;
        let mut next = Array2::zeros((k_count, l));
        for (k, atom) in dict.atoms().iter().enumerate() {
            let g = correlate(atom, &r)?;
            for t in 0..l {
                next[[k, t]] = soft_threshold(from.get(k, t as isize) + step * g[t], threshold);
            }
        }
        Ok(SparseCode::new(next))
    };

    while iterations < cfg.iters {
        let mut next = prox_step(&y)?;
        let mut next_cost = cost(x, dict, &next, cfg.lambda)?;
        if cfg.accel && next_cost > z_cost {
            momentum = F::one();
            next = prox_step(&z)?;
            next_cost = cost(x, dict, &next, cfg.lambda)?;
        }
        iterations += 1;
        last_change = next.max_abs_diff(&z);
        if cfg.accel {
            let m_next =
                (F::one() + (F::one() + F::lit(4.0) * momentum * momentum).sqrt()) / F::lit(2.0);
            let beta = (momentum - F::one()) / m_next;
            let mut ya = next.codes().to_owned();
            ya.zip_mut_with(&z.codes(), |a, &b| *a = *a + beta * (*a - b));
            y = SparseCode::new(ya);
            momentum = m_next;
        } else {
            y = next.clone();
        }
        z = next;
        z_cost = next_cost;
        recorder.maybe(iterations, || Ok(z_cost))?;
        if last_change <= cfg.tol {
            converged = true;
            break;
        }
    }
    recorder.force(iterations, || Ok(z_cost))?;
    let trace = SolveTrace {
        iterations,
        trajectory: recorder.finish(),
        final_max_dz: last_change,
        converged,
        evaluations: (iterations * k_count * l) as u64,
        updates: Vec::new(),
    };
    Ok((z, trace))
}
