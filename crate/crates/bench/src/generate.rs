use dicod_core::signal::{correlate, reconstruct};
use dicod_core::{Dictionary, Result, Signal, SparseCode};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::BenchError;

/// How the regularization weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Fixed(f64),
    /// Fraction of `max_{k,t} |correlate(D_k, X)[t]|`, the smallest λ with `Z = 0` optimal.
    RelativeToMax(f64),
}

/// Bernoulli-Gaussian synthetic instance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationSpec {
    pub t: usize,
    pub w: usize,
    pub k: usize,
    pub p: usize,
    /// Activation probability of each code entry.
    pub rho: f64,
    /// Standard deviation of nonzero activations.
    pub sigma: f64,
    pub noise_std: f64,
    pub lambda: LambdaSpec,
    pub seed: u64,
}

impl GenerationSpec {
    /// Desk-scale default: `W = 20, K = 10, P = 3, T = 300 W`.
    pub fn desk_default() -> Self {
        Self {
            t: 300 * 20,
            w: 20,
            k: 10,
            p: 3,
            rho: 0.007,
            sigma: 10.0,
            noise_std: 1.0,
            lambda: LambdaSpec::RelativeToMax(0.1),
            seed: 0,
        }
    }

    /// `W = 200, K = 25, P = 7, T = 600 W, λ = 1`.
    pub fn paper_scale() -> Self {
        Self {
            t: 600 * 200,
            w: 200,
            k: 25,
            p: 7,
            lambda: LambdaSpec::Fixed(1.0),
            ..Self::desk_default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `α = W / T`.
    pub fn alpha(&self) -> f64 {
        self.w as f64 / self.t as f64
    }

    pub fn validate(&self) -> std::result::Result<(), BenchError> {
        if self.t == 0 || self.w == 0 || self.k == 0 || self.p == 0 {
            return Err(BenchError::Config("T, W, K and P must be positive".into()));
        }
        if self.w > self.t {
            return Err(BenchError::Config(format!(
                "W = {} exceeds T = {}",
                self.w, self.t
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(BenchError::Config(format!(
                "rho = {} outside [0, 1)",
                self.rho
            )));
        }
        if !(self.sigma >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(BenchError::Config(
                "sigma and noise_std must be non-negative".into(),
            ));
        }
        match self.lambda {
            LambdaSpec::Fixed(l) | LambdaSpec::RelativeToMax(l) if !(l > 0.0) => {
                Err(BenchError::Config("lambda must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: Signal,
    pub dict: Dictionary,
    pub z_true: SparseCode,
    pub lambda: f64,
}

/// `max_{k,t} |correlate(D_k, X)[t]|`.
pub fn lambda_max(x: &Signal, dict: &Dictionary) -> Result<f64> {
    dict.atoms().iter().try_fold(0.0f64, |acc, atom| {
        Ok(correlate(atom, x)?.iter().fold(acc, |a, v| a.max(v.abs())))
    })
}

/// Draws `(X, D, Z_true)`: unit-norm Gaussian atoms, Bernoulli(ρ)-Gaussian(0, σ²)
/// activations and white Gaussian noise, all from one seeded stream.
pub fn generate_instance(spec: &GenerationSpec) -> std::result::Result<Instance, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut atoms = Array3::<f64>::zeros((spec.k, spec.w, spec.p));
    for mut atom in atoms.outer_iter_mut() {
        atom.mapv_inplace(|_| rng.sample(StandardNormal));
        let norm = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
        atom.mapv_inplace(|v| v / norm);
    }
    let dict = Dictionary::from_array(&atoms)?;
    let l = spec.t - spec.w + 1;
    let mut z = Array2::<f64>::zeros((spec.k, l));
    for v in z.iter_mut() {
        if rng.random_bool(spec.rho) {
            *v = spec.sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let z_true = SparseCode::new(z);
    let clean = reconstruct(&dict, &z_true)?;
    let mut samples = clean.into_inner();
    if spec.noise_std > 0.0 {
        samples.mapv_inplace(|v| v + spec.noise_std * rng.sample::<f64, _>(StandardNormal));
    }
    let x = Signal::new(samples)?;
    let lambda = match spec.lambda {
        LambdaSpec::Fixed(l) => l,
        LambdaSpec::RelativeToMax(f) => f * lambda_max(&x, &dict)?,
    };
    Ok(Instance {
        x,
        dict,
        z_true,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_have_unit_norm() {
        let inst = generate_instance(&GenerationSpec::desk_default()).unwrap();
        for &n in inst.dict.sq_norms() {
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(inst.lambda > 0.0);
    }

    #[test]
    fn zero_rho_gives_pure_noise() {
        let spec = GenerationSpec {
            rho: 0.0,
            t: 500,
            ..GenerationSpec::desk_default()
        };
        let inst = generate_instance(&spec).unwrap();
        assert_eq!(inst.z_true.nnz(), 0);
        assert!(inst.x.sq_norm() > 0.0);
    }

    #[test]
    fn activation_rate_within_binomial_band() {
        let spec = GenerationSpec {
            t: 10_019,
            ..GenerationSpec::desk_default()
        };
        let inst = generate_instance(&spec).unwrap();
        let n = (spec.k * (spec.t - spec.w + 1)) as f64;
        assert!(n >= 1e5);
        let sd = (n * spec.rho * (1.0 - spec.rho)).sqrt();
        let count = inst.z_true.nnz() as f64;
        assert!(
            (count - n * spec.rho).abs() <= 5.0 * sd,
            "{count} vs {}",
            n * spec.rho
        );
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = GenerationSpec {
            w: 10,
            t: 5,
            ..GenerationSpec::desk_default()
        };
        assert!(generate_instance(&bad).is_err());
        let bad = GenerationSpec {
            rho: 1.0,
            ..GenerationSpec::desk_default()
        };
        assert!(generate_instance(&bad).is_err());
    }
}
