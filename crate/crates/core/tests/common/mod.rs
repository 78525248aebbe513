#![allow(dead_code)]

use dicod_core::signal::{reconstruct, Atom, Dictionary, MultivariateSignal, SparseCode};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn random_dict(rng: &mut ChaCha8Rng, k: usize, w: usize, p: usize) -> Dictionary<f64> {
    let mut a = Array3::from_shape_fn((k, w, p), |_| rng.random_range(-1.0..1.0));
    for mut atom in a.outer_iter_mut() {
        let n = atom.iter().map(|v| v * v).sum::<f64>().sqrt();
        atom.mapv_inplace(|v| v / n);
    }
    Dictionary::from_array(&a).unwrap()
}

pub fn random_atom(rng: &mut ChaCha8Rng, w: usize, p: usize) -> Atom<f64> {
    Atom::new(uniform_matrix(rng, w, p)).unwrap()
}

/// Sparse code with about `density · K L` nonzeros of magnitude in [1, 5].
pub fn sparse_code(rng: &mut ChaCha8Rng, k: usize, l: usize, density: f64) -> SparseCode<f64> {
    SparseCode::new(Array2::from_shape_fn((k, l), |_| {
        if rng.random_bool(density) {
            let v: f64 = rng.random_range(1.0..5.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        } else {
            0.0
        }
    }))
}

/// `X = Z * D + noise` with small uniform noise.
pub struct Problem {
    pub x: MultivariateSignal<f64>,
    pub dict: Dictionary<f64>,
    pub z_true: SparseCode<f64>,
    pub lambda: f64,
}

pub fn problem(seed: u64, t: usize, w: usize, k: usize, p: usize, density: f64) -> Problem {
    let mut r = rng(seed);
    let dict = random_dict(&mut r, k, w, p);
    let z_true = sparse_code(&mut r, k, t - w + 1, density);
    let clean = reconstruct(&dict, &z_true).unwrap();
    let noise = uniform_matrix(&mut r, t, p) * 0.3;
    let x = MultivariateSignal::new(clean.into_inner() + noise).unwrap();
    Problem {
        x,
        dict,
        z_true,
        lambda: 0.5,
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
