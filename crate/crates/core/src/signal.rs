//! Signals, atoms, dictionaries and sparse codes, plus the direct-summation
//! convolution kernels shared by every solver.
//!
//! Index conventions:
//! - a signal has `T` samples of `P` channels; reads outside `[0, T-1]` are zero;
//! - an atom has `W` samples of `P` channels;
//! - a sparse code has `K` rows of `L = T - W + 1` activations;
//! - `correlate(D, X)[t] = Σ_τ ⟨D[τ], X[t + τ]⟩`, i.e. the inner product of the
//!   atom placed at `t` with the signal. With the reversal `D̃[t] = D[W-1-t]` this
//!   is `(D̃ * X)[t + W - 1]`.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2};

use crate::error::{CscError, Result};
use crate::scalar::{compensated_sum, Scalar};

/// Length-`T` sequence of `P`-dimensional samples, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSignal<F> {
    samples: Array2<F>,
}

impl<F: Scalar> MultivariateSignal<F> {
    /// Wraps a `T × P` matrix. Both dimensions must be positive.
    pub fn new(samples: Array2<F>) -> Result<Self> {
        let (t, p) = samples.dim();
        if t == 0 || p == 0 {
            return Err(CscError::dim(format!(
                "signal must be at least 1x1, got {t}x{p}"
            )));
        }
        Ok(Self {
            samples: samples.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(len: usize, channels: usize) -> Self {
        assert!(len > 0 && channels > 0, "empty signal");
        Self {
            samples: Array2::zeros((len, channels)),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> ArrayView2<'_, F> {
        self.samples.view()
    }

    pub fn into_inner(self) -> Array2<F> {
        self.samples
    }

    /// Sample `p` at time `t`, zero outside `[0, T-1]`.
    pub fn sample(&self, t: isize, p: usize) -> F {
        if t < 0 || t as usize >= self.len() {
            F::zero()
        } else {
            self.samples[[t as usize, p]]
        }
    }

    pub fn sq_norm(&self) -> F {
        compensated_sum(self.as_slice().iter().map(|&v| v * v))
    }

    pub(crate) fn as_slice(&self) -> &[F] {
        self.samples.as_slice().expect("standard layout")
    }

    pub(crate) fn as_slice_mut(&mut self) -> &mut [F] {
        self.samples.as_slice_mut().expect("standard layout")
    }
}

/// A `W × P` pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<F> {
    weights: Array2<F>,
}

impl<F: Scalar> Atom<F> {
    pub fn new(weights: Array2<F>) -> Result<Self> {
        let (w, p) = weights.dim();
        if w == 0 || p == 0 {
            return Err(CscError::dim(format!(
                "atom must be at least 1x1, got {w}x{p}"
            )));
        }
        Ok(Self {
            weights: weights.as_standard_layout().into_owned(),
        })
    }

    pub fn width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> ArrayView2<'_, F> {
        self.weights.view()
    }

    pub fn sq_norm(&self) -> F {
        compensated_sum(self.as_slice().iter().map(|&v| v * v))
    }

    pub(crate) fn as_slice(&self) -> &[F] {
        self.weights.as_slice().expect("standard layout")
    }
}

/// `S_{k,l}[lag] = Σ_τ ⟨D_k[τ], D_l[τ + lag]⟩` for lags in `[-W+1, W-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrTable<F> {
    table: Array3<F>,
    width: usize,
}

impl<F: Scalar> CrossCorrTable<F> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_atoms(&self) -> usize {
        self.table.dim().0
    }

    /// `S_{k,l}[lag]`, zero for `|lag| >= W`.
    #[inline]
    pub fn get(&self, k: usize, l: usize, lag: isize) -> F {
        let w = self.width as isize;
        if lag <= -w || lag >= w {
            F::zero()
        } else {
            self.table[[k, l, (lag + w - 1) as usize]]
        }
    }

    /// All `2W - 1` lags of `S_{k,l}`, entry `i` holding lag `i - (W - 1)`.
    #[inline]
    pub fn lags(&self, k: usize, l: usize) -> &[F] {
        let n = 2 * self.width - 1;
        let start = (k * self.n_atoms() + l) * n;
        &self.table.as_slice().expect("standard layout")[start..start + n]
    }

    pub fn table(&self) -> &Array3<F> {
        &self.table
    }
}

/// Computes the pairwise cross-correlation table of a set of atoms.
pub fn cross_correlation_table<F: Scalar>(atoms: &[Atom<F>]) -> Result<CrossCorrTable<F>> {
    let first = atoms
        .first()
        .ok_or_else(|| CscError::dim("dictionary needs at least one atom"))?;
    let (w, p) = (first.width(), first.n_channels());
    if let Some(bad) = atoms.iter().find(|a| a.width() != w || a.n_channels() != p) {
        return Err(CscError::dim(format!(
            "atoms must share shape {w}x{p}, found {}x{}",
            bad.width(),
            bad.n_channels()
        )));
    }
    let k_count = atoms.len();
    let mut table = Array3::zeros((k_count, k_count, 2 * w - 1));
    for (k, dk) in atoms.iter().enumerate() {
        let a = dk.as_slice();
        for (l, dl) in atoms.iter().enumerate() {
            let b = dl.as_slice();
            for idx in 0..2 * w - 1 {
                let lag = idx as isize - (w as isize - 1);
                let tau_lo = 0.max(-lag) as usize;
                let tau_hi = (w as isize).min(w as isize - lag) as usize;
                let mut acc = F::zero();
                for tau in tau_lo..tau_hi {
                    let shifted = (tau as isize + lag) as usize;
                    let ra = &a[tau * p..(tau + 1) * p];
                    let rb = &b[shifted * p..(shifted + 1) * p];
                    for (&x, &y) in ra.iter().zip(rb) {
                        acc += x * y;
                    }
                }
                table[[k, l, idx]] = acc;
            }
        }
    }
    Ok(CrossCorrTable { table, width: w })
}

/// `K` atoms of a common shape with cached squared norms and cross-correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<F> {
    atoms: Vec<Atom<F>>,
    sq_norms: Vec<F>,
    cross_corr: CrossCorrTable<F>,
}

impl<F: Scalar> Dictionary<F> {
    pub fn new(atoms: Vec<Atom<F>>) -> Result<Self> {
        let cross_corr = cross_correlation_table(&atoms)?;
        let sq_norms: Vec<F> = atoms.iter().map(Atom::sq_norm).collect();
        if let Some(k) = sq_norms.iter().position(|&n| !(n > F::zero())) {
            return Err(CscError::dim(format!("atom {k} has zero norm")));
        }
        Ok(Self {
            atoms,
            sq_norms,
            cross_corr,
        })
    }

    /// Builds a dictionary from a `K × W × P` array.
    pub fn from_array(weights: &Array3<F>) -> Result<Self> {
        let atoms = weights
            .outer_iter()
            .map(|a| Atom::new(a.to_owned()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    pub fn to_array(&self) -> Array3<F> {
        let mut out = Array3::zeros((self.n_atoms(), self.width(), self.n_channels()));
        for (k, atom) in self.atoms.iter().enumerate() {
            out.index_axis_mut(ndarray::Axis(0), k)
                .assign(&atom.weights());
        }
        out
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn width(&self) -> usize {
        self.cross_corr.width
    }

    pub fn n_channels(&self) -> usize {
        self.atoms[0].n_channels()
    }

    pub fn atom(&self, k: usize) -> &Atom<F> {
        &self.atoms[k]
    }

    pub fn atoms(&self) -> &[Atom<F>] {
        &self.atoms
    }

    pub fn sq_norms(&self) -> &[F] {
        &self.sq_norms
    }

    pub fn cross_corr(&self) -> &CrossCorrTable<F> {
        &self.cross_corr
    }

    /// Activation length `L = T - W + 1` for a signal of length `T`.
    pub fn code_len(&self, signal_len: usize) -> Result<usize> {
        if signal_len < self.width() {
            return Err(CscError::dim(format!(
                "signal length {signal_len} shorter than atom width {}",
                self.width()
            )));
        }
        Ok(signal_len - self.width() + 1)
    }

    /// Returns a copy with atoms (and their cached quantities) reordered.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        Self::new(order.iter().map(|&k| self.atoms[k].clone()).collect())
    }
}

/// `K × L` activation signals, the optimization variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode<F> {
    codes: Array2<F>,
}

impl<F: Scalar> SparseCode<F> {
    pub fn new(codes: Array2<F>) -> Self {
        Self {
            codes: codes.as_standard_layout().into_owned(),
        }
    }

    pub fn zeros(n_atoms: usize, len: usize) -> Self {
        Self {
            codes: Array2::zeros((n_atoms, len)),
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.codes.nrows()
    }

    pub fn len(&self) -> usize {
        self.codes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// `Z_k[t]`, zero outside `[0, L-1]`.
    #[inline]
    pub fn get(&self, k: usize, t: isize) -> F {
        if t < 0 || t as usize >= self.len() {
            F::zero()
        } else {
            self.codes[[k, t as usize]]
        }
    }

    #[inline]
    pub fn set(&mut self, k: usize, t: usize, value: F) {
        self.codes[[k, t]] = value;
    }

    pub fn codes(&self) -> ArrayView2<'_, F> {
        self.codes.view()
    }

    pub fn codes_mut(&mut self) -> &mut Array2<F> {
        &mut self.codes
    }

    pub fn into_inner(self) -> Array2<F> {
        self.codes
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, F> {
        self.codes.row(k)
    }

    pub fn nnz(&self) -> usize {
        self.codes.iter().filter(|v| !v.is_zero()).count()
    }

    pub fn l1_norm(&self) -> F {
        compensated_sum(self.codes.iter().map(|v| v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> F {
        self.codes
            .iter()
            .zip(other.codes.iter())
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

fn check_channels<F: Scalar>(atom: &Atom<F>, channels: usize) -> Result<()> {
    if atom.n_channels() != channels {
        return Err(CscError::dim(format!(
            "atom has {} channels, signal has {channels}",
            atom.n_channels()
        )));
    }
    Ok(())
}

/// Adds `Z ∗ D` into `out`. Zero activations are skipped.
pub fn convolve_into<F: Scalar>(
    z: ArrayView1<'_, F>,
    atom: &Atom<F>,
    out: &mut MultivariateSignal<F>,
) -> Result<()> {
    let (w, p) = (atom.width(), atom.n_channels());
    check_channels(atom, out.n_channels())?;
    if z.len() + w - 1 != out.len() {
        return Err(CscError::dim(format!(
            "activation length {} with atom width {w} does not produce {} samples",
            z.len(),
            out.len()
        )));
    }
    let d = atom.as_slice();
    let dst = out.as_slice_mut();
    for (t0, &a) in z.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let block = &mut dst[t0 * p..(t0 + w) * p];
        for (o, &v) in block.iter_mut().zip(d) {
            *o += a * v;
        }
    }
    Ok(())
}

/// Full linear convolution `(Z ∗ D)[t] = Σ_τ Z[t - τ] D[τ]`, of length `L + W - 1`.
pub fn convolve<F: Scalar>(z: ArrayView1<'_, F>, atom: &Atom<F>) -> Result<MultivariateSignal<F>> {
    if z.is_empty() {
        return Err(CscError::dim("empty activation signal"));
    }
    let mut out = MultivariateSignal::zeros(z.len() + atom.width() - 1, atom.n_channels());
    convolve_into(z, atom, &mut out)?;
    Ok(out)
}

/// Valid-mode cross-correlation `t ↦ Σ_τ ⟨D[τ], X[t + τ]⟩`, for `t` in `[0, T - W]`.
pub fn correlate<F: Scalar>(atom: &Atom<F>, x: &MultivariateSignal<F>) -> Result<Array1<F>> {
    if x.len() < atom.width() {
        return Err(CscError::dim(format!(
            "signal length {} shorter than atom width {}",
            x.len(),
            atom.width()
        )));
    }
    correlate_range(atom, x, 0, x.len() - atom.width() + 1)
}

/// [`correlate`] restricted to output positions `t` in `[lo, hi)`.
pub fn correlate_range<F: Scalar>(
    atom: &Atom<F>,
    x: &MultivariateSignal<F>,
    lo: usize,
    hi: usize,
) -> Result<Array1<F>> {
    check_channels(atom, x.n_channels())?;
    let (w, p) = (atom.width(), atom.n_channels());
    if lo > hi || hi + w - 1 > x.len() {
        return Err(CscError::dim(format!(
            "correlation range [{lo}, {hi}) exceeds signal of length {} for width {w}",
            x.len()
        )));
    }
    let d = atom.as_slice();
    let src = x.as_slice();
    Ok((lo..hi)
        .map(|t| {
            let window = &src[t * p..(t + w) * p];
            window
                .iter()
                .zip(d)
                .fold(F::zero(), |acc, (&a, &b)| acc + a * b)
        })
        .collect())
}

/// Checks that `(X, D, Z)` have consistent shapes.
pub fn check_problem<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    z: &SparseCode<F>,
) -> Result<()> {
    if x.n_channels() != dict.n_channels() {
        return Err(CscError::dim(format!(
            "signal has {} channels, dictionary has {}",
            x.n_channels(),
            dict.n_channels()
        )));
    }
    let l = dict.code_len(x.len())?;
    if z.n_atoms() != dict.n_atoms() || z.len() != l {
        return Err(CscError::dim(format!(
            "code is {}x{}, expected {}x{l}",
            z.n_atoms(),
            z.len(),
            dict.n_atoms()
        )));
    }
    Ok(())
}

/// `Σ_k Z_k ∗ D_k`.
pub fn reconstruct<F: Scalar>(
    dict: &Dictionary<F>,
    z: &SparseCode<F>,
) -> Result<MultivariateSignal<F>> {
    if z.n_atoms() != dict.n_atoms() || z.is_empty() {
        return Err(CscError::dim(format!(
            "code has {} rows for {} atoms",
            z.n_atoms(),
            dict.n_atoms()
        )));
    }
    let mut out = MultivariateSignal::zeros(z.len() + dict.width() - 1, dict.n_channels());
    for (k, atom) in dict.atoms().iter().enumerate() {
        convolve_into(z.row(k), atom, &mut out)?;
    }
    Ok(out)
}

/// `X - Σ_k Z_k ∗ D_k`.
pub fn residual<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    z: &SparseCode<F>,
) -> Result<MultivariateSignal<F>> {
    check_problem(x, dict, z)?;
    let mut r = reconstruct(dict, z)?;
    for (o, &v) in r.as_slice_mut().iter_mut().zip(x.as_slice()) {
        *o = v - *o;
    }
    Ok(r)
}

/// Objective `½‖X - Σ Z_k ∗ D_k‖² + λ Σ ‖Z_k‖₁`.
pub fn cost<F: Scalar>(
    x: &MultivariateSignal<F>,
    dict: &Dictionary<F>,
    z: &SparseCode<F>,
    lambda: F,
) -> Result<F> {
    if !(lambda > F::zero()) {
        return Err(CscError::config("lambda must be positive"));
    }
    let r = residual(x, dict, z)?;
    Ok(F::lit(0.5) * r.sq_norm() + lambda * z.l1_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    fn atom(rows: Array2<f64>) -> Atom<f64> {
        Atom::new(rows).unwrap()
    }

    #[test]
    fn convolve_small_example() {
        let z = array![1.0, 2.0];
        let d = atom(array![[3.0], [4.0]]);
        let out = convolve(z.view(), &d).unwrap();
        assert_eq!(out.samples(), array![[3.0], [10.0], [8.0]]);
    }

    #[test]
    fn convolve_delta_shifts_atom() {
        let d = atom(array![[1.0, -1.0], [2.0, 0.5], [3.0, 0.0]]);
        let mut z = Array1::zeros(5);
        z[2] = 1.0;
        let out = convolve(z.view(), &d).unwrap();
        for t in 0..out.len() {
            for p in 0..2 {
                let expected = if (2..5).contains(&t) {
                    d.weights()[[t - 2, p]]
                } else {
                    0.0
                };
                assert_eq!(out.samples()[[t, p]], expected);
            }
        }
        let zero = convolve(Array1::zeros(5).view(), &d).unwrap();
        assert_eq!(zero.sq_norm(), 0.0);
    }

    #[test]
    fn correlate_small_example() {
        let d = atom(array![[1.0], [-1.0]]);
        let x = MultivariateSignal::new(array![[2.0], [5.0], [3.0]]).unwrap();
        assert_eq!(correlate(&d, &x).unwrap(), array![-3.0, 2.0]);
    }

    #[test]
    fn correlate_peaks_at_autocorrelation() {
        let d = atom(array![[0.5, 1.0], [-2.0, 0.25], [1.5, 1.0]]);
        let mut z = Array1::zeros(6);
        z[3] = 1.0;
        let x = convolve(z.view(), &d).unwrap();
        let c = correlate(&d, &x).unwrap();
        assert!((c[3] - d.sq_norm()).abs() < 1e-15);
        let zeros = MultivariateSignal::zeros(8, 2);
        assert!(correlate(&d, &zeros).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn correlate_rejects_bad_shapes() {
        let d = atom(array![[1.0, 2.0], [3.0, 4.0]]);
        let short = MultivariateSignal::new(array![[1.0, 1.0]]).unwrap();
        assert!(matches!(correlate(&d, &short), Err(CscError::Dimension(_))));
        let wrong_p = MultivariateSignal::new(array![[1.0], [2.0], [3.0]]).unwrap();
        assert!(matches!(
            correlate(&d, &wrong_p),
            Err(CscError::Dimension(_))
        ));
    }

    #[test]
    fn cross_correlation_small_example() {
        let dict =
            Dictionary::new(vec![atom(array![[1.0], [0.0]]), atom(array![[0.0], [1.0]])]).unwrap();
        let s = dict.cross_corr();
        assert_eq!(s.lags(0, 1), &[0.0, 0.0, 1.0]);
        assert_eq!(s.get(0, 1, 1), 1.0);
        assert_eq!(s.get(1, 0, -1), 1.0);
        assert_eq!(s.get(0, 1, 2), 0.0);
        assert_eq!(s.get(0, 0, 0), 1.0);
    }

    #[test]
    fn cross_correlation_disjoint_channels_is_zero_at_lag_zero() {
        let dict = Dictionary::new(vec![
            atom(array![[1.0, 0.0], [2.0, 0.0]]),
            atom(array![[0.0, 3.0], [0.0, 1.0]]),
        ])
        .unwrap();
        assert_eq!(dict.cross_corr().get(0, 1, 0), 0.0);
        assert_eq!(dict.cross_corr().get(0, 0, 0), dict.sq_norms()[0]);
    }

    #[test]
    fn dictionary_rejects_mixed_shapes_and_zero_atoms() {
        let err = Dictionary::new(vec![atom(array![[1.0], [0.0]]), atom(array![[1.0]])]);
        assert!(matches!(err, Err(CscError::Dimension(_))));
        let zero = Dictionary::new(vec![atom(array![[0.0], [0.0]])]);
        assert!(matches!(zero, Err(CscError::Dimension(_))));
        assert!(Dictionary::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn cost_edge_cases() {
        let dict = Dictionary::new(vec![atom(array![[1.0, 0.5], [-0.5, 2.0]])]).unwrap();
        let x = MultivariateSignal::new(array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 1.0]])
            .unwrap();
        let z0 = SparseCode::zeros(1, 3);
        let c0 = cost(&x, &dict, &z0, 0.7).unwrap();
        assert!((c0 - 0.5 * x.sq_norm()).abs() < 1e-14);

        let mut z = SparseCode::zeros(1, 3);
        z.set(0, 0, 1.5);
        z.set(0, 2, -2.0);
        let exact = reconstruct(&dict, &z).unwrap();
        let c = cost(&exact, &dict, &z, 0.3).unwrap();
        assert!((c - 0.3 * 3.5).abs() < 1e-14);

        assert!(matches!(
            cost(&x, &dict, &z0, 0.0),
            Err(CscError::Config(_))
        ));
        let bad = SparseCode::zeros(1, 2);
        assert!(matches!(
            cost(&x, &dict, &bad, 1.0),
            Err(CscError::Dimension(_))
        ));
    }

    #[test]
    fn dictionary_round_trips_through_array() {
        let w = Array3::from_shape_fn((2, 3, 2), |(k, t, p)| (k * 6 + t * 2 + p) as f64 + 1.0);
        let dict = Dictionary::from_array(&w).unwrap();
        assert_eq!(dict.to_array(), w);
        assert_eq!(dict.code_len(10).unwrap(), 8);
        assert!(dict.code_len(2).is_err());
    }
}
