//! Greedy coordinate selection: a naive scan and a block-wise cache of maxima.

use std::ops::Range;

use crate::scalar::Scalar;

/// Best coordinate of a scan, by `|ΔZ|`, ties broken towards the smallest `(k, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<F> {
    pub k: usize,
    pub t: usize,
    pub abs_dz: F,
}

impl<F: Scalar> Candidate<F> {
    #[inline]
    pub fn beats(&self, other: &Self) -> bool {
        self.abs_dz > other.abs_dz
            || (self.abs_dz == other.abs_dz && (self.k, self.t) < (other.k, other.t))
    }
}

/// Scans `k in 0..n_atoms`, `t in range` and returns the best candidate.
/// `dz(k, t)` must return `|ΔZ_k[t]|`. The range must be non-empty.
#[inline]
pub fn scan_best<F: Scalar>(
    n_atoms: usize,
    range: Range<usize>,
    mut dz: impl FnMut(usize, usize) -> F,
) -> Candidate<F> {
    debug_assert!(!range.is_empty());
    let mut best = Candidate {
        k: 0,
        t: range.start,
        abs_dz: -F::one(),
    };
    for k in 0..n_atoms {
        for t in range.clone() {
            let v = dz(k, t);
            if v > best.abs_dz {
                best = Candidate { k, t, abs_dz: v };
            }
        }
    }
    best
}

/// Contiguous balanced split of `[0, len)` into `parts` ranges: the first
/// `len % parts` ranges get one extra element.
pub fn balanced_ranges(len: usize, parts: usize) -> Vec<Range<usize>> {
    let (base, extra) = (len / parts, len % parts);
    let mut start = 0;
    (0..parts)
        .map(|m| {
            let size = base + usize::from(m < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

/// Per-block cached maxima of `|ΔZ|` over time blocks of fixed size.
///
/// After an update at `t0` only blocks overlapping `[t0 - W + 1, t0 + W - 1]`
/// can change and need a rescan.
pub struct BlockMax<F> {
    block: usize,
    len: usize,
    n_atoms: usize,
    best: Vec<Candidate<F>>,
}

impl<F: Scalar> BlockMax<F> {
    pub fn new(
        n_atoms: usize,
        len: usize,
        block: usize,
        mut dz: impl FnMut(usize, usize) -> F,
    ) -> Self {
        let block = block.max(1);
        let n_blocks = len.div_ceil(block);
        let best = (0..n_blocks)
            .map(|b| scan_best(n_atoms, b * block..((b + 1) * block).min(len), &mut dz))
            .collect();
        Self {
            block,
            len,
            n_atoms,
            best,
        }
    }

    /// Rescans the blocks intersecting `[lo, hi)`. Returns the number of
    /// coordinates evaluated.
    pub fn refresh(&mut self, lo: usize, hi: usize, mut dz: impl FnMut(usize, usize) -> F) -> u64 {
        let hi = hi.min(self.len);
        if lo >= hi {
            return 0;
        }
        let mut evals = 0;
        for b in lo / self.block..=(hi - 1) / self.block {
            let range = b * self.block..((b + 1) * self.block).min(self.len);
            evals += (range.len() * self.n_atoms) as u64;
            self.best[b] = scan_best(self.n_atoms, range, &mut dz);
        }
        evals
    }

    pub fn best(&self) -> Candidate<F> {
        let mut it = self.best.iter();
        let mut best = *it.next().expect("at least one block");
        for c in it {
            if c.beats(&best) {
                best = *c;
            }
        }
        best
    }
}
