use std::ops::Range;

use crate::error::{CscError, Result};
use crate::solvers::balanced_ranges;

/// Coordinate range `[start, end]` (inclusive) owned by worker `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentAssignment {
    pub m: usize,
    pub start: usize,
    pub end: usize,
    /// Border width `W - 1` over which an update reaches a neighbor's β.
    pub halo: usize,
}

impl SegmentAssignment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end + 1
    }
}

/// Splits `[0, L-1]` into `M` balanced contiguous segments, each at least `W` long.
pub fn partition(code_len: usize, workers: usize, width: usize) -> Result<Vec<SegmentAssignment>> {
    if workers == 0 {
        return Err(CscError::config("at least one worker is required"));
    }
    if width == 0 {
        return Err(CscError::config("atom width must be positive"));
    }
    let ranges = balanced_ranges(code_len, workers);
    if let Some(short) = ranges.iter().find(|r| r.len() < width) {
        return Err(CscError::config(format!(
            "{workers} segments over {code_len} coordinates gives a segment of {} < W = {width}",
            short.len()
        )));
    }
    Ok(ranges
        .into_iter()
        .enumerate()
        .map(|(m, r)| SegmentAssignment {
            m,
            start: r.start,
            end: r.end - 1,
            halo: width - 1,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_split() {
        let segs = partition(100, 4, 10).unwrap();
        let bounds: Vec<_> = segs.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(bounds, vec![(0, 24), (25, 49), (50, 74), (75, 99)]);
        assert!(segs.iter().all(|s| s.halo == 9));
    }

    #[test]
    fn single_worker_owns_everything() {
        let segs = partition(37, 1, 5).unwrap();
        assert_eq!((segs[0].start, segs[0].end), (0, 36));
    }

    #[test]
    fn rejects_short_segments() {
        assert!(matches!(partition(10, 4, 5), Err(CscError::Config(_))));
        assert!(partition(10, 0, 5).is_err());
    }
}
