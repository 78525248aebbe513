/// Lower bound on the expected DICOD speedup over greedy CD with `M` workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupBound {
    /// `M^2 (1 - 2 α² M² (1 + 2 α² M²)^(M/2 - 1))`.
    pub value: f64,
    /// First-order expansion `M^2 (1 - 2 α² M²)`.
    pub expansion: f64,
    /// Whether `α M < 1/4`, the regime where the bound is proven.
    pub hypothesis_holds: bool,
}

pub fn theoretical_speedup_bound(m: usize, alpha: f64) -> SpeedupBound {
    let mf = m as f64;
    let a2m2 = alpha * alpha * mf * mf;
    let value = mf * mf * (1.0 - 2.0 * a2m2 * (1.0 + 2.0 * a2m2).powf(mf / 2.0 - 1.0));
    SpeedupBound {
        value,
        expansion: mf * mf * (1.0 - 2.0 * a2m2),
        hypothesis_holds: alpha * mf < 0.25,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_alpha_gives_m_squared() {
        for m in 1..=32 {
            let b = theoretical_speedup_bound(m, 0.0);
            assert_eq!(b.value, (m * m) as f64);
            assert_eq!(b.expansion, (m * m) as f64);
            assert!(b.hypothesis_holds);
        }
    }

    #[test]
    fn single_worker_matches_direct_evaluation() {
        for alpha in [0.001, 0.01, 0.1, 0.2] {
            let direct = 1.0 - 2.0 * alpha * alpha / (1.0f64 + 2.0 * alpha * alpha).sqrt();
            assert!((theoretical_speedup_bound(1, alpha).value - direct).abs() < 1e-6);
        }
    }

    #[test]
    fn expansion_gap_matches_exact_remainder() {
        // value - expansion = -2 a² M² ((1 + 2 a²)^(M/2 - 1) - 1) M² with a = αM.
        for m in [2usize, 4, 8, 16] {
            for alpha in [0.001, 0.005, 0.0125] {
                let a2 = (alpha * m as f64).powi(2);
                let mf = m as f64;
                let b = theoretical_speedup_bound(m, alpha);
                let exact = -2.0 * a2 * mf * mf * ((1.0 + 2.0 * a2).powf(mf / 2.0 - 1.0) - 1.0);
                assert!((b.value - b.expansion - exact).abs() <= 1e-9 * mf * mf);
            }
        }
    }

    #[test]
    fn bound_never_exceeds_m_squared() {
        for m in 1..=20 {
            for i in 1..=50 {
                let alpha = i as f64 * 0.002;
                assert!(theoretical_speedup_bound(m, alpha).value < (m * m) as f64);
            }
        }
    }

    #[test]
    fn flags_hypothesis_violation() {
        assert!(!theoretical_speedup_bound(4, 0.1).hypothesis_holds);
        assert!(theoretical_speedup_bound(4, 0.05).hypothesis_holds);
    }
}
