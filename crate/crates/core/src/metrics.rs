//! Confusion counts and the precision / recall / F1 triple.

/// Binary confusion counts; "positive" means predicted member (or label 1
/// for label inference).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    /// Tallies predictions against ground truth.
    pub fn tally<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (bool, bool)>,
    {
        let mut c = ConfusionCounts::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }
}

/// A ratio metric plus whether its denominator was zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> Score {
    if den == 0 {
        Score {
            value: 0.0,
            degenerate: true,
        }
    } else {
        Score {
            value: num as f64 / den as f64,
            degenerate: false,
        }
    }
}

/// `tp / (tp + fp)`, zero (degenerate) when nothing was predicted positive.
pub fn precision(c: &ConfusionCounts) -> Score {
    ratio(c.tp, c.tp + c.fp)
}

/// `tp / (tp + fn)`, zero (degenerate) when there are no actual positives.
pub fn recall(c: &ConfusionCounts) -> Score {
    ratio(c.tp, c.tp + c.fn_)
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F1 computed from one set of counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

impl Metrics {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let p = precision(c);
        let r = recall(c);
        Metrics {
            precision: p.value,
            recall: r.value,
            f1: f1(p.value, r.value),
            degenerate: p.degenerate || r.degenerate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn precision_examples() {
        let c = ConfusionCounts::new(79, 21, 0, 0);
        assert!((precision(&c).value - 0.79).abs() < 1e-15);
        let empty = precision(&ConfusionCounts::new(0, 0, 5, 5));
        assert_eq!(empty.value, 0.0);
        assert!(empty.degenerate);
    }

    #[test]
    fn recall_examples() {
        assert!((recall(&ConfusionCounts::new(97, 0, 3, 0)).value - 0.97).abs() < 1e-15);
        let r = recall(&ConfusionCounts::new(0, 4, 5, 0));
        assert_eq!(r.value, 0.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn f1_two_decimal_rounding() {
        let g = f1(0.79, 0.97);
        assert!((g - 0.8708).abs() < 5e-5);
        assert_eq!(libm::round(g * 100.0) / 100.0, 0.87);
        let m = f1(0.79, 0.51);
        assert!((m - 0.6198).abs() < 5e-5);
        assert_eq!(libm::round(m * 100.0) / 100.0, 0.62);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn tally_counts_every_pair() {
        let c = ConfusionCounts::tally([(true, true), (true, false), (false, true), (false, false), (true, true)]);
        assert_eq!(c, ConfusionCounts::new(2, 1, 1, 1));
        assert_eq!(c.total(), 5);
        assert!((c.accuracy() - 0.6).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn harmonic_mean_fixed_point(x in 0.0f64..=1.0) {
            prop_assert!((f1(x, x) - x).abs() <= 1e-15);
        }

        #[test]
        fn metrics_bounded_and_identity_holds(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
            let m = Metrics::from_counts(&ConfusionCounts::new(tp, fp, fn_, tn));
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let lhs = m.f1 * (m.precision + m.recall);
            let rhs = 2.0 * m.precision * m.recall;
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
