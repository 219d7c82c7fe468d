//! Prevalence estimators: classify-and-count, its probabilistic variant,
//! and the rate-adjusted corrections of both.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::learner::CvPredictions;

/// Classifier error rates estimated from held-out predictions: hard rates
/// are decision fractions, soft rates are posterior means.
#[derive(Clone, Copy, Debug)]
pub struct RateEstimates {
    pub tpr_hard: f64,
    pub fpr_hard: f64,
    pub tpr_soft: f64,
    pub fpr_soft: f64,
}

/// Mean held-out decision / posterior over true positives (tpr) and true
/// negatives (fpr).
pub fn estimate_rates(cv: &CvPredictions) -> Result<RateEstimates> {
    let mut pos = 0usize;
    let mut neg = 0usize;
    let mut tp_hard = 0.0;
    let mut fp_hard = 0.0;
    let mut tp_soft = 0.0;
    let mut fp_soft = 0.0;
    for record in &cv.records {
        if record.label.is_positive() {
            pos += 1;
            tp_hard += f64::from(u8::from(record.hard));
            tp_soft += record.posterior;
        } else {
            neg += 1;
            fp_hard += f64::from(u8::from(record.hard));
            fp_soft += record.posterior;
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData(
            "rate estimation needs held-out predictions for both classes".into(),
        ));
    }
    Ok(RateEstimates {
        tpr_hard: tp_hard / pos as f64,
        fpr_hard: fp_hard / neg as f64,
        tpr_soft: tp_soft / pos as f64,
        fpr_soft: fp_soft / neg as f64,
    })
}

/// The four quantification methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Cc,
    Pcc,
    Acc,
    Pacc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cc, Method::Pcc, Method::Acc, Method::Pacc];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cc => "cc",
            Method::Pcc => "pcc",
            Method::Acc => "acc",
            Method::Pacc => "pacc",
        }
    }

    /// Whether the method consumes hard decisions (as opposed to
    /// posteriors).
    pub fn uses_hard_classifier(self) -> bool {
        matches!(self, Method::Cc | Method::Acc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cc" => Ok(Method::Cc),
            "pcc" => Ok(Method::Pcc),
            "acc" => Ok(Method::Acc),
            "pacc" => Ok(Method::Pacc),
            other => Err(Error::InvalidInput(format!(
                "unknown quantification method '{other}'"
            ))),
        }
    }
}

/// Estimated positive-class prevalence for one sample.
#[derive(Clone, Copy, Debug)]
pub struct PrevalenceEstimate {
    /// Estimate clipped into [0, 1].
    pub p_pos: f64,
    pub method: Method,
    /// The pre-clipping value of the rate adjustment; equals `p_pos` for
    /// the unadjusted methods. The linear inversion is exactly unbiased
    /// only before clipping.
    pub unclipped: f64,
    /// Set when `|tpr - fpr|` was too small to invert and the unadjusted
    /// estimate was returned instead.
    pub degenerate_rates: bool,
}

impl PrevalenceEstimate {
    pub fn p_neg(&self) -> f64 {
        1.0 - self.p_pos
    }
}

/// Classify and count: the fraction of positive decisions.
pub fn cc(decisions: &[bool]) -> Result<PrevalenceEstimate> {
    if decisions.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let p = decisions.iter().filter(|&&d| d).count() as f64 / decisions.len() as f64;
    Ok(PrevalenceEstimate {
        p_pos: p,
        method: Method::Cc,
        unclipped: p,
        degenerate_rates: false,
    })
}

/// Probabilistic classify and count: the mean posterior.
pub fn pcc(posteriors: &[f64]) -> Result<PrevalenceEstimate> {
    if posteriors.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    for &p in posteriors {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "posterior {p} outside [0, 1]"
            )));
        }
    }
    let p = posteriors.iter().sum::<f64>() / posteriors.len() as f64;
    Ok(PrevalenceEstimate {
        p_pos: p,
        method: Method::Pcc,
        unclipped: p,
        degenerate_rates: false,
    })
}

/// Minimum tpr/fpr separation below which the adjustment is not invertible.
pub const DEGENERATE_RATE_GAP: f64 = 1e-6;

/// Rate adjustment `(p_cc - fpr) / (tpr - fpr)`, clipped to [0, 1].
///
/// With hard-classifier inputs this is the adjusted count method, with
/// soft inputs its probabilistic analogue; `method` tags which one.
/// When `|tpr - fpr| < 1e-6` the inversion is undefined and the unadjusted
/// estimate is returned with `degenerate_rates` set.
pub fn adjust(p_cc: f64, tpr: f64, fpr: f64, method: Method) -> PrevalenceEstimate {
    assert!((0.0..=1.0).contains(&p_cc), "p_cc must lie in [0, 1]");
    assert!((0.0..=1.0).contains(&tpr), "tpr must lie in [0, 1]");
    assert!((0.0..=1.0).contains(&fpr), "fpr must lie in [0, 1]");

    if (tpr - fpr).abs() < DEGENERATE_RATE_GAP {
        return PrevalenceEstimate {
            p_pos: p_cc,
            method,
            unclipped: p_cc,
            degenerate_rates: true,
        };
    }
    let raw = (p_cc - fpr) / (tpr - fpr);
    PrevalenceEstimate {
        p_pos: raw.clamp(0.0, 1.0),
        method,
        unclipped: raw,
        degenerate_rates: false,
    }
}

/// A quantifier bound to precomputed per-document classifier outputs over
/// an evaluation pool; `estimate` aggregates the outputs of the documents
/// selected into one sample.
pub trait PoolQuantifier: Sync {
    fn method(&self) -> Method;
    fn estimate(&self, doc_indices: &[usize]) -> PrevalenceEstimate;
}

/// CC over a pool of hard decisions.
pub struct CcQuantifier {
    pub decisions: Vec<bool>,
}

impl PoolQuantifier for CcQuantifier {
    fn method(&self) -> Method {
        Method::Cc
    }

    fn estimate(&self, doc_indices: &[usize]) -> PrevalenceEstimate {
        let sample: Vec<bool> = doc_indices.iter().map(|&i| self.decisions[i]).collect();
        cc(&sample).expect("protocol samples are non-empty")
    }
}

/// PCC over a pool of posteriors.
pub struct PccQuantifier {
    pub posteriors: Vec<f64>,
}

impl PoolQuantifier for PccQuantifier {
    fn method(&self) -> Method {
        Method::Pcc
    }

    fn estimate(&self, doc_indices: &[usize]) -> PrevalenceEstimate {
        let sample: Vec<f64> = doc_indices.iter().map(|&i| self.posteriors[i]).collect();
        pcc(&sample).expect("protocol samples are non-empty and in range")
    }
}

/// ACC: CC corrected by hard-classifier rates.
pub struct AccQuantifier {
    pub decisions: Vec<bool>,
    pub tpr: f64,
    pub fpr: f64,
}

impl PoolQuantifier for AccQuantifier {
    fn method(&self) -> Method {
        Method::Acc
    }

    fn estimate(&self, doc_indices: &[usize]) -> PrevalenceEstimate {
        let sample: Vec<bool> = doc_indices.iter().map(|&i| self.decisions[i]).collect();
        let base = cc(&sample).expect("protocol samples are non-empty");
        adjust(base.p_pos, self.tpr, self.fpr, Method::Acc)
    }
}

/// PACC: PCC corrected by posterior-expected rates.
pub struct PaccQuantifier {
    pub posteriors: Vec<f64>,
    pub tpr: f64,
    pub fpr: f64,
}

impl PoolQuantifier for PaccQuantifier {
    fn method(&self) -> Method {
        Method::Pacc
    }

    fn estimate(&self, doc_indices: &[usize]) -> PrevalenceEstimate {
        let sample: Vec<f64> = doc_indices.iter().map(|&i| self.posteriors[i]).collect();
        let base = pcc(&sample).expect("protocol samples are non-empty and in range");
        adjust(base.p_pos, self.tpr, self.fpr, Method::Pacc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::learner::{CvPredictions, CvRecord};
    use proptest::prelude::*;

    fn cv(records: Vec<(bool, f64, Label)>) -> CvPredictions {
        CvPredictions {
            records: records
                .into_iter()
                .map(|(hard, posterior, label)| CvRecord {
                    hard,
                    posterior,
                    label,
                    fold: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn rates_are_per_class_means() {
        let p = Label::Positive;
        let n = Label::Negative;
        let predictions = cv(vec![
            (true, 0.8, p),
            (true, 0.6, p),
            (false, 0.4, p),
            (true, 0.9, p),
            (false, 0.1, n),
            (false, 0.2, n),
            (true, 0.7, n),
            (false, 0.3, n),
        ]);
        let rates = estimate_rates(&predictions).unwrap();
        assert!((rates.tpr_hard - 0.75).abs() < 1e-12);
        assert!((rates.fpr_hard - 0.25).abs() < 1e-12);
        assert!((rates.tpr_soft - 0.675).abs() < 1e-12);
        assert!((rates.fpr_soft - 0.325).abs() < 1e-12);
    }

    #[test]
    fn soft_rates_average_posteriors() {
        let predictions = cv(vec![
            (true, 0.8, Label::Positive),
            (false, 0.6, Label::Positive),
            (false, 0.0, Label::Negative),
        ]);
        let rates = estimate_rates(&predictions).unwrap();
        assert!((rates.tpr_soft - 0.7).abs() < 1e-12);
    }

    #[test]
    fn perfect_classifier_rates() {
        let predictions = cv(vec![
            (true, 1.0, Label::Positive),
            (false, 0.0, Label::Negative),
        ]);
        let rates = estimate_rates(&predictions).unwrap();
        assert_eq!(rates.tpr_hard, 1.0);
        assert_eq!(rates.fpr_hard, 0.0);
    }

    #[test]
    fn rates_need_both_classes() {
        let predictions = cv(vec![(true, 1.0, Label::Positive)]);
        assert!(estimate_rates(&predictions).is_err());
    }

    #[test]
    fn cc_counts_positive_decisions() {
        assert_eq!(cc(&[true, true, false, false]).unwrap().p_pos, 0.5);
        assert_eq!(cc(&[false, false, false]).unwrap().p_pos, 0.0);
        assert!((cc(&[true, false, false, false, true]).unwrap().p_pos - 0.4).abs() < 1e-12);
        assert!(cc(&[]).is_err());
    }

    #[test]
    fn pcc_averages_posteriors() {
        assert_eq!(pcc(&[0.9, 0.1]).unwrap().p_pos, 0.5);
        assert_eq!(pcc(&[1.0, 1.0]).unwrap().p_pos, 1.0);
        assert!((pcc(&[0.2, 0.4, 0.6]).unwrap().p_pos - 0.4).abs() < 1e-12);
        assert!(pcc(&[]).is_err());
        assert!(pcc(&[0.5, 1.2]).is_err());
        assert!(pcc(&[-0.1]).is_err());
    }

    #[test]
    fn adjustment_matches_hand_evaluations() {
        // Perfect classifier: identity.
        assert_eq!(adjust(0.6, 1.0, 0.0, Method::Acc).p_pos, 0.6);
        // Symmetric rates fix one-half.
        assert!((adjust(0.5, 0.8, 0.2, Method::Acc).p_pos - 0.5).abs() < 1e-12);
        // (0.1 - 0.3) / 0.4 = -0.5, clipped to zero.
        let clipped = adjust(0.1, 0.7, 0.3, Method::Acc);
        assert_eq!(clipped.p_pos, 0.0);
        assert!((clipped.unclipped + 0.5).abs() < 1e-12);
        assert!(!clipped.degenerate_rates);
    }

    #[test]
    fn degenerate_rates_fall_back_to_the_unadjusted_estimate() {
        let est = adjust(0.42, 0.5, 0.5, Method::Pacc);
        assert_eq!(est.p_pos, 0.42);
        assert!(est.degenerate_rates);
        let est = adjust(0.42, 0.5, 0.5 + 1e-7, Method::Pacc);
        assert!(est.degenerate_rates);
        let est = adjust(0.42, 0.5, 0.4, Method::Pacc);
        assert!(!est.degenerate_rates);
    }

    /// Brute-force oracle: enumerate all 2^n decision outcomes of a
    /// stochastic classifier with exact (tpr, fpr), weight each outcome by
    /// its probability, and average the unclipped adjustment. The linear
    /// inversion makes this expectation equal the true prevalence.
    fn expected_adjusted_prevalence(labels: &[bool], tpr: f64, fpr: f64) -> f64 {
        let n = labels.len();
        let mut expectation = 0.0;
        for outcome in 0u32..(1 << n) {
            let mut probability = 1.0;
            let mut positives = 0usize;
            for (i, &is_pos) in labels.iter().enumerate() {
                let decided_pos = (outcome >> i) & 1 == 1;
                let p_pos_decision = if is_pos { tpr } else { fpr };
                probability *= if decided_pos {
                    p_pos_decision
                } else {
                    1.0 - p_pos_decision
                };
                positives += usize::from(decided_pos);
            }
            let p_cc = positives as f64 / n as f64;
            expectation += probability * adjust(p_cc, tpr, fpr, Method::Acc).unclipped;
        }
        expectation
    }

    #[test]
    fn unclipped_adjustment_is_exactly_unbiased() {
        let cases: &[(&[bool], f64, f64)] = &[
            (&[true, true, false, false, false], 0.8, 0.2),
            (&[true, false], 0.7, 0.3),
            (&[true, true, true], 0.9, 0.25),
            (&[false, false, false, true], 0.6, 0.1),
        ];
        for &(labels, tpr, fpr) in cases {
            let truth = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
            let expectation = expected_adjusted_prevalence(labels, tpr, fpr);
            assert!(
                (expectation - truth).abs() < 1e-9,
                "labels {labels:?}: E = {expectation}, truth = {truth}"
            );
        }
    }

    proptest! {
        /// Monotone in the base estimate whenever tpr > fpr.
        #[test]
        fn adjustment_is_monotone(
            p1 in 0.0f64..1.0,
            p2 in 0.0f64..1.0,
            tpr in 0.51f64..1.0,
            fpr in 0.0f64..0.49,
        ) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a = adjust(lo, tpr, fpr, Method::Acc);
            let b = adjust(hi, tpr, fpr, Method::Acc);
            prop_assert!(a.p_pos <= b.p_pos + 1e-12);
        }

        /// PCC collapses to CC when every posterior is crisp.
        #[test]
        fn pcc_equals_cc_on_crisp_posteriors(bits in proptest::collection::vec(proptest::bool::ANY, 1..24)) {
            let posteriors: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
            let via_pcc = pcc(&posteriors).unwrap().p_pos;
            let via_cc = cc(&bits).unwrap().p_pos;
            prop_assert!((via_pcc - via_cc).abs() < 1e-12);
        }

        /// Outputs stay in the unit interval for all valid inputs.
        #[test]
        fn estimates_stay_in_range(
            p in 0.0f64..1.0,
            tpr in 0.0f64..1.0,
            fpr in 0.0f64..1.0,
        ) {
            let est = adjust(p, tpr, fpr, Method::Pacc);
            prop_assert!((0.0..=1.0).contains(&est.p_pos));
        }
    }
}
