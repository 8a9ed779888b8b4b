//! Discrete Bayes filter over material classes.
//!
//! The belief starts uniform and each frame multiplies in the observation
//! likelihood and renormalizes; there is no prediction step because the
//! material of the grasped object does not change. A label is emitted once
//! the top probability exceeds the confidence threshold, or is forced (and
//! flagged) after the sample budget runs out. Accumulation happens in log
//! space with a floor so underflow can never absorb a class.

use serde::Serialize;

use crate::classify::{argmax, ClassifierModel};
use crate::error::{Error, Result};
use crate::nmf::NmfModel;
use crate::pipeline::{classify_frame, PreprocessConfig};
use crate::spectra::{CalibrationPair, RawFrame};

/// Belief entries are floored at this value before each product so a class
/// driven to zero by one observation can never absorb the filter.
pub const BELIEF_FLOOR: f64 = 1e-300;

/// Normalized probability vector over the material classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
    pub updates_applied: usize,
}

impl Belief {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index and probability of the most likely class.
    pub fn top(&self) -> (usize, f64) {
        let i = argmax(&self.probs);
        (i, self.probs[i])
    }
}

/// Stopping rule: decide at confidence `kappa`, or force the argmax after
/// `n_max` updates. `kappa` above 1 is allowed and simply unreachable, so
/// every decision is forced at the budget.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
pub struct DecisionPolicy {
    pub kappa: f64,
    pub n_max: usize,
}

impl DecisionPolicy {
    /// The threshold must beat the uniform prior or the rule would fire
    /// before any evidence arrives.
    pub fn validate_for(&self, num_classes: usize) -> Result<()> {
        if num_classes < 2 {
            return Err(Error::Parameter("need at least 2 classes".into()));
        }
        if self.kappa <= 1.0 / num_classes as f64 {
            return Err(Error::Parameter(format!(
                "kappa {} does not exceed the uniform prior 1/{num_classes}",
                self.kappa
            )));
        }
        if self.n_max == 0 {
            return Err(Error::Parameter("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        // One full grasp's worth of frames before a decision is forced.
        Self {
            kappa: 0.95,
            n_max: 65,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Decision {
    pub class_index: usize,
    /// True when the label was forced by the sample budget rather than by
    /// reaching the confidence threshold.
    pub forced: bool,
}

/// Uniform prior over `num_classes` material classes.
pub fn init_belief(num_classes: usize) -> Result<Belief> {
    if num_classes < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    Ok(Belief {
        probs: vec![1.0 / num_classes as f64; num_classes],
        updates_applied: 0,
    })
}

/// One observation update: elementwise product with the likelihood followed
/// by renormalization. The likelihood only needs to be proportional to a
/// probability; any positive scaling cancels in the normalizer.
pub fn update(bel: &Belief, likelihood: &[f64]) -> Result<Belief> {
    if likelihood.len() != bel.len() {
        return Err(Error::Dimension(format!(
            "likelihood has {} entries, belief has {}",
            likelihood.len(),
            bel.len()
        )));
    }
    if likelihood.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::Domain(
            "likelihood entries must be finite and nonnegative".into(),
        ));
    }
    if likelihood.iter().all(|l| *l == 0.0) {
        return Err(Error::DegenerateObservation);
    }
    // Log-space accumulation; ln(0) = -inf is fine for individual entries
    // because at least one likelihood is positive and the floored belief
    // keeps every log finite on that entry.
    let logs: Vec<f64> = bel
        .probs
        .iter()
        .zip(likelihood)
        .map(|(&b, &l)| b.max(BELIEF_FLOOR).ln() + l.ln())
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|&lg| (lg - max).exp()).collect();
    let sum: f64 = unnorm.iter().sum();
    Ok(Belief {
        probs: unnorm.iter().map(|u| u / sum).collect(),
        updates_applied: bel.updates_applied + 1,
    })
}

/// Apply the stopping rule. Ties in the argmax resolve toward the lowest
/// class index.
pub fn decide(bel: &Belief, policy: &DecisionPolicy) -> Option<Decision> {
    let (class_index, top) = bel.top();
    if top >= policy.kappa {
        Some(Decision {
            class_index,
            forced: false,
        })
    } else if bel.updates_applied >= policy.n_max {
        Some(Decision {
            class_index,
            forced: true,
        })
    } else {
        None
    }
}

/// Per-frame record of a streamed episode; serialized as one JSON line.
#[derive(Debug, Clone, Serialize)]
pub struct FrameTraceRecord {
    pub frame_index: usize,
    pub distance_cm: Option<f64>,
    pub belief: Vec<f64>,
    pub top_class: String,
    pub top_prob: f64,
    pub decided: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeTrace {
    pub records: Vec<FrameTraceRecord>,
    /// Frame index at which the decision fired, if any frame did.
    pub decision_frame: Option<usize>,
    pub final_class_index: usize,
    pub final_label: String,
    /// True when the label was forced at the budget or the stream ended
    /// before the confidence threshold was reached.
    pub low_confidence: bool,
}

/// Stream an episode through calibrate -> smooth -> project -> likelihood ->
/// update -> decide. Consumption stops at the first decision; the trace is
/// fully reproducible from the inputs.
pub fn run_episode<'a, I>(
    frames: I,
    cal: &CalibrationPair,
    nmf: &NmfModel,
    clf: &ClassifierModel,
    policy: &DecisionPolicy,
    pre: &PreprocessConfig,
) -> Result<EpisodeTrace>
where
    I: IntoIterator<Item = &'a RawFrame>,
{
    policy.validate_for(clf.classes.len())?;
    let mut bel = init_belief(clf.classes.len())?;
    let mut records = Vec::new();
    let mut decision: Option<Decision> = None;
    let mut decision_frame = None;

    for (i, frame) in frames.into_iter().enumerate() {
        let likelihood =
            classify_frame(frame, cal, nmf, clf, pre).map_err(|e| e.at_frame(i))?;
        bel = update(&bel, &likelihood).map_err(|e| e.at_frame(i))?;
        let maybe = decide(&bel, policy);
        let (top_class, top_prob) = bel.top();
        records.push(FrameTraceRecord {
            frame_index: i,
            distance_cm: frame.distance,
            belief: bel.probs().to_vec(),
            top_class: clf.classes[top_class].clone(),
            top_prob,
            decided: maybe.is_some(),
        });
        if let Some(d) = maybe {
            decision = Some(d);
            decision_frame = Some(i);
            break;
        }
    }
    if records.is_empty() {
        return Err(Error::Parameter("episode stream is empty".into()));
    }

    let (final_class_index, low_confidence) = match decision {
        Some(d) => (d.class_index, d.forced),
        None => (bel.top().0, true),
    };
    Ok(EpisodeTrace {
        records,
        decision_frame,
        final_label: clf.classes[final_class_index].clone(),
        final_class_index,
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_is_uniform() {
        let b = init_belief(32).unwrap();
        assert_eq!(b.probs().len(), 32);
        for p in b.probs() {
            assert_eq!(*p, 0.03125);
        }
        assert_eq!(b.updates_applied, 0);

        let b2 = init_belief(2).unwrap();
        assert_eq!(b2.probs(), &[0.5, 0.5]);

        let b4 = init_belief(4).unwrap();
        assert_eq!(b4.probs().iter().sum::<f64>(), 1.0);

        assert!(matches!(init_belief(1), Err(Error::Parameter(_))));
    }

    #[test]
    fn update_renormalizes_the_product() {
        let b = init_belief(2).unwrap();
        let u = update(&b, &[1.0, 1.0]).unwrap();
        assert!((u.probs()[0] - 0.5).abs() < 1e-12, "uniform stays uniform");

        let u = update(&b, &[0.9, 0.1]).unwrap();
        assert!((u.probs()[0] - 0.9).abs() < 1e-9);
        assert!((u.probs()[1] - 0.1).abs() < 1e-9);
        assert_eq!(u.updates_applied, 1);
    }

    #[test]
    fn three_updates_match_closed_form() {
        // (0.6, 0.4)^3 renormalized: [0.216, 0.064] / 0.28.
        let mut b = init_belief(2).unwrap();
        for _ in 0..3 {
            b = update(&b, &[0.6, 0.4]).unwrap();
        }
        assert!((b.probs()[0] - 0.216 / 0.28).abs() < 1e-9);
        assert!((b.probs()[1] - 0.064 / 0.28).abs() < 1e-9);
        assert_eq!(b.updates_applied, 3);
    }

    #[test]
    fn degenerate_and_malformed_likelihoods_are_rejected() {
        let b = init_belief(3).unwrap();
        assert!(matches!(
            update(&b, &[0.0, 0.0, 0.0]),
            Err(Error::DegenerateObservation)
        ));
        assert!(matches!(update(&b, &[0.1, 0.2]), Err(Error::Dimension(_))));
        assert!(matches!(
            update(&b, &[0.1, -0.2, 0.3]),
            Err(Error::Domain(_))
        ));
        // The belief value is untouched by a failed update.
        assert_eq!(b.probs(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn single_zero_entry_is_tolerated_and_floor_preserves_argmax() {
        let b = init_belief(3).unwrap();
        let b = update(&b, &[0.0, 0.7, 0.3]).unwrap();
        assert_eq!(b.probs()[0], 0.0);
        assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);

        // Keep updating with likelihoods that favor class 1; the floored
        // class can never overtake, and the argmax matches the plain
        // linear-space product oracle at every step.
        let mut filt = b.clone();
        let mut oracle = vec![0.0, 0.7, 0.3];
        for _ in 0..50 {
            let lik = [0.5, 0.3, 0.2];
            filt = update(&filt, &lik).unwrap();
            for (o, l) in oracle.iter_mut().zip(lik) {
                *o *= l;
            }
            let s: f64 = oracle.iter().sum();
            for o in oracle.iter_mut() {
                *o /= s;
            }
            let oracle_argmax = crate::classify::argmax(&oracle);
            assert_eq!(filt.top().0, oracle_argmax);
        }
    }

    #[test]
    fn repeated_evidence_converges_monotonically() {
        let mut b = init_belief(5).unwrap();
        let lik = [0.5, 0.2, 0.1, 0.1, 0.1];
        let mut prev = b.probs()[0];
        for _ in 0..200 {
            b = update(&b, &lik).unwrap();
            // Strict increase until floating point saturates at 1.
            if prev < 1.0 - 1e-9 {
                assert!(b.probs()[0] > prev, "bel[0] must strictly increase");
            } else {
                assert!(b.probs()[0] >= prev);
            }
            prev = b.probs()[0];
        }
        assert!(b.probs()[0] > 0.999999);
    }

    #[test]
    fn decide_applies_threshold_and_budget() {
        let policy = DecisionPolicy {
            kappa: 0.95,
            n_max: 65,
        };
        let b = init_belief(2).unwrap();
        let confident = update(&b, &[0.99, 0.01]).unwrap();
        let d = decide(&confident, &policy).unwrap();
        assert_eq!(d.class_index, 0);
        assert!(!d.forced);

        let mut undecided = update(&b, &[0.5, 0.5]).unwrap();
        undecided = update(&undecided, &[0.5, 0.5]).unwrap();
        assert!(decide(&undecided, &policy).is_none());

        let exhausted = Belief {
            probs: vec![0.4, 0.6],
            updates_applied: 65,
        };
        let d = decide(&exhausted, &policy).unwrap();
        assert_eq!(d.class_index, 1);
        assert!(d.forced);
    }

    #[test]
    fn unreachable_kappa_forces_every_decision_at_the_budget() {
        let policy = DecisionPolicy {
            kappa: 1.5,
            n_max: 3,
        };
        policy.validate_for(4).unwrap();
        let mut b = init_belief(4).unwrap();
        for i in 0..3 {
            b = update(&b, &[0.97, 0.01, 0.01, 0.01]).unwrap();
            let d = decide(&b, &policy);
            if i < 2 {
                assert!(d.is_none(), "no decision before the budget");
            } else {
                let d = d.unwrap();
                assert!(d.forced);
                assert_eq!(d.class_index, 0);
            }
        }
    }

    #[test]
    fn policy_validation_rejects_prior_level_kappa() {
        let policy = DecisionPolicy {
            kappa: 1.0 / 32.0,
            n_max: 65,
        };
        assert!(policy.validate_for(32).is_err());
        let ok = DecisionPolicy {
            kappa: 0.04,
            n_max: 65,
        };
        ok.validate_for(32).unwrap();
    }

    proptest! {
        // Positive scaling of the likelihood cancels in the normalizer.
        #[test]
        fn update_is_scale_invariant(scale in prop::sample::select(vec![1e-8, 0.3, 7.0, 1e12])) {
            let b = init_belief(4).unwrap();
            let lik = [0.12, 0.5, 0.08, 0.3];
            let scaled: Vec<f64> = lik.iter().map(|l| l * scale).collect();
            let a = update(&b, &lik).unwrap();
            let c = update(&b, &scaled).unwrap();
            for (x, y) in a.probs().iter().zip(c.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        // The final belief over a fixed multiset of likelihood vectors does
        // not depend on their order.
        #[test]
        fn update_order_does_not_matter(seed in 0u64..200) {
            use rand::seq::SliceRandom;
            let liks = vec![
                vec![0.6, 0.2, 0.2],
                vec![0.1, 0.8, 0.1],
                vec![0.3, 0.3, 0.4],
                vec![0.25, 0.7, 0.05],
                vec![0.5, 0.1, 0.4],
            ];
            let mut shuffled = liks.clone();
            let mut rng = crate::seed::stream_rng(seed, &[14]);
            shuffled.shuffle(&mut rng);

            let mut a = init_belief(3).unwrap();
            for l in &liks {
                a = update(&a, l).unwrap();
                prop_assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            let mut b = init_belief(3).unwrap();
            for l in &shuffled {
                b = update(&b, l).unwrap();
            }
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
