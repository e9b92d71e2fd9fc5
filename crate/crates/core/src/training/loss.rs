/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross-entropy of probability `p` against target `y` in {0, 1}.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Derivative of [`bce_loss`] w.r.t. the pre-sigmoid logit, using the
/// clamped probability.
pub fn bce_logit_grad(p: f64, y: f64) -> f64 {
    clamp_prob(p) - y
}

/// Mean BCE over `(probability, target)` pairs; 0 for an empty batch.
pub fn mean_bce(batch: &[(f64, f64)]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().map(|&(p, y)| bce_loss(p, y)).sum::<f64>() / batch.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_is_ln2() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(0.5, 1.0) - ln2).abs() < 1e-15);
        assert!((bce_loss(0.5, 0.0) - ln2).abs() < 1e-15);
        assert!((bce_loss(0.5, 1.0) - 0.693147).abs() < 1e-6);
        assert!((mean_bce(&[(0.5, 1.0), (0.5, 0.0)]) - ln2).abs() < 1e-15);
    }

    #[test]
    fn near_certain_is_near_zero() {
        let l = bce_loss(1.0 - 1e-7, 1.0);
        assert!((l - 1e-7).abs() < 1e-12, "{l}");
        // exact 1.0 is clamped rather than producing ln(0)
        assert!(bce_loss(1.0, 0.0).is_finite());
        assert_eq!(bce_loss(1.0, 1.0), bce_loss(1.0 - 1e-7, 1.0));
    }

    proptest! {
        #[test]
        fn non_negative(p in 0.0f64..=1.0, y in prop::bool::ANY) {
            let l = bce_loss(p, if y { 1.0 } else { 0.0 });
            prop_assert!(l >= 0.0 && l.is_finite());
        }
    }
}
