use crate::error::{Error, Result};
use crate::labels::{LabelVector, NUM_LABELS};
use crate::model::{PredictionMatrix, Real};

/// Probabilities are clamped to `[LOG_EPS, 1 - LOG_EPS]` before the log.
pub const LOG_EPS: f64 = 1e-7;

fn check_shapes(rows: usize, targets: usize) -> Result<()> {
    if rows != targets {
        return Err(Error::Input(format!(
            "{rows} prediction rows but {targets} label rows"
        )));
    }
    Ok(())
}

fn bce_term(p: f64, y: u8) -> f64 {
    let p = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
    -if y == 1 { p.ln() } else { (1.0 - p).ln() }
}

/// Sum of clamped binary cross-entropy terms over every entry.
pub(crate) fn bce_sum<T: Real>(rows: &[[T; NUM_LABELS]], targets: &[LabelVector]) -> f64 {
    rows.iter()
        .zip(targets)
        .flat_map(|(row, labels)| row.iter().zip(labels.values()))
        .map(|(p, &y)| bce_term(p.to_f64().unwrap_or(f64::NAN), y))
        .sum()
}

fn agrees<T: Real>(p: T, y: u8, cut: T) -> bool {
    (p >= cut) == (y == 1)
}

/// Gradient of the mean loss with respect to one example's logits. Zero
/// where the clamp is active.
pub(crate) fn bce_logit_grad<T: Real>(probs: &[T], labels: &LabelVector, batch: usize) -> Vec<T> {
    let scale = T::from(batch * NUM_LABELS).expect("batch size fits");
    let (lo, hi) = (T::from(LOG_EPS).unwrap(), T::from(1.0 - LOG_EPS).unwrap());
    probs
        .iter()
        .zip(labels.values())
        .map(|(&p, &y)| {
            if p < lo || p > hi {
                T::zero()
            } else {
                (p - T::from(y).unwrap()) / scale
            }
        })
        .collect()
}

/// Mean binary cross-entropy over all N x 10 entries.
pub fn bce_loss(pred: &PredictionMatrix, target: &[LabelVector]) -> Result<f64> {
    check_shapes(pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::Input("cannot take the loss of an empty batch".into()));
    }
    Ok(bce_sum(pred.rows(), target) / (pred.len() * NUM_LABELS) as f64)
}

/// Fraction of entries where `p >= cut` agrees with the label.
pub fn binary_accuracy(pred: &PredictionMatrix, target: &[LabelVector], cut: f32) -> Result<f64> {
    check_shapes(pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::Input("cannot take the accuracy of an empty batch".into()));
    }
    Ok(correct_count(pred.rows(), target, cut) as f64 / (pred.len() * NUM_LABELS) as f64)
}

pub(crate) fn correct_count<T: Real>(rows: &[[T; NUM_LABELS]], target: &[LabelVector], cut: f32) -> usize {
    let cut = T::from(cut).unwrap();
    rows.iter()
        .zip(target)
        .map(|(row, labels)| {
            row.iter()
                .zip(labels.values())
                .filter(|(&p, &y)| agrees(p, y, cut))
                .count()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u8]) -> LabelVector {
        let mut a = [0u8; NUM_LABELS];
        a[..v.len()].copy_from_slice(v);
        LabelVector::new(a).unwrap()
    }

    fn pred(rows: &[&[f32]], fill: f32) -> PredictionMatrix {
        PredictionMatrix::new(
            rows.iter()
                .map(|r| {
                    let mut a = [fill; NUM_LABELS];
                    a[..r.len()].copy_from_slice(r);
                    a
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_half_is_ln2() {
        let p = pred(&[&[], &[]], 0.5);
        let y = vec![labels(&[1, 0, 1]), labels(&[0, 0, 0, 1])];
        assert!((bce_loss(&p, &y).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_hits_the_clamp() {
        let y = labels(&[1, 0, 1, 1, 0]);
        let p = PredictionMatrix::new(vec![y.as_f32()]).unwrap();
        let loss = bce_loss(&p, &[y]).unwrap();
        assert!(loss > 0.0 && loss <= 1.1e-7, "{loss}");
    }

    #[test]
    fn hand_computed_two_entry_case() {
        let mean = (bce_term(0.9, 1) + bce_term(0.2, 0)) / 2.0;
        // -(ln 0.9 + ln 0.8) / 2
        assert!((mean - 0.164_252_033).abs() < 1e-8, "{mean}");

        let p = pred(&[&[0.9, 0.2]], 0.5);
        let y = vec![labels(&[1, 0])];
        let expected = (2.0 * mean + 8.0 * std::f64::consts::LN_2) / 10.0;
        // f32 storage of 0.9 and 0.2 shifts the loss by ~1e-8
        assert!((bce_loss(&p, &y).unwrap() - expected).abs() < 1e-7);
    }

    #[test]
    fn accuracy_cases() {
        let ones = labels(&[1; 10]);
        let zeros = labels(&[]);
        let p = pred(&[&[]], 0.9);
        assert_eq!(binary_accuracy(&p, &[ones], 0.5).unwrap(), 1.0);
        assert_eq!(binary_accuracy(&p, &[zeros], 0.5).unwrap(), 0.0);

        // 0.6 vs 1 right, 0.4 vs 1 wrong, 0.5 vs 0 wrong since 0.5 counts positive
        let hits = [(0.6f32, 1u8), (0.4, 1), (0.5, 0)]
            .iter()
            .filter(|&&(p, y)| agrees(p, y, 0.5))
            .count();
        assert_eq!(hits as f64 / 3.0, 1.0 / 3.0);

        // same three plus seven correct negatives: 8 of 10
        let p = pred(&[&[0.6, 0.4, 0.5]], 0.1);
        let y = vec![labels(&[1, 1, 0])];
        assert_eq!(binary_accuracy(&p, &y, 0.5).unwrap(), 0.8);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = pred(&[&[]], 0.5);
        assert!(bce_loss(&p, &[]).is_err());
        assert!(binary_accuracy(&p, &[labels(&[]), labels(&[])], 0.5).is_err());
    }

    #[test]
    fn logit_gradient_matches_closed_form() {
        let y = labels(&[1, 0]);
        let g = bce_logit_grad(&[0.9f64, 0.2, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5], &y, 2);
        assert!((g[0] - (0.9 - 1.0) / 20.0).abs() < 1e-15);
        assert!((g[1] - 0.2 / 20.0).abs() < 1e-15);
        let sat = bce_logit_grad(&[1.0f64; 10], &y, 1);
        assert!(sat.iter().all(|&v| v == 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn loss_is_non_negative(vals in proptest::collection::vec(0.0f32..=1.0, 10..=40), bits in proptest::collection::vec(0u8..=1, 40)) {
                let n = vals.len() / 10;
                let rows: Vec<[f32; 10]> = (0..n).map(|i| vals[i * 10..i * 10 + 10].try_into().unwrap()).collect();
                let y: Vec<LabelVector> = (0..n).map(|i| LabelVector::from_slice(&bits[i * 10..i * 10 + 10].iter().map(|&b| b as i64).collect::<Vec<_>>()).unwrap()).collect();
                let loss = bce_loss(&PredictionMatrix::new(rows).unwrap(), &y).unwrap();
                prop_assert!(loss >= 0.0);
            }
        }
    }
}
