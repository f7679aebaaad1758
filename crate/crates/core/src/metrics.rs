//! Overlap metrics for binary masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub dice: f64,
    pub iou: f64,
}

impl Metrics {
    pub fn compute(pred: &Mask, gt: &Mask) -> Result<Self> {
        let (inter, a, b) = overlap_counts(pred, gt)?;
        Ok(Self { dice: dice_from_counts(inter, a, b), iou: iou_from_counts(inter, a, b) })
    }
}

fn overlap_counts(a: &Mask, b: &Mask) -> Result<(usize, usize, usize)> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let mut inter = 0;
    let mut na = 0;
    let mut nb = 0;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += x as usize;
        nb += y as usize;
        inter += (x & y) as usize;
    }
    Ok((inter, na, nb))
}

fn dice_from_counts(inter: usize, a: usize, b: usize) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (a + b) as f64
    }
}

fn iou_from_counts(inter: usize, a: usize, b: usize) -> f64 {
    let union = a + b - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Dice coefficient `2|A∩B| / (|A|+|B|)`; two empty masks score 1.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, na, nb) = overlap_counts(a, b)?;
    Ok(dice_from_counts(inter, na, nb))
}

/// Intersection over union; two empty masks score 1.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, na, nb) = overlap_counts(a, b)?;
    Ok(iou_from_counts(inter, na, nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(bits: &[u8], w: usize) -> Mask {
        Mask::new(w, bits.len() / w, bits.to_vec()).unwrap()
    }

    #[test]
    fn identical_masks_score_one() {
        let a = mask_from(&[1, 0, 1, 1], 2);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let a = mask_from(&[1, 1, 0, 0], 2);
        let b = mask_from(&[0, 0, 1, 1], 2);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn half_overlap() {
        let a = mask_from(&[1, 1, 1, 1, 0, 0, 0, 0], 4);
        let b = mask_from(&[0, 0, 1, 1, 1, 1, 0, 0], 4);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert!((iou(&a, &b).unwrap() - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_vs_empty_is_one() {
        let z = Mask::zeros(3, 3);
        assert_eq!(dice(&z, &z).unwrap(), 1.0);
        assert_eq!(iou(&z, &z).unwrap(), 1.0);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let err = dice(&Mask::zeros(2, 2), &Mask::zeros(2, 3)).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
        assert!(iou(&Mask::zeros(2, 2), &Mask::zeros(3, 2)).is_err());
    }

    #[test]
    fn metrics_json_shape() {
        let m = Metrics { dice: 0.5, iou: 0.25 };
        let v: serde_json::Value = serde_json::to_value(m).unwrap();
        assert_eq!(v, serde_json::json!({"dice": 0.5, "iou": 0.25}));
    }

    proptest! {
        #[test]
        fn dice_iou_identities(bits in proptest::collection::vec((0u8..2, 0u8..2), 1..64)) {
            let w = bits.len();
            let a = mask_from(&bits.iter().map(|p| p.0).collect::<Vec<_>>(), w);
            let b = mask_from(&bits.iter().map(|p| p.1).collect::<Vec<_>>(), w);
            let d = dice(&a, &b).unwrap();
            let j = iou(&a, &b).unwrap();
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert_eq!(j, iou(&b, &a).unwrap());
            prop_assert!(0.0 <= j && j <= d && d <= 1.0);
            prop_assert!((d - 2.0 * j / (1.0 + j)).abs() < 1e-12);
            prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
            prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        }
    }
}
