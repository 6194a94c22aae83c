use serde::Serialize;

/// The truncation function `h(y) = y * min(1, 1/|y|)`: identity on the unit
/// ball, radial projection onto the unit sphere outside it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TruncationFunction;

impl TruncationFunction {
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let scale = self.scale(y);
        y.iter().map(|v| v * scale).collect()
    }

    /// The factor `min(1, 1/|y|)`.
    #[inline]
    pub fn scale(&self, y: &[f64]) -> f64 {
        let n = crate::linalg::norm(y);
        if n <= 1.0 {
            1.0
        } else {
            1.0 / n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, sub};
    use proptest::prelude::*;

    #[test]
    fn fixed_points() {
        let h = TruncationFunction;
        assert_eq!(h.apply(&[0.3, -0.4]), vec![0.3, -0.4]);
        assert_eq!(h.apply(&[2.0]), vec![1.0]);
        assert_eq!(h.apply(&[-3.0]), vec![-1.0]);
    }

    proptest! {
        #[test]
        fn bounded_and_lipschitz(
            a in prop::collection::vec(-10.0f64..10.0, 2),
            b in prop::collection::vec(-10.0f64..10.0, 2),
        ) {
            let h = TruncationFunction;
            let (ha, hb) = (h.apply(&a), h.apply(&b));
            prop_assert!(norm(&ha) <= 1.0 + 1e-15);
            if norm(&a) <= 1.0 {
                prop_assert_eq!(&ha, &a);
            }
            let dist = norm(&sub(&a, &b));
            prop_assert!(norm(&sub(&ha, &hb)) <= 2.0 * dist + 1e-12);
        }
    }
}
