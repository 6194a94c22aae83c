use serde::Serialize;

use crate::error::{Error, Result};

/// A finite, ordered set of control points. Each control is an opaque real
/// parameter vector handed to the coefficient evaluators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSet {
    points: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl ControlSet {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("control set must be nonempty".into()));
        }
        if labels.len() != points.len() {
            return Err(Error::Input(format!(
                "{} labels for {} controls",
                labels.len(),
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("control {i} has a non-finite entry")));
            }
            if points[..i].iter().any(|q| q == p) {
                return Err(Error::Input(format!(
                    "control {i} duplicates an earlier control"
                )));
            }
        }
        Ok(Self { points, labels })
    }

    /// Scalar controls labelled by their value.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(
            values.iter().map(|v| vec![*v]).collect(),
            values.iter().map(|v| format!("{v}")).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::ControlIndex {
                index,
                len: self.len(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(ControlSet::from_scalars(&[]).is_err());
        assert!(ControlSet::from_scalars(&[1.0, 2.0, 1.0]).is_err());
        let c = ControlSet::from_scalars(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.label(2), "1");
        assert!(c.check_index(3).is_err());
    }
}
