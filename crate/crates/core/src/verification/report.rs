use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    /// Reported only.
    Info,
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(t) => v <= t,
            Bound::AtLeast(t) => v >= t,
            Bound::Info => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub label: String,
    pub value: f64,
    pub bound: Bound,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub metrics: Vec<Metric>,
    /// Headline tolerance of the check.
    pub tolerance: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            metrics: Vec::new(),
            tolerance,
            pass: true,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, value: f64, bound: Bound) -> &mut Self {
        let ok = bound.holds(value);
        self.pass &= ok;
        self.metrics.push(Metric {
            label: label.into(),
            value,
            bound,
            ok,
        });
        self
    }

    pub fn info(&mut self, label: impl Into<String>, value: f64) -> &mut Self {
        self.push(label, value, Bound::Info)
    }

    pub fn metric(&self, label: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.label == label)
            .map(|m| m.value)
    }

    /// Whether `pass` agrees with the metric flags.
    pub fn is_consistent(&self) -> bool {
        self.pass == self.metrics.iter().all(|m| m.ok)
            && self.metrics.iter().all(|m| m.ok == m.bound.holds(m.value))
    }
}
