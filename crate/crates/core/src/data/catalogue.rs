use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered set of mutually exclusive treatments, optionally with an annual
/// per-unit cost for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCatalogue {
    labels: Vec<String>,
    costs: Option<Vec<f64>>,
}

impl TreatmentCatalogue {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::Parameter(format!("catalogue needs at least 2 treatments, got {}", labels.len())));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() {
                return Err(Error::Parameter("treatment labels must be non-empty".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::Parameter(format!("duplicate treatment label `{l}`")));
            }
        }
        Ok(Self { labels, costs: None })
    }

    pub fn with_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.labels.len() {
            return Err(Error::Parameter(format!(
                "{} costs supplied for {} treatments",
                costs.len(),
                self.labels.len()
            )));
        }
        if let Some((l, c)) = self.labels.iter().zip(&costs).find(|(_, c)| !(**c > 0.0)) {
            return Err(Error::Parameter(format!("cost of `{l}` must be strictly positive, got {c}")));
        }
        self.costs = Some(costs);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, d: usize) -> &str {
        &self.labels[d]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| Error::Value(format!("treatment `{label}` is not in the catalogue {:?}", self.labels)))
    }

    pub fn costs(&self) -> Option<&[f64]> {
        self.costs.as_deref()
    }

    pub fn cost(&self, d: usize) -> Option<f64> {
        self.costs.as_ref().map(|c| c[d])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_catalogues() {
        assert!(TreatmentCatalogue::new(["a"]).is_err());
        assert!(TreatmentCatalogue::new(["a", "a"]).is_err());
        assert!(TreatmentCatalogue::new(["a", ""]).is_err());
        let c = TreatmentCatalogue::new(["a", "b"]).unwrap();
        assert!(c.clone().with_costs(vec![1.0]).is_err());
        assert!(c.clone().with_costs(vec![1.0, 0.0]).is_err());
        let c = c.with_costs(vec![1.0, 2.0]).unwrap();
        assert_eq!(c.cost(1), Some(2.0));
        assert_eq!(c.index_of("b"), Some(1));
        assert!(c.require("z").is_err());
    }
}
