use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered sequence of real-valued observations, optionally labelled.
///
/// Labels are opaque (typically dates). They are required to be unique but
/// no ordering is imposed on them, since non-padded date strings do not sort
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::build(values, None)
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        Self::build(values, Some(labels))
    }

    fn build(values: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooShort { min: 1, got: 0 });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        if let Some(labels) = &labels {
            if labels.len() != values.len() {
                return Err(Error::Labels(format!(
                    "{} labels for {} values",
                    labels.len(),
                    values.len()
                )));
            }
            let mut seen = HashSet::with_capacity(labels.len());
            for (i, l) in labels.iter().enumerate() {
                if !seen.insert(l.as_str()) {
                    return Err(Error::Labels(format!("duplicate label {l:?} at index {i}")));
                }
            }
        }
        Ok(Self { values, labels })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of observation `i`, or its index when the series is unlabelled.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Returns a series with the same labels and values mapped by `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::build(self.values.iter().map(|&v| f(v)).collect(), self.labels.clone())
    }

    pub(crate) fn replace_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            labels: self.labels.clone(),
        }
    }
}

/// Continuously compounded one-period returns `r(t) = ln R(t+1) - ln R(t)`.
///
/// The label of `r(t)` is the label of `R(t)`.
pub fn log_returns(prices: &[f64], labels: Option<&[String]>) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::TooShort {
            min: 2,
            got: prices.len(),
        });
    }
    if let Some((index, &value)) = prices
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p > 0.0))
    {
        return Err(Error::NonPositivePrice { index, value });
    }
    let values = prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    match labels {
        None => ReturnSeries::new(values),
        Some(l) => {
            if l.len() != prices.len() {
                return Err(Error::Labels(format!(
                    "{} labels for {} prices",
                    l.len(),
                    prices.len()
                )));
            }
            ReturnSeries::with_labels(values, l[..prices.len() - 1].to_vec())
        }
    }
}
