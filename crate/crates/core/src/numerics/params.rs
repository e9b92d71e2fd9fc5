use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::Mat;

/// Named parameter (or gradient) matrices, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: BTreeMap<String, Mat>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a new entry. Names are unique; re-inserting is an error.
    pub fn insert(&mut self, name: impl Into<String>, value: Mat) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        self.entries.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.entries.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Mat)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries across all matrices.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Mat::len).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), Mat::zeros(v.rows(), v.cols())))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.entries.values_mut().for_each(|m| m.fill(0.0));
    }

    pub fn global_norm(&self) -> f64 {
        self.entries.values().map(Mat::sum_squares).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        self.entries.values_mut().for_each(|m| m.scale(k));
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        for (name, m) in &other.entries {
            match self.entries.get_mut(name) {
                Some(dst) => dst.add_assign(m)?,
                None => return Err(Error::Shape(format!("unknown parameter {name:?}"))),
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.entries.values().all(Mat::is_finite)
    }
}

impl FromIterator<(String, Mat)> for ParamSet {
    fn from_iter<I: IntoIterator<Item = (String, Mat)>>(iter: I) -> Self {
        ParamSet {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Anything whose parameters can be addressed by name for in-place updates.
pub trait ParamStore {
    fn param_mut(&mut self, name: &str) -> Option<&mut Mat>;
}

impl ParamStore for ParamSet {
    fn param_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.get_mut(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_sorted_iteration() {
        let mut p = ParamSet::new();
        p.insert("b", Mat::zeros(1, 1)).unwrap();
        p.insert("a", Mat::zeros(2, 1)).unwrap();
        assert_eq!(p.names().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(p.num_scalars(), 3);
        assert!(p.insert("a", Mat::zeros(1, 1)).is_err());
    }

    #[test]
    fn clip_rescales_to_max_norm() {
        let mut p = ParamSet::new();
        p.insert("w", Mat::from_vec(1, 2, vec![3.0, 4.0]).unwrap()).unwrap();
        let before = p.clip_global_norm(1.0);
        assert_eq!(before, 5.0);
        assert!((p.global_norm() - 1.0).abs() < 1e-15);
        let before = p.clip_global_norm(10.0);
        assert!((before - 1.0).abs() < 1e-15);
    }
}
