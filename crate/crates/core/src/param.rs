//! Flat model parameter vectors.
//!
//! One `ParamVector` carries everything that flows between clients and the
//! server: local parameters, the global model, per-round updates, historic
//! update sums, and aggregated medians. Layout for the logistic model is
//! row-major per class with the bias appended to each class row, so norms,
//! medians, and clipping uniformly cover biases.

use std::ops::Index;

/// Flat vector of `f64` model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    /// Dot product. Panics on dimension mismatch.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "param vector dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean distance to `other`. Panics on dimension mismatch.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "param vector dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "param vector dimension mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "param vector dimension mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.dim(), other.dim(), "param vector dimension mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled_assign(&mut self, other: &Self, factor: f64) {
        assert_eq!(self.dim(), other.dim(), "param vector dimension mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_and_distance() {
        let a = ParamVector::from_vec(vec![3.0, 4.0]);
        let b = ParamVector::zeros(2);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.distance(&b), 5.0);
        assert_eq!(b.norm(), 0.0);
    }

    #[test]
    fn arithmetic() {
        let a = ParamVector::from_vec(vec![1.0, -2.0]);
        let b = ParamVector::from_vec(vec![0.5, 1.0]);
        assert_eq!(a.add(&b).as_slice(), &[1.5, -1.0]);
        assert_eq!(a.sub(&b).as_slice(), &[0.5, -3.0]);
        assert_eq!(a.scaled(2.0).as_slice(), &[2.0, -4.0]);
        assert_eq!(a.dot(&b), -1.5);
        let mut c = a.clone();
        c.add_scaled_assign(&b, 2.0);
        assert_eq!(c.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mismatched_dot_panics() {
        let a = ParamVector::zeros(2);
        let b = ParamVector::zeros(3);
        let _ = a.dot(&b);
    }

    #[test]
    fn finiteness() {
        assert!(ParamVector::from_vec(vec![1.0, 2.0]).is_finite());
        assert!(!ParamVector::from_vec(vec![1.0, f64::NAN]).is_finite());
        assert!(!ParamVector::from_vec(vec![f64::INFINITY]).is_finite());
    }
}
