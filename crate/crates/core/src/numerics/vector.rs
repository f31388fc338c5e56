use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::Scalar;

/// Dense real vector of fixed length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn new(components: Vec<T>) -> Self {
        Vector(components)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![T::zero(); n])
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Vector(values.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Largest absolute component; zero for the empty vector.
    pub fn inf_norm(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, factor: T) -> Self {
        Vector(self.0.iter().map(|&v| v * factor).collect())
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: T, other: &Vector<T>) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + factor * b)
                .collect(),
        )
    }

    pub fn dot(&self, other: &Vector<T>) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    /// Concatenation `[self; other]`.
    pub fn concat(&self, other: &Vector<T>) -> Self {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        Vector(out)
    }

    /// Splits into `[0, at)` and `[at, len)`.
    pub fn split_at(&self, at: usize) -> (Self, Self) {
        let (a, b) = self.0.split_at(at);
        (Vector(a.to_vec()), Vector(b.to_vec()))
    }

    pub fn slice(&self, start: usize, len: usize) -> Self {
        Vector(self.0[start..start + len].to_vec())
    }
}

/// Largest absolute component of `v`; zero for the empty vector.
pub fn inf_norm<T: Scalar>(v: &Vector<T>) -> T {
    v.inf_norm()
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(v: Vec<T>) -> Self {
        Vector(v)
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T: Scalar> Add for &Vector<T> {
    type Output = Vector<T>;
    fn add(self, rhs: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.len(), rhs.len());
        Vector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a + b).collect())
    }
}

impl<T: Scalar> Sub for &Vector<T> {
    type Output = Vector<T>;
    fn sub(self, rhs: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.len(), rhs.len());
        Vector(self.0.iter().zip(&rhs.0).map(|(&a, &b)| a - b).collect())
    }
}

impl<T: Scalar> Mul<T> for &Vector<T> {
    type Output = Vector<T>;
    fn mul(self, rhs: T) -> Vector<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Neg for &Vector<T> {
    type Output = Vector<T>;
    fn neg(self) -> Vector<T> {
        Vector(self.0.iter().map(|&v| -v).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_norm_examples() {
        assert_eq!(inf_norm(&Vector::<f64>::from_f64(&[0.0, 0.0])), 0.0);
        assert_eq!(inf_norm(&Vector::<f64>::from_f64(&[-3.0, 2.0])), 3.0);
        assert_eq!(inf_norm(&Vector::<f64>::from_f64(&[1e-7, -1e-6])), 1e-6);
        assert_eq!(inf_norm(&Vector::<f64>::zeros(0)), 0.0);
    }

    #[test]
    fn axpy_and_concat() {
        let a = Vector::<f32>::from_f64(&[1.0, 2.0]);
        let b = Vector::<f32>::from_f64(&[3.0, 4.0]);
        assert_eq!(a.axpy(2.0, &b).as_slice(), &[7.0, 10.0]);
        let c = a.concat(&b);
        assert_eq!(c.len(), 4);
        let (l, r) = c.split_at(1);
        assert_eq!(l.as_slice(), &[1.0]);
        assert_eq!(r.as_slice(), &[2.0, 3.0, 4.0]);
    }
}
