//! Dense LU factorization with partial pivoting, for the small square systems
//! that turn up in the solvers: Newton steps on Sinkhorn dual potentials and
//! inversion of label-transition matrices. Sizes are tens to a few hundred,
//! so a straightforward O(n^3) factorization is the right tool.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A pivoted LU factorization `P A = L U` of a square matrix.
pub(crate) struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factors `a`, failing with a `Numeric` error when a pivot collapses to
    /// (numerical) zero, i.e. the matrix is singular at working precision.
    pub(crate) fn new(a: &Matrix) -> Result<LuFactors> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::Shape(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a
            .as_slice()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
            .max(1.0);
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_abs = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = i;
                }
            }
            if pivot_abs <= f64::EPSILON * n as f64 * scale {
                return Err(Error::Numeric(format!(
                    "singular matrix in LU factorization (pivot {pivot_abs:.3e} at step {k})"
                )));
            }
            if pivot_row != k {
                lu.swap_rows(k, pivot_row);
                perm.swap(k, pivot_row);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let sub = factor * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "rhs length {} does not match system size {n}", b.len());
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Dense inverse, column by column.
    pub(crate) fn inverse(&self) -> Matrix {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let col = self.solve(&unit);
            unit[j] = 0.0;
            for (i, &v) in col.iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        inv
    }
}

/// Maximum absolute column sum.
pub(crate) fn one_norm(a: &Matrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.cols() {
        let mut sum = 0.0;
        for i in 0..a.rows() {
            sum += a[(i, j)].abs();
        }
        best = best.max(sum);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_system_against_hand_elimination() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0, -1.0], vec![-3.0, -1.0, 2.0], vec![-2.0, 1.0, 2.0]]);
        let lu = LuFactors::new(&a).unwrap();
        let x = lu.solve(&[8.0, -11.0, -3.0]);
        let expected = [2.0, 3.0, -1.0];
        for (got, want) in x.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = Matrix::from_rows(&[vec![4.0, 7.0], vec![2.0, 6.0]]);
        let inv = LuFactors::new(&a).unwrap().inverse();
        let prod = a.matmul(&inv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(LuFactors::new(&a).is_err());
    }

    #[test]
    fn pivoting_handles_a_zero_leading_entry() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let x = LuFactors::new(&a).unwrap().solve(&[3.0, 5.0]);
        assert!((x[0] - 5.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }
}
