//! Dense row-major f64 tensors and the small set of matrix kernels the
//! network is built on. Everything downstream (convolution, attention,
//! heads) reduces to these three matmul forms, so they are written to
//! keep the inner loop on contiguous slices.

use crate::error::{HavtError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            data: vec![0.0; n],
            shape: shape.to_vec(),
        }
    }

    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length does not match shape {shape:?}"
        );
        Tensor {
            data,
            shape: shape.to_vec(),
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn zero(&mut self) {
        self.fill(0.0);
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Self {
        assert_eq!(self.numel(), shape.iter().product::<usize>());
        self.shape = shape.to_vec();
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if let Some(v) = self.data.iter().find(|v| !v.is_finite()) {
            return Err(HavtError::NonFinite {
                context: context.to_string(),
                value: *v,
            });
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.numel(), other.numel());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// C[m x n] = A[m x k] * B[k x n], row major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    matmul_into(a, b, &mut c, m, k, n, false);
    c
}

/// C += or = A[m x k] * B[k x n]. The i-k-j loop order streams rows of B,
/// which the compiler vectorizes.
pub fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, acc: bool) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        if !acc {
            c_row.iter_mut().for_each(|x| *x = 0.0);
        }
        for (aik, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
            if *aik == 0.0 {
                continue;
            }
            for (cj, bj) in c_row.iter_mut().zip(b_row.iter()) {
                *cj += aik * bj;
            }
        }
    }
}

/// C[m x n] (+)= A^T * B with A[p x m], B[p x n]. Used for weight gradients.
pub fn matmul_at_b_into(a: &[f64], b: &[f64], c: &mut [f64], p: usize, m: usize, n: usize) {
    assert_eq!(a.len(), p * m);
    assert_eq!(b.len(), p * n);
    assert_eq!(c.len(), m * n);
    for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
        for (api, c_row) in a_row.iter().zip(c.chunks_exact_mut(n)) {
            if *api == 0.0 {
                continue;
            }
            for (cj, bj) in c_row.iter_mut().zip(b_row.iter()) {
                *cj += api * bj;
            }
        }
    }
}

/// C[m x n] = A[m x k] * B^T with B[n x k]. Row-row dot products.
pub fn matmul_a_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    let mut c = vec![0.0; m * n];
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        for (b_row, cj) in b.chunks_exact(k).zip(c_row.iter_mut()) {
            *cj = dot(a_row, b_row);
        }
    }
    c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators so the reduction pipelines.
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        s0 += xa[0] * xb[0];
        s1 += xa[1] * xb[1];
        s2 += xa[2] * xb[2];
        s3 += xa[3] * xb[3];
    }
    let mut rest = 0.0;
    for (xa, xb) in ca.remainder().iter().zip(cb.remainder()) {
        rest += xa * xb;
    }
    (s0 + s1) + (s2 + s3) + rest
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..k {
                    s += a[i * k + l] * b[l * n + j];
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        // Simple LCG keeps the test oracle free of the crate RNG.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn matmul_matches_naive() {
        for &(m, k, n) in &[(1usize, 1usize, 1usize), (3, 5, 2), (7, 13, 11), (16, 32, 8)] {
            let a = rand_vec(m * k, (m * 100 + k) as u64);
            let b = rand_vec(k * n, (k * 100 + n) as u64);
            let c = matmul(&a, &b, m, k, n);
            let c_ref = naive_matmul(&a, &b, m, k, n);
            for (x, y) in c.iter().zip(c_ref.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn at_b_matches_transposed_naive() {
        let (p, m, n) = (9usize, 4usize, 6usize);
        let a = rand_vec(p * m, 1);
        let b = rand_vec(p * n, 2);
        let mut c = vec![0.0; m * n];
        matmul_at_b_into(&a, &b, &mut c, p, m, n);
        // transpose a, then naive
        let mut at = vec![0.0; m * p];
        for i in 0..p {
            for j in 0..m {
                at[j * p + i] = a[i * m + j];
            }
        }
        let c_ref = naive_matmul(&at, &b, m, p, n);
        for (x, y) in c.iter().zip(c_ref.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn a_bt_matches_naive() {
        let (m, k, n) = (5usize, 7usize, 3usize);
        let a = rand_vec(m * k, 3);
        let b = rand_vec(n * k, 4);
        let c = matmul_a_bt(&a, &b, m, k, n);
        let mut bt = vec![0.0; k * n];
        for i in 0..n {
            for j in 0..k {
                bt[j * n + i] = b[i * k + j];
            }
        }
        let c_ref = naive_matmul(&a, &bt, m, k, n);
        for (x, y) in c.iter().zip(c_ref.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_roundtrip_and_finiteness() {
        let t = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        assert_eq!(t.numel(), 6);
        assert!(t.is_finite());
        let mut u = t.clone().reshaped(&[3, 2]);
        u.data[0] = f64::NAN;
        assert!(u.ensure_finite("test").is_err());
    }
}
