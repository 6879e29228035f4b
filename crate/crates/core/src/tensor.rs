//! Minimal row-major dense matrix used for feature frames and network weights.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Panics when `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    /// First `rows` rows.
    pub fn truncated(&self, rows: usize) -> Self {
        let rows = rows.min(self.rows);
        Self {
            rows,
            cols: self.cols,
            data: self.data[..rows * self.cols].to_vec(),
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out = W x + b` for a row-major `W` of shape (out.len(), x.len()).
#[inline]
pub(crate) fn affine<S: Scalar>(w: &[S], b: Option<&[S]>, x: &[S], out: &mut [S]) {
    let n = x.len();
    debug_assert_eq!(w.len(), out.len() * n);
    for (o, (slot, wr)) in out.iter_mut().zip(w.chunks_exact(n)).enumerate() {
        let mut acc = b.map_or(S::zero(), |b| b[o]);
        for (&wi, &xi) in wr.iter().zip(x) {
            acc += wi * xi;
        }
        *slot = acc;
    }
}

/// `out += W x` without bias.
#[inline]
pub(crate) fn gemv_acc<S: Scalar>(w: &[S], x: &[S], out: &mut [S]) {
    let n = x.len();
    for (slot, wr) in out.iter_mut().zip(w.chunks_exact(n)) {
        let mut acc = S::zero();
        for (&wi, &xi) in wr.iter().zip(x) {
            acc += wi * xi;
        }
        *slot += acc;
    }
}

/// `out += Wᵀ g` for `W` of shape (g.len(), out.len()).
#[inline]
pub(crate) fn gemv_t_acc<S: Scalar>(w: &[S], g: &[S], out: &mut [S]) {
    let n = out.len();
    for (&gi, wr) in g.iter().zip(w.chunks_exact(n)) {
        if gi == S::zero() {
            continue;
        }
        for (o, &wi) in out.iter_mut().zip(wr) {
            *o += gi * wi;
        }
    }
}

/// `dW += g xᵀ`.
#[inline]
pub(crate) fn outer_acc<S: Scalar>(dw: &mut [S], g: &[S], x: &[S]) {
    let n = x.len();
    for (&gi, row) in g.iter().zip(dw.chunks_exact_mut(n)) {
        if gi == S::zero() {
            continue;
        }
        for (d, &xi) in row.iter_mut().zip(x) {
            *d += gi * xi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_and_transpose_agree_with_hand_values() {
        // W = [[1,2],[3,4],[5,6]]
        let w = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 3];
        affine(&w, Some(&[1.0, 0.0, -1.0]), &[1.0, -1.0], &mut out);
        assert_eq!(out, [0.0, -1.0, -2.0]);

        let mut back = [0.0; 2];
        gemv_t_acc(&w, &[1.0, 0.0, 1.0], &mut back);
        assert_eq!(back, [6.0, 8.0]);

        let mut dw = [0.0; 6];
        outer_acc(&mut dw, &[1.0, 2.0, 0.0], &[3.0, 4.0]);
        assert_eq!(dw, [3.0, 4.0, 6.0, 8.0, 0.0, 0.0]);
    }

    #[test]
    fn truncation_keeps_leading_rows() {
        let m = Matrix::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let t = m.truncated(2);
        assert_eq!(t.rows(), 2);
        assert_eq!(t.row(1), &[3.0, 4.0]);
    }
}
