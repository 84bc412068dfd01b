//! Minimal row-major matrix over f64 — just the three products the
//! recurrent layers need: W·x for forward passes, Wᵀ·y and y⊗x for backward.

/// Dense rows×cols matrix stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from row-major data. Panics unless `data.len() == rows*cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length must be rows*cols"
        );
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// out += self · x. Panics on shape mismatch.
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matvec: x length must equal cols");
        assert_eq!(out.len(), self.rows, "matvec: out length must equal rows");
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            *out_r += acc;
        }
    }

    /// out += selfᵀ · y. Panics on shape mismatch.
    pub fn matvec_transpose_add(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(
            y.len(),
            self.rows,
            "matvec_transpose: y length must equal rows"
        );
        assert_eq!(
            out.len(),
            self.cols,
            "matvec_transpose: out length must equal cols"
        );
        for (r, &yv) in y.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (out_c, w) in out.iter_mut().zip(row) {
                *out_c += yv * w;
            }
        }
    }

    /// self += y ⊗ x (rank-one update). Panics on shape mismatch.
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        assert_eq!(y.len(), self.rows, "add_outer: y length must equal rows");
        assert_eq!(x.len(), self.cols, "add_outer: x length must equal cols");
        for (r, &yv) in y.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, xv) in row.iter_mut().zip(x) {
                *w += yv * xv;
            }
        }
    }
}
