use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Matrix { rows, cols, data }
    }

    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `out[c] += sum_r x[r] * self[r][c]`, skipping zero entries of `x`.
    /// `out` covers columns `col0..col0 + out.len()`.
    pub fn accumulate_vec_mat(&self, x: &[f64], col0: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        let width = out.len();
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols + col0..r * self.cols + col0 + width];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xr * w;
            }
        }
    }

    /// `out[r] += sum_c self[r][col0 + c] * d[c]`, the transpose of
    /// [`Matrix::accumulate_vec_mat`].
    pub fn accumulate_mat_vec(&self, d: &[f64], col0: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.rows);
        let width = d.len();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols + col0..r * self.cols + col0 + width];
            *o += row.iter().zip(d).map(|(w, g)| w * g).sum::<f64>();
        }
    }

    /// `self[r][col0 + c] += x[r] * d[c]`, skipping zero entries of `x`.
    pub fn add_outer(&mut self, x: &[f64], d: &[f64], col0: usize) {
        debug_assert_eq!(x.len(), self.rows);
        let width = d.len();
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols + col0..r * self.cols + col0 + width];
            for (w, g) in row.iter_mut().zip(d) {
                *w += xr * g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_definition() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut out = vec![0.0; 3];
        m.accumulate_vec_mat(&[1.0, -1.0], 0, &mut out);
        assert_eq!(out, vec![-3.0, -3.0, -3.0]);
        let mut out = vec![0.0; 2];
        m.accumulate_vec_mat(&[2.0, 1.0], 1, &mut out);
        assert_eq!(out, vec![9.0, 12.0]);
        let mut back = vec![0.0; 2];
        m.accumulate_mat_vec(&[1.0, 0.0, 1.0], 0, &mut back);
        assert_eq!(back, vec![4.0, 10.0]);
        let mut g = Matrix::zeros(2, 3);
        g.add_outer(&[1.0, 2.0], &[3.0, 4.0], 1);
        assert_eq!(g.data(), &[0.0, 3.0, 4.0, 0.0, 6.0, 8.0]);
    }
}
