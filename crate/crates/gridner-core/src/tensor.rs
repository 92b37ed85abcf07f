//! Minimal dense containers for the scoring network: a row-major matrix
//! and a cell-major 3-D grid (feature vector contiguous per cell).
//! Everything is `f64`; gradient checking drives that choice.

/// Row-major 2-D matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// y += self * x  (matrix-vector).
    pub fn mat_vec_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[r] += acc;
        }
    }

    /// y += self^T * x  (transposed matrix-vector).
    pub fn mat_t_vec_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            let xr = x[r];
            if xr != 0.0 {
                for (yc, a) in y.iter_mut().zip(row.iter()) {
                    *yc += xr * a;
                }
            }
        }
    }

    /// self += a * x y^T  (rank-one update).
    pub fn rank_one_add(&mut self, a: f64, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let xr = a * x[r];
            if xr != 0.0 {
                let row = self.row_mut(r);
                for (rc, yc) in row.iter_mut().zip(y.iter()) {
                    *rc += xr * yc;
                }
            }
        }
    }
}

/// Cell-major 3-D grid: `data[(r * cols + c) * depth + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
    pub data: Vec<f64>,
}

impl Grid3 {
    pub fn zeros(rows: usize, cols: usize, depth: usize) -> Self {
        Grid3 {
            rows,
            cols,
            depth,
            data: vec![0.0; rows * cols * depth],
        }
    }

    #[inline]
    pub fn cell(&self, r: usize, c: usize) -> &[f64] {
        let base = (r * self.cols + c) * self.depth;
        &self.data[base..base + self.depth]
    }

    #[inline]
    pub fn cell_mut(&mut self, r: usize, c: usize) -> &mut [f64] {
        let base = (r * self.cols + c) * self.depth;
        &mut self.data[base..base + self.depth]
    }

    pub fn same_shape(&self, other: &Grid3) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.depth == other.depth
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}
