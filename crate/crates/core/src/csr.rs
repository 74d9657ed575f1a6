//! Compressed-row storage for the symmetric adjacency operators.

use rayon::prelude::*;

/// Rows above this count are multiplied in parallel.
const PARALLEL_ROWS: usize = 1 << 15;

/// Anything that can apply a real symmetric matrix to a vector.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles an `n x n` matrix from `(row, col, value)` triplets.
    /// Duplicate positions are summed; explicit zeros are kept out.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, w) in triplets {
            assert!(i < n && j < n, "triplet ({i},{j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += w;
                continue;
            }
            col.push(j);
            val.push(w);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = CsrMatrix { n, row_ptr, col, val };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        if self.val.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col = Vec::with_capacity(self.col.len());
        let mut val = Vec::with_capacity(self.val.len());
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                if w != 0.0 {
                    col.push(j);
                    val.push(w);
                }
            }
            row_ptr[i + 1] = col.len();
        }
        self.row_ptr = row_ptr;
        self.col = col;
        self.val = val;
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix { n, row_ptr: vec![0; n + 1], col: Vec::new(), val: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(k) => self.val[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Number of stored off-diagonal entries in row `i`.
    pub fn off_diagonal_degree(&self, i: usize) -> usize {
        self.row(i).filter(|&(j, _)| j != i).count()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, w)| (self.get(j, i) - w).abs() <= tol))
    }

    /// Largest absolute row sum; bounds the spectral radius.
    pub fn gershgorin_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, w)| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// Sum of squared entries, equal to the trace of the square for symmetric input.
    pub fn frobenius_sq(&self) -> f64 {
        self.val.iter().map(|w| w * w).sum()
    }

    /// Returns a copy with `weight` added to the diagonal at each index in `at`.
    pub fn with_diagonal_added(&self, at: &[usize], weight: f64) -> Self {
        let mut t = self.triplets();
        t.extend(at.iter().map(|&i| (i, i, weight)));
        CsrMatrix::from_triplets(self.n, t)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, w)| (i, j, w)));
        }
        t
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row = |(i, yi): (usize, &mut f64)| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            *yi = s;
        };
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(row);
        } else {
            y.iter_mut().enumerate().for_each(row);
        }
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                m[(i, j)] = w;
            }
        }
        m
    }
}

impl SymmetricOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

/// Dense symmetric matrix stored row-major; used for small kernel matrices.
#[derive(Debug, Clone)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        DenseSymmetric { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_faer(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

impl SymmetricOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (2, 2, 0.0)],
        );
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.nnz(), 2);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn matvec_matches_dense_product() {
        let m = CsrMatrix::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0), (2, 2, 0.5)],
        );
        let mut y = vec![0.0; 3];
        m.matvec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![2.0, 7.0, 5.5]);
        assert_eq!(m.gershgorin_radius(), 3.0);
        assert_eq!(m.trace(), 0.5);
        assert_eq!(m.frobenius_sq(), 10.25);
    }
}
