use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor2<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("Tensor2::from_vec", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dims("Tensor2::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
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
    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>> {
        if self.cols != rhs.rows {
            return Err(Error::dims("matmul inner dimension", self.cols, rhs.rows));
        }
        let mut out = Tensor2::zeros(self.rows, rhs.cols);
        T::gemm(
            self.rows,
            self.cols,
            rhs.cols,
            T::one(),
            &self.data,
            (self.cols as isize, 1),
            &rhs.data,
            (rhs.cols as isize, 1),
            T::zero(),
            &mut out.data,
            (rhs.cols as isize, 1),
        );
        Ok(out)
    }

    /// `self^T * rhs`.
    pub fn t_matmul(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>> {
        if self.rows != rhs.rows {
            return Err(Error::dims("t_matmul shared rows", self.rows, rhs.rows));
        }
        let mut out = Tensor2::zeros(self.cols, rhs.cols);
        T::gemm(
            self.cols,
            self.rows,
            rhs.cols,
            T::one(),
            &self.data,
            (1, self.cols as isize),
            &rhs.data,
            (rhs.cols as isize, 1),
            T::zero(),
            &mut out.data,
            (rhs.cols as isize, 1),
        );
        Ok(out)
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>> {
        if self.cols != rhs.cols {
            return Err(Error::dims("matmul_t shared cols", self.cols, rhs.cols));
        }
        let mut out = Tensor2::zeros(self.rows, rhs.rows);
        T::gemm(
            self.rows,
            self.cols,
            rhs.rows,
            T::one(),
            &self.data,
            (self.cols as isize, 1),
            &rhs.data,
            (1, rhs.cols as isize),
            T::zero(),
            &mut out.data,
            (rhs.rows as isize, 1),
        );
        Ok(out)
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hcat(&self, rhs: &Tensor2<T>) -> Result<Tensor2<T>> {
        if self.rows != rhs.rows {
            return Err(Error::dims("hcat rows", self.rows, rhs.rows));
        }
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(rhs.row(r));
        }
        Ok(Tensor2 { rows: self.rows, cols, data })
    }

    /// Column range `[start, end)` as a new tensor.
    pub fn columns(&self, start: usize, end: usize) -> Tensor2<T> {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Tensor2 { rows: self.rows, cols: end - start, data }
    }

    /// Sum over rows, one value per column.
    pub fn column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }
}
