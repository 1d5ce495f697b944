//! Dense row-major `f64` matrices and the seeded random source used across
//! the crate.
//!
//! Rows are samples and columns are features. Every operation that can fail
//! on shape or domain grounds returns [`Result`]; nothing here panics on user
//! input.

use std::fmt;

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense matrix of `f64` stored row-major, one sample per row.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Right-hand operand for [`Matrix::elementwise`].
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    Matrix(&'a Matrix),
    Scalar(f64),
    /// A `1 × cols` row replicated across every row of the left operand.
    Row(&'a Matrix),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
    Div,
    Max,
}

/// Which dimension a reduction collapses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Collapse the rows: one value per column, shape `1 × cols`.
    Rows,
    /// Collapse the columns: one value per row, shape `rows × 1`.
    Cols,
    /// Collapse everything into a `1 × 1` matrix.
    All,
}

/// Reduction statistic. `Var` is the biased (divide by `n`) variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stat {
    Sum,
    Mean,
    Var,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a `1 × len` row.
    pub fn row_vector(values: Vec<f64>) -> Self {
        Matrix {
            rows: 1,
            cols: values.len(),
            data: values,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Domain(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
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

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-width matrix still has rows.
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Standard product `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", self.shape(), other.shape()));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            let out_row = &mut out.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materialising the transpose.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_transposed",
                self.shape(),
                other.shape(),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn transposed_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "transposed_matmul",
                self.shape(),
                other.shape(),
            ));
        }
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        for p in 0..k {
            let a_row = self.row(p);
            let b_row = other.row(p);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * m..(i + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Applies `op` element by element against a matrix, a scalar, or a
    /// broadcast row. Fails with [`Error::NonFinite`] if any result is not
    /// finite (division by zero included).
    pub fn elementwise(&self, rhs: Operand<'_>, op: ElemOp) -> Result<Matrix> {
        let apply = |a: f64, b: f64| match op {
            ElemOp::Add => a + b,
            ElemOp::Sub => a - b,
            ElemOp::Mul => a * b,
            ElemOp::Div => a / b,
            ElemOp::Max => a.max(b),
        };
        let data: Vec<f64> = match rhs {
            Operand::Scalar(b) => self.data.iter().map(|&a| apply(a, b)).collect(),
            Operand::Matrix(b) => {
                if b.shape() != self.shape() {
                    return Err(Error::shape("elementwise", self.shape(), b.shape()));
                }
                self.data
                    .iter()
                    .zip(&b.data)
                    .map(|(&a, &b)| apply(a, b))
                    .collect()
            }
            Operand::Row(b) => {
                if b.rows != 1 || b.cols != self.cols {
                    return Err(Error::shape("elementwise(row)", self.shape(), b.shape()));
                }
                let mut data = Vec::with_capacity(self.data.len());
                for r in self.iter_rows() {
                    data.extend(r.iter().zip(&b.data).map(|(&a, &b)| apply(a, b)));
                }
                data
            }
        };
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("elementwise {op:?}")));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.elementwise(Operand::Matrix(rhs), ElemOp::Add)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.elementwise(Operand::Matrix(rhs), ElemOp::Sub)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|v| v * factor)
    }

    /// In-place `self += rhs`; used for gradient accumulation.
    pub fn add_assign(&mut self, rhs: &Matrix) -> Result<()> {
        if rhs.shape() != self.shape() {
            return Err(Error::shape("add_assign", self.shape(), rhs.shape()));
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// Reduces along `axis`. Sums accumulate in row-major order.
    pub fn reduce(&self, axis: Axis, stat: Stat) -> Result<Matrix> {
        if self.is_empty() {
            return Err(Error::Domain(format!(
                "cannot reduce an empty {}x{} matrix",
                self.rows, self.cols
            )));
        }
        match axis {
            Axis::All => {
                let all = Matrix {
                    rows: self.data.len(),
                    cols: 1,
                    data: self.data.clone(),
                };
                all.reduce(Axis::Rows, stat)
            }
            Axis::Cols => Ok(self.transpose().reduce(Axis::Rows, stat)?.transpose()),
            Axis::Rows => {
                let n = self.rows as f64;
                let mut sums = vec![0.0; self.cols];
                for r in self.iter_rows() {
                    for (s, &v) in sums.iter_mut().zip(r) {
                        *s += v;
                    }
                }
                if stat == Stat::Sum {
                    return Ok(Matrix::row_vector(sums));
                }
                let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
                if stat == Stat::Mean {
                    return Ok(Matrix::row_vector(means));
                }
                let mut sq = vec![0.0; self.cols];
                for r in self.iter_rows() {
                    for ((s, &v), &m) in sq.iter_mut().zip(r).zip(&means) {
                        *s += (v - m) * (v - m);
                    }
                }
                Ok(Matrix::row_vector(sq.into_iter().map(|s| s / n).collect()))
            }
        }
    }

    pub fn mean_all(&self) -> Result<f64> {
        Ok(self.reduce(Axis::All, Stat::Mean)?.data[0])
    }

    pub fn column_means(&self) -> Result<Matrix> {
        self.reduce(Axis::Rows, Stat::Mean)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape("vstack", self.shape(), other.shape()));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Splits into the first `at` rows and the remainder.
    pub fn split_rows(&self, at: usize) -> (Matrix, Matrix) {
        let at = at.min(self.rows);
        let (top, bottom) = self.data.split_at(at * self.cols);
        (
            Matrix {
                rows: at,
                cols: self.cols,
                data: top.to_vec(),
            },
            Matrix {
                rows: self.rows - at,
                cols: self.cols,
                data: bottom.to_vec(),
            },
        )
    }

    /// Draws `n` rows. Without replacement when `n <= rows`, with
    /// replacement otherwise.
    pub fn sample_rows(&self, n: usize, rng: &mut Rng) -> Result<Matrix> {
        Ok(self.select_rows(&sample_indices(self.rows, n, rng)?))
    }

    /// Matrix of i.i.d. `N(mean, std²)` entries.
    pub fn gaussian(
        rows: usize,
        cols: usize,
        mean: f64,
        std: f64,
        rng: &mut Rng,
    ) -> Result<Matrix> {
        if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::Domain(format!(
                "gaussian needs finite mean and std >= 0, got mean={mean} std={std}"
            )));
        }
        let data = (0..rows * cols)
            .map(|_| mean + std * rng.standard_normal())
            .collect();
        Ok(Matrix { rows, cols, data })
    }
}

/// Row indices for [`Matrix::sample_rows`].
pub fn sample_indices(population: usize, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if population == 0 {
        return Err(Error::Domain(
            "cannot sample rows from an empty matrix".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if n <= population {
        Ok(rand::seq::index::sample(&mut rng.inner, population, n).into_vec())
    } else {
        Ok((0..n)
            .map(|_| rng.inner.random_range(0..population))
            .collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list().entries(self.iter_rows().take(8)).finish()
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter_rows())
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Seeded random source.
///
/// Backed by ChaCha8, a counter-based stream cipher generator whose output
/// is fixed by (seed, stream) on every platform, so identical seeds and call
/// sequences give bit-identical results.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(stream, word position)`; with the seed this pins the generator's
    /// exact state.
    pub fn position(&self) -> (u64, u128) {
        (self.inner.get_stream(), self.inner.get_word_pos())
    }

    pub fn at_position(seed: u64, stream: u64, word_pos: u128) -> Self {
        let mut rng = Self::with_stream(seed, stream);
        rng.inner.set_word_pos(word_pos);
        rng
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; a.rows() * b.cols()];
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                out[i * b.cols() + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(Matrix::identity(2).matmul(&x).unwrap(), x);
        let ones = m(&[&[1.0], &[1.0]]);
        assert_eq!(x.matmul(&ones).unwrap(), m(&[&[3.0], &[7.0]]));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Rng::new(11);
        let a = Matrix::gaussian(5, 4, 0.0, 1.0, &mut rng).unwrap();
        let b = Matrix::gaussian(4, 3, 0.0, 1.0, &mut rng).unwrap();
        let got = a.matmul(&b).unwrap();
        for (g, w) in got.as_slice().iter().zip(naive_matmul(&a, &b)) {
            assert!((g - w).abs() < 1e-12);
        }
        let bt = b.transpose();
        let got_t = a.matmul_transposed(&bt).unwrap();
        let at = a.transpose();
        let got_tm = at.transposed_matmul(&b).unwrap();
        for ((g1, g2), w) in got_t
            .as_slice()
            .iter()
            .zip(got_tm.as_slice())
            .zip(got.as_slice())
        {
            assert!((g1 - w).abs() < 1e-12);
            assert!((g2 - w).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = Matrix::zeros(2, 3)
            .matmul(&Matrix::zeros(2, 3))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        assert!(matches!(
            err,
            Error::Shape {
                left: (2, 3),
                right: (2, 3),
                ..
            }
        ));
    }

    #[test]
    fn elementwise_cases() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(x.elementwise(Operand::Scalar(0.0), ElemOp::Add).unwrap(), x);
        let row = Matrix::row_vector(vec![10.0, 20.0]);
        assert_eq!(
            x.elementwise(Operand::Row(&row), ElemOp::Add).unwrap(),
            m(&[&[11.0, 22.0], &[13.0, 24.0]])
        );
        assert_eq!(x.sub(&x).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(
            x.elementwise(Operand::Scalar(2.5), ElemOp::Max).unwrap(),
            m(&[&[2.5, 2.5], &[3.0, 4.0]])
        );
        let zero_div = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        assert!(matches!(
            x.elementwise(Operand::Matrix(&zero_div), ElemOp::Div),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            x.elementwise(Operand::Matrix(&Matrix::zeros(3, 2)), ElemOp::Mul),
            Err(Error::Shape { .. })
        ));
        assert!(x
            .elementwise(Operand::Row(&Matrix::zeros(1, 3)), ElemOp::Mul)
            .is_err());
    }

    #[test]
    fn reductions() {
        let x = m(&[&[2.0, 4.0], &[6.0, 8.0]]);
        assert_eq!(x.mean_all().unwrap(), 5.0);
        assert_eq!(x.reduce(Axis::Rows, Stat::Sum).unwrap(), m(&[&[8.0, 12.0]]));
        assert_eq!(
            x.reduce(Axis::Cols, Stat::Mean).unwrap(),
            m(&[&[3.0], &[7.0]])
        );
        assert_eq!(x.reduce(Axis::Rows, Stat::Var).unwrap(), m(&[&[4.0, 4.0]]));
        let constant = m(&[&[3.0], &[3.0], &[3.0]]);
        assert_eq!(
            constant.reduce(Axis::Rows, Stat::Var).unwrap().get(0, 0),
            0.0
        );
        assert!(matches!(
            Matrix::zeros(0, 3).reduce(Axis::All, Stat::Sum),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn column_means_match_accumulation() {
        let mut rng = Rng::new(5);
        let x = Matrix::gaussian(6, 3, 1.0, 2.0, &mut rng).unwrap();
        let means = x.column_means().unwrap();
        for c in 0..3 {
            let mut acc = 0.0;
            for r in 0..6 {
                acc += x.get(r, c);
            }
            assert!((means.get(0, c) - acc / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_rows_contracts() {
        let x = Matrix::gaussian(10, 2, 0.0, 1.0, &mut Rng::new(1)).unwrap();
        let a = x.sample_rows(10, &mut Rng::new(9)).unwrap();
        let b = x.sample_rows(10, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
        let single = m(&[&[4.0, 5.0]]);
        assert_eq!(single.sample_rows(1, &mut Rng::new(0)).unwrap(), single);
        assert!(Matrix::zeros(0, 2)
            .sample_rows(1, &mut Rng::new(0))
            .is_err());
        assert!(x.sample_rows(0, &mut Rng::new(0)).is_err());
        let with_replacement = x.sample_rows(25, &mut Rng::new(2)).unwrap();
        assert_eq!(with_replacement.shape(), (25, 2));
        for r in with_replacement.iter_rows() {
            assert!(x.iter_rows().any(|orig| orig == r));
        }
    }

    #[test]
    fn sample_rows_is_uniform() {
        let mut rng = Rng::new(77);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[sample_indices(4, 1, &mut rng).unwrap()[0]] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.25).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn gaussian_contracts() {
        let g = Matrix::gaussian(3, 4, 3.0, 0.0, &mut Rng::new(1)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 3.0));
        assert!(Matrix::gaussian(2, 2, 0.0, -1.0, &mut Rng::new(1)).is_err());
        let big = Matrix::gaussian(1000, 100, 0.0, 1.0, &mut Rng::new(3)).unwrap();
        assert!(big.mean_all().unwrap().abs() < 0.02);
        let again = Matrix::gaussian(1000, 100, 0.0, 1.0, &mut Rng::new(3)).unwrap();
        assert_eq!(big, again);
    }

    #[test]
    fn streams_are_independent() {
        let a = Rng::with_stream(4, 0).next_u64();
        let b = Rng::with_stream(4, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, Rng::new(4).next_u64());
    }

    #[test]
    fn serde_nested_rows() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.5]]);
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, "[[1.0,2.0],[3.0,4.5]]");
        assert_eq!(serde_json::from_str::<Matrix>(&json).unwrap(), x);
        assert!(serde_json::from_str::<Matrix>("[[1.0],[2.0,3.0]]").is_err());
    }
}
