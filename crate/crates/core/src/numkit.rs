//! Dense row-major `f64` matrices and a seeded SplitMix64 generator.
//!
//! Shapes never broadcast: every binary operation requires exactly matching
//! (or exactly conformable) operands and reports both shapes otherwise.

use std::fmt;

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense 2-D array of finite reals, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}", self.rows, self.cols)?;
        f.debug_list().entries(self.data.chunks(self.cols.max(1))).finish()
    }
}

fn shape_str(r: usize, c: usize) -> String {
    format!("{r}x{c}")
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {}", shape_str(rows, cols))));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {} matrix",
                data.len(),
                shape_str(rows, cols)
            )));
        }
        let m = Matrix { rows, cols, data };
        m.ensure_finite("from_vec")?;
        Ok(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Matrix::from_vec(r, c, rows.concat())
    }

    /// Column vector (n×1).
    pub fn column(values: &[f64]) -> Result<Self> {
        Matrix::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Raw mutable access. Callers must keep every value finite.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of column `c`.
    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!(
                "{what}: non-finite value {} at ({}, {})",
                self.data[i],
                i / self.cols,
                i % self.cols
            ))),
        }
    }

    fn same_shape(&self, other: &Matrix, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{what}: {} vs {}",
                shape_str(self.rows, self.cols),
                shape_str(other.rows, other.cols)
            )));
        }
        Ok(())
    }

    /// Standard matrix product `self · b`.
    pub fn matmul(&self, b: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, b.cols.max(1));
        out.add_matmul(self, b)?;
        Ok(out)
    }

    /// `self += a · b`.
    pub fn add_matmul(&mut self, a: &Matrix, b: &Matrix) -> Result<()> {
        if a.cols != b.rows || self.rows != a.rows || self.cols != b.cols {
            return Err(Error::Shape(format!(
                "matmul {} x {} into {}",
                shape_str(a.rows, a.cols),
                shape_str(b.rows, b.cols),
                shape_str(self.rows, self.cols)
            )));
        }
        gemm_acc(&mut self.data, &a.data, &b.data, a.rows, a.cols, b.cols);
        self.ensure_finite("matmul")
    }

    /// `self += aᵀ · b`.
    pub fn add_matmul_tn(&mut self, a: &Matrix, b: &Matrix) -> Result<()> {
        if a.rows != b.rows || self.rows != a.cols || self.cols != b.cols {
            return Err(Error::Shape(format!(
                "matmul {}ᵀ x {} into {}",
                shape_str(a.rows, a.cols),
                shape_str(b.rows, b.cols),
                shape_str(self.rows, self.cols)
            )));
        }
        let (k, m, n) = (a.rows, a.cols, b.cols);
        for p in 0..k {
            let arow = &a.data[p * m..(p + 1) * m];
            let brow = &b.data[p * n..(p + 1) * n];
            for (i, &av) in arow.iter().enumerate() {
                let crow = &mut self.data[i * n..(i + 1) * n];
                for (c, &bv) in crow.iter_mut().zip(brow) {
                    *c += av * bv;
                }
            }
        }
        self.ensure_finite("matmul_tn")
    }

    /// `self += a · bᵀ`.
    pub fn add_matmul_nt(&mut self, a: &Matrix, b: &Matrix) -> Result<()> {
        if a.cols != b.cols || self.rows != a.rows || self.cols != b.rows {
            return Err(Error::Shape(format!(
                "matmul {} x {}ᵀ into {}",
                shape_str(a.rows, a.cols),
                shape_str(b.rows, b.cols),
                shape_str(self.rows, self.cols)
            )));
        }
        let bt = b.transpose();
        gemm_acc(&mut self.data, &a.data, &bt.data, a.rows, a.cols, bt.cols);
        self.ensure_finite("matmul_nt")
    }

    /// `self += scale · other`, shapes equal.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) -> Result<()> {
        self.same_shape(other, "add_scaled")?;
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += scale * y;
        }
        self.ensure_finite("add_scaled")
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

/// `c += a · b` on raw row-major buffers, `a` m×k, `b` k×n.
fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        let arow = &a[i * k..(i + 1) * k];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    OneMinus,
}

impl Elementwise {
    pub fn is_binary(self) -> bool {
        matches!(self, Elementwise::Add | Elementwise::Sub | Elementwise::Mul)
    }
}

/// Apply a unary or binary elementwise operation.
pub fn elementwise(op: Elementwise, a: &Matrix, b: Option<&Matrix>) -> Result<Matrix> {
    let out = match (op.is_binary(), b) {
        (true, Some(b)) => {
            a.same_shape(b, "elementwise")?;
            let f: fn(f64, f64) -> f64 = match op {
                Elementwise::Add => |x, y| x + y,
                Elementwise::Sub => |x, y| x - y,
                _ => |x, y| x * y,
            };
            Matrix {
                rows: a.rows,
                cols: a.cols,
                data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
            }
        }
        (true, None) => {
            return Err(Error::Argument(format!("{op:?} needs a second operand")));
        }
        (false, Some(_)) => {
            return Err(Error::Argument(format!("{op:?} takes a single operand")));
        }
        (false, None) => match op {
            Elementwise::Sigmoid => a.map(sigmoid),
            Elementwise::Tanh => a.map(f64::tanh),
            _ => a.map(|x| 1.0 - x),
        },
    };
    out.ensure_finite("elementwise")?;
    Ok(out)
}

/// SplitMix64 generator. Streams depend only on the seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Scalar uniform draw in [lo, hi).
    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on hi for wide intervals
        if v >= hi {
            lo
        } else {
            v
        }
    }

    /// Matrix of i.i.d. uniform draws in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Argument(format!("uniform needs lo < hi, got [{lo}, {hi})")));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {}", shape_str(rows, cols))));
        }
        let data = (0..rows * cols).map(|_| self.uniform_scalar(lo, hi)).collect();
        Ok(Matrix { rows, cols, data })
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        (Rng::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Rng::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::numkit::Rng;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                c.set(i, j, s);
            }
        }
        c
    }

    #[test]
    fn matmul_identity_and_dot() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(a.matmul(&Matrix::identity(2)).unwrap(), a);
        let r = Matrix::from_rows(&[&[1.0, 2.0]]).unwrap();
        let c = Matrix::from_rows(&[&[3.0], &[4.0]]).unwrap();
        assert_eq!(r.matmul(&c).unwrap().as_slice(), &[11.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Rng::new(3);
        let a = rng.uniform(-2.0, 2.0, 3, 4).unwrap();
        let b = rng.uniform(-2.0, 2.0, 4, 2).unwrap();
        assert_eq!(a.matmul(&b).unwrap(), naive_matmul(&a, &b));
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let mut rng = Rng::new(11);
        let a = rng.uniform(-1.0, 1.0, 5, 3).unwrap();
        let b = rng.uniform(-1.0, 1.0, 5, 4).unwrap();
        let mut tn = Matrix::zeros(3, 4);
        tn.add_matmul_tn(&a, &b).unwrap();
        let want = naive_matmul(&a.transpose(), &b);
        for (x, y) in tn.as_slice().iter().zip(want.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
        let c = rng.uniform(-1.0, 1.0, 6, 3).unwrap();
        let mut nt = Matrix::zeros(5, 6);
        nt.add_matmul_nt(&a, &c).unwrap();
        assert_eq!(nt, naive_matmul(&a, &c.transpose()));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3 x 2x3"), "{err}");
    }

    #[test]
    fn elementwise_examples() {
        let z = Matrix::zeros(1, 1);
        assert_eq!(elementwise(Elementwise::Sigmoid, &z, None).unwrap().get(0, 0), 0.5);
        assert_eq!(elementwise(Elementwise::Tanh, &z, None).unwrap().get(0, 0), 0.0);
        let a = Matrix::from_rows(&[&[2.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[&[4.0, 5.0]]).unwrap();
        assert_eq!(elementwise(Elementwise::Mul, &a, Some(&b)).unwrap().as_slice(), &[8.0, 15.0]);
        assert_eq!(elementwise(Elementwise::OneMinus, &a, None).unwrap().as_slice(), &[-1.0, -2.0]);
        assert!(matches!(
            elementwise(Elementwise::Add, &a, Some(&Matrix::zeros(2, 1))),
            Err(Error::Shape(_))
        ));
        assert!(elementwise(Elementwise::Sub, &a, None).is_err());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        assert!(matches!(Matrix::from_vec(1, 1, vec![f64::NAN]), Err(Error::Numeric(_))));
        let big = Matrix::from_vec(1, 1, vec![1e200]).unwrap();
        assert!(matches!(big.matmul(&big), Err(Error::Numeric(_))));
    }

    #[test]
    fn rng_reproducible() {
        let mut r = Rng::new(42);
        let a = r.uniform(0.0, 1.0, 3, 3).unwrap();
        let b = r.uniform(0.0, 1.0, 3, 3).unwrap();
        assert_ne!(a, b);
        let mut r2 = Rng::new(42);
        assert_eq!(r2.uniform(0.0, 1.0, 3, 3).unwrap(), a);
        assert_eq!(r2.uniform(0.0, 1.0, 3, 3).unwrap(), b);
    }

    #[test]
    fn splitmix_reference_stream() {
        // first outputs for seed 0 from the reference C implementation
        let mut r = Rng::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn uniform_mean_is_centered() {
        let mut r = Rng::new(42);
        let m = r.uniform(0.0, 1.0, 1000, 1).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / 1000.0;
        assert!((0.45..=0.55).contains(&mean), "{mean}");
        assert!(m.as_slice().iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn uniform_rejects_empty_interval() {
        let mut r = Rng::new(1);
        assert!(matches!(r.uniform(1.0, 1.0, 2, 2), Err(Error::Argument(_))));
        assert!(matches!(r.uniform(2.0, 1.0, 2, 2), Err(Error::Argument(_))));
    }

    fn arb_matrix(r: usize, c: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            a in arb_matrix(3, 4), b in arb_matrix(4, 2), c in arb_matrix(2, 5)
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.as_slice().iter().chain(right.as_slice()).fold(1.0f64, |m, x| m.max(x.abs()));
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn sigmoid_is_symmetric(x in -20.0f64..20.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn ops_stay_finite(a in arb_matrix(2, 3).prop_map(|m| m.map(|x| x * 100.0)),
                           b in arb_matrix(2, 3).prop_map(|m| m.map(|x| x * 100.0))) {
            for op in [Elementwise::Add, Elementwise::Sub, Elementwise::Mul] {
                prop_assert!(elementwise(op, &a, Some(&b)).unwrap().is_finite());
            }
            for op in [Elementwise::Sigmoid, Elementwise::Tanh, Elementwise::OneMinus] {
                prop_assert!(elementwise(op, &a, None).unwrap().is_finite());
            }
            prop_assert!(a.matmul(&b.transpose()).unwrap().is_finite());
        }

        #[test]
        fn rng_stream_is_bit_identical(seed in any::<u64>()) {
            let mut a = Rng::new(seed);
            let mut b = Rng::new(seed);
            for _ in 0..32 {
                prop_assert_eq!(a.next_u64(), b.next_u64());
            }
        }
    }
}
