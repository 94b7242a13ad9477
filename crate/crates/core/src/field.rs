//! Prime field arithmetic GF(q) and small dense matrices over it.
//!
//! Elements are plain residues wrapped in [`Fe`]; all arithmetic goes through
//! a [`Field`] which owns the modulus. Moduli are restricted to primes below
//! 2^32 so that products fit in a `u64` without widening.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default modulus, the Fermat prime 2^16 + 1.
pub const DEFAULT_MODULUS: u64 = 65_537;

/// A residue in `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fe(u64);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Field context: modulus plus the ordered list of evaluation points used by
/// Reed-Solomon codes built over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    q: u64,
    // None means the natural order 1, 2, ..., q-1.
    points: Option<Arc<[Fe]>>,
}

fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    if q.is_multiple_of(2) {
        return q == 2;
    }
    let mut d = 3;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

impl Field {
    pub fn new(q: u64) -> Result<Self> {
        if q >= 1 << 32 || !is_prime(q) {
            return Err(Error::InvalidModulus(q));
        }
        Ok(Field { q, points: None })
    }

    /// Field with a custom evaluation-point order. Points must be distinct and
    /// nonzero; fewer than `q - 1` points is allowed and caps the code length.
    pub fn with_points(q: u64, points: &[u64]) -> Result<Self> {
        let field = Field::new(q)?;
        let mut seen = std::collections::HashSet::new();
        let mut pts = Vec::with_capacity(points.len());
        for &p in points {
            if p == 0 || p >= q || !seen.insert(p) {
                return Err(Error::InvalidParams(format!(
                    "evaluation point {p} is zero, out of range or repeated"
                )));
            }
            pts.push(Fe(p));
        }
        Ok(Field {
            points: Some(pts.into()),
            ..field
        })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Number of evaluation points available.
    pub fn num_points(&self) -> usize {
        match &self.points {
            Some(p) => p.len(),
            None => (self.q - 1) as usize,
        }
    }

    /// The `i`-th evaluation point (0-based).
    pub fn point(&self, i: usize) -> Fe {
        match &self.points {
            Some(p) => p[i],
            None => {
                debug_assert!((i as u64) < self.q - 1);
                Fe(i as u64 + 1)
            }
        }
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: u64) -> Fe {
        Fe(v % self.q)
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let s = a.0 + b.0;
        Fe(if s >= self.q { s - self.q } else { s })
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        Fe(if a.0 >= b.0 { a.0 - b.0 } else { a.0 + self.q - b.0 })
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        self.sub(Fe::ZERO, a)
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        Fe(a.0 * b.0 % self.q)
    }

    pub fn pow(&self, mut base: Fe, mut exp: u64) -> Fe {
        let mut acc = Fe::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: Fe) -> Result<Fe> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// Uniformly random element.
    pub fn random<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe(rng.gen_range(0..self.q))
    }

    /// Matrix-vector product over the field.
    pub fn mat_vec_mul(&self, m: &Matrix, v: &[Fe]) -> Result<Vec<Fe>> {
        if m.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: m.cols,
                got: v.len(),
            });
        }
        Ok((0..m.rows)
            .map(|i| {
                m.row(i)
                    .iter()
                    .zip(v)
                    .fold(Fe::ZERO, |acc, (&a, &b)| self.add(acc, self.mul(a, b)))
            })
            .collect())
    }

    /// Matrix product over the field.
    pub fn mat_mul(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        if a.cols != b.rows {
            return Err(Error::DimensionMismatch {
                expected: a.cols,
                got: b.rows,
            });
        }
        let mut out = Matrix::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for t in 0..a.cols {
                let x = a.get(i, t);
                if x.is_zero() {
                    continue;
                }
                for j in 0..b.cols {
                    let cur = out.get(i, j);
                    out.set(i, j, self.add(cur, self.mul(x, b.get(t, j))));
                }
            }
        }
        Ok(out)
    }

    pub fn random_matrix<R: rand::Rng + ?Sized>(&self, rows: usize, cols: usize, rng: &mut R) -> Matrix {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| self.random(rng)).collect(),
        }
    }
}

/// Dense row-major matrix of field elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Fe::ONE);
        }
        m
    }

    /// Builds a matrix from rows of already-reduced elements.
    pub fn from_rows(rows: Vec<Vec<Fe>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in &rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix from raw integers, reducing each entry into `field`.
    pub fn from_u64(field: &Field, rows: &[Vec<u64>]) -> Result<Self> {
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| field.elem(v)).collect())
                .collect(),
        )
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
    pub fn get(&self, i: usize, j: usize) -> Fe {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Fe) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Fe> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows `start..end` as a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }
}
