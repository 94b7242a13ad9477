//! Nonsystematic Reed-Solomon codes by polynomial evaluation.
//!
//! A message `(c_0, ..., c_{k-1})` is the coefficient vector of
//! `f(X) = c_0 + c_1 X + ... + c_{k-1} X^{k-1}` and the codeword is
//! `(f(α_1), ..., f(α_n))` over the field's first `n` evaluation points.
//! `c_0` plays the role of the secret when the code is used for sharing.

use crate::error::{Error, Result};
use crate::field::{Fe, Field};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsCode {
    n: usize,
    k: usize,
    field: Field,
}

impl RsCode {
    pub fn new(field: &Field, n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParams(format!("need 1 <= k <= n, got (n,k)=({n},{k})")));
        }
        if n > field.num_points() {
            return Err(Error::InvalidParams(format!(
                "code length {n} exceeds the {} available evaluation points",
                field.num_points()
            )));
        }
        Ok(RsCode {
            n,
            k,
            field: field.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Evaluation point of codeword position `pos` (0-based).
    pub fn point(&self, pos: usize) -> Fe {
        self.field.point(pos)
    }

    pub fn encode(&self, message: &[Fe]) -> Result<Vec<Fe>> {
        if message.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: message.len(),
            });
        }
        let f = &self.field;
        Ok((0..self.n)
            .map(|pos| {
                let x = f.point(pos);
                message
                    .iter()
                    .rev()
                    .fold(Fe::ZERO, |acc, &c| f.add(f.mul(acc, x), c))
            })
            .collect())
    }

    fn check_positions(&self, positions: impl Iterator<Item = usize>, count: usize) -> Result<()> {
        if count < self.k {
            return Err(Error::NotEnoughShares {
                needed: self.k,
                available: count,
            });
        }
        let mut seen = vec![false; self.n];
        for pos in positions {
            if pos >= self.n || seen[pos] {
                return Err(Error::InvalidParams(format!(
                    "position {pos} is out of range or repeated for length {}",
                    self.n
                )));
            }
            seen[pos] = true;
        }
        Ok(())
    }

    /// Erasure decoding by Lagrange interpolation on the first `k` available
    /// symbols. Any further symbols are checked against the interpolant.
    /// Positions are 0-based.
    pub fn decode_erasures(&self, available: &[(usize, Fe)]) -> Result<Vec<Fe>> {
        self.check_positions(available.iter().map(|&(p, _)| p), available.len())?;
        let f = &self.field;
        let (basis, rest) = available.split_at(self.k);
        let xs: Vec<Fe> = basis.iter().map(|&(p, _)| f.point(p)).collect();
        let ys: Vec<Fe> = basis.iter().map(|&(_, y)| y).collect();
        let message = interpolate(f, &xs, &ys);
        if !rest.is_empty() {
            let codeword = self.encode(&message)?;
            if rest.iter().any(|&(p, y)| codeword[p] != y) {
                return Err(Error::InconsistentShares);
            }
        }
        Ok(message)
    }

    /// Weights `w` such that the constant coefficient of the interpolant
    /// through `positions` equals `Σ w_i y_i`. Only the first `k` positions
    /// are used.
    pub fn secret_weights(&self, positions: &[usize]) -> Result<Vec<Fe>> {
        self.check_positions(positions.iter().copied(), positions.len())?;
        let f = &self.field;
        let xs: Vec<Fe> = positions[..self.k].iter().map(|&p| f.point(p)).collect();
        xs.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let (num, den) = xs.iter().enumerate().filter(|&(j, _)| j != i).fold(
                    (Fe::ONE, Fe::ONE),
                    |(num, den), (_, &xj)| (f.mul(num, xj), f.mul(den, f.sub(xj, xi))),
                );
                Ok(f.mul(num, f.inv(den)?))
            })
            .collect()
    }
}

/// Coefficients of the unique polynomial of degree `< xs.len()` through the
/// points `(xs[i], ys[i])`. The `xs` must be distinct.
fn interpolate(f: &Field, xs: &[Fe], ys: &[Fe]) -> Vec<Fe> {
    let k = xs.len();
    // master(X) = Π (X - x_i), coefficients low to high, degree k.
    let mut master = vec![Fe::ZERO; k + 1];
    master[0] = Fe::ONE;
    for (deg, &x) in xs.iter().enumerate() {
        for d in (0..=deg + 1).rev() {
            let lower = if d > 0 { master[d - 1] } else { Fe::ZERO };
            master[d] = f.sub(lower, f.mul(x, master[d]));
        }
    }
    let mut coeffs = vec![Fe::ZERO; k];
    let mut basis = vec![Fe::ZERO; k];
    for (i, &xi) in xs.iter().enumerate() {
        // basis = master / (X - xi) by synthetic division.
        let mut carry = Fe::ZERO;
        for d in (0..k).rev() {
            carry = f.add(master[d + 1], f.mul(carry, xi));
            basis[d] = carry;
        }
        let den = basis
            .iter()
            .rev()
            .fold(Fe::ZERO, |acc, &c| f.add(f.mul(acc, xi), c));
        let scale = f.mul(ys[i], f.inv(den).expect("evaluation points are distinct"));
        for (c, &b) in coeffs.iter_mut().zip(&basis) {
            *c = f.add(*c, f.mul(scale, b));
        }
    }
    coeffs
}

/// Field operations needed to decode one `(n, k)` codeword: Berlekamp-Massey
/// (`n(n-k)` multiplications, `n(n-k-1)` additions) plus a length-`n` DFT
/// (`n/2 (⌈log2 n⌉ - 1)` multiplications, `n ⌈log2 n⌉` additions).
///
/// A length-1 code carries its message in the clear and costs nothing.
pub fn decoding_cost_ops(n: usize, k: usize) -> Result<f64> {
    if k > n || n == 0 {
        return Err(Error::InvalidParams(format!("need k <= n, got (n,k)=({n},{k})")));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let n_f = n as f64;
    let log = ceil_log2(n) as f64;
    let redundancy = (n - k) as f64;
    Ok(n_f * (2.0 * redundancy + 1.5 * log - 1.5))
}

pub(crate) fn ceil_log2(n: usize) -> u32 {
    debug_assert!(n >= 1);
    usize::BITS - (n - 1).leading_zeros()
}
