//! Angular momentum matrices and the Kronecker product.
//!
//! Bases are ordered by descending projection, `m = s, s-1, ..., -s`. In the
//! composite electron-nuclear space the electron factor comes first.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Spin matrices in units of ħ for a spin `s`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub s: f64,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub plus: CMatrix,
    pub minus: CMatrix,
}

impl SpinOperators {
    pub fn dimension(&self) -> usize {
        self.sz.nrows()
    }

    /// Cartesian component `0 = x`, `1 = y`, `2 = z`.
    pub fn component(&self, axis: usize) -> &CMatrix {
        match axis {
            0 => &self.sx,
            1 => &self.sy,
            2 => &self.sz,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

/// Returns `2s` if `s` is a non-negative half-integer.
pub fn twice_spin(s: f64) -> Result<usize> {
    let two_s = 2.0 * s;
    if !s.is_finite() || s < 0.0 || (two_s - two_s.round()).abs() > 1e-12 {
        return Err(Error::domain(format!("spin {s} is not a non-negative half-integer")));
    }
    Ok(two_s.round() as usize)
}

pub fn spin_operators(s: f64) -> Result<SpinOperators> {
    let two_s = twice_spin(s)?;
    let dim = two_s + 1;
    let s = two_s as f64 / 2.0;

    let m = |k: usize| s - k as f64;
    let sz = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C64::new(m(r), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    // <m|S+|m-1> = sqrt(s(s+1) - m(m-1)); row k has m = s-k, column k+1 has m-1.
    let plus = DMatrix::from_fn(dim, dim, |r, c| {
        if c == r + 1 {
            let mr = m(r);
            C64::new((s * (s + 1.0) - mr * (mr - 1.0)).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let minus = plus.adjoint();
    let sx = (&plus + &minus).scale(0.5);
    let sy = (&plus - &minus) * C64::new(0.0, -0.5);

    Ok(SpinOperators {
        s,
        sx,
        sy,
        sz,
        plus,
        minus,
    })
}

/// Pauli matrices `σ = 2 s` for spin 1/2, in the order x, y, z.
pub fn pauli() -> [CMatrix; 3] {
    let ops = spin_operators(0.5).expect("spin 1/2");
    [ops.sx.scale(2.0), ops.sy.scale(2.0), ops.sz.scale(2.0)]
}

/// Kronecker product `a ⊗ b` with `a` as the outer (block) factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
