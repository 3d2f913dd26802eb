//! Dense linear algebra helpers: Hermitian eigendecomposition with a
//! deterministic gauge, and the matrix exponential.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm distance from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `U† M U`.
pub fn rotate_into(m: &CMatrix, u: &CMatrix) -> CMatrix {
    u.adjoint() * m * u
}

/// Row-major vectorization: entry `(a, b)` goes to `a * n + b`.
pub fn vectorize(m: &CMatrix) -> DVector<C64> {
    let n = m.nrows();
    DVector::from_fn(n * n, |k, _| m[(k / n, k % n)])
}

pub fn unvectorize(v: &DVector<C64>, n: usize) -> CMatrix {
    DMatrix::from_fn(n, n, |a, b| v[a * n + b])
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are ascending. Eigenvectors inside (near-)degenerate clusters
/// are replaced by the Gram-Schmidt orthonormalization of the cluster
/// projector applied to `e_0, e_1, ...` in order, so the basis depends only on
/// the eigenspace, not on solver internals. Each vector is then phased so its
/// largest-magnitude component is real and positive.
pub fn hermitian_eigen(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::domain("matrix is not square"));
    }
    let scale = max_abs(h).max(f64::MIN_POSITIVE);
    let defect = hermiticity_defect(h);
    if defect > 1e-9 * scale {
        return Err(Error::domain(format!(
            "matrix is not Hermitian (defect {defect:.3e}, scale {scale:.3e})"
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }

    let herm = (h + h.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let tol = 1e-10 * scale.max(values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= tol {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_block(&mut vectors, start, end);
        }
        start = end;
    }
    for c in 0..n {
        fix_phase(&mut vectors, c);
    }
    Ok((values, vectors))
}

fn canonicalize_block(vectors: &mut CMatrix, start: usize, end: usize) {
    let n = vectors.nrows();
    let block = vectors.columns(start, end - start).into_owned();
    let projector = &block * block.adjoint();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(end - start);
    for k in 0..n {
        if basis.len() == end - start {
            break;
        }
        let mut v: DVector<C64> = projector.column(k).into_owned();
        for b in &basis {
            let overlap = b.dotc(&v);
            v -= b * overlap;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / C64::new(norm, 0.0));
        }
    }
    // Fall back to the solver's vectors if the projector was too ill-conditioned.
    if basis.len() != end - start {
        return;
    }
    for (offset, b) in basis.into_iter().enumerate() {
        vectors.set_column(start + offset, &b);
    }
}

fn fix_phase(vectors: &mut CMatrix, col: usize) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for r in 0..vectors.nrows() {
        let m = vectors[(r, col)].norm();
        if m > best_norm * (1.0 + 1e-12) {
            best = r;
            best_norm = m;
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let z = vectors[(best, col)];
    let phase = z.conj() / z.norm();
    for r in 0..vectors.nrows() {
        vectors[(r, col)] *= phase;
    }
}

/// Padé(13) coefficients for scaling-and-squaring.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which Padé(13) reaches double precision without scaling.
const THETA13: f64 = 5.371_920_351_148_152;

fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a fixed Padé(13)
/// approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(squarings));

    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let ident = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_outer = &a6 * &u_inner + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1);
    let u = &a * u_outer;
    let v_inner = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * v_inner + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_matrix_sorted_with_identity_vectors() {
        let h = CMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
        assert_eq!(vecs[(1, 0)], c(1.0, 0.0));
        assert_eq!(vecs[(2, 1)], c(1.0, 0.0));
        assert_eq!(vecs[(0, 2)], c(1.0, 0.0));
    }

    #[test]
    fn symmetric_two_level() {
        let d = 0.7;
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(d, 0.0), c(d, 0.0), c(0.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        assert!((vals[0] + d).abs() < 1e-14 && (vals[1] - d).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Largest component real-positive; ties resolve to the first index.
        assert!((vecs[(0, 0)] - c(s, 0.0)).norm() < 1e-14);
        assert!((vecs[(1, 0)] - c(-s, 0.0)).norm() < 1e-14);
        assert!((vecs[(0, 1)] - c(s, 0.0)).norm() < 1e-14);
        assert!((vecs[(1, 1)] - c(s, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn degenerate_block_is_canonical() {
        // Two copies of the same degenerate matrix in different bases must
        // produce the same eigenvectors.
        let h = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let (_, v1) = hermitian_eigen(&h).unwrap();
        assert!((v1.clone() - CMatrix::identity(3, 3)).iter().all(|z| z.norm() < 1e-14));
        let theta: f64 = 0.4;
        let u = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(theta.cos(), 0.0), c(0.0, -theta.sin()), c(0.0, 0.0),
                c(0.0, -theta.sin()), c(theta.cos(), 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0),
            ],
        );
        let h2 = &u * &h * u.adjoint();
        let (_, v2) = hermitian_eigen(&h2).unwrap();
        assert!((v1 - v2).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn non_hermitian_rejected() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(hermitian_eigen(&h).is_err());
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![c(-2.0, 0.0), c(0.5, 1.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - c((-2.0f64).exp(), 0.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - c(0.5, 1.0).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);

        // exp(θ [[0, -1], [1, 0]]) is a rotation; large θ exercises squaring.
        let theta = 40.0;
        let gen = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(-theta, 0.0), c(theta, 0.0), c(0.0, 0.0)]);
        let r = expm(&gen);
        assert!((r[(0, 0)].re - theta.cos()).abs() < 1e-11);
        assert!((r[(1, 0)].re - theta.sin()).abs() < 1e-11);
    }

    #[test]
    fn expm_matches_taylor_series_for_small_random_matrix() {
        let n = 5;
        let a = CMatrix::from_fn(n, n, |r, col| c(((r * 7 + col * 3) % 5) as f64 * 0.1 - 0.2, ((r + 2 * col) % 3) as f64 * 0.05));
        let mut term = CMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &a / C64::new(k as f64, 0.0);
            sum += &term;
        }
        assert!(max_abs(&(expm(&a) - sum)) < 1e-13);
    }

    #[test]
    fn vectorization_round_trip() {
        let m = CMatrix::from_fn(3, 3, |r, col| c(r as f64, col as f64));
        let v = vectorize(&m);
        assert_eq!(v[1 * 3 + 2], c(1.0, 2.0));
        assert_eq!(unvectorize(&v, 3), m);
    }
}
