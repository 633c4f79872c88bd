//! Frobenius norm and delta-truncated SVD.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::tensor::DenseTensor;

/// Singular values below this fraction of the largest are numerically zero.
pub const RANK_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvdError {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("truncation threshold must be finite and non-negative, got {0}")]
    InvalidDelta(f64),
    #[error("rank cap must be at least 1")]
    ZeroRankCap,
}

/// Result of [`trunc_svd`]: `z ~ u * diag(s) * vt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `m x r`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `r` singular values, non-increasing and positive.
    pub s: Vec<f64>,
    /// `r x n`, orthonormal rows.
    pub vt: DMatrix<f64>,
    /// Frobenius norm of everything that was dropped.
    pub discarded_energy: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `diag(s) * vt`, the remainder carried to the next TT-SVD step.
    pub fn s_vt(&self) -> DMatrix<f64> {
        let mut out = self.vt.clone();
        for (mut row, &s) in out.row_iter_mut().zip(&self.s) {
            row *= s;
        }
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * self.s_vt()
    }
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    norm2(t.data())
}

/// Euclidean norm of a flat slice.
pub fn norm2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Truncated SVD keeping `min(rank_cap, r_delta)` triplets, where `r_delta`
/// is the smallest rank whose discarded singular values have root-sum-square
/// at most `delta`.
///
/// When the cap binds, `discarded_energy` can exceed `delta`; it is always the
/// true `||z - u s vt||_F`. Each kept left vector has its first nonzero entry
/// made non-negative.
pub fn trunc_svd(z: &DMatrix<f64>, delta: f64, rank_cap: Option<usize>) -> Result<TruncatedSvd, SvdError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(SvdError::InvalidDelta(delta));
    }
    if rank_cap == Some(0) {
        return Err(SvdError::ZeroRankCap);
    }
    for (col, column) in z.column_iter().enumerate() {
        if let Some(row) = column.iter().position(|v| !v.is_finite()) {
            return Err(SvdError::NonFinite { row, col });
        }
    }

    let (m, n) = z.shape();
    let (u_full, singular_values, vt_full) = jacobi_svd(z);

    let mut order: Vec<usize> = (0..singular_values.len()).collect();
    order.sort_by(|&a, &b| singular_values[b].total_cmp(&singular_values[a]).then(a.cmp(&b)));
    let sigma: Vec<f64> = order.iter().map(|&i| singular_values[i]).collect();

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let numeric_rank = sigma
        .iter()
        .take_while(|&&s| s > 0.0 && s >= RANK_FLOOR * sigma_max)
        .count();

    // tail[r] = sum of sigma_i^2 for r <= i < numeric_rank
    let mut tail = vec![0.0; numeric_rank + 1];
    for r in (0..numeric_rank).rev() {
        tail[r] = tail[r + 1] + sigma[r] * sigma[r];
    }
    let delta_sq = delta * delta;
    let r_delta = (0..=numeric_rank)
        .find(|&r| tail[r] <= delta_sq)
        .unwrap_or(numeric_rank);
    let rank = rank_cap.map_or(r_delta, |cap| cap.min(r_delta));

    let mut u = DMatrix::zeros(m, rank);
    let mut vt = DMatrix::zeros(rank, n);
    for (j, &src) in order.iter().take(rank).enumerate() {
        let flip = u_full.column(src).iter().find(|&&v| v != 0.0).is_some_and(|&v| v < 0.0);
        let sign = if flip { -1.0 } else { 1.0 };
        u.set_column(j, &(u_full.column(src) * sign));
        vt.set_row(j, &(vt_full.row(src) * sign));
    }
    let discarded_energy = sigma[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();

    Ok(TruncatedSvd {
        u,
        s: sigma[..rank].to_vec(),
        vt,
        discarded_energy,
    })
}

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD: `z = u * diag(s) * vt` with
/// `k = min(m, n)` unsorted triplets.
///
/// Column pairs of the working matrix are rotated until every pair satisfies
/// `|a_i . a_j| <= tol * |a_i| |a_j|`, which makes the normalized columns
/// orthonormal to `tol` regardless of their magnitude.
fn jacobi_svd(z: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let transposed = z.nrows() < z.ncols();
    let mut work = if transposed { z.transpose() } else { z.clone() };
    let (rows, cols) = work.shape();
    let mut v = DMatrix::<f64>::identity(cols, cols);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                {
                    let data = work.as_slice();
                    let (ci, cj) = (&data[i * rows..(i + 1) * rows], &data[j * rows..(j + 1) * rows]);
                    for (a, b) in ci.iter().zip(cj) {
                        alpha += a * a;
                        beta += b * b;
                        gamma += a * b;
                    }
                }
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(work.as_mut_slice(), rows, i, j, c, s);
                rotate(v.as_mut_slice(), cols, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = Vec::with_capacity(cols);
    for mut col in work.column_iter_mut() {
        let norm = col.norm();
        sigma.push(norm);
        if norm > 0.0 {
            col /= norm;
        }
    }
    if transposed {
        // z^T = work * diag(sigma) * v^T  =>  z = v * diag(sigma) * work^T
        (v, sigma, work.transpose())
    } else {
        (work, sigma, v.transpose())
    }
}

/// Applies the rotation `[c s; -s c]` to columns `i` and `j` of a
/// column-major buffer with `rows` rows.
fn rotate(data: &mut [f64], rows: usize, i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(j * rows);
    let ci = &mut head[i * rows..(i + 1) * rows];
    let cj = &mut tail[..rows];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    fn random(rng: &mut Pcg64, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn diag(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values))
    }

    #[test]
    fn frobenius_examples() {
        let t = DenseTensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap();
        assert_eq!(frobenius_norm(&t), 5.0);
        assert_eq!(frobenius_norm(&DenseTensor::zeros(vec![3, 3]).unwrap()), 0.0);

        let mut rng = Pcg64::seed_from_u64(3);
        let data: Vec<f64> = (0..20).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut oracle = 0.0;
        for v in &data {
            oracle += v * v;
        }
        let oracle = oracle.sqrt();
        let t = DenseTensor::new(vec![4, 5], data).unwrap();
        assert!((frobenius_norm(&t) - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn identity_keeps_everything() {
        let r = trunc_svd(&DMatrix::identity(3, 3), 0.0, None).unwrap();
        assert_eq!(r.rank(), 3);
        for s in &r.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(r.discarded_energy, 0.0);
    }

    #[test]
    fn delta_drops_smallest_value() {
        let r = trunc_svd(&diag(&[3.0, 2.0, 1.0]), 1.0, None).unwrap();
        assert_eq!(r.rank(), 2);
        assert!((r.discarded_energy - 1.0).abs() < 1e-12);
        assert!((r.s[0] - 3.0).abs() < 1e-12 && (r.s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cap_wins_and_reports_error() {
        let r = trunc_svd(&diag(&[3.0, 2.0, 1.0]), 0.0, Some(1)).unwrap();
        assert_eq!(r.rank(), 1);
        assert!((r.discarded_energy - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn negative_diagonal_uses_absolute_values() {
        let r = trunc_svd(&diag(&[-3.0, 2.0, -1.0]), 0.0, None).unwrap();
        let s: Vec<f64> = r.s.iter().map(|v| (v * 1e12).round() / 1e12).collect();
        assert_eq!(s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut z = DMatrix::identity(2, 2);
        z[(1, 0)] = f64::NAN;
        assert_eq!(
            trunc_svd(&z, 0.0, None).unwrap_err(),
            SvdError::NonFinite { row: 1, col: 0 }
        );
        let z = DMatrix::identity(2, 2);
        assert_eq!(trunc_svd(&z, 0.0, Some(0)).unwrap_err(), SvdError::ZeroRankCap);
        assert!(trunc_svd(&z, -1.0, None).is_err());
        assert!(trunc_svd(&z, f64::INFINITY, None).is_err());
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let r = trunc_svd(&DMatrix::zeros(3, 4), 0.0, None).unwrap();
        assert_eq!(r.rank(), 0);
        assert_eq!(r.discarded_energy, 0.0);
        assert_eq!(r.reconstruct(), DMatrix::zeros(3, 4));
    }

    #[test]
    fn rank_deficient_floor() {
        // rank 1 outer product: trailing singular values are roundoff
        let a = nalgebra::DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let b = nalgebra::DVector::from_row_slice(&[4.0, -1.0, 0.5, 2.0]);
        let z = &a * b.transpose();
        let r = trunc_svd(&z, 0.0, None).unwrap();
        assert_eq!(r.rank(), 1);
        assert!((&z - r.reconstruct()).norm() <= 1e-12 * z.norm());
    }

    #[test]
    fn rank_one_wide_and_tall_matrices_are_exact() {
        let mut rng = Pcg64::seed_from_u64(3);
        for &(m, n) in &[(3, 4), (4, 3), (2, 12), (12, 2), (6, 24), (1, 5)] {
            for _ in 0..20 {
                let a = nalgebra::DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
                let b = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let z = &a * b.transpose();
                let r = trunc_svd(&z, 0.0, None).unwrap();
                assert_eq!(r.rank(), 1, "{m}x{n}");
                assert!((r.s[0] - z.norm()).abs() <= 1e-12 * z.norm());
                assert!((&z - r.reconstruct()).norm() <= 1e-12 * z.norm());
            }
        }
    }

    #[test]
    fn contract_holds_on_random_matrices() {
        let mut rng = Pcg64::seed_from_u64(11);
        for &(m, n) in &[(5, 7), (7, 5), (1, 6), (6, 1), (8, 8), (2, 384)] {
            let z = random(&mut rng, m, n);
            let total = z.norm();
            for &(delta, cap) in &[(0.0, None), (0.3 * total, None), (0.0, Some(2)), (0.1, Some(1))] {
                let r = trunc_svd(&z, delta, cap).unwrap();
                let k = r.rank();
                assert!(k <= m.min(n));
                if let Some(c) = cap {
                    assert!(k <= c);
                }
                assert!(r.s.windows(2).all(|w| w[0] >= w[1]));
                assert!(r.s.iter().all(|&s| s > 0.0));

                let residual = (&z - r.reconstruct()).norm();
                assert!((residual - r.discarded_energy).abs() <= 1e-8 * total);
                if cap.is_none() {
                    assert!(r.discarded_energy <= delta + 1e-12 * total);
                }
                let kept: f64 = r.s.iter().map(|s| s * s).sum();
                assert!((residual * residual + kept - total * total).abs() <= 1e-8 * total * total);

                let utu = r.u.tr_mul(&r.u) - DMatrix::<f64>::identity(k, k);
                let vvt = &r.vt * r.vt.transpose() - DMatrix::<f64>::identity(k, k);
                assert!(utu.amax() <= 1e-8 && vvt.amax() <= 1e-8);

                for col in r.u.column_iter() {
                    let first = col.iter().find(|&&v| v != 0.0).unwrap();
                    assert!(*first >= 0.0);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = Pcg64::seed_from_u64(5);
        let z = random(&mut rng, 6, 9);
        let a = trunc_svd(&z, 0.2, None).unwrap();
        let b = trunc_svd(&z, 0.2, None).unwrap();
        assert_eq!(a, b);
    }
}
