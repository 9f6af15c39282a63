//! One-sided Jacobi SVD.
//!
//! Columns of a working copy are orthogonalized by plane rotations until every
//! pair is orthogonal to machine precision relative to their norms; the
//! accumulated rotations form `V`. Deterministic for a given input.

use super::mat::{dot, Mat};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;
const ORTH_TOL: f64 = 1e-15;

/// Thin SVD `m = U · diag(S) · Vᵀ` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `rows x k`, orthonormal columns.
    pub u: Mat,
    /// Nonincreasing, nonnegative.
    pub s: Vec<f64>,
    /// `cols x k`, orthonormal columns.
    pub v: Mat,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Mat {
        let k = self.s.len();
        let us = Mat::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.s[j]);
        us.matmul_t(&self.v).expect("factor shapes are consistent")
    }
}

pub fn svd(m: &Mat) -> Result<SvdFactors> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Empty);
    }
    m.check_finite()?;
    if m.rows() >= m.cols() {
        Ok(jacobi_tall(m))
    } else {
        let t = jacobi_tall(&m.transpose());
        Ok(SvdFactors { u: t.v, s: t.s, v: t.u })
    }
}

fn jacobi_tall(a: &Mat) -> SvdFactors {
    let (m, n) = a.shape();
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= ORTH_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let s_max = norms[order[0]];
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for &j in &order {
        let sj = norms[j];
        if sj > s_max * 1e-13 && sj > f64::MIN_POSITIVE {
            u_cols.push(w[j].iter().map(|x| x / sj).collect());
        } else {
            deficient.push(u_cols.len());
            u_cols.push(Vec::new());
        }
        v_cols.push(v[j].clone());
        s.push(sj);
    }
    for &slot in &deficient {
        u_cols[slot] = complete_basis(&u_cols, m);
    }

    // Sign convention: the largest-magnitude entry of each left vector is positive.
    for j in 0..n {
        let pivot = u_cols[j]
            .iter()
            .copied()
            .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            u_cols[j].iter_mut().for_each(|x| *x = -*x);
            v_cols[j].iter_mut().for_each(|x| *x = -*x);
        }
    }

    let mut u = Mat::zeros(m, n);
    let mut vm = Mat::zeros(n, n);
    for j in 0..n {
        u.set_col(j, &u_cols[j]);
        vm.set_col(j, &v_cols[j]);
    }
    SvdFactors { u, s, v: vm }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// A unit vector orthogonal to every non-empty column in `cols`.
fn complete_basis(cols: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..m {
        let mut cand = vec![0.0; m];
        cand[e] = 1.0;
        for _ in 0..2 {
            for c in cols.iter().filter(|c| !c.is_empty()) {
                let d = dot(&cand, c);
                cand.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm > 0.5 {
            return cand.iter().map(|x| x / norm).collect();
        }
        if best.as_ref().is_none_or(|(b, _)| norm > *b) {
            best = Some((norm, cand));
        }
    }
    let (norm, cand) = best.expect("m >= 1");
    cand.iter().map(|x| x / norm).collect()
}

/// Symmetric eigendecomposition of a PSD matrix via SVD: `a ≈ Q diag(λ) Qᵀ`.
pub fn psd_eigen(a: &Mat) -> Result<(Mat, Vec<f64>)> {
    if a.rows() != a.cols() {
        return Err(Error::Shape {
            expected: (a.rows(), a.rows()),
            got: a.shape(),
        });
    }
    let f = svd(&a.symmetrize())?;
    Ok((f.u, f.s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orthonormality_err(q: &Mat) -> f64 {
        let g = q.t_matmul(q).unwrap();
        (&g - &Mat::identity(q.cols())).max_abs()
    }

    #[test]
    fn identity_and_diagonal() {
        let f = svd(&Mat::identity(3)).unwrap();
        assert_eq!(f.s, vec![1.0, 1.0, 1.0]);
        let f = svd(&Mat::diag(&[1.0, 3.0, 2.0])).unwrap();
        assert_eq!(f.s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(r, c) in &[(8, 8), (5, 9), (12, 3), (1, 4), (4, 1)] {
            let m = Mat::randn(r, c, &mut rng);
            let f = svd(&m).unwrap();
            assert!(f.reconstruct().rel_diff(&m) < 1e-12);
            assert!(orthonormality_err(&f.u) < 1e-12);
            assert!(orthonormality_err(&f.v) < 1e-12);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_completes_basis() {
        let u = Mat::column(&[1.0, 2.0, -1.0, 0.5]);
        let v = Mat::column(&[0.3, -1.0, 2.0, 1.0]);
        let m = u.matmul_t(&v).unwrap();
        let f = svd(&m).unwrap();
        assert!(f.s[1] < 1e-12 * f.s[0]);
        assert!(orthonormality_err(&f.u) < 1e-12);
        assert!(orthonormality_err(&f.v) < 1e-12);
        assert!(f.reconstruct().rel_diff(&m) < 1e-12);

        let z = svd(&Mat::zeros(3, 2)).unwrap();
        assert_eq!(z.s, vec![0.0, 0.0]);
        assert!(orthonormality_err(&z.u) < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Mat::identity(2);
        m[(0, 1)] = f64::INFINITY;
        assert!(svd(&m).is_err());
        assert!(matches!(svd(&Mat::zeros(0, 3)), Err(Error::Empty)));
    }

    #[test]
    fn eigen_of_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Mat::randn(6, 4, &mut rng);
        let a = b.matmul_t(&b).unwrap();
        let (q, l) = psd_eigen(&a).unwrap();
        let ql = Mat::from_fn(6, 6, |i, j| q[(i, j)] * l[j]);
        assert!(ql.matmul_t(&q).unwrap().rel_diff(&a) < 1e-12);
    }
}
