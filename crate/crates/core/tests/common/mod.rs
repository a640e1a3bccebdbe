//! Shared oracles for integration tests: dense symmetric eigensolve (Jacobi
//! rotations) and dense LU inverse iteration for nonsymmetric principal
//! eigenvalues. Deliberately independent of the banded production solvers.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        assert!(sweep < 99, "jacobi did not converge, off = {off}");
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Dense LU with partial pivoting; returns (LU, pivots).
pub struct DenseLu {
    lu: Vec<Vec<f64>>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn new(a: &[Vec<f64>]) -> Option<DenseLu> {
        let n = a.len();
        let mut lu: Vec<Vec<f64>> = a.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut p, mut best) = (k, lu[k][k].abs());
            for i in k + 1..n {
                if lu[i][k].abs() > best {
                    best = lu[i][k].abs();
                    p = i;
                }
            }
            if best < 1e-300 {
                return None;
            }
            lu.swap(k, p);
            piv.swap(k, p);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                for j in k + 1..n {
                    lu[i][j] -= f * lu[k][j];
                }
            }
        }
        Some(DenseLu { lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let upd = self.lu[i][j] * x[j];
                x[i] -= upd;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let upd = self.lu[i][j] * x[j];
                x[i] -= upd;
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

/// Principal (smallest-real, positive-eigenvector) eigenvalue of a dense
/// matrix whose off-diagonal entries are all <= 0, by inverse iteration from
/// a Gershgorin shift. Oracle for the coupled two-species linearization.
pub fn dense_principal_eigenvalue(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut tau = f64::INFINITY;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i][j].abs()).sum();
        tau = tau.min(a[i][i] - off);
    }
    tau -= 1.0;
    let mut shifted: Vec<Vec<f64>> = a.to_vec();
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= tau;
    }
    let lu = DenseLu::new(&shifted).expect("Gershgorin-shifted matrix is nonsingular");
    let mut v = vec![1.0; n];
    let mut mu_old = 0.0;
    for it in 0..50_000 {
        let w = lu.solve(&v);
        let norm = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let mu: f64 = v.iter().zip(&w).map(|(&a, &b)| a * b).sum::<f64>()
            / v.iter().map(|&a| a * a).sum::<f64>();
        v = w.iter().map(|&x| x / norm).collect();
        if (mu - mu_old).abs() < 1e-14 * mu.abs().max(1.0) && it > 3 {
            return tau + 1.0 / mu;
        }
        mu_old = mu;
    }
    tau + 1.0 / mu_old
}
