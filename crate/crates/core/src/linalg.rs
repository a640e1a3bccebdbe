//! Direct solvers for the small banded systems produced by 1-D discretizations:
//! tridiagonal LU (Thomas), general banded LU with partial pivoting for the
//! interleaved two-species systems, and a bordered solve for arclength
//! continuation.

/// A factorization hit a zero or unusably small pivot.
#[derive(Clone, Copy, Debug)]
pub struct Singular {
    pub pivot: usize,
}

#[derive(Clone, Debug)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        Tridiag {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let mut s = self.diag[i];
        if i > 0 {
            s += self.sub[i];
        }
        if i + 1 < self.n() {
            s += self.sup[i];
        }
        s
    }

    /// Thomas LU without pivoting. Pivots are monitored relative to the matrix
    /// scale; callers treat failure as "shift was not large enough" and retry.
    pub fn factor(&self) -> Result<TridiagFactor, Singular> {
        let n = self.n();
        let mut scale = 0.0f64;
        for i in 0..n {
            scale = scale
                .max(self.diag[i].abs())
                .max(self.sub[i].abs())
                .max(self.sup[i].abs());
        }
        let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n];
        let mut d = self.diag.clone();
        for i in 1..n {
            if d[i - 1].abs() <= floor {
                return Err(Singular { pivot: i - 1 });
            }
            let w = self.sub[i] / d[i - 1];
            l[i] = w;
            d[i] -= w * self.sup[i - 1];
        }
        if d[n - 1].abs() <= floor {
            return Err(Singular { pivot: n - 1 });
        }
        Ok(TridiagFactor {
            l,
            d,
            sup: self.sup.clone(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TridiagFactor {
    l: Vec<f64>,
    d: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagFactor {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        for i in 1..n {
            b[i] -= self.l[i] * b[i - 1];
        }
        b[n - 1] /= self.d[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.sup[i] * b[i + 1]) / self.d[i];
        }
    }
}

/// Solve the bordered system
/// ```text
///   [ T  c ] [x]   [f]
///   [ rᵀ d ] [y] = [g]
/// ```
/// by block elimination with an already-factored `T`.
pub fn solve_bordered(
    t: &TridiagFactor,
    col: &[f64],
    row: &[f64],
    corner: f64,
    f: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64), Singular> {
    let z1 = t.solve(f);
    let z2 = t.solve(col);
    let denom = corner - crate::util::dot(row, &z2);
    let scale = corner.abs().max(crate::util::linf(row)).max(1e-300);
    if !denom.is_finite() || denom.abs() <= 1e-14 * scale {
        return Err(Singular { pivot: t.n() });
    }
    let y = (g - crate::util::dot(row, &z1)) / denom;
    let mut x = z1;
    for (xi, z) in x.iter_mut().zip(&z2) {
        *xi -= y * z;
    }
    if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Singular { pivot: t.n() });
    }
    Ok((x, y))
}

/// Banded matrix with `kl` sub- and `ku` superdiagonals, stored LAPACK-style
/// with `kl` extra rows for pivoting fill. Entry (i, j) lives at band row
/// `kl + ku + i - j`.
#[derive(Clone, Debug)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Banded {
            n,
            kl,
            ku,
            ab: vec![0.0; (2 * kl + ku + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && j + self.kl >= i);
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    fn col_range(&self, i: usize) -> (usize, usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        (lo, hi)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (lo, hi) = self.col_range(i);
            let mut v = 0.0;
            for j in lo..=hi {
                v += self.get(i, j) * x[j];
            }
            y[i] = v;
        }
        y
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let (lo, hi) = self.col_range(i);
        (lo..=hi).map(|j| self.get(i, j)).sum()
    }

    /// LU with row partial pivoting (unblocked gbtrf).
    pub fn factor(mut self) -> Result<BandedFactor, Singular> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let scale = self.ab.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut pivots = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut amax = self.get(j, j).abs();
            for p in 1..=km {
                let a = self.get(j + p, j).abs();
                if a > amax {
                    amax = a;
                    jp = p;
                }
            }
            pivots[j] = j + jp;
            if amax <= floor {
                return Err(Singular { pivot: j });
            }
            ju = ju.max((j + ku + kl).min(n - 1));
            if jp != 0 {
                for q in j..=ju {
                    let a = self.get(j, q);
                    let b = self.get(j + jp, q);
                    self.set(j, q, b);
                    self.set(j + jp, q, a);
                }
            }
            let piv = self.get(j, j);
            for p in 1..=km {
                let l = self.get(j + p, j) / piv;
                self.set(j + p, j, l);
                for q in (j + 1)..=ju {
                    let v = self.get(j + p, q) - l * self.get(j, q);
                    self.set(j + p, q, v);
                }
            }
        }
        Ok(BandedFactor { mat: self, pivots })
    }
}

#[derive(Clone, Debug)]
pub struct BandedFactor {
    mat: Banded,
    pivots: Vec<usize>,
}

impl BandedFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        let (kl, ku) = (self.mat.kl, self.mat.ku);
        debug_assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            let pj = self.pivots[j];
            if pj != j {
                x.swap(j, pj);
            }
            let km = kl.min(n - 1 - j);
            for p in 1..=km {
                x[j + p] -= self.mat.get(j + p, j) * x[j];
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.mat.get(j, j);
            let lo = j.saturating_sub(ku + kl);
            for i in lo..j {
                x[i] -= self.mat.get(i, j) * x[j];
            }
        }
        x
    }
}
