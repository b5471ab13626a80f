//! Dense and banded direct solvers sized for this crate's needs:
//! Cholesky factors for covariance transforms, a cyclic Jacobi
//! eigensolver for PCA, and banded LU with partial pivoting for the
//! beam system (bandwidth 2, so dense factorizations would waste both
//! memory and the spec's "banded elimination" contract).

use ndarray::Array2;

use crate::error::{Error, Result};

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored
/// densely per band so factorization can add `kl` fill super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major `(n, kl + 2*ku + 1)` working band; column `j` of the
    /// matrix maps to working column `i - j + kl + ku` of row `i`...
    /// stored transposed as rows = matrix rows for cache-friendly
    /// elimination. Entry (i, j) valid when |i - j| within bands.
    data: Vec<f64>,
    width: usize,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + kl + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * width],
            width,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let d = j as isize - i as isize + self.kl as isize;
        if d < 0 || d >= self.width as isize {
            return None;
        }
        Some(i * self.width + d as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.offset(i, j) {
            Some(k) => self.data[k],
            None => 0.0,
        }
    }

    /// Sets entry (i, j); the position must lie within the declared
    /// bands (fill columns are reserved for the factorization).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let within = j + self.kl >= i && j <= i + self.ku;
        assert!(
            within,
            "entry ({i}, {j}) outside bands kl={}, ku={}",
            self.kl, self.ku
        );
        let k = self.offset(i, j).expect("within declared bands");
        self.data[k] = v;
    }

    /// Internal setter that may also touch the fill super-diagonals
    /// created by pivoted elimination.
    fn set_fill(&mut self, i: usize, j: usize, v: f64) {
        let k = self.offset(i, j).expect("within storage bands");
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// LU factorization with partial pivoting, in place over the band.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl) = (self.n, self.kl);
        let scale = self
            .data
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![0.0; n * kl];
        let mut min_pivot = f64::INFINITY;
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            for i in k + 1..=last {
                if self.get(i, k).abs() > self.get(p, k).abs() {
                    p = i;
                }
            }
            pivots[k] = p;
            if p != k {
                for j in k..=(k + reach).min(n - 1) {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set_fill(k, j, b);
                    self.set_fill(p, j, a);
                }
            }
            let piv = self.get(k, k);
            if piv.abs() <= scale * 1e-300 {
                return Err(Error::SingularSystem {
                    cond_estimate: scale / piv.abs().max(f64::MIN_POSITIVE),
                });
            }
            min_pivot = min_pivot.min(piv.abs());
            for i in k + 1..=last {
                let l = self.get(i, k) / piv;
                multipliers[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=(k + reach).min(n - 1) {
                        let v = self.get(i, j) - l * self.get(k, j);
                        self.set_fill(i, j, v);
                    }
                }
            }
        }
        Ok(BandedLu {
            upper: self,
            pivots,
            multipliers,
            cond_estimate: scale / min_pivot,
        })
    }
}

/// Factored form of a [`BandedMatrix`]; solves by forward elimination of
/// the stored multipliers followed by banded back-substitution.
#[derive(Debug, Clone)]
pub struct BandedLu {
    upper: BandedMatrix,
    pivots: Vec<usize>,
    multipliers: Vec<f64>,
    cond_estimate: f64,
}

impl BandedLu {
    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.upper.n, self.upper.kl);
        assert_eq!(rhs.len(), n, "right-hand side length");
        let reach = self.upper.kl + self.upper.ku;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                x[i] -= self.multipliers[k * kl + (i - k - 1)] * x[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.upper.get(k, j) * x[j];
            }
            x[k] = s / self.upper.get(k, k);
        }
        x
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite
/// matrix; `L · Lᵀ` reproduces the input to ~1e-12 relative accuracy.
pub fn cholesky_factor(cov: &Array2<f64>) -> Result<Array2<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky_factor".into(),
            expected: n,
            actual: cov.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { pivot: s, index: i });
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations;
/// returns eigenvalues in descending order with matching eigenvector
/// columns. Intended for the small covariance matrices used here.
pub fn jacobi_eigen(mat: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = mat.nrows();
    if mat.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "jacobi_eigen".into(),
            expected: n,
            actual: mat.ncols(),
        });
    }
    let mut a = mat.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    let tol = scale.max(f64::MIN_POSITIVE) * 1e-14;
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).expect("finite"));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    Ok((values, vectors))
}
