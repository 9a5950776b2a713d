//! Symmetric positive definite band matrices and their Cholesky factor,
//! optionally bordered by a few dense rows for hub nodes.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    // row i holds columns i - bw ..= i, diagonal last
    data: Vec<f64>,
}

/// A zero or relatively negligible pivot was hit at this row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NotPositiveDefinite(pub usize);

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: alloc::vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + self.bw - (i - j)
    }

    /// Adds `v` at `(i, j)`. Entries above the diagonal are ignored: callers
    /// stamp symmetric pairs.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j <= i {
            debug_assert!(i - j <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
            let k = self.idx(i, j);
            self.data[k] += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn copy_from(&mut self, other: &BandMatrix) {
        self.data.copy_from_slice(&other.data);
    }

    /// `y = A x` using the symmetric band.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    /// In-place Cholesky factorization `A = L L^T`.
    pub fn factor(mut self) -> Result<Cholesky, NotPositiveDefinite> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = self.data[self.idx(i, j)];
                let ri = self.idx(i, klo);
                let rj = self.idx(j, klo);
                for k in 0..(j - klo) {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                let at = self.idx(i, j);
                if i == j {
                    let scale = self.data[at].abs();
                    if !(s > 0.0 && s > 1e-12 * scale) {
                        return Err(NotPositiveDefinite(i));
                    }
                    self.data[at] = libm::sqrt(s);
                } else {
                    self.data[at] = s / self.data[self.idx(j, j)];
                }
            }
        }
        Ok(Cholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    l: BandMatrix,
}

impl Cholesky {
    /// Gives the storage back for reuse; the contents are the factor.
    pub fn into_storage(self) -> BandMatrix {
        self.l
    }

    #[cfg(test)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    /// `b <- L^-1 b`
    fn forward(&self, b: &mut [f64]) {
        let l = &self.l;
        let bw = l.bw;
        for i in 0..l.n {
            let lo = i.saturating_sub(bw);
            let row = l.idx(i, lo);
            let mut s = b[i];
            for (k, bk) in b[lo..i].iter().enumerate() {
                s -= l.data[row + k] * bk;
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }

    /// `b <- L^-T b`
    fn backward(&self, b: &mut [f64]) {
        let l = &self.l;
        let bw = l.bw;
        for i in (0..l.n).rev() {
            let hi = (i + bw).min(l.n.saturating_sub(1));
            let mut s = b[i];
            for (k, bk) in b.iter().enumerate().take(hi + 1).skip(i + 1) {
                s -= l.data[l.idx(k, i)] * bk;
            }
            b[i] = s / l.data[l.idx(i, i)];
        }
    }
}

/// Band matrix over the first `n - h` unknowns plus `h` dense border rows.
/// Factoring eliminates the band first and then the small Schur complement
/// of the border.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SystemMatrix {
    band: BandMatrix,
    // border row r is global row band.n + r, columns 0 ..= band.n + r
    border: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct SystemFactor {
    band: Cholesky,
    // w[r] = L^-1 (band part of border row r)
    w: Vec<Vec<f64>>,
    // Cholesky factor of the border Schur complement, lower rows
    schur: Vec<Vec<f64>>,
    // original border rows, kept so the storage can be handed back
    border: Vec<Vec<f64>>,
}

impl SystemMatrix {
    pub fn zeros(n: usize, bw: usize, border: usize) -> Self {
        let interior = n - border;
        SystemMatrix {
            band: BandMatrix::zeros(interior, bw),
            border: (0..border)
                .map(|r| alloc::vec![0.0; interior + r + 1])
                .collect(),
        }
    }

    fn interior(&self) -> usize {
        self.band.n
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are ignored.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j > i {
            return;
        }
        let ni = self.interior();
        if i < ni {
            self.band.add(i, j, v);
        } else {
            self.border[i - ni][j] += v;
        }
    }

    pub fn copy_from(&mut self, other: &SystemMatrix) {
        self.band.copy_from(&other.band);
        for (a, b) in self.border.iter_mut().zip(&other.border) {
            a.copy_from_slice(b);
        }
    }

    /// `y = A x` using the symmetric storage.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let ni = self.interior();
        self.band.mul_vec(&x[..ni], &mut y[..ni]);
        for v in y[ni..].iter_mut() {
            *v = 0.0;
        }
        for (r, row) in self.border.iter().enumerate() {
            let i = ni + r;
            for (j, &a) in row.iter().enumerate() {
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
    }

    pub fn factor(self) -> Result<SystemFactor, NotPositiveDefinite> {
        let ni = self.interior();
        let band = self.band.factor()?;
        let h = self.border.len();
        let mut w: Vec<Vec<f64>> = Vec::with_capacity(h);
        for row in &self.border {
            let mut col = row[..ni].to_vec();
            band.forward(&mut col);
            w.push(col);
        }
        let mut schur: Vec<Vec<f64>> = Vec::with_capacity(h);
        for r in 0..h {
            let mut lrow = alloc::vec![0.0; r + 1];
            for q in 0..=r {
                let mut s = self.border[r][ni + q] - dot(&w[r], &w[q]);
                let prev: &[f64] = if q == r { &lrow } else { &schur[q] };
                s -= dot(&lrow[..q], &prev[..q]);
                if q == r {
                    let scale = self.border[r][ni + r].abs();
                    if !(s > 0.0 && s > 1e-12 * scale) {
                        return Err(NotPositiveDefinite(ni + r));
                    }
                    lrow[q] = libm::sqrt(s);
                } else {
                    lrow[q] = s / schur[q][q];
                }
            }
            schur.push(lrow);
        }
        Ok(SystemFactor {
            band,
            w,
            schur,
            border: self.border,
        })
    }
}

impl SystemFactor {
    /// Gives the storage back for reuse; the contents are stale.
    pub fn into_storage(self) -> SystemMatrix {
        SystemMatrix {
            band: self.band.into_storage(),
            border: self.border,
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let ni = b.len() - self.w.len();
        let (b1, b2) = b.split_at_mut(ni);
        self.band.forward(b1);
        let h = self.w.len();
        for r in 0..h {
            let mut s = b2[r] - dot(&self.w[r], b1);
            for k in 0..r {
                s -= self.schur[r][k] * b2[k];
            }
            b2[r] = s / self.schur[r][r];
        }
        for r in (0..h).rev() {
            let mut s = b2[r];
            for k in r + 1..h {
                s -= self.schur[k][r] * b2[k];
            }
            b2[r] = s / self.schur[r][r];
        }
        for (r, wr) in self.w.iter().enumerate() {
            let x = b2[r];
            for (bi, wi) in b1.iter_mut().zip(wr) {
                *bi -= wi * x;
            }
        }
        self.band.backward(b1);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let mut a = BandMatrix::zeros(3, 1);
        for i in 0..3 {
            a.add(i, i, 2.0);
        }
        a.add(1, 0, -1.0);
        a.add(2, 1, -1.0);
        let f = a.factor().unwrap();
        let mut b = [1.0, 0.0, 1.0];
        f.solve_in_place(&mut b);
        for x in b {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_on_wider_band() {
        let n = 7;
        let bw = 3;
        let mut a = BandMatrix::zeros(n, bw);
        let mut dense = alloc::vec![alloc::vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                let v = if i == j {
                    10.0 + i as f64
                } else {
                    -1.0 / (1.0 + (i + j) as f64)
                };
                a.add(i, j, v);
                dense[i][j] = v;
                dense[j][i] = v;
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.5).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum())
            .collect();
        let mut y = alloc::vec![0.0; n];
        a.mul_vec(&x_true, &mut y);
        for i in 0..n {
            assert!((y[i] - b[i]).abs() < 1e-12);
        }
        a.factor().unwrap().solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn bordered_matches_dense() {
        // chain of 8 plus two hubs tied to every chain node
        let n = 10;
        let mut a = SystemMatrix::zeros(n, 1, 2);
        let mut dense = alloc::vec![alloc::vec![0.0; n]; n];
        let mut put = |a: &mut SystemMatrix, i: usize, j: usize, v: f64| {
            a.add(i.max(j), i.min(j), v);
            dense[i][j] += v;
            if i != j {
                dense[j][i] += v;
            }
        };
        for i in 0..n {
            put(&mut a, i, i, 20.0 + i as f64);
        }
        for i in 1..8 {
            put(&mut a, i, i - 1, -1.0);
        }
        for i in 0..8 {
            put(&mut a, 8, i, -0.5);
            put(&mut a, 9, i, -0.25 * (i % 3) as f64);
        }
        put(&mut a, 9, 8, -2.0);
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| dense[i][j] * x_true[j]).sum())
            .collect();
        let mut y = alloc::vec![0.0; n];
        a.mul_vec(&x_true, &mut y);
        for i in 0..n {
            assert!((y[i] - b[i]).abs() < 1e-12);
        }
        a.factor().unwrap().solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-12, "{i}: {}", b[i]);
        }
    }

    #[test]
    fn reports_zero_pivot() {
        let mut a = BandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        assert_eq!(a.factor().err(), Some(NotPositiveDefinite(1)));
    }
}
