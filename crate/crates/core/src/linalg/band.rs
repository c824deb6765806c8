use super::Scalar;
use crate::error::{Error, Result};

/// Square band matrix stored row-wise: row `i` keeps columns `i - kl ..= i + ku`.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![T::default(); n * (kl + ku + 1)],
        }
    }

    /// Builds the matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut kl = 0;
        let mut ku = 0;
        for &(i, j, _) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.ku {
            return T::default();
        }
        self.data[i * self.width() + j + self.kl - i]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = T::default();
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                s += self.get(i, j) * *xj;
            }
            *yi = s;
        }
        y
    }

    /// Cholesky factorization `A = L L^H` of a Hermitian positive definite
    /// matrix. Only the lower band is read.
    pub fn cholesky(&self) -> Result<BandCholesky<T>> {
        BandCholesky::factor(self)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<BandLu<T>> {
        BandLu::factor(self)
    }
}

/// Banded Cholesky factor; row `i` of `L` keeps columns `i - bw ..= i`.
#[derive(Clone, Debug)]
pub struct BandCholesky<T> {
    n: usize,
    bw: usize,
    l: Vec<T>,
}

impl<T: Scalar> BandCholesky<T> {
    fn factor(a: &BandMatrix<T>) -> Result<Self> {
        let n = a.n;
        let bw = a.kl;
        let w = bw + 1;
        let mut l = vec![T::default(); n * w];
        // l[i*w + (j + bw - i)] = L[i][j]
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = a.get(i, j);
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= l[ri + k] * l[rj + k].conj();
                }
                if i == j {
                    let d = s.re();
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::Numerical(format!(
                            "band Cholesky: non-positive pivot {d:e} at row {i}"
                        )));
                    }
                    l[ri + i] = T::from_real(d.sqrt());
                } else {
                    let djj = l[rj + j].re();
                    l[ri + j] = s.scale(1.0 / djj);
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        assert_eq!(b.len(), n);
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[ri + k] * b[k];
            }
            b[i] = s.scale(1.0 / self.l[ri + i].re());
        }
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                let rk = k * w + bw - k;
                s -= self.l[rk + i].conj() * b[k];
            }
            b[i] = s.scale(1.0 / self.l[ri + i].re());
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Banded LU with partial pivoting, in the elementary-transform layout:
/// pivots are applied column by column, so multipliers never move.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    /// upper bandwidth of `U` after fill-in (`kl + ku`)
    ku: usize,
    /// row `i` keeps columns `i - kl ..= i + kl + ku`
    a: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    fn factor(m: &BandMatrix<T>) -> Result<Self> {
        let n = m.n;
        let kl = m.kl;
        let ku = m.kl + m.ku;
        let w = kl + ku + 1;
        let mut a = vec![T::default(); n * w];
        for i in 0..n {
            let lo = i.saturating_sub(m.kl);
            let hi = (i + m.ku).min(n - 1);
            for j in lo..=hi {
                a[i * w + j + kl - i] = m.get(i, j);
            }
        }
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        let mut piv = vec![0; n];
        let scale = a.iter().map(|v| v.abs_sqr()).fold(0.0, f64::max).sqrt();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[idx(k, k)].abs_sqr();
            for r in k + 1..=last {
                let v = a[idx(r, k)].abs_sqr();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best.sqrt() <= 1e-300_f64.max(scale * f64::EPSILON * 1e-6) {
                return Err(Error::Numerical(format!(
                    "band LU: singular pivot at column {k}"
                )));
            }
            piv[k] = p;
            let cmax = (k + ku).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    a.swap(idx(k, c), idx(p, c));
                }
            }
            let pivot = a[idx(k, k)];
            for r in k + 1..=last {
                let f = a[idx(r, k)] / pivot;
                if f == T::default() {
                    continue;
                }
                a[idx(r, k)] = f;
                for c in k + 1..=cmax {
                    let u = a[idx(k, c)];
                    a[idx(r, c)] -= f * u;
                }
            }
        }
        Ok(Self { n, kl, ku, a, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.a[idx(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + ku).min(n - 1) {
                s -= self.a[idx(k, c)] * b[c];
            }
            b[k] = s / self.a[idx(k, k)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual<T: Scalar>(m: &BandMatrix<T>, x: &[T], b: &[T]) -> f64 {
        let ax = m.matvec(x);
        ax.iter()
            .zip(b)
            .map(|(p, q)| (*p - *q).abs_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn cholesky_solves_complex_hermitian_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n: usize = 40;
        let bw = 5;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, Complex64::new(12.0, 0.0)));
            for j in i.saturating_sub(bw)..i {
                let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                trip.push((i, j, v));
                trip.push((j, i, v.conj()));
            }
        }
        let m = BandMatrix::from_triplets(n, &trip);
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = m.cholesky().unwrap().solve(&b);
        assert!(residual(&m, &x, &b) < 1e-12);
    }

    #[test]
    fn lu_handles_zero_diagonal() {
        // needs pivoting: [[0, 1], [1, 0]] blocks along the diagonal
        let n = 30;
        let mut trip = Vec::new();
        for i in (0..n).step_by(2) {
            trip.push((i, i + 1, 1.0));
            trip.push((i + 1, i, 1.0));
            trip.push((i + 1, i + 1, 0.5));
            if i + 2 < n {
                trip.push((i, i + 2, 0.25));
            }
        }
        let m = BandMatrix::from_triplets(n, &trip);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = m.lu().unwrap().solve(&b);
        assert!(residual(&m, &x, &b) < 1e-12);
    }

    #[test]
    fn lu_random_nonsymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n: usize = 60;
        let mut trip = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(4)..(i + 7).min(n) {
                trip.push((i, j, rng.random::<f64>() - 0.5));
            }
        }
        let m = BandMatrix::from_triplets(n, &trip);
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = m.lu().unwrap().solve(&b);
        assert!(residual(&m, &x, &b) < 1e-9, "{}", residual(&m, &x, &b));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = BandMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(m.cholesky().is_err());
    }
}
