//! Band storage with fixed half-bandwidth, partial-pivoting band LU and a
//! 1-norm condition estimate from the factors.

use nalgebra::DMatrix;

pub const HALF_BANDWIDTH: usize = 10;

/// Square matrix with `a[i][j] = 0` whenever `|i − j| > 10`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedSystem {
    n: usize,
    data: Vec<f64>,
    pub symmetric: bool,
}

const KD: usize = HALF_BANDWIDTH;
const LD: usize = 2 * KD + 1;

impl BandedSystem {
    pub fn zeros(n: usize) -> Self {
        BandedSystem { n, data: vec![0.0; n * LD], symmetric: true }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Band part of a dense matrix; panics if anything lies outside the band.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) <= KD {
                    m.set(i, j, a[(i, j)]);
                } else {
                    assert_eq!(a[(i, j)], 0.0, "entry ({i},{j}) outside the band");
                }
            }
        }
        m.symmetric = (0..n).all(|i| (0..n).all(|j| a[(i, j)] == a[(j, i)]));
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        KD
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        j * LD + KD + i - j
    }

    #[inline]
    pub fn in_band(i: usize, j: usize) -> bool {
        i.abs_diff(j) <= KD
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if Self::in_band(i, j) {
            self.data[Self::idx(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(Self::in_band(i, j), "({i},{j}) outside the band");
        self.data[Self::idx(i, j)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(Self::in_band(i, j), "({i},{j}) outside the band");
        self.data[Self::idx(i, j)] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn add_diagonal(&mut self, lambda: f64) {
        for i in 0..self.n {
            self.add(i, i, lambda);
        }
    }

    /// `self ← α·self + β·other`.
    pub fn axpby(&mut self, alpha: f64, beta: f64, other: &BandedSystem) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = alpha * *a + beta * b;
        }
        self.symmetric &= other.symmetric;
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|a| *a *= alpha);
    }

    /// `D·A·D` for diagonal `D = diag(s)`.
    pub fn scale_symmetric(&mut self, s: &[f64]) {
        for j in 0..self.n {
            for i in j.saturating_sub(KD)..(j + KD + 1).min(self.n) {
                self.data[Self::idx(i, j)] *= s[i] * s[j];
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for i in j.saturating_sub(KD)..(j + KD + 1).min(self.n) {
                y[i] += self.data[Self::idx(i, j)] * x[j];
            }
        }
        y
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (j.saturating_sub(KD)..(j + KD + 1).min(self.n)).map(|i| self.data[Self::idx(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for i in j + 1..(j + KD + 1).min(self.n) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn factor(&self) -> BandedLu {
        BandedLu::new(self)
    }
}

/// LU factors with partial pivoting in band form (fill-in widens `U` to `2·kd`).
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    singular: bool,
}

const KL: usize = KD;
const KV: usize = 2 * KD;
const LDLU: usize = 3 * KD + 1;

impl BandedLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * LDLU + KV + i - j]
    }

    fn new(a: &BandedSystem) -> Self {
        let n = a.n;
        let mut ab = vec![0.0; n * LDLU];
        for j in 0..n {
            for i in j.saturating_sub(KD)..(j + KD + 1).min(n) {
                ab[j * LDLU + KV + i - j] = a.get(i, j);
            }
        }
        let ix = |i: usize, j: usize| j * LDLU + KV + i - j;
        let mut ipiv = vec![0; n];
        let mut singular = false;
        let mut ju = 0usize;
        for j in 0..n {
            let km = KL.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[ix(j, j)].abs();
            for r in 1..=km {
                let v = ab[ix(j + r, j)].abs();
                if v > best {
                    best = v;
                    jp = r;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                singular = true;
                continue;
            }
            ju = ju.max((j + KD + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(ix(j, c), ix(j + jp, c));
                }
            }
            let piv = ab[ix(j, j)];
            for r in 1..=km {
                ab[ix(j + r, j)] /= piv;
            }
            for c in j + 1..=ju {
                let u = ab[ix(j, c)];
                if u != 0.0 {
                    for r in 1..=km {
                        ab[ix(j + r, c)] -= ab[ix(j + r, j)] * u;
                    }
                }
            }
        }
        BandedLu { n, ab, ipiv, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            for r in j + 1..(j + KL + 1).min(n) {
                b[r] -= self.at(r, j) * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            for r in j.saturating_sub(KV)..j {
                b[r] -= self.at(r, j) * bj;
            }
        }
    }

    /// Solves `Aᵀ x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let mut s = b[j];
            for r in j.saturating_sub(KV)..j {
                s -= self.at(r, j) * b[r];
            }
            b[j] = s / self.at(j, j);
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let mut s = b[j];
            for r in j + 1..(j + KL + 1).min(n) {
                s -= self.at(r, j) * b[r];
            }
            b[j] = s;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    /// Estimate of `‖A⁻¹‖₁` (Hager's method with Higham's safeguard).
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if self.singular {
            return f64::INFINITY;
        }
        let norm1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let mut x = vec![1.0 / n as f64; n];
        self.solve(&mut x);
        let mut est = norm1(&x);
        if n > 1 {
            let mut last_j = usize::MAX;
            for _ in 0..5 {
                let mut z: Vec<f64> = x.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
                self.solve_transpose(&mut z);
                let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |(bj, bv), (i, v)| {
                    if v.abs() > bv {
                        (i, v.abs())
                    } else {
                        (bj, bv)
                    }
                });
                if j == last_j {
                    break;
                }
                last_j = j;
                x = vec![0.0; n];
                x[j] = 1.0;
                self.solve(&mut x);
                let next = norm1(&x);
                if next <= est && zmax > 0.0 {
                    est = est.max(next);
                    break;
                }
                est = next;
            }
            let mut alt: Vec<f64> = (0..n)
                .map(|i| {
                    let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                    s * (1.0 + i as f64 / (n - 1) as f64)
                })
                .collect();
            self.solve(&mut alt);
            est = est.max(2.0 * norm1(&alt) / (3.0 * n as f64));
        }
        if est.is_finite() {
            est
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_banded(n: usize, seed: u64) -> BandedSystem {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = BandedSystem::zeros(n);
        for j in 0..n {
            for i in j.saturating_sub(KD)..(j + KD + 1).min(n) {
                a.set(i, j, next());
            }
        }
        a.symmetric = false;
        a
    }

    #[test]
    fn lu_solves_match_dense() {
        for n in [1, 5, 23, 60] {
            let a = random_banded(n, n as u64);
            let lu = a.factor();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut b = a.matvec(&x);
            lu.solve(&mut b);
            for i in 0..n {
                assert!((b[i] - x[i]).abs() < 1e-9, "n={n}");
            }
            let at = a.to_dense().transpose();
            let mut bt: Vec<f64> = (&at * nalgebra::DVector::from_vec(x.clone())).iter().copied().collect();
            lu.solve_transpose(&mut bt);
            for i in 0..n {
                assert!((bt[i] - x[i]).abs() < 1e-9, "transpose n={n}");
            }
        }
    }

    #[test]
    fn condition_estimate_brackets_true_value() {
        for n in [4, 30, 80] {
            let a = random_banded(n, 7 + n as u64);
            let d = a.to_dense();
            let inv = d.clone().try_inverse().unwrap();
            let true_norm = (0..n).map(|j| inv.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            let est = a.factor().inverse_norm1_estimate();
            assert!(est <= true_norm * (1.0 + 1e-10));
            assert!(est >= true_norm / 10.0, "n={n}: {est} vs {true_norm}");
        }
    }

    #[test]
    fn singular_matrix_is_flagged() {
        let a = BandedSystem::zeros(3);
        assert!(a.factor().is_singular());
        assert_eq!(a.factor().inverse_norm1_estimate(), f64::INFINITY);
    }

    #[test]
    fn out_of_band_reads_are_zero() {
        let a = BandedSystem::identity(30);
        assert_eq!(a.get(0, 11), 0.0);
        assert_eq!(a.get(29, 29), 1.0);
    }
}
