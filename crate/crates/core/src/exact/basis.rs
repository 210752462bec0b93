//! Fixed-magnetization bases and the matrix-free XX sector Hamiltonian.

use std::ops::{AddAssign, Mul};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::XxModel;

/// Amplitude types the sector Hamiltonian can act on.
pub trait Amplitude: Copy + Default + AddAssign + Mul<f64, Output = Self> + Send + Sync {}
impl Amplitude for f64 {}
impl Amplitude for Complex64 {}

/// Colex rank of a bitmask among all masks with the same popcount, evaluated
/// with two table lookups (low and high halves of the mask).
#[derive(Debug)]
pub struct Ranker {
    low_bits: u32,
    low: Vec<u32>,
    /// `high[h * (low_bits + 1) + c]`: contribution of the high half `h` when
    /// the low half holds `c` set bits.
    high: Vec<u32>,
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

impl Ranker {
    pub fn new(n_sites: usize) -> Self {
        let low_bits = (n_sites as u32 + 1) / 2;
        let high_bits = n_sites as u32 - low_bits;
        let mut low = vec![0u32; 1 << low_bits];
        for (mask, slot) in low.iter_mut().enumerate() {
            let mut t = 0u64;
            let mut acc = 0u64;
            for p in 0..low_bits {
                if mask >> p & 1 == 1 {
                    t += 1;
                    acc += binomial(p as u64, t);
                }
            }
            *slot = acc as u32;
        }
        let stride = low_bits as usize + 1;
        let mut high = vec![0u32; (1usize << high_bits) * stride];
        for h in 0..1usize << high_bits {
            for c in 0..stride {
                let mut t = c as u64;
                let mut acc = 0u64;
                for p in 0..high_bits {
                    if h >> p & 1 == 1 {
                        t += 1;
                        acc += binomial((p + low_bits) as u64, t);
                    }
                }
                high[h * stride + c] = acc as u32;
            }
        }
        Ranker { low_bits, low, high }
    }

    #[inline]
    pub fn rank(&self, s: u32) -> usize {
        let lo = s & ((1 << self.low_bits) - 1);
        let hi = (s >> self.low_bits) as usize;
        let c = lo.count_ones() as usize;
        (self.low[lo as usize] + self.high[hi * (self.low_bits as usize + 1) + c]) as usize
    }
}

/// All `n_up`-bit masks of width `n_sites`, ascending (= colex order).
pub fn sector_states(n_sites: usize, n_up: usize) -> Vec<u32> {
    let dim = binomial(n_sites as u64, n_up as u64) as usize;
    let mut out = Vec::with_capacity(dim);
    if n_up == 0 {
        out.push(0);
        return out;
    }
    let limit: u64 = 1 << n_sites;
    let mut s: u64 = (1 << n_up) - 1;
    while s < limit {
        out.push(s as u32);
        // Gosper's hack: next mask with the same popcount.
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
    out
}

/// Basis of the full `2^N` space organized by `J^z` sector (index = up count).
#[derive(Debug)]
pub struct SpinSpace {
    n_sites: usize,
    ranker: Arc<Ranker>,
    bases: Vec<Arc<Vec<u32>>>,
}

impl SpinSpace {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || n_sites > 30 {
            return Err(Error::SizeCap { n: n_sites, cap: 30 });
        }
        Ok(SpinSpace {
            n_sites,
            ranker: Arc::new(Ranker::new(n_sites)),
            bases: (0..=n_sites).map(|k| Arc::new(sector_states(n_sites, k))).collect(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn basis(&self, n_up: usize) -> &[u32] {
        &self.bases[n_up]
    }

    pub fn sector_dim(&self, n_up: usize) -> usize {
        self.bases[n_up].len()
    }

    #[inline]
    pub fn rank(&self, s: u32) -> usize {
        self.ranker.rank(s)
    }

    pub fn full_mask(&self) -> u32 {
        if self.n_sites == 32 {
            u32::MAX
        } else {
            (1u32 << self.n_sites) - 1
        }
    }
}

/// Fixed-`J^z` block of the XX Hamiltonian. Bit `i` set means spin `i` is up.
#[derive(Clone, Debug)]
pub struct SectorBlock {
    n_sites: usize,
    n_up: usize,
    basis: Arc<Vec<u32>>,
    ranker: Arc<Ranker>,
    exchange: Arc<Vec<f64>>,
}

impl SectorBlock {
    pub fn new(space: &SpinSpace, n_up: usize, exchange: Arc<Vec<f64>>) -> Self {
        SectorBlock {
            n_sites: space.n_sites,
            n_up,
            basis: space.bases[n_up].clone(),
            ranker: space.ranker.clone(),
            exchange,
        }
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    /// `J^z` eigenvalue `M`.
    pub fn m(&self) -> f64 {
        self.n_up as f64 - self.n_sites as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[u32] {
        &self.basis
    }

    pub fn ranker(&self) -> &Ranker {
        &self.ranker
    }

    #[inline]
    pub fn index_of(&self, s: u32) -> usize {
        self.ranker.rank(s)
    }

    /// `out = H v`.
    pub fn apply<T: Amplitude>(&self, v: &[T], out: &mut [T]) {
        let n = self.n_sites;
        let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let ex = &self.exchange[..];
        for (a, &s) in self.basis.iter().enumerate() {
            let mut acc = T::default();
            let mut ups = s;
            while ups != 0 {
                let i = ups.trailing_zeros() as usize;
                ups &= ups - 1;
                let row = &ex[i * n..(i + 1) * n];
                let mut downs = !s & full;
                while downs != 0 {
                    let j = downs.trailing_zeros() as usize;
                    downs &= downs - 1;
                    let t = s ^ (1 << i) ^ (1 << j);
                    acc += v[self.ranker.rank(t)] * row[j];
                }
            }
            out[a] = acc;
        }
    }

    /// Number of stored off-diagonal entries, `dim · n_up · (N - n_up)`.
    pub fn nnz(&self) -> usize {
        self.dim() * self.n_up * (self.n_sites - self.n_up)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for c in 0..d {
            e[c] = 1.0;
            self.apply(&e, &mut col);
            e[c] = 0.0;
            for r in 0..d {
                m[(r, c)] = col[r];
            }
        }
        m
    }
}

/// Sector block for `J^z = m`.
pub fn build_sector(model: &XxModel, m: f64) -> Result<SectorBlock> {
    let n = model.n_sites();
    let n_up = m + n as f64 / 2.0;
    if n_up < -1e-9 || n_up > n as f64 + 1e-9 || (n_up - n_up.round()).abs() > 1e-9 {
        return Err(Error::Domain(format!("M = {m} is not a valid sector for N = {n}")));
    }
    if n > 30 {
        return Err(Error::SizeCap { n, cap: 30 });
    }
    let n_up = n_up.round() as usize;
    let ranker = Arc::new(Ranker::new(n));
    Ok(SectorBlock {
        n_sites: n,
        n_up,
        basis: Arc::new(sector_states(n, n_up)),
        ranker,
        exchange: Arc::new(model.exchange_table()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Geometry, LatticeSpec};
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    #[test]
    fn ranks_are_dense_and_ordered() {
        for n in [1usize, 4, 7, 10] {
            let r = Ranker::new(n);
            for k in 0..=n {
                let states = sector_states(n, k);
                assert_eq!(states.len() as u64, binomial(n as u64, k as u64));
                for (idx, &s) in states.iter().enumerate() {
                    assert_eq!(s.count_ones() as usize, k);
                    assert_eq!(r.rank(s), idx);
                }
            }
        }
    }

    #[test]
    fn two_spin_blocks() {
        let m0 = XxModel::new(&LatticeSpec::rectangular(Geometry::Square, 2, 1, 0.0)).unwrap();
        let b = build_sector(&m0, 0.0).unwrap();
        let h = b.to_dense();
        assert_relative_eq!(h[(0, 1)], -0.25);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -0.25, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 0.25, epsilon = 1e-14);

        let m3 = XxModel::new(&LatticeSpec::rectangular(Geometry::Square, 2, 1, 3.0)).unwrap();
        let h = build_sector(&m3, 0.0).unwrap().to_dense();
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -0.5, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn sector_range_checked() {
        let m = XxModel::new(&LatticeSpec::square(2, 3.0)).unwrap();
        assert!(build_sector(&m, 2.0).is_ok());
        assert!(build_sector(&m, 2.5).is_err());
        assert!(build_sector(&m, 3.0).is_err());
    }

    #[test]
    fn blocks_are_symmetric() {
        let m = XxModel::new(&LatticeSpec::square(3, 3.0)).unwrap();
        let h = build_sector(&m, 0.5).unwrap().to_dense();
        assert!((&h - h.transpose()).norm() < 1e-14);
    }
}
