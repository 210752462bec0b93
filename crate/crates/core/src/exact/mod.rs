//! Exact evolution in the full `2^N` Hilbert space.
//!
//! The XX Hamiltonian conserves `J^z`, so states are stored sector by sector
//! ([`FullState`]) and each sector is propagated independently with a
//! matrix-free Krylov exponential. Memory is `16 · 2^N` bytes per state
//! (16 MiB at `N = 20`, 256 MiB at `N = 24`).

pub mod basis;
pub mod checkpoint;
pub mod krylov;
pub mod spectrum;

use std::sync::Arc;

use num_complex::Complex64;

use crate::dicke::ghz_phase;
use crate::error::{Error, Result};
use crate::lattice::XxModel;
use crate::observables::{SpinMoments, StateObservables};

pub use basis::{build_sector, SectorBlock, SpinSpace};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
pub use krylov::{KrylovOptions, KrylovStats};
pub use spectrum::{sector_spectrum, tower_spectrum, SectorSpectrum, SpectrumOptions};

/// Largest `N` accepted unless a bigger cap is requested explicitly.
pub const DEFAULT_SIZE_CAP: usize = 20;
/// Hard limit on any requested cap.
pub const MAX_SIZE_CAP: usize = 24;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A state of `N` spins stored as one amplitude vector per `J^z` sector,
/// `sectors[k]` holding the configurations with `k` up spins.
#[derive(Clone, Debug)]
pub struct FullState {
    space: Arc<SpinSpace>,
    sectors: Vec<Vec<Complex64>>,
}

impl FullState {
    pub fn zeros(space: Arc<SpinSpace>) -> Self {
        let sectors = (0..=space.n_sites()).map(|k| vec![ZERO; space.sector_dim(k)]).collect();
        FullState { space, sectors }
    }

    /// Builds a state from amplitudes indexed by bitmask (`2^N` entries).
    pub fn from_dense(space: Arc<SpinSpace>, amps: &[Complex64]) -> Result<Self> {
        let n = space.n_sites();
        if amps.len() != 1usize << n {
            return Err(Error::DimensionMismatch(format!(
                "expected 2^{n} amplitudes, got {}",
                amps.len()
            )));
        }
        let sectors = (0..=n)
            .map(|k| space.basis(k).iter().map(|&s| amps[s as usize]).collect())
            .collect();
        Ok(FullState { space, sectors })
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![ZERO; 1usize << self.n_sites()];
        for (k, sec) in self.sectors.iter().enumerate() {
            for (&s, a) in self.space.basis(k).iter().zip(sec) {
                out[s as usize] = *a;
            }
        }
        out
    }

    pub fn n_sites(&self) -> usize {
        self.space.n_sites()
    }

    pub fn space(&self) -> &Arc<SpinSpace> {
        &self.space
    }

    pub fn sector(&self, n_up: usize) -> &[Complex64] {
        &self.sectors[n_up]
    }

    pub fn sector_mut(&mut self, n_up: usize) -> &mut [Complex64] {
        &mut self.sectors[n_up]
    }

    pub fn sectors(&self) -> &[Vec<Complex64>] {
        &self.sectors
    }

    /// Amplitude of the configuration `s` (bit set = up).
    pub fn amplitude(&self, s: u32) -> Complex64 {
        self.sectors[s.count_ones() as usize][self.space.rank(s)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.sectors.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.sectors.iter_mut().flatten().for_each(|a| *a /= n);
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FullState) -> Result<Complex64> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "states of {} and {} spins",
                self.n_sites(),
                other.n_sites()
            )));
        }
        Ok(self
            .sectors
            .iter()
            .flatten()
            .zip(other.sectors.iter().flatten())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// True when the state is even under the global spin flip `Π_i σ^x_i`.
    pub fn is_flip_symmetric(&self, tol: f64) -> bool {
        let n = self.n_sites();
        let full = self.space.full_mask();
        let scale = self.norm_sqr().sqrt();
        for k in 0..=n / 2 {
            for (a, &s) in self.space.basis(k).iter().enumerate() {
                let b = self.space.rank(!s & full);
                if (self.sectors[k][a] - self.sectors[n - k][b]).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    fn ladder(&self, raise: bool) -> FullState {
        let n = self.n_sites();
        let full = self.space.full_mask();
        let mut out = FullState::zeros(self.space.clone());
        for k in 0..=n {
            let target = if raise { k + 1 } else { k.wrapping_sub(1) };
            if target > n {
                continue;
            }
            let (src, dst) = (&self.sectors[k], &mut out.sectors[target]);
            for (&s, &amp) in self.space.basis(k).iter().zip(src) {
                let mut movable = if raise { !s & full } else { s };
                while movable != 0 {
                    let i = movable.trailing_zeros();
                    movable &= movable - 1;
                    dst[self.space.rank(s ^ (1 << i))] += amp;
                }
            }
        }
        out
    }

    /// `J^+ ψ`.
    pub fn raise(&self) -> FullState {
        self.ladder(true)
    }

    /// `J^- ψ`.
    pub fn lower(&self) -> FullState {
        self.ladder(false)
    }

    /// `(J^x ψ, J^y ψ, J^z ψ)`.
    pub fn apply_spin(&self) -> [FullState; 3] {
        let up = self.raise();
        let dn = self.lower();
        let mut jx = up.clone();
        let mut jy = up;
        for ((x, y), d) in jx
            .sectors
            .iter_mut()
            .flatten()
            .zip(jy.sectors.iter_mut().flatten())
            .zip(dn.sectors.iter().flatten())
        {
            *x = 0.5 * (*x + d);
            *y = (*y - d) / (2.0 * I);
        }
        let mut jz = self.clone();
        let half = self.n_sites() as f64 / 2.0;
        for (k, sec) in jz.sectors.iter_mut().enumerate() {
            let m = k as f64 - half;
            sec.iter_mut().for_each(|a| *a *= m);
        }
        [jx, jy, jz]
    }
}

/// Product state with every spin along `(cos θ, sin θ, 0)`, i.e. `e^{-iθJ^z}|CSS_x>`.
pub fn css_theta_full(space: Arc<SpinSpace>, theta: f64) -> FullState {
    let n = space.n_sites();
    let up = (-I * theta / 2.0).exp();
    let dn = (I * theta / 2.0).exp();
    let scale = 0.5f64.powf(n as f64 / 2.0);
    let mut st = FullState::zeros(space);
    for k in 0..=n {
        let amp = up.powu(k as u32) * dn.powu((n - k) as u32) * scale;
        st.sectors[k].iter_mut().for_each(|a| *a = amp);
    }
    st
}

/// `|CSS_x>`: all amplitudes `2^{-N/2}`.
pub fn css_x_full(space: Arc<SpinSpace>) -> FullState {
    css_theta_full(space, 0.0)
}

/// `|CSS_-x>` with amplitudes `(-1)^{#down} 2^{-N/2}`.
pub fn css_mx_full(space: Arc<SpinSpace>) -> FullState {
    let n = space.n_sites();
    let scale = 0.5f64.powf(n as f64 / 2.0);
    let mut st = FullState::zeros(space);
    for k in 0..=n {
        let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
        st.sectors[k].iter_mut().for_each(|a| *a = Complex64::new(sign * scale, 0.0));
    }
    st
}

/// `|<a|b>|² / (<a|a><b|b>)`.
pub fn overlap_full(a: &FullState, b: &FullState) -> Result<f64> {
    let ov = a.inner(b)?;
    Ok(ov.norm_sqr() / (a.norm_sqr() * b.norm_sqr()))
}

/// Moments, parity, parity slope and cat fidelities of a full state.
pub fn full_observables(state: &FullState) -> StateObservables {
    let n = state.n_sites();
    let norm = state.norm_sqr();
    let js = state.apply_spin();
    let mut mean = [0.0; 3];
    let mut second = [[0.0; 3]; 3];
    for a in 0..3 {
        mean[a] = state.inner(&js[a]).map(|c| c.re).unwrap_or(f64::NAN) / norm;
        for b in a..3 {
            let v = js[a].inner(&js[b]).map(|c| c.re).unwrap_or(f64::NAN) / norm;
            second[a][b] = v;
            second[b][a] = v;
        }
    }
    let parity_of = |k: usize| if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
    let mut parity = 0.0;
    let mut p_jx = ZERO;
    let mut sum_px = ZERO;
    let mut sum_mx = ZERO;
    for k in 0..=n {
        let p = parity_of(k);
        let sec = &state.sectors[k];
        parity += p * sec.iter().map(|a| a.norm_sqr()).sum::<f64>();
        p_jx += sec.iter().zip(&js[0].sectors[k]).map(|(a, b)| a.conj() * b).sum::<Complex64>() * p;
        let s: Complex64 = sec.iter().sum();
        sum_px += s;
        sum_mx += s * p;
    }
    let scale = 0.5f64.powf(n as f64 / 2.0);
    let ov_px = sum_px * scale;
    let ov_mx = sum_mx * scale;
    let phi = ghz_phase(n);
    let ov_ghz = (ov_px + phi.conj() * ov_mx) / 2f64.sqrt();
    StateObservables {
        moments: SpinMoments { n_sites: n, mean, second },
        parity: parity / norm,
        dparity_dtheta: 2.0 * p_jx.im / norm,
        f_px: ov_px.norm_sqr() / norm,
        f_mx: ov_mx.norm_sqr() / norm,
        f_ghz: ov_ghz.norm_sqr() / norm,
    }
}

/// `P(J^x = m)` for `m = -N/2 ..= N/2`, via a Walsh–Hadamard transform of the
/// amplitudes (which rotates every spin into the `x` basis).
pub fn p_jx_full(state: &FullState) -> Vec<f64> {
    let n = state.n_sites();
    let mut v = state.to_dense();
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
    // After the transform bit 0 means spin along +x, so J^x = N/2 - popcount.
    let mut p = vec![0.0; n + 1];
    for (idx, a) in v.iter().enumerate() {
        p[n - idx.count_ones() as usize] += a.norm_sqr();
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Propagator for the XX model on one lattice.
#[derive(Clone, Debug)]
pub struct ExactEngine {
    model: XxModel,
    space: Arc<SpinSpace>,
    blocks: Vec<SectorBlock>,
    pub krylov: KrylovOptions,
    /// Propagate only `M <= 0` sectors when the state is flip-even.
    pub flip_symmetry: bool,
}

impl ExactEngine {
    pub fn new(model: XxModel) -> Result<Self> {
        Self::with_size_cap(model, DEFAULT_SIZE_CAP)
    }

    /// Engine accepting up to `cap` spins; `cap` itself may not exceed
    /// [`MAX_SIZE_CAP`].
    pub fn with_size_cap(model: XxModel, cap: usize) -> Result<Self> {
        if cap > MAX_SIZE_CAP {
            return Err(Error::SizeCap { n: cap, cap: MAX_SIZE_CAP });
        }
        let n = model.n_sites();
        if n > cap {
            return Err(Error::SizeCap { n, cap });
        }
        let space = Arc::new(SpinSpace::new(n)?);
        let exchange = Arc::new(model.exchange_table());
        let blocks = (0..=n).map(|k| SectorBlock::new(&space, k, exchange.clone())).collect();
        Ok(ExactEngine {
            model,
            space,
            blocks,
            krylov: KrylovOptions::default(),
            flip_symmetry: true,
        })
    }

    pub fn model(&self) -> &XxModel {
        &self.model
    }

    pub fn space(&self) -> &Arc<SpinSpace> {
        &self.space
    }

    pub fn n_sites(&self) -> usize {
        self.space.n_sites()
    }

    pub fn block(&self, n_up: usize) -> &SectorBlock {
        &self.blocks[n_up]
    }

    pub fn css_x(&self) -> FullState {
        css_x_full(self.space.clone())
    }

    fn check(&self, state: &FullState) -> Result<()> {
        if state.n_sites() != self.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} spins, engine {}",
                state.n_sites(),
                self.n_sites()
            )));
        }
        Ok(())
    }

    /// `H ψ`.
    pub fn apply_h(&self, state: &FullState) -> Result<FullState> {
        self.check(state)?;
        let mut out = FullState::zeros(self.space.clone());
        for (k, b) in self.blocks.iter().enumerate() {
            b.apply(&state.sectors[k], &mut out.sectors[k]);
        }
        Ok(out)
    }

    /// `<ψ|H|ψ> / <ψ|ψ>`.
    pub fn energy(&self, state: &FullState) -> Result<f64> {
        let h = self.apply_h(state)?;
        Ok(state.inner(&h)?.re / state.norm_sqr())
    }

    /// `ψ ← exp(-iH dt) ψ`; negative `dt` runs backwards.
    pub fn propagate(&self, state: &mut FullState, dt: f64) -> Result<KrylovStats> {
        self.check(state)?;
        if !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step {dt} is not finite")));
        }
        let n = self.n_sites();
        let mirror = self.flip_symmetry && state.is_flip_symmetric(1e-12);
        let mut total = KrylovStats::default();
        for k in 0..=n {
            if mirror && k > n - k {
                continue;
            }
            let block = &self.blocks[k];
            let st = krylov::expm_krylov(|x, y| block.apply(x, y), &mut state.sectors[k], dt, &self.krylov)?;
            total.substeps += st.substeps;
            total.matvecs += st.matvecs;
            total.max_error = total.max_error.max(st.max_error);
        }
        if mirror {
            let full = self.space.full_mask();
            for k in 0..n.div_ceil(2) {
                let (lo, hi) = state.sectors.split_at_mut(n - k);
                let (src, dst) = (&lo[k], &mut hi[0]);
                for (&s, &a) in self.space.basis(k).iter().zip(src.iter()) {
                    dst[self.space.rank(!s & full)] = a;
                }
            }
        }
        Ok(total)
    }
}
