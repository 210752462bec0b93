//! Pair-product (spin-Jastrow) wavefunctions
//!
//! `log Ψ(σ) = c + Σ_{j<k} [f_d σ_j σ_k + g_d (σ_j + σ_k)] + h Σ_j σ_j`,
//! with `σ = ±1` (bit set = up = `+1`), `d = d(j, k)` the displacement class
//! of the pair and `c` a non-variational constant that carries the norm and
//! global phase. Every estimator uses amplitude ratios, so `c` never enters.

pub mod estimators;
pub mod sampler;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{CouplingTable, LatticeSpec};

pub use estimators::{
    cat_fidelities, estimate_observables, estimate_overlap, CatFidelities, LocalEvaluator, McObservables,
    OverlapEstimate, qcat_overlaps,
};
pub use sampler::{metropolis_sample, stream_seed, uniform_samples, SampleBatch, SamplerOptions, Walkers};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Version tag written into parameter files.
pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Variational parameters, one `f_d` and `g_d` per displacement class.
#[derive(Clone, Debug, PartialEq)]
pub struct PairProductParams {
    pub f: Vec<Complex64>,
    pub g: Vec<Complex64>,
    pub h: Complex64,
    pub offset: Complex64,
}

impl PairProductParams {
    pub fn zeros(n_classes: usize) -> Self {
        PairProductParams { f: vec![ZERO; n_classes], g: vec![ZERO; n_classes], h: ZERO, offset: ZERO }
    }

    pub fn n_classes(&self) -> usize {
        self.f.len()
    }

    /// True when `|Ψ(σ)|` is the same for every configuration.
    pub fn is_unimodular(&self) -> bool {
        self.f.iter().chain(&self.g).chain(std::iter::once(&self.h)).all(|z| z.re == 0.0)
    }
}

/// `e^{-iθJ^z}|CSS_x>`, written with the single-spin phases spread over the
/// pair weights: `g_d = -iθ/(2(N-1))`.
pub fn css_theta_params(table: &CouplingTable, theta: f64) -> PairProductParams {
    let n = table.n_sites() as f64;
    let mut p = PairProductParams::zeros(table.n_classes());
    let g = -I * theta / (2.0 * (n - 1.0));
    p.g.iter_mut().for_each(|x| *x = g);
    p
}

/// The one-axis-twisted state `e^{-it(J^z)²/(2I)}|CSS_x>`, `f_d = -it/(4I)`.
pub fn oat_snapshot_params(table: &CouplingTable, inertia: f64, t: f64) -> PairProductParams {
    let mut p = PairProductParams::zeros(table.n_classes());
    let f = -I * t / (4.0 * inertia);
    p.f.iter_mut().for_each(|x| *x = f);
    p
}

/// GHZ state along `x` (the twisted state at `t = πI`), `f_d = -iπ/4`.
pub fn ghz_params(table: &CouplingTable) -> PairProductParams {
    let mut p = PairProductParams::zeros(table.n_classes());
    p.f.iter_mut().for_each(|x| *x = -I * std::f64::consts::FRAC_PI_4);
    p
}

/// A pair-product wavefunction bound to its lattice, with per-site lookup
/// tables for O(N) ratio updates.
#[derive(Clone, Debug)]
pub struct PairProduct {
    table: Arc<CouplingTable>,
    params: PairProductParams,
    /// `f_{d(i,j)}`, row-major, zero diagonal.
    fmat: Vec<Complex64>,
    /// `Σ_{k≠i} g_{d(i,k)} + h`.
    site_field: Vec<Complex64>,
}

impl PairProduct {
    pub fn new(table: Arc<CouplingTable>, params: PairProductParams) -> Result<Self> {
        let nc = table.n_classes();
        if params.f.len() != nc || params.g.len() != nc {
            return Err(Error::DimensionMismatch(format!(
                "lattice has {nc} classes, parameters {}/{}",
                params.f.len(),
                params.g.len()
            )));
        }
        let mut wf = PairProduct { table, params, fmat: vec![], site_field: vec![] };
        wf.rebuild();
        Ok(wf)
    }

    pub fn zero(table: Arc<CouplingTable>) -> Self {
        let p = PairProductParams::zeros(table.n_classes());
        Self::new(table, p).expect("class count matches")
    }

    fn rebuild(&mut self) {
        let n = self.table.n_sites();
        let map = self.table.class_map();
        self.fmat = map.iter().map(|&c| if c == u32::MAX { ZERO } else { self.params.f[c as usize] }).collect();
        self.site_field = (0..n)
            .map(|i| {
                map[i * n..(i + 1) * n]
                    .iter()
                    .filter(|&&c| c != u32::MAX)
                    .map(|&c| self.params.g[c as usize])
                    .sum::<Complex64>()
                    + self.params.h
            })
            .collect();
    }

    pub fn table(&self) -> &Arc<CouplingTable> {
        &self.table
    }

    pub fn n_sites(&self) -> usize {
        self.table.n_sites()
    }

    pub fn params(&self) -> &PairProductParams {
        &self.params
    }

    pub fn set_params(&mut self, params: PairProductParams) -> Result<()> {
        if params.f.len() != self.table.n_classes() || params.g.len() != self.table.n_classes() {
            return Err(Error::DimensionMismatch("parameter count changed".into()));
        }
        self.params = params;
        self.rebuild();
        Ok(())
    }

    #[inline]
    pub fn f_pair(&self, i: usize, j: usize) -> Complex64 {
        self.fmat[i * self.n_sites() + j]
    }

    pub(crate) fn fmat(&self) -> &[Complex64] {
        &self.fmat
    }

    pub fn log_amplitude(&self, spins: &[i8]) -> Complex64 {
        let n = self.n_sites();
        let mut acc = self.params.offset;
        for i in 0..n {
            let si = spins[i] as f64;
            let row = &self.fmat[i * n..(i + 1) * n];
            let mut pair = ZERO;
            for j in i + 1..n {
                pair += row[j] * spins[j] as f64;
            }
            acc += pair * si + self.site_field[i] * si;
        }
        acc
    }

    /// Local fields `F_i = Σ_k f_{d(i,k)} σ_k`.
    pub fn local_fields(&self, spins: &[i8]) -> Vec<Complex64> {
        let n = self.n_sites();
        (0..n)
            .map(|i| {
                self.fmat[i * n..(i + 1) * n].iter().zip(spins).map(|(f, &s)| f * s as f64).sum()
            })
            .collect()
    }

    /// `log Ψ(σ with spin i flipped) − log Ψ(σ)` given the local fields.
    #[inline]
    pub fn flip_log_ratio(&self, spins: &[i8], fields: &[Complex64], i: usize) -> Complex64 {
        -2.0 * spins[i] as f64 * (fields[i] + self.site_field[i])
    }

    /// Log-ratio for flipping both `i` and `j` (`i ≠ j`).
    #[inline]
    pub fn pair_flip_log_ratio(&self, spins: &[i8], fields: &[Complex64], i: usize, j: usize) -> Complex64 {
        self.flip_log_ratio(spins, fields, i)
            + self.flip_log_ratio(spins, fields, j)
            + 4.0 * self.f_pair(i, j) * (spins[i] * spins[j]) as f64
    }

    /// Flips spin `i` and updates the local fields in O(N).
    pub fn apply_flip(&self, spins: &mut [i8], fields: &mut [Complex64], i: usize) {
        let n = self.n_sites();
        let delta = -2.0 * spins[i] as f64;
        let row = &self.fmat[i * n..(i + 1) * n];
        fields.iter_mut().zip(row).for_each(|(fk, f)| *fk += f * delta);
        spins[i] = -spins[i];
    }

    /// All `2^N` amplitudes indexed by bitmask (bit set = up), normalized.
    pub fn dense_amplitudes(&self) -> Result<Vec<Complex64>> {
        let n = self.n_sites();
        if n > 24 {
            return Err(Error::SizeCap { n, cap: 24 });
        }
        let mut spins = vec![0i8; n];
        let logs: Vec<Complex64> = (0..1usize << n)
            .map(|s| {
                for (i, x) in spins.iter_mut().enumerate() {
                    *x = if s >> i & 1 == 1 { 1 } else { -1 };
                }
                self.log_amplitude(&spins)
            })
            .collect();
        let shift = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        let mut amps: Vec<Complex64> = logs.iter().map(|l| (l - shift).exp()).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(amps)
    }
}

#[derive(Serialize, Deserialize)]
struct ClassRecord {
    id: usize,
    dx: i64,
    dy: i64,
    distance: f64,
    f_re: f64,
    f_im: f64,
    g_re: f64,
    g_im: f64,
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: u32,
    lattice: LatticeSpec,
    h: [f64; 2],
    offset: [f64; 2],
    classes: Vec<ClassRecord>,
}

fn records(table: &CouplingTable, p: &PairProductParams) -> Vec<ClassRecord> {
    table
        .classes()
        .iter()
        .map(|c| ClassRecord {
            id: c.id,
            dx: c.displacement.0,
            dy: c.displacement.1,
            distance: c.distance,
            f_re: p.f[c.id].re,
            f_im: p.f[c.id].im,
            g_re: p.g[c.id].re,
            g_im: p.g[c.id].im,
        })
        .collect()
}

/// Versioned JSON snapshot of the parameters.
pub fn params_to_json(table: &CouplingTable, p: &PairProductParams) -> Result<String> {
    let file = ParamsFile {
        version: PARAMS_FORMAT_VERSION,
        lattice: table.spec().clone(),
        h: [p.h.re, p.h.im],
        offset: [p.offset.re, p.offset.im],
        classes: records(table, p),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn params_from_json(text: &str) -> Result<(LatticeSpec, PairProductParams)> {
    let file: ParamsFile = serde_json::from_str(text)?;
    if file.version != PARAMS_FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!("unsupported parameter version {}", file.version)));
    }
    let nc = file.classes.len();
    let mut p = PairProductParams::zeros(nc);
    for c in &file.classes {
        if c.id >= nc {
            return Err(Error::InvalidArgument(format!("class id {} out of range", c.id)));
        }
        p.f[c.id] = Complex64::new(c.f_re, c.f_im);
        p.g[c.id] = Complex64::new(c.g_re, c.g_im);
    }
    p.h = Complex64::new(file.h[0], file.h[1]);
    p.offset = Complex64::new(file.offset[0], file.offset[1]);
    Ok((file.lattice, p))
}

pub fn save_params(path: &Path, table: &CouplingTable, p: &PairProductParams) -> Result<()> {
    std::fs::write(path, params_to_json(table, p)?)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<(LatticeSpec, PairProductParams)> {
    params_from_json(&std::fs::read_to_string(path)?)
}

/// CSV rows `id,dx,dy,distance,f_re,f_im,g_re,g_im`, one per class.
pub fn write_params_csv<W: Write>(table: &CouplingTable, p: &PairProductParams, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records(table, p) {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{css_x_dicke, ghz_phase, oat_evolve, OatSpec};
    use crate::lattice::{build_coupling_table, Geometry};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(lx: usize, ly: usize) -> Arc<CouplingTable> {
        Arc::new(build_coupling_table(&LatticeSpec::rectangular(Geometry::Square, lx, ly, 3.0)).unwrap())
    }

    fn random_params(nc: usize, rng: &mut ChaCha8Rng) -> PairProductParams {
        let mut c = || Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        PairProductParams {
            f: (0..nc).map(|_| c()).collect(),
            g: (0..nc).map(|_| c()).collect(),
            h: c(),
            offset: ZERO,
        }
    }

    #[test]
    fn zero_params_are_css_x() {
        let wf = PairProduct::zero(table(2, 2));
        let amps = wf.dense_amplitudes().unwrap();
        assert!(amps.iter().all(|a| (a - Complex64::new(0.25, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn incremental_ratios_match_direct_evaluation() {
        let t = table(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let wf = PairProduct::new(t.clone(), random_params(t.n_classes(), &mut rng)).unwrap();
        let mut spins: Vec<i8> = (0..9).map(|_| if rng.gen() { 1 } else { -1 }).collect();
        let mut fields = wf.local_fields(&spins);
        for _ in 0..200 {
            let i = rng.gen_range(0..9);
            let j = (i + rng.gen_range(1..9)) % 9;
            let before = wf.log_amplitude(&spins);
            let mut two = spins.clone();
            two[i] = -two[i];
            two[j] = -two[j];
            let lr2 = wf.pair_flip_log_ratio(&spins, &fields, i, j);
            assert!((wf.log_amplitude(&two) - before - lr2).norm() < 1e-10);
            let lr = wf.flip_log_ratio(&spins, &fields, i);
            wf.apply_flip(&mut spins, &mut fields, i);
            assert!((wf.log_amplitude(&spins) - before - lr).norm() < 1e-10);
            let fresh = wf.local_fields(&spins);
            assert!(fresh.iter().zip(&fields).all(|(a, b)| (a - b).norm() < 1e-10));
        }
    }

    #[test]
    fn ghz_two_spins() {
        let t = Arc::new(build_coupling_table(&LatticeSpec::rectangular(Geometry::Square, 2, 1, 3.0)).unwrap());
        let wf = PairProduct::new(t.clone(), ghz_params(&t)).unwrap();
        let a = wf.dense_amplitudes().unwrap();
        let phase = a[0].conj() / a[0].norm();
        let expect = [1.0, 0.0, 0.0, 1.0];
        for (k, amp) in a.iter().enumerate() {
            let z = amp * phase * 2.0;
            assert_relative_eq!(z.re, expect[k], epsilon = 1e-12);
            assert_relative_eq!(z.im, 1.0 - expect[k], epsilon = 1e-12);
        }
        assert_eq!(ghz_phase(2), -I);
    }

    #[test]
    fn css_theta_is_rotated_product_state() {
        let t = table(2, 2);
        let theta = 0.7;
        let wf = PairProduct::new(t.clone(), css_theta_params(&t, theta)).unwrap();
        let a = wf.dense_amplitudes().unwrap();
        let per_spin = |s: usize, i: usize| if s >> i & 1 == 1 { (-I * theta / 2.0).exp() } else { (I * theta / 2.0).exp() };
        let target: Vec<Complex64> =
            (0..16).map(|s| (0..4).map(|i| per_spin(s, i)).product::<Complex64>() / 4.0).collect();
        let ov: Complex64 = a.iter().zip(&target).map(|(x, y)| x.conj() * y).sum();
        assert_relative_eq!(ov.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oat_snapshots_match_dicke_dynamics() {
        let t = table(3, 3);
        let spec = OatSpec::bare(9, 1.0);
        for time in [0.0, 1.3, 7.9, spec.t_ghz()] {
            let wf = PairProduct::new(t.clone(), oat_snapshot_params(&t, spec.inertia, time)).unwrap();
            let a = wf.dense_amplitudes().unwrap();
            let d = oat_evolve(&css_x_dicke(9), &spec, time);
            // Embed the Dicke state: |N/2,M> is uniform over its sector.
            let mut ov = ZERO;
            for (s, amp) in a.iter().enumerate() {
                let k = (s as u32).count_ones() as u64;
                let dim = crate::exact::basis::binomial(9, k) as f64;
                ov += amp.conj() * d.amplitudes()[k as usize] / dim.sqrt();
            }
            assert_relative_eq!(ov.norm_sqr(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn json_round_trip() {
        let t = table(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_params(t.n_classes(), &mut rng);
        let (spec, back) = params_from_json(&params_to_json(&t, &p).unwrap()).unwrap();
        assert_eq!(&spec, t.spec());
        assert_eq!(back, p);
        let mut buf = Vec::new();
        write_params_csv(&t, &p, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("id,dx,dy"));
    }
}
