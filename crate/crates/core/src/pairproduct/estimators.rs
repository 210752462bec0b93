//! Monte Carlo estimators built from amplitude ratios.
//!
//! With `a_i = log Ψ(σ^i) − log Ψ(σ)` the single-flip log-ratio and
//! `R_ij = e^{a_i + a_j + 4 f_ij σ_i σ_j}` the double-flip ratio, the local
//! values of the collective-spin operators are
//!
//! - `J^x → ½ Σ_i e^{a_i}`, `J^y → Σ_i (−iσ_i/2) e^{a_i}`,
//! - `(J^x)² → N/4 + ¼ Σ_{i≠j} R_ij`, `(J^y)² → N/4 − ¼ Σ_{i≠j} σ_iσ_j R_ij`,
//! - `{J^x,J^y}/2 → Σ_{i≠j} (−iσ_j/4) R_ij`,
//! - `{J^x,J^z}/2 → ¼ Σ_i e^{a_i}(S − σ_i)`, `{J^y,J^z}/2 → Σ_i (−iσ_i/4) e^{a_i}(S − σ_i)`,
//!
//! where `S = Σ_i σ_i = 2J^z`. The parity slope uses
//! `d<P>/dθ = 2 Im <P J^x>` and the local energy sums `R_ij` over anti-aligned pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PairProduct, SampleBatch};
use crate::dicke::ghz_phase;
use crate::lattice::XxModel;
use crate::observables::{ObservableRow, SpinMoments};
use crate::stats::{blocked_estimate, jackknife, Estimate};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const JACKKNIFE_BLOCKS: usize = 32;

/// Local values of one configuration (real parts of the complex local estimators).
#[derive(Clone, Copy, Debug, Default)]
pub struct LocalSample {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub jx2: f64,
    pub jy2: f64,
    pub jz2: f64,
    pub jxjy: f64,
    pub jxjz: f64,
    pub jyjz: f64,
    pub parity: f64,
    pub dparity: f64,
    pub energy: Complex64,
}

/// Precomputed tables for evaluating local estimators of one wavefunction.
#[derive(Clone, Debug)]
pub struct LocalEvaluator<'a> {
    wf: &'a PairProduct,
    /// `e^{±4 f_ij}`, row-major.
    e4p: Vec<Complex64>,
    e4m: Vec<Complex64>,
    exchange: Option<Vec<f64>>,
}

impl<'a> LocalEvaluator<'a> {
    pub fn new(wf: &'a PairProduct, model: Option<&XxModel>) -> Self {
        let e4p = wf.fmat().iter().map(|f| (4.0 * f).exp()).collect();
        let e4m = wf.fmat().iter().map(|f| (-4.0 * f).exp()).collect();
        LocalEvaluator { wf, e4p, e4m, exchange: model.map(|m| m.exchange_table()) }
    }

    fn flip_ratios(&self, spins: &[i8], out: &mut Vec<Complex64>) {
        let fields = self.wf.local_fields(spins);
        out.clear();
        out.extend((0..spins.len()).map(|i| self.wf.flip_log_ratio(spins, &fields, i).exp()));
    }

    #[inline]
    fn pair_ratio(&self, ea: &[Complex64], spins: &[i8], i: usize, j: usize) -> Complex64 {
        let k = i * spins.len() + j;
        let c = if spins[i] == spins[j] { self.e4p[k] } else { self.e4m[k] };
        ea[i] * ea[j] * c
    }

    /// `E_loc(σ) = Σ_{i<j, σ_i≠σ_j} h_ij Ψ(σ^{ij})/Ψ(σ)`; zero without a model.
    pub fn local_energy(&self, spins: &[i8], ea: &mut Vec<Complex64>) -> Complex64 {
        let Some(ex) = &self.exchange else { return ZERO };
        self.flip_ratios(spins, ea);
        let n = spins.len();
        let mut e = ZERO;
        for i in 0..n {
            for j in i + 1..n {
                if spins[i] != spins[j] {
                    e += self.pair_ratio(ea, spins, i, j) * ex[i * n + j];
                }
            }
        }
        e
    }

    /// All local values; `None` when a ratio is not finite.
    pub fn evaluate(&self, spins: &[i8], ea: &mut Vec<Complex64>) -> Option<LocalSample> {
        self.flip_ratios(spins, ea);
        if ea.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        let n = spins.len();
        let s_tot: f64 = spins.iter().map(|&s| s as f64).sum();
        let mut jx = ZERO;
        let mut jy = ZERO;
        let mut jxjz = ZERO;
        let mut jyjz = ZERO;
        let mut sum_r = ZERO;
        for i in 0..n {
            let si = spins[i] as f64;
            let r = ea[i];
            sum_r += r;
            jx += 0.5 * r;
            jy += Complex64::new(0.0, -0.5 * si) * r;
            jxjz += 0.25 * r * (s_tot - si);
            jyjz += Complex64::new(0.0, -0.25 * si) * r * (s_tot - si);
        }
        let mut pair_sum = ZERO;
        let mut pair_ss = ZERO;
        let mut pair_xy = ZERO;
        let mut energy = ZERO;
        for i in 0..n {
            for j in i + 1..n {
                let r = self.pair_ratio(ea, spins, i, j);
                let ss = (spins[i] * spins[j]) as f64;
                pair_sum += r;
                pair_ss += r * ss;
                pair_xy += r * (spins[i] + spins[j]) as f64;
                if let Some(ex) = &self.exchange {
                    if ss < 0.0 {
                        energy += r * ex[i * n + j];
                    }
                }
            }
        }
        if !pair_sum.re.is_finite() || !pair_sum.im.is_finite() {
            return None;
        }
        let quarter_n = n as f64 / 4.0;
        let parity: f64 = spins.iter().map(|&s| s as f64).product();
        Some(LocalSample {
            jx: jx.re,
            jy: jy.re,
            jz: 0.5 * s_tot,
            jx2: quarter_n + 0.5 * pair_sum.re,
            jy2: quarter_n - 0.5 * pair_ss.re,
            jz2: 0.25 * s_tot * s_tot,
            jxjy: (Complex64::new(0.0, -0.25) * pair_xy).re,
            jxjz: jxjz.re,
            jyjz: jyjz.re,
            parity,
            dparity: (parity * sum_r).im,
            energy,
        })
    }
}

/// Sampled collective-spin observables with error bars.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McObservables {
    pub n_samples: usize,
    /// Configurations dropped because a ratio overflowed.
    pub rejected: usize,
    pub moments: SpinMoments,
    pub jx: Estimate,
    pub jy: Estimate,
    pub jz: Estimate,
    pub var_jx: Estimate,
    pub var_jy: Estimate,
    pub var_jz: Estimate,
    pub jyjz_sym: Estimate,
    pub j2: Estimate,
    pub xi2: Estimate,
    pub parity: Estimate,
    pub dparity_dtheta: Estimate,
    pub energy: Estimate,
}

impl McObservables {
    /// Series row and matching error row (fidelity columns left as NaN).
    pub fn to_rows(&self, t: f64, t_kac: f64) -> (ObservableRow, ObservableRow) {
        let mut row = ObservableRow::empty(t);
        row.t_kac = t_kac;
        row.set_moments(&self.moments);
        row.xi2 = self.xi2.mean;
        row.parity = self.parity.mean;
        row.dparity_dtheta = self.dparity_dtheta.mean;
        row.energy = self.energy.mean;
        let mut err = ObservableRow::empty(t);
        err.t_kac = t_kac;
        err.jx = self.jx.err;
        err.var_jx = self.var_jx.err;
        err.var_jy = self.var_jy.err;
        err.var_jz = self.var_jz.err;
        err.jyjz_sym = self.jyjz_sym.err;
        err.j2 = self.j2.err;
        err.xi2 = self.xi2.err;
        err.parity = self.parity.err;
        err.dparity_dtheta = self.dparity_dtheta.err;
        err.energy = self.energy.err;
        (row, err)
    }
}

fn xi2_from(m: &[f64], n: usize) -> f64 {
    moments_from(m, n).xi2()
}

/// Means in the order `jx, jy, jz, jx2, jy2, jz2, jxjy, jxjz, jyjz`.
fn moments_from(m: &[f64], n: usize) -> SpinMoments {
    SpinMoments {
        n_sites: n,
        mean: [m[0], m[1], m[2]],
        second: [[m[3], m[6], m[7]], [m[6], m[4], m[8]], [m[7], m[8], m[5]]],
    }
}

pub fn estimate_observables(wf: &PairProduct, model: &XxModel, batch: &SampleBatch) -> McObservables {
    let n = wf.n_sites();
    let ev = LocalEvaluator::new(wf, Some(model));
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(batch.len()); 12];
    let mut ea = Vec::with_capacity(n);
    let mut rejected = 0;
    for c in batch.iter() {
        match ev.evaluate(c, &mut ea) {
            Some(s) => {
                for (col, v) in cols.iter_mut().zip([
                    s.jx, s.jy, s.jz, s.jx2, s.jy2, s.jz2, s.jxjy, s.jxjz, s.jyjz, s.parity, s.dparity, s.energy.re,
                ]) {
                    col.push(v);
                }
            }
            None => rejected += 1,
        }
    }
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let means: Vec<f64> = cols.iter().map(|c| crate::stats::mean(c)).collect();
    let moments = moments_from(&means, n);
    let jk = |f: &dyn Fn(&[f64]) -> f64| jackknife(&refs[..9], JACKKNIFE_BLOCKS, f);
    McObservables {
        n_samples: batch.len() - rejected,
        rejected,
        moments,
        jx: blocked_estimate(&cols[0]),
        jy: blocked_estimate(&cols[1]),
        jz: blocked_estimate(&cols[2]),
        var_jx: jk(&|m| m[3] - m[0] * m[0]),
        var_jy: jk(&|m| m[4] - m[1] * m[1]),
        var_jz: jk(&|m| m[5] - m[2] * m[2]),
        jyjz_sym: blocked_estimate(&cols[8]),
        j2: jk(&|m| m[3] + m[4] + m[5]),
        xi2: jk(&|m| xi2_from(m, n)),
        parity: blocked_estimate(&cols[9]),
        dparity_dtheta: blocked_estimate(&cols[10]),
        energy: blocked_estimate(&cols[11]),
    }
}

/// Fidelity estimate from the two ratio averages.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct OverlapEstimate {
    pub value: f64,
    pub err: f64,
    /// Largest single-term share of `Σ|Φ/Ψ|` over the `Ψ` samples.
    pub max_weight_psi: f64,
    /// Largest single-term share of `Σ|Ψ/Φ|` over the `Φ` samples.
    pub max_weight_phi: f64,
    /// Set when the error bar exceeds the estimate.
    pub heavy_tail: bool,
}

fn complex_mean(zs: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    let (a, b) = (blocked_estimate(&re), blocked_estimate(&im));
    (Complex64::new(a.mean, b.mean), a.err.hypot(b.err))
}

/// `|<Φ|Ψ>|²/(<Φ|Φ><Ψ|Ψ>) = <Φ/Ψ>_Ψ · <Ψ/Φ>_Φ` from the log-ratios
/// `d = log Ψ − log Φ` on samples of `|Ψ|²` and of `|Φ|²`.
pub fn overlap_from_log_ratios(d_on_psi: &[Complex64], d_on_phi: &[Complex64]) -> OverlapEstimate {
    if d_on_psi.is_empty() || d_on_phi.is_empty() {
        return OverlapEstimate { value: f64::NAN, err: f64::NAN, heavy_tail: true, ..Default::default() };
    }
    // A common shift keeps both exponentials in range; it cancels in the product.
    let shift = d_on_phi.iter().map(|d| d.re).fold(f64::NEG_INFINITY, f64::max);
    let a_terms: Vec<Complex64> = d_on_psi.iter().map(|d| (-(d - shift)).exp()).collect();
    let b_terms: Vec<Complex64> = d_on_phi.iter().map(|d| (d - shift).exp()).collect();
    let share = |ts: &[Complex64]| {
        let tot: f64 = ts.iter().map(|t| t.norm()).sum();
        ts.iter().map(|t| t.norm()).fold(0.0, f64::max) / tot
    };
    let (a, da) = complex_mean(&a_terms);
    let (b, db) = complex_mean(&b_terms);
    let value = (a * b).re.max(0.0);
    let err = (b.norm() * da).hypot(a.norm() * db);
    OverlapEstimate {
        value,
        err,
        max_weight_psi: share(&a_terms),
        max_weight_phi: share(&b_terms),
        heavy_tail: !(err <= value) || !err.is_finite(),
    }
}

/// Fidelity between `Ψ` (sampled by `psi_batch`) and `Φ` (sampled by `phi_batch`).
pub fn estimate_overlap<A, B>(log_psi: A, psi_batch: &SampleBatch, log_phi: B, phi_batch: &SampleBatch) -> OverlapEstimate
where
    A: Fn(&[i8]) -> Complex64,
    B: Fn(&[i8]) -> Complex64,
{
    let d1: Vec<Complex64> = psi_batch.iter().map(|c| log_psi(c) - log_phi(c)).collect();
    let d2: Vec<Complex64> = phi_batch.iter().map(|c| log_psi(c) - log_phi(c)).collect();
    overlap_from_log_ratios(&d1, &d2)
}

/// Fidelities with `|CSS_x>`, `|CSS_-x>` and the GHZ state, and the coherence
/// `C = 2F_GHZ − F_x − F_−x`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CatFidelities {
    pub f_px: OverlapEstimate,
    pub f_mx: OverlapEstimate,
    pub f_ghz: OverlapEstimate,
    pub coherence: Estimate,
}

/// The three targets are unimodular, so one batch of uniform configurations
/// samples all of them.
pub fn cat_fidelities(wf: &PairProduct, psi_batch: &SampleBatch, uniform: &SampleBatch) -> CatFidelities {
    let n = wf.n_sites();
    let phi = ghz_phase(n);
    let log_mx = |c: &[i8]| {
        let downs = c.iter().filter(|&&s| s < 0).count();
        Complex64::new(0.0, std::f64::consts::PI * (downs % 2) as f64)
    };
    let log_ghz = |c: &[i8]| {
        let downs = c.iter().filter(|&&s| s < 0).count();
        let sign = if downs % 2 == 0 { 1.0 } else { -1.0 };
        (Complex64::new(1.0, 0.0) + phi * sign).ln()
    };
    let lp: Vec<Complex64> = psi_batch.iter().map(|c| wf.log_amplitude(c)).collect();
    let lu: Vec<Complex64> = uniform.iter().map(|c| wf.log_amplitude(c)).collect();
    let with = |target: &dyn Fn(&[i8]) -> Complex64| {
        let d1: Vec<Complex64> = psi_batch.iter().zip(&lp).map(|(c, l)| l - target(c)).collect();
        let d2: Vec<Complex64> = uniform.iter().zip(&lu).map(|(c, l)| l - target(c)).collect();
        overlap_from_log_ratios(&d1, &d2)
    };
    let f_px = with(&|_| ZERO);
    let f_mx = with(&log_mx);
    let f_ghz = with(&log_ghz);
    let coherence = Estimate::new(
        2.0 * f_ghz.value - f_px.value - f_mx.value,
        ((2.0 * f_ghz.err).powi(2) + f_px.err.powi(2) + f_mx.err.powi(2)).sqrt(),
    );
    CatFidelities { f_px, f_mx, f_ghz, coherence }
}

/// Fidelities with the OAT `q`-cat snapshots `e^{-iπ (J^z)²/q}|CSS_x>`, one
/// per entry of `qs`. The snapshots are unimodular, so `uniform` samples them.
pub fn qcat_overlaps(wf: &PairProduct, psi_batch: &SampleBatch, uniform: &SampleBatch, qs: &[usize]) -> Vec<OverlapEstimate> {
    let n = wf.n_sites() as f64;
    let lp: Vec<Complex64> = psi_batch.iter().map(|c| wf.log_amplitude(c)).collect();
    let lu: Vec<Complex64> = uniform.iter().map(|c| wf.log_amplitude(c)).collect();
    qs.iter()
        .map(|&q| {
            // Σ_{i<j} σ_i σ_j = (S² − N)/2 with pair weight −iπ/(2q).
            let f = Complex64::new(0.0, -std::f64::consts::PI / (2.0 * q as f64));
            let target = |c: &[i8]| {
                let s: f64 = c.iter().map(|&x| x as f64).sum();
                f * (0.5 * (s * s - n))
            };
            let d1: Vec<Complex64> = psi_batch.iter().zip(&lp).map(|(c, l)| l - target(c)).collect();
            let d2: Vec<Complex64> = uniform.iter().zip(&lu).map(|(c, l)| l - target(c)).collect();
            overlap_from_log_ratios(&d1, &d2)
        })
        .collect()
}
