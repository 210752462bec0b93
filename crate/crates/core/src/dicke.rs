//! Maximal-spin (Dicke) sector: collective-spin algebra and exact one-axis
//! twisting dynamics for arbitrary `N`.
//!
//! A [`DickeState`] stores the amplitudes on `|J=N/2, M>` with index
//! `k = M + N/2`, i.e. `k` counts up spins. The parity `P^z = Π_i 2S^z_i` acts as
//! `(-1)^(N-k)`, the sign of the number of down spins.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{SpinMoments, StateObservables};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Amplitudes over `M = -N/2 ..= N/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    amps: Vec<Complex64>,
}

/// One-axis-twisting rotor `H = (J^z)²/(2I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OatSpec {
    pub n_sites: usize,
    /// Moment of inertia, in units of `1/𝒥`.
    pub inertia: f64,
}

impl OatSpec {
    /// Bare collective-spin limit, `I = N/𝒥`.
    pub fn bare(n_sites: usize, coupling: f64) -> Self {
        OatSpec { n_sites, inertia: n_sites as f64 / coupling }
    }

    /// Twisting rate `χ = 1/(2I)`.
    pub fn chi(&self) -> f64 {
        0.5 / self.inertia
    }

    /// Formation time of the `q`-headed cat, `2πI/q`.
    pub fn t_q(&self, q: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.inertia / q as f64
    }

    pub fn t_ghz(&self) -> f64 {
        std::f64::consts::PI * self.inertia
    }
}

impl DickeState {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::InvalidArgument("Dicke state needs N >= 1".into()));
        }
        Ok(DickeState { amps })
    }

    pub fn n_sites(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `M` for index `k`.
    pub fn m_of(&self, k: usize) -> f64 {
        k as f64 - self.n_sites() as f64 / 2.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &DickeState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &DickeState) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    fn j_total(&self) -> f64 {
        self.n_sites() as f64 / 2.0
    }

    /// `J^+ ψ`.
    pub fn raise(&self) -> Vec<Complex64> {
        let j = self.j_total();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for k in 0..self.amps.len() - 1 {
            let m = self.m_of(k);
            out[k + 1] = self.amps[k] * (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
        out
    }

    /// `J^- ψ`.
    pub fn lower(&self) -> Vec<Complex64> {
        let j = self.j_total();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for k in 1..self.amps.len() {
            let m = self.m_of(k);
            out[k - 1] = self.amps[k] * (j * (j + 1.0) - m * (m - 1.0)).sqrt();
        }
        out
    }

    /// `(J^x ψ, J^y ψ, J^z ψ)`.
    pub fn apply_spin(&self) -> [Vec<Complex64>; 3] {
        let up = self.raise();
        let dn = self.lower();
        let jx = up.iter().zip(&dn).map(|(u, d)| 0.5 * (u + d)).collect();
        let jy = up.iter().zip(&dn).map(|(u, d)| (u - d) / (2.0 * I)).collect();
        let jz = self.amps.iter().enumerate().map(|(k, a)| a * self.m_of(k)).collect();
        [jx, jy, jz]
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense `J^x, J^y, J^z` in the Dicke basis, ordered by increasing `M`.
pub fn collective_spin_matrices(n_sites: usize) -> [DMatrix<Complex64>; 3] {
    let d = n_sites + 1;
    let j = n_sites as f64 / 2.0;
    let mut jx = DMatrix::zeros(d, d);
    let mut jy = DMatrix::zeros(d, d);
    let mut jz = DMatrix::zeros(d, d);
    for k in 0..d {
        let m = k as f64 - j;
        jz[(k, k)] = Complex64::new(m, 0.0);
        if k + 1 < d {
            // <M+1| J^+ |M>
            let c = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            jx[(k + 1, k)] = Complex64::new(0.5 * c, 0.0);
            jx[(k, k + 1)] = Complex64::new(0.5 * c, 0.0);
            jy[(k + 1, k)] = Complex64::new(0.0, -0.5 * c);
            jy[(k, k + 1)] = Complex64::new(0.0, 0.5 * c);
        }
    }
    [jx, jy, jz]
}

/// Natural log of `binomial(n, k)` for all `k`.
pub(crate) fn log_binomials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n {
        acc += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        out.push(acc);
    }
    out
}

/// Coherent spin state along `+x`: `a_M = 2^{-N/2} √binomial(N, M+N/2)`.
pub fn css_x_dicke(n_sites: usize) -> DickeState {
    let lb = log_binomials(n_sites);
    let half_ln2 = 0.5 * n_sites as f64 * std::f64::consts::LN_2;
    let amps = lb.iter().map(|&l| Complex64::new((0.5 * l - half_ln2).exp(), 0.0)).collect();
    DickeState { amps }
}

/// Coherent spin state along `-x`, with the sign convention `(-1)^{#down}`.
pub fn css_mx_dicke(n_sites: usize) -> DickeState {
    let mut s = css_x_dicke(n_sites);
    for (k, a) in s.amps.iter_mut().enumerate() {
        if (n_sites - k) % 2 == 1 {
            *a = -*a;
        }
    }
    s
}

/// Evolution under `(J^z)²/(2I)`: `a_M -> exp(-i M² t/(2I)) a_M`.
pub fn oat_evolve(state: &DickeState, spec: &OatSpec, t: f64) -> DickeState {
    let amps = state
        .amps
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let m = state.m_of(k);
            a * Complex64::from_polar(1.0, -m * m * t * spec.chi())
        })
        .collect();
    DickeState { amps }
}

/// The `q`-headed cat generated by twisting `|CSS_x>` for `t_q = 2πI/q`.
pub fn qcat_dicke(n_sites: usize, q: usize, spec: &OatSpec) -> Result<DickeState> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be positive".into()));
    }
    if n_sites % 2 != 0 {
        return Err(Error::InvalidArgument(format!("q-cat states need even N, got {n_sites}")));
    }
    Ok(oat_evolve(&css_x_dicke(n_sites), spec, spec.t_q(q)))
}

/// Relative phase `φ` of the cat `(|CSS_x> + φ|CSS_-x>)/√2` produced at `t = πI`.
///
/// The branch (`+i` or `-i`) is chosen by direct comparison with the twisted
/// state, so it follows `N mod 4` without hard-coding it.
pub fn ghz_phase(n_sites: usize) -> Complex64 {
    let spec = OatSpec::bare(n_sites, 1.0);
    let twisted = oat_evolve(&css_x_dicke(n_sites), &spec, spec.t_ghz());
    let x = css_x_dicke(n_sites);
    let mx = css_mx_dicke(n_sites);
    let fid = |phi: Complex64| {
        let ov = (x.inner(&twisted) + phi.conj() * mx.inner(&twisted)) / 2f64.sqrt();
        ov.norm_sqr()
    };
    if fid(I) >= fid(-I) {
        I
    } else {
        -I
    }
}

/// `(|CSS_x> + φ|CSS_-x>)/√2` with the branch of [`ghz_phase`].
pub fn ghz_dicke(n_sites: usize) -> DickeState {
    let phi = ghz_phase(n_sites);
    let x = css_x_dicke(n_sites);
    let mx = css_mx_dicke(n_sites);
    let mut amps: Vec<Complex64> =
        x.amps.iter().zip(&mx.amps).map(|(a, b)| (a + phi * b) / 2f64.sqrt()).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    DickeState { amps }
}

pub fn dicke_observables(state: &DickeState) -> StateObservables {
    let n = state.n_sites();
    let norm = state.norm_sqr();
    let js = state.apply_spin();
    let psi = state.amplitudes();
    let mut mean = [0.0; 3];
    let mut second = [[0.0; 3]; 3];
    for a in 0..3 {
        mean[a] = dot(psi, &js[a]).re / norm;
        for b in 0..3 {
            second[a][b] = dot(&js[a], &js[b]).re / norm;
        }
    }
    let parity_of = |k: usize| if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
    let parity = psi.iter().enumerate().map(|(k, a)| parity_of(k) * a.norm_sqr()).sum::<f64>() / norm;
    // d<P>/dθ = -i<[P, J^x]> = 2 Im <ψ|P J^x|ψ>.
    let p_jx: Complex64 =
        psi.iter().zip(&js[0]).enumerate().map(|(k, (a, b))| a.conj() * b * parity_of(k)).sum();
    let dparity_dtheta = 2.0 * p_jx.im / norm;

    let f_px = state.fidelity(&css_x_dicke(n));
    let f_mx = state.fidelity(&css_mx_dicke(n));
    let f_ghz = state.fidelity(&ghz_dicke(n));
    StateObservables {
        moments: SpinMoments { n_sites: n, mean, second },
        parity,
        dparity_dtheta,
        f_px,
        f_mx,
        f_ghz,
    }
}

/// Orthonormal `J^x` eigenvectors (columns, ascending eigenvalue `m = -N/2..N/2`).
pub fn jx_eigenbasis(n_sites: usize) -> DMatrix<f64> {
    let d = n_sites + 1;
    let j = n_sites as f64 / 2.0;
    let mut jx = DMatrix::<f64>::zeros(d, d);
    for k in 0..d - 1 {
        let m = k as f64 - j;
        let c = 0.5 * (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        jx[(k + 1, k)] = c;
        jx[(k, k + 1)] = c;
    }
    let eig = SymmetricEigen::new(jx);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])])
}

/// `P(J^x = m)` for `m = -N/2 ..= N/2`.
pub fn p_jx_dicke(state: &DickeState) -> Vec<f64> {
    let n = state.n_sites();
    let basis = jx_eigenbasis(n);
    let norm = state.norm_sqr();
    (0..=n)
        .map(|c| {
            let amp: Complex64 =
                (0..=n).map(|r| state.amps[r] * basis[(r, c)]).sum();
            amp.norm_sqr() / norm
        })
        .collect()
}

/// Spectral lines predicted for a rotor with inertia `I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorLines {
    /// `ω = (M + 1/2)/I` for `<J^x>(t)`.
    pub jx: Vec<f64>,
    /// `ω = 0` followed by `ω = 2(M+1)/I` for `<(J^y)²>(t)`.
    pub jy2: Vec<f64>,
}

pub fn rotor_frequencies(inertia: f64, m_max: usize) -> Result<RotorLines> {
    if !(inertia > 0.0) {
        return Err(Error::InvalidArgument(format!("inertia must be positive, got {inertia}")));
    }
    let jx = (0..=m_max).map(|m| (m as f64 + 0.5) / inertia).collect();
    let jy2 = std::iter::once(0.0)
        .chain((0..=m_max).map(|m| 2.0 * (m as f64 + 1.0) / inertia))
        .collect();
    Ok(RotorLines { jx, jy2 })
}
