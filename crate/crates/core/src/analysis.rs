//! Post-processing of observable series: squeezing optima and scaling fits,
//! effective moments of inertia, quench spectroscopy, Cramér–Rao bookkeeping
//! and cat-state peak counting.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{kac_factor, LatticeSpec};
use crate::observables::ObservableSeries;

fn check_grid(t: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} times vs {} values", t.len(), y.len())));
    }
    if t.len() < min_len {
        return Err(Error::Analysis(format!("need at least {min_len} points, got {}", t.len())));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Analysis("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Vertex of the parabola through three points around index `i`.
fn parabola_vertex(t: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    let (x0, x1, x2) = (t[i - 1], t[i], t[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a.abs() < 1e-300 || !a.is_finite() {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y0 + (xv - x0) * (d01 + a * (xv - x1));
    (xv, yv)
}

/// Located extremum of a sampled curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub value: f64,
    pub index: usize,
    /// The grid extremum sits on the first or last point.
    pub at_edge: bool,
}

/// Grid minimum of `y` over `range`, refined by a local parabola.
fn refined_min(t: &[f64], y: &[f64], range: std::ops::Range<usize>) -> Extremum {
    let mut i = range.start;
    for k in range.clone() {
        if y[k] < y[i] {
            i = k;
        }
    }
    let at_edge = i == range.start || i + 1 == range.end;
    if at_edge {
        return Extremum { t: t[i], value: y[i], index: i, at_edge };
    }
    let (tv, yv) = parabola_vertex(t, y, i);
    Extremum { t: tv, value: yv.min(y[i]), index: i, at_edge }
}

fn refined_max(t: &[f64], y: &[f64], range: std::ops::Range<usize>) -> Extremum {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let e = refined_min(t, &neg, range);
    Extremum { value: -e.value, ..e }
}

/// Minimum of `ξ²(t)`.
pub fn optimal_squeezing(t: &[f64], xi2: &[f64]) -> Result<Extremum> {
    check_grid(t, xi2, 1)?;
    if xi2.iter().any(|v| v.is_nan()) {
        return Err(Error::Analysis("squeezing series contains NaN".into()));
    }
    Ok(refined_min(t, xi2, 0..t.len()))
}

/// Rows before `<J^x>` first falls below half its initial value: the window
/// of the first squeezing minimum, ahead of any inversion or revival.
pub fn first_squeezing_window(jx: &[f64]) -> usize {
    let half = 0.5 * jx.first().copied().unwrap_or(0.0);
    jx.iter().position(|&v| v < half).unwrap_or(jx.len())
}

/// [`optimal_squeezing`] of the `xi2` column within [`first_squeezing_window`].
pub fn optimal_squeezing_series(series: &ObservableSeries) -> Result<Extremum> {
    let end = first_squeezing_window(&series.column(|r| r.jx));
    optimal_squeezing(&series.times()[..end], &series.column(|r| r.xi2)[..end])
}

/// Power law `y = A N^p` fitted in log-log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub sizes: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub prefactor: f64,
    /// Standard error of the exponent from the fit residuals.
    pub exponent_err: f64,
    /// `ln y − ln(A N^p)` for each point.
    pub residuals: Vec<f64>,
    /// Sizes left out because they fell below the fit window.
    pub excluded: Vec<f64>,
}

/// Smallest size entering scaling fits.
pub const SCALING_MIN_SIZE: f64 = 16.0;

/// Log-log least squares over the points with `N >= min_size`.
pub fn fit_power_law(sizes: &[f64], values: &[f64], min_size: f64) -> Result<ScalingFit> {
    if sizes.len() != values.len() {
        return Err(Error::DimensionMismatch(format!("{} sizes vs {} values", sizes.len(), values.len())));
    }
    let mut kept = (Vec::new(), Vec::new());
    let mut excluded = Vec::new();
    for (&n, &y) in sizes.iter().zip(values) {
        if n < min_size {
            excluded.push(n);
        } else if n > 0.0 && y > 0.0 && y.is_finite() {
            kept.0.push(n);
            kept.1.push(y);
        } else {
            return Err(Error::Analysis(format!("cannot take logs of N={n}, y={y}")));
        }
    }
    let (ns, ys) = kept;
    if ns.len() < 3 {
        return Err(Error::Analysis(format!("scaling fit needs at least 3 sizes, got {}", ns.len())));
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let z: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, icept, slope_err) = linear_fit(&x, &z)?;
    let residuals = x.iter().zip(&z).map(|(x, z)| z - (icept + slope * x)).collect();
    Ok(ScalingFit {
        sizes: ns,
        values: ys,
        exponent: slope,
        prefactor: icept.exp(),
        exponent_err: slope_err,
        residuals,
        excluded,
    })
}

/// Ordinary least squares `z = a + b x`; returns `(b, a, stderr(b))`.
fn linear_fit(x: &[f64], z: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Analysis("degenerate abscissae in linear fit".into()));
    }
    let sxz: f64 = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum();
    let b = sxz / sxx;
    let a = mz - b * mx;
    let ss: f64 = x.iter().zip(z).map(|(x, z)| (z - a - b * x).powi(2)).sum();
    let err = if x.len() > 2 { (ss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok((b, a, err))
}

/// Squeezing exponents: `ξ²_opt ∝ N^−ν` and `t_opt ∝ N^μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingScaling {
    pub nu: f64,
    pub mu: f64,
    pub xi2_fit: ScalingFit,
    pub time_fit: ScalingFit,
}

/// Fits `(N, ξ²_opt, t_opt)` triples. Times should be Kac-normalized.
pub fn squeezing_scaling(points: &[(f64, f64, f64)]) -> Result<SqueezingScaling> {
    let n: Vec<f64> = points.iter().map(|p| p.0).collect();
    let xi: Vec<f64> = points.iter().map(|p| p.1).collect();
    let t: Vec<f64> = points.iter().map(|p| p.2).collect();
    let xi2_fit = fit_power_law(&n, &xi, SCALING_MIN_SIZE)?;
    let time_fit = fit_power_law(&n, &t, SCALING_MIN_SIZE)?;
    Ok(SqueezingScaling { nu: -xi2_fit.exponent, mu: time_fit.exponent, xi2_fit, time_fit })
}

/// Effective moment of inertia from the `<J^x>` dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaEstimate {
    /// Time of the first inversion (minimum of `<J^x>`).
    pub t_inv: f64,
    /// `t_inv / 2π`.
    pub from_inversion: f64,
    /// Revival time and `t_rev / 4π`, when the series reaches it.
    pub t_rev: Option<f64>,
    pub from_revival: Option<f64>,
    /// `t_GHZ / π`, when a GHZ time was supplied.
    pub t_ghz: Option<f64>,
    pub from_ghz: Option<f64>,
    /// Primary estimate (the inversion).
    pub inertia: f64,
    /// Largest deviation among the available estimates.
    pub spread: f64,
}

/// Extracts `I_eff` from `<J^x>(t)`. The inversion must be an interior
/// minimum with `<J^x> < 0`.
pub fn extract_inertia(t: &[f64], jx: &[f64], t_ghz: Option<f64>) -> Result<InertiaEstimate> {
    check_grid(t, jx, 3)?;
    let jx0 = jx[0];
    if !(jx0 > 0.0) {
        return Err(Error::Analysis("series must start from a positive <J^x>".into()));
    }
    // Windows are bounded by crossings of ±<J^x>(0)/2, so small oscillations
    // around zero between inversion and revival do not split them.
    let half = 0.5 * jx0;
    let first_neg = jx
        .iter()
        .position(|&v| v < -half)
        .ok_or_else(|| Error::Analysis("no inversion of <J^x> within the series".into()))?;
    let end_inv = jx[first_neg..].iter().position(|&v| v > half).map_or(jx.len(), |k| first_neg + k);
    let inv = refined_min(t, jx, 0..end_inv);
    if inv.at_edge {
        return Err(Error::Analysis("inversion minimum lies at the end of the series".into()));
    }
    let from_inversion = inv.t / (2.0 * PI);
    let (t_rev, from_revival) = if end_inv < jx.len() {
        let end_rev = jx[end_inv..].iter().position(|&v| v < -half).map_or(jx.len(), |k| end_inv + k);
        let rev = refined_max(t, jx, end_inv..end_rev);
        if rev.at_edge {
            (None, None)
        } else {
            (Some(rev.t), Some(rev.t / (4.0 * PI)))
        }
    } else {
        (None, None)
    };
    let from_ghz = t_ghz.map(|t| t / PI);
    let spread = [from_revival, from_ghz]
        .iter()
        .flatten()
        .map(|v| (v - from_inversion).abs())
        .fold(0.0, f64::max);
    Ok(InertiaEstimate {
        t_inv: inv.t,
        from_inversion,
        t_rev,
        from_revival,
        t_ghz,
        from_ghz,
        inertia: from_inversion,
        spread,
    })
}

/// Moment of inertia predicted at `target` from one at `reference`,
/// `I_N = (K_ref^(α) / K_N^(α)) (K_N^(0) / K_ref^(0)) I_ref`.
///
/// This assumes the same `𝒩_α` on both lattices. Under the standard
/// normalization at `α = 0`, `𝒩_0 = N` adds a factor `N / N_ref`.
pub fn kac_rescale_inertia(i_ref: f64, reference: &LatticeSpec, target: &LatticeSpec) -> Result<f64> {
    let ka_ref = kac_factor(reference, reference.alpha)?;
    let ka = kac_factor(target, target.alpha)?;
    let k0_ref = reference.n_sites() as f64 - 1.0;
    let k0 = target.n_sites() as f64 - 1.0;
    Ok(i_ref * (ka_ref / ka) * (k0 / k0_ref))
}

/// Settings of [`quench_spectrum`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumWindow {
    /// Apply the half-Hann taper `cos²(πt/2T)`.
    pub taper: bool,
    /// Zero-padding factor.
    pub padding: usize,
    pub subtract_mean: bool,
    /// Peaks below this fraction of the largest `|A(ω)|` are ignored.
    pub floor: f64,
}

impl Default for SpectrumWindow {
    fn default() -> Self {
        SpectrumWindow { taper: true, padding: 4, subtract_mean: true, floor: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak {
    pub omega: f64,
    /// Signed cosine amplitude.
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSpectrum {
    pub omega: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Peaks sorted by decreasing `|amplitude|`.
    pub peaks: Vec<SpectralPeak>,
    /// Resolution `2π/T` of the record.
    pub bin: f64,
    /// The record covers fewer than two periods of the lowest peak.
    pub low_resolution: bool,
}

/// Cosine transform of a signal sampled on a uniform grid from `t = 0`.
///
/// Signals started from a time-reversal invariant state are even in `t`, so
/// the record is mirrored to `[−T, T]` and transformed with an FFT; the
/// result is real and carries the sign of each spectral line.
pub fn quench_spectrum(t: &[f64], y: &[f64], window: &SpectrumWindow) -> Result<QuenchSpectrum> {
    check_grid(t, y, 4)?;
    let n = t.len();
    let dt = t[1] - t[0];
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Analysis("quench spectrum needs a uniform time grid".into()));
    }
    let span = t[n - 1] - t[0];
    let mean = if window.subtract_mean { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let len = window.padding.max(1) * 2 * (n - 1);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for k in 0..n {
        let w = if window.taper { (PI * (t[k] - t[0]) / (2.0 * span)).cos().powi(2) } else { 1.0 };
        let v = w * (y[k] - mean);
        buf[k] = Complex::new(v, 0.0);
        if k > 0 {
            buf[len - k] = Complex::new(v, 0.0);
        }
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let d_omega = 2.0 * PI / (len as f64 * dt);
    let omega: Vec<f64> = (0..=half).map(|j| j as f64 * d_omega).collect();
    let amplitude: Vec<f64> = buf[..=half].iter().map(|c| c.re * dt / span).collect();
    let peak_max = amplitude.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let mut peaks = Vec::new();
    for j in 0..=half {
        let a = amplitude[j].abs();
        let left = if j > 0 { amplitude[j - 1].abs() } else { 0.0 };
        let right = if j < half { amplitude[j + 1].abs() } else { 0.0 };
        if a > left && a >= right && a >= window.floor * peak_max && a > 0.0 {
            peaks.push(SpectralPeak { omega: omega[j], amplitude: amplitude[j] });
        }
    }
    peaks.sort_by(|a, b| b.amplitude.abs().total_cmp(&a.amplitude.abs()));
    let lowest = peaks.iter().map(|p| p.omega).filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    let low_resolution = lowest.is_finite() && span < 2.0 * (2.0 * PI / lowest);
    Ok(QuenchSpectrum { omega, amplitude, peaks, bin: 2.0 * PI / span, low_resolution })
}

/// One time of the parity-based Cramér–Rao chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CramerRaoRecord {
    pub t: f64,
    /// `(d<P>/dθ)² / Var(P)` with `Var(P) = 1 − <P>²`.
    pub lhs: f64,
    /// `4 Var(J^x)`.
    pub rhs: f64,
    /// `lhs / rhs`; NaN where `rhs` vanishes.
    pub ratio: f64,
}

pub fn cramer_rao_record(t: f64, parity: f64, dparity_dtheta: f64, var_jx: f64) -> CramerRaoRecord {
    let var_p = 1.0 - parity * parity;
    let lhs = if var_p > 1e-12 { dparity_dtheta * dparity_dtheta / var_p } else { f64::NAN };
    let rhs = 4.0 * var_jx;
    let ratio = if rhs > 1e-12 { lhs / rhs } else { f64::NAN };
    CramerRaoRecord { t, lhs, rhs, ratio }
}

pub fn cramer_rao_report(series: &ObservableSeries) -> Vec<CramerRaoRecord> {
    series.rows.iter().map(|r| cramer_rao_record(r.t, r.parity, r.dparity_dtheta, r.var_jx)).collect()
}

/// Threshold for a `P(J^x)` entry to count as a peak.
pub const CAT_PEAK_THRESHOLD: f64 = 1e-3;

/// Whether `q` coherent components are resolvable at size `N`, `N ≥ q²/(2π)²`.
pub fn qcat_resolvable(n_sites: usize, q: usize) -> bool {
    n_sites as f64 >= (q * q) as f64 / (4.0 * PI * PI)
}

/// Peaks of `P(J^x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatCensus {
    /// `(J^x, P)` of each peak, in increasing `J^x`.
    pub peaks: Vec<(f64, f64)>,
    /// Peaks expected for the `q`-cat: `q/2 + 1`.
    pub expected: usize,
}

impl CatCensus {
    pub fn count(&self) -> usize {
        self.peaks.len()
    }
}

/// Counts local maxima of `P(J^x)` (indexed by `J^x + N/2`) over the entries
/// of the parity carried by `|CSS_x>`, i.e. `N/2 − J^x` even.
pub fn cat_peak_census(p_jx: &[f64], q: usize) -> Result<CatCensus> {
    if p_jx.len() < 2 {
        return Err(Error::Analysis("P(J^x) table too short".into()));
    }
    if q < 2 || q % 2 == 1 {
        return Err(Error::InvalidArgument(format!("q must be even and at least 2, got {q}")));
    }
    let n = p_jx.len() - 1;
    if !qcat_resolvable(n, q) {
        return Err(Error::Analysis(format!("a {q}-cat is not resolvable at N = {n}")));
    }
    if p_jx.iter().any(|p| !(*p >= -1e-12) || !p.is_finite()) {
        return Err(Error::Analysis("P(J^x) must be a probability table".into()));
    }
    // Entries with N/2 − J^x even sit at indices n, n−2, ...
    let idx: Vec<usize> = (0..=n).filter(|i| (n - i) % 2 == 0).collect();
    let mut peaks = Vec::new();
    for (k, &i) in idx.iter().enumerate() {
        let p = p_jx[i];
        let left = if k > 0 { p_jx[idx[k - 1]] } else { f64::NEG_INFINITY };
        let right = if k + 1 < idx.len() { p_jx[idx[k + 1]] } else { f64::NEG_INFINITY };
        if p >= CAT_PEAK_THRESHOLD && p > left && p >= right {
            peaks.push((i as f64 - n as f64 / 2.0, p));
        }
    }
    Ok(CatCensus { peaks, expected: q / 2 + 1 })
}

/// Straight-line fit with goodness of fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Fits `ln P` against the distance `N/2 − |J^x|` from the GHZ peaks, over
/// non-zero entries with distance at least `skip`.
pub fn exponential_tail_fit(p_jx: &[f64], skip: usize) -> Result<LineFit> {
    let n = p_jx.len() - 1;
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (i, &p) in p_jx.iter().enumerate() {
        let m = i as f64 - n as f64 / 2.0;
        let d = n as f64 / 2.0 - m.abs();
        if d >= skip as f64 && p > 1e-300 && (n - i) % 2 == 0 {
            x.push(d);
            z.push(p.ln());
        }
    }
    if x.len() < 3 {
        return Err(Error::Analysis("too few tail points for an exponential fit".into()));
    }
    let (slope, intercept, _) = linear_fit(&x, &z)?;
    let mz = z.iter().sum::<f64>() / z.len() as f64;
    let ss_tot: f64 = z.iter().map(|v| (v - mz).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&z).map(|(x, z)| (z - intercept - slope * x).powi(2)).sum();
    Ok(LineFit { slope, intercept, r2: 1.0 - ss_res / ss_tot, n_points: x.len() })
}

/// Fit of `P(J^x) ∝ cosh(κ J^x)`, the overlap of two exponential tails
/// `e^{−κ d}` running inwards from peaks at `±N/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub kappa: f64,
    pub log_amplitude: f64,
    /// Goodness of fit of `ln P`.
    pub r2: f64,
    pub n_points: usize,
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Fits `ln P = c + ln cosh(κ J^x)` over the non-zero entries strictly
/// between the two outer peaks, by golden-section search in `κ`.
pub fn two_tail_fit(p_jx: &[f64]) -> Result<TailFit> {
    let n = p_jx.len() - 1;
    let mut m = Vec::new();
    let mut z = Vec::new();
    for (i, &p) in p_jx.iter().enumerate().take(n).skip(1) {
        if p > 1e-300 && (n - i) % 2 == 0 {
            m.push(i as f64 - n as f64 / 2.0);
            z.push(p.ln());
        }
    }
    if m.len() < 3 {
        return Err(Error::Analysis("too few tail points for an exponential fit".into()));
    }
    let len = z.len() as f64;
    let offset = |k: f64| z.iter().zip(&m).map(|(z, m)| z - ln_cosh(k * m)).sum::<f64>() / len;
    let cost = |k: f64| {
        let c = offset(k);
        z.iter().zip(&m).map(|(z, m)| (z - c - ln_cosh(k * m)).powi(2)).sum::<f64>()
    };
    let step = 0.01;
    let k0 = (0..=1000).min_by(|&a, &b| cost(a as f64 * step).total_cmp(&cost(b as f64 * step))).unwrap();
    let (mut lo, mut hi) = (((k0 as f64) - 1.0).max(0.0) * step, (k0 as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if cost(a) < cost(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let mz = z.iter().sum::<f64>() / len;
    let ss_tot: f64 = z.iter().map(|v| (v - mz).powi(2)).sum();
    Ok(TailFit { kappa, log_amplitude: offset(kappa), r2: 1.0 - cost(kappa) / ss_tot, n_points: z.len() })
}

/// Tower-of-states fit `E(M) = E_0 + M²/(2I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerFit {
    pub inertia: f64,
    pub e0: f64,
    pub r2: f64,
    pub n_points: usize,
}

/// Fits `(M, E)` pairs with `0 <= M < N/2` (the fully polarized sector is
/// excluded; it is a single state outside the rotor regime).
pub fn tower_fit(points: &[(f64, f64)], n_sites: usize) -> Result<TowerFit> {
    let sel: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(m, _)| m >= 0.0 && m < n_sites as f64 / 2.0).collect();
    if sel.len() < 2 {
        return Err(Error::Analysis("tower fit needs at least two sectors".into()));
    }
    let x: Vec<f64> = sel.iter().map(|p| p.0 * p.0).collect();
    let z: Vec<f64> = sel.iter().map(|p| p.1).collect();
    let (slope, e0, _) = linear_fit(&x, &z)?;
    if !(slope > 0.0) {
        return Err(Error::Analysis(format!("tower energies do not grow with M² (slope {slope})")));
    }
    let mz = z.iter().sum::<f64>() / z.len() as f64;
    let ss_tot: f64 = z.iter().map(|v| (v - mz).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&z).map(|(x, z)| (z - e0 - slope * x).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(TowerFit { inertia: 1.0 / (2.0 * slope), e0, r2, n_points: sel.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{css_x_dicke, dicke_observables, ghz_dicke, oat_evolve, p_jx_dicke, OatSpec};
    use approx::assert_relative_eq;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn squeezing_optimum_matches_fine_grid() {
        let oat = OatSpec { n_sites: 16, inertia: 16.0 };
        let xi = |t: f64| dicke_observables(&oat_evolve(&css_x_dicke(16), &oat, t)).xi2();
        let coarse = grid(12.0, 61);
        let e = optimal_squeezing(&coarse, &coarse.iter().map(|&t| xi(t)).collect::<Vec<_>>()).unwrap();
        let fine = grid(12.0, 12001);
        let f = optimal_squeezing(&fine, &fine.iter().map(|&t| xi(t)).collect::<Vec<_>>()).unwrap();
        assert!(!e.at_edge);
        assert!((e.t - f.t).abs() < coarse[1]);
        assert_relative_eq!(e.value, f.value, max_relative = 1e-2);
    }

    #[test]
    fn squeezing_edge_cases_flag() {
        let t = grid(1.0, 5);
        let mono = optimal_squeezing(&t, &[1.0, 0.9, 0.8, 0.7, 0.6]).unwrap();
        assert!(mono.at_edge);
        let flat = optimal_squeezing(&t, &[1.0; 5]).unwrap();
        assert!(flat.at_edge);
        assert_eq!(flat.t, 0.0);
    }

    #[test]
    fn power_law_recovered_exactly() {
        let n = [16.0, 36.0, 64.0, 100.0];
        let y: Vec<f64> = n.iter().map(|n: &f64| 3.0 * n.powf(-2.0 / 3.0)).collect();
        let fit = fit_power_law(&n, &y, SCALING_MIN_SIZE).unwrap();
        assert!((fit.exponent + 2.0 / 3.0).abs() < 1e-10);
        assert_relative_eq!(fit.prefactor, 3.0, max_relative = 1e-10);
        assert!(fit_power_law(&n[..2], &y[..2], 0.0).is_err());
        let with_small = fit_power_law(&[4.0, 16.0, 36.0, 64.0], &[1.0, y[0], y[1], y[2]], SCALING_MIN_SIZE).unwrap();
        assert_eq!(with_small.excluded, vec![4.0]);
    }

    #[test]
    fn inertia_from_oat_dynamics() {
        let inertia = 2.5;
        let oat = OatSpec { n_sites: 16, inertia };
        let t = grid(40.0, 4001);
        let jx: Vec<f64> = t.iter().map(|&t| 8.0 * (t / (2.0 * inertia)).cos().powi(15)).collect();
        let est = extract_inertia(&t, &jx, Some(oat.t_ghz())).unwrap();
        assert_relative_eq!(est.inertia, inertia, max_relative = 1e-4);
        assert_relative_eq!(est.from_revival.unwrap(), inertia, max_relative = 1e-4);
        assert_relative_eq!(est.from_ghz.unwrap(), inertia, max_relative = 1e-12);
        let short: Vec<f64> = t.iter().copied().take_while(|&t| t < 10.0).collect();
        assert!(extract_inertia(&short, &jx[..short.len()], None).is_err());
    }

    #[test]
    fn kac_rescaling_identity_and_transitivity() {
        let a = LatticeSpec::square(4, 3.0);
        let b = LatticeSpec::square(6, 3.0);
        let c = LatticeSpec::square(8, 3.0);
        let r = |i: f64, x: &LatticeSpec, y: &LatticeSpec| kac_rescale_inertia(i, x, y).unwrap();
        assert_eq!(r(2.4, &a, &a), 2.4);
        assert_relative_eq!(r(r(2.4, &a, &b), &b, &c), r(2.4, &a, &c), max_relative = 1e-12);
        let z = LatticeSpec::square(4, 0.0);
        let z6 = LatticeSpec::square(6, 0.0);
        // With α = 0 the two Kac ratios cancel.
        assert_relative_eq!(r(2.4, &z, &z6), 2.4, max_relative = 1e-12);
    }

    #[test]
    fn two_tail_fit_recovers_kappa() {
        // N = 12 with even J^x only; peaks at ±6 are excluded from the fit.
        let kappa = 0.7;
        let p: Vec<f64> = (0..=12)
            .map(|i| {
                let m = i as f64 - 6.0;
                if i % 2 == 1 {
                    0.0
                } else if m.abs() == 6.0 {
                    0.4
                } else {
                    1e-4 * (kappa * m).cosh()
                }
            })
            .collect();
        let fit = two_tail_fit(&p).unwrap();
        assert_relative_eq!(fit.kappa, kappa, epsilon = 1e-6);
        assert_relative_eq!(fit.log_amplitude, 1e-4f64.ln(), epsilon = 1e-6);
        assert_eq!(fit.n_points, 5);
        assert!(fit.r2 > 1.0 - 1e-12);
    }

    #[test]
    fn cosine_gives_single_peak() {
        let t = grid(100.0, 1001);
        let w0 = 0.7;
        let y: Vec<f64> = t.iter().map(|&t| (w0 * t).cos()).collect();
        let s = quench_spectrum(&t, &y, &SpectrumWindow::default()).unwrap();
        assert!((s.peaks[0].omega - w0).abs() < s.bin);
        assert!(s.peaks[0].amplitude > 0.0);
        assert_eq!(s.peaks.len(), 1);
        assert!(!s.low_resolution);
        let short = quench_spectrum(&t[..50], &y[..50], &SpectrumWindow::default()).unwrap();
        assert!(short.low_resolution);
    }

    #[test]
    fn oat_spectral_lines() {
        let inertia = 2.0;
        let oat = OatSpec { n_sites: 16, inertia };
        let t = grid(3.0 * 4.0 * PI * inertia, 1500);
        let states: Vec<_> = t.iter().map(|&t| dicke_observables(&oat_evolve(&css_x_dicke(16), &oat, t))).collect();
        let jx: Vec<f64> = states.iter().map(|o| o.moments.mean[0]).collect();
        let s = quench_spectrum(&t, &jx, &SpectrumWindow::default()).unwrap();
        for (k, target) in [0.5, 1.5, 2.5].iter().enumerate() {
            assert!((s.peaks[k].omega * inertia - target).abs() < s.bin * inertia, "{:?}", &s.peaks[..3]);
        }
        let jy2: Vec<f64> = states.iter().map(|o| o.moments.second[1][1]).collect();
        let raw = SpectrumWindow { subtract_mean: false, ..Default::default() };
        let s = quench_spectrum(&t, &jy2, &raw).unwrap();
        let near = |w: f64| s.peaks.iter().find(|p| (p.omega * inertia - w).abs() < s.bin * inertia).copied();
        assert!(near(0.0).unwrap().amplitude > 0.0);
        assert!(near(2.0).unwrap().amplitude < 0.0);
        assert!(near(4.0).unwrap().amplitude < 0.0);
    }

    #[test]
    fn cramer_rao_limits() {
        let ghz = dicke_observables(&ghz_dicke(8));
        let r = cramer_rao_record(0.0, ghz.parity, ghz.dparity_dtheta, ghz.var_jx());
        assert_relative_eq!(r.lhs, 64.0, max_relative = 1e-10);
        assert_relative_eq!(r.rhs, 64.0, max_relative = 1e-10);
        let css = dicke_observables(&css_x_dicke(8));
        let r = cramer_rao_record(0.0, css.parity, css.dparity_dtheta, css.var_jx());
        assert!(r.lhs.abs() < 1e-20 && r.rhs.abs() < 1e-12 && r.ratio.is_nan());
    }

    #[test]
    fn census_of_ideal_cats() {
        let ghz = cat_peak_census(&p_jx_dicke(&ghz_dicke(20)), 2).unwrap();
        assert_eq!(ghz.peaks.iter().map(|p| p.0).collect::<Vec<_>>(), vec![-10.0, 10.0]);
        let oat = OatSpec::bare(20, 1.0);
        for q in [2, 4, 6] {
            let s = oat_evolve(&css_x_dicke(20), &oat, oat.t_q(q));
            let c = cat_peak_census(&p_jx_dicke(&s), q).unwrap();
            assert_eq!(c.count(), c.expected, "q={q} {:?}", c.peaks);
        }
        assert!(qcat_resolvable(1, 6) && !qcat_resolvable(1, 8));
    }

    #[test]
    fn tower_fit_of_exact_rotor() {
        let pts: Vec<(f64, f64)> = (0..=8).map(|m| (m as f64, -3.0 + (m * m) as f64 / 5.0)).collect();
        let fit = tower_fit(&pts, 16).unwrap();
        assert_relative_eq!(fit.inertia, 2.5, max_relative = 1e-12);
        assert_eq!(fit.n_points, 8);
    }
}
