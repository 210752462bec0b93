//! Time-dependent variational Monte Carlo for the pair-product ansatz.
//!
//! Parameters follow `S ẋ = −i F` with `S_kl = cov(O_k, O_l)`,
//! `F_k = cov(O_k, E_loc)` and `O_k = ∂ log Ψ / ∂x_k`. For this ansatz the
//! `O_k` are real spin polynomials, so `S` is real symmetric. Integration is
//! fixed-step RK4 with a fresh sample batch per stage.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::XxModel;
use crate::observables::{ObservableRow, ObservableSeries};
use crate::pairproduct::{
    cat_fidelities, estimate_observables, metropolis_sample, qcat_overlaps, stream_seed, uniform_samples,
    LocalEvaluator, PairProduct, PairProductParams, SampleBatch, SamplerOptions, Walkers,
};
use crate::stats::Estimate;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// `(S + ε diag S + ε₀) ẋ = −iF`.
    Shift,
    /// `ẋ = −i S⁺ F`, singular values below `rcond · max` discarded.
    Pinv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdvpOptions {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub solver: SolverMode,
    pub rcond: f64,
    /// Also evolve the single-spin weights `g_d` (redundant with `h` on
    /// translation-invariant states, hence off by default).
    pub evolve_g: bool,
    /// Abort when `|S ẋ + iF| / |F|` exceeds this.
    pub max_residual: f64,
}

impl Default for TdvpOptions {
    fn default() -> Self {
        TdvpOptions {
            epsilon: 1e-3,
            epsilon0: 1e-6,
            solver: SolverMode::Shift,
            rcond: 1e-6,
            evolve_g: false,
            max_residual: 0.5,
        }
    }
}

/// Integrator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvmcOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Record observables every this many steps (and at the last step).
    pub observe_every: usize,
    pub sampler: SamplerOptions,
    pub tdvp: TdvpOptions,
    pub seed: u64,
    /// Uniform configurations for the fidelity estimators; 0 disables them.
    pub fidelity_samples: usize,
    /// Bound on `|E(t) − E(0)|/N` reported in the metadata.
    pub energy_drift_bound: f64,
    /// Keep a parameter snapshot at every observation.
    pub record_params: bool,
    /// `q` values of OAT cat snapshots whose fidelity is recorded.
    pub cat_targets: Vec<usize>,
}

impl Default for TvmcOptions {
    fn default() -> Self {
        TvmcOptions {
            dt: 0.05,
            t_max: 10.0,
            observe_every: 10,
            sampler: SamplerOptions::default(),
            tdvp: TdvpOptions::default(),
            seed: 1,
            fidelity_samples: 10_000,
            energy_drift_bound: 1e-3,
            record_params: false,
            cat_targets: Vec::new(),
        }
    }
}

/// One solved TDVP system.
#[derive(Clone, Debug)]
pub struct TdvpStep {
    /// Time derivative of the active parameters `[f_d.., (g_d..), h]`.
    pub xdot: Vec<Complex64>,
    /// Time derivative of the normalization/phase constant.
    pub offset_dot: Complex64,
    pub energy: Complex64,
    pub residual: f64,
    /// Ratio of largest to smallest eigenvalue of `S`.
    pub condition: f64,
}

fn n_active(n_classes: usize, opts: &TdvpOptions) -> usize {
    if opts.evolve_g {
        2 * n_classes + 1
    } else {
        n_classes + 1
    }
}

/// `O_k(σ)` for the active parameters.
pub fn log_derivatives(wf: &PairProduct, spins: &[i8], opts: &TdvpOptions, out: &mut [f64]) {
    let table = wf.table();
    let n = wf.n_sites();
    let nc = table.n_classes();
    out.iter_mut().for_each(|x| *x = 0.0);
    let map = table.class_map();
    for i in 0..n {
        let si = spins[i];
        let row = &map[i * n..(i + 1) * n];
        for j in i + 1..n {
            let c = row[j] as usize;
            out[c] += (si * spins[j]) as f64;
            if opts.evolve_g {
                out[nc + c] += (si + spins[j]) as f64;
            }
        }
    }
    let last = out.len() - 1;
    out[last] = spins.iter().map(|&s| s as f64).sum();
}

fn solve(
    s: &DMatrix<f64>,
    f: &[Complex64],
    opts: &TdvpOptions,
) -> Result<(Vec<Complex64>, f64, f64)> {
    let p = f.len();
    let fr = DVector::from_iterator(p, f.iter().map(|z| z.re));
    let fi = DVector::from_iterator(p, f.iter().map(|z| z.im));
    let eig = SymmetricEigen::new(s.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let (yr, yi) = match opts.solver {
        SolverMode::Shift => {
            let mut a = s.clone();
            for k in 0..p {
                a[(k, k)] += opts.epsilon * s[(k, k)] + opts.epsilon0;
            }
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Numerical(format!("regularized S not positive definite (cond {condition:.3e})")))?;
            (chol.solve(&fr), chol.solve(&fi))
        }
        SolverMode::Pinv => {
            let cut = opts.rcond * lmax;
            let v = &eig.eigenvectors;
            let inv = DVector::from_iterator(
                p,
                eig.eigenvalues.iter().map(|&l| if l > cut && l > 0.0 { 1.0 / l } else { 0.0 }),
            );
            let apply = |b: &DVector<f64>| v * (v.transpose() * b).component_mul(&inv);
            (apply(&fr), apply(&fi))
        }
    };
    // ẋ = −i y.
    let xdot: Vec<Complex64> = yr.iter().zip(yi.iter()).map(|(&r, &i)| -I * Complex64::new(r, i)).collect();
    let res_r = s * &yr - &fr;
    let res_i = s * &yi - &fi;
    let fnorm = (fr.norm_squared() + fi.norm_squared()).sqrt();
    let residual = if fnorm > 0.0 { (res_r.norm_squared() + res_i.norm_squared()).sqrt() / fnorm } else { 0.0 };
    if xdot.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!("non-finite TDVP solution (cond {condition:.3e})")));
    }
    Ok((xdot, residual, condition))
}

fn tdvp_weighted<'a>(
    wf: &PairProduct,
    model: &XxModel,
    configs: impl Iterator<Item = (&'a [i8], f64)>,
    opts: &TdvpOptions,
) -> Result<TdvpStep> {
    let p = n_active(wf.table().n_classes(), opts);
    let ev = LocalEvaluator::new(wf, Some(model));
    let mut o = vec![0.0; p];
    let mut ea = Vec::new();
    let mut w_tot = 0.0;
    let mut mo = vec![0.0; p];
    let mut moo = DMatrix::<f64>::zeros(p, p);
    let mut me = Complex64::default();
    let mut moe = vec![Complex64::default(); p];
    for (c, w) in configs {
        log_derivatives(wf, c, opts, &mut o);
        let e = ev.local_energy(c, &mut ea);
        if !e.re.is_finite() || !e.im.is_finite() {
            continue;
        }
        w_tot += w;
        me += e * w;
        for k in 0..p {
            mo[k] += w * o[k];
            moe[k] += e * (w * o[k]);
            for l in k..p {
                moo[(k, l)] += w * o[k] * o[l];
            }
        }
    }
    if w_tot <= 0.0 {
        return Err(Error::Numerical("no usable samples for the TDVP system".into()));
    }
    mo.iter_mut().for_each(|x| *x /= w_tot);
    me /= w_tot;
    let mut s = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        for l in k..p {
            let v = moo[(k, l)] / w_tot - mo[k] * mo[l];
            s[(k, l)] = v;
            s[(l, k)] = v;
        }
    }
    let f: Vec<Complex64> = (0..p).map(|k| moe[k] / w_tot - me * mo[k]).collect();
    let (xdot, residual, condition) = solve(&s, &f, opts)?;
    if residual > opts.max_residual {
        return Err(Error::Numerical(format!(
            "TDVP residual {residual:.3e} above {:.3e} (cond {condition:.3e})",
            opts.max_residual
        )));
    }
    let offset_dot = -I * me - xdot.iter().zip(&mo).map(|(x, m)| x * *m).sum::<Complex64>();
    Ok(TdvpStep { xdot, offset_dot, energy: me, residual, condition })
}

/// TDVP right-hand side from a batch sampled from `|Ψ|²`.
pub fn tdvp_rhs(wf: &PairProduct, model: &XxModel, batch: &SampleBatch, opts: &TdvpOptions) -> Result<TdvpStep> {
    tdvp_weighted(wf, model, batch.iter().map(|c| (c, 1.0)), opts)
}

/// TDVP right-hand side with exact `|Ψ|²` weights over all `2^N`
/// configurations (small `N` only).
pub fn tdvp_rhs_exact(wf: &PairProduct, model: &XxModel, opts: &TdvpOptions) -> Result<TdvpStep> {
    let n = wf.n_sites();
    let amps = wf.dense_amplitudes()?;
    let configs: Vec<Vec<i8>> =
        (0..1usize << n).map(|s| (0..n).map(|i| if s >> i & 1 == 1 { 1 } else { -1 }).collect()).collect();
    tdvp_weighted(wf, model, configs.iter().map(|c| c.as_slice()).zip(amps.iter().map(|a| a.norm_sqr())), opts)
}

/// Adds `scale · (xdot, offset_dot)` to the active parameters.
pub fn apply_update(p: &PairProductParams, step: &TdvpStep, scale: f64, opts: &TdvpOptions) -> PairProductParams {
    let nc = p.n_classes();
    let mut out = p.clone();
    for d in 0..nc {
        out.f[d] += step.xdot[d] * scale;
        if opts.evolve_g {
            out.g[d] += step.xdot[nc + d] * scale;
        }
    }
    out.h += step.xdot[step.xdot.len() - 1] * scale;
    out.offset += step.offset_dot * scale;
    out
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub energy: f64,
    pub max_residual: f64,
    pub max_condition: f64,
    pub acceptance: f64,
}

/// A tVMC trajectory in progress.
#[derive(Clone, Debug)]
pub struct TvmcRun {
    model: XxModel,
    wf: PairProduct,
    pub opts: TvmcOptions,
    pub step: u64,
    walkers: Walkers,
    pub series: ObservableSeries,
    pub params_history: Vec<(f64, PairProductParams)>,
    /// Fidelities with the `cat_targets` snapshots at every observation.
    pub cat_overlaps: Vec<(f64, Vec<Estimate>)>,
    pub energy0: Option<f64>,
    pub max_energy_drift: f64,
    pub last_diagnostics: StepDiagnostics,
}

impl TvmcRun {
    /// Starts from `|CSS_x>` (all parameters zero).
    pub fn new(model: XxModel, opts: TvmcOptions) -> Result<Self> {
        let params = PairProductParams::zeros(model.table.n_classes());
        Self::from_params(model, params, opts)
    }

    pub fn from_params(model: XxModel, params: PairProductParams, opts: TvmcOptions) -> Result<Self> {
        if !(opts.dt > 0.0) || !opts.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", opts.dt)));
        }
        if opts.sampler.n_samples < 2 {
            return Err(Error::InvalidArgument("need at least two samples per stage".into()));
        }
        let wf = PairProduct::new(model.table.clone(), params)?;
        Ok(TvmcRun {
            model,
            wf,
            opts,
            step: 0,
            walkers: Walkers::default(),
            series: ObservableSeries::with_errors(),
            params_history: Vec::new(),
            cat_overlaps: Vec::new(),
            energy0: None,
            max_energy_drift: 0.0,
            last_diagnostics: StepDiagnostics::default(),
        })
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.opts.dt
    }

    pub fn n_steps(&self) -> u64 {
        (self.opts.t_max / self.opts.dt).round() as u64
    }

    pub fn wavefunction(&self) -> &PairProduct {
        &self.wf
    }

    pub fn params(&self) -> &PairProductParams {
        self.wf.params()
    }

    pub fn model(&self) -> &XxModel {
        &self.model
    }

    fn sample(&mut self, wf: &PairProduct, stage: u64) -> SampleBatch {
        let seed = stream_seed(&[self.opts.seed, self.step, stage]);
        metropolis_sample(wf, &self.opts.sampler, &mut self.walkers, seed)
    }

    /// Records observables of the current state estimated from `batch`.
    fn record(&mut self, batch: &SampleBatch) {
        let t = self.t();
        let obs = estimate_observables(&self.wf, &self.model, batch);
        let (mut row, mut err) = obs.to_rows(t, self.model.kac_time(t));
        let n_uniform = if self.opts.fidelity_samples > 0 {
            self.opts.fidelity_samples
        } else {
            self.opts.sampler.n_samples
        };
        let wants_uniform = self.opts.fidelity_samples > 0 || !self.opts.cat_targets.is_empty();
        let uni = wants_uniform
            .then(|| uniform_samples(self.wf.n_sites(), n_uniform, stream_seed(&[self.opts.seed, self.step, 7])));
        if let (Some(uni), false) = (&uni, self.opts.cat_targets.is_empty()) {
            let ov = qcat_overlaps(&self.wf, batch, uni, &self.opts.cat_targets);
            self.cat_overlaps.push((t, ov.iter().map(|o| Estimate::new(o.value, o.err)).collect()));
        }
        if let (Some(uni), true) = (&uni, self.opts.fidelity_samples > 0) {
            let f = cat_fidelities(&self.wf, batch, uni);
            row.set_fidelities(f.f_ghz.value, f.f_px.value, f.f_mx.value);
            err.f_ghz = f.f_ghz.err;
            err.f_px = f.f_px.err;
            err.f_mx = f.f_mx.err;
            err.coherence = f.coherence.err;
        }
        self.track_energy(obs.energy);
        self.series.push_with_error(row, err);
        if self.opts.record_params {
            self.params_history.push((t, self.wf.params().clone()));
        }
    }

    fn track_energy(&mut self, e: Estimate) {
        let e0 = *self.energy0.get_or_insert(e.mean);
        let drift = (e.mean - e0).abs() / self.wf.n_sites() as f64;
        self.max_energy_drift = self.max_energy_drift.max(drift);
    }

    fn wants_observation(&self) -> bool {
        let every = self.opts.observe_every.max(1) as u64;
        self.step % every == 0 || self.step == self.n_steps()
    }

    /// Observes the current state without stepping. The walkers are left
    /// untouched, so the batch equals the one the next step draws.
    pub fn observe(&mut self) {
        let wf = self.wf.clone();
        let mut walkers = self.walkers.clone();
        let seed = stream_seed(&[self.opts.seed, self.step, 0]);
        let batch = metropolis_sample(&wf, &self.opts.sampler, &mut walkers, seed);
        self.record(&batch);
    }

    /// One RK4 step. `first` is a batch already drawn at the current
    /// parameters for stage 0.
    fn rk4(&mut self, first: SampleBatch) -> Result<()> {
        let dt = self.opts.dt;
        let tdvp = self.opts.tdvp.clone();
        let x0 = self.wf.params().clone();
        let mut diag = StepDiagnostics { t: self.t(), ..Default::default() };
        let mut ks: Vec<TdvpStep> = Vec::with_capacity(4);
        let mut batch = first;
        for stage in 0..4u64 {
            let wf = if stage == 0 {
                self.wf.clone()
            } else {
                let scale = if stage == 3 { dt } else { 0.5 * dt };
                let x = apply_update(&x0, &ks[stage as usize - 1], scale, &tdvp);
                let wf = PairProduct::new(self.model.table.clone(), x)?;
                batch = self.sample(&wf, stage);
                wf
            };
            let k = tdvp_rhs(&wf, &self.model, &batch, &tdvp)?;
            diag.max_residual = diag.max_residual.max(k.residual);
            diag.max_condition = diag.max_condition.max(k.condition);
            if stage == 0 {
                diag.energy = k.energy.re;
                diag.acceptance = batch.acceptance_flip;
            }
            ks.push(k);
        }
        let mut x = x0;
        for (k, w) in ks.iter().zip([1.0, 2.0, 2.0, 1.0]) {
            x = apply_update(&x, k, dt * w / 6.0, &tdvp);
        }
        self.wf.set_params(x)?;
        self.step += 1;
        self.last_diagnostics = diag;
        Ok(())
    }

    /// Advances one step, recording observables first when due.
    pub fn advance(&mut self) -> Result<()> {
        let wf = self.wf.clone();
        let batch = self.sample(&wf, 0);
        if self.wants_observation() && self.series.rows.last().map_or(true, |r| r.t < self.t()) {
            self.record(&batch);
        }
        self.rk4(batch)
    }

    /// Runs to `t_max`. On error the trajectory so far stays available.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.n_steps(), |_| Ok(()))
    }

    /// Runs to step `last`, calling `hook` after every step.
    pub fn run_until<F>(&mut self, last: u64, mut hook: F) -> Result<()>
    where
        F: FnMut(&TvmcRun) -> Result<()>,
    {
        while self.step < last {
            self.advance()?;
            hook(self)?;
        }
        if self.step == self.n_steps() && self.series.rows.last().map_or(true, |r| r.t < self.t()) {
            self.observe();
        }
        Ok(())
    }

    /// Energy drift within [`TvmcOptions::energy_drift_bound`].
    pub fn energy_drift_ok(&self) -> bool {
        self.max_energy_drift <= self.opts.energy_drift_bound
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            lattice: self.model.spec().clone(),
            step: self.step,
            params: ParamBits::of(self.wf.params()),
            walkers: self.walkers.clone(),
            rows: self.series.rows.iter().map(row_bits).collect(),
            errors: self.series.errors.iter().flatten().map(row_bits).collect(),
            cat_overlaps: self
                .cat_overlaps
                .iter()
                .map(|(t, v)| (t.to_bits(), v.iter().map(|e| [e.mean.to_bits(), e.err.to_bits()]).collect()))
                .collect(),
            params_history: self.params_history.iter().map(|(t, p)| (t.to_bits(), ParamBits::of(p))).collect(),
            energy0: self.energy0,
            max_energy_drift: self.max_energy_drift,
            options: self.opts.clone(),
        };
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(&ck)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Restores a run saved by [`save_checkpoint`](Self::save_checkpoint).
    /// `t_max` may be extended; all other options come from the checkpoint.
    pub fn resume(path: &Path, model: XxModel, t_max: Option<f64>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported checkpoint version {}", ck.version)));
        }
        if &ck.lattice != model.spec() {
            return Err(Error::InvalidArgument("checkpoint lattice differs from the model".into()));
        }
        let params = ck.params.restore();
        let mut opts = ck.options;
        if let Some(t) = t_max {
            opts.t_max = t;
        }
        let mut run = TvmcRun::from_params(model, params, opts)?;
        run.step = ck.step;
        run.walkers = ck.walkers;
        run.series.rows = ck.rows.iter().map(|b| row_from_bits(b)).collect();
        run.series.errors = Some(ck.errors.iter().map(|b| row_from_bits(b)).collect());
        run.cat_overlaps = ck
            .cat_overlaps
            .iter()
            .map(|(t, v)| {
                let est = v.iter().map(|b| Estimate::new(f64::from_bits(b[0]), f64::from_bits(b[1]))).collect();
                (f64::from_bits(*t), est)
            })
            .collect();
        run.params_history = ck.params_history.iter().map(|(t, p)| (f64::from_bits(*t), p.restore())).collect();
        run.energy0 = ck.energy0;
        run.max_energy_drift = ck.max_energy_drift;
        Ok(run)
    }
}

const CHECKPOINT_VERSION: u32 = 1;

// Rows hold NaN for unavailable columns, which JSON cannot carry.
fn row_bits(r: &ObservableRow) -> Vec<u64> {
    r.values().iter().map(|v| v.to_bits()).collect()
}

fn row_from_bits(b: &[u64]) -> ObservableRow {
    let v: Vec<f64> = b.iter().map(|&x| f64::from_bits(x)).collect();
    ObservableRow::from_values(&v)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    lattice: crate::lattice::LatticeSpec,
    step: u64,
    params: ParamBits,
    walkers: Walkers,
    rows: Vec<Vec<u64>>,
    errors: Vec<Vec<u64>>,
    cat_overlaps: Vec<(u64, Vec<[u64; 2]>)>,
    params_history: Vec<(u64, ParamBits)>,
    energy0: Option<f64>,
    max_energy_drift: f64,
    options: TvmcOptions,
}

#[derive(Serialize, Deserialize)]
struct ParamBits {
    f: Vec<[u64; 2]>,
    g: Vec<[u64; 2]>,
    h: [u64; 2],
    offset: [u64; 2],
}

impl ParamBits {
    fn of(p: &PairProductParams) -> Self {
        let b = |z: &Complex64| [z.re.to_bits(), z.im.to_bits()];
        ParamBits { f: p.f.iter().map(b).collect(), g: p.g.iter().map(b).collect(), h: b(&p.h), offset: b(&p.offset) }
    }

    fn restore(&self) -> PairProductParams {
        let c = |b: &[u64; 2]| Complex64::new(f64::from_bits(b[0]), f64::from_bits(b[1]));
        PairProductParams { f: self.f.iter().map(c).collect(), g: self.g.iter().map(c).collect(), h: c(&self.h), offset: c(&self.offset) }
    }
}
