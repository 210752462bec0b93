//! Run orchestration: engine runs on a time grid, on-disk layout, analysis of
//! stored series, and the figure-reproduction driver.
//!
//! A run directory holds `series.csv`, `meta.json` and `checkpoints/`, plus
//! engine-specific tables. Existing runs are never appended to.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    cat_peak_census, cramer_rao_report, exponential_tail_fit, extract_inertia, kac_rescale_inertia, two_tail_fit, first_squeezing_window,
    optimal_squeezing, qcat_resolvable, quench_spectrum, squeezing_scaling, tower_fit, Extremum, SpectrumWindow,
    TowerFit,
};
use crate::config::{Engine, Output, RunConfig};
use crate::dicke::{css_x_dicke, dicke_observables, oat_evolve, p_jx_dicke, OatSpec};
use crate::error::{Error, Result};
use crate::exact::{
    full_observables, p_jx_full, save_checkpoint, tower_spectrum, ExactEngine, FullState, SectorSpectrum,
    SpectrumOptions,
};
use crate::lattice::{kac_factor, Geometry, LatticeSpec, XxModel};
use crate::observables::{ObservableRow, ObservableSeries};
use crate::tvmc::TvmcRun;

/// Process exit status for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::SizeCap { .. } | Error::Domain(_) => 2,
        Error::Numerical(_) | Error::Analysis(_) | Error::DimensionMismatch(_) => 3,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
    }
}

/// `0, dt, 2dt, .. ≤ t_max`.
pub fn uniform_times(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

/// Exact evolution of `|CSS_x>` through increasing `times`. `at` sees the
/// state at every time.
pub fn exact_series<F>(engine: &ExactEngine, times: &[f64], mut at: F) -> Result<ObservableSeries>
where
    F: FnMut(f64, &FullState) -> Result<()>,
{
    let model = engine.model();
    let mut state = engine.css_x();
    let mut t = 0.0;
    let mut series = ObservableSeries::new();
    for &target in times {
        if target < t {
            return Err(Error::InvalidArgument("output times must be non-decreasing".into()));
        }
        if target > t {
            engine.propagate(&mut state, target - t)?;
            t = target;
        }
        let obs = full_observables(&state);
        series.push(obs.to_row(t, model.kac_time(t), engine.energy(&state)?));
        at(t, &state)?;
    }
    Ok(series)
}

/// `P(J^x)` of the exact state at each of `times`.
pub fn exact_p_jx(engine: &ExactEngine, times: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut out = Vec::new();
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    exact_series(engine, &sorted, |t, s| {
        out.push((t, p_jx_full(s)));
        Ok(())
    })?;
    Ok(out)
}

/// OAT rotor series from `|CSS_x>`. `t_kac` is left equal to `t`.
pub fn dicke_series(oat: &OatSpec, times: &[f64]) -> ObservableSeries {
    let css = css_x_dicke(oat.n_sites);
    let mut series = ObservableSeries::new();
    for &t in times {
        let obs = dicke_observables(&oat_evolve(&css, oat, t));
        let energy = obs.moments.second[2][2] / (2.0 * oat.inertia);
        series.push(obs.to_row(t, t, energy));
    }
    series
}

/// Location of the `F_GHZ` maximum.
pub fn ghz_peak(series: &ObservableSeries) -> Result<Extremum> {
    let t = series.times();
    let neg: Vec<f64> = series.rows.iter().map(|r| -r.f_ghz).collect();
    if neg.iter().any(|v| v.is_nan()) {
        return Err(Error::Analysis("series lacks GHZ fidelities".into()));
    }
    let e = optimal_squeezing(&t, &neg)?;
    Ok(Extremum { value: -e.value, ..e })
}

/// Tower-of-states spectrum and its rotor fit.
pub fn tower_study(spec: &LatticeSpec, n_states: usize) -> Result<(Vec<SectorSpectrum>, TowerFit)> {
    let engine = ExactEngine::new(XxModel::new(spec)?)?;
    let opts = SpectrumOptions { n_states, ..Default::default() };
    let spectra = tower_spectrum(&engine, &opts)?;
    let pts: Vec<(f64, f64)> = spectra.iter().map(|s| (s.m, s.tos_energy())).collect();
    let fit = tower_fit(&pts, spec.n_sites())?;
    Ok((spectra, fit))
}

fn prepare_dir(out: &Path, resume: bool) -> Result<()> {
    if !resume && out.join("series.csv").exists() {
        return Err(Error::Config(format!(
            "{} already holds a run; choose a new output directory",
            out.display()
        )));
    }
    std::fs::create_dir_all(out.join("checkpoints"))?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn lattice_meta(model: &XxModel) -> Result<serde_json::Value> {
    let spec = model.spec();
    Ok(json!({
        "geometry": spec.geometry,
        "lx": spec.lx,
        "ly": spec.ly,
        "alpha": spec.alpha,
        "n_sites": spec.n_sites(),
        "n_classes": model.table.n_classes(),
        "kac_factor": kac_factor(spec, spec.alpha)?,
        "normalization": model.normalization,
        "oat_inertia": model.oat_inertia(),
    }))
}

fn meta(cfg: &RunConfig, model: &XxModel, extra: serde_json::Value) -> Result<serde_json::Value> {
    Ok(json!({
        "version": env!("CARGO_PKG_VERSION"),
        "engine": cfg.engine,
        "seed": cfg.seed,
        "config": cfg,
        "lattice": lattice_meta(model)?,
        "run": extra,
    }))
}

fn model_of(cfg: &RunConfig) -> Result<XxModel> {
    XxModel::with_normalization(&cfg.lattice.spec(), cfg.lattice.normalization, cfg.lattice.coupling)
}

fn write_pjx(path: &Path, tables: &[(String, f64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "t", "Jx", "P"])?;
    for (label, t, p) in tables {
        let n = p.len() - 1;
        for (i, v) in p.iter().enumerate() {
            w.write_record([label.clone(), format!("{t}"), format!("{}", i as f64 - n as f64 / 2.0), format!("{v:.12e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `exact-evolve`: full-state evolution on the output grid.
pub fn exact_evolve(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = model_of(cfg)?;
    let engine = ExactEngine::with_size_cap(model.clone(), crate::exact::MAX_SIZE_CAP)?;
    prepare_dir(out, false)?;
    let times = cfg.output_times();
    let spec = model.spec().clone();
    let every = cfg.schedule.checkpoint_every;
    let mut rows = 0usize;
    let mut pjx = Vec::new();
    let series = exact_series(&engine, &times, |t, s| {
        rows += 1;
        if every > 0 && rows % every == 0 {
            save_checkpoint(&out.join("checkpoints").join("state.xxck"), s, &spec, t)?;
        }
        if cfg.wants(Output::PJx) {
            pjx.push(("grid".to_string(), t, p_jx_full(s)));
        }
        Ok(())
    })?;
    series.save(&out.join("series.csv"))?;
    let mut extra = json!({ "rows": series.len() });
    if cfg.wants(Output::PJx) {
        let t_ghz = match cfg.targets.inertia {
            Some(i) => Some(std::f64::consts::PI * i),
            None => ghz_peak(&series).ok().filter(|e| !e.at_edge).map(|e| e.t),
        };
        if let Some(t_ghz) = t_ghz {
            let qs: Vec<usize> = cfg.targets.q.iter().copied().filter(|&q| qcat_resolvable(spec.n_sites(), q)).collect();
            let tq: Vec<f64> = qs.iter().map(|&q| 2.0 * t_ghz / q as f64).collect();
            for (t, p) in exact_p_jx(&engine, &tq)? {
                let q = qs[tq.iter().position(|&x| x == t).unwrap_or(0)];
                pjx.push((format!("q{q}"), t, p));
            }
            extra["t_ghz"] = json!(t_ghz);
        }
        write_pjx(&out.join("pjx.csv"), &pjx)?;
    }
    write_json(&out.join("meta.json"), &meta(cfg, &model, extra)?)
}

/// `oat-ref`: the collective-spin reference on the output grid.
pub fn oat_ref(cfg: &RunConfig, out: &Path) -> Result<()> {
    let model = model_of(cfg)?;
    let inertia = cfg.targets.inertia.unwrap_or_else(|| model.oat_inertia());
    let oat = OatSpec { n_sites: model.n_sites(), inertia };
    prepare_dir(out, false)?;
    let times = cfg.output_times();
    let series = dicke_series(&oat, &times);
    series.save(&out.join("series.csv"))?;
    if cfg.wants(Output::PJx) {
        let css = css_x_dicke(oat.n_sites);
        let mut tables: Vec<(String, f64, Vec<f64>)> =
            times.iter().map(|&t| ("grid".to_string(), t, p_jx_dicke(&oat_evolve(&css, &oat, t)))).collect();
        for &q in &cfg.targets.q {
            let t = oat.t_q(q);
            tables.push((format!("q{q}"), t, p_jx_dicke(&oat_evolve(&css, &oat, t))));
        }
        write_pjx(&out.join("pjx.csv"), &tables)?;
    }
    let extra = json!({ "inertia": inertia, "t_ghz": oat.t_ghz(), "rows": series.len() });
    write_json(&out.join("meta.json"), &meta(cfg, &model, extra)?)
}

/// `spectrum`: sector spectra and the tower-of-states fit.
pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<TowerFit> {
    let model = model_of(cfg)?;
    let engine = ExactEngine::with_size_cap(model.clone(), crate::exact::MAX_SIZE_CAP)?;
    std::fs::create_dir_all(out)?;
    let opts = SpectrumOptions {
        n_states: cfg.spectrum.n_states,
        tol: cfg.spectrum.tol,
        dense_limit: cfg.spectrum.dense_limit,
        ..Default::default()
    };
    let spectra = tower_spectrum(&engine, &opts)?;
    crate::exact::spectrum::write_spectrum_csv(&spectra, BufWriter::new(File::create(out.join("spectrum.csv"))?))?;
    let pts: Vec<(f64, f64)> = spectra.iter().map(|s| (s.m, s.tos_energy())).collect();
    let fit = tower_fit(&pts, model.n_sites())?;
    write_json(&out.join("meta.json"), &meta(cfg, &model, json!({ "tower_fit": fit }))?)?;
    Ok(fit)
}

/// `tvmc-evolve`: pair-product TDVP from `|CSS_x>`, resumable from
/// `checkpoints/state.json`.
pub fn tvmc_evolve(cfg: &RunConfig, out: &Path, resume: bool) -> Result<TvmcRun> {
    let model = model_of(cfg)?;
    let ck = out.join("checkpoints").join("state.json");
    prepare_dir(out, resume)?;
    let mut run = if resume && ck.exists() {
        TvmcRun::resume(&ck, model.clone(), Some(cfg.schedule.t_max))?
    } else {
        TvmcRun::new(model.clone(), cfg.tvmc_options())?
    };
    let every = (cfg.schedule.checkpoint_every * run.opts.observe_every.max(1)) as u64;
    let last = run.n_steps();
    let result = run.run_until(last, |r| {
        if every > 0 && r.step % every == 0 {
            r.save_checkpoint(&ck)?;
        }
        Ok(())
    });
    run.save_checkpoint(&ck)?;
    run.series.save(&out.join("series.csv"))?;
    if cfg.wants(Output::Params) {
        write_params_history(&out.join("params.csv"), &run)?;
    }
    if !run.cat_overlaps.is_empty() {
        let mut w = csv::Writer::from_path(out.join("cat_overlaps.csv"))?;
        w.write_record(["t", "q", "F", "F_err"])?;
        for (t, v) in &run.cat_overlaps {
            for (q, e) in run.opts.cat_targets.iter().zip(v) {
                w.write_record([format!("{t}"), q.to_string(), format!("{:.10e}", e.mean), format!("{:.3e}", e.err)])?;
            }
        }
        w.flush()?;
    }
    let extra = json!({
        "options": run.opts,
        "steps": run.step,
        "t_final": run.t(),
        "max_energy_drift_per_site": run.max_energy_drift,
        "energy_drift_ok": run.energy_drift_ok(),
        "completed": result.is_ok(),
        "error": result.as_ref().err().map(|e| e.to_string()),
    });
    write_json(&out.join("meta.json"), &meta(cfg, &model, extra)?)?;
    result.map(|_| run)
}

fn write_params_history(path: &Path, run: &TvmcRun) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "class", "f_re", "f_im", "g_re", "g_im", "h_re", "h_im"])?;
    for (t, p) in &run.params_history {
        for d in 0..p.n_classes() {
            w.write_record(
                [*t, d as f64, p.f[d].re, p.f[d].im, p.g[d].re, p.g[d].im, p.h.re, p.h.im].map(|v| format!("{v}")),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Dispatches a configuration to its engine.
pub fn evolve(cfg: &RunConfig, out: &Path) -> Result<()> {
    match cfg.engine {
        Engine::Exact => exact_evolve(cfg, out),
        Engine::Tvmc => tvmc_evolve(cfg, out, false).map(|_| ()),
        Engine::Dicke => oat_ref(cfg, out),
    }
}

/// Per-series results of [`analyze`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub source: String,
    pub n_sites: usize,
    /// Optimum of `ξ²`, located on the Kac time axis.
    pub squeezing: Option<Extremum>,
    pub t_ghz: Option<f64>,
    pub inertia: Option<crate::analysis::InertiaEstimate>,
    pub peaks: Vec<crate::analysis::SpectralPeak>,
}

/// `analyze`: post-processes stored series. `N` is read from `<J^x>(0) = N/2`.
pub fn analyze(inputs: &[PathBuf], out: &Path) -> Result<serde_json::Value> {
    if inputs.is_empty() {
        return Err(Error::Config("analyze needs at least one series".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut summaries = Vec::new();
    let mut sq = csv::Writer::from_path(out.join("squeezing_scaling.csv"))?;
    sq.write_record(["source", "N", "t_opt_kac", "xi2_opt", "at_edge"])?;
    let mut inert = csv::Writer::from_path(out.join("inertia.csv"))?;
    inert.write_record(["source", "N", "t_inv", "I_inv", "t_rev", "I_rev", "t_ghz", "I_ghz", "spread"])?;
    let mut peaks_w = csv::Writer::from_path(out.join("spectrum_peaks.csv"))?;
    peaks_w.write_record(["source", "N", "rank", "omega", "amplitude", "omega_I"])?;
    let mut cr = csv::Writer::from_path(out.join("cramer_rao.csv"))?;
    cr.write_record(["source", "N", "t", "lhs", "rhs", "ratio"])?;
    let mut census = csv::Writer::from_path(out.join("cat_census.csv"))?;
    census.write_record(["source", "N", "label", "t", "q", "count", "expected", "peaks_Jx"])?;
    let mut scaling_pts = Vec::new();
    for path in inputs {
        let series = ObservableSeries::load(path)?;
        if series.is_empty() {
            return Err(Error::Analysis(format!("{} is empty", path.display())));
        }
        let src = path.display().to_string();
        let n = (2.0 * series.rows[0].jx).round() as usize;
        let t = series.times();
        let t_kac: Vec<f64> = series.rows.iter().map(|r| if r.t_kac.is_finite() { r.t_kac } else { r.t }).collect();
        let xi: Vec<f64> = series.column(|r| r.xi2);
        let end = first_squeezing_window(&series.column(|r| r.jx));
        let squeezing = optimal_squeezing(&t_kac[..end], &xi[..end]).ok();
        if let Some(s) = squeezing {
            sq.write_record([src.clone(), n.to_string(), format!("{}", s.t), format!("{}", s.value), s.at_edge.to_string()])?;
            if !s.at_edge {
                scaling_pts.push((n as f64, s.value, s.t));
            }
        }
        let t_ghz = ghz_peak(&series).ok().filter(|e| !e.at_edge).map(|e| e.t);
        let inertia = extract_inertia(&t, &series.column(|r| r.jx), t_ghz).ok();
        if let Some(i) = &inertia {
            let o = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
            inert.write_record([
                src.clone(),
                n.to_string(),
                format!("{}", i.t_inv),
                format!("{}", i.from_inversion),
                o(i.t_rev),
                o(i.from_revival),
                o(i.t_ghz),
                o(i.from_ghz),
                format!("{}", i.spread),
            ])?;
        }
        let peaks = quench_spectrum(&t, &series.column(|r| r.jx), &SpectrumWindow::default())
            .map(|s| s.peaks.into_iter().take(5).collect::<Vec<_>>())
            .unwrap_or_default();
        for (k, p) in peaks.iter().enumerate() {
            let wi = inertia.as_ref().map_or(String::new(), |i| format!("{}", p.omega * i.inertia));
            peaks_w.write_record([src.clone(), n.to_string(), k.to_string(), format!("{}", p.omega), format!("{}", p.amplitude), wi])?;
        }
        for r in cramer_rao_report(&series) {
            cr.write_record([src.clone(), n.to_string(), format!("{}", r.t), format!("{}", r.lhs), format!("{}", r.rhs), format!("{}", r.ratio)])?;
        }
        let pjx_path = path.with_file_name("pjx.csv");
        if pjx_path.exists() {
            for (label, tt, p) in read_pjx(&pjx_path)? {
                let Some(q) = label.strip_prefix('q').and_then(|q| q.parse::<usize>().ok()) else { continue };
                if let Ok(c) = cat_peak_census(&p, q) {
                    let locs: Vec<String> = c.peaks.iter().map(|p| format!("{}", p.0)).collect();
                    census.write_record([src.clone(), n.to_string(), label.clone(), format!("{tt}"), q.to_string(), c.count().to_string(), c.expected.to_string(), locs.join(" ")])?;
                }
            }
        }
        summaries.push(SeriesSummary { source: src, n_sites: n, squeezing, t_ghz, inertia, peaks });
    }
    for w in [&mut sq, &mut inert, &mut peaks_w, &mut cr, &mut census] {
        w.flush()?;
    }
    let scaling = squeezing_scaling(&scaling_pts).ok();
    let summary = json!({ "series": summaries, "squeezing_scaling": scaling });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn read_pjx(path: &Path) -> Result<Vec<(String, f64, Vec<f64>)>> {
    let mut out: Vec<(String, f64, Vec<f64>)> = Vec::new();
    for rec in csv::Reader::from_path(path)?.records() {
        let rec = rec?;
        let parse = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::Analysis(format!("bad pjx entry: {e}")));
        let (label, t, p) = (rec[0].to_string(), parse(1)?, parse(3)?);
        match out.last_mut() {
            Some(last) if last.0 == label && last.1 == t => last.2.push(p),
            _ => out.push((label, t, vec![p])),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    JxDynamics,
    Squeezing,
    PjxCats,
    VarjxParity,
    Coherence,
    Tower,
    Benchmark,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::JxDynamics,
        Figure::Squeezing,
        Figure::PjxCats,
        Figure::VarjxParity,
        Figure::Coherence,
        Figure::Tower,
        Figure::Benchmark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::JxDynamics => "jx_dynamics",
            Figure::Squeezing => "squeezing",
            Figure::PjxCats => "pjx_cats",
            Figure::VarjxParity => "varjx_parity",
            Figure::Coherence => "coherence",
            Figure::Tower => "tower",
            Figure::Benchmark => "benchmark",
        }
    }

    pub fn parse(s: &str) -> Result<Figure> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Figure::ALL.iter().map(|f| f.name()).collect();
            Error::Config(format!("unknown figure \"{s}\", expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::Config(format!("unknown preset \"{s}\", expected desk or paper"))),
        }
    }
}

/// Largest lattice side the tVMC driver runs.
pub const FEASIBLE_TVMC_L: usize = 8;

/// Shared knobs of [`reproduce`].
#[derive(Clone, Debug)]
pub struct ReproduceOptions {
    pub preset: Preset,
    pub seed: u64,
    pub threads: usize,
    /// tVMC samples per RK stage.
    pub samples: usize,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions { preset: Preset::Desk, seed: 1, threads: 1, samples: 10_000 }
    }
}

struct Manifest {
    opts: ReproduceOptions,
    jobs: Vec<serde_json::Value>,
    files: Vec<String>,
    warnings: Vec<String>,
    start: Instant,
}

impl Manifest {
    fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        PathBuf::from(name)
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }
}

fn tvmc_sizes(m: &mut Manifest, desk: &[usize], paper: &[usize]) -> Vec<usize> {
    match m.opts.preset {
        Preset::Desk => desk.to_vec(),
        Preset::Paper => {
            let (ok, skip): (Vec<usize>, Vec<usize>) = paper.iter().partition(|&&l| l <= FEASIBLE_TVMC_L);
            if !skip.is_empty() {
                m.warn(format!("sides {skip:?} exceed desk capability; running {ok:?}"));
            }
            ok
        }
    }
}

fn tvmc_config(m: &Manifest, spec: &LatticeSpec, t_max: f64, dt_outer: f64, fidelities: bool) -> RunConfig {
    let mut cfg = RunConfig { engine: Engine::Tvmc, seed: m.opts.seed, threads: m.opts.threads, ..Default::default() };
    cfg.lattice.geometry = spec.geometry;
    cfg.lattice.l = spec.lx;
    cfg.lattice.ly = (spec.ly != spec.lx).then_some(spec.ly);
    cfg.lattice.alpha = spec.alpha;
    cfg.schedule.t_max = t_max;
    cfg.schedule.dt_outer = dt_outer;
    cfg.schedule.dt = 0.05;
    cfg.sampler.samples_per_stage = m.opts.samples;
    cfg.sampler.fidelity_samples = m.opts.samples;
    cfg.observables = if fidelities { vec![Output::Fidelities] } else { Vec::new() };
    cfg
}

fn run_tvmc_job(m: &mut Manifest, out: &Path, name: &str, cfg: &RunConfig) -> Result<ObservableSeries> {
    let dir = out.join(name);
    let run = tvmc_evolve(cfg, &dir, false)?;
    m.jobs.push(json!({ "job": name, "engine": "tvmc", "config": cfg, "seed": cfg.seed }));
    m.files.push(format!("{name}/series.csv"));
    Ok(run.series)
}

/// Inertia of the 4×4 square reference lattice from its tower of states.
fn reference_inertia(m: &mut Manifest) -> Result<(LatticeSpec, f64)> {
    let spec = LatticeSpec::square(4, 3.0);
    let (_, fit) = tower_study(&spec, 2)?;
    m.jobs.push(json!({ "job": "reference_tower", "lattice": spec, "inertia": fit.inertia }));
    Ok((spec, fit.inertia))
}

/// Regenerates the data behind one figure into `out`, with `manifest.json`.
pub fn reproduce(figure: Figure, opts: &ReproduceOptions, out: &Path) -> Result<serde_json::Value> {
    std::fs::create_dir_all(out)?;
    let mut m = Manifest { opts: opts.clone(), jobs: Vec::new(), files: Vec::new(), warnings: Vec::new(), start: Instant::now() };
    let mut results = json!({});
    match figure {
        Figure::Tower => {
            for geom in [Geometry::Square, Geometry::Triangular] {
                let spec = LatticeSpec::new(geom, 4, 3.0);
                let (spectra, fit) = tower_study(&spec, 4)?;
                let name = format!("spectrum_{}.csv", geom.name());
                let f = m.file(&name);
                crate::exact::spectrum::write_spectrum_csv(&spectra, BufWriter::new(File::create(out.join(f))?))?;
                results[geom.name()] = json!(fit);
                m.jobs.push(json!({ "job": name, "engine": "exact", "lattice": spec }));
            }
        }
        Figure::JxDynamics => {
            let (ref_spec, i_ref) = reference_inertia(&mut m)?;
            let engine = ExactEngine::new(XxModel::new(&ref_spec)?)?;
            let t_max = 3.0 * 4.0 * std::f64::consts::PI * i_ref;
            let series = exact_series(&engine, &uniform_times(t_max, 0.1), |_, _| Ok(()))?;
            let f = m.file("exact_16/series.csv");
            std::fs::create_dir_all(out.join("exact_16"))?;
            series.save(&out.join(f))?;
            m.jobs.push(json!({ "job": "exact_16", "engine": "exact", "lattice": ref_spec, "dt": 0.1 }));
            let spec = quench_spectrum(&series.times(), &series.column(|r| r.jx), &SpectrumWindow::default())?;
            let mut w = csv::Writer::from_path(out.join(m.file("spectrum_16.csv")))?;
            w.write_record(["omega", "amplitude", "omega_I"])?;
            for (om, a) in spec.omega.iter().zip(&spec.amplitude) {
                w.write_record([om, a, &(om * i_ref)].map(|v| format!("{v}")))?;
            }
            w.flush()?;
            let mut rows = vec![json!({ "N": 16, "predicted": i_ref, "extracted": extract_inertia(&series.times(), &series.column(|r| r.jx), None)?.inertia })];
            for l in tvmc_sizes(&mut m, &[6], &[6, 8, 10, 12]) {
                let lat = LatticeSpec::square(l, 3.0);
                let predicted = kac_rescale_inertia(i_ref, &ref_spec, &lat)?;
                let cfg = tvmc_config(&m, &lat, 2.0 * std::f64::consts::PI * predicted * 1.25, 0.25, false);
                let s = run_tvmc_job(&mut m, out, &format!("tvmc_{}", lat.n_sites()), &cfg)?;
                let extracted = extract_inertia(&s.times(), &s.column(|r| r.jx), None).map(|e| e.inertia).ok();
                rows.push(json!({ "N": lat.n_sites(), "predicted": predicted, "extracted": extracted }));
            }
            results["inertia"] = json!(rows);
            results["peaks"] = json!(spec.peaks.iter().take(5).map(|p| json!({ "omega": p.omega, "omega_I": p.omega * i_ref, "amplitude": p.amplitude })).collect::<Vec<_>>());
        }
        Figure::Squeezing => {
            let mut oat_pts = Vec::new();
            for n in [16usize, 36, 64, 144, 256, 576, 1024, 2304, 4096] {
                let oat = OatSpec::bare(n, 1.0);
                oat_pts.push(oat_squeezing_point(&oat)?);
            }
            let mut w = csv::Writer::from_path(out.join(m.file("oat_squeezing.csv")))?;
            w.write_record(["N", "xi2_opt", "t_opt"])?;
            for p in &oat_pts {
                w.write_record([p.0, p.1, p.2].map(|v| format!("{v}")))?;
            }
            w.flush()?;
            results["oat"] = json!(squeezing_scaling(&oat_pts)?);
            let (ref_spec, i_ref) = reference_inertia(&mut m)?;
            let mut pts = Vec::new();
            for l in tvmc_sizes(&mut m, &[4, 6], &[4, 6, 8, 10, 12]) {
                let lat = LatticeSpec::square(l, 3.0);
                let i = kac_rescale_inertia(i_ref, &ref_spec, &lat)?;
                let cfg = tvmc_config(&m, &lat, 0.6 * i, 0.05, false);
                let s = run_tvmc_job(&mut m, out, &format!("tvmc_{}", lat.n_sites()), &cfg)?;
                let t_kac: Vec<f64> = s.column(|r| r.t_kac);
                let e = optimal_squeezing(&t_kac, &s.column(|r| r.xi2))?;
                pts.push((lat.n_sites() as f64, e.value, e.t));
            }
            let mut w = csv::Writer::from_path(out.join(m.file("dipolar_squeezing.csv")))?;
            w.write_record(["N", "xi2_opt", "t_opt_kac"])?;
            for p in &pts {
                w.write_record([p.0, p.1, p.2].map(|v| format!("{v}")))?;
            }
            w.flush()?;
            match squeezing_scaling(&pts) {
                Ok(fit) => results["dipolar"] = json!(fit),
                Err(e) => m.warn(format!("dipolar scaling fit skipped: {e}")),
            }
        }
        Figure::PjxCats => {
            let spec = LatticeSpec::rectangular(Geometry::Square, 5, 4, 3.0);
            let engine = ExactEngine::new(XxModel::new(&spec)?)?;
            let coarse = exact_series(&engine, &uniform_times(25.0, 0.1), |_, _| Ok(()))?;
            let t_ghz = ghz_peak(&coarse)?.t;
            let qs = [2usize, 4, 6];
            let tq: Vec<f64> = qs.iter().map(|&q| 2.0 * t_ghz / q as f64).collect();
            let tables = exact_p_jx(&engine, &tq)?;
            let labelled: Vec<(String, f64, Vec<f64>)> = tables
                .iter()
                .map(|(t, p)| {
                    let q = qs[tq.iter().position(|x| x == t).unwrap_or(0)];
                    (format!("q{q}"), *t, p.clone())
                })
                .collect();
            write_pjx(&out.join(m.file("pjx.csv")), &labelled)?;
            let mut census = Vec::new();
            for (label, t, p) in &labelled {
                let q: usize = label[1..].parse().unwrap_or(2);
                let c = cat_peak_census(p, q)?;
                census.push(json!({ "q": q, "t": t, "count": c.count(), "expected": c.expected, "peaks": c.peaks }));
            }
            let ghz_table = &labelled.iter().find(|x| x.0 == "q2").expect("q=2 present").2;
            results["t_ghz"] = json!(t_ghz);
            results["census"] = json!(census);
            results["tail_fit"] = json!(exponential_tail_fit(ghz_table, 2)?);
            results["two_tail_fit"] = json!(two_tail_fit(ghz_table)?);
            m.jobs.push(json!({ "job": "pjx_cats", "engine": "exact", "lattice": spec }));
        }
        Figure::VarjxParity => {
            let spec = LatticeSpec::square(4, 3.0);
            let engine = ExactEngine::new(XxModel::new(&spec)?)?;
            let series = exact_series(&engine, &uniform_times(20.0, 0.05), |_, _| Ok(()))?;
            series.save(&out.join(m.file("series.csv")))?;
            let mut w = csv::Writer::from_path(out.join(m.file("cramer_rao.csv")))?;
            w.write_record(["t", "lhs", "rhs", "ratio"])?;
            for r in cramer_rao_report(&series) {
                w.write_record([r.t, r.lhs, r.rhs, r.ratio].map(|v| format!("{v}")))?;
            }
            w.flush()?;
            let peak = ghz_peak(&series)?;
            let row = &series.rows[peak.index];
            results["t_ghz"] = json!(peak.t);
            results["var_jx_fraction"] = json!(4.0 * row.var_jx / (16.0 * 16.0));
            results["cramer_rao_ratio"] = json!(row.dparity_dtheta.powi(2) / (4.0 * row.var_jx));
            m.jobs.push(json!({ "job": "varjx_parity", "engine": "exact", "lattice": spec }));
        }
        Figure::Coherence => {
            let (ref_spec, i_ref) = reference_inertia(&mut m)?;
            let mut cmax = Vec::new();
            for l in tvmc_sizes(&mut m, &[4, 6], &[4, 6, 8, 10, 12]) {
                let lat = LatticeSpec::square(l, 3.0);
                let i = kac_rescale_inertia(i_ref, &ref_spec, &lat)?;
                let cfg = tvmc_config(&m, &lat, 1.3 * std::f64::consts::PI * i, 0.25, true);
                let s = run_tvmc_job(&mut m, out, &format!("tvmc_{}", lat.n_sites()), &cfg)?;
                let best = s.rows.iter().map(|r| r.coherence).fold(f64::NEG_INFINITY, f64::max);
                cmax.push(json!({ "N": lat.n_sites(), "C_max": best }));
            }
            results["c_max"] = json!(cmax);
        }
        Figure::Benchmark => {
            let spec = LatticeSpec::square(4, 3.0);
            let engine = ExactEngine::new(XxModel::new(&spec)?)?;
            let cfg = tvmc_config(&m, &spec, 31.0, 0.25, true);
            let tv = run_tvmc_job(&mut m, out, "tvmc_16", &cfg)?;
            let ex = exact_series(&engine, &tv.times(), |_, _| Ok(()))?;
            let errs = tv.errors.clone().unwrap_or_default();
            let mut w = csv::Writer::from_path(out.join(m.file("benchmark.csv")))?;
            w.write_record(["t", "var_exact", "var_tvmc", "var_err", "C_exact", "C_tvmc", "C_err"])?;
            for ((a, b), e) in ex.rows.iter().zip(&tv.rows).zip(errs.iter().chain(std::iter::repeat(&ObservableRow::empty(0.0)))) {
                w.write_record([a.t, a.var_jx, b.var_jx, e.var_jx, a.coherence, b.coherence, e.coherence].map(|v| format!("{v}")))?;
            }
            w.flush()?;
            m.jobs.push(json!({ "job": "exact_16", "engine": "exact", "lattice": spec }));
        }
    }
    let manifest = json!({
        "figure": figure.name(),
        "preset": m.opts.preset,
        "seed": m.opts.seed,
        "threads": m.opts.threads,
        "samples_per_stage": m.opts.samples,
        "version": env!("CARGO_PKG_VERSION"),
        "jobs": m.jobs,
        "files": m.files,
        "warnings": m.warnings,
        "results": results,
        "wall_time_s": m.start.elapsed().as_secs_f64(),
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// `(N, ξ²_opt, t_opt)` of the OAT rotor, by golden-section search between
/// `t = 0` and the time `<J^x>` halves.
pub fn oat_squeezing_point(oat: &OatSpec) -> Result<(f64, f64, f64)> {
    let css = css_x_dicke(oat.n_sites);
    let xi = |t: f64| dicke_observables(&oat_evolve(&css, oat, t)).xi2();
    let n = oat.n_sites as f64;
    // (N/2) cos^{N−1}(t/2I) = N/4.
    let t_half = 2.0 * oat.inertia * (0.5f64.powf(1.0 / (n - 1.0))).acos();
    let grid = uniform_times(t_half, t_half / 200.0);
    let vals: Vec<f64> = grid.iter().map(|&t| xi(t)).collect();
    let coarse = optimal_squeezing(&grid, &vals)?;
    if coarse.at_edge {
        return Err(Error::Analysis(format!("no squeezing optimum below t = {t_half}")));
    }
    let (mut a, mut b) = (grid[coarse.index - 1], grid[coarse.index + 1]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if xi(c) < xi(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let t = 0.5 * (a + b);
    Ok((n, xi(t), t))
}
