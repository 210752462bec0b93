//! Acceptance suite. Runs every criterion and prints one `PASS`/`FAIL` line
//! per criterion (indented lines below it are details), then a tally. Failing
//! criteria are reported, not fatal, so the rest of `cargo test` still runs;
//! `-- --strict` exits non-zero on any failure. Criteria can be selected by
//! id: `-- c1 c4`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxcascade::analysis::{
    cat_peak_census, exponential_tail_fit, extract_inertia, kac_rescale_inertia, optimal_squeezing_series, two_tail_fit,
    quench_spectrum, squeezing_scaling, SpectrumWindow, TowerFit,
};
use xxcascade::dicke::{css_x_dicke, dicke_observables, oat_evolve, OatSpec};
use xxcascade::exact::{full_observables, p_jx_full, ExactEngine, FullState, SpinSpace};
use xxcascade::lattice::{CouplingTable, Geometry, LatticeSpec, XxModel};
use xxcascade::pairproduct::{
    cat_fidelities, estimate_observables, metropolis_sample, qcat_overlaps, uniform_samples, PairProduct,
    PairProductParams, SamplerOptions, Walkers,
};
use xxcascade::run::{exact_series, ghz_peak, oat_squeezing_point, tower_study, uniform_times};
use xxcascade::tvmc::{SolverMode, TdvpOptions, TvmcOptions, TvmcRun};
use xxcascade::ObservableSeries;

type Outcome = (bool, Vec<String>);

struct Report {
    ok: bool,
    details: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Report { ok: true, details: Vec::new() }
    }

    fn check(&mut self, pass: bool, msg: String) {
        self.ok &= pass;
        self.details.push(format!("{} {msg}", if pass { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("     {msg}"));
    }

    fn done(self) -> Outcome {
        (self.ok, self.details)
    }
}

// ---------------------------------------------------------------- shared runs

fn tower(geometry: Geometry) -> &'static TowerFit {
    static SQ: OnceLock<TowerFit> = OnceLock::new();
    static TRI: OnceLock<TowerFit> = OnceLock::new();
    let cell = if geometry == Geometry::Square { &SQ } else { &TRI };
    cell.get_or_init(|| tower_study(&LatticeSpec::new(geometry, 4, 3.0), 2).unwrap().1)
}

fn reference() -> LatticeSpec {
    LatticeSpec::square(4, 3.0)
}

fn predicted_inertia(l: usize) -> f64 {
    kac_rescale_inertia(tower(Geometry::Square).inertia, &reference(), &LatticeSpec::square(l, 3.0)).unwrap()
}

/// α = 3 tVMC trajectory from `|CSS_x>` past the predicted revival.
fn dipolar_run(l: usize) -> &'static TvmcRun {
    static RUNS: OnceLock<Vec<(usize, TvmcRun)>> = OnceLock::new();
    let runs = RUNS.get_or_init(|| {
        [4usize, 6, 8]
            .iter()
            .map(|&l| {
                let start = Instant::now();
                let model = XxModel::new(&LatticeSpec::square(l, 3.0)).unwrap();
                let t_rev = 4.0 * PI * predicted_inertia(l);
                // dt = 0.1 leaves a systematic energy drift of about 5e-5 per site per
                // unit time at N = 64; dt = 0.05 removes it.
                let dt = 0.05;
                let fidelity_samples = if l == 4 { 10_000 } else { 0 };
                let opts = TvmcOptions {
                    dt,
                    t_max: (1.08 * t_rev / dt).ceil() * dt,
                    observe_every: 2,
                    sampler: SamplerOptions { n_samples: 10_000, ..Default::default() },
                    fidelity_samples,
                    seed: 2024,
                    ..Default::default()
                };
                let mut run = TvmcRun::new(model, opts).unwrap();
                run.run().unwrap();
                eprintln!("  [tVMC N={} to t={:.1} in {:.0}s]", l * l, run.t(), start.elapsed().as_secs_f64());
                (l, run)
            })
            .collect()
    });
    &runs.iter().find(|(k, _)| *k == l).expect("size is run").1
}

fn exact_grid(spec: &LatticeSpec, times: &[f64]) -> ObservableSeries {
    let engine = ExactEngine::new(XxModel::new(spec).unwrap()).unwrap();
    exact_series(&engine, times, |_, _| Ok(())).unwrap()
}

fn col(s: &ObservableSeries, f: impl Fn(&xxcascade::ObservableRow) -> f64) -> Vec<f64> {
    s.rows.iter().map(f).collect()
}

// ------------------------------------------------------------------ criteria

fn c1_tower() -> Outcome {
    let mut r = Report::new();
    for (geom, target) in [(Geometry::Square, 2.4168), (Geometry::Triangular, 1.9587)] {
        let fit = tower(geom);
        let rel = (fit.inertia - target) / target;
        r.check(
            rel.abs() <= 0.005,
            format!("{} 4x4: I = {:.5} vs {target} ({:+.3}%), R² {:.6}", geom.name(), fit.inertia, 100.0 * rel, fit.r2),
        );
    }
    r.done()
}

fn c2_oat_exactness() -> Outcome {
    let mut r = Report::new();
    let model = XxModel::new(&LatticeSpec::square(4, 0.0)).unwrap();
    let inertia = model.oat_inertia();
    let t_end = 4.0 * PI * inertia;
    let opts = TvmcOptions {
        dt: t_end / 1000.0,
        t_max: t_end,
        observe_every: 40,
        sampler: SamplerOptions { n_samples: 10_000, ..Default::default() },
        tdvp: TdvpOptions { solver: SolverMode::Pinv, ..Default::default() },
        fidelity_samples: 0,
        seed: 7,
        ..Default::default()
    };
    let mut run = TvmcRun::new(model, opts).unwrap();
    run.run().unwrap();
    let errs = run.series.errors.clone().unwrap();
    let oat = OatSpec { n_sites: 16, inertia };
    let (mut worst_jx, mut worst_var, mut worst_xi, mut worst_bar) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut n_xi, mut n_bad) = (0usize, 0usize);
    for (row, err) in run.series.rows.iter().zip(&errs) {
        let d = dicke_observables(&oat_evolve(&css_x_dicke(16), &oat, row.t));
        let z = |x: f64, y: f64, e: f64| if e > 0.0 { (x - y).abs() / e } else if (x - y).abs() < 1e-9 { 0.0 } else { f64::INFINITY };
        let zj = z(row.jx, d.moments.mean[0], err.jx);
        let zv = z(row.var_jx, d.var_jx(), err.var_jx);
        worst_jx = worst_jx.max(zj);
        worst_var = worst_var.max(zv);
        worst_bar = worst_bar.max(err.jx / 8.0);
        let mut bad = zj > 3.0 || zv > 3.0;
        // ξ_R² is defined only where the mean spin is resolved.
        if d.moments.mean[0].abs() > 3.0 * err.jx.max(1e-12) {
            n_xi += 1;
            let zx = z(row.xi2, d.xi2(), err.xi2);
            worst_xi = worst_xi.max(zx);
            bad |= zx > 3.0;
        }
        n_bad += bad as usize;
    }
    let n = run.series.len();
    r.check(n_bad == 0, format!("{n} times to t = 4πI = {t_end:.2}: {n_bad} outside 3σ"));
    r.note(format!("max |Δ|/σ: <Jx> {worst_jx:.2}, Var(Jx) {worst_var:.2}, ξ² {worst_xi:.2} ({n_xi} times with resolved <J>)"));
    r.check(worst_bar <= 0.02, format!("largest <Jx> error bar {:.3}% of N/2", 100.0 * worst_bar));
    r.done()
}

fn c3_benchmark() -> Outcome {
    let mut r = Report::new();
    let run = dipolar_run(4);
    let times = col(&run.series, |row| row.t);
    let exact = exact_grid(&reference(), &times);
    let t_rev = extract_inertia(&times, &col(&exact, |row| row.jx), None).unwrap().t_rev.unwrap();
    let final_from = 0.9 * t_rev;
    let (mut worst_var, mut t_var, mut n_var) = (0.0f64, 0.0, 0usize);
    let (mut worst_c, mut t_c, mut worst_c_end) = (0.0f64, 0.0, 0.0f64);
    let mut n = 0;
    for (v, e) in run.series.rows.iter().zip(&exact.rows) {
        if v.t > t_rev + 1e-9 {
            break;
        }
        n += 1;
        let rel = if e.var_jx > 0.0 { (v.var_jx - e.var_jx).abs() / e.var_jx } else { (v.var_jx - e.var_jx).abs() };
        if rel > 0.05 {
            n_var += 1;
        }
        if rel > worst_var {
            (worst_var, t_var) = (rel, v.t);
        }
        let dc = (v.coherence - e.coherence).abs();
        if v.t < final_from {
            if dc > worst_c {
                (worst_c, t_c) = (dc, v.t);
            }
        } else {
            worst_c_end = worst_c_end.max(dc);
        }
    }
    r.check(
        n_var == 0,
        format!("Var(Jx) within 5% to t_rev = {t_rev:.2}: {n_var}/{n} times outside, worst {:.1}% at t = {t_var:.1}", 100.0 * worst_var),
    );
    for t in [t_rev / 2.0, t_rev] {
        let k = times.iter().position(|&x| x >= t - 0.05).unwrap();
        r.note(format!("t = {:.1}: Var(Jx) tVMC {:.3}, exact {:.3}", times[k], run.series.rows[k].var_jx, exact.rows[k].var_jx));
    }
    r.check(worst_c <= 0.05, format!("C within 0.05 before {final_from:.1}: worst {worst_c:.3} at t = {t_c:.1}"));
    r.check(worst_c_end <= 0.1, format!("C within 0.1 after {final_from:.1}: worst {worst_c_end:.3}"));
    r.done()
}

fn c4_cat_metrology() -> Outcome {
    let mut r = Report::new();
    let spec = reference();
    let i_eff = tower(Geometry::Square).inertia;
    let lo = 0.8 * PI * i_eff;
    let times: Vec<f64> = uniform_times(0.4 * PI * i_eff, 0.05).iter().map(|t| lo + t).collect();
    let grid = exact_grid(&spec, &times);
    let peak = ghz_peak(&grid).unwrap();
    let engine = ExactEngine::new(XxModel::new(&spec).unwrap()).unwrap();
    let mut state = engine.css_x();
    engine.propagate(&mut state, peak.t).unwrap();
    let obs = full_observables(&state);
    let n = 16.0;
    let frac = 4.0 * obs.var_jx() / (n * n);
    let var_p = 1.0 - obs.parity * obs.parity;
    let ratio = obs.dparity_dtheta.powi(2) / (var_p * 4.0 * obs.var_jx());
    r.note(format!("t_GHZ = {:.3} (F_GHZ {:.4})", peak.t, obs.f_ghz));
    r.check(frac >= 0.9, format!("4Var(Jx)/N² = {frac:.4}"));
    r.check(ratio >= 0.95, format!("(d<P>/dθ)²/(Var P · 4Var Jx) = {ratio:.4}"));
    r.done()
}

fn c5_cat_census() -> Outcome {
    let mut r = Report::new();
    let spec = LatticeSpec::rectangular(Geometry::Square, 5, 4, 3.0);
    let engine = ExactEngine::new(XxModel::new(&spec).unwrap()).unwrap();
    let i_pred = kac_rescale_inertia(tower(Geometry::Square).inertia, &reference(), &spec).unwrap();
    // Coarse sweep to just before the GHZ time, then a fine grid around it.
    let mut times = uniform_times(0.8 * PI * i_pred, 0.5);
    let lo = *times.last().unwrap();
    times.extend(uniform_times(0.4 * PI * i_pred, 0.05).iter().skip(1).map(|t| lo + t));
    let mut worst_odd = 0.0f64;
    let series = exact_series(&engine, &times, |_, s| {
        let p = p_jx_full(s);
        let n = p.len() - 1;
        for (i, v) in p.iter().enumerate() {
            if (n - i) % 2 == 1 {
                worst_odd = worst_odd.max(v.abs());
            }
        }
        Ok(())
    })
    .unwrap();
    let fine = ObservableSeries { rows: series.rows.iter().filter(|row| row.t >= lo).copied().collect(), errors: None };
    let t_ghz = ghz_peak(&fine).unwrap().t;
    r.note(format!("N = 20, t_GHZ = {t_ghz:.3} (predicted πI = {:.3})", PI * i_pred));
    let mut tables = Vec::new();
    for q in [6usize, 4, 2] {
        let t_q = 2.0 * t_ghz / q as f64;
        let mut s = engine.css_x();
        engine.propagate(&mut s, t_q).unwrap();
        let p = p_jx_full(&s);
        let n = p.len() - 1;
        for (i, v) in p.iter().enumerate() {
            if (n - i) % 2 == 1 {
                worst_odd = worst_odd.max(v.abs());
            }
        }
        tables.push((q, t_q, p));
    }
    r.check(worst_odd <= 1e-12, format!("largest odd-Jx probability {worst_odd:.1e} over {} times", times.len() + 3));
    for (q, t_q, p) in &tables {
        let census = cat_peak_census(p, *q).unwrap();
        let at: Vec<String> = census.peaks.iter().map(|(m, _)| format!("{m}")).collect();
        r.check(
            census.count() == q / 2 + 1,
            format!("t_{q} = {t_q:.3}: {} peaks (expected {}) at Jx = [{}]", census.count(), q / 2 + 1, at.join(", ")),
        );
    }
    let ghz = &tables[2].2;
    let fit = two_tail_fit(ghz).unwrap();
    r.check(fit.r2 > 0.95, format!("tails at t_2: P ∝ cosh(κ Jx) with κ = {:.3}, R² {:.4} over {} points", fit.kappa, fit.r2, fit.n_points));
    for skip in [0, 2] {
        let line = exponential_tail_fit(ghz, skip).unwrap();
        r.note(format!("single exponential from distance {skip}: slope {:.3}, R² {:.4}", line.slope, line.r2));
    }
    r.done()
}

fn c6_rotor_spectroscopy() -> Outcome {
    let mut r = Report::new();
    let i_eff = tower(Geometry::Square).inertia;
    let t_end = 3.0 * 4.0 * PI * i_eff;
    let times = uniform_times(t_end, 0.1);
    let series = exact_grid(&reference(), &times);
    let s = quench_spectrum(&times, &col(&series, |row| row.jx), &SpectrumWindow::default()).unwrap();
    let strongest: Vec<f64> = s.peaks.iter().take(3).map(|p| p.omega * i_eff).collect();
    let bin = s.bin * i_eff;
    let mut found: Vec<f64> = strongest.clone();
    found.sort_by(f64::total_cmp);
    r.note(format!("T = {:.1}, bin ωI = {bin:.4}, strongest ωI = {strongest:.3?}", times.last().unwrap()));
    for (w, target) in found.iter().zip([0.5, 1.5, 2.5]) {
        r.check((w - target).abs() <= bin, format!("ωI = {w:.4} vs {target}"));
    }
    r.done()
}

fn c7_inertia_scaling() -> Outcome {
    let mut r = Report::new();
    for l in [6usize, 8] {
        let run = dipolar_run(l);
        let t = col(&run.series, |row| row.t);
        let est = extract_inertia(&t, &col(&run.series, |row| row.jx), None).unwrap();
        let pred = predicted_inertia(l);
        let rel = (est.inertia - pred) / pred;
        r.check(
            rel.abs() <= 0.05,
            format!(
                "N = {}: tVMC I = {:.4} (t_inv {:.2}, revival {:?}) vs Kac prediction {pred:.4} ({:+.2}%)",
                l * l,
                est.inertia,
                est.t_inv,
                est.from_revival.map(|v| (v * 1e4).round() / 1e4),
                100.0 * rel
            ),
        );
    }
    r.done()
}

fn c8_squeezing_scaling() -> Outcome {
    let mut r = Report::new();
    let pts: Vec<(f64, f64, f64)> = [4usize, 6, 8]
        .iter()
        .map(|&l| {
            let e = optimal_squeezing_series(&dipolar_run(l).series).unwrap();
            let model = XxModel::new(&LatticeSpec::square(l, 3.0)).unwrap();
            ((l * l) as f64, e.value, model.kac_time(e.t))
        })
        .collect();
    for p in &pts {
        r.note(format!("N = {}: ξ²_opt = {:.4} at Kac time {:.3}", p.0, p.1, p.2));
    }
    let dip = squeezing_scaling(&pts).unwrap();
    r.check((0.6..=0.85).contains(&dip.nu), format!("tVMC ν = {:.4} in [0.6, 0.85]", dip.nu));
    r.check((0.25..=0.45).contains(&dip.mu), format!("tVMC μ = {:.4} in [0.25, 0.45]", dip.mu));
    let oat: Vec<(f64, f64, f64)> =
        (4..=12).map(|k| oat_squeezing_point(&OatSpec::bare(1 << k, 1.0)).unwrap()).collect();
    let fit = squeezing_scaling(&oat).unwrap();
    r.check((fit.nu - 2.0 / 3.0).abs() <= 0.02, format!("OAT N = 16..4096: ν = {:.4} vs 2/3 ± 0.02", fit.nu));
    r.check((fit.mu - 1.0 / 3.0).abs() <= 0.02, format!("OAT N = 16..4096: μ = {:.4} vs 1/3 ± 0.02", fit.mu));
    r.done()
}

/// Normalized amplitudes of the pair-product state, summed term by term.
fn dense_pair_product(table: &CouplingTable, p: &PairProductParams) -> Vec<Complex64> {
    let n = table.n_sites();
    let logs: Vec<Complex64> = (0..1u32 << n)
        .map(|s| {
            let sig = |i: usize| if s >> i & 1 == 1 { 1.0 } else { -1.0 };
            let mut l = p.offset;
            for i in 0..n {
                let mut field = p.h;
                for k in 0..n {
                    if k != i {
                        field += p.g[table.class_of(i, k).unwrap()];
                    }
                }
                l += field * sig(i);
                for j in i + 1..n {
                    l += p.f[table.class_of(i, j).unwrap()] * sig(i) * sig(j);
                }
            }
            l
        })
        .collect();
    let top = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let amps: Vec<Complex64> = logs.iter().map(|l| (l - top).exp()).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter().map(|a| a / norm).collect()
}

fn dense_fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ov: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    ov.norm_sqr() / (na * nb)
}

fn c9_estimators() -> Outcome {
    let mut r = Report::new();
    let lattices = [
        LatticeSpec::rectangular(Geometry::Square, 5, 2, 3.0),
        LatticeSpec::triangular(3, 1.5),
        LatticeSpec::rectangular(Geometry::Square, 5, 2, 0.0),
        LatticeSpec::rectangular(Geometry::Square, 5, 2, 3.0),
        LatticeSpec::triangular(3, 3.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut total, mut worst) = (0usize, (0.0f64, String::new()));
    let mut outside = Vec::new();
    for (set, spec) in lattices.iter().enumerate() {
        let model = XxModel::new(spec).unwrap();
        let table: Arc<CouplingTable> = model.table.clone();
        let nc = table.n_classes();
        let mut c = |re: f64, im: f64| Complex64::new(rng.gen_range(-re..=re), rng.gen_range(-im..=im));
        let params = PairProductParams {
            f: (0..nc).map(|_| c(0.1, 0.8)).collect(),
            g: (0..nc).map(|_| c(0.03, 0.3)).collect(),
            h: c(0.05, 0.5),
            offset: c(1.0, 3.0),
        };
        let n = table.n_sites();
        let amps = dense_pair_product(&table, &params);
        let space = Arc::new(SpinSpace::new(n).unwrap());
        let state = FullState::from_dense(space, &amps).unwrap();
        let exact = full_observables(&state);
        let engine = ExactEngine::new(model.clone()).unwrap();
        let energy = engine.energy(&state).unwrap();

        let wf = PairProduct::new(table.clone(), params).unwrap();
        let opts = SamplerOptions { n_samples: 100_000, n_walkers: 8, ..Default::default() };
        let batch = metropolis_sample(&wf, &opts, &mut Walkers::default(), 1000 + set as u64);
        let uniform = uniform_samples(n, 100_000, 2000 + set as u64);
        let mc = estimate_observables(&wf, &model, &batch);
        let fid = cat_fidelities(&wf, &batch, &uniform);
        let qs = [2usize, 4, 6];
        let cats = qcat_overlaps(&wf, &batch, &uniform, &qs);

        let m = &exact.moments;
        let mut pairs: Vec<(String, f64, f64, f64)> = vec![
            ("Jx".into(), mc.jx.mean, mc.jx.err, m.mean[0]),
            ("Jy".into(), mc.jy.mean, mc.jy.err, m.mean[1]),
            ("Jz".into(), mc.jz.mean, mc.jz.err, m.mean[2]),
            ("VarJx".into(), mc.var_jx.mean, mc.var_jx.err, m.var(0)),
            ("VarJy".into(), mc.var_jy.mean, mc.var_jy.err, m.var(1)),
            ("VarJz".into(), mc.var_jz.mean, mc.var_jz.err, m.var(2)),
            ("JyJz_sym".into(), mc.jyjz_sym.mean, mc.jyjz_sym.err, m.second[1][2]),
            ("J2".into(), mc.j2.mean, mc.j2.err, m.j2()),
            ("xi2".into(), mc.xi2.mean, mc.xi2.err, exact.xi2()),
            ("parity".into(), mc.parity.mean, mc.parity.err, exact.parity),
            ("dparity".into(), mc.dparity_dtheta.mean, mc.dparity_dtheta.err, exact.dparity_dtheta),
            ("energy".into(), mc.energy.mean, mc.energy.err, energy),
            ("F_px".into(), fid.f_px.value, fid.f_px.err, exact.f_px),
            ("F_mx".into(), fid.f_mx.value, fid.f_mx.err, exact.f_mx),
            ("F_GHZ".into(), fid.f_ghz.value, fid.f_ghz.err, exact.f_ghz),
            ("C".into(), fid.coherence.mean, fid.coherence.err, exact.coherence()),
        ];
        for (q, est) in qs.iter().zip(&cats) {
            let target: Vec<Complex64> = (0..1u32 << n)
                .map(|s| {
                    let m = s.count_ones() as f64 - n as f64 / 2.0;
                    Complex64::from_polar(1.0, -PI * m * m / *q as f64)
                })
                .collect();
            pairs.push((format!("F_{q}cat"), est.value, est.err, dense_fidelity(&target, &amps)));
        }
        for (name, mean, err, want) in pairs {
            total += 1;
            let z = if err > 0.0 { (mean - want).abs() / err } else if (mean - want).abs() < 1e-10 { 0.0 } else { f64::INFINITY };
            let tag = format!("set {set} ({} N={n}) {name}: {mean:.5} ± {err:.1e} vs {want:.5}", spec.geometry.name());
            if z > worst.0 {
                worst = (z, tag.clone());
            }
            if z > 3.0 {
                outside.push(tag);
            }
        }
    }
    r.check(outside.is_empty(), format!("{total} estimates over 5 parameter sets, {} outside 3σ", outside.len()));
    for o in outside {
        r.note(o);
    }
    r.note(format!("largest deviation {:.2}σ: {}", worst.0, worst.1));
    r.done()
}

fn c10_invariants() -> Outcome {
    let mut r = Report::new();
    let run = dipolar_run(8);
    let n = 64.0;
    let t = col(&run.series, |row| row.t);
    let t_rev = extract_inertia(&t, &col(&run.series, |row| row.jx), None)
        .ok()
        .and_then(|e| e.t_rev)
        .unwrap_or(4.0 * PI * predicted_inertia(8));
    let j0 = run.series.rows[0].j2;
    let (retention, t_min) = run
        .series
        .rows
        .iter()
        .filter(|row| row.t <= t_rev)
        .map(|row| (row.j2 / j0, row.t))
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    r.check(retention >= 0.9, format!("N = 64: min <J²>/<J²>(0) = {retention:.4} at t = {t_min:.2} (window to t_rev = {t_rev:.1})"));

    let errs = run.series.errors.as_ref().unwrap();
    let (e0, s0) = (run.series.rows[0].energy, errs[0].energy);
    let bound = run.opts.energy_drift_bound;
    let mut raw = 0.0f64;
    let mut excess = 0.0f64;
    for (row, err) in run.series.rows.iter().zip(errs) {
        let d = (row.energy - e0).abs();
        raw = raw.max(d / n);
        excess = excess.max((d - 3.0 * err.energy.hypot(s0)).max(0.0) / n);
    }
    r.check(excess <= bound, format!("energy drift beyond 3σ: {excess:.2e} per site (bound {bound:.0e})"));
    r.note(format!("raw max drift {raw:.2e} per site, error bar of E(0) {:.2e} per site", s0 / n));

    let dir = tempfile::tempdir().unwrap();
    let base = xxcascade::config::RunConfig {
        engine: xxcascade::config::Engine::Tvmc,
        seed: 5,
        observables: vec![xxcascade::config::Output::Params],
        lattice: xxcascade::config::LatticeSection { l: 8, ..Default::default() },
        schedule: xxcascade::config::ScheduleSection { t_max: 0.6, dt_outer: 0.2, dt: 0.1, checkpoint_every: 1 },
        ..Default::default()
    };
    let short = xxcascade::config::RunConfig {
        schedule: xxcascade::config::ScheduleSection { t_max: 0.4, ..base.schedule.clone() },
        ..base.clone()
    };
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    xxcascade::run::tvmc_evolve(&base, &a, false).unwrap();
    xxcascade::run::tvmc_evolve(&base, &b, false).unwrap();
    xxcascade::run::tvmc_evolve(&short, &c, false).unwrap();
    xxcascade::run::tvmc_evolve(&base, &c, true).unwrap();
    let same = |x: &std::path::Path, y: &std::path::Path, f: &str| std::fs::read(x.join(f)).unwrap() == std::fs::read(y.join(f)).unwrap();
    let rerun = same(&a, &b, "series.csv") && same(&a, &b, "params.csv") && same(&a, &b, "checkpoints/state.json");
    let resumed = same(&a, &c, "series.csv") && same(&a, &c, "params.csv") && same(&a, &c, "checkpoints/state.json");
    r.check(rerun && resumed, format!("N = 64 checkpoints: rerun identical {rerun}, resumed identical {resumed}"));
    r.done()
}

// ---------------------------------------------------------------------- main

type Criterion = (&'static str, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    ("c1", "tower of states", c1_tower),
    ("c2", "OAT exactness of tVMC", c2_oat_exactness),
    ("c3", "tVMC vs exact benchmark", c3_benchmark),
    ("c4", "cat-state metrology", c4_cat_metrology),
    ("c5", "q-cat census", c5_cat_census),
    ("c6", "rotor spectroscopy", c6_rotor_spectroscopy),
    ("c7", "inertia scaling", c7_inertia_scaling),
    ("c8", "squeezing scaling", c8_squeezing_scaling),
    ("c9", "estimator suite", c9_estimators),
    ("c10", "largest-size invariants", c10_invariants),
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (id, name, _) in CRITERIA {
            println!("{id}: {name}");
        }
        return;
    }
    let mut failed = Vec::new();
    let mut passed = 0;
    for (id, name, f) in CRITERIA {
        if !args.is_empty() && !args.iter().any(|a| a.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let (ok, details) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, vec![format!("FAIL panicked: {}", msg.unwrap_or_default())])
            }
        };
        println!("{} {} {name} ({:.0}s)", if ok { "PASS" } else { "FAIL" }, id.to_uppercase(), start.elapsed().as_secs_f64());
        for d in details {
            println!("    {d}");
        }
        if ok {
            passed += 1;
        } else {
            failed.push(id.to_uppercase());
        }
    }
    println!("acceptance: {} passed, {} failed", passed, failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        if std::env::args().any(|a| a == "--strict") {
            std::process::exit(1);
        }
    }
}
