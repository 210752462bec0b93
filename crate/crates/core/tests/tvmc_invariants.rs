use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxcascade::exact::{full_observables, FullState, SpinSpace};
use xxcascade::lattice::{LatticeSpec, XxModel};
use xxcascade::pairproduct::{
    cat_fidelities, estimate_observables, metropolis_sample, uniform_samples, PairProduct, PairProductParams,
    SamplerOptions, Walkers,
};
use xxcascade::tvmc::{apply_update, tdvp_rhs, tdvp_rhs_exact, TdvpOptions};

/// RK4 on the exactly summed TDVP flow.
fn integrate(model: &XxModel, t: f64, dt: f64, opts: &TdvpOptions) -> PairProductParams {
    let mut x = PairProductParams::zeros(model.table.n_classes());
    let steps = (t / dt).round() as usize;
    for _ in 0..steps {
        let mut ks = Vec::new();
        for stage in 0..4 {
            let xs = match stage {
                0 => x.clone(),
                3 => apply_update(&x, &ks[2], dt, opts),
                _ => apply_update(&x, &ks[stage - 1], 0.5 * dt, opts),
            };
            let wf = PairProduct::new(model.table.clone(), xs).unwrap();
            ks.push(tdvp_rhs_exact(&wf, model, opts).unwrap());
        }
        for (k, w) in ks.iter().zip([1.0, 2.0, 2.0, 1.0]) {
            x = apply_update(&x, k, dt * w / 6.0, opts);
        }
    }
    x
}

fn observe(model: &XxModel, p: &PairProductParams) -> [f64; 4] {
    let wf = PairProduct::new(model.table.clone(), p.clone()).unwrap();
    let amps = wf.dense_amplitudes().unwrap();
    let space = Arc::new(SpinSpace::new(model.n_sites()).unwrap());
    let o = full_observables(&FullState::from_dense(space, &amps).unwrap());
    [o.moments.mean[0], o.var_jx(), o.moments.j2(), o.coherence()]
}

#[test]
fn halving_the_step_converges_at_fourth_order() {
    let model = XxModel::new(&LatticeSpec::square(3, 3.0)).unwrap();
    let opts = TdvpOptions::default();
    let obs: Vec<[f64; 4]> = [0.05, 0.025, 0.0125].iter().map(|&dt| observe(&model, &integrate(&model, 2.0, dt, &opts))).collect();
    let diff = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let coarse = diff(&obs[0], &obs[1]);
    let fine = diff(&obs[1], &obs[2]);
    assert!(fine < 1e-5, "dt 0.025 vs 0.0125 differ by {fine}");
    // 16 in the asymptotic limit, 8 for a third-order scheme
    assert!(fine < coarse / 11.0, "errors {coarse:.3e} -> {fine:.3e}");
}

fn random_params(n_classes: usize, seed: u64) -> PairProductParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = |re: f64, im: f64| Complex64::new(rng.gen_range(-re..=re), rng.gen_range(-im..=im));
    PairProductParams {
        f: (0..n_classes).map(|_| c(0.1, 0.8)).collect(),
        g: (0..n_classes).map(|_| c(0.03, 0.3)).collect(),
        h: c(0.05, 0.4),
        offset: Complex64::new(0.0, 0.0),
    }
}

#[test]
fn observables_ignore_the_gauge_offset() {
    let model = XxModel::new(&LatticeSpec::rectangular(xxcascade::Geometry::Square, 4, 3, 3.0)).unwrap();
    let p = random_params(model.table.n_classes(), 3);
    let shifted = PairProductParams { offset: Complex64::new(7.5, -2.25), ..p.clone() };
    let a = PairProduct::new(model.table.clone(), p).unwrap();
    let b = PairProduct::new(model.table.clone(), shifted).unwrap();
    let opts = SamplerOptions { n_samples: 4000, ..Default::default() };
    let batch_a = metropolis_sample(&a, &opts, &mut Walkers::default(), 41);
    let batch_b = metropolis_sample(&b, &opts, &mut Walkers::default(), 41);
    assert_eq!(batch_a.spins, batch_b.spins);

    let (oa, ob) = (estimate_observables(&a, &model, &batch_a), estimate_observables(&b, &model, &batch_b));
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-10 * (1.0 + x.abs());
    for (x, y) in [
        (oa.jx.mean, ob.jx.mean),
        (oa.var_jx.mean, ob.var_jx.mean),
        (oa.xi2.mean, ob.xi2.mean),
        (oa.j2.mean, ob.j2.mean),
        (oa.parity.mean, ob.parity.mean),
        (oa.dparity_dtheta.mean, ob.dparity_dtheta.mean),
        (oa.energy.mean, ob.energy.mean),
    ] {
        assert!(close(x, y), "{x} vs {y}");
    }
    let uniform = uniform_samples(12, 4000, 5);
    let (fa, fb) = (cat_fidelities(&a, &batch_a, &uniform), cat_fidelities(&b, &batch_b, &uniform));
    assert!(close(fa.f_ghz.value, fb.f_ghz.value) && close(fa.f_px.value, fb.f_px.value));

    let tdvp = TdvpOptions::default();
    let (ka, kb) = (tdvp_rhs(&a, &model, &batch_a, &tdvp).unwrap(), tdvp_rhs(&b, &model, &batch_b, &tdvp).unwrap());
    for (x, y) in ka.xdot.iter().zip(&kb.xdot) {
        assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()), "{x} vs {y}");
    }
}
