//! Monte Carlo estimators on an OAT snapshot written as a pair product,
//! checked against the Dicke-manifold values.

use std::f64::consts::PI;

use xxcascade::dicke::{css_x_dicke, dicke_observables, oat_evolve, OatSpec};
use xxcascade::lattice::{LatticeSpec, XxModel};
use xxcascade::pairproduct::{
    cat_fidelities, estimate_observables, metropolis_sample, oat_snapshot_params, qcat_overlaps, uniform_samples,
    PairProduct, SamplerOptions, Walkers,
};

fn main() -> xxcascade::Result<()> {
    let model = XxModel::new(&LatticeSpec::square(4, 0.0))?;
    let n = model.n_sites();
    let oat = OatSpec { n_sites: n, inertia: model.oat_inertia() };
    let t = 0.08 * PI * oat.inertia;
    let wf = PairProduct::new(model.table.clone(), oat_snapshot_params(&model.table, oat.inertia, t))?;

    let opts = SamplerOptions { n_samples: 50_000, ..Default::default() };
    let batch = metropolis_sample(&wf, &opts, &mut Walkers::default(), 1);
    let uniform = uniform_samples(n, 50_000, 2);
    let mc = estimate_observables(&wf, &model, &batch);
    let fid = cat_fidelities(&wf, &batch, &uniform);
    let exact = dicke_observables(&oat_evolve(&css_x_dicke(n), &oat, t));

    println!("{:<10} {:>20} {:>12}", "", "sampled", "Dicke");
    let rows = [
        ("<Jx>", mc.jx, exact.moments.mean[0]),
        ("Var(Jx)", mc.var_jx, exact.var_jx()),
        ("Var(Jy)", mc.var_jy, exact.moments.var(1)),
        ("xi2", mc.xi2, exact.xi2()),
        ("<J2>", mc.j2, exact.moments.j2()),
        ("parity", mc.parity, exact.parity),
        ("dP/dtheta", mc.dparity_dtheta, exact.dparity_dtheta),
    ];
    for (name, e, want) in rows {
        println!("{name:<10} {:>11.5} ± {:<7.5} {:>12.5}", e.mean, e.err, want);
    }
    println!("{:<10} {:>11.5} ± {:<7.5} {:>12.5}", "F_GHZ", fid.f_ghz.value, fid.f_ghz.err, exact.f_ghz);
    println!("{:<10} {:>11.5} ± {:<7.5} {:>12.5}", "C", fid.coherence.mean, fid.coherence.err, exact.coherence());

    for (q, ov) in [2, 4, 6].iter().zip(qcat_overlaps(&wf, &batch, &uniform, &[2, 4, 6])) {
        let target = oat_evolve(&css_x_dicke(n), &oat, oat.t_q(*q));
        let want = oat_evolve(&css_x_dicke(n), &oat, t).fidelity(&target);
        println!("F_{q}cat     {:>11.5} ± {:<7.5} {:>12.5}", ov.value, ov.err, want);
    }
    Ok(())
}
