//! Pair-product tVMC on the 3x3 dipolar lattice next to the exact evolution.

use xxcascade::lattice::{LatticeSpec, XxModel};
use xxcascade::pairproduct::SamplerOptions;
use xxcascade::run::exact_series;
use xxcascade::tvmc::{TvmcOptions, TvmcRun};

fn main() -> xxcascade::Result<()> {
    let model = XxModel::new(&LatticeSpec::square(3, 3.0))?;
    let opts = TvmcOptions {
        dt: 0.05,
        t_max: 8.0,
        observe_every: 10,
        sampler: SamplerOptions { n_samples: 4000, ..Default::default() },
        fidelity_samples: 4000,
        seed: 3,
        ..Default::default()
    };
    let mut run = TvmcRun::new(model.clone(), opts)?;
    run.run_until(run.n_steps(), |r| {
        let d = &r.last_diagnostics;
        if r.step % 40 == 0 {
            eprintln!("step {:>4}: residual {:.2e}, cond {:.1e}, acceptance {:.2}", r.step, d.max_residual, d.max_condition, d.acceptance);
        }
        Ok(())
    })?;

    let times = run.series.times();
    let engine = xxcascade::exact::ExactEngine::new(model)?;
    let exact = exact_series(&engine, &times, |_, _| Ok(()))?;
    let errs = run.series.errors.as_ref().expect("sampled series carry errors");
    println!("{:>5} {:>16} {:>8} {:>16} {:>8} {:>15} {:>7}", "t", "<Jx> tVMC", "exact", "Var(Jx) tVMC", "exact", "C tVMC", "exact");
    for ((v, e), x) in run.series.rows.iter().zip(errs).zip(&exact.rows) {
        println!(
            "{:>5.2} {:>8.4} ± {:<5.3} {:>8.4} {:>8.3} ± {:<5.3} {:>8.3} {:>7.3} ± {:<5.3} {:>7.3}",
            v.t, v.jx, e.jx, x.jx, v.var_jx, e.var_jx, x.var_jx, v.coherence, e.coherence, x.coherence
        );
    }
    println!("max energy drift per site {:.2e}", run.max_energy_drift);
    Ok(())
}
