//! Optimal squeezing against system size: OAT power laws, small exact dipolar
//! lattices, and the Kac-rescaled inertia that sets the larger ones.

use xxcascade::analysis::{kac_rescale_inertia, optimal_squeezing_series, squeezing_scaling};
use xxcascade::dicke::OatSpec;
use xxcascade::exact::ExactEngine;
use xxcascade::lattice::{Geometry, LatticeSpec, XxModel};
use xxcascade::run::{exact_series, oat_squeezing_point, tower_study, uniform_times};

fn main() -> xxcascade::Result<()> {
    let oat: Vec<(f64, f64, f64)> = (4..=12).map(|k| oat_squeezing_point(&OatSpec::bare(1 << k, 1.0))).collect::<Result<_, _>>()?;
    for (n, xi2, t) in &oat {
        println!("OAT N = {n:>5}: xi2 = {xi2:.6}, t = {t:.4}");
    }
    let fit = squeezing_scaling(&oat)?;
    println!("OAT fit: xi2 ~ N^-{:.4}, t ~ N^{:.4}\n", fit.nu, fit.mu);

    for (lx, ly) in [(4, 4), (5, 4)] {
        let spec = LatticeSpec::rectangular(Geometry::Square, lx, ly, 3.0);
        let engine = ExactEngine::new(XxModel::new(&spec)?)?;
        let series = exact_series(&engine, &uniform_times(3.0, 0.1), |_, _| Ok(()))?;
        let best = optimal_squeezing_series(&series)?;
        println!("exact {lx}x{ly}: xi2 = {:.5} at t = {:.3}", best.value, best.t);
    }

    let reference = LatticeSpec::square(4, 3.0);
    let inertia = tower_study(&reference, 2)?.1.inertia;
    for l in [6, 8, 10, 12] {
        let i = kac_rescale_inertia(inertia, &reference, &LatticeSpec::square(l, 3.0))?;
        println!("Kac-rescaled inertia for {l}x{l}: {i:.4}");
    }
    Ok(())
}
