//! `P(J^x)` of the exact 4x4 dipolar state at the cat times, peak census and
//! the overlapping exponential tails of the two outer peaks.

use std::f64::consts::PI;

use xxcascade::analysis::{cat_peak_census, two_tail_fit};
use xxcascade::exact::ExactEngine;
use xxcascade::lattice::{LatticeSpec, XxModel};
use xxcascade::run::{exact_p_jx, exact_series, ghz_peak, tower_study, uniform_times};

fn main() -> xxcascade::Result<()> {
    let spec = LatticeSpec::square(4, 3.0);
    let inertia = tower_study(&spec, 2)?.1.inertia;
    let engine = ExactEngine::new(XxModel::new(&spec)?)?;

    let lo = 0.8 * PI * inertia;
    let times: Vec<f64> = uniform_times(0.4 * PI * inertia, 0.05).iter().map(|t| lo + t).collect();
    let t_ghz = ghz_peak(&exact_series(&engine, &times, |_, _| Ok(()))?)?.t;
    println!("GHZ time {t_ghz:.4} (pi I = {:.4})", PI * inertia);

    let qs = [2usize, 4, 6];
    let t_q: Vec<f64> = qs.iter().map(|&q| 2.0 * t_ghz / q as f64).collect();
    for (t, p) in exact_p_jx(&engine, &t_q)? {
        let q = (2.0 * t_ghz / t).round() as usize;
        let census = cat_peak_census(&p, q)?;
        let tail = two_tail_fit(&p)?;
        let bars: Vec<String> = p.iter().map(|v| format!("{v:.3}")).collect();
        println!("\nt_{q} = {t:.3}: {} peaks (expected {}), tails cosh({:.3} Jx) R² {:.4}", census.count(), census.expected, tail.kappa, tail.r2);
        println!("P(Jx = -8..8) = [{}]", bars.join(" "));
    }
    Ok(())
}
