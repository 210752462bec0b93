//! Spectrum of `<J^x>(t)` after the dipolar quench, in units of the tower
//! inertia: lines sit at `ωI = M + 1/2`.

use std::f64::consts::PI;

use xxcascade::analysis::{quench_spectrum, SpectrumWindow};
use xxcascade::exact::ExactEngine;
use xxcascade::lattice::{LatticeSpec, XxModel};
use xxcascade::run::{exact_series, tower_study, uniform_times};

fn main() -> xxcascade::Result<()> {
    let spec = LatticeSpec::square(4, 3.0);
    let inertia = tower_study(&spec, 2)?.1.inertia;
    let engine = ExactEngine::new(XxModel::new(&spec)?)?;
    let times = uniform_times(2.0 * 4.0 * PI * inertia, 0.2);
    let series = exact_series(&engine, &times, |_, _| Ok(()))?;
    let jx: Vec<f64> = series.rows.iter().map(|r| r.jx).collect();

    let s = quench_spectrum(&times, &jx, &SpectrumWindow::default())?;
    println!("I_eff = {inertia:.5}, record T = {:.1}, bin ωI = {:.4}", times.last().unwrap(), s.bin * inertia);
    for p in s.peaks.iter().take(6) {
        println!("ωI = {:>7.4}  amplitude {:>9.5}", p.omega * inertia, p.amplitude);
    }
    Ok(())
}
