//! Full-state quench of the 4x4 dipolar square lattice from `|CSS_x>`, with a
//! checkpoint written halfway and read back.

use xxcascade::exact::{full_observables, load_checkpoint, save_checkpoint, ExactEngine};
use xxcascade::lattice::{LatticeSpec, XxModel};

fn main() -> xxcascade::Result<()> {
    let spec = LatticeSpec::square(4, 3.0);
    let model = XxModel::new(&spec)?;
    let engine = ExactEngine::new(model.clone())?;
    let mut state = engine.css_x();
    let dir = std::env::temp_dir().join("xxcascade-exact-quench");
    std::fs::create_dir_all(&dir)?;
    let ck = dir.join("state.xxck");

    println!("{:>6} {:>8} {:>9} {:>9} {:>8} {:>8} {:>10}", "t", "t_kac", "<Jx>", "Var(Jx)", "<J2>", "C", "E");
    let dt = 0.5;
    for k in 0..=40 {
        let t = k as f64 * dt;
        if k > 0 {
            engine.propagate(&mut state, dt)?;
        }
        let o = full_observables(&state);
        println!(
            "{t:>6.2} {:>8.3} {:>9.4} {:>9.3} {:>8.3} {:>8.4} {:>10.5}",
            model.kac_time(t),
            o.moments.mean[0],
            o.var_jx(),
            o.moments.j2(),
            o.coherence(),
            engine.energy(&state)?
        );
        if k == 20 {
            save_checkpoint(&ck, &state, &spec, t)?;
        }
    }

    let (header, restored) = load_checkpoint(&ck)?;
    let o = full_observables(&restored);
    println!("\ncheckpoint at t = {}: <Jx> = {:.6}", header.t, o.moments.mean[0]);
    Ok(())
}
