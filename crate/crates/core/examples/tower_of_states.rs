//! Lowest states of every `J^z` sector and the rotor fit `E(M) = E_0 + M²/(2I)`.
//!
//! `cargo run --release --example tower_of_states -- triangular`

use xxcascade::lattice::{Geometry, LatticeSpec};
use xxcascade::run::tower_study;

fn main() -> xxcascade::Result<()> {
    let geometry = match std::env::args().nth(1).as_deref() {
        Some("triangular") => Geometry::Triangular,
        _ => Geometry::Square,
    };
    let spec = LatticeSpec::new(geometry, 4, 3.0);
    let (spectra, fit) = tower_study(&spec, 3)?;

    println!("{:>5} {:>12} {:>9}  lowest energies", "M", "E_tower", "overlap");
    for s in &spectra {
        let lows: Vec<String> = s.energies.iter().map(|e| format!("{e:.5}")).collect();
        println!("{:>5} {:>12.6} {:>9.5}  {}", s.m, s.tos_energy(), s.overlaps[s.tos_index], lows.join(" "));
    }
    println!("\n{} 4x4: I_eff = {:.5} (R² {:.6}, {} sectors)", geometry.name(), fit.inertia, fit.r2, fit.n_points);
    Ok(())
}
