//! Coupling tables of periodic square and triangular lattices.
//!
//! `cargo run --example couplings -- triangular 4 3`

use xxcascade::lattice::{build_coupling_table, kac_factor, Geometry, LatticeSpec, XxModel};

fn main() -> xxcascade::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let geometry = match args.first().map(String::as_str) {
        Some("triangular") => Geometry::Triangular,
        _ => Geometry::Square,
    };
    let l = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let alpha = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let spec = LatticeSpec::new(geometry, l, alpha);
    let table = build_coupling_table(&spec)?;

    println!("{} {l}x{l}, alpha = {alpha}: {} sites, {} displacement classes", geometry.name(), spec.n_sites(), table.n_classes());
    println!("{:>4} {:>10} {:>9} {:>10} {:>6}", "id", "disp", "r", "J", "pairs");
    for c in table.classes() {
        println!(
            "{:>4} {:>10} {:>9.5} {:>10.6} {:>6}",
            c.id,
            format!("{:?}", c.displacement),
            c.distance,
            c.coupling,
            c.n_pairs
        );
    }
    println!("Kac factor K = {:.6}", kac_factor(&spec, alpha)?);

    let model = XxModel::new(&spec)?;
    println!("normalization {}, bare rotor inertia I = {:.6}", model.normalization, model.oat_inertia());
    Ok(())
}
