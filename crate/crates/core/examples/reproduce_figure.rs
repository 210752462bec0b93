//! Regenerates the data behind one figure with the desk preset.
//!
//! `cargo run --release --example reproduce_figure -- tower`

use xxcascade::run::{reproduce, Figure, ReproduceOptions};

fn main() -> xxcascade::Result<()> {
    let figure = Figure::parse(&std::env::args().nth(1).unwrap_or_else(|| "tower".into()))?;
    let out = std::env::temp_dir().join(format!("xxcascade-{}-{}", figure.name(), std::process::id()));
    let manifest = reproduce(figure, &ReproduceOptions::default(), &out)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}
