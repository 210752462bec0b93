//! Configuration-driven runs: validate a TOML file, run the engine it names
//! into a fresh directory and analyze the stored series.
//!
//! `cargo run --release --example run_from_config -- configs/exact-evolve.toml`

use std::path::PathBuf;

use xxcascade::config::{load_config, validate_config};
use xxcascade::run::{analyze, evolve};

fn main() -> xxcascade::Result<()> {
    let bad = "engine = \"exact\"\n[lattice]\ngeometry = \"kagome\"\nL = 5\n";
    if let Err(issues) = validate_config(bad) {
        println!("rejected configuration:");
        for i in issues {
            println!("  {i}");
        }
    }

    let cfg = match std::env::args().nth(1) {
        Some(path) => load_config(&PathBuf::from(path))?,
        None => xxcascade::config::parse_config("[lattice]\nL = 3\n[schedule]\nt_max = 12.0\ndt_outer = 0.1\n")?,
    };
    println!("\neffective configuration:\n{}", cfg.to_toml());

    let out = std::env::temp_dir().join(format!("xxcascade-run-{}", std::process::id()));
    evolve(&cfg, &out)?;
    let summary = analyze(&[out.join("series.csv")], &out.join("analysis"))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("outputs in {}", out.display());
    Ok(())
}
