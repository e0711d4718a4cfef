//! Load a run configuration the way the `pmeans` binary does, resolve the
//! automatic fields, and print what would be simulated.

use std::path::Path;

use pmeans::cli::{load_config, prepare_anneal};

fn main() -> pmeans::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two_atoms.toml");
    let mut loaded = load_config(&path, &["anneal.t_end=500".into()])?;
    let prepared = prepare_anneal(&mut loaded)?;
    println!("c(U) = {:?}, k = {}", prepared.c_u, prepared.config.schedules.k);
    println!("target ball: {} ± {}", prepared.neighborhood.center.to_csv(), prepared.neighborhood.radius);
    println!("checkpoints {:?}", prepared.checkpoints);
    print!("{}", toml::to_string(&loaded.config).unwrap());
    Ok(())
}
