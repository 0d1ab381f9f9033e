//! Regenerates the built-in model files under `scenarios/`.

use std::path::PathBuf;

use tendon_refine::model::catalog;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(&dir)?;
    for (stem, model) in catalog::all() {
        let path = dir.join(format!("{stem}.model.toml"));
        let header = format!("# Generated by `cargo run --example write_models`; edit catalog.rs instead.\n\n");
        std::fs::write(&path, header + &model.to_file().to_toml_string())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
