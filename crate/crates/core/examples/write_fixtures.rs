//! Regenerates the scenario files under `fixtures/`.

use std::path::Path;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, scenario) in consensus_lab::scenario::fixture_corpus() {
        std::fs::write(dir.join(name), scenario.to_json() + "\n")?;
        println!("wrote {name}");
    }
    Ok(())
}
