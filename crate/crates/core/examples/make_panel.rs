//! Writes the bundled synthetic panel as long-format CSV (`id,value`) to stdout.
//!
//! `cargo run -p featmix --example make_panel > data/panel.csv`

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let panel = featmix::synthetic::business_panel(6, 60, 12, 2024)?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["id", "value"])?;
    for s in &panel {
        for v in s.values() {
            w.write_record([s.id(), &format!("{v:.4}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
