//! Materialize the built-in synthetic benchmark as JSONL files:
//!
//! ```text
//! cargo run -p stepgap --example make_synthetic_benchmark -- OUT_DIR
//! ```
//!
//! Writes benchmark.jsonl, gold_labels.jsonl, llm_script.jsonl, and
//! nli_script.jsonl into OUT_DIR, ready for `stepgap check --benchmark ...
//! --llm-script ... --nli-script ...`.

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .ok_or("usage: make_synthetic_benchmark OUT_DIR")?;
    std::fs::create_dir_all(&dir)?;
    let benchmark = stepgap::synthetic::reference_benchmark();
    benchmark.write_to_dir(&dir)?;
    println!(
        "wrote {} traces / {} gold labels to {}",
        benchmark.records.len(),
        benchmark.gold_labels.len(),
        dir.display()
    );
    Ok(())
}
