//! Regenerates the bundled offline fixtures under `tests/fixtures/`.
//!
//! ```text
//! cargo run --example gen_fixtures
//! ```

use std::path::Path;

use legalnli::synthetic::{fixture_test_split, fixture_training_pair};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let (a, b) = fixture_training_pair(1024);
    fixture_test_split(1024).write_jsonl(&dir.join("test.jsonl"))?;
    a.write_jsonl(&dir.join("train_shared_task.jsonl"))?;
    b.write_jsonl(&dir.join("train_legallens.jsonl"))?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
