//! Writes a keyword-separable toy corpus for trying the CLI end to end.
//!
//! ```text
//! cargo run --example toy_corpus -- <dir> [train_rows] [test_rows]
//! ```

use std::path::PathBuf;

use legalnli::corpus::Source;
use legalnli::synthetic::keyword_corpus;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy".into()));
    let train: usize = args.next().map_or(Ok(600), |s| s.parse())?;
    let test: usize = args.next().map_or(Ok(150), |s| s.parse())?;
    keyword_corpus("generic", train, 1, Source::Snli, false).write_jsonl(&dir.join("stage1.jsonl"))?;
    keyword_corpus("legal", train, 2, Source::Nllp, true).write_jsonl(&dir.join("stage2.jsonl"))?;
    keyword_corpus("test", test, 3, Source::Nllp, true).write_jsonl(&dir.join("test.jsonl"))?;
    println!("wrote stage1.jsonl, stage2.jsonl and test.jsonl to {}", dir.display());
    Ok(())
}
