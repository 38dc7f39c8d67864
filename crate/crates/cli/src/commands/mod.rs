mod build_vocab;
mod evaluate;
mod predict;
mod submit;
mod train;

pub use build_vocab::build_vocab;
pub use evaluate::evaluate;
pub use predict::predict;
pub use submit::submit;
pub use train::train;

use std::path::{Path, PathBuf};

/// `out.ckpt` + `.log.jsonl` gives `out.ckpt.log.jsonl`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}
