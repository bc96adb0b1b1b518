//! Shared inputs for the kernel benchmarks.

use singlip_core::corpus::{default_fixture_dir, load_corpus};
use singlip_core::SurfFile;

/// A shipped fixture by name.
pub fn fixture(name: &str) -> SurfFile {
    load_corpus(&default_fixture_dir())
        .expect("fixture corpus loads")
        .into_iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("no fixture named {name}"))
        .file
}

/// Points along `x = y^{3/2}`, where the ex32 jets are least tame.
pub fn jet_points(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|k| {
            let y = 0.1 * k as f64 / n as f64;
            (y.powf(1.5) * 1.01, y)
        })
        .collect()
}
