//! Writes a small synthetic dataset to disk, reads it back and windows one
//! clip.
//!
//! ```text
//! cargo run --example synthetic_dataset -- /tmp/gait
//! ```

use motiondiff::dataio::{generate_synthetic, window, write_skeleton, ClipFile, GeneratorKind, SyntheticMotionSpec};

fn main() -> motiondiff::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("motiondiff-synthetic").display().to_string());
    std::fs::create_dir_all(&out)?;
    for generator in [GeneratorKind::SinusoidalGait, GeneratorKind::FigureEight] {
        let spec = SyntheticMotionSpec { generator, clips: 4, frames: 60, ..Default::default() };
        let skel = spec.skeleton()?;
        write_skeleton(format!("{out}/skeleton.json"), &skel)?;
        for (i, clip) in generate_synthetic(&spec)?.into_iter().enumerate() {
            let path = format!("{out}/{generator:?}_{i}.clip");
            ClipFile::new(skel.clone(), clip)?.write(&path)?;
            let back = ClipFile::read(&path)?;
            let windows = window(&back.clip, 32, 8)?;
            println!("{path}: {} frames, {} windows of 32", back.clip.frames(), windows.len());
        }
    }
    Ok(())
}
