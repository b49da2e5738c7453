//! Federated run on IDX-format image files. With a directory argument the
//! standard MNIST file names are read from it; otherwise a small synthetic
//! 8x8 digit set is written to a temporary directory first.

use std::path::{Path, PathBuf};

use fedsieve::data::{encode_images, encode_labels, load_idx};
use fedsieve::defense::{DefenseConfig, DefenseName};
use fedsieve::seed;
use fedsieve::sim::{run_experiment, DatasetConfig, ExperimentConfig};
use rand::Rng;

const FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

fn synthesize(dir: &Path) -> std::io::Result<()> {
    let mut rng = seed::rng(1, &[]);
    for (images, labels, count) in [(FILES[0], FILES[1], 2000), (FILES[2], FILES[3], 500)] {
        let mut pixels = Vec::with_capacity(count * 64);
        let mut ys = Vec::with_capacity(count);
        for _ in 0..count {
            let y: u8 = rng.random_range(0..10);
            for p in 0..64usize {
                // each class lights a different pair of rows
                let lit = p / 8 == usize::from(y) % 8 || p % 8 == usize::from(y) % 7;
                let base = if lit { 200 } else { 20 };
                pixels.push((base + rng.random_range(0..40)) as u8);
            }
            ys.push(y);
        }
        std::fs::write(dir.join(images), encode_images(8, 8, &pixels))?;
        std::fs::write(dir.join(labels), encode_labels(&ys))?;
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (dir, width, _guard) = match std::env::args().nth(1) {
        Some(d) => (PathBuf::from(d), 28, None),
        None => {
            let tmp = tempfile::tempdir()?;
            synthesize(tmp.path())?;
            (tmp.path().to_path_buf(), 8, Some(tmp))
        }
    };
    let train = load_idx(dir.join(FILES[0]), dir.join(FILES[1]))?;
    println!(
        "{} training images of dimension {}",
        train.len(),
        train.dim()
    );

    let cfg = ExperimentConfig {
        rounds: 10,
        dataset: DatasetConfig::Idx {
            train_images: dir.join(FILES[0]),
            train_labels: dir.join(FILES[1]),
            test_images: dir.join(FILES[2]),
            test_labels: dir.join(FILES[3]),
            width,
            limit: Some(6000),
        },
        defense: DefenseConfig::named(DefenseName::Fld),
        ..ExperimentConfig::default()
    };
    for r in run_experiment(&cfg)? {
        println!(
            "round {:>2}: MA {:.3}, benign {:?}",
            r.round, r.ma, r.benign_set
        );
    }
    Ok(())
}
