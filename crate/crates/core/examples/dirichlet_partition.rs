//! Class histograms of Dirichlet non-IID partitions at several
//! concentrations.

use fedsieve::data::{dirichlet_partition, synth_blobs, PartitionSpec};

fn main() -> fedsieve::Result<()> {
    let data = synth_blobs(10, 8, 100, 1.0, 2)?;
    for alpha in [0.1, 0.5, 100.0] {
        let shards = dirichlet_partition(
            &data,
            &PartitionSpec {
                dirichlet_alpha: alpha,
                client_count: 6,
                seed: 4,
            },
        )?;
        println!("alpha = {alpha}");
        for (i, s) in shards.iter().enumerate() {
            let h = s.class_histogram(10);
            let bars: String = h.iter().map(|c| format!("{c:>4}")).collect();
            println!("  client {i}: {bars}  (n = {})", s.len());
        }
    }
    Ok(())
}
