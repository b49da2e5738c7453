//! Multi-round constrain-and-scale backdoor on synthetic blobs, with and
//! without FLD. Pass a config path to override `configs/desk_am.toml`.

use fedsieve::defense::{DefenseConfig, DefenseName};
use fedsieve::sim::{run_experiment, ExperimentConfig};

fn main() -> fedsieve::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk_am.toml").into()
    });
    let cfg = ExperimentConfig::load(&path)?;
    let mut open = cfg.clone();
    open.defense = DefenseConfig::named(DefenseName::None);
    let mut guarded = cfg.clone();
    guarded.defense = DefenseConfig::named(DefenseName::Fld);

    let a = run_experiment(&open)?;
    let b = run_experiment(&guarded)?;
    println!("round  attackers      none MA/BA       fld MA/BA   caught");
    for (x, y) in a.iter().zip(&b) {
        let caught = y
            .attackers
            .iter()
            .filter(|c| !y.benign_set.contains(c))
            .count();
        println!(
            "{:>5}  {:<9} {:>7.3}/{:<7.3} {:>7.3}/{:<7.3} {caught}/{}",
            x.round,
            format!("{:?}", y.attackers),
            x.ma,
            x.ba,
            y.ma,
            y.ba,
            y.attackers.len()
        );
    }
    Ok(())
}
