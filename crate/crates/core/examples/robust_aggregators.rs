//! Every aggregation rule on one round: eight honest updates around a common
//! model plus two colluding clients pushing the same large offset.

use fedsieve::defense::{DefenseConfig, DefenseName, Submission};
use fedsieve::model::{init_model, ArchSpec};
use fedsieve::seed;
use rand_distr::{Distribution, Normal};

const RULES: [DefenseName; 8] = [
    DefenseName::None,
    DefenseName::Fld,
    DefenseName::Krum,
    DefenseName::Bulyan,
    DefenseName::Rfa,
    DefenseName::TrimmedMean,
    DefenseName::FoolsGold,
    DefenseName::Dp,
];

fn main() -> fedsieve::Result<()> {
    let global = init_model(&ArchSpec::mlp(8, 6, 3), 3)?;
    let target = global.with_flat(
        &global
            .flatten()
            .iter()
            .map(|v| v + 0.05)
            .collect::<Vec<_>>(),
    )?;
    let noise = Normal::new(0.0, 0.01).expect("valid");
    let mut rng = seed::rng(11, &[]);
    let subs: Vec<Submission> = (0..11)
        .map(|i| {
            let offset = if i >= 9 { 2.0 } else { 0.0 };
            let flat: Vec<f64> = target
                .flatten()
                .iter()
                .map(|v| v + offset + noise.sample(&mut rng))
                .collect();
            Ok(Submission {
                client_id: i,
                params: global.with_flat(&flat)?,
            })
        })
        .collect::<fedsieve::Result<_>>()?;

    println!(
        "{:<13} {:>14} {:>10}  kept",
        "rule", "dist to honest", "dist to G"
    );
    for rule in RULES {
        let mut defense = DefenseConfig::named(rule).build(1)?;
        let out = defense.aggregate(&subs, &global)?;
        println!(
            "{:<13} {:>14.4} {:>10.4}  {:?}",
            defense.name(),
            out.aggregated.squared_distance(&target).sqrt(),
            out.aggregated.squared_distance(&global).sqrt(),
            out.benign_set
        );
    }
    Ok(())
}
