//! Distributed backdoor: four compromised clients each train on one
//! fragment of the trigger; the backdoor is evaluated with the full trigger.

use fedsieve::defense::{DefenseConfig, DefenseName};
use fedsieve::sim::{run_experiment, ExperimentConfig};

fn main() -> fedsieve::Result<()> {
    let cfg = ExperimentConfig::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/dba.toml"
    ))?;
    let trigger = cfg.trigger();
    for part in 0..trigger.fragment_count {
        println!("fragment {part}: pixels {:?}", trigger.fragment(part));
    }
    for rule in [
        DefenseName::None,
        DefenseName::Fld,
        DefenseName::Krum,
        DefenseName::FoolsGold,
    ] {
        let mut c = cfg.clone();
        c.defense = DefenseConfig::named(rule);
        let recs = run_experiment(&c)?;
        let last = recs.last().expect("rounds > 0");
        let peak = recs.iter().map(|r| r.ba).fold(0.0, f64::max);
        println!(
            "{rule:?}: final MA {:.3}, final BA {:.3}, peak BA {peak:.3}",
            last.ma, last.ba
        );
    }
    Ok(())
}
