//! Quadratic convergence testbed: optimality gap of the global model under
//! model-replacement attackers, with and without FLD.

use fedsieve::defense::{DefenseConfig, DefenseName};
use fedsieve::sim::{convergence_probe, ProbeConfig};

fn main() -> fedsieve::Result<()> {
    let cfg = ProbeConfig::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/probe.toml"
    ))?;
    let fld = convergence_probe(&cfg)?;
    let open = convergence_probe(&ProbeConfig {
        defense: DefenseConfig::named(DefenseName::None),
        ..cfg.clone()
    })?;
    println!("round        fld gap       none gap");
    for t in [0, 1, 4, 9, 24, 49, 99, 149, cfg.rounds - 1] {
        println!(
            "{:>5}  {:>13.4e}  {:>13.4e}",
            t + 1,
            fld.gaps[t],
            open.gaps[t]
        );
    }
    println!(
        "attackers fully excluded in {}/{} rounds",
        fld.attackers_excluded, cfg.rounds
    );
    Ok(())
}
