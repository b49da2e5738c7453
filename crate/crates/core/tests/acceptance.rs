//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use fedsieve::attack::scale_toward;
use fedsieve::defense::{
    bulyan_select, fld_aggregate, krum_scores, Defense, DefenseConfig, DefenseName, NoDefense,
    Submission,
};
use fedsieve::model::{init_model, ArchSpec};
use fedsieve::oracle::{cof_oracle, distance_sum_oracle, krum_oracle};
use fedsieve::outlier::{cof, distance_sum, geometric_median, mad_flags, DistanceMatrix, PointSet};
use fedsieve::private::{keygen, mask_round, private_fld, CloudPlatform, FixedPointCodec};
use fedsieve::seed;
use fedsieve::sim::{
    convergence_probe, run_experiment, ExperimentConfig, MetricsRecord, ProbeConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(config(name)).expect("bundled config parses")
}

fn run(cfg: &ExperimentConfig) -> Vec<MetricsRecord> {
    run_experiment(cfg).expect("experiment runs")
}

fn without_attack(cfg: &ExperimentConfig, defense: DefenseName) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.trigger = c.attack.take().map(|a| a.trigger);
    c.pmr = 0.0;
    c.defense = DefenseConfig::named(defense);
    c
}

fn with_defense(cfg: &ExperimentConfig, defense: DefenseName) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.defense = DefenseConfig::named(defense);
    c
}

fn max_ba(recs: &[MetricsRecord]) -> f64 {
    recs.iter().map(|r| r.ba).fold(0.0, f64::max)
}

fn last(recs: &[MetricsRecord]) -> &MetricsRecord {
    recs.last().expect("at least one round")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const DESK_SEEDS: [u64; 3] = [1, 2, 3];

fn constrain_and_scale_multi_round() -> Outcome {
    let base = load("desk_am.toml");
    let mut lines = Vec::new();
    let mut ok = true;
    for s in DESK_SEEDS {
        let cfg = ExperimentConfig {
            seed: s,
            ..base.clone()
        };
        let clean = run(&without_attack(&cfg, DefenseName::None));
        let open = run(&with_defense(&cfg, DefenseName::None));
        let fld = run(&with_defense(&cfg, DefenseName::Fld));
        let (ba_open, ba_fld) = (last(&open).ba, max_ba(&fld));
        let ma_gap = last(&clean).ma - last(&fld).ma;
        ok &= ba_open >= 0.80 && ba_fld <= 0.05 && ma_gap <= 0.02;
        lines.push(format!(
            "seed {s}: open BA {ba_open:.3}, FLD max BA {ba_fld:.3}, MA gap {ma_gap:+.3}"
        ));
    }
    check(ok, lines.join("; "))
}

fn distributed_backdoor() -> Outcome {
    let base = load("dba.toml");
    let mut lines = Vec::new();
    let mut ok = true;
    for s in DESK_SEEDS {
        let cfg = ExperimentConfig {
            seed: s,
            ..base.clone()
        };
        let attackers = cfg.compromised_population();
        let clean = run(&without_attack(&cfg, DefenseName::None));
        let fld = run(&with_defense(&cfg, DefenseName::Fld));
        let drop = last(&clean).ma - last(&fld).ma;
        ok &= attackers == 4 && max_ba(&fld) <= 0.05 && drop <= 0.03;
        lines.push(format!(
            "seed {s}: {attackers} attackers, FLD max BA {:.3}, MA drop {drop:+.3}",
            max_ba(&fld)
        ));
    }
    check(ok, lines.join("; "))
}

fn single_shot_replacement() -> Outcome {
    let mut rng = seed::rng(3, &[]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let arch = ArchSpec::mlp(6, 5, 3);
    let mut worst: f64 = 0.0;
    for t in 0..20u64 {
        let g = init_model(&arch, t).unwrap();
        let x = g
            .with_flat(
                &g.flatten()
                    .iter()
                    .map(|v| v + normal.sample(&mut rng))
                    .collect::<Vec<_>>(),
            )
            .unwrap();
        let n = 10;
        let subs: Vec<Submission> = (0..n)
            .map(|i| Submission {
                client_id: i,
                params: if i == 4 {
                    scale_toward(&g, &x, f64::from(n)).unwrap()
                } else {
                    g.clone()
                },
            })
            .collect();
        let agg = NoDefense.aggregate(&subs, &g).unwrap().aggregated;
        for (a, b) in agg.flatten().iter().zip(x.flatten()) {
            worst = worst.max((a - b).abs());
        }
    }

    let base = load("single_shot.toml");
    let round = 20;
    let mut excluded = 0;
    for s in 0..20 {
        let cfg = ExperimentConfig {
            seed: s,
            rounds: round + 1,
            ..base.clone()
        };
        let recs = run(&cfg);
        let r = &recs[round];
        if !r.attackers.is_empty() && r.attackers.iter().all(|a| !r.benign_set.contains(a)) {
            excluded += 1;
        }
    }
    check(
        worst <= 1e-9 && excluded >= 19,
        format!("replacement identity max dev {worst:.2e}; scaler excluded in {excluded}/20 seeds"),
    )
}

fn cof_matches_oracle() -> Outcome {
    let mut rng = seed::rng(4, &[]);
    let mut worst: f64 = 0.0;
    for inst in 0..200 {
        let n = rng.random_range(3..=10);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(2..=n - 1);
        // every fourth instance lives on a coarse integer grid to exercise ties
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        if inst % 4 == 0 {
                            f64::from(rng.random_range(0..3))
                        } else {
                            rng.random_range(-5.0..5.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let lib = cof(&PointSet::new(rows.clone()).unwrap(), k).unwrap();
        let brute = cof_oracle(&rows, k).unwrap();
        for (a, b) in lib.iter().zip(&brute) {
            let dev = if a == b { 0.0 } else { (a - b).abs() };
            worst = worst.max(dev);
        }
    }
    check(
        worst <= 1e-9,
        format!("200 instances, max abs deviation {worst:.2e}"),
    )
}

fn mad_flagging() -> Outcome {
    let mut rng = seed::rng(5, &[]);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(3..=20);
        let s: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.1) {
                    rng.random_range(5.0..20.0)
                } else {
                    rng.random_range(0.5..1.5)
                }
            })
            .collect();
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(-100.0..100.0);
        let moved: Vec<f64> = s.iter().map(|v| a * v + b).collect();
        if mad_flags(&s, 3.0) != mad_flags(&moved, 3.0) {
            mismatches += 1;
        }
    }
    let example = [1.0, 1.1, 0.9, 1.2, 0.8, 1.05, 0.95, 1.15, 0.85, 9.0];
    let flags = mad_flags(&example, 3.0);
    let exact = flags[..9].iter().all(|f| !f) && flags[9];
    check(
        mismatches == 0 && exact,
        format!("{mismatches}/1000 affine mismatches; worked example flags only the last: {exact}"),
    )
}

fn random_round(rng: &mut impl Rng, arch: &ArchSpec, tag: u64) -> Vec<Submission> {
    let base = init_model(arch, tag).unwrap();
    let normal = Normal::new(0.0, 0.05).unwrap();
    let n = rng.random_range(5..=10u32);
    let planted = rng.random_range(0..=2u32).min(n / 3);
    (0..n)
        .map(|i| {
            let mut flat: Vec<f64> = base
                .flatten()
                .iter()
                .map(|v| v + normal.sample(rng))
                .collect();
            if i >= n - planted {
                let shift = rng.random_range(1.0..4.0);
                for v in flat.iter_mut().step_by(2) {
                    *v += shift;
                }
            }
            Submission {
                client_id: i,
                params: base.with_flat(&flat).unwrap(),
            }
        })
        .collect()
}

fn private_fld_equivalence() -> Outcome {
    let start = Instant::now();
    let kp = keygen(512, 11).unwrap();
    let pk = &kp.public;
    let mut rng = seed::rng(6, &[]);
    let mut homomorphic_failures = 0;
    for _ in 0..1000 {
        let a = BigUint::from(rng.random::<u128>());
        let b = BigUint::from(rng.random::<u128>());
        let sum = pk.add(&pk.encrypt(&a, &mut rng), &pk.encrypt(&b, &mut rng));
        if kp.decrypt(&sum) != (&a + &b) % &pk.n {
            homomorphic_failures += 1;
        }
    }

    let codec = FixedPointCodec::new(pk);
    let mut distance_failures = 0;
    for t in 0..20u64 {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let plain: Vec<Vec<i128>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| codec.decode_i128(&codec.encode(v).unwrap()).unwrap())
                    .collect()
            })
            .collect();
        let enc: Vec<Vec<_>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| pk.encrypt(&codec.encode(v).unwrap(), &mut rng))
                    .collect()
            })
            .collect();
        let (masked, _) = mask_round(pk, &enc, t).unwrap();
        let shifted: Vec<Vec<i128>> = masked
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| codec.decode_i128(&kp.decrypt(c)).unwrap())
                    .collect()
            })
            .collect();
        let (d0, d1) = (
            DistanceMatrix::fixed_point(&plain, codec.scale()),
            DistanceMatrix::fixed_point(&shifted, codec.scale()),
        );
        for i in 0..5 {
            for j in 0..5 {
                if d0.get(i, j) != d1.get(i, j) {
                    distance_failures += 1;
                }
            }
        }
    }

    let cp = CloudPlatform::new(kp.clone());
    let arch = ArchSpec::flat(&[4, 3, 2, 2]);
    let mut set_mismatches = 0;
    for inst in 0..50u64 {
        let subs = random_round(&mut rng, &arch, inst);
        let private = private_fld(&cp, &subs, 3.0, inst as usize, inst).unwrap();
        let plain = fld_aggregate(&subs, 3.0, None).unwrap();
        if private.benign_set != plain.benign_set {
            set_mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        homomorphic_failures == 0 && distance_failures == 0 && set_mismatches == 0 && secs <= 120.0,
        format!(
            "homomorphism failures {homomorphic_failures}/1000, masked distance mismatches {distance_failures}, \
             benign-set mismatches {set_mismatches}/50, {secs:.1}s"
        ),
    )
}

fn convergence_trend() -> Outcome {
    let cfg = ProbeConfig::load(config("probe.toml")).unwrap();
    let fld = convergence_probe(&cfg).unwrap();
    let open = convergence_probe(&ProbeConfig {
        defense: DefenseConfig::named(DefenseName::None),
        ..cfg.clone()
    })
    .unwrap();
    let (g_fld, g_open) = (fld.final_gap(), open.final_gap());
    check(
        g_fld <= 1e-2 && g_open >= 10.0 * g_fld,
        format!(
            "T={}: FLD gap {g_fld:.3e}, undefended gap {g_open:.3e}",
            cfg.rounds
        ),
    )
}

fn baseline_sanity() -> Outcome {
    let mut rng = seed::rng(8, &[]);
    let mut krum_worst: f64 = 0.0;
    let mut krum_pick_mismatch = 0;
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let scores = krum_scores(&PointSet::new(rows.clone()).unwrap(), 1).unwrap();
        let oracle = krum_oracle(&rows, 1).unwrap();
        for (a, b) in scores.iter().zip(&oracle.scores) {
            krum_worst = krum_worst.max((a - b).abs());
        }
        let pick = (0..7).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });
        krum_pick_mismatch += usize::from(pick != oracle.selected);
    }

    let mut bulyan_hits = 0;
    for _ in 0..100 {
        let outlier = rng.random_range(0..11);
        let rows: Vec<Vec<f64>> = (0..11)
            .map(|i| {
                (0..4)
                    .map(|_| {
                        if i == outlier {
                            rng.random_range(500.0..1000.0)
                        } else {
                            rng.random_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        if bulyan_select(&PointSet::new(rows).unwrap(), 2)
            .unwrap()
            .contains(&outlier)
        {
            bulyan_hits += 1;
        }
    }

    let mut gm_failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..=12);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-10.0..10.0)).collect())
            .collect();
        let points = PointSet::new(rows.clone()).unwrap();
        let z = geometric_median(&points, 1e-10, 10_000);
        let obj = distance_sum(&points, &z);
        let mean_obj = distance_sum_oracle(&rows, &points.mean());
        let beats_points = rows
            .iter()
            .all(|p| obj <= distance_sum_oracle(&rows, p) + 1e-9);
        if !(beats_points && obj <= mean_obj + 1e-9) {
            gm_failures += 1;
        }
    }
    check(
        krum_worst <= 1e-9 && krum_pick_mismatch == 0 && bulyan_hits == 0 && gm_failures == 0,
        format!(
            "krum max dev {krum_worst:.2e} ({krum_pick_mismatch} pick mismatches); bulyan kept outlier {bulyan_hits}/100; \
             median failures {gm_failures}/100"
        ),
    )
}

fn ablations() -> Outcome {
    let base = load("desk_am.toml");
    let mut lines = Vec::new();
    let mut ok = true;
    for pmr in [0.1, 0.2, 0.3, 0.4] {
        let recs = run(&ExperimentConfig {
            pmr,
            ..base.clone()
        });
        ok &= max_ba(&recs) <= 0.05;
        lines.push(format!("pmr {pmr}: max BA {:.3}", max_ba(&recs)));
    }
    let open = run(&without_attack(&base, DefenseName::None));
    let fld = run(&without_attack(&base, DefenseName::Fld));
    let gap = (last(&open).ma - last(&fld).ma).abs();
    ok &= gap <= 0.01;
    lines.push(format!("pmr 0: MA gap {gap:.3}"));
    for alpha in [0.1, 100.0] {
        let recs = run(&ExperimentConfig {
            dirichlet_alpha: alpha,
            ..base.clone()
        });
        ok &= max_ba(&recs) <= 0.05;
        lines.push(format!("dirichlet {alpha}: max BA {:.3}", max_ba(&recs)));
    }
    check(ok, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "1 multi-round constrain-and-scale",
            constrain_and_scale_multi_round,
        ),
        ("2 distributed backdoor", distributed_backdoor),
        ("3 single-shot replacement", single_shot_replacement),
        ("4 COF oracle equivalence", cof_matches_oracle),
        ("5 MAD flagging", mad_flagging),
        ("6 private FLD", private_fld_equivalence),
        ("7 convergence probe", convergence_trend),
        ("8 baseline sanity", baseline_sanity),
        ("9 PMR and heterogeneity ablations", ablations),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {name} ({:.1}s): {detail}",
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
