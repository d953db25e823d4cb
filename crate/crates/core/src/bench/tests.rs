use super::*;

fn rastrigin2(rho: f64) -> ObjectiveConfig {
    ObjectiveConfig::ModifiedRastrigin { dim: 2, rho }
}

fn pg() -> AlgorithmConfig {
    AlgorithmConfig::PgGlonet {
        network: PgNetworkConfig::default(),
        train: TrainConfig::default(),
        refinement: None,
    }
}

#[test]
fn splitmix_reference_values() {
    // first outputs of the reference SplitMix64 stream seeded with 0
    assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    assert_eq!(repetition_seed(0, 0), 0xE220_A839_7B1D_CDAF);
    assert_eq!(repetition_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
    assert_eq!(repetition_seed(0, 2), 0x06C4_5D18_8009_454F);
}

#[test]
fn seeds_extend_without_perturbing() {
    let mut c = ExperimentConfig::new(rastrigin2(1.0), pg());
    c.repetitions = 3;
    let three = c.seeds();
    c.repetitions = 5;
    assert_eq!(&c.seeds()[..3], three.as_slice());
}

#[test]
fn zero_budget_gives_flagged_empty_record() {
    let mut c = ExperimentConfig::new(rastrigin2(10.0), pg());
    c.repetitions = 1;
    c.budget.max_evaluations = Some(0);
    let records = run_experiment(&c).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!(r.evals_total, 0);
    assert!(r.no_evaluations());
    assert_eq!(r.best_f, f64::INFINITY);
    assert!(!r.reached);
    let rows = aggregate(&records);
    assert!(rows[0].has_empty_runs && rows[0].single_run);
}

#[test]
fn explicit_seeds_are_reproducible() {
    let mut c = ExperimentConfig::new(
        rastrigin2(4.0),
        AlgorithmConfig::AdamMultistart(AdamMultistartConfig {
            starts: 5,
            iterations: 50,
            ..Default::default()
        }),
    );
    c.repetitions = 3;
    c.seeds = Some(vec![4, 9, 1]);
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![4, 9, 1]);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    write_records_to(&a, &mut buf_a).unwrap();
    write_records_to(&b, &mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b);
}

#[test]
fn budget_never_exceeded() {
    let algorithms = [
        pg(),
        AlgorithmConfig::PgGlonet {
            network: PgNetworkConfig::default(),
            train: TrainConfig {
                iterations: 10,
                ..Default::default()
            },
            refinement: Some(RefinementConfig {
                samples: 5,
                iterations: 30,
                ..Default::default()
            }),
        },
        AlgorithmConfig::FcGlonet {
            network: FcNetworkConfig::default(),
            train: TrainConfig::default(),
            refinement: None,
        },
        AlgorithmConfig::AdamMultistart(AdamMultistartConfig {
            starts: 100,
            ..Default::default()
        }),
        AlgorithmConfig::NonlinearCg(CgConfig::default()),
        AlgorithmConfig::CmaEs(CmaEsConfig::default()),
    ];
    for alg in algorithms {
        let mut c = ExperimentConfig::new(ObjectiveConfig::Rastrigin { dim: 6 }, alg);
        c.repetitions = 2;
        c.budget.max_evaluations = Some(173);
        for r in run_experiment_with_traces(&c).unwrap() {
            assert!(r.record.evals_total <= 173, "{}", r.record.algorithm);
            assert_eq!(r.trace.total_evaluations(), r.record.evals_total, "{}", r.record.algorithm);
            if let Some(e) = r.record.evals_to_target {
                assert!(e <= r.record.evals_total);
            }
        }
    }
}

#[test]
fn refinement_trace_continues_training_trace() {
    let mut c = ExperimentConfig::new(
        ObjectiveConfig::Rastrigin { dim: 8 },
        AlgorithmConfig::PgGlonet {
            network: PgNetworkConfig::default(),
            train: TrainConfig {
                iterations: 5,
                ..Default::default()
            },
            refinement: Some(RefinementConfig {
                samples: 3,
                iterations: 20,
                ..Default::default()
            }),
        },
    );
    c.early_stop = false;
    let rep = run_repetition(&c, 2).unwrap();
    assert_eq!(rep.record.algorithm, "pg_glonet+refine");
    assert_eq!(rep.record.evals_total, 5 * 20 + 3 * 20);
    let rows = rep.trace.records();
    assert_eq!(rows.len(), 5 + 3);
    assert!(rows.windows(2).all(|w| w[1].global_best <= w[0].global_best));
    assert_eq!(rows.last().unwrap().global_best, rep.record.best_f);
}

#[test]
fn config_parses_from_json() {
    let json = r#"{
        "objective": {"name": "modified_rastrigin", "dim": 2, "rho": 5},
        "algorithm": {"id": "cma_es", "sigma_fraction": 0.2},
        "repetitions": 2,
        "budget": {"max_evaluations": 1000}
    }"#;
    let c: ExperimentConfig = serde_json::from_str(json).unwrap();
    assert_eq!(c.repetitions, 2);
    match &c.algorithm {
        AlgorithmConfig::CmaEs(cfg) => assert_eq!(cfg.sigma_fraction, 0.2),
        other => panic!("{other:?}"),
    }
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);

    let pg_json = r#"{
        "objective": {"name": "rastrigin", "dim": 4},
        "algorithm": {"id": "pg_glonet", "train": {"batch_size": 50}, "network": {"activation": "leaky_relu"}}
    }"#;
    let c: ExperimentConfig = serde_json::from_str(pg_json).unwrap();
    match &c.algorithm {
        AlgorithmConfig::PgGlonet { train, network, .. } => {
            assert_eq!(train.batch_size, 50);
            assert_eq!(network.activation, Activation::LeakyRelu);
        }
        other => panic!("{other:?}"),
    }

    for bad in [
        r#"{"objective": {"name": "rastrigin", "dim": 2}, "algorithm": {"id": "cma_es", "sigma": 1}}"#,
        r#"{"objective": {"name": "rastrigin", "dim": 2}, "algorithm": {"id": "simplex"}}"#,
        r#"{"objective": {"name": "rastrigin", "dim": 2}, "algorithm": {"id": "pg_glonet"}, "reps": 3}"#,
    ] {
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err(), "{bad}");
    }
}

#[test]
fn validation() {
    let mut c = ExperimentConfig::new(rastrigin2(1.0), pg());
    c.repetitions = 0;
    assert!(c.validate().is_err());
    c.repetitions = 2;
    c.seeds = Some(vec![1]);
    assert!(c.validate().is_err());
    c.seeds = None;
    c.target_eps = -1.0;
    assert!(c.validate().is_err());
    let unbounded = ExperimentConfig::new(rastrigin2(1.0), AlgorithmConfig::CmaEs(CmaEsConfig::default()));
    assert!(unbounded.validate().is_err());
}
