use sis_ope::experiment::{
    run_experiment, DomainKind, EstimatorKind, ExperimentConfig, ROWS_HEADER,
};
use sis_ope::Error;

fn small_config(domain: DomainKind) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
        domain = "{}"
        bounds = [3, 4]
        trajectories_per_run = [50, 20]
        replicates = 4
        epsilon = 0.01
        base_seed = 7
        horizon_cap = 40
        "#,
        match domain {
            DomainKind::Deterministic => "deterministic",
            DomainKind::Stochastic => "stochastic",
        }
    ))
    .unwrap()
}

#[test]
fn rows_follow_grid_order_and_header() {
    let config = small_config(DomainKind::Deterministic);
    let out = run_experiment(&config).unwrap();
    assert_eq!(out.rows.len(), 2 * 2 * 4 * 5);
    let mut buf = Vec::new();
    out.write_rows_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), ROWS_HEADER.join(","));
    let keys: Vec<_> = out
        .rows
        .iter()
        .map(|r| (r.domain_size, r.n, r.replicate, r.estimator))
        .collect();
    let mut expected = Vec::new();
    for size in [7, 9] {
        for n in [50, 20] {
            for rep in 0..4 {
                for k in EstimatorKind::ALL {
                    expected.push((size, n, rep, k));
                }
            }
        }
    }
    assert_eq!(keys, expected);
    for r in &out.rows {
        let chosen = r.chosen_set.is_some();
        assert_eq!(chosen, r.estimator == EstimatorKind::SisSearch);
    }
}

#[test]
fn zero_rewards_give_zero_error() {
    let config = ExperimentConfig {
        zero_rewards: true,
        ..small_config(DomainKind::Stochastic)
    };
    let out = run_experiment(&config).unwrap();
    assert!(out.rows.iter().all(|r| r.squared_error == Some(0.0)));
    assert!(out
        .summary
        .iter()
        .all(|s| s.mse == 0.0 && s.true_return == 0.0));
}

#[test]
fn mse_table_is_the_mean_squared_error() {
    let out = run_experiment(&small_config(DomainKind::Stochastic)).unwrap();
    let mut buf = Vec::new();
    out.write_mse_table_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "domain_size",
            "n",
            "is",
            "pdis",
            "sis_lift",
            "sis_search",
            "incris"
        ]
    );
    let mut lines = 0;
    for record in reader.records() {
        let record = record.unwrap();
        let size: usize = record[0].parse().unwrap();
        let n: usize = record[1].parse().unwrap();
        for (col, kind) in EstimatorKind::ALL.iter().enumerate() {
            let table: f64 = record[col + 2].parse().unwrap();
            let errors: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.domain_size == size && r.n == n && r.estimator == *kind)
                .map(|r| r.squared_error.unwrap())
                .collect();
            assert_eq!(errors.len(), 4);
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            assert!((table - mean).abs() <= 1e-12 * mean.max(1.0));
        }
        lines += 1;
    }
    assert_eq!(lines, 4);
}

#[test]
fn adding_estimators_keeps_batches() {
    let base = small_config(DomainKind::Stochastic);
    let only_is = ExperimentConfig {
        estimators: vec![EstimatorKind::Is],
        ..base.clone()
    };
    let full = run_experiment(&base).unwrap();
    let partial = run_experiment(&only_is).unwrap();
    for row in &partial.rows {
        let twin = full
            .rows
            .iter()
            .find(|r| {
                (r.domain_size, r.n, r.replicate, r.estimator)
                    == (row.domain_size, row.n, row.replicate, row.estimator)
            })
            .unwrap();
        assert_eq!(twin, row);
    }
}

#[test]
fn independent_batches_change_seeds() {
    let config = ExperimentConfig {
        shared_batch: false,
        ..small_config(DomainKind::Stochastic)
    };
    let out = run_experiment(&config).unwrap();
    let first: Vec<u64> = out.rows.iter().take(5).map(|r| r.seed).collect();
    let mut unique = first.clone();
    unique.sort_unstable();
    unique.dedup();
    assert_eq!(unique.len(), 5);
}

#[test]
fn invalid_configs_are_rejected() {
    let cases = [
        "domain = \"deterministic\"\nbounds = [2]\ntrajectories_per_run = [10]\nreplicates = 1\nepsilon = 0.01\nbase_seed = 0",
        "domain = \"deterministic\"\nbounds = [3]\ntrajectories_per_run = [10]\nreplicates = 0\nepsilon = 0.01\nbase_seed = 0",
        "domain = \"deterministic\"\nbounds = [3]\ntrajectories_per_run = [10]\nreplicates = 1\nepsilon = 0.01\nbase_seed = 0\nestimators = []",
        "domain = \"stochastic\"\nbounds = [3]\nnoise = 0.7\ntrajectories_per_run = [10]\nreplicates = 1\nepsilon = 0.01\nbase_seed = 0",
    ];
    for text in cases {
        assert!(
            matches!(
                ExperimentConfig::from_toml(text),
                Err(Error::InvalidConfig(_))
            ),
            "{text}"
        );
    }
    let unknown = "domain = \"deterministic\"\nbounds = [3]\ntrajectories_per_run = [10]\nreplicates = 1\nepsilon = 0.01\nbase_seed = 0\ncolour = 1";
    assert!(matches!(
        ExperimentConfig::from_toml(unknown),
        Err(Error::Toml(_))
    ));
}

#[test]
fn incris_beats_pdis_on_noisy_three() {
    let config = ExperimentConfig::from_toml(
        r#"
        domain = "stochastic"
        bounds = [3]
        noise = 0.1
        trajectories_per_run = [1000]
        replicates = 100
        epsilon = 0.01
        estimators = ["pdis", "incris"]
        base_seed = 11
        "#,
    )
    .unwrap();
    let out = run_experiment(&config).unwrap();
    let mse = |k| out.summary_for(7, 1000, k).unwrap().mse;
    assert!(
        mse(EstimatorKind::Incris) <= mse(EstimatorKind::Pdis),
        "incris {} pdis {}",
        mse(EstimatorKind::Incris),
        mse(EstimatorKind::Pdis)
    );
}

#[test]
fn output_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&small_config(DomainKind::Deterministic)).unwrap();
    let written = out.write_to(dir.path(), true).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "rows.csv",
            "mse_table.csv",
            "summary.csv",
            "plot_n50.csv",
            "plot_n20.csv"
        ]
    );
    let plot = std::fs::read_to_string(dir.path().join("plot_n50.csv")).unwrap();
    assert_eq!(plot.lines().next().unwrap(), "x,estimator,y,yerr");
    assert_eq!(plot.lines().count(), 1 + 2 * 5);
}
