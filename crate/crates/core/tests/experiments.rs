use frustlab::experiments::{
    planted_triple_dataset, run_fisher_window, run_realworld, run_synthetic, run_theory_check,
    ExperimentConfig, Preset,
};
use frustlab::{Dataset, Error};

fn tiny() -> ExperimentConfig {
    ExperimentConfig::load(
        Preset::Quick,
        None,
        &[
            "workers=2",
            "globe.n=300",
            "globe.r=8",
            "models.hidden=8",
            "models.k_sae=6",
            "models.bb_epochs=2",
            "models.sae_epochs=2",
            "models.cbm_epochs=2",
        ]
        .map(String::from),
    )
    .unwrap()
}

#[test]
fn fisher_window_rows_are_window_major() {
    let mut cfg = tiny();
    cfg.fisher_window.reps = 2;
    let out = run_fisher_window(&cfg).unwrap();
    let windows = cfg.fisher_window.windows.len();
    // One row per (window, rep), each holding both geometries.
    assert_eq!(out.records.len(), 2 * windows);
    for (i, r) in out.records.iter().enumerate() {
        let (lo, hi) = cfg.fisher_window.windows[i / 2];
        assert_eq!(r.key("p_low"), Some(format!("{lo}").as_str()));
        assert_eq!(r.key("p_high"), Some(format!("{hi}").as_str()));
        assert_eq!(r.key("rep"), Some((i % 2).to_string().as_str()));
    }
    // One gamma_fisher comparison per window.
    assert_eq!(out.tests_for("gamma_fisher").count(), windows);
}

#[test]
fn synthetic_grid_covers_every_cell_once() {
    let mut cfg = tiny();
    cfg.synthetic.n = 400;
    cfg.synthetic.k = 12;
    cfg.synthetic.r = 10;
    cfg.synthetic.k_known = vec![3];
    cfg.synthetic.omega = vec![0.5];
    cfg.synthetic.seeds = 2;
    cfg.synthetic.n_mc = 2000;
    let out = run_synthetic(&cfg).unwrap();
    assert_eq!(out.records.len(), 3 * 2);
    let mut cells: Vec<(String, String)> = out
        .records
        .iter()
        .map(|r| {
            (
                r.key("alpha").unwrap().into(),
                r.key("seed").unwrap().into(),
            )
        })
        .collect();
    cells.sort();
    cells.dedup();
    assert_eq!(cells.len(), 6);
    // Each alpha contrast pairs both seeds.
    assert!(out.tests_for("cbm_acc").all(|t| t.n == 2));
}

#[test]
fn theory_check_agrees_with_monte_carlo() {
    let mut cfg = tiny();
    cfg.theory.instances = 6;
    cfg.theory.n_mc = 200_000;
    let out = run_theory_check(&cfg).unwrap();
    assert_eq!(out.records.len(), 6);
    for r in &out.records {
        let z = r.metrics.get("z_score").unwrap();
        assert!(z.abs() <= 5.0, "{z}");
        let gap =
            (r.metrics.get("acc_closed").unwrap() - r.metrics.get("acc_arcsin").unwrap()).abs();
        assert!(gap <= 1e-12);
    }
}

#[test]
fn realworld_needs_three_concepts() {
    let data = planted_triple_dataset(200, 6, 0.6, 0.6, 0.5, 1).unwrap();
    let two = Dataset::new(
        data.activations.clone(),
        data.concepts.select_columns(&[0, 1]),
        vec![0, 1],
        data.labels.clone(),
    )
    .unwrap();
    assert!(matches!(
        run_realworld(&tiny(), &two),
        Err(Error::TooFewConceptColumns(2))
    ));
}

#[test]
fn realworld_runs_one_row_per_model_and_fold() {
    let mut cfg = tiny();
    cfg.realworld.folds = 3;
    cfg.realworld.k_sae = 8;
    cfg.realworld.bb_epochs = 2;
    let data = planted_triple_dataset(300, 6, 0.6, 0.6, 0.5, 2).unwrap();
    let out = run_realworld(&cfg, &data).unwrap();
    assert_eq!(out.records.len(), 6);
    assert_eq!(out.null_rows(), 0);
    assert_eq!(out.tests_for("frust12_fisher").count(), 1);
}
