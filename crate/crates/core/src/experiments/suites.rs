use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::pipeline::{
    frustration_metrics, prediction_metrics, run_split, train_background, train_cbm, Metrics,
    ModelHyper,
};
use super::records::{paired_test, summary_line, RunRecord, TestRow};
use super::{Suite, SuiteOutput};
use crate::data::Dataset;
use crate::datagen::{
    generate_from_structure, generate_globe_dataset, generate_synthetic_dataset, Geometry,
    GlobeConfig, SyntheticConfig, SyntheticStructure,
};
use crate::error::{Error, Result};
use crate::geometry::fisher_averaged;
use crate::ingest::{stratified_folds, Standardizer};
use crate::numerics::{mix_seed, Matrix, RngStream};
use crate::theory::{accuracy_arcsin, binomial_se, closed_form_accuracy, monte_carlo_accuracy};

const TAG_SPLIT: u64 = 0x0073_706c_6974;
const TAG_MC: u64 = 0x6d6f_6e74_6563_6172;
const TAG_STANDIN: u64 = 0x0073_7461_6e64_696e;

pub const GLOBE_COLUMNS: &[&str] = &[
    "bb_acc",
    "cbm_acc",
    "concept_mse",
    "gamma_fisher",
    "gamma_euclid",
    "frust12_fisher",
    "frust12_euclid",
    "n_averaged",
];
pub const SYNTHETIC_COLUMNS: &[&str] = &[
    "bb_acc",
    "cbm_acc",
    "concept_mse",
    "beta",
    "gamma_fisher",
    "gamma_euclid",
    "acc_closed",
    "acc_mc",
    "acc_mc_se",
    "t1",
    "t2",
    "t3",
    "t4",
    "n_averaged",
];
pub const REALWORLD_COLUMNS: &[&str] = GLOBE_COLUMNS;
pub const FISHER_WINDOW_COLUMNS: &[&str] = &[
    "gamma_fisher_sphere",
    "gamma_fisher_cylinder",
    "delta_gamma_fisher",
    "gamma_euclid_sphere",
    "gamma_euclid_cylinder",
    "n_averaged_sphere",
    "n_averaged_cylinder",
];
pub const THEORY_COLUMNS: &[&str] = &[
    "acc_closed",
    "acc_arcsin",
    "acc_mc",
    "acc_mc_se",
    "z_score",
    "t1",
    "t2",
    "t3",
    "t4",
    "sigma_s2",
    "sigma_r2",
];

/// Maps `f` over `items` on a pool of `workers` threads (0 = automatic),
/// returning results in input order.
pub fn par_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(&f).collect())
}

fn timed(keys: Vec<(&'static str, String)>, f: impl FnOnce() -> Result<Metrics>) -> RunRecord {
    let t = Instant::now();
    let (metrics, error) = match f() {
        Ok(m) => (m, None),
        Err(e) => (Metrics::default(), Some(e.to_string())),
    };
    RunRecord {
        keys,
        metrics,
        error,
        wall_secs: t.elapsed().as_secs_f64(),
    }
}

/// Matched values of `metric` for rows where `pick_a` and `pick_b` select the
/// two sides and `pair_key` identifies the match. Pairs with a missing side
/// are skipped.
fn collect_pairs(
    records: &[RunRecord],
    metric: &str,
    pick_a: impl Fn(&RunRecord) -> bool,
    pick_b: impl Fn(&RunRecord) -> bool,
    pair_key: impl Fn(&RunRecord) -> String,
) -> (Vec<f64>, Vec<f64>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for ra in records.iter().filter(|r| pick_a(r)) {
        let key = pair_key(ra);
        let Some(rb) = records.iter().find(|r| pick_b(r) && pair_key(r) == key) else {
            continue;
        };
        if let (Some(x), Some(y)) = (ra.metrics.get(metric), rb.metrics.get(metric)) {
            a.push(x);
            b.push(y);
        }
    }
    (a, b)
}

fn summary(
    suite: Suite,
    cfg: &ExperimentConfig,
    records: &[RunRecord],
    tests: &[TestRow],
    extra: &[String],
) -> String {
    let mut s = format!(
        "frustlab {} (seed {}, {} rows, {} null)\n",
        suite.as_str(),
        cfg.seed,
        records.len(),
        records.iter().filter(|r| r.is_null()).count()
    );
    for line in extra {
        s.push_str(line);
        s.push('\n');
    }
    if !tests.is_empty() {
        s.push_str("paired Wilcoxon signed-rank tests (a - b):\n");
        for t in tests {
            s.push_str("  ");
            s.push_str(&summary_line(t));
            s.push('\n');
        }
    }
    for r in records.iter().filter(|r| r.is_null()) {
        let keys: Vec<String> = r.keys.iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!(
            "null row {}: {}\n",
            keys.join(" "),
            r.error.as_deref().unwrap_or("")
        ));
    }
    s
}

fn split(data: &Dataset, fraction: f64, seed: u64) -> (Dataset, Dataset) {
    data.train_test_split(fraction, &mut RngStream::substream(seed, TAG_SPLIT))
}

fn globe_data(cfg: &ExperimentConfig, geometry: Geometry, seed: u64) -> Result<(Dataset, Dataset)> {
    let g = &cfg.globe;
    let data = generate_globe_dataset(&GlobeConfig {
        geometry,
        n: g.n,
        r: g.r,
        sigma_a: g.sigma_a,
        radius: g.radius,
        seed,
    })?;
    Ok(split(&data.dataset, g.train_fraction, seed))
}

/// One globe cell: data, models and metrics for repetition `rep`. Both
/// geometries of a repetition share its seed.
pub fn globe_cell(cfg: &ExperimentConfig, rep: usize, geometry: Geometry) -> RunRecord {
    let seed = cfg.seed + rep as u64;
    let keys = vec![
        ("suite", Suite::Globe.as_str().to_string()),
        ("geometry", geometry.as_str().to_string()),
        ("rep", rep.to_string()),
        ("seed", seed.to_string()),
    ];
    timed(keys, || {
        let (train, test) = globe_data(cfg, geometry, seed)?;
        run_split(&train, &test, &cfg.models, cfg.window(), None, seed)
    })
}

const GEOMETRIES: [Geometry; 2] = [Geometry::Spherical, Geometry::Cylindrical];

fn by_key(name: &'static str) -> impl Fn(&RunRecord) -> String {
    move |r| r.key(name).unwrap_or_default().to_string()
}

pub fn run_globe(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let cells: Vec<(usize, Geometry)> = (0..cfg.globe.reps)
        .flat_map(|rep| GEOMETRIES.map(|g| (rep, g)))
        .collect();
    let records = par_map(&cells, cfg.workers, |&(rep, g)| globe_cell(cfg, rep, g));
    let metrics = [
        "gamma_fisher",
        "gamma_euclid",
        "frust12_fisher",
        "frust12_euclid",
        "bb_acc",
        "cbm_acc",
        "concept_mse",
    ];
    let tests: Vec<TestRow> = metrics
        .iter()
        .map(|m| {
            let (a, b) = collect_pairs(
                &records,
                m,
                |r| r.key("geometry") == Some("sphere"),
                |r| r.key("geometry") == Some("cylinder"),
                by_key("rep"),
            );
            paired_test(m, "sphere", "cylinder", &a, &b)
        })
        .collect();
    let text = summary(Suite::Globe, cfg, &records, &tests, &[]);
    Ok(SuiteOutput {
        suite: Suite::Globe,
        metric_columns: GLOBE_COLUMNS.to_vec(),
        records,
        tests,
        summary: text,
    })
}

/// Trains both geometries of one repetition once and scores every window.
fn fisher_window_rep(cfg: &ExperimentConfig, rep: usize) -> Vec<RunRecord> {
    let seed = cfg.seed + rep as u64;
    let windows = &cfg.fisher_window.windows;
    let keys = |w: (f64, f64)| {
        vec![
            ("suite", Suite::FisherWindow.as_str().to_string()),
            ("p_low", format!("{}", w.0)),
            ("p_high", format!("{}", w.1)),
            ("rep", rep.to_string()),
            ("seed", seed.to_string()),
        ]
    };
    let t = Instant::now();
    let trained: Result<Vec<_>> = GEOMETRIES
        .iter()
        .map(|&g| {
            let (train, _) = globe_data(cfg, g, seed)?;
            let bg = train_background(&train, &cfg.models, seed)?;
            let cbm = train_cbm(&train, &cfg.models, seed)?;
            Ok((train, bg, cbm))
        })
        .collect();
    let train_secs = t.elapsed().as_secs_f64();
    let trained = match trained {
        Ok(t) => t,
        Err(e) => {
            return windows
                .iter()
                .map(|&w| RunRecord {
                    keys: keys(w),
                    metrics: Metrics::default(),
                    error: Some(e.to_string()),
                    wall_secs: train_secs,
                })
                .collect()
        }
    };
    windows
        .iter()
        .map(|&w| {
            let mut rec = timed(keys(w), || {
                let mut m = Metrics::default();
                let mut gf = [0.0; 2];
                for (i, ((train, bg, cbm), g)) in trained.iter().zip(GEOMETRIES).enumerate() {
                    let form = fisher_averaged(&bg.bb, &train.activations, w.0, w.1)?;
                    let fm = frustration_metrics(cbm, &bg.sae, &form)?;
                    gf[i] = fm.get("gamma_fisher").unwrap_or(f64::NAN);
                    let (name_f, name_e, name_n) = match g {
                        Geometry::Spherical => (
                            "gamma_fisher_sphere",
                            "gamma_euclid_sphere",
                            "n_averaged_sphere",
                        ),
                        Geometry::Cylindrical => (
                            "gamma_fisher_cylinder",
                            "gamma_euclid_cylinder",
                            "n_averaged_cylinder",
                        ),
                    };
                    m.set(name_f, gf[i]);
                    m.set(name_e, fm.get("gamma_euclid").unwrap_or(f64::NAN));
                    m.set(name_n, fm.get("n_averaged").unwrap_or(f64::NAN));
                }
                m.set("delta_gamma_fisher", gf[0] - gf[1]);
                Ok(m)
            });
            rec.wall_secs += train_secs / windows.len() as f64;
            rec
        })
        .collect()
}

pub fn run_fisher_window(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let reps: Vec<usize> = (0..cfg.fisher_window.reps).collect();
    let per_rep = par_map(&reps, cfg.workers, |&rep| fisher_window_rep(cfg, rep));
    let n_windows = cfg.fisher_window.windows.len();
    let records: Vec<RunRecord> = (0..n_windows)
        .flat_map(|w| per_rep.iter().map(move |rows| rows[w].clone()))
        .collect();
    let mut tests = Vec::new();
    let mut extra = Vec::new();
    for &(lo, hi) in &cfg.fisher_window.windows {
        let in_window = |r: &RunRecord| {
            r.key("p_low") == Some(&format!("{lo}")) && r.key("p_high") == Some(&format!("{hi}"))
        };
        let rows: Vec<&RunRecord> = records.iter().filter(|r| in_window(r)).collect();
        let tag = format!("[{lo},{hi}]");
        for (metric, sa, sb) in [
            (
                "gamma_fisher",
                "gamma_fisher_sphere",
                "gamma_fisher_cylinder",
            ),
            (
                "gamma_euclid",
                "gamma_euclid_sphere",
                "gamma_euclid_cylinder",
            ),
        ] {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for r in &rows {
                if let (Some(x), Some(y)) = (r.metrics.get(sa), r.metrics.get(sb)) {
                    a.push(x);
                    b.push(y);
                }
            }
            tests.push(paired_test(
                metric,
                &format!("sphere{tag}"),
                &format!("cylinder{tag}"),
                &a,
                &b,
            ));
        }
        let deltas: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.metrics.get("delta_gamma_fisher"))
            .collect();
        let mean_delta = deltas.iter().sum::<f64>() / deltas.len().max(1) as f64;
        extra.push(format!("window {tag}: mean delta gamma_fisher (sphere - cylinder) = {mean_delta:+.4e} over {} reps", deltas.len()));
    }
    let text = summary(Suite::FisherWindow, cfg, &records, &tests, &extra);
    Ok(SuiteOutput {
        suite: Suite::FisherWindow,
        metric_columns: FISHER_WINDOW_COLUMNS.to_vec(),
        records,
        tests,
        summary: text,
    })
}

/// One synthetic cell. Every `(alpha, omega)` of a seed shares the concept
/// structure, sample draws, split and model initialisation.
pub fn synthetic_cell(
    cfg: &ExperimentConfig,
    k_known: usize,
    alpha: f64,
    omega: f64,
    seed_index: usize,
) -> RunRecord {
    let s = &cfg.synthetic;
    let seed = cfg.seed + seed_index as u64;
    let keys = vec![
        ("suite", Suite::Synthetic.as_str().to_string()),
        ("k_known", k_known.to_string()),
        ("alpha", format!("{alpha}")),
        ("omega", format!("{omega}")),
        ("seed", seed.to_string()),
    ];
    timed(keys, || {
        let data = generate_synthetic_dataset(&SyntheticConfig {
            n: s.n,
            k: s.k,
            k_known,
            r: s.r,
            sigma_a: s.sigma_a,
            sigma_y: s.sigma_y,
            alpha,
            omega,
            seed,
        })?;
        let (train, test) = split(&data.dataset, s.train_fraction, seed);
        let mut m = run_split(
            &train,
            &test,
            &cfg.models,
            cfg.window(),
            Some(&data.blocks.b_known),
            seed,
        )?;
        let dec = closed_form_accuracy(&data.blocks, &data.weights, s.sigma_y)?;
        let mc = monte_carlo_accuracy(
            &data.blocks,
            &data.weights,
            s.sigma_y,
            s.n_mc,
            mix_seed(seed, TAG_MC),
        )?;
        m.set("acc_closed", dec.acc_closed);
        m.set("acc_mc", mc);
        m.set("acc_mc_se", binomial_se(dec.acc_closed, s.n_mc));
        m.set("t1", dec.t1);
        m.set("t2", dec.t2);
        m.set("t3", dec.t3);
        m.set("t4", dec.t4);
        Ok(m)
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Median of `metric` over rows with the given `alpha`.
pub fn median_by_alpha(records: &[RunRecord], metric: &str, alpha: f64) -> f64 {
    let tag = format!("{alpha}");
    median(
        records
            .iter()
            .filter(|r| r.key("alpha") == Some(tag.as_str()))
            .filter_map(|r| r.metrics.get(metric))
            .collect(),
    )
}

pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let s = &cfg.synthetic;
    let mut cells = Vec::new();
    for &kk in &s.k_known {
        for &omega in &s.omega {
            for &alpha in &s.alpha {
                for seed in 0..s.seeds {
                    cells.push((kk, alpha, omega, seed));
                }
            }
        }
    }
    let records = par_map(&cells, cfg.workers, |&(kk, a, w, seed)| {
        synthetic_cell(cfg, kk, a, w, seed)
    });
    let pair_key = |r: &RunRecord| {
        format!(
            "{}|{}|{}",
            r.key("k_known").unwrap_or(""),
            r.key("omega").unwrap_or(""),
            r.key("seed").unwrap_or("")
        )
    };
    let metrics = [
        "cbm_acc",
        "bb_acc",
        "concept_mse",
        "beta",
        "gamma_fisher",
        "gamma_euclid",
        "acc_closed",
    ];
    let mut comparisons = Vec::new();
    for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (1.0, -1.0)] {
        if s.alpha.contains(&a) && s.alpha.contains(&b) {
            comparisons.push((a, b));
        }
    }
    let mut tests = Vec::new();
    for m in metrics {
        for &(a, b) in &comparisons {
            let (ta, tb) = (format!("{a}"), format!("{b}"));
            let (xa, xb) = collect_pairs(
                &records,
                m,
                |r| r.key("alpha") == Some(ta.as_str()),
                |r| r.key("alpha") == Some(tb.as_str()),
                pair_key,
            );
            tests.push(paired_test(
                m,
                &format!("alpha={a}"),
                &format!("alpha={b}"),
                &xa,
                &xb,
            ));
        }
    }
    let mut extra = Vec::new();
    for m in ["cbm_acc", "bb_acc", "gamma_fisher", "beta", "acc_closed"] {
        let cols: Vec<String> = s
            .alpha
            .iter()
            .map(|&a| format!("alpha={a}: {:.4}", median_by_alpha(&records, m, a)))
            .collect();
        extra.push(format!("median {m:<13} {}", cols.join(", ")));
    }
    let (mut agree, mut total) = (0, 0);
    for r in &records {
        if let (Some(c), Some(mc), Some(se)) = (
            r.metrics.get("acc_closed"),
            r.metrics.get("acc_mc"),
            r.metrics.get("acc_mc_se"),
        ) {
            total += 1;
            if (c - mc).abs() <= 4.0 * se.max(f64::MIN_POSITIVE) {
                agree += 1;
            }
        }
    }
    extra.push(format!(
        "closed-form vs Monte Carlo accuracy within 4 binomial SE: {agree}/{total} rows"
    ));
    let text = summary(Suite::Synthetic, cfg, &records, &tests, &extra);
    Ok(SuiteOutput {
        suite: Suite::Synthetic,
        metric_columns: SYNTHETIC_COLUMNS.to_vec(),
        records,
        tests,
        summary: text,
    })
}

/// A three-concept stand-in for a real embedding export: two supervised
/// concepts with positive correlation `coupling`, and a third that raises
/// one and lowers the other, so the triple is frustrated. The task depends on
/// all three concepts, with weight `omega` on the third.
pub fn planted_triple_dataset(
    n: usize,
    r: usize,
    coupling: f64,
    omega: f64,
    sigma_y: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(coupling > 0.0 && coupling < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "coupling must lie in (0, 1), got {coupling}"
        )));
    }
    let mut rng = RngStream::substream(seed, TAG_STANDIN);
    let structure = SyntheticStructure {
        b_known: Matrix::from_rows(&[[1.0, coupling], [coupling, 1.0]]),
        b_temp: Matrix::identity(1),
        assignment: vec![(0, 1)],
        psi_star: vec![1.0, 1.0, 1.0],
        phi: rng.normal_matrix(r, 3, 1.0),
    };
    let data = generate_from_structure(&structure, 1.0, omega, n, 0.3, sigma_y, rng.next_u64())?;
    data.dataset.with_known(vec![0, 1, 2])
}

/// Cross-validated CBM1 `(C1, C2)` versus CBM2 `(C1, C2, C3)` on one
/// embedding dataset. Concept columns are standardised with training-fold
/// statistics; the black box and SAE are shared by both CBMs of a fold.
pub fn run_realworld(cfg: &ExperimentConfig, data: &Dataset) -> Result<SuiteOutput> {
    if data.n_concepts() < 3 {
        return Err(Error::TooFewConceptColumns(data.n_concepts()));
    }
    let rw = &cfg.realworld;
    let plan = stratified_folds(&data.labels, rw.folds, cfg.seed)?;
    let hyper = ModelHyper {
        k_sae: rw.k_sae,
        bb_epochs: rw.bb_epochs,
        ..cfg.models.clone()
    };
    let folds: Vec<usize> = (0..rw.folds).collect();
    let per_fold = par_map(&folds, cfg.workers, |&fold| {
        realworld_fold(cfg, &hyper, data, &plan.split(fold), fold)
    });
    let records: Vec<RunRecord> = per_fold.into_iter().flatten().collect();
    let tests: Vec<TestRow> = [
        "frust12_fisher",
        "frust12_euclid",
        "cbm_acc",
        "concept_mse",
        "gamma_fisher",
        "gamma_euclid",
    ]
    .iter()
    .map(|m| {
        let (a, b) = collect_pairs(
            &records,
            m,
            |r| r.key("model") == Some("cbm1"),
            |r| r.key("model") == Some("cbm2"),
            by_key("fold"),
        );
        paired_test(m, "cbm1", "cbm2", &a, &b)
    })
    .collect();
    let extra = vec![format!(
        "{} examples, r = {}, {} concept columns, {} folds",
        data.len(),
        data.dim(),
        data.n_concepts(),
        rw.folds
    )];
    let text = summary(Suite::Realworld, cfg, &records, &tests, &extra);
    Ok(SuiteOutput {
        suite: Suite::Realworld,
        metric_columns: REALWORLD_COLUMNS.to_vec(),
        records,
        tests,
        summary: text,
    })
}

fn realworld_fold(
    cfg: &ExperimentConfig,
    hyper: &ModelHyper,
    data: &Dataset,
    (train_idx, test_idx): &(Vec<usize>, Vec<usize>),
    fold: usize,
) -> Vec<RunRecord> {
    let seed = cfg.seed + fold as u64;
    let keys = |model: &str| {
        vec![
            ("suite", Suite::Realworld.as_str().to_string()),
            ("model", model.to_string()),
            ("fold", fold.to_string()),
            ("seed", seed.to_string()),
        ]
    };
    let t = Instant::now();
    let prepared = (|| -> Result<_> {
        let (mut train, mut test) = (data.subset(train_idx), data.subset(test_idx));
        let scaler = Standardizer::fit(&train.concepts)?;
        train.concepts = scaler.apply(&train.concepts)?;
        test.concepts = scaler.apply(&test.concepts)?;
        let bg = train_background(&train, hyper, seed)?;
        let form = fisher_averaged(&bg.bb, &train.activations, cfg.p_low, cfg.p_high)?;
        Ok((train, test, bg, form))
    })();
    let shared_secs = t.elapsed().as_secs_f64();
    let models = [("cbm1", vec![0, 1]), ("cbm2", vec![0, 1, 2])];
    match prepared {
        Err(e) => models
            .iter()
            .map(|(name, _)| RunRecord {
                keys: keys(name),
                metrics: Metrics::default(),
                error: Some(e.to_string()),
                wall_secs: shared_secs,
            })
            .collect(),
        Ok((train, test, bg, form)) => models
            .iter()
            .map(|(name, known)| {
                let mut rec = timed(keys(name), || {
                    let (tr, te) = (
                        train.with_known(known.clone())?,
                        test.with_known(known.clone())?,
                    );
                    let cbm = train_cbm(&tr, hyper, seed)?;
                    let mut m = prediction_metrics(&bg, &cbm, &te, None)?;
                    m.extend(&frustration_metrics(&cbm, &bg.sae, &form)?);
                    Ok(m)
                });
                rec.wall_secs += shared_secs / 2.0;
                rec
            })
            .collect(),
    }
}

/// Closed-form Bayes accuracy against Monte Carlo on random instances of the
/// linear-Gaussian model.
pub fn run_theory_check(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let th = &cfg.theory;
    const ALPHAS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
    const OMEGAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    let ids: Vec<usize> = (0..th.instances).collect();
    let records = par_map(&ids, cfg.workers, |&i| {
        let seed = cfg.seed + i as u64;
        let k_known = 2 + i % (th.k - 2);
        let (alpha, omega) = (ALPHAS[i % 5], OMEGAS[(i / 5) % 5]);
        let keys = vec![
            ("suite", Suite::TheoryCheck.as_str().to_string()),
            ("instance", i.to_string()),
            ("seed", seed.to_string()),
            ("k_known", k_known.to_string()),
            ("alpha", format!("{alpha}")),
            ("omega", format!("{omega}")),
        ];
        timed(keys, || {
            let structure = SyntheticStructure::sample(th.k, k_known, 1, seed)?;
            let (blocks, weights) = (structure.blocks(alpha)?, structure.weights(omega));
            let dec = closed_form_accuracy(&blocks, &weights, th.sigma_y)?;
            let mc = monte_carlo_accuracy(
                &blocks,
                &weights,
                th.sigma_y,
                th.n_mc,
                mix_seed(seed, TAG_MC),
            )?;
            let se = binomial_se(dec.acc_closed, th.n_mc);
            let mut m = Metrics::default();
            m.set("acc_closed", dec.acc_closed);
            m.set("acc_arcsin", accuracy_arcsin(dec.sigma_s2, dec.sigma_r2)?);
            m.set("acc_mc", mc);
            m.set("acc_mc_se", se);
            m.set("z_score", (mc - dec.acc_closed) / se);
            m.set("t1", dec.t1);
            m.set("t2", dec.t2);
            m.set("t3", dec.t3);
            m.set("t4", dec.t4);
            m.set("sigma_s2", dec.sigma_s2);
            m.set("sigma_r2", dec.sigma_r2);
            Ok(m)
        })
    });
    let within = records
        .iter()
        .filter(|r| r.metrics.get("z_score").is_some_and(|z| z.abs() <= 4.0))
        .count();
    let max_form_gap = records
        .iter()
        .filter_map(|r| Some((r.metrics.get("acc_closed")? - r.metrics.get("acc_arcsin")?).abs()))
        .fold(0.0, f64::max);
    let extra = vec![
        format!("Monte Carlo within 4 binomial SE of the closed form: {within}/{} instances (n_mc = {})", records.len(), th.n_mc),
        format!("largest |arctan form - arcsin form|: {max_form_gap:.3e}"),
    ];
    let text = summary(Suite::TheoryCheck, cfg, &records, &[], &extra);
    Ok(SuiteOutput {
        suite: Suite::TheoryCheck,
        metric_columns: THEORY_COLUMNS.to_vec(),
        records,
        tests: Vec::new(),
        summary: text,
    })
}
