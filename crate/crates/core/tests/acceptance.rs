//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Tests take a shared lock so that wall-clock runtime bounds are measured
//! without other criteria competing for the CPU.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use newsrank_core::eval::{balance_training_set, mape, model_name, ndcg_at_k, EvalConfig, EvalReport};
use newsrank_core::features::{FeatureExtractor, KeywordMap, PublisherList};
use newsrank_core::ingest::{merge_matchings, Article, ArticleRecord, Matching, Mention, MergeKey};
use newsrank_core::models::{
    baseline_predict, rf_fit, s2s_loss, ArSample, BaselineModel, ForecastModel, ForestOptions, LinearArModel,
    MaxFeatures, ModelFile, Seq2SeqConfig, Seq2SeqModel, TrainSchedule,
};
use newsrank_core::pipeline::{
    evaluate_store, ingest_dir, ingest_records, train_model, IngestOptions, ModelSpec, TrainOptions,
};
use newsrank_core::serve::scoring_pass;
use newsrank_core::synth::{generate_corpus, inject_anomalies, AnomalySpec, CascadeParams};
use newsrank_core::{Forecaster, Horizon, Store};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id} ({name}): {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- metrics

fn oracle_mape(pairs: &[(f64, f64)]) -> f64 {
    let mut terms: Vec<f64> = pairs.iter().map(|&(a, p)| ((p - a) / a).abs()).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>() / pairs.len() as f64
}

/// Position of every item counted directly: the number of items placed
/// ahead of it under (predicted desc, actual asc, index asc).
fn oracle_ndcg(items: &[(f64, f64)], k: usize) -> f64 {
    let n = items.len();
    let ahead = |i: usize| {
        (0..n)
            .filter(|&j| {
                let (ai, pi) = items[i];
                let (aj, pj) = items[j];
                pj > pi || (pj == pi && (aj < ai || (aj == ai && j < i)))
            })
            .count()
    };
    let ideal_ahead = |i: usize| {
        (0..n)
            .filter(|&j| items[j].0 > items[i].0 || (items[j].0 == items[i].0 && j < i))
            .count()
    };
    let discount = |pos: usize| 1.0 / (pos as f64 + 2.0).log2();
    let dcg: f64 = (0..n)
        .map(|i| (ahead(i), items[i].0))
        .filter(|&(p, _)| p < k)
        .map(|(p, a)| a * discount(p))
        .sum();
    let idcg: f64 = (0..n)
        .map(|i| (ideal_ahead(i), items[i].0))
        .filter(|&(p, _)| p < k)
        .map(|(p, a)| a * discount(p))
        .sum();
    if idcg == 0.0 {
        1.0
    } else {
        dcg / idcg
    }
}

#[test]
fn c1_metric_oracles() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let items: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let actual = rng.random_range(1..400) as f64;
                // Coarse predictions so that ties occur.
                let predicted = if rng.random_bool(0.3) {
                    rng.random_range(0..10) as f64
                } else {
                    rng.random_range(0.0..500.0)
                };
                (actual, predicted)
            })
            .collect();
        let k = rng.random_range(1..=n);
        worst = worst.max(relative_error(mape(&items).unwrap(), oracle_mape(&items)));
        worst = worst.max(relative_error(ndcg_at_k(&items, k).unwrap(), oracle_ndcg(&items, k)));
    }
    let example = ndcg_at_k(&[(1.0, 3.0), (10.0, 2.0), (5.0, 1.0)], 3).unwrap();
    let four = (example * 1e4).floor() / 1e4;
    let elapsed = start.elapsed();
    verdict(
        1,
        "metric oracles",
        worst < 1e-12 && four == 0.7183 && elapsed < Duration::from_secs(5),
        &format!("max relative error {worst:.2e}, worked NDCG {example:.6} -> {four}, {elapsed:.2?}"),
    );
}

// ------------------------------------------------------------ gradients

#[test]
fn c2_gradient_check() {
    let _guard = serial();
    let start = Instant::now();
    let config = Seq2SeqConfig {
        hidden: 3,
        dense_hidden: 3,
        input_dropout: 0.3,
        recurrent_dropout: 0.1,
        init_scale: 0.5,
    };
    let model = Seq2SeqModel::new(config, 2, 6, 23);
    // Three encoder steps then three decoder steps: sequence length 6.
    let xs = [0.4, 1.1, 1.7];
    let targets = [2.0, 2.4, 2.5];
    let statics = [1.0, 0.0];
    let (_, analytic) = model.loss_and_gradient(&xs, &statics, &targets);
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for t in 0..model.tensors().len() {
        for i in 0..model.tensors()[t].len() {
            let orig = model.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + h;
            let plus = s2s_loss(&probe.predict_transformed(&xs, &statics, 3), &targets).unwrap();
            probe.tensors_mut()[t][i] = orig - h;
            let minus = s2s_loss(&probe.predict_transformed(&xs, &statics, 3), &targets).unwrap();
            probe.tensors_mut()[t][i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.tensors()[t][i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "GRU gradient check",
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        &format!("{count} parameters, max relative error {worst:.2e}, {elapsed:.2?}"),
    );
}

// ----------------------------------------------------------------- forest

enum Cart {
    Leaf(f64),
    Split(usize, f64, Box<Cart>, Box<Cart>),
}

fn sum_sq_dev(rows: &[&ArSample]) -> f64 {
    let mean = rows.iter().map(|r| r.target).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|r| (r.target - mean).powi(2)).sum()
}

fn cart_fit(rows: &[&ArSample]) -> Cart {
    if rows.iter().all(|r| r.target == rows[0].target) {
        return Cart::Leaf(rows[0].target);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].input.len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r.input[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let cut = (pair[0] + pair[1]) / 2.0;
            let (l, r): (Vec<&ArSample>, Vec<&ArSample>) = rows.iter().partition(|s| s.input[f] <= cut);
            let cost = sum_sq_dev(&l) + sum_sq_dev(&r);
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, f, cut));
            }
        }
    }
    match best {
        None => Cart::Leaf(rows.iter().map(|r| r.target).sum::<f64>() / rows.len() as f64),
        Some((_, f, cut)) => {
            let (l, r): (Vec<&ArSample>, Vec<&ArSample>) = rows.iter().partition(|s| s.input[f] <= cut);
            Cart::Split(f, cut, Box::new(cart_fit(&l)), Box::new(cart_fit(&r)))
        }
    }
}

fn cart_predict(tree: &Cart, x: &[f64]) -> f64 {
    match tree {
        Cart::Leaf(v) => *v,
        Cart::Split(f, cut, l, r) => cart_predict(if x[*f] <= *cut { l } else { r }, x),
    }
}

fn random_samples(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<ArSample> {
    (0..n)
        .map(|_| {
            let input: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
            let target = 3.0 * input[0] - input[1] * input[2] + rng.random_range(-2.0..2.0);
            ArSample { input, target }
        })
        .collect()
}

#[test]
fn c3_forest_matches_cart() {
    let _guard = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let samples = random_samples(200, 5, &mut rng);
    let exact = ForestOptions {
        n_estimators: 1,
        max_features: MaxFeatures::All,
        bootstrap: false,
        seed: 0,
    };
    let forest = rf_fit(&samples, 3, exact).unwrap();
    let oracle = cart_fit(&samples.iter().collect::<Vec<_>>());
    let probes: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.input.clone())
        .chain(random_samples(200, 5, &mut rng).into_iter().map(|s| s.input))
        .collect();
    let mismatches = probes
        .iter()
        .filter(|x| forest.predict(x).unwrap() != cart_predict(&oracle, x))
        .count();

    let grown = rf_fit(
        &samples,
        3,
        ForestOptions {
            bootstrap: false,
            ..ForestOptions::new(1, 9)
        },
    )
    .unwrap();
    let train_mse = samples
        .iter()
        .map(|s| (grown.predict(&s.input).unwrap() - s.target).powi(2))
        .sum::<f64>()
        / samples.len() as f64;
    let elapsed = start.elapsed();
    verdict(
        3,
        "random forest vs CART oracle",
        mismatches == 0 && train_mse == 0.0 && elapsed < Duration::from_secs(10),
        &format!("{mismatches} of {} predictions differ, memorisation MSE {train_mse:e}, {elapsed:.2?}", probes.len()),
    );
}

// --------------------------------------------------------------- baseline

#[test]
fn c4_baseline_exactness() {
    let _guard = serial();
    let worked = baseline_predict(&[0.0, 1.0, 2.0, 4.0, 6.0], 3, 24).unwrap();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        ..Config::default()
    });
    let strategy = (-100i32..100, 0i32..60, 3usize..=23, 2usize..=5);
    let outcome = runner.run(&strategy, |(a, b, k, w)| {
        prop_assume!(w <= k);
        let (a, b) = (a as f64, b as f64);
        let ts: Vec<f64> = (1..=k).map(|j| a + b * j as f64).collect();
        let got = baseline_predict(&ts, w, 24).unwrap();
        prop_assert!((got - (a + 24.0 * b)).abs() <= 1e-9, "{got} vs {}", a + 24.0 * b);
        Ok(())
    });
    verdict(
        4,
        "baseline exactness",
        worked == 44.0 && outcome.is_ok(),
        &format!("[2,4,6] at K = 5 -> {worked}; affine series: {outcome:?}"),
    );
}

// ------------------------------------------------------ model comparison

struct Comparison {
    report: EvalReport,
    n_train: usize,
    elapsed: Duration,
}

fn comparison() -> &'static Comparison {
    static CELL: OnceLock<Comparison> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let params = CascadeParams {
            tau_hours: 4.0,
            seed: 2018,
            ..CascadeParams::default()
        };
        let corpus = generate_corpus(30_000, &params).unwrap();
        let store = ingest_records(corpus.articles, corpus.tweets, corpus.matchings, &IngestOptions::default()).unwrap();
        let (train, _) = store.split(1.0 / 6.0).unwrap();
        let specs = [
            ModelSpec::Baseline { window: 3 },
            ModelSpec::LinearAr { order: 1 },
            ModelSpec::LinearAr { order: 3 },
            ModelSpec::LinearAr { order: 5 },
            ModelSpec::Rf {
                order: 3,
                options: ForestOptions::new(50, 7),
            },
            ModelSpec::Rf {
                order: 3,
                options: ForestOptions::new(500, 7),
            },
            ModelSpec::S2s {
                config: Seq2SeqConfig::with_hidden(32),
                schedule: TrainSchedule::scaled(10),
                seed: 7,
            },
        ];
        let files: Vec<ModelFile> = specs
            .into_iter()
            .map(|spec| train_model(train, store.meta.observed_until, &TrainOptions::new(spec, 11)).unwrap())
            .collect();
        let named: Vec<(String, &ModelFile)> = files.iter().map(|f| (model_name(&f.model), f)).collect();
        let config = EvalConfig {
            seed: 3,
            ..EvalConfig::default()
        };
        let report = evaluate_store(&store, 1.0 / 6.0, &named, &config).unwrap();
        Comparison {
            report,
            n_train: train.len(),
            elapsed: start.elapsed(),
        }
    })
}

fn print_table(report: &EvalReport, models: &[&str]) {
    for name in models {
        let m = report.model(name).unwrap();
        for r in &m.results {
            println!(
                "    {:>12} {:>2} h  MAPE {:.4} [{:.4}, {:.4}]  NDCG {:.4} [{:.4}, {:.4}]",
                name, r.start_hours, r.mape.point, r.mape.q025, r.mape.q975, r.ndcg.point, r.ndcg.q025, r.ndcg.q975
            );
        }
    }
}

#[test]
fn c5_model_comparison() {
    let _guard = serial();
    let c = comparison();
    let r = &c.report;
    let models = ["baseline(3)", "linear_ar(3)", "rf(3, 500)", "s2s(32)"];
    print_table(r, &models);
    let mut problems = Vec::new();
    for name in models {
        let m = r.model(name).unwrap();
        for pair in m.results.windows(2) {
            if pair[1].mape.point > pair[0].mape.point {
                problems.push(format!("{name} MAPE rises from {} h to {} h", pair[0].start_hours, pair[1].start_hours));
            }
        }
    }
    let rf5 = r.model("rf(3, 500)").unwrap().at(5).unwrap().mape.point;
    let base5 = r.model("baseline(3)").unwrap().at(5).unwrap().mape.point;
    if rf5 > base5 {
        problems.push(format!("RF MAPE {rf5:.4} above baseline {base5:.4} at 5 h"));
    }
    let detail = format!(
        "{} training / {} validation articles, RF {rf5:.4} vs baseline {base5:.4} at 5 h, {:.1?} {}",
        c.n_train,
        r.n_validation,
        c.elapsed,
        problems.join("; ")
    );
    verdict(5, "model comparison", problems.is_empty() && c.elapsed < Duration::from_secs(1800), &detail);
}

#[test]
fn c6_order_effect() {
    let _guard = serial();
    let r = &comparison().report;
    print_table(r, &["linear_ar(1)", "linear_ar(3)", "linear_ar(5)"]);
    let ar1 = r.model("linear_ar(1)").unwrap().at(5).unwrap();
    let ar3 = r.model("linear_ar(3)").unwrap().at(5).unwrap();
    let ar5 = r.model("linear_ar(5)").unwrap().at(5).unwrap();
    let lower = ar3.mape.point <= ar1.mape.point;
    let within = ar3.mape.q025 <= ar5.mape.point && ar5.mape.point <= ar3.mape.q975;
    verdict(
        6,
        "order effect",
        lower && within,
        &format!(
            "5 h MAPE AR(1) {:.4}, AR(3) {:.4} [{:.4}, {:.4}], AR(5) {:.4}",
            ar1.mape.point, ar3.mape.point, ar3.mape.q025, ar3.mape.q975, ar5.mape.point
        ),
    );
}

#[test]
fn c7_estimator_count() {
    let _guard = serial();
    let r = &comparison().report;
    print_table(r, &["rf(3, 50)", "rf(3, 500)"]);
    let small = r.model("rf(3, 50)").unwrap();
    let large = r.model("rf(3, 500)").unwrap();
    let disjoint: Vec<u32> = small
        .results
        .iter()
        .zip(&large.results)
        .filter(|(a, b)| a.mape.q975 < b.mape.q025 || b.mape.q975 < a.mape.q025)
        .map(|(a, _)| a.start_hours)
        .collect();
    verdict(
        7,
        "estimator count",
        disjoint.is_empty(),
        &format!("start times with disjoint MAPE intervals: {disjoint:?}"),
    );
}

// ------------------------------------------------------------- invariants

fn article(url: &str, title: &str, hour: u32) -> Article {
    Article::from_record(ArticleRecord {
        url: url.into(),
        title: title.into(),
        published_at: Utc.with_ymd_and_hms(2018, 12, 3, hour, 0, 0).unwrap(),
        text: String::new(),
    })
    .unwrap()
}

fn matching_strategy() -> impl Strategy<Value = Matching> {
    let urls = [
        "https://a.example.com/x",
        "https://a.example.com/x?utm_source=feed",
        "https://a.example.com/x#top",
        "https://b.example.com/y",
    ];
    let titles = ["Rates rise", " Rates rise ", "Rates fall"];
    (
        0..urls.len(),
        0..titles.len(),
        0u32..2,
        prop::collection::vec((0u32..12, 0i64..600), 0..6),
    )
        .prop_map(move |(u, t, h, mentions)| {
            let a = article(urls[u], titles[t], h);
            let t0 = a.published_at;
            Matching {
                article: a,
                mentions: mentions
                    .into_iter()
                    .map(|(id, mins)| Mention {
                        tweet_id: id.to_string(),
                        published_at: t0 + chrono::Duration::minutes(mins),
                    })
                    .collect(),
            }
        })
}

fn merge_properties(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = prop::collection::vec(matching_strategy(), 0..12).prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
    runner
        .run(&strategy, |(batch, shuffled)| {
            let expected_mentions: BTreeSet<(MergeKey, String)> = batch
                .iter()
                .flat_map(|m| m.mentions.iter().map(|x| (MergeKey::of(&m.article), x.tweet_id.clone())))
                .collect();
            let once = merge_matchings(batch);
            prop_assert_eq!(&merge_matchings(once.clone()), &once);
            prop_assert_eq!(&merge_matchings(shuffled), &once);
            let keys: BTreeSet<MergeKey> = once.iter().map(|m| MergeKey::of(&m.article)).collect();
            prop_assert_eq!(keys.len(), once.len());
            let total: usize = once.iter().map(|m| m.mentions.len()).sum();
            prop_assert_eq!(total, expected_mentions.len());
            Ok(())
        })
        .map_err(|e| format!("merge: {e}"))
}

fn ledger_properties(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (30usize..70, 0usize..5, 0usize..5, 0usize..4, 0usize..4, any::<u64>());
    runner
        .run(&strategy, |(n, dup, tweets, future, ancient, seed)| {
            let params = CascadeParams {
                amplitude: 10.0,
                span_hours: 72.0,
                seed,
                ..CascadeParams::default()
            };
            let mut corpus = generate_corpus(n, &params).unwrap();
            let clean = ingest_records(
                corpus.articles.clone(),
                corpus.tweets.clone(),
                corpus.matchings.clone(),
                &IngestOptions::default(),
            )
            .unwrap();
            let spec = AnomalySpec {
                query_duplicates: dup,
                duplicate_tweets: tweets,
                far_future: future,
                ancient,
                seed,
            };
            let ledger = inject_anomalies(&mut corpus, &spec).unwrap();
            prop_assert_eq!(ledger.query_duplicate_urls.len(), dup);
            prop_assert_eq!(ledger.out_of_window(), future + ancient);
            let dirty = ingest_records(corpus.articles, corpus.tweets, corpus.matchings, &IngestOptions::default()).unwrap();
            let s = &dirty.meta.stats;
            prop_assert_eq!(s.merged_away, ledger.query_duplicate_urls.len());
            prop_assert_eq!(s.out_of_window, ledger.out_of_window());
            prop_assert_eq!(s.duplicate_tweet_records, ledger.duplicated_tweet_ids.len());
            prop_assert_eq!(&dirty.matchings, &clean.matchings);
            Ok(())
        })
        .map_err(|e| format!("anomaly ledger: {e}"))
}

fn forecast_properties(runner: &mut TestRunner) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let forest_samples: Vec<ArSample> = (0..300)
        .map(|_| {
            let base = rng.random_range(0.0..100.0);
            let input = vec![base, base + rng.random_range(0.0..10.0), base + rng.random_range(0.0..20.0), rng.random_range(1.0..24.0)];
            ArSample {
                target: input[2] + rng.random_range(-15.0..15.0),
                input,
            }
        })
        .collect();
    let forest = rf_fit(&forest_samples, 3, ForestOptions::new(5, 1)).unwrap();
    let strategy = (
        prop::collection::vec(0u32..30, 3..=23),
        0usize..4,
        prop::collection::vec(-2.0f64..2.0, 5),
        any::<u64>(),
    );
    runner
        .run(&strategy, |(increments, which, coefs, seed)| {
            let ts: Vec<f64> = increments
                .iter()
                .scan(0.0, |acc, &d| {
                    *acc += d as f64;
                    Some(*acc)
                })
                .collect();
            let model = match which {
                0 => ForecastModel::Baseline(BaselineModel::new(2 + (seed % 2) as usize).unwrap()),
                1 => ForecastModel::LinearAr(LinearArModel {
                    order: 3,
                    n_static: 0,
                    coefficients: coefs,
                }),
                2 => ForecastModel::Rf(forest.clone()),
                _ => ForecastModel::S2s(Seq2SeqModel::new(Seq2SeqConfig::with_hidden(4), 0, 24, seed)),
            };
            let f = model.forecast(&ts, &[], 24).unwrap();
            prop_assert_eq!(f.values.len(), 24 - ts.len());
            let last = *ts.last().unwrap();
            let mut prev = last;
            for &v in &f.values {
                prop_assert!(v.is_finite() && v >= prev, "{v} after {prev}");
                prev = v;
            }
            Ok(())
        })
        .map_err(|e| format!("monotone forecasts: {e}"))
}

fn balance_properties(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (prop::collection::vec(0u64..2000, 20..400), any::<u64>());
    runner
        .run(&strategy, |(targets, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picked = balance_training_set(&targets, &mut rng).unwrap();
            prop_assert_eq!(picked.len(), 3 * (targets.len() / 20));
            prop_assert!(picked.iter().all(|&i| i < targets.len()));
            Ok(())
        })
        .map_err(|e| format!("balancing: {e}"))
}

fn baseline_file() -> ModelFile {
    let features = FeatureExtractor {
        keywords: KeywordMap::new(BTreeMap::new()).unwrap(),
        publishers: PublisherList::new(Vec::new()).unwrap(),
    };
    ModelFile::new(ForecastModel::Baseline(BaselineModel::default()), features, Horizon::default()).unwrap()
}

fn ranking_properties(runner: &mut TestRunner) -> Result<(), String> {
    let now = Utc.with_ymd_and_hms(2018, 12, 10, 12, 0, 0).unwrap();
    let file = baseline_file();
    let strategy = (1usize..40, any::<u64>());
    runner
        .run(&strategy, |(n, seed)| {
            let params = CascadeParams {
                amplitude: 15.0,
                start: now - chrono::Duration::hours(40),
                span_hours: 40.0,
                seed,
                ..CascadeParams::default()
            };
            let c = generate_corpus(n, &params).unwrap();
            let options = IngestOptions {
                window: None,
                observed_until: Some(now),
            };
            let store = ingest_records(c.articles, c.tweets, c.matchings, &options).unwrap();
            let before = store.clone();
            let snap = scoring_pass(&store, &file, now).unwrap();
            prop_assert_eq!(&store, &before);
            let expected: BTreeSet<&str> = store
                .matchings
                .iter()
                .filter(|m| m.t0() <= now && m.t0() >= now - chrono::Duration::hours(24))
                .map(|m| m.article.canonical_url.as_str())
                .collect();
            let served: Vec<&str> = snap.entries.iter().map(|e| e.article_url.as_str()).collect();
            prop_assert_eq!(served.len(), expected.len());
            prop_assert_eq!(served.iter().copied().collect::<BTreeSet<_>>(), expected);
            let ranks: Vec<usize> = snap.entries.iter().map(|e| e.rank).collect();
            prop_assert_eq!(ranks, (1..=snap.entries.len()).collect::<Vec<_>>());
            for pair in snap.entries.windows(2) {
                let ordered = match (pair[0].predicted_24h, pair[1].predicted_24h) {
                    (Some(a), Some(b)) => a >= b,
                    (Some(_), None) | (None, None) => true,
                    (None, Some(_)) => false,
                };
                prop_assert!(ordered);
            }
            Ok(())
        })
        .map_err(|e| format!("ranking: {e}"))
}

#[test]
fn c8_pipeline_invariants() {
    let _guard = serial();
    let start = Instant::now();
    let config = Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    };
    let suites: [(&str, fn(&mut TestRunner) -> Result<(), String>); 5] = [
        ("merge", merge_properties),
        ("ledger", ledger_properties),
        ("forecasts", forecast_properties),
        ("balance", balance_properties),
        ("ranking", ranking_properties),
    ];
    let mut failures = Vec::new();
    for (name, suite) in suites {
        let mut runner = TestRunner::new_with_rng(config.clone(), proptest::test_runner::TestRng::deterministic_rng(config.rng_algorithm));
        let t = Instant::now();
        match suite(&mut runner) {
            Ok(()) => println!("    {name}: 500 cases in {:.2?}", t.elapsed()),
            Err(e) => failures.push(e),
        }
    }
    let elapsed = start.elapsed();
    verdict(
        8,
        "pipeline invariants",
        failures.is_empty() && elapsed < Duration::from_secs(120),
        &format!("{} suites x 500 cases, {elapsed:.2?} {}", suites.len(), failures.join("; ")),
    );
}

// ------------------------------------------------------------ determinism

fn end_to_end(dir: &std::path::Path) -> Vec<u8> {
    let raw = dir.join("raw");
    let params = CascadeParams {
        seed: 77,
        span_hours: 10.0 * 24.0,
        ..CascadeParams::default()
    };
    generate_corpus(3000, &params).unwrap().write_to_dir(&raw).unwrap();
    ingest_dir(&raw, &IngestOptions::default()).unwrap().save(dir.join("store")).unwrap();
    let store = Store::load(dir.join("store")).unwrap();
    let (train, _) = store.split(1.0 / 6.0).unwrap();
    let spec = ModelSpec::Rf {
        order: 3,
        options: ForestOptions::new(20, 5),
    };
    let model_path = dir.join("rf.json");
    train_model(train, store.meta.observed_until, &TrainOptions::new(spec, 5))
        .unwrap()
        .save(&model_path)
        .unwrap();
    let file = ModelFile::load(&model_path).unwrap();
    let config = EvalConfig {
        k_top: 50,
        bootstrap_size: 300,
        seed: 5,
        ..EvalConfig::default()
    };
    let report = evaluate_store(&store, 1.0 / 6.0, &[(model_name(&file.model), &file)], &config).unwrap();
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json().unwrap()).unwrap();
    std::fs::read(path).unwrap()
}

#[test]
fn c9_determinism() {
    let _guard = serial();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = end_to_end(a.path());
    let second = end_to_end(b.path());
    verdict(
        9,
        "determinism",
        first == second && !first.is_empty(),
        &format!("report.json {} bytes, identical: {}", first.len(), first == second),
    );
}
