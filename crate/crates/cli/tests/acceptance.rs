//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails or overruns its budget.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use chrono::{DateTime, NaiveDate, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use uuid::Uuid;
use venuetrace_core::ml::logreg::{gradient, objective};
use venuetrace_core::ml::{
    auc, evaluate, kfold, split, tune, ClassifierModel, Confusion, GridSpec, HyperParams, LabeledDataset,
    LogisticModel, MetricsReport, ModelKind, SparseDesign, DEFAULT_THRESHOLD, FOLDS, TRAIN_FRACTION,
};
use venuetrace_core::model::{
    coarsen_timestamp, DayWindow, ExposureRecord, FeatureLayout, Field, Timestamp, MINUTES_PER_DAY,
};
use venuetrace_core::qr::{map_venue_type, parse_qr, QrPayload};
use venuetrace_core::risk::{combined_risk, decay_weight, delta, DecayParams, ExposureEvent};
use venuetrace_core::synth::{
    bayes_oracle_accuracy, calibrate_alpha, generate_dataset, shipped_archetypes, CalibrationTarget, GeneratorConfig,
    ModulationTable, NoiseMode,
};
use venuetrace_core::{FeatureVector, VenueType};
use venuetrace_ledger::federated::{
    aggregate_records, research_aggregate, search_contacts, AggregateQuery, AggregateTable, ContactQuery,
    FederatedConfig, Filter, QueryWindow, SearchOutcome,
};
use venuetrace_ledger::silo::{assign_silo, AnswerSubmission, ClusterConfig, ScanEvent, SiloCluster, SiloPayload};
use venuetrace_ledger::sim::{run_scenario, Fault, Scenario, SimNetConfig};
use venuetrace_service::pow::{solve, Challenge, ChallengeStore, PowError, PowParams, NONCE_BYTES};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if let false = $cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "grace window and decay", budget: Duration::from_secs(1), run: decay },
    Criterion { id: 2, name: "combined risk oracle", budget: Duration::from_secs(1), run: combined },
    Criterion { id: 3, name: "generator baseline", budget: Duration::from_secs(30), run: baseline },
    Criterion { id: 4, name: "classifier band", budget: Duration::from_secs(300), run: classifier_band },
    Criterion { id: 5, name: "metrics oracle", budget: Duration::from_secs(10), run: metrics_oracle },
    Criterion { id: 6, name: "logistic gradient check", budget: Duration::from_secs(10), run: gradient_check },
    Criterion { id: 7, name: "split discipline", budget: Duration::from_secs(60), run: split_discipline },
    Criterion { id: 8, name: "consensus safety", budget: Duration::from_secs(120), run: consensus_safety },
    Criterion {
        id: 9,
        name: "federated partition invariance",
        budget: Duration::from_secs(30),
        run: partition_invariance,
    },
    Criterion { id: 10, name: "research coarsening", budget: Duration::from_secs(30), run: coarsening },
    Criterion { id: 11, name: "proof of work", budget: Duration::from_secs(60), run: proof_of_work },
    Criterion { id: 12, name: "QR ingestion", budget: Duration::from_secs(10), run: qr_ingestion },
];

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.budget => Err(format!("over budget; {detail}")),
            other => other,
        };
        let (verdict, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2}: {verdict} {} ({:.2} s of {} s) {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn decay() -> Outcome {
    for gap in 0..=2880 {
        ensure!(delta(gap, 0) == Ok(0), "delta({gap}) is not zero");
    }
    ensure!(delta(2881, 0) == Ok(1), "delta(2881) = {:?}", delta(2881, 0));
    let params = DecayParams::with_lambda(0.0001);
    let half = decay_weight(2880 + 6931, &params);
    ensure!((half - 0.500).abs() <= 1e-3, "half-life weight {half}");
    let week = decay_weight(12960, &params);
    ensure!((week - 0.3650).abs() <= 1e-4, "weight at 12960 is {week}");
    ensure!(decay_weight(2880, &params) == 1.0, "weight inside grace window is not 1");
    Ok(format!("w(9811) = {half:.6}, w(12960) = {week:.6}"))
}

/// Direct product over events, written independently of the library.
fn brute_force_risk(events: &[(i64, f64)], now: i64, lambda: f64) -> f64 {
    let mut product = 1.0;
    for &(at, p) in events {
        let gap = now - at;
        let weight = if gap <= 2880 { 1.0 } else { (-lambda * (gap - 2880) as f64).exp() };
        product *= 1.0 - p * weight;
    }
    1.0 - product
}

fn combined() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = DecayParams::default();
    let now = 40 * MINUTES_PER_DAY;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(0..=10);
        let events: Vec<(i64, f64)> =
            (0..n).map(|_| (now - rng.random_range(0..=params.horizon), rng.random_range(0.0..=1.0))).collect();
        let library: Vec<ExposureEvent> = events.iter().map(|&(t, p)| ExposureEvent::new(Timestamp(t), p)).collect();
        let got = combined_risk(&library, Timestamp(now), &params).map_err(|e| e.to_string())?;
        worst = worst.max((got - brute_force_risk(&events, now, params.lambda)).abs());
    }
    ensure!(worst <= 1e-12, "max deviation {worst:e}");
    let at = Timestamp(now);
    let fixed = combined_risk(&[ExposureEvent::new(at, 0.3), ExposureEvent::new(at, 0.5)], at, &params).unwrap();
    ensure!(fixed == 0.65, "{{0.3, 0.5}} gives {fixed}");
    let empty = combined_risk(&[], at, &params).unwrap();
    ensure!(empty == 0.0, "empty set gives {empty}");
    Ok(format!("max deviation {worst:.1e} over 10000 sets"))
}

/// Composite Simpson for `E[clamp(m + w·X, 0, 1)]`, `X ~ Laplace(mu, b)`.
fn laplace_clamp_quadrature(m: f64, w: f64, mu: f64, b: f64) -> f64 {
    let (lo, hi, n) = (mu - 60.0 * b, mu + 60.0 * b, 200_000);
    let h = (hi - lo) / n as f64;
    let f = |x: f64| (m + w * x).clamp(0.0, 1.0) * (-(x - mu).abs() / b).exp() / (2.0 * b);
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        sum += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn positive_share(config: &GeneratorConfig) -> Result<f64, String> {
    let d = generate_dataset(config, &shipped_archetypes(), &ModulationTable::zero()).map_err(|e| e.to_string())?;
    Ok(d.positives as f64 / d.records.len() as f64)
}

fn baseline() -> Outcome {
    let base = GeneratorConfig { n_records: 100_000, balanced: false, ..GeneratorConfig::default() };
    let silent = positive_share(&GeneratorConfig { seed: 31, noise_mode: NoiseMode::Off, ..base.clone() })?;
    ensure!((silent - 0.100).abs() <= 0.005, "noise-free rate {silent}");
    let noisy = GeneratorConfig { seed: 32, ..base };
    let expected =
        laplace_clamp_quadrature(noisy.baseline, noisy.noise_weight, noisy.noise_location, noisy.noise_scale);
    let rate = positive_share(&noisy)?;
    ensure!((rate - expected).abs() <= 0.01, "noisy rate {rate} vs quadrature {expected}");
    Ok(format!("noise off {silent:.4}; noise on {rate:.4} vs {expected:.4}"))
}

fn classifier_band() -> Outcome {
    let config = GeneratorConfig { seed: 2021, ..GeneratorConfig::default() };
    let archetypes = shipped_archetypes();
    let calibration = calibrate_alpha(&archetypes, &config, &CalibrationTarget::default());
    let oracle = bayes_oracle_accuracy(&calibration.table, &archetypes, &config);
    ensure!((oracle - 0.72).abs() <= 0.02, "calibrated oracle accuracy {oracle}");
    let data = generate_dataset(&config, &archetypes, &calibration.table).map_err(|e| e.to_string())?;
    ensure!(data.records.len() == 150_000 && data.positives == 75_000, "dataset is not a balanced 150k");
    let labeled = LabeledDataset::from_records(&data.records).map_err(|e| e.to_string())?;
    let (train, test) = split(&labeled, TRAIN_FRACTION, config.seed).map_err(|e| e.to_string())?;
    let hp = HyperParams::default();
    let lr = ClassifierModel::train(ModelKind::LogisticRegression, &train, &hp).map_err(|e| e.to_string())?;
    let nb = ClassifierModel::train(ModelKind::NaiveBayes, &train, &hp).map_err(|e| e.to_string())?;
    let lr_m = evaluate(&lr, &test, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
    let nb_m = evaluate(&nb, &test, DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
    ensure!((lr_m.accuracy - oracle).abs() <= 0.03, "LR accuracy {} vs oracle {oracle}", lr_m.accuracy);
    ensure!(lr_m.auc >= 0.70, "LR AUC {}", lr_m.auc);
    let warning = if nb_m.accuracy < lr_m.accuracy {
        String::new()
    } else {
        format!("; warning: NB accuracy {:.4} is not below LR", nb_m.accuracy)
    };
    Ok(format!(
        "alpha {}, oracle {oracle:.4}, LR accuracy {:.4}, AUC {:.4}{warning}",
        calibration.alpha, lr_m.accuracy, lr_m.auc
    ))
}

fn metrics_oracle() -> Outcome {
    let m = MetricsReport::from_confusion(Confusion { tp: 40, fp: 10, tn: 40, fn_: 10 }, None);
    let got = [m.accuracy, m.precision, m.recall, m.f1, m.kappa, m.mcc];
    ensure!(got == [0.8, 0.8, 0.8, 0.8, 0.6, 0.6], "metrics {got:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let labels: Vec<u8> = (0..10_000).map(|_| rng.random_range(0..2)).collect();
    let chance = auc(&scores, &labels).ok_or("AUC undefined")?;
    ensure!((chance - 0.5).abs() <= 0.02, "label-independent AUC {chance}");
    Ok(format!("chance AUC {chance:.4}"))
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> LabeledDataset {
    let layout = FeatureLayout::questionnaire();
    let offsets = layout.offsets();
    let features = (0..n)
        .map(|_| {
            let active: Vec<usize> =
                offsets.iter().zip(layout.group_sizes()).map(|(o, s)| o + rng.random_range(0..*s)).collect();
            FeatureVector::from_active(layout.len(), active)
        })
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    LabeledDataset::new(layout, features, labels, (0..n).collect()).expect("consistent batch")
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let design = SparseDesign::from_dataset(&random_batch(&mut rng, 48));
        let l2 = rng.random_range(0.0..1.0);
        let model = LogisticModel {
            weights: (0..design.dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            bias: rng.random_range(-2.0..2.0),
        };
        let (gw, gb) = gradient(&model, &design, l2);
        let numeric = |perturb: &dyn Fn(&mut LogisticModel, f64)| {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            perturb(&mut plus, h);
            perturb(&mut minus, -h);
            (objective(&plus, &design, l2) - objective(&minus, &design, l2)) / (2.0 * h)
        };
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        for (j, g) in gw.iter().enumerate() {
            worst = worst.max(rel(*g, numeric(&|m, d| m.weights[j] += d)));
        }
        worst = worst.max(rel(gb, numeric(&|m, d| m.bias += d)));
    }
    ensure!(worst < 1e-4, "max relative error {worst:e}");
    Ok(format!("max relative error {worst:.1e}"))
}

fn split_discipline() -> Outcome {
    let config = GeneratorConfig { n_records: 3_000, seed: 77, ..GeneratorConfig::default() };
    let records = generate_dataset(&config, &shipped_archetypes(), &ModulationTable::shipped())
        .map_err(|e| e.to_string())?
        .records;
    let data = LabeledDataset::from_records(&records).map_err(|e| e.to_string())?;
    let (train, test) = split(&data, TRAIN_FRACTION, 9).map_err(|e| e.to_string())?;
    let (train2, test2) = split(&data, TRAIN_FRACTION, 9).map_err(|e| e.to_string())?;
    ensure!(train.ids == train2.ids && test.ids == test2.ids, "split is not reproducible");
    ensure!(train.len() == 2_100 && test.len() == 900, "split sizes {} / {}", train.len(), test.len());
    let train_ids: BTreeSet<usize> = train.ids.iter().copied().collect();
    let test_ids: BTreeSet<usize> = test.ids.iter().copied().collect();
    ensure!(train_ids.is_disjoint(&test_ids), "train and test overlap");
    ensure!(train_ids.union(&test_ids).count() == data.len(), "split is not exhaustive");

    let folds = kfold(train.len(), FOLDS).map_err(|e| e.to_string())?;
    ensure!(folds == kfold(train.len(), FOLDS).unwrap(), "folds are not reproducible");
    let mut covered = vec![0usize; train.len()];
    for f in &folds {
        let fit: BTreeSet<usize> = f.fit.iter().copied().collect();
        ensure!(f.holdout.iter().all(|i| !fit.contains(i)), "fold fit and holdout overlap");
        ensure!(fit.len() + f.holdout.len() == train.len(), "fold is not exhaustive");
        f.holdout.iter().for_each(|i| covered[*i] += 1);
    }
    ensure!(covered.iter().all(|c| *c == 1), "holdouts do not partition the training set");

    let outcome = tune(&train, ModelKind::LogisticRegression, &GridSpec::default(), 2, 3, FOLDS, DEFAULT_THRESHOLD)
        .map_err(|e| e.to_string())?;
    ensure!(outcome.touched_ids.is_subset(&train_ids), "tuning touched ids outside train");
    ensure!(outcome.touched_ids.is_disjoint(&test_ids), "tuning touched the test partition");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cli = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_venuetrace"))
            .args(args)
            .current_dir(dir.path())
            .env("RUST_LOG", "error")
            .output()
    };
    let gen = cli(&["generate", "--n-records", "3000", "--seed", "77", "--out-dir", "."]).map_err(|e| e.to_string())?;
    ensure!(gen.status.success(), "generate failed: {}", String::from_utf8_lossy(&gen.stderr));
    let train_run = cli(&["train", "--data", "dataset-n3000-seed77.csv", "--draws", "2", "--out-dir", "."])
        .map_err(|e| e.to_string())?;
    ensure!(train_run.status.success(), "train failed: {}", String::from_utf8_lossy(&train_run.stderr));
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("train.manifest.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let audit = &manifest["summary"]["split_audit"];
    ensure!(audit["touched_in_test"] == 0 && audit["touched_outside_train"] == 0, "manifest audit {audit}");
    ensure!(audit["touched_ids"].as_u64() == Some(2_100), "manifest audit {audit}");
    Ok(format!("{} folds; tuning touched {} ids, none in test", folds.len(), outcome.touched_ids.len()))
}

/// Rotates the fault kind and the faulty node across seeds.
fn byzantine_script(seed: u64) -> Vec<Fault> {
    let node = (seed / 3 % 4) as usize;
    match seed % 3 {
        0 => vec![Fault::Equivocate { node }],
        1 => vec![Fault::StaleReplay { node }],
        _ => vec![Fault::Crash { node, at: 3 + seed % 50 }],
    }
}

fn consensus_safety() -> Outcome {
    let scenario = |seed: u64, faults: Vec<Fault>| Scenario {
        net: SimNetConfig { n_nodes: 4, f_byzantine: 1, seed, faults, ..SimNetConfig::default() },
        commands: 1000,
        ..Scenario::default()
    };
    let mut stalled = 0;
    for seed in 0..100 {
        let (report, _) = run_scenario(&scenario(seed, byzantine_script(seed)), false).map_err(|e| e.to_string())?;
        ensure!(report.safety.is_ok(), "seed {seed}: {}", report.verdict());
        stalled += usize::from(!report.all_committed);
    }
    for seed in 0..5 {
        let (report, _) = run_scenario(&scenario(500 + seed, vec![]), false).map_err(|e| e.to_string())?;
        ensure!(report.safety.is_ok(), "fault-free seed {seed}: {}", report.verdict());
        ensure!(report.committed == vec![1000; 4], "fault-free seed {seed} committed {:?}", report.committed);
    }
    Ok(format!("100 faulty runs without divergence ({stalled} incomplete); 5 fault-free runs committed 1000"))
}

const START: i64 = 18_687 * MINUTES_PER_DAY;

fn contact_fixture(n: usize, seed: u64) -> Result<Vec<SiloPayload>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = GeneratorConfig { n_records: n, seed, balanced: false, ..GeneratorConfig::default() };
    let records = generate_dataset(&config, &shipped_archetypes(), &ModulationTable::shipped())
        .map_err(|e| e.to_string())?
        .records;
    let mut out = Vec::with_capacity(2 * n);
    for (i, r) in records.into_iter().enumerate() {
        let scan = ScanEvent {
            handle: Uuid::from_u128(0x5ca1_0000_0000 + i as u128),
            user_id: Uuid::from_u128(rng.random_range(1..1_500)),
            venue_id: format!("venue-{}", rng.random_range(0..120)),
            venue_type: r.location_type,
            timestamp: Timestamp(START + rng.random_range(0..10 * MINUTES_PER_DAY)),
        };
        out.push(SiloPayload::Scan(scan.clone()));
        if rng.random_bool(0.6) {
            out.push(SiloPayload::Answers(AnswerSubmission {
                handle: scan.handle,
                user_id: scan.user_id,
                answers: r.answers(),
                outcome: r.led_to_contamination,
                submitted_at: scan.timestamp,
            }));
        }
    }
    Ok(out)
}

fn deploy(payloads: &[SiloPayload], n_silos: usize) -> Result<SiloCluster, String> {
    let mut cluster =
        SiloCluster::new(ClusterConfig { n_silos, ..ClusterConfig::default() }).map_err(|e| e.to_string())?;
    let mut batches = vec![Vec::new(); n_silos];
    let mut home = HashMap::new();
    for p in payloads {
        let silo = match p {
            SiloPayload::Scan(s) => *home.entry(s.handle).or_insert_with(|| assign_silo(&s.venue_id, n_silos)),
            SiloPayload::Answers(a) => home[&a.handle],
        };
        batches[silo].push(p.encode());
    }
    for (silo, batch) in batches.into_iter().enumerate() {
        cluster.replicate_batch(silo, batch).map_err(|e| e.to_string())?;
    }
    Ok(cluster)
}

/// Distinct visitors by linear scan over every payload.
fn contact_oracle(
    payloads: &[SiloPayload],
    q: &ContactQuery,
    now: Timestamp,
    cfg: &FederatedConfig,
) -> Option<Vec<(Uuid, Timestamp)>> {
    let (from, to) = q.window.bounds().ok()?;
    let from = from.max(Timestamp(now.0 - cfg.retention_minutes));
    let mut known = false;
    let mut first: HashMap<Uuid, Timestamp> = HashMap::new();
    for p in payloads {
        if let SiloPayload::Scan(s) = p {
            if s.venue_id != q.venue_id {
                continue;
            }
            known = true;
            if from <= s.timestamp && s.timestamp < to {
                let t = first.entry(s.user_id).or_insert(s.timestamp);
                *t = (*t).min(s.timestamp);
            }
        }
    }
    known.then(|| {
        let mut v: Vec<(Uuid, Timestamp)> = first.into_iter().collect();
        v.sort();
        v
    })
}

fn partition_invariance() -> Outcome {
    let payloads = contact_fixture(10_000, 12)?;
    let clusters = [1, 4, 8].map(|n| deploy(&payloads, n));
    let clusters: Vec<SiloCluster> = clusters.into_iter().collect::<Result<_, _>>()?;
    let now = Timestamp(START + 11 * MINUTES_PER_DAY);
    let cfg = FederatedConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut non_empty, mut unknown) = (0, 0);
    for _ in 0..1_000 {
        let from = START + rng.random_range(-MINUTES_PER_DAY..10 * MINUTES_PER_DAY);
        let window = if rng.random_bool(0.5) {
            QueryWindow::Coarse(coarsen_timestamp(Timestamp(from)))
        } else {
            QueryWindow::Explicit {
                from: Timestamp(from),
                to: Timestamp(from + rng.random_range(1..3 * MINUTES_PER_DAY)),
            }
        };
        let q = ContactQuery { venue_id: format!("venue-{}", rng.random_range(0..125)), window };
        let results: Vec<_> = clusters.iter().map(|c| search_contacts(c, &q, now, &cfg)).collect();
        ensure!(results.windows(2).all(|w| w[0] == w[1]), "silo counts disagree on {q:?}");
        match (contact_oracle(&payloads, &q, now, &cfg), &results[0]) {
            (None, Err(_)) => unknown += 1,
            (Some(expected), Ok(outcome)) => {
                let got: Vec<(Uuid, Timestamp)> =
                    outcome.contacts().iter().map(|c| (c.user_id, c.window.start())).collect();
                let want: Vec<(Uuid, Timestamp)> =
                    expected.iter().map(|(u, t)| (*u, coarsen_timestamp(*t).start())).collect();
                ensure!(got == want, "contacts differ from the oracle on {q:?}");
                ensure!(matches!(outcome, SearchOutcome::EmptyWindow) == expected.is_empty(), "empty-window flag");
                non_empty += usize::from(!expected.is_empty());
            }
            (want, got) => return Err(format!("oracle {want:?} but search gave {got:?}")),
        }
    }
    ensure!(non_empty >= 200, "fixture too sparse: {non_empty} non-empty queries");
    Ok(format!("1000 queries; {non_empty} non-empty, {unknown} unknown venues"))
}

fn is_bin_label(s: &str) -> bool {
    s.len() == 16
        && NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d").is_ok()
        && &s[10..11] == " "
        && DayWindow::ALL.iter().any(|w| w.label() == &s[11..])
}

/// True when the text holds `dd:dd`, the shape of any clock time.
fn has_clock_time(text: &str) -> bool {
    text.as_bytes().windows(5).any(|w| {
        w[0].is_ascii_digit() && w[1].is_ascii_digit() && w[2] == b':' && w[3].is_ascii_digit() && w[4].is_ascii_digit()
    })
}

fn leak_check(table: &AggregateTable, records: &[ExposureRecord]) -> Result<(), String> {
    for row in &table.rows {
        ensure!(is_bin_label(&row.window), "window `{}` is not a bin label", row.window);
    }
    let json = serde_json::to_string(table).map_err(|e| e.to_string())?;
    let csv = table.to_csv();
    for text in [&json, &csv] {
        ensure!(!has_clock_time(text), "clock time in output: {text}");
        for r in records {
            ensure!(!text.contains(&r.user_id.to_string()), "user id in output");
            ensure!(!text.contains(&r.user_id.simple().to_string()), "user id in output");
        }
    }
    let parsed: Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    for row in parsed["rows"].as_array().ok_or("rows missing")? {
        let keys: BTreeSet<&str> = row.as_object().ok_or("row is not an object")?.keys().map(String::as_str).collect();
        ensure!(keys.is_subset(&BTreeSet::from(["level", "window", "outcome", "count"])), "row keys {keys:?}");
    }
    Ok(())
}

fn random_query(rng: &mut ChaCha8Rng, pool: &[ExposureRecord]) -> AggregateQuery {
    let group = Field::ALL[rng.random_range(0..Field::ALL.len())];
    let filters = (0..rng.random_range(0..3))
        .map(|_| {
            let f = Field::ALL[rng.random_range(0..Field::ALL.len())];
            let r = &pool[rng.random_range(0..pool.len())];
            Filter { field: f.column_name().to_owned(), level: r.level_label(f).to_owned() }
        })
        .collect();
    AggregateQuery { group_by: group.column_name().to_owned(), filters, outcome_split: rng.random_bool(0.5) }
}

fn coarsening() -> Outcome {
    let config = GeneratorConfig { n_records: 20_000, seed: 10, balanced: false, ..GeneratorConfig::default() };
    let pool = generate_dataset(&config, &shipped_archetypes(), &ModulationTable::shipped())
        .map_err(|e| e.to_string())?
        .records;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut released = 0u64;
    for _ in 0..10_000 {
        let n = rng.random_range(0..60);
        let records: Vec<ExposureRecord> = (0..n)
            .map(|_| {
                let mut r = pool[rng.random_range(0..pool.len())].clone();
                r.user_id = Uuid::from_u128(rng.random());
                r.timestamp = Timestamp(rng.random_range(-400 * MINUTES_PER_DAY..30_000 * MINUTES_PER_DAY));
                r
            })
            .collect();
        let q = random_query(&mut rng, &pool);
        let table = aggregate_records(&records, &q, rng.random_range(1..=5)).map_err(|e| e.to_string())?;
        leak_check(&table, &records)?;
        released += table.rows.iter().map(|r| r.count).sum::<u64>();
    }
    let payloads = contact_fixture(1_500, 14)?;
    let cluster = deploy(&payloads, 4)?;
    let cfg = FederatedConfig { k_min: 1, ..FederatedConfig::default() };
    let scans: Vec<ExposureRecord> = payloads
        .iter()
        .filter_map(|p| match p {
            SiloPayload::Scan(s) => {
                let mut r = pool[0].clone();
                r.user_id = s.user_id;
                Some(r)
            }
            SiloPayload::Answers(_) => None,
        })
        .collect();
    for _ in 0..20 {
        let q = random_query(&mut rng, &pool);
        let table = research_aggregate(&cluster, &q, &cfg).map_err(|e| e.to_string())?;
        leak_check(&table, &scans)?;
        for p in &payloads {
            if let SiloPayload::Scan(s) = p {
                ensure!(!serde_json::to_string(&table).unwrap().contains(&s.timestamp.to_iso8601()), "timestamp leak");
            }
        }
    }
    ensure!(released > 0, "no cell was ever released");
    Ok(format!("10000 random sets and 20 cluster queries; {released} records released in bins"))
}

/// SHA-256(server nonce || client key || nonce as big-endian u64), counted bit by bit.
fn brute_force_accepts(server_nonce: &[u8], client_key: &[u8], nonce: u64, difficulty: u32) -> bool {
    let digest =
        Sha256::new().chain_update(server_nonce).chain_update(client_key).chain_update(nonce.to_be_bytes()).finalize();
    let mut zeros = 0;
    for bit in 0..256 {
        if digest[bit / 8] >> (7 - bit % 8) & 1 == 1 {
            break;
        }
        zeros += 1;
    }
    zeros >= difficulty
}

fn proof_of_work() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let now: DateTime<Utc> = DateTime::from_timestamp(1_614_589_200, 0).expect("valid instant");
    let mut store = ChallengeStore::<()>::default();
    let mut accepted_total = 0;
    for difficulty in 0..=12u32 {
        let server_nonce: [u8; NONCE_BYTES] = rng.random();
        let client_key: Vec<u8> = (0..32).map(|_| rng.random()).collect();
        let mut first = None;
        for nonce in 0..4_096u64 {
            store.insert(
                Challenge {
                    server_nonce,
                    client_key: client_key.clone(),
                    difficulty,
                    expires_at: now + chrono::Duration::seconds(60),
                    grant: (),
                },
                now,
            );
            let verdict = store.verify(&server_nonce, nonce, now);
            let expected = brute_force_accepts(&server_nonce, &client_key, nonce, difficulty);
            match verdict {
                Ok(_) => ensure!(expected, "d={difficulty}: accepted nonce {nonce} the oracle rejects"),
                Err(PowError::InsufficientWork { .. }) => {
                    ensure!(!expected, "d={difficulty}: rejected valid nonce {nonce}")
                }
                Err(e) => return Err(format!("d={difficulty}: unexpected {e}")),
            }
            if expected {
                accepted_total += 1;
                first.get_or_insert(nonce);
            }
        }
        if let Some(first) = first {
            ensure!(
                solve(&server_nonce, &client_key, difficulty, 0) == Some(first),
                "solver disagrees at d={difficulty}"
            );
        }
    }
    let params = PowParams::default();
    let max_weight = params.route_weights.values().copied().max().unwrap_or(0);
    for weight in [0, max_weight] {
        let mut previous = 0;
        for step in 0..=4_000 {
            let d = params.difficulty(step as f64 * 0.25, weight);
            ensure!(d >= previous, "difficulty fell at rate {}", step as f64 * 0.25);
            ensure!(d <= 20, "difficulty {d} above the clamp");
            previous = d;
        }
        ensure!(params.difficulty(1e9, weight) == 20, "huge rates are not clamped at 20");
    }
    Ok(format!("13 difficulties x 4096 nonces agree with brute force ({accepted_total} accepted)"))
}

fn poster(id: &str, vt: &str, signature: &[u8]) -> String {
    let header = json!({"alg": "ES256", "typ": "JWT"}).to_string();
    let payload = json!({"typ": "entry", "id": id, "opn": "Venue", "adr": "1 Main Street", "pc": "AB1 2CD", "vt": vt})
        .to_string();
    let jws = [header.as_bytes(), payload.as_bytes(), signature].map(|p| URL_SAFE_NO_PAD.encode(p)).join(".");
    format!("UKC19TRACING:1:{jws}")
}

fn qr_ingestion() -> Outcome {
    const ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ0123456789-_ .:'\"";
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1_000 {
        let id_len = rng.random_range(1..32);
        let id: String = (0..id_len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char).collect();
        let vt = format!("{:0width$}", rng.random_range(0..25), width = rng.random_range(1..4));
        let sig_a: Vec<u8> = (0..rng.random_range(0..128)).map(|_| rng.random()).collect();
        let sig_b: Vec<u8> = (0..rng.random_range(0..128)).map(|_| rng.random()).collect();
        let a = parse_qr(&poster(&id, &vt, &sig_a)).map_err(|e| format!("{id:?}/{vt}: {e}"))?;
        let b = parse_qr(&poster(&id, &vt, &sig_b)).map_err(|e| format!("{id:?}/{vt}: {e}"))?;
        ensure!(
            a == QrPayload { venue_id: id.clone(), venue_type_code: vt.clone() },
            "round trip of {id:?}/{vt} gave {a:?}"
        );
        ensure!(a == b, "signature changed the result for {id:?}");
    }
    ensure!(map_venue_type("015") == VenueType::Restaurant, "\"015\" maps to {:?}", map_venue_type("015"));
    Ok("1000 fixtures round-trip; \"015\" is Restaurant".into())
}
