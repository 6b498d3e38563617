use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use venuetrace_core::model::levels::{Outcome, Setting};
use venuetrace_core::model::{decode_features, encode_features, validate_record, Field};
use venuetrace_core::synth::*;

/// Composite Simpson rule for E[clamp(m + w·X)] with X ~ Laplace(mu, b).
fn quadrature_mean(m: f64, w: f64, mu: f64, b: f64) -> f64 {
    let (lo, hi, n) = (mu - 60.0 * b, mu + 60.0 * b, 200_000);
    let h = (hi - lo) / n as f64;
    let f = |x: f64| (m + w * x).clamp(0.0, 1.0) * (-(x - mu).abs() / b).exp() / (2.0 * b);
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        sum += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn positive_share(config: &GeneratorConfig, table: &ModulationTable) -> f64 {
    let d = generate_dataset(config, &shipped_archetypes(), table).unwrap();
    d.positives as f64 / d.records.len() as f64
}

#[test]
fn baseline_rate_without_noise() {
    let config = GeneratorConfig {
        n_records: 100_000,
        seed: 5,
        balanced: false,
        noise_mode: NoiseMode::Off,
        ..Default::default()
    };
    let rate = positive_share(&config, &ModulationTable::zero());
    assert!((rate - 0.100).abs() <= 0.005, "{rate}");
}

#[test]
fn baseline_rate_with_noise_matches_quadrature() {
    let config = GeneratorConfig { n_records: 100_000, seed: 6, balanced: false, ..Default::default() };
    let expected = quadrature_mean(0.10, 0.05, 0.0, 0.5);
    let rate = positive_share(&config, &ModulationTable::zero());
    assert!((rate - expected).abs() <= 0.01, "{rate} vs {expected}");
    // The closed form used by the oracle agrees with the quadrature.
    assert!((expected_clamped(0.10, 0.025) - expected).abs() < 1e-8);
}

#[test]
fn raw_noise_mode_matches_quadrature() {
    let config = GeneratorConfig {
        n_records: 100_000,
        seed: 7,
        balanced: false,
        noise_mode: NoiseMode::Raw,
        ..Default::default()
    };
    let expected = quadrature_mean(0.10, 1.0, 0.0, 0.5);
    let rate = positive_share(&config, &ModulationTable::zero());
    assert!((rate - expected).abs() <= 0.01, "{rate} vs {expected}");
}

/// One-degree-of-freedom chi-square on the positive count; 6.635 is the 1% critical value.
#[test]
fn shipped_positive_rate_passes_chi_square() {
    let config = GeneratorConfig { n_records: 100_000, seed: 8, balanced: false, ..Default::default() };
    let table = ModulationTable::shipped();
    let p = positive_rate(&table, &shipped_archetypes(), &config);
    let d = generate_dataset(&config, &shipped_archetypes(), &table).unwrap();
    let n = d.records.len() as f64;
    let (obs1, obs0) = (d.positives as f64, d.negatives as f64);
    let chi2 = (obs1 - n * p).powi(2) / (n * p) + (obs0 - n * (1.0 - p)).powi(2) / (n * (1.0 - p));
    assert!(chi2 < 6.635, "chi2={chi2} p={p} observed={}", obs1 / n);
}

#[test]
fn balanced_150k_is_exactly_even() {
    let config = GeneratorConfig { seed: 9, ..Default::default() };
    assert_eq!(config.n_records, 150_000);
    let d = generate_dataset(&config, &shipped_archetypes(), &ModulationTable::shipped()).unwrap();
    let pos = d.records.iter().filter(|r| r.led_to_contamination == Outcome::Yes).count();
    assert_eq!((pos, d.records.len() - pos), (75_000, 75_000));
}

#[test]
fn serialised_dataset_is_byte_identical() {
    let config = GeneratorConfig { n_records: 5_000, seed: 10, ..Default::default() };
    let bytes = || {
        let d = generate_dataset(&config, &shipped_archetypes(), &ModulationTable::shipped()).unwrap();
        let mut out = Vec::new();
        write_csv(&d.records, &mut out).unwrap();
        out
    };
    let first = bytes();
    assert_eq!(first, bytes());
    let back = read_csv(first.as_slice()).unwrap();
    assert_eq!(back.len(), 5_000);
}

#[test]
fn archetype_frequencies_match_their_tables() {
    let archetypes = shipped_archetypes();
    let config = GeneratorConfig::default();
    let table = ModulationTable::shipped();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 200_000;
    let mut drawn = vec![0usize; archetypes.len()];
    let mut park_outdoor = (0usize, 0usize);
    let museum = archetypes.iter().position(|a| a.name == "ventilated-museum").unwrap();
    let mut museum_masks = (0usize, 0usize);
    for _ in 0..n {
        let (ctx, r) = sample_with_context(&mut rng, &config, &archetypes, &table);
        drawn[ctx] += 1;
        if archetypes[ctx].name == "outdoor-park" {
            park_outdoor.0 += 1;
            park_outdoor.1 += usize::from(r.setting == Setting::Outdoor);
        }
        if ctx == museum {
            museum_masks.0 += 1;
            museum_masks.1 += r.level(Field::MasksWorn);
        }
    }
    assert_eq!(park_outdoor.0, park_outdoor.1);
    for (a, count) in archetypes.iter().zip(drawn) {
        assert!((count as f64 / n as f64 - a.prior).abs() < 0.005, "{}", a.name);
    }
    let no_mask = museum_masks.1 as f64 / museum_masks.0 as f64;
    let expected = archetypes[museum].distribution(Field::MasksWorn)[1];
    assert!((no_mask - expected).abs() < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_records_encode_and_decode(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let archetypes = shipped_archetypes();
        for _ in 0..50 {
            let r = sample_record(&mut rng, &GeneratorConfig::default(), &archetypes, &ModulationTable::shipped());
            prop_assert!(validate_record(&r).is_empty());
            let levels = decode_features(&encode_features(&r).unwrap()).unwrap();
            let expected: Vec<usize> = Field::ALL.iter().map(|f| r.level(*f)).collect();
            prop_assert_eq!(levels, expected);
        }
    }
}
