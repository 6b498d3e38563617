use venuetrace_core::risk::*;
use venuetrace_core::synth::*;

#[test]
fn search_recovers_the_generating_lambda() {
    let config = GeneratorConfig { n_records: 150_000, seed: 31, balanced: false, ..Default::default() };
    let d = generate_dataset(&config, &shipped_archetypes(), &ModulationTable::shipped()).unwrap();
    let histories = build_histories(&d.records, &HistoryConfig { seed: 31, ..Default::default() });
    let grid = lambda_grid(LAMBDA_RANGE.0, LAMBDA_RANGE.1, 1e-4);
    assert_eq!(grid, [5e-5, 1e-4, 2e-4, 3e-4, 4e-4, 5e-4]);
    let table = ThresholdTable::default();
    let chosen = select_lambda(&grid, |lambda| level_accuracy(&histories, &DecayParams::with_lambda(lambda), &table));
    assert_eq!(chosen, Some(DEFAULT_LAMBDA));
}
