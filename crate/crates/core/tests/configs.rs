use std::path::Path;

use hiercast::experiment::{DataSource, ExperimentConfig};

fn load(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn shipped_configs_parse() {
    let sim = load("simulation.toml");
    assert!(matches!(sim.data, DataSource::Simulate { replications: 100, .. }));
    assert_eq!(sim.approaches.len(), 7);

    let twins = load("twins.toml");
    assert_eq!(twins.twins, 20);
    assert_eq!(twins.twin_of.as_deref(), Some("Cluster-trend-season"));

    let emp = load("empirical.toml");
    assert_eq!(emp.seasonal_period(), 12);
    match emp.data {
        DataSource::Csv { path, hierarchy } => {
            assert!(path.ends_with("configs/panel.csv"));
            assert!(hierarchy.is_some());
        }
        other => panic!("unexpected source {other:?}"),
    }
}
