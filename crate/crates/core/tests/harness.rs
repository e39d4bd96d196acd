use std::path::Path;

use wbal_core::experiment::{run_experiment, ExperimentConfig};
use wbal_core::trace::load_trace;

fn config(text: &str, dir: &Path) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text, dir).unwrap()
}

const BATCH: &str = "algo = [\"algo1\", \"algo2\", \"baseline\"]\nbeta = 0.5\nalpha = 0.5\n\
                     reps = 6\nout_dir = \"out\"\n[graph]\nn = 15\np = 0.2\nseed = 11\n\
                     [stop]\ntol = 1e-8\nmax_rounds = 20000\n";

#[test]
fn identical_configs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config(BATCH, a.path())).unwrap();
    run_experiment(&config(BATCH, b.path())).unwrap();
    for name in ["summary.csv", "summary_median.csv", "runs.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    // traces differ only in their wall-time line
    let name = "algo2-alpha0.5_rep0005.csv";
    let x = load_trace::<f64>(a.path().join("out").join(name)).unwrap();
    let y = load_trace::<f64>(b.path().join("out").join(name)).unwrap();
    assert_eq!(x.records, y.records);
}

#[test]
fn parallel_cells_match_sequential_runs() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(BATCH, dir.path());
    let summary = run_experiment(&c).unwrap();
    let graphs = c.graphs().unwrap();
    let cells = c.cells();
    assert_eq!(summary.runs.len(), graphs.len() * cells.len());
    for run in &summary.runs {
        let cell = cells.iter().find(|x| x.label == run.label).unwrap();
        let (seed, g) = &graphs[run.rep];
        assert_eq!(run.seed, *seed);
        let alone = cell.run(g, &c.stop_rule()).unwrap();
        let batch = run.result.as_ref().unwrap();
        assert_eq!(alone.records, batch.records);
        let path = dir
            .path()
            .join("out")
            .join(format!("{}_rep{:04}.csv", run.label, run.rep));
        assert_eq!(load_trace::<f64>(path).unwrap().records, batch.records);
    }
}

#[test]
fn summary_is_the_padded_mean_of_stop_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&config(BATCH, dir.path())).unwrap();
    for (label, mean) in summary.labels.iter().zip(&summary.mean) {
        let series: Vec<Vec<f64>> = summary
            .runs
            .iter()
            .filter(|r| &r.label == label)
            .map(|r| r.result.as_ref().unwrap().stop_metric())
            .collect();
        let longest = series.iter().map(Vec::len).max().unwrap();
        assert_eq!(mean.len(), longest);
        for (k, &m) in mean.iter().enumerate() {
            let expected: f64 = series
                .iter()
                .map(|s| s.get(k).copied().unwrap_or(*s.last().unwrap()))
                .sum::<f64>()
                / series.len() as f64;
            assert!((m - expected).abs() <= 1e-15 * expected.abs().max(1.0));
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(csv.starts_with("round,algo1-beta0.5,algo2-alpha0.5,baseline\n"));
}

#[test]
fn beta_sweep_on_file_graph_orders_by_rate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.edges"), "4\n0 1\n1 2\n2 0\n2 3\n3 0\n").unwrap();
    let c = config(
        "algo = \"algo1\"\nsweep = [0.1, 0.5, 0.9]\n[graph]\nfile = \"g.edges\"\n",
        dir.path(),
    );
    let summary = run_experiment(&c).unwrap();
    let rounds: Vec<usize> = summary
        .runs
        .iter()
        .map(|r| r.result.as_ref().unwrap().rounds)
        .collect();
    assert_eq!(summary.labels, ["algo1-beta0.1", "algo1-beta0.5", "algo1-beta0.9"]);
    assert!(rounds[1] < rounds[2] && rounds[2] < rounds[0], "{rounds:?}");
}

#[test]
fn explicit_seed_list_is_used_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(
        "algo = \"baseline\"\nreps = 2\n[graph]\nn = 6\np = 0.3\nseeds = [5, 9, 13]\n",
        dir.path(),
    );
    let summary = run_experiment(&c).unwrap();
    let seeds: Vec<_> = summary.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, [Some(5), Some(9)]);
}
