use rvpinn_core::mlp::BcMode;
use rvpinn_core::problem::{continuity_constant, Problem, SourceSpec};
use rvpinn_core::report::{
    export_history, export_solution, read_history_csv, read_history_json, verify_bounds,
    HistoryFormat,
};
use rvpinn_core::residual::RvpinnLoss;
use rvpinn_core::testspace::TestSpace;
use rvpinn_core::trainer::{train, TrainConfig};

fn short(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        max_epochs: 200,
        record_every: 20,
        architecture: vec![1, 10, 10, 1],
        error_nodes: 2000,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

#[test]
fn short_training_reduces_loss_and_error() {
    let problem = Problem::smooth(1.0, BcMode::Strong).unwrap();
    let space = TestSpace::spectral(20, 1.0).unwrap();
    let out = train(&problem, &space, &short(1)).unwrap();
    let first = &out.history[0];
    let last = out.history.last().unwrap();
    assert_eq!(out.history.len(), 11);
    assert!(last.loss < 0.1 * first.loss);
    assert!(last.energy_error.unwrap() < first.energy_error.unwrap());
    let s = verify_bounds(&out.history, out.mu, 1e-2);
    assert_eq!(s.lower_bound_fraction, Some(1.0));

    // best parameters reproduce the best recorded loss
    let loss = RvpinnLoss::new(&problem, &space).unwrap();
    let best = out.history.iter().find(|r| r.epoch == out.best_epoch).unwrap();
    let again = loss.evaluate(&out.best_params).unwrap();
    assert!((again.loss - best.loss).abs() <= 1e-12 * best.loss);
    assert!(out.history.iter().all(|r| r.loss >= best.loss));
}

#[test]
fn bookkeeping_holds_for_constrained_advection() {
    let problem = Problem::advection(0.1, BcMode::Constrained).unwrap();
    let space = TestSpace::finite_element(30).unwrap();
    let out = train(&problem, &space, &short(2)).unwrap();
    assert!((out.mu - continuity_constant(&problem)).abs() < 1e-15);
    for r in &out.history {
        assert!(r.loss.is_finite());
        assert!(r.penalty >= 0.0);
        let recomposed = r.phi_norm * r.phi_norm + r.penalty;
        assert!((recomposed - r.loss).abs() <= 1e-10 * r.loss.max(1e-300));
    }
}

#[test]
fn history_exports_round_trip() {
    let problem = Problem::delta(BcMode::Strong).unwrap();
    let space = TestSpace::finite_element(20).unwrap();
    let out = train(&problem, &space, &short(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let json = dir.path().join("h.json");
    export_history(&out.history, &csv, HistoryFormat::Csv).unwrap();
    export_history(&out.history, &json, HistoryFormat::Json).unwrap();
    assert_eq!(read_history_csv(&csv).unwrap(), out.history);
    assert_eq!(read_history_json(&json).unwrap(), out.history);

    let sol = dir.path().join("s.csv");
    export_solution(&out.best_params, &problem, 11, &sol).unwrap();
    let text = std::fs::read_to_string(&sol).unwrap();
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn problems_without_closed_form_train_without_errors() {
    let problem = Problem::new(0.5, 0.0, SourceSpec::Constant(1.0), BcMode::Strong).unwrap();
    let space = TestSpace::finite_element(15).unwrap();
    let out = train(&problem, &space, &short(4)).unwrap();
    assert!(out.history.iter().all(|r| r.energy_error.is_none() && r.lower_bound_ok.is_none()));
    let s = verify_bounds(&out.history, out.mu, 1e-2);
    assert!(!s.has_exact_solution);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    export_history(&out.history, &csv, HistoryFormat::Csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",,"));
}

#[test]
fn identical_seeds_give_identical_runs() {
    let problem = Problem::smooth(1.0, BcMode::Constrained).unwrap();
    let space = TestSpace::spectral(10, 1.0).unwrap();
    let a = train(&problem, &space, &short(9)).unwrap();
    let b = train(&problem, &space, &short(9)).unwrap();
    let c = train(&problem, &space, &short(10)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.final_params.flatten(), b.final_params.flatten());
    assert_ne!(a.history, c.history);
}
