use symoden_core::energyctl::{closed_loop_rollout, ControlLaw};
use symoden_core::envsim::{build_model, prediction_error, train_error, truth_bundle, GenConfig, Scale, Task};
use symoden_core::hamdyn::{ModelBundle, Variant};
use symoden_core::odeflow::{train, TrainConfig};
use symoden_core::Error;

#[test]
fn generate_train_evaluate_and_reload() {
    let ds = GenConfig::new(Task::Task2, 4, 5).generate().unwrap();
    let mut m = build_model(Task::Task2, Variant::SymEmbedded, Scale::Desk, 2).unwrap();
    let before = train_error(&m, &ds).unwrap();
    let cfg = TrainConfig { epochs: 25, learning_rate: 3e-3, ..TrainConfig::default() };
    let report = train(&mut m, &ds.train, &cfg).unwrap();
    assert_eq!(report.records.len(), 25);
    let after = train_error(&m, &ds).unwrap();
    assert!(after < before, "{before} -> {after}");
    let back = ModelBundle::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(prediction_error(&back, &ds, 10).unwrap(), prediction_error(&m, &ds, 10).unwrap());
    let law = ControlLaw::swingup(back).unwrap();
    let run = closed_loop_rollout(&Task::Task2, &law, &Task::Task2.embed(&[0.1, 0.0]), 20, 0.05).unwrap();
    assert_eq!(run.states.len(), 21);
}

#[test]
fn fully_actuated_stand_ins_stabilize() {
    let cart = ControlLaw::pd_diag(truth_bundle(Task::Task3Fa).unwrap(), vec![0.0, 0.0], 1.0, 1.0).unwrap();
    let run = closed_loop_rollout(&Task::Task3Fa, &cart, &Task::Task3Fa.embed(&[-0.8, 2.0, 0.3, -0.5]), 1000, 0.02).unwrap();
    let end = run.last();
    assert!(end[0].abs() < 0.1 && end[1] > 0.95, "{end:?}");

    let acro = ControlLaw::pd_diag(truth_bundle(Task::Task4Fa).unwrap(), vec![std::f64::consts::PI, 0.0], 5.0, 5.0).unwrap();
    let run = closed_loop_rollout(&Task::Task4Fa, &acro, &Task::Task4Fa.embed(&[0.5, -0.5, 0.0, 0.0]), 800, 0.05).unwrap();
    let g = Task::Task4Fa.generalize(run.last()).unwrap();
    assert!(g[0].cos() < -0.9, "{g:?}");
}

#[test]
fn underactuated_control_is_refused() {
    let law = ControlLaw::pd_diag(truth_bundle(Task::Task3).unwrap(), vec![0.0, 0.0], 1.0, 1.0).unwrap();
    let r = closed_loop_rollout(&Task::Task3, &law, &Task::Task3.embed(&[0.0, 0.5, 0.0, 0.0]), 5, 0.02);
    assert!(matches!(r, Err(Error::SingularActuation(_))));
}
