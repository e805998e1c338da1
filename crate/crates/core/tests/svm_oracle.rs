mod common;

use common::{grid_oracle, separable_instance, svm_instances, to_vectors};
use planminer::linear_svm::{objective, predict, train, train_traced, SvmTrainConfig};

#[test]
fn trained_objective_matches_grid_oracle() {
    // Eight points give only eight SGD steps per epoch, so these instances get a larger budget.
    let cfg = SvmTrainConfig {
        epochs: 20_000,
        ..SvmTrainConfig::default()
    };
    for (k, (pts, ys)) in svm_instances().iter().enumerate() {
        let xs = to_vectors(pts);
        let model = train(&xs, ys, &cfg).unwrap();
        let got = objective(&model, &xs, ys, cfg.c).unwrap();
        let want = grid_oracle(pts, ys, cfg.c);
        println!("instance {k}: trained {got:.6} oracle {want:.6}");
        assert!(got >= want - 1e-9, "oracle is not a lower bound");
        assert!(
            (got - want).abs() <= 1e-3,
            "instance {k}: trained {got} vs oracle {want}"
        );
    }
}

#[test]
fn separable_instances_are_fit_exactly() {
    let (pts, ys) = separable_instance();
    let xs = to_vectors(&pts);
    let model = train(&xs, &ys, &SvmTrainConfig::default()).unwrap();
    for (x, &y) in xs.iter().zip(&ys) {
        assert_eq!(predict(&model, x).unwrap().0, y);
    }
}

#[test]
fn averaged_objective_does_not_increase_across_epochs() {
    let (pts, ys) = &svm_instances()[0];
    let xs = to_vectors(pts);
    let (_, trace) = train_traced(&xs, ys, &SvmTrainConfig::default(), true).unwrap();
    for w in trace.epoch_objectives.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{:?}", trace.epoch_objectives);
    }
}
