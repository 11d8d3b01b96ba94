mod common;

use common::{dense_fd_error, gate_fd_error, model_case, model_fd_error};
use dcae::model::ReconLoss;
use dcae::numerics::Activation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn dense_layers_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for act in [Activation::Relu, Activation::Sigmoid, Activation::Identity] {
        for _ in 0..30 {
            let e = dense_fd_error(&mut rng, act);
            assert!(e < 1e-4, "{act:?}: relative error {e}");
        }
    }
}

#[test]
fn model_gradients_match_central_differences_for_reported_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let case = model_case(&mut rng, ReconLoss::CrossEntropy);
        let e = model_fd_error(&case);
        assert!(e < 1e-4, "relative error {e}");
    }
}

#[test]
fn model_gradients_match_central_differences_for_training_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let case = model_case(&mut rng, ReconLoss::Bce);
        let e = model_fd_error(&case);
        assert!(e < 1e-4, "relative error {e}");
    }
}

#[test]
fn gate_slope_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let e = gate_fd_error(&mut rng);
        assert!(e < 1e-5, "relative error {e}");
    }
}
