use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::features::FeatureKind;

fn binding() -> FeatureBinding {
    FeatureBinding::backend("mock", FeatureKind::Fe)
}

fn random_feats(rng: &mut ChaCha8Rng, t: usize, f: usize) -> FeatureMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|_| (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    FeatureMatrix::from_rows(&rows, FeatureKind::Fe).unwrap()
}

/// Reference counts from a PyTorch LSTM(bidirectional) stack plus the pooling head.
#[test]
fn parameter_counts() {
    let count = |f| ModelConfig::for_features(f).unwrap().parameter_count();
    assert_eq!(count(1024), 14_701_570);
    assert_eq!(count(257), 923_906);
    assert_eq!(count(513), 3_682_818);
    assert!(count(512) < count(513) && count(513) < count(768));
}

#[test]
fn odd_feature_dim_floors_hidden() {
    assert_eq!(ModelConfig::for_features(513).unwrap().blstm_hidden, 256);
    assert_eq!(ModelConfig::for_features(1).unwrap().blstm_hidden, 1);
    assert!(ModelConfig::for_features(0).is_err());
}

#[test]
fn same_seed_same_params() {
    let a = build_model::<f64>(8, binding(), 3).unwrap();
    let b = build_model::<f64>(8, binding(), 3).unwrap();
    let c = build_model::<f64>(8, binding(), 4).unwrap();
    assert_eq!(a.params(), b.params());
    assert_ne!(a.params(), c.params());
}

#[test]
fn output_in_open_unit_interval() {
    let model = build_model::<f64>(8, binding(), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in [1, 2, 7, 20] {
        let y = model.forward_channel(&random_feats(&mut rng, t, 8)).unwrap();
        assert!(y > 0.0 && y < 1.0);
    }
    let huge = random_feats(&mut rng, 5, 8).values().map(|v| v * 1e6);
    let huge = FeatureMatrix::with_uniform_times(huge, 0.0, 1.0, FeatureKind::Fe, "x", Channel::Left).unwrap();
    let y = model.forward_channel(&huge).unwrap();
    assert!(y > 0.0 && y < 1.0);
}

#[test]
fn attention_weights_normalised() {
    let model = build_model::<f64>(6, binding(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pass = model.forward_cached(&random_feats(&mut rng, 9, 6)).unwrap();
    let s: f64 = pass.attention().iter().sum();
    assert!((s - 1.0).abs() < 1e-12);
}

#[test]
fn dim_mismatch_is_error() {
    let model = build_model::<f64>(8, binding(), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        model.forward_channel(&random_feats(&mut rng, 3, 7)),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn gradient_matches_central_difference() {
    let mut model = build_model::<f64>(8, binding(), 5).unwrap();
    assert_eq!(model.config().blstm_hidden, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_feats(&mut rng, 6, 8);
    let pass = model.forward_cached(&x).unwrap();
    let mut grad = vec![0.0; model.parameter_count()];
    model.backward(&pass, 1.0, &mut grad);
    let step = 1e-5;
    for _ in 0..50 {
        let k = rng.gen_range(0..model.parameter_count());
        let orig = model.params()[k];
        model.params_mut()[k] = orig + step;
        let up = model.forward_channel(&x).unwrap();
        model.params_mut()[k] = orig - step;
        let down = model.forward_channel(&x).unwrap();
        model.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = grad[k].abs().max(numeric.abs()).max(1e-8);
        assert!(
            (grad[k] - numeric).abs() / denom < 1e-4,
            "param {k}: analytic {} numeric {numeric}",
            grad[k]
        );
    }
}

#[test]
fn better_ear_is_max() {
    let p = Prediction::from_channels("u", 0.4, Some(0.7));
    assert_eq!(p.i_hat, 0.7);
    let m = Prediction::from_channels("u", 0.3, None);
    assert_eq!(m.i_hat, 0.3);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let mut model = build_model::<f32>(6, binding(), 8).unwrap();
    model.set_train_seed(Some(77));
    save_checkpoint(&model, &path).unwrap();
    let back: PredictorModel<f32> = load_checkpoint(&path).unwrap();
    assert_eq!(back, model);

    let feats = FeatureMatrix::<f32>::from_rows(&[vec![0.1; 6], vec![-0.3; 6]], FeatureKind::Fe).unwrap();
    assert_eq!(
        model.forward_channel(&feats).unwrap().to_bits(),
        back.forward_channel(&feats).unwrap().to_bits()
    );

    let wide: PredictorModel<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(wide.params()[0], model.params()[0] as f64);
}

#[test]
fn corrupt_checkpoint_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let model = build_model::<f64>(4, binding(), 1).unwrap();
    save_checkpoint(&model, &path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint(_))));
    std::fs::write(&path, b"garbage").unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path), Err(Error::Checkpoint(_))));
}
