//! Analytic BPTT gradients against central finite differences.

use tsfc::cells::{ModelKind, ModelState};
use tsfc::numkit::{Matrix, Rng};

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Loss recomputed from forward passes only.
fn mse(model: &ModelState, inputs: &Matrix, targets: &Matrix) -> f64 {
    let y = model.predict(inputs).unwrap();
    let n = y.len() as f64;
    y.as_slice().iter().zip(targets.as_slice()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

fn worst_relative_error(kind: ModelKind, seed: u64, batch: usize) -> (f64, String) {
    let mut rng = Rng::new(seed);
    let mut model = ModelState::new(kind, 4, 5, 2, &mut rng).unwrap();
    // non-zero biases so every path is exercised
    for p in model.params_mut() {
        if p.cols() == 1 {
            let noise = rng.uniform(-0.5, 0.5, p.rows(), 1).unwrap();
            p.add_scaled(&noise, 1.0).unwrap();
        }
    }
    let inputs = rng.uniform(0.0, 1.0, 5, batch).unwrap();
    let targets = rng.uniform(0.0, 1.0, 2, batch).unwrap();
    model.backward_batch(&inputs, &targets, false).unwrap();
    let analytic: Vec<Matrix> = model.grads().into_iter().cloned().collect();
    let names = model.param_names();

    let mut worst = (0.0, String::new());
    for (idx, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let orig = model.params()[idx].as_slice()[k];
            model.params_mut()[idx].as_mut_slice()[k] = orig + EPS;
            let up = mse(&model, &inputs, &targets);
            model.params_mut()[idx].as_mut_slice()[k] = orig - EPS;
            let down = mse(&model, &inputs, &targets);
            model.params_mut()[idx].as_mut_slice()[k] = orig;

            let numeric = (up - down) / (2.0 * EPS);
            let a = grad.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > worst.0 {
                worst = (rel, format!("{}[{k}]: analytic {a:e}, numeric {numeric:e}", names[idx]));
            }
        }
    }
    worst
}

#[test]
fn lstm_gradients_match_finite_differences() {
    for seed in 0..5 {
        let (err, at) = worst_relative_error(ModelKind::Lstm, seed, 1);
        assert!(err <= TOL, "seed {seed}: {err:e} at {at}");
    }
}

#[test]
fn gru_gradients_match_finite_differences() {
    for seed in 0..5 {
        let (err, at) = worst_relative_error(ModelKind::Gru, seed, 1);
        assert!(err <= TOL, "seed {seed}: {err:e} at {at}");
    }
}

#[test]
fn batched_gradients_match_finite_differences() {
    for kind in [ModelKind::Lstm, ModelKind::Gru] {
        let (err, at) = worst_relative_error(kind, 100, 3);
        assert!(err <= TOL, "{kind}: {err:e} at {at}");
    }
}

#[test]
fn hidden_states_stay_bounded() {
    let mut rng = Rng::new(8);
    for kind in [ModelKind::Lstm, ModelKind::Gru] {
        for _ in 0..20 {
            let mut model = ModelState::new(kind, 6, 10, 1, &mut rng).unwrap();
            for p in model.params_mut() {
                p.scale_in_place(8.0);
            }
            let inputs = rng.uniform(-50.0, 50.0, 10, 4).unwrap();
            let h = model.cell.final_hidden(&inputs).unwrap();
            match kind {
                ModelKind::Lstm => assert!(h.as_slice().iter().all(|v| v.abs() < 1.0)),
                ModelKind::Gru => assert!(h.as_slice().iter().all(|v| v.abs() <= 1.0)),
            }
        }
    }
}

#[test]
fn forward_is_bit_reproducible() {
    let mut rng = Rng::new(31);
    for kind in [ModelKind::Lstm, ModelKind::Gru] {
        let model = ModelState::new(kind, 5, 7, 3, &mut rng).unwrap();
        let inputs = rng.uniform(0.0, 1.0, 7, 6).unwrap();
        let a = model.predict(&inputs).unwrap();
        let b = model.clone().predict(&inputs).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
