mod common;

use common::{eval_grads, eval_loss, max_relative_error, numeric_grads, random_instance, train_grads, train_loss};
use mlpdm::linalg::{DenseMatrix, RngState};
use mlpdm::loss::PenaltyConfig;
use mlpdm::nn::{AffineLayer, DropoutLayer, Mode, ReluLayer};

const TOL: f64 = 1e-6;
const INSTANCES: u64 = 25;

fn five_point(values: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-4;
    let mut probe = values.to_vec();
    (0..values.len())
        .map(|i| {
            let mut at = |d: f64| {
                probe[i] = values[i] + d;
                f(&probe)
            };
            let g = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            probe[i] = values[i];
            g
        })
        .collect()
}

fn dot(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

#[test]
fn affine_layer_all_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = RngState::new(seed);
        let (n, fi, fo) = (3, 4, 5);
        let layer = AffineLayer::glorot(fi, fo, &mut rng).unwrap();
        let x = rng.sample_uniform(n, fi, -1.0, 1.0).unwrap();
        let r = rng.sample_uniform(n, fo, -1.0, 1.0).unwrap();
        let loss = |l: &AffineLayer, x: &DenseMatrix| dot(&l.predict(x).unwrap(), &r);

        let mut l = layer.clone();
        l.forward(&x, Mode::Train).unwrap();
        let g = l.backward(&r, true).unwrap();

        let num_w = five_point(layer.weights.as_slice(), |w| {
            let mut l = layer.clone();
            l.weights.as_mut_slice().copy_from_slice(w);
            loss(&l, &x)
        });
        let num_b = five_point(&layer.biases, |b| {
            let mut l = layer.clone();
            l.biases.copy_from_slice(b);
            loss(&l, &x)
        });
        let num_x = five_point(x.as_slice(), |v| loss(&layer, &DenseMatrix::from_vec(n, fi, v.to_vec()).unwrap()));
        let err = max_relative_error(
            &[g.weights.as_slice().to_vec(), g.biases.clone(), g.input.unwrap().as_slice().to_vec()],
            &[num_w, num_b, num_x],
        );
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn relu_layer_input_gradient() {
    for seed in 0..INSTANCES {
        let mut rng = RngState::new(seed);
        // keep inputs away from the kink
        let x = rng
            .sample_uniform(4, 6, -1.0, 1.0)
            .unwrap()
            .map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
        let r = rng.sample_uniform(4, 6, -1.0, 1.0).unwrap();
        let mut relu = ReluLayer::new();
        relu.forward(&x, Mode::Train);
        let g = relu.backward(&r).unwrap();
        let num = five_point(x.as_slice(), |v| {
            dot(&ReluLayer::new().predict(&DenseMatrix::from_vec(4, 6, v.to_vec()).unwrap()), &r)
        });
        let err = max_relative_error(&[g.as_slice().to_vec()], &[num]);
        assert!(err < TOL, "seed {seed}: {err}");
    }
}

#[test]
fn dropout_layer_gradients() {
    for seed in 0..INSTANCES {
        let mut rng = RngState::new(seed);
        let p = rng.uniform(0.2, 1.0);
        let x = rng.sample_uniform(3, 7, -1.0, 1.0).unwrap();
        let r = rng.sample_uniform(3, 7, -1.0, 1.0).unwrap();

        let mut layer = DropoutLayer::new(p).unwrap();
        layer.forward(&x, &mut RngState::new(seed + 100)).unwrap();
        let g = layer.backward(&r).unwrap();
        let num = five_point(x.as_slice(), |v| {
            let mut l = DropoutLayer::new(p).unwrap();
            let out = l
                .forward(&DenseMatrix::from_vec(3, 7, v.to_vec()).unwrap(), &mut RngState::new(seed + 100))
                .unwrap();
            dot(&out, &r)
        });
        assert!(max_relative_error(&[g.as_slice().to_vec()], &[num]) < TOL);

        // evaluation mode is the linear map x -> p x
        let eval = DropoutLayer::new(p).unwrap();
        let num = five_point(x.as_slice(), |v| dot(&eval.predict(&DenseMatrix::from_vec(3, 7, v.to_vec()).unwrap()), &r));
        let expect = r.map(|v| p * v);
        assert!(max_relative_error(&[expect.as_slice().to_vec()], &[num]) < TOL);
    }
}

fn check_network(penalty: PenaltyConfig, dropout: &[f64], label: &str) {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let inst = random_instance(seed, penalty, dropout);
        let mask_seed = seed * 7 + 1;
        let analytic = train_grads(&inst, mask_seed);
        let numeric = numeric_grads(&inst.net, |net| train_loss(net, &inst, mask_seed));
        let err = max_relative_error(&analytic, &numeric);
        worst = worst.max(err);
        assert!(err < TOL, "{label} seed {seed}: relative error {err}");
    }
    println!("{label}: worst relative error {worst:.3e} over {INSTANCES} instances");
}

#[test]
fn network_plain() {
    check_network(PenaltyConfig::none(), &[], "plain");
}

#[test]
fn network_l1() {
    check_network(PenaltyConfig::l1(0.01), &[], "l1");
}

#[test]
fn network_l2() {
    check_network(PenaltyConfig::l2(0.05), &[], "l2");
}

#[test]
fn network_dropout_train_mask() {
    check_network(PenaltyConfig::l1(0.003), &[0.6, 0.8, 0.5], "dropout-train");
}

#[test]
fn network_dropout_eval() {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let inst = random_instance(seed, PenaltyConfig::l2(0.01), &[0.75, 0.5, 0.9]);
        let analytic = eval_grads(&inst);
        let numeric = numeric_grads(&inst.net, |net| eval_loss(net, &inst));
        let err = max_relative_error(&analytic, &numeric);
        worst = worst.max(err);
        assert!(err < TOL, "seed {seed}: relative error {err}");
    }
    println!("dropout-eval: worst relative error {worst:.3e}");
}
