#![allow(dead_code)]

use mlpdm::data::{Dataset, FeatureScale, NUM_CLASSES};
use mlpdm::linalg::{DenseMatrix, RngState};
use mlpdm::loss::{add_penalty_grad, cross_entropy_softmax, penalty_value, PenaltyConfig};
use mlpdm::nn::{Layer, Mode, Network};

/// Triple loop, `i`, `j`, then `k`.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues in
/// descending order with unit eigenvectors as rows.
pub fn jacobi_eigen(m: &DenseMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// A row is kept when fewer than `k` rows of its class beat it, where a row
/// beats another with a smaller score or an equal score and smaller index.
pub fn brute_force_keep(scores: &[f64], labels: &[usize], k: usize) -> Vec<usize> {
    (0..scores.len())
        .filter(|&i| {
            let better = (0..scores.len())
                .filter(|&j| labels[j] == labels[i] && (scores[j] < scores[i] || (scores[j] == scores[i] && j < i)))
                .count();
            better < k
        })
        .collect()
}

/// Per-class sums divided by counts, accumulated row by row.
pub fn naive_class_means(x: &DenseMatrix, y: &[usize], classes: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; x.cols()]; classes];
    let mut counts = vec![0usize; classes];
    for i in 0..x.rows() {
        counts[y[i]] += 1;
        for j in 0..x.cols() {
            sums[y[i]][j] += x.get(i, j);
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|v| v / c as f64).collect())
        .collect()
}

/// Fraction of rows whose first maximal logit is the label, one sample at a time.
pub fn accuracy_loop(net: &Network, data: &Dataset) -> f64 {
    let mut correct = 0;
    for i in 0..data.len() {
        let logits = net.predict(&DenseMatrix::row_vector(data.features.row(i))).unwrap();
        let row = logits.row(0);
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == data.labels[i] {
            correct += 1;
        }
    }
    correct as f64 / data.len() as f64
}

/// Small random classification problem around a freshly initialised network.
pub struct Instance {
    pub net: Network,
    pub x: DenseMatrix,
    pub y: Vec<usize>,
    pub penalty: PenaltyConfig,
}

pub fn random_instance(seed: u64, penalty: PenaltyConfig, dropout: &[f64]) -> Instance {
    let mut rng = RngState::new(seed);
    let depth = 1 + (rng.next_u64() % 3) as usize;
    let mut widths = vec![2 + (rng.next_u64() % 5) as usize];
    for _ in 0..depth {
        widths.push(2 + (rng.next_u64() % 6) as usize);
    }
    widths.push(2 + (rng.next_u64() % 4) as usize);
    let hidden = widths.len() - 2;
    let keep: Vec<f64> = dropout.iter().copied().take(hidden).collect();
    let mut net = Network::mlp(&widths, &keep, &mut rng).unwrap();
    // non-zero biases keep pre-activations off the ReLU kink
    for (i, p) in net.params_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            p.iter_mut().for_each(|b| *b = rng.uniform(-0.5, 0.5));
        }
    }
    let n = 2 + (rng.next_u64() % 5) as usize;
    let x = rng.sample_uniform(n, widths[0], -1.5, 1.5).unwrap();
    let classes = widths[widths.len() - 1];
    let y = (0..n).map(|_| (rng.next_u64() % classes as u64) as usize).collect();
    Instance { net, x, y, penalty }
}

/// Training-mode loss with the dropout masks drawn from `RngState::new(mask_seed)`.
pub fn train_loss(net: &Network, inst: &Instance, mask_seed: u64) -> f64 {
    let mut net = net.clone();
    let logits = net.forward(&inst.x, Mode::Train, &mut RngState::new(mask_seed)).unwrap();
    net.clear_caches();
    let (data, _) = cross_entropy_softmax(&logits, &inst.y).unwrap();
    data + penalty_value(&net.weights(), &inst.penalty)
}

pub fn train_grads(inst: &Instance, mask_seed: u64) -> Vec<Vec<f64>> {
    let mut net = inst.net.clone();
    let logits = net.forward(&inst.x, Mode::Train, &mut RngState::new(mask_seed)).unwrap();
    let (_, g) = cross_entropy_softmax(&logits, &inst.y).unwrap();
    let mut grads = net.backward(&g).unwrap();
    add_penalty_grad(&net.weights(), &mut grads.weights, &inst.penalty).unwrap();
    grads.as_slices().into_iter().map(<[f64]>::to_vec).collect()
}

/// Evaluation-mode loss: dropout scales by its keep probability.
pub fn eval_loss(net: &Network, inst: &Instance) -> f64 {
    let logits = net.predict(&inst.x).unwrap();
    let (data, _) = cross_entropy_softmax(&logits, &inst.y).unwrap();
    data + penalty_value(&net.weights(), &inst.penalty)
}

/// Gradient of [`eval_loss`]: affine and ReLU layers run their own backward
/// passes, evaluation dropout contributes its constant factor.
pub fn eval_grads(inst: &Instance) -> Vec<Vec<f64>> {
    let mut net = inst.net.clone();
    let mut h = inst.x.clone();
    let mut rng = RngState::new(0);
    for layer in net.layers_mut() {
        h = match layer {
            Layer::Affine(a) => a.forward(&h, Mode::Train).unwrap(),
            Layer::Relu(r) => r.forward(&h, Mode::Train),
            Layer::Dropout(d) => {
                d.set_mode(Mode::Eval);
                d.forward(&h, &mut rng).unwrap()
            }
        };
    }
    let (_, mut g) = cross_entropy_softmax(&h, &inst.y).unwrap();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for layer in net.layers_mut().iter_mut().rev() {
        match layer {
            Layer::Affine(a) => {
                let out = a.backward(&g, true).unwrap();
                weights.push(out.weights);
                biases.push(out.biases);
                g = out.input.unwrap();
            }
            Layer::Relu(r) => g = r.backward(&g).unwrap(),
            Layer::Dropout(d) => {
                let p = d.keep_prob();
                g = g.map(|v| p * v);
            }
        }
    }
    weights.reverse();
    biases.reverse();
    add_penalty_grad(&net.weights(), &mut weights, &inst.penalty).unwrap();
    weights
        .iter()
        .zip(&biases)
        .flat_map(|(w, b)| [w.as_slice().to_vec(), b.clone()])
        .collect()
}

/// Five-point central differences of `f` with respect to every parameter,
/// in `params_mut` order.
pub fn numeric_grads(net: &Network, f: impl Fn(&Network) -> f64) -> Vec<Vec<f64>> {
    let h = 1e-4;
    let mut probe = net.clone();
    let shapes: Vec<usize> = probe.params_mut().iter().map(|p| p.len()).collect();
    let mut out = Vec::new();
    for (pi, &len) in shapes.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (j, gj) in g.iter_mut().enumerate() {
            let original = probe.params_mut()[pi][j];
            let mut at = |delta: f64| {
                probe.params_mut()[pi][j] = original + delta;
                f(&probe)
            };
            let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            probe.params_mut()[pi][j] = original;
            *gj = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        }
        out.push(g);
    }
    out
}

/// Largest `|a - b| / max(|a|, |b|, 1e-4)` over all entries; the floor keeps
/// finite-difference roundoff on vanishing gradients from dominating.
pub fn max_relative_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(&u, &v)| (u - v).abs() / u.abs().max(v.abs()).max(1e-4))
        })
        .fold(0.0, f64::max)
}

/// Noisy copies of 47 fixed prototypes in `[0.2, 0.8]^d`, clipped to [0, 1].
/// Prototypes depend only on `d`, so sets drawn with different seeds share
/// their classes.
pub fn synthetic_digits(n: usize, d: usize, noise: f64, seed: u64) -> Dataset {
    let mut proto_rng = RngState::new(d as u64);
    let protos: Vec<Vec<f64>> = (0..NUM_CLASSES)
        .map(|_| (0..d).map(|_| proto_rng.uniform(0.2, 0.8)).collect())
        .collect();
    let mut rng = RngState::new(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % NUM_CLASSES;
        for &p in &protos[c] {
            data.push((p + rng.uniform(-noise, noise)).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    let ds = Dataset::new(DenseMatrix::from_vec(n, d, data).unwrap(), labels, "synthetic", FeatureScale::Unit).unwrap();
    ds.shuffle(seed ^ 0x5eed)
}
