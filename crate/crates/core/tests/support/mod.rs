//! Shared test oracles. Nothing here calls into the crate's own gradient or
//! metric code; each oracle recomputes its quantity from first principles.

#![allow(dead_code)]

use hybridscreen::datamodel::Label;
use hybridscreen::neural::{InputShape, LayerSpec, NetConfig, Network, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central difference `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for each listed coordinate.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], coords: &[usize], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps near-zero components
/// from turning round-off into a large ratio.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n, floor))
        .fold(0.0, f64::max)
}

/// Mean `ln(1 + e^{z}) − y·z` over rows, written out directly.
pub fn bce_reference(x: &[f64], d: usize, y: &[f64], w: &[f64], b: f64) -> f64 {
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        let z: f64 = b + (0..d).map(|j| x[i * d + j] * w[j]).sum::<f64>();
        let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        total += sp - y[i] * z;
    }
    total / n as f64
}

/// Mean hinge `max(0, 1 − s·(w·x + b))` with `s ∈ {−1, +1}`, written out directly.
pub fn hinge_reference(x: &[f64], d: usize, s: &[f64], w: &[f64], b: f64) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        let m: f64 = b + (0..d).map(|j| x[i * d + j] * w[j]).sum::<f64>();
        total += (1.0 - s[i] * m).max(0.0);
    }
    total / n as f64
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Label> {
    let mut labels: Vec<Label> = (0..n)
        .map(|_| if rng.random_bool(0.5) { Label::Asd } else { Label::NonAsd })
        .collect();
    // Both classes present.
    labels[0] = Label::Asd;
    if n > 1 {
        labels[1] = Label::NonAsd;
    }
    labels
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, shape: InputShape) -> Tensor4<f64> {
    let len = n * shape.height * shape.width * shape.channels;
    let data = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
    Tensor4::new((n, shape.height, shape.width, shape.channels), data).unwrap()
}

/// Tiny net: 8×8×1 input, one dense block with two layers of growth 2.
pub fn tiny_net_config(seed: u64) -> NetConfig {
    let mut c = NetConfig::with_layers(
        InputShape {
            height: 8,
            width: 8,
            channels: 1,
        },
        vec![
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 3,
                stride: 1,
                padding: 1,
            },
            LayerSpec::DenseBlock {
                layers: 2,
                growth_rate: 2,
            },
            LayerSpec::GlobalAvgPool,
            LayerSpec::FullyConnected { out: 1 },
            LayerSpec::SigmoidHead,
        ],
    );
    c.init_seed = seed;
    c
}

/// Worst relative error between backprop and central differences of the mean
/// loss, over every parameter of `net`.
pub fn network_gradient_error(net: &Network<f64>, x: &Tensor4<f64>, labels: &[Label], h: f64, floor: f64) -> (f64, usize) {
    let (_, grads) = net.backward(x, labels).unwrap();
    let mut probe = net.clone();
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for (pi, g) in grads.iter().enumerate() {
        for k in 0..g.len() {
            let orig = probe.params()[pi].data[k];
            probe.params_mut()[pi].data[k] = orig + h;
            let up = probe.loss(x, labels).unwrap();
            probe.params_mut()[pi].data[k] = orig - h;
            let down = probe.loss(x, labels).unwrap();
            probe.params_mut()[pi].data[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(g[k], numeric, floor));
            checked += 1;
        }
    }
    (worst, checked)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random linear-model problem: `n × d` design in [0, 1], labels with both
/// classes, parameters in [−2, 2].
pub struct LinearProblem {
    pub x: Vec<f64>,
    pub d: usize,
    pub labels: Vec<Label>,
    pub w: Vec<f64>,
    pub b: f64,
}

pub fn linear_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> LinearProblem {
    LinearProblem {
        x: (0..n * d).map(|_| rng.random_range(0.0..1.0)).collect(),
        d,
        labels: random_labels(rng, n),
        w: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        b: rng.random_range(-2.0..2.0),
    }
}

impl LinearProblem {
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| if l.is_asd() { 1.0 } else { 0.0 }).collect()
    }

    pub fn signs(&self) -> Vec<f64> {
        self.labels.iter().map(|l| if l.is_asd() { 1.0 } else { -1.0 }).collect()
    }

    /// Smallest distance of any `y·(w·x + b)` from the hinge kink at 1.
    pub fn kink_distance(&self) -> f64 {
        let s = self.signs();
        (0..s.len())
            .map(|i| {
                let m: f64 = self.b + (0..self.d).map(|j| self.x[i * self.d + j] * self.w[j]).sum::<f64>();
                (s[i] * m - 1.0).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `(w, b)` packed as one parameter vector.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.w.clone();
        t.push(self.b);
        t
    }
}

/// Worst relative error of the crate's BCE gradient against central
/// differences of [`bce_reference`] plus the L2 term.
pub fn logreg_gradient_error(p: &LinearProblem, l2: f64, h: f64, floor: f64) -> f64 {
    use hybridscreen::tabular::{logreg_objective, DesignMatrix};
    let data = DesignMatrix::new(p.x.clone(), p.d, p.labels.clone()).unwrap();
    let g = logreg_objective(&p.w, p.b, &data, l2);
    let y = p.targets();
    let d = p.d;
    let f = |t: &[f64]| bce_reference(&p.x, d, &y, &t[..d], t[d]) + 0.5 * l2 * t[..d].iter().map(|v| v * v).sum::<f64>();
    let theta = p.theta();
    let value_err = rel_err(g.value, f(&theta), floor);
    let coords: Vec<usize> = (0..=d).collect();
    let numeric = central_diff(f, &theta, &coords, h);
    let mut analytic = g.grad_w.clone();
    analytic.push(g.grad_b);
    value_err.max(max_rel_err(&analytic, &numeric, floor))
}

/// As [`logreg_gradient_error`] for the hinge objective; the caller keeps
/// every margin well away from the kink.
pub fn svm_gradient_error(p: &LinearProblem, lambda: f64, h: f64, floor: f64) -> f64 {
    use hybridscreen::tabular::{svm_objective, DesignMatrix};
    let data = DesignMatrix::new(p.x.clone(), p.d, p.labels.clone()).unwrap();
    let g = svm_objective(&p.w, p.b, &data, lambda);
    let s = p.signs();
    let d = p.d;
    let f = |t: &[f64]| hinge_reference(&p.x, d, &s, &t[..d], t[d]) + 0.5 * lambda * t[..d].iter().map(|v| v * v).sum::<f64>();
    let theta = p.theta();
    let value_err = rel_err(g.value, f(&theta), floor);
    let coords: Vec<usize> = (0..=d).collect();
    let numeric = central_diff(f, &theta, &coords, h);
    let mut analytic = g.grad_w.clone();
    analytic.push(g.grad_b);
    value_err.max(max_rel_err(&analytic, &numeric, floor))
}

/// Draws problems until every margin sits at least `gap` from the kink.
pub fn svm_problem_off_kink(rng: &mut ChaCha8Rng, n: usize, d: usize, gap: f64) -> LinearProblem {
    loop {
        let p = linear_problem(rng, n, d);
        if p.kink_distance() > gap {
            return p;
        }
    }
}
