mod support;

use diffnet::{Adam, DenseNet, Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracle::{self, QuadLoss};

fn random_case(seed: u64) -> (DenseNet, Vec<Vec<f64>>, QuadLoss) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=6)];
    for _ in 1..depth {
        sizes.push(rng.random_range(1..=32));
    }
    sizes.push(rng.random_range(1..=4));
    let net = DenseNet::new(&sizes, &mut rng).unwrap();
    let batch = rng.random_range(1..=4);
    let inputs = (0..batch)
        .map(|_| (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let out = *sizes.last().unwrap();
    let loss = QuadLoss {
        c: (0..out).map(|_| rng.random_range(-1.0..1.0)).collect(),
        d: (0..out).map(|_| rng.random_range(0.1..2.0)).collect(),
    };
    (net, inputs, loss)
}

fn analytic(net: &DenseNet, inputs: &[Vec<f64>], loss: &QuadLoss) -> (Vec<f64>, Vec<Vec<f64>>) {
    let x = Matrix::from_rows(inputs);
    let tape = net.forward_batch(&x).unwrap();
    let out = tape.output();
    let d_out: Vec<Vec<f64>> = (0..out.rows())
        .map(|b| loss.output_grad(out.row(b), out.rows()))
        .collect();
    let (g, dx) = net.backward(&tape, &Matrix::from_rows(&d_out)).unwrap();
    (g, (0..dx.rows()).map(|b| dx.row(b).to_vec()).collect())
}

#[test]
fn forward_matches_reference_arithmetic() {
    for seed in 0..50 {
        let (net, inputs, _) = random_case(seed);
        for x in &inputs {
            let ours = net.forward(x).unwrap();
            let (reference, _) = oracle::forward(net.sizes(), net.params(), x);
            for (a, b) in ours.iter().zip(&reference) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    for seed in 100..200 {
        let (net, inputs, loss) = random_case(seed);
        let (g, dx) = analytic(&net, &inputs, &loss);
        let res = oracle::check(net.sizes(), net.params(), &inputs, &loss, &g, &dx, 1e-5);
        worst = worst.max(res.max_rel_error);
        checked += res.checked;
        skipped += res.skipped_at_kinks;
    }
    assert!(worst <= 1e-4, "max relative error {worst}");
    assert!(
        skipped * 100 < checked,
        "too many kink crossings: {skipped} of {checked}"
    );
}

#[test]
fn training_is_bit_reproducible() {
    let run = || {
        let (mut net, inputs, loss) = random_case(7);
        let mut opt = Adam::new(net.param_count());
        for _ in 0..50 {
            let (g, _) = analytic(&net, &inputs, &loss);
            opt.step(net.params_mut(), &g, 1e-2);
        }
        net
    };
    let (a, b) = (run(), run());
    assert!(a
        .params()
        .iter()
        .zip(b.params())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn checkpoint_round_trip_through_files() {
    let (net, _, _) = random_case(3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    diffnet::checkpoint::save(&net, "actor", &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let (back, label) = diffnet::checkpoint::load(&path).unwrap();
    assert_eq!(label, "actor");
    assert_eq!(back, net);
    diffnet::checkpoint::save(&back, "actor", &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    assert!(diffnet::checkpoint::load(&dir.path().join("missing.ckpt")).is_err());
}

proptest! {
    #[test]
    fn polyak_contracts_toward_online(
        target in prop::collection::vec(-10.0..10.0f64, 8),
        online in prop::collection::vec(-10.0..10.0f64, 8),
        tau in 0.0..=1.0f64,
    ) {
        let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let before = norm(&target, &online);
        let mut t = target.clone();
        diffnet::polyak_update(&mut t, &online, tau);
        let after = norm(&t, &online);
        prop_assert!((after - (1.0 - tau) * before).abs() <= 1e-12 * (1.0 + before));
    }
}
