use pixattack_core::image::{Image, Shape};
use pixattack_core::oracle::{CountingOracle, Oracle};
use pixattack_core::toy::{toy_proxy_spec, ConvGap, LinearSoftmax, ToyModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct transcription of conv → ReLU → mean → linear → softmax with
/// explicit loops and padding checks, sharing nothing with the library.
fn reference_forward(m: &ConvGap, img: &Image) -> Vec<f64> {
    let s = m.spec();
    let (h, w) = (img.height() as i64, img.width() as i64);
    let stride = s.stride as i64;
    let half = (s.kernel / 2) as i64;
    let gh = (h + stride - 1) / stride;
    let gw = (w + stride - 1) / stride;
    let mut pooled = vec![0.0; s.filters];
    for f in 0..s.filters {
        let mut total = 0.0;
        for gy in 0..gh {
            for gx in 0..gw {
                let mut z = m.filter_bias()[f];
                for c in 0..s.in_channels {
                    for ky in 0..s.kernel as i64 {
                        for kx in 0..s.kernel as i64 {
                            let y = gy * stride + ky - half;
                            let x = gx * stride + kx - half;
                            let pixel = if y >= 0 && y < h && x >= 0 && x < w {
                                img.get(y as usize, x as usize, c) as f64 / 255.0
                            } else {
                                0.0
                            };
                            let wi = ((f * s.in_channels + c) * s.kernel + ky as usize) * s.kernel + kx as usize;
                            z += m.filter_weights()[wi] * pixel;
                        }
                    }
                }
                total += if z > 0.0 { z } else { 0.0 };
            }
        }
        pooled[f] = total / (gh * gw) as f64;
    }
    let logits: Vec<f64> = (0..s.classes)
        .map(|c| m.class_bias()[c] + (0..s.filters).map(|f| m.class_weights()[f * s.classes + c] * pooled[f]).sum::<f64>())
        .collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    logits.iter().map(|l| l.exp() / z).collect()
}

#[test]
fn conv_gap_matches_reference_forward_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (seed, (h, w)) in [(1u64, (32, 32)), (2, (9, 14)), (3, (5, 3))] {
        let model = ConvGap::seeded(toy_proxy_spec(3, 10), seed).unwrap();
        let img = Image::new(h, w, 3, (0..h * w * 3).map(|_| rng.random()).collect()).unwrap();
        let got = model.classify(&img).unwrap();
        let want = reference_forward(&model, &img);
        for (a, b) in got.probabilities().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn toy_models_are_pure() {
    let shape = Shape::new(8, 8, 3);
    let model = ToyModel::Linear(LinearSoftmax::seeded(shape, 4, 1.0, 3).unwrap());
    let img = Image::filled(8, 8, 3, 77).unwrap();
    assert_eq!(model.classify(&img).unwrap(), model.classify(&img).unwrap());
    let again = ToyModel::Linear(LinearSoftmax::seeded(shape, 4, 1.0, 3).unwrap());
    assert_eq!(model, again);
}

#[test]
fn counting_wrapper_counts_under_concurrency() {
    let model = LinearSoftmax::seeded(Shape::new(4, 4, 1), 3, 1.0, 0).unwrap();
    let counting = CountingOracle::new(model);
    let img = Image::filled(4, 4, 1, 1).unwrap();
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| {
                for _ in 0..250 {
                    counting.classify(&img).unwrap();
                }
            });
        }
    });
    assert_eq!(counting.queries(), 2000);
    let _ = counting.classify(&Image::filled(5, 4, 1, 1).unwrap());
    assert_eq!(counting.queries(), 2001);
}
