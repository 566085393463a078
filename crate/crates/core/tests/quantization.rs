use rand::Rng;

use dtsnn::codec::WordWidth;
use dtsnn::dataset::{encode_image, DEFAULT_THETA};
use dtsnn::network::classify;
use dtsnn::oracle::fuzz::case_rng;
use dtsnn::quant::{quantize_net, sweep, write_sweep_csv, FloatLayerSpec, FloatNetSpec};

const SIDE: usize = 6;
const REPS: u32 = 12;

/// Class c lights up rows 2c and 2c+1, plus background noise.
fn synthetic_set(n: usize, seed: u64) -> Vec<(Vec<i64>, usize)> {
    let mut rng = case_rng(seed, 0);
    (0..n)
        .map(|k| {
            let label = k % 3;
            let image: Vec<f64> = (0..SIDE * SIDE)
                .map(|p| {
                    let row = p / SIDE;
                    let lit = row / 2 == label;
                    let base = if lit { 0.8 } else { 0.1 };
                    (base + rng.gen_range(-0.1..0.2f64)).clamp(0.0, 1.0)
                })
                .collect();
            (encode_image(&image, DEFAULT_THETA).unwrap(), label)
        })
        .collect()
}

fn float_net(samples: &[(Vec<i64>, usize)]) -> FloatNetSpec {
    // class prototypes in amplitude space
    let mut weights = vec![0.0; 3 * SIDE * SIDE];
    let mut counts = [0.0f64; 3];
    for (q, label) in samples {
        counts[*label] += 1.0;
        for (p, &a) in q.iter().enumerate() {
            weights[label * SIDE * SIDE + p] += a as f64;
        }
    }
    for (c, row) in weights.chunks_mut(SIDE * SIDE).enumerate() {
        for w in row {
            *w = *w / counts[c] * 0.037 + 0.011;
        }
    }
    FloatNetSpec {
        width: WordWidth::new(8).unwrap(),
        repetitions: REPS,
        layers: vec![FloatLayerSpec {
            n_inputs: SIDE * SIDE,
            n_neurons: 3,
            decay_exp: 1,
            theta_high: 1.0,
            theta_low: None,
            weights,
        }],
    }
}

/// Real-valued reference: exact halving decay, no rounding anywhere.
fn float_counts(net: &FloatNetSpec, q: &[i64]) -> Vec<u64> {
    let layer = &net.layers[0];
    let mut potentials = vec![0.0f64; layer.n_neurons];
    let mut counts = vec![0u64; layer.n_neurons];
    for _ in 0..net.repetitions {
        for (n, p) in potentials.iter_mut().enumerate() {
            let drive: f64 = q
                .iter()
                .enumerate()
                .map(|(i, &a)| layer.weights[n * layer.n_inputs + i] * a as f64)
                .sum();
            *p = *p / 2.0 + drive;
            while *p >= layer.theta_high {
                *p -= layer.theta_high;
                counts[n] += 1;
            }
        }
    }
    counts
}

fn margin(counts: &[u64]) -> u64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted[0] - sorted[1]
}

#[test]
fn sixteen_bits_matches_float_reference() {
    let train = synthetic_set(30, 1);
    let net = float_net(&train);
    let test: Vec<(Vec<i64>, usize)> = synthetic_set(90, 2)
        .into_iter()
        .filter(|(q, _)| margin(&float_counts(&net, q)) >= 3)
        .collect();
    assert!(test.len() >= 30, "margin filter kept only {}", test.len());

    let float_correct = test
        .iter()
        .filter(|(q, label)| classify(&float_counts(&net, q)).unwrap() == *label)
        .count();
    let float_accuracy = float_correct as f64 / test.len() as f64;

    let rows = sweep(&net, &test, &[16]).unwrap();
    assert_eq!(rows[0].images, test.len());
    assert_eq!(rows[0].accuracy, float_accuracy);

    // per image, not just in aggregate
    let quantized = quantize_net(&net, 16).unwrap();
    for (q, _) in &test {
        let inputs = dtsnn::present_input(q, REPS, quantized.width).unwrap();
        let result = dtsnn::run_network(&quantized, &inputs).unwrap();
        assert_eq!(result.label, classify(&float_counts(&net, q)).unwrap());
    }
}

#[test]
fn sweep_table_rows() {
    let train = synthetic_set(30, 1);
    let net = float_net(&train);
    let test = synthetic_set(30, 3);
    let bits = [4, 5, 6, 7, 8, 9];
    let rows = sweep(&net, &test, &bits).unwrap();
    assert_eq!(rows.iter().map(|r| r.bits).collect::<Vec<_>>(), bits);
    for row in &rows {
        assert_eq!(row.images, 30);
        assert_eq!(row.errors, (30.0 * (1.0 - row.accuracy)).round() as usize);
    }
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &rows).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bits,accuracy,images,errors"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn quantized_thresholds_share_layer_scale() {
    let net = float_net(&synthetic_set(30, 1));
    for bits in 2..=16 {
        let q = quantize_net(&net, bits).unwrap();
        let layer = &q.layers[0];
        assert_eq!(layer.theta_high, layer.weight_scale);
        assert!(layer.weight_scale.count_ones() == 1);
        let max = (1i32 << (bits - 1)) - 1;
        assert!(layer.weights.iter().all(|w| w.abs() <= max));
    }
}
