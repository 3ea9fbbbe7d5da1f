//! Layer-level contracts: hand-computed forward examples and
//! finite-difference verification of every backward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use scenetext::nn::activations::{
    relu, relu_backward, sigmoid, sigmoid_backward, softmax, softmax_backward,
};
use scenetext::nn::gradcheck::finite_diff_check;
use scenetext::nn::lstm::{LstmCell, LstmGrads};
use scenetext::nn::pool::MaxPool2d;
use scenetext::nn::upsample::{upsample2x_backward, upsample2x_forward};
use scenetext::nn::{Conv2d, Linear};
use scenetext::rng::substream;
use scenetext::Tensor;

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn conv_identity_kernel_passes_input_through() {
    let conv = Conv2d::new(
        Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap(),
        Tensor::zeros(&[1]),
        1,
        0,
    )
    .unwrap();
    let mut rng = substream(1, "conv-identity");
    let x = rand_tensor(&[1, 5, 7], &mut rng);
    assert_eq!(conv.forward(&x).unwrap(), x);
}

#[test]
fn conv_all_ones_kernel_sums_constant_patches() {
    let conv = Conv2d::new(
        Tensor::new(vec![1, 1, 2, 2], vec![1.0; 4]).unwrap(),
        Tensor::zeros(&[1]),
        1,
        0,
    )
    .unwrap();
    let v = 0.37f64;
    let x = Tensor::full(&[1, 6, 6], v);
    let y = conv.forward(&x).unwrap();
    assert_eq!(y.shape(), &[1, 5, 5]);
    for &o in y.data() {
        assert!((o - 4.0 * v).abs() < 1e-15);
    }
}

#[test]
fn conv_same_padding_shape() {
    let mut rng = substream(2, "conv-shape");
    let conv = Conv2d::new(
        rand_tensor(&[3, 2, 3, 3], &mut rng),
        rand_tensor(&[3], &mut rng),
        1,
        1,
    )
    .unwrap();
    let x = rand_tensor(&[2, 8, 8], &mut rng);
    assert_eq!(conv.forward(&x).unwrap().shape(), &[3, 8, 8]);
}

#[test]
fn conv_rejects_mismatched_input() {
    let mut rng = substream(3, "conv-reject");
    let conv = Conv2d::new(
        rand_tensor(&[1, 2, 3, 3], &mut rng),
        Tensor::zeros(&[1]),
        1,
        0,
    )
    .unwrap();
    // Wrong channel count and kernel larger than input both fail.
    assert!(conv.forward(&rand_tensor(&[1, 8, 8], &mut rng)).is_err());
    assert!(conv.forward(&rand_tensor(&[2, 2, 2], &mut rng)).is_err());
}

#[test]
fn lstm_zero_params_map_any_input_to_zero_state() {
    let cell = LstmCell::new(
        Tensor::zeros(&[4 * 8, 4]),
        Tensor::zeros(&[4 * 8, 8]),
        Tensor::zeros(&[4 * 8]),
    )
    .unwrap();
    let mut rng = substream(4, "lstm-zero");
    let x = rand_tensor(&[4], &mut rng);
    let h0 = Tensor::zeros(&[8]);
    let c0 = Tensor::zeros(&[8]);
    let (h, c) = cell.step(&x, &h0, &c0).unwrap();
    assert!(h.data().iter().all(|&v| v == 0.0));
    assert!(c.data().iter().all(|&v| v == 0.0));
    assert_eq!(h.shape(), &[8]);
    assert_eq!(c.shape(), &[8]);
}

#[test]
fn lstm_saturated_gates_carry_cell_state() {
    // Forget-gate bias +20, input-gate bias -20: c stays within 1e-6 of
    // c_prev.
    let hd = 6;
    let mut bias = Tensor::zeros(&[4 * hd]);
    for k in 0..hd {
        bias.data_mut()[k] = -20.0; // input gate
        bias.data_mut()[hd + k] = 20.0; // forget gate
    }
    let cell: LstmCell<f64> = LstmCell::new(
        Tensor::zeros(&[4 * hd, 3]),
        Tensor::zeros(&[4 * hd, hd]),
        bias,
    )
    .unwrap();
    let mut rng = substream(5, "lstm-sat");
    let x = rand_tensor(&[3], &mut rng);
    let h0 = rand_tensor(&[hd], &mut rng);
    let c0 = rand_tensor(&[hd], &mut rng);
    let (_, c) = cell.step(&x, &h0, &c0).unwrap();
    for (a, b) in c.data().iter().zip(c0.data()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn lstm_rejects_dimension_mismatch() {
    let cell: LstmCell<f64> = LstmCell::new(
        Tensor::zeros(&[8, 2]),
        Tensor::zeros(&[8, 2]),
        Tensor::zeros(&[8]),
    )
    .unwrap();
    let bad_x = Tensor::zeros(&[3]);
    let h = Tensor::zeros(&[2]);
    assert!(cell.step(&bad_x, &h, &h).is_err());
}

#[test]
fn softmax_examples() {
    let y = softmax(&Tensor::full(&[5], 1.7f64)).unwrap();
    for &v in y.data() {
        assert!((v - 0.2).abs() < 1e-15);
    }
    let sum: f64 = y.data().iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);

    // logits [0, ln 2] -> [1/3, 2/3]
    let y = softmax(&Tensor::new(vec![2], vec![0.0, 2.0f64.ln()]).unwrap()).unwrap();
    assert!((y.data()[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((y.data()[1] - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn softmax_is_shift_invariant_and_normalized() {
    let mut rng = substream(6, "softmax-shift");
    for _ in 0..50 {
        let x = rand_tensor(&[7], &mut rng);
        let c = rng.gen_range(-30.0..30.0);
        let y1 = softmax(&x).unwrap();
        let y2 = softmax(&x.map(|v| v + c)).unwrap();
        for (a, b) in y1.data().iter().zip(y2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let sum: f64 = y1.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

/// Probe a layer's backward pass: the scalar function is a fixed random
/// weighting of the outputs, whose analytic gradient is the backward pass
/// applied to those weights.
#[test]
fn linear_backward_matches_finite_differences_at_1e6() {
    let mut rng = substream(7, "fd-linear");
    for _ in 0..5 {
        let (din, dout) = (4, 3);
        let layer = Linear::new(
            rand_tensor(&[dout, din], &mut rng),
            rand_tensor(&[dout], &mut rng),
        )
        .unwrap();
        let x = rand_tensor(&[din], &mut rng);
        let probe = rand_tensor(&[dout], &mut rng);

        let (gx, gw, gb) = layer.backward(&x, &probe).unwrap();
        let mut flat = Vec::new();
        flat.extend_from_slice(x.data());
        flat.extend_from_slice(layer.weight.data());
        flat.extend_from_slice(layer.bias.data());
        let mut analytic = Vec::new();
        analytic.extend_from_slice(gx.data());
        analytic.extend_from_slice(gw.data());
        analytic.extend_from_slice(gb.data());

        let probe2 = probe.clone();
        let report = finite_diff_check(
            |v: &[f64]| {
                let x = Tensor::new(vec![din], v[..din].to_vec()).unwrap();
                let w =
                    Tensor::new(vec![dout, din], v[din..din + dout * din].to_vec()).unwrap();
                let b = Tensor::new(vec![dout], v[din + dout * din..].to_vec()).unwrap();
                let layer = Linear::new(w, b).unwrap();
                layer
                    .forward(&x)
                    .unwrap()
                    .data()
                    .iter()
                    .zip(probe2.data())
                    .map(|(y, p)| y * p)
                    .sum()
            },
            &flat,
            &analytic,
            1e-4,
            &[("input", din), ("weight", dout * din), ("bias", dout)],
        );
        assert!(
            report.max_rel_err <= 1e-6,
            "rel {} at {}",
            report.max_rel_err,
            report.worst_path
        );
    }
}

#[test]
fn zero_grad_out_produces_zero_gradients() {
    let mut rng = substream(8, "fd-zero");
    let conv = Conv2d::new(
        rand_tensor(&[2, 1, 3, 3], &mut rng),
        rand_tensor(&[2], &mut rng),
        1,
        1,
    )
    .unwrap();
    let x = rand_tensor(&[1, 6, 6], &mut rng);
    let zero_grad = Tensor::zeros(&[2, 6, 6]);
    let (gx, gw, gb) = conv.backward(&x, &zero_grad).unwrap();
    assert!(gx.data().iter().all(|&v| v == 0.0));
    assert!(gw.data().iter().all(|&v| v == 0.0));
    assert!(gb.data().iter().all(|&v| v == 0.0));
}

#[test]
fn lstm_step_backward_matches_finite_differences_at_1e5() {
    let mut rng = substream(9, "fd-lstm");
    for _ in 0..5 {
        let (d, hd) = (3, 4);
        let cell = LstmCell::new(
            rand_tensor(&[4 * hd, d], &mut rng),
            rand_tensor(&[4 * hd, hd], &mut rng),
            rand_tensor(&[4 * hd], &mut rng),
        )
        .unwrap();
        let x = rand_tensor(&[d], &mut rng);
        let h0 = rand_tensor(&[hd], &mut rng);
        let c0 = rand_tensor(&[hd], &mut rng);
        let ph = rand_tensor(&[hd], &mut rng);
        let pc = rand_tensor(&[hd], &mut rng);

        let (_, _, cache) = cell.step_cached(&x, &h0, &c0).unwrap();
        let mut grads = LstmGrads::zeros_like(&cell);
        let (gx, gh, gc) = cell.step_backward(&cache, &ph, &pc, &mut grads).unwrap();

        let mut flat = Vec::new();
        for t in [&x, &h0, &c0, &cell.w_ih, &cell.w_hh, &cell.bias] {
            flat.extend_from_slice(t.data());
        }
        let mut analytic = Vec::new();
        for t in [&gx, &gh, &gc, &grads.w_ih, &grads.w_hh, &grads.bias] {
            analytic.extend_from_slice(t.data());
        }
        let segments = [
            ("x", d),
            ("h_prev", hd),
            ("c_prev", hd),
            ("w_ih", 4 * hd * d),
            ("w_hh", 4 * hd * hd),
            ("bias", 4 * hd),
        ];
        let (ph2, pc2) = (ph.clone(), pc.clone());
        let report = finite_diff_check(
            |v: &[f64]| {
                let mut at = 0;
                let mut take = |n: usize| {
                    let s = v[at..at + n].to_vec();
                    at += n;
                    s
                };
                let x = Tensor::new(vec![d], take(d)).unwrap();
                let h0 = Tensor::new(vec![hd], take(hd)).unwrap();
                let c0 = Tensor::new(vec![hd], take(hd)).unwrap();
                let w_ih = Tensor::new(vec![4 * hd, d], take(4 * hd * d)).unwrap();
                let w_hh = Tensor::new(vec![4 * hd, hd], take(4 * hd * hd)).unwrap();
                let bias = Tensor::new(vec![4 * hd], take(4 * hd)).unwrap();
                let cell = LstmCell::new(w_ih, w_hh, bias).unwrap();
                let (h, c) = cell.step(&x, &h0, &c0).unwrap();
                h.data().iter().zip(ph2.data()).map(|(a, b)| a * b).sum::<f64>()
                    + c.data().iter().zip(pc2.data()).map(|(a, b)| a * b).sum::<f64>()
            },
            &flat,
            &analytic,
            1e-4,
            &segments,
        );
        assert!(
            report.max_rel_err <= 1e-5,
            "rel {} at {}",
            report.max_rel_err,
            report.worst_path
        );
    }
}

#[test]
fn softmax_cross_entropy_composite_matches_finite_differences_at_1e6() {
    let mut rng = substream(10, "fd-softmax-ce");
    for _ in 0..5 {
        let k = 5;
        let logits = rand_tensor(&[k], &mut rng);
        let target = rng.gen_range(0..k);

        let y = softmax(&logits).unwrap();
        // d(-ln y[target])/dy = -1/y[target] at the target, 0 elsewhere.
        let mut grad_y = Tensor::zeros(&[k]);
        grad_y.data_mut()[target] = -1.0 / y.data()[target];
        let analytic = softmax_backward(&y, &grad_y).unwrap();

        let report = finite_diff_check(
            |v: &[f64]| {
                let z = Tensor::new(vec![k], v.to_vec()).unwrap();
                -softmax(&z).unwrap().data()[target].ln()
            },
            logits.data(),
            analytic.data(),
            1e-4,
            &[("logits", k)],
        );
        assert!(
            report.max_rel_err <= 1e-6,
            "rel {} at {}",
            report.max_rel_err,
            report.worst_path
        );
    }
}

#[test]
fn three_layer_conv_stack_matches_finite_differences_at_1e4() {
    use scenetext::nn::{Layer, Stack};
    let mut rng = substream(11, "fd-stack");
    let convs = [
        Conv2d::new(
            rand_tensor(&[2, 1, 3, 3], &mut rng),
            rand_tensor(&[2], &mut rng),
            1,
            1,
        )
        .unwrap(),
        Conv2d::new(
            rand_tensor(&[2, 2, 3, 3], &mut rng),
            rand_tensor(&[2], &mut rng),
            1,
            1,
        )
        .unwrap(),
        Conv2d::new(
            rand_tensor(&[1, 2, 3, 3], &mut rng),
            rand_tensor(&[1], &mut rng),
            1,
            1,
        )
        .unwrap(),
    ];
    let stack = Stack::new(vec![
        Layer::Conv(convs[0].clone()),
        Layer::Relu,
        Layer::Conv(convs[1].clone()),
        Layer::Relu,
        Layer::Conv(convs[2].clone()),
    ]);
    let x = rand_tensor(&[1, 6, 6], &mut rng);
    let probe = rand_tensor(&[1, 6, 6], &mut rng);

    let (_, caches) = stack.forward_cached(&x).unwrap();
    let (gx, grads) = stack.backward(&caches, &probe).unwrap();

    let mut flat = x.data().to_vec();
    let mut analytic = gx.data().to_vec();
    let mut segments = vec![("input".to_string(), x.len())];
    for (i, g) in grads.per_layer.iter().enumerate() {
        if let Some((gw, gb)) = g {
            let Layer::Conv(c) = &stack.layers[i] else { unreachable!() };
            flat.extend_from_slice(c.weight.data());
            flat.extend_from_slice(c.bias.data());
            analytic.extend_from_slice(gw.data());
            analytic.extend_from_slice(gb.data());
            segments.push((format!("conv{i}.weight"), gw.len()));
            segments.push((format!("conv{i}.bias"), gb.len()));
        }
    }
    let seg_refs: Vec<(&str, usize)> = segments.iter().map(|(n, l)| (n.as_str(), *l)).collect();

    let stack2 = stack.clone();
    let probe2 = probe.clone();
    let x_len = x.len();
    let report = finite_diff_check(
        |v: &[f64]| {
            let mut s = stack2.clone();
            let mut at = x_len;
            for layer in &mut s.layers {
                if let Layer::Conv(c) = layer {
                    let wn = c.weight.len();
                    c.weight =
                        Tensor::new(c.weight.shape().to_vec(), v[at..at + wn].to_vec()).unwrap();
                    at += wn;
                    let bn = c.bias.len();
                    c.bias =
                        Tensor::new(c.bias.shape().to_vec(), v[at..at + bn].to_vec()).unwrap();
                    at += bn;
                }
            }
            let x = Tensor::new(vec![1, 6, 6], v[..x_len].to_vec()).unwrap();
            let y = s.forward(&x).unwrap();
            y.data().iter().zip(probe2.data()).map(|(a, b)| a * b).sum()
        },
        &flat,
        &analytic,
        1e-4,
        &seg_refs,
    );
    assert!(
        report.max_rel_err <= 1e-4,
        "rel {} at {}",
        report.max_rel_err,
        report.worst_path
    );
}

#[test]
fn pool_and_upsample_backwards_match_finite_differences() {
    let mut rng = substream(12, "fd-pool-up");
    // Max pool: distinct values avoid tie plateaus where the max is not
    // differentiable.
    let pool = MaxPool2d::square(2);
    let mut vals: Vec<f64> = (0..36).map(|i| i as f64 * 0.1).collect();
    for v in vals.iter_mut() {
        *v += rng.gen_range(-0.01..0.01);
    }
    let x = Tensor::new(vec![1, 6, 6], vals).unwrap();
    let (y, argmax) = pool.forward(&x).unwrap();
    let probe = rand_tensor(&[1, 3, 3], &mut rng);
    let gx = pool.backward(x.shape(), &argmax, &probe).unwrap();
    let probe2 = probe.clone();
    let report = finite_diff_check(
        |v: &[f64]| {
            let x = Tensor::new(vec![1, 6, 6], v.to_vec()).unwrap();
            let (y, _) = pool.forward(&x).unwrap();
            y.data().iter().zip(probe2.data()).map(|(a, b)| a * b).sum()
        },
        x.data(),
        gx.data(),
        1e-4,
        &[("input", 36)],
    );
    assert!(report.max_rel_err <= 1e-6, "pool rel {}", report.max_rel_err);
    assert_eq!(y.shape(), &[1, 3, 3]);

    let x = rand_tensor(&[2, 3, 3], &mut rng);
    let probe = rand_tensor(&[2, 6, 6], &mut rng);
    let gx = upsample2x_backward(x.shape(), &probe).unwrap();
    let probe2 = probe.clone();
    let report = finite_diff_check(
        |v: &[f64]| {
            let x = Tensor::new(vec![2, 3, 3], v.to_vec()).unwrap();
            let y = upsample2x_forward(&x).unwrap();
            y.data().iter().zip(probe2.data()).map(|(a, b)| a * b).sum()
        },
        x.data(),
        gx.data(),
        1e-4,
        &[("input", 18)],
    );
    assert!(report.max_rel_err <= 1e-6, "upsample rel {}", report.max_rel_err);
}

#[test]
fn relu_sigmoid_backwards_match_finite_differences() {
    let mut rng = substream(13, "fd-act");
    let x = rand_tensor(&[10], &mut rng);
    let probe = rand_tensor(&[10], &mut rng);

    let gx = relu_backward(&x, &probe).unwrap();
    let p2 = probe.clone();
    let report = finite_diff_check(
        |v: &[f64]| {
            let x = Tensor::new(vec![10], v.to_vec()).unwrap();
            relu(&x).data().iter().zip(p2.data()).map(|(a, b)| a * b).sum()
        },
        x.data(),
        gx.data(),
        1e-4,
        &[("input", 10)],
    );
    assert!(report.max_rel_err <= 1e-6, "relu rel {}", report.max_rel_err);

    let y = sigmoid(&x);
    let gx = sigmoid_backward(&y, &probe).unwrap();
    let p2 = probe.clone();
    let report = finite_diff_check(
        |v: &[f64]| {
            let x = Tensor::new(vec![10], v.to_vec()).unwrap();
            sigmoid(&x).data().iter().zip(p2.data()).map(|(a, b)| a * b).sum()
        },
        x.data(),
        gx.data(),
        1e-4,
        &[("input", 10)],
    );
    assert!(report.max_rel_err <= 1e-6, "sigmoid rel {}", report.max_rel_err);
}

#[test]
fn forward_passes_are_bit_deterministic() {
    let mut rng = substream(14, "purity");
    let conv = Conv2d::new(
        rand_tensor(&[3, 2, 3, 3], &mut rng),
        rand_tensor(&[3], &mut rng),
        1,
        1,
    )
    .unwrap();
    let x = rand_tensor(&[2, 9, 9], &mut rng);
    let a = conv.forward(&x).unwrap();
    let b = conv.forward(&x).unwrap();
    let bits = |t: &Tensor<f64>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn generic_kernels_run_in_f32_too() {
    let conv = Conv2d::<f32>::new(
        Tensor::new(vec![1, 1, 1, 1], vec![2.0f32]).unwrap(),
        Tensor::zeros(&[1]),
        1,
        0,
    )
    .unwrap();
    let x = Tensor::<f32>::full(&[1, 2, 2], 1.5);
    let y = conv.forward(&x).unwrap();
    assert!(y.data().iter().all(|&v| (v - 3.0).abs() < 1e-6));

    let y = softmax(&Tensor::<f32>::new(vec![2], vec![0.0, 0.0]).unwrap()).unwrap();
    assert!((y.data()[0] - 0.5).abs() < 1e-6);
}
