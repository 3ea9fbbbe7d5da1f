//! CTC loss and gradient via the alpha/beta recursion over the
//! blank-augmented target, entirely in log space.

use super::{FrameProbs, LabelSeq, BLANK};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Result of the forward-backward pass. `log_alpha`/`log_beta` are row-major
/// `T x (2L+1)` over the augmented target; both include the frame's own
/// probability factor, so path mass through `(t, s)` is
/// `alpha + beta - ln y_t(aug_s)`.
#[derive(Debug, Clone)]
pub struct CtcAlphaBeta<S> {
    pub loss: S,
    pub log_p: S,
    pub log_alpha: Vec<S>,
    pub log_beta: Vec<S>,
    pub augmented: Vec<usize>,
}

#[inline]
fn log_add<S: Scalar>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (S::one() + (lo - hi).exp()).ln()
}

fn check_target<S: Scalar>(probs: &FrameProbs<S>, target: &LabelSeq) -> Result<()> {
    if let Some(&bad) = target
        .as_slice()
        .iter()
        .find(|&&k| k >= probs.classes())
    {
        return Err(Error::InvalidInput(format!(
            "target class {bad} out of range for K={}",
            probs.classes()
        )));
    }
    let needed = target.min_frames();
    if needed > probs.frames() {
        return Err(Error::InfeasibleTarget {
            needed,
            available: probs.frames(),
            context: String::new(),
        });
    }
    Ok(())
}

/// `loss = -ln sum over paths collapsing to target of the path probability`.
/// Structurally infeasible targets (too few frames) yield a distinct error.
pub fn ctc_loss<S: Scalar>(probs: &FrameProbs<S>, target: &LabelSeq) -> Result<CtcAlphaBeta<S>> {
    check_target(probs, target)?;
    let aug = target.augmented();
    let t_len = probs.frames();
    let s_len = aug.len();
    let ninf = S::neg_infinity();
    let lp = |t: usize, k: usize| probs.get(t, k).ln();

    let mut alpha = vec![ninf; t_len * s_len];
    alpha[0] = lp(0, BLANK);
    if s_len > 1 {
        alpha[1] = lp(0, aug[1]);
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[(t - 1) * s_len + s];
            if s >= 1 {
                acc = log_add(acc, alpha[(t - 1) * s_len + s - 1]);
            }
            if s >= 2 && aug[s] != BLANK && aug[s] != aug[s - 2] {
                acc = log_add(acc, alpha[(t - 1) * s_len + s - 2]);
            }
            alpha[t * s_len + s] = if acc == ninf { ninf } else { acc + lp(t, aug[s]) };
        }
    }

    let mut beta = vec![ninf; t_len * s_len];
    beta[(t_len - 1) * s_len + s_len - 1] = lp(t_len - 1, aug[s_len - 1]);
    if s_len > 1 {
        beta[(t_len - 1) * s_len + s_len - 2] = lp(t_len - 1, aug[s_len - 2]);
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut acc = beta[(t + 1) * s_len + s];
            if s + 1 < s_len {
                acc = log_add(acc, beta[(t + 1) * s_len + s + 1]);
            }
            if s + 2 < s_len && aug[s + 2] != BLANK && aug[s + 2] != aug[s] {
                acc = log_add(acc, beta[(t + 1) * s_len + s + 2]);
            }
            beta[t * s_len + s] = if acc == ninf { ninf } else { acc + lp(t, aug[s]) };
        }
    }

    let mut log_p = alpha[(t_len - 1) * s_len + s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[(t_len - 1) * s_len + s_len - 2]);
    }

    Ok(CtcAlphaBeta {
        loss: -log_p,
        log_p,
        log_alpha: alpha,
        log_beta: beta,
        augmented: aug,
    })
}

/// Log-probability of emitting exactly `target`; `None` when the target is
/// structurally infeasible for the frame count. Forward pass only.
pub fn log_label_prob<S: Scalar>(probs: &FrameProbs<S>, target: &LabelSeq) -> Option<S> {
    match ctc_loss(probs, target) {
        Ok(fb) => Some(fb.log_p),
        Err(_) => None,
    }
}

/// `d loss / d probs[t,k]`, matching central finite differences on the raw
/// (unnormalized) matrix entries.
pub fn ctc_gradient<S: Scalar>(probs: &FrameProbs<S>, target: &LabelSeq) -> Result<Tensor<S>> {
    let fb = ctc_loss(probs, target)?;
    let t_len = probs.frames();
    let k_len = probs.classes();
    let s_len = fb.augmented.len();
    let ninf = S::neg_infinity();

    let mut grad = Tensor::zeros(&[t_len, k_len]);
    for t in 0..t_len {
        // Accumulate path mass per class at this frame.
        let mut per_class = vec![ninf; k_len];
        for s in 0..s_len {
            let m = fb.log_alpha[t * s_len + s] + fb.log_beta[t * s_len + s];
            if m != ninf {
                per_class[fb.augmented[s]] = log_add(per_class[fb.augmented[s]], m);
            }
        }
        for k in 0..k_len {
            if per_class[k] == ninf {
                continue;
            }
            let lpk = probs.get(t, k).ln();
            if lpk == ninf {
                continue; // zero probability: leave the gradient entry at 0
            }
            let two = S::from_f64_lossy(2.0);
            grad.data_mut()[t * k_len + k] = -((per_class[k] - two * lpk - fb.log_p).exp());
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::collapse;

    fn seq(v: &[usize]) -> LabelSeq {
        LabelSeq::new(v.to_vec()).unwrap()
    }

    /// Independent oracle: enumerate every length-T path and sum the
    /// probabilities of those collapsing to the target.
    fn brute_force_prob(probs: &FrameProbs<f64>, target: &LabelSeq) -> f64 {
        let t = probs.frames();
        let k = probs.classes();
        let mut total = 0.0;
        let n_paths = k.pow(t as u32);
        for code in 0..n_paths {
            let mut c = code;
            let mut p = 1.0;
            let mut path = Vec::with_capacity(t);
            for frame in 0..t {
                let cls = c % k;
                c /= k;
                p *= probs.get(frame, cls);
                path.push(cls);
            }
            if &collapse(&path) == target {
                total += p;
            }
        }
        total
    }

    #[test]
    fn single_frame_single_char() {
        let p = FrameProbs::<f64>::new(1, 2, vec![0.4, 0.6]).unwrap();
        let fb = ctc_loss(&p, &seq(&[1])).unwrap();
        assert!((fb.loss - (-(0.6f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn two_uniform_frames() {
        let third = 1.0 / 3.0;
        let p = FrameProbs::<f64>::new(2, 3, vec![third; 6]).unwrap();
        let fb = ctc_loss(&p, &seq(&[1])).unwrap();
        // paths (a,a), (a,-), (-,a): 3/9 = 1/3
        assert!((fb.loss - 3.0f64.ln()).abs() < 1e-12);
        assert!((brute_force_prob(&p, &seq(&[1])) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn repeat_needs_separator_frame() {
        let p = FrameProbs::new(2, 2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        match ctc_loss(&p, &seq(&[1, 1])) {
            Err(Error::InfeasibleTarget {
                needed, available, ..
            }) => {
                assert_eq!((needed, available), (3, 2));
            }
            other => panic!("expected infeasible target, got {other:?}"),
        }
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::Rng;
        let mut rng = crate::rng::substream(11, "ctc-loss-oracle");
        for _ in 0..40 {
            let t = rng.gen_range(1..=5);
            let k = rng.gen_range(2..=4);
            let mut data = Vec::new();
            for _ in 0..t {
                let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                data.extend(row);
            }
            let probs = FrameProbs::new(t, k, data).unwrap();
            let len = rng.gen_range(0..=3);
            let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(1..k)).collect();
            let target = seq(&labels);
            let reference = brute_force_prob(&probs, &target);
            match ctc_loss(&probs, &target) {
                Ok(fb) => assert!(
                    ((-fb.loss).exp() - reference).abs() < 1e-10,
                    "T={t} K={k} target={target:?}"
                ),
                Err(_) => assert_eq!(reference, 0.0),
            }
        }
    }

    #[test]
    fn gradient_closed_form_single_frame() {
        let p = FrameProbs::<f64>::new(1, 3, vec![0.3, 0.5, 0.2]).unwrap();
        let g = ctc_gradient(&p, &seq(&[1])).unwrap();
        assert!((g.at2(0, 1) - (-1.0 / 0.5)).abs() < 1e-12);
        assert_eq!(g.at2(0, 0), 0.0);
        assert_eq!(g.at2(0, 2), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use crate::nn::gradcheck::finite_diff_check;
        use rand::Rng;
        let mut rng = crate::rng::substream(3, "ctc-grad-fd");
        for round in 0..10 {
            let (t, k) = (5, 4);
            let mut data = Vec::new();
            for _ in 0..t {
                let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                data.extend(row);
            }
            let probs = FrameProbs::new(t, k, data.clone()).unwrap();
            let target = seq(&[rng.gen_range(1..k), rng.gen_range(1..k)]);
            let analytic = ctc_gradient(&probs, &target).unwrap();
            let target2 = target.clone();
            let report = finite_diff_check(
                |v: &[f64]| {
                    let p = FrameProbs::from_raw_unchecked(t, k, v.to_vec());
                    ctc_loss(&p, &target2).unwrap().loss
                },
                &data,
                analytic.data(),
                1e-4,
                &[("probs", t * k)],
            );
            assert!(
                report.max_rel_err <= 1e-5,
                "round {round}: rel {} at {}",
                report.max_rel_err,
                report.worst_path
            );
        }
    }

    #[test]
    fn total_probability_over_all_labelings_is_one() {
        // Exhaustive at T=3, K=3: every path collapses to exactly one
        // sequence, so CTC probabilities must partition 1.
        let data = vec![0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5];
        let probs = FrameProbs::<f64>::new(3, 3, data).unwrap();
        let mut total = 0.0;
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(labels) = stack.pop() {
            let target = seq(&labels);
            if target.min_frames() <= 3 {
                total += (-ctc_loss(&probs, &target).unwrap().loss).exp();
                for c in 1..3 {
                    let mut next = labels.clone();
                    next.push(c);
                    stack.push(next);
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }
}
