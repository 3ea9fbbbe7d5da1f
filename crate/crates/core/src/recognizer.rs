//! Word-image recognition: conv feature columns, a bidirectional LSTM over
//! the frame sequence, per-frame softmax into CTC decoding, with optional
//! dictionary-based error correction of the decoded text.

use rand::Rng;

use crate::ctc::{
    beam_decode, ctc_gradient, ctc_loss, greedy_decode, lexicon_decode, Alphabet, FrameProbs,
    LabelSeq,
};
use crate::error::{Error, Result};
use crate::lexicon::{correct, CorrectionPolicy, Lexicon};
use crate::nn::{
    activations::{softmax_rows, softmax_rows_backward},
    clip_global_norm, sgd_step_in_place, xavier_uniform, Conv2d, Layer, Linear, LstmCell,
    LstmGrads, LstmStepCache, MaxPool2d, ModelContainer, Stack,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Default normalized word height.
pub const DEFAULT_HEIGHT: usize = 32;
/// Width shrink factor of the conv stack: `T = ceil(W / 4)`.
pub const WIDTH_STRIDE: usize = 4;

/// Layer widths of the recognizer. The defaults are the pipeline model;
/// gradient checks shrink everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecognizerDims {
    pub channels: [usize; 3],
    /// Frame feature width out of the conv stack.
    pub frame_dim: usize,
    /// LSTM hidden width per direction.
    pub hidden: usize,
}

impl Default for RecognizerDims {
    fn default() -> Self {
        RecognizerDims {
            channels: [16, 16, 32],
            frame_dim: 48,
            hidden: 64,
        }
    }
}

/// A grayscale crop normalized to fixed height, aspect ratio preserved,
/// intensities in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WordImage<S> {
    tensor: Tensor<S>,
}

impl<S: Scalar> WordImage<S> {
    pub fn tensor(&self) -> &Tensor<S> {
        &self.tensor
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }

    /// Frame count the conv stack will produce for this image.
    pub fn frames(&self) -> usize {
        self.width().div_ceil(WIDTH_STRIDE)
    }
}

/// Rescales a grayscale crop to height `target_h` with bilinear
/// interpolation, preserving aspect ratio; widths below 4 are padded by edge
/// replication.
pub fn normalize_word_image<S: Scalar>(crop: &Tensor<S>, target_h: usize) -> Result<WordImage<S>> {
    if crop.rank() != 3 || crop.shape()[0] != 1 {
        return Err(Error::ShapeMismatch(format!(
            "word crop must be [1, h, w], got {:?}",
            crop.shape()
        )));
    }
    let (h0, w0) = (crop.shape()[1], crop.shape()[2]);
    if h0 == 0 || w0 == 0 {
        return Err(Error::InvalidInput("empty word crop".into()));
    }
    let scale = target_h as f64 / h0 as f64;
    let w1 = ((w0 as f64 * scale).round() as usize).max(1);
    let resized = bilinear_resize(crop, target_h, w1);
    let final_w = w1.max(4);
    let tensor = if final_w == w1 {
        resized
    } else {
        // Too narrow: replicate the right edge out to the minimum width.
        let mut padded = Tensor::zeros(&[1, target_h, final_w]);
        for r in 0..target_h {
            for c in 0..final_w {
                let sc = c.min(w1 - 1);
                padded.data_mut()[r * final_w + c] = resized.data()[r * w1 + sc];
            }
        }
        padded
    };
    Ok(WordImage { tensor })
}

fn bilinear_resize<S: Scalar>(x: &Tensor<S>, oh: usize, ow: usize) -> Tensor<S> {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    if (oh, ow) == (h, w) {
        return x.clone();
    }
    let mut out = Tensor::zeros(&[1, oh, ow]);
    let sy = h as f64 / oh as f64;
    let sx = w as f64 / ow as f64;
    for r in 0..oh {
        let fy = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let wy = S::from_f64_lossy(fy - y0 as f64);
        for c in 0..ow {
            let fx = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let wx = S::from_f64_lossy(fx - x0 as f64);
            let one = S::one();
            let v = x.data()[y0 * w + x0] * (one - wy) * (one - wx)
                + x.data()[y0 * w + x1] * (one - wy) * wx
                + x.data()[y1 * w + x0] * wy * (one - wx)
                + x.data()[y1 * w + x1] * wy * wx;
            out.data_mut()[r * ow + c] = v;
        }
    }
    out
}

/// Conv feature extractor + bidirectional LSTM + projection to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerModel<S> {
    /// Image `[1, h, w]` to frame columns `[FRAME_DIM, 1, T]`.
    pub conv: Stack<S>,
    pub fwd: LstmCell<S>,
    pub bwd: LstmCell<S>,
    pub proj: Linear<S>,
    pub height: usize,
}

impl<S: Scalar> RecognizerModel<S> {
    /// Xavier-initialized pipeline model for `num_classes` output classes
    /// (alphabet plus blank) at normalized height `height`.
    pub fn init<R: Rng>(num_classes: usize, height: usize, rng: &mut R) -> Result<Self> {
        Self::init_with(num_classes, height, RecognizerDims::default(), rng)
    }

    /// As [`RecognizerModel::init`] with explicit layer widths. `height` must
    /// be a positive multiple of 8 (the pooling plan collapses it by 8 before
    /// the full-height kernel).
    pub fn init_with<R: Rng>(
        num_classes: usize,
        height: usize,
        dims: RecognizerDims,
        rng: &mut R,
    ) -> Result<Self> {
        if height % 8 != 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "normalized height must be a positive multiple of 8, got {height}"
            )));
        }
        let collapse_kh = height / 8;
        let [c1, c2, c3] = dims.channels;
        let conv = Stack::new(vec![
            Layer::Conv(conv_init(1, c1, 3, 3, 1, rng)),
            Layer::Relu,
            Layer::MaxPool(MaxPool2d::square(2)),
            Layer::Conv(conv_init(c1, c2, 3, 3, 1, rng)),
            Layer::Relu,
            Layer::MaxPool(MaxPool2d::square(2)),
            Layer::Conv(conv_init(c2, c3, 3, 3, 1, rng)),
            Layer::Relu,
            Layer::MaxPool(MaxPool2d::new(2, 1, 2, 1)),
            // Full-height kernel collapses the remaining rows into frames.
            Layer::Conv(conv_init(c3, dims.frame_dim, collapse_kh, 1, 0, rng)),
            Layer::Relu,
        ]);
        let (d, h) = (dims.frame_dim, dims.hidden);
        let lstm = |rng: &mut R| -> Result<LstmCell<S>> {
            LstmCell::new(
                xavier_uniform(&[4 * h, d], d, h, rng),
                xavier_uniform(&[4 * h, h], h, h, rng),
                Tensor::zeros(&[4 * h]),
            )
        };
        let fwd = lstm(rng)?;
        let bwd = lstm(rng)?;
        let proj = Linear::new(
            xavier_uniform(&[num_classes, 2 * h], 2 * h, num_classes, rng),
            Tensor::zeros(&[num_classes]),
        )?;
        Ok(RecognizerModel {
            conv,
            fwd,
            bwd,
            proj,
            height,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.proj.out_dim()
    }

    pub fn dims(&self) -> RecognizerDims {
        let ch = |i: usize| match &self.conv.layers[i] {
            Layer::Conv(c) => c.out_channels(),
            _ => unreachable!("fixed layer plan"),
        };
        RecognizerDims {
            channels: [ch(0), ch(3), ch(6)],
            frame_dim: self.fwd.input_dim(),
            hidden: self.fwd.hidden_dim(),
        }
    }

    /// All-zero parameters, same architecture.
    pub fn zeroed(num_classes: usize, height: usize) -> Result<Self> {
        Self::zeroed_with(num_classes, height, RecognizerDims::default())
    }

    pub fn zeroed_with(num_classes: usize, height: usize, dims: RecognizerDims) -> Result<Self> {
        let mut rng = crate::rng::substream(0, "recognizer-zero");
        let mut model = Self::init_with(num_classes, height, dims, &mut rng)?;
        for layer in &mut model.conv.layers {
            if let Layer::Conv(c) = layer {
                c.weight = Tensor::zeros(c.weight.shape());
                c.bias = Tensor::zeros(c.bias.shape());
            }
        }
        for cell in [&mut model.fwd, &mut model.bwd] {
            cell.w_ih = Tensor::zeros(cell.w_ih.shape());
            cell.w_hh = Tensor::zeros(cell.w_hh.shape());
            cell.bias = Tensor::zeros(cell.bias.shape());
        }
        model.proj.weight = Tensor::zeros(model.proj.weight.shape());
        model.proj.bias = Tensor::zeros(model.proj.bias.shape());
        Ok(model)
    }

    /// Every parameter tensor with a stable name, in a fixed order shared by
    /// serialization, training updates and gradient checks.
    pub fn named_param_tensors(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out: Vec<(String, &Tensor<S>)> = self
            .conv
            .named_params()
            .into_iter()
            .map(|(n, t)| (format!("conv.{n}"), t))
            .collect();
        for (prefix, cell) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            out.push((format!("{prefix}.w_ih"), &cell.w_ih));
            out.push((format!("{prefix}.w_hh"), &cell.w_hh));
            out.push((format!("{prefix}.bias"), &cell.bias));
        }
        out.push(("proj.weight".into(), &self.proj.weight));
        out.push(("proj.bias".into(), &self.proj.bias));
        out
    }

    pub fn named_param_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<S>)> {
        let mut out: Vec<(String, &mut Tensor<S>)> = self
            .conv
            .named_params_mut()
            .into_iter()
            .map(|(n, t)| (format!("conv.{n}"), t))
            .collect();
        for (prefix, cell) in [("fwd", &mut self.fwd), ("bwd", &mut self.bwd)] {
            out.push((format!("{prefix}.w_ih"), &mut cell.w_ih));
            out.push((format!("{prefix}.w_hh"), &mut cell.w_hh));
            out.push((format!("{prefix}.bias"), &mut cell.bias));
        }
        out.push(("proj.weight".into(), &mut self.proj.weight));
        out.push(("proj.bias".into(), &mut self.proj.bias));
        out
    }

    pub fn to_container(&self) -> ModelContainer {
        use crate::detector::to_f64_tensor;
        let mut c = ModelContainer::new("recognizer");
        let dims = self.dims();
        c.meta.insert("arch".into(), 1);
        c.meta.insert("height".into(), self.height as i64);
        c.meta.insert("classes".into(), self.num_classes() as i64);
        c.meta.insert("ch1".into(), dims.channels[0] as i64);
        c.meta.insert("ch2".into(), dims.channels[1] as i64);
        c.meta.insert("ch3".into(), dims.channels[2] as i64);
        c.meta.insert("frame_dim".into(), dims.frame_dim as i64);
        c.meta.insert("hidden".into(), dims.hidden as i64);
        for (name, t) in self.named_param_tensors() {
            c.tensors.push((name, to_f64_tensor(t)));
        }
        c
    }

    pub fn from_container(c: &ModelContainer) -> Result<Self> {
        use crate::detector::from_f64_tensor;
        if c.kind != "recognizer" {
            return Err(Error::ModelFormat(format!(
                "expected a recognizer model, found {:?}",
                c.kind
            )));
        }
        if c.meta_value("arch")? != 1 {
            return Err(Error::ModelFormat("unknown recognizer architecture".into()));
        }
        let height = c.meta_value("height")? as usize;
        let classes = c.meta_value("classes")? as usize;
        let dims = RecognizerDims {
            channels: [
                c.meta_value("ch1")? as usize,
                c.meta_value("ch2")? as usize,
                c.meta_value("ch3")? as usize,
            ],
            frame_dim: c.meta_value("frame_dim")? as usize,
            hidden: c.meta_value("hidden")? as usize,
        };
        let mut model = Self::zeroed_with(classes, height, dims)?;
        for (name, t) in model.named_param_tensors_mut() {
            let stored = c.tensor(&name)?;
            if stored.shape() != t.shape() {
                return Err(Error::ModelFormat(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    stored.shape(),
                    t.shape()
                )));
            }
            *t = from_f64_tensor(stored);
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_container(&ModelContainer::load(path)?)
    }
}

fn conv_init<S: Scalar, R: Rng>(
    c_in: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    rng: &mut R,
) -> Conv2d<S> {
    let weight = xavier_uniform(
        &[c_out, c_in, kh, kw],
        c_in * kh * kw,
        c_out * kh * kw,
        rng,
    );
    Conv2d::new(weight, Tensor::zeros(&[c_out]), 1, pad).expect("static conv shape")
}

/// Conv stack output `[D, 1, T]` reinterpreted as frame rows `[T, D]`.
fn columns_to_frames<S: Scalar>(cols: &Tensor<S>) -> Tensor<S> {
    let (d, t) = (cols.shape()[0], cols.shape()[2]);
    let mut frames = Tensor::zeros(&[t, d]);
    for ti in 0..t {
        for di in 0..d {
            frames.data_mut()[ti * d + di] = cols.data()[di * t + ti];
        }
    }
    frames
}

fn frames_to_columns<S: Scalar>(frames: &Tensor<S>) -> Tensor<S> {
    let (t, d) = (frames.shape()[0], frames.shape()[1]);
    let mut cols = Tensor::zeros(&[d, 1, t]);
    for ti in 0..t {
        for di in 0..d {
            cols.data_mut()[di * t + ti] = frames.data()[ti * d + di];
        }
    }
    cols
}

/// Runs the conv stack: a normalized word image becomes a `[T, D]` sequence
/// of feature frames, `T = ceil(W / 4)`.
pub fn extract_frames<S: Scalar>(
    image: &WordImage<S>,
    model: &RecognizerModel<S>,
) -> Result<Tensor<S>> {
    if image.height() != model.height {
        return Err(Error::ShapeMismatch(format!(
            "word image height {} does not match model height {}",
            image.height(),
            model.height
        )));
    }
    let cols = model.conv.forward(image.tensor())?;
    Ok(columns_to_frames(&cols))
}

struct BiLstmCaches<S> {
    fwd: Vec<LstmStepCache<S>>,
    /// Step order: the backward direction consumes frames `T-1, T-2, ...`.
    bwd: Vec<LstmStepCache<S>>,
}

/// Bidirectional pass: `rows[t] = [h_fwd[t], h_bwd[t]]`, shape `[T, 2H]`.
fn bilstm_forward<S: Scalar>(
    frames: &Tensor<S>,
    model: &RecognizerModel<S>,
) -> Result<(Tensor<S>, BiLstmCaches<S>)> {
    let (t_len, d) = (frames.shape()[0], frames.shape()[1]);
    let hd = model.fwd.hidden_dim();
    let mut rows = Tensor::zeros(&[t_len, 2 * hd]);
    let mut caches = BiLstmCaches {
        fwd: Vec::with_capacity(t_len),
        bwd: Vec::with_capacity(t_len),
    };

    let mut h = Tensor::zeros(&[hd]);
    let mut c = Tensor::zeros(&[hd]);
    for t in 0..t_len {
        let x = Tensor::new(vec![d], frames.data()[t * d..(t + 1) * d].to_vec())?;
        let (nh, nc, cache) = model.fwd.step_cached(&x, &h, &c)?;
        rows.data_mut()[t * 2 * hd..t * 2 * hd + hd].copy_from_slice(nh.data());
        caches.fwd.push(cache);
        h = nh;
        c = nc;
    }

    let mut h = Tensor::zeros(&[hd]);
    let mut c = Tensor::zeros(&[hd]);
    for s in 0..t_len {
        let t = t_len - 1 - s;
        let x = Tensor::new(vec![d], frames.data()[t * d..(t + 1) * d].to_vec())?;
        let (nh, nc, cache) = model.bwd.step_cached(&x, &h, &c)?;
        rows.data_mut()[t * 2 * hd + hd..(t + 1) * 2 * hd].copy_from_slice(nh.data());
        caches.bwd.push(cache);
        h = nh;
        c = nc;
    }

    Ok((rows, caches))
}

/// Backpropagates through both directions; returns the gradient on the frame
/// rows and accumulates parameter gradients.
fn bilstm_backward<S: Scalar>(
    model: &RecognizerModel<S>,
    caches: &BiLstmCaches<S>,
    grad_rows: &Tensor<S>,
    grads_fwd: &mut LstmGrads<S>,
    grads_bwd: &mut LstmGrads<S>,
) -> Result<Tensor<S>> {
    let t_len = grad_rows.shape()[0];
    let hd = model.fwd.hidden_dim();
    let d = model.fwd.input_dim();
    let mut grad_frames = Tensor::zeros(&[t_len, d]);

    let mut dh_next = Tensor::zeros(&[hd]);
    let mut dc_next = Tensor::zeros(&[hd]);
    for t in (0..t_len).rev() {
        let mut dh = dh_next.clone();
        for k in 0..hd {
            dh.data_mut()[k] += grad_rows.data()[t * 2 * hd + k];
        }
        let (dx, dh_prev, dc_prev) =
            model.fwd.step_backward(&caches.fwd[t], &dh, &dc_next, grads_fwd)?;
        for k in 0..d {
            grad_frames.data_mut()[t * d + k] += dx.data()[k];
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    let mut dh_next = Tensor::zeros(&[hd]);
    let mut dc_next = Tensor::zeros(&[hd]);
    for s in (0..t_len).rev() {
        let t = t_len - 1 - s;
        let mut dh = dh_next.clone();
        for k in 0..hd {
            dh.data_mut()[k] += grad_rows.data()[t * 2 * hd + hd + k];
        }
        let (dx, dh_prev, dc_prev) =
            model.bwd.step_backward(&caches.bwd[s], &dh, &dc_next, grads_bwd)?;
        for k in 0..d {
            grad_frames.data_mut()[t * d + k] += dx.data()[k];
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }

    Ok(grad_frames)
}

/// Full forward pass to per-frame class distributions.
pub fn frame_probs<S: Scalar>(
    image: &WordImage<S>,
    model: &RecognizerModel<S>,
) -> Result<FrameProbs<S>> {
    let frames = extract_frames(image, model)?;
    let (rows, _) = bilstm_forward(&frames, model)?;
    let logits = model.proj.forward_rows(&rows)?;
    let probs = softmax_rows(&logits)?;
    Ok(FrameProbs::from_raw_unchecked(
        probs.shape()[0],
        probs.shape()[1],
        probs.into_data(),
    ))
}

#[derive(Debug, Clone)]
pub enum DecodeMode {
    Greedy,
    Beam { width: usize },
    Lexicon { words: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct Recognition {
    pub raw_text: String,
    pub corrected_text: String,
    pub log_score: f64,
}

/// Decodes one crop. `correction` applies dictionary-based error correction
/// to the raw decode; without it the corrected text equals the raw text.
pub fn recognize_word<S: Scalar>(
    crop: &Tensor<S>,
    model: &RecognizerModel<S>,
    alphabet: &Alphabet,
    mode: &DecodeMode,
    correction: Option<(&Lexicon, &CorrectionPolicy)>,
) -> Result<Recognition> {
    if alphabet.num_classes() != model.num_classes() {
        return Err(Error::InvalidInput(format!(
            "alphabet has {} classes, model {}",
            alphabet.num_classes(),
            model.num_classes()
        )));
    }
    let image = normalize_word_image(crop, model.height)?;
    let probs = frame_probs(&image, model)?;
    let (raw_text, log_score) = match mode {
        DecodeMode::Greedy => {
            let r = greedy_decode(&probs);
            (alphabet.decode(&r.labels), r.log_prob.to_f64_lossy())
        }
        DecodeMode::Beam { width } => {
            let beams = beam_decode(&probs, *width)?;
            let best = &beams[0];
            (alphabet.decode(&best.labels), best.log_prob.to_f64_lossy())
        }
        DecodeMode::Lexicon { words } => {
            let choice = lexicon_decode(&probs, alphabet, words)?;
            (choice.word, choice.result.log_prob.to_f64_lossy())
        }
    };
    let corrected_text = match correction {
        Some((lex, policy)) => correct(&raw_text, lex, policy),
        None => raw_text.clone(),
    };
    Ok(Recognition {
        raw_text,
        corrected_text,
        log_score,
    })
}

#[derive(Debug, Clone)]
pub struct RecognizerTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Global gradient-norm clip per sample; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Stop early once greedy decoding exactly matches every training label;
    /// checked every `eval_every` epochs.
    pub stop_at_full_fit: bool,
    pub eval_every: usize,
}

impl Default for RecognizerTrainConfig {
    fn default() -> Self {
        RecognizerTrainConfig {
            epochs: 2000,
            lr: 0.02,
            seed: 0,
            clip_norm: Some(5.0),
            stop_at_full_fit: true,
            eval_every: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecognizerTrainOutcome<S> {
    pub model: RecognizerModel<S>,
    /// Mean CTC loss per epoch (index 0 is the pre-training loss).
    pub losses: Vec<f64>,
    pub epochs_run: usize,
}

/// Trains with per-sample SGD on the CTC loss. Every target is checked for
/// feasibility against its image's frame count up front.
pub fn train_recognizer<S: Scalar>(
    dataset: &[(WordImage<S>, LabelSeq)],
    alphabet: &Alphabet,
    cfg: &RecognizerTrainConfig,
) -> Result<RecognizerTrainOutcome<S>> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput(
            "recognizer training needs a nonempty dataset".into(),
        ));
    }
    let mut rng = crate::rng::substream(cfg.seed, "recognizer-init");
    let height = dataset[0].0.height();
    let model = RecognizerModel::init(alphabet.num_classes(), height, &mut rng)?;
    for (i, (image, target)) in dataset.iter().enumerate() {
        if image.height() != height {
            return Err(Error::ShapeMismatch(format!(
                "sample {i}: height {} differs from {height}",
                image.height()
            )));
        }
        let available = image.frames();
        let needed = target.min_frames();
        if needed > available {
            return Err(Error::InfeasibleTarget {
                needed,
                available,
                context: format!(" (sample {i})"),
            });
        }
    }
    train_recognizer_from(model, dataset, cfg)
}

fn train_recognizer_from<S: Scalar>(
    mut model: RecognizerModel<S>,
    dataset: &[(WordImage<S>, LabelSeq)],
    cfg: &RecognizerTrainConfig,
) -> Result<RecognizerTrainOutcome<S>> {
    let lr = S::from_f64_lossy(cfg.lr);
    let mut losses = vec![dataset_ctc_loss(dataset, &model)?];
    let mut epochs_run = 0usize;
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for (image, target) in dataset {
            epoch_loss += train_step(&mut model, image, target, lr, cfg.clip_norm)?;
        }
        losses.push(epoch_loss / dataset.len() as f64);
        epochs_run = epoch + 1;
        if cfg.stop_at_full_fit
            && (epoch + 1) % cfg.eval_every == 0
            && training_exact_matches(dataset, &model)? == dataset.len()
        {
            break;
        }
    }
    Ok(RecognizerTrainOutcome {
        model,
        losses,
        epochs_run,
    })
}

/// Mean CTC loss over the dataset (no gradient).
pub fn dataset_ctc_loss<S: Scalar>(
    dataset: &[(WordImage<S>, LabelSeq)],
    model: &RecognizerModel<S>,
) -> Result<f64> {
    let mut total = 0.0;
    for (image, target) in dataset {
        let probs = frame_probs(image, model)?;
        total += ctc_loss(&probs, target)?.loss.to_f64_lossy();
    }
    Ok(total / dataset.len() as f64)
}

/// Number of training samples whose greedy decode equals the target exactly.
pub fn training_exact_matches<S: Scalar>(
    dataset: &[(WordImage<S>, LabelSeq)],
    model: &RecognizerModel<S>,
) -> Result<usize> {
    let mut hits = 0;
    for (image, target) in dataset {
        let probs = frame_probs(image, model)?;
        if &greedy_decode(&probs).labels == target {
            hits += 1;
        }
    }
    Ok(hits)
}

/// CTC loss of one sample and its gradient for every parameter tensor, in
/// [`RecognizerModel::named_param_tensors`] order. This is the single
/// backward path shared by training and the gradient checks.
pub fn loss_and_param_grads<S: Scalar>(
    model: &RecognizerModel<S>,
    image: &WordImage<S>,
    target: &LabelSeq,
) -> Result<(f64, Vec<Tensor<S>>)> {
    // Forward with caches.
    let (cols, conv_caches) = model.conv.forward_cached(image.tensor())?;
    let frames = columns_to_frames(&cols);
    let (rows, lstm_caches) = bilstm_forward(&frames, model)?;
    let logits = model.proj.forward_rows(&rows)?;
    let probs_t = softmax_rows(&logits)?;
    let probs = FrameProbs::from_raw_unchecked(
        probs_t.shape()[0],
        probs_t.shape()[1],
        probs_t.data().to_vec(),
    );
    let loss = ctc_loss(&probs, target)?.loss.to_f64_lossy();

    // Backward: CTC -> softmax -> projection -> BiLSTM -> conv stack.
    let grad_probs = ctc_gradient(&probs, target)?;
    let grad_logits = softmax_rows_backward(&probs_t, &grad_probs)?;
    let (grad_rows, grad_proj_w, grad_proj_b) =
        model.proj.backward_rows(&rows, &grad_logits)?;
    let mut grads_fwd = LstmGrads::zeros_like(&model.fwd);
    let mut grads_bwd = LstmGrads::zeros_like(&model.bwd);
    let grad_frames =
        bilstm_backward(model, &lstm_caches, &grad_rows, &mut grads_fwd, &mut grads_bwd)?;
    let grad_cols = frames_to_columns(&grad_frames);
    let (_, conv_grads) = model.conv.backward(&conv_caches, &grad_cols)?;

    let mut grads: Vec<Tensor<S>> = Vec::new();
    for g in conv_grads.per_layer.into_iter().flatten() {
        grads.push(g.0);
        grads.push(g.1);
    }
    for g in [grads_fwd, grads_bwd] {
        grads.push(g.w_ih);
        grads.push(g.w_hh);
        grads.push(g.bias);
    }
    grads.push(grad_proj_w);
    grads.push(grad_proj_b);
    Ok((loss, grads))
}

fn train_step<S: Scalar>(
    model: &mut RecognizerModel<S>,
    image: &WordImage<S>,
    target: &LabelSeq,
    lr: S,
    clip_norm: Option<f64>,
) -> Result<f64> {
    let (loss, mut grads) = loss_and_param_grads(model, image, target)?;
    if let Some(max_norm) = clip_norm {
        let mut refs: Vec<&mut Tensor<S>> = grads.iter_mut().collect();
        clip_global_norm(&mut refs, S::from_f64_lossy(max_norm));
    }
    for ((_, param), grad) in model.named_param_tensors_mut().into_iter().zip(&grads) {
        sgd_step_in_place(param, grad, lr)?;
    }
    Ok(loss)
}
