//! Segmentation-based text detection: a small fully convolutional
//! encoder-decoder predicts a per-pixel text probability map, and detections
//! are formed by thresholding the map and partitioning it into connected
//! regions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{min_area_rect, QuadBox, Vec2};
use crate::nn::{
    activations::sigmoid_scalar, xavier_uniform, Conv2d, Layer, MaxPool2d, ModelContainer, Stack,
    StackGrads,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Encoder/decoder channel plan of the stand-in architecture. Three
/// conv+relu+pool blocks (x8 downsample), three upsample+conv+relu blocks,
/// then a 1x1 logit head.
const ENC_CHANNELS: [usize; 3] = [6, 12, 12];
const DEC_CHANNELS: [usize; 3] = [12, 6, 6];

/// Total spatial downsampling inside the encoder.
pub const DOWNSAMPLE_FACTOR: usize = 8;

/// Per-pixel text probability field on the input image's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap<S> {
    grid: Tensor<S>,
}

impl<S: Scalar> ProbMap<S> {
    pub fn new(grid: Tensor<S>) -> Result<Self> {
        if grid.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "probability map must be rank 2, got {:?}",
                grid.shape()
            )));
        }
        if grid
            .data()
            .iter()
            .any(|&v| !(v >= S::zero() && v <= S::one()))
        {
            return Err(Error::InvalidInput(
                "probability map values must lie in [0,1]".into(),
            ));
        }
        Ok(ProbMap { grid })
    }

    pub fn grid(&self) -> &Tensor<S> {
        &self.grid
    }

    pub fn height(&self) -> usize {
        self.grid.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.grid.shape()[1]
    }

    pub fn mean(&self) -> f64 {
        let n = self.grid.len() as f64;
        self.grid.data().iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n
    }
}

/// A {0,1} grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(h: usize, w: usize) -> Self {
        BinaryMask {
            h,
            w,
            data: vec![0; h * w],
        }
    }

    pub fn from_data(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::ShapeMismatch(format!(
                "mask {h}x{w} wants {} values, got {}",
                h * w,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("mask values must be 0 or 1".into()));
        }
        Ok(BinaryMask { h, w, data })
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.w + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.w + c] = v;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }
}

/// Neighborhood used when partitioning the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// A connected component of mask pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// `(row, col)` pixels in discovery order.
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
}

/// How detected regions are turned into boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxMode {
    AxisAligned,
    MinAreaRect,
}

impl BoxMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "axis" | "axis_aligned" => Ok(BoxMode::AxisAligned),
            "rect" | "min_area_rect" => Ok(BoxMode::MinAreaRect),
            _ => Err(Error::InvalidInput(format!(
                "unknown box mode {s:?} (expected axis|rect)"
            ))),
        }
    }
}

/// The FCN detector: encoder conv stack, nearest-upsample decoder, 1x1 logit
/// head. `forward` on an HxW image yields an HxW logit map.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel<S> {
    pub stack: Stack<S>,
}

impl<S: Scalar> DetectorModel<S> {
    /// Xavier-initialized model drawn from `rng`.
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut c_in = 1usize;
        for &c_out in &ENC_CHANNELS {
            layers.push(Layer::Conv(conv3x3(c_in, c_out, rng)));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool(MaxPool2d::square(2)));
            c_in = c_out;
        }
        for &c_out in &DEC_CHANNELS {
            layers.push(Layer::Upsample2x);
            layers.push(Layer::Conv(conv3x3(c_in, c_out, rng)));
            layers.push(Layer::Relu);
            c_in = c_out;
        }
        layers.push(Layer::Conv(conv1x1(c_in, 1, rng)));
        DetectorModel {
            stack: Stack::new(layers),
        }
    }

    /// All-zero parameters: the logit map is identically 0, the probability
    /// map identically 0.5.
    pub fn zeroed() -> Self {
        let mut rng = crate::rng::substream(0, "detector-zero");
        let mut model = Self::init(&mut rng);
        for layer in &mut model.stack.layers {
            if let Layer::Conv(c) = layer {
                c.weight = Tensor::zeros(c.weight.shape());
                c.bias = Tensor::zeros(c.bias.shape());
            }
        }
        model
    }

    pub fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new("detector");
        c.meta.insert("arch".into(), 1);
        for (name, t) in self.stack.named_params() {
            c.tensors.push((name, to_f64_tensor(t)));
        }
        c
    }

    pub fn from_container(c: &ModelContainer) -> Result<Self> {
        if c.kind != "detector" {
            return Err(Error::ModelFormat(format!(
                "expected a detector model, found {:?}",
                c.kind
            )));
        }
        if c.meta_value("arch")? != 1 {
            return Err(Error::ModelFormat("unknown detector architecture".into()));
        }
        let mut model = Self::zeroed();
        for (name, t) in model.stack.named_params_mut() {
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

fn conv3x3<S: Scalar, R: Rng>(c_in: usize, c_out: usize, rng: &mut R) -> Conv2d<S> {
    let weight = xavier_uniform(&[c_out, c_in, 3, 3], c_in * 9, c_out * 9, rng);
    Conv2d::new(weight, Tensor::zeros(&[c_out]), 1, 1).expect("static conv shape")
}

fn conv1x1<S: Scalar, R: Rng>(c_in: usize, c_out: usize, rng: &mut R) -> Conv2d<S> {
    let weight = xavier_uniform(&[c_out, c_in, 1, 1], c_in, c_out, rng);
    Conv2d::new(weight, Tensor::zeros(&[c_out]), 1, 0).expect("static conv shape")
}

pub(crate) fn to_f64_tensor<S: Scalar>(t: &Tensor<S>) -> Tensor<f64> {
    Tensor::new(
        t.shape().to_vec(),
        t.data().iter().map(|v| v.to_f64_lossy()).collect(),
    )
    .expect("same shape")
}

pub(crate) fn from_f64_tensor<S: Scalar>(t: &Tensor<f64>) -> Tensor<S> {
    Tensor::new(
        t.shape().to_vec(),
        t.data().iter().map(|&v| S::from_f64_lossy(v)).collect(),
    )
    .expect("same shape")
}

fn ceil_to_multiple(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

/// Pads `[1, h, w]` to `[1, ph, pw]` by edge replication (bottom/right).
fn pad_replicate<S: Scalar>(x: &Tensor<S>, ph: usize, pw: usize) -> Tensor<S> {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let mut out = Tensor::zeros(&[1, ph, pw]);
    for r in 0..ph {
        let sr = r.min(h - 1);
        for c in 0..pw {
            let sc = c.min(w - 1);
            out.data_mut()[r * pw + c] = x.data()[sr * w + sc];
        }
    }
    out
}

/// Runs the padded forward pass, returning the logit tensor (still padded),
/// the layer caches, and the padded dims.
fn forward_logits_padded<S: Scalar>(
    image: &Tensor<S>,
    model: &DetectorModel<S>,
) -> Result<(Tensor<S>, Vec<crate::nn::LayerCache<S>>, (usize, usize))> {
    if image.rank() != 3 || image.shape()[0] != 1 {
        return Err(Error::ShapeMismatch(format!(
            "detector expects [1, h, w], got {:?}",
            image.shape()
        )));
    }
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let ph = ceil_to_multiple(h, DOWNSAMPLE_FACTOR);
    let pw = ceil_to_multiple(w, DOWNSAMPLE_FACTOR);
    let padded = if (ph, pw) == (h, w) {
        image.clone()
    } else {
        pad_replicate(image, ph, pw)
    };
    let (logits, caches) = model.stack.forward_cached(&padded)?;
    Ok((logits, caches, (ph, pw)))
}

/// Per-pixel text probability prediction: sigmoid-squashed logits, cropped
/// back to the input's HxW grid.
pub fn fcn_forward<S: Scalar>(image: &Tensor<S>, model: &DetectorModel<S>) -> Result<ProbMap<S>> {
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let (logits, _, (_, pw)) = forward_logits_padded(image, model)?;
    let mut grid = Tensor::zeros(&[h, w]);
    for r in 0..h {
        for c in 0..w {
            grid.data_mut()[r * w + c] = sigmoid_scalar(logits.data()[r * pw + c]);
        }
    }
    ProbMap::new(grid)
}

/// `mask[p] = 1` iff `map[p] >= threshold` (a value exactly at the threshold
/// is text).
pub fn binarize<S: Scalar>(map: &ProbMap<S>, threshold: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "threshold must be in [0,1], got {threshold}"
        )));
    }
    let thr = S::from_f64_lossy(threshold);
    let mut mask = BinaryMask::zeros(map.height(), map.width());
    for (m, &v) in mask.data.iter_mut().zip(map.grid.data()) {
        *m = u8::from(v >= thr);
    }
    Ok(mask)
}

/// Connected components of the mask's 1-pixels; components smaller than
/// `min_area` are dropped. Regions come back in raster order of their first
/// (top-left-most) pixel.
pub fn partition(mask: &BinaryMask, min_area: usize, conn: Connectivity) -> Vec<Region> {
    let (h, w) = (mask.h, mask.w);
    let mut visited = vec![false; h * w];
    let mut regions = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for seed in 0..h * w {
        if visited[seed] || mask.data[seed] == 0 {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        let mut pixels = Vec::new();
        let mut bbox = (usize::MAX, usize::MAX, 0usize, 0usize);
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / w, idx % w);
            pixels.push((r, c));
            bbox.0 = bbox.0.min(r);
            bbox.1 = bbox.1.min(c);
            bbox.2 = bbox.2.max(r);
            bbox.3 = bbox.3.max(c);
            let mut push = |nr: isize, nc: isize| {
                if nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w {
                    let nidx = nr as usize * w + nc as usize;
                    if !visited[nidx] && mask.data[nidx] == 1 {
                        visited[nidx] = true;
                        queue.push_back(nidx);
                    }
                }
            };
            let (ri, ci) = (r as isize, c as isize);
            push(ri - 1, ci);
            push(ri + 1, ci);
            push(ri, ci - 1);
            push(ri, ci + 1);
            if conn == Connectivity::Eight {
                push(ri - 1, ci - 1);
                push(ri - 1, ci + 1);
                push(ri + 1, ci - 1);
                push(ri + 1, ci + 1);
            }
        }
        if pixels.len() >= min_area {
            regions.push(Region {
                area: pixels.len(),
                pixels,
                bbox,
            });
        }
    }
    regions
}

/// Boxes from regions. Axis-aligned boxes span whole pixels: a region of
/// pixel columns `c0..=c1` yields x extents `c0` and `c1 + 1`, so a 5x2 block
/// becomes a width-5, height-2 box. The min-area mode runs rotating calipers
/// over the region's pixel-corner hull.
pub fn regions_to_boxes(regions: &[Region], mode: BoxMode) -> Vec<QuadBox> {
    regions
        .iter()
        .map(|region| match mode {
            BoxMode::AxisAligned => {
                let (r0, c0, r1, c1) = region.bbox;
                QuadBox::from_rect(c0 as f64, r0 as f64, (c1 + 1) as f64, (r1 + 1) as f64)
            }
            BoxMode::MinAreaRect => {
                let mut corners = Vec::with_capacity(region.pixels.len() * 4);
                for &(r, c) in &region.pixels {
                    let (x, y) = (c as f64, r as f64);
                    corners.push(Vec2::new(x, y));
                    corners.push(Vec2::new(x + 1.0, y));
                    corners.push(Vec2::new(x, y + 1.0));
                    corners.push(Vec2::new(x + 1.0, y + 1.0));
                }
                QuadBox::new(min_area_rect(&corners))
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub threshold: f64,
    pub min_area: usize,
    pub mode: BoxMode,
    pub connectivity: Connectivity,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            threshold: 0.5,
            min_area: 8,
            mode: BoxMode::AxisAligned,
            connectivity: Connectivity::Four,
        }
    }
}

/// The full detection pipeline:
/// `regions_to_boxes(partition(binarize(fcn_forward(image))))`.
pub fn detect<S: Scalar>(
    image: &Tensor<S>,
    model: &DetectorModel<S>,
    cfg: &DetectConfig,
) -> Result<Vec<QuadBox>> {
    let map = fcn_forward(image, model)?;
    let mask = binarize(&map, cfg.threshold)?;
    let regions = partition(&mask, cfg.min_area, cfg.connectivity);
    Ok(regions_to_boxes(&regions, cfg.mode))
}

/// One training example: the image, its text mask, and optionally a mask of
/// don't-care pixels excluded from the loss.
#[derive(Debug, Clone)]
pub struct DetectorSample<S> {
    pub image: Tensor<S>,
    pub target: BinaryMask,
    pub ignore: Option<BinaryMask>,
}

#[derive(Debug, Clone)]
pub struct DetectorTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        DetectorTrainConfig {
            epochs: 300,
            lr: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectorTrainOutcome<S> {
    pub model: DetectorModel<S>,
    /// Mean per-pixel BCE over the dataset, before training and after each
    /// epoch.
    pub losses: Vec<f64>,
}

/// Trains the FCN with per-sample SGD on mean per-pixel binary cross-entropy
/// (computed on logits). Don't-care pixels contribute neither loss nor
/// gradient.
pub fn train_detector<S: Scalar>(
    samples: &[DetectorSample<S>],
    cfg: &DetectorTrainConfig,
) -> Result<DetectorTrainOutcome<S>> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "detector training needs a nonempty dataset".into(),
        ));
    }
    for (i, s) in samples.iter().enumerate() {
        let (h, w) = (s.image.shape()[1], s.image.shape()[2]);
        if s.target.height() != h || s.target.width() != w {
            return Err(Error::ShapeMismatch(format!(
                "sample {i}: image {h}x{w} vs mask {}x{}",
                s.target.height(),
                s.target.width()
            )));
        }
    }

    let mut rng = crate::rng::substream(cfg.seed, "detector-init");
    let mut model = DetectorModel::init(&mut rng);
    let mut losses = vec![dataset_loss(samples, &model)?];
    let lr = S::from_f64_lossy(cfg.lr);

    for _ in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for sample in samples {
            let (loss, grads) = sample_loss_and_grads(sample, &model)?;
            epoch_loss += loss;
            model.stack.apply_sgd(&grads, lr)?;
        }
        losses.push(epoch_loss / samples.len() as f64);
    }
    Ok(DetectorTrainOutcome { model, losses })
}

/// Mean BCE of the model over the dataset (no gradient).
pub fn dataset_loss<S: Scalar>(
    samples: &[DetectorSample<S>],
    model: &DetectorModel<S>,
) -> Result<f64> {
    let mut total = 0.0;
    for sample in samples {
        let (logits, _, (_, pw)) = forward_logits_padded(&sample.image, model)?;
        total += bce_loss(&logits, pw, sample)?.0;
    }
    Ok(total / samples.len() as f64)
}

fn sample_loss_and_grads<S: Scalar>(
    sample: &DetectorSample<S>,
    model: &DetectorModel<S>,
) -> Result<(f64, StackGrads<S>)> {
    let (logits, caches, (ph, pw)) = forward_logits_padded(&sample.image, model)?;
    let (loss, grad_cropped) = bce_loss(&logits, pw, sample)?;
    // Re-embed the cropped gradient into the padded grid.
    let (h, w) = (sample.target.height(), sample.target.width());
    let mut grad = Tensor::zeros(&[1, ph, pw]);
    for r in 0..h {
        for c in 0..w {
            grad.data_mut()[r * pw + c] = grad_cropped[r * w + c];
        }
    }
    let (_, grads) = model.stack.backward(&caches, &grad)?;
    Ok((loss, grads))
}

/// Mean binary cross-entropy over counted pixels, evaluated on logits for
/// stability, plus its gradient w.r.t. the (cropped) logit grid.
fn bce_loss<S: Scalar>(
    logits: &Tensor<S>,
    padded_w: usize,
    sample: &DetectorSample<S>,
) -> Result<(f64, Vec<S>)> {
    let (h, w) = (sample.target.height(), sample.target.width());
    let mut counted = 0usize;
    let mut loss = 0.0f64;
    let mut grad = vec![S::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            if let Some(ig) = &sample.ignore {
                if ig.get(r, c) == 1 {
                    continue;
                }
            }
            counted += 1;
            let z = logits.data()[r * padded_w + c].to_f64_lossy();
            let y = f64::from(sample.target.get(r, c));
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            let p = 1.0 / (1.0 + (-z).exp());
            grad[r * w + c] = S::from_f64_lossy(p - y);
        }
    }
    if counted == 0 {
        return Ok((0.0, grad));
    }
    let scale = S::from_f64_lossy(1.0 / counted as f64);
    for g in &mut grad {
        *g *= scale;
    }
    Ok((loss / counted as f64, grad))
}

/// Fraction of non-ignored pixels whose thresholded prediction (at 0.5)
/// matches the mask.
pub fn pixel_accuracy<S: Scalar>(
    map: &ProbMap<S>,
    target: &BinaryMask,
    ignore: Option<&BinaryMask>,
) -> f64 {
    let (h, w) = (target.height(), target.width());
    let mut counted = 0usize;
    let mut right = 0usize;
    let half = S::from_f64_lossy(0.5);
    for r in 0..h {
        for c in 0..w {
            if let Some(ig) = ignore {
                if ig.get(r, c) == 1 {
                    continue;
                }
            }
            counted += 1;
            let pred = u8::from(map.grid.data()[r * w + c] >= half);
            if pred == target.get(r, c) {
                right += 1;
            }
        }
    }
    if counted == 0 {
        1.0
    } else {
        right as f64 / counted as f64
    }
}
