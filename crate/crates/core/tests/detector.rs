//! Detection pipeline contracts: probability maps, thresholding,
//! partitioning, box extraction and the composed `detect`.

use rand::Rng;

use scenetext::detector::{
    binarize, dataset_loss, detect, fcn_forward, partition, regions_to_boxes, train_detector,
    BinaryMask, BoxMode, Connectivity, DetectConfig, DetectorModel, DetectorSample,
    DetectorTrainConfig,
};
use scenetext::geometry::polygon_area;
use scenetext::rng::substream;
use scenetext::Tensor;

fn mask_from_rows(rows: &[&str]) -> BinaryMask {
    let h = rows.len();
    let w = rows[0].len();
    let mut data = Vec::with_capacity(h * w);
    for r in rows {
        assert_eq!(r.len(), w);
        for ch in r.chars() {
            data.push(if ch == '#' { 1 } else { 0 });
        }
    }
    BinaryMask::from_data(h, w, data).unwrap()
}

#[test]
fn zero_weight_model_predicts_uniform_half() {
    let model = DetectorModel::<f64>::zeroed();
    let image = Tensor::full(&[1, 64, 64], 0.3);
    let map = fcn_forward(&image, &model).unwrap();
    assert_eq!((map.height(), map.width()), (64, 64));
    for &v in map.grid().data() {
        assert_eq!(v, 0.5);
    }
}

#[test]
fn map_shape_follows_input_even_when_padding_is_needed() {
    let mut rng = substream(31, "det-shape");
    let model = DetectorModel::<f64>::init(&mut rng);
    // 50x70 is not a multiple of 8: padded internally, cropped back.
    let image = Tensor::full(&[1, 50, 70], 0.5);
    let map = fcn_forward(&image, &model).unwrap();
    assert_eq!((map.height(), map.width()), (50, 70));
}

#[test]
fn binarize_examples() {
    let zeros = scenetext::detector::ProbMap::new(Tensor::<f64>::zeros(&[4, 4])).unwrap();
    let mask = binarize(&zeros, 0.5).unwrap();
    assert_eq!(mask.count_ones(), 0);

    // Exactly at the threshold counts as text.
    let mut grid = Tensor::zeros(&[1, 3]);
    grid.data_mut().copy_from_slice(&[0.49, 0.5, 0.51]);
    let map = scenetext::detector::ProbMap::new(grid).unwrap();
    let mask = binarize(&map, 0.5).unwrap();
    assert_eq!(mask.data(), &[0, 1, 1]);

    assert!(binarize(&zeros, 1.5).is_err());

    // Two bright blobs on a dim background.
    let mut grid = Tensor::full(&[8, 8], 0.1);
    for r in 1..3 {
        for c in 1..3 {
            grid.data_mut()[r * 8 + c] = 0.9;
        }
    }
    for r in 5..7 {
        for c in 5..8 {
            grid.data_mut()[r * 8 + c] = 0.9;
        }
    }
    let map = scenetext::detector::ProbMap::new(grid).unwrap();
    let mask = binarize(&map, 0.5).unwrap();
    assert_eq!(mask.count_ones(), 4 + 6);
    let regions = partition(&mask, 1, Connectivity::Four);
    assert_eq!(regions.len(), 2);
    assert_eq!(regions[0].area, 4);
    assert_eq!(regions[1].area, 6);
}

#[test]
fn binarize_is_monotone_in_the_threshold() {
    let mut rng = substream(32, "binarize-mono");
    for _ in 0..20 {
        let data: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let map =
            scenetext::detector::ProbMap::new(Tensor::new(vec![8, 8], data).unwrap()).unwrap();
        let lo: f64 = rng.gen_range(0.0..1.0);
        let hi: f64 = rng.gen_range(lo..1.0);
        let m_lo = binarize(&map, lo).unwrap();
        let m_hi = binarize(&map, hi).unwrap();
        for (a, b) in m_lo.data().iter().zip(m_hi.data()) {
            // Raising the threshold never adds a pixel.
            assert!(b <= a);
        }
    }
}

#[test]
fn partition_examples() {
    let empty = BinaryMask::zeros(6, 6);
    assert!(partition(&empty, 1, Connectivity::Four).is_empty());

    let two_blocks = mask_from_rows(&[
        "###....",
        "###....",
        "###....",
        "....###",
        "....###",
        "....###",
    ]);
    let regions = partition(&two_blocks, 1, Connectivity::Four);
    assert_eq!(regions.len(), 2);
    assert!(regions.iter().all(|r| r.area == 9));
    // Raster order of the top-left pixel.
    assert_eq!(regions[0].bbox, (0, 0, 2, 2));
    assert_eq!(regions[1].bbox, (3, 4, 5, 6));

    // Diagonal touching pixels split under 4-connectivity, join under 8.
    let diag = mask_from_rows(&["#.", ".#"]);
    assert_eq!(partition(&diag, 1, Connectivity::Four).len(), 2);
    assert_eq!(partition(&diag, 1, Connectivity::Eight).len(), 1);

    // min_area drops small components.
    let regions = partition(&two_blocks, 10, Connectivity::Four);
    assert!(regions.is_empty());
}

#[test]
fn partition_regions_are_disjoint_and_cover_the_mask() {
    let mut rng = substream(33, "partition-prop");
    for _ in 0..30 {
        let (h, w) = (12, 12);
        let data: Vec<u8> = (0..h * w).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        let mask = BinaryMask::from_data(h, w, data).unwrap();
        let min_area = rng.gen_range(1..4);
        let regions = partition(&mask, min_area, Connectivity::Four);

        let mut seen = vec![false; h * w];
        for region in &regions {
            assert!(region.area >= min_area);
            assert_eq!(region.area, region.pixels.len());
            for &(r, c) in &region.pixels {
                assert_eq!(mask.get(r, c), 1);
                assert!(!seen[r * w + c], "pixel ({r},{c}) in two regions");
                seen[r * w + c] = true;
            }
        }
        // Pixels not covered must belong to dropped small components only.
        let small = partition(&mask, 1, Connectivity::Four)
            .into_iter()
            .filter(|r| r.area < min_area)
            .flat_map(|r| r.pixels)
            .count();
        let covered = seen.iter().filter(|&&v| v).count();
        assert_eq!(covered + small, mask.count_ones() as usize);
    }
}

#[test]
fn region_boxes_examples() {
    let single = mask_from_rows(&[".....", "...#.", ".....", "....."]);
    let regions = partition(&single, 1, Connectivity::Four);
    let boxes = regions_to_boxes(&regions, BoxMode::AxisAligned);
    // A single pixel at row 1, col 3 -> unit box anchored at (3, 1).
    let (x0, y0, x1, y1) = boxes[0].bounds();
    assert_eq!((x0, y0, x1, y1), (3.0, 1.0, 4.0, 2.0));
    assert_eq!(boxes[0].area(), 1.0);

    let block = mask_from_rows(&["#####", "#####"]);
    let regions = partition(&block, 1, Connectivity::Four);
    let boxes = regions_to_boxes(&regions, BoxMode::AxisAligned);
    let (x0, y0, x1, y1) = boxes[0].bounds();
    assert_eq!((x1 - x0, y1 - y0), (5.0, 2.0));

    // A 45-degree staircase bar: min-area rect beats the axis box.
    let bar = mask_from_rows(&[
        "##......",
        "###.....",
        ".###....",
        "..###...",
        "...###..",
        "....###.",
        ".....###",
        "......##",
    ]);
    let regions = partition(&bar, 1, Connectivity::Four);
    assert_eq!(regions.len(), 1);
    let axis = regions_to_boxes(&regions, BoxMode::AxisAligned);
    let rot = regions_to_boxes(&regions, BoxMode::MinAreaRect);
    assert!(polygon_area(&rot[0].verts) < polygon_area(&axis[0].verts));
    // Never smaller than allowed by the threshold invariant.
    assert!(polygon_area(&rot[0].verts) <= polygon_area(&axis[0].verts));
}

#[test]
fn zero_model_above_half_threshold_detects_nothing() {
    let model = DetectorModel::<f64>::zeroed();
    let image = Tensor::full(&[1, 32, 32], 0.7);
    let cfg = DetectConfig {
        threshold: 0.6,
        ..DetectConfig::default()
    };
    assert!(detect(&image, &model, &cfg).unwrap().is_empty());
}

#[test]
fn detect_equals_staged_composition() {
    let mut rng = substream(34, "detect-compose");
    let model = DetectorModel::<f64>::init(&mut rng);
    let cfg = DetectConfig::default();
    for _ in 0..20 {
        let data: Vec<f64> = (0..32 * 24).map(|_| rng.gen_range(0.0..1.0)).collect();
        let image = Tensor::new(vec![1, 24, 32], data).unwrap();
        let composed = detect(&image, &model, &cfg).unwrap();
        let map = fcn_forward(&image, &model).unwrap();
        let mask = binarize(&map, cfg.threshold).unwrap();
        let regions = partition(&mask, cfg.min_area, cfg.connectivity);
        let staged = regions_to_boxes(&regions, cfg.mode);
        assert_eq!(composed, staged);
    }
}

#[test]
fn zero_epochs_returns_the_initialized_model() {
    let image = Tensor::full(&[1, 16, 16], 0.2);
    let target = BinaryMask::zeros(16, 16);
    let samples = vec![DetectorSample {
        image,
        target,
        ignore: None,
    }];
    let cfg = DetectorTrainConfig {
        epochs: 0,
        seed: 9,
        ..DetectorTrainConfig::default()
    };
    let out = train_detector(&samples, &cfg).unwrap();
    let mut rng = substream(9, "detector-init");
    let fresh = DetectorModel::<f64>::init(&mut rng);
    assert_eq!(out.model, fresh);
    assert_eq!(out.losses.len(), 1);
}

#[test]
fn training_rejects_an_empty_dataset() {
    let cfg = DetectorTrainConfig::default();
    assert!(train_detector::<f64>(&[], &cfg).is_err());
}

#[test]
fn all_background_image_trains_to_a_dark_map() {
    let image = Tensor::full(&[1, 32, 32], 0.4);
    let target = BinaryMask::zeros(32, 32);
    let samples = vec![DetectorSample {
        image: image.clone(),
        target,
        ignore: None,
    }];
    let cfg = DetectorTrainConfig {
        epochs: 150,
        lr: 0.5,
        seed: 1,
    };
    let out = train_detector(&samples, &cfg).unwrap();
    let map = fcn_forward(&image, &out.model).unwrap();
    assert!(map.mean() < 0.05, "mean {}", map.mean());
    assert!(dataset_loss(&samples, &out.model).unwrap() < out.losses[0]);
}
