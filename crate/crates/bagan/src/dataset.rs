//! Dataset ingestion (IDX), synthetic ring mixtures, the imbalancing
//! protocol, seeded batch iteration, and mirror augmentation.
//!
//! Images are stored normalized to [−1, 1]. Synthetic 2-D points flow through
//! the same machinery as 1×1 two-channel images, so every downstream module
//! is format-agnostic.

use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::tensor::Tensor;
use flate2::read::GzDecoder;
use rand::Rng;
use std::io::Read;
use std::path::Path;

/// Radius of the synthetic mixture ring; keeps all mode centers comfortably
/// inside the tanh output range (−1, 1).
pub const RING_RADIUS: f64 = 0.7;

/// Maps a raw byte to [−1, 1].
pub fn normalize_pixel(byte: u8) -> f32 {
    byte as f32 / 127.5 - 1.0
}

/// Maps a [−1, 1] value back to a byte (round half up, clamped).
pub fn denormalize_pixel(v: f32) -> u8 {
    let scaled = (v + 1.0) * 127.5;
    scaled.clamp(0.0, 255.0).round() as u8
}

/// One class-removal specification: drop `drop_percentage`% of
/// `minority_class`, choosing survivors with `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceSpec {
    pub minority_class: usize,
    pub drop_percentage: f64,
    pub seed: u64,
}

/// Dataset-altering operations recorded for provenance replay.
#[derive(Debug, Clone, PartialEq)]
pub enum ProvenanceOp {
    Imbalance(ImbalanceSpec),
    Mirror { class: usize, target_count: usize, seed: u64 },
}

/// Where a dataset came from and every transformation applied since.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub ops: Vec<ProvenanceOp>,
}

/// An image with its class label (a copying view into a [`Dataset`]).
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub pixels: Tensor<f32>,
    pub label: usize,
}

/// Labeled images of one shape, with a per-class index and provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<f32>,
    labels: Vec<u16>,
    /// Per-image shape as `[C, H, W]`.
    image_shape: [usize; 3],
    n_classes: usize,
    per_class: Vec<Vec<usize>>,
    provenance: Provenance,
}

impl Dataset {
    fn new(
        images: Vec<f32>,
        labels: Vec<u16>,
        image_shape: [usize; 3],
        n_classes: usize,
        provenance: Provenance,
    ) -> Self {
        let mut per_class = vec![Vec::new(); n_classes];
        for (i, l) in labels.iter().enumerate() {
            per_class[*l as usize].push(i);
        }
        Dataset { images, labels, image_shape, n_classes, per_class, provenance }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Per-image shape `[C, H, W]`.
    pub fn image_shape(&self) -> [usize; 3] {
        self.image_shape
    }

    pub fn image_numel(&self) -> usize {
        self.image_shape.iter().product()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Raw normalized pixels of image `i`.
    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_numel();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labeled_image(&self, i: usize) -> LabeledImage {
        let shape = [self.image_shape[0], self.image_shape[1], self.image_shape[2]];
        LabeledImage {
            pixels: Tensor::from_vec(&shape, self.image(i).to_vec()).expect("image shape"),
            label: self.label(i),
        }
    }

    /// Indices of all images of class `c`.
    pub fn class_indices(&self, c: usize) -> &[usize] {
        &self.per_class[c]
    }

    pub fn class_count(&self, c: usize) -> usize {
        self.per_class[c].len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.per_class.iter().map(Vec::len).collect()
    }

    /// Stacks the given images into a `[N, C, H, W]` tensor plus labels.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let n = self.image_numel();
        let [c, h, w] = self.image_shape;
        let mut data = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
            labels.push(self.label(i));
        }
        (
            Tensor::from_vec(&[indices.len(), c, h, w], data).expect("gather shape"),
            labels,
        )
    }

    /// New dataset containing only class `c` (same class-count universe).
    pub fn filter_class(&self, c: usize) -> Result<Dataset> {
        if c >= self.n_classes || self.per_class[c].is_empty() {
            return Err(Error::InvalidArgument(format!("class {c} absent from dataset")));
        }
        let n = self.image_numel();
        let mut images = Vec::with_capacity(self.per_class[c].len() * n);
        let mut labels = Vec::with_capacity(self.per_class[c].len());
        for &i in &self.per_class[c] {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        let mut provenance = self.provenance.clone();
        provenance.source = format!("{} [class {c} only]", provenance.source);
        Ok(Dataset::new(images, labels, self.image_shape, self.n_classes, provenance))
    }

    /// Raw parts for serialization.
    pub(crate) fn raw_parts(&self) -> (&[f32], &[u16], [usize; 3], usize) {
        (&self.images, &self.labels, self.image_shape, self.n_classes)
    }

    pub(crate) fn from_raw_parts(
        images: Vec<f32>,
        labels: Vec<u16>,
        image_shape: [usize; 3],
        n_classes: usize,
        provenance: Provenance,
    ) -> Result<Dataset> {
        if images.len() != labels.len() * image_shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch("image payload vs label count".to_string()));
        }
        if let Some(l) = labels.iter().find(|l| **l as usize >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {l} out of range")));
        }
        Ok(Dataset::new(images, labels, image_shape, n_classes, provenance))
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(|e| Error::Format {
            path: path.display().to_string(),
            detail: format!("gzip: {e}"),
        })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(b: &[u8], off: usize, path: &Path) -> Result<u32> {
    b.get(off..off + 4)
        .map(|s| u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| Error::Format { path: path.display().to_string(), detail: "truncated".into() })
}

/// Loads an IDX image/label pair (gzip-compressed when the path ends in
/// `.gz`). Magics: images 0x00000803, labels 0x00000801, big-endian.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = read_maybe_gz(images_path)?;
    let magic = be_u32(&img, 0, images_path)?;
    if magic != 0x0000_0803 {
        return Err(Error::Format {
            path: images_path.display().to_string(),
            detail: format!("bad magic {magic:#010x}, want 0x00000803"),
        });
    }
    let count = be_u32(&img, 4, images_path)? as usize;
    let h = be_u32(&img, 8, images_path)? as usize;
    let w = be_u32(&img, 12, images_path)? as usize;
    let need = 16 + count * h * w;
    if img.len() < need {
        return Err(Error::Format {
            path: images_path.display().to_string(),
            detail: format!("truncated: have {} bytes, need {need}", img.len()),
        });
    }

    let lbl = read_maybe_gz(labels_path)?;
    let magic = be_u32(&lbl, 0, labels_path)?;
    if magic != 0x0000_0801 {
        return Err(Error::Format {
            path: labels_path.display().to_string(),
            detail: format!("bad magic {magic:#010x}, want 0x00000801"),
        });
    }
    let lcount = be_u32(&lbl, 4, labels_path)? as usize;
    if lcount != count {
        return Err(Error::Format {
            path: labels_path.display().to_string(),
            detail: format!("count mismatch: {lcount} labels vs {count} images"),
        });
    }
    if lbl.len() < 8 + count {
        return Err(Error::Format {
            path: labels_path.display().to_string(),
            detail: "truncated".into(),
        });
    }

    let images: Vec<f32> = img[16..need].iter().map(|b| normalize_pixel(*b)).collect();
    let labels: Vec<u16> = lbl[8..8 + count].iter().map(|b| *b as u16).collect();
    let n_classes = labels.iter().map(|l| *l as usize + 1).max().unwrap_or(0);
    Ok(Dataset::new(
        images,
        labels,
        [1, h, w],
        n_classes,
        Provenance { source: format!("idx:{}", images_path.display()), ops: Vec::new() },
    ))
}

/// Generates `k` Gaussian modes on a ring of radius [`RING_RADIUS`], one
/// class per mode, as 1×1 two-channel images.
pub fn synth_mixture(k: usize, samples_per_mode: &[usize], spread: f64, seed: u64) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 modes, got {k}")));
    }
    if samples_per_mode.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} per-mode counts for {k} modes",
            samples_per_mode.len()
        )));
    }
    if samples_per_mode.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("every mode needs at least one sample".into()));
    }
    let mut rng = rng::stream(seed, tags::SYNTH);
    let total: usize = samples_per_mode.iter().sum();
    let mut images = Vec::with_capacity(total * 2);
    let mut labels = Vec::with_capacity(total);
    for (mode, &count) in samples_per_mode.iter().enumerate() {
        let angle = 2.0 * std::f64::consts::PI * mode as f64 / k as f64;
        let (cx, cy) = (RING_RADIUS * angle.cos(), RING_RADIUS * angle.sin());
        let mut noise = [0.0f64; 2];
        for _ in 0..count {
            rng::fill_standard_normal(&mut rng, &mut noise);
            images.push((cx + spread * noise[0]) as f32);
            images.push((cy + spread * noise[1]) as f32);
            labels.push(mode as u16);
        }
    }
    Ok(Dataset::new(
        images,
        labels,
        [2, 1, 1],
        k,
        Provenance { source: format!("synth:k={k},spread={spread},seed={seed}"), ops: Vec::new() },
    ))
}

/// Returns the retained-image count for a class of size `n` at drop
/// percentage `p` (round half up).
pub fn retained_count(n: usize, p: f64) -> usize {
    (n as f64 * (1.0 - p / 100.0) + 0.5).floor() as usize
}

/// Applies the imbalancing protocol: keeps `round(N_c·(1−p/100))` images of
/// the minority class (seeded sampling without replacement), all other
/// classes untouched.
pub fn imbalance(ds: &Dataset, spec: &ImbalanceSpec) -> Result<Dataset> {
    if spec.minority_class >= ds.n_classes() || ds.class_count(spec.minority_class) == 0 {
        return Err(Error::InvalidArgument(format!(
            "class {} absent from dataset",
            spec.minority_class
        )));
    }
    if !(0.0..100.0).contains(&spec.drop_percentage) {
        return Err(Error::InvalidArgument(format!(
            "drop percentage {} outside [0, 100)",
            spec.drop_percentage
        )));
    }
    let class_idx = ds.class_indices(spec.minority_class);
    let keep_n = retained_count(class_idx.len(), spec.drop_percentage);
    let mut rng = rng::stream(spec.seed, tags::IMBALANCE);
    let perm = rng::permutation(&mut rng, class_idx.len());
    let mut kept: Vec<usize> = perm[..keep_n].iter().map(|&j| class_idx[j]).collect();
    kept.sort_unstable();
    let mut kept_iter = kept.iter().peekable();

    let n = ds.image_numel();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..ds.len() {
        if ds.label(i) == spec.minority_class {
            match kept_iter.peek() {
                Some(&&k) if k == i => {
                    kept_iter.next();
                }
                _ => continue,
            }
        }
        images.extend_from_slice(ds.image(i));
        labels.push(ds.label(i) as u16);
    }
    debug_assert_eq!(images.len(), labels.len() * n);
    let mut provenance = ds.provenance.clone();
    provenance.ops.push(ProvenanceOp::Imbalance(spec.clone()));
    Ok(Dataset::new(images, labels, ds.image_shape, ds.n_classes, provenance))
}

/// Flips one image left-right (channel-wise).
pub fn flip_horizontal(pixels: &[f32], shape: [usize; 3]) -> Vec<f32> {
    let [c, h, w] = shape;
    let mut out = vec![0.0f32; pixels.len()];
    for ch in 0..c {
        for row in 0..h {
            for col in 0..w {
                out[(ch * h + row) * w + col] = pixels[(ch * h + row) * w + (w - 1 - col)];
            }
        }
    }
    out
}

/// Appends horizontally mirrored copies of seeded-sampled `target_class`
/// images until the class reaches `target_count`.
pub fn mirror_augment(
    ds: &Dataset,
    target_class: usize,
    target_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if target_class >= ds.n_classes() || ds.class_count(target_class) == 0 {
        return Err(Error::InvalidArgument(format!("class {target_class} absent from dataset")));
    }
    let have = ds.class_count(target_class);
    let need = target_count.saturating_sub(have);
    let mut images = ds.images.clone();
    let mut labels = ds.labels.clone();
    let src = ds.class_indices(target_class);
    let mut rng = rng::stream(seed, tags::MIRROR);
    for _ in 0..need {
        let pick = src[rng.random_range(0..src.len())];
        images.extend_from_slice(&flip_horizontal(ds.image(pick), ds.image_shape));
        labels.push(target_class as u16);
    }
    let mut provenance = ds.provenance.clone();
    provenance.ops.push(ProvenanceOp::Mirror { class: target_class, target_count, seed });
    Ok(Dataset::new(images, labels, ds.image_shape, ds.n_classes, provenance))
}

/// One epoch of seeded-permutation batches; the final batch may be short.
pub struct BatchIterator<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    next: usize,
}

/// Iterates one epoch over `ds` in a seeded random order.
pub fn batch_iterator(ds: &Dataset, batch_size: usize, seed: u64) -> Result<BatchIterator<'_>> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot iterate an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, tags::BATCHES);
    let order = rng::permutation(&mut rng, ds.len());
    Ok(BatchIterator { ds, order, batch_size, next: 0 })
}

impl Iterator for BatchIterator<'_> {
    type Item = (Tensor<f32>, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.order.len() {
            return None;
        }
        let end = (self.next + self.batch_size).min(self.order.len());
        let batch = self.ds.gather(&self.order[self.next..end]);
        self.next = end;
        Some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset(counts: &[usize]) -> Dataset {
        // 2×2 single-channel images; pixel pattern encodes the image index.
        let mut images = Vec::new();
        let mut labels = Vec::new();
        let mut idx = 0f32;
        for (class, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                images.extend_from_slice(&[idx, idx + 0.25, idx + 0.5, idx + 0.75]);
                labels.push(class as u16);
                idx += 1.0;
            }
        }
        Dataset::new(
            images,
            labels,
            [1, 2, 2],
            counts.len(),
            Provenance { source: "test".into(), ops: Vec::new() },
        )
    }

    #[test]
    fn pixel_normalization_round_trips_every_gray_level() {
        for b in 0..=255u8 {
            assert_eq!(denormalize_pixel(normalize_pixel(b)), b);
        }
        assert_eq!(denormalize_pixel(-1.0), 0);
        assert_eq!(denormalize_pixel(1.0), 255);
    }

    #[test]
    fn retained_count_rounds_half_up() {
        assert_eq!(retained_count(5923, 97.5), 148); // 148.075
        assert_eq!(retained_count(5000, 40.0), 3000);
        assert_eq!(retained_count(10, 25.0), 8); // 7.5 rounds up
        assert_eq!(retained_count(100, 0.0), 100);
    }

    #[test]
    fn imbalance_keeps_other_classes_untouched() {
        let ds = tiny_dataset(&[6, 4, 5]);
        let spec = ImbalanceSpec { minority_class: 1, drop_percentage: 50.0, seed: 9 };
        let out = imbalance(&ds, &spec).unwrap();
        assert_eq!(out.class_counts(), vec![6, 2, 5]);
        // Multiset of non-minority images preserved (here: order too).
        let class0: Vec<&[f32]> = out.class_indices(0).iter().map(|&i| out.image(i)).collect();
        let orig0: Vec<&[f32]> = ds.class_indices(0).iter().map(|&i| ds.image(i)).collect();
        assert_eq!(class0, orig0);
        assert_eq!(out.provenance().ops.len(), 1);
    }

    #[test]
    fn imbalance_with_zero_drop_changes_nothing() {
        let ds = tiny_dataset(&[3, 3]);
        let spec = ImbalanceSpec { minority_class: 0, drop_percentage: 0.0, seed: 1 };
        let out = imbalance(&ds, &spec).unwrap();
        assert_eq!(out.len(), ds.len());
        for i in 0..ds.len() {
            assert_eq!(out.image(i), ds.image(i));
            assert_eq!(out.label(i), ds.label(i));
        }
    }

    #[test]
    fn imbalance_replay_is_bit_exact_and_seed_sensitive() {
        let ds = tiny_dataset(&[12, 3]);
        let spec = ImbalanceSpec { minority_class: 0, drop_percentage: 60.0, seed: 4 };
        let a = imbalance(&ds, &spec).unwrap();
        let b = imbalance(&ds, &spec).unwrap();
        assert_eq!(a.images, b.images);
        assert_eq!(a.labels, b.labels);
        let c = imbalance(&ds, &ImbalanceSpec { seed: 5, ..spec }).unwrap();
        assert_eq!(c.class_count(0), a.class_count(0));
        assert_ne!(a.images, c.images, "different seeds should retain different images");
    }

    #[test]
    fn imbalance_rejects_bad_arguments() {
        let ds = tiny_dataset(&[3, 3]);
        assert!(imbalance(&ds, &ImbalanceSpec { minority_class: 7, drop_percentage: 10.0, seed: 0 })
            .is_err());
        assert!(imbalance(&ds, &ImbalanceSpec { minority_class: 0, drop_percentage: 100.0, seed: 0 })
            .is_err());
    }

    #[test]
    fn batch_iterator_partitions_the_dataset() {
        let ds = tiny_dataset(&[7, 3]);
        let sizes: Vec<usize> =
            batch_iterator(&ds, 3, 0).unwrap().map(|(_, l)| l.len()).collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        // Same seed → identical order; union covers the dataset exactly once.
        let a: Vec<Vec<usize>> = batch_iterator(&ds, 3, 1).unwrap().map(|(_, l)| l).collect();
        let b: Vec<Vec<usize>> = batch_iterator(&ds, 3, 1).unwrap().map(|(_, l)| l).collect();
        assert_eq!(a, b);
        let mut first_pixels: Vec<f32> = batch_iterator(&ds, 4, 2)
            .unwrap()
            .flat_map(|(t, _)| t.data().iter().step_by(4).copied().collect::<Vec<_>>())
            .collect();
        first_pixels.sort_by(f32::total_cmp);
        assert_eq!(first_pixels, (0..10).map(|i| i as f32).collect::<Vec<_>>());
    }

    #[test]
    fn flip_is_an_involution_and_moves_column_zero() {
        let ds = tiny_dataset(&[1]);
        let img = ds.image(0);
        let flipped = flip_horizontal(img, ds.image_shape());
        assert_eq!(flipped[0], img[1]);
        assert_eq!(flipped[1], img[0]);
        assert_eq!(flip_horizontal(&flipped, ds.image_shape()), img);
    }

    #[test]
    fn mirror_augment_reaches_target_count() {
        let ds = tiny_dataset(&[2, 5]);
        let out = mirror_augment(&ds, 0, 9, 3).unwrap();
        assert_eq!(out.class_count(0), 9);
        assert_eq!(out.class_count(1), 5);
        // Appended images are flips of originals.
        let appended = out.image(out.class_indices(0)[2]);
        let candidates: Vec<Vec<f32>> = (0..2)
            .map(|i| flip_horizontal(ds.image(ds.class_indices(0)[i]), ds.image_shape()))
            .collect();
        assert!(candidates.iter().any(|c| c.as_slice() == appended));
    }

    #[test]
    fn synth_mixture_builds_k_classes_on_a_ring() {
        let ds = synth_mixture(8, &[1000; 8], 0.05, 5).unwrap();
        assert_eq!(ds.len(), 8000);
        assert_eq!(ds.n_classes(), 8);
        assert_eq!(ds.image_shape(), [2, 1, 1]);
        // Per-mode empirical mean within 3·spread/√1000 of the mode center.
        let tol = 3.0 * 0.05 / (1000f64).sqrt();
        for mode in 0..8 {
            let angle = 2.0 * std::f64::consts::PI * mode as f64 / 8.0;
            let (cx, cy) = (RING_RADIUS * angle.cos(), RING_RADIUS * angle.sin());
            let (mut mx, mut my) = (0.0f64, 0.0f64);
            for &i in ds.class_indices(mode) {
                mx += ds.image(i)[0] as f64;
                my += ds.image(i)[1] as f64;
            }
            mx /= 1000.0;
            my /= 1000.0;
            assert!((mx - cx).abs() < tol, "mode {mode} mean x {mx} vs {cx}");
            assert!((my - cy).abs() < tol, "mode {mode} mean y {my} vs {cy}");
        }
        // Determinism.
        let ds2 = synth_mixture(8, &[1000; 8], 0.05, 5).unwrap();
        assert_eq!(ds.images, ds2.images);
    }

    #[test]
    fn synth_mixture_rejects_degenerate_requests() {
        assert!(synth_mixture(1, &[10], 0.1, 0).is_err());
        assert!(synth_mixture(3, &[10, 0, 10], 0.1, 0).is_err());
        assert!(synth_mixture(3, &[10, 10], 0.1, 0).is_err());
    }

    #[test]
    fn filter_class_keeps_only_that_class() {
        let ds = tiny_dataset(&[3, 4]);
        let only1 = ds.filter_class(1).unwrap();
        assert_eq!(only1.len(), 4);
        assert!((0..only1.len()).all(|i| only1.label(i) == 1));
        assert!(ds.filter_class(5).is_err());
    }
}
