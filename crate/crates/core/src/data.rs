//! Dataset ingestion (IDX files, optionally gzipped), per-class subset
//! sampling, synthetic toys, and mean-subtraction preprocessing.
//!
//! There is deliberately no download logic: loaders take file paths only.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::DataShape;
use crate::numerics::{Rng, Tensor};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A labelled dataset. Images are stored as one flat row per sample; the
/// per-sample layout is recorded in `sample_shape`. `provenance` maps each
/// row back to its index in the originally loaded dataset, surviving
/// subsetting, so leakage checks stay possible.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Tensor, // [N, elems]
    labels: Vec<usize>,
    class_count: usize,
    provenance: Vec<usize>,
    sample_shape: DataShape,
}

impl Dataset {
    pub fn new(
        images: Tensor,
        labels: Vec<usize>,
        class_count: usize,
        sample_shape: DataShape,
    ) -> Result<Dataset> {
        let n = images.shape().first().copied().unwrap_or(0);
        if images.shape().len() != 2 || images.shape()[1] != sample_shape.elems() {
            return Err(Error::Shape(format!(
                "image tensor {:?} does not match sample shape {:?}",
                images.shape(),
                sample_shape
            )));
        }
        if labels.len() != n {
            return Err(Error::Mismatch(format!(
                "{n} images vs {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::BadLabel {
                label: bad,
                classes: class_count,
                sample: labels.iter().position(|&l| l == bad).unwrap(),
            });
        }
        images.check_finite("dataset images")?;
        Ok(Dataset {
            images,
            labels,
            class_count,
            provenance: (0..n).collect(),
            sample_shape,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    pub fn sample_shape(&self) -> DataShape {
        self.sample_shape
    }

    /// Copy the given rows into a batch tensor plus label vector.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let elems = self.sample_shape.elems();
        let mut data = Vec::with_capacity(indices.len() * elems);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.images.row(i));
            labels.push(self.labels[i]);
        }
        (
            Tensor::from_vec(&[indices.len(), elems], data).unwrap(),
            labels,
        )
    }
}

fn read_file_sniffing_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                file: path.display().to_string(),
                field: format!("gzip stream ({e})"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: String,
}

impl<'a> IdxReader<'a> {
    fn u32_be(&mut self, field: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::Format {
                file: self.file.clone(),
                field: format!("truncated while reading {field}"),
            });
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                file: self.file.clone(),
                field: format!(
                    "truncated: {field} wants {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Load an IDX image/label file pair (big-endian, magics 0x803/0x801).
/// Gzip containers are detected by their 1f 8b magic and decompressed
/// transparently. Pixels are scaled to [0, 1].
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img_bytes = read_file_sniffing_gzip(images_path)?;
    let mut r = IdxReader {
        bytes: &img_bytes,
        pos: 0,
        file: images_path.display().to_string(),
    };
    let magic = r.u32_be("image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            file: r.file,
            field: format!("image magic: expected 0x{IMAGE_MAGIC:08x}, got 0x{magic:08x}"),
        });
    }
    let count = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    let pixels = r.take(count * rows * cols, "pixel data")?;

    let lbl_bytes = read_file_sniffing_gzip(labels_path)?;
    let mut r = IdxReader {
        bytes: &lbl_bytes,
        pos: 0,
        file: labels_path.display().to_string(),
    };
    let magic = r.u32_be("label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            file: r.file,
            field: format!("label magic: expected 0x{LABEL_MAGIC:08x}, got 0x{magic:08x}"),
        });
    }
    let label_count = r.u32_be("label count")? as usize;
    if label_count != count {
        return Err(Error::Format {
            file: labels_path.display().to_string(),
            field: format!("label count {label_count} does not match image count {count}"),
        });
    }
    let label_bytes = r.take(label_count, "label data")?;

    let data: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(
        Tensor::from_vec(&[count, rows * cols], data)?,
        labels,
        class_count.max(2),
        DataShape::Image {
            c: 1,
            h: rows,
            w: cols,
        },
    )
}

/// Write a dataset back out as an IDX pair. Pixel values are quantized to
/// bytes; a load of the written files reproduces a dataset bit-exactly iff
/// the values were already byte-quantized (all loaders here produce that).
pub fn save_mnist_idx(ds: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let DataShape::Image { c: 1, h, w } = ds.sample_shape() else {
        return Err(Error::InvalidRequest(format!(
            "only single-channel image datasets can be written as IDX, got {:?}",
            ds.sample_shape()
        )));
    };
    let n = ds.len();
    let mut img = Vec::with_capacity(16 + n * h * w);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&(h as u32).to_be_bytes());
    img.extend_from_slice(&(w as u32).to_be_bytes());
    for &v in ds.images().data() {
        img.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    std::fs::write(images_path, img)?;

    let mut lbl = Vec::with_capacity(8 + n);
    lbl.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(n as u32).to_be_bytes());
    lbl.extend(ds.labels().iter().map(|&l| l as u8));
    std::fs::write(labels_path, lbl)?;
    Ok(())
}

/// Uniformly sample `per_class` items from each class without replacement,
/// deterministically per seed. Output rows keep the original dataset order.
pub fn subset_per_class(ds: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::InvalidRequest("per_class must be positive".into()));
    }
    let root = Rng::new(seed);
    let mut chosen = Vec::with_capacity(per_class * ds.class_count());
    for class in 0..ds.class_count() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if members.len() < per_class {
            return Err(Error::InvalidRequest(format!(
                "class {class} has {} samples, need {per_class}",
                members.len()
            )));
        }
        root.substream(class as u64).shuffle(&mut members);
        chosen.extend_from_slice(&members[..per_class]);
    }
    chosen.sort_unstable();

    let elems = ds.sample_shape.elems();
    let mut data = Vec::with_capacity(chosen.len() * elems);
    let mut labels = Vec::with_capacity(chosen.len());
    let mut provenance = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        data.extend_from_slice(ds.images.row(i));
        labels.push(ds.labels[i]);
        provenance.push(ds.provenance[i]);
    }
    Ok(Dataset {
        images: Tensor::from_vec(&[chosen.len(), elems], data)?,
        labels,
        class_count: ds.class_count,
        provenance,
        sample_shape: ds.sample_shape,
    })
}

/// Binary toy: class 0 ~ N(-s e1, I), class 1 ~ N(+s e1, I) with
/// s = separation/2. Rows are class 0 first, then class 1.
pub fn synthetic_two_gaussians(
    n_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || dim == 0 {
        return Err(Error::InvalidRequest(
            "n_per_class and dim must be positive".into(),
        ));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidRequest(format!(
            "separation must be finite and >= 0, got {separation}"
        )));
    }
    let s = separation / 2.0;
    let mut rng = Rng::new(seed);
    let n = 2 * n_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..2usize {
        let shift = if class == 0 { -s } else { s };
        for _ in 0..n_per_class {
            for k in 0..dim {
                let mean = if k == 0 { shift } else { 0.0 };
                data.push(mean + rng.normal());
            }
            labels.push(class);
        }
    }
    Dataset::new(
        Tensor::from_vec(&[n, dim], data)?,
        labels,
        2,
        DataShape::Flat(dim),
    )
}

// Seven-segment style glyph strokes in a unit box, (x0, y0, x1, y1) with
// y pointing down. Used by the procedural digit toy.
const SEG_A: [f64; 4] = [0.20, 0.08, 0.80, 0.08];
const SEG_B: [f64; 4] = [0.85, 0.14, 0.85, 0.46];
const SEG_C: [f64; 4] = [0.85, 0.54, 0.85, 0.86];
const SEG_D: [f64; 4] = [0.20, 0.92, 0.80, 0.92];
const SEG_E: [f64; 4] = [0.15, 0.54, 0.15, 0.86];
const SEG_F: [f64; 4] = [0.15, 0.14, 0.15, 0.46];
const SEG_G: [f64; 4] = [0.20, 0.50, 0.80, 0.50];

fn glyph_segments(digit: usize) -> &'static [[f64; 4]] {
    match digit {
        0 => &[SEG_A, SEG_B, SEG_C, SEG_D, SEG_E, SEG_F],
        1 => &[SEG_B, SEG_C],
        2 => &[SEG_A, SEG_B, SEG_G, SEG_E, SEG_D],
        3 => &[SEG_A, SEG_B, SEG_G, SEG_C, SEG_D],
        4 => &[SEG_F, SEG_G, SEG_B, SEG_C],
        5 => &[SEG_A, SEG_F, SEG_G, SEG_C, SEG_D],
        6 => &[SEG_A, SEG_F, SEG_G, SEG_E, SEG_D, SEG_C],
        7 => &[SEG_A, SEG_B, SEG_C],
        8 => &[SEG_A, SEG_B, SEG_C, SEG_D, SEG_E, SEG_F, SEG_G],
        9 => &[SEG_A, SEG_B, SEG_C, SEG_D, SEG_F, SEG_G],
        _ => unreachable!(),
    }
}

const DIGIT_SIDE: usize = 28;

fn point_segment_dist(px: f64, py: f64, seg: &[f64; 4]) -> f64 {
    let (x0, y0, x1, y1) = (seg[0], seg[1], seg[2], seg[3]);
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((px - x0) * dx + (py - y0) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (cx, cy) = (x0 + t * dx, y0 + t * dy);
    ((px - cx) * (px - cx) + (py - cy) * (py - cy)).sqrt()
}

/// Procedural 28x28 ten-class digit toy: seven-segment style glyphs under
/// random rotation, scale, shear, and translation, drawn with varying
/// stroke width and pixel noise, then byte-quantized like camera data.
/// Rows are class-major: sample k of class c is row c * n_per_class + k.
pub fn synthetic_digits(n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidRequest("n_per_class must be positive".into()));
    }
    let root = Rng::new(seed);
    let n = 10 * n_per_class;
    let side = DIGIT_SIDE;
    let mut data = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);

    for class in 0..10usize {
        let segments = glyph_segments(class);
        for k in 0..n_per_class {
            let mut rng = root.substream((class * n_per_class + k) as u64);
            let rot = (rng.next_f64() * 2.0 - 1.0) * 0.30;
            let scale = 0.72 + rng.next_f64() * 0.46;
            let shear = (rng.next_f64() * 2.0 - 1.0) * 0.25;
            let tx = (rng.next_f64() * 2.0 - 1.0) * 3.0;
            let ty = (rng.next_f64() * 2.0 - 1.0) * 3.0;
            let thickness = 1.0 + rng.next_f64() * 1.2;
            let gain = 0.55 + rng.next_f64() * 0.45;

            // endpoint transform: center, shear, rotate, scale, translate
            let size = 19.0 * scale;
            let center = (side as f64 - 1.0) / 2.0;
            let (sin, cos) = rot.sin_cos();
            let map = |x: f64, y: f64| -> (f64, f64) {
                let (cx, cy) = (x - 0.5, y - 0.5);
                let sx = cx + shear * cy;
                let rx = cos * sx - sin * cy;
                let ry = sin * sx + cos * cy;
                (center + rx * size + tx, center + ry * size + ty)
            };
            let moved: Vec<[f64; 4]> = segments
                .iter()
                .map(|s| {
                    let (x0, y0) = map(s[0], s[1]);
                    let (x1, y1) = map(s[2], s[3]);
                    [x0, y0, x1, y1]
                })
                .collect();

            for py in 0..side {
                for px in 0..side {
                    let d = moved
                        .iter()
                        .map(|s| point_segment_dist(px as f64, py as f64, s))
                        .fold(f64::INFINITY, f64::min);
                    let ink = ((thickness / 2.0 + 0.5 - d).clamp(0.0, 1.0)) * gain;
                    let noisy = (ink + rng.normal() * 0.13).clamp(0.0, 1.0);
                    data.push((noisy * 255.0).round() / 255.0);
                }
            }
            labels.push(class);
        }
    }
    Dataset::new(
        Tensor::from_vec(&[n, side * side], data)?,
        labels,
        10,
        DataShape::Image {
            c: 1,
            h: side,
            w: side,
        },
    )
}

/// Subtract the per-pixel mean of `train` from `train` and every dataset in
/// `others`. Returns the mean image that was subtracted.
pub fn mean_subtract(train: &mut Dataset, others: &mut [&mut Dataset]) -> Result<Tensor> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let elems = train.sample_shape.elems();
    for other in others.iter() {
        if other.sample_shape.elems() != elems {
            return Err(Error::Shape(format!(
                "sample shapes differ: {:?} vs {:?}",
                train.sample_shape, other.sample_shape
            )));
        }
    }
    let n = train.len() as f64;
    let mut mean = vec![0.0; elems];
    for i in 0..train.len() {
        for (m, &v) in mean.iter_mut().zip(train.images.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let apply = |ds: &mut Dataset| {
        for i in 0..ds.len() {
            for (v, m) in ds.images.row_mut(i).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
    };
    apply(train);
    for other in others {
        apply(other);
    }
    Tensor::from_vec(&[elems], mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tiny_dataset() -> Dataset {
        // 6 samples, 2x2 single-channel, 3 classes
        let vals: Vec<f64> = (0..24).map(|i| (i % 256) as f64 / 255.0).collect();
        Dataset::new(
            Tensor::from_vec(&[6, 4], vals).unwrap(),
            vec![0, 1, 2, 0, 1, 2],
            3,
            DataShape::Image { c: 1, h: 2, w: 2 },
        )
        .unwrap()
    }

    #[test]
    fn idx_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs.idx");
        let lbl = dir.path().join("lbls.idx");
        let ds = tiny_dataset();
        save_mnist_idx(&ds, &img, &lbl).unwrap();
        let back = load_mnist_idx(&img, &lbl).unwrap();
        assert_eq!(back.images().data(), ds.images().data());
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.provenance(), (0..6).collect::<Vec<_>>());
        // loading twice is bitwise identical
        let again = load_mnist_idx(&img, &lbl).unwrap();
        assert_eq!(back.images().data(), again.images().data());
    }

    #[test]
    fn idx_gzip_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs.idx");
        let lbl = dir.path().join("lbls.idx");
        let ds = tiny_dataset();
        save_mnist_idx(&ds, &img, &lbl).unwrap();

        for path in [&img, &lbl] {
            let raw = std::fs::read(path).unwrap();
            let gz_path = path.with_extension("idx.gz");
            let f = std::fs::File::create(&gz_path).unwrap();
            let mut enc = flate2::write::GzEncoder::new(f, flate2::Compression::default());
            enc.write_all(&raw).unwrap();
            enc.finish().unwrap();
        }
        let back = load_mnist_idx(&img.with_extension("idx.gz"), &lbl.with_extension("idx.gz"))
            .unwrap();
        assert_eq!(back.images().data(), ds.images().data());
    }

    #[test]
    fn idx_wrong_magic_named() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs.idx");
        let lbl = dir.path().join("lbls.idx");
        let ds = tiny_dataset();
        save_mnist_idx(&ds, &img, &lbl).unwrap();
        // label file in the image slot: magic 0x801 rejected
        let err = load_mnist_idx(&lbl, &img).unwrap_err();
        assert!(err.to_string().contains("image magic"), "{err}");
    }

    #[test]
    fn idx_truncated_named() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs.idx");
        let lbl = dir.path().join("lbls.idx");
        let ds = tiny_dataset();
        save_mnist_idx(&ds, &img, &lbl).unwrap();
        let mut bytes = std::fs::read(&img).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&img, bytes).unwrap();
        let err = load_mnist_idx(&img, &lbl).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn idx_count_mismatch_named() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs.idx");
        let lbl = dir.path().join("lbls.idx");
        let other_lbl = dir.path().join("short.idx");
        let ds = tiny_dataset();
        save_mnist_idx(&ds, &img, &lbl).unwrap();
        // labels from a smaller dataset
        let small = subset_per_class(&ds, 1, 0).unwrap();
        let tmp_img = dir.path().join("small input.idx");
        save_mnist_idx(&small, &tmp_img, &other_lbl).unwrap();
        let err = load_mnist_idx(&img, &other_lbl).unwrap_err();
        assert!(err.to_string().contains("count"), "{err}");
    }

    #[test]
    fn pixel_scaling_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs.idx");
        let lbl = dir.path().join("lbls.idx");
        let ds = Dataset::new(
            Tensor::from_vec(&[1, 4], vec![1.0, 0.0, 1.0, 0.0]).unwrap(),
            vec![1],
            2,
            DataShape::Image { c: 1, h: 2, w: 2 },
        )
        .unwrap();
        save_mnist_idx(&ds, &img, &lbl).unwrap();
        let back = load_mnist_idx(&img, &lbl).unwrap();
        assert_eq!(back.images().data(), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn subset_exact_histogram_and_determinism() {
        let ds = synthetic_digits(20, 7).unwrap();
        let sub = subset_per_class(&ds, 5, 42).unwrap();
        assert_eq!(sub.len(), 50);
        let mut hist = vec![0usize; 10];
        for &l in sub.labels() {
            hist[l] += 1;
        }
        assert!(hist.iter().all(|&h| h == 5));

        let sub2 = subset_per_class(&ds, 5, 42).unwrap();
        assert_eq!(sub.provenance(), sub2.provenance());
        let sub3 = subset_per_class(&ds, 5, 43).unwrap();
        assert_ne!(sub.provenance(), sub3.provenance());
    }

    #[test]
    fn subset_provenance_unique() {
        let ds = synthetic_digits(10, 3).unwrap();
        let sub = subset_per_class(&ds, 8, 9).unwrap();
        let mut prov = sub.provenance().to_vec();
        prov.sort_unstable();
        prov.dedup();
        assert_eq!(prov.len(), sub.len());
    }

    #[test]
    fn subset_full_class_is_permutation() {
        let ds = tiny_dataset();
        let sub = subset_per_class(&ds, 2, 5).unwrap();
        assert_eq!(sub.len(), 6);
        let mut prov = sub.provenance().to_vec();
        prov.sort_unstable();
        assert_eq!(prov, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn subset_insufficient_class_errors() {
        let ds = tiny_dataset();
        assert!(matches!(
            subset_per_class(&ds, 3, 5),
            Err(Error::InvalidRequest(_))
        ));
    }

    #[test]
    fn two_gaussians_deterministic_and_balanced() {
        let a = synthetic_two_gaussians(50, 3, 4.0, 11).unwrap();
        let b = synthetic_two_gaussians(50, 3, 4.0, 11).unwrap();
        assert_eq!(a.images().data(), b.images().data());
        assert_eq!(a.len(), 100);
        assert_eq!(a.labels().iter().filter(|&&l| l == 0).count(), 50);
        // first feature separates the means
        let mean0: f64 = (0..50).map(|i| a.images().row(i)[0]).sum::<f64>() / 50.0;
        let mean1: f64 = (50..100).map(|i| a.images().row(i)[0]).sum::<f64>() / 50.0;
        assert!(mean1 - mean0 > 2.0, "means {mean0} vs {mean1}");
    }

    #[test]
    fn digits_quantized_and_deterministic() {
        let a = synthetic_digits(3, 21).unwrap();
        let b = synthetic_digits(3, 21).unwrap();
        assert_eq!(a.images().data(), b.images().data());
        assert_eq!(a.len(), 30);
        assert_eq!(a.sample_shape(), DataShape::Image { c: 1, h: 28, w: 28 });
        for &v in a.images().data() {
            assert!((0.0..=1.0).contains(&v));
            let byte = v * 255.0;
            assert!((byte - byte.round()).abs() < 1e-9);
        }
        // distinct classes render distinct images
        let c = synthetic_digits(3, 22).unwrap();
        assert_ne!(a.images().data(), c.images().data());
    }

    #[test]
    fn digits_survive_idx_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("d.idx");
        let lbl = dir.path().join("l.idx");
        let ds = synthetic_digits(2, 5).unwrap();
        save_mnist_idx(&ds, &img, &lbl).unwrap();
        let back = load_mnist_idx(&img, &lbl).unwrap();
        assert_eq!(back.images().data(), ds.images().data());
        assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn mean_subtract_constant_becomes_zero() {
        let mut ds = Dataset::new(
            Tensor::filled(&[4, 3], 0.7),
            vec![0, 1, 0, 1],
            2,
            DataShape::Flat(3),
        )
        .unwrap();
        let mean = mean_subtract(&mut ds, &mut []).unwrap();
        assert!(ds.images().data().iter().all(|&v| v == 0.0));
        assert!(mean.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn mean_subtract_uses_train_statistics() {
        let mut train = Dataset::new(
            Tensor::filled(&[5, 2], 0.2),
            vec![0; 5],
            2,
            DataShape::Flat(2),
        )
        .unwrap();
        let mut test = Dataset::new(
            Tensor::filled(&[3, 2], 0.8),
            vec![1; 3],
            2,
            DataShape::Flat(2),
        )
        .unwrap();
        mean_subtract(&mut train, &mut [&mut test]).unwrap();
        for &v in test.images().data() {
            assert!((v - 0.6).abs() < 1e-15);
        }
        // train mean recomputed after subtraction is zero
        let m: f64 = train.images().data().iter().sum::<f64>() / 10.0;
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn gather_extracts_rows() {
        let ds = tiny_dataset();
        let (batch, labels) = ds.gather(&[4, 0]);
        assert_eq!(batch.shape(), &[2, 4]);
        assert_eq!(batch.row(0), ds.images().row(4));
        assert_eq!(batch.row(1), ds.images().row(0));
        assert_eq!(labels, vec![1, 0]);
    }
}
