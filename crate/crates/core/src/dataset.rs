//! Annotation loading, image decoding with placeholder fallback, and
//! deterministic train/validation splitting.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelVector, NUM_LABELS};

/// Side length every loaded image is resized to.
pub const IMAGE_SIDE: usize = 300;
pub const IMAGE_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub text: String,
    #[serde(rename = "image_path", default)]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub labels: Option<LabelVector>,
}

impl TweetRecord {
    pub fn require_labels(&self) -> Result<&LabelVector> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("tweet {} has no labels", self.tweet_id)))
    }
}

/// Square RGB image, height x width x channel, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    side: usize,
    pixels: Vec<f32>,
}

impl ImageTensor {
    pub fn new(side: usize, pixels: Vec<f32>) -> Result<Self> {
        if side == 0 || pixels.len() != side * side * IMAGE_CHANNELS {
            return Err(Error::Input(format!(
                "image tensor of side {side} needs {} values, got {}",
                side * side * IMAGE_CHANNELS,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(ImageTensor { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        ImageTensor {
            side,
            pixels: vec![0.0; side * side * IMAGE_CHANNELS],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.side, self.side, IMAGE_CHANNELS)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.side + x) * IMAGE_CHANNELS + c]
    }
}

/// The all-black stand-in for tweets without a usable image.
pub fn placeholder_image() -> ImageTensor {
    ImageTensor::zeros(IMAGE_SIDE)
}

/// Source of raw image bytes for an image reference.
pub trait ImageFetcher: Send + Sync {
    fn fetch(&self, image_ref: &str) -> Result<Vec<u8>>;
}

/// Reads images from the local filesystem. Relative references resolve
/// against `root` when one is set; `file://` prefixes are accepted.
#[derive(Debug, Clone, Default)]
pub struct FsFetcher {
    root: Option<PathBuf>,
}

impl FsFetcher {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FsFetcher {
            root: Some(root.into()),
        }
    }

    pub fn resolve_path(&self, image_ref: &str) -> Result<PathBuf> {
        if image_ref.contains("://") && !image_ref.starts_with("file://") {
            return Err(Error::Image {
                image_ref: image_ref.to_string(),
                message: "only local files are supported".into(),
            });
        }
        let path = Path::new(image_ref.strip_prefix("file://").unwrap_or(image_ref));
        Ok(match &self.root {
            Some(root) if path.is_relative() => root.join(path),
            _ => path.to_path_buf(),
        })
    }
}

impl ImageFetcher for FsFetcher {
    fn fetch(&self, image_ref: &str) -> Result<Vec<u8>> {
        let path = self.resolve_path(image_ref)?;
        std::fs::read(&path).map_err(|e| Error::Image {
            image_ref: image_ref.to_string(),
            message: format!("{}: {e}", path.display()),
        })
    }
}

/// Decodes, converts to RGB, resizes bilinearly to `side` and scales to [0, 1].
pub fn decode_image(bytes: &[u8], side: usize, image_ref: &str) -> Result<ImageTensor> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Image {
        image_ref: image_ref.to_string(),
        message: e.to_string(),
    })?;
    Ok(resize_bilinear(&img, side))
}

/// Loads a local image file at the standard 300x300 size.
pub fn load_image(image_ref: &str) -> Result<ImageTensor> {
    let bytes = FsFetcher::default().fetch(image_ref)?;
    decode_image(&bytes, IMAGE_SIDE, image_ref)
}

/// Align-corners bilinear resampling: output corners coincide with input
/// corners.
fn resize_bilinear(img: &DynamicImage, side: usize) -> ImageTensor {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let raw = rgb.as_raw();
    let src = |y: usize, x: usize, c: usize| f64::from(raw[(y * w + x) * IMAGE_CHANNELS + c]);
    let coord = |i: usize, n: usize| -> (usize, usize, f64) {
        if side == 1 || n == 1 {
            return (0, 0, 0.0);
        }
        let pos = i as f64 * (n - 1) as f64 / (side - 1) as f64;
        let lo = (pos.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        (lo, hi, pos - lo as f64)
    };
    let xs: Vec<_> = (0..side).map(|x| coord(x, w)).collect();
    let mut pixels = Vec::with_capacity(side * side * IMAGE_CHANNELS);
    for y in 0..side {
        let (y0, y1, fy) = coord(y, h);
        for &(x0, x1, fx) in &xs {
            for c in 0..IMAGE_CHANNELS {
                let top = src(y0, x0, c) * (1.0 - fx) + src(y0, x1, c) * fx;
                let bottom = src(y1, x0, c) * (1.0 - fx) + src(y1, x1, c) * fx;
                let v = (top * (1.0 - fy) + bottom * fy) / 255.0;
                pixels.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    ImageTensor { side, pixels }
}

/// Turns records into image tensors, falling back to the placeholder.
pub struct ImageResolver {
    fetcher: Box<dyn ImageFetcher>,
    side: usize,
}

impl ImageResolver {
    pub fn new(fetcher: impl ImageFetcher + 'static) -> Self {
        Self::with_side(fetcher, IMAGE_SIDE)
    }

    pub fn with_side(fetcher: impl ImageFetcher + 'static, side: usize) -> Self {
        ImageResolver {
            fetcher: Box::new(fetcher),
            side,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn try_load(&self, image_ref: &str) -> Result<ImageTensor> {
        let bytes = self.fetcher.fetch(image_ref)?;
        decode_image(&bytes, self.side, image_ref)
    }

    /// Never fails: missing refs give the placeholder silently, broken refs
    /// give the placeholder with a warning.
    pub fn resolve(&self, record: &TweetRecord) -> ImageTensor {
        let Some(image_ref) = record.image_ref.as_deref() else {
            return ImageTensor::zeros(self.side);
        };
        match self.try_load(image_ref) {
            Ok(img) => img,
            Err(e) => {
                warn!("tweet {}: {e}; using black placeholder", record.tweet_id);
                ImageTensor::zeros(self.side)
            }
        }
    }

    /// Resolves in parallel; output order follows input order.
    pub fn resolve_all(&self, records: &[&TweetRecord]) -> Vec<ImageTensor> {
        records.par_iter().map(|r| self.resolve(r)).collect()
    }
}

/// [`ImageResolver`] over the filesystem at 300x300.
pub fn resolve_image(record: &TweetRecord) -> ImageTensor {
    ImageResolver::new(FsFetcher::default()).resolve(record)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    tweet_id: String,
    text: String,
    #[serde(default)]
    image_path: Option<String>,
    #[serde(default)]
    labels: Option<Vec<i64>>,
}

/// Reads a JSONL annotation file, one record per non-blank line.
pub fn load_annotations(path: &Path) -> Result<Vec<TweetRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(std::io::BufReader::new(file), path)
}

pub fn parse_annotations(reader: impl BufRead, path: &Path) -> Result<Vec<TweetRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.tweet_id.is_empty() {
            return Err(Error::Validation(format!("line {line_no}: empty tweet_id")));
        }
        let labels = raw
            .labels
            .map(|l| LabelVector::from_slice(&l))
            .transpose()
            .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
        if !seen.insert(raw.tweet_id.clone()) {
            return Err(Error::Validation(format!(
                "line {line_no}: duplicate tweet_id {}",
                raw.tweet_id
            )));
        }
        records.push(TweetRecord {
            tweet_id: raw.tweet_id,
            text: raw.text,
            image_ref: raw.image_path,
            labels,
        });
    }
    Ok(records)
}

pub fn write_annotations(path: &Path, records: &[TweetRecord]) -> Result<()> {
    crate::io::write_atomic_with(path, |w| {
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<TweetRecord>,
    pub validation: Vec<TweetRecord>,
    pub seed: u64,
    /// Records left over after taking train and validation.
    pub discarded: usize,
}

/// Seeded shuffle, then the first `train_n` records train and the next
/// `val_n` validate. The rest are dropped.
pub fn split_dataset(
    records: &[TweetRecord],
    train_n: usize,
    val_n: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    let requested = train_n + val_n;
    if requested > records.len() {
        return Err(Error::SplitSize {
            requested,
            available: records.len(),
        });
    }
    for r in records {
        r.require_labels()?;
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let discarded = records.len() - requested;
    if discarded > 0 {
        warn!("split discards {discarded} of {} records", records.len());
    }
    Ok(DatasetSplit {
        train: pick(&order[..train_n]),
        validation: pick(&order[train_n..requested]),
        seed,
        discarded,
    })
}

/// Fraction of positive labels per column over the labeled records.
pub fn label_skew(records: &[TweetRecord]) -> [f64; NUM_LABELS] {
    let mut positives = [0usize; NUM_LABELS];
    let mut n = 0usize;
    for labels in records.iter().filter_map(|r| r.labels.as_ref()) {
        n += 1;
        for (p, &v) in positives.iter_mut().zip(labels.values()) {
            *p += v as usize;
        }
    }
    if n == 0 {
        return [0.0; NUM_LABELS];
    }
    positives.map(|p| p as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb, Rgba};
    use std::io::Write as _;

    fn record(id: &str, labels: Option<[u8; 10]>) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            text: format!("text {id}"),
            image_ref: None,
            labels: labels.map(|l| LabelVector::new(l).unwrap()),
        }
    }

    fn write_png(path: &Path, img: DynamicImage) {
        img.save_with_format(path, image::ImageFormat::Png).unwrap();
    }

    #[test]
    fn annotations_parse_and_validate() {
        let ok = concat!(
            r#"{"tweet_id":"1","text":"hi","image_path":null,"labels":[0,0,1,0,0,0,0,0,0,1]}"#,
            "\n\n",
            r#"{"tweet_id":"2","text":"yo","image_path":"a.png","labels":[1,0,0,0,0,0,0,0,0,0]}"#,
            "\n"
        );
        let recs = parse_annotations(ok.as_bytes(), Path::new("x")).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].image_ref.as_deref(), Some("a.png"));
        assert_eq!(recs[0].labels.unwrap().values()[9], 1);

        assert!(parse_annotations(&b""[..], Path::new("x")).unwrap().is_empty());

        let long = r#"{"tweet_id":"1","text":"","image_path":null,"labels":[0,0,0,0,0,0,0,0,0,0,1]}"#;
        assert!(matches!(
            parse_annotations(long.as_bytes(), Path::new("x")),
            Err(Error::Validation(_))
        ));

        let dup = format!("{}\n{}\n", ok.lines().next().unwrap(), ok.lines().next().unwrap());
        assert!(matches!(
            parse_annotations(dup.as_bytes(), Path::new("x")),
            Err(Error::Validation(m)) if m.contains("duplicate")
        ));

        let broken = format!("{}\n{{not json\n", ok.lines().next().unwrap());
        match parse_annotations(broken.as_bytes(), Path::new("x")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn annotations_roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let recs = vec![record("a", Some([1, 0, 0, 0, 0, 0, 0, 0, 0, 0])), record("b", None)];
        write_annotations(&path, &recs).unwrap();
        assert_eq!(load_annotations(&path).unwrap(), recs);
    }

    #[test]
    fn constant_images_survive_resize() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.png");
        write_png(
            &white,
            DynamicImage::ImageRgb8(ImageBuffer::from_pixel(600, 600, Rgb([255, 255, 255]))),
        );
        let t = load_image(white.to_str().unwrap()).unwrap();
        assert_eq!(t.shape(), (300, 300, 3));
        assert!(t.pixels().iter().all(|&v| v == 1.0));

        let black = dir.path().join("black.png");
        write_png(
            &black,
            DynamicImage::ImageRgb8(ImageBuffer::from_pixel(10, 20, Rgb([0, 0, 0]))),
        );
        let t = load_image(black.to_str().unwrap()).unwrap();
        assert!(t.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkerboard_upscale_matches_hand_interpolation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("check.png");
        let board = ImageBuffer::from_fn(2, 2, |x, y| Luma([if (x + y) % 2 == 0 { 0u8 } else { 255 }]));
        write_png(&path, DynamicImage::ImageLuma8(board));
        let t = load_image(path.to_str().unwrap()).unwrap();
        for c in 0..3 {
            assert_eq!(t.at(0, 0, c), 0.0);
            assert_eq!(t.at(0, 299, c), 1.0);
            assert_eq!(t.at(299, 0, c), 1.0);
            assert_eq!(t.at(299, 299, c), 0.0);
        }
        // (0,1): one step of 1/299 from the black corner toward white
        assert!((t.at(0, 1, 0) - 1.0 / 299.0).abs() < 1e-7);
        // (150,150): 2 f (1 - f) with f = 150/299
        assert!((t.at(150, 150, 0) - 44700.0 / 89401.0).abs() < 1e-6);
        for y in 0..300 {
            for x in 0..300 {
                let corner = (y == 0 || y == 299) && (x == 0 || x == 299);
                let v = t.at(y, x, 1);
                if !corner {
                    assert!(v > 0.0 && v < 1.0, "({y},{x}) = {v}");
                }
            }
        }
    }

    #[test]
    fn rgba_drops_alpha() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        write_png(
            &path,
            DynamicImage::ImageRgba8(ImageBuffer::from_pixel(3, 3, Rgba([255, 0, 255, 10]))),
        );
        let t = load_image(path.to_str().unwrap()).unwrap();
        assert_eq!((t.at(5, 5, 0), t.at(5, 5, 1), t.at(5, 5, 2)), (1.0, 0.0, 1.0));
    }

    #[test]
    fn placeholder_is_black_300() {
        let p = placeholder_image();
        assert_eq!(p.shape(), (300, 300, 3));
        assert_eq!(p.pixels().iter().sum::<f32>(), 0.0);
    }

    #[test]
    fn resolve_falls_back_to_placeholder() {
        let dir = tempfile::tempdir().unwrap();
        let resolver = ImageResolver::new(FsFetcher::new(dir.path()));

        let mut r = record("x", None);
        assert_eq!(resolver.resolve(&r), placeholder_image());

        r.image_ref = Some("missing.png".into());
        assert_eq!(resolver.resolve(&r), placeholder_image());

        let mut f = std::fs::File::create(dir.path().join("junk.png")).unwrap();
        f.write_all(b"definitely not a png").unwrap();
        r.image_ref = Some("junk.png".into());
        assert!(matches!(resolver.try_load("junk.png"), Err(Error::Image { .. })));
        assert_eq!(resolver.resolve(&r), placeholder_image());

        write_png(
            &dir.path().join("ok.png"),
            DynamicImage::ImageRgb8(ImageBuffer::from_pixel(4, 4, Rgb([255, 255, 255]))),
        );
        r.image_ref = Some("ok.png".into());
        let img = resolver.resolve(&r);
        assert!(img.pixels().iter().all(|&v| v == 1.0));

        r.image_ref = Some("https://example.com/a.jpg".into());
        assert_eq!(resolver.resolve(&r), placeholder_image());
    }

    #[test]
    fn split_counts_and_determinism() {
        let recs: Vec<_> = (0..7172)
            .map(|i| record(&i.to_string(), Some([0; 10])))
            .collect();
        let s = split_dataset(&recs, 5562, 621, 7).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.discarded), (5562, 621, 989));
        let train_ids: HashSet<_> = s.train.iter().map(|r| &r.tweet_id).collect();
        assert!(s.validation.iter().all(|r| !train_ids.contains(&r.tweet_id)));
        assert_eq!(split_dataset(&recs, 5562, 621, 7).unwrap(), s);
        assert_ne!(split_dataset(&recs, 5562, 621, 8).unwrap().train, s.train);

        let small = &recs[..10];
        let s = split_dataset(small, 10, 0, 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len()), (10, 0));

        assert!(matches!(
            split_dataset(small, 8, 3, 1),
            Err(Error::SplitSize { requested: 11, available: 10 })
        ));
        let unlabeled = vec![record("u", None)];
        assert!(split_dataset(&unlabeled, 1, 0, 0).is_err());
    }

    #[test]
    fn skew_counts_positives() {
        let mut recs = Vec::new();
        for i in 0..25 {
            let mut l = [0u8; 10];
            l[2] = u8::from(i == 0);
            l[0] = u8::from(i % 5 == 0);
            recs.push(record(&i.to_string(), Some(l)));
        }
        recs.push(record("unlabeled", None));
        let skew = label_skew(&recs);
        assert_eq!(skew[2], 1.0 / 25.0);
        assert_eq!(skew[0], 5.0 / 25.0);
        assert_eq!(skew[9], 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn split_is_pure_and_disjoint(n in 0usize..60, a in 0usize..60, b in 0usize..60, seed: u64) {
                let recs: Vec<_> = (0..n).map(|i| record(&i.to_string(), Some([0; 10]))).collect();
                match split_dataset(&recs, a, b, seed) {
                    Ok(s) => {
                        prop_assert_eq!(s.train.len(), a);
                        prop_assert_eq!(s.validation.len(), b);
                        prop_assert_eq!(s.discarded, n - a - b);
                        let ids: HashSet<_> = s.train.iter().map(|r| r.tweet_id.clone()).collect();
                        prop_assert!(s.validation.iter().all(|r| !ids.contains(&r.tweet_id)));
                        prop_assert_eq!(split_dataset(&recs, a, b, seed).unwrap(), s);
                    }
                    Err(_) => prop_assert!(a + b > n),
                }
            }

            #[test]
            fn decoded_images_stay_in_range(w in 1u32..12, h in 1u32..12, seed: u64, side in 1usize..20) {
                let mut state = seed;
                let img = ImageBuffer::from_fn(w, h, |_, _| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let b = (state >> 33) as u8;
                    Rgb([b, b.wrapping_mul(3), b.wrapping_add(91)])
                });
                let mut bytes = Vec::new();
                DynamicImage::ImageRgb8(img)
                    .write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
                    .unwrap();
                let t = decode_image(&bytes, side, "mem").unwrap();
                prop_assert_eq!(t.shape(), (side, side, 3));
                prop_assert!(t.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            }

            #[test]
            fn corrupt_bytes_still_resolve(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
                let dir = tempfile::tempdir().unwrap();
                std::fs::write(dir.path().join("x.png"), &bytes).unwrap();
                let resolver = ImageResolver::with_side(FsFetcher::new(dir.path()), 16);
                let mut r = record("x", None);
                r.image_ref = Some("x.png".into());
                let t = resolver.resolve(&r);
                prop_assert_eq!(t.shape(), (16, 16, 3));
                prop_assert!(t.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
