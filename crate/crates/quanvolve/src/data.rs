//! MNIST ingestion, 14×14 downsampling, balanced splits, and the binary
//! cache of pre-encoded quantum states.
//!
//! Cache format (QENC, all little-endian): magic `QENC`, version u8 = 1,
//! encoder u8 (0 threshold / 1 FRQI / 2 NEQR), n u8, num_qubits u8, storage
//! u8 (0 dense / 1 sparse), patches_per_image u16, image_count u32; then per
//! image a label u8 followed by one record per patch. Dense records hold
//! `2^Q` (re, im) f64 pairs; sparse records hold a u32 entry count, then
//! (u32 index, f64 re, f64 im) per nonzero. Threshold and NEQR states are
//! stored sparse (a 16-qubit threshold state is a single basis state; dense
//! storage would be three orders of magnitude larger), FRQI dense.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::encoders::{
    encode_frqi, encode_neqr, encode_threshold, EncoderKind, ThresholdConfig,
};
use crate::error::{Error, Result};
use crate::quanvolution::{extract_patches, FilterSpec};
use crate::rng::{derive_seed, SplitMix64, TAG_SPLIT};
use crate::simulator::{QuantumState, StateData};

/// Edge length of raw MNIST images.
pub const RAW_EDGE: usize = 28;
/// Edge length after downsampling.
pub const EDGE: usize = 14;
/// Number of classes.
pub const NUM_CLASSES: usize = 10;
/// Environment variable consulted for the IDX data directory.
pub const DATA_DIR_ENV: &str = "QUANVOLVE_DATA_DIR";

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const QENC_MAGIC: &[u8; 4] = b"QENC";
const QENC_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!(
                "unknown split {other:?}, expected train, val or test"
            ))),
        }
    }
}

/// Raw 28×28 images straight out of the IDX files.
#[derive(Debug, Clone)]
pub struct RawDataset {
    images: Vec<Vec<u8>>,
    labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }
}

/// A balanced, downsampled 14×14 split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    split: Split,
    images: Vec<Vec<u8>>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Requires 14×14 images, labels below 10, and an equal number of
    /// samples per class.
    pub fn new(split: Split, images: Vec<Vec<u8>>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::contract(format!(
                "{} images vs {} labels",
                images.len(),
                labels.len()
            )));
        }
        if images.iter().any(|img| img.len() != EDGE * EDGE) {
            return Err(Error::contract("dataset image is not 14x14"));
        }
        let mut per_class = [0usize; NUM_CLASSES];
        for &label in &labels {
            if usize::from(label) >= NUM_CLASSES {
                return Err(Error::contract(format!("label {label} out of range")));
            }
            per_class[usize::from(label)] += 1;
        }
        if per_class.iter().any(|&c| c != per_class[0]) {
            return Err(Error::contract(format!(
                "unbalanced split: per-class counts {per_class:?}"
            )));
        }
        Ok(Self {
            split,
            images,
            labels,
        })
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }
}

fn read_exact_or(path: &Path, r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| {
        Error::IdxTruncated(format!(
            "{} ended before the promised payload",
            path.display()
        ))
    })
}

fn read_u32_be(path: &Path, r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact_or(path, r, &mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

/// Loads an MNIST-style IDX image/label file pair of 28×28 images.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32_be(images_path, &mut ir)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxBadMagic {
            path: images_path.display().to_string(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(images_path, &mut ir)? as usize;
    let rows = read_u32_be(images_path, &mut ir)? as usize;
    let cols = read_u32_be(images_path, &mut ir)? as usize;
    if rows != RAW_EDGE || cols != RAW_EDGE {
        return Err(Error::Decode(format!(
            "expected {RAW_EDGE}x{RAW_EDGE} images, file holds {rows}x{cols}"
        )));
    }
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        let mut img = vec![0u8; rows * cols];
        read_exact_or(images_path, &mut ir, &mut img)?;
        images.push(img);
    }

    let mut lr = BufReader::new(File::open(labels_path)?);
    let magic = read_u32_be(labels_path, &mut lr)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxBadMagic {
            path: labels_path.display().to_string(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let label_count = read_u32_be(labels_path, &mut lr)? as usize;
    let mut labels = vec![0u8; label_count];
    read_exact_or(labels_path, &mut lr, &mut labels)?;

    if images.len() != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(RawDataset { images, labels })
}

/// 2×2 mean pooling, 28×28 → 14×14, means rounded half-up.
pub fn downsample(raw: &[u8]) -> Result<Vec<u8>> {
    if raw.len() != RAW_EDGE * RAW_EDGE {
        return Err(Error::contract(format!(
            "downsample expects a {RAW_EDGE}x{RAW_EDGE} image, got {} bytes",
            raw.len()
        )));
    }
    let mut out = vec![0u8; EDGE * EDGE];
    for y in 0..EDGE {
        for x in 0..EDGE {
            let sum: u32 = [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(dy, dx)| u32::from(raw[(2 * y + dy) * RAW_EDGE + 2 * x + dx]))
                .sum();
            out[y * EDGE + x] = ((sum + 2) / 4) as u8;
        }
    }
    Ok(out)
}

/// Deterministic balanced splits: per class, a seeded shuffle of that
/// class's samples (in file order) is cut into `train/10`, `val/10` and
/// `test/10` consecutive picks, so splits are disjoint. Each split then
/// interleaves classes 0..9 round-robin and is downsampled to 14×14.
pub fn make_splits(
    raw: &RawDataset,
    sizes: (usize, usize, usize),
    split_seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (train, val, test) = sizes;
    for (name, size) in [("train", train), ("val", val), ("test", test)] {
        if size == 0 || size % NUM_CLASSES != 0 {
            return Err(Error::config(format!(
                "{name} size {size} is not a positive multiple of {NUM_CLASSES}"
            )));
        }
    }
    let per_split = [train / NUM_CLASSES, val / NUM_CLASSES, test / NUM_CLASSES];
    let needed: usize = per_split.iter().sum();

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for i in 0..raw.len() {
        let label = usize::from(raw.label(i));
        if label >= NUM_CLASSES {
            return Err(Error::Decode(format!("label {label} out of range")));
        }
        by_class[label].push(i);
    }
    let mut rng = SplitMix64::new(derive_seed(split_seed, TAG_SPLIT));
    let mut picks: Vec<Vec<usize>> = Vec::with_capacity(NUM_CLASSES);
    for (class, indices) in by_class.iter_mut().enumerate() {
        if indices.len() < needed {
            return Err(Error::config(format!(
                "class {class} has {} samples, splits need {needed}",
                indices.len()
            )));
        }
        rng.shuffle(indices);
        picks.push(indices[..needed].to_vec());
    }

    let mut offset = 0;
    let mut splits = Vec::with_capacity(3);
    for (split, &count) in [Split::Train, Split::Val, Split::Test].iter().zip(&per_split) {
        let mut images = Vec::with_capacity(count * NUM_CLASSES);
        let mut labels = Vec::with_capacity(count * NUM_CLASSES);
        for k in 0..count {
            for class_picks in &picks {
                let i = class_picks[offset + k];
                images.push(downsample(raw.image(i))?);
                labels.push(raw.label(i));
            }
        }
        splits.push(Dataset::new(*split, images, labels)?);
        offset += count;
    }
    let test_ds = splits.pop().expect("three splits");
    let val_ds = splits.pop().expect("three splits");
    let train_ds = splits.pop().expect("three splits");
    Ok((train_ds, val_ds, test_ds))
}

/// How patch states are laid out in a cache file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Sparse,
}

impl Storage {
    /// Threshold and NEQR states are few-hot; FRQI has full dense support.
    pub fn for_encoder(encoder: EncoderKind) -> Storage {
        match encoder {
            EncoderKind::Frqi => Storage::Dense,
            EncoderKind::Threshold | EncoderKind::Neqr => Storage::Sparse,
        }
    }

    fn code(self) -> u8 {
        match self {
            Storage::Dense => 0,
            Storage::Sparse => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Storage::Dense),
            1 => Ok(Storage::Sparse),
            other => Err(Error::CacheFormat(format!("unknown storage code {other}"))),
        }
    }
}

/// A pre-encoded dataset: per image, its label and the encoded state of
/// every patch.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    encoder: EncoderKind,
    n: u32,
    num_qubits: usize,
    storage: Storage,
    patches_per_image: usize,
    labels: Vec<u8>,
    states: Vec<Vec<QuantumState>>,
}

impl EncodedDataset {
    pub fn encoder(&self) -> EncoderKind {
        self.encoder
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn patches_per_image(&self) -> usize {
        self.patches_per_image
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, image: usize) -> u8 {
        self.labels[image]
    }

    pub fn patch_states(&self, image: usize) -> &[QuantumState] {
        &self.states[image]
    }
}

/// Encodes every patch of every image; images are processed in parallel,
/// output order matches the dataset.
pub fn preencode(
    dataset: &Dataset,
    encoder: EncoderKind,
    filter: &FilterSpec,
    threshold: ThresholdConfig,
) -> Result<EncodedDataset> {
    let (rows, cols) = filter.output_grid(EDGE, EDGE)?;
    let patches_per_image = rows * cols;
    let states: Vec<Vec<QuantumState>> = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            extract_patches(dataset.image(i), EDGE, EDGE, filter)?
                .iter()
                .map(|patch| {
                    Ok(match encoder {
                        EncoderKind::Threshold => encode_threshold(patch, threshold)?.1,
                        EncoderKind::Frqi => encode_frqi(patch)?.1,
                        EncoderKind::Neqr => encode_neqr(patch, true)?.1,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let num_qubits = states
        .first()
        .and_then(|img| img.first())
        .map(|s| s.num_qubits())
        .ok_or_else(|| Error::contract("cannot pre-encode an empty dataset"))?;
    Ok(EncodedDataset {
        encoder,
        n: filter.n(),
        num_qubits,
        storage: Storage::for_encoder(encoder),
        patches_per_image,
        labels: (0..dataset.len()).map(|i| dataset.label(i)).collect(),
        states,
    })
}

struct CacheWriter<W: Write> {
    w: W,
}

impl<W: Write> CacheWriter<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.w.write_all(&[v])?)
    }

    fn u16(&mut self, v: u16) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }

    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.w.write_all(&v.to_le_bytes())?)
    }
}

impl EncodedDataset {
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = CacheWriter {
            w: BufWriter::new(File::create(path)?),
        };
        out.w.write_all(QENC_MAGIC)?;
        out.u8(QENC_VERSION)?;
        out.u8(self.encoder.code())?;
        out.u8(self.n as u8)?;
        out.u8(self.num_qubits as u8)?;
        out.u8(self.storage.code())?;
        out.u16(self.patches_per_image as u16)?;
        out.u32(self.labels.len() as u32)?;
        for (label, patches) in self.labels.iter().zip(&self.states) {
            out.u8(*label)?;
            for state in patches {
                match self.storage {
                    Storage::Dense => {
                        let dense = state.to_dense();
                        let StateData::Dense(amps) = dense.data() else {
                            unreachable!("to_dense returned sparse")
                        };
                        for a in amps {
                            out.f64(a.re)?;
                            out.f64(a.im)?;
                        }
                    }
                    Storage::Sparse => {
                        let sparse = state.to_sparse();
                        let StateData::Sparse(entries) = sparse.data() else {
                            unreachable!("to_sparse returned dense")
                        };
                        out.u32(entries.len() as u32)?;
                        for (index, a) in entries {
                            out.u32(*index as u32)?;
                            out.f64(a.re)?;
                            out.f64(a.im)?;
                        }
                    }
                }
            }
        }
        out.w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let fail = |msg: &str| Error::CacheFormat(format!("{}: {msg}", path.display()));

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| fail("shorter than the header"))?;
        if &magic != QENC_MAGIC {
            return Err(fail("bad magic, not a QENC cache"));
        }
        let mut header = [0u8; 5];
        r.read_exact(&mut header)
            .map_err(|_| fail("shorter than the header"))?;
        let [version, encoder_code, n, num_qubits, storage_code] = header;
        if version != QENC_VERSION {
            return Err(fail(&format!("unsupported version {version}")));
        }
        let encoder = EncoderKind::from_code(encoder_code)?;
        let storage = Storage::from_code(storage_code)?;
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf)
            .map_err(|_| fail("shorter than the header"))?;
        let patches_per_image = usize::from(u16::from_le_bytes(u16buf));
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)
            .map_err(|_| fail("shorter than the header"))?;
        let image_count = u32::from_le_bytes(u32buf) as usize;

        let num_qubits = usize::from(num_qubits);
        let dim = 1usize
            .checked_shl(num_qubits as u32)
            .filter(|_| (1..=crate::simulator::MAX_QUBITS).contains(&num_qubits))
            .ok_or_else(|| fail("qubit count out of range"))?;

        let mut f64buf = [0u8; 8];
        let mut labels = Vec::with_capacity(image_count);
        let mut states = Vec::with_capacity(image_count);
        for _ in 0..image_count {
            let mut label = [0u8; 1];
            r.read_exact(&mut label).map_err(|_| fail("truncated"))?;
            labels.push(label[0]);
            let mut patches = Vec::with_capacity(patches_per_image);
            for _ in 0..patches_per_image {
                let state = match storage {
                    Storage::Dense => {
                        let mut amps = Vec::with_capacity(dim);
                        for _ in 0..dim {
                            r.read_exact(&mut f64buf).map_err(|_| fail("truncated"))?;
                            let re = f64::from_le_bytes(f64buf);
                            r.read_exact(&mut f64buf).map_err(|_| fail("truncated"))?;
                            let im = f64::from_le_bytes(f64buf);
                            amps.push(num_complex::Complex64::new(re, im));
                        }
                        QuantumState::from_dense(num_qubits, amps)?
                    }
                    Storage::Sparse => {
                        r.read_exact(&mut u32buf).map_err(|_| fail("truncated"))?;
                        let count = u32::from_le_bytes(u32buf) as usize;
                        if count > dim {
                            return Err(fail("sparse entry count exceeds dimension"));
                        }
                        let mut entries = Vec::with_capacity(count);
                        for _ in 0..count {
                            r.read_exact(&mut u32buf).map_err(|_| fail("truncated"))?;
                            let index = u32::from_le_bytes(u32buf) as usize;
                            r.read_exact(&mut f64buf).map_err(|_| fail("truncated"))?;
                            let re = f64::from_le_bytes(f64buf);
                            r.read_exact(&mut f64buf).map_err(|_| fail("truncated"))?;
                            let im = f64::from_le_bytes(f64buf);
                            entries.push((index, num_complex::Complex64::new(re, im)));
                        }
                        QuantumState::from_sparse(num_qubits, entries)?
                    }
                };
                if (state.norm_sqr() - 1.0).abs() > 1e-9 {
                    return Err(fail("stored state is not normalized"));
                }
                patches.push(state);
            }
            states.push(patches);
        }
        let mut trailer = [0u8; 1];
        if r.read(&mut trailer)? != 0 {
            return Err(fail("trailing bytes after the promised payload"));
        }
        Ok(Self {
            encoder,
            n: u32::from(n),
            num_qubits,
            storage,
            patches_per_image,
            labels,
            states,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::path::PathBuf;

    fn fixture_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testdata/mnist")
    }

    fn fixture() -> RawDataset {
        load_idx(
            &fixture_dir().join("train-images-idx3-ubyte"),
            &fixture_dir().join("train-labels-idx1-ubyte"),
        )
        .unwrap()
    }

    #[test]
    fn downsample_examples() {
        let flat = vec![128u8; RAW_EDGE * RAW_EDGE];
        assert_eq!(downsample(&flat).unwrap(), vec![128u8; EDGE * EDGE]);

        let mut img = vec![0u8; RAW_EDGE * RAW_EDGE];
        // top-left block [10, 20, 30, 40] -> mean 25
        img[0] = 10;
        img[1] = 20;
        img[RAW_EDGE] = 30;
        img[RAW_EDGE + 1] = 40;
        // next block all 255
        img[2] = 255;
        img[3] = 255;
        img[RAW_EDGE + 2] = 255;
        img[RAW_EDGE + 3] = 255;
        let out = downsample(&img).unwrap();
        assert_eq!(out[0], 25);
        assert_eq!(out[1], 255);
        assert_eq!(out[2], 0);

        assert!(downsample(&[0u8; 100]).is_err());
    }

    #[test]
    fn downsample_rounds_half_up() {
        let mut img = vec![0u8; RAW_EDGE * RAW_EDGE];
        img[0] = 1;
        img[1] = 1;
        assert_eq!(downsample(&img).unwrap()[0], 1); // mean 0.5 -> 1
        img[1] = 0;
        assert_eq!(downsample(&img).unwrap()[0], 0); // mean 0.25 -> 0
    }

    #[test]
    fn fixture_loads_and_is_plausible_mnist() {
        let raw = fixture();
        assert_eq!(raw.len(), 2500);
        assert!(raw.labels.iter().all(|&l| l < 10));
        let mut per_class = [0usize; 10];
        for &l in &raw.labels {
            per_class[usize::from(l)] += 1;
        }
        assert_eq!(per_class, [250; 10]);
        // Foreground/background structure: borders dark, some ink inside.
        assert!(raw.image(0).iter().filter(|&&p| p > 0).count() > 30);
    }

    #[test]
    fn idx_error_cases() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("imgs");
        let lbl_path = dir.path().join("lbls");

        std::fs::write(&img_path, [0u8; 16]).unwrap();
        std::fs::write(&lbl_path, [0u8; 8]).unwrap();
        assert!(matches!(
            load_idx(&img_path, &lbl_path),
            Err(Error::IdxBadMagic { .. })
        ));

        // Valid magic, promised 2 images but only 1 present.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&[7u8; 784]);
        std::fs::write(&img_path, &bytes).unwrap();
        assert!(matches!(
            load_idx(&img_path, &lbl_path),
            Err(Error::IdxTruncated(_))
        ));

        // One image, two labels.
        bytes.clear();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&1u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&28u32.to_be_bytes());
        bytes.extend_from_slice(&[7u8; 784]);
        std::fs::write(&img_path, &bytes).unwrap();
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&2u32.to_be_bytes());
        lbl.extend_from_slice(&[1u8, 2]);
        std::fs::write(&lbl_path, &lbl).unwrap();
        assert!(matches!(
            load_idx(&img_path, &lbl_path),
            Err(Error::IdxCountMismatch { .. })
        ));
    }

    #[test]
    fn splits_are_balanced_disjoint_and_deterministic() {
        let raw = fixture();
        let (train, val, test) = make_splits(&raw, (100, 10, 10), 42).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (100, 10, 10));
        for ds in [&train, &val, &test] {
            let mut per_class = [0usize; 10];
            for i in 0..ds.len() {
                per_class[usize::from(ds.label(i))] += 1;
            }
            assert!(per_class.iter().all(|&c| c == ds.len() / 10));
        }
        // Disjointness via image content (distinct MNIST digits).
        let key = |img: &[u8]| img.to_vec();
        let train_set: std::collections::HashSet<_> =
            (0..train.len()).map(|i| key(train.image(i))).collect();
        for i in 0..val.len() {
            assert!(!train_set.contains(&key(val.image(i))));
        }
        for i in 0..test.len() {
            assert!(!train_set.contains(&key(test.image(i))));
        }

        let (train2, val2, test2) = make_splits(&raw, (100, 10, 10), 42).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
        assert_eq!(test, test2);
        let (train3, _, _) = make_splits(&raw, (100, 10, 10), 43).unwrap();
        assert_ne!(train, train3);
    }

    #[test]
    fn split_size_validation() {
        let raw = fixture();
        assert!(matches!(
            make_splits(&raw, (101, 10, 10), 42),
            Err(Error::Config(_))
        ));
        // 250 per class available, ask for 260.
        assert!(matches!(
            make_splits(&raw, (2400, 100, 100), 42),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn preencode_round_trips_through_file() {
        let raw = fixture();
        let (_, val, _) = make_splits(&raw, (10, 10, 10), 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for encoder in EncoderKind::ALL {
            for (edge, stride) in [(2usize, 1usize), (4, 2)] {
                let filter = FilterSpec::new(edge, stride).unwrap();
                let enc =
                    preencode(&val, encoder, &filter, ThresholdConfig::default()).unwrap();
                let expected_patches = if edge == 2 { 169 } else { 36 };
                assert_eq!(enc.patches_per_image(), expected_patches);
                assert_eq!(enc.len(), 10);

                let path = dir.path().join(format!("{encoder}-{edge}.qenc"));
                enc.write_to(&path).unwrap();
                let back = EncodedDataset::read_from(&path).unwrap();
                assert_eq!(back.encoder(), encoder);
                assert_eq!(back.n(), filter.n());
                assert_eq!(back.num_qubits(), enc.num_qubits());
                assert_eq!(back.patches_per_image(), expected_patches);
                assert_eq!(back.storage(), Storage::for_encoder(encoder));
                for img in 0..enc.len() {
                    assert_eq!(back.label(img), enc.label(img));
                    for (a, b) in enc.patch_states(img).iter().zip(back.patch_states(img)) {
                        assert!(a.max_abs_diff(b) <= 1e-12);
                        if back.storage() == Storage::Sparse {
                            assert_eq!(a.to_sparse().data(), b.data());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn threshold_cache_records_are_single_entry() {
        let raw = fixture();
        let (_, val, _) = make_splits(&raw, (10, 10, 10), 42).unwrap();
        let filter = FilterSpec::new(2, 1).unwrap();
        let enc = preencode(
            &val,
            EncoderKind::Threshold,
            &filter,
            ThresholdConfig::default(),
        )
        .unwrap();
        for img in 0..enc.len() {
            for state in enc.patch_states(img) {
                assert_eq!(state.support_len(), 1);
            }
        }
    }

    #[test]
    fn cache_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.qenc");
        std::fs::write(&path, b"QENX????????").unwrap();
        assert!(matches!(
            EncodedDataset::read_from(&path),
            Err(Error::CacheFormat(_))
        ));
        std::fs::write(&path, b"QE").unwrap();
        assert!(matches!(
            EncodedDataset::read_from(&path),
            Err(Error::CacheFormat(_))
        ));
    }
}
