//! Sequential and permuted MNIST: IDX parsing, pixel-by-pixel sequences and
//! a checksum-verified download.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use md5::{Digest, Md5};
use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;

use super::sample_rng;
use crate::error::{Error, Result};

/// Overrides the default data directory.
pub const DATA_DIR_ENV: &str = "DEEPSITH_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/mnist";
pub const PIXELS: usize = 784;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const MIRROR: &str = "https://ossci-datasets.s3.amazonaws.com/mnist/";

/// `(file stem, md5 of the .gz)`.
pub const MNIST_FILES: [(&str, &str); 4] = [
    ("train-images-idx3-ubyte", "f68b3c2dcbeaaa9fbdd348bbdeb94873"),
    ("train-labels-idx1-ubyte", "d53e105ee54ea40749a09fcbcd1e9432"),
    ("t10k-images-idx3-ubyte", "9fb629c4189551a2d022fa330f9573f3"),
    ("t10k-labels-idx1-ubyte", "ec29112dd5afa0611ce80d1b7f02629c"),
];

pub fn data_dir(flag: Option<&Path>) -> PathBuf {
    match (flag, std::env::var_os(DATA_DIR_ENV)) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => PathBuf::from(DEFAULT_DATA_DIR),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistSequence {
    pub input: Vec<f64>,
    pub label: usize,
}

/// Raw images kept as bytes; sequences are expanded on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct MnistSet {
    pixels: Vec<u8>,
    labels: Vec<u8>,
    permutation: Option<Vec<usize>>,
}

impl MnistSet {
    pub fn new(pixels: Vec<u8>, labels: Vec<u8>, permutation: Option<Vec<usize>>) -> Result<Self> {
        if pixels.len() != labels.len() * PIXELS {
            return Err(Error::shape(format!("{} pixels", labels.len() * PIXELS), pixels.len()));
        }
        if let Some(p) = &permutation {
            check_permutation(p)?;
        }
        Ok(Self {
            pixels,
            labels,
            permutation,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.permutation.as_deref()
    }

    fn fill(&self, index: usize, out: &mut [f64]) {
        let image = &self.pixels[index * PIXELS..(index + 1) * PIXELS];
        match &self.permutation {
            Some(p) => out
                .iter_mut()
                .zip(p)
                .for_each(|(o, &src)| *o = f64::from(image[src]) / 255.0),
            None => out.iter_mut().zip(image).for_each(|(o, &v)| *o = f64::from(v) / 255.0),
        }
    }

    pub fn sequence(&self, index: usize) -> MnistSequence {
        let mut input = vec![0.0; PIXELS];
        self.fill(index, &mut input);
        MnistSequence {
            input,
            label: usize::from(self.labels[index]),
        }
    }

    /// Inputs `B x 784 x 1` and labels for the given items.
    pub fn batch(&self, indices: &[usize]) -> (Array3<f64>, Vec<usize>) {
        let mut x = Array3::zeros((indices.len(), PIXELS, 1));
        for (row, &i) in x.axis_iter_mut(Axis(0)).zip(indices) {
            let mut row = row;
            self.fill(i, row.as_slice_mut().expect("fresh array is contiguous"));
        }
        (x, indices.iter().map(|&i| usize::from(self.labels[i])).collect())
    }

    /// Keeps the listed items, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            pixels.extend_from_slice(&self.pixels[i * PIXELS..(i + 1) * PIXELS]);
        }
        Self {
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            permutation: self.permutation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistData {
    pub train: MnistSet,
    /// Present when the 80/20 split of the training files was requested.
    pub validation: Option<MnistSet>,
    pub test: MnistSet,
}

fn check_permutation(p: &[usize]) -> Result<()> {
    let mut seen = vec![false; PIXELS];
    if p.len() != PIXELS {
        return Err(Error::shape(PIXELS, p.len()));
    }
    for &i in p {
        if i >= PIXELS || std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid("pixel permutation is not a permutation of 0..784"));
        }
    }
    Ok(())
}

/// The fixed pixel order used for every permuted image.
pub fn pixel_permutation(seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..PIXELS).collect();
    p.shuffle(&mut sample_rng(seed, 0));
    p
}

fn idx_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Idx {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| idx_error(path, "truncated header"))
}

/// Parses an IDX image file; returns `(rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(idx_error(
            path,
            format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    let body = &bytes[16..];
    let want = count * rows * cols;
    if body.len() != want {
        return Err(idx_error(
            path,
            format!("expected {want} pixel bytes, found {}", body.len()),
        ));
    }
    Ok((rows, cols, body.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(idx_error(
            path,
            format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(idx_error(
            path,
            format!("expected {count} labels, found {}", body.len()),
        ));
    }
    if let Some(bad) = body.iter().find(|&&l| l > 9) {
        return Err(idx_error(path, format!("label {bad} out of range")));
    }
    Ok(body.to_vec())
}

/// Reads `stem` or `stem.gz` from `dir`.
fn read_maybe_gz(dir: &Path, stem: &str) -> Result<(PathBuf, Vec<u8>)> {
    let plain = dir.join(stem);
    if plain.exists() {
        return Ok((plain.clone(), fs::read(&plain)?));
    }
    let gz = dir.join(format!("{stem}.gz"));
    let mut out = Vec::new();
    GzDecoder::new(fs::File::open(&gz)?).read_to_end(&mut out)?;
    Ok((gz, out))
}

fn load_pair(dir: &Path, images: &str, labels: &str, permutation: &Option<Vec<usize>>) -> Result<MnistSet> {
    let (ipath, ibytes) = read_maybe_gz(dir, images)?;
    let (rows, cols, pixels) = parse_idx_images(&ibytes, &ipath)?;
    if rows * cols != PIXELS {
        return Err(idx_error(&ipath, format!("images are {rows}x{cols}, expected 28x28")));
    }
    let (lpath, lbytes) = read_maybe_gz(dir, labels)?;
    let labels = parse_idx_labels(&lbytes, &lpath)?;
    if labels.len() * PIXELS != pixels.len() {
        return Err(idx_error(
            &lpath,
            format!("{} labels for {} images", labels.len(), pixels.len() / PIXELS),
        ));
    }
    MnistSet::new(pixels, labels, permutation.clone())
}

/// Loads the four standard files. With `permuted`, one permutation drawn
/// from `perm_seed` is applied to every image; with `validation_split`, the
/// training files are shuffled with the same seed and split 80/20.
pub fn load_mnist_sequences(
    data_dir: &Path,
    permuted: bool,
    perm_seed: u64,
    validation_split: bool,
) -> Result<MnistData> {
    let permutation = permuted.then(|| pixel_permutation(perm_seed));
    let full = load_pair(data_dir, MNIST_FILES[0].0, MNIST_FILES[1].0, &permutation)?;
    let test = load_pair(data_dir, MNIST_FILES[2].0, MNIST_FILES[3].0, &permutation)?;
    let (train, validation) = if validation_split {
        let mut order: Vec<usize> = (0..full.len()).collect();
        order.shuffle(&mut sample_rng(perm_seed, 1));
        let cut = full.len() * 4 / 5;
        (full.subset(&order[..cut]), Some(full.subset(&order[cut..])))
    } else {
        (full, None)
    };
    Ok(MnistData {
        train,
        validation,
        test,
    })
}

pub fn md5_hex(bytes: &[u8]) -> String {
    Md5::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Downloads any missing `.gz` file into `dir` and checks every checksum.
pub fn fetch_mnist(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (stem, md5) in MNIST_FILES {
        let path = dir.join(format!("{stem}.gz"));
        let bytes = if path.exists() {
            fs::read(&path)?
        } else {
            let url = format!("{MIRROR}{stem}.gz");
            let response = ureq::get(&url)
                .call()
                .map_err(|e| Error::Download(format!("{url}: {e}")))?;
            let mut bytes = Vec::new();
            response.into_body().into_reader().read_to_end(&mut bytes)?;
            bytes
        };
        let got = md5_hex(&bytes);
        if got != md5 {
            return Err(Error::Download(format!(
                "{}: md5 {got}, expected {md5}",
                path.display()
            )));
        }
        if !path.exists() {
            fs::write(&path, &bytes)?;
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn idx_images(count: u32, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGES_MAGIC, count, 28, 28] {
            b.extend(v.to_be_bytes());
        }
        b.extend((0..count as usize * PIXELS).map(fill));
        b
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend(LABELS_MAGIC.to_be_bytes());
        b.extend((labels.len() as u32).to_be_bytes());
        b.extend(labels);
        b
    }

    #[test]
    fn parses_headers() {
        let p = Path::new("x");
        let (r, c, px) = parse_idx_images(&idx_images(3, |i| (i % 256) as u8), p).unwrap();
        assert_eq!((r, c, px.len()), (28, 28, 3 * PIXELS));
        assert_eq!(parse_idx_labels(&idx_labels(&[1, 2, 9]), p).unwrap(), vec![1, 2, 9]);
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("x");
        let mut bad = idx_images(1, |_| 0);
        bad[3] = 0x01;
        assert!(matches!(parse_idx_images(&bad, p), Err(Error::Idx { .. })));
        let mut short = idx_images(2, |_| 0);
        short.pop();
        assert!(parse_idx_images(&short, p).is_err());
        assert!(parse_idx_images(&[0, 0, 8], p).is_err());
        assert!(parse_idx_labels(&idx_images(1, |_| 0), p).is_err());
        assert!(parse_idx_labels(&idx_labels(&[10]), p).is_err());
    }

    #[test]
    fn loads_directory_and_checks_counts() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("train-images-idx3-ubyte"),
            idx_images(10, |i| (i % 7) as u8),
        )
        .unwrap();
        fs::write(
            dir.path().join("train-labels-idx1-ubyte"),
            idx_labels(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]),
        )
        .unwrap();
        fs::write(dir.path().join("t10k-images-idx3-ubyte"), idx_images(2, |_| 255)).unwrap();
        fs::write(dir.path().join("t10k-labels-idx1-ubyte"), idx_labels(&[3])).unwrap();
        assert!(matches!(
            load_mnist_sequences(dir.path(), false, 0, false),
            Err(Error::Idx { .. })
        ));
        fs::write(dir.path().join("t10k-labels-idx1-ubyte"), idx_labels(&[3, 4])).unwrap();

        let data = load_mnist_sequences(dir.path(), false, 0, true).unwrap();
        assert_eq!(data.train.len(), 8);
        assert_eq!(data.validation.as_ref().unwrap().len(), 2);
        assert_eq!(data.test.sequence(1).input, vec![1.0; PIXELS]);

        let plain = load_mnist_sequences(dir.path(), false, 0, false).unwrap();
        let s = plain.train.sequence(0);
        for (i, v) in s.input.iter().enumerate() {
            assert_eq!(*v, (i % 7) as f64 / 255.0);
        }
        let permuted = load_mnist_sequences(dir.path(), true, 5, false).unwrap();
        let p = permuted.train.permutation().unwrap().to_vec();
        assert_eq!(p, pixel_permutation(5));
        let ps = permuted.train.sequence(0);
        for (i, &src) in p.iter().enumerate() {
            assert_eq!(ps.input[i], s.input[src]);
        }
        let (x, y) = permuted.train.batch(&[0, 3]);
        assert_eq!(x.dim(), (2, PIXELS, 1));
        assert_eq!(y, vec![0, 3]);
        assert_eq!(x[[0, 17, 0]], ps.input[17]);
    }

    #[test]
    fn permutation_is_deterministic() {
        assert_eq!(pixel_permutation(3), pixel_permutation(3));
        assert_ne!(pixel_permutation(3), pixel_permutation(4));
        check_permutation(&pixel_permutation(3)).unwrap();
    }

    #[test]
    fn md5_known_value() {
        assert_eq!(md5_hex(b"abc"), "900150983cd24fb0d6963f7d28e17f72");
    }
}
