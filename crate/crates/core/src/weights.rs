//! The AAMS-W1 weight container: a flat little-endian file holding every
//! convolution kernel and bias the network needs, tagged with the pixel
//! convention the weights were trained for.
//!
//! Layout: magic "AAMSW1\0\0", u32 version (= 1), u32 tag length + UTF-8 tag,
//! u32 record count, then per record: u32 name length, name bytes, u8 rank,
//! rank x u32 dims, product x f32 values. No padding anywhere; bytes after
//! the last record are an error.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::ConvWeight;

pub const MAGIC: &[u8; 8] = b"AAMSW1\0\0";
pub const FORMAT_VERSION: u32 = 1;

/// The only pixel convention this engine implements: RGB in [0,1], no mean
/// subtraction. Files tagged differently are refused at load.
pub const PIXEL_CONVENTION: &str = "rgb01";

/// Encoder convolutions in network order: (name, out channels, in channels).
/// All are 3x3. Pooling sits after conv1_2, conv2_2, and conv3_4.
const ENCODER_CONVS: &[(&str, usize, usize)] = &[
    ("conv1_1", 64, 3),
    ("conv1_2", 64, 64),
    ("conv2_1", 128, 64),
    ("conv2_2", 128, 128),
    ("conv3_1", 256, 128),
    ("conv3_2", 256, 256),
    ("conv3_3", 256, 256),
    ("conv3_4", 256, 256),
    ("conv4_1", 512, 256),
];

/// Decoder convolutions in network order, mirroring the encoder with nearest
/// upsampling in place of pooling. All are 3x3.
const DECODER_CONVS: &[(&str, usize, usize)] = &[
    ("inv_conv4_1", 256, 512),
    ("inv_conv3_4", 256, 256),
    ("inv_conv3_3", 256, 256),
    ("inv_conv3_2", 256, 256),
    ("inv_conv3_1", 128, 256),
    ("inv_conv2_2", 128, 128),
    ("inv_conv2_1", 64, 128),
    ("inv_conv1_2", 64, 64),
    ("inv_conv1_1", 3, 64),
];

/// Bias-free 1x1 attention projections: (name, out channels, in channels).
const ATTENTION_PROJECTIONS: &[(&str, usize, usize)] = &[
    ("theta_h", 512, 512),
    ("theta_u", 256, 512),
    ("theta_g", 256, 512),
];

/// One named tensor record.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// Every record the network needs, as (name, dims) pairs.
fn required_records() -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for &(name, oc, ic) in ENCODER_CONVS.iter().chain(DECODER_CONVS) {
        out.push((format!("{name}.weight"), vec![oc, ic, 3, 3]));
        out.push((format!("{name}.bias"), vec![oc]));
    }
    for &(name, oc, ic) in ATTENTION_PROJECTIONS {
        out.push((format!("{name}.weight"), vec![oc, ic, 1, 1]));
    }
    out
}

/// Immutable, validated set of network weights. Shareable across threads;
/// every accessor is read-only.
#[derive(Debug, Clone)]
pub struct WeightBundle {
    entries: Vec<WeightEntry>,
    index: HashMap<String, usize>,
    version: u32,
    pixel_convention: String,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.buf.len() {
            return None;
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
}

impl WeightBundle {
    /// Parses and validates an AAMS-W1 byte stream.
    pub fn load(bytes: &[u8]) -> Result<WeightBundle> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let magic = r
            .take(8)
            .ok_or_else(|| Error::Format("file shorter than the 8-byte magic".into()))?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic bytes; not an AAMS-W1 file".into()));
        }
        let version = r
            .u32()
            .ok_or_else(|| Error::Format("truncated stream in header (version)".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let tag = read_string(&mut r, "header (pixel convention tag)")?;
        let count = r
            .u32()
            .ok_or_else(|| Error::Format("truncated stream in header (record count)".into()))?;

        let mut entries = Vec::with_capacity(count as usize);
        let mut index = HashMap::new();
        for rec in 0..count {
            let ctx = format!("record {rec}");
            let name = read_string(&mut r, &ctx)?;
            let rank = r
                .u8()
                .ok_or_else(|| Error::Format(format!("truncated stream in {ctx} (rank)")))?;
            let mut dims = Vec::with_capacity(rank as usize);
            let mut len = 1usize;
            for _ in 0..rank {
                let d = r
                    .u32()
                    .ok_or_else(|| Error::Format(format!("truncated stream in {ctx} (dims)")))?;
                len = len
                    .checked_mul(d as usize)
                    .ok_or_else(|| Error::Format(format!("{ctx}: dim product overflows")))?;
                dims.push(d as usize);
            }
            let raw = r.take(len * 4).ok_or_else(|| {
                Error::Format(format!("truncated stream in {ctx} ({name}): values cut short"))
            })?;
            let data = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            if index.insert(name.clone(), entries.len()).is_some() {
                return Err(Error::Format(format!("duplicate record name '{name}'")));
            }
            entries.push(WeightEntry { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the last record",
                bytes.len() - r.pos
            )));
        }

        let bundle = WeightBundle { entries, index, version, pixel_convention: tag };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Serializes back to AAMS-W1 bytes. `load(save(b))` preserves every bit,
    /// and `save(load(bytes))` reproduces `bytes` exactly.
    pub fn save(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.pixel_convention.len() as u32).to_le_bytes());
        out.extend_from_slice(self.pixel_convention.as_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.push(e.dims.len() as u8);
            for &d in &e.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &e.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Builds a bundle from in-memory entries (validated).
    pub fn from_entries(entries: Vec<WeightEntry>, pixel_convention: &str) -> Result<WeightBundle> {
        let mut index = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate entry '{}'", e.name)));
            }
        }
        let bundle = WeightBundle {
            entries,
            index,
            version: FORMAT_VERSION,
            pixel_convention: pixel_convention.to_string(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Fresh network weights from a seed: uniform in ±sqrt(6 / fan_in) per
    /// kernel (fan_in = in_channels * kh * kw), biases zero. Deterministic.
    pub fn random(seed: u64) -> WeightBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for (name, dims) in required_records() {
            let len: usize = dims.iter().product();
            let data = if name.ends_with(".bias") {
                vec![0.0; len]
            } else {
                let fan_in: usize = dims[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt() as f32;
                (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
            };
            entries.push(WeightEntry { name, dims, data });
        }
        WeightBundle::from_entries(entries, PIXEL_CONVENTION)
            .expect("generated bundle matches the required table")
    }

    fn validate(&self) -> Result<()> {
        if self.pixel_convention != PIXEL_CONVENTION {
            return Err(Error::Validation(format!(
                "pixel convention '{}' not supported; this engine expects '{PIXEL_CONVENTION}'",
                self.pixel_convention
            )));
        }
        let mut problems = Vec::new();
        for (name, dims) in required_records() {
            match self.index.get(&name) {
                None => problems.push(format!("{name} (missing)")),
                Some(&i) => {
                    let e = &self.entries[i];
                    if e.dims != dims {
                        problems.push(format!(
                            "{name} (expected dims {dims:?}, got {:?})",
                            e.dims
                        ));
                    } else if e.data.iter().any(|v| !v.is_finite()) {
                        problems.push(format!("{name} (non-finite values)"));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "missing or mis-shaped layers: {}",
                problems.join(", ")
            )))
        }
    }

    pub fn entry(&self, name: &str) -> Result<&WeightEntry> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| Error::Validation(format!("no record named '{name}'")))
    }

    /// Rank-4 record as a convolution kernel block.
    pub fn conv(&self, name: &str) -> Result<ConvWeight> {
        let e = self.entry(name)?;
        if e.dims.len() != 4 {
            return Err(Error::Validation(format!(
                "record '{name}' has rank {}, expected 4",
                e.dims.len()
            )));
        }
        ConvWeight::new(e.dims[0], e.dims[1], e.dims[2], e.dims[3], e.data.clone())
    }

    /// Rank-1 record as a bias vector.
    pub fn bias(&self, name: &str) -> Result<&[f32]> {
        let e = self.entry(name)?;
        if e.dims.len() != 1 {
            return Err(Error::Validation(format!(
                "record '{name}' has rank {}, expected 1",
                e.dims.len()
            )));
        }
        Ok(&e.data)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn pixel_convention(&self) -> &str {
        &self.pixel_convention
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }
}

fn read_string(r: &mut Reader, ctx: &str) -> Result<String> {
    let len = r
        .u32()
        .ok_or_else(|| Error::Format(format!("truncated stream in {ctx} (string length)")))?;
    let bytes = r
        .take(len as usize)
        .ok_or_else(|| Error::Format(format!("truncated stream in {ctx} (string bytes)")))?;
    String::from_utf8(bytes.to_vec())
        .map_err(|_| Error::Format(format!("invalid UTF-8 in {ctx}")))
}
