//! Binary checkpoint files.
//!
//! All integers are little-endian.
//!
//! | offset      | size | content                                        |
//! |-------------|------|------------------------------------------------|
//! | 0           | 8    | magic `NIRCKPT\0`                              |
//! | 8           | 4    | format version (`u32`, currently 1)            |
//! | 12          | 8    | payload length `P` (`u64`)                     |
//! | 20          | P    | payload                                        |
//! | 20 + P      | 32   | SHA-256 of bytes `0 .. 20 + P`                 |
//!
//! The payload is a `u64` header length `H`, `H` bytes of UTF-8 JSON
//! ([`CheckpointHeader`]), then raw `f64` values. For each network in
//! [`NetId::ALL`] order the values are its parameter arrays, then the Adam
//! first moments, then the second moments, each in the order and with the
//! shapes listed in the header.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nets::params::hex;
use crate::nets::{BundleSpec, ModelBundle, NetId, Params};
use crate::tensor::{Shape, Tensor};
use crate::train::adam::OptimizerState;
use crate::train::config::TrainConfig;

pub const MAGIC: &[u8; 8] = b"NIRCKPT\0";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 20;
const DIGEST_LEN: usize = 32;

/// Which training stage produced a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Init,
    Phase1,
    Phase2,
    Phase3,
    FromScratch,
    N2cPartial,
    N2cStandalone,
    G2cStandalone,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Init => "init",
            Stage::Phase1 => "phase1",
            Stage::Phase2 => "phase2",
            Stage::Phase3 => "phase3",
            Stage::FromScratch => "from_scratch",
            Stage::N2cPartial => "n2c_partial",
            Stage::N2cStandalone => "n2c_standalone",
            Stage::G2cStandalone => "g2c_standalone",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Complete training state after a stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub stage: Stage,
    /// Epochs completed within `stage`.
    pub epoch: usize,
    /// Optimization steps taken since initialization.
    pub step: u64,
    pub config: TrainConfig,
    pub bundle: ModelBundle,
    /// One state per network, in [`NetId::ALL`] order.
    pub optim: Vec<OptimizerState>,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub fn optimizer(&self, id: NetId) -> &OptimizerState {
        &self.optim[id.index()]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_checkpoint(path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    /// Hex-encoded 32-byte ChaCha seed.
    pub seed: String,
    pub stream: u64,
    /// Decimal word position (a `u128`).
    pub word_pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayHeader {
    pub name: String,
    pub shape: Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetHeader {
    pub name: String,
    pub optimizer_step: u64,
    pub params: Vec<ArrayHeader>,
}

/// JSON metadata at the start of the payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub stage: Stage,
    pub epoch: usize,
    pub step: u64,
    pub config: TrainConfig,
    pub config_digest: String,
    pub bundle: BundleSpec,
    pub bundle_digest: String,
    pub rng: RngState,
    pub networks: Vec<NetHeader>,
}

fn header_of(ck: &Checkpoint) -> CheckpointHeader {
    CheckpointHeader {
        stage: ck.stage,
        epoch: ck.epoch,
        step: ck.step,
        config: ck.config.clone(),
        config_digest: ck.config.digest(),
        bundle: ck.bundle.spec(),
        bundle_digest: ck.bundle.digest(),
        rng: RngState {
            seed: hex(&ck.rng.get_seed()),
            stream: ck.rng.get_stream(),
            word_pos: ck.rng.get_word_pos().to_string(),
        },
        networks: NetId::ALL
            .iter()
            .map(|&id| {
                let p = ck.bundle.params(id);
                NetHeader {
                    name: id.name().to_string(),
                    optimizer_step: ck.optimizer(id).step,
                    params: p
                        .iter()
                        .map(|(name, t)| ArrayHeader {
                            name: name.to_string(),
                            shape: t.shape(),
                        })
                        .collect(),
                }
            })
            .collect(),
    }
}

/// Serializes a checkpoint to bytes.
pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    if ck.optim.len() != NetId::ALL.len() {
        return Err(Error::InvalidSpec(format!(
            "{} optimizer states, expected 8",
            ck.optim.len()
        )));
    }
    let header = serde_json::to_vec(&header_of(ck)).expect("header serializes");
    let mut payload = Vec::new();
    payload.extend((header.len() as u64).to_le_bytes());
    payload.extend(&header);
    for id in NetId::ALL {
        let st = ck.optimizer(id);
        for t in ck
            .bundle
            .params(id)
            .tensors()
            .iter()
            .chain(&st.m)
            .chain(&st.v)
        {
            for v in t.data() {
                payload.extend(v.to_le_bytes());
            }
        }
    }
    let mut out = Vec::with_capacity(PREAMBLE + payload.len() + DIGEST_LEN);
    out.extend(MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    out.extend((payload.len() as u64).to_le_bytes());
    out.extend(&payload);
    let digest = Sha256::digest(&out);
    out.extend(digest.as_slice());
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

/// Checks framing and digest; returns the header and the raw value section.
fn open_frame(bytes: &[u8]) -> Result<(CheckpointHeader, &[u8])> {
    if bytes.len() < PREAMBLE + DIGEST_LEN {
        return Err(corrupt(format!(
            "{} bytes is shorter than the fixed frame",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let payload_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let expected_len = (PREAMBLE + DIGEST_LEN) as u64 + payload_len;
    if bytes.len() as u64 != expected_len {
        return Err(corrupt(format!(
            "file is {} bytes, frame says {expected_len}",
            bytes.len()
        )));
    }
    let body_end = bytes.len() - DIGEST_LEN;
    if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
        return Err(corrupt("digest mismatch"));
    }
    let payload = &bytes[PREAMBLE..body_end];
    if payload.len() < 8 {
        return Err(corrupt("missing header length"));
    }
    let header_len = u64::from_le_bytes(payload[..8].try_into().expect("8 bytes")) as usize;
    if header_len > payload.len() - 8 {
        return Err(corrupt("header overruns payload"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&payload[8..8 + header_len])
        .map_err(|e| corrupt(format!("header: {e}")))?;
    if header.config.digest() != header.config_digest {
        return Err(corrupt("config digest mismatch"));
    }
    Ok((header, &payload[8 + header_len..]))
}

/// Reads only the metadata of a checkpoint.
pub fn read_header(path: &Path) -> Result<CheckpointHeader> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(open_frame(&bytes)?.0)
}

fn parse_u128(s: &str) -> Result<u128> {
    s.parse()
        .map_err(|_| corrupt(format!("bad rng word position {s:?}")))
}

fn parse_seed(s: &str) -> Result<[u8; 32]> {
    if s.len() != 64 || !s.is_ascii() {
        return Err(corrupt("bad rng seed"));
    }
    let mut seed = [0u8; 32];
    for (i, b) in seed.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| corrupt("bad rng seed"))?;
    }
    Ok(seed)
}

/// Deserializes a checkpoint.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    use rand::SeedableRng;

    let (header, mut values) = open_frame(bytes)?;
    if header.networks.len() != NetId::ALL.len() {
        return Err(corrupt(format!(
            "{} networks listed",
            header.networks.len()
        )));
    }
    let mut take = |shape: Shape| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if values.len() < n * 8 {
            return Err(corrupt("value section is truncated"));
        }
        let data = values[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        values = &values[n * 8..];
        Tensor::from_vec(shape, data)
    };
    let mut params = Vec::with_capacity(8);
    let mut optim = Vec::with_capacity(8);
    for (id, net) in NetId::ALL.iter().zip(&header.networks) {
        if net.name != id.name() {
            return Err(corrupt(format!(
                "network {} listed where {} belongs",
                net.name,
                id.name()
            )));
        }
        let mut sections = Vec::with_capacity(3);
        for _ in 0..3 {
            sections.push(
                net.params
                    .iter()
                    .map(|a| take(a.shape))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let v = sections.pop().expect("three sections");
        let m = sections.pop().expect("three sections");
        let p = sections.pop().expect("three sections");
        params.push(Params::from_parts(
            net.params.iter().map(|a| a.name.clone()).collect(),
            p,
        )?);
        optim.push(OptimizerState {
            step: net.optimizer_step,
            m,
            v,
        });
    }
    if !values.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", values.len())));
    }
    let bundle = ModelBundle::from_params(header.bundle, params)?;
    if bundle.digest() != header.bundle_digest {
        return Err(corrupt("parameter digest mismatch"));
    }
    let mut rng = ChaCha8Rng::from_seed(parse_seed(&header.rng.seed)?);
    rng.set_stream(header.rng.stream);
    rng.set_word_pos(parse_u128(&header.rng.word_pos)?);
    Ok(Checkpoint {
        stage: header.stage,
        epoch: header.epoch,
        step: header.step,
        config: header.config,
        bundle,
        optim,
        rng,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(ck)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
