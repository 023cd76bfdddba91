//! Checkpoint file: the magic `ISIN0001`, a u32 little-endian header length,
//! a UTF-8 `key=value` header, the parameters of Part-3, Part-6 and State in
//! declaration order as little-endian f32, and a trailing CRC32 (LE) of all
//! preceding bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{ArchConfig, NetKind, NetworkParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ISIN0001";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub input_size: usize,
    pub conv_widths: [usize; 3],
    pub num_parts: usize,
    pub num_state_bins: usize,
    pub schema_fingerprint: u32,
    pub mode: String,
    /// Outer iterations completed in training; inference replays this many.
    pub iterations: usize,
}

impl CheckpointHeader {
    pub fn arch(&self, input_channels: usize) -> ArchConfig {
        ArchConfig {
            input_size: self.input_size,
            input_channels,
            conv_widths: self.conv_widths,
            num_parts: self.num_parts,
            num_state_bins: self.num_state_bins,
        }
    }

    fn to_text(&self) -> String {
        let [a, b, c] = self.conv_widths;
        format!(
            "input_size={}\nconv_widths={a},{b},{c}\nnum_parts={}\nnum_state_bins={}\n\
             schema={:08x}\nmode={}\niterations={}\nnets=part3,part6,state\n",
            self.input_size,
            self.num_parts,
            self.num_state_bins,
            self.schema_fingerprint,
            self.mode,
            self.iterations
        )
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut kv = BTreeMap::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or(format!("bad header line {line:?}"))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or(format!("header lacks {k}"));
        let num = |k: &str| -> std::result::Result<usize, String> {
            get(k)?.parse().map_err(|_| format!("header {k} is not an integer"))
        };
        if get("nets")? != "part3,part6,state" {
            return Err("unsupported network list".into());
        }
        let widths: Vec<usize> = get("conv_widths")?
            .split(',')
            .map(|s| s.parse().map_err(|_| "bad conv_widths".to_string()))
            .collect::<std::result::Result<_, _>>()?;
        let conv_widths: [usize; 3] = widths.try_into().map_err(|_| "conv_widths needs 3 values")?;
        Ok(CheckpointHeader {
            input_size: num("input_size")?,
            conv_widths,
            num_parts: num("num_parts")?,
            num_state_bins: num("num_state_bins")?,
            schema_fingerprint: u32::from_str_radix(get("schema")?, 16)
                .map_err(|_| "bad schema fingerprint")?,
            mode: get("mode")?.to_string(),
            iterations: num("iterations")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub part3: NetworkParams<f32>,
    pub part6: NetworkParams<f32>,
    pub state: NetworkParams<f32>,
}

impl Checkpoint {
    fn nets(&self) -> [&NetworkParams<f32>; 3] {
        [&self.part3, &self.part6, &self.state]
    }

    fn expected(header: &CheckpointHeader) -> [(NetKind, ArchConfig); 3] {
        [
            (NetKind::Part, header.arch(3)),
            (NetKind::Part, header.arch(6)),
            (NetKind::State, header.arch(6)),
        ]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        for ((kind, arch), net) in Self::expected(&self.header).iter().zip(self.nets()) {
            if net.kind != *kind || net.arch != *arch {
                return Err(Error::Checkpoint(format!(
                    "network {} does not match header ({})",
                    net.fingerprint(),
                    super::fingerprint(*kind, arch)
                )));
            }
        }
        let header = self.header.to_text();
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for net in self.nets() {
            for t in &net.tensors {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |msg: String| Error::Checkpoint(msg);
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(err("missing ISIN0001 magic".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(err("checksum mismatch".into()));
        }
        let hlen = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
        let text = body
            .get(12..12 + hlen)
            .ok_or_else(|| err("truncated header".into()))?;
        let text = std::str::from_utf8(text).map_err(|_| err("header is not UTF-8".into()))?;
        let header = CheckpointHeader::parse(text).map_err(err)?;

        let mut values = body[12 + hlen..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
        let mut read_net = |kind: NetKind, arch: ArchConfig| -> Result<NetworkParams<f32>> {
            arch.validate()?;
            let tensors = super::param_shapes(kind, &arch)
                .into_iter()
                .map(|(name, shape)| {
                    let n: usize = shape.iter().product();
                    let data: Vec<f32> = values.by_ref().take(n).collect();
                    if data.len() != n {
                        return Err(err(format!("truncated parameter {name}")));
                    }
                    Tensor::new(&shape, data)
                })
                .collect::<Result<Vec<_>>>()?;
            NetworkParams::from_tensors(kind, &arch, tensors)
        };
        let [a, b, c] = Self::expected(&header);
        let part3 = read_net(a.0, a.1)?;
        let part6 = read_net(b.0, b.1)?;
        let state = read_net(c.0, c.1)?;
        if (body.len() - 12 - hlen) != 4 * (part3.num_values() + part6.num_values() + state.num_values()) {
            return Err(err("trailing bytes after parameters".into()));
        }
        Ok(Checkpoint {
            header,
            part3,
            part6,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingFile(path.to_path_buf()))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        Self::from_bytes(&bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn sample() -> Checkpoint {
        let header = CheckpointHeader {
            input_size: 16,
            conv_widths: [4, 8, 8],
            num_parts: 3,
            num_state_bins: 6,
            schema_fingerprint: 0xdeadbeef,
            mode: "setting2".into(),
            iterations: 5,
        };
        let mut rng = substream(3, "init", 0);
        Checkpoint {
            part3: NetworkParams::init(NetKind::Part, &header.arch(3), &mut rng).unwrap(),
            part6: NetworkParams::init(NetKind::Part, &header.arch(6), &mut rng).unwrap(),
            state: NetworkParams::init(NetKind::State, &header.arch(6), &mut rng).unwrap(),
            header,
        }
    }

    #[test]
    fn bytes_roundtrip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"ISIN0001");
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn detects_corruption() {
        let mut bytes = sample().to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert!(Checkpoint::from_bytes(&bytes).is_err());
        assert!(Checkpoint::from_bytes(b"ISIN0002xxxxxxxxxxx").is_err());
    }
}
