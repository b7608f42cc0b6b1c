//! `.pcnm` model files.
//!
//! Layout, all integers little-endian:
//!
//! | field        | encoding                                              |
//! |--------------|-------------------------------------------------------|
//! | magic        | `b"PCNM"`                                             |
//! | version      | `u32`                                                 |
//! | architecture | `u8`: 0 = ConvNet, 1 = LSTM                           |
//! | config       | `u32` per field (ConvNet: filters, kernel, conv stride, pool window, pool stride; LSTM: hidden, downsample) |
//! | parameters   | every tensor in declaration order as `f64`            |
//! | provenance   | `u32` byte length, then UTF-8 JSON                    |
//!
//! Tensor shapes are implied by the config.

use std::io::{Read, Write};
use std::path::Path;

use super::{ArchTag, ConvNet, ConvNetConfig, LstmConfig, LstmNet, ModelBundle, Network, Provenance};
use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MAGIC: &[u8; 4] = b"PCNM";
pub const FORMAT_VERSION: u32 = 1;

fn config_fields(bundle: &ModelBundle) -> Vec<usize> {
    match &bundle.network {
        Network::ConvNet(n) => {
            let c = n.config;
            vec![c.n_filters, c.kernel_len, c.conv_stride, c.pool_window, c.pool_stride]
        }
        Network::Lstm(n) => vec![n.config.hidden_size, n.config.input_downsample],
    }
}

pub fn save_model<W: Write>(bundle: &ModelBundle, mut sink: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(bundle.arch().byte());
    for field in config_fields(bundle) {
        let field = u32::try_from(field)
            .map_err(|_| Error::ModelFormat(format!("config value {field} exceeds u32")))?;
        buf.extend_from_slice(&field.to_le_bytes());
    }
    for t in bundle.tensors() {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let prov = serde_json::to_vec(&bundle.provenance)
        .map_err(|e| Error::ModelFormat(format!("provenance: {e}")))?;
    buf.extend_from_slice(&(prov.len() as u32).to_le_bytes());
    buf.extend_from_slice(&prov);
    sink.write_all(&buf)
        .map_err(|e| Error::ModelFormat(format!("write failed: {e}")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ModelFormat(format!("truncated stream while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let raw = self.take(n * 8, "parameters")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(shape.to_vec(), data)
    }
}

pub fn load_model<R: Read>(mut source: R) -> Result<ModelBundle> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::ModelFormat(format!("read failed: {e}")))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    if r.take(4, "magic")? != MAGIC {
        return Err(Error::ModelFormat("bad magic, not a PCNM model".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unknown version {version}")));
    }
    let tag = r.take(1, "architecture")?[0];
    let arch = ArchTag::from_byte(tag)
        .ok_or_else(|| Error::ModelFormat(format!("unknown architecture tag {tag}")))?;

    // A throwaway rng: the freshly built network only supplies shapes.
    let mut rng = Rng::new(0);
    let network = match arch {
        ArchTag::ConvNet => {
            let mut f = [0usize; 5];
            for v in f.iter_mut() {
                *v = r.u32("config")? as usize;
            }
            let config = ConvNetConfig {
                n_filters: f[0],
                kernel_len: f[1],
                conv_stride: f[2],
                pool_window: f[3],
                pool_stride: f[4],
            };
            let template = ConvNet::new(config, &mut rng)
                .map_err(|e| Error::ModelFormat(format!("config mismatch: {e}")))?;
            let tensors = read_tensors(&mut r, &template.tensors())?;
            Network::ConvNet(ConvNet::from_tensors(config, tensors)?)
        }
        ArchTag::Lstm => {
            let config = LstmConfig {
                hidden_size: r.u32("config")? as usize,
                input_downsample: r.u32("config")? as usize,
            };
            let template = LstmNet::new(config, &mut rng)
                .map_err(|e| Error::ModelFormat(format!("config mismatch: {e}")))?;
            let tensors = read_tensors(&mut r, &template.tensors())?;
            Network::Lstm(LstmNet::from_tensors(config, tensors)?)
        }
    };

    let len = r.u32("provenance length")? as usize;
    let blob = r.take(len, "provenance")?;
    let provenance: Provenance = serde_json::from_slice(blob)
        .map_err(|e| Error::ModelFormat(format!("provenance: {e}")))?;
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes after provenance",
            bytes.len() - r.pos
        )));
    }
    Ok(ModelBundle {
        network,
        provenance,
    })
}

fn read_tensors(r: &mut Reader<'_>, template: &[&Tensor]) -> Result<Vec<Tensor>> {
    template.iter().map(|t| r.tensor(t.shape())).collect()
}

pub fn save_model_file(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    save_model(bundle, std::io::BufWriter::new(file))
}

pub fn load_model_file(path: &Path) -> Result<ModelBundle> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_model(std::io::BufReader::new(file))
}
