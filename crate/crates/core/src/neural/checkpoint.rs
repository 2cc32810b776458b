//! Binary checkpoint container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic "MOLCRLCK" | version | vocab_size | embed_dim | hidden_dim | n_layers
//! vocab_len | vocabulary file text (UTF-8, one token per line)
//! n_arrays
//! repeated: name_len | name (UTF-8) | rows | cols | rows*cols f32 LE, row-major
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::params::{ModelDims, ModelParams};
use super::NeuralError;
use crate::smiles::Vocabulary;

const MAGIC: &[u8; 8] = b"MOLCRLCK";
pub const FORMAT_VERSION: u32 = 1;

/// Parameters plus the vocabulary they were trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocabulary,
}

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated checkpoint"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, NeuralError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid UTF-8"))
    }
}

impl Checkpoint {
    pub fn new(params: ModelParams, vocab: Vocabulary) -> Result<Self, NeuralError> {
        if params.dims.vocab_size != vocab.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "model vocabulary {} vs {} tokens",
                params.dims.vocab_size,
                vocab.len()
            )));
        }
        Ok(Checkpoint { params, vocab })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, v: u32| out.extend_from_slice(&v.to_le_bytes());
        out.extend_from_slice(MAGIC);
        put(&mut out, FORMAT_VERSION);
        let d = self.params.dims;
        for v in [d.vocab_size, d.embed_dim, d.hidden_dim, d.n_layers] {
            put(&mut out, v as u32);
        }
        let vocab = self.vocab.to_file_string();
        put(&mut out, vocab.len() as u32);
        out.extend_from_slice(vocab.as_bytes());
        let names = self.params.block_names();
        let blocks = self.params.blocks();
        put(&mut out, blocks.len() as u32);
        for (name, block) in names.iter().zip(blocks) {
            put(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put(&mut out, block.nrows() as u32);
            put(&mut out, block.ncols() as u32);
            for v in block.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuralError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let dims = ModelDims {
            vocab_size: r.u32()? as usize,
            embed_dim: r.u32()? as usize,
            hidden_dim: r.u32()? as usize,
            n_layers: r.u32()? as usize,
        };
        let vocab = Vocabulary::parse_file_string(&r.string()?).map_err(|e| bad(e.to_string()))?;
        let mut params = ModelParams::zeros(dims);
        let names = params.block_names();
        let count = r.u32()? as usize;
        if count != names.len() {
            return Err(bad(format!("expected {} arrays, found {count}", names.len())));
        }
        for (name, block) in names.iter().zip(params.blocks_mut()) {
            let found = r.string()?;
            if &found != name {
                return Err(bad(format!("expected array {name}, found {found}")));
            }
            let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
            if (rows, cols) != block.dim() {
                return Err(bad(format!("array {name} has shape {rows}x{cols}, expected {:?}", block.dim())));
            }
            let raw = r.take(rows * cols * 4)?;
            let values: Vec<f64> =
                raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
            *block = Array2::from_shape_vec((rows, cols), values).expect("shape checked");
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes after last array"));
        }
        Checkpoint::new(params, vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
