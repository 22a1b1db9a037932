//! Binary checkpoint format.
//!
//! ```text
//! "GCLREC01"
//! u64 n_users, u64 n_items, u64 dim                (little endian)
//! f64 user embeddings, row-major, n_users * dim
//! f64 item embeddings, row-major, n_items * dim
//! optional:
//!   "EOPMLP01"
//!   u64 n_layers
//!   per layer: u64 out_dim, u64 in_dim,
//!              f64 weights (out_dim * in_dim, row-major), f64 bias (out_dim)
//! ```
//!
//! The embeddings are the trainable layer-0 tables; propagation is re-applied
//! on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GCLREC01";
pub const MLP_SECTION_MAGIC: &[u8; 8] = b"EOPMLP01";

#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n_users: usize,
    pub n_items: usize,
    pub dim: usize,
    pub user_embeddings: Vec<f64>,
    pub item_embeddings: Vec<f64>,
    pub mlp: Option<Vec<MlpLayer>>,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.user_embeddings.len() != self.n_users * self.dim
            || self.item_embeddings.len() != self.n_items * self.dim
        {
            return Err(Error::Checkpoint("embedding sizes disagree with header".into()));
        }
        w.write_all(CHECKPOINT_MAGIC)?;
        for n in [self.n_users, self.n_items, self.dim] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        write_f64s(&mut w, &self.user_embeddings)?;
        write_f64s(&mut w, &self.item_embeddings)?;
        if let Some(layers) = &self.mlp {
            w.write_all(MLP_SECTION_MAGIC)?;
            w.write_all(&(layers.len() as u64).to_le_bytes())?;
            for layer in layers {
                if layer.weights.len() != layer.out_dim * layer.in_dim || layer.bias.len() != layer.out_dim {
                    return Err(Error::Checkpoint("mlp layer sizes disagree with shape".into()));
                }
                w.write_all(&(layer.out_dim as u64).to_le_bytes())?;
                w.write_all(&(layer.in_dim as u64).to_le_bytes())?;
                write_f64s(&mut w, &layer.weights)?;
                write_f64s(&mut w, &layer.bias)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let n_users = read_u64(&mut r)?;
        let n_items = read_u64(&mut r)?;
        let dim = read_u64(&mut r)?;
        let user_embeddings = read_f64s(&mut r, checked_mul(n_users, dim)?)?;
        let item_embeddings = read_f64s(&mut r, checked_mul(n_items, dim)?)?;

        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        let mlp = if rest.is_empty() {
            None
        } else {
            let mut r = rest.as_slice();
            read_exact(&mut r, &mut magic, "section tag")?;
            if &magic != MLP_SECTION_MAGIC {
                return Err(Error::Checkpoint("unknown trailing section".into()));
            }
            let n_layers = read_u64(&mut r)?;
            let mut layers = Vec::with_capacity(n_layers.min(16));
            for _ in 0..n_layers {
                let out_dim = read_u64(&mut r)?;
                let in_dim = read_u64(&mut r)?;
                let weights = read_f64s(&mut r, checked_mul(out_dim, in_dim)?)?;
                let bias = read_f64s(&mut r, out_dim)?;
                layers.push(MlpLayer {
                    out_dim,
                    in_dim,
                    weights,
                    bias,
                });
            }
            if !r.is_empty() {
                return Err(Error::Checkpoint(format!("{} trailing bytes", r.len())));
            }
            Some(layers)
        };
        Ok(Self {
            n_users,
            n_items,
            dim,
            user_embeddings,
            item_embeddings,
            mlp,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}

fn checked_mul(a: usize, b: usize) -> Result<usize> {
    a.checked_mul(b)
        .ok_or_else(|| Error::Checkpoint("header sizes overflow".into()))
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Checkpoint(format!("truncated while reading {what}")),
        _ => Error::RawIo(e),
    })
}

fn read_u64<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, "u64")?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Checkpoint("size exceeds usize".into()))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut b = [0u8; 8];
    for _ in 0..n {
        read_exact(r, &mut b, "f64 payload")?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
