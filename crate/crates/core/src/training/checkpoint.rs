//! Binary checkpoint format.
//!
//! ```text
//! magic      4 bytes  "TSFC"
//! version    u16
//! kind       u8       0 = lstm, 1 = gru
//! window     u32
//! horizon    u32
//! units      u32
//! bounds     u8 flag, f64 min, f64 max
//! config     u32 epochs, u32 batch_size, u64 seed, u8 shuffle,
//!            f64 learning_rate, u8 clip flag, f64 clip_norm
//! tensors    u32 count, then per tensor: u32 rows, u32 cols, rows*cols f64
//! ```
//!
//! All integers and floats are little-endian. Tensors follow the canonical
//! parameter order of [`ModelState::params`].

use std::fs;
use std::path::Path;

use super::TrainConfig;
use crate::cells::{CellParams, DenseParams, GateParams, GruParams, LstmParams, ModelKind, ModelState};
use crate::dataprep::Bounds;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TSFC";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Trained parameters plus everything needed to reuse them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub window: usize,
    pub horizon: usize,
    pub units: usize,
    /// Normalization bounds of the training series.
    pub bounds: Option<Bounds>,
    pub config: TrainConfig,
    pub cell: CellParams,
    pub head: DenseParams,
}

impl Checkpoint {
    pub fn from_model(model: &ModelState) -> Self {
        Checkpoint {
            kind: model.kind(),
            window: model.window(),
            horizon: model.horizon(),
            units: model.units(),
            bounds: None,
            config: TrainConfig { units: model.units(), ..TrainConfig::default() },
            cell: model.cell.clone(),
            head: model.head.clone(),
        }
    }

    pub fn model(&self) -> Result<ModelState> {
        ModelState::from_parts(self.cell.clone(), self.head.clone(), self.window)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let model = self.model()?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(match self.kind {
            ModelKind::Lstm => 0,
            ModelKind::Gru => 1,
        });
        for v in [self.window, self.horizon, self.units] {
            put_u32(&mut out, v)?;
        }
        match self.bounds {
            Some(b) => {
                out.push(1);
                out.extend_from_slice(&b.min.to_le_bytes());
                out.extend_from_slice(&b.max.to_le_bytes());
            }
            None => {
                out.push(0);
                out.extend_from_slice(&[0u8; 16]);
            }
        }
        let c = &self.config;
        put_u32(&mut out, c.epochs)?;
        put_u32(&mut out, c.batch_size)?;
        out.extend_from_slice(&c.seed.to_le_bytes());
        out.push(u8::from(c.shuffle));
        out.extend_from_slice(&c.learning_rate.to_le_bytes());
        out.push(u8::from(c.clip_norm.is_some()));
        out.extend_from_slice(&c.clip_norm.unwrap_or(0.0).to_le_bytes());

        let params = model.params();
        put_u32(&mut out, params.len())?;
        for p in params {
            put_u32(&mut out, p.rows())?;
            put_u32(&mut out, p.cols())?;
            for v in p.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let kind = match r.u8()? {
            0 => ModelKind::Lstm,
            1 => ModelKind::Gru,
            other => return Err(Error::CorruptCheckpoint(format!("unknown model kind tag {other}"))),
        };
        let window = r.u32()? as usize;
        let horizon = r.u32()? as usize;
        let units = r.u32()? as usize;
        let has_bounds = r.flag()?;
        let (min, max) = (r.f64()?, r.f64()?);
        let bounds = if has_bounds {
            Some(Bounds::new(min, max).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?)
        } else {
            None
        };
        let epochs = r.u32()? as usize;
        let batch_size = r.u32()? as usize;
        let seed = r.u64()?;
        let shuffle = r.flag()?;
        let learning_rate = r.f64()?;
        let has_clip = r.flag()?;
        let clip = r.f64()?;
        let config = TrainConfig {
            epochs,
            batch_size,
            seed,
            units,
            shuffle,
            learning_rate,
            clip_norm: has_clip.then_some(clip),
        };

        let count = r.u32()? as usize;
        let expected = match kind {
            ModelKind::Lstm => 14,
            ModelKind::Gru => 11,
        };
        if count != expected {
            return Err(Error::CorruptCheckpoint(format!("{count} tensors, {kind} needs {expected}")));
        }
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows.checked_mul(cols).filter(|&n| n > 0 && n * 8 <= r.remaining()).ok_or_else(|| {
                Error::CorruptCheckpoint(format!("tensor {rows}x{cols} does not fit the payload"))
            })?;
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            tensors.push(Matrix::from_vec(rows, cols, data).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?);
        }
        if r.remaining() != 0 {
            return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", r.remaining())));
        }

        let mut it = tensors.into_iter();
        let mut gate = || GateParams { w: it.next().unwrap(), u: it.next().unwrap(), b: it.next().unwrap() };
        let cell = match kind {
            ModelKind::Lstm => CellParams::Lstm(LstmParams {
                input: gate(),
                forget: gate(),
                output: gate(),
                candidate: gate(),
            }),
            ModelKind::Gru => CellParams::Gru(GruParams { update: gate(), reset: gate(), candidate: gate() }),
        };
        let head = DenseParams { w: it.next().unwrap(), b: it.next().unwrap() };
        let ckpt = Checkpoint { kind, window, horizon, units, bounds, config, cell, head };
        let model = ckpt.model().map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        if model.units() != units || model.horizon() != horizon {
            return Err(Error::CorruptCheckpoint("header dimensions disagree with tensors".into()));
        }
        Ok(ckpt)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Argument(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.remaining() < n {
            return Err(Error::CorruptCheckpoint(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::CorruptCheckpoint(format!("invalid flag byte {v}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
