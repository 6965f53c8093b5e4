//! Binary checkpoint files.
//!
//! All integers and floats are little-endian. Strings are a `u32` byte length
//! followed by UTF-8 bytes.
//!
//! ```text
//! magic            8 bytes  "SWRNNCKP"
//! format_version   u32
//! index_hash       string
//! dims             12 x u64  n_t n_od n_ap weather_dim flight_dim lstm_layers
//!                            hidden_od hidden_ap weather_hidden mlp_hidden[3]
//! options          u8 use_swl, f64 leaky_slope, f64 dropout_rate,
//!                  f64 bn_momentum, f64 bn_eps
//! target scaler    f64 mean, f64 std
//! adam step        u64
//! running stats    u32 count, then per layer: u32 n, n x f64 mean, n x f64 var
//! preprocessing    u64 byte length + JSON (length 0 when absent)
//! blocks           u32 count, then per block: string name, u64 rows, u64 cols,
//!                  u8 frozen, rows*cols f64 each of value, adam_m, adam_v
//! checksum         32-byte SHA-256 of every preceding byte
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::preprocess::{Preprocessing, TargetScaler};
use crate::model::swrnn::{ModelDims, ModelOptions, SwrnnModel};
use crate::nn::{BatchNormConfig, RunningStats};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SWRNNCKP";

/// A trained model together with the preprocessing it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub index_hash: String,
    pub model: SwrnnModel,
    pub preprocessing: Option<Preprocessing>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.f64(*x);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.buf.len() {
            return Err(Error::CorruptCheckpoint("unexpected end of file".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::CorruptCheckpoint("size overflow".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s_into(&mut self, out: &mut [f64]) -> Result<()> {
        for v in out {
            *v = self.f64()?;
        }
        Ok(())
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        self.f64s_into(&mut v)?;
        Ok(v)
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::CorruptCheckpoint("invalid UTF-8".into()))
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let m = &ckpt.model;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(CHECKPOINT_FORMAT_VERSION);
    w.str(&ckpt.index_hash);
    let d = &m.dims;
    for v in [
        d.n_t,
        d.n_od,
        d.n_ap,
        d.weather_dim,
        d.flight_dim,
        d.lstm_layers,
        d.hidden_od,
        d.hidden_ap,
        d.weather_hidden,
        d.mlp_hidden[0],
        d.mlp_hidden[1],
        d.mlp_hidden[2],
    ] {
        w.u64(v as u64);
    }
    let o = &m.options;
    w.u8(u8::from(o.use_swl));
    w.f64(o.leaky_slope);
    w.f64(o.dropout_rate);
    w.f64(o.batch_norm.momentum);
    w.f64(o.batch_norm.eps);
    w.f64(m.target.mean);
    w.f64(m.target.std);
    w.u64(m.store.step);
    w.u32(m.running.len() as u32);
    for r in &m.running {
        w.u32(r.mean.len() as u32);
        w.f64s(&r.mean);
        w.f64s(&r.var);
    }
    let json = match &ckpt.preprocessing {
        Some(p) => p.to_json()?,
        None => String::new(),
    };
    w.u64(json.len() as u64);
    w.0.extend_from_slice(json.as_bytes());
    let s = &m.store;
    w.u32(s.blocks().len() as u32);
    for b in s.blocks() {
        w.str(&b.name);
        w.u64(b.rows as u64);
        w.u64(b.cols as u64);
        w.u8(u8::from(b.frozen));
        let r = b.range();
        w.f64s(&s.value[r.clone()]);
        w.f64s(&s.adam_m[r.clone()]);
        w.f64s(&s.adam_v[r]);
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    Ok(w.0)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::CorruptCheckpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_FORMAT_VERSION,
            found: version,
        });
    }
    let (body, sum) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != sum {
        return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, at: 12 };
    let index_hash = r.str()?;
    let mut dv = [0usize; 12];
    for v in dv.iter_mut() {
        *v = r.usize()?;
    }
    let dims = ModelDims {
        n_t: dv[0],
        n_od: dv[1],
        n_ap: dv[2],
        weather_dim: dv[3],
        flight_dim: dv[4],
        lstm_layers: dv[5],
        hidden_od: dv[6],
        hidden_ap: dv[7],
        weather_hidden: dv[8],
        mlp_hidden: [dv[9], dv[10], dv[11]],
    };
    if dims.lstm_layers == 0 || dims.n_t == 0 {
        return Err(Error::CorruptCheckpoint("degenerate dimensions".into()));
    }
    let options = ModelOptions {
        use_swl: r.u8()? != 0,
        leaky_slope: r.f64()?,
        dropout_rate: r.f64()?,
        batch_norm: BatchNormConfig {
            momentum: r.f64()?,
            eps: r.f64()?,
        },
    };
    let target = TargetScaler {
        mean: r.f64()?,
        std: r.f64()?,
    };
    let step = r.u64()?;
    let mut model = SwrnnModel::zeroed(dims, options);
    model.target = target;
    model.store.step = step;
    let n_running = r.u32()? as usize;
    if n_running != model.running.len() {
        return Err(Error::CorruptCheckpoint("batch-norm layer count".into()));
    }
    for k in 0..n_running {
        let n = r.u32()? as usize;
        if n != model.running[k].mean.len() {
            return Err(Error::CorruptCheckpoint("batch-norm width".into()));
        }
        let mean = r.f64s(n)?;
        let var = r.f64s(n)?;
        model.running[k] = RunningStats { mean, var };
    }
    let json_len = r.usize()?;
    let preprocessing = if json_len == 0 {
        None
    } else {
        let text = std::str::from_utf8(r.take(json_len)?).map_err(|_| Error::CorruptCheckpoint("invalid UTF-8".into()))?;
        Some(Preprocessing::from_json(text)?)
    };
    let n_blocks = r.u32()? as usize;
    if n_blocks != model.store.blocks().len() {
        return Err(Error::CorruptCheckpoint(format!(
            "{n_blocks} parameter blocks, layout expects {}",
            model.store.blocks().len()
        )));
    }
    for i in 0..n_blocks {
        let name = r.str()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        let frozen = r.u8()? != 0;
        let meta = model.store.blocks()[i].clone();
        if meta.name != name || meta.rows != rows || meta.cols != cols {
            return Err(Error::CorruptCheckpoint(format!("unexpected block `{name}` ({rows}x{cols})")));
        }
        let range = meta.range();
        let s = &mut model.store;
        r.f64s_into(&mut s.value[range.clone()])?;
        r.f64s_into(&mut s.adam_m[range.clone()])?;
        r.f64s_into(&mut s.adam_v[range])?;
        s.set_frozen(crate::nn::BlockId(i), frozen);
    }
    if r.at != body.len() {
        return Err(Error::CorruptCheckpoint("trailing bytes".into()));
    }
    Ok(Checkpoint {
        index_hash,
        model,
        preprocessing,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(ckpt)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint; with `expected_index_hash` set, a checkpoint built
/// for a different network index is rejected.
pub fn load_checkpoint(path: &Path, expected_index_hash: Option<&str>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt = decode_checkpoint(&bytes)?;
    if let Some(expected) = expected_index_hash {
        if expected != ckpt.index_hash {
            return Err(Error::IndexMismatch {
                expected: expected.to_string(),
                found: ckpt.index_hash,
            });
        }
    }
    Ok(ckpt)
}
