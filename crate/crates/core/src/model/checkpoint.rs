//! Binary checkpoint format. All integers are little-endian.
//!
//! ```text
//! magic    8 bytes  "DRUMCKPT"
//! version  u32      1
//! hlen     u32      length of the header in bytes
//! header   hlen     UTF-8 `key=value` lines (model config plus vocab_hash)
//! count    u32      number of arrays
//! arrays   count ×  { u32 name_len, name, u32 rows, u32 cols, rows·cols f64 }
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DrumModel, ModelConfig};
use crate::diffgraph::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DRUMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("value exceeds u32"))?;
    out.write_all(&v.to_le_bytes())
}

/// Writes the model and the hash of the vocabulary it was trained against.
pub fn write_checkpoint(model: &DrumModel, vocab_hash: &str, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let header = format!("{}vocab_hash={vocab_hash}\n", model.config().to_header());
    put_u32(&mut out, header.len())?;
    out.write_all(header.as_bytes())?;
    put_u32(&mut out, model.params().len())?;
    for (_, name, t) in model.params().iter() {
        put_u32(&mut out, name.len())?;
        out.write_all(name.as_bytes())?;
        put_u32(&mut out, t.rows())?;
        put_u32(&mut out, t.cols())?;
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn save_checkpoint(model: &DrumModel, vocab_hash: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, vocab_hash, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("unexpected end of checkpoint".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.bytes(n)?).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))
    }
}

/// Reads a checkpoint and returns the model and its stored vocabulary hash.
pub fn read_checkpoint(input: impl Read) -> Result<(DrumModel, String)> {
    let mut cur = Cursor { inner: input };
    if cur.bytes(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let hlen = cur.u32()?;
    let header = cur.string(hlen)?;
    let mut fields = HashMap::new();
    for line in header.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("malformed header line `{line}`")))?;
        fields.insert(k.to_owned(), v.to_owned());
    }
    let config = ModelConfig::from_header(&fields)?;
    let vocab_hash = fields.remove("vocab_hash").unwrap_or_default();
    let mut model = DrumModel::new(config)?;
    let count = cur.u32()?;
    if count != model.params().len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {count} arrays, model needs {}",
            model.params().len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let name_len = cur.u32()?;
        let name = cur.string(name_len)?;
        let (rows, cols) = (cur.u32()?, cur.u32()?);
        let id = model
            .params()
            .id(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown array `{name}`")))?;
        if model.params().get(id).shape() != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "array `{name}` is {rows}×{cols}, expected {:?}",
                model.params().get(id).shape()
            )));
        }
        let raw = cur.bytes(rows * cols * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        *model.params_mut().get_mut(id) = Tensor::from_vec(rows, cols, data)?;
        seen[id.index()] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Checkpoint("checkpoint repeats an array".into()));
    }
    Ok((model, vocab_hash))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(DrumModel, String)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
