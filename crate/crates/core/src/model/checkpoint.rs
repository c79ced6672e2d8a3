//! Versioned little-endian binary model checkpoints.
//!
//! Layout: 8-byte magic, u16 version, the model configuration, then
//! every parameter tensor in declaration order with explicit shapes.
//! All integers little-endian; floats are IEEE-754 bit patterns.

use crate::error::{Error, Result};
use crate::model::{HiddenSpec, Mlp, ModelConfig, Task};
use ndarray::{Array1, Array2};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"ELOBMDL1";
pub const VERSION: u16 = 1;

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn to_bytes(model: &Mlp) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, VERSION);

    let c = &model.config;
    put_u32(&mut out, c.input_dim as u32);
    put_u32(&mut out, c.hidden.len() as u32);
    for h in &c.hidden {
        put_u32(&mut out, h.units as u32);
        put_f64(&mut out, h.dropout);
    }
    out.push(match c.task {
        Task::Direction => 0,
        Task::ThreeClass => 1,
    });
    put_f64(&mut out, c.lambda);
    put_u64(&mut out, c.seed);

    for (w, b) in model.params() {
        put_u32(&mut out, w.nrows() as u32);
        put_u32(&mut out, w.ncols() as u32);
        for &v in w.iter() {
            put_f64(&mut out, v);
        }
        put_u32(&mut out, b.len() as u32);
        for &v in b.iter() {
            put_f64(&mut out, v);
        }
    }
    out
}

pub fn from_bytes(buf: &[u8]) -> Result<Mlp> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let input_dim = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    let mut hidden = Vec::with_capacity(n_hidden);
    for _ in 0..n_hidden {
        let units = r.u32()? as usize;
        let dropout = r.f64()?;
        hidden.push(HiddenSpec { units, dropout });
    }
    let task = match r.take(1)?[0] {
        0 => Task::Direction,
        1 => Task::ThreeClass,
        t => return Err(Error::Checkpoint(format!("unknown task tag {t}"))),
    };
    let lambda = r.f64()?;
    let seed = r.u64()?;
    let config = ModelConfig {
        input_dim,
        hidden,
        task,
        lambda,
        seed,
    };
    let mut model = Mlp::new(config)?;

    for (w, b) in model.params_mut() {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != w.dim() {
            return Err(Error::Checkpoint(format!(
                "weight shape {rows}x{cols} does not match architecture {:?}",
                w.dim()
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64()?);
        }
        *w = Array2::from_shape_vec((rows, cols), data).expect("shape checked");
        let blen = r.u32()? as usize;
        if blen != b.len() {
            return Err(Error::Checkpoint(format!(
                "bias length {blen} does not match architecture {}",
                b.len()
            )));
        }
        let mut data = Vec::with_capacity(blen);
        for _ in 0..blen {
            data.push(r.f64()?);
        }
        *b = Array1::from_vec(data);
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(model)
}

pub fn save(model: &Mlp, path: &Path) -> Result<()> {
    let bytes = to_bytes(model);
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let mut file = std::fs::File::create(path).map_err(ioerr)?;
    file.write_all(&bytes).map_err(ioerr)
}

pub fn load(path: &Path) -> Result<Mlp> {
    let mut buf = Vec::new();
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    std::fs::File::open(path)
        .map_err(ioerr)?
        .read_to_end(&mut buf)
        .map_err(ioerr)?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, Preset, DEFAULT_LAMBDA};

    fn sample(task: Task) -> Mlp {
        Mlp::new(ModelConfig {
            input_dim: 7,
            hidden: vec![HiddenSpec::new(9, 0.2), HiddenSpec::new(5, 0.0)],
            task,
            lambda: DEFAULT_LAMBDA,
            seed: 42,
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_both_tasks() {
        for task in [Task::Direction, Task::ThreeClass] {
            let model = sample(task);
            let restored = from_bytes(&to_bytes(&model)).unwrap();
            assert_eq!(model, restored);
        }
    }

    #[test]
    fn roundtrip_is_byte_stable() {
        let model = sample(Task::Direction);
        let a = to_bytes(&model);
        let b = to_bytes(&from_bytes(&a).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = Mlp::new(ModelConfig::from_preset(
            Preset::Mlp1,
            12,
            Task::ThreeClass,
            7,
        ))
        .unwrap();
        save(&model, &path).unwrap();
        assert_eq!(load(&path).unwrap(), model);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let model = sample(Task::ThreeClass);
        let bytes = to_bytes(&model);
        // bad magic
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        // bad version
        let mut bad = bytes.clone();
        bad[8] = 99;
        assert!(from_bytes(&bad).is_err());
        // truncated
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        // trailing garbage
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(from_bytes(&bad).is_err());
    }
}
