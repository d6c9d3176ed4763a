//! Checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! "SLNN"            4 bytes magic
//! version           u32 (currently 1)
//! n_layers          u32
//! dims              (n_layers + 1) x u32
//! activations       n_layers x u8 (0 identity, 1 relu)
//! per layer         weights (out x in, row-major) then bias, f64
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Dense, Mlp, NnError};

const MAGIC: &[u8; 4] = b"SLNN";
const VERSION: u32 = 1;

impl Mlp {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.num_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for d in self.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for l in &self.layers {
            out.push(match l.activation {
                Activation::Identity => 0,
                Activation::Relu => 1,
            });
        }
        for l in &self.layers {
            for v in l.weight.iter().chain(l.bias.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(NnError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(NnError::UnsupportedVersion(version));
        }
        let n = r.u32()? as usize;
        if n == 0 || n > 64 {
            return Err(NnError::Format(format!("implausible layer count {n}")));
        }
        let dims: Vec<usize> = (0..=n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
        if dims.contains(&0) {
            return Err(NnError::Format("zero-width layer".into()));
        }
        let acts: Vec<Activation> = (0..n)
            .map(|_| match r.take(1)?[0] {
                0 => Ok(Activation::Identity),
                1 => Ok(Activation::Relu),
                t => Err(NnError::Format(format!("unknown activation tag {t}"))),
            })
            .collect::<Result<_, _>>()?;
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| r.f64()).collect::<Result<_, _>>()?;
            let b: Vec<f64> = (0..fan_out).map(|_| r.f64()).collect::<Result<_, _>>()?;
            layers.push(Dense {
                weight: Array2::from_shape_vec((fan_out, fan_in), w).expect("sized above"),
                bias: Array1::from(b),
                activation: acts[l],
            });
        }
        if r.pos != bytes.len() {
            return Err(NnError::Format("trailing bytes".into()));
        }
        let m = Self { layers };
        if !m.is_finite() {
            return Err(NnError::Format("non-finite parameter".into()));
        }
        Ok(m)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| NnError::Format("truncated".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save(mlp: &Mlp, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, mlp.to_bytes())?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp, NnError> {
    Mlp::from_bytes(&std::fs::read(path)?)
}
