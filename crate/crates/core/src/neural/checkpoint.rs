//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "R3DCKPT\0"
//! version    u32
//! config     u64 length + UTF-8 bytes
//! count      u32
//! per tensor:
//!   name     u32 length + UTF-8 bytes
//!   rows     u64
//!   cols     u64
//!   payload  rows * cols f64
//! ```

use std::path::Path;

use super::params::Parameters;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 8] = b"R3DCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// The run configuration that produced these tensors, serialized as text.
    pub config: String,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params<T: Real, P: Parameters<T>>(config: String, params: &P) -> Self {
        let tensors = params
            .param_views()
            .into_iter()
            .map(|v| NamedTensor { name: v.name, shape: v.shape, data: v.data.iter().map(|x| x.as_f64()).collect() })
            .collect();
        Self { config, tensors }
    }

    /// Copies stored tensors into `params`, checking names and shapes.
    pub fn load_into<T: Real, P: Parameters<T>>(&self, params: &mut P) -> Result<()> {
        let expected: Vec<(String, [usize; 2])> = params.param_views().into_iter().map(|v| (v.name, v.shape)).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {}", expected.len(), self.tensors.len())));
        }
        for ((name, shape), stored) in expected.iter().zip(&self.tensors) {
            if *name != stored.name || *shape != stored.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor mismatch: expected {name} {shape:?}, found {} {:?}",
                    stored.name, stored.shape
                )));
            }
        }
        for (slot, stored) in params.param_slices_mut().into_iter().zip(&self.tensors) {
            for (dst, &src) in slot.iter_mut().zip(&stored.data) {
                *dst = T::lit(src);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape[0] as u64).to_le_bytes());
            out.extend_from_slice(&(t.shape[1] as u64).to_le_bytes());
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let config_len = r.u64()? as usize;
        let config = r.string(config_len)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = r.string(name_len)?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let len = rows.checked_mul(cols).ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
            tensors.push(NamedTensor { name, shape: [rows, cols], data });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self { config, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::MlpParams;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn params_round_trip_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = MlpParams::<f64>::init(&[3, 4, 2], &mut rng);
        let ck = Checkpoint::from_params("seed = 2".into(), &mlp);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let mut restored = mlp.zeros_like();
        back.load_into(&mut restored).unwrap();
        assert_eq!(restored, mlp);
    }

    #[test]
    fn rejects_corruption_and_shape_mismatch() {
        let mlp = MlpParams::<f64>::zeros(&[3, 2]);
        let ck = Checkpoint::from_params(String::new(), &mlp);
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut other = MlpParams::<f64>::zeros(&[4, 2]);
        assert!(ck.load_into(&mut other).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_payloads_round_trip(
            config in ".{0,40}",
            data in prop::collection::vec(any::<f64>(), 0..30),
        ) {
            let ck = Checkpoint {
                config,
                tensors: vec![NamedTensor { name: "t".into(), shape: [1, data.len()], data }],
            };
            let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
            // Compare bit patterns so NaN payloads count as equal.
            prop_assert_eq!(&back.config, &ck.config);
            let bits = |c: &Checkpoint| c.tensors[0].data.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&ck));
        }
    }
}
