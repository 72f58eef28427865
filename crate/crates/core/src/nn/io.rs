//! Binary checkpoint encoding.
//!
//! A file starts with an 8-byte magic and a little-endian `u32` version.
//! Networks are written as an architecture descriptor (`u32` layer count,
//! then per layer `u32` input, `u32` output, `u8` activation code, `u8`
//! layer-norm flag) followed by a `u64` parameter count and the parameters
//! as little-endian `f64` in declaration order.

use std::io::{Read, Write};

use super::{Activation, AdamConfig, AdamState, Architecture, DenseNet, LayerSpec, NnError};

pub struct CheckpointWriter<W: Write> {
    out: W,
}

impl<W: Write> CheckpointWriter<W> {
    pub fn new(mut out: W, magic: &[u8; 8], version: u32) -> Result<Self, NnError> {
        out.write_all(magic)?;
        out.write_all(&version.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn u64(&mut self, v: u64) -> Result<(), NnError> {
        self.out.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64(&mut self, v: f64) -> Result<(), NnError> {
        self.out.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn f64s(&mut self, values: &[f64]) -> Result<(), NnError> {
        self.u64(values.len() as u64)?;
        for v in values {
            self.f64(*v)?;
        }
        Ok(())
    }

    pub fn architecture(&mut self, arch: &Architecture) -> Result<(), NnError> {
        self.out.write_all(&(arch.layers().len() as u32).to_le_bytes())?;
        for l in arch.layers() {
            self.out.write_all(&(l.input as u32).to_le_bytes())?;
            self.out.write_all(&(l.output as u32).to_le_bytes())?;
            self.out.write_all(&[l.activation.code(), u8::from(l.layer_norm)])?;
        }
        Ok(())
    }

    pub fn net(&mut self, net: &DenseNet) -> Result<(), NnError> {
        self.architecture(net.architecture())?;
        self.f64s(net.params())
    }

    pub fn adam(&mut self, state: &AdamState) -> Result<(), NnError> {
        self.u64(state.step)?;
        let c = state.config;
        for v in [c.learning_rate, c.beta1, c.beta2, c.epsilon] {
            self.f64(v)?;
        }
        self.f64s(&state.m)?;
        self.f64s(&state.v)
    }

    pub fn finish(mut self) -> Result<W, NnError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct CheckpointReader<R: Read> {
    input: R,
}

impl<R: Read> CheckpointReader<R> {
    /// Checks magic and version before anything else is read.
    pub fn new(mut input: R, magic: &[u8; 8], version: u32) -> Result<Self, NnError> {
        let mut found = [0u8; 8];
        input.read_exact(&mut found).map_err(|_| NnError::Checkpoint("truncated header".into()))?;
        if &found != magic {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let mut reader = Self { input };
        let v = reader.u32()?;
        if v != version {
            return Err(NnError::Checkpoint(format!("version {v}, expected {version}")));
        }
        Ok(reader)
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], NnError> {
        let mut buf = [0u8; N];
        self.input
            .read_exact(&mut buf)
            .map_err(|_| NnError::Checkpoint("unexpected end of checkpoint".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    pub fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    pub fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    pub fn f64s(&mut self, expected_len: usize) -> Result<Vec<f64>, NnError> {
        let n = self.u64()? as usize;
        if n != expected_len {
            return Err(NnError::Checkpoint(format!("array of {n} values, expected {expected_len}")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn architecture(&mut self) -> Result<Architecture, NnError> {
        let n = self.u32()? as usize;
        if n == 0 || n > 64 {
            return Err(NnError::Checkpoint(format!("implausible layer count {n}")));
        }
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let input = self.u32()? as usize;
            let output = self.u32()? as usize;
            let [act, ln] = self.bytes::<2>()?;
            let activation = Activation::from_code(act)
                .ok_or_else(|| NnError::Checkpoint(format!("unknown activation code {act}")))?;
            layers.push(LayerSpec { input, output, activation, layer_norm: ln != 0 });
        }
        Architecture::new(layers).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    /// Reads a network and requires it to have the `expected` shape.
    pub fn net(&mut self, expected: &Architecture) -> Result<DenseNet, NnError> {
        let arch = self.architecture()?;
        if &arch != expected {
            return Err(NnError::ArchitectureMismatch {
                expected: format!("{:?}", expected.layers()),
                found: format!("{:?}", arch.layers()),
            });
        }
        let params = self.f64s(arch.param_count())?;
        DenseNet::from_params(arch, params)
    }

    pub fn adam(&mut self, len: usize) -> Result<AdamState, NnError> {
        let step = self.u64()?;
        let config = AdamConfig {
            learning_rate: self.f64()?,
            beta1: self.f64()?,
            beta2: self.f64()?,
            epsilon: self.f64()?,
        };
        let m = self.f64s(len)?;
        let v = self.f64s(len)?;
        Ok(AdamState { config, m, v, step })
    }

    /// Fails if any bytes remain.
    pub fn finish(mut self) -> Result<(), NnError> {
        let mut rest = [0u8; 1];
        match self.input.read(&mut rest)? {
            0 => Ok(()),
            _ => Err(NnError::Checkpoint("trailing bytes after checkpoint".into())),
        }
    }
}
