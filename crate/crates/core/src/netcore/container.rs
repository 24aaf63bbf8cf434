//! Little-endian binary containers for models and confidence matrices.
//!
//! Every file starts with `MAGIC`, a `u16` version and a `u16` kind tag.
//! A model body is the layer table followed by a `u64` weight count and the
//! weights as `f64`. A matrix body is `u32` timesteps, `u32` classes and the
//! row-major probabilities.

use std::io::{Read, Write};

use super::{LayerKind, LayerSpec, Network, NetworkParams};
use crate::error::{HtrError, Result};
use crate::matrix::ConfidenceMatrix;

pub const MAGIC: &[u8; 4] = b"HTRC";
const VERSION: u16 = 1;
/// Refuses absurd sizes before allocating.
const MAX_ELEMENTS: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Model = 1,
    Matrix = 2,
    Checkpoint = 3,
}

fn format_err(msg: impl Into<String>) -> HtrError {
    HtrError::Format(msg.into())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| format_err(format!("truncated container: {e}")))?;
    Ok(buf)
}

fn write_all(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(bytes).map_err(|e| format_err(format!("write failed: {e}")))
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

pub(crate) fn write_header(w: &mut impl Write, kind: ContainerKind) -> Result<()> {
    write_all(w, MAGIC)?;
    write_all(w, &VERSION.to_le_bytes())?;
    write_all(w, &(kind as u16).to_le_bytes())
}

pub(crate) fn read_header(r: &mut impl Read, kind: ContainerKind) -> Result<()> {
    let magic: [u8; 4] = read_exact(r)?;
    if &magic != MAGIC {
        return Err(format_err("not an HTR container (bad magic)"));
    }
    let version = u16::from_le_bytes(read_exact(r)?);
    if version != VERSION {
        return Err(format_err(format!("unsupported container version {version}")));
    }
    let found = u16::from_le_bytes(read_exact(r)?);
    if found != kind as u16 {
        return Err(format_err(format!("expected container kind {}, found {found}", kind as u16)));
    }
    Ok(())
}

pub(crate) fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    write_all(w, &(values.len() as u64).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_all(w, &bytes)
}

pub(crate) fn read_f64s(r: &mut impl Read) -> Result<Vec<f64>> {
    let n = read_u64(r)?;
    if n > MAX_ELEMENTS {
        return Err(format_err(format!("implausible element count {n}")));
    }
    let mut bytes = vec![0u8; n as usize * 8];
    r.read_exact(&mut bytes).map_err(|e| format_err(format!("truncated container: {e}")))?;
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format_err("container holds non-finite values"));
    }
    Ok(values)
}

pub(crate) fn write_network(w: &mut impl Write, net: &Network, params: &NetworkParams) -> Result<()> {
    if params.len() != net.param_count() {
        return Err(HtrError::Shape("weights do not match the network".into()));
    }
    write_all(w, &(net.specs().len() as u32).to_le_bytes())?;
    for s in net.specs() {
        write_all(w, &[s.kind.code()])?;
        write_all(w, &(s.inputs as u32).to_le_bytes())?;
        write_all(w, &(s.outputs as u32).to_le_bytes())?;
        write_all(w, &[s.subsample_x as u8, s.subsample_y as u8, s.trainable() as u8])?;
    }
    write_f64s(w, &params.weights)
}

pub(crate) fn read_network(r: &mut impl Read) -> Result<(Network, NetworkParams)> {
    let n = read_u32(r)?;
    if n > 64 {
        return Err(format_err(format!("implausible layer count {n}")));
    }
    let mut specs = Vec::with_capacity(n as usize);
    for i in 0..n {
        let [code] = read_exact::<1>(r)?;
        let kind = LayerKind::from_code(code).ok_or_else(|| format_err(format!("layer {i}: unknown kind {code}")))?;
        let inputs = read_u32(r)? as usize;
        let outputs = read_u32(r)? as usize;
        let [sx, sy, trainable] = read_exact::<3>(r)?;
        let spec = LayerSpec {
            kind,
            inputs,
            outputs,
            subsample_x: sx as usize,
            subsample_y: sy as usize,
        };
        if (trainable != 0) != spec.trainable() {
            return Err(format_err(format!("layer {i}: trainable flag disagrees with kind")));
        }
        specs.push(spec);
    }
    let net = Network::from_specs(specs).map_err(|e| format_err(format!("invalid layer table: {e}")))?;
    let weights = read_f64s(r)?;
    if weights.len() != net.param_count() {
        return Err(format_err(format!(
            "layer table needs {} weights, container has {}",
            net.param_count(),
            weights.len()
        )));
    }
    Ok((net, NetworkParams { weights }))
}

pub fn write_model(w: &mut impl Write, net: &Network, params: &NetworkParams) -> Result<()> {
    write_header(w, ContainerKind::Model)?;
    write_network(w, net, params)
}

pub fn read_model(r: &mut impl Read) -> Result<(Network, NetworkParams)> {
    read_header(r, ContainerKind::Model)?;
    read_network(r)
}

pub fn write_matrix(w: &mut impl Write, m: &ConfidenceMatrix) -> Result<()> {
    write_header(w, ContainerKind::Matrix)?;
    write_all(w, &(m.timesteps() as u32).to_le_bytes())?;
    write_all(w, &(m.classes() as u32).to_le_bytes())?;
    write_f64s(w, m.data())
}

pub fn read_matrix(r: &mut impl Read) -> Result<ConfidenceMatrix> {
    read_header(r, ContainerKind::Matrix)?;
    let t = read_u32(r)? as usize;
    let c = read_u32(r)? as usize;
    let data = read_f64s(r)?;
    if data.len() != t * c {
        return Err(format_err(format!("matrix header says {t}x{c}, body has {} values", data.len())));
    }
    ConfidenceMatrix::new(t, c, data).map_err(|e| format_err(format!("invalid matrix: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::NetworkShape;

    #[test]
    fn model_round_trip_is_exact() {
        let net = Network::new(6, NetworkShape { first_mdleaky: 2, tanh: 3, second_mdleaky: 4 }).unwrap();
        let params = net.init_params(11);
        let mut buf = Vec::new();
        write_model(&mut buf, &net, &params).unwrap();
        let (net2, params2) = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(net2.specs(), net.specs());
        assert_eq!(params2, params);
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = ConfidenceMatrix::from_logits(3, 4, &[0.1, 0.7, -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 5.0, -3.0, 1.0, 0.3]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(&mut buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn corrupt_containers_are_rejected() {
        let m = ConfidenceMatrix::new(1, 2, vec![0.5, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert!(read_model(&mut buf.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_matrix(&mut bad.as_slice()).is_err());
        assert!(read_matrix(&mut &buf[..buf.len() - 1]).is_err());
        let mut unnormalized = buf.clone();
        let n = unnormalized.len();
        unnormalized[n - 8..].copy_from_slice(&0.9f64.to_le_bytes());
        assert!(read_matrix(&mut unnormalized.as_slice()).is_err());
    }
}
