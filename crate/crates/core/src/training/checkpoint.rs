//! Checkpoint container: the model body followed by the velocity, the
//! curriculum cursor, the seed and the epoch log.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Cursor, EpochRecord, EpochSummary, TrainState, Weights};
use crate::error::{HtrError, Result};
use crate::netcore::{read_f64s, read_header, read_network, read_u32, read_u64, write_f64s, write_header, write_network};
use crate::netcore::{ContainerKind, Network};

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: Network,
    pub state: TrainState,
    pub seed: u64,
}

fn put(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(bytes).map_err(|e| HtrError::Format(format!("write failed: {e}")))
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HtrError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_header(&mut w, ContainerKind::Checkpoint)?;
    write_network(&mut w, &ckpt.net, &ckpt.state.weights.params)?;
    write_f64s(&mut w, &ckpt.state.weights.velocity)?;
    put(&mut w, &(ckpt.state.cursor.stage as u32).to_le_bytes())?;
    put(&mut w, &(ckpt.state.cursor.epoch as u32).to_le_bytes())?;
    put(&mut w, &ckpt.seed.to_le_bytes())?;
    put(&mut w, &(ckpt.state.log.len() as u64).to_le_bytes())?;
    for r in &ckpt.state.log {
        put(&mut w, &(r.stage as u32).to_le_bytes())?;
        put(&mut w, &(r.epoch as u32).to_le_bytes())?;
        put(&mut w, &r.summary.mean_loss.to_le_bytes())?;
        put(&mut w, &(r.summary.samples as u64).to_le_bytes())?;
        put(&mut w, &(r.summary.skipped as u64).to_le_bytes())?;
    }
    w.flush().map_err(|e| HtrError::io(path, e))
}

fn read_checkpoint_from(r: &mut impl Read) -> Result<Checkpoint> {
    read_header(r, ContainerKind::Checkpoint)?;
    let (net, params) = read_network(r)?;
    let velocity = read_f64s(r)?;
    if velocity.len() != params.len() {
        return Err(HtrError::Format("velocity length differs from the weights".into()));
    }
    let cursor = Cursor {
        stage: read_u32(r)? as usize,
        epoch: read_u32(r)? as usize,
    };
    let seed = read_u64(r)?;
    let n = read_u64(r)?;
    if n > 1 << 24 {
        return Err(HtrError::Format(format!("implausible epoch log length {n}")));
    }
    let mut log = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let stage = read_u32(r)? as usize;
        let epoch = read_u32(r)? as usize;
        let mean_loss = f64::from_bits(read_u64(r)?);
        let samples = read_u64(r)? as usize;
        let skipped = read_u64(r)? as usize;
        log.push(EpochRecord {
            stage,
            epoch,
            summary: EpochSummary {
                mean_loss,
                samples,
                skipped,
            },
        });
    }
    Ok(Checkpoint {
        net,
        state: TrainState {
            weights: Weights { params, velocity },
            cursor,
            log,
        },
        seed,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = std::fs::File::open(path).map_err(|e| HtrError::io(path, e))?;
    read_checkpoint_from(&mut BufReader::new(file))
}
