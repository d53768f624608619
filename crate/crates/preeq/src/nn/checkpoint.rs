//! Versioned binary parameter checkpoints. Round-trips are bit-exact:
//! every f64 is written as its little-endian bit pattern.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, AdamState, DenseLayer, ParamGrads, PreEqNet, Reshape};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"PEQCKPT1";

/// A loaded checkpoint: network parameters plus optional optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: PreEqNet,
    pub adam: Option<AdamState>,
}

fn write_f64s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

fn write_grads(w: &mut impl Write, g: &ParamGrads) -> Result<()> {
    for ws in &g.weights {
        write_f64s(w, ws)?;
    }
    for bs in &g.biases {
        write_f64s(w, bs)?;
    }
    write_f64s(w, &[g.alpha])
}

fn read_grads(r: &mut impl Read, net: &PreEqNet) -> Result<ParamGrads> {
    let mut g = ParamGrads::zeros_like(net);
    for (i, l) in net.layers.iter().enumerate() {
        g.weights[i] = read_f64s(r, l.weights.len())?;
    }
    for (i, l) in net.layers.iter().enumerate() {
        g.biases[i] = read_f64s(r, l.biases.len())?;
    }
    g.alpha = read_f64s(r, 1)?[0];
    Ok(g)
}

/// Writes the network (and optionally Adam state) to `path`.
pub fn save_checkpoint(path: &Path, net: &PreEqNet, adam: Option<&AdamState>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[
        match net.reshape {
            Reshape::Interleaved => 0,
            Reshape::Blocked => 1,
        },
        u8::from(net.alpha_trainable),
    ])?;
    write_u32(&mut w, net.layers.len() as u32)?;
    for l in &net.layers {
        write_u32(&mut w, l.in_dim as u32)?;
        write_u32(&mut w, l.out_dim as u32)?;
        w.write_all(&[match l.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        }])?;
    }
    write_f64s(&mut w, &[net.alpha])?;
    for l in &net.layers {
        write_f64s(&mut w, &l.weights)?;
        write_f64s(&mut w, &l.biases)?;
    }
    match adam {
        None => w.write_all(&[0])?,
        Some(state) => {
            w.write_all(&[1])?;
            write_f64s(
                &mut w,
                &[
                    state.learning_rate,
                    state.beta1,
                    state.beta2,
                    state.epsilon,
                ],
            )?;
            w.write_all(&state.t.to_le_bytes())?;
            write_grads(&mut w, &state.m)?;
            write_grads(&mut w, &state.v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic in {}",
            path.display()
        )));
    }
    let reshape = match read_u8(&mut r)? {
        0 => Reshape::Interleaved,
        1 => Reshape::Blocked,
        v => return Err(Error::Checkpoint(format!("unknown reshape code {v}"))),
    };
    let alpha_trainable = read_u8(&mut r)? != 0;
    let num_layers = read_u32(&mut r)? as usize;
    let mut dims = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let in_dim = read_u32(&mut r)? as usize;
        let out_dim = read_u32(&mut r)? as usize;
        let act = match read_u8(&mut r)? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            v => return Err(Error::Checkpoint(format!("unknown activation code {v}"))),
        };
        dims.push((in_dim, out_dim, act));
    }
    let alpha = read_f64s(&mut r, 1)?[0];
    let mut layers = Vec::with_capacity(num_layers);
    for (in_dim, out_dim, act) in dims {
        let weights = read_f64s(&mut r, in_dim * out_dim)?;
        let biases = read_f64s(&mut r, out_dim)?;
        layers.push(DenseLayer::new(in_dim, out_dim, weights, biases, act)?);
    }
    let net = PreEqNet {
        layers,
        alpha,
        alpha_trainable,
        reshape,
    };
    let adam = match read_u8(&mut r)? {
        0 => None,
        1 => {
            let h = read_f64s(&mut r, 4)?;
            let mut tb = [0u8; 8];
            r.read_exact(&mut tb)?;
            let m = read_grads(&mut r, &net)?;
            let v = read_grads(&mut r, &net)?;
            Some(AdamState {
                learning_rate: h[0],
                beta1: h[1],
                beta2: h[2],
                epsilon: h[3],
                t: u64::from_le_bytes(tb),
                m,
                v,
            })
        }
        v => return Err(Error::Checkpoint(format!("unknown adam flag {v}"))),
    };
    Ok(Checkpoint { net, adam })
}
