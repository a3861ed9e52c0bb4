//! Plain-text parameter checkpoints.
//!
//! ```text
//! diffnet-checkpoint 1
//! label <free text>
//! layers <n0> <n1> ... <nL>
//! params <count>
//! <one parameter per line>
//! ```
//!
//! Parameters follow the in-memory layout of [`DenseNet`]: for each layer,
//! the weight matrix row-major (one row per output unit), then its biases.
//! Values are written in shortest round-trip form, so a save/load cycle is
//! lossless and repeated saves are byte-identical.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{NetError, Result};
use crate::net::DenseNet;

const MAGIC: &str = "diffnet-checkpoint 1";

pub fn write_checkpoint<W: Write>(net: &DenseNet, label: &str, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "label {}", label.replace('\n', " "))?;
    let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
    writeln!(out, "layers {}", sizes.join(" "))?;
    writeln!(out, "params {}", net.param_count())?;
    for p in net.params() {
        writeln!(out, "{p:e}")?;
    }
    Ok(())
}

/// Returns the network and its label.
pub fn read_checkpoint<R: Read>(input: R) -> Result<(DenseNet, String)> {
    let bad = |line: usize, reason: &str| NetError::Checkpoint {
        line,
        reason: reason.to_string(),
    };
    let mut lines = BufReader::new(input).lines();
    let mut next = |n: usize| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| bad(n, "unexpected end of file"))?
            .map_err(NetError::from)
    };

    if next(1)? != MAGIC {
        return Err(bad(1, "not a diffnet checkpoint"));
    }
    let label = next(2)?
        .strip_prefix("label ")
        .ok_or_else(|| bad(2, "expected `label`"))?
        .to_string();
    let layers = next(3)?;
    let sizes = layers
        .strip_prefix("layers ")
        .ok_or_else(|| bad(3, "expected `layers`"))?
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|_| bad(3, "layer size is not an integer")))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = next(4)?
        .strip_prefix("params ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(4, "expected `params <count>`"))?;
    let mut params = Vec::with_capacity(count);
    for i in 0..count {
        let line = next(5 + i)?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| bad(5 + i, "parameter is not a number"))?;
        params.push(v);
    }
    if next(5 + count).is_ok_and(|l| !l.trim().is_empty()) {
        return Err(bad(5 + count, "trailing data"));
    }
    Ok((DenseNet::from_params(&sizes, params)?, label))
}

pub fn save(net: &DenseNet, label: &str, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(net, label, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(DenseNet, String)> {
    read_checkpoint(fs::File::open(path)?)
}
