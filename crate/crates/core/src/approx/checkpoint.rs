//! Portable text checkpoints for [`Mlp`].
//!
//! ```text
//! mlp v1
//! sizes 4 64 64 4
//! <one parameter per line, in the flat layout of Mlp::params>
//! ```
//!
//! Numbers are written in Rust's shortest round-trip decimal form, so a
//! save/load cycle is bit-exact.

use std::fmt::Write as _;

use super::mlp::{param_count, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &str = "mlp v1";
/// Upper bounds that keep a hostile header from requesting huge buffers.
const MAX_LAYER: usize = 4096;
const MAX_PARAMS: usize = 1 << 24;

pub fn encode(net: &Mlp) -> String {
    let mut out = String::with_capacity(net.params().len() * 24 + 64);
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str("sizes");
    for s in net.sizes() {
        write!(out, " {s}").unwrap();
    }
    out.push('\n');
    for p in net.params() {
        writeln!(out, "{p}").unwrap();
    }
    out
}

pub fn decode(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let err = |line: usize, message: &str| Error::Parse { line, message: message.to_string() };

    match lines.next() {
        Some((_, MAGIC)) => {}
        Some((n, _)) => return Err(err(n, "expected `mlp v1` header")),
        None => return Err(err(0, "empty checkpoint")),
    }
    let (n, sizes_line) = lines.next().ok_or_else(|| err(1, "missing `sizes` line"))?;
    let mut fields = sizes_line.split_whitespace();
    if fields.next() != Some("sizes") {
        return Err(err(n, "expected `sizes ...`"));
    }
    let sizes: Vec<usize> = fields
        .map(|f| f.parse::<usize>().map_err(|_| err(n, "layer size is not an integer")))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0 || s > MAX_LAYER) {
        return Err(err(n, "need at least two layer sizes, each in 1..=4096"));
    }
    let total = sizes
        .windows(2)
        .try_fold(0usize, |acc, w| w[1].checked_mul(w[0] + 1).and_then(|c| acc.checked_add(c)))
        .filter(|&t| t <= MAX_PARAMS)
        .ok_or_else(|| err(n, "network too large"))?;
    debug_assert_eq!(total, param_count(&sizes));

    let mut params = Vec::with_capacity(total);
    let mut last_line = n;
    for (n, line) in lines {
        last_line = n;
        if line.is_empty() {
            continue;
        }
        if params.len() == total {
            return Err(err(n, "more parameters than the header declares"));
        }
        let v: f64 = line.parse().map_err(|_| err(n, "parameter is not a number"))?;
        if !v.is_finite() {
            return Err(err(n, "parameter is not finite"));
        }
        params.push(v);
    }
    if params.len() != total {
        return Err(err(last_line, &format!("expected {total} parameters, found {}", params.len())));
    }
    Mlp::from_parts(sizes, params)
}
