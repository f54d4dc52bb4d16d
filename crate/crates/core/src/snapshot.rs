//! Binary network snapshots.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 8 | magic `MTJSNN01` |
//! | 4 | format version (u32) |
//! | 8 × 5 | n_out, n_in, r, seed, cycle (u64) |
//! | n_out × ⌈n_in·r/8⌉ | synapse states, row-major, replica innermost, bit 1 = P, LSB first, rows byte-padded |
//! | 16 × n_out | per neuron: threshold, integration (f64) |
//!
//! Parameters are not stored; the loader takes them from the caller.
//! Fire counts and the input activity trace are not persisted and start
//! from zero after a load.

use crate::crossbar::SynapseArray;
use crate::error::{Error, ParseErrorKind, Result};
use crate::network::{Network, NetworkParams};
use crate::neuron::LifNeuron;

pub const MAGIC: &[u8; 8] = b"MTJSNN01";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 5 * 8;

pub fn save(net: &Network) -> Vec<u8> {
    let array = net.array();
    let mut out = Vec::with_capacity(HEADER_LEN + array.bytes_per_row() * array.n_out() + 16 * net.n_out());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [array.n_out() as u64, array.n_in() as u64, array.replicas() as u64, net.seed(), net.cycle()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&array.to_row_bytes());
    for n in net.neurons() {
        out.extend_from_slice(&n.threshold.to_le_bytes());
        out.extend_from_slice(&n.integration.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::parse(
                self.context,
                self.pos as u64,
                ParseErrorKind::Truncated {
                    needed: n as u64,
                    available: available as u64,
                },
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
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

    fn invalid(&self, at: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.context, at as u64, ParseErrorKind::InvalidValue(msg.into()))
    }
}

/// Parse a snapshot. The device parameters in `params` are attached to the
/// restored array.
pub fn load(bytes: &[u8], params: NetworkParams, context: &str) -> Result<Network> {
    let mut rd = Reader { bytes, pos: 0, context };
    if rd.take(8)? != MAGIC {
        return Err(Error::parse(context, 0, ParseErrorKind::BadSignature));
    }
    let version = rd.u32()?;
    if version != VERSION {
        return Err(Error::parse(context, 8, ParseErrorKind::UnsupportedVersion(version)));
    }
    let dims_at = rd.pos;
    let (n_out, n_in, r) = (rd.u64()?, rd.u64()?, rd.u64()?);
    let seed = rd.u64()?;
    let cycle = rd.u64()?;
    if n_out == 0 || n_in == 0 || r == 0 {
        return Err(rd.invalid(dims_at, format!("zero dimension {n_out}x{n_in}x{r}")));
    }
    let body = n_in
        .checked_mul(r)
        .map(|bits| bits.div_ceil(8))
        .and_then(|bpr| bpr.checked_add(16))
        .and_then(|per_row| per_row.checked_mul(n_out))
        .and_then(|b| usize::try_from(b).ok());
    match body {
        Some(b) if b == bytes.len() - rd.pos => {}
        Some(b) if b > bytes.len() - rd.pos => {
            return Err(Error::parse(
                context,
                rd.pos as u64,
                ParseErrorKind::Truncated {
                    needed: b as u64,
                    available: (bytes.len() - rd.pos) as u64,
                },
            ))
        }
        Some(b) => {
            return Err(Error::parse(
                context,
                (rd.pos + b) as u64,
                ParseErrorKind::TrailingBytes((bytes.len() - rd.pos - b) as u64),
            ))
        }
        None => return Err(rd.invalid(dims_at, format!("dimensions {n_out}x{n_in}x{r} overflow"))),
    }
    let (n_out, n_in, r) = (n_out as usize, n_in as usize, r as usize);
    let mut array = SynapseArray::new(n_out, n_in, r, params.device)?;
    let states_at = rd.pos;
    let states = rd.take(array.bytes_per_row() * n_out)?;
    array
        .load_row_bytes(states)
        .map_err(|e| rd.invalid(states_at, e.to_string()))?;
    let mut neurons = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let at = rd.pos;
        let threshold = rd.f64()?;
        let integration = rd.f64()?;
        if !threshold.is_finite() || !(integration.is_finite() && integration >= 0.0) {
            return Err(rd.invalid(at, format!("neuron state threshold={threshold} integration={integration}")));
        }
        neurons.push(LifNeuron {
            integration,
            threshold,
            fired_count: 0,
        });
    }
    Network::from_parts(array, neurons, params, seed, cycle)
}
