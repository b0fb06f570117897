//! Circuit files in a line-oriented text format and a checksummed binary format.
//!
//! Text:
//!
//! ```text
//! circuitflow 1
//! cardinalities 2 2
//! root 4
//! 0 input var=0 params=-6.931471805599453e-1,-6.931471805599453e-1
//! 1 input var=1 params=...
//! 2 product children=0,1
//! 3 ...
//! 4 sum children=2,3 params=-1.6094379124341003e0,-2.231435513142097e-1
//! ```
//!
//! Parameters are natural logs. Binary files start with `PCBN`, a little-endian
//! `u32` version, and end with a CRC-32 of everything before it.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::circuit::{Circuit, InputDistribution, Scope, Unit, UnitId, UnitKind, NORMALIZATION_TOL};
use crate::error::{Error, Result};

pub const TEXT_VERSION: u32 = 1;
pub const BINARY_VERSION: u32 = 1;
const BINARY_MAGIC: &[u8; 4] = b"PCBN";

/// Parameters further than this from normalized are rejected at load.
pub const LOAD_RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitFormat {
    Text,
    Binary,
}

impl CircuitFormat {
    /// `.pcb` and `.bin` are binary, everything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pcb") | Some("bin") => CircuitFormat::Binary,
            _ => CircuitFormat::Text,
        }
    }
}

enum RawKind {
    Input { var: usize, params: Vec<f64> },
    Sum { children: Vec<usize>, params: Vec<f64> },
    Product { children: Vec<usize> },
}

/// Scales parameters that are off by less than the load tolerance.
fn renormalize(params: &mut [f64]) {
    let total: f64 = params.iter().map(|l| l.exp()).sum();
    let dev = (total - 1.0).abs();
    if dev > NORMALIZATION_TOL && dev <= LOAD_RENORMALIZE_TOL {
        let shift = total.ln();
        params.iter_mut().for_each(|l| *l -= shift);
    }
}

/// Turns parsed units into a circuit; structure is checked only as far as
/// needed to build one. `at(i)` maps a unit index to an error location.
fn assemble(cards: Vec<u32>, raw: Vec<RawKind>, root: usize, at: impl Fn(usize, String) -> Error) -> Result<Circuit> {
    let n = cards.len();
    let mut units: Vec<Unit> = Vec::with_capacity(raw.len());
    for (i, r) in raw.into_iter().enumerate() {
        let unit = match r {
            RawKind::Input { var, mut params } => {
                if var >= n {
                    return Err(at(i, format!("variable {var} out of range")));
                }
                renormalize(&mut params);
                Unit {
                    kind: UnitKind::Input(InputDistribution { var, log_probs: params }),
                    scope: Scope::singleton(var),
                }
            }
            RawKind::Sum { children, mut params } => {
                let (children, scope) = link(&units, i, &children, &at)?;
                renormalize(&mut params);
                Unit { kind: UnitKind::Sum { children, log_params: params }, scope }
            }
            RawKind::Product { children } => {
                let (children, scope) = link(&units, i, &children, &at)?;
                Unit { kind: UnitKind::Product { children }, scope }
            }
        };
        units.push(unit);
    }
    if root >= units.len() {
        return Err(at(units.len(), format!("root {root} out of range")));
    }
    Circuit::from_units_unchecked(cards, units, UnitId(root))
}

fn link(
    units: &[Unit],
    i: usize,
    children: &[usize],
    at: &impl Fn(usize, String) -> Error,
) -> Result<(Vec<UnitId>, Scope)> {
    let mut scope = Scope::default();
    for &c in children {
        if c >= i {
            return Err(at(i, format!("child {c} must precede unit {i}")));
        }
        scope.union_with(&units[c].scope);
    }
    Ok((children.iter().map(|&c| UnitId(c)).collect(), scope))
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn fmt_params(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

pub fn write_circuit_text<W: Write>(circuit: &Circuit, mut w: W) -> Result<()> {
    writeln!(w, "circuitflow {TEXT_VERSION}")?;
    writeln!(
        w,
        "cardinalities {}",
        circuit.cardinalities().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    )?;
    writeln!(w, "root {}", circuit.root())?;
    for (i, u) in circuit.units().iter().enumerate() {
        match &u.kind {
            UnitKind::Input(d) => writeln!(w, "{i} input var={} params={}", d.var, fmt_params(&d.log_probs))?,
            UnitKind::Sum { children, log_params } => writeln!(
                w,
                "{i} sum children={} params={}",
                fmt_list(&children.iter().map(|c| c.0).collect::<Vec<_>>()),
                fmt_params(log_params)
            )?,
            UnitKind::Product { children } => {
                writeln!(w, "{i} product children={}", fmt_list(&children.iter().map(|c| c.0).collect::<Vec<_>>()))?
            }
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_usize_list(s: &str, line: usize) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| parse_err(line, format!("bad index {t:?}")))).collect()
}

fn parse_f64_list(s: &str, line: usize) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| parse_err(line, format!("bad number {t:?}")))?;
            if v.is_nan() {
                return Err(parse_err(line, "NaN parameter"));
            }
            Ok(v)
        })
        .collect()
}

/// Parses the text format without structural validation.
pub fn parse_circuit_text_unchecked(text: &str) -> Result<Circuit> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let version = header
        .strip_prefix("circuitflow ")
        .ok_or_else(|| parse_err(ln, "expected `circuitflow <version>`"))?
        .trim()
        .parse::<u32>()
        .map_err(|_| parse_err(ln, "bad version"))?;
    if version != TEXT_VERSION {
        return Err(Error::Version { found: version, expected: TEXT_VERSION });
    }
    let (ln, cards_line) = lines.next().ok_or_else(|| parse_err(ln + 1, "missing cardinalities"))?;
    let cards: Vec<u32> = cards_line
        .strip_prefix("cardinalities")
        .ok_or_else(|| parse_err(ln, "expected `cardinalities ...`"))?
        .split_whitespace()
        .map(|t| match t.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(parse_err(ln, format!("bad cardinality {t:?}"))),
        })
        .collect::<Result<_>>()?;
    let (ln, root_line) = lines.next().ok_or_else(|| parse_err(ln + 1, "missing root"))?;
    let root: usize = root_line
        .strip_prefix("root ")
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| parse_err(ln, "expected `root <id>`"))?;
    let mut raw = Vec::new();
    let mut line_of = Vec::new();
    for (ln, line) in lines {
        let mut parts = line.split_whitespace();
        let id: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(ln, "expected unit id"))?;
        if id != raw.len() {
            return Err(parse_err(ln, format!("expected unit id {}, found {id}", raw.len())));
        }
        let kind = parts.next().ok_or_else(|| parse_err(ln, "missing unit kind"))?;
        let mut var = None;
        let mut children = None;
        let mut params = None;
        for field in parts {
            let (key, value) = field.split_once('=').ok_or_else(|| parse_err(ln, format!("bad field {field:?}")))?;
            match key {
                "var" => var = Some(value.parse::<usize>().map_err(|_| parse_err(ln, "bad var"))?),
                "children" => children = Some(parse_usize_list(value, ln)?),
                "params" => params = Some(parse_f64_list(value, ln)?),
                _ => return Err(parse_err(ln, format!("unknown field {key:?}"))),
            }
        }
        let missing = |f: &str| parse_err(ln, format!("{kind} unit needs {f}"));
        raw.push(match kind {
            "input" => RawKind::Input {
                var: var.ok_or_else(|| missing("var"))?,
                params: params.ok_or_else(|| missing("params"))?,
            },
            "sum" => RawKind::Sum {
                children: children.ok_or_else(|| missing("children"))?,
                params: params.ok_or_else(|| missing("params"))?,
            },
            "product" => RawKind::Product { children: children.ok_or_else(|| missing("children"))? },
            other => return Err(parse_err(ln, format!("unknown unit kind {other:?}"))),
        });
        line_of.push(ln);
    }
    let last = line_of.last().copied().unwrap_or(0);
    assemble(cards, raw, root, |i, msg| parse_err(line_of.get(i).copied().unwrap_or(last), msg))
}

/// Parses and validates the text format.
pub fn parse_circuit_text(text: &str) -> Result<Circuit> {
    checked(parse_circuit_text_unchecked(text)?)
}

fn checked(c: Circuit) -> Result<Circuit> {
    let v = c.validate();
    if v.is_empty() {
        Ok(c)
    } else {
        Err(Error::InvalidCircuit(v))
    }
}

pub fn circuit_to_bytes(circuit: &Circuit) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(circuit.num_vars() as u32).to_le_bytes());
    for &k in circuit.cardinalities() {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out.extend_from_slice(&(circuit.len() as u64).to_le_bytes());
    out.extend_from_slice(&(circuit.root().0 as u64).to_le_bytes());
    let ids = |out: &mut Vec<u8>, children: &[UnitId]| {
        out.extend_from_slice(&(children.len() as u32).to_le_bytes());
        for c in children {
            out.extend_from_slice(&(c.0 as u64).to_le_bytes());
        }
    };
    for u in circuit.units() {
        match &u.kind {
            UnitKind::Input(d) => {
                out.push(0);
                out.extend_from_slice(&(d.var as u32).to_le_bytes());
                out.extend_from_slice(&(d.log_probs.len() as u32).to_le_bytes());
                for p in &d.log_probs {
                    out.extend_from_slice(&p.to_le_bytes());
                }
            }
            UnitKind::Sum { children, log_params } => {
                out.push(1);
                ids(&mut out, children);
                for p in log_params {
                    out.extend_from_slice(&p.to_le_bytes());
                }
            }
            UnitKind::Product { children } => {
                out.push(2);
                ids(&mut out, children);
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Little-endian cursor over a byte slice; running out of bytes is a checksum
/// error because the trailer was already verified.
pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checksum);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Checks magic, trailing CRC and version; returns a reader positioned after the version.
pub(crate) fn open_binary<'a>(
    bytes: &'a [u8],
    magic: &[u8; 4],
    what: &'static str,
    version: u32,
) -> Result<Reader<'a>> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::Magic(what));
    }
    if bytes.len() < 12 {
        return Err(Error::Checksum);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(Error::Checksum);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let found = r.u32()?;
    if found != version {
        return Err(Error::Version { found, expected: version });
    }
    Ok(r)
}

fn bin_err(msg: impl Into<String>) -> Error {
    Error::Parse { line: 0, msg: msg.into() }
}

/// Decodes the binary format without structural validation.
pub fn circuit_from_bytes_unchecked(bytes: &[u8]) -> Result<Circuit> {
    let mut r = open_binary(bytes, BINARY_MAGIC, "binary circuit", BINARY_VERSION)?;
    let n = r.u32()? as usize;
    if n > r.remaining() / 4 {
        return Err(bin_err("variable count exceeds file size"));
    }
    let cards = (0..n)
        .map(|_| match r.u32()? {
            0 => Err(bin_err("zero cardinality")),
            k => Ok(k),
        })
        .collect::<Result<Vec<u32>>>()?;
    let count = r.u64()? as usize;
    let root = r.u64()? as usize;
    if count > r.remaining() {
        return Err(bin_err("unit count exceeds file size"));
    }
    let mut raw = Vec::with_capacity(count);
    for _ in 0..count {
        let tag = r.u8()?;
        let kind = match tag {
            0 => {
                let var = r.u32()? as usize;
                let k = r.u32()? as usize;
                if k > r.remaining() / 8 {
                    return Err(bin_err("parameter count exceeds file size"));
                }
                let params = (0..k).map(|_| r.f64()).collect::<Result<_>>()?;
                RawKind::Input { var, params }
            }
            1 | 2 => {
                let k = r.u32()? as usize;
                if k > r.remaining() / 8 {
                    return Err(bin_err("child count exceeds file size"));
                }
                let children = (0..k).map(|_| r.u64().map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
                if tag == 1 {
                    let params = (0..k).map(|_| r.f64()).collect::<Result<_>>()?;
                    RawKind::Sum { children, params }
                } else {
                    RawKind::Product { children }
                }
            }
            t => return Err(bin_err(format!("unknown unit tag {t}"))),
        };
        raw.push(kind);
    }
    if r.remaining() != 0 {
        return Err(bin_err("trailing bytes after last unit"));
    }
    let c = assemble(cards, raw, root, |i, msg| bin_err(format!("unit {i}: {msg}")))?;
    if c.units().iter().any(|u| match &u.kind {
        UnitKind::Input(d) => d.log_probs.iter().any(|p| p.is_nan()),
        UnitKind::Sum { log_params, .. } => log_params.iter().any(|p| p.is_nan()),
        UnitKind::Product { .. } => false,
    }) {
        return Err(bin_err("NaN parameter"));
    }
    Ok(c)
}

/// Decodes and validates the binary format.
pub fn circuit_from_bytes(bytes: &[u8]) -> Result<Circuit> {
    checked(circuit_from_bytes_unchecked(bytes)?)
}

pub fn save_circuit(circuit: &Circuit, path: &Path, format: CircuitFormat) -> Result<()> {
    match format {
        CircuitFormat::Binary => fs::write(path, circuit_to_bytes(circuit))?,
        CircuitFormat::Text => {
            let mut buf = Vec::new();
            write_circuit_text(circuit, &mut buf)?;
            fs::write(path, buf)?;
        }
    }
    Ok(())
}

/// Loads and validates a circuit.
pub fn load_circuit(path: &Path, format: CircuitFormat) -> Result<Circuit> {
    checked(load_circuit_unchecked(path, format)?)
}

/// Loads a circuit without structural validation, for inspecting broken files.
pub fn load_circuit_unchecked(path: &Path, format: CircuitFormat) -> Result<Circuit> {
    match format {
        CircuitFormat::Binary => circuit_from_bytes_unchecked(&fs::read(path)?),
        CircuitFormat::Text => parse_circuit_text_unchecked(&fs::read_to_string(path)?),
    }
}
