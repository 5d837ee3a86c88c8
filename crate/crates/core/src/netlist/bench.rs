//! Reader and writer for the ISCAS `.bench` netlist format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{is_key_name, Gate, GateType, Netlist};
use crate::error::{Error, Result};

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

/// Parse `KEYWORD(name)` if the line starts with the keyword (any case).
fn directive<'a>(line: &'a str, keyword: &str, lineno: usize) -> Result<Option<&'a str>> {
    if line.len() < keyword.len() || !line[..keyword.len()].eq_ignore_ascii_case(keyword) {
        return Ok(None);
    }
    let rest = line[keyword.len()..].trim_start();
    if !rest.starts_with('(') {
        return Ok(None);
    }
    let inner = rest[1..]
        .strip_suffix(')')
        .ok_or_else(|| syntax(lineno, "missing closing parenthesis"))?
        .trim();
    if inner.is_empty() || inner.contains(|c: char| c.is_whitespace() || c == ',') {
        return Err(syntax(lineno, format!("invalid net name `{inner}`")));
    }
    Ok(Some(inner))
}

/// Parse bench text into a validated [`Netlist`].
///
/// `INPUT` lines whose name matches `keyinput<N>` become key inputs.
pub fn parse_bench(text: &str) -> Result<Netlist> {
    let mut inputs = Vec::new();
    let mut keys = Vec::new();
    let mut outputs = Vec::new();
    let mut gates: BTreeMap<String, Gate> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = directive(line, "INPUT", lineno)? {
            if is_key_name(name) {
                keys.push(name.to_string());
            } else {
                inputs.push(name.to_string());
            }
            continue;
        }
        if let Some(name) = directive(line, "OUTPUT", lineno)? {
            outputs.push(name.to_string());
            continue;
        }
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| syntax(lineno, format!("unrecognised statement `{line}`")))?;
        let out = lhs.trim();
        if out.is_empty() || out.contains(char::is_whitespace) {
            return Err(syntax(lineno, format!("invalid net name `{out}`")));
        }
        let rhs = rhs.trim();
        let open = rhs
            .find('(')
            .ok_or_else(|| syntax(lineno, "missing opening parenthesis"))?;
        let args = rhs[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| syntax(lineno, "missing closing parenthesis"))?;
        let kind_name = rhs[..open].trim();
        let kind = GateType::from_name(kind_name)
            .ok_or_else(|| syntax(lineno, format!("unknown gate type `{kind_name}`")))?;
        let args: Vec<String> = args.split(',').map(|a| a.trim().to_string()).collect();
        if args.iter().any(|a| a.is_empty() || a.contains(char::is_whitespace)) {
            return Err(syntax(lineno, "empty or malformed gate argument"));
        }
        if gates.contains_key(out) {
            return Err(Error::DuplicateDriver(out.to_string()));
        }
        gates.insert(out.to_string(), Gate::new(kind, args));
    }
    Netlist::new(inputs, keys, outputs, gates)
}

/// Render a netlist as bench text. Gates are emitted in topological order.
pub fn write_bench(n: &Netlist) -> String {
    write_bench_with_header(n, &[])
}

/// Like [`write_bench`], with leading `#` comment lines.
pub fn write_bench_with_header(n: &Netlist, header: &[String]) -> String {
    let mut out = String::new();
    for line in header {
        for l in line.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    for pi in n.primary_inputs() {
        let _ = writeln!(out, "INPUT({pi})");
    }
    for k in n.key_inputs() {
        let _ = writeln!(out, "INPUT({k})");
    }
    out.push('\n');
    for po in n.primary_outputs() {
        let _ = writeln!(out, "OUTPUT({po})");
    }
    out.push('\n');
    let order = n.topo_order().expect("validated netlist is acyclic");
    for id in order {
        let gate = &n.gates()[&id];
        let _ = writeln!(out, "{id} = {}({})", gate.kind, gate.inputs.join(", "));
    }
    out
}
