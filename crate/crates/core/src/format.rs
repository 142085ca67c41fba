//! Line-oriented text format for topologies, flow sets and polling schemes.
//!
//! ```text
//! # comments and blank lines are ignored
//! topo n=<switch count>            (exactly once, before anything else)
//! coord <v> <x> <y>                (optional, one per switch or none)
//! link <u> <v>
//! loss <v>
//! flow id=<i> path=<v1>,<v2>,... vol=<bytes> pkt=<bytes>
//! ```
//!
//! Polling schemes use `pollall <v>` and `single <flow> <v>` lines. Cover
//! solutions start with `solution weight=<bytes> proven=<bool>` followed by
//! `pollall <v>` and `single <flow>` lines naming the chosen sets.
//!
//! Coordinates are written with Rust's shortest round-trip float formatting,
//! so parsing the output reproduces the exact same values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{Flow, FlowId, ModelError, PollingScheme, SwitchId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `topo n=<n>` header")]
    MissingHeader,
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A topology together with the flows routed over it.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub topo: Topology,
    pub flows: Vec<Flow>,
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, what: &str, s: &str) -> Result<T, FormatError> {
    s.parse()
        .map_err(|_| syntax(line, format!("bad {what} `{s}`")))
}

fn parse_key<'a>(line: usize, key: &str, tok: Option<&'a str>) -> Result<&'a str, FormatError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing `{key}=`")))?;
    tok.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| syntax(line, format!("expected `{key}=...`, found `{tok}`")))
}

fn no_more<'a>(line: usize, mut toks: impl Iterator<Item = &'a str>) -> Result<(), FormatError> {
    match toks.next() {
        Some(t) => Err(syntax(line, format!("unexpected token `{t}`"))),
        None => Ok(()),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_flow_line(line: usize, rest: &str) -> Result<Flow, FormatError> {
    let mut toks = rest.split_whitespace();
    let id = parse_num(line, "flow id", parse_key(line, "id", toks.next())?)?;
    let path = parse_key(line, "path", toks.next())?
        .split(',')
        .map(|s| parse_num(line, "switch", s).map(SwitchId))
        .collect::<Result<Vec<_>, _>>()?;
    let vol = parse_num(line, "volume", parse_key(line, "vol", toks.next())?)?;
    let pkt = parse_num(line, "packet size", parse_key(line, "pkt", toks.next())?)?;
    no_more(line, toks)?;
    Ok(Flow {
        id: FlowId(id),
        path,
        volume_bytes: vol,
        packet_size_bytes: pkt,
    })
}

pub fn write_flow_fields(out: &mut String, f: &Flow) {
    let path: Vec<String> = f.path.iter().map(|s| s.to_string()).collect();
    let _ = write!(
        out,
        "id={} path={} vol={} pkt={}",
        f.id,
        path.join(","),
        f.volume_bytes,
        f.packet_size_bytes
    );
}

pub fn write_instance(topo: &Topology, flows: &[Flow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "topo n={}", topo.switch_count());
    if let Some(coords) = topo.coordinates() {
        for (i, (x, y)) in coords.iter().enumerate() {
            let _ = writeln!(out, "coord {i} {x:?} {y:?}");
        }
    }
    for (u, v) in topo.links() {
        let _ = writeln!(out, "link {u} {v}");
    }
    for s in topo.loss_switches() {
        let _ = writeln!(out, "loss {s}");
    }
    for f in flows {
        out.push_str("flow ");
        write_flow_fields(&mut out, f);
        out.push('\n');
    }
    out
}

pub fn write_topology(topo: &Topology) -> String {
    write_instance(topo, &[])
}

/// Parses and validates an instance: the topology must be connected and
/// every flow path valid on it.
pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(FormatError::MissingHeader)?;
    let n: usize = {
        let mut toks = header.split_whitespace();
        if toks.next() != Some("topo") {
            return Err(FormatError::MissingHeader);
        }
        let n = parse_num(hline, "switch count", parse_key(hline, "n", toks.next())?)?;
        no_more(hline, toks)?;
        n
    };

    let mut links = Vec::new();
    let mut loss = Vec::new();
    let mut coords: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut flows = Vec::new();
    let mut flow_lines = Vec::new();
    for (line, l) in lines {
        let (kw, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let mut toks = rest.split_whitespace();
        match kw {
            "link" => {
                let u = parse_num(line, "switch", toks.next().unwrap_or(""))?;
                let v = parse_num(line, "switch", toks.next().unwrap_or(""))?;
                no_more(line, toks)?;
                links.push((SwitchId(u), SwitchId(v)));
            }
            "loss" => {
                let v = parse_num(line, "switch", toks.next().unwrap_or(""))?;
                no_more(line, toks)?;
                loss.push(SwitchId(v));
            }
            "coord" => {
                let v: usize = parse_num(line, "switch", toks.next().unwrap_or(""))?;
                let x = parse_num(line, "coordinate", toks.next().unwrap_or(""))?;
                let y = parse_num(line, "coordinate", toks.next().unwrap_or(""))?;
                no_more(line, toks)?;
                if v >= n || coords.insert(v, (x, y)).is_some() {
                    return Err(syntax(line, format!("bad or repeated coord for switch {v}")));
                }
            }
            "flow" => {
                flows.push(parse_flow_line(line, rest)?);
                flow_lines.push(line);
            }
            "topo" => return Err(syntax(line, "repeated topo header")),
            other => return Err(syntax(line, format!("unknown keyword `{other}`"))),
        }
    }

    let mut topo = Topology::new(n, links)?.with_loss_switches(loss)?;
    if !coords.is_empty() {
        if coords.len() != n {
            return Err(syntax(hline, "coordinates must be given for every switch or none"));
        }
        topo = topo.with_coordinates(coords.into_values().collect())?;
    }
    let mut seen = std::collections::BTreeSet::new();
    for (f, &line) in flows.iter().zip(&flow_lines) {
        if !seen.insert(f.id) {
            return Err(FormatError::Invalid {
                line,
                source: ModelError::DuplicateFlow(f.id),
            });
        }
        f.validate(&topo)
            .map_err(|source| FormatError::Invalid { line, source })?;
    }
    Ok(Instance { topo, flows })
}

pub fn write_scheme(scheme: &PollingScheme) -> String {
    let mut out = String::new();
    for s in &scheme.poll_all {
        let _ = writeln!(out, "pollall {s}");
    }
    for (f, s) in &scheme.single_polls {
        let _ = writeln!(out, "single {f} {s}");
    }
    out
}

/// Parses a scheme. Path membership of single polls is not checked here since
/// the flows are not known; see [`PollingScheme::validate`].
pub fn parse_scheme(text: &str) -> Result<PollingScheme, FormatError> {
    let mut scheme = PollingScheme::new();
    for (line, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("pollall") => {
                let v = parse_num(line, "switch", toks.next().unwrap_or(""))?;
                no_more(line, toks)?;
                scheme.poll_all.insert(SwitchId(v));
            }
            Some("single") => {
                let f = parse_num(line, "flow id", toks.next().unwrap_or(""))?;
                let v = parse_num(line, "switch", toks.next().unwrap_or(""))?;
                no_more(line, toks)?;
                if scheme.single_polls.insert(FlowId(f), SwitchId(v)).is_some() {
                    return Err(syntax(line, format!("flow {f} polled twice")));
                }
            }
            Some(other) => return Err(syntax(line, format!("unknown keyword `{other}`"))),
            None => {}
        }
    }
    Ok(scheme)
}
