//! Paje trace emission for Vite-class timeline visualizers, plus the
//! structural validator used by the test suite.
//!
//! The emitted subset uses the following event-definition numbering:
//!
//! | id | event                   |
//! |----|-------------------------|
//! | 0  | PajeDefineContainerType |
//! | 1  | PajeDefineStateType     |
//! | 2  | PajeDefineEntityValue   |
//! | 3  | PajeDefineLinkType      |
//! | 4  | PajeCreateContainer     |
//! | 5  | PajeDestroyContainer    |
//! | 6  | PajeSetState            |
//! | 7  | PajeStartLink           |
//! | 8  | PajeEndLink             |
//!
//! Containers form a Platform -> Host -> Runnable hierarchy. Runnable
//! containers carry a `RunnableState` state (Waiting, Reading, Computing,
//! Writing, Done). Activations appear as `Dependency` links between
//! runnable containers; label reads and writes appear as `Transfer` links
//! between host containers, valued with the label name. Timestamps are
//! seconds with 9 decimal places.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mapping::Mapping;
use crate::metrics::SimulationResult;
use crate::platform::PlatformModel;
use crate::simkernel::{EventKind, TransferKind};

const HEADER: &str = "\
%EventDef PajeDefineContainerType 0
%  Alias string
%  Type string
%  Name string
%EndEventDef
%EventDef PajeDefineStateType 1
%  Alias string
%  Type string
%  Name string
%EndEventDef
%EventDef PajeDefineEntityValue 2
%  Alias string
%  Type string
%  Name string
%  Color color
%EndEventDef
%EventDef PajeDefineLinkType 3
%  Alias string
%  Type string
%  StartContainerType string
%  EndContainerType string
%  Name string
%EndEventDef
%EventDef PajeCreateContainer 4
%  Time date
%  Alias string
%  Type string
%  Container string
%  Name string
%EndEventDef
%EventDef PajeDestroyContainer 5
%  Time date
%  Name string
%  Type string
%EndEventDef
%EventDef PajeSetState 6
%  Time date
%  Type string
%  Container string
%  Value string
%EndEventDef
%EventDef PajeStartLink 7
%  Time date
%  Type string
%  Container string
%  StartContainer string
%  Value string
%  Key string
%EndEventDef
%EventDef PajeEndLink 8
%  Time date
%  Type string
%  Container string
%  EndContainer string
%  Value string
%  Key string
%EndEventDef
";

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "'"))
}

fn ts(t: f64) -> String {
    format!("{t:.9}")
}

struct PhaseColor;

impl PhaseColor {
    fn of(phase: &str) -> &'static str {
        match phase {
            "Waiting" => "0.60 0.60 0.60",
            "Reading" => "0.20 0.40 0.90",
            "Computing" => "0.20 0.80 0.20",
            "Writing" => "0.90 0.60 0.10",
            _ => "0.10 0.10 0.10",
        }
    }
}

/// Render the trace document for one simulation result.
pub fn render_paje(
    result: &SimulationResult,
    platform: &PlatformModel,
    mapping: &Mapping,
) -> String {
    let mut out = String::from(HEADER);

    // Type hierarchy.
    out.push_str(&format!("0 CT_P 0 {}\n", quote("Platform")));
    out.push_str(&format!("0 CT_H CT_P {}\n", quote("Host")));
    out.push_str(&format!("0 CT_R CT_H {}\n", quote("Runnable")));
    out.push_str(&format!("1 ST_R CT_R {}\n", quote("RunnableState")));
    for phase in ["Waiting", "Reading", "Computing", "Writing", "Done"] {
        out.push_str(&format!(
            "2 V_{phase} ST_R {} {}\n",
            quote(phase),
            quote(PhaseColor::of(phase))
        ));
    }
    out.push_str(&format!("3 LT_DEP CT_P CT_R CT_R {}\n", quote("Dependency")));
    out.push_str(&format!("3 LT_TRF CT_P CT_H CT_H {}\n", quote("Transfer")));

    // Containers: the platform root, every host, every mapped runnable.
    let mut host_alias: BTreeMap<&str, String> = BTreeMap::new();
    out.push_str(&format!("4 {} C_root CT_P 0 {}\n", ts(0.0), quote("platform")));
    for (i, h) in platform.hosts.iter().enumerate() {
        let alias = format!("CH{i}");
        out.push_str(&format!(
            "4 {} {alias} CT_H C_root {}\n",
            ts(0.0),
            quote(&h.id)
        ));
        host_alias.insert(h.id.as_str(), alias);
    }
    let mut runnable_alias: BTreeMap<&str, String> = BTreeMap::new();
    for (i, (rid, host)) in mapping.runnable_to_host.iter().enumerate() {
        let alias = format!("CR{i}");
        out.push_str(&format!(
            "4 {} {alias} CT_R {} {}\n",
            ts(0.0),
            host_alias
                .get(host.as_str())
                .cloned()
                .unwrap_or_else(|| "C_root".into()),
            quote(rid)
        ));
        runnable_alias.insert(rid.as_str(), alias);
    }

    // Timeline: one SetState per phase entered, one link pair per
    // transfer. Start/end pairs are matched FIFO per endpoint signature.
    let mut key_seq = 0u64;
    let mut open_keys: HashMap<String, VecDeque<u64>> = HashMap::new();
    for ev in &result.timeline {
        match &ev.kind {
            EventKind::PhaseEnter { runnable, phase, .. } => {
                let alias = &runnable_alias[runnable.as_str()];
                out.push_str(&format!(
                    "6 {} ST_R {alias} V_{}\n",
                    ts(ev.t),
                    phase.name()
                ));
            }
            EventKind::PhaseExit { .. } => {}
            EventKind::TransferStart(t) => {
                let key = key_seq;
                key_seq += 1;
                open_keys.entry(signature(t)).or_default().push_back(key);
                match t.kind {
                    TransferKind::Activation => {
                        let src = &runnable_alias[t.owner.as_str()];
                        out.push_str(&format!(
                            "7 {} LT_DEP C_root {src} {} K{key}\n",
                            ts(ev.t),
                            quote("activation"),
                        ));
                    }
                    TransferKind::Read | TransferKind::Write => {
                        let src = &host_alias[t.src_host.as_str()];
                        let value = t.label.as_deref().unwrap_or("data");
                        out.push_str(&format!(
                            "7 {} LT_TRF C_root {src} {} K{key}\n",
                            ts(ev.t),
                            quote(value),
                        ));
                    }
                }
            }
            EventKind::TransferEnd(t) => {
                let key = open_keys
                    .get_mut(&signature(t))
                    .and_then(|q| q.pop_front())
                    .expect("transfer end without start");
                match t.kind {
                    TransferKind::Activation => {
                        let dst = &runnable_alias[t
                            .target
                            .as_deref()
                            .expect("activation has a target")];
                        out.push_str(&format!(
                            "8 {} LT_DEP C_root {dst} {} K{key}\n",
                            ts(ev.t),
                            quote("activation"),
                        ));
                    }
                    TransferKind::Read | TransferKind::Write => {
                        let dst = &host_alias[t.dst_host.as_str()];
                        let value = t.label.as_deref().unwrap_or("data");
                        out.push_str(&format!(
                            "8 {} LT_TRF C_root {dst} {} K{key}\n",
                            ts(ev.t),
                            quote(value),
                        ));
                    }
                }
            }
        }
    }

    // Close every container at the makespan.
    for (rid, alias) in &runnable_alias {
        let _ = rid;
        out.push_str(&format!("5 {} {alias} CT_R\n", ts(result.makespan)));
    }
    for (hid, alias) in &host_alias {
        let _ = hid;
        out.push_str(&format!("5 {} {alias} CT_H\n", ts(result.makespan)));
    }
    out.push_str(&format!("5 {} C_root CT_P\n", ts(result.makespan)));
    out
}

fn signature(t: &crate::simkernel::TransferEvent) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}",
        t.owner,
        t.kind.name(),
        t.src_host,
        t.dst_host,
        t.label.as_deref().unwrap_or(""),
        t.target.as_deref().unwrap_or("")
    )
}

/// Write the trace to a file.
pub fn emit_paje(
    result: &SimulationResult,
    platform: &PlatformModel,
    mapping: &Mapping,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_paje(result, platform, mapping)).map_err(|e| Error::io(path, e))
}

/// Counters reported by the validator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub containers: usize,
    pub set_states: usize,
    pub links: usize,
}

fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for c in line.chars() {
        match c {
            '"' => in_quotes = !in_quotes,
            c if c.is_whitespace() && !in_quotes => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Structural validation of a Paje document: every event id declared in
/// the header, correct field counts, containers and types defined before
/// use, non-decreasing timestamps and balanced start/end links.
pub fn validate_paje(text: &str) -> Result<TraceStats> {
    let fail = |line_no: usize, message: String| Error::Schema { line: line_no, message };

    // Header pass: map event ids to names and field counts.
    let mut event_fields: HashMap<String, (String, usize)> = HashMap::new();
    let mut current: Option<(String, String, usize)> = None;
    let mut stats = TraceStats::default();

    let mut containers: BTreeMap<String, f64> = BTreeMap::new();
    let mut container_types: BTreeMap<String, String> = BTreeMap::new();
    let mut state_types: BTreeMap<String, ()> = BTreeMap::new();
    let mut values: BTreeMap<String, ()> = BTreeMap::new();
    let mut link_types: BTreeMap<String, ()> = BTreeMap::new();
    let mut open_links: HashMap<String, (f64, String)> = HashMap::new();
    let mut last_t = 0.0f64;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('%') {
            let rest = rest.trim();
            if let Some(def) = rest.strip_prefix("EventDef ") {
                let mut parts = def.split_whitespace();
                let name = parts
                    .next()
                    .ok_or_else(|| fail(line_no, "EventDef without name".into()))?;
                let id = parts
                    .next()
                    .ok_or_else(|| fail(line_no, "EventDef without id".into()))?;
                current = Some((id.to_string(), name.to_string(), 0));
            } else if rest == "EndEventDef" {
                let (id, name, fields) = current
                    .take()
                    .ok_or_else(|| fail(line_no, "EndEventDef outside EventDef".into()))?;
                event_fields.insert(id, (name, fields));
            } else if let Some((_, _, fields)) = current.as_mut() {
                *fields += 1;
            } else {
                return Err(fail(line_no, "field declaration outside EventDef".into()));
            }
            continue;
        }

        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let (name, fields) = event_fields
            .get(&tokens[0])
            .ok_or_else(|| fail(line_no, format!("undeclared event id `{}`", tokens[0])))?;
        if tokens.len() != fields + 1 {
            return Err(fail(
                line_no,
                format!("{name} expects {fields} fields, got {}", tokens.len() - 1),
            ));
        }

        let mut timestamp = |tok: &str| -> Result<f64> {
            let t: f64 = tok
                .parse()
                .map_err(|_| fail(line_no, format!("bad timestamp `{tok}`")))?;
            if t + 1e-12 < last_t {
                return Err(fail(line_no, format!("timestamp {t} precedes {last_t}")));
            }
            last_t = last_t.max(t);
            Ok(t)
        };

        match name.as_str() {
            "PajeDefineContainerType" => {
                container_types.insert(tokens[1].clone(), tokens[2].clone());
            }
            "PajeDefineStateType" => {
                if !container_types.contains_key(&tokens[2]) {
                    return Err(fail(line_no, format!("unknown container type `{}`", tokens[2])));
                }
                state_types.insert(tokens[1].clone(), ());
            }
            "PajeDefineEntityValue" => {
                if !state_types.contains_key(&tokens[2]) {
                    return Err(fail(line_no, format!("unknown state type `{}`", tokens[2])));
                }
                values.insert(tokens[1].clone(), ());
            }
            "PajeDefineLinkType" => {
                for t in [&tokens[2], &tokens[3], &tokens[4]] {
                    if !container_types.contains_key(t.as_str()) {
                        return Err(fail(line_no, format!("unknown container type `{t}`")));
                    }
                }
                link_types.insert(tokens[1].clone(), ());
            }
            "PajeCreateContainer" => {
                let t = timestamp(&tokens[1])?;
                if !container_types.contains_key(&tokens[3]) {
                    return Err(fail(line_no, format!("unknown container type `{}`", tokens[3])));
                }
                if tokens[4] != "0" && !containers.contains_key(&tokens[4]) {
                    return Err(fail(line_no, format!("parent `{}` not created", tokens[4])));
                }
                containers.insert(tokens[2].clone(), t);
                stats.containers += 1;
            }
            "PajeDestroyContainer" => {
                timestamp(&tokens[1])?;
                if !containers.contains_key(&tokens[2]) {
                    return Err(fail(line_no, format!("destroying unknown container `{}`", tokens[2])));
                }
            }
            "PajeSetState" => {
                timestamp(&tokens[1])?;
                if !state_types.contains_key(&tokens[2]) {
                    return Err(fail(line_no, format!("unknown state type `{}`", tokens[2])));
                }
                if !containers.contains_key(&tokens[3]) {
                    return Err(fail(line_no, format!("state on unknown container `{}`", tokens[3])));
                }
                if !values.contains_key(&tokens[4]) {
                    return Err(fail(line_no, format!("unknown state value `{}`", tokens[4])));
                }
                stats.set_states += 1;
            }
            "PajeStartLink" => {
                let t = timestamp(&tokens[1])?;
                if !link_types.contains_key(&tokens[2]) {
                    return Err(fail(line_no, format!("unknown link type `{}`", tokens[2])));
                }
                for c in [&tokens[3], &tokens[4]] {
                    if !containers.contains_key(c.as_str()) {
                        return Err(fail(line_no, format!("link uses unknown container `{c}`")));
                    }
                }
                if open_links.insert(tokens[6].clone(), (t, tokens[2].clone())).is_some() {
                    return Err(fail(line_no, format!("key `{}` already open", tokens[6])));
                }
            }
            "PajeEndLink" => {
                let t = timestamp(&tokens[1])?;
                for c in [&tokens[3], &tokens[4]] {
                    if !containers.contains_key(c.as_str()) {
                        return Err(fail(line_no, format!("link uses unknown container `{c}`")));
                    }
                }
                match open_links.remove(&tokens[6]) {
                    None => {
                        return Err(fail(line_no, format!("end without start for key `{}`", tokens[6])));
                    }
                    Some((t0, lt)) => {
                        if lt != tokens[2] {
                            return Err(fail(line_no, format!("link type mismatch on key `{}`", tokens[6])));
                        }
                        if t + 1e-12 < t0 {
                            return Err(fail(line_no, "link ends before it starts".into()));
                        }
                    }
                }
                stats.links += 1;
            }
            other => {
                return Err(fail(line_no, format!("unsupported event `{other}`")));
            }
        }
    }

    if let Some((key, _)) = open_links.iter().next() {
        return Err(Error::Schema {
            line: 0,
            message: format!("unbalanced link key `{key}` at end of trace"),
        });
    }
    Ok(stats)
}
