//! Replaces accepted segments by `cpld` instructions and describes the
//! hardware image in a manifest.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asm::{Instruction, Opcode, Program, Register};
use crate::selector::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpldInstruction {
    pub rd: Register,
    pub rs: Register,
    pub rt: Register,
    pub fu_slot: usize,
}

impl CpldInstruction {
    pub fn for_segment(seg: &Segment, fu_slot: usize) -> CpldInstruction {
        let ins = &seg.graph.live_in;
        CpldInstruction {
            rd: seg.graph.live_out,
            rs: ins.first().copied().unwrap_or(Register::ZERO),
            rt: ins.get(1).copied().unwrap_or(Register::ZERO),
            fu_slot,
        }
    }

    /// Recognizes a `cpld rd, rs, rt` line (parsed as an opaque instruction).
    pub fn from_instruction(insn: &Instruction) -> Option<(Register, Register, Register)> {
        let Opcode::Other(text) = &insn.opcode else { return None };
        let rest = text.strip_prefix("cpld")?;
        if !rest.starts_with(char::is_whitespace) {
            return None;
        }
        let regs: Vec<Register> = rest
            .split(',')
            .map(|t| t.trim().strip_prefix('$').and_then(|n| n.parse::<u8>().ok()).and_then(Register::new))
            .collect::<Option<_>>()?;
        match regs.as_slice() {
            [rd, rs, rt] => Some((*rd, *rs, *rt)),
            _ => None,
        }
    }
}

impl fmt::Display for CpldInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cpld {}, {}, {}", self.rd, self.rs, self.rt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("segments at lines {0} and {1} overlap")]
    OverlapDetected(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub text: String,
    /// One per accepted segment, in program order; `fu_slot` is the index.
    pub instructions: Vec<CpldInstruction>,
    /// For each slot, the index of its segment in the `accepted` argument.
    pub source_index: Vec<usize>,
}

/// The part of a line before its instruction: indentation and any label.
fn line_prefix(line: &str) -> &str {
    let trimmed = line.trim_start();
    let indent = &line[..line.len() - trimmed.len()];
    if let Some(colon) = trimmed.find(':') {
        let name = trimmed[..colon].trim();
        let before_comment = !trimmed[..colon].contains('#');
        if before_comment && !name.is_empty() && !name.starts_with('$') && !name.contains(char::is_whitespace) {
            let after = &trimmed[colon + 1..];
            let ws = after.len() - after.trim_start().len();
            return &line[..indent.len() + colon + 1 + ws];
        }
    }
    indent
}

/// Replaces each accepted span by one `cpld` line. Comment and blank lines
/// inside a span stay; every line outside the spans is copied unchanged.
pub fn rewrite(program: &Program, accepted: &[&Segment]) -> Result<Rewrite, RewriteError> {
    let mut order: Vec<usize> = (0..accepted.len()).collect();
    order.sort_by_key(|&i| accepted[i].first_line());
    for w in order.windows(2) {
        let (a, b) = (accepted[w[0]], accepted[w[1]]);
        if a.overlaps(b) || a.last_line() >= b.first_line() {
            return Err(RewriteError::OverlapDetected(a.first_line(), b.first_line()));
        }
    }
    let instructions: Vec<CpldInstruction> =
        order.iter().enumerate().map(|(slot, &i)| CpldInstruction::for_segment(accepted[i], slot)).collect();
    if accepted.is_empty() {
        let mut text = program.lines.join("\n");
        if !program.lines.is_empty() {
            text.push('\n');
        }
        return Ok(Rewrite { text, instructions, source_index: order });
    }

    // line numbers are 1-based
    let mut replace: Vec<Option<usize>> = vec![None; program.lines.len() + 1];
    let mut delete = vec![false; program.lines.len() + 1];
    for (slot, &i) in order.iter().enumerate() {
        let seg = accepted[i];
        replace[seg.first_line()] = Some(slot);
        for insn in &seg.instructions[1..] {
            delete[insn.line_no] = true;
        }
    }
    let mut text = String::new();
    for (i, line) in program.lines.iter().enumerate() {
        let n = i + 1;
        if delete[n] {
            continue;
        }
        match replace[n] {
            Some(slot) => {
                let _ = writeln!(text, "{}{}", line_prefix(line), instructions[slot]);
            }
            None => {
                text.push_str(line);
                text.push('\n');
            }
        }
    }
    Ok(Rewrite { text, instructions, source_index: order })
}

/// Distinct registers written anywhere in `before` minus those written in
/// `after`, counting `cpld` as a write of its `rd`.
pub fn register_pressure_delta(before: &Program, after: &Program) -> i64 {
    fn written(p: &Program) -> BTreeSet<Register> {
        p.instructions()
            .filter_map(|i| match CpldInstruction::from_instruction(i) {
                Some((rd, _, _)) => Some(rd),
                None => i.writes(),
            })
            .filter(|r| !r.is_zero())
            .collect()
    }
    written(before).len() as i64 - written(after).len() as i64
}

pub fn program_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub fu_slot: usize,
    pub rd: Register,
    pub rs: Register,
    pub rt: Register,
    pub phdl_file: String,
    pub netlist_file: String,
    pub fit_report: String,
    /// Source lines of the replaced span, first and last.
    pub lines: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HwImageManifest {
    pub program_hash: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("fu slots are not dense 0..{0}")]
    SparseSlots(usize),
}

/// Artifact base name for a slot; slots count from 0, files from 1.
pub fn artifact_stem(fu_slot: usize) -> String {
    format!("seg{}", fu_slot + 1)
}

impl HwImageManifest {
    pub fn new(rewritten_text: &str, rw: &Rewrite, accepted: &[&Segment]) -> HwImageManifest {
        let entries = rw
            .instructions
            .iter()
            .zip(&rw.source_index)
            .map(|(c, &i)| {
                let stem = artifact_stem(c.fu_slot);
                ManifestEntry {
                    fu_slot: c.fu_slot,
                    rd: c.rd,
                    rs: c.rs,
                    rt: c.rt,
                    phdl_file: format!("{stem}.phd"),
                    netlist_file: format!("{stem}.net"),
                    fit_report: format!("{stem}.rpt"),
                    lines: (accepted[i].first_line(), accepted[i].last_line()),
                }
            })
            .collect();
        HwImageManifest { program_hash: program_hash(rewritten_text), entries }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "program_hash={}", self.program_hash);
        let _ = writeln!(out, "slots={}", self.entries.len());
        for e in &self.entries {
            let _ = writeln!(out);
            let _ = writeln!(out, "[slot {}]", e.fu_slot);
            let _ = writeln!(out, "instruction=cpld {}, {}, {}", e.rd, e.rs, e.rt);
            let _ = writeln!(out, "phdl={}", e.phdl_file);
            let _ = writeln!(out, "netlist={}", e.netlist_file);
            let _ = writeln!(out, "report={}", e.fit_report);
            let _ = writeln!(out, "source_lines={}-{}", e.lines.0, e.lines.1);
        }
        out
    }

    pub fn parse(text: &str) -> Result<HwImageManifest, ManifestError> {
        let err = |line: usize, msg: &str| ManifestError::Syntax { line, msg: msg.to_string() };
        let mut hash = None;
        let mut entries: Vec<ManifestEntry> = Vec::new();
        let mut current: Option<ManifestEntry> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.trim();
            if body.is_empty() {
                continue;
            }
            if let Some(slot) = body.strip_prefix("[slot ").and_then(|s| s.strip_suffix(']')) {
                entries.extend(current.take());
                let fu_slot = slot.trim().parse().map_err(|_| err(line, "bad slot number"))?;
                current = Some(ManifestEntry {
                    fu_slot,
                    rd: Register::ZERO,
                    rs: Register::ZERO,
                    rt: Register::ZERO,
                    phdl_file: String::new(),
                    netlist_file: String::new(),
                    fit_report: String::new(),
                    lines: (0, 0),
                });
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| err(line, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(e) = current.as_mut() else {
                match key {
                    "program_hash" => hash = Some(value.to_string()),
                    "slots" => {}
                    _ => return Err(err(line, "unknown header key")),
                }
                continue;
            };
            match key {
                "instruction" => {
                    let insn = crate::asm::parse_program(value)
                        .ok()
                        .and_then(|b| b.first().and_then(|b| b.instructions.first().cloned()))
                        .ok_or_else(|| err(line, "bad instruction"))?;
                    let (rd, rs, rt) = CpldInstruction::from_instruction(&insn).ok_or_else(|| err(line, "bad instruction"))?;
                    (e.rd, e.rs, e.rt) = (rd, rs, rt);
                }
                "phdl" => e.phdl_file = value.to_string(),
                "netlist" => e.netlist_file = value.to_string(),
                "report" => e.fit_report = value.to_string(),
                "source_lines" => {
                    let (a, b) = value.split_once('-').ok_or_else(|| err(line, "bad line range"))?;
                    e.lines = (
                        a.parse().map_err(|_| err(line, "bad line range"))?,
                        b.parse().map_err(|_| err(line, "bad line range"))?,
                    );
                }
                _ => return Err(err(line, "unknown slot key")),
            }
        }
        entries.extend(current);
        if entries.iter().enumerate().any(|(i, e)| e.fu_slot != i) {
            return Err(ManifestError::SparseSlots(entries.len()));
        }
        Ok(HwImageManifest { program_hash: hash.ok_or_else(|| err(0, "missing program_hash"))?, entries })
    }
}
