//! End-to-end orchestration: translate, synthesize, compile and verify,
//! producing in-memory artifacts that callers may write to disk.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::asm::{AsmError, Program, Register};
use crate::device::{fit, format_decimal, DeviceParams, FitReport};
use crate::ir::{prepare_segment, IrError};
use crate::phdl::{parse_phdl, render_phdl, translate, PhdlDesign, PhdlGenError, PhdlParseError};
use crate::rewriter::{artifact_stem, rewrite, CpldInstruction, HwImageManifest, ManifestError, Rewrite, RewriteError};
use crate::selector::{enumerate_candidates, select_with_feedback, FeedbackBudget, ProfileMap, Segment, SegmentHardware, SelectionVerdict};
use crate::synth::{synthesize, MappedNetlist, NetlistParseError, SynthError, SynthOptions};
use crate::verify::{check_program, differential_check, exhaustive_narrow_check, VerifyError};
use crate::word::WordWidth;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{file}: {source}")]
    Asm { file: String, source: AsmError },
    #[error("{file}: {source}")]
    Ir { file: String, source: IrError },
    #[error("{file}: {source}")]
    Gen { file: String, source: PhdlGenError },
    #[error("{file}: {source}")]
    PhdlParse { file: String, source: PhdlParseError },
    #[error("{file}: {source}")]
    Synth { file: String, source: SynthError },
    #[error("{file}: {source}")]
    Netlist { file: String, source: NetlistParseError },
    #[error("{file}: {source}")]
    Manifest { file: String, source: ManifestError },
    #[error("{0}")]
    Rewrite(#[from] RewriteError),
    #[error("{file}: {msg}")]
    Input { file: String, msg: String },
    #[error("{context}: {source}")]
    Verify { context: String, source: VerifyError },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl DriverError {
    pub fn is_verification_failure(&self) -> bool {
        matches!(self, DriverError::Verify { .. })
    }
}

/// A named text file produced by the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Writes each artifact through a temporary file and a rename.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), DriverError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| DriverError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        let tmp = dir.join(format!(".{}.tmp", a.name));
        fs::write(&tmp, &a.contents).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompileOptions {
    pub budget: FeedbackBudget,
    pub device: DeviceParams,
    pub synth: SynthOptions,
    pub profile: ProfileMap,
}

impl CompileOptions {
    /// Synthesis options with the cell size taken from the device.
    pub fn synth_for_device(&self) -> SynthOptions {
        SynthOptions { max_cell_cubes: self.device.max_cell_cubes(), ..self.synth.clone() }
    }
}

/// Translation of a file holding one straight-line segment.
pub fn translate_segment(file: &str, text: &str) -> Result<(PhdlDesign, Artifact), DriverError> {
    let program = Program::parse(text).map_err(|source| DriverError::Asm { file: file.to_string(), source })?;
    let insns: Vec<_> = program.instructions().cloned().collect();
    if let Some(bad) = insns.iter().find(|i| !i.is_supported()) {
        return Err(DriverError::Input { file: file.to_string(), msg: format!("line {}: `{bad}` is not translatable", bad.line_no) });
    }
    let g = prepare_segment(&insns).map_err(|source| DriverError::Ir { file: file.to_string(), source })?;
    let design = translate(&g, 1, WordWidth::W32).map_err(|source| DriverError::Gen { file: file.to_string(), source })?;
    let artifact = Artifact { name: format!("{}.phd", design.module_name), contents: render_phdl(&design) };
    Ok((design, artifact))
}

/// Netlist and fit report for a PHDL file.
pub fn synth_phdl(
    file: &str,
    text: &str,
    opts: &CompileOptions,
) -> Result<(MappedNetlist, FitReport, Vec<Artifact>), DriverError> {
    let design = parse_phdl(text).map_err(|source| DriverError::PhdlParse { file: file.to_string(), source })?;
    let netlist = synthesize(&design, &opts.synth_for_device()).map_err(|source| DriverError::Synth { file: file.to_string(), source })?;
    let report = fit(&netlist.mapped, &opts.device);
    let artifacts = vec![
        Artifact { name: format!("{}.net", design.module_name), contents: netlist.mapped.dump() },
        Artifact { name: format!("{}.rpt", design.module_name), contents: report.render() },
    ];
    Ok((netlist.mapped, report, artifacts))
}

#[derive(Debug, Clone)]
pub struct CompileOutput {
    pub program: Program,
    pub verdicts: Vec<SelectionVerdict>,
    pub rewrite: Rewrite,
    pub manifest: HwImageManifest,
    /// Per fu slot, named `seg<slot+1>`.
    pub hardware: Vec<SegmentHardware>,
    pub accepted: Vec<Segment>,
    /// Rewritten program, manifest and per-slot files.
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

impl CompileOutput {
    pub fn rewritten_program(&self) -> Program {
        Program::parse(&self.rewrite.text).expect("rewritten text reparses")
    }

    pub fn register_pressure_delta(&self) -> i64 {
        crate::rewriter::register_pressure_delta(&self.program, &self.rewritten_program())
    }
}

fn verdict_label(v: &SelectionVerdict) -> String {
    match &v.rejection_reason {
        None => "accepted".to_string(),
        Some(crate::selector::RejectReason::ClobbersLiveRegister(r)) => format!("clobbers_live_register({r})"),
        Some(r) => r.code().to_string(),
    }
}

fn summary_table(verdicts: &[SelectionVerdict]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>8} {:>10} {:>12}  verdict", "segment", "weight", "macrocells", "latency_ns");
    for v in verdicts {
        let s = &v.segment;
        let span = format!("b{}:{}-{}", s.block, s.first_line(), s.last_line());
        let mc = v.macrocells.map_or("-".to_string(), |m| m.to_string());
        let lat = v.latency_ns.map_or("-".to_string(), format_decimal);
        let _ = writeln!(out, "{:<16} {:>8} {:>10} {:>12}  {}", span, s.profile_weight, mc, lat, verdict_label(v));
    }
    out
}

/// Runs the whole chain on a program. `stem` names the rewritten file
/// (`<stem>.cpld.s`) and the manifest (`<stem>.manifest`).
pub fn compile(file: &str, text: &str, stem: &str, opts: &CompileOptions) -> Result<CompileOutput, DriverError> {
    let program = Program::parse(text).map_err(|source| DriverError::Asm { file: file.to_string(), source })?;
    let cands = enumerate_candidates(&program.blocks, &opts.profile);
    let verdicts = select_with_feedback(&program, &cands, &opts.budget, &opts.device, &opts.synth_for_device());
    let accepted_v: Vec<&SelectionVerdict> = verdicts.iter().filter(|v| v.accepted).collect();
    let accepted: Vec<Segment> = accepted_v.iter().map(|v| v.segment.clone()).collect();
    let refs: Vec<&Segment> = accepted.iter().collect();
    let rw = rewrite(&program, &refs)?;
    let manifest = HwImageManifest::new(&rw.text, &rw, &refs);

    let hardware: Vec<SegmentHardware> = rw
        .source_index
        .iter()
        .enumerate()
        .map(|(slot, &i)| {
            let hw = accepted_v[i].hardware.clone().expect("accepted verdicts carry hardware");
            hw.renamed(slot + 1)
        })
        .collect();

    let mut artifacts = vec![
        Artifact { name: format!("{stem}.cpld.s"), contents: rw.text.clone() },
        Artifact { name: format!("{stem}.manifest"), contents: manifest.render() },
    ];
    for (slot, hw) in hardware.iter().enumerate() {
        let base = artifact_stem(slot);
        artifacts.push(Artifact { name: format!("{base}.phd"), contents: hw.phdl_text() });
        artifacts.push(Artifact { name: format!("{base}.net"), contents: hw.netlist.mapped.dump() });
        artifacts.push(Artifact { name: format!("{base}.rpt"), contents: hw.report.render() });
    }
    let summary = summary_table(&verdicts);
    Ok(CompileOutput { program, verdicts, rewrite: rw, manifest, hardware, accepted, artifacts, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    /// Width of the exhaustive check; `None` skips it.
    pub narrow_width: Option<WordWidth>,
    pub program_trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { trials: 10_000, seed: 0x5eed, narrow_width: WordWidth::new(8), program_trials: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub slots: usize,
    pub vectors_checked: usize,
    pub narrow_vectors: usize,
    pub program_trials: usize,
}

/// Rebuilds the segment a manifest entry replaced, from its source lines.
fn segment_for_lines(program: &Program, lines: (usize, usize), file: &str) -> Result<Segment, DriverError> {
    let bad = |msg: &str| DriverError::Input { file: file.to_string(), msg: msg.to_string() };
    for (b, block) in program.blocks.iter().enumerate() {
        let idx: Vec<usize> = block
            .instructions
            .iter()
            .enumerate()
            .filter(|(_, i)| (lines.0..=lines.1).contains(&i.line_no))
            .map(|(k, _)| k)
            .collect();
        let (Some(&start), Some(&end)) = (idx.first(), idx.last()) else { continue };
        let instructions = block.instructions[start..=end].to_vec();
        if instructions.first().map(|i| i.line_no) != Some(lines.0) || instructions.last().map(|i| i.line_no) != Some(lines.1) {
            return Err(bad("manifest span does not match instruction lines"));
        }
        let graph = prepare_segment(&instructions).map_err(|source| DriverError::Ir { file: file.to_string(), source })?;
        return Ok(Segment { block: b, start, end, instructions, graph, profile_weight: 1 });
    }
    Err(bad("manifest span matches no instructions"))
}

/// Checks a manifest against the original program: the rewrite it
/// describes, each netlist against the interpreter, and (for straight-line
/// programs) the rewritten program as a whole. `load` reads a manifest
/// artifact by file name.
pub fn verify_manifest(
    file: &str,
    original: &str,
    manifest: &HwImageManifest,
    load: impl Fn(&str) -> Result<String, DriverError>,
    opts: &VerifyOptions,
) -> Result<VerifyReport, DriverError> {
    let program = Program::parse(original).map_err(|source| DriverError::Asm { file: file.to_string(), source })?;
    let segments: Vec<Segment> =
        manifest.entries.iter().map(|e| segment_for_lines(&program, e.lines, file)).collect::<Result<_, _>>()?;
    let refs: Vec<&Segment> = segments.iter().collect();
    let rw = rewrite(&program, &refs)?;
    let verify_err = |context: String| move |source| DriverError::Verify { context, source };

    if crate::rewriter::program_hash(&rw.text) != manifest.program_hash {
        return Err(DriverError::Input { file: file.to_string(), msg: "manifest program_hash does not match the rewrite".into() });
    }
    let mut netlists = Vec::with_capacity(manifest.entries.len());
    let mut report = VerifyReport { slots: manifest.entries.len(), vectors_checked: 0, narrow_vectors: 0, program_trials: 0 };
    for (e, seg) in manifest.entries.iter().zip(&segments) {
        let expect = CpldInstruction::for_segment(seg, e.fu_slot);
        if (expect.rd, expect.rs, expect.rt) != (e.rd, e.rs, e.rt) {
            return Err(DriverError::Input { file: file.to_string(), msg: format!("slot {} operands disagree with its span", e.fu_slot) });
        }
        let text = load(&e.netlist_file)?;
        let n = MappedNetlist::parse(&text).map_err(|source| DriverError::Netlist { file: e.netlist_file.clone(), source })?;
        let ctx = format!("slot {} ({})", e.fu_slot, e.netlist_file);
        report.vectors_checked += differential_check(&seg.instructions, &n, opts.trials, opts.seed).map_err(verify_err(ctx.clone()))?;
        if let Some(w) = opts.narrow_width {
            report.narrow_vectors += exhaustive_narrow_check(&seg.instructions, w).map_err(verify_err(ctx))?;
        }
        netlists.push(n);
    }

    let interpretable = program
        .instructions()
        .all(|i| i.is_supported() || matches!(&i.opcode, crate::asm::Opcode::Other(t) if t.trim() == "nop"));
    if interpretable && opts.program_trials > 0 {
        let after = Program::parse(&rw.text).map_err(|source| DriverError::Asm { file: file.to_string(), source })?;
        let elided: Vec<Register> = segments.iter().flat_map(|s| s.temporaries()).collect();
        report.program_trials =
            check_program(&program, &after, &netlists, &elided, opts.program_trials, opts.seed).map_err(verify_err("program".into()))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = "\tand     $8, $9, 1\n\tli      $10, 1\n\tsubu    $11, $10, $8\n\tsll     $12, $11, 1\n";

    #[test]
    fn compile_then_verify_ex1() {
        let out = compile("ex1.s", EX1, "ex1", &CompileOptions::default()).unwrap();
        assert_eq!(out.rewrite.text, "\tcpld $12, $9, $0\n");
        let names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["ex1.cpld.s", "ex1.manifest", "seg1.phd", "seg1.net", "seg1.rpt"]);
        let load = |name: &str| {
            out.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.clone()).ok_or(DriverError::Input {
                file: name.into(),
                msg: "missing".into(),
            })
        };
        let m = HwImageManifest::parse(&out.artifacts[1].contents).unwrap();
        let r = verify_manifest("ex1.s", EX1, &m, load, &VerifyOptions::default()).unwrap();
        assert_eq!(r.slots, 1);
        assert_eq!(r.narrow_vectors, 256);
    }

    #[test]
    fn translate_then_synth_matches_compile() {
        let (_, phd) = translate_segment("ex1.s", EX1).unwrap();
        let out = compile("ex1.s", EX1, "ex1", &CompileOptions::default()).unwrap();
        assert_eq!(phd.contents, out.artifacts[2].contents);
        let (_, _, files) = synth_phdl("seg1.phd", &phd.contents, &CompileOptions::default()).unwrap();
        assert_eq!(files[0], out.artifacts[3]);
        assert_eq!(files[1], out.artifacts[4]);
    }
}
