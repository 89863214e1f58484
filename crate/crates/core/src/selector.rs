//! Candidate detection, profile ranking and the fit/timing feedback loop.

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::asm::{BasicBlock, Instruction, Opcode, Program, Register};
use crate::device::{fit, DeviceParams, FitReport, Nanos};
use crate::ir::{prepare_segment, DataflowGraph};
use crate::phdl::{render_phdl, translate, PhdlDesign};
use crate::synth::{synthesize, Netlist, SynthOptions};
use crate::word::WordWidth;

/// Longest window examined when a supported run has to be cut into
/// sub-windows.
pub const MAX_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub block: usize,
    /// Inclusive instruction indices within the block.
    pub start: usize,
    pub end: usize,
    pub instructions: Vec<Instruction>,
    pub graph: DataflowGraph,
    pub profile_weight: u64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ranking score: executions times instructions saved.
    pub fn score(&self) -> u64 {
        self.profile_weight.saturating_mul(self.len() as u64 - 1)
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.block == other.block && self.start <= other.end && other.start <= self.end
    }

    pub fn first_line(&self) -> usize {
        self.instructions[0].line_no
    }

    pub fn last_line(&self) -> usize {
        self.instructions[self.instructions.len() - 1].line_no
    }

    /// Registers the segment writes other than its result.
    pub fn temporaries(&self) -> BTreeSet<Register> {
        self.instructions
            .iter()
            .filter_map(Instruction::writes)
            .filter(|r| *r != self.graph.live_out && !r.is_zero())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("profile line {0}: expected `<label> <count>` or `@<index> <count>`")]
    Syntax(usize),
}

/// Execution counts per block, by label or by block index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProfileMap {
    by_label: HashMap<String, u64>,
    by_index: HashMap<usize, u64>,
}

impl ProfileMap {
    pub fn parse(text: &str) -> Result<ProfileMap, ProfileError> {
        let mut p = ProfileMap::default();
        for (i, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut it = body.split_whitespace();
            let (Some(key), Some(count), None) = (it.next(), it.next(), it.next()) else {
                return Err(ProfileError::Syntax(i + 1));
            };
            let count: u64 = count.parse().map_err(|_| ProfileError::Syntax(i + 1))?;
            match key.strip_prefix('@') {
                Some(idx) => {
                    let idx = idx.parse().map_err(|_| ProfileError::Syntax(i + 1))?;
                    p.by_index.insert(idx, count);
                }
                None => {
                    p.by_label.insert(key.to_string(), count);
                }
            }
        }
        Ok(p)
    }

    pub fn set_index(&mut self, block: usize, count: u64) {
        self.by_index.insert(block, count);
    }

    /// Index entries win over label entries; unprofiled blocks weigh 1.
    pub fn weight(&self, block: usize, label: Option<&str>) -> u64 {
        self.by_index
            .get(&block)
            .or_else(|| label.and_then(|l| self.by_label.get(l)))
            .copied()
            .unwrap_or(1)
    }
}

/// The segment predicate: at least two supported instructions, not only
/// `li`, not ending in `li` or a `$0` write, and one or two live inputs
/// once immediates are forwarded.
pub fn window_graph(insns: &[Instruction]) -> Option<DataflowGraph> {
    if insns.len() < 2 || !insns.iter().all(Instruction::is_supported) {
        return None;
    }
    let last = insns.last()?;
    if last.opcode == Opcode::Li || last.dest.is_zero() {
        return None;
    }
    if insns.iter().all(|i| i.opcode == Opcode::Li) {
        return None;
    }
    let g = prepare_segment(insns).ok()?;
    (1..=2).contains(&g.live_in.len()).then_some(g)
}

/// Maximal valid windows of one run of supported instructions, as
/// `(start, end)` offsets into the run.
fn run_windows(run: &[Instruction]) -> Vec<(usize, usize, DataflowGraph)> {
    if let Some(g) = window_graph(run) {
        return vec![(0, run.len() - 1, g)];
    }
    let n = run.len();
    let mut valid: Vec<Vec<(usize, DataflowGraph)>> = vec![Vec::new(); n];
    for (s, ends) in valid.iter_mut().enumerate() {
        for e in s + 1..n.min(s + MAX_WINDOW) {
            if let Some(g) = window_graph(&run[s..=e]) {
                ends.push((e, g));
            }
        }
    }
    // a window is dominated by another valid one that contains it
    let best: Vec<Option<usize>> = valid.iter().map(|v| v.iter().map(|(e, _)| *e).max()).collect();
    let mut out = Vec::new();
    let mut best_before: Option<usize> = None;
    for (s, ends) in valid.into_iter().enumerate() {
        for (e, g) in ends {
            let dominated = best[s].is_some_and(|b| b > e) || best_before.is_some_and(|b| b >= e);
            if !dominated {
                out.push((s, e, g));
            }
        }
        best_before = best_before.max(best[s]);
    }
    out
}

/// All candidate segments, ranked by score descending then by position.
pub fn enumerate_candidates(blocks: &[BasicBlock], profile: &ProfileMap) -> Vec<Segment> {
    let mut out = Vec::new();
    for (b, block) in blocks.iter().enumerate() {
        let weight = profile.weight(b, block.label.as_deref());
        let insns = &block.instructions;
        let mut i = 0;
        while i < insns.len() {
            if !insns[i].is_supported() {
                i += 1;
                continue;
            }
            let start = i;
            while i < insns.len() && insns[i].is_supported() {
                i += 1;
            }
            for (s, e, graph) in run_windows(&insns[start..i]) {
                out.push(Segment {
                    block: b,
                    start: start + s,
                    end: start + e,
                    instructions: insns[start + s..=start + e].to_vec(),
                    graph,
                    profile_weight: weight,
                });
            }
        }
    }
    out.sort_by(|a, b| b.score().cmp(&a.score()).then((a.block, a.start).cmp(&(b.block, b.start))));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackBudget {
    pub latency_budget_ns: Nanos,
    pub max_accept: Option<usize>,
    /// Accept segments needing up to this many clock periods.
    pub max_cycles: Option<u32>,
    pub clock_period_ns: Nanos,
    /// Skip the liveness check on clobbered temporaries.
    pub trust_liveout: bool,
}

impl Default for FeedbackBudget {
    fn default() -> Self {
        let period = Ratio::new(1000, 85);
        FeedbackBudget { latency_budget_ns: period, max_accept: None, max_cycles: None, clock_period_ns: period, trust_liveout: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    TooSlow,
    DoesNotFit,
    Overlap,
    SynthesisFailed(String),
    ClobbersLiveRegister(Register),
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::TooSlow => "too_slow",
            RejectReason::DoesNotFit => "does_not_fit",
            RejectReason::Overlap => "overlap",
            RejectReason::SynthesisFailed(_) => "synthesis_failed",
            RejectReason::ClobbersLiveRegister(_) => "clobbers_live_register",
        }
    }
}

/// Everything the pipeline produced for one candidate.
#[derive(Debug, Clone)]
pub struct SegmentHardware {
    pub design: PhdlDesign,
    pub netlist: Netlist,
    pub report: FitReport,
}

impl SegmentHardware {
    pub fn phdl_text(&self) -> String {
        render_phdl(&self.design)
    }

    /// Renames the design, netlist and report to `seg<index>`.
    pub fn renamed(mut self, index: usize) -> SegmentHardware {
        let name = format!("seg{index}");
        self.design.title = format!("{name}.phd");
        self.design.module_name = name.clone();
        self.netlist.mapped.name = name.clone();
        self.report.name = name;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SelectionVerdict {
    pub segment: Segment,
    pub fits: bool,
    pub latency_ns: Option<Nanos>,
    pub macrocells: Option<u32>,
    /// Clock periods the FU needs.
    pub cycles: Option<u32>,
    pub accepted: bool,
    pub rejection_reason: Option<RejectReason>,
    pub hardware: Option<SegmentHardware>,
}

/// Runs translation, synthesis and fitting on one candidate.
pub fn build_hardware(seg: &Segment, device: &DeviceParams, opts: &SynthOptions) -> Result<SegmentHardware, String> {
    let design = translate(&seg.graph, 1, WordWidth::W32).map_err(|e| e.to_string())?;
    let netlist = synthesize(&design, opts).map_err(|e| e.to_string())?;
    let report = fit(&netlist.mapped, device);
    Ok(SegmentHardware { design, netlist, report })
}

/// Whether `r` may be read after the segment before being redefined.
/// Straight-line programs are scanned forward to their end; otherwise
/// the scan stops at the block end and any other read of `r` counts.
pub fn live_after(program: &Program, seg: &Segment, r: Register) -> bool {
    let scan = |insns: &[Instruction]| -> Option<bool> {
        for insn in insns {
            if insn.reads().contains(&r) {
                return Some(true);
            }
            if insn.writes() == Some(r) {
                return Some(false);
            }
        }
        None
    };
    if !program.has_control_flow() {
        let rest: Vec<Instruction> = program
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(b, block)| {
                block.instructions.iter().enumerate().filter(move |(i, _)| b > seg.block || (b == seg.block && *i > seg.end)).map(|(_, x)| x.clone())
            })
            .collect();
        return scan(&rest).unwrap_or(false);
    }
    let block = &program.blocks[seg.block].instructions;
    if let Some(live) = scan(&block[seg.end + 1..]) {
        return live;
    }
    program.blocks.iter().enumerate().any(|(b, blk)| {
        blk.instructions
            .iter()
            .enumerate()
            .any(|(i, insn)| !(b == seg.block && (seg.start..=seg.end).contains(&i)) && insn.reads().contains(&r))
    })
}

fn cycles_for(latency: Nanos, period: Nanos) -> u32 {
    (latency / period).ceil().to_integer().max(1) as u32
}

/// Walks the ranked candidates, synthesizing each and accepting the ones
/// that fit, meet the budget, do not overlap an earlier acceptance and do
/// not clobber a live register.
pub fn select_with_feedback(
    program: &Program,
    cands: &[Segment],
    budget: &FeedbackBudget,
    device: &DeviceParams,
    opts: &SynthOptions,
) -> Vec<SelectionVerdict> {
    let built: Vec<Result<SegmentHardware, String>> = cands.par_iter().map(|c| build_hardware(c, device, opts)).collect();
    let mut verdicts = Vec::with_capacity(cands.len());
    let mut accepted: Vec<Segment> = Vec::new();
    for (seg, hw) in cands.iter().zip(built) {
        if budget.max_accept.is_some_and(|m| accepted.len() >= m) {
            break;
        }
        let mut v = SelectionVerdict {
            segment: seg.clone(),
            fits: false,
            latency_ns: None,
            macrocells: None,
            cycles: None,
            accepted: false,
            rejection_reason: None,
            hardware: None,
        };
        match hw {
            Err(e) => v.rejection_reason = Some(RejectReason::SynthesisFailed(e)),
            Ok(hw) => {
                let r = &hw.report;
                v.fits = r.fits;
                v.latency_ns = Some(r.latency_ns);
                v.macrocells = Some(r.macrocells_used);
                let cycles = cycles_for(r.latency_ns, budget.clock_period_ns);
                v.cycles = Some(cycles);
                let fast_enough = match budget.max_cycles {
                    Some(m) => budget.latency_budget_ns > Ratio::from_integer(0) && cycles <= m,
                    None => r.latency_ns <= budget.latency_budget_ns,
                };
                v.rejection_reason = if !r.fits {
                    Some(RejectReason::DoesNotFit)
                } else if !fast_enough {
                    Some(RejectReason::TooSlow)
                } else if accepted.iter().any(|a| a.overlaps(seg)) {
                    Some(RejectReason::Overlap)
                } else if budget.trust_liveout {
                    None
                } else {
                    seg.temporaries()
                        .into_iter()
                        .find(|&t| live_after(program, seg, t))
                        .map(RejectReason::ClobbersLiveRegister)
                };
                v.hardware = Some(hw);
            }
        }
        v.accepted = v.rejection_reason.is_none();
        if v.accepted {
            accepted.push(seg.clone());
        }
        verdicts.push(v);
    }
    verdicts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;

    fn blocks(text: &str) -> Vec<BasicBlock> {
        parse_program(text).unwrap()
    }

    /// Brute force: every window satisfying the predicate that no other
    /// satisfying window contains.
    fn brute(run: &[Instruction]) -> Vec<(usize, usize)> {
        let n = run.len();
        let ok: Vec<(usize, usize)> =
            (0..n).flat_map(|s| (s..n).map(move |e| (s, e))).filter(|&(s, e)| window_graph(&run[s..=e]).is_some()).collect();
        ok.iter()
            .copied()
            .filter(|&(s, e)| !ok.iter().any(|&(s2, e2)| (s2, e2) != (s, e) && s2 <= s && e2 >= e))
            .collect()
    }

    #[test]
    fn ex1_is_one_candidate() {
        let b = blocks("and $8, $9, 1\nli $10, 1\nsubu $11, $10, $8\nsll $12, $11, 1\n");
        let c = enumerate_candidates(&b, &ProfileMap::default());
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].start, c[0].end), (0, 3));
        assert_eq!(c[0].graph.live_in, vec![Register::new(9).unwrap()]);
    }

    #[test]
    fn other_only_has_no_candidates() {
        let b = blocks("nop\nmult $1, $2\nsyscall\n");
        assert!(enumerate_candidates(&b, &ProfileMap::default()).is_empty());
    }

    #[test]
    fn three_inputs_split_into_windows() {
        let b = blocks("addu $1,$2,$3\naddu $4,$5,$6\naddu $7,$1,$4\n");
        let c = enumerate_candidates(&b, &ProfileMap::default());
        let mut got: Vec<_> = c.iter().map(|s| (s.start, s.end)).collect();
        got.sort();
        assert_eq!(got, brute(&b[0].instructions));
        assert!(c.iter().all(|s| s.graph.live_in.len() <= 2));
    }

    #[test]
    fn windows_match_brute_force() {
        let text = "li $3, 4\naddu $1,$2,$3\nsll $4,$1,2\nor $5,$6,$4\nand $7,$5,$8\nli $9, 1\nsubu $10,$9,$7\naddu $11,$10,$12\n";
        let b = blocks(text);
        let mut got: Vec<_> = enumerate_candidates(&b, &ProfileMap::default()).iter().map(|s| (s.start, s.end)).collect();
        got.sort();
        assert_eq!(got, brute(&b[0].instructions));
    }

    #[test]
    fn profile_ranking() {
        let text = "a:\naddu $1,$2,$3\naddu $1,$1,$1\nb:\naddu $4,$5,$5\nsll $4,$4,1\nsrl $4,$4,1\n";
        let b = blocks(text);
        let c = enumerate_candidates(&b, &ProfileMap::default());
        assert_eq!(c[0].block, 1);
        let p = ProfileMap::parse("a 10\n").unwrap();
        let c = enumerate_candidates(&b, &p);
        assert_eq!((c[0].block, c[0].score()), (0, 10));
        let p = ProfileMap::parse("a 10\n@0 1\n").unwrap();
        assert_eq!(enumerate_candidates(&b, &p)[0].block, 1);
        assert!(ProfileMap::parse("a b c").is_err());
    }

    #[test]
    fn zero_budget_rejects_everything() {
        let text = "and $8, $9, 1\nli $10, 1\nsubu $11, $10, $8\nsll $12, $11, 1\n";
        let p = Program::parse(text).unwrap();
        let c = enumerate_candidates(&p.blocks, &ProfileMap::default());
        let budget = FeedbackBudget { latency_budget_ns: Ratio::from_integer(0), ..Default::default() };
        let v = select_with_feedback(&p, &c, &budget, &DeviceParams::default(), &SynthOptions::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rejection_reason, Some(RejectReason::TooSlow));
    }

    #[test]
    fn clobber_check() {
        let text = "and $8, $9, 1\nli $10, 1\nsubu $11, $10, $8\nsll $12, $11, 1\naddu $2, $8, $12\n";
        let p = Program::parse(text).unwrap();
        let insns = p.blocks[0].instructions[0..4].to_vec();
        let graph = window_graph(&insns).unwrap();
        let c = vec![Segment { block: 0, start: 0, end: 3, instructions: insns, graph, profile_weight: 1 }];
        let v = select_with_feedback(&p, &c, &FeedbackBudget::default(), &DeviceParams::default(), &SynthOptions::default());
        assert_eq!(v[0].rejection_reason, Some(RejectReason::ClobbersLiveRegister(Register::new(8).unwrap())));
        let trust = FeedbackBudget { trust_liveout: true, ..Default::default() };
        let v = select_with_feedback(&p, &c, &trust, &DeviceParams::default(), &SynthOptions::default());
        assert!(v[0].accepted);
    }
}
