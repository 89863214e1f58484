//! Def-use linked dataflow IR for one straight-line segment.
//!
//! Each supported instruction becomes a node carrying an [`InternalOp`];
//! register names are resolved to links to the node that last wrote them.
//! Registers read before any in-segment write are the segment inputs.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::asm::{Instruction, Immediate, Opcode, Operand, Register};
use crate::word::WordWidth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("empty segment")]
    Empty,
    #[error("line {0}: instruction is not in the supported operation list")]
    Unsupported(usize),
    #[error("segment reads {0} distinct registers, at most 2 are allowed")]
    TooManyInputs(usize),
    #[error("segment writes no register")]
    NoOutput,
    #[error("not enough free registers to lower the graph")]
    OutOfRegisters,
}

/// The supported-operations list. Shift amounts and loaded constants are
/// part of the operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InternalOp {
    Add,
    Sub,
    And,
    Or,
    ShiftLeft(u8),
    ShiftRightLogical(u8),
    ShiftRightArith(u8),
    LoadImm(u32),
}

impl InternalOp {
    pub fn arity(self) -> usize {
        match self {
            InternalOp::Add | InternalOp::Sub | InternalOp::And | InternalOp::Or => 2,
            InternalOp::ShiftLeft(_)
            | InternalOp::ShiftRightLogical(_)
            | InternalOp::ShiftRightArith(_) => 1,
            InternalOp::LoadImm(_) => 0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            InternalOp::Add => "ADD",
            InternalOp::Sub => "SUB",
            InternalOp::And => "AND",
            InternalOp::Or => "OR",
            InternalOp::ShiftLeft(_) => "SHIFT_LEFT_CONST",
            InternalOp::ShiftRightLogical(_) => "SHIFT_RIGHT_LOGICAL_CONST",
            InternalOp::ShiftRightArith(_) => "SHIFT_RIGHT_ARITH_CONST",
            InternalOp::LoadImm(_) => "LOAD_IMM",
        }
    }

    /// Word-level evaluation; `args` must match [`arity`](Self::arity).
    pub fn eval(self, width: WordWidth, args: &[u32]) -> u32 {
        match self {
            InternalOp::Add => width.add(args[0], args[1]),
            InternalOp::Sub => width.sub(args[0], args[1]),
            InternalOp::And => width.truncate(args[0] & args[1]),
            InternalOp::Or => width.truncate(args[0] | args[1]),
            InternalOp::ShiftLeft(s) => width.sll(args[0], s as u32),
            InternalOp::ShiftRightLogical(s) => width.srl(args[0], s as u32),
            InternalOp::ShiftRightArith(s) => width.sra(args[0], s as u32),
            InternalOp::LoadImm(v) => width.truncate(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperandRef {
    Node(usize),
    Input(Register),
    Const(u32),
}

impl fmt::Display for OperandRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperandRef::Node(id) => write!(f, "n{id}"),
            OperandRef::Input(r) => r.fmt(f),
            OperandRef::Const(c) => write!(f, "{}", *c as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataflowNode {
    pub id: usize,
    pub op: InternalOp,
    pub operands: Vec<OperandRef>,
    pub users: Vec<usize>,
    /// Position of the originating instruction in the segment.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataflowGraph {
    pub nodes: Vec<DataflowNode>,
    /// Inputs in order of first read.
    pub live_in: Vec<Register>,
    pub live_out: Register,
    pub result_node: usize,
}

/// Builds the linked IR with last-writer-wins register resolution.
/// The result is the value written by the final instruction.
pub fn build_dataflow(seg: &[Instruction]) -> Result<DataflowGraph, IrError> {
    let last = seg.last().ok_or(IrError::Empty)?;
    let mut defs: HashMap<Register, usize> = HashMap::new();
    let mut nodes: Vec<DataflowNode> = Vec::with_capacity(seg.len());

    for (order, insn) in seg.iter().enumerate() {
        let resolve = |op: &Operand| match op {
            Operand::Reg(r) if r.is_zero() => OperandRef::Const(0),
            Operand::Reg(r) => defs.get(r).map_or(OperandRef::Input(*r), |&id| OperandRef::Node(id)),
            Operand::Imm(imm) => OperandRef::Const(imm.value),
        };
        let shift_amount = || match &insn.src2 {
            Some(Operand::Imm(imm)) => Ok((imm.value & 31) as u8),
            _ => Err(IrError::Unsupported(insn.line_no)),
        };
        let src1 = insn.src1.as_ref().ok_or(IrError::Unsupported(insn.line_no));
        let (op, operands) = match insn.opcode {
            Opcode::Addu | Opcode::Subu | Opcode::And | Opcode::Or => {
                let b = insn.src2.as_ref().ok_or(IrError::Unsupported(insn.line_no))?;
                let op = match insn.opcode {
                    Opcode::Addu => InternalOp::Add,
                    Opcode::Subu => InternalOp::Sub,
                    Opcode::And => InternalOp::And,
                    _ => InternalOp::Or,
                };
                (op, vec![resolve(src1?), resolve(b)])
            }
            Opcode::Sll => (InternalOp::ShiftLeft(shift_amount()?), vec![resolve(src1?)]),
            Opcode::Srl => (InternalOp::ShiftRightLogical(shift_amount()?), vec![resolve(src1?)]),
            Opcode::Sra => (InternalOp::ShiftRightArith(shift_amount()?), vec![resolve(src1?)]),
            Opcode::Li => match src1? {
                Operand::Imm(imm) => (InternalOp::LoadImm(imm.value), vec![]),
                Operand::Reg(_) => return Err(IrError::Unsupported(insn.line_no)),
            },
            Opcode::Other(_) => return Err(IrError::Unsupported(insn.line_no)),
        };
        let id = nodes.len();
        nodes.push(DataflowNode { id, op, operands, users: Vec::new(), order });
        if !insn.dest.is_zero() {
            defs.insert(insn.dest, id);
        }
    }

    if last.dest.is_zero() {
        return Err(IrError::NoOutput);
    }
    let mut g = DataflowGraph {
        nodes,
        live_in: Vec::new(),
        live_out: last.dest,
        result_node: seg.len() - 1,
    };
    g.relink();
    if g.live_in.len() > 2 {
        return Err(IrError::TooManyInputs(g.live_in.len()));
    }
    Ok(g)
}

/// Forwards every `LOAD_IMM` constant into its users and drops the node.
/// A `LOAD_IMM` that is itself the segment result stays.
pub fn bypass_load_imm(g: &DataflowGraph) -> DataflowGraph {
    let constant_of = |id: usize| match g.nodes[id].op {
        InternalOp::LoadImm(v) if id != g.result_node => Some(v),
        _ => None,
    };
    let keep: Vec<bool> = (0..g.nodes.len()).map(|id| constant_of(id).is_none()).collect();
    let mut out = g.clone();
    for node in &mut out.nodes {
        for opnd in &mut node.operands {
            if let OperandRef::Node(src) = *opnd {
                if let Some(v) = constant_of(src) {
                    *opnd = OperandRef::Const(v);
                }
            }
        }
    }
    out.retain(&keep);
    out
}

/// Removes nodes that do not reach the result.
pub fn dead_node_elim(g: &DataflowGraph) -> DataflowGraph {
    let mut live = vec![false; g.nodes.len()];
    let mut stack = vec![g.result_node];
    while let Some(id) = stack.pop() {
        if std::mem::replace(&mut live[id], true) {
            continue;
        }
        for opnd in &g.nodes[id].operands {
            if let OperandRef::Node(src) = opnd {
                stack.push(*src);
            }
        }
    }
    let mut out = g.clone();
    out.retain(&live);
    out
}

/// The standard front half of the pipeline: build, forward constants,
/// drop dead nodes.
pub fn prepare_segment(seg: &[Instruction]) -> Result<DataflowGraph, IrError> {
    let g = build_dataflow(seg)?;
    Ok(dead_node_elim(&bypass_load_imm(&g)))
}

impl DataflowGraph {
    /// Keeps the nodes flagged in `keep`, renumbers ids densely and rebuilds
    /// the user lists and inputs.
    fn retain(&mut self, keep: &[bool]) {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (old, &k) in keep.iter().enumerate() {
            if k {
                remap[old] = next;
                next += 1;
            }
        }
        let nodes = std::mem::take(&mut self.nodes);
        self.nodes = nodes
            .into_iter()
            .filter(|n| keep[n.id])
            .map(|mut n| {
                n.id = remap[n.id];
                for opnd in &mut n.operands {
                    if let OperandRef::Node(src) = opnd {
                        debug_assert!(keep[*src], "kept node links to a removed node");
                        *src = remap[*src];
                    }
                }
                n
            })
            .collect();
        self.result_node = remap[self.result_node];
        self.relink();
    }

    fn relink(&mut self) {
        for n in &mut self.nodes {
            n.users.clear();
        }
        let mut live_in = Vec::new();
        for i in 0..self.nodes.len() {
            for j in 0..self.nodes[i].operands.len() {
                match self.nodes[i].operands[j] {
                    OperandRef::Node(src) => {
                        let users = &mut self.nodes[src].users;
                        if !users.contains(&i) {
                            users.push(i);
                        }
                    }
                    OperandRef::Input(r) if !live_in.contains(&r) => live_in.push(r),
                    _ => {}
                }
            }
        }
        self.live_in = live_in;
    }

    pub fn result(&self) -> &DataflowNode {
        &self.nodes[self.result_node]
    }

    /// Evaluates the graph. `inputs` is indexed like `live_in`.
    pub fn evaluate(&self, width: WordWidth, inputs: &[u32]) -> u32 {
        let mut values = vec![0u32; self.nodes.len()];
        for n in &self.nodes {
            let args: Vec<u32> = n
                .operands
                .iter()
                .map(|o| match *o {
                    OperandRef::Node(src) => values[src],
                    OperandRef::Input(r) => {
                        let k = self.live_in.iter().position(|&x| x == r).expect("input not in live_in");
                        width.truncate(inputs[k])
                    }
                    OperandRef::Const(c) => width.truncate(c),
                })
                .collect();
            values[n.id] = n.op.eval(width, &args);
        }
        values[self.result_node]
    }

    /// Renders the graph back to supported instructions. Temporaries go to
    /// registers not otherwise used by the segment interface.
    pub fn lower_to_instructions(&self) -> Result<Vec<Instruction>, IrError> {
        let mut free = (1..32u8)
            .filter_map(Register::new)
            .filter(|r| *r != self.live_out && !self.live_in.contains(r));
        let mut assigned: Vec<Register> = Vec::with_capacity(self.nodes.len());
        let mut out = Vec::new();
        let reg_op = |r: Register| Some(Operand::Reg(r));
        let imm_op = |v: u32| Some(Operand::Imm(Immediate::from_value(v)));
        let mk = |opcode, dest, src1, src2| Instruction { opcode, dest, src1, src2, line_no: 0 };

        for n in &self.nodes {
            let dest = if n.id == self.result_node {
                self.live_out
            } else {
                free.next().ok_or(IrError::OutOfRegisters)?
            };
            let mut as_reg = |o: OperandRef, out: &mut Vec<Instruction>| -> Result<Register, IrError> {
                Ok(match o {
                    OperandRef::Node(src) => assigned[src],
                    OperandRef::Input(r) => r,
                    OperandRef::Const(0) => Register::ZERO,
                    OperandRef::Const(c) => {
                        let tmp = free.next().ok_or(IrError::OutOfRegisters)?;
                        out.push(mk(Opcode::Li, tmp, imm_op(c), None));
                        tmp
                    }
                })
            };
            let insn = match n.op {
                InternalOp::LoadImm(v) => mk(Opcode::Li, dest, imm_op(v), None),
                InternalOp::Add | InternalOp::Sub | InternalOp::And | InternalOp::Or => {
                    let a = as_reg(n.operands[0], &mut out)?;
                    let b = match n.operands[1] {
                        OperandRef::Const(c) => imm_op(c),
                        other => reg_op(as_reg(other, &mut out)?),
                    };
                    let opcode = match n.op {
                        InternalOp::Add => Opcode::Addu,
                        InternalOp::Sub => Opcode::Subu,
                        InternalOp::And => Opcode::And,
                        _ => Opcode::Or,
                    };
                    mk(opcode, dest, reg_op(a), b)
                }
                InternalOp::ShiftLeft(s) | InternalOp::ShiftRightLogical(s) | InternalOp::ShiftRightArith(s) => {
                    let a = as_reg(n.operands[0], &mut out)?;
                    let opcode = match n.op {
                        InternalOp::ShiftLeft(_) => Opcode::Sll,
                        InternalOp::ShiftRightLogical(_) => Opcode::Srl,
                        _ => Opcode::Sra,
                    };
                    mk(opcode, dest, reg_op(a), imm_op(s as u32))
                }
            };
            out.push(insn);
            assigned.push(dest);
        }
        Ok(out)
    }
}

impl fmt::Display for DataflowGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            write!(f, "{}: {}", n.id, n.op.name())?;
            let mut args: Vec<String> = n.operands.iter().map(ToString::to_string).collect();
            match n.op {
                InternalOp::ShiftLeft(s) | InternalOp::ShiftRightLogical(s) | InternalOp::ShiftRightArith(s) => {
                    args.push(s.to_string())
                }
                InternalOp::LoadImm(v) => args.push((v as i32).to_string()),
                _ => {}
            }
            writeln!(f, "({}) users={:?}", args.join(", "), n.users)?;
        }
        Ok(())
    }
}
