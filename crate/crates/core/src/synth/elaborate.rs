use std::collections::HashMap;

use super::expr::{ExprArena, ExprId};
use super::{SynthError, SynthOptions};
use crate::phdl::{BitAtom, PhdlDesign, PhdlExpr, Term};
use crate::word::WordWidth;

/// How one output bit is realized before technology mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitImpl {
    Const(bool),
    /// Equal to an input pin.
    Wire(u32),
    Logic(ExprId),
}

/// A design lowered to per-bit expressions. Input pin `j` of input set `k`
/// has index `k * width + j`.
#[derive(Debug, Clone)]
pub struct Elaborated {
    pub arena: ExprArena,
    pub width: WordWidth,
    pub input_sets: Vec<String>,
    pub output_set: String,
    /// Output expressions, LSB first.
    pub outputs: Vec<ExprId>,
    pub output_impls: Vec<BitImpl>,
    /// Node set bits, LSB first, in declaration order.
    pub node_bits: Vec<(String, Vec<ExprId>)>,
}

impl Elaborated {
    pub fn input_name(&self, index: u32) -> String {
        let w = self.width.bits();
        format!("{}b{}", self.input_sets[(index / w) as usize], index % w)
    }
}

struct Lowering<'a> {
    design: &'a PhdlDesign,
    arena: ExprArena,
    sets: HashMap<String, Vec<ExprId>>,
}

impl Lowering<'_> {
    fn width(&self) -> u32 {
        self.design.width.bits()
    }

    fn set_bits(&self, name: &str) -> Result<&Vec<ExprId>, SynthError> {
        self.sets.get(name).ok_or_else(|| SynthError::UnassignedSet(name.to_string()))
    }

    fn term_bits(&self, t: &Term) -> Result<Vec<ExprId>, SynthError> {
        match t {
            Term::Set(name) => self.set_bits(name).cloned(),
            Term::Const(c) => Ok((0..self.width())
                .map(|i| self.arena.constant((*c as u64) >> i & 1 == 1))
                .collect()),
        }
    }

    fn atom(&self, a: &BitAtom) -> Result<ExprId, SynthError> {
        match a {
            BitAtom::Zero => Ok(ExprArena::FALSE),
            BitAtom::One => Ok(ExprArena::TRUE),
            BitAtom::Bit { set, index } => self
                .set_bits(set)?
                .get(*index as usize)
                .copied()
                .ok_or_else(|| SynthError::UnassignedSet(format!("{set}b{index}"))),
        }
    }

    fn ripple(&mut self, a: &[ExprId], b: &[ExprId], carry_in: bool) -> Vec<ExprId> {
        let mut carry = self.arena.constant(carry_in);
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            out.push(self.arena.xor(&[x, y, carry]));
            carry = self.arena.majority(x, y, carry);
        }
        out
    }

    fn lower(&mut self, rhs: &PhdlExpr, lhs: &str) -> Result<Vec<ExprId>, SynthError> {
        let w = self.width() as usize;
        Ok(match rhs {
            PhdlExpr::Concat(v) => {
                if v.0.len() != w {
                    return Err(SynthError::WidthMismatch { set: lhs.to_string(), got: v.0.len(), want: w });
                }
                // listed MSB first
                v.0.iter().rev().map(|a| self.atom(a)).collect::<Result<_, _>>()?
            }
            PhdlExpr::And(a, b) | PhdlExpr::Or(a, b) => {
                let (x, y) = (self.term_bits(a)?, self.term_bits(b)?);
                let is_and = matches!(rhs, PhdlExpr::And(..));
                x.iter()
                    .zip(&y)
                    .map(|(&p, &q)| if is_and { self.arena.and(&[p, q]) } else { self.arena.or(&[p, q]) })
                    .collect()
            }
            PhdlExpr::Add(a, b) => {
                let (x, y) = (self.term_bits(a)?, self.term_bits(b)?);
                self.ripple(&x, &y, false)
            }
            PhdlExpr::Sub(a, b) => {
                let (x, y) = (self.term_bits(a)?, self.term_bits(b)?);
                let ny: Vec<ExprId> = y.iter().map(|&q| self.arena.not(q)).collect();
                self.ripple(&x, &ny, true)
            }
        })
    }
}

/// Lowers every equation to per-bit expressions, inlining node sets into
/// their users and folding constants on the way.
pub fn elaborate(design: &PhdlDesign, opts: &SynthOptions) -> Result<Elaborated, SynthError> {
    let w = design.width.bits();
    let mut lw = Lowering { design, arena: ExprArena::new(), sets: HashMap::new() };
    for (k, set) in design.input_sets.iter().enumerate() {
        let bits = (0..w).map(|j| lw.arena.input(k as u32 * w + j)).collect();
        lw.sets.insert(set.clone(), bits);
    }
    for eq in &design.equations {
        if !design.is_declared(&eq.lhs) {
            return Err(SynthError::UndeclaredName(eq.lhs.clone()));
        }
        let bits = lw.lower(&eq.rhs, &eq.lhs)?;
        lw.sets.insert(eq.lhs.clone(), bits);
    }
    let outputs = lw.set_bits(&design.output_set)?.clone();
    let node_bits = design
        .node_sets
        .iter()
        .filter_map(|s| lw.sets.get(s).map(|b| (s.clone(), b.clone())))
        .collect();

    let arena = lw.arena;
    let output_impls = outputs.iter().map(|&e| classify(&arena, e, opts.wire_detect_inputs)).collect();
    Ok(Elaborated {
        arena,
        width: design.width,
        input_sets: design.input_sets.clone(),
        output_set: design.output_set.clone(),
        outputs,
        output_impls,
        node_bits,
    })
}

/// Detects constants and pure wires. Bits with a support of at most
/// `max_inputs` pins are decided from their full truth table; wider bits
/// rely on the structural normalization.
pub fn classify(arena: &ExprArena, e: ExprId, max_inputs: usize) -> BitImpl {
    if let Some(b) = arena.as_const(e) {
        return BitImpl::Const(b);
    }
    if let super::expr::BitExpr::Input(i) = arena.get(e) {
        return BitImpl::Wire(*i);
    }
    let support = arena.support(e);
    if support.len() > max_inputs {
        return BitImpl::Logic(e);
    }
    let rows = 1usize << support.len();
    let words = rows.div_ceil(64);
    let lane_mask = if rows >= 64 { !0u64 } else { (1u64 << rows) - 1 };
    // column of variable `v`: bit r of the table is bit v of row r
    let column = |v: usize, word: usize| -> u64 {
        (0..64.min(rows)).fold(0u64, |acc, lane| {
            let row = word * 64 + lane;
            acc | (((row >> v) & 1) as u64) << lane
        })
    };
    let pos: HashMap<u32, usize> = support.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let table = &arena.eval_words(&[e], words, |i, word| column(pos[&i], word))[0];
    let masked = |w: u64| w & lane_mask;
    if table.iter().all(|&t| masked(t) == 0) {
        return BitImpl::Const(false);
    }
    if table.iter().all(|&t| masked(t) == lane_mask) {
        return BitImpl::Const(true);
    }
    for (v, &input) in support.iter().enumerate() {
        if table.iter().enumerate().all(|(word, &t)| masked(t) == column(v, word)) {
            return BitImpl::Wire(input);
        }
    }
    BitImpl::Logic(e)
}
