//! Technology mapping onto product-term macrocells.
//!
//! Each expression node gets a cover over signals. When combining child
//! covers would need more product terms than one macrocell can own, the
//! larger operand is moved into a helper macrocell and referenced as a
//! single literal. This is what turns deep arithmetic into multi-level
//! logic.

use std::collections::HashMap;

use super::elaborate::{BitImpl, Elaborated};
use super::expr::{BitExpr, ExprId};
use super::netlist::{Cell, MappedNetlist, OutputImpl};
use super::sop::{Literal, Signal, Sop};
use super::SynthOptions;

#[derive(Clone, Copy)]
enum Op {
    And,
    Or,
    Xor,
}

fn apply(op: Op, a: &Sop, b: &Sop, limit: usize) -> Option<Sop> {
    match op {
        Op::And => a.and(b, limit),
        Op::Or => a.or(b, limit),
        Op::Xor => a.xor(b, limit),
    }
}

struct Mapper<'a> {
    el: &'a Elaborated,
    cap: usize,
    covers: HashMap<ExprId, Sop>,
    helper_of: HashMap<ExprId, u32>,
    helpers: Vec<Cell>,
    forced: HashMap<ExprId, String>,
}

impl Mapper<'_> {
    fn new_helper(&mut self, name: Option<String>, cover: Sop) -> Signal {
        let idx = self.helpers.len() as u32;
        let name = name.unwrap_or_else(|| format!("H{idx}"));
        self.helpers.push(Cell { name, cover });
        Signal::Helper(idx)
    }

    /// Moves node `e` into its own macrocell; later users see one literal.
    fn materialize(&mut self, e: ExprId) -> Sop {
        if let Some(&h) = self.helper_of.get(&e) {
            return Sop::literal(Literal::pos(Signal::Helper(h)));
        }
        let cover = self.covers[&e].clone();
        let name = self.forced.get(&e).cloned();
        let Signal::Helper(h) = self.new_helper(name, cover) else { unreachable!() };
        self.helper_of.insert(e, h);
        let lit = Sop::literal(Literal::pos(Signal::Helper(h)));
        self.covers.insert(e, lit.clone());
        lit
    }

    fn combine(&mut self, op: Op, children: &[ExprId]) -> Sop {
        let mut acc = self.covers[&children[0]].clone();
        for &c in &children[1..] {
            let mut cc = self.covers[&c].clone();
            loop {
                if let Some(s) = apply(op, &acc, &cc, self.cap) {
                    acc = s;
                    break;
                }
                let child_lit = cc.as_literal().is_some();
                let acc_lit = acc.as_literal().is_some();
                if !child_lit && (acc_lit || cc.len() >= acc.len()) {
                    cc = self.materialize(c);
                } else if !acc_lit {
                    let h = self.new_helper(None, acc);
                    acc = Sop::literal(Literal::pos(h));
                } else {
                    acc = apply(op, &acc, &cc, usize::MAX).expect("unbounded combine");
                    break;
                }
            }
        }
        acc
    }

    fn map_node(&mut self, e: ExprId) {
        let cover = match self.el.arena.get(e) {
            BitExpr::Const(true) => Sop::truth(),
            BitExpr::Const(false) => Sop::falsity(),
            BitExpr::Input(i) => Sop::literal(Literal::pos(Signal::Input(*i))),
            BitExpr::Not(a) => {
                let a = *a;
                match self.covers[&a].not(self.cap) {
                    Some(s) => s,
                    None => {
                        let lit = self.materialize(a);
                        lit.not(1).expect("literal complement")
                    }
                }
            }
            BitExpr::And(c) => self.combine(Op::And, &c.clone()),
            BitExpr::Or(c) => self.combine(Op::Or, &c.clone()),
            BitExpr::Xor(c) => self.combine(Op::Xor, &c.clone()),
        };
        self.covers.insert(e, cover);
        if self.forced.contains_key(&e) {
            self.materialize(e);
        }
    }
}

/// Maps an elaborated design onto macrocells.
///
/// With collapsing on, the greedy mapper can lose to the node boundaries
/// written in the source (chained adders are the usual case), so both
/// mappings are built and the one with fewer cells wins.
pub fn map_cells(el: &Elaborated, name: &str, opts: &SynthOptions) -> MappedNetlist {
    let mut forced = HashMap::new();
    for (set, bits) in &el.node_bits {
        for (j, &e) in bits.iter().enumerate() {
            if el.arena.as_const(e).is_none() {
                forced.entry(e).or_insert_with(|| format!("{set}b{j}"));
            }
        }
    }
    let kept = map_with(el, name, opts, forced);
    if !opts.collapse_nodes {
        return kept;
    }
    let collapsed = map_with(el, name, opts, HashMap::new());
    if collapsed.helpers.len() <= kept.helpers.len() {
        collapsed
    } else {
        kept
    }
}

fn map_with(el: &Elaborated, name: &str, opts: &SynthOptions, forced: HashMap<ExprId, String>) -> MappedNetlist {
    let logic_roots: Vec<ExprId> = el
        .output_impls
        .iter()
        .filter_map(|b| match b {
            BitImpl::Logic(e) => Some(*e),
            _ => None,
        })
        .chain(forced.keys().copied())
        .collect();

    let mut m = Mapper {
        el,
        cap: opts.max_cell_cubes.max(1),
        covers: HashMap::new(),
        helper_of: HashMap::new(),
        helpers: Vec::new(),
        forced,
    };
    for e in el.arena.cone(&logic_roots) {
        m.map_node(e);
    }

    let outputs = el
        .output_impls
        .iter()
        .map(|b| match *b {
            BitImpl::Const(v) => OutputImpl::Const(v),
            BitImpl::Wire(i) => OutputImpl::Wire(i),
            BitImpl::Logic(e) => {
                let cover = m.covers[&e].clone();
                match (cover.as_const(), cover.as_literal()) {
                    (Some(v), _) => OutputImpl::Const(v),
                    (_, Some(Literal { signal: Signal::Input(i), positive: true })) => OutputImpl::Wire(i),
                    _ => OutputImpl::Logic(cover),
                }
            }
        })
        .collect();

    MappedNetlist {
        name: name.to_string(),
        width: el.width,
        input_sets: el.input_sets.clone(),
        output_set: el.output_set.clone(),
        helpers: m.helpers,
        outputs,
    }
}
