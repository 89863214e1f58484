use thiserror::Error;

use super::{BitAtom, BitVectorRef, PhdlDesign, PhdlEquation, PhdlExpr, Term};
use crate::ir::{DataflowGraph, InternalOp, OperandRef};
use crate::word::WordWidth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhdlGenError {
    #[error("shift amount {0} outside 0..31")]
    ShiftOutOfRange(u8),
    #[error("operation {0:?} got {1} operands")]
    UnsupportedOp(InternalOp, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declarations {
    pub input_sets: Vec<String>,
    pub output_set: String,
    pub node_sets: Vec<String>,
}

fn temp_name(k: usize) -> String {
    format!("TEMP{k}")
}

/// Expands one internal operation into a PHDL equation. Constant terms are
/// interpreted at `width` bits.
pub fn expand_op(
    op: InternalOp,
    operands: &[Term],
    result_name: &str,
    width: WordWidth,
) -> Result<PhdlEquation, PhdlGenError> {
    if operands.len() != op.arity() {
        return Err(PhdlGenError::UnsupportedOp(op, operands.len()));
    }
    let w = width.bits();
    let masked = |t: &Term| match t {
        Term::Const(c) => Term::Const(width.truncate(*c as u32) as i64),
        other => other.clone(),
    };
    let signed = |t: &Term| match t {
        Term::Const(c) => Term::Const(width.signed(*c as u32)),
        other => other.clone(),
    };
    // bit `i` (LSB = 0) of a shift operand
    let bit_of = |t: &Term, i: u32| match t {
        Term::Set(name) => BitAtom::bit(name, i),
        Term::Const(c) => BitAtom::constant((*c as u64 >> i) & 1 == 1),
    };
    let shift = |s: u8| -> Result<u32, PhdlGenError> {
        if s > 31 {
            Err(PhdlGenError::ShiftOutOfRange(s))
        } else {
            Ok(s as u32)
        }
    };

    let rhs = match op {
        InternalOp::And => PhdlExpr::And(masked(&operands[0]), masked(&operands[1])),
        InternalOp::Or => PhdlExpr::Or(masked(&operands[0]), masked(&operands[1])),
        InternalOp::Add => PhdlExpr::Add(signed(&operands[0]), signed(&operands[1])),
        InternalOp::Sub => PhdlExpr::Sub(signed(&operands[0]), signed(&operands[1])),
        InternalOp::ShiftLeft(s) => {
            let s = shift(s)?.min(w);
            let x = &operands[0];
            let mut bits: Vec<BitAtom> = (0..w - s).rev().map(|i| bit_of(x, i)).collect();
            bits.extend(std::iter::repeat_n(BitAtom::Zero, s as usize));
            PhdlExpr::Concat(BitVectorRef(bits))
        }
        InternalOp::ShiftRightLogical(s) => {
            let s = shift(s)?.min(w);
            let x = &operands[0];
            let mut bits = vec![BitAtom::Zero; s as usize];
            bits.extend((s..w).rev().map(|i| bit_of(x, i)));
            PhdlExpr::Concat(BitVectorRef(bits))
        }
        InternalOp::ShiftRightArith(s) => {
            let s = shift(s)?.min(w - 1);
            let x = &operands[0];
            let mut bits = vec![bit_of(x, w - 1); s as usize + 1];
            bits.extend((s..w - 1).rev().map(|i| bit_of(x, i)));
            PhdlExpr::Concat(BitVectorRef(bits))
        }
        InternalOp::LoadImm(v) => {
            let v = width.truncate(v);
            PhdlExpr::Concat(BitVectorRef((0..w).rev().map(|i| BitAtom::constant(v >> i & 1 == 1)).collect()))
        }
    };
    Ok(PhdlEquation { lhs: result_name.to_string(), rhs })
}

/// Walks the graph in order, naming each non-result value `TEMP<k>` and
/// the result `Rout<r>`. Returns the equations and the number of TEMP sets.
pub fn build_equations(g: &DataflowGraph, width: WordWidth) -> Result<(Vec<PhdlEquation>, usize), PhdlGenError> {
    let mut names: Vec<String> = Vec::with_capacity(g.nodes.len());
    let mut equations = Vec::with_capacity(g.nodes.len());
    let mut temps = 0;
    for node in &g.nodes {
        let name = if node.id == g.result_node {
            format!("Rout{}", g.live_out.index())
        } else {
            temps += 1;
            temp_name(temps)
        };
        let operands: Vec<Term> = node
            .operands
            .iter()
            .map(|o| match *o {
                OperandRef::Node(src) => Term::Set(names[src].clone()),
                OperandRef::Input(r) => Term::Set(format!("R{}", r.index())),
                OperandRef::Const(c) => Term::Const(c as i64),
            })
            .collect();
        equations.push(expand_op(node.op, &operands, &name, width)?);
        names.push(name);
    }
    Ok((equations, temps))
}

pub fn build_declarations(g: &DataflowGraph, node_count: usize) -> Declarations {
    Declarations {
        input_sets: g.live_in.iter().map(|r| format!("R{}", r.index())).collect(),
        output_set: format!("Rout{}", g.live_out.index()),
        node_sets: (1..=node_count).map(temp_name).collect(),
    }
}

/// Full translation of a prepared graph into the design `seg<index>`.
pub fn translate(g: &DataflowGraph, index: usize, width: WordWidth) -> Result<PhdlDesign, PhdlGenError> {
    let (equations, node_count) = build_equations(g, width)?;
    let decls = build_declarations(g, node_count);
    Ok(PhdlDesign {
        module_name: format!("seg{index}"),
        title: format!("seg{index}.phd"),
        width,
        input_sets: decls.input_sets,
        output_set: decls.output_set,
        node_sets: decls.node_sets,
        equations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::ir::prepare_segment;

    fn graph(text: &str) -> DataflowGraph {
        prepare_segment(&parse_program(text).unwrap()[0].instructions).unwrap()
    }

    fn lines(eqs: &[PhdlEquation]) -> Vec<String> {
        eqs.iter().map(PhdlEquation::to_line).collect()
    }

    fn bits(set: &str, hi: u32, lo: u32) -> Vec<String> {
        (lo..=hi).rev().map(|i| format!("{set}b{i}")).collect()
    }

    fn concat(parts: Vec<String>) -> String {
        format!("[{}]", parts.join(", "))
    }

    #[test]
    fn example_one() {
        let g = graph("and $8, $9, 1\nli $10, 1\nsubu $11, $10, $8\nsll $12, $11, 1");
        let (eqs, n) = build_equations(&g, WordWidth::W32).unwrap();
        assert_eq!(n, 2);
        let mut rout = bits("TEMP2", 30, 0);
        rout.push("0".into());
        assert_eq!(
            lines(&eqs),
            vec![
                "TEMP1 = R9 & 1".to_string(),
                "TEMP2 = 1 - TEMP1".to_string(),
                format!("Rout12 = {}", concat(rout)),
            ]
        );
        let d = build_declarations(&g, n);
        assert_eq!(d.input_sets, vec!["R9"]);
        assert_eq!(d.output_set, "Rout12");
        assert_eq!(d.node_sets, vec!["TEMP1", "TEMP2"]);
    }

    #[test]
    fn example_three() {
        let g = graph("addu $14, $5, -1\nand $15, $14, 255\nsra $24, $15, 3\naddu $25, $24, 1");
        let (eqs, n) = build_equations(&g, WordWidth::W32).unwrap();
        assert_eq!(n, 3);
        let mut t3 = vec!["TEMP2b31".to_string(); 4];
        t3.extend(bits("TEMP2", 30, 3));
        assert_eq!(
            lines(&eqs),
            vec![
                "TEMP1 = R5 + (-1)".to_string(),
                "TEMP2 = TEMP1 & 255".to_string(),
                format!("TEMP3 = {}", concat(t3)),
                "Rout25 = TEMP3 + 1".to_string(),
            ]
        );
        assert_eq!(build_declarations(&g, n).node_sets, vec!["TEMP1", "TEMP2", "TEMP3"]);
    }

    #[test]
    fn no_temporaries() {
        let g = graph("addu $3, $1, $2");
        let (eqs, n) = build_equations(&g, WordWidth::W32).unwrap();
        assert_eq!(n, 0);
        assert_eq!(lines(&eqs), vec!["Rout3 = R1 + R2"]);
        let d = build_declarations(&g, n);
        assert_eq!(d.input_sets, vec!["R1", "R2"]);
        assert!(d.node_sets.is_empty());
    }

    #[test]
    fn shifts() {
        let x = [Term::Set("TEMP2".into())];
        let eq = expand_op(InternalOp::ShiftLeft(8), &x, "TEMP3", WordWidth::W32).unwrap();
        let mut want = bits("TEMP2", 23, 0);
        want.extend(std::iter::repeat_n("0".to_string(), 8));
        assert_eq!(eq.to_line(), format!("TEMP3 = {}", concat(want)));

        let r = [Term::Set("R24".into())];
        let eq = expand_op(InternalOp::ShiftRightLogical(8), &r, "TEMP5", WordWidth::W32).unwrap();
        let mut want = vec!["0".to_string(); 8];
        want.extend(bits("R24", 31, 8));
        assert_eq!(eq.to_line(), format!("TEMP5 = {}", concat(want)));

        let eq = expand_op(InternalOp::ShiftRightArith(3), &x, "TEMP3", WordWidth::W32).unwrap();
        assert!(eq.to_line().starts_with("TEMP3 = [TEMP2b31, TEMP2b31, TEMP2b31, TEMP2b31, TEMP2b30,"));
        assert!(eq.to_line().ends_with("TEMP2b4, TEMP2b3]"));

        let eq = expand_op(InternalOp::ShiftLeft(0), &x, "T", WordWidth::W32).unwrap();
        assert_eq!(eq.to_line(), format!("T = {}", concat(bits("TEMP2", 31, 0))));

        assert_eq!(
            expand_op(InternalOp::ShiftLeft(32), &x, "T", WordWidth::W32),
            Err(PhdlGenError::ShiftOutOfRange(32))
        );
        assert!(matches!(
            expand_op(InternalOp::Add, &x, "T", WordWidth::W32),
            Err(PhdlGenError::UnsupportedOp(InternalOp::Add, 1))
        ));
    }

    #[test]
    fn narrow_sign_splat() {
        let x = [Term::Set("R1".into())];
        let w4 = WordWidth::new(4).unwrap();
        let eq = expand_op(InternalOp::ShiftRightArith(3), &x, "Rout2", w4).unwrap();
        assert_eq!(eq.to_line(), "Rout2 = [R1b3, R1b3, R1b3, R1b3]");
    }

    #[test]
    fn constant_operands() {
        let g = graph("li $4, 5\nsll $5, $4, 1");
        let (eqs, _) = build_equations(&g, WordWidth::new(4).unwrap()).unwrap();
        assert_eq!(lines(&eqs), vec!["Rout5 = [1, 0, 1, 0]"]);
        let g = graph("and $3, $1, -1");
        let (eqs, _) = build_equations(&g, WordWidth::new(8).unwrap()).unwrap();
        assert_eq!(lines(&eqs), vec!["Rout3 = R1 & 255"]);
    }
}
