//! In-memory PHDL designs, the text renderer, the translator that builds a
//! design from a dataflow graph, and the reader used by synthesis.
//!
//! All vectors are `width` bits wide (32 in production). Bit atoms are
//! named `<set>b<index>`, and concatenations list the MSB first.

mod gen;
mod parse;

use std::fmt::{self, Write as _};

pub use gen::{build_declarations, build_equations, expand_op, translate, Declarations, PhdlGenError};
pub use parse::{parse_phdl, PhdlParseError};

use crate::word::WordWidth;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BitAtom {
    Bit { set: String, index: u32 },
    Zero,
    One,
}

impl BitAtom {
    pub fn bit(set: &str, index: u32) -> BitAtom {
        BitAtom::Bit { set: set.to_string(), index }
    }

    pub fn constant(on: bool) -> BitAtom {
        if on {
            BitAtom::One
        } else {
            BitAtom::Zero
        }
    }
}

impl fmt::Display for BitAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitAtom::Bit { set, index } => write!(f, "{set}b{index}"),
            BitAtom::Zero => f.write_str("0"),
            BitAtom::One => f.write_str("1"),
        }
    }
}

/// A concatenation, MSB first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVectorRef(pub Vec<BitAtom>);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Set(String),
    Const(i64),
}

impl Term {
    fn render(&self, out: &mut String, signed_style: bool) {
        match self {
            Term::Set(name) => out.push_str(name),
            Term::Const(c) if signed_style && *c < 0 => {
                let _ = write!(out, "({c})");
            }
            Term::Const(c) => {
                let _ = write!(out, "{c}");
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PhdlExpr {
    Concat(BitVectorRef),
    And(Term, Term),
    Or(Term, Term),
    Add(Term, Term),
    Sub(Term, Term),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhdlEquation {
    pub lhs: String,
    pub rhs: PhdlExpr,
}

impl PhdlEquation {
    /// `TEMP1 = R9 & 1` without the trailing `;`. Concatenations are
    /// rendered on one line.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        self.render(&mut s, usize::MAX);
        s.replace('\n', " ").split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn render(&self, out: &mut String, per_line: usize) {
        out.push_str(&self.lhs);
        out.push_str(" = ");
        let (a, op, b, signed) = match &self.rhs {
            PhdlExpr::Concat(v) => {
                out.push('[');
                let indent = " ".repeat(self.lhs.len() + 4);
                for (i, atom) in v.0.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                        if i % per_line == 0 {
                            out.push('\n');
                            out.push_str(&indent);
                        } else {
                            out.push(' ');
                        }
                    }
                    let _ = write!(out, "{atom}");
                }
                out.push(']');
                return;
            }
            PhdlExpr::And(a, b) => (a, "&", b, false),
            PhdlExpr::Or(a, b) => (a, "#", b, false),
            PhdlExpr::Add(a, b) => (a, "+", b, true),
            PhdlExpr::Sub(a, b) => (a, "-", b, true),
        };
        a.render(out, signed);
        let _ = write!(out, " {op} ");
        b.render(out, signed);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhdlDesign {
    pub module_name: String,
    pub title: String,
    pub width: WordWidth,
    pub input_sets: Vec<String>,
    pub output_set: String,
    pub node_sets: Vec<String>,
    pub equations: Vec<PhdlEquation>,
}

impl PhdlDesign {
    pub fn pin_names(&self, set: &str) -> Vec<String> {
        (0..self.width.bits()).rev().map(|i| format!("{set}b{i}")).collect()
    }

    pub fn is_declared(&self, set: &str) -> bool {
        self.input_sets.iter().chain(self.node_sets.iter()).any(|s| s == set) || self.output_set == set
    }
}

/// Emits module, title, declarations, equations and `end`, one statement
/// per line, concatenations fully expanded.
pub fn render_phdl(design: &PhdlDesign) -> String {
    let msb = design.width.bits() - 1;
    let mut out = String::new();
    let _ = writeln!(out, "module {}", design.module_name);
    let _ = writeln!(out, "title '{}'", design.title);
    out.push_str("declarations\n");
    let mut decl = |name: &str, kind: &str| {
        let _ = writeln!(out, "{name}b{msb}..{name}b0 {kind};");
        let _ = writeln!(out, "{name} = [{name}b{msb}..{name}b0];");
    };
    for set in &design.input_sets {
        decl(set, "pin");
    }
    decl(&design.output_set, "pin istype 'com'");
    for set in &design.node_sets {
        decl(set, "node istype 'com'");
    }
    out.push_str("equations\n");
    for eq in &design.equations {
        eq.render(&mut out, 8);
        out.push_str(";\n");
    }
    out.push_str("end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equation_lines() {
        let eq = PhdlEquation {
            lhs: "TEMP1".into(),
            rhs: PhdlExpr::Add(Term::Set("R5".into()), Term::Const(-1)),
        };
        assert_eq!(eq.to_line(), "TEMP1 = R5 + (-1)");
        let eq = PhdlEquation {
            lhs: "TEMP2".into(),
            rhs: PhdlExpr::Sub(Term::Const(1), Term::Set("TEMP1".into())),
        };
        assert_eq!(eq.to_line(), "TEMP2 = 1 - TEMP1");
        let eq = PhdlEquation {
            lhs: "TEMP2".into(),
            rhs: PhdlExpr::Or(Term::Set("R3".into()), Term::Const(4294967295)),
        };
        assert_eq!(eq.to_line(), "TEMP2 = R3 # 4294967295");
    }
}
