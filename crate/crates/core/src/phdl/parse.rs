use std::collections::HashSet;

use thiserror::Error;

use super::{BitAtom, BitVectorRef, PhdlDesign, PhdlEquation, PhdlExpr, Term};
use crate::word::WordWidth;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhdlParseError {
    #[error("line {line}: syntax error: {msg}")]
    SyntaxError { line: usize, msg: String },
    #[error("undeclared name `{0}`")]
    UndeclaredName(String),
    #[error("`{0}` is assigned more than once")]
    DoubleAssignment(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(u64),
    Str(String),
    Punct(&'static str),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

const PUNCTS: [&str; 12] = ["...", "..", "[", "]", ",", ";", "=", "&", "#", "+", "-", "("];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PhdlParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let b = line.as_bytes();
        let mut j = 0;
        while j < b.len() {
            let c = b[j];
            if c.is_ascii_whitespace() {
                j += 1;
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let s = j;
                while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(line[s..j].to_string()), line_no));
            } else if c.is_ascii_digit() {
                let s = j;
                while j < b.len() && b[j].is_ascii_digit() {
                    j += 1;
                }
                let n = line[s..j].parse().map_err(|_| PhdlParseError::SyntaxError {
                    line: line_no,
                    msg: format!("number `{}` too large", &line[s..j]),
                })?;
                out.push((Tok::Num(n), line_no));
            } else if c == b'\'' {
                let rest = &line[j + 1..];
                let end = rest.find('\'').ok_or_else(|| PhdlParseError::SyntaxError {
                    line: line_no,
                    msg: "unterminated string".into(),
                })?;
                out.push((Tok::Str(rest[..end].to_string()), line_no));
                j += end + 2;
            } else if c == b')' {
                out.push((Tok::Punct(")"), line_no));
                j += 1;
            } else if let Some(p) = PUNCTS.iter().find(|p| line[j..].starts_with(**p)) {
                out.push((Tok::Punct(p), line_no));
                j += p.len();
            } else {
                return Err(PhdlParseError::SyntaxError {
                    line: line_no,
                    msg: format!("unexpected character `{}`", c as char),
                });
            }
        }
    }
    Ok(out)
}

impl Lexer {
    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |(_, l)| *l)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PhdlParseError> {
        Err(PhdlParseError::SyntaxError { line: self.line(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == k)
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), PhdlParseError> {
        if self.is_punct(p) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> Result<(), PhdlParseError> {
        if self.is_keyword(k) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{k}`"))
        }
    }

    fn ident(&mut self) -> Result<String, PhdlParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => {
                self.pos -= 1;
                self.err("expected a name")
            }
        }
    }
}

/// Splits `Rout12b3` into `("Rout12", 3)`.
fn split_bit(name: &str) -> Option<(&str, u32)> {
    let at = name.rfind('b')?;
    let (set, idx) = (&name[..at], &name[at + 1..]);
    if set.is_empty() || idx.is_empty() || !idx.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((set, idx.parse().ok()?))
}

enum SetKind {
    Input,
    Output,
    Node,
}

/// Reads a `(set, msb)` from a `Xb<msb>..Xb0` range.
fn parse_range(lx: &mut Lexer) -> Result<(String, u32), PhdlParseError> {
    let hi = lx.ident()?;
    lx.expect_punct("..")?;
    let lo = lx.ident()?;
    match (split_bit(&hi), split_bit(&lo)) {
        (Some((s1, h)), Some((s2, 0))) if s1 == s2 => Ok((s1.to_string(), h)),
        _ => lx.err(format!("bad pin range `{hi}..{lo}`")),
    }
}

fn parse_term(lx: &mut Lexer) -> Result<Term, PhdlParseError> {
    let paren = lx.is_punct("(");
    if paren {
        lx.pos += 1;
    }
    let negative = lx.is_punct("-");
    if negative {
        lx.pos += 1;
    }
    let term = match lx.next() {
        Some(Tok::Num(n)) => {
            let n = n as i64;
            Term::Const(if negative { -n } else { n })
        }
        Some(Tok::Ident(s)) if !negative => Term::Set(s),
        _ => {
            lx.pos -= 1;
            return lx.err("expected a set name or constant");
        }
    };
    if paren {
        lx.expect_punct(")")?;
    }
    Ok(term)
}

fn parse_concat(lx: &mut Lexer) -> Result<BitVectorRef, PhdlParseError> {
    lx.expect_punct("[")?;
    let mut atoms = Vec::new();
    loop {
        match lx.next() {
            Some(Tok::Num(0)) => atoms.push(BitAtom::Zero),
            Some(Tok::Num(1)) => atoms.push(BitAtom::One),
            Some(Tok::Ident(name)) => {
                let Some((set, hi)) = split_bit(&name) else {
                    lx.pos -= 1;
                    return lx.err(format!("`{name}` is not a bit name"));
                };
                let set = set.to_string();
                if lx.is_punct("..") {
                    lx.pos += 1;
                    let lo_name = lx.ident()?;
                    match split_bit(&lo_name) {
                        Some((s, lo)) if s == set && lo <= hi => {
                            atoms.extend((lo..=hi).rev().map(|i| BitAtom::bit(&set, i)));
                        }
                        _ => return lx.err(format!("bad range `{name}..{lo_name}`")),
                    }
                } else {
                    atoms.push(BitAtom::Bit { set, index: hi });
                }
            }
            Some(Tok::Punct("...")) => {
                lx.pos -= 1;
                return lx.err("ellipses must be expanded");
            }
            _ => {
                lx.pos -= 1;
                return lx.err("expected a bit, 0 or 1");
            }
        }
        if lx.is_punct(",") {
            lx.pos += 1;
        } else {
            break;
        }
    }
    lx.expect_punct("]")?;
    Ok(BitVectorRef(atoms))
}

/// Reads the PHDL subset produced by [`render_phdl`](super::render_phdl).
pub fn parse_phdl(text: &str) -> Result<PhdlDesign, PhdlParseError> {
    let mut lx = Lexer { toks: lex(text)?, pos: 0 };

    lx.expect_keyword("module")?;
    let module_name = lx.ident()?;
    lx.expect_keyword("title")?;
    let title = match lx.next() {
        Some(Tok::Str(s)) => s,
        _ => {
            lx.pos -= 1;
            return lx.err("expected a quoted title");
        }
    };
    lx.expect_keyword("declarations")?;

    let mut width: Option<u32> = None;
    let mut input_sets = Vec::new();
    let mut output_set: Option<String> = None;
    let mut node_sets = Vec::new();
    let mut declared: HashSet<String> = HashSet::new();

    while !lx.is_keyword("equations") {
        if lx.peek().is_none() {
            return lx.err("missing `equations`");
        }
        let is_set_def = matches!(lx.toks.get(lx.pos + 1), Some((Tok::Punct("="), _)));
        if is_set_def {
            let name = lx.ident()?;
            lx.expect_punct("=")?;
            lx.expect_punct("[")?;
            let (set, _) = parse_range(&mut lx)?;
            lx.expect_punct("]")?;
            lx.expect_punct(";")?;
            if set != name {
                return lx.err(format!("set `{name}` defined over pins of `{set}`"));
            }
            if !declared.contains(&name) {
                return Err(PhdlParseError::UndeclaredName(name));
            }
            continue;
        }
        let (set, msb) = parse_range(&mut lx)?;
        match width {
            None => width = Some(msb + 1),
            Some(w) if w != msb + 1 => return lx.err(format!("`{set}` is {} bits wide, expected {w}", msb + 1)),
            _ => {}
        }
        let kind = match lx.ident()?.as_str() {
            "pin" if lx.is_keyword("istype") => SetKind::Output,
            "pin" => SetKind::Input,
            "node" => SetKind::Node,
            other => return lx.err(format!("unknown declaration kind `{other}`")),
        };
        if lx.is_keyword("istype") {
            lx.pos += 1;
            match lx.next() {
                Some(Tok::Str(s)) if s == "com" => {}
                _ => {
                    lx.pos -= 1;
                    return lx.err("only istype 'com' is supported");
                }
            }
        }
        lx.expect_punct(";")?;
        if !declared.insert(set.clone()) {
            return lx.err(format!("`{set}` declared twice"));
        }
        match kind {
            SetKind::Input => input_sets.push(set),
            SetKind::Node => node_sets.push(set),
            SetKind::Output if output_set.is_some() => return lx.err("more than one output set"),
            SetKind::Output => output_set = Some(set),
        }
    }
    lx.expect_keyword("equations")?;

    let Some(output_set) = output_set else {
        return lx.err("no output set declared");
    };
    let width = width
        .and_then(|w| u8::try_from(w).ok())
        .and_then(WordWidth::new)
        .ok_or(PhdlParseError::SyntaxError { line: lx.line(), msg: "width must be 1..32".into() })?;

    let mut equations: Vec<PhdlEquation> = Vec::new();
    let mut assigned: HashSet<String> = HashSet::new();
    while !lx.is_keyword("end") {
        if lx.peek().is_none() {
            return lx.err("missing `end`");
        }
        let lhs = lx.ident()?;
        lx.expect_punct("=")?;
        let rhs = if lx.is_punct("[") {
            PhdlExpr::Concat(parse_concat(&mut lx)?)
        } else {
            let a = parse_term(&mut lx)?;
            let op = match lx.next() {
                Some(Tok::Punct(p)) if ["&", "#", "+", "-"].contains(&p) => p,
                _ => {
                    lx.pos -= 1;
                    return lx.err("expected one of & # + -");
                }
            };
            let b = parse_term(&mut lx)?;
            match op {
                "&" => PhdlExpr::And(a, b),
                "#" => PhdlExpr::Or(a, b),
                "+" => PhdlExpr::Add(a, b),
                _ => PhdlExpr::Sub(a, b),
            }
        };
        lx.expect_punct(";")?;

        if !declared.contains(&lhs) {
            return Err(PhdlParseError::UndeclaredName(lhs));
        }
        if input_sets.contains(&lhs) {
            return lx.err(format!("input `{lhs}` cannot be assigned"));
        }
        if !assigned.insert(lhs.clone()) {
            return Err(PhdlParseError::DoubleAssignment(lhs));
        }
        let check = |set: &str| {
            if declared.contains(set) {
                Ok(())
            } else {
                Err(PhdlParseError::UndeclaredName(set.to_string()))
            }
        };
        match &rhs {
            PhdlExpr::Concat(v) => {
                for atom in &v.0 {
                    if let BitAtom::Bit { set, index } = atom {
                        check(set)?;
                        if *index >= width.bits() {
                            return lx.err(format!("bit {set}b{index} out of range"));
                        }
                    }
                }
            }
            PhdlExpr::And(a, b) | PhdlExpr::Or(a, b) | PhdlExpr::Add(a, b) | PhdlExpr::Sub(a, b) => {
                for t in [a, b] {
                    if let Term::Set(s) = t {
                        check(s)?;
                    }
                }
            }
        }
        equations.push(PhdlEquation { lhs, rhs });
    }
    lx.expect_keyword("end")?;
    if lx.peek().is_some() {
        return lx.err("text after `end`");
    }

    Ok(PhdlDesign { module_name, title, width, input_sets, output_set, node_sets, equations })
}
