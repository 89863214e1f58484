//! MIPS-2 assembly front end.
//!
//! Only the opcodes that can be turned into combinational hardware are
//! decoded (`subu addu and or srl sll sra li`). Everything else is kept as
//! an opaque [`Opcode::Other`] line so the rewriter can re-emit the program
//! untouched outside replaced regions.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {0}: malformed operand list")]
    MalformedLine(usize),
    #[error("line {0}: register out of range (only $0..$31 exist)")]
    RegisterOutOfRange(usize),
    #[error("line {line}: symbolic register `{name}` is not supported, use $0..$31")]
    SymbolicRegister { line: usize, name: String },
    #[error("line {line}: shift amount {amount} outside 0..31")]
    ShiftOutOfRange { line: usize, amount: i64 },
    #[error("bad immediate `{0}`")]
    BadImmediate(String),
}

/// A general-purpose register `$0..$31`. `$0` reads as zero and ignores writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Register(u8);

impl Register {
    pub const ZERO: Register = Register(0);

    pub fn new(index: u8) -> Option<Register> {
        (index < 32).then_some(Register(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.0)
    }
}

/// An immediate operand. `value` holds the 32-bit pattern; `source_text`
/// keeps the spelling used in the listing so printing is faithful.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Immediate {
    pub value: u32,
    pub source_text: String,
}

impl Immediate {
    pub fn from_value(value: u32) -> Immediate {
        Immediate { value, source_text: value.to_string() }
    }

    /// Two's-complement reading of the bit pattern.
    pub fn signed(&self) -> i32 {
        self.value as i32
    }
}

impl fmt::Display for Immediate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

/// Parses a decimal, negative decimal or `0x` hex token into a 32-bit pattern.
///
/// Decimal values may span the signed and unsigned 32-bit ranges
/// (`-2147483648..=4294967295`); hex is zero-extended.
pub fn parse_immediate(token: &str) -> Result<Immediate, AsmError> {
    let bad = || AsmError::BadImmediate(token.to_string());
    let t = token.trim();
    let value = if let Some(hex) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        if hex.is_empty() || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(bad());
        }
        u32::from_str_radix(hex, 16).map_err(|_| bad())?
    } else {
        let digits = t.strip_prefix('-').unwrap_or(t);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let v: i64 = t.parse().map_err(|_| bad())?;
        if v < i32::MIN as i64 || v > u32::MAX as i64 {
            return Err(bad());
        }
        v as u32
    };
    Ok(Immediate { value, source_text: t.to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Register),
    Imm(Immediate),
}

impl Operand {
    pub fn as_reg(&self) -> Option<Register> {
        match self {
            Operand::Reg(r) => Some(*r),
            Operand::Imm(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => r.fmt(f),
            Operand::Imm(i) => i.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Opcode {
    Subu,
    Addu,
    And,
    Or,
    Srl,
    Sll,
    Sra,
    Li,
    /// Anything outside the supported set; the whole line is kept verbatim.
    Other(String),
}

impl Opcode {
    fn from_mnemonic(m: &str) -> Option<Opcode> {
        Some(match m {
            "subu" => Opcode::Subu,
            "addu" => Opcode::Addu,
            "and" => Opcode::And,
            "or" => Opcode::Or,
            "srl" => Opcode::Srl,
            "sll" => Opcode::Sll,
            "sra" => Opcode::Sra,
            "li" => Opcode::Li,
            _ => return None,
        })
    }

    pub fn mnemonic(&self) -> &str {
        match self {
            Opcode::Subu => "subu",
            Opcode::Addu => "addu",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Srl => "srl",
            Opcode::Sll => "sll",
            Opcode::Sra => "sra",
            Opcode::Li => "li",
            Opcode::Other(text) => text,
        }
    }

    pub fn is_supported(&self) -> bool {
        !matches!(self, Opcode::Other(_))
    }

    pub fn is_shift(&self) -> bool {
        matches!(self, Opcode::Srl | Opcode::Sll | Opcode::Sra)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub opcode: Opcode,
    /// Meaningless for `Other` (set to `$0`).
    pub dest: Register,
    pub src1: Option<Operand>,
    pub src2: Option<Operand>,
    /// 1-based source line.
    pub line_no: usize,
}

impl Instruction {
    pub fn is_supported(&self) -> bool {
        self.opcode.is_supported()
    }

    /// Registers read by this instruction, in operand order. For `Other`
    /// lines every `$n` token is reported, which is conservative.
    pub fn reads(&self) -> Vec<Register> {
        match &self.opcode {
            Opcode::Other(text) => registers_in(text),
            _ => [&self.src1, &self.src2]
                .into_iter()
                .flatten()
                .filter_map(Operand::as_reg)
                .collect(),
        }
    }

    /// The register written, if known. `Other` lines report none.
    pub fn writes(&self) -> Option<Register> {
        self.is_supported().then_some(self.dest)
    }

    fn is_control_flow(&self) -> bool {
        match &self.opcode {
            Opcode::Other(text) => {
                let m = text.split_whitespace().next().unwrap_or("");
                m.starts_with('b') || m.starts_with('j')
            }
            _ => false,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Opcode::Other(text) = &self.opcode {
            return f.write_str(text);
        }
        write!(f, "{} {}", self.opcode.mnemonic(), self.dest)?;
        for op in [&self.src1, &self.src2].into_iter().flatten() {
            write!(f, ", {op}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BasicBlock {
    pub label: Option<String>,
    pub instructions: Vec<Instruction>,
}

/// A parsed program together with its raw lines, which the rewriter needs
/// to reproduce untouched regions byte for byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub lines: Vec<String>,
    pub blocks: Vec<BasicBlock>,
}

impl Program {
    pub fn parse(text: &str) -> Result<Program, AsmError> {
        let lines: Vec<String> = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        let blocks = parse_lines(&lines)?;
        Ok(Program { lines, blocks })
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.instructions.iter())
    }

    pub fn has_control_flow(&self) -> bool {
        self.instructions().any(Instruction::is_control_flow)
    }
}

/// Splits assembly text into basic blocks.
pub fn parse_program(text: &str) -> Result<Vec<BasicBlock>, AsmError> {
    Program::parse(text).map(|p| p.blocks)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn is_label_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || b == b'$')
        && !s.starts_with('$')
}

fn parse_lines(lines: &[String]) -> Result<Vec<BasicBlock>, AsmError> {
    let mut blocks = Vec::new();
    let mut current = BasicBlock::default();

    let flush = |current: &mut BasicBlock, blocks: &mut Vec<BasicBlock>| {
        if current.label.is_some() || !current.instructions.is_empty() {
            blocks.push(std::mem::take(current));
        }
    };

    for (i, raw) in lines.iter().enumerate() {
        let line_no = i + 1;
        let mut body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(colon) = body.find(':') {
            let name = body[..colon].trim();
            if is_label_name(name) {
                flush(&mut current, &mut blocks);
                current.label = Some(name.to_string());
                body = body[colon + 1..].trim();
                if body.is_empty() {
                    continue;
                }
            }
        }
        let insn = parse_instruction(body, line_no)?;
        let ends_block = insn.is_control_flow();
        current.instructions.push(insn);
        if ends_block {
            flush(&mut current, &mut blocks);
        }
    }
    flush(&mut current, &mut blocks);
    Ok(blocks)
}

fn parse_register(token: &str, line_no: usize) -> Result<Register, AsmError> {
    let name = token.strip_prefix('$').ok_or(AsmError::MalformedLine(line_no))?;
    if name.is_empty() {
        return Err(AsmError::MalformedLine(line_no));
    }
    if !name.bytes().all(|b| b.is_ascii_digit()) {
        return Err(AsmError::SymbolicRegister { line: line_no, name: token.to_string() });
    }
    let index: u32 = name.parse().map_err(|_| AsmError::RegisterOutOfRange(line_no))?;
    u8::try_from(index)
        .ok()
        .and_then(Register::new)
        .ok_or(AsmError::RegisterOutOfRange(line_no))
}

fn parse_operand(token: &str, line_no: usize) -> Result<Operand, AsmError> {
    if token.starts_with('$') {
        parse_register(token, line_no).map(Operand::Reg)
    } else {
        parse_immediate(token)
            .map(Operand::Imm)
            .map_err(|_| AsmError::MalformedLine(line_no))
    }
}

/// Every `$n` token in free text; validates range and rejects symbolic names.
fn scan_registers(text: &str, line_no: usize) -> Result<Vec<Register>, AsmError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' {
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(parse_register(&text[start..i], line_no)?);
        } else {
            i += 1;
        }
    }
    Ok(out)
}

fn registers_in(text: &str) -> Vec<Register> {
    scan_registers(text, 0).unwrap_or_default()
}

fn parse_instruction(body: &str, line_no: usize) -> Result<Instruction, AsmError> {
    let (mnemonic, rest) = match body.find(char::is_whitespace) {
        Some(i) => (&body[..i], body[i..].trim()),
        None => (body, ""),
    };
    let other = || -> Result<Instruction, AsmError> {
        scan_registers(body, line_no)?;
        Ok(Instruction {
            opcode: Opcode::Other(body.to_string()),
            dest: Register::ZERO,
            src1: None,
            src2: None,
            line_no,
        })
    };
    let Some(opcode) = Opcode::from_mnemonic(&mnemonic.to_ascii_lowercase()) else {
        return other();
    };

    let tokens: Vec<&str> = rest.split(',').map(str::trim).collect();
    if tokens.iter().any(|t| t.is_empty() || t.contains(char::is_whitespace)) {
        return Err(AsmError::MalformedLine(line_no));
    }
    let dest = parse_register(tokens[0], line_no)?;

    let (src1, src2) = match opcode {
        Opcode::Li => {
            if tokens.len() != 2 {
                return Err(AsmError::MalformedLine(line_no));
            }
            match parse_operand(tokens[1], line_no)? {
                imm @ Operand::Imm(_) => (Some(imm), None),
                Operand::Reg(_) => return Err(AsmError::MalformedLine(line_no)),
            }
        }
        _ => {
            if tokens.len() != 3 {
                return Err(AsmError::MalformedLine(line_no));
            }
            let a = parse_register(tokens[1], line_no)?;
            let b = parse_operand(tokens[2], line_no)?;
            if opcode.is_shift() {
                match &b {
                    // sll $d, $s, $t is a variable shift: not supported
                    Operand::Reg(_) => return other(),
                    Operand::Imm(imm) => {
                        let amount = parse_shift_amount(&imm.source_text);
                        if !(0..32).contains(&amount) {
                            return Err(AsmError::ShiftOutOfRange { line: line_no, amount });
                        }
                    }
                }
            }
            (Some(Operand::Reg(a)), Some(b))
        }
    };
    Ok(Instruction { opcode, dest, src1, src2, line_no })
}

fn parse_shift_amount(text: &str) -> i64 {
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).unwrap_or(i64::MAX)
    } else {
        text.parse().unwrap_or(i64::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> Instruction {
        let blocks = parse_program(text).unwrap();
        assert_eq!(blocks.len(), 1);
        blocks[0].instructions[0].clone()
    }

    fn reg(i: u8) -> Option<Operand> {
        Some(Operand::Reg(Register::new(i).unwrap()))
    }

    fn imm(v: u32) -> Option<Operand> {
        Some(Operand::Imm(Immediate::from_value(v)))
    }

    #[test]
    fn parses_listing_forms() {
        let i = one("sll $12, $11, 1");
        assert_eq!(i.opcode, Opcode::Sll);
        assert_eq!(i.dest.index(), 12);
        assert_eq!(i.src1, reg(11));
        assert_eq!(i.src2, imm(1));

        let i = one("li $10, 1");
        assert_eq!(i.opcode, Opcode::Li);
        assert_eq!(i.src1, imm(1));
        assert_eq!(i.src2, None);

        let i = one("and $14,$24,0xff00");
        assert_eq!(i.opcode, Opcode::And);
        assert_eq!(i.src1, reg(24));
        assert_eq!(i.src2.as_ref().map(|o| match o {
            Operand::Imm(x) => x.value,
            _ => unreachable!(),
        }), Some(65280));
    }

    #[test]
    fn empty_text_has_no_blocks() {
        assert!(parse_program("").unwrap().is_empty());
        assert!(parse_program("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn immediates() {
        assert_eq!(parse_immediate("0xff00").unwrap().value, 65280);
        let m1 = parse_immediate("-1").unwrap();
        assert_eq!(m1.value, 0xFFFF_FFFF);
        assert_eq!(m1.signed(), -1);
        assert_eq!(parse_immediate("0").unwrap().value, 0);
        assert_eq!(parse_immediate("4294967295").unwrap().value, u32::MAX);
        assert!(parse_immediate("4294967296").is_err());
        assert!(parse_immediate("-2147483649").is_err());
        assert!(parse_immediate("0x100000000").is_err());
        assert!(parse_immediate("12a").is_err());
        assert!(parse_immediate("0x").is_err());
        assert!(parse_immediate("").is_err());
    }

    #[test]
    fn register_errors() {
        assert_eq!(parse_program("addu $32, $1, $2"), Err(AsmError::RegisterOutOfRange(1)));
        assert!(matches!(
            parse_program("addu $t0, $1, $2"),
            Err(AsmError::SymbolicRegister { line: 1, .. })
        ));
        assert_eq!(parse_program("\naddu $1 $2, $3"), Err(AsmError::MalformedLine(2)));
        assert_eq!(parse_program("addu $1, $2"), Err(AsmError::MalformedLine(1)));
        assert_eq!(parse_program("li $1, $2"), Err(AsmError::MalformedLine(1)));
    }

    #[test]
    fn shifts() {
        assert!(matches!(
            parse_program("sll $1, $2, 32"),
            Err(AsmError::ShiftOutOfRange { amount: 32, .. })
        ));
        let i = one("sll $1, $2, $3");
        assert!(matches!(i.opcode, Opcode::Other(_)));
        assert_eq!(i.reads().len(), 3);
    }

    #[test]
    fn blocks_split_at_labels_and_branches() {
        let text = "\
main:
    addu $1, $2, $3   # trailing comment
    beq $1, $0, out
    or $4, $1, 7
out:  sll $5, $4, 2
    jr $31
";
        let blocks = parse_program(text).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[0].label.as_deref(), Some("main"));
        assert_eq!(blocks[0].instructions.len(), 2);
        assert_eq!(blocks[1].label, None);
        assert_eq!(blocks[1].instructions.len(), 1);
        assert_eq!(blocks[2].label.as_deref(), Some("out"));
        assert_eq!(blocks[2].instructions[0].line_no, 5);
    }

    #[test]
    fn crlf_accepted() {
        let p = Program::parse("addu $1, $2, $3\r\nli $4, 5\r\n").unwrap();
        assert_eq!(p.lines[0], "addu $1, $2, $3");
        assert_eq!(p.blocks[0].instructions.len(), 2);
    }

    #[test]
    fn canonical_print() {
        assert_eq!(one("addu    $14, $5, -1").to_string(), "addu $14, $5, -1");
        assert_eq!(one("and $14,$24,0xff00").to_string(), "and $14, $24, 0xff00");
    }
}
