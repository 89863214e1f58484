//! Reference interpreter and differential checks of netlists against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::asm::{Instruction, Opcode, Operand, Program, Register};
use crate::ir::prepare_segment;
use crate::phdl::translate;
use crate::rewriter::CpldInstruction;
use crate::synth::{synthesize, MappedNetlist, SynthOptions};
use crate::word::WordWidth;

/// Inputs every differential check tries before random ones.
pub const CORNER_VECTORS: [u32; 8] = [0, 1, 0xFFFF_FFFF, 0x8000_0000, 0x7FFF_FFFF, 0xAAAA_AAAA, 0x5555_5555, 0x0000_FFFF];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegisterFile([u32; 32]);

impl Default for RegisterFile {
    fn default() -> Self {
        RegisterFile([0; 32])
    }
}

impl RegisterFile {
    pub fn from_values(mut values: [u32; 32]) -> RegisterFile {
        values[0] = 0;
        RegisterFile(values)
    }

    pub fn random(rng: &mut impl Rng) -> RegisterFile {
        let mut v = [0u32; 32];
        rng.fill(&mut v[..]);
        RegisterFile::from_values(v)
    }

    pub fn read(&self, r: Register) -> u32 {
        self.0[r.index() as usize]
    }

    pub fn write(&mut self, r: Register, v: u32) {
        if !r.is_zero() {
            self.0[r.index() as usize] = v;
        }
    }

    pub fn values(&self) -> &[u32; 32] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("inputs {inputs:#x?}: expected {expected:#010x}, netlist gave {got:#010x}")]
    Mismatch { inputs: Vec<u32>, expected: u32, got: u32 },
    #[error("line {0}: instruction has no reference semantics")]
    Unsupported(usize),
    #[error("netlist set `{0}` does not name a register")]
    BadPinSet(String),
    #[error("width {width} with {inputs} inputs is too wide to enumerate")]
    TooWide { width: u32, inputs: usize },
    #[error("pipeline failed: {0}")]
    Pipeline(String),
    #[error("register {reg} differs: expected {expected:#010x}, got {got:#010x}")]
    ProgramMismatch { reg: Register, expected: u32, got: u32 },
}

fn operand(rf: &RegisterFile, op: &Option<Operand>, width: WordWidth) -> u32 {
    match op {
        Some(Operand::Reg(r)) => width.truncate(rf.read(*r)),
        Some(Operand::Imm(i)) => width.truncate(i.value),
        None => 0,
    }
}

/// Executes one supported instruction at `width` bits.
pub fn step(insn: &Instruction, rf: &mut RegisterFile, width: WordWidth) -> Result<(), VerifyError> {
    let a = operand(rf, &insn.src1, width);
    let b = operand(rf, &insn.src2, width);
    let v = match insn.opcode {
        Opcode::Addu => width.add(a, b),
        Opcode::Subu => width.sub(a, b),
        Opcode::And => a & b,
        Opcode::Or => a | b,
        Opcode::Sll => width.sll(a, b & 31),
        Opcode::Srl => width.srl(a, b & 31),
        Opcode::Sra => width.sra(a, b & 31),
        Opcode::Li => a,
        Opcode::Other(_) => return Err(VerifyError::Unsupported(insn.line_no)),
    };
    rf.write(insn.dest, v);
    Ok(())
}

pub fn interpret_segment_at(seg: &[Instruction], rf: &RegisterFile, width: WordWidth) -> Result<RegisterFile, VerifyError> {
    let mut out = *rf;
    for insn in seg {
        step(insn, &mut out, width)?;
    }
    Ok(out)
}

/// 32-bit MIPS semantics of a segment of supported instructions.
pub fn interpret_segment(seg: &[Instruction], rf: &RegisterFile) -> Result<RegisterFile, VerifyError> {
    interpret_segment_at(seg, rf, WordWidth::W32)
}

fn set_register(name: &str, prefix: &str) -> Result<Register, VerifyError> {
    name.strip_prefix(prefix)
        .and_then(|n| n.parse::<u8>().ok())
        .and_then(Register::new)
        .ok_or_else(|| VerifyError::BadPinSet(name.to_string()))
}

/// The registers a netlist reads and writes, from its pin set names.
pub fn netlist_registers(n: &MappedNetlist) -> Result<(Vec<Register>, Register), VerifyError> {
    let ins = n.input_sets.iter().map(|s| set_register(s, "R")).collect::<Result<_, _>>()?;
    Ok((ins, set_register(&n.output_set, "Rout")?))
}

/// Compares the netlist against the interpreter on a batch of register
/// files (at most 64).
fn check_batch(
    seg: &[Instruction],
    n: &MappedNetlist,
    ins: &[Register],
    out: Register,
    files: &[RegisterFile],
    width: WordWidth,
) -> Result<(), VerifyError> {
    let vectors: Vec<Vec<u32>> = files.iter().map(|rf| ins.iter().map(|&r| width.truncate(rf.read(r))).collect()).collect();
    let got = n.eval_batch(&vectors);
    for ((rf, v), g) in files.iter().zip(&vectors).zip(got) {
        let expected = interpret_segment_at(seg, rf, width)?.read(out);
        let expected = width.truncate(expected);
        if expected != g {
            return Err(VerifyError::Mismatch { inputs: v.clone(), expected, got: g });
        }
    }
    Ok(())
}

/// Checks corner vectors on every input, then `trials` random register
/// files. Returns the number of vectors checked. The counterexample
/// reported is the one with the lowest trial index.
pub fn differential_check(seg: &[Instruction], n: &MappedNetlist, trials: usize, seed: u64) -> Result<usize, VerifyError> {
    let (ins, out) = netlist_registers(n)?;
    let width = n.width;

    let mut corners = Vec::new();
    let k = ins.len();
    for combo in 0..CORNER_VECTORS.len().pow(k as u32) {
        let mut values = [0u32; 32];
        let mut c = combo;
        for r in &ins {
            values[r.index() as usize] = CORNER_VECTORS[c % CORNER_VECTORS.len()];
            c /= CORNER_VECTORS.len();
        }
        corners.push(RegisterFile::from_values(values));
    }
    for chunk in corners.chunks(64) {
        check_batch(seg, n, &ins, out, chunk, width)?;
    }

    let batches = trials.div_ceil(64);
    let failures: Vec<(usize, VerifyError)> = (0..batches)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let count = 64.min(trials - b * 64);
            let files: Vec<RegisterFile> = (0..count).map(|_| RegisterFile::random(&mut rng)).collect();
            check_batch(seg, n, &ins, out, &files, width).err().map(|e| (b, e))
        })
        .collect();
    match failures.into_iter().min_by_key(|(b, _)| *b) {
        Some((_, e)) => Err(e),
        None => Ok(corners.len() + trials),
    }
}

/// Rebuilds the pipeline at `width` bits and checks every input value.
pub fn exhaustive_narrow_check(seg: &[Instruction], width: WordWidth) -> Result<usize, VerifyError> {
    let g = prepare_segment(seg).map_err(|e| VerifyError::Pipeline(e.to_string()))?;
    let k = g.live_in.len();
    let w = width.bits();
    if (k <= 1 && w > 16) || (k == 2 && w > 8) || k > 2 {
        return Err(VerifyError::TooWide { width: w, inputs: k });
    }
    let design = translate(&g, 1, width).map_err(|e| VerifyError::Pipeline(e.to_string()))?;
    let n = synthesize(&design, &SynthOptions::default()).map_err(|e| VerifyError::Pipeline(e.to_string()))?.mapped;
    let (ins, out) = netlist_registers(&n)?;
    let total = 1usize << (w as usize * k);
    let files: Vec<RegisterFile> = (0..total)
        .map(|v| {
            let mut values = [0u32; 32];
            for (i, r) in ins.iter().enumerate() {
                values[r.index() as usize] = ((v >> (i * w as usize)) as u32) & width.mask();
            }
            RegisterFile::from_values(values)
        })
        .collect();
    files
        .par_chunks(64)
        .enumerate()
        .filter_map(|(i, chunk)| check_batch(seg, &n, &ins, out, chunk, width).err().map(|e| (i, e)))
        .min_by_key(|(i, _)| *i)
        .map_or(Ok(total), |(_, e)| Err(e))
}

/// Runs a straight-line program. `cpld` lines execute `netlists[slot]`,
/// slots being numbered in order of appearance; `nop` does nothing.
pub fn interpret_program(program: &Program, rf: &RegisterFile, netlists: &[MappedNetlist]) -> Result<RegisterFile, VerifyError> {
    let mut out = *rf;
    let mut slot = 0;
    for insn in program.instructions() {
        if let Some((rd, rs, rt)) = CpldInstruction::from_instruction(insn) {
            let n = netlists.get(slot).ok_or(VerifyError::Unsupported(insn.line_no))?;
            slot += 1;
            let inputs: Vec<u32> = [rs, rt].iter().take(n.input_sets.len()).map(|&r| out.read(r)).collect();
            out.write(rd, n.eval(&inputs));
            continue;
        }
        match &insn.opcode {
            Opcode::Other(text) if text.trim() == "nop" => {}
            _ => step(insn, &mut out, WordWidth::W32)?,
        }
    }
    Ok(out)
}

/// Compares the original program with its rewrite on `trials` random
/// register files, ignoring registers listed in `elided`.
pub fn check_program(
    original: &Program,
    rewritten: &Program,
    netlists: &[MappedNetlist],
    elided: &[Register],
    trials: usize,
    seed: u64,
) -> Result<usize, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let rf = RegisterFile::random(&mut rng);
        let want = interpret_program(original, &rf, &[])?;
        let got = interpret_program(rewritten, &rf, netlists)?;
        for i in 1..32u8 {
            let r = Register::new(i).expect("register index in range");
            if !elided.contains(&r) && want.read(r) != got.read(r) {
                return Err(VerifyError::ProgramMismatch { reg: r, expected: want.read(r), got: got.read(r) });
            }
        }
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::synth::{OutputImpl, Sop};

    fn seg(text: &str) -> Vec<Instruction> {
        parse_program(text).unwrap().remove(0).instructions
    }

    fn reg(i: u8) -> Register {
        Register::new(i).unwrap()
    }

    fn pipeline(s: &[Instruction]) -> MappedNetlist {
        let g = prepare_segment(s).unwrap();
        let d = translate(&g, 1, WordWidth::W32).unwrap();
        synthesize(&d, &SynthOptions::default()).unwrap().mapped
    }

    const EX1: &str = "and $8, $9, 1\nli $10, 1\nsubu $11, $10, $8\nsll $12, $11, 1\n";

    #[test]
    fn interpreter_examples() {
        let mut rf = RegisterFile::default();
        rf.write(reg(9), 5);
        assert_eq!(interpret_segment(&seg(EX1), &rf).unwrap().read(reg(12)), 0);
        rf.write(reg(9), 4);
        assert_eq!(interpret_segment(&seg(EX1), &rf).unwrap().read(reg(12)), 2);

        let ex3 = seg("addu $14, $5, -1\nand $15, $14, 255\nsra $24, $15, 3\naddu $25, $24, 1\n");
        let out = interpret_segment(&ex3, &RegisterFile::default()).unwrap();
        assert_eq!(out.read(reg(14)), 0xFFFF_FFFF);
        assert_eq!(out.read(reg(15)), 255);
        assert_eq!(out.read(reg(24)), 31);
        assert_eq!(out.read(reg(25)), 32);
    }

    #[test]
    fn zero_register_pinned() {
        let mut rf = RegisterFile::default();
        rf.write(Register::ZERO, 7);
        assert_eq!(rf.read(Register::ZERO), 0);
        let out = interpret_segment(&seg("li $0, 9\naddu $1, $0, 3\n"), &rf).unwrap();
        assert_eq!(out.read(reg(1)), 3);
    }

    #[test]
    fn ex1_differential_and_narrow() {
        let s = seg(EX1);
        let n = pipeline(&s);
        assert!(differential_check(&s, &n, 10_000, 1).is_ok());
        assert_eq!(exhaustive_narrow_check(&s, WordWidth::new(8).unwrap()), Ok(256));
    }

    #[test]
    fn dropped_cube_is_caught() {
        let s = seg("addu $3, $1, $2\nor $4, $3, 5\n");
        let mut n = pipeline(&s);
        let bit = n.outputs.iter().position(|o| matches!(o, OutputImpl::Logic(c) if c.len() > 1)).unwrap();
        if let OutputImpl::Logic(Sop(cubes)) = &mut n.outputs[bit] {
            cubes.pop();
        }
        assert!(matches!(differential_check(&s, &n, 1000, 3), Err(VerifyError::Mismatch { .. })));
    }

    #[test]
    fn narrow_two_input_add_and_sign_splat() {
        assert_eq!(exhaustive_narrow_check(&seg("addu $3, $1, $2\nor $4, $3, 0\n"), WordWidth::new(8).unwrap()), Ok(65536));
        assert_eq!(exhaustive_narrow_check(&seg("sra $2, $1, 3\nor $3, $2, 0\n"), WordWidth::new(4).unwrap()), Ok(16));
        let mut rf = RegisterFile::default();
        rf.write(reg(1), 0b1000);
        let out = interpret_segment_at(&seg("sra $2, $1, 3\n"), &rf, WordWidth::new(4).unwrap()).unwrap();
        assert_eq!(out.read(reg(2)), 0b1111);
    }

    #[test]
    fn too_wide_rejected() {
        assert!(matches!(
            exhaustive_narrow_check(&seg("addu $3, $1, $2\nor $4, $3, 0\n"), WordWidth::new(9).unwrap()),
            Err(VerifyError::TooWide { .. })
        ));
    }
}
