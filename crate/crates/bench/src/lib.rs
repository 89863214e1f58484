//! Benchmark inputs shared by the criterion targets.

use asm2cpld_core::{prepare_segment, translate, PhdlDesign, Program, WordWidth};

pub const EX1: &str = include_str!("../../../corpus/ex1.s");
pub const EX2: &str = include_str!("../../../corpus/ex2.s");
pub const EX3: &str = include_str!("../../../corpus/ex3.s");
pub const BYTESWAP: &str = include_str!("../../../corpus/byteswap.phd");

/// A longer listing: `blocks` copies of a mixed arithmetic block.
pub fn synthetic_program(blocks: usize) -> String {
    let mut s = String::new();
    for b in 0..blocks {
        s.push_str(&format!("L{b}:\n\tand $8, $9, 0xff\n\taddu $10, $8, $9\n\tsrl $11, $10, 3\n\tor $12, $11, $8\n\tnop\n"));
    }
    s
}

/// PHDL design of the single segment in `listing`.
pub fn design_of(listing: &str) -> PhdlDesign {
    let p = Program::parse(listing).expect("listing parses");
    let insns: Vec<_> = p.instructions().cloned().collect();
    let g = prepare_segment(&insns).expect("segment is valid");
    translate(&g, 1, WordWidth::W32).expect("translates")
}
