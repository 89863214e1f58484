//! Extraction of straight-line MIPS-2 segments into custom `cpld`
//! instructions backed by an XPLA2 CPLD functional unit.

pub mod asm;
pub mod device;
pub mod driver;
pub mod ir;
pub mod phdl;
pub mod rewriter;
pub mod selector;
pub mod synth;
pub mod verify;
pub mod word;

pub use asm::{parse_program, BasicBlock, Instruction, Program, Register};
pub use device::{fit, max_clock_mhz, DeviceParams, FitReport, Nanos};
pub use ir::{prepare_segment, DataflowGraph};
pub use phdl::{parse_phdl, render_phdl, translate, PhdlDesign};
pub use rewriter::{register_pressure_delta, rewrite, HwImageManifest};
pub use selector::{enumerate_candidates, select_with_feedback, FeedbackBudget, ProfileMap, Segment, SelectionVerdict};
pub use synth::{synthesize, MappedNetlist, Netlist, SynthOptions};
pub use word::WordWidth;
