//! PHDL compilation: per-bit lowering, node collapsing, constant folding,
//! wire detection and product-term mapping.

mod elaborate;
mod expr;
mod map;
mod netlist;
mod sop;

use thiserror::Error;

pub use elaborate::{classify, elaborate, BitImpl, Elaborated};
pub use expr::{BitExpr, ExprArena, ExprId};
pub use map::map_cells;
pub use netlist::{Cell, MappedNetlist, NetlistParseError, OutputImpl};
pub use sop::{to_sop, Cube, Literal, Signal, Sop, SopError};

pub use crate::phdl::{parse_phdl, PhdlParseError};
use crate::phdl::PhdlDesign;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("`{set}` concatenation has {got} bits, expected {want}")]
    WidthMismatch { set: String, got: usize, want: usize },
    #[error("undeclared name `{0}`")]
    UndeclaredName(String),
    #[error("`{0}` is read before it is assigned")]
    UnassignedSet(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOptions {
    /// Inline node sets into their users. Off keeps one macrocell per
    /// node bit.
    pub collapse_nodes: bool,
    /// Product terms one macrocell may own before logic is split into
    /// helper cells (4 dedicated PAL terms plus the 32 shared PLA terms).
    pub max_cell_cubes: usize,
    /// Give-up bound for [`to_sop`] flattening.
    pub cube_limit: usize,
    /// Output bits whose support is at most this many pins are classified
    /// from their exact truth table.
    pub wire_detect_inputs: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { collapse_nodes: true, max_cell_cubes: 36, cube_limit: 4096, wire_detect_inputs: 12 }
    }
}

/// An elaborated design together with its macrocell mapping.
#[derive(Debug, Clone)]
pub struct Netlist {
    pub elaborated: Elaborated,
    pub mapped: MappedNetlist,
}

impl Netlist {
    /// Flat cover of output bit `bit` over input literals.
    pub fn output_sop(&self, bit: usize, limit: usize) -> Result<Sop, SopError> {
        to_sop(&self.elaborated.arena, self.elaborated.outputs[bit], limit)
    }
}

pub fn synthesize(design: &PhdlDesign, opts: &SynthOptions) -> Result<Netlist, SynthError> {
    let elaborated = elaborate(design, opts)?;
    let mapped = map_cells(&elaborated, &design.module_name, opts);
    Ok(Netlist { elaborated, mapped })
}
