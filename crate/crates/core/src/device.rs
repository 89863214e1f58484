//! Fitting and timing model of the XPLA2 PZ3960.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use num_rational::Ratio;
use thiserror::Error;

use crate::synth::{MappedNetlist, OutputImpl, Signal, Sop};

pub type Nanos = Ratio<i64>;

/// How often a signal path crosses the global interconnect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GziaMode {
    /// One crossing per FU path.
    Once,
    /// One crossing per macrocell level.
    PerLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceParams {
    pub pal_delay_ns: Nanos,
    pub pla_extra_ns: Nanos,
    pub gzia_delay_ns: Nanos,
    pub pt_per_macrocell: u32,
    pub pla_pt_per_block: u32,
    pub macrocells_per_block: u32,
    pub blocks_per_fast_module: u32,
    pub total_macrocells: u32,
    pub io_pins: u32,
    pub gzia_mode: GziaMode,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            pal_delay_ns: Ratio::new(15, 2),
            pla_extra_ns: Ratio::new(3, 2),
            gzia_delay_ns: Ratio::from_integer(4),
            pt_per_macrocell: 4,
            pla_pt_per_block: 32,
            macrocells_per_block: 20,
            blocks_per_fast_module: 4,
            total_macrocells: 960,
            io_pins: 384,
            gzia_mode: GziaMode::Once,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
}

/// Parses a non-negative decimal such as `7.5` exactly.
pub fn parse_decimal(text: &str) -> Option<Nanos> {
    let text = text.trim();
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 9 {
        return None;
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let scale = 10i64.pow(frac.len() as u32);
    let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    Some(Ratio::new(int.checked_mul(scale)?.checked_add(frac)?, scale))
}

/// Exact decimal rendering with at least one fractional digit; values
/// without a short decimal expansion are rounded to six places.
pub fn format_decimal(r: Nanos) -> String {
    let neg = r < Ratio::from_integer(0);
    let r = if neg { -r } else { r };
    let mut digits = 1;
    while digits < 6 && !(r * Ratio::from_integer(10i64.pow(digits))).is_integer() {
        digits += 1;
    }
    let scale = 10i64.pow(digits);
    let scaled = (r * Ratio::from_integer(scale)).round().to_integer();
    let mut frac = format!("{:0width$}", scaled % scale, width = digits as usize);
    while frac.len() > 1 && frac.ends_with('0') {
        frac.pop();
    }
    format!("{}{}.{}", if neg { "-" } else { "" }, scaled / scale, frac)
}

impl DeviceParams {
    /// Applies `key=value` lines over `self`. `#` starts a comment.
    pub fn apply_config(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue { line, key: key.to_string(), value: value.to_string() };
            let positive_ns = || parse_decimal(value).filter(|v| *v > Ratio::from_integer(0)).ok_or_else(bad);
            let count = || value.parse::<u32>().ok().filter(|v| *v > 0).ok_or_else(bad);
            match key {
                "pal_delay_ns" => self.pal_delay_ns = positive_ns()?,
                "pla_extra_ns" => self.pla_extra_ns = positive_ns()?,
                "gzia_delay_ns" => self.gzia_delay_ns = positive_ns()?,
                "pt_per_macrocell" => self.pt_per_macrocell = count()?,
                "pla_pt_per_block" => self.pla_pt_per_block = count()?,
                "macrocells_per_block" => self.macrocells_per_block = count()?,
                "blocks_per_fast_module" => self.blocks_per_fast_module = count()?,
                "total_macrocells" => self.total_macrocells = count()?,
                "io_pins" => self.io_pins = count()?,
                "gzia_mode" => {
                    self.gzia_mode = match value {
                        "once" => GziaMode::Once,
                        "per_level" => GziaMode::PerLevel,
                        _ => return Err(bad()),
                    }
                }
                _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
            }
        }
        Ok(())
    }

    pub fn from_config(text: &str) -> Result<DeviceParams, ConfigError> {
        let mut p = DeviceParams::default();
        p.apply_config(text)?;
        Ok(p)
    }

    /// Largest cover one macrocell can realize: its own PAL terms plus the
    /// whole shared PLA of its block.
    pub fn max_cell_cubes(&self) -> usize {
        (self.pt_per_macrocell + self.pla_pt_per_block) as usize
    }

    pub fn blocks(&self) -> u32 {
        self.total_macrocells / self.macrocells_per_block
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitViolation {
    Macrocells { used: u32, available: u32 },
    Pins { used: u32, available: u32 },
    ProductTerms { blocks_needed: u32, available: u32 },
}

impl fmt::Display for FitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitViolation::Macrocells { used, available } => write!(f, "macrocells {used}/{available}"),
            FitViolation::Pins { used, available } => write!(f, "io_pins {used}/{available}"),
            FitViolation::ProductTerms { blocks_needed, available } => {
                write!(f, "logic_blocks {blocks_needed}/{available}")
            }
        }
    }
}

/// One macrocell after splitting oversized covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacedCell {
    pub name: String,
    pub cubes: u32,
    pub level: u32,
    pub uses_pla: bool,
    pub block: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockUsage {
    pub macrocells: u32,
    pub pla_terms: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitReport {
    pub name: String,
    pub macrocells_used: u32,
    /// Macrocell stages on the critical path (at least 1).
    pub levels: u32,
    pub pla_used_on_critical: bool,
    /// Stages on the critical path that draw shared PLA terms.
    pub pla_levels: u32,
    pub input_pins: u32,
    pub output_pins: u32,
    pub fits: bool,
    pub violation: Option<FitViolation>,
    pub latency_ns: Nanos,
    pub cells: Vec<PlacedCell>,
    pub blocks: Vec<BlockUsage>,
}

struct CellSpec {
    name: String,
    cubes: u32,
    reads: Vec<usize>,
}

/// Turns the mapped netlist into macrocells, splitting covers larger than
/// one cell into an OR tree.
fn expand_cells(n: &MappedNetlist, p: &DeviceParams) -> (Vec<CellSpec>, Vec<usize>) {
    let cap = p.max_cell_cubes().max(2);
    let mut cells: Vec<CellSpec> = Vec::new();
    let mut helper_cell: Vec<usize> = Vec::with_capacity(n.helpers.len());

    let place = |cells: &mut Vec<CellSpec>, name: &str, cover: &Sop, helper_cell: &[usize]| -> usize {
        let reads_of = |cubes: &[crate::synth::Cube]| -> Vec<usize> {
            let mut r: Vec<usize> = cubes
                .iter()
                .flat_map(|c| c.literals().iter())
                .filter_map(|l| match l.signal {
                    Signal::Helper(h) => Some(helper_cell[h as usize]),
                    Signal::Input(_) => None,
                })
                .collect();
            r.sort_unstable();
            r.dedup();
            r
        };
        let cubes = cover.cubes();
        if cubes.len() <= cap {
            cells.push(CellSpec { name: name.to_string(), cubes: cubes.len() as u32, reads: reads_of(cubes) });
            return cells.len() - 1;
        }
        let mut layer: Vec<usize> = cubes
            .chunks(cap)
            .enumerate()
            .map(|(k, chunk)| {
                cells.push(CellSpec { name: format!("{name}.p{k}"), cubes: chunk.len() as u32, reads: reads_of(chunk) });
                cells.len() - 1
            })
            .collect();
        let mut depth = 0;
        while layer.len() > cap {
            depth += 1;
            layer = layer
                .chunks(cap)
                .enumerate()
                .map(|(k, chunk)| {
                    cells.push(CellSpec { name: format!("{name}.t{depth}_{k}"), cubes: chunk.len() as u32, reads: chunk.to_vec() });
                    cells.len() - 1
                })
                .collect();
        }
        cells.push(CellSpec { name: name.to_string(), cubes: layer.len() as u32, reads: layer });
        cells.len() - 1
    };

    for h in &n.helpers {
        let idx = place(&mut cells, &h.name, &h.cover, &helper_cell);
        helper_cell.push(idx);
    }
    let mut outputs = Vec::with_capacity(n.outputs.len());
    for (j, o) in n.outputs.iter().enumerate() {
        let name = format!("{}b{}", n.output_set, j);
        let idx = match o {
            // buffers: one term passing the pin or the constant through
            OutputImpl::Const(_) | OutputImpl::Wire(_) => {
                cells.push(CellSpec { name, cubes: 1, reads: Vec::new() });
                cells.len() - 1
            }
            OutputImpl::Logic(s) => place(&mut cells, &name, s, &helper_cell),
        };
        outputs.push(idx);
    }
    (cells, outputs)
}

/// Delay contributed by one macrocell stage, excluding interconnect.
fn stage_delay(p: &DeviceParams, uses_pla: bool) -> Nanos {
    if uses_pla {
        p.pal_delay_ns + p.pla_extra_ns
    } else {
        p.pal_delay_ns
    }
}

/// Pin-to-pin latency of a path of `levels` stages, `pla_levels` of which
/// use shared PLA terms. Zero levels are charged as one buffer stage.
pub fn time(levels: u32, pla_levels: u32, p: &DeviceParams) -> Nanos {
    let levels = levels.max(1);
    let crossings = match p.gzia_mode {
        GziaMode::Once => 1,
        GziaMode::PerLevel => levels,
    };
    p.pal_delay_ns * Ratio::from_integer(levels as i64)
        + p.pla_extra_ns * Ratio::from_integer(pla_levels.min(levels) as i64)
        + p.gzia_delay_ns * Ratio::from_integer(crossings as i64)
}

/// Highest clock, in MHz, at which `latency_ns` fits in one period,
/// floored to 0.1 MHz.
pub fn max_clock_mhz(latency_ns: Nanos) -> Ratio<i64> {
    assert!(latency_ns > Ratio::from_integer(0), "latency must be positive");
    let tenths = (Ratio::from_integer(10_000) / latency_ns).floor().to_integer();
    Ratio::new(tenths, 10)
}

/// Fits a mapped netlist onto the device and times its critical path.
pub fn fit(n: &MappedNetlist, p: &DeviceParams) -> FitReport {
    let (specs, outputs) = expand_cells(n, p);
    let pal = p.pt_per_macrocell;

    // arrival time, level count and PLA stage count along the slowest path
    let mut arrival: Vec<(Nanos, u32, u32)> = Vec::with_capacity(specs.len());
    for s in &specs {
        let uses_pla = s.cubes > pal;
        let (t, l, q) = s
            .reads
            .iter()
            .map(|&r| arrival[r])
            .max()
            .unwrap_or((Ratio::from_integer(0), 0, 0));
        arrival.push((t + stage_delay(p, uses_pla), l + 1, q + uses_pla as u32));
    }
    let crit = outputs.iter().map(|&o| arrival[o]).max();
    // in per-level mode a deeper path may win once interconnect is added
    let (levels, pla_levels) = match p.gzia_mode {
        GziaMode::Once => crit.map_or((1, 0), |(_, l, q)| (l, q)),
        GziaMode::PerLevel => outputs
            .iter()
            .map(|&o| (time(arrival[o].1, arrival[o].2, p), arrival[o].1, arrival[o].2))
            .max()
            .map_or((1, 0), |(_, l, q)| (l, q)),
    };

    // canonical packing order: PLA demand descending, then name
    let mut order: Vec<usize> = (0..specs.len()).collect();
    let demand = |i: usize| specs[i].cubes.saturating_sub(pal);
    order.sort_by(|&a, &b| demand(b).cmp(&demand(a)).then_with(|| specs[a].name.cmp(&specs[b].name)));
    let mut blocks: Vec<BlockUsage> = Vec::new();
    let mut block_of = vec![0u32; specs.len()];
    for i in order {
        let d = demand(i);
        let slot = blocks
            .iter()
            .position(|b| b.macrocells < p.macrocells_per_block && b.pla_terms + d <= p.pla_pt_per_block);
        let b = match slot {
            Some(b) => b,
            None => {
                blocks.push(BlockUsage::default());
                blocks.len() - 1
            }
        };
        blocks[b].macrocells += 1;
        blocks[b].pla_terms += d;
        block_of[i] = b as u32;
    }

    let macrocells_used = specs.len() as u32;
    let input_pins = n.input_count() as u32;
    let output_pins = n.width.bits();
    let violation = if macrocells_used > p.total_macrocells {
        Some(FitViolation::Macrocells { used: macrocells_used, available: p.total_macrocells })
    } else if input_pins + output_pins > p.io_pins {
        Some(FitViolation::Pins { used: input_pins + output_pins, available: p.io_pins })
    } else if blocks.len() as u32 > p.blocks() {
        Some(FitViolation::ProductTerms { blocks_needed: blocks.len() as u32, available: p.blocks() })
    } else {
        None
    };

    let cells = specs
        .iter()
        .enumerate()
        .map(|(i, s)| PlacedCell {
            name: s.name.clone(),
            cubes: s.cubes,
            level: arrival[i].1,
            uses_pla: s.cubes > pal,
            block: block_of[i],
        })
        .collect();

    FitReport {
        name: n.name.clone(),
        macrocells_used,
        levels: levels.max(1),
        pla_used_on_critical: pla_levels > 0,
        pla_levels,
        input_pins,
        output_pins,
        fits: violation.is_none(),
        violation,
        latency_ns: time(levels, pla_levels, p),
        cells,
        blocks,
    }
}

impl FitReport {
    pub fn max_clock_mhz(&self) -> Ratio<i64> {
        max_clock_mhz(self.latency_ns)
    }

    /// `key=value` report text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "design={}", self.name);
        let _ = writeln!(out, "fits={}", self.fits);
        let _ = writeln!(out, "violation={}", self.violation.map_or("none".to_string(), |v| v.to_string()));
        let _ = writeln!(out, "macrocells={}", self.macrocells_used);
        let _ = writeln!(out, "levels={}", self.levels);
        let _ = writeln!(out, "pla_used={}", self.pla_used_on_critical);
        let _ = writeln!(out, "pla_levels={}", self.pla_levels);
        let _ = writeln!(out, "input_pins={}", self.input_pins);
        let _ = writeln!(out, "output_pins={}", self.output_pins);
        let _ = writeln!(out, "latency_ns={}", format_decimal(self.latency_ns));
        let _ = writeln!(out, "max_clock_mhz={}", format_decimal(self.max_clock_mhz()));
        let _ = writeln!(out, "blocks={}", self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(out, "block{i}=macrocells:{},pla_terms:{}", b.macrocells, b.pla_terms);
        }
        out
    }

    /// Reads the scalar fields back from [`render`](Self::render) output.
    pub fn parse_summary(text: &str) -> HashMap<String, String> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Cell, Cube, Literal};
    use crate::word::WordWidth;

    fn ns(num: i64, den: i64) -> Nanos {
        Ratio::new(num, den)
    }

    fn cover(n: u32) -> Sop {
        Sop((0..n).map(|i| Cube::literal(Literal::pos(Signal::Input(i)))).collect())
    }

    fn netlist(outputs: Vec<OutputImpl>, helpers: Vec<Cell>) -> MappedNetlist {
        MappedNetlist {
            name: "t".into(),
            width: WordWidth::new(outputs.len() as u8).unwrap(),
            input_sets: vec!["R1".into()],
            output_set: "Rout2".into(),
            helpers,
            outputs,
        }
    }

    #[test]
    fn timing_points() {
        let p = DeviceParams::default();
        assert_eq!(time(1, 0, &p), ns(23, 2));
        assert_eq!(time(1, 1, &p), ns(13, 1));
        assert_eq!(time(0, 0, &p), ns(23, 2));
        assert_eq!(time(2, 0, &p), ns(19, 1));
        assert_eq!(max_clock_mhz(ns(23, 2)), ns(869, 10));
        assert_eq!(max_clock_mhz(ns(25, 1)), ns(40, 1));
        assert_eq!(max_clock_mhz(ns(1000, 1)), ns(1, 1));
    }

    #[test]
    fn decimals() {
        assert_eq!(parse_decimal("7.5"), Some(ns(15, 2)));
        assert_eq!(parse_decimal("4"), Some(ns(4, 1)));
        assert_eq!(parse_decimal("x"), None);
        assert_eq!(format_decimal(ns(23, 2)), "11.5");
        assert_eq!(format_decimal(ns(25, 1)), "25.0");
        assert_eq!(format_decimal(ns(1000, 85)), "11.764706");
    }

    #[test]
    fn config_overrides() {
        let p = DeviceParams::from_config("pal_delay_ns = 10\n# comment\ngzia_mode=per_level\n").unwrap();
        assert_eq!(p.pal_delay_ns, ns(10, 1));
        assert_eq!(p.gzia_mode, GziaMode::PerLevel);
        assert!(matches!(DeviceParams::from_config("nope=1"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(DeviceParams::from_config("io_pins=0"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn buffers_and_pla() {
        let p = DeviceParams::default();
        let r = fit(&netlist(vec![OutputImpl::Wire(0), OutputImpl::Const(false)], vec![]), &p);
        assert_eq!((r.macrocells_used, r.levels, r.pla_used_on_critical), (2, 1, false));
        assert_eq!(r.latency_ns, ns(23, 2));

        let r = fit(&netlist(vec![OutputImpl::Logic(cover(5)), OutputImpl::Const(true)], vec![]), &p);
        assert!(r.pla_used_on_critical);
        assert_eq!(r.latency_ns, ns(13, 1));
        assert_eq!(r.blocks[0].pla_terms, 1);
    }

    #[test]
    fn helper_adds_level_and_split_adds_tree() {
        let p = DeviceParams::default();
        let h = Cell { name: "H0".into(), cover: cover(3) };
        let uses_h = Sop(vec![Cube::literal(Literal::pos(Signal::Helper(0)))]);
        let r = fit(&netlist(vec![OutputImpl::Logic(uses_h)], vec![h]), &p);
        assert_eq!((r.macrocells_used, r.levels), (2, 2));
        assert_eq!(r.latency_ns, ns(19, 1));

        let wide = Sop((0..40).map(|i| Cube::literal(Literal::pos(Signal::Input(i % 32)))).collect::<Vec<_>>());
        let n = MappedNetlist { width: WordWidth::new(1).unwrap(), ..netlist(vec![OutputImpl::Logic(wide)], vec![]) };
        let r = fit(&n, &p);
        assert_eq!(r.macrocells_used, 3);
        assert_eq!(r.levels, 2);
    }

    #[test]
    fn empty_netlist() {
        let n = MappedNetlist {
            name: "e".into(),
            width: WordWidth::W32,
            input_sets: vec![],
            output_set: "Rout1".into(),
            helpers: vec![],
            outputs: vec![],
        };
        let r = fit(&n, &DeviceParams::default());
        assert_eq!(r.macrocells_used, 0);
        assert!(r.fits);
    }

    #[test]
    fn pla_budget_respected() {
        let p = DeviceParams::default();
        let outputs = (0..8).map(|_| OutputImpl::Logic(cover(20))).collect();
        let r = fit(&netlist(outputs, vec![]), &p);
        assert!(r.blocks.iter().all(|b| b.pla_terms <= 32 && b.macrocells <= 20));
        assert_eq!(r.blocks.len(), 4);
    }
}
