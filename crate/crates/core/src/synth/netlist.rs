//! The mapped netlist: macrocell covers over input pins and helper cells,
//! plus its text form (`.net`).

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::sop::{Cube, Literal, Signal, Sop};
use crate::word::WordWidth;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputImpl {
    Const(bool),
    /// Pure rewiring of an input pin.
    Wire(u32),
    Logic(Sop),
}

/// A helper macrocell whose output feeds other cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub name: String,
    pub cover: Sop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedNetlist {
    pub name: String,
    pub width: WordWidth,
    pub input_sets: Vec<String>,
    pub output_set: String,
    /// Topologically ordered: a helper only reads earlier helpers.
    pub helpers: Vec<Cell>,
    /// LSB first.
    pub outputs: Vec<OutputImpl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

impl MappedNetlist {
    pub fn input_name(&self, index: u32) -> String {
        let w = self.width.bits();
        format!("{}b{}", self.input_sets[(index / w) as usize], index % w)
    }

    pub fn input_count(&self) -> usize {
        self.input_sets.len() * self.width.bits() as usize
    }

    fn signal_name(&self, s: Signal) -> String {
        match s {
            Signal::Input(i) => self.input_name(i),
            Signal::Helper(h) => self.helpers[h as usize].name.clone(),
        }
    }

    /// Product terms spent on logic (wires and constants excluded).
    pub fn logic_product_terms(&self) -> usize {
        let out: usize = self
            .outputs
            .iter()
            .map(|o| match o {
                OutputImpl::Logic(s) => s.len(),
                _ => 0,
            })
            .sum();
        out + self.helpers.iter().map(|c| c.cover.len()).sum::<usize>()
    }

    pub fn is_pure_rewiring(&self) -> bool {
        self.helpers.is_empty() && self.outputs.iter().all(|o| matches!(o, OutputImpl::Wire(_)))
    }

    /// Evaluates up to 64 input vectors at once. `inputs[k][j]` carries the
    /// lanes of bit `j` of input set `k`; the result holds one lane word
    /// per output bit, LSB first.
    pub fn eval_lanes(&self, inputs: &[Vec<u64>]) -> Vec<u64> {
        let w = self.width.bits();
        let mut helper_vals: Vec<u64> = Vec::with_capacity(self.helpers.len());
        for cell in &self.helpers {
            let v = cell.cover.eval_lanes(|s| match s {
                Signal::Input(i) => inputs[(i / w) as usize][(i % w) as usize],
                Signal::Helper(h) => helper_vals[h as usize],
            });
            helper_vals.push(v);
        }
        self.outputs
            .iter()
            .map(|o| match o {
                OutputImpl::Const(b) => {
                    if *b {
                        !0
                    } else {
                        0
                    }
                }
                OutputImpl::Wire(i) => inputs[(i / w) as usize][(i % w) as usize],
                OutputImpl::Logic(s) => s.eval_lanes(|s| match s {
                    Signal::Input(i) => inputs[(i / w) as usize][(i % w) as usize],
                    Signal::Helper(h) => helper_vals[h as usize],
                }),
            })
            .collect()
    }

    /// Evaluates a batch of at most 64 input word tuples (one word per input
    /// set, in `input_sets` order).
    pub fn eval_batch(&self, vectors: &[Vec<u32>]) -> Vec<u32> {
        assert!(vectors.len() <= 64);
        let w = self.width.bits() as usize;
        let lanes: Vec<Vec<u64>> = (0..self.input_sets.len())
            .map(|k| {
                (0..w)
                    .map(|j| {
                        vectors
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (lane, v)| acc | (((v[k] >> j) & 1) as u64) << lane)
                    })
                    .collect()
            })
            .collect();
        let out = self.eval_lanes(&lanes);
        (0..vectors.len())
            .map(|lane| out.iter().enumerate().fold(0u32, |acc, (j, word)| acc | (((word >> lane) & 1) as u32) << j))
            .collect()
    }

    pub fn eval(&self, inputs: &[u32]) -> u32 {
        self.eval_batch(&[inputs.to_vec()])[0]
    }

    fn cover_text(&self, s: &Sop) -> String {
        let cubes: Vec<String> = s
            .cubes()
            .iter()
            .map(|c| {
                if c.is_empty() {
                    return "1".to_string();
                }
                c.literals()
                    .iter()
                    .map(|l| format!("{}{}", if l.positive { "" } else { "!" }, self.signal_name(l.signal)))
                    .collect::<Vec<_>>()
                    .join(" & ")
            })
            .collect();
        format!("SOP{{{}}}", cubes.join("; "))
    }

    /// Stable text dump, one line per helper and per output bit (MSB first).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "netlist {}", self.name);
        let _ = writeln!(out, "width {}", self.width);
        for set in &self.input_sets {
            let _ = writeln!(out, "input {set}");
        }
        let _ = writeln!(out, "output {}", self.output_set);
        for cell in &self.helpers {
            let _ = writeln!(out, "{} = {}", cell.name, self.cover_text(&cell.cover));
        }
        for (j, o) in self.outputs.iter().enumerate().rev() {
            let rhs = match o {
                OutputImpl::Const(b) => format!("CONST({})", *b as u8),
                OutputImpl::Wire(i) => format!("WIRE({})", self.input_name(*i)),
                OutputImpl::Logic(s) => self.cover_text(s),
            };
            let _ = writeln!(out, "{}b{} = {}", self.output_set, j, rhs);
        }
        out.push_str("end\n");
        out
    }

    /// Reads the format written by [`dump`](Self::dump).
    pub fn parse(text: &str) -> Result<MappedNetlist, NetlistParseError> {
        let err = |line: usize, msg: &str| NetlistParseError::Syntax { line, msg: msg.to_string() };
        let mut name = None;
        let mut width = None;
        let mut input_sets: Vec<String> = Vec::new();
        let mut output_set: Option<String> = None;
        let mut helpers: Vec<Cell> = Vec::new();
        let mut helper_index: HashMap<String, u32> = HashMap::new();
        let mut outputs: Vec<Option<OutputImpl>> = Vec::new();
        let mut ended = false;

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if ended {
                return Err(err(line_no, "text after `end`"));
            }
            if line == "end" {
                ended = true;
                continue;
            }
            if let Some((key, value)) = line.split_once(' ').filter(|(_, v)| !v.starts_with('=')) {
                match key {
                    "netlist" => name = Some(value.trim().to_string()),
                    "width" => {
                        let w = value
                            .trim()
                            .parse::<u8>()
                            .ok()
                            .and_then(WordWidth::new)
                            .ok_or_else(|| err(line_no, "bad width"))?;
                        width = Some(w);
                        outputs = vec![None; w.bits() as usize];
                    }
                    "input" => input_sets.push(value.trim().to_string()),
                    "output" => output_set = Some(value.trim().to_string()),
                    _ => return Err(err(line_no, "unknown header")),
                }
                continue;
            }
            let (lhs, rhs) = line.split_once('=').ok_or_else(|| err(line_no, "expected `=`"))?;
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            let w = width.ok_or_else(|| err(line_no, "width must come first"))?;
            let out_set = output_set.as_deref().ok_or_else(|| err(line_no, "output must come first"))?;

            let resolve = |pin: &str| -> Option<Signal> {
                if let Some(&h) = helper_index.get(pin) {
                    return Some(Signal::Helper(h));
                }
                let at = pin.rfind('b')?;
                let bit: u32 = pin[at + 1..].parse().ok()?;
                let k = input_sets.iter().position(|s| s == &pin[..at])? as u32;
                (bit < w.bits()).then_some(Signal::Input(k * w.bits() + bit))
            };
            let parse_cover = |text: &str| -> Option<Sop> {
                let body = text.strip_prefix("SOP{")?.strip_suffix('}')?;
                let mut cubes = Vec::new();
                for c in body.split(';').map(str::trim).filter(|c| !c.is_empty()) {
                    if c == "1" {
                        cubes.push(Cube::default());
                        continue;
                    }
                    let mut lits = Vec::new();
                    for l in c.split('&').map(str::trim) {
                        let (positive, pin) = match l.strip_prefix('!') {
                            Some(p) => (false, p.trim()),
                            None => (true, l),
                        };
                        lits.push(Literal { signal: resolve(pin)?, positive });
                    }
                    cubes.push(Cube::new(lits)?);
                }
                Some(Sop(cubes))
            };

            let output_bit = lhs
                .strip_prefix(out_set)
                .and_then(|r| r.strip_prefix('b'))
                .and_then(|b| b.parse::<usize>().ok());
            match output_bit {
                Some(j) if j < outputs.len() => {
                    let imp = if let Some(v) = rhs.strip_prefix("CONST(").and_then(|r| r.strip_suffix(')')) {
                        match v {
                            "0" => OutputImpl::Const(false),
                            "1" => OutputImpl::Const(true),
                            _ => return Err(err(line_no, "bad constant")),
                        }
                    } else if let Some(p) = rhs.strip_prefix("WIRE(").and_then(|r| r.strip_suffix(')')) {
                        match resolve(p) {
                            Some(Signal::Input(i)) => OutputImpl::Wire(i),
                            _ => return Err(err(line_no, "wire must name an input pin")),
                        }
                    } else {
                        OutputImpl::Logic(parse_cover(rhs).ok_or_else(|| err(line_no, "bad cover"))?)
                    };
                    if outputs[j].replace(imp).is_some() {
                        return Err(err(line_no, "output bit defined twice"));
                    }
                }
                Some(_) => return Err(err(line_no, "output bit out of range")),
                None => {
                    let cover = parse_cover(rhs).ok_or_else(|| err(line_no, "bad cover"))?;
                    if helper_index.contains_key(lhs) {
                        return Err(err(line_no, "helper defined twice"));
                    }
                    helper_index.insert(lhs.to_string(), helpers.len() as u32);
                    helpers.push(Cell { name: lhs.to_string(), cover });
                }
            }
        }
        if !ended {
            return Err(err(text.lines().count(), "missing `end`"));
        }
        let outputs = outputs
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| err(0, "not every output bit is defined"))?;
        Ok(MappedNetlist {
            name: name.ok_or_else(|| err(0, "missing netlist name"))?,
            width: width.ok_or_else(|| err(0, "missing width"))?,
            input_sets,
            output_set: output_set.ok_or_else(|| err(0, "missing output"))?,
            helpers,
            outputs,
        })
    }
}
