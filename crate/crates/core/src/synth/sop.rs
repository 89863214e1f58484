//! Sum-of-products covers over netlist signals.

use thiserror::Error;

use super::expr::{BitExpr, ExprArena, ExprId};

/// Something a product term can read: an input pin or the output of a
/// helper macrocell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Signal {
    Input(u32),
    Helper(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub signal: Signal,
    pub positive: bool,
}

impl Literal {
    pub fn pos(signal: Signal) -> Literal {
        Literal { signal, positive: true }
    }

    pub fn neg(signal: Signal) -> Literal {
        Literal { signal, positive: false }
    }

    pub fn negate(self) -> Literal {
        Literal { positive: !self.positive, ..self }
    }
}

/// A conjunction of literals, sorted, no signal twice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cube(Vec<Literal>);

impl Cube {
    pub fn new(mut lits: Vec<Literal>) -> Option<Cube> {
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].signal == w[1].signal) {
            return None;
        }
        Some(Cube(lits))
    }

    pub fn literal(l: Literal) -> Cube {
        Cube(vec![l])
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Conjunction; `None` when the result contains `x & !x`.
    pub fn and(&self, other: &Cube) -> Option<Cube> {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].signal.cmp(&b[j].signal) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    if a[i].positive != b[j].positive {
                        return None;
                    }
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Some(Cube(out))
    }

    /// Every literal of `self` appears in `other`, so `self` covers `other`.
    pub fn contains(&self, other: &Cube) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|l| it.any(|m| m == l))
    }

    pub fn eval(&self, value: impl Fn(Signal) -> bool) -> bool {
        self.0.iter().all(|l| value(l.signal) == l.positive)
    }

    pub fn eval_lanes(&self, value: impl Fn(Signal) -> u64) -> u64 {
        self.0.iter().fold(!0, |acc, l| {
            let v = value(l.signal);
            acc & if l.positive { v } else { !v }
        })
    }
}

/// A disjunction of cubes. The empty cover is FALSE; a cover holding the
/// empty cube is TRUE.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sop(pub Vec<Cube>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SopError {
    #[error("cover exceeds {limit} cubes")]
    CubeBlowup { limit: usize },
}

impl Sop {
    pub fn falsity() -> Sop {
        Sop(Vec::new())
    }

    pub fn truth() -> Sop {
        Sop(vec![Cube::default()])
    }

    pub fn literal(l: Literal) -> Sop {
        Sop(vec![Cube::literal(l)])
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Some` when the cover is a single literal.
    pub fn as_literal(&self) -> Option<Literal> {
        match self.0.as_slice() {
            [c] if c.len() == 1 => Some(c.0[0]),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<bool> {
        match self.0.as_slice() {
            [] => Some(false),
            [c] if c.is_empty() => Some(true),
            _ => None,
        }
    }

    /// Duplicate removal and single-cube containment.
    fn absorb(mut cubes: Vec<Cube>) -> Sop {
        cubes.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        cubes.dedup();
        let mut kept: Vec<Cube> = Vec::with_capacity(cubes.len());
        for c in cubes {
            if !kept.iter().any(|k| k.contains(&c)) {
                kept.push(c);
            }
        }
        kept.sort_unstable();
        Sop(kept)
    }

    pub fn or(&self, other: &Sop, limit: usize) -> Option<Sop> {
        if self.len() + other.len() > 4 * limit.max(1) {
            return None;
        }
        let s = Sop::absorb(self.0.iter().chain(other.0.iter()).cloned().collect());
        (s.len() <= limit).then_some(s)
    }

    pub fn and(&self, other: &Sop, limit: usize) -> Option<Sop> {
        if self.len().saturating_mul(other.len()) > 4 * limit.max(1) {
            return None;
        }
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.0 {
            for b in &other.0 {
                if let Some(c) = a.and(b) {
                    out.push(c);
                }
            }
        }
        let s = Sop::absorb(out);
        (s.len() <= limit).then_some(s)
    }

    /// Complement by De Morgan expansion.
    pub fn not(&self, limit: usize) -> Option<Sop> {
        let mut acc = Sop::truth();
        for cube in &self.0 {
            let negated = Sop(cube.0.iter().map(|l| Cube::literal(l.negate())).collect());
            acc = acc.and(&negated, limit)?;
        }
        Some(acc)
    }

    pub fn xor(&self, other: &Sop, limit: usize) -> Option<Sop> {
        let na = self.not(limit)?;
        let nb = other.not(limit)?;
        let left = self.and(&nb, limit)?;
        let right = na.and(other, limit)?;
        left.or(&right, limit)
    }

    pub fn eval(&self, value: impl Fn(Signal) -> bool + Copy) -> bool {
        self.0.iter().any(|c| c.eval(value))
    }

    pub fn eval_lanes(&self, value: impl Fn(Signal) -> u64 + Copy) -> u64 {
        self.0.iter().fold(0, |acc, c| acc | c.eval_lanes(value))
    }

    /// Signals read by this cover, ascending, each once.
    pub fn signals(&self) -> Vec<Signal> {
        let mut s: Vec<Signal> = self.0.iter().flat_map(|c| c.0.iter().map(|l| l.signal)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Flattens a normalized expression into a cover over input literals,
/// giving up once any intermediate cover exceeds `limit` cubes.
pub fn to_sop(arena: &ExprArena, root: ExprId, limit: usize) -> Result<Sop, SopError> {
    let blowup = SopError::CubeBlowup { limit };
    let mut memo: std::collections::HashMap<ExprId, Sop> = Default::default();
    for id in arena.cone(&[root]) {
        let get = |x: &ExprId| memo[x].clone();
        let s = match arena.get(id) {
            BitExpr::Const(b) => {
                if *b {
                    Sop::truth()
                } else {
                    Sop::falsity()
                }
            }
            BitExpr::Input(i) => Sop::literal(Literal::pos(Signal::Input(*i))),
            BitExpr::Not(a) => memo[a].not(limit).ok_or(blowup.clone())?,
            BitExpr::And(c) => c[1..]
                .iter()
                .try_fold(get(&c[0]), |acc, x| acc.and(&memo[x], limit))
                .ok_or(blowup.clone())?,
            BitExpr::Or(c) => c[1..]
                .iter()
                .try_fold(get(&c[0]), |acc, x| acc.or(&memo[x], limit))
                .ok_or(blowup.clone())?,
            BitExpr::Xor(c) => c[1..]
                .iter()
                .try_fold(get(&c[0]), |acc, x| acc.xor(&memo[x], limit))
                .ok_or(blowup.clone())?,
        };
        memo.insert(id, s);
    }
    Ok(memo.remove(&root).expect("root is in its own cone"))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn lit(i: u32, pos: bool) -> Literal {
        Literal { signal: Signal::Input(i), positive: pos }
    }

    /// Truth-table comparison of a cover against the expression it came from.
    fn equivalent(arena: &ExprArena, root: ExprId, sop: &Sop, inputs: u32) {
        for v in 0..1u64 << inputs {
            let bit = |i: u32| v >> i & 1 == 1;
            let want = arena.eval(root, bit);
            let got = sop.eval(|s| match s {
                Signal::Input(i) => bit(i),
                Signal::Helper(_) => unreachable!(),
            });
            assert_eq!(want, got, "vector {v:b}");
        }
    }

    #[test]
    fn literal_and_xor() {
        let mut a = ExprArena::new();
        let x = a.input(0);
        let nx = a.not(x);
        assert_eq!(to_sop(&a, nx, 16).unwrap(), Sop::literal(lit(0, false)));

        let y = a.input(1);
        let e = a.xor(&[x, y]);
        let s = to_sop(&a, e, 16).unwrap();
        let want = Sop(vec![
            Cube::new(vec![lit(0, false), lit(1, true)]).unwrap(),
            Cube::new(vec![lit(0, true), lit(1, false)]).unwrap(),
        ]);
        assert_eq!(s, want);
    }

    #[test]
    fn xor_of_k_literals_has_2_pow_k_minus_1_cubes() {
        let mut a = ExprArena::new();
        for k in 2..=6u32 {
            let ins: Vec<_> = (0..k).map(|i| a.input(i)).collect();
            let e = a.xor(&ins);
            let s = to_sop(&a, e, 4096).unwrap();
            assert_eq!(s.len(), 1 << (k - 1));
            equivalent(&a, e, &s, k);
        }
    }

    #[test]
    fn three_bit_adder_carry_out() {
        let mut a = ExprArena::new();
        let xs: Vec<_> = (0..3).map(|i| a.input(i)).collect();
        let ys: Vec<_> = (3..6).map(|i| a.input(i)).collect();
        let mut carry = ExprArena::FALSE;
        for i in 0..3 {
            carry = a.majority(xs[i], ys[i], carry);
        }
        let s = to_sop(&a, carry, 4096).unwrap();
        equivalent(&a, carry, &s, 6);
    }

    #[test]
    fn blowup_reported() {
        let mut a = ExprArena::new();
        let ins: Vec<_> = (0..12).map(|i| a.input(i)).collect();
        let e = a.xor(&ins);
        assert_eq!(to_sop(&a, e, 64), Err(SopError::CubeBlowup { limit: 64 }));
    }

    #[test]
    fn absorption() {
        let c1 = Cube::new(vec![lit(0, true)]).unwrap();
        let c2 = Cube::new(vec![lit(0, true), lit(1, true)]).unwrap();
        let s = Sop(vec![c1.clone()]).or(&Sop(vec![c2, c1.clone()]), 8).unwrap();
        assert_eq!(s, Sop(vec![c1]));
        assert!(Cube::new(vec![lit(0, true), lit(0, false)]).is_none());
        assert_eq!(Sop::truth().not(8).unwrap(), Sop::falsity());
        assert_eq!(Sop::falsity().not(8).unwrap(), Sop::truth());
    }
}
