//! Hash-consed boolean expressions over input pins.
//!
//! Every node is built through the smart constructors, which fold
//! constants, flatten associative operators, sort and deduplicate
//! children, and cancel complementary pairs. Ids are handed out in
//! creation order, so children always have smaller ids than parents.

use std::collections::HashMap;

pub type ExprId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BitExpr {
    Const(bool),
    /// Index into the netlist input list.
    Input(u32),
    Not(ExprId),
    And(Vec<ExprId>),
    Or(Vec<ExprId>),
    Xor(Vec<ExprId>),
}

#[derive(Debug, Clone)]
pub struct ExprArena {
    nodes: Vec<BitExpr>,
    interned: HashMap<BitExpr, ExprId>,
}

impl Default for ExprArena {
    fn default() -> Self {
        Self::new()
    }
}

impl ExprArena {
    pub const FALSE: ExprId = 0;
    pub const TRUE: ExprId = 1;

    pub fn new() -> ExprArena {
        let mut a = ExprArena { nodes: Vec::new(), interned: HashMap::new() };
        a.intern(BitExpr::Const(false));
        a.intern(BitExpr::Const(true));
        a
    }

    fn intern(&mut self, e: BitExpr) -> ExprId {
        if let Some(&id) = self.interned.get(&e) {
            return id;
        }
        let id = self.nodes.len() as ExprId;
        self.nodes.push(e.clone());
        self.interned.insert(e, id);
        id
    }

    pub fn get(&self, id: ExprId) -> &BitExpr {
        &self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&self, on: bool) -> ExprId {
        if on {
            Self::TRUE
        } else {
            Self::FALSE
        }
    }

    pub fn as_const(&self, id: ExprId) -> Option<bool> {
        match self.get(id) {
            BitExpr::Const(b) => Some(*b),
            _ => None,
        }
    }

    pub fn input(&mut self, index: u32) -> ExprId {
        self.intern(BitExpr::Input(index))
    }

    pub fn not(&mut self, a: ExprId) -> ExprId {
        match *self.get(a) {
            BitExpr::Const(b) => self.constant(!b),
            BitExpr::Not(inner) => inner,
            _ => self.intern(BitExpr::Not(a)),
        }
    }

    /// `x` and `!x` both present?
    fn has_complement(&self, sorted: &[ExprId]) -> bool {
        sorted.iter().any(|&c| match self.get(c) {
            BitExpr::Not(inner) => sorted.binary_search(inner).is_ok(),
            _ => false,
        })
    }

    fn and_or(&mut self, children: &[ExprId], is_and: bool) -> ExprId {
        // identity element is TRUE for And, FALSE for Or
        let identity = self.constant(is_and);
        let absorbing = self.constant(!is_and);
        let mut flat = Vec::with_capacity(children.len());
        for &c in children {
            match self.get(c) {
                BitExpr::Const(_) if c == identity => {}
                BitExpr::Const(_) => return absorbing,
                BitExpr::And(gc) if is_and => flat.extend_from_slice(gc),
                BitExpr::Or(gc) if !is_and => flat.extend_from_slice(gc),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        if self.has_complement(&flat) {
            return absorbing;
        }
        match flat.len() {
            0 => identity,
            1 => flat[0],
            _ if is_and => self.intern(BitExpr::And(flat)),
            _ => self.intern(BitExpr::Or(flat)),
        }
    }

    pub fn and(&mut self, children: &[ExprId]) -> ExprId {
        self.and_or(children, true)
    }

    pub fn or(&mut self, children: &[ExprId]) -> ExprId {
        self.and_or(children, false)
    }

    pub fn xor(&mut self, children: &[ExprId]) -> ExprId {
        let mut parity = false;
        let mut flat = Vec::with_capacity(children.len());
        let mut stack: Vec<ExprId> = children.to_vec();
        while let Some(c) = stack.pop() {
            match self.get(c) {
                BitExpr::Const(b) => parity ^= *b,
                BitExpr::Not(inner) => {
                    parity ^= true;
                    stack.push(*inner);
                }
                BitExpr::Xor(gc) => stack.extend_from_slice(gc),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        // x ^ x = 0
        let mut kept: Vec<ExprId> = Vec::with_capacity(flat.len());
        for c in flat {
            if kept.last() == Some(&c) {
                kept.pop();
            } else {
                kept.push(c);
            }
        }
        let base = match kept.len() {
            0 => Self::FALSE,
            1 => kept[0],
            _ => self.intern(BitExpr::Xor(kept)),
        };
        if parity {
            self.not(base)
        } else {
            base
        }
    }

    /// Majority of three, the ripple-carry function.
    pub fn majority(&mut self, a: ExprId, b: ExprId, c: ExprId) -> ExprId {
        let ab = self.and(&[a, b]);
        let ac = self.and(&[a, c]);
        let bc = self.and(&[b, c]);
        self.or(&[ab, ac, bc])
    }

    pub fn children(&self, id: ExprId) -> &[ExprId] {
        match self.get(id) {
            BitExpr::Const(_) | BitExpr::Input(_) => &[],
            BitExpr::Not(a) => std::slice::from_ref(a),
            BitExpr::And(c) | BitExpr::Or(c) | BitExpr::Xor(c) => c,
        }
    }

    /// Nodes reachable from `roots`, ascending by id (a topological order).
    pub fn cone(&self, roots: &[ExprId]) -> Vec<ExprId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<ExprId> = roots.to_vec();
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id as usize], true) {
                continue;
            }
            out.push(id);
            stack.extend_from_slice(self.children(id));
        }
        out.sort_unstable();
        out
    }

    /// Input indices a node depends on, ascending.
    pub fn support(&self, root: ExprId) -> Vec<u32> {
        let mut s: Vec<u32> = self
            .cone(&[root])
            .into_iter()
            .filter_map(|id| match self.get(id) {
                BitExpr::Input(i) => Some(*i),
                _ => None,
            })
            .collect();
        s.sort_unstable();
        s
    }

    /// Evaluates the cone of `roots` on 64 input vectors at once; bit `k` of
    /// each word belongs to vector `k`.
    pub fn eval_lanes(&self, roots: &[ExprId], input: impl Fn(u32) -> u64) -> Vec<u64> {
        self.eval_words(roots, 1, |i, _| input(i)).into_iter().map(|w| w[0]).collect()
    }

    /// Like [`eval_lanes`](Self::eval_lanes) over `words` consecutive
    /// 64-vector batches; `input(i, w)` supplies pin `i` in batch `w`.
    pub fn eval_words(&self, roots: &[ExprId], words: usize, input: impl Fn(u32, usize) -> u64) -> Vec<Vec<u64>> {
        let cone = self.cone(roots);
        let slot: HashMap<ExprId, usize> = cone.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        let mut val = vec![0u64; cone.len() * words];
        for (k, &id) in cone.iter().enumerate() {
            for w in 0..words {
                let at = |x: &ExprId| val[slot[x] * words + w];
                let v = match self.get(id) {
                    BitExpr::Const(b) => {
                        if *b {
                            !0
                        } else {
                            0
                        }
                    }
                    BitExpr::Input(i) => input(*i, w),
                    BitExpr::Not(a) => !at(a),
                    BitExpr::And(c) => c.iter().fold(!0, |acc, x| acc & at(x)),
                    BitExpr::Or(c) => c.iter().fold(0, |acc, x| acc | at(x)),
                    BitExpr::Xor(c) => c.iter().fold(0, |acc, x| acc ^ at(x)),
                };
                val[k * words + w] = v;
            }
        }
        roots
            .iter()
            .map(|r| {
                let k = slot[r];
                val[k * words..(k + 1) * words].to_vec()
            })
            .collect()
    }

    pub fn eval(&self, root: ExprId, input: impl Fn(u32) -> bool) -> bool {
        self.eval_lanes(&[root], |i| if input(i) { !0 } else { 0 })[0] & 1 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_folding() {
        let mut a = ExprArena::new();
        let x = a.input(0);
        let t = ExprArena::TRUE;
        let f = ExprArena::FALSE;
        assert_eq!(a.and(&[x, t]), x);
        assert_eq!(a.or(&[x, f]), x);
        assert_eq!(a.and(&[x, f]), f);
        assert_eq!(a.or(&[x, t]), t);
        let nx = a.not(x);
        assert_eq!(a.or(&[x, nx]), t);
        assert_eq!(a.and(&[nx, x]), f);
        assert_eq!(a.not(nx), x);
        assert_eq!(a.xor(&[x, x]), f);
        assert_eq!(a.xor(&[t, nx]), x);
        assert_eq!(a.and(&[]), t);
    }

    #[test]
    fn hash_consing_is_order_independent() {
        let mut a = ExprArena::new();
        let (x, y, z) = (a.input(0), a.input(1), a.input(2));
        let xy = a.and(&[x, y]);
        let e1 = a.and(&[xy, z]);
        let zy = a.and(&[z, y]);
        let e2 = a.and(&[x, zy]);
        assert_eq!(e1, e2);
        let nx = a.not(x);
        let p = a.xor(&[nx, y]);
        let q = a.xor(&[x, y]);
        assert_eq!(p, a.not(q));
    }

    #[test]
    fn subtract_from_one_is_an_inverter() {
        // 1 - (x & 1) over two bits, built as 1 + !b + 1
        let mut a = ExprArena::new();
        let x = a.input(0);
        let lhs = [ExprArena::TRUE, ExprArena::FALSE];
        let rhs = [x, ExprArena::FALSE];
        let mut carry = ExprArena::TRUE;
        let mut out = Vec::new();
        for i in 0..2 {
            let nb = a.not(rhs[i]);
            out.push(a.xor(&[lhs[i], nb, carry]));
            carry = a.majority(lhs[i], nb, carry);
        }
        assert_eq!(out[0], a.not(x));
        assert_eq!(out[1], ExprArena::FALSE);
    }
}
