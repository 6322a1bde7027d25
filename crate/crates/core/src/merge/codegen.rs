use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::ir::{
    unassigned_uses, validate_function, Block, Function, Inst, Literal, Module, Opcode, Operand, Param, Provenance,
    Reg, Type,
};

use super::align::{align, AlignEntry, AlignParams, Alignment};
use super::linearize::linearize;
use super::params::{merge_parameters, ParamMap};

/// Pairs aligning less than this fraction of their instructions are
/// rejected before code generation.
pub const MIN_ALIGNED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeOptions {
    pub align: AlignParams,
    /// Linearizations tried per side.
    pub seeds: u64,
    pub min_aligned_fraction: f64,
}

impl Default for MergeOptions {
    fn default() -> Self {
        MergeOptions { align: AlignParams::default(), seeds: 4, min_aligned_fraction: MIN_ALIGNED_FRACTION }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    /// Instructions emitted once for both parents.
    pub shared: usize,
    pub only1: usize,
    pub only2: usize,
    /// Operand and condition multiplexers.
    pub selects: usize,
    /// Dispatch branches, jumps, negations and zero initialisations.
    pub glue: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedFunction {
    pub function: Function,
    pub parents: (String, String),
    pub params: ParamMap,
    pub alignment: Alignment,
    /// Linearization seeds of (f1, f2) behind `alignment`.
    pub seeds: (u64, u64),
    pub stats: MergeStats,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("@{0} and @{1} cannot be merged: {2}")]
    Incompatible(String, String, String),
    #[error("aligned fraction {fraction:.3} is below {threshold}")]
    BelowThreshold { fraction: f64, threshold: f64 },
    #[error("merged body is invalid: {0}")]
    Invalid(String),
}

struct Classes {
    parent: Vec<usize>,
    has1: Vec<Option<usize>>,
    has2: Vec<Option<usize>>,
    ty: Vec<Type>,
}

impl Classes {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two classes unless that would put two registers of the same
    /// parent, or two types, in one class.
    fn try_union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        if self.ty[ra] != self.ty[rb]
            || (self.has1[ra].is_some() && self.has1[rb].is_some())
            || (self.has2[ra].is_some() && self.has2[rb].is_some())
        {
            return false;
        }
        self.parent[rb] = ra;
        self.has1[ra] = self.has1[ra].or(self.has1[rb]);
        self.has2[ra] = self.has2[ra].or(self.has2[rb]);
        true
    }
}

#[derive(Clone, Copy)]
struct Node {
    i1: Option<(usize, usize)>,
    i2: Option<(usize, usize)>,
}

struct EBlock {
    label: String,
    insts: Vec<Inst>,
    /// Ends in a jump introduced here rather than taken from a parent.
    synthetic: bool,
}

fn unique(base: &str, used: &mut BTreeSet<String>) -> String {
    let mut name = base.to_owned();
    let mut k = 2;
    while used.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    used.insert(name.clone());
    name
}

struct Gen<'a> {
    m: &'a Module,
    f1: &'a Function,
    f2: &'a Function,
    ids1: HashMap<Reg, usize>,
    ids2: HashMap<Reg, usize>,
    classes: Classes,
    class_name: HashMap<usize, String>,
    regs_used: BTreeSet<String>,
    fsel: Reg,
    node_of1: HashMap<(usize, usize), usize>,
    node_of2: HashMap<(usize, usize), usize>,
    node_label: Vec<String>,
    dispatch: Vec<EBlock>,
    dispatch_of: HashMap<(String, String), String>,
    labels_used: BTreeSet<String>,
    selects: usize,
    tmp: usize,
}

impl Gen<'_> {
    fn map(&mut self, side: u8, op: &Operand) -> Operand {
        match op {
            Operand::Lit(l) => Operand::Lit(*l),
            Operand::Reg(r) => Operand::Reg(self.reg(side, r)),
        }
    }

    fn reg(&mut self, side: u8, r: &Reg) -> Reg {
        let id = if side == 1 { self.ids1[r] } else { self.ids2[r] };
        let c = self.classes.find(id);
        Reg::new(self.class_name[&c].clone())
    }

    fn fresh(&mut self, prefix: &str) -> Reg {
        loop {
            self.tmp += 1;
            let name = format!("{prefix}{}", self.tmp);
            if self.regs_used.insert(name.clone()) {
                return Reg::new(name);
            }
        }
    }

    fn pick(&mut self, ty: Type, a: Operand, b: Operand, out: &mut Vec<Inst>) -> Operand {
        if a == b {
            return a;
        }
        let t = self.fresh("__s");
        out.push(Inst::select(t.clone(), ty, Operand::Reg(self.fsel.clone()), a, b));
        self.selects += 1;
        Operand::Reg(t)
    }

    fn target(&self, side: u8, label: &str) -> String {
        let (f, nodes) = if side == 1 { (self.f1, &self.node_of1) } else { (self.f2, &self.node_of2) };
        let b = f.block_index(label).expect("validated target");
        self.node_label[nodes[&(b, 0)]].clone()
    }

    fn dispatch_block(&mut self, a: String, b: String) -> String {
        if a == b {
            return a;
        }
        if let Some(l) = self.dispatch_of.get(&(a.clone(), b.clone())) {
            return l.clone();
        }
        let label = unique("__d", &mut self.labels_used);
        self.dispatch.push(EBlock {
            label: label.clone(),
            insts: vec![Inst::br(Operand::Reg(self.fsel.clone()), a.clone(), b.clone())],
            synthetic: false,
        });
        self.dispatch_of.insert((a, b), label.clone());
        label
    }

    fn inst1(&self, at: (usize, usize)) -> &Inst {
        &self.f1.blocks[at.0].insts[at.1]
    }

    fn inst2(&self, at: (usize, usize)) -> &Inst {
        &self.f2.blocks[at.0].insts[at.1]
    }

    /// One parent's instruction, renamed into the merged namespace.
    fn single(&mut self, side: u8, at: (usize, usize)) -> EBlock {
        let inst = if side == 1 { self.inst1(at).clone() } else { self.inst2(at).clone() };
        let mut out = inst.clone();
        out.operands = inst.operands.iter().map(|o| self.map(side, o)).collect();
        out.dest = inst.dest.as_ref().map(|d| self.reg(side, d));
        out.targets = inst.targets.iter().map(|t| self.target(side, t)).collect();
        let mut insts = vec![out];
        let mut synthetic = false;
        if !inst.is_terminator() {
            let nodes = if side == 1 { &self.node_of1 } else { &self.node_of2 };
            let next = self.node_label[nodes[&(at.0, at.1 + 1)]].clone();
            insts.push(Inst::jmp(next));
            synthetic = true;
        }
        EBlock { label: String::new(), insts, synthetic }
    }

    fn shared(&mut self, a1: (usize, usize), a2: (usize, usize)) -> EBlock {
        let i1 = self.inst1(a1).clone();
        let i2 = self.inst2(a2).clone();
        let mut insts = Vec::new();
        let fsel = Operand::Reg(self.fsel.clone());
        match i1.opcode {
            Opcode::Jmp => {
                let (t1, t2) = (self.target(1, &i1.targets[0]), self.target(2, &i2.targets[0]));
                if t1 == t2 {
                    insts.push(Inst::jmp(t1));
                } else {
                    insts.push(Inst::br(fsel, t1, t2));
                }
                return EBlock { label: String::new(), insts, synthetic: false };
            }
            Opcode::Br => {
                let (tt1, ff1) = (self.target(1, &i1.targets[0]), self.target(1, &i1.targets[1]));
                let (tt2, ff2) = (self.target(2, &i2.targets[0]), self.target(2, &i2.targets[1]));
                let c1 = self.map(1, &i1.operands[0]);
                let c2 = self.map(2, &i2.operands[0]);
                let straight = usize::from(tt1 != tt2) + usize::from(ff1 != ff2);
                let swapped = usize::from(tt1 != ff2) + usize::from(ff1 != tt2);
                let (cond2, t_pair, f_pair) = if swapped < straight {
                    let n = self.fresh("__n");
                    insts.push(Inst::binary(Opcode::Xor, n.clone(), Type::I1, c2, Operand::Lit(Literal::Bool(true))));
                    (Operand::Reg(n), (tt1, ff2), (ff1, tt2))
                } else {
                    (c2, (tt1, tt2), (ff1, ff2))
                };
                let c = self.pick(Type::I1, c1, cond2, &mut insts);
                let t = self.dispatch_block(t_pair.0, t_pair.1);
                let f = self.dispatch_block(f_pair.0, f_pair.1);
                insts.push(Inst::br(c, t, f));
                return EBlock { label: String::new(), insts, synthetic: false };
            }
            _ => {}
        }
        let mut out = i1.clone();
        out.operands.clear();
        for k in 0..i1.operands.len() {
            let o1 = self.map(1, &i1.operands[k]);
            let o2 = self.map(2, &i2.operands[k]);
            let ty = i1.operand_type(k, self.m).expect("typed operand");
            let o = self.pick(ty, o1, o2, &mut insts);
            out.operands.push(o);
        }
        out.dest = i1.dest.as_ref().map(|d| self.reg(1, d));
        insts.push(out);
        if i1.opcode == Opcode::Ret {
            return EBlock { label: String::new(), insts, synthetic: false };
        }
        let n1 = self.node_label[self.node_of1[&(a1.0, a1.1 + 1)]].clone();
        let n2 = self.node_label[self.node_of2[&(a2.0, a2.1 + 1)]].clone();
        if n1 == n2 {
            insts.push(Inst::jmp(n1));
            EBlock { label: String::new(), insts, synthetic: true }
        } else {
            insts.push(Inst::br(fsel, n1, n2));
            EBlock { label: String::new(), insts, synthetic: false }
        }
    }
}

/// Emits the merged body for an alignment of two linearizations.
/// `f_sel = true` reproduces `f1`, `false` reproduces `f2`.
#[allow(clippy::too_many_arguments)]
pub fn merge_functions(
    m: &Module,
    f1: &Function,
    f2: &Function,
    lin1: &[(usize, usize)],
    lin2: &[(usize, usize)],
    alignment: &Alignment,
    params: &ParamMap,
    name: &str,
) -> Result<MergedFunction, MergeError> {
    if f1.ret != f2.ret {
        return Err(MergeError::Incompatible(f1.name.clone(), f2.name.clone(), "different return types".into()));
    }
    let types1 = f1.register_types();
    let types2 = f2.register_types();
    let n1 = types1.len();
    let ids1: HashMap<Reg, usize> = types1.keys().enumerate().map(|(i, r)| (r.clone(), i)).collect();
    let ids2: HashMap<Reg, usize> = types2.keys().enumerate().map(|(i, r)| (r.clone(), n1 + i)).collect();
    let total = n1 + types2.len();
    let mut classes = Classes {
        parent: (0..total).collect(),
        has1: (0..total).map(|i| (i < n1).then_some(i)).collect(),
        has2: (0..total).map(|i| (i >= n1).then_some(i)).collect(),
        ty: types1.values().chain(types2.values()).copied().collect(),
    };
    for &(i, j) in &params.matched {
        let ok = classes.try_union(ids1[&f1.params[i].name], ids2[&f2.params[j].name]);
        debug_assert!(ok);
    }
    let inst_at1 = |p: usize| &f1.blocks[lin1[p].0].insts[lin1[p].1];
    let inst_at2 = |q: usize| &f2.blocks[lin2[q].0].insts[lin2[q].1];
    let mut nodes = Vec::with_capacity(alignment.entries.len());
    for e in &alignment.entries {
        match *e {
            AlignEntry::Aligned(p, q) => {
                let ok = match (&inst_at1(p).dest, &inst_at2(q).dest) {
                    (Some(d1), Some(d2)) => classes.try_union(ids1[d1], ids2[d2]),
                    (None, None) => true,
                    _ => false,
                };
                if ok {
                    nodes.push(Node { i1: Some(lin1[p]), i2: Some(lin2[q]) });
                } else {
                    nodes.push(Node { i1: Some(lin1[p]), i2: None });
                    nodes.push(Node { i1: None, i2: Some(lin2[q]) });
                }
            }
            AlignEntry::Gap2(p) => nodes.push(Node { i1: Some(lin1[p]), i2: None }),
            AlignEntry::Gap1(q) => nodes.push(Node { i1: None, i2: Some(lin2[q]) }),
        }
    }

    // Register names: parent-1 names win, parent-2-only classes are renamed
    // on collision.
    let mut regs_used = BTreeSet::new();
    let mut class_name = HashMap::new();
    let regs1: Vec<&Reg> = types1.keys().collect();
    let regs2: Vec<&Reg> = types2.keys().collect();
    for id in 0..total {
        let c = classes.find(id);
        if class_name.contains_key(&c) {
            continue;
        }
        if let Some(r1) = classes.has1[c] {
            regs_used.insert(regs1[r1].0.clone());
            class_name.insert(c, regs1[r1].0.clone());
        }
    }
    for id in 0..total {
        let c = classes.find(id);
        if class_name.contains_key(&c) {
            continue;
        }
        let r2 = classes.has2[c].unwrap() - n1;
        let name = unique(regs2[r2].as_str(), &mut regs_used);
        class_name.insert(c, name);
    }
    let fsel = Reg::new(unique("f_sel", &mut regs_used));

    let mut node_of1 = HashMap::new();
    let mut node_of2 = HashMap::new();
    for (k, n) in nodes.iter().enumerate() {
        if let Some(a) = n.i1 {
            node_of1.insert(a, k);
        }
        if let Some(a) = n.i2 {
            node_of2.insert(a, k);
        }
    }
    let mut labels_used: BTreeSet<String> = f1.blocks.iter().map(|b| b.label.clone()).collect();
    let labels2: Vec<String> = f2
        .blocks
        .iter()
        .map(|b| if labels_used.contains(&b.label) { unique(&b.label, &mut labels_used) } else { b.label.clone() })
        .collect();
    labels_used.extend(labels2.iter().cloned());
    let node_label: Vec<String> = nodes
        .iter()
        .map(|n| match (n.i1, n.i2) {
            (Some((b, 0)), _) => f1.blocks[b].label.clone(),
            (_, Some((b, 0))) => labels2[b].clone(),
            _ => unique("__n", &mut labels_used),
        })
        .collect();

    let mut g = Gen {
        m,
        f1,
        f2,
        ids1,
        ids2,
        classes,
        class_name,
        regs_used,
        fsel: fsel.clone(),
        node_of1,
        node_of2,
        node_label,
        dispatch: Vec::new(),
        dispatch_of: HashMap::new(),
        labels_used,
        selects: 0,
        tmp: 0,
    };
    let mut blocks: Vec<EBlock> = Vec::with_capacity(nodes.len() + 1);
    let mut stats = MergeStats::default();
    for (k, n) in nodes.iter().enumerate() {
        let mut b = match (n.i1, n.i2) {
            (Some(a1), Some(a2)) => {
                stats.shared += 1;
                g.shared(a1, a2)
            }
            (Some(a1), None) => {
                stats.only1 += 1;
                g.single(1, a1)
            }
            (None, Some(a2)) => {
                stats.only2 += 1;
                g.single(2, a2)
            }
            (None, None) => unreachable!(),
        };
        b.label = g.node_label[k].clone();
        blocks.push(b);
    }
    let e1 = g.node_of1[&(0, 0)];
    let e2 = g.node_of2[&(0, 0)];
    let entry_label = if e1 == e2 {
        let b = blocks.remove(e1);
        let l = b.label.clone();
        blocks.insert(0, b);
        l
    } else {
        let l = unique("__entry", &mut g.labels_used);
        let (a, b) = (g.node_label[e1].clone(), g.node_label[e2].clone());
        blocks.insert(
            0,
            EBlock { label: l.clone(), insts: vec![Inst::br(Operand::Reg(fsel.clone()), a, b)], synthetic: false },
        );
        l
    };
    blocks.append(&mut g.dispatch);

    // Fold synthetic jumps into single-predecessor successors.
    let mut preds: HashMap<String, usize> = HashMap::new();
    for b in &blocks {
        for t in b.insts.last().map(|i| i.targets.as_slice()).unwrap_or(&[]) {
            *preds.entry(t.clone()).or_default() += 1;
        }
    }
    let index: HashMap<String, usize> = blocks.iter().enumerate().map(|(i, b)| (b.label.clone(), i)).collect();
    let mut slots: Vec<Option<EBlock>> = blocks.into_iter().map(Some).collect();
    for i in 0..slots.len() {
        loop {
            let Some(cur) = slots[i].as_ref() else { break };
            if !cur.synthetic {
                break;
            }
            let t = cur.insts.last().unwrap().targets[0].clone();
            let j = index[&t];
            if j == i || t == entry_label || preds[&t] != 1 || slots[j].is_none() {
                break;
            }
            let next = slots[j].take().unwrap();
            let cur = slots[i].as_mut().unwrap();
            cur.insts.pop();
            cur.insts.extend(next.insts);
            cur.synthetic = next.synthetic;
        }
    }
    let mut function = Function {
        name: name.to_owned(),
        params: Vec::new(),
        ret: f1.ret,
        blocks: slots.into_iter().flatten().map(|b| Block::new(b.label, b.insts)).collect(),
        provenance: Provenance::Merged,
    };
    let mut merged_params = Vec::with_capacity(params.merged_arity());
    for &(i, _) in &params.matched {
        merged_params.push(Param { name: g.reg(1, &f1.params[i].name), ty: f1.params[i].ty });
    }
    for &i in &params.unmatched1 {
        merged_params.push(Param { name: g.reg(1, &f1.params[i].name), ty: f1.params[i].ty });
    }
    for &j in &params.unmatched2 {
        merged_params.push(Param { name: g.reg(2, &f2.params[j].name), ty: f2.params[j].ty });
    }
    merged_params.push(Param { name: fsel, ty: Type::I1 });
    function.params = merged_params;

    // Registers read before any write on some merged path are dead on the
    // paths that matter; give them a value so the body validates.
    let undefined: BTreeSet<Reg> = unassigned_uses(&function).into_iter().map(|(_, _, r)| r).collect();
    if !undefined.is_empty() {
        let types = function.register_types();
        let inits: Vec<Inst> = undefined.iter().map(|r| Inst::constant(r.clone(), types[r], types[r].zero())).collect();
        function.blocks[0].insts.splice(0..0, inits);
    }
    let errors = validate_function(m, &function);
    if !errors.is_empty() {
        let msg: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
        return Err(MergeError::Invalid(msg.join("; ")));
    }
    stats.selects = g.selects;
    stats.glue = function.size() - stats.shared - stats.only1 - stats.only2 - stats.selects;
    Ok(MergedFunction {
        function,
        parents: (f1.name.clone(), f2.name.clone()),
        params: params.clone(),
        alignment: alignment.clone(),
        seeds: (0, 0),
        stats,
    })
}

/// Best-scoring alignment over the sampled linearizations, then codegen.
pub fn merge_pair(
    m: &Module,
    f1: &str,
    f2: &str,
    name: &str,
    opts: &MergeOptions,
) -> Result<MergedFunction, MergeError> {
    let missing = |n: &str| MergeError::Incompatible(f1.into(), f2.into(), format!("no function @{n}"));
    let a = m.function(f1).ok_or_else(|| missing(f1))?;
    let b = m.function(f2).ok_or_else(|| missing(f2))?;
    if a.ret != b.ret {
        return Err(MergeError::Incompatible(f1.into(), f2.into(), "different return types".into()));
    }
    let seeds = opts.seeds.max(1);
    let mut pairs: Vec<(u64, u64)> = (0..seeds).map(|s| (0, s)).collect();
    pairs.extend((1..seeds).map(|s| (s, 0)));
    let mut best: Option<(Alignment, (u64, u64), Vec<(usize, usize)>, Vec<(usize, usize)>)> = None;
    for (s1, s2) in pairs {
        let lin1 = linearize(a, s1);
        let lin2 = linearize(b, s2);
        let seq1: Vec<&Inst> = lin1.iter().map(|&(bb, i)| &a.blocks[bb].insts[i]).collect();
        let seq2: Vec<&Inst> = lin2.iter().map(|&(bb, i)| &b.blocks[bb].insts[i]).collect();
        let al = align(&seq1, &seq2, &opts.align);
        if best.as_ref().map_or(true, |(bst, ..)| al.score > bst.score) {
            best = Some((al, (s1, s2), lin1, lin2));
        }
    }
    let (al, seeds_used, lin1, lin2) = best.unwrap();
    let fraction = al.aligned_fraction();
    if fraction < opts.min_aligned_fraction {
        return Err(MergeError::BelowThreshold { fraction, threshold: opts.min_aligned_fraction });
    }
    let params = merge_parameters(a, b);
    let mut merged = merge_functions(m, a, b, &lin1, &lin2, &al, &params, name)?;
    merged.seeds = seeds_used;
    Ok(merged)
}
