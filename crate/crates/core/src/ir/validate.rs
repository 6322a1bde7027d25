use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::{Function, Inst, Literal, Module, Opcode, Operand, Reg, Type};

/// Position of an offending instruction (or block, when `index` is `None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub function: String,
    pub block: Option<String>,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub location: Option<Location>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            None => f.write_str(&self.message),
            Some(loc) => {
                write!(f, "in @{}", loc.function)?;
                if let Some(b) = &loc.block {
                    write!(f, ", block {b}")?;
                }
                if let Some(i) = loc.index {
                    write!(f, ", instruction {i}")?;
                }
                write!(f, ": {}", self.message)
            }
        }
    }
}

impl std::error::Error for ValidationError {}

struct Checker<'a> {
    module: &'a Module,
    func: &'a Function,
    reg_types: BTreeMap<Reg, Type>,
    errors: Vec<ValidationError>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, block: Option<&str>, index: Option<usize>, message: String) {
        self.errors.push(ValidationError {
            location: Some(Location {
                function: self.func.name.clone(),
                block: block.map(str::to_owned),
                index,
            }),
            message,
        });
    }

    fn operand_type(&self, op: &Operand) -> Option<Type> {
        match op {
            Operand::Reg(r) => self.reg_types.get(r).copied(),
            Operand::Lit(_) => None,
        }
    }

    fn expect(&mut self, label: &str, idx: usize, op: &Operand, want: Type) {
        match op {
            Operand::Reg(r) => match self.reg_types.get(r) {
                Some(t) if *t == want => {}
                Some(t) => {
                    let t = *t;
                    self.err(Some(label), Some(idx), format!("type mismatch: {r} is {t}, expected {want}"))
                }
                None => self.err(Some(label), Some(idx), format!("register {r} used before assignment")),
            },
            Operand::Lit(l) => {
                if !l.fits(want) {
                    self.err(Some(label), Some(idx), format!("literal {l} is not a valid {want}"))
                }
            }
        }
    }

    fn check_inst(&mut self, label: &str, idx: usize, inst: &Inst) {
        let arity = |n: usize| inst.operands.len() == n;
        let op = inst.opcode;
        let needs_dest = !matches!(op, Opcode::Store | Opcode::Br | Opcode::Jmp | Opcode::Ret | Opcode::Call);
        if needs_dest && inst.dest.is_none() {
            self.err(Some(label), Some(idx), format!("`{op}` requires a result register"));
        }
        if matches!(op, Opcode::Store | Opcode::Br | Opcode::Jmp | Opcode::Ret) && inst.dest.is_some() {
            self.err(Some(label), Some(idx), format!("`{op}` produces no value"));
        }
        if inst.pred.is_some() != matches!(op, Opcode::ICmp | Opcode::FCmp) {
            self.err(Some(label), Some(idx), "predicate only allowed on compares".into());
        }
        if inst.cast_to.is_some() != op.is_cast() {
            self.err(Some(label), Some(idx), "`to` type only allowed on casts".into());
        }
        if inst.callee.is_some() != (op == Opcode::Call) {
            self.err(Some(label), Some(idx), "callee only allowed on calls".into());
        }
        let want_targets = match op {
            Opcode::Br => 2,
            Opcode::Jmp => 1,
            _ => 0,
        };
        if inst.targets.len() != want_targets {
            self.err(Some(label), Some(idx), format!("`{op}` takes {want_targets} successor label(s)"));
        }
        for t in &inst.targets {
            if self.func.block(t).is_none() {
                self.err(Some(label), Some(idx), format!("undefined label {t}"));
            }
        }
        let ty = inst.ty;
        match op {
            _ if op.is_int_binary() || op.is_float_binary() => {
                if !arity(2) {
                    return self.err(Some(label), Some(idx), format!("`{op}` takes 2 operands"));
                }
                let ok = match ty {
                    Some(Type::F64) => op.is_float_binary(),
                    Some(Type::I32 | Type::I64) => op.is_int_binary(),
                    Some(Type::I1) => matches!(op, Opcode::And | Opcode::Or | Opcode::Xor),
                    _ => false,
                };
                if !ok {
                    return self.err(Some(label), Some(idx), format!("`{op}` not defined on {}", tyname(ty)));
                }
                let t = ty.unwrap();
                self.expect(label, idx, &inst.operands[0], t);
                self.expect(label, idx, &inst.operands[1], t);
            }
            Opcode::ICmp | Opcode::FCmp => {
                if !arity(2) {
                    return self.err(Some(label), Some(idx), format!("`{op}` takes 2 operands"));
                }
                let float = op == Opcode::FCmp;
                let pred_ok = inst.pred.map(|p| p.is_float() == float).unwrap_or(false);
                let ty_ok = match ty {
                    Some(Type::F64) => float,
                    Some(_) => !float,
                    None => false,
                };
                if !pred_ok || !ty_ok {
                    return self.err(Some(label), Some(idx), format!("invalid `{op}` predicate or type"));
                }
                let t = ty.unwrap();
                self.expect(label, idx, &inst.operands[0], t);
                self.expect(label, idx, &inst.operands[1], t);
            }
            Opcode::Select => {
                if !arity(3) || ty.is_none() {
                    return self.err(Some(label), Some(idx), "`select` takes a type and 3 operands".into());
                }
                self.expect(label, idx, &inst.operands[0], Type::I1);
                self.expect(label, idx, &inst.operands[1], ty.unwrap());
                self.expect(label, idx, &inst.operands[2], ty.unwrap());
            }
            Opcode::ZExt | Opcode::Trunc | Opcode::SIToFP | Opcode::FPToSI => {
                let (Some(from), Some(to)) = (ty, inst.cast_to) else {
                    return self.err(Some(label), Some(idx), format!("`{op}` needs source and target types"));
                };
                let rank = |t: Type| match t {
                    Type::I1 => 1,
                    Type::I32 => 32,
                    Type::I64 => 64,
                    _ => 0,
                };
                let ok = match op {
                    Opcode::ZExt => from.is_int() && to.is_int() && rank(from) < rank(to),
                    Opcode::Trunc => from.is_int() && to.is_int() && rank(from) > rank(to),
                    Opcode::SIToFP => matches!(from, Type::I32 | Type::I64) && to == Type::F64,
                    _ => from == Type::F64 && matches!(to, Type::I32 | Type::I64),
                };
                if !ok || !arity(1) {
                    return self.err(Some(label), Some(idx), format!("invalid cast `{op}` from {from} to {to}"));
                }
                self.expect(label, idx, &inst.operands[0], from);
            }
            Opcode::Load => {
                if !arity(1) || ty.is_none() {
                    return self.err(Some(label), Some(idx), "`load` takes a type and a pointer".into());
                }
                self.expect(label, idx, &inst.operands[0], Type::Ptr);
            }
            Opcode::Store => {
                if !arity(2) || ty.is_none() {
                    return self.err(Some(label), Some(idx), "`store` takes a type, a value and a pointer".into());
                }
                self.expect(label, idx, &inst.operands[0], ty.unwrap());
                self.expect(label, idx, &inst.operands[1], Type::Ptr);
            }
            Opcode::Gep => {
                if !arity(2) {
                    return self.err(Some(label), Some(idx), "`gep` takes a pointer and an index".into());
                }
                self.expect(label, idx, &inst.operands[0], Type::Ptr);
                match self.operand_type(&inst.operands[1]) {
                    Some(Type::I32 | Type::I64) => {}
                    None if matches!(inst.operands[1], Operand::Lit(Literal::Int(_))) => {}
                    _ => self.err(Some(label), Some(idx), "`gep` index must be i32 or i64".into()),
                }
            }
            Opcode::Const => {
                if !arity(1) || ty.is_none() {
                    return self.err(Some(label), Some(idx), "`const` takes a type and a literal".into());
                }
                match &inst.operands[0] {
                    Operand::Lit(l) if l.fits(ty.unwrap()) => {}
                    other => {
                        let t = ty.unwrap();
                        self.err(Some(label), Some(idx), format!("`const` operand {other} is not a {t} literal"))
                    }
                }
            }
            Opcode::Alloca => match inst.operands.as_slice() {
                [Operand::Lit(Literal::Int(n))] if (1..=1 << 20).contains(n) => {}
                _ => self.err(Some(label), Some(idx), "`alloca` takes a positive slot count".into()),
            },
            Opcode::Call => {
                let name = inst.callee.clone().unwrap_or_default();
                let Some(callee) = self.module.function(&name) else {
                    return self.err(Some(label), Some(idx), format!("undefined callee @{name}"));
                };
                if callee.ret != ty {
                    return self.err(Some(label), Some(idx), format!("call to @{name} has wrong return type"));
                }
                if inst.dest.is_some() && ty.is_none() {
                    return self.err(Some(label), Some(idx), "void call produces no value".into());
                }
                if callee.params.len() != inst.operands.len() {
                    return self.err(
                        Some(label),
                        Some(idx),
                        format!("@{name} takes {} argument(s), got {}", callee.params.len(), inst.operands.len()),
                    );
                }
                let param_types: Vec<Type> = callee.params.iter().map(|p| p.ty).collect();
                for (arg, t) in inst.operands.iter().zip(param_types) {
                    self.expect(label, idx, arg, t);
                }
            }
            Opcode::Br => {
                if !arity(1) {
                    return self.err(Some(label), Some(idx), "`br` takes one i1 condition".into());
                }
                self.expect(label, idx, &inst.operands[0], Type::I1);
            }
            Opcode::Jmp => {
                if !arity(0) {
                    self.err(Some(label), Some(idx), "`jmp` takes no operands".into());
                }
            }
            Opcode::Ret => match (self.func.ret, inst.operands.as_slice()) {
                (None, []) if ty.is_none() => {}
                (Some(rt), [v]) if ty == Some(rt) => self.expect(label, idx, v, rt),
                _ => self.err(Some(label), Some(idx), "`ret` does not match the function's return type".into()),
            },
            _ => unreachable!(),
        }
    }
}

fn tyname(t: Option<Type>) -> &'static str {
    t.map(Type::name).unwrap_or("void")
}

/// Block-level structure: successor lists and reachability.
pub(crate) fn successor_indices(f: &Function) -> Vec<Vec<usize>> {
    let index: HashMap<&str, usize> = f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
    f.blocks
        .iter()
        .map(|b| b.successors().iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect()
}

/// Registers read at some point where, along at least one path from the
/// entry, they have not been assigned. Empty for valid functions.
pub(crate) fn unassigned_uses(f: &Function) -> Vec<(usize, usize, Reg)> {
    let regs: Vec<Reg> = f.register_types().into_keys().collect();
    let id: HashMap<&Reg, usize> = regs.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let n = f.blocks.len();
    let succ = successor_indices(f);
    let mut preds = vec![Vec::new(); n];
    for (b, ss) in succ.iter().enumerate() {
        for &s in ss {
            preds[s].push(b);
        }
    }
    let full = vec![true; regs.len()];
    let mut entry_in = vec![false; regs.len()];
    for p in &f.params {
        entry_in[id[&p.name]] = true;
    }
    // assigned-on-exit per block; start at "everything" for the meet.
    let mut out: Vec<Vec<bool>> = vec![full.clone(); n];
    let gen: Vec<Vec<usize>> = f
        .blocks
        .iter()
        .map(|b| b.insts.iter().filter_map(|i| i.dest.as_ref().map(|d| id[d])).collect())
        .collect();
    let block_in = |b: usize, out: &Vec<Vec<bool>>| -> Vec<bool> {
        if b == 0 {
            return entry_in.clone();
        }
        let mut acc = full.clone();
        for &p in &preds[b] {
            for (a, o) in acc.iter_mut().zip(&out[p]) {
                *a &= *o;
            }
        }
        acc
    };
    let mut changed = true;
    while changed {
        changed = false;
        for b in 0..n {
            let mut cur = block_in(b, &out);
            for &g in &gen[b] {
                cur[g] = true;
            }
            if cur != out[b] {
                out[b] = cur;
                changed = true;
            }
        }
    }
    let mut bad = Vec::new();
    for (bi, block) in f.blocks.iter().enumerate() {
        let mut cur = block_in(bi, &out);
        for (ii, inst) in block.insts.iter().enumerate() {
            for r in inst.uses() {
                if let Some(&k) = id.get(r) {
                    if !cur[k] {
                        bad.push((bi, ii, r.clone()));
                    }
                }
            }
            if let Some(d) = &inst.dest {
                cur[id[d]] = true;
            }
        }
    }
    bad
}

/// Checks one function against the signatures in `module`.
pub fn validate_function(module: &Module, f: &Function) -> Vec<ValidationError> {
    let mut ck = Checker { module, func: f, reg_types: BTreeMap::new(), errors: Vec::new() };
    if f.blocks.is_empty() {
        ck.err(None, None, "function has no blocks".into());
        return ck.errors;
    }
    let mut labels = BTreeSet::new();
    for b in &f.blocks {
        if !labels.insert(b.label.as_str()) {
            ck.err(Some(&b.label), None, format!("duplicate label {}", b.label));
        }
    }
    let mut params = BTreeSet::new();
    for p in &f.params {
        if !params.insert(&p.name) {
            ck.err(None, None, format!("duplicate parameter {}", p.name));
        }
        ck.reg_types.insert(p.name.clone(), p.ty);
    }
    // One type per register.
    for b in &f.blocks {
        for (i, inst) in b.insts.iter().enumerate() {
            if let (Some(d), Some(t)) = (&inst.dest, inst.result_type()) {
                match ck.reg_types.get(d) {
                    Some(prev) if *prev != t => {
                        let prev = *prev;
                        ck.err(Some(&b.label), Some(i), format!("register {d} assigned {t} but previously {prev}"))
                    }
                    Some(_) => {}
                    None => {
                        ck.reg_types.insert(d.clone(), t);
                    }
                }
            }
        }
    }
    for b in &f.blocks {
        match b.insts.last() {
            Some(t) if t.is_terminator() => {}
            _ => ck.err(Some(&b.label), None, "block does not end in a terminator".into()),
        }
        for (i, inst) in b.insts.iter().enumerate() {
            if inst.is_terminator() && i + 1 != b.insts.len() {
                ck.err(Some(&b.label), Some(i), "terminator in the middle of a block".into());
            }
            ck.check_inst(&b.label, i, inst);
        }
    }
    if !ck.errors.is_empty() {
        return ck.errors;
    }
    let succ = successor_indices(f);
    if succ.iter().any(|s| s.contains(&0)) {
        ck.err(Some(&f.blocks[0].label), None, "entry block has predecessors".into());
    }
    let mut seen = vec![false; f.blocks.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(b) = stack.pop() {
        for &s in &succ[b] {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    for (b, ok) in seen.iter().enumerate() {
        if !ok {
            ck.err(Some(&f.blocks[b].label), None, "block is unreachable from the entry".into());
        }
    }
    if !ck.errors.is_empty() {
        return ck.errors;
    }
    let mut reported = BTreeSet::new();
    for (b, i, r) in unassigned_uses(f) {
        if reported.insert(r.clone()) {
            ck.err(Some(&f.blocks[b].label), Some(i), format!("register {r} used before assignment"));
        }
    }
    ck.errors
}

/// Full module validation, including the recursion-free call graph.
pub fn validate_module(m: &Module) -> Result<(), Vec<ValidationError>> {
    let mut errors = Vec::new();
    if !m.functions.contains_key(&m.entry) {
        errors.push(ValidationError { location: None, message: format!("entry function @{} not found", m.entry) });
    }
    for (name, f) in &m.functions {
        if name != &f.name {
            errors.push(ValidationError { location: None, message: format!("function key {name} != @{}", f.name) });
        }
        errors.extend(validate_function(m, f));
    }
    if errors.is_empty() {
        if let Some(cycle) = find_call_cycle(m) {
            errors.push(ValidationError {
                location: None,
                message: format!("recursive call cycle: {}", cycle.join(" -> ")),
            });
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Returns a call cycle (as function names) if one exists.
pub(crate) fn find_call_cycle(m: &Module) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let names: Vec<&str> = m.names().collect();
    let idx: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let callees: Vec<Vec<usize>> = names
        .iter()
        .map(|n| m.functions[*n].call_sites().filter_map(|c| idx.get(c).copied()).collect())
        .collect();
    let mut mark = vec![Mark::White; names.len()];
    fn dfs(v: usize, callees: &[Vec<usize>], mark: &mut [Mark], path: &mut Vec<usize>) -> Option<Vec<usize>> {
        mark[v] = Mark::Grey;
        path.push(v);
        for &w in &callees[v] {
            match mark[w] {
                Mark::Grey => {
                    let start = path.iter().position(|&p| p == w).unwrap();
                    let mut cyc = path[start..].to_vec();
                    cyc.push(w);
                    return Some(cyc);
                }
                Mark::White => {
                    if let Some(c) = dfs(w, callees, mark, path) {
                        return Some(c);
                    }
                }
                Mark::Black => {}
            }
        }
        path.pop();
        mark[v] = Mark::Black;
        None
    }
    for v in 0..names.len() {
        if mark[v] == Mark::White {
            let mut path = Vec::new();
            if let Some(c) = dfs(v, &callees, &mut mark, &mut path) {
                return Some(c.into_iter().map(|i| names[i].to_owned()).collect());
            }
        }
    }
    None
}
