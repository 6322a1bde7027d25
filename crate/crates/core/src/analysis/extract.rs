//! Outlining of outermost loops into functions of their own.

use std::collections::{BTreeMap, BTreeSet};

use crate::ir::{
    successor_indices, Block, Function, Inst, Literal, Module, Opcode, Operand, Param, Provenance, Reg, Type,
};

use super::loops::natural_loops;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractReport {
    /// (parent function, extracted function) in creation order.
    pub extracted: Vec<(String, String)>,
    /// Functions left untouched, with the reason.
    pub skipped: Vec<(String, String)>,
}

/// Registers live on entry to each block.
pub(crate) fn live_in(f: &Function) -> Vec<BTreeSet<Reg>> {
    let succ = successor_indices(f);
    let n = f.blocks.len();
    let mut uses = vec![BTreeSet::new(); n];
    let mut defs = vec![BTreeSet::new(); n];
    for (b, block) in f.blocks.iter().enumerate() {
        for inst in &block.insts {
            for r in inst.uses() {
                if !defs[b].contains(r) {
                    uses[b].insert(r.clone());
                }
            }
            if let Some(d) = &inst.dest {
                defs[b].insert(d.clone());
            }
        }
    }
    let mut live: Vec<BTreeSet<Reg>> = uses.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for b in (0..n).rev() {
            let mut out = BTreeSet::new();
            for &s in &succ[b] {
                out.extend(live[s].iter().cloned());
            }
            let mut inn = uses[b].clone();
            inn.extend(out.into_iter().filter(|r| !defs[b].contains(r)));
            if inn != live[b] {
                live[b] = inn;
                changed = true;
            }
        }
    }
    live
}

struct Plan {
    name: String,
    header: usize,
    blocks: BTreeSet<usize>,
    params: Vec<(Reg, Type)>,
    exits: Vec<String>,
    live_outs: Vec<(Reg, Type)>,
}

impl Plan {
    fn n_results(&self) -> usize {
        self.live_outs.len() + usize::from(self.exits.len() > 1)
    }

    /// The single returned type, when results are returned directly.
    fn ret_type(&self) -> Option<Type> {
        match (self.n_results(), self.exits.len() > 1) {
            (1, true) => Some(Type::I32),
            (1, false) => Some(self.live_outs[0].1),
            _ => None,
        }
    }
}

fn build_callee(f: &Function, plan: &Plan) -> Function {
    let out_ptr = Reg::new("__out");
    let mut params: Vec<Param> = plan.params.iter().map(|(r, t)| Param { name: r.clone(), ty: *t }).collect();
    if plan.n_results() > 1 {
        params.push(Param { name: out_ptr.clone(), ty: Type::Ptr });
    }
    let param_set: BTreeSet<&Reg> = plan.params.iter().map(|(r, _)| r).collect();
    let mut entry = Vec::new();
    for (r, t) in &plan.live_outs {
        if !param_set.contains(r) {
            entry.push(Inst::constant(r.clone(), *t, t.zero()));
        }
    }
    entry.push(Inst::jmp(f.blocks[plan.header].label.clone()));
    let mut blocks = vec![Block::new("__entry", entry)];
    let exit_label = |k: usize| format!("__exit{k}");
    for &b in &plan.blocks {
        let mut block = f.blocks[b].clone();
        if let Some(term) = block.insts.last_mut() {
            for t in term.targets.iter_mut() {
                if let Some(k) = plan.exits.iter().position(|e| e == t) {
                    *t = exit_label(k);
                }
            }
        }
        blocks.push(block);
    }
    for k in 0..plan.exits.len() {
        let mut results: Vec<(Type, Operand)> = Vec::new();
        if plan.exits.len() > 1 {
            results.push((Type::I32, Operand::Lit(Literal::Int(k as i64))));
        }
        results.extend(plan.live_outs.iter().map(|(r, t)| (*t, Operand::Reg(r.clone()))));
        let mut insts = Vec::new();
        if results.len() > 1 {
            for (j, (t, v)) in results.into_iter().enumerate() {
                let q = Reg::new(format!("__q{j}"));
                insts.push(Inst::gep(q.clone(), Operand::Reg(out_ptr.clone()), Operand::Lit(Literal::Int(j as i64))));
                insts.push(Inst::store(t, v, Operand::Reg(q)));
            }
            insts.push(Inst::ret(None));
        } else {
            insts.push(Inst::ret(results.into_iter().next()));
        }
        blocks.push(Block::new(exit_label(k), insts));
    }
    Function {
        name: plan.name.clone(),
        params,
        ret: plan.ret_type(),
        blocks,
        provenance: Provenance::ExtractedLoop,
    }
}

/// Blocks replacing the loop in its parent: the call, result unpacking and
/// a dispatch on the exit index.
fn call_site(f: &Function, plan: &Plan, e: usize) -> Vec<Block> {
    let h = f.blocks[plan.header].label.clone();
    let tmp = |s: &str| Reg::new(format!("__x{e}_{s}"));
    let args: Vec<Operand> = plan.params.iter().map(|(r, _)| Operand::Reg(r.clone())).collect();
    let multi = plan.exits.len() > 1;
    let idx = tmp("idx");
    let mut insts = Vec::new();
    match plan.n_results() {
        0 => insts.push(Inst::call(None, None, &plan.name, args)),
        1 => {
            let dest = if multi { idx.clone() } else { plan.live_outs[0].0.clone() };
            insts.push(Inst::call(Some(dest), plan.ret_type(), &plan.name, args));
        }
        n => {
            let out = tmp("out");
            insts.push(Inst::alloca(out.clone(), n as i64));
            let mut args = args;
            args.push(Operand::Reg(out.clone()));
            insts.push(Inst::call(None, None, &plan.name, args));
            let mut results = Vec::new();
            if multi {
                results.push((idx.clone(), Type::I32));
            }
            results.extend(plan.live_outs.iter().cloned());
            for (j, (r, t)) in results.into_iter().enumerate() {
                let q = tmp(&format!("q{j}"));
                insts.push(Inst::gep(q.clone(), Operand::Reg(out.clone()), Operand::Lit(Literal::Int(j as i64))));
                insts.push(Inst::load(r, t, Operand::Reg(q)));
            }
        }
    }
    if !multi {
        insts.push(Inst::jmp(plan.exits[0].clone()));
        return vec![Block::new(h, insts)];
    }
    let sel_label = |k: usize| if k == 0 { h.clone() } else { format!("{h}__sel{k}") };
    let mut blocks = Vec::new();
    let last = plan.exits.len() - 1;
    for k in 0..last {
        let c = tmp(&format!("c{k}"));
        insts.push(Inst::cmp(
            Opcode::ICmp,
            crate::ir::Pred::Eq,
            c.clone(),
            Type::I32,
            Operand::Reg(idx.clone()),
            Operand::Lit(Literal::Int(k as i64)),
        ));
        let other = if k + 1 == last { plan.exits[last].clone() } else { sel_label(k + 1) };
        insts.push(Inst::br(Operand::Reg(c), plan.exits[k].clone(), other));
        blocks.push(Block::new(sel_label(k), std::mem::take(&mut insts)));
    }
    blocks
}

fn plan_function(f: &Function, taken: &mut BTreeSet<String>) -> Result<Vec<Plan>, String> {
    let forest = natural_loops(f);
    if forest.irreducible {
        return Err("irreducible control flow".into());
    }
    let mut outer: Vec<_> = forest.outermost().collect();
    if outer.is_empty() {
        return Ok(Vec::new());
    }
    outer.sort_by_key(|l| l.header);
    let live = live_in(f);
    let types = f.register_types();
    let mut plans = Vec::new();
    let mut k = 0;
    for l in outer {
        let blocks: BTreeSet<usize> = l.blocks.iter().copied().collect();
        let mut exits: Vec<String> = Vec::new();
        for &b in &blocks {
            for t in f.blocks[b].successors() {
                let ti = f.block_index(t).unwrap();
                if !blocks.contains(&ti) && !exits.contains(t) {
                    exits.push(t.clone());
                }
            }
        }
        let defined: BTreeSet<&Reg> =
            blocks.iter().flat_map(|&b| f.blocks[b].insts.iter().filter_map(|i| i.dest.as_ref())).collect();
        let mut outs: BTreeSet<Reg> = BTreeSet::new();
        for t in &exits {
            let ti = f.block_index(t).unwrap();
            outs.extend(live[ti].iter().filter(|r| defined.contains(r)).cloned());
        }
        let mut name = format!("{}_loop{k}", f.name);
        while taken.contains(&name) {
            k += 1;
            name = format!("{}_loop{k}", f.name);
        }
        k += 1;
        taken.insert(name.clone());
        plans.push(Plan {
            name,
            header: l.header,
            blocks,
            params: live[l.header].iter().map(|r| (r.clone(), types[r])).collect(),
            exits,
            live_outs: outs.into_iter().map(|r| {
                let t = types[&r];
                (r, t)
            }).collect(),
        });
    }
    Ok(plans)
}

/// Replaces every outermost natural loop of every original function by a
/// call to a new `extracted-loop` function.
pub fn extract_loops(m: &Module) -> Module {
    extract_loops_with_report(m).0
}

pub fn extract_loops_with_report(m: &Module) -> (Module, ExtractReport) {
    let mut out = m.clone();
    let mut report = ExtractReport::default();
    let mut taken: BTreeSet<String> = m.functions.keys().cloned().collect();
    let mut new_functions: BTreeMap<String, Function> = BTreeMap::new();
    for f in m.functions.values().filter(|f| f.provenance == Provenance::Original) {
        let plans = match plan_function(f, &mut taken) {
            Ok(p) => p,
            Err(why) => {
                log::warn!("not extracting loops of @{}: {why}", f.name);
                report.skipped.push((f.name.clone(), why));
                continue;
            }
        };
        if plans.is_empty() {
            continue;
        }
        let mut blocks = Vec::new();
        for (b, block) in f.blocks.iter().enumerate() {
            match plans.iter().position(|p| p.blocks.contains(&b)) {
                None => blocks.push(block.clone()),
                Some(e) if plans[e].header == b => blocks.extend(call_site(f, &plans[e], e)),
                Some(_) => {}
            }
        }
        for p in &plans {
            new_functions.insert(p.name.clone(), build_callee(f, p));
            report.extracted.push((f.name.clone(), p.name.clone()));
        }
        out.functions.get_mut(&f.name).unwrap().blocks = blocks;
    }
    out.functions.extend(new_functions);
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{interpret, parse_module, validate_module, Memory, Value, DEFAULT_FUEL};

    const SUM: &str = "entry @f
func @f(%p: ptr, %n: i64) -> i64 {
entry:
  %s = const i64 0
  %i = const i64 0
  jmp head
head:
  %c = icmp slt i64 %i, %n
  br i1 %c, body, done
body:
  %q = gep %p, %i
  %v = load i64 %q
  %s = add i64 %s, %v
  %i = add i64 %i, 1
  jmp head
done:
  ret i64 %s
}";

    #[test]
    fn sum_loop_is_outlined() {
        let m = parse_module(SUM).unwrap();
        let (x, report) = extract_loops_with_report(&m);
        validate_module(&x).unwrap();
        assert_eq!(report.extracted, vec![("f".to_string(), "f_loop0".to_string())]);
        assert_eq!(x.functions["f_loop0"].provenance, Provenance::ExtractedLoop);
        let mut mem = Memory::new();
        let bytes: Vec<u8> = (1..=4i64).flat_map(|v| v.to_le_bytes()).collect();
        let p = mem.push_region(&bytes);
        let args = [Value::Ptr(p), Value::I64(4)];
        let mut m2 = mem.clone();
        let a = interpret(&m, "f", &args, &mut mem, DEFAULT_FUEL).unwrap().0;
        let b = interpret(&x, "f", &args, &mut m2, DEFAULT_FUEL).unwrap().0;
        assert_eq!(a, Some(Value::I64(10)));
        assert_eq!(a, b);
    }

    #[test]
    fn loop_free_module_is_unchanged() {
        let m = parse_module("func @id(%a: i32) -> i32 { bb0: ret i32 %a }").unwrap();
        assert_eq!(extract_loops(&m), m);
    }
}
