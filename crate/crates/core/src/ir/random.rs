//! Random inputs and random well-formed programs for differential testing.

use rand::Rng;

use super::{Block, Function, Inst, Literal, Memory, Opcode, Operand, Param, Pred, Provenance, Reg, Type, Value};

/// Slots in each region created for a random `ptr` argument.
pub const RANDOM_REGION_SLOTS: usize = 32;

/// Small values dominate so that loop bounds and indices stay in range;
/// the occasional wide value exercises overflow and error paths.
pub fn random_value(ty: Type, mem: &mut Memory, rng: &mut impl Rng) -> Value {
    let small = rng.gen_bool(0.8);
    match ty {
        Type::I1 => Value::I1(rng.gen()),
        Type::I32 => Value::I32(if small { rng.gen_range(0..=16) } else { rng.gen_range(-1000..=1000) }),
        Type::I64 => Value::I64(if small { rng.gen_range(0..=16) } else { rng.gen_range(-100_000..=100_000) }),
        Type::F64 => {
            let v: f64 = if small { rng.gen_range(0..=16) as f64 } else { rng.gen_range(-100.0..100.0) };
            Value::F64(v)
        }
        Type::Ptr => {
            let mut bytes = Vec::with_capacity(RANDOM_REGION_SLOTS * 8);
            for _ in 0..RANDOM_REGION_SLOTS {
                let v: i64 = rng.gen_range(0..=16);
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            Value::Ptr(mem.push_region(&bytes))
        }
    }
}

pub fn random_args(params: &[Type], mem: &mut Memory, rng: &mut impl Rng) -> Vec<Value> {
    params.iter().map(|t| random_value(*t, mem, rng)).collect()
}

/// Shape knobs for [`random_function`].
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub int_params: usize,
    pub with_ptr: bool,
    pub vars: usize,
    pub max_stmts: usize,
    pub max_depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { int_params: 2, with_ptr: true, vars: 3, max_stmts: 6, max_depth: 2 }
    }
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    blocks: Vec<Block>,
    cur: Block,
    next_label: usize,
    next_tmp: usize,
    loops: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn label(&mut self) -> String {
        self.next_label += 1;
        format!("b{}", self.next_label)
    }

    fn tmp(&mut self) -> Reg {
        self.next_tmp += 1;
        Reg::new(format!("t{}", self.next_tmp))
    }

    fn emit(&mut self, inst: Inst) {
        self.cur.insts.push(inst);
    }

    fn finish(&mut self, term: Inst, next: String) {
        self.cur.insts.push(term);
        let done = std::mem::replace(&mut self.cur, Block::new(next, Vec::new()));
        self.blocks.push(done);
    }

    fn var(&mut self) -> Reg {
        let n = self.cfg.int_params + self.cfg.vars;
        let k = self.rng.gen_range(0..n);
        if k < self.cfg.int_params {
            Reg::new(format!("a{k}"))
        } else {
            Reg::new(format!("v{}", k - self.cfg.int_params))
        }
    }

    fn operand(&mut self) -> Operand {
        if self.rng.gen_bool(0.25) {
            Operand::Lit(Literal::Int(self.rng.gen_range(-3..=9)))
        } else {
            Operand::Reg(self.var())
        }
    }

    fn cond(&mut self) -> Reg {
        let preds = [Pred::Eq, Pred::Ne, Pred::Slt, Pred::Sgt, Pred::Sle, Pred::Sge];
        let p = preds[self.rng.gen_range(0..preds.len())];
        let c = self.tmp();
        let (a, b) = (Operand::Reg(self.var()), self.operand());
        self.emit(Inst::cmp(Opcode::ICmp, p, c.clone(), Type::I32, a, b));
        c
    }

    fn stmt(&mut self, depth: usize) {
        let structured = depth < self.cfg.max_depth;
        let pick = self.rng.gen_range(0..if structured { 10 } else { 8 });
        match pick {
            0..=3 => {
                let ops = [
                    Opcode::Add,
                    Opcode::Sub,
                    Opcode::Mul,
                    Opcode::And,
                    Opcode::Or,
                    Opcode::Xor,
                    Opcode::Shl,
                    Opcode::AShr,
                ];
                let op = ops[self.rng.gen_range(0..ops.len())];
                let d = self.var();
                let (a, b) = (self.operand(), self.operand());
                self.emit(Inst::binary(op, d, Type::I32, a, b));
            }
            4 => {
                let op = if self.rng.gen() { Opcode::SDiv } else { Opcode::SRem };
                let d = self.var();
                let a = self.operand();
                let k = self.rng.gen_range(1..=7);
                self.emit(Inst::binary(op, d, Type::I32, a, Operand::Lit(Literal::Int(k))));
            }
            5 => {
                let c = self.cond();
                let d = self.var();
                let (a, b) = (self.operand(), self.operand());
                self.emit(Inst::select(d, Type::I32, Operand::Reg(c), a, b));
            }
            6 | 7 if self.cfg.with_ptr => {
                let q = self.tmp();
                let idx = self.rng.gen_range(0..4);
                self.emit(Inst::gep(q.clone(), Operand::reg("p"), Operand::Lit(Literal::Int(idx))));
                if pick == 6 {
                    let t = self.tmp();
                    self.emit(Inst::load(t.clone(), Type::I64, Operand::Reg(q)));
                    let d = self.var();
                    self.emit(Inst::cast(Opcode::Trunc, d, Type::I64, Operand::Reg(t), Type::I32));
                } else {
                    let t = self.tmp();
                    let v = Operand::Reg(self.var());
                    self.emit(Inst::cast(Opcode::ZExt, t.clone(), Type::I32, v, Type::I64));
                    self.emit(Inst::store(Type::I64, Operand::Reg(t), Operand::Reg(q)));
                }
            }
            6 | 7 => {
                let d = self.var();
                let k = self.rng.gen_range(-5..=20);
                self.emit(Inst::constant(d, Type::I32, Literal::Int(k)));
            }
            8 => {
                let c = self.cond();
                let (t, e, j) = (self.label(), self.label(), self.label());
                self.finish(Inst::br(Operand::Reg(c), t.clone(), e.clone()), t);
                self.body(depth + 1);
                self.finish(Inst::jmp(j.clone()), e);
                self.body(depth + 1);
                self.finish(Inst::jmp(j.clone()), j);
            }
            _ => {
                let counter = Reg::new(format!("i{}", self.loops));
                self.loops += 1;
                let bound = self.rng.gen_range(1..=4);
                self.emit(Inst::constant(counter.clone(), Type::I32, Literal::Int(0)));
                let (h, b, x) = (self.label(), self.label(), self.label());
                self.finish(Inst::jmp(h.clone()), h.clone());
                let c = self.tmp();
                self.emit(Inst::cmp(
                    Opcode::ICmp,
                    Pred::Slt,
                    c.clone(),
                    Type::I32,
                    Operand::Reg(counter.clone()),
                    Operand::Lit(Literal::Int(bound)),
                ));
                self.finish(Inst::br(Operand::Reg(c), b.clone(), x.clone()), b);
                self.body(depth + 1);
                self.emit(Inst::binary(
                    Opcode::Add,
                    counter.clone(),
                    Type::I32,
                    Operand::Reg(counter),
                    Operand::Lit(Literal::Int(1)),
                ));
                self.finish(Inst::jmp(h), x);
            }
        }
    }

    fn body(&mut self, depth: usize) {
        let n = self.rng.gen_range(1..=self.cfg.max_stmts);
        for _ in 0..n {
            self.stmt(depth);
        }
    }
}

/// A random, valid, always-terminating function over `i32` variables,
/// optionally reading and writing slots 0..4 of a `ptr` parameter `%p`.
pub fn random_function(name: &str, cfg: &GenConfig, rng: &mut impl Rng) -> Function {
    let mut params: Vec<Param> =
        (0..cfg.int_params).map(|k| Param { name: Reg::new(format!("a{k}")), ty: Type::I32 }).collect();
    if cfg.with_ptr {
        params.push(Param { name: Reg::new("p"), ty: Type::Ptr });
    }
    let mut g = Gen {
        rng,
        cfg: cfg.clone(),
        blocks: Vec::new(),
        cur: Block::new("entry", Vec::new()),
        next_label: 0,
        next_tmp: 0,
        loops: 0,
    };
    for k in 0..cfg.vars {
        let init = g.rng.gen_range(0..5);
        g.emit(Inst::constant(Reg::new(format!("v{k}")), Type::I32, Literal::Int(init)));
    }
    g.body(0);
    let r = Operand::Reg(g.var());
    g.cur.insts.push(Inst::ret(Some((Type::I32, r))));
    let last = std::mem::replace(&mut g.cur, Block::new("", Vec::new()));
    g.blocks.push(last);
    Function { name: name.to_owned(), params, ret: Some(Type::I32), blocks: g.blocks, provenance: Provenance::Original }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{interpret, validate_module, Module, DEFAULT_FUEL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_functions_validate_and_terminate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..200 {
            let f = random_function("g", &GenConfig::default(), &mut rng);
            let mut m = Module { functions: Default::default(), entry: "g".into() };
            m.add_function(f);
            validate_module(&m).unwrap_or_else(|e| panic!("case {i}: {e:?}"));
            let mut mem = Memory::new();
            let types: Vec<Type> = m.functions["g"].params.iter().map(|p| p.ty).collect();
            let args = random_args(&types, &mut mem, &mut rng);
            let r = interpret(&m, "g", &args, &mut mem, DEFAULT_FUEL);
            assert!(r.is_ok(), "case {i}: {r:?}");
        }
    }
}
