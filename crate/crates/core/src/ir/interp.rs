//! Deterministic interpreter and dynamic profiler.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::heap::{Memory, SLOT_BYTES};
use super::{Literal, Module, Opcode, Operand, Pred, Type, NUM_OPCODES};

/// Default instruction budget for one invocation.
pub const DEFAULT_FUEL: u64 = 100_000_000;

/// A runtime value.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    I1(bool),
    I32(i32),
    I64(i64),
    F64(f64),
    Ptr(u64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.ty() == other.ty() && self.to_raw() == other.to_raw()
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::I1(v) => write!(f, "i1 {v}"),
            Value::I32(v) => write!(f, "i32 {v}"),
            Value::I64(v) => write!(f, "i64 {v}"),
            Value::F64(v) => write!(f, "f64 {v:?}"),
            Value::Ptr(v) => write!(f, "ptr {v:#x}"),
        }
    }
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::I1(_) => Type::I1,
            Value::I32(_) => Type::I32,
            Value::I64(_) => Type::I64,
            Value::F64(_) => Type::F64,
            Value::Ptr(_) => Type::Ptr,
        }
    }

    pub fn zero(ty: Type) -> Value {
        match ty {
            Type::I1 => Value::I1(false),
            Type::I32 => Value::I32(0),
            Type::I64 => Value::I64(0),
            Type::F64 => Value::F64(0.0),
            Type::Ptr => Value::Ptr(0),
        }
    }

    pub fn from_literal(l: Literal, ty: Type) -> Option<Value> {
        if !l.fits(ty) {
            return None;
        }
        Some(match (l, ty) {
            (Literal::Bool(b), _) => Value::I1(b),
            (Literal::Int(v), Type::I32) => Value::I32(v as i32),
            (Literal::Int(v), _) => Value::I64(v),
            (Literal::Float(v), _) => Value::F64(v),
            (Literal::Null, _) => Value::Ptr(0),
        })
    }

    pub fn to_literal(&self) -> Literal {
        match *self {
            Value::I1(b) => Literal::Bool(b),
            Value::I32(v) => Literal::Int(v as i64),
            Value::I64(v) => Literal::Int(v),
            Value::F64(v) => Literal::Float(v),
            Value::Ptr(0) => Literal::Null,
            Value::Ptr(v) => Literal::Int(v as i64),
        }
    }

    /// 64-bit memory encoding.
    pub fn to_raw(&self) -> u64 {
        match *self {
            Value::I1(b) => b as u64,
            Value::I32(v) => v as i64 as u64,
            Value::I64(v) => v as u64,
            Value::F64(v) => v.to_bits(),
            Value::Ptr(v) => v,
        }
    }

    pub fn from_raw(raw: u64, ty: Type) -> Value {
        match ty {
            Type::I1 => Value::I1(raw & 1 == 1),
            Type::I32 => Value::I32(raw as u32 as i32),
            Type::I64 => Value::I64(raw as i64),
            Type::F64 => Value::F64(f64::from_bits(raw)),
            Type::Ptr => Value::Ptr(raw),
        }
    }

    fn as_i64(&self) -> i64 {
        match *self {
            Value::I1(b) => b as i64,
            Value::I32(v) => v as i64,
            Value::I64(v) => v,
            Value::F64(v) => v as i64,
            Value::Ptr(v) => v as i64,
        }
    }

    fn as_f64(&self) -> f64 {
        match *self {
            Value::F64(v) => v,
            other => other.as_i64() as f64,
        }
    }

    fn as_bool(&self) -> bool {
        self.as_i64() & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("fuel exhausted after {0} instructions")]
    FuelExhausted(u64),
    #[error("division by zero in @{0}")]
    DivisionByZero(String),
    #[error("out-of-bounds memory access at {addr:#x} in @{function}")]
    OutOfBounds { function: String, addr: u64 },
    #[error("bad invocation: {0}")]
    BadInvocation(String),
}

impl ExecError {
    /// Error class, ignoring the fuel count and location details.
    pub fn kind(&self) -> &'static str {
        match self {
            ExecError::FuelExhausted(_) => "fuel",
            ExecError::DivisionByZero(_) => "div-by-zero",
            ExecError::OutOfBounds { .. } => "out-of-bounds",
            ExecError::BadInvocation(_) => "bad-invocation",
        }
    }
}

/// Per-opcode counters in [`Opcode::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts(pub [u64; NUM_OPCODES]);

impl Default for OpCounts {
    fn default() -> Self {
        OpCounts([0; NUM_OPCODES])
    }
}

impl OpCounts {
    pub fn get(&self, op: Opcode) -> u64 {
        self.0[op.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn add(&mut self, other: &OpCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }

    pub fn scaled(&self, k: u64) -> OpCounts {
        OpCounts(self.0.map(|v| v * k))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionProfile {
    /// Instructions executed in the function's own body.
    pub self_counts: OpCounts,
    /// Instructions executed in the body and in everything it called.
    pub inclusive_counts: OpCounts,
    pub invocations: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeProfile {
    pub calls: u64,
    /// Scalar argument and return bytes plus memory bytes touched outside
    /// the callee's own stack, summed over all calls on this edge.
    pub bytes: u64,
}

/// Dynamic profile of one or more invocations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub functions: BTreeMap<String, FunctionProfile>,
    pub calls: BTreeMap<String, BTreeMap<String, EdgeProfile>>,
    pub total: u64,
}

impl Trace {
    pub fn function(&self, name: &str) -> Option<&FunctionProfile> {
        self.functions.get(name)
    }

    pub fn calls_between(&self, caller: &str, callee: &str) -> u64 {
        self.edge(caller, callee).calls
    }

    pub fn edge(&self, caller: &str, callee: &str) -> EdgeProfile {
        self.calls.get(caller).and_then(|m| m.get(callee)).copied().unwrap_or_default()
    }

    /// Sums another profile into this one.
    pub fn accumulate(&mut self, other: &Trace) {
        for (name, p) in &other.functions {
            let e = self.functions.entry(name.clone()).or_default();
            e.self_counts.add(&p.self_counts);
            e.inclusive_counts.add(&p.inclusive_counts);
            e.invocations += p.invocations;
        }
        for (caller, m) in &other.calls {
            for (callee, edge) in m {
                let e = self.calls.entry(caller.clone()).or_default().entry(callee.clone()).or_default();
                e.calls += edge.calls;
                e.bytes += edge.bytes;
            }
        }
        self.total += other.total;
    }
}

#[derive(Clone, Copy)]
enum Arg {
    Slot(u32),
    Imm(Value),
}

struct CInst {
    op: Opcode,
    dest: u32,
    ty: Type,
    pred: Option<Pred>,
    cast_to: Type,
    args: Vec<Arg>,
    targets: [u32; 2],
    callee: u32,
    edge: u32,
}

struct CFunc {
    name: String,
    nregs: usize,
    params: Vec<(u32, Type)>,
    ret: Option<Type>,
    blocks: Vec<Vec<CInst>>,
}

/// A module prepared for repeated execution.
pub struct Interpreter {
    funcs: Vec<CFunc>,
    index: HashMap<String, u32>,
    edges: Vec<(u32, u32)>,
}

/// Result of one successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub value: Option<Value>,
    pub trace: Trace,
}

struct Run<'a> {
    it: &'a Interpreter,
    mem: &'a mut Memory,
    fuel: u64,
    used: u64,
    heap_end: u64,
    heap_bytes: u64,
    self_counts: Vec<[u64; NUM_OPCODES]>,
    cumulative: [u64; NUM_OPCODES],
    inclusive: Vec<[u64; NUM_OPCODES]>,
    invocations: Vec<u64>,
    edge_stats: Vec<EdgeProfile>,
    // (frame base, stack bytes touched below the base) for each active frame
    frames: Vec<(u64, u64)>,
}

const NO_DEST: u32 = u32::MAX;

impl Interpreter {
    pub fn new(m: &Module) -> Interpreter {
        let index: HashMap<String, u32> = m.names().enumerate().map(|(i, n)| (n.to_owned(), i as u32)).collect();
        let mut edges = Vec::new();
        let mut edge_ids: HashMap<(u32, u32), u32> = HashMap::new();
        let mut funcs = Vec::new();
        for (fi, f) in m.functions.values().enumerate() {
            let types = f.register_types();
            let slots: HashMap<&str, u32> =
                types.keys().enumerate().map(|(i, r)| (r.as_str(), i as u32)).collect();
            let labels: HashMap<&str, u32> =
                f.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i as u32)).collect();
            let blocks = f
                .blocks
                .iter()
                .map(|b| {
                    b.insts
                        .iter()
                        .map(|inst| {
                            let arg_ty = |k: usize| -> Type {
                                match inst.opcode {
                                    Opcode::Select if k == 0 => Type::I1,
                                    Opcode::Store if k == 1 => Type::Ptr,
                                    Opcode::Load => Type::Ptr,
                                    Opcode::Gep if k == 0 => Type::Ptr,
                                    Opcode::Gep => Type::I64,
                                    Opcode::Br => Type::I1,
                                    Opcode::Alloca => Type::I64,
                                    Opcode::Call => {
                                        let callee = &m.functions[inst.callee.as_deref().unwrap()];
                                        callee.params[k].ty
                                    }
                                    _ => inst.ty.unwrap_or(Type::I64),
                                }
                            };
                            let args = inst
                                .operands
                                .iter()
                                .enumerate()
                                .map(|(k, o)| match o {
                                    Operand::Reg(r) => Arg::Slot(slots[r.as_str()]),
                                    Operand::Lit(l) => {
                                        let t = arg_ty(k);
                                        Arg::Imm(Value::from_literal(*l, t).unwrap_or(match l {
                                            Literal::Int(v) => Value::I64(*v),
                                            _ => Value::zero(t),
                                        }))
                                    }
                                })
                                .collect();
                            let mut targets = [0u32; 2];
                            for (k, t) in inst.targets.iter().enumerate() {
                                targets[k] = labels[t.as_str()];
                            }
                            let (callee, edge) = match &inst.callee {
                                Some(c) => {
                                    let ci = index[c.as_str()];
                                    let key = (fi as u32, ci);
                                    let next = edge_ids.len() as u32;
                                    let e = *edge_ids.entry(key).or_insert_with(|| {
                                        edges.push(key);
                                        next
                                    });
                                    (ci, e)
                                }
                                None => (0, 0),
                            };
                            CInst {
                                op: inst.opcode,
                                dest: inst.dest.as_ref().map(|d| slots[d.as_str()]).unwrap_or(NO_DEST),
                                ty: inst.ty.unwrap_or(Type::I64),
                                pred: inst.pred,
                                cast_to: inst.cast_to.unwrap_or(Type::I64),
                                args,
                                targets,
                                callee,
                                edge,
                            }
                        })
                        .collect()
                })
                .collect();
            funcs.push(CFunc {
                name: f.name.clone(),
                nregs: types.len(),
                params: f.params.iter().map(|p| (slots[p.name.as_str()], p.ty)).collect(),
                ret: f.ret,
                blocks,
            });
        }
        Interpreter { funcs, index, edges }
    }

    /// Runs `entry` with `args` against `mem`, which holds the final heap
    /// afterwards. Allocas are released on return.
    pub fn run(&self, entry: &str, args: &[Value], mem: &mut Memory, fuel: u64) -> Result<Execution, ExecError> {
        let Some(&fi) = self.index.get(entry) else {
            return Err(ExecError::BadInvocation(format!("no function @{entry}")));
        };
        let f = &self.funcs[fi as usize];
        if f.params.len() != args.len() {
            return Err(ExecError::BadInvocation(format!(
                "@{entry} takes {} argument(s), got {}",
                f.params.len(),
                args.len()
            )));
        }
        for (k, ((_, t), a)) in f.params.iter().zip(args).enumerate() {
            if a.ty() != *t {
                return Err(ExecError::BadInvocation(format!("argument {k} is {}, expected {t}", a.ty())));
            }
        }
        let n = self.funcs.len();
        let heap_end = mem.len();
        let mut run = Run {
            it: self,
            mem,
            fuel,
            used: 0,
            heap_end,
            heap_bytes: 0,
            self_counts: vec![[0; NUM_OPCODES]; n],
            cumulative: [0; NUM_OPCODES],
            inclusive: vec![[0; NUM_OPCODES]; n],
            invocations: vec![0; n],
            edge_stats: vec![EdgeProfile::default(); self.edges.len()],
            frames: Vec::new(),
        };
        let value = run.call(fi, args)?;
        let mut trace = Trace { total: run.used, ..Trace::default() };
        for (i, f) in self.funcs.iter().enumerate() {
            if run.invocations[i] > 0 {
                trace.functions.insert(
                    f.name.clone(),
                    FunctionProfile {
                        self_counts: OpCounts(run.self_counts[i]),
                        inclusive_counts: OpCounts(run.inclusive[i]),
                        invocations: run.invocations[i],
                    },
                );
            }
        }
        for (e, &(caller, callee)) in self.edges.iter().enumerate() {
            let s = run.edge_stats[e];
            if s.calls > 0 {
                trace
                    .calls
                    .entry(self.funcs[caller as usize].name.clone())
                    .or_default()
                    .insert(self.funcs[callee as usize].name.clone(), s);
            }
        }
        Ok(Execution { value, trace })
    }
}

impl<'a> Run<'a> {
    fn touch(&mut self, addr: u64) {
        if addr < self.heap_end {
            self.heap_bytes += SLOT_BYTES;
        } else {
            for (base, bytes) in self.frames.iter_mut().rev() {
                if addr >= *base {
                    break;
                }
                *bytes += SLOT_BYTES;
            }
        }
    }

    fn call(&mut self, fi: u32, args: &[Value]) -> Result<Option<Value>, ExecError> {
        let it = self.it;
        let f = &it.funcs[fi as usize];
        let fidx = fi as usize;
        self.invocations[fidx] += 1;
        let snapshot = self.cumulative;
        let frame_base = self.mem.len();
        let mut regs = vec![Value::I64(0); f.nregs];
        for ((slot, _), v) in f.params.iter().zip(args) {
            regs[*slot as usize] = *v;
        }
        let mut block = 0usize;
        let result = 'exec: loop {
            for inst in &f.blocks[block] {
                if self.used >= self.fuel {
                    return Err(ExecError::FuelExhausted(self.used));
                }
                self.used += 1;
                let oi = inst.op.index();
                self.self_counts[fidx][oi] += 1;
                self.cumulative[oi] += 1;
                let val = |a: &Arg, regs: &[Value]| match *a {
                    Arg::Slot(s) => regs[s as usize],
                    Arg::Imm(v) => v,
                };
                let out: Value = match inst.op {
                    Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::SDiv | Opcode::SRem | Opcode::And
                    | Opcode::Or | Opcode::Xor | Opcode::Shl | Opcode::AShr => {
                        let a = val(&inst.args[0], &regs);
                        let b = val(&inst.args[1], &regs);
                        match int_binop(inst.op, inst.ty, a, b) {
                            Some(v) => v,
                            None => return Err(ExecError::DivisionByZero(f.name.clone())),
                        }
                    }
                    Opcode::FAdd | Opcode::FSub | Opcode::FMul | Opcode::FDiv => {
                        let a = val(&inst.args[0], &regs).as_f64();
                        let b = val(&inst.args[1], &regs).as_f64();
                        Value::F64(match inst.op {
                            Opcode::FAdd => a + b,
                            Opcode::FSub => a - b,
                            Opcode::FMul => a * b,
                            _ => {
                                if b == 0.0 {
                                    return Err(ExecError::DivisionByZero(f.name.clone()));
                                }
                                a / b
                            }
                        })
                    }
                    Opcode::ICmp => {
                        let a = val(&inst.args[0], &regs).as_i64();
                        let b = val(&inst.args[1], &regs).as_i64();
                        Value::I1(match inst.pred.unwrap() {
                            Pred::Eq => a == b,
                            Pred::Ne => a != b,
                            Pred::Slt => a < b,
                            Pred::Sgt => a > b,
                            Pred::Sle => a <= b,
                            _ => a >= b,
                        })
                    }
                    Opcode::FCmp => {
                        let a = val(&inst.args[0], &regs).as_f64();
                        let b = val(&inst.args[1], &regs).as_f64();
                        Value::I1(match inst.pred.unwrap() {
                            Pred::Olt => a < b,
                            Pred::Ogt => a > b,
                            _ => a == b,
                        })
                    }
                    Opcode::Select => {
                        if val(&inst.args[0], &regs).as_bool() {
                            val(&inst.args[1], &regs)
                        } else {
                            val(&inst.args[2], &regs)
                        }
                    }
                    Opcode::ZExt => {
                        let v = val(&inst.args[0], &regs);
                        let raw = match v {
                            Value::I1(b) => b as u64,
                            Value::I32(x) => x as u32 as u64,
                            other => other.to_raw(),
                        };
                        Value::from_raw(raw, inst.cast_to)
                    }
                    Opcode::Trunc => Value::from_raw(val(&inst.args[0], &regs).to_raw(), inst.cast_to),
                    Opcode::SIToFP => Value::F64(val(&inst.args[0], &regs).as_i64() as f64),
                    Opcode::FPToSI => {
                        let x = val(&inst.args[0], &regs).as_f64();
                        match inst.cast_to {
                            Type::I32 => Value::I32(x as i32),
                            _ => Value::I64(x as i64),
                        }
                    }
                    Opcode::Load => {
                        let addr = val(&inst.args[0], &regs).to_raw();
                        let Some(raw) = self.mem.read(addr) else {
                            return Err(ExecError::OutOfBounds { function: f.name.clone(), addr });
                        };
                        self.touch(addr);
                        Value::from_raw(raw, inst.ty)
                    }
                    Opcode::Store => {
                        let v = val(&inst.args[0], &regs);
                        let addr = val(&inst.args[1], &regs).to_raw();
                        if !self.mem.write(addr, v.to_raw()) {
                            return Err(ExecError::OutOfBounds { function: f.name.clone(), addr });
                        }
                        self.touch(addr);
                        continue;
                    }
                    Opcode::Gep => {
                        let p = val(&inst.args[0], &regs).to_raw();
                        let i = val(&inst.args[1], &regs).as_i64();
                        Value::Ptr(p.wrapping_add((i as u64).wrapping_mul(SLOT_BYTES)))
                    }
                    Opcode::Const => val(&inst.args[0], &regs),
                    Opcode::Alloca => {
                        let n = val(&inst.args[0], &regs).as_i64() as u64;
                        Value::Ptr(self.mem.grow_zeroed(n * SLOT_BYTES))
                    }
                    Opcode::Call => {
                        let callee = inst.callee;
                        let cf = &it.funcs[callee as usize];
                        let argv: Vec<Value> = inst.args.iter().map(|a| val(a, &regs)).collect();
                        let scalar: u64 = cf.params.iter().map(|(_, t)| t.size_bytes()).sum::<u64>()
                            + cf.ret.map(Type::size_bytes).unwrap_or(0);
                        let heap_before = self.heap_bytes;
                        self.frames.push((self.mem.len(), 0));
                        let r = self.call(callee, &argv)?;
                        let (_, stack_bytes) = self.frames.pop().unwrap();
                        let e = &mut self.edge_stats[inst.edge as usize];
                        e.calls += 1;
                        e.bytes += scalar + (self.heap_bytes - heap_before) + stack_bytes;
                        match r {
                            Some(v) if inst.dest != NO_DEST => v,
                            _ => continue,
                        }
                    }
                    Opcode::Br => {
                        let c = val(&inst.args[0], &regs).as_bool();
                        block = inst.targets[if c { 0 } else { 1 }] as usize;
                        continue 'exec;
                    }
                    Opcode::Jmp => {
                        block = inst.targets[0] as usize;
                        continue 'exec;
                    }
                    Opcode::Ret => {
                        break 'exec inst.args.first().map(|a| val(a, &regs));
                    }
                };
                if inst.dest != NO_DEST {
                    regs[inst.dest as usize] = out;
                }
            }
            unreachable!("validated blocks end in a terminator");
        };
        let inc = &mut self.inclusive[fidx];
        for k in 0..NUM_OPCODES {
            inc[k] += self.cumulative[k] - snapshot[k];
        }
        self.mem.truncate(frame_base);
        Ok(result)
    }
}

fn int_binop(op: Opcode, ty: Type, a: Value, b: Value) -> Option<Value> {
    let bits = match ty {
        Type::I1 => 1,
        Type::I32 => 32,
        _ => 64,
    };
    let x = a.as_i64();
    let y = b.as_i64();
    let r: i64 = match op {
        Opcode::Add => x.wrapping_add(y),
        Opcode::Sub => x.wrapping_sub(y),
        Opcode::Mul => x.wrapping_mul(y),
        Opcode::And => x & y,
        Opcode::Or => x | y,
        Opcode::Xor => x ^ y,
        Opcode::Shl => x.wrapping_shl((y as u32) & (bits - 1)),
        Opcode::AShr => x.wrapping_shr((y as u32) & (bits - 1)),
        Opcode::SDiv | Opcode::SRem => {
            if y == 0 {
                return None;
            }
            if bits == 32 {
                let (x, y) = (x as i32, y as i32);
                let r = if op == Opcode::SDiv { x.wrapping_div(y) } else { x.wrapping_rem(y) };
                return Some(Value::I32(r));
            }
            if op == Opcode::SDiv {
                x.wrapping_div(y)
            } else {
                x.wrapping_rem(y)
            }
        }
        _ => unreachable!(),
    };
    Some(match ty {
        Type::I1 => Value::I1(r & 1 == 1),
        Type::I32 => Value::I32(r as i32),
        _ => Value::I64(r),
    })
}

/// One-shot convenience wrapper around [`Interpreter`].
pub fn interpret(
    m: &Module,
    entry: &str,
    args: &[Value],
    mem: &mut Memory,
    fuel: u64,
) -> Result<(Option<Value>, Trace), ExecError> {
    let exec = Interpreter::new(m).run(entry, args, mem, fuel)?;
    Ok((exec.value, exec.trace))
}
