//! The mini intermediate representation.
//!
//! Functions are lists of labeled basic blocks holding register-based,
//! non-SSA instructions. Registers are mutable variables with a single type
//! per function. Every block ends in exactly one terminator.

mod heap;
pub mod interp;
mod parse;
mod print;
pub mod random;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

pub use heap::{ArgSpec, HeapImage, HeapParseError, Memory, Region, NULL_GUARD, SLOT_BYTES};
pub use interp::{
    interpret, EdgeProfile, ExecError, Execution, FunctionProfile, Interpreter, OpCounts, Trace, Value, DEFAULT_FUEL,
};
pub use parse::{parse_module, Diagnostic, ParseError};
pub use print::{print_function, print_module};
pub use validate::{validate_function, validate_module, Location, ValidationError};
pub(crate) use validate::{find_call_cycle, successor_indices, unassigned_uses};

/// Scalar types. `ptr` is an untyped byte address into the heap arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Type {
    I1,
    I32,
    I64,
    F64,
    Ptr,
}

impl Type {
    pub const ALL: [Type; 5] = [Type::I1, Type::I32, Type::I64, Type::F64, Type::Ptr];

    pub fn name(self) -> &'static str {
        match self {
            Type::I1 => "i1",
            Type::I32 => "i32",
            Type::I64 => "i64",
            Type::F64 => "f64",
            Type::Ptr => "ptr",
        }
    }

    pub fn from_name(s: &str) -> Option<Type> {
        Type::ALL.into_iter().find(|t| t.name() == s)
    }

    /// Bytes moved when a value of this type crosses a call boundary.
    pub fn size_bytes(self) -> u64 {
        match self {
            Type::I1 => 1,
            Type::I32 => 4,
            Type::I64 | Type::F64 | Type::Ptr => 8,
        }
    }

    pub fn is_int(self) -> bool {
        matches!(self, Type::I1 | Type::I32 | Type::I64)
    }

    /// The neutral literal passed for parameters of an inactive merge parent.
    pub fn zero(self) -> Literal {
        match self {
            Type::I1 => Literal::Bool(false),
            Type::I32 | Type::I64 => Literal::Int(0),
            Type::F64 => Literal::Float(0.0),
            Type::Ptr => Literal::Null,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Instruction opcodes. This is both the alignment alphabet and the
/// feature alphabet of the cost models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    SDiv,
    SRem,
    And,
    Or,
    Xor,
    Shl,
    AShr,
    FAdd,
    FSub,
    FMul,
    FDiv,
    ICmp,
    FCmp,
    Select,
    ZExt,
    Trunc,
    SIToFP,
    FPToSI,
    Load,
    Store,
    Gep,
    Const,
    Alloca,
    Call,
    Br,
    Jmp,
    Ret,
}

pub const NUM_OPCODES: usize = 30;

impl Opcode {
    pub const ALL: [Opcode; NUM_OPCODES] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::SDiv,
        Opcode::SRem,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Shl,
        Opcode::AShr,
        Opcode::FAdd,
        Opcode::FSub,
        Opcode::FMul,
        Opcode::FDiv,
        Opcode::ICmp,
        Opcode::FCmp,
        Opcode::Select,
        Opcode::ZExt,
        Opcode::Trunc,
        Opcode::SIToFP,
        Opcode::FPToSI,
        Opcode::Load,
        Opcode::Store,
        Opcode::Gep,
        Opcode::Const,
        Opcode::Alloca,
        Opcode::Call,
        Opcode::Br,
        Opcode::Jmp,
        Opcode::Ret,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::SDiv => "sdiv",
            Opcode::SRem => "srem",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Shl => "shl",
            Opcode::AShr => "ashr",
            Opcode::FAdd => "fadd",
            Opcode::FSub => "fsub",
            Opcode::FMul => "fmul",
            Opcode::FDiv => "fdiv",
            Opcode::ICmp => "icmp",
            Opcode::FCmp => "fcmp",
            Opcode::Select => "select",
            Opcode::ZExt => "zext",
            Opcode::Trunc => "trunc",
            Opcode::SIToFP => "sitofp",
            Opcode::FPToSI => "fptosi",
            Opcode::Load => "load",
            Opcode::Store => "store",
            Opcode::Gep => "gep",
            Opcode::Const => "const",
            Opcode::Alloca => "alloca",
            Opcode::Call => "call",
            Opcode::Br => "br",
            Opcode::Jmp => "jmp",
            Opcode::Ret => "ret",
        }
    }

    pub fn from_name(s: &str) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|o| o.name() == s)
    }

    pub fn is_terminator(self) -> bool {
        matches!(self, Opcode::Br | Opcode::Jmp | Opcode::Ret)
    }

    pub fn is_int_binary(self) -> bool {
        matches!(
            self,
            Opcode::Add
                | Opcode::Sub
                | Opcode::Mul
                | Opcode::SDiv
                | Opcode::SRem
                | Opcode::And
                | Opcode::Or
                | Opcode::Xor
                | Opcode::Shl
                | Opcode::AShr
        )
    }

    pub fn is_float_binary(self) -> bool {
        matches!(self, Opcode::FAdd | Opcode::FSub | Opcode::FMul | Opcode::FDiv)
    }

    pub fn is_cast(self) -> bool {
        matches!(self, Opcode::ZExt | Opcode::Trunc | Opcode::SIToFP | Opcode::FPToSI)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison predicates for `icmp` and `fcmp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pred {
    Eq,
    Ne,
    Slt,
    Sgt,
    Sle,
    Sge,
    Olt,
    Ogt,
    Oeq,
}

impl Pred {
    pub const ALL: [Pred; 9] = [
        Pred::Eq,
        Pred::Ne,
        Pred::Slt,
        Pred::Sgt,
        Pred::Sle,
        Pred::Sge,
        Pred::Olt,
        Pred::Ogt,
        Pred::Oeq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pred::Eq => "eq",
            Pred::Ne => "ne",
            Pred::Slt => "slt",
            Pred::Sgt => "sgt",
            Pred::Sle => "sle",
            Pred::Sge => "sge",
            Pred::Olt => "olt",
            Pred::Ogt => "ogt",
            Pred::Oeq => "oeq",
        }
    }

    pub fn from_name(s: &str) -> Option<Pred> {
        Pred::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn is_float(self) -> bool {
        matches!(self, Pred::Olt | Pred::Ogt | Pred::Oeq)
    }
}

/// A literal constant. Its type comes from the instruction that uses it.
#[derive(Debug, Clone, Copy)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
}

// Floats compare by bit pattern so that structural equality is exact.
impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Literal::Int(a), Literal::Int(b)) => a == b,
            (Literal::Float(a), Literal::Float(b)) => a.to_bits() == b.to_bits(),
            (Literal::Bool(a), Literal::Bool(b)) => a == b,
            (Literal::Null, Literal::Null) => true,
            _ => false,
        }
    }
}

impl Eq for Literal {}

impl std::hash::Hash for Literal {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Literal::Int(v) => v.hash(state),
            Literal::Float(v) => v.to_bits().hash(state),
            Literal::Bool(v) => v.hash(state),
            Literal::Null => {}
        }
    }
}

impl Literal {
    pub fn fits(&self, ty: Type) -> bool {
        match (self, ty) {
            (Literal::Bool(_), Type::I1) => true,
            (Literal::Int(v), Type::I32) => i32::try_from(*v).is_ok(),
            (Literal::Int(_), Type::I64) => true,
            (Literal::Float(_), Type::F64) => true,
            (Literal::Null, Type::Ptr) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Float(v) => write!(f, "{v:?}"),
            Literal::Bool(v) => write!(f, "{v}"),
            Literal::Null => f.write_str("null"),
        }
    }
}

/// A register (mutable variable) name, stored without the `%` sigil.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reg(pub String);

impl Reg {
    pub fn new(name: impl Into<String>) -> Reg {
        Reg(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Reg(Reg),
    Lit(Literal),
}

impl Operand {
    pub fn reg(name: impl Into<String>) -> Operand {
        Operand::Reg(Reg::new(name))
    }

    pub fn as_reg(&self) -> Option<&Reg> {
        match self {
            Operand::Reg(r) => Some(r),
            Operand::Lit(_) => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => r.fmt(f),
            Operand::Lit(l) => l.fmt(f),
        }
    }
}

/// One instruction.
///
/// `ty` is the type annotation: the operand type for arithmetic, compares,
/// `select`, `load`/`store` and `const`; the source type for casts; the
/// return type for `call` and `ret` (`None` for void); `ptr` for `gep`;
/// `i1` for `br`; `None` for `jmp` and `alloca`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Inst {
    pub opcode: Opcode,
    pub dest: Option<Reg>,
    pub ty: Option<Type>,
    pub pred: Option<Pred>,
    pub cast_to: Option<Type>,
    pub callee: Option<String>,
    pub operands: Vec<Operand>,
    pub targets: Vec<String>,
}

impl Inst {
    fn base(opcode: Opcode) -> Inst {
        Inst {
            opcode,
            dest: None,
            ty: None,
            pred: None,
            cast_to: None,
            callee: None,
            operands: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn binary(opcode: Opcode, dest: Reg, ty: Type, lhs: Operand, rhs: Operand) -> Inst {
        Inst { dest: Some(dest), ty: Some(ty), operands: vec![lhs, rhs], ..Inst::base(opcode) }
    }

    pub fn cmp(opcode: Opcode, pred: Pred, dest: Reg, ty: Type, lhs: Operand, rhs: Operand) -> Inst {
        Inst {
            dest: Some(dest),
            ty: Some(ty),
            pred: Some(pred),
            operands: vec![lhs, rhs],
            ..Inst::base(opcode)
        }
    }

    pub fn select(dest: Reg, ty: Type, cond: Operand, a: Operand, b: Operand) -> Inst {
        Inst { dest: Some(dest), ty: Some(ty), operands: vec![cond, a, b], ..Inst::base(Opcode::Select) }
    }

    pub fn cast(opcode: Opcode, dest: Reg, from: Type, value: Operand, to: Type) -> Inst {
        Inst {
            dest: Some(dest),
            ty: Some(from),
            cast_to: Some(to),
            operands: vec![value],
            ..Inst::base(opcode)
        }
    }

    pub fn load(dest: Reg, ty: Type, ptr: Operand) -> Inst {
        Inst { dest: Some(dest), ty: Some(ty), operands: vec![ptr], ..Inst::base(Opcode::Load) }
    }

    pub fn store(ty: Type, value: Operand, ptr: Operand) -> Inst {
        Inst { ty: Some(ty), operands: vec![value, ptr], ..Inst::base(Opcode::Store) }
    }

    pub fn gep(dest: Reg, ptr: Operand, index: Operand) -> Inst {
        Inst { dest: Some(dest), ty: Some(Type::Ptr), operands: vec![ptr, index], ..Inst::base(Opcode::Gep) }
    }

    pub fn constant(dest: Reg, ty: Type, value: Literal) -> Inst {
        Inst { dest: Some(dest), ty: Some(ty), operands: vec![Operand::Lit(value)], ..Inst::base(Opcode::Const) }
    }

    pub fn alloca(dest: Reg, slots: i64) -> Inst {
        Inst { dest: Some(dest), operands: vec![Operand::Lit(Literal::Int(slots))], ..Inst::base(Opcode::Alloca) }
    }

    pub fn call(dest: Option<Reg>, ret: Option<Type>, callee: impl Into<String>, args: Vec<Operand>) -> Inst {
        Inst { dest, ty: ret, callee: Some(callee.into()), operands: args, ..Inst::base(Opcode::Call) }
    }

    pub fn br(cond: Operand, if_true: impl Into<String>, if_false: impl Into<String>) -> Inst {
        Inst {
            ty: Some(Type::I1),
            operands: vec![cond],
            targets: vec![if_true.into(), if_false.into()],
            ..Inst::base(Opcode::Br)
        }
    }

    pub fn jmp(target: impl Into<String>) -> Inst {
        Inst { targets: vec![target.into()], ..Inst::base(Opcode::Jmp) }
    }

    pub fn ret(value: Option<(Type, Operand)>) -> Inst {
        match value {
            Some((ty, v)) => Inst { ty: Some(ty), operands: vec![v], ..Inst::base(Opcode::Ret) },
            None => Inst::base(Opcode::Ret),
        }
    }

    pub fn is_terminator(&self) -> bool {
        self.opcode.is_terminator()
    }

    /// The type of the value written to `dest`, if any.
    pub fn result_type(&self) -> Option<Type> {
        match self.opcode {
            Opcode::ICmp | Opcode::FCmp => Some(Type::I1),
            Opcode::ZExt | Opcode::Trunc | Opcode::SIToFP | Opcode::FPToSI => self.cast_to,
            Opcode::Gep | Opcode::Alloca => Some(Type::Ptr),
            Opcode::Store | Opcode::Br | Opcode::Jmp | Opcode::Ret => None,
            _ => self.ty,
        }
    }

    /// Expected type of operand `k`. Call arguments take their type from the
    /// callee's signature in `m`.
    pub fn operand_type(&self, k: usize, m: &Module) -> Option<Type> {
        match self.opcode {
            Opcode::Select if k == 0 => Some(Type::I1),
            Opcode::Store if k == 1 => Some(Type::Ptr),
            Opcode::Load => Some(Type::Ptr),
            Opcode::Gep if k == 0 => Some(Type::Ptr),
            Opcode::Gep | Opcode::Alloca => Some(Type::I64),
            Opcode::Br => Some(Type::I1),
            Opcode::Jmp => None,
            Opcode::Call => m.function(self.callee.as_deref()?)?.params.get(k).map(|p| p.ty),
            _ => self.ty,
        }
    }

    pub fn uses(&self) -> impl Iterator<Item = &Reg> {
        self.operands.iter().filter_map(Operand::as_reg)
    }
}

/// Where a function came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Original,
    ExtractedLoop,
    Merged,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::ExtractedLoop => "extracted-loop",
            Provenance::Merged => "merged",
        }
    }

    pub fn from_name(s: &str) -> Option<Provenance> {
        [Provenance::Original, Provenance::ExtractedLoop, Provenance::Merged]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: Reg,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Inst>,
}

impl Block {
    pub fn new(label: impl Into<String>, insts: Vec<Inst>) -> Block {
        Block { label: label.into(), insts }
    }

    pub fn terminator(&self) -> Option<&Inst> {
        self.insts.last().filter(|i| i.is_terminator())
    }

    pub fn successors(&self) -> &[String] {
        self.terminator().map(|t| t.targets.as_slice()).unwrap_or(&[])
    }
}

/// A function. The first block is the entry block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<Type>,
    pub blocks: Vec<Block>,
    pub provenance: Provenance,
}

impl Function {
    pub fn entry(&self) -> &Block {
        &self.blocks[0]
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn insts(&self) -> impl Iterator<Item = &Inst> {
        self.blocks.iter().flat_map(|b| b.insts.iter())
    }

    /// Static instruction count.
    pub fn size(&self) -> usize {
        self.blocks.iter().map(|b| b.insts.len()).sum()
    }

    /// Names of callees in static call-site order (with repetition).
    pub fn call_sites(&self) -> impl Iterator<Item = &str> {
        self.insts().filter_map(|i| i.callee.as_deref())
    }

    /// Type of every register: parameters plus instruction results.
    pub fn register_types(&self) -> BTreeMap<Reg, Type> {
        let mut types = BTreeMap::new();
        for p in &self.params {
            types.insert(p.name.clone(), p.ty);
        }
        for inst in self.insts() {
            if let (Some(d), Some(t)) = (&inst.dest, inst.result_type()) {
                types.entry(d.clone()).or_insert(t);
            }
        }
        types
    }
}

/// A set of functions plus a designated entry function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub functions: BTreeMap<String, Function>,
    pub entry: String,
}

impl Module {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.get(name)
    }

    pub fn entry_function(&self) -> &Function {
        &self.functions[&self.entry]
    }

    pub fn add_function(&mut self, f: Function) {
        self.functions.insert(f.name.clone(), f);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }
}
