use std::fmt::Write;

use super::{Function, Inst, Module, Opcode, Provenance};

fn ty_or_void(t: Option<super::Type>) -> &'static str {
    t.map(|t| t.name()).unwrap_or("void")
}

fn write_inst(out: &mut String, inst: &Inst) {
    out.push_str("  ");
    if let Some(d) = &inst.dest {
        let _ = write!(out, "{d} = ");
    }
    let op = inst.opcode;
    let ops = &inst.operands;
    let joined = |xs: &[super::Operand]| xs.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", ");
    let ty = ty_or_void(inst.ty);
    let _ = match op {
        Opcode::ICmp | Opcode::FCmp => {
            let pred = inst.pred.map(|p| p.name()).unwrap_or("?");
            write!(out, "{op} {pred} {ty} {}", joined(ops))
        }
        Opcode::ZExt | Opcode::Trunc | Opcode::SIToFP | Opcode::FPToSI => {
            write!(out, "{op} {ty} {} to {}", joined(ops), ty_or_void(inst.cast_to))
        }
        Opcode::Gep | Opcode::Alloca => write!(out, "{op} {}", joined(ops)),
        Opcode::Call => write!(
            out,
            "call {ty} @{}({})",
            inst.callee.as_deref().unwrap_or("?"),
            joined(ops)
        ),
        Opcode::Br => write!(out, "br i1 {}, {}", joined(ops), inst.targets.join(", ")),
        Opcode::Jmp => write!(out, "jmp {}", inst.targets.join(", ")),
        Opcode::Ret if inst.ty.is_none() => write!(out, "ret"),
        _ => write!(out, "{op} {ty} {}", joined(ops)),
    };
    out.push('\n');
}

/// Canonical text of one function.
pub fn print_function(f: &Function) -> String {
    let mut out = String::new();
    let params: Vec<String> = f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = write!(out, "func @{}({}) -> {}", f.name, params.join(", "), ty_or_void(f.ret));
    if f.provenance != Provenance::Original {
        let _ = write!(out, " !{}", f.provenance.name());
    }
    out.push_str(" {\n");
    for b in &f.blocks {
        let _ = writeln!(out, "{}:", b.label);
        for inst in &b.insts {
            write_inst(&mut out, inst);
        }
    }
    out.push_str("}\n");
    out
}

/// Canonical text of a module: the entry directive, then functions in name order.
pub fn print_module(m: &Module) -> String {
    let mut out = format!("entry @{}\n", m.entry);
    for f in m.functions.values() {
        out.push('\n');
        out.push_str(&print_function(f));
    }
    out
}
