//! Text format reader.
//!
//! ```text
//! entry @main                      ; optional, defaults to @main or the first function
//! func @name(%p: i32, %q: ptr) -> i32 {
//! bb0:
//!   %x = add i32 %p, 1
//!   ret i32 %x
//! }
//! ```

use std::collections::HashMap;
use std::fmt;

use super::validate::{validate_module, ValidationError};
use super::{Block, Function, Inst, Literal, Module, Opcode, Operand, Param, Pred, Provenance, Reg, Type};

/// One problem found in the source, with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {}", .0)]
    Syntax(Diagnostic),
    #[error("invalid module: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

impl ParseError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            ParseError::Syntax(d) => vec![d.clone()],
            ParseError::Invalid(ds) => ds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Reg(String),
    Global(String),
    Num(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Reg(s) => write!(f, "`%{s}`"),
            Tok::Global(s) => write!(f, "`@{s}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, Diagnostic> {
    let mut out = Vec::new();
    for (lno, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == ';' {
                break;
            }
            let take = |start: usize| {
                let mut j = start;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                j
            };
            let tok = match c {
                '%' | '@' => {
                    let j = take(i + 1);
                    if j == i + 1 {
                        return Err(Diagnostic { line: lno + 1, col, message: format!("expected a name after `{c}`") });
                    }
                    let name: String = chars[i + 1..j].iter().collect();
                    i = j;
                    if c == '%' {
                        Tok::Reg(name)
                    } else {
                        Tok::Global(name)
                    }
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    i += 2;
                    Tok::Punct("->")
                }
                '-' | '0'..='9' => {
                    let mut j = i + 1;
                    while j < chars.len()
                        && (is_ident_char(chars[j])
                            || ((chars[j] == '-' || chars[j] == '+') && matches!(chars[j - 1], 'e' | 'E')))
                    {
                        j += 1;
                    }
                    let s: String = chars[i..j].iter().collect();
                    i = j;
                    Tok::Num(s)
                }
                '(' | ')' | '{' | '}' | ',' | ':' | '=' | '!' => {
                    i += 1;
                    Tok::Punct(match c {
                        '(' => "(",
                        ')' => ")",
                        '{' => "{",
                        '}' => "}",
                        ',' => ",",
                        ':' => ":",
                        '=' => "=",
                        _ => "!",
                    })
                }
                _ if is_ident_char(c) => {
                    let mut j = take(i);
                    // hyphenated words such as `extracted-loop`
                    while j + 1 < chars.len() && chars[j] == '-' && chars[j + 1].is_ascii_alphabetic() {
                        j = take(j + 1);
                    }
                    let s: String = chars[i..j].iter().collect();
                    i = j;
                    Tok::Ident(s)
                }
                _ => {
                    return Err(Diagnostic { line: lno + 1, col, message: format!("unexpected character `{c}`") });
                }
            };
            out.push((tok, lno + 1, col));
        }
    }
    let last = src.lines().count().max(1);
    out.push((Tok::Eof, last, 1));
    Ok(out)
}

/// Source positions of parsed items, used to place validation errors.
#[derive(Default)]
struct Positions {
    funcs: HashMap<String, (usize, usize)>,
    blocks: HashMap<(String, String), (usize, usize)>,
    insts: HashMap<(String, String, usize), (usize, usize)>,
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    positions: Positions,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = &self.toks[self.pos];
        (*l, *c)
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        let (line, col) = self.here();
        Err(Diagnostic { line, col, message: format!("expected {expected}, found {}", self.peek()) })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn punct(&mut self, p: &'static str) -> PResult<()> {
        if self.peek() == &Tok::Punct(p) {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("`{p}`"))
        }
    }

    fn eat_punct(&mut self, p: &'static str) -> bool {
        if self.peek() == &Tok::Punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => self.fail(&format!("`{kw}`")),
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn global(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Global(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail("a function name `@name`"),
        }
    }

    fn reg(&mut self) -> PResult<Reg> {
        match self.peek().clone() {
            Tok::Reg(s) => {
                self.bump();
                Ok(Reg(s))
            }
            _ => self.fail("a register `%name`"),
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        match self.peek() {
            Tok::Ident(s) => match Type::from_name(s) {
                Some(t) => {
                    self.bump();
                    Ok(t)
                }
                None => self.fail("a type"),
            },
            _ => self.fail("a type"),
        }
    }

    fn ret_ty(&mut self) -> PResult<Option<Type>> {
        if matches!(self.peek(), Tok::Ident(s) if s == "void") {
            self.bump();
            Ok(None)
        } else {
            self.ty().map(Some)
        }
    }

    fn peek_is_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if Type::from_name(s).is_some())
    }

    fn literal(&mut self) -> PResult<Literal> {
        let lit = match self.peek() {
            Tok::Num(s) => {
                if let Ok(v) = s.parse::<i64>() {
                    Some(Literal::Int(v))
                } else if s.contains(['.', 'e', 'E']) || s.ends_with("inf") {
                    s.parse::<f64>().ok().map(Literal::Float)
                } else {
                    None
                }
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => Some(Literal::Bool(true)),
                "false" => Some(Literal::Bool(false)),
                "null" => Some(Literal::Null),
                "inf" | "NaN" => s.parse::<f64>().ok().map(Literal::Float),
                _ => None,
            },
            _ => None,
        };
        match lit {
            Some(l) => {
                self.bump();
                Ok(l)
            }
            None => self.fail("a literal"),
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        if let Tok::Reg(_) = self.peek() {
            return self.reg().map(Operand::Reg);
        }
        self.literal().map(Operand::Lit).or_else(|_| self.fail("an operand"))
    }

    fn label(&mut self) -> PResult<String> {
        self.ident("a block label")
    }

    fn module(&mut self) -> PResult<Module> {
        let mut entry = None;
        let mut functions = std::collections::BTreeMap::new();
        let mut first = None;
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) if s == "entry" => {
                    self.bump();
                    entry = Some(self.global()?);
                }
                Tok::Ident(s) if s == "func" => {
                    let at = self.here();
                    let f = self.function()?;
                    if functions.contains_key(&f.name) {
                        return Err(Diagnostic { line: at.0, col: at.1, message: format!("duplicate function @{}", f.name) });
                    }
                    first.get_or_insert_with(|| f.name.clone());
                    self.positions.funcs.insert(f.name.clone(), at);
                    functions.insert(f.name.clone(), f);
                }
                _ => return self.fail("`func` or `entry`"),
            }
        }
        let entry = entry
            .or_else(|| functions.contains_key("main").then(|| "main".to_owned()))
            .or(first)
            .unwrap_or_default();
        Ok(Module { functions, entry })
    }

    fn function(&mut self) -> PResult<Function> {
        self.keyword("func")?;
        let name = self.global()?;
        self.punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let name = self.reg()?;
                self.punct(":")?;
                let ty = self.ty()?;
                params.push(Param { name, ty });
                if self.eat_punct(")") {
                    break;
                }
                self.punct(",")?;
            }
        }
        self.punct("->")?;
        let ret = self.ret_ty()?;
        let mut provenance = Provenance::Original;
        if self.eat_punct("!") {
            let p = self.ident("a provenance tag")?;
            provenance = match Provenance::from_name(&p) {
                Some(p) => p,
                None => {
                    self.pos -= 1;
                    return self.fail("`original`, `extracted-loop` or `merged`");
                }
            };
        }
        self.punct("{")?;
        let mut blocks: Vec<Block> = Vec::new();
        while !self.eat_punct("}") {
            let at = self.here();
            let label = self.label()?;
            self.punct(":")?;
            self.positions.blocks.insert((name.clone(), label.clone()), at);
            let mut insts = Vec::new();
            loop {
                // A label is an identifier followed by `:`.
                let at_label = matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Punct(":");
                if at_label || matches!(self.peek(), Tok::Punct("}") | Tok::Eof) {
                    break;
                }
                let at = self.here();
                let inst = self.inst()?;
                self.positions.insts.insert((name.clone(), label.clone(), insts.len()), at);
                insts.push(inst);
            }
            blocks.push(Block { label, insts });
            if matches!(self.peek(), Tok::Eof) {
                return self.fail("`}`");
            }
        }
        if blocks.is_empty() {
            self.pos -= 1;
            return self.fail("at least one block");
        }
        Ok(Function { name, params, ret, blocks, provenance })
    }

    fn inst(&mut self) -> PResult<Inst> {
        let dest = if let Tok::Reg(_) = self.peek() {
            let r = self.reg()?;
            self.punct("=")?;
            Some(r)
        } else {
            None
        };
        let opname = self.ident("an opcode")?;
        let Some(opcode) = Opcode::from_name(&opname) else {
            self.pos -= 1;
            return self.fail("an opcode");
        };
        let need_dest = |p: &Parser| -> PResult<Reg> {
            match &dest {
                Some(d) => Ok(d.clone()),
                None => {
                    let (line, col) = p.here();
                    Err(Diagnostic { line, col, message: format!("`{opname}` needs a result register") })
                }
            }
        };
        let inst = match opcode {
            _ if opcode.is_int_binary() || opcode.is_float_binary() => {
                let d = need_dest(self)?;
                let ty = self.ty()?;
                let a = self.operand()?;
                self.punct(",")?;
                let b = self.operand()?;
                Inst::binary(opcode, d, ty, a, b)
            }
            Opcode::ICmp | Opcode::FCmp => {
                let d = need_dest(self)?;
                let p = self.ident("a predicate")?;
                let Some(pred) = Pred::from_name(&p) else {
                    self.pos -= 1;
                    return self.fail("a comparison predicate");
                };
                let ty = self.ty()?;
                let a = self.operand()?;
                self.punct(",")?;
                let b = self.operand()?;
                Inst::cmp(opcode, pred, d, ty, a, b)
            }
            Opcode::Select => {
                let d = need_dest(self)?;
                let ty = self.ty()?;
                let c = self.operand()?;
                self.punct(",")?;
                let a = self.operand()?;
                self.punct(",")?;
                let b = self.operand()?;
                Inst::select(d, ty, c, a, b)
            }
            Opcode::ZExt | Opcode::Trunc | Opcode::SIToFP | Opcode::FPToSI => {
                let d = need_dest(self)?;
                let from = self.ty()?;
                let v = self.operand()?;
                self.keyword("to")?;
                let to = self.ty()?;
                Inst::cast(opcode, d, from, v, to)
            }
            Opcode::Load => {
                let d = need_dest(self)?;
                let ty = self.ty()?;
                let p = self.operand()?;
                Inst::load(d, ty, p)
            }
            Opcode::Store => {
                let ty = self.ty()?;
                let v = self.operand()?;
                self.punct(",")?;
                let p = self.operand()?;
                Inst::store(ty, v, p)
            }
            Opcode::Gep => {
                let d = need_dest(self)?;
                let p = self.operand()?;
                self.punct(",")?;
                let i = self.operand()?;
                Inst::gep(d, p, i)
            }
            Opcode::Const => {
                let d = need_dest(self)?;
                let ty = self.ty()?;
                let l = self.literal()?;
                Inst::constant(d, ty, l)
            }
            Opcode::Alloca => {
                let d = need_dest(self)?;
                match self.literal()? {
                    Literal::Int(n) => Inst::alloca(d, n),
                    _ => {
                        self.pos -= 1;
                        return self.fail("an integer slot count");
                    }
                }
            }
            Opcode::Call => {
                let ret = self.ret_ty()?;
                let callee = self.global()?;
                self.punct("(")?;
                let mut args = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        args.push(self.operand()?);
                        if self.eat_punct(")") {
                            break;
                        }
                        self.punct(",")?;
                    }
                }
                Inst::call(dest.clone(), ret, callee, args)
            }
            Opcode::Br => {
                if self.peek_is_type() {
                    let t = self.ty()?;
                    if t != Type::I1 {
                        self.pos -= 1;
                        return self.fail("`i1`");
                    }
                }
                let c = self.operand()?;
                self.punct(",")?;
                let t = self.label()?;
                self.punct(",")?;
                let f = self.label()?;
                Inst::br(c, t, f)
            }
            Opcode::Jmp => {
                let t = self.label()?;
                Inst::jmp(t)
            }
            Opcode::Ret => {
                if self.peek_is_type() {
                    let ty = self.ty()?;
                    let v = self.operand()?;
                    Inst::ret(Some((ty, v)))
                } else {
                    Inst::ret(None)
                }
            }
            _ => unreachable!(),
        };
        let mut inst = inst;
        if dest.is_some() && inst.dest.is_none() {
            // Keeps the parse lossless; the validator reports the misuse.
            inst.dest = dest;
        }
        Ok(inst)
    }
}

fn place(pos: &Positions, e: &ValidationError) -> Diagnostic {
    let (line, col) = e
        .location
        .as_ref()
        .and_then(|l| match (&l.block, l.index) {
            (Some(b), Some(i)) => pos.insts.get(&(l.function.clone(), b.clone(), i)).copied(),
            (Some(b), None) => pos.blocks.get(&(l.function.clone(), b.clone())).copied(),
            _ => pos.funcs.get(&l.function).copied(),
        })
        .unwrap_or((1, 1));
    Diagnostic { line, col, message: e.to_string() }
}

/// Parses and validates a module.
pub fn parse_module(src: &str) -> Result<Module, ParseError> {
    let toks = lex(src).map_err(ParseError::Syntax)?;
    let mut p = Parser { toks, pos: 0, positions: Positions::default() };
    let m = p.module().map_err(ParseError::Syntax)?;
    validate_module(&m).map_err(|errs| ParseError::Invalid(errs.iter().map(|e| place(&p.positions, e)).collect()))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_function() {
        let m = parse_module("func @id(%a: i32) -> i32 { bb0: ret i32 %a }").unwrap();
        assert_eq!(m.functions.len(), 1);
        let f = &m.functions["id"];
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(m.entry, "id");
    }

    #[test]
    fn use_before_assignment_is_reported() {
        let err = parse_module("func @bad() -> i32 { bb0: %x = add i32 %y, 1\n ret i32 %x }").unwrap_err();
        let ParseError::Invalid(ds) = err else { panic!("expected validation error") };
        assert!(ds.iter().any(|d| d.message.contains("register %y used before assignment")), "{ds:?}");
        assert_eq!(ds[0].line, 1);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_module("func @f() -> i32 {\nbb0:\n  %x = add i32 %a %b\n}").unwrap_err();
        let ParseError::Syntax(d) = err else { panic!() };
        assert_eq!((d.line, d.col), (3, 19));
        assert!(d.message.contains("`,`"), "{}", d.message);
    }

    #[test]
    fn undefined_label_and_callee() {
        let e = parse_module("func @f() -> void { bb0: jmp nowhere }").unwrap_err();
        assert!(e.to_string().contains("undefined label nowhere"));
        let e = parse_module("func @f() -> void { bb0: call void @g()\n ret }").unwrap_err();
        assert!(e.to_string().contains("undefined callee @g"));
    }

    #[test]
    fn missing_terminator_and_type_mismatch() {
        let e = parse_module("func @f(%a: i32) -> i32 { bb0: %b = add i32 %a, 1 }").unwrap_err();
        assert!(e.to_string().contains("terminator"));
        let e = parse_module("func @f(%a: i64) -> i32 { bb0: ret i32 %a }").unwrap_err();
        assert!(e.to_string().contains("type mismatch"));
    }

    #[test]
    fn recursion_is_rejected() {
        let src = "func @a() -> void { bb0: call void @b()\n ret }\nfunc @b() -> void { bb0: call void @a()\n ret }";
        let e = parse_module(src).unwrap_err();
        assert!(e.to_string().contains("recursive call cycle"));
    }

    #[test]
    fn comments_and_literals() {
        let src = "; header\nfunc @f(%p: ptr) -> f64 { ; sig\nbb0:\n %x = const f64 -3.5e2\n %b = const i1 true\n %n = const ptr null\n ret f64 %x }";
        let m = parse_module(src).unwrap();
        let f = &m.functions["f"];
        assert_eq!(f.blocks[0].insts[0].operands[0], Operand::Lit(Literal::Float(-350.0)));
    }
}
