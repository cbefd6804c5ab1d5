//! Parser for the textual kernel format.
//!
//! ```text
//! kernel saxpy(n: u32 in [0, 16], a: f32, xs: f32[16]) {
//! block entry:
//!   i0 = const u32 0
//!   jmp head
//! block head:
//!   i = phi u32 [i0, entry], [i1, body]
//!   c = cmp.lt u32 i, n
//!   br c, body, done
//! ...
//! }
//! ```
//!
//! One instruction per line, `#` starts a comment.

use std::collections::HashMap;
use std::fmt;

use super::{
    validate, ArrayId, ArrayParam, BinOp, Block, BlockId, CmpOp, Constraint, Imm, Inst, InstKind,
    Kernel, Operand, Param, ScalarType, SpecialFn, Terminator, ValueId, ValueInfo, ViolationKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    DuplicateDefinition,
    UndefinedValue,
    TypeMismatch,
    /// A structural rule (CFG shape, phi arity) is broken.
    Invalid,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

fn err<T>(pos: Pos, kind: ParseErrorKind, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line: pos.line, col: pos.col, kind, message: message.into() })
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Punct(char),
    Newline,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Newline => f.write_str("end of line"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut paren_depth = 0usize;
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos { line: li + 1, col: i + 1 };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let starts_number = c.is_ascii_digit()
                || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.'))
                || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
            if starts_number {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let prev = chars[i - 1];
                    let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                    if d.is_ascii_alphanumeric() || d == '.' || d == '_' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((Tok::Number(chars[start..i].iter().collect()), pos));
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
                continue;
            }
            if "(){}[],:=".contains(c) {
                match c {
                    '(' => paren_depth += 1,
                    ')' => paren_depth = paren_depth.saturating_sub(1),
                    _ => {}
                }
                out.push((Tok::Punct(c), pos));
                i += 1;
                continue;
            }
            return err(pos, ParseErrorKind::Syntax, format!("unexpected character `{c}`"));
        }
        if paren_depth == 0 {
            out.push((Tok::Newline, Pos { line: li + 1, col: chars.len() + 1 }));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
enum RawArg {
    Name(String, Pos),
    Num(String, Pos),
}

impl RawArg {
    fn pos(&self) -> Pos {
        match self {
            RawArg::Name(_, p) | RawArg::Num(_, p) => *p,
        }
    }
}

#[derive(Clone, Debug)]
struct RawInst {
    pos: Pos,
    dest: Option<(String, Pos)>,
    op: String,
    ty: Option<ScalarType>,
    args: Vec<RawArg>,
    /// Phi incoming labels, parallel to `args`.
    labels: Vec<(String, Pos)>,
}

#[derive(Clone, Debug)]
struct RawBlock {
    label: String,
    pos: Pos,
    insts: Vec<RawInst>,
    term: Option<RawInst>,
}

#[derive(Clone, Debug)]
enum RawParam {
    Scalar { name: String, pos: Pos, ty: ScalarType, range: Option<(i64, i64)> },
    Array { name: String, pos: Pos, elem: ScalarType, len: usize },
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    eof: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.eof)
    }

    fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        match self.toks.get(self.at) {
            Some(t) => {
                self.at += 1;
                Ok(t.clone())
            }
            None => err(self.eof, ParseErrorKind::Syntax, "unexpected end of input"),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek() == Some(&Tok::Newline) {
            self.at += 1;
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<Pos, ParseError> {
        let (t, p) = self.next()?;
        if t == Tok::Punct(c) {
            Ok(p)
        } else {
            err(p, ParseErrorKind::Syntax, format!("expected `{c}`, found {t}"))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.next()? {
            (Tok::Ident(s), p) => Ok((s, p)),
            (t, p) => err(p, ParseErrorKind::Syntax, format!("expected identifier, found {t}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<Pos, ParseError> {
        let (s, p) = self.ident()?;
        if s == kw {
            Ok(p)
        } else {
            err(p, ParseErrorKind::Syntax, format!("expected `{kw}`, found `{s}`"))
        }
    }

    fn ty(&mut self) -> Result<ScalarType, ParseError> {
        let (s, p) = self.ident()?;
        ScalarType::from_name(&s)
            .map_or_else(|| err(p, ParseErrorKind::Syntax, format!("unknown type `{s}`")), Ok)
    }

    fn signed_int(&mut self) -> Result<i64, ParseError> {
        match self.next()? {
            (Tok::Number(s), p) => parse_int_literal(&s)
                .map_or_else(|| err(p, ParseErrorKind::Syntax, format!("bad integer `{s}`")), Ok),
            (t, p) => err(p, ParseErrorKind::Syntax, format!("expected integer, found {t}")),
        }
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        match self.next()? {
            (Tok::Newline, _) => Ok(()),
            (t, p) => err(p, ParseErrorKind::Syntax, format!("expected end of line, found {t}")),
        }
    }

    fn arg(&mut self) -> Result<RawArg, ParseError> {
        match self.next()? {
            (Tok::Ident(s), p) => Ok(RawArg::Name(s, p)),
            (Tok::Number(s), p) => Ok(RawArg::Num(s, p)),
            (t, p) => err(p, ParseErrorKind::Syntax, format!("expected operand, found {t}")),
        }
    }

    fn params(&mut self) -> Result<Vec<RawParam>, ParseError> {
        self.expect_punct('(')?;
        let mut params = Vec::new();
        if self.eat_punct(')') {
            return Ok(params);
        }
        loop {
            let (name, pos) = self.ident()?;
            self.expect_punct(':')?;
            let ty = self.ty()?;
            if self.eat_punct('[') {
                let len = self.signed_int()?;
                self.expect_punct(']')?;
                if len <= 0 {
                    return err(pos, ParseErrorKind::Syntax, "array length must be positive");
                }
                params.push(RawParam::Array { name, pos, elem: ty, len: len as usize });
            } else {
                let mut range = None;
                if self.peek() == Some(&Tok::Ident("in".into())) {
                    self.at += 1;
                    self.expect_punct('[')?;
                    let lo = self.signed_int()?;
                    self.expect_punct(',')?;
                    let hi = self.signed_int()?;
                    self.expect_punct(']')?;
                    if ty.is_float() {
                        return err(pos, ParseErrorKind::TypeMismatch, "ranges apply to integers only");
                    }
                    if lo > hi {
                        return err(pos, ParseErrorKind::Syntax, "empty declared range");
                    }
                    range = Some((lo, hi));
                }
                params.push(RawParam::Scalar { name, pos, ty, range });
            }
            if self.eat_punct(')') {
                break;
            }
            self.expect_punct(',')?;
        }
        Ok(params)
    }

    fn statement(&mut self) -> Result<RawInst, ParseError> {
        let pos = self.pos();
        let (first, first_pos) = self.ident()?;
        let (dest, op) = if self.eat_punct('=') {
            let (op, _) = self.ident()?;
            (Some((first, first_pos)), op)
        } else {
            (None, first)
        };
        let mut inst = RawInst { pos, dest, op, ty: None, args: Vec::new(), labels: Vec::new() };
        match inst.op.as_str() {
            "jmp" | "br" | "ret" => {}
            _ => inst.ty = Some(self.ty()?),
        }
        if inst.op == "phi" {
            loop {
                self.expect_punct('[')?;
                inst.args.push(self.arg()?);
                self.expect_punct(',')?;
                inst.labels.push(self.ident()?);
                self.expect_punct(']')?;
                if !self.eat_punct(',') {
                    break;
                }
            }
        } else if !matches!(self.peek(), Some(Tok::Newline) | None) {
            loop {
                inst.args.push(self.arg()?);
                if !self.eat_punct(',') {
                    break;
                }
            }
        }
        self.end_of_line()?;
        Ok(inst)
    }

    fn kernel(&mut self) -> Result<(String, Vec<RawParam>, Vec<RawBlock>), ParseError> {
        self.skip_newlines();
        self.keyword("kernel")?;
        let (name, _) = self.ident()?;
        let params = self.params()?;
        self.expect_punct('{')?;
        self.end_of_line()?;
        let mut blocks: Vec<RawBlock> = Vec::new();
        loop {
            self.skip_newlines();
            match self.peek() {
                Some(Tok::Punct('}')) => {
                    self.at += 1;
                    break;
                }
                Some(Tok::Ident(s)) if s == "block" => {
                    let pos = self.pos();
                    self.at += 1;
                    let (label, _) = self.ident()?;
                    self.expect_punct(':')?;
                    self.end_of_line()?;
                    blocks.push(RawBlock { label, pos, insts: Vec::new(), term: None });
                }
                Some(_) => {
                    let inst = self.statement()?;
                    let Some(block) = blocks.last_mut() else {
                        return err(inst.pos, ParseErrorKind::Syntax, "instruction outside a block");
                    };
                    if block.term.is_some() {
                        return err(inst.pos, ParseErrorKind::Syntax, "instruction after terminator");
                    }
                    if matches!(inst.op.as_str(), "jmp" | "br" | "ret") {
                        block.term = Some(inst);
                    } else {
                        block.insts.push(inst);
                    }
                }
                None => return err(self.eof, ParseErrorKind::Syntax, "missing closing `}`"),
            }
        }
        self.skip_newlines();
        if let Some((t, p)) = self.toks.get(self.at) {
            return err(*p, ParseErrorKind::Syntax, format!("trailing input {t}"));
        }
        if blocks.is_empty() {
            return err(self.eof, ParseErrorKind::Syntax, "kernel has no blocks");
        }
        for b in &blocks {
            if b.term.is_none() {
                return err(b.pos, ParseErrorKind::Syntax, format!("block `{}` has no terminator", b.label));
            }
        }
        Ok((name, params, blocks))
    }
}

fn parse_int_literal(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let body = body.replace('_', "");
    let mag = if let Some(hex) = body.strip_prefix("0x") {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -mag } else { mag })
}

fn parse_float_literal(s: &str) -> Option<f32> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    if let Some(hex) = body.strip_prefix("0f") {
        if hex.len() != 8 {
            return None;
        }
        let bits = u32::from_str_radix(hex, 16).ok()?;
        let v = f32::from_bits(bits);
        return Some(if neg { -v } else { v });
    }
    s.parse::<f32>().ok()
}

fn imm_for(ty: ScalarType, s: &str, pos: Pos) -> Result<Imm, ParseError> {
    if ty.is_float() {
        parse_float_literal(s)
            .map(Imm::Float)
            .map_or_else(|| err(pos, ParseErrorKind::Syntax, format!("bad float literal `{s}`")), Ok)
    } else {
        match parse_int_literal(s) {
            Some(v) if (i32::MIN as i64..=u32::MAX as i64).contains(&v) => Ok(Imm::Int(v)),
            Some(_) => err(pos, ParseErrorKind::Syntax, format!("integer literal `{s}` out of 32-bit range")),
            None => err(pos, ParseErrorKind::Syntax, format!("bad integer literal `{s}`")),
        }
    }
}

struct Resolver<'a> {
    names: HashMap<&'a str, ValueId>,
    values: &'a [ValueInfo],
    labels: HashMap<&'a str, BlockId>,
    arrays: HashMap<&'a str, ArrayId>,
}

/// Expected operand type: a concrete type, or "any integer".
#[derive(Clone, Copy)]
enum Want {
    Ty(ScalarType),
    AnyInt,
    Any,
}

impl Resolver<'_> {
    fn value(&self, name: &str, pos: Pos, want: Want) -> Result<ValueId, ParseError> {
        let Some(&v) = self.names.get(name) else {
            return err(pos, ParseErrorKind::UndefinedValue, format!("undefined value `{name}`"));
        };
        let ty = self.values[v.index()].ty;
        let ok = match want {
            Want::Ty(t) => t == ty,
            Want::AnyInt => ty.is_int(),
            Want::Any => true,
        };
        if !ok {
            return err(pos, ParseErrorKind::TypeMismatch, format!("value `{name}` has type {ty}"));
        }
        Ok(v)
    }

    fn operand(&self, arg: &RawArg, want: Want) -> Result<Operand, ParseError> {
        match arg {
            RawArg::Name(n, p) => self.value(n, *p, want).map(Operand::Value),
            RawArg::Num(s, p) => {
                let ty = match want {
                    Want::Ty(t) => t,
                    Want::AnyInt => ScalarType::I32,
                    Want::Any => {
                        return err(*p, ParseErrorKind::Syntax, "operand must be a value, not a literal")
                    }
                };
                imm_for(ty, s, *p).map(Operand::Imm)
            }
        }
    }

    fn label(&self, name: &str, pos: Pos) -> Result<BlockId, ParseError> {
        self.labels
            .get(name)
            .copied()
            .map_or_else(|| err(pos, ParseErrorKind::Invalid, format!("unknown block `{name}`")), Ok)
    }
}

fn arity_check(inst: &RawInst, n: usize) -> Result<(), ParseError> {
    if inst.args.len() != n {
        return err(
            inst.pos,
            ParseErrorKind::Syntax,
            format!("`{}` takes {n} operand(s), found {}", inst.op, inst.args.len()),
        );
    }
    Ok(())
}

enum OpShape {
    Const,
    Mov,
    Bin(BinOp),
    Cmp(CmpOp),
    Select,
    Cvt,
    Special(SpecialFn),
    Ld,
    Emit,
    Phi,
    Sigma,
}

fn op_shape(op: &str) -> Option<OpShape> {
    if let Some(rest) = op.strip_prefix("cmp.") {
        return CmpOp::from_name(rest).map(OpShape::Cmp);
    }
    if let Some(b) = BinOp::ALL.into_iter().find(|b| b.name() == op) {
        return Some(OpShape::Bin(b));
    }
    if let Some(f) = SpecialFn::ALL.into_iter().find(|f| f.name() == op) {
        return Some(OpShape::Special(f));
    }
    Some(match op {
        "const" => OpShape::Const,
        "mov" => OpShape::Mov,
        "select" => OpShape::Select,
        "cvt" => OpShape::Cvt,
        "ld" => OpShape::Ld,
        "emit" => OpShape::Emit,
        "phi" => OpShape::Phi,
        "sigma" => OpShape::Sigma,
        _ => return None,
    })
}

/// Parses and validates a kernel.
pub fn parse(text: &str) -> Result<Kernel, ParseError> {
    let toks = lex(text)?;
    let eof = Pos { line: text.lines().count().max(1), col: 1 };
    let mut p = Parser { toks, at: 0, eof };
    let (name, raw_params, raw_blocks) = p.kernel()?;

    // Pass 1: declare blocks, arrays and values.
    let mut labels = HashMap::new();
    for (i, b) in raw_blocks.iter().enumerate() {
        if labels.insert(b.label.as_str(), BlockId(i as u32)).is_some() {
            return err(b.pos, ParseErrorKind::Invalid, format!("duplicate block `{}`", b.label));
        }
    }
    let mut values: Vec<ValueInfo> = Vec::new();
    let mut names: HashMap<&str, ValueId> = HashMap::new();
    let mut arrays = Vec::new();
    let mut array_names = HashMap::new();
    let mut params = Vec::new();
    for rp in &raw_params {
        match rp {
            RawParam::Scalar { name, pos, ty, range } => {
                if names.contains_key(name.as_str()) || array_names.contains_key(name.as_str()) {
                    return err(*pos, ParseErrorKind::DuplicateDefinition, format!("`{name}` defined twice"));
                }
                let v = ValueId(values.len() as u32);
                values.push(ValueInfo { name: name.clone(), ty: *ty });
                names.insert(name.as_str(), v);
                params.push(Param::Scalar { value: v, range: *range });
            }
            RawParam::Array { name, pos, elem, len } => {
                if names.contains_key(name.as_str()) || array_names.contains_key(name.as_str()) {
                    return err(*pos, ParseErrorKind::DuplicateDefinition, format!("`{name}` defined twice"));
                }
                let a = ArrayId(arrays.len() as u32);
                arrays.push(ArrayParam { name: name.clone(), elem: *elem, len: *len });
                array_names.insert(name.as_str(), a);
                params.push(Param::Array(a));
            }
        }
    }
    for b in &raw_blocks {
        for inst in &b.insts {
            let Some((dname, dpos)) = &inst.dest else {
                if inst.op != "emit" {
                    return err(inst.pos, ParseErrorKind::Syntax, format!("`{}` needs a destination", inst.op));
                }
                continue;
            };
            if inst.op == "emit" {
                return err(inst.pos, ParseErrorKind::Syntax, "`emit` has no destination");
            }
            let ty = inst.ty.expect("non-terminators carry a type");
            let result_ty = if inst.op.starts_with("cmp.") { ScalarType::U32 } else { ty };
            if names.contains_key(dname.as_str()) || array_names.contains_key(dname.as_str()) {
                return err(*dpos, ParseErrorKind::DuplicateDefinition, format!("`{dname}` defined twice"));
            }
            let v = ValueId(values.len() as u32);
            values.push(ValueInfo { name: dname.clone(), ty: result_ty });
            names.insert(dname.as_str(), v);
        }
        if let Some(t) = &b.term {
            if t.dest.is_some() {
                return err(t.pos, ParseErrorKind::Syntax, format!("`{}` has no destination", t.op));
            }
        }
    }

    // Pass 2: resolve operands.
    let r = Resolver { names, values: &values, labels, arrays: array_names };
    let mut blocks = Vec::with_capacity(raw_blocks.len());
    let mut lines: HashMap<(u32, usize), Pos> = HashMap::new();
    for (bi, b) in raw_blocks.iter().enumerate() {
        let mut insts = Vec::with_capacity(b.insts.len());
        for (ii, raw) in b.insts.iter().enumerate() {
            lines.insert((bi as u32, ii), raw.pos);
            insts.push(resolve_inst(&r, raw)?);
        }
        let raw_term = b.term.as_ref().expect("checked above");
        lines.insert((bi as u32, b.insts.len()), raw_term.pos);
        let term = resolve_term(&r, raw_term)?;
        blocks.push(Block { label: b.label.clone(), insts, term });
    }

    let kernel = Kernel { name, params, arrays, blocks, values };
    let violations = validate(&kernel);
    if let Some(v) = violations.first() {
        let pos = v
            .location
            .and_then(|(b, i)| lines.get(&(b.0, i)).copied())
            .unwrap_or(Pos { line: 1, col: 1 });
        let kind = match v.kind {
            ViolationKind::DuplicateDefinition => ParseErrorKind::DuplicateDefinition,
            ViolationKind::Undefined | ViolationKind::NotDominated => ParseErrorKind::UndefinedValue,
            ViolationKind::Type => ParseErrorKind::TypeMismatch,
            _ => ParseErrorKind::Invalid,
        };
        return err(pos, kind, v.message.clone());
    }
    Ok(kernel)
}

fn resolve_inst(r: &Resolver<'_>, raw: &RawInst) -> Result<Inst, ParseError> {
    let Some(shape) = op_shape(&raw.op) else {
        return err(raw.pos, ParseErrorKind::Syntax, format!("unknown opcode `{}`", raw.op));
    };
    let ty = raw.ty.expect("non-terminators carry a type");
    let dest = raw.dest.as_ref().map(|(n, _)| r.names[n.as_str()]);
    let t = Want::Ty(ty);
    let (kind, args) = match shape {
        OpShape::Const => {
            arity_check(raw, 1)?;
            let RawArg::Num(s, p) = &raw.args[0] else {
                return err(raw.args[0].pos(), ParseErrorKind::Syntax, "`const` takes a literal");
            };
            (InstKind::Const, vec![Operand::Imm(imm_for(ty, s, *p)?)])
        }
        OpShape::Mov => {
            arity_check(raw, 1)?;
            (InstKind::Mov, vec![r.operand(&raw.args[0], t)?])
        }
        OpShape::Bin(op) => {
            arity_check(raw, 2)?;
            if op.int_only() && ty.is_float() {
                return err(raw.pos, ParseErrorKind::TypeMismatch, format!("`{}` is integer-only", op.name()));
            }
            (InstKind::Bin(op), vec![r.operand(&raw.args[0], t)?, r.operand(&raw.args[1], t)?])
        }
        OpShape::Cmp(op) => {
            arity_check(raw, 2)?;
            (InstKind::Cmp(op), vec![r.operand(&raw.args[0], t)?, r.operand(&raw.args[1], t)?])
        }
        OpShape::Select => {
            arity_check(raw, 3)?;
            let c = r.operand(&raw.args[0], Want::AnyInt)?;
            (InstKind::Select, vec![c, r.operand(&raw.args[1], t)?, r.operand(&raw.args[2], t)?])
        }
        OpShape::Cvt => {
            arity_check(raw, 1)?;
            (InstKind::Cvt, vec![r.operand(&raw.args[0], Want::Any)?])
        }
        OpShape::Special(f) => {
            arity_check(raw, 1)?;
            if !ty.is_float() {
                return err(raw.pos, ParseErrorKind::TypeMismatch, format!("`{}` is float-only", f.name()));
            }
            (InstKind::Special(f), vec![r.operand(&raw.args[0], t)?])
        }
        OpShape::Ld => {
            arity_check(raw, 2)?;
            let RawArg::Name(an, ap) = &raw.args[0] else {
                return err(raw.args[0].pos(), ParseErrorKind::Syntax, "`ld` takes an array name");
            };
            let Some(&a) = r.arrays.get(an.as_str()) else {
                return err(*ap, ParseErrorKind::UndefinedValue, format!("undefined array `{an}`"));
            };
            (InstKind::Ld(a), vec![r.operand(&raw.args[1], Want::AnyInt)?])
        }
        OpShape::Emit => {
            arity_check(raw, 1)?;
            (InstKind::Emit, vec![r.operand(&raw.args[0], t)?])
        }
        OpShape::Phi => {
            let mut blocks = Vec::new();
            let mut args = Vec::new();
            for (a, (l, lp)) in raw.args.iter().zip(&raw.labels) {
                args.push(r.operand(a, t)?);
                blocks.push(r.label(l, *lp)?);
            }
            (InstKind::Phi(blocks), args)
        }
        OpShape::Sigma => {
            arity_check(raw, 3)?;
            let src = r.operand(&raw.args[0], t)?;
            let RawArg::Name(opname, op_pos) = &raw.args[1] else {
                return err(raw.args[1].pos(), ParseErrorKind::Syntax, "expected comparison name");
            };
            let Some(op) = CmpOp::from_name(opname) else {
                return err(*op_pos, ParseErrorKind::Syntax, format!("unknown comparison `{opname}`"));
            };
            let bound = r.operand(&raw.args[2], t)?;
            (InstKind::Sigma(Constraint { op, bound }), vec![src])
        }
    };
    Ok(Inst { dest, kind, ty, args })
}

fn resolve_term(r: &Resolver<'_>, raw: &RawInst) -> Result<Terminator, ParseError> {
    let label = |a: &RawArg| match a {
        RawArg::Name(n, p) => r.label(n, *p),
        RawArg::Num(_, p) => err(*p, ParseErrorKind::Syntax, "expected block label"),
    };
    match raw.op.as_str() {
        "jmp" => {
            arity_check(raw, 1)?;
            Ok(Terminator::Jmp(label(&raw.args[0])?))
        }
        "br" => {
            arity_check(raw, 3)?;
            let RawArg::Name(c, cp) = &raw.args[0] else {
                return err(raw.args[0].pos(), ParseErrorKind::Syntax, "branch condition must be a value");
            };
            Ok(Terminator::Br {
                cond: r.value(c, *cp, Want::AnyInt)?,
                then_to: label(&raw.args[1])?,
                else_to: label(&raw.args[2])?,
            })
        }
        _ => {
            let ops = raw
                .args
                .iter()
                .map(|a| match a {
                    RawArg::Name(..) => r.operand(a, Want::Any),
                    RawArg::Num(s, p) => imm_for(ScalarType::I32, s, *p)
                        .or_else(|_| imm_for(ScalarType::F32, s, *p))
                        .map(Operand::Imm),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Terminator::Ret(ops))
        }
    }
}
