//! OpenQASM 2.0 subset reader and writer.
//!
//! Accepted: the `OPENQASM 2.0;` header, `include "qelib1.inc";`, one `qreg`,
//! any number of `creg`s (bits are numbered in declaration order), the gates
//! `h x z t tdg rz ry cx ccx`, `measure`, `reset`, and `if(creg==1)` on a
//! one-bit register guarding `x` or `z`. Angles may be written with `pi` and
//! the usual arithmetic. A trailing `// comm` comment tags the statement as a
//! communication gate.

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::circuit::{Circuit, CondPauli, Gate, GateKind, Tag};

/// Largest register the parser will allocate.
pub const MAX_REGISTER: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseDiagnostic {
    fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Arrow,
    EqEq,
    Plus,
    Minus,
    Star,
    Slash,
    /// `// comm` annotation; attaches to the statement it follows.
    CommMark,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{}'", s),
            Tok::Number(v) => format!("number {}", v),
            Tok::Str(s) => format!("string \"{}\"", s),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Semi => "';'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::EqEq => "'=='".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::CommMark => "'// comm'".into(),
        }
    }
}

fn lex(text: &str, diags: &mut Vec<ParseDiagnostic>) -> Vec<(Tok, Pos)> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let mut advance = 1;
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '/' if chars.get(i + 1) == Some(&'/') => {
                let start = i + 2;
                let mut end = start;
                while end < chars.len() && chars[end] != '\n' {
                    end += 1;
                }
                let body: String = chars[start..end].iter().collect();
                if body.trim() == "comm" {
                    toks.push((Tok::CommMark, pos));
                }
                advance = end - i;
            }
            '(' => toks.push((Tok::LParen, pos)),
            ')' => toks.push((Tok::RParen, pos)),
            '[' => toks.push((Tok::LBracket, pos)),
            ']' => toks.push((Tok::RBracket, pos)),
            ',' => toks.push((Tok::Comma, pos)),
            ';' => toks.push((Tok::Semi, pos)),
            '+' => toks.push((Tok::Plus, pos)),
            '*' => toks.push((Tok::Star, pos)),
            '/' => toks.push((Tok::Slash, pos)),
            '-' if chars.get(i + 1) == Some(&'>') => {
                toks.push((Tok::Arrow, pos));
                advance = 2;
            }
            '-' => toks.push((Tok::Minus, pos)),
            '=' if chars.get(i + 1) == Some(&'=') => {
                toks.push((Tok::EqEq, pos));
                advance = 2;
            }
            '"' => {
                let mut end = i + 1;
                while end < chars.len() && chars[end] != '"' && chars[end] != '\n' {
                    end += 1;
                }
                if chars.get(end) == Some(&'"') {
                    toks.push((Tok::Str(chars[i + 1..end].iter().collect()), pos));
                    advance = end + 1 - i;
                } else {
                    diags.push(ParseDiagnostic::new(pos, "unterminated string literal"));
                    advance = end - i;
                }
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut end = i;
                while end < chars.len() && (chars[end].is_ascii_digit() || chars[end] == '.') {
                    end += 1;
                }
                if end < chars.len() && (chars[end] == 'e' || chars[end] == 'E') {
                    let mut e = end + 1;
                    if e < chars.len() && (chars[e] == '+' || chars[e] == '-') {
                        e += 1;
                    }
                    if e < chars.len() && chars[e].is_ascii_digit() {
                        while e < chars.len() && chars[e].is_ascii_digit() {
                            e += 1;
                        }
                        end = e;
                    }
                }
                let s: String = chars[i..end].iter().collect();
                match s.parse::<f64>() {
                    Ok(v) => toks.push((Tok::Number(v), pos)),
                    Err(_) => diags.push(ParseDiagnostic::new(pos, format!("malformed number '{}'", s))),
                }
                advance = end - i;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = i;
                while end < chars.len() && (chars[end].is_ascii_alphanumeric() || chars[end] == '_') {
                    end += 1;
                }
                toks.push((Tok::Ident(chars[i..end].iter().collect()), pos));
                advance = end - i;
            }
            other => diags.push(ParseDiagnostic::new(
                pos,
                format!("unexpected character '{}'", other.escape_debug()),
            )),
        }
        i += advance;
        col += advance;
    }
    toks
}

struct Register {
    name: String,
    offset: usize,
    size: usize,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    eof: Pos,
    diags: Vec<ParseDiagnostic>,
    qreg: Option<Register>,
    cregs: Vec<Register>,
    num_clbits: usize,
    gates: Vec<Gate>,
    saw_header: bool,
    nesting: usize,
}

/// Statement-level failure; the diagnostic is already recorded.
struct Abort;

type PResult<T> = Result<T, Abort>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.eof)
    }

    fn fail<T>(&mut self, pos: Pos, message: impl Into<String>) -> PResult<T> {
        self.diags.push(ParseDiagnostic::new(pos, message));
        Err(Abort)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.at).cloned();
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> PResult<Pos> {
        let pos = self.pos();
        match self.next() {
            Some((t, p)) if t == want => Ok(p),
            Some((t, p)) => self.fail(p, format!("expected {}, found {}", want.describe(), t.describe())),
            None => self.fail(pos, format!("expected {}, found end of input", want.describe())),
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Ident(s), p)) => Ok((s, p)),
            Some((t, p)) => self.fail(p, format!("expected identifier, found {}", t.describe())),
            None => self.fail(pos, "expected identifier, found end of input"),
        }
    }

    fn integer(&mut self) -> PResult<(usize, Pos)> {
        let pos = self.pos();
        match self.next() {
            Some((Tok::Number(v), p)) if v.fract() == 0.0 && (0.0..1e15).contains(&v) => Ok((v as usize, p)),
            Some((t, p)) => self.fail(p, format!("expected non-negative integer, found {}", t.describe())),
            None => self.fail(pos, "expected integer, found end of input"),
        }
    }

    /// Skip to just past the next `;` (and any `// comm` after it).
    fn recover(&mut self) {
        while let Some(t) = self.next() {
            if t.0 == Tok::Semi {
                break;
            }
        }
        if self.peek() == Some(&Tok::CommMark) {
            self.at += 1;
        }
    }

    fn end_statement(&mut self) -> PResult<Tag> {
        self.expect(Tok::Semi)?;
        if self.peek() == Some(&Tok::CommMark) {
            self.at += 1;
            Ok(Tag::Comm)
        } else {
            Ok(Tag::Local)
        }
    }

    fn expr(&mut self) -> PResult<f64> {
        let mut v = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    v += self.term()?;
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> PResult<f64> {
        let mut v = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    v *= self.factor()?;
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    let pos = self.pos();
                    let d = self.factor()?;
                    if d == 0.0 {
                        return self.fail(pos, "division by zero in angle expression");
                    }
                    v /= d;
                }
                _ => return Ok(v),
            }
        }
    }

    fn factor(&mut self) -> PResult<f64> {
        let pos = self.pos();
        if self.nesting >= 64 {
            return self.fail(pos, "angle expression nested too deeply");
        }
        self.nesting += 1;
        let v = self.factor_inner(pos);
        self.nesting -= 1;
        v
    }

    fn factor_inner(&mut self, pos: Pos) -> PResult<f64> {
        match self.next() {
            Some((Tok::Minus, _)) => Ok(-self.factor()?),
            Some((Tok::Plus, _)) => self.factor(),
            Some((Tok::Number(v), _)) => Ok(v),
            Some((Tok::Ident(s), _)) if s == "pi" => Ok(std::f64::consts::PI),
            Some((Tok::LParen, _)) => {
                let v = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(v)
            }
            Some((t, p)) => self.fail(p, format!("expected angle expression, found {}", t.describe())),
            None => self.fail(pos, "expected angle expression, found end of input"),
        }
    }

    /// `name[index]` resolved against the quantum register.
    fn qubit_arg(&mut self) -> PResult<usize> {
        let (name, pos) = self.ident()?;
        self.expect(Tok::LBracket)?;
        let (idx, ipos) = self.integer()?;
        self.expect(Tok::RBracket)?;
        let Some(reg) = &self.qreg else {
            return self.fail(pos, "qubit used before qreg declaration");
        };
        if reg.name != name {
            return self.fail(pos, format!("unknown quantum register '{}'", name));
        }
        if idx >= reg.size {
            return self.fail(
                ipos,
                format!("qubit index out of range: {}[{}] with size {}", name, idx, reg.size),
            );
        }
        Ok(idx)
    }

    fn clbit_arg(&mut self) -> PResult<usize> {
        let (name, pos) = self.ident()?;
        self.expect(Tok::LBracket)?;
        let (idx, ipos) = self.integer()?;
        self.expect(Tok::RBracket)?;
        let Some(reg) = self.cregs.iter().find(|r| r.name == name) else {
            return self.fail(pos, format!("unknown classical register '{}'", name));
        };
        if idx >= reg.size {
            let size = reg.size;
            return self.fail(
                ipos,
                format!("classical bit index out of range: {}[{}] with size {}", name, idx, size),
            );
        }
        Ok(reg.offset + idx)
    }

    fn register_decl(&mut self, quantum: bool, kw_pos: Pos) -> PResult<()> {
        let (name, npos) = self.ident()?;
        self.expect(Tok::LBracket)?;
        let (size, spos) = self.integer()?;
        self.expect(Tok::RBracket)?;
        self.end_statement()?;
        if size == 0 || size > MAX_REGISTER {
            return self.fail(spos, format!("register size must be in 1..={}", MAX_REGISTER));
        }
        let taken = self.qreg.as_ref().is_some_and(|r| r.name == name) || self.cregs.iter().any(|r| r.name == name);
        if taken {
            return self.fail(npos, format!("register '{}' already declared", name));
        }
        if quantum {
            if self.qreg.is_some() {
                return self.fail(kw_pos, "only one qreg is supported");
            }
            self.qreg = Some(Register { name, offset: 0, size });
        } else {
            if self.num_clbits + size > MAX_REGISTER {
                return self.fail(spos, "too many classical bits");
            }
            self.cregs.push(Register {
                name,
                offset: self.num_clbits,
                size,
            });
            self.num_clbits += size;
        }
        Ok(())
    }

    fn gate_kind(&mut self, name: &str, pos: Pos) -> PResult<GateKind> {
        let kind = match name {
            "h" => GateKind::H,
            "x" => GateKind::X,
            "z" => GateKind::Z,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "cx" | "CX" => GateKind::Cx,
            "ccx" => GateKind::Ccx,
            "rz" | "ry" => {
                self.expect(Tok::LParen)?;
                let angle = self.expr()?;
                self.expect(Tok::RParen)?;
                if !angle.is_finite() {
                    return self.fail(pos, "angle is not finite");
                }
                if name == "rz" {
                    GateKind::Rz(angle)
                } else {
                    GateKind::Ry(angle)
                }
            }
            other => return self.fail(pos, format!("unsupported gate '{}'", other)),
        };
        Ok(kind)
    }

    fn gate_statement(&mut self, name: &str, pos: Pos) -> PResult<Gate> {
        let kind = self.gate_kind(name, pos)?;
        let mut qubits = vec![self.qubit_arg()?];
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            qubits.push(self.qubit_arg()?);
        }
        let tag = self.end_statement()?;
        if qubits.len() != kind.arity() {
            return self.fail(
                pos,
                format!("{} expects {} qubit(s), got {}", name, kind.arity(), qubits.len()),
            );
        }
        if let Some(dup) = qubits.iter().enumerate().find(|(i, q)| qubits[..*i].contains(q)) {
            return self.fail(pos, format!("{} repeats qubit {}", name, dup.1));
        }
        Ok(Gate::new(kind, &qubits).with_tag(tag))
    }

    fn conditional(&mut self) -> PResult<Gate> {
        self.expect(Tok::LParen)?;
        let (reg_name, rpos) = self.ident()?;
        self.expect(Tok::EqEq)?;
        let (value, vpos) = self.integer()?;
        self.expect(Tok::RParen)?;
        let (gname, gpos) = self.ident()?;
        let pauli = match gname.as_str() {
            "x" => CondPauli::X,
            "z" => CondPauli::Z,
            other => return self.fail(gpos, format!("conditional gate must be x or z, found '{}'", other)),
        };
        let q = self.qubit_arg()?;
        let tag = self.end_statement()?;
        let Some(reg) = self.cregs.iter().find(|r| r.name == reg_name) else {
            return self.fail(rpos, format!("unknown classical register '{}'", reg_name));
        };
        if reg.size != 1 {
            return self.fail(
                rpos,
                format!("conditional register '{}' must have exactly one bit", reg_name),
            );
        }
        if value != 1 {
            return self.fail(vpos, "only ==1 conditionals are supported");
        }
        Ok(Gate::conditioned(pauli, q, reg.offset).with_tag(tag))
    }

    fn statement(&mut self) -> PResult<()> {
        let (word, pos) = self.ident()?;
        match word.as_str() {
            "OPENQASM" => {
                let vpos = self.pos();
                let v = match self.next() {
                    Some((Tok::Number(v), _)) => v,
                    _ => return self.fail(vpos, "expected version number"),
                };
                self.end_statement()?;
                if v != 2.0 {
                    return self.fail(vpos, format!("unsupported OpenQASM version {}", v));
                }
                if self.saw_header || !self.gates.is_empty() || self.qreg.is_some() {
                    return self.fail(pos, "OPENQASM header must come first");
                }
                self.saw_header = true;
            }
            "include" => {
                let spos = self.pos();
                let file = match self.next() {
                    Some((Tok::Str(s), _)) => s,
                    _ => return self.fail(spos, "expected file name string"),
                };
                self.end_statement()?;
                if file != "qelib1.inc" {
                    return self.fail(spos, format!("include files are not supported: \"{}\"", file));
                }
            }
            "qreg" => self.register_decl(true, pos)?,
            "creg" => self.register_decl(false, pos)?,
            "measure" => {
                let q = self.qubit_arg()?;
                self.expect(Tok::Arrow)?;
                let c = self.clbit_arg()?;
                let tag = self.end_statement()?;
                self.gates.push(Gate::measure(q, c).with_tag(tag));
            }
            "reset" => {
                let q = self.qubit_arg()?;
                let tag = self.end_statement()?;
                self.gates.push(Gate::reset(q).with_tag(tag));
            }
            "if" => {
                let g = self.conditional()?;
                self.gates.push(g);
            }
            "gate" | "opaque" | "barrier" | "U" | "u1" | "u2" | "u3" => {
                return self.fail(pos, format!("unsupported construct '{}'", word));
            }
            _ => {
                let g = self.gate_statement(&word, pos)?;
                self.gates.push(g);
            }
        }
        Ok(())
    }
}

/// Parse the accepted OpenQASM 2.0 subset into a [`Circuit`].
///
/// Errors do not stop the parse: each failing statement is reported and
/// skipped up to its terminating `;`, so independent later errors are still
/// collected.
pub fn parse_qasm(text: &str) -> Result<Circuit, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let toks = lex(text, &mut diags);
    let eof = eof_pos(text);
    let mut p = Parser {
        toks,
        at: 0,
        eof,
        diags,
        qreg: None,
        cregs: Vec::new(),
        num_clbits: 0,
        gates: Vec::new(),
        saw_header: false,
        nesting: 0,
    };
    while p.at < p.toks.len() {
        if p.peek() == Some(&Tok::CommMark) {
            p.at += 1;
            continue;
        }
        let start = p.at;
        if p.statement().is_err() {
            // semantic errors are raised after the `;` has been consumed
            let consumed_semi = p.toks[start..p.at].iter().any(|(t, _)| *t == Tok::Semi);
            if !consumed_semi {
                p.recover();
            }
            if p.at == start {
                p.at += 1;
            }
        }
    }
    if !p.saw_header {
        p.diags.push(ParseDiagnostic::new(
            Pos { line: 1, column: 1 },
            "missing 'OPENQASM 2.0;' header",
        ));
    }
    if p.qreg.is_none() && p.diags.is_empty() {
        p.diags.push(ParseDiagnostic::new(eof, "missing qreg declaration"));
    }
    if !p.diags.is_empty() {
        p.diags.sort_by_key(|d| (d.line, d.column));
        return Err(p.diags);
    }
    let qreg = p.qreg.expect("checked above");
    let mut c = Circuit::new(qreg.size, p.num_clbits);
    for g in p.gates {
        c.push(g).expect("gates validated during parsing");
    }
    Ok(c)
}

/// Parse raw bytes; invalid UTF-8 is reported as a diagnostic.
pub fn parse_qasm_bytes(bytes: &[u8]) -> Result<Circuit, Vec<ParseDiagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_qasm(text),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or("");
            let pos = eof_pos(valid);
            Err(vec![ParseDiagnostic::new(pos, "input is not valid UTF-8")])
        }
    }
}

fn eof_pos(text: &str) -> Pos {
    let line = 1 + text.matches('\n').count();
    let column = 1 + text.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0);
    Pos { line, column }
}

/// Deterministic text form of a circuit.
///
/// Circuits with classically conditioned gates get one single-bit register
/// `c<i>` per classical bit so every conditional is a valid `if(c<i>==1)`;
/// otherwise a single `creg c[n]` is declared. Angles are written as
/// shortest round-trip decimals.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", c.num_qubits());
    let split = c.gates().iter().any(|g| matches!(g.kind, GateKind::Conditioned { .. }));
    let bit = |i: usize| {
        if split {
            format!("c{}[0]", i)
        } else {
            format!("c[{}]", i)
        }
    };
    if c.num_clbits() > 0 {
        if split {
            for i in 0..c.num_clbits() {
                let _ = writeln!(out, "creg c{}[1];", i);
            }
        } else {
            let _ = writeln!(out, "creg c[{}];", c.num_clbits());
        }
    }
    for g in c.gates() {
        let q = |i: usize| format!("q[{}]", g.qubits[i]);
        let stmt = match g.kind {
            GateKind::Rz(a) | GateKind::Ry(a) => format!("{}({}) {};", g.kind.name(), a, q(0)),
            GateKind::Cx => format!("cx {},{};", q(0), q(1)),
            GateKind::Ccx => format!("ccx {},{},{};", q(0), q(1), q(2)),
            GateKind::Measure(cb) => format!("measure {} -> {};", q(0), bit(cb)),
            GateKind::Reset => format!("reset {};", q(0)),
            GateKind::Conditioned { pauli, clbit } => {
                let p = match pauli {
                    CondPauli::X => "x",
                    CondPauli::Z => "z",
                };
                format!("if(c{}==1) {} {};", clbit, p, q(0))
            }
            _ => format!("{} {};", g.kind.name(), q(0)),
        };
        out.push_str(&stmt);
        if g.is_comm() {
            out.push_str(" // comm");
        }
        out.push('\n');
    }
    out
}
