//! C3: virtualization. Eligible integer-arithmetic functions compile to a
//! custom bytecode array executed by an embedded stack-machine interpreter;
//! everything else is skipped with diagnostics.
//!
//! Eligible subset: integer parameters and locals, assignments, if/while,
//! return, comparisons, + - * / % arithmetic, and calls to functions defined
//! in the same file (Python and C; the Solidity back end excludes calls).

use super::cblock::{self, CStmt};
use super::pyblock::{indent_step, LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Language, Lexed, TokenKind};
use std::collections::BTreeMap;

pub fn virtualize(code: &str, language: Language, _seed: u64) -> Result<String, ObfuscateError> {
    let outcome = pass(code, language)?;
    if outcome.sites == 0 {
        return Err(ObfuscateError::NothingVirtualizable);
    }
    Ok(outcome.code)
}

// ---------------------------------------------------------------------------
// bytecode
// ---------------------------------------------------------------------------

pub mod op {
    pub const HALT: i64 = 0;
    pub const PUSH: i64 = 1;
    pub const LOAD: i64 = 2;
    pub const STORE: i64 = 3;
    pub const ADD: i64 = 4;
    pub const SUB: i64 = 5;
    pub const MUL: i64 = 6;
    pub const DIV: i64 = 7;
    pub const MOD: i64 = 8;
    pub const NEG: i64 = 9;
    pub const EQ: i64 = 10;
    pub const NE: i64 = 11;
    pub const LT: i64 = 12;
    pub const LE: i64 = 13;
    pub const GT: i64 = 14;
    pub const GE: i64 = 15;
    pub const JMP: i64 = 16;
    pub const JZ: i64 = 17;
    pub const CALL: i64 = 18;
    pub const RET: i64 = 19;
    pub const POP: i64 = 20;
}

/// Reference interpreter; the per-language emitted interpreters mirror it.
/// Division and modulo follow the host closure for language-true semantics;
/// this reference uses truncating division. The empty program returns the
/// designated unit value 0.
pub fn interpret(prog: &[i64], regs: &mut [i64], hosts: &mut dyn FnMut(usize, &[i64]) -> i64) -> i64 {
    let mut stack: Vec<i64> = Vec::new();
    let mut pc: usize = 0;
    while pc < prog.len() {
        let opcode = prog[pc];
        match opcode {
            op::PUSH => {
                stack.push(prog[pc + 1]);
                pc += 2;
            }
            op::LOAD => {
                stack.push(regs[prog[pc + 1] as usize]);
                pc += 2;
            }
            op::STORE => {
                let v = stack.pop().unwrap_or(0);
                regs[prog[pc + 1] as usize] = v;
                pc += 2;
            }
            op::ADD | op::SUB | op::MUL | op::DIV | op::MOD | op::EQ | op::NE | op::LT | op::LE | op::GT | op::GE => {
                let b = stack.pop().unwrap_or(0);
                let a = stack.pop().unwrap_or(0);
                let r = match opcode {
                    op::ADD => a.wrapping_add(b),
                    op::SUB => a.wrapping_sub(b),
                    op::MUL => a.wrapping_mul(b),
                    op::DIV => a.checked_div(b).unwrap_or(0),
                    op::MOD => a.checked_rem(b).unwrap_or(0),
                    op::EQ => (a == b) as i64,
                    op::NE => (a != b) as i64,
                    op::LT => (a < b) as i64,
                    op::LE => (a <= b) as i64,
                    op::GT => (a > b) as i64,
                    _ => (a >= b) as i64,
                };
                stack.push(r);
                pc += 1;
            }
            op::NEG => {
                let a = stack.pop().unwrap_or(0);
                stack.push(-a);
                pc += 1;
            }
            op::JMP => {
                pc = prog[pc + 1] as usize;
            }
            op::JZ => {
                let target = prog[pc + 1] as usize;
                let v = stack.pop().unwrap_or(0);
                pc += 2;
                if v == 0 {
                    pc = target;
                }
            }
            op::CALL => {
                let idx = prog[pc + 1] as usize;
                let argc = prog[pc + 2] as usize;
                let at = stack.len() - argc;
                let args: Vec<i64> = stack.split_off(at);
                stack.push(hosts(idx, &args));
                pc += 3;
            }
            op::RET => {
                return stack.pop().unwrap_or(0);
            }
            op::POP => {
                stack.pop();
                pc += 1;
            }
            _ => return 0,
        }
    }
    0
}

// ---------------------------------------------------------------------------
// micro-AST
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum VExpr {
    Const(i64),
    Var(usize),
    Neg(Box<VExpr>),
    Bin(i64, Box<VExpr>, Box<VExpr>),
    Call(usize, Vec<VExpr>),
}

#[derive(Debug, Clone)]
enum VStmt {
    Assign(usize, VExpr),
    If(VExpr, Vec<VStmt>, Vec<VStmt>),
    While(VExpr, Vec<VStmt>),
    Return(VExpr),
    Expr(VExpr),
}

#[derive(Debug)]
struct VFunction {
    /// Slot names: parameters first, then locals in first-assignment order.
    slots: Vec<String>,
    param_count: usize,
    /// In-file callee names, in host-table order.
    hosts: Vec<String>,
    body: Vec<VStmt>,
}

fn all_paths_return(stmts: &[VStmt]) -> bool {
    for stmt in stmts {
        match stmt {
            VStmt::Return(_) => return true,
            VStmt::If(_, t, e) => {
                if !e.is_empty() && all_paths_return(t) && all_paths_return(e) {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

// ---------------------------------------------------------------------------
// compiler
// ---------------------------------------------------------------------------

struct Compiler {
    prog: Vec<i64>,
}

impl Compiler {
    fn compile(body: &[VStmt]) -> Vec<i64> {
        let mut c = Compiler { prog: Vec::new() };
        c.stmts(body);
        c.prog.push(op::HALT);
        c.prog
    }

    fn stmts(&mut self, stmts: &[VStmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &VStmt) {
        match s {
            VStmt::Assign(slot, e) => {
                self.expr(e);
                self.prog.extend([op::STORE, *slot as i64]);
            }
            VStmt::Return(e) => {
                self.expr(e);
                self.prog.push(op::RET);
            }
            VStmt::Expr(e) => {
                self.expr(e);
                self.prog.push(op::POP);
            }
            VStmt::If(c, t, e) => {
                self.expr(c);
                let jz_at = self.prog.len();
                self.prog.extend([op::JZ, 0]);
                self.stmts(t);
                if e.is_empty() {
                    let end = self.prog.len() as i64;
                    self.prog[jz_at + 1] = end;
                } else {
                    let jmp_at = self.prog.len();
                    self.prog.extend([op::JMP, 0]);
                    let else_at = self.prog.len() as i64;
                    self.prog[jz_at + 1] = else_at;
                    self.stmts(e);
                    let end = self.prog.len() as i64;
                    self.prog[jmp_at + 1] = end;
                }
            }
            VStmt::While(c, body) => {
                let head = self.prog.len() as i64;
                self.expr(c);
                let jz_at = self.prog.len();
                self.prog.extend([op::JZ, 0]);
                self.stmts(body);
                self.prog.extend([op::JMP, head]);
                let end = self.prog.len() as i64;
                self.prog[jz_at + 1] = end;
            }
        }
    }

    fn expr(&mut self, e: &VExpr) {
        match e {
            VExpr::Const(v) => self.prog.extend([op::PUSH, *v]),
            VExpr::Var(s) => self.prog.extend([op::LOAD, *s as i64]),
            VExpr::Neg(inner) => {
                self.expr(inner);
                self.prog.push(op::NEG);
            }
            VExpr::Bin(opcode, a, b) => {
                self.expr(a);
                self.expr(b);
                self.prog.push(*opcode);
            }
            VExpr::Call(idx, args) => {
                for a in args {
                    self.expr(a);
                }
                self.prog.extend([op::CALL, *idx as i64, args.len() as i64]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// expression parsing over token text
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
struct PTok {
    kind: TokenKind,
    text: String,
}

struct ExprParser<'a> {
    toks: &'a [PTok],
    pos: usize,
    div_token: &'a str,
    slots: &'a mut Vec<String>,
    hosts: &'a mut Vec<String>,
    in_file_fns: &'a [String],
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&PTok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<&PTok> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.peek().map(|t| t.text == text).unwrap_or(false) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_full(&mut self) -> Option<VExpr> {
        let e = self.comparison()?;
        if self.pos == self.toks.len() {
            Some(e)
        } else {
            None
        }
    }

    fn comparison(&mut self) -> Option<VExpr> {
        let left = self.additive()?;
        let opcode = match self.peek().map(|t| t.text.as_str()) {
            Some("==") => op::EQ,
            Some("!=") => op::NE,
            Some("<") => op::LT,
            Some("<=") => op::LE,
            Some(">") => op::GT,
            Some(">=") => op::GE,
            _ => return Some(left),
        };
        self.pos += 1;
        let right = self.additive()?;
        Some(VExpr::Bin(opcode, Box::new(left), Box::new(right)))
    }

    fn additive(&mut self) -> Option<VExpr> {
        let mut e = self.multiplicative()?;
        loop {
            let opcode = match self.peek().map(|t| t.text.as_str()) {
                Some("+") => op::ADD,
                Some("-") => op::SUB,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            e = VExpr::Bin(opcode, Box::new(e), Box::new(rhs));
        }
        Some(e)
    }

    fn multiplicative(&mut self) -> Option<VExpr> {
        let mut e = self.unary()?;
        loop {
            let opcode = match self.peek().map(|t| t.text.as_str()) {
                Some("*") => op::MUL,
                Some("%") => op::MOD,
                Some(d) if d == self.div_token => op::DIV,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            e = VExpr::Bin(opcode, Box::new(e), Box::new(rhs));
        }
        Some(e)
    }

    fn unary(&mut self) -> Option<VExpr> {
        if self.eat("-") {
            return Some(VExpr::Neg(Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Option<VExpr> {
        let t = self.bump()?.clone();
        match t.kind {
            TokenKind::Number => {
                let v: i64 = t.text.parse().ok()?;
                Some(VExpr::Const(v))
            }
            TokenKind::Ident => {
                if self.peek().map(|n| n.text == "(").unwrap_or(false) {
                    // call to an in-file function
                    if !self.in_file_fns.contains(&t.text) {
                        return None;
                    }
                    self.pos += 1; // (
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.comparison()?);
                            if self.eat(")") {
                                break;
                            }
                            if !self.eat(",") {
                                return None;
                            }
                        }
                    }
                    let idx = match self.hosts.iter().position(|h| h == &t.text) {
                        Some(i) => i,
                        None => {
                            self.hosts.push(t.text.clone());
                            self.hosts.len() - 1
                        }
                    };
                    Some(VExpr::Call(idx, args))
                } else {
                    // a read must resolve to a known slot; unknown names
                    // (globals, macros) make the function ineligible
                    let slot = self.slots.iter().position(|s| s == &t.text)?;
                    Some(VExpr::Var(slot))
                }
            }
            TokenKind::Punct if t.text == "(" => {
                let e = self.comparison()?;
                if self.eat(")") {
                    Some(e)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

fn parse_expr(
    toks: &[PTok],
    div_token: &str,
    slots: &mut Vec<String>,
    hosts: &mut Vec<String>,
    in_file_fns: &[String],
) -> Option<VExpr> {
    let mut p = ExprParser { toks, pos: 0, div_token, slots, hosts, in_file_fns };
    p.parse_full()
}

const AUG_OPS: &[(&str, i64)] = &[
    ("+=", op::ADD),
    ("-=", op::SUB),
    ("*=", op::MUL),
    ("%=", op::MOD),
];

// ---------------------------------------------------------------------------
// Python front end and emission
// ---------------------------------------------------------------------------

pub(crate) fn pass(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => pass_python(code),
        Language::C | Language::Cpp => pass_c(code, language),
        Language::Solidity => pass_solidity(code),
    }
}

fn py_tokens_of(py: &PySource, li: usize) -> Vec<PTok> {
    py.tokens_of(&py.logicals[li])
        .into_iter()
        .map(|t| PTok { kind: py.token(t).kind, text: py.token_text(t).to_string() })
        .collect()
}

fn parse_py_function(py: &PySource, li: usize, in_file_fns: &[String], code: &str) -> Option<VFunction> {
    let header = py_tokens_of(&py, li);
    // def NAME ( params ) :   with plain parameter names only
    if header.len() < 5 || header[0].text != "def" || header[1].kind != TokenKind::Ident {
        return None;
    }
    if header[2].text != "(" || header.last()?.text != ":" || header[header.len() - 2].text != ")" {
        return None;
    }
    let mut slots: Vec<String> = Vec::new();
    let mut k = 3usize;
    while k < header.len() - 2 {
        match header[k].kind {
            TokenKind::Ident => slots.push(header[k].text.clone()),
            _ if header[k].text == "," => {}
            _ => return None, // defaults, annotations, *args
        }
        k += 1;
    }
    let param_count = slots.len();
    let mut hosts = Vec::new();
    let end = py.suite_end(li);
    let body_indent = py.logicals[py.next_code(li + 1)?].indent.clone();
    let body = parse_py_stmts(py, li + 1, end, &body_indent, &mut slots, &mut hosts, in_file_fns, code)?;
    if body.is_empty() || !all_paths_return(&body) {
        return None;
    }
    Some(VFunction { slots, param_count, hosts, body })
}

#[allow(clippy::too_many_arguments)]
fn parse_py_stmts(
    py: &PySource,
    from: usize,
    to: usize,
    indent: &str,
    slots: &mut Vec<String>,
    hosts: &mut Vec<String>,
    in_file_fns: &[String],
    code: &str,
) -> Option<Vec<VStmt>> {
    let mut out = Vec::new();
    let mut k = from;
    while k < to {
        let l = &py.logicals[k];
        if l.kind != LineKind::Code {
            k += 1;
            continue;
        }
        if l.indent != indent {
            return None;
        }
        let toks = py_tokens_of(py, k);
        let head = toks.first()?.text.clone();
        match head.as_str() {
            "return" => {
                let e = parse_expr(&toks[1..], "//", slots, hosts, in_file_fns)?;
                out.push(VStmt::Return(e));
                k += 1;
            }
            "if" | "while" => {
                if toks.last()?.text != ":" {
                    return None;
                }
                let cond = parse_expr(&toks[1..toks.len() - 1], "//", slots, hosts, in_file_fns)?;
                let sub_end = py.suite_end(k);
                let inner_indent = py.logicals[py.next_code(k + 1)?].indent.clone();
                if inner_indent.len() <= indent.len() {
                    return None;
                }
                let body = parse_py_stmts(py, k + 1, sub_end, &inner_indent, slots, hosts, in_file_fns, code)?;
                if body.is_empty() {
                    return None;
                }
                if head == "while" {
                    out.push(VStmt::While(cond, body));
                    k = sub_end;
                } else {
                    // optional elif/else chain
                    let mut cursor = sub_end;
                    let mut arms = vec![(cond, body)];
                    let mut els: Vec<VStmt> = Vec::new();
                    loop {
                        let Some(next) = py.next_code(cursor) else { break };
                        if next >= to || py.logicals[next].indent != *indent {
                            break;
                        }
                        match py.head_word(next) {
                            Some("elif") => {
                                let etoks = py_tokens_of(py, next);
                                if etoks.last()?.text != ":" {
                                    return None;
                                }
                                let c = parse_expr(&etoks[1..etoks.len() - 1], "//", slots, hosts, in_file_fns)?;
                                let e_end = py.suite_end(next);
                                let e_ind = py.logicals[py.next_code(next + 1)?].indent.clone();
                                let b = parse_py_stmts(py, next + 1, e_end, &e_ind, slots, hosts, in_file_fns, code)?;
                                if b.is_empty() {
                                    return None;
                                }
                                arms.push((c, b));
                                cursor = e_end;
                            }
                            Some("else") => {
                                let e_end = py.suite_end(next);
                                let e_ind = py.logicals[py.next_code(next + 1)?].indent.clone();
                                els = parse_py_stmts(py, next + 1, e_end, &e_ind, slots, hosts, in_file_fns, code)?;
                                if els.is_empty() {
                                    return None;
                                }
                                cursor = e_end;
                                break;
                            }
                            _ => break,
                        }
                    }
                    // fold arms right-to-left into nested ifs
                    let mut acc = els;
                    for (c, b) in arms.into_iter().rev() {
                        acc = vec![VStmt::If(c, b, acc)];
                    }
                    out.extend(acc);
                    k = cursor;
                }
            }
            "pass" => {
                k += 1;
            }
            _ => {
                if py.opens_suite(k) {
                    return None;
                }
                // NAME = expr | NAME op= expr | bare call
                if toks.len() >= 3 && toks[0].kind == TokenKind::Ident && toks[1].text == "=" {
                    let name = toks[0].text.clone();
                    // RHS reads resolve against slots bound so far
                    let e = parse_expr(&toks[2..], "//", slots, hosts, in_file_fns)?;
                    let slot = match slots.iter().position(|s| s == &name) {
                        Some(i) => i,
                        None => {
                            slots.push(name);
                            slots.len() - 1
                        }
                    };
                    out.push(VStmt::Assign(slot, e));
                } else if toks.len() >= 3
                    && toks[0].kind == TokenKind::Ident
                    && AUG_OPS.iter().any(|(sym, _)| *sym == toks[1].text)
                {
                    let name = toks[0].text.clone();
                    let (_, opcode) = AUG_OPS.iter().find(|(sym, _)| *sym == toks[1].text)?;
                    let slot = slots.iter().position(|s| s == &name)?;
                    let rhs = parse_expr(&toks[2..], "//", slots, hosts, in_file_fns)?;
                    out.push(VStmt::Assign(
                        slot,
                        VExpr::Bin(*opcode, Box::new(VExpr::Var(slot)), Box::new(rhs)),
                    ));
                } else if toks.len() >= 3 && toks[0].text == "//=" {
                    return None;
                } else if toks[0].kind == TokenKind::Ident && toks.get(1).map(|t| t.text == "(").unwrap_or(false) {
                    let e = parse_expr(&toks, "//", slots, hosts, in_file_fns)?;
                    if !matches!(e, VExpr::Call(..)) {
                        return None;
                    }
                    out.push(VStmt::Expr(e));
                } else {
                    return None;
                }
                k += 1;
            }
        }
    }
    Some(out)
}

const PY_VM_NAME: &str = "run_encoded_program";

fn python_interpreter_lines() -> Vec<String> {
    let src = r#"def run_encoded_program(prog, frame, call_table):
    stack = []
    pc = 0
    while pc < len(prog):
        word = prog[pc]
        if word == 1:
            stack.append(prog[pc + 1]); pc += 2
        elif word == 2:
            stack.append(frame[prog[pc + 1]]); pc += 2
        elif word == 3:
            frame[prog[pc + 1]] = stack.pop(); pc += 2
        elif word == 4:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(lhs + rhs); pc += 1
        elif word == 5:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(lhs - rhs); pc += 1
        elif word == 6:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(lhs * rhs); pc += 1
        elif word == 7:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(lhs // rhs); pc += 1
        elif word == 8:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(lhs % rhs); pc += 1
        elif word == 9:
            stack.append(-stack.pop()); pc += 1
        elif word == 10:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(1 if lhs == rhs else 0); pc += 1
        elif word == 11:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(1 if lhs != rhs else 0); pc += 1
        elif word == 12:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(1 if lhs < rhs else 0); pc += 1
        elif word == 13:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(1 if lhs <= rhs else 0); pc += 1
        elif word == 14:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(1 if lhs > rhs else 0); pc += 1
        elif word == 15:
            rhs = stack.pop(); lhs = stack.pop(); stack.append(1 if lhs >= rhs else 0); pc += 1
        elif word == 16:
            pc = prog[pc + 1]
        elif word == 17:
            target = prog[pc + 1]; pc += 2
            if stack.pop() == 0:
                pc = target
        elif word == 18:
            which = prog[pc + 1]; argc = prog[pc + 2]
            args = stack[len(stack) - argc:]
            del stack[len(stack) - argc:]
            stack.append(call_table[which](*args)); pc += 3
        elif word == 19:
            return stack.pop()
        elif word == 20:
            stack.pop(); pc += 1
        else:
            return 0
    return 0"#;
    src.lines().map(|l| l.to_string()).collect()
}

fn pass_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    if code.contains(PY_VM_NAME) {
        return Ok(PassOutcome::unchanged(code));
    }
    let step = indent_step(&py);

    // module-level function names (virtualization targets and hosts)
    let mut fn_names: Vec<String> = Vec::new();
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind == LineKind::Code
            && logical.indent.is_empty()
            && py.head_word(li) == Some("def")
        {
            let toks = py_tokens_of(&py, li);
            if toks.len() > 1 && toks[1].kind == TokenKind::Ident {
                fn_names.push(toks[1].text.clone());
            }
        }
    }
    if fn_names.is_empty() {
        return Ok(PassOutcome::unchanged(code));
    }

    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    let mut sites = 0u32;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code || !logical.indent.is_empty() || py.head_word(li) != Some("def") {
            continue;
        }
        let Some(vf) = parse_py_function(&py, li, &fn_names, code) else { continue };
        let prog = Compiler::compile(&vf.body);
        let prog_text: Vec<String> = prog.iter().map(|v| v.to_string()).collect();
        let params = vf.slots[..vf.param_count].join(", ");
        let zeroes = vf.slots.len() - vf.param_count;
        let frame = if zeroes > 0 {
            if vf.param_count > 0 {
                format!("[{}] + [0] * {}", params, zeroes)
            } else {
                format!("[0] * {zeroes}")
            }
        } else {
            format!("[{params}]")
        };
        let header = py_tokens_of(&py, li);
        let fname = header[1].text.clone();
        let hosts = vf.hosts.join(", ");
        let end = py.suite_end(li);
        let mut lines = Vec::new();
        for idx in logical.first..=logical.last {
            lines.push(py.lines[idx].clone());
        }
        lines.push(format!("{step}program = [{}]", prog_text.join(", ")));
        lines.push(format!("{step}frame = {frame}"));
        lines.push(format!("{step}call_table = [{hosts}]"));
        lines.push(format!("{step}return {PY_VM_NAME}(program, frame, call_table)"));
        let _ = fname;
        replacements[li] = Some(lines);
        for inner in li + 1..end {
            replacements[inner] = Some(vec![]);
        }
        sites += 1;
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }

    // interpreter goes after the import block
    let mut insert_at = 0usize;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        match py.head_word(li) {
            Some("import") | Some("from") => insert_at = li + 1,
            _ => break,
        }
    }
    let inject_line = if insert_at < py.logicals.len() {
        py.logicals[insert_at].first
    } else {
        py.lines.len()
    };
    let rendered = py.render(&replacements);
    let mut out_lines: Vec<String> = rendered.lines().map(|l| l.to_string()).collect();
    let mut delta = 0i64;
    for (li, r) in replacements.iter().enumerate() {
        if py.logicals[li].first >= inject_line {
            break;
        }
        if let Some(new_lines) = r {
            let old = py.logicals[li].last - py.logicals[li].first + 1;
            delta += new_lines.len() as i64 - old as i64;
        }
    }
    let at = (((inject_line as i64) + delta).max(0) as usize).min(out_lines.len());
    for (i, l) in python_interpreter_lines().into_iter().enumerate() {
        out_lines.insert(at + i, l);
    }
    let mut text = out_lines.join("\n");
    if code.ends_with('\n') {
        text.push('\n');
    }
    Ok(PassOutcome { code: text, sites })
}

// ---------------------------------------------------------------------------
// C front end and emission
// ---------------------------------------------------------------------------

const C_VM_NAME: &str = "run_encoded_program";

fn c_interpreter() -> &'static str {
    r#"static long run_encoded_program(const long *prog, long prog_len, long *frame, long (**call_table)(long *)) {
    long stack[128];
    long sp = 0;
    long pc = 0;
    long lhs;
    long rhs;
    while (pc < prog_len) {
        long word = prog[pc];
        if (word == 1) { stack[sp] = prog[pc + 1]; sp = sp + 1; pc = pc + 2; }
        else if (word == 2) { stack[sp] = frame[prog[pc + 1]]; sp = sp + 1; pc = pc + 2; }
        else if (word == 3) { sp = sp - 1; frame[prog[pc + 1]] = stack[sp]; pc = pc + 2; }
        else if (word >= 4 && word <= 8) {
            sp = sp - 1; rhs = stack[sp]; sp = sp - 1; lhs = stack[sp];
            if (word == 4) { stack[sp] = lhs + rhs; }
            else if (word == 5) { stack[sp] = lhs - rhs; }
            else if (word == 6) { stack[sp] = lhs * rhs; }
            else if (word == 7) { stack[sp] = lhs / rhs; }
            else { stack[sp] = lhs % rhs; }
            sp = sp + 1; pc = pc + 1;
        }
        else if (word == 9) { stack[sp - 1] = -stack[sp - 1]; pc = pc + 1; }
        else if (word >= 10 && word <= 15) {
            sp = sp - 1; rhs = stack[sp]; sp = sp - 1; lhs = stack[sp];
            if (word == 10) { stack[sp] = lhs == rhs; }
            else if (word == 11) { stack[sp] = lhs != rhs; }
            else if (word == 12) { stack[sp] = lhs < rhs; }
            else if (word == 13) { stack[sp] = lhs <= rhs; }
            else if (word == 14) { stack[sp] = lhs > rhs; }
            else { stack[sp] = lhs >= rhs; }
            sp = sp + 1; pc = pc + 1;
        }
        else if (word == 16) { pc = prog[pc + 1]; }
        else if (word == 17) { sp = sp - 1; if (stack[sp] == 0) { pc = prog[pc + 1]; } else { pc = pc + 2; } }
        else if (word == 18) {
            long which = prog[pc + 1];
            long argc = prog[pc + 2];
            long argbuf[8];
            long ai = 0;
            while (ai < argc) { sp = sp - 1; argbuf[argc - 1 - ai] = stack[sp]; ai = ai + 1; }
            stack[sp] = call_table[which](argbuf); sp = sp + 1; pc = pc + 3;
        }
        else if (word == 19) { sp = sp - 1; return stack[sp]; }
        else if (word == 20) { sp = sp - 1; pc = pc + 1; }
        else { return 0; }
    }
    return 0;
}
"#
}

struct CFnInfo {
    name: String,
    ret_type: String,
    params: Vec<String>,
    header_text: String,
    span: cblock::FunctionSpan,
}

fn c_fn_info(lexed: &Lexed, f: &cblock::FunctionSpan) -> Option<CFnInfo> {
    let name = lexed.text(&lexed.tokens[f.name_tok]).to_string();
    // return type: tokens on the same declaration before the name; accept
    // `static? (int|long)`
    let mut i = f.name_tok;
    let mut ret_words = Vec::new();
    while i > 0 {
        i -= 1;
        let t = &lexed.tokens[i];
        if t.kind == TokenKind::Comment {
            continue;
        }
        if t.kind == TokenKind::Keyword && matches!(lexed.text(t), "int" | "long" | "static" | "unsigned" | "short" | "void" | "char" | "double" | "float") {
            ret_words.push(lexed.text(t).to_string());
            continue;
        }
        break;
    }
    ret_words.reverse();
    let ret_type = ret_words.join(" ");
    if !matches!(ret_type.as_str(), "int" | "long" | "static int" | "static long") {
        return None;
    }
    // params: `( )`, `( void )`, or `TYPE name (, TYPE name)*`
    let mut params = Vec::new();
    let ptoks: Vec<usize> = (f.params_open + 1..f.params_close)
        .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
        .collect();
    if !(ptoks.is_empty() || (ptoks.len() == 1 && lexed.text(&lexed.tokens[ptoks[0]]) == "void")) {
        let mut k = 0usize;
        loop {
            // TYPE+ name
            let mut saw_type = false;
            while k < ptoks.len() {
                let t = &lexed.tokens[ptoks[k]];
                if t.kind == TokenKind::Keyword && matches!(lexed.text(t), "int" | "long" | "unsigned" | "short" | "signed") {
                    saw_type = true;
                    k += 1;
                } else {
                    break;
                }
            }
            if !saw_type || k >= ptoks.len() {
                return None;
            }
            let t = &lexed.tokens[ptoks[k]];
            if t.kind != TokenKind::Ident {
                return None;
            }
            params.push(lexed.text(t).to_string());
            k += 1;
            if k == ptoks.len() {
                break;
            }
            if lexed.text(&lexed.tokens[ptoks[k]]) != "," {
                return None;
            }
            k += 1;
        }
    }
    let header_start = {
        let name_tok = &lexed.tokens[f.name_tok];
        lexed.src[..name_tok.start].rfind('\n').map(|p| p + 1).unwrap_or(0)
    };
    let header_text = lexed.src[header_start..lexed.tokens[f.params_close].end].to_string();
    Some(CFnInfo { name, ret_type, params, header_text, span: f.clone() })
}

fn c_stmt_ptoks(lexed: &Lexed, start: usize, end: usize) -> Vec<PTok> {
    (start..=end)
        .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
        .map(|i| PTok { kind: lexed.tokens[i].kind, text: lexed.text(&lexed.tokens[i]).to_string() })
        .collect()
}

fn parse_c_body(
    lexed: &Lexed,
    stmts: &[CStmt],
    slots: &mut Vec<String>,
    hosts: &mut Vec<String>,
    in_file_fns: &[String],
) -> Option<Vec<VStmt>> {
    const LOCAL_TYPES: &[&str] = &["int", "long"];
    let mut out = Vec::new();
    for stmt in stmts {
        match stmt {
            CStmt::Simple { start, end } => {
                let mut toks = c_stmt_ptoks(lexed, *start, *end);
                if toks.last().map(|t| t.text == ";").unwrap_or(false) {
                    toks.pop();
                }
                if toks.is_empty() {
                    continue;
                }
                if toks[0].text == "return" {
                    let e = parse_expr(&toks[1..], "/", slots, hosts, in_file_fns)?;
                    out.push(VStmt::Return(e));
                    continue;
                }
                // declaration `int name = expr` / `long name`
                if toks[0].kind == TokenKind::Keyword && LOCAL_TYPES.contains(&toks[0].text.as_str()) {
                    if toks.len() < 2 || toks[1].kind != TokenKind::Ident {
                        return None;
                    }
                    let name = toks[1].text.clone();
                    if slots.contains(&name) {
                        return None;
                    }
                    slots.push(name.clone());
                    let slot = slots.len() - 1;
                    if toks.len() == 2 {
                        out.push(VStmt::Assign(slot, VExpr::Const(0)));
                        continue;
                    }
                    if toks[2].text != "=" {
                        return None;
                    }
                    let e = parse_expr(&toks[3..], "/", slots, hosts, in_file_fns)?;
                    out.push(VStmt::Assign(slot, e));
                    continue;
                }
                // assignment / augmented / bare call
                if toks.len() >= 3 && toks[0].kind == TokenKind::Ident && toks[1].text == "=" {
                    let slot = slots.iter().position(|s| s == &toks[0].text)?;
                    let e = parse_expr(&toks[2..], "/", slots, hosts, in_file_fns)?;
                    out.push(VStmt::Assign(slot, e));
                    continue;
                }
                if toks.len() >= 3
                    && toks[0].kind == TokenKind::Ident
                    && AUG_OPS.iter().any(|(sym, _)| *sym == toks[1].text)
                {
                    let slot = slots.iter().position(|s| s == &toks[0].text)?;
                    let (_, opcode) = AUG_OPS.iter().find(|(sym, _)| *sym == toks[1].text)?;
                    let rhs = parse_expr(&toks[2..], "/", slots, hosts, in_file_fns)?;
                    out.push(VStmt::Assign(slot, VExpr::Bin(*opcode, Box::new(VExpr::Var(slot)), Box::new(rhs))));
                    continue;
                }
                if toks.len() >= 2 && toks[0].kind == TokenKind::Ident && toks[1].text == "++" {
                    let slot = slots.iter().position(|s| s == &toks[0].text)?;
                    out.push(VStmt::Assign(slot, VExpr::Bin(op::ADD, Box::new(VExpr::Var(slot)), Box::new(VExpr::Const(1)))));
                    continue;
                }
                if toks[0].kind == TokenKind::Ident && toks.get(1).map(|t| t.text == "(").unwrap_or(false) {
                    let e = parse_expr(&toks, "/", slots, hosts, in_file_fns)?;
                    if !matches!(e, VExpr::Call(..)) {
                        return None;
                    }
                    out.push(VStmt::Expr(e));
                    continue;
                }
                return None;
            }
            CStmt::Block { body, .. } => {
                out.extend(parse_c_body(lexed, body, slots, hosts, in_file_fns)?);
            }
            CStmt::If { cond_open, cond_close, then, els, .. } => {
                let ctoks = c_stmt_ptoks(lexed, *cond_open + 1, *cond_close - 1);
                let cond = parse_expr(&ctoks, "/", slots, hosts, in_file_fns)?;
                let t = parse_c_body(lexed, std::slice::from_ref(then), slots, hosts, in_file_fns)?;
                let e = match els {
                    Some(e) => parse_c_body(lexed, std::slice::from_ref(e), slots, hosts, in_file_fns)?,
                    None => Vec::new(),
                };
                if t.is_empty() {
                    return None;
                }
                out.push(VStmt::If(cond, t, e));
            }
            CStmt::While { cond_open, cond_close, body, .. } => {
                let ctoks = c_stmt_ptoks(lexed, *cond_open + 1, *cond_close - 1);
                let cond = parse_expr(&ctoks, "/", slots, hosts, in_file_fns)?;
                let b = parse_c_body(lexed, std::slice::from_ref(body), slots, hosts, in_file_fns)?;
                if b.is_empty() {
                    return None;
                }
                out.push(VStmt::While(cond, b));
            }
            CStmt::For { .. } | CStmt::Other { .. } => return None,
        }
    }
    Some(out)
}

fn pass_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    if code.contains(C_VM_NAME) {
        return Ok(PassOutcome::unchanged(code));
    }
    let funcs = cblock::find_functions(&lexed);
    let infos: Vec<Option<CFnInfo>> = funcs.iter().map(|f| c_fn_info(&lexed, f)).collect();
    let fn_names: Vec<String> = funcs
        .iter()
        .map(|f| lexed.text(&lexed.tokens[f.name_tok]).to_string())
        .collect();

    struct Planned {
        info_idx: usize,
        prog: Vec<i64>,
        slots: Vec<String>,
        param_count: usize,
        hosts: Vec<String>,
    }
    let mut planned: Vec<Planned> = Vec::new();
    for (idx, info) in infos.iter().enumerate() {
        let Some(info) = info else { continue };
        let Ok(stmts) = cblock::parse_statements(&lexed, info.span.body_open, info.span.body_close) else {
            continue;
        };
        if stmts.is_empty() {
            continue;
        }
        let mut slots = info.params.clone();
        let param_count = slots.len();
        let mut hosts = Vec::new();
        let Some(body) = parse_c_body(&lexed, &stmts, &mut slots, &mut hosts, &fn_names) else {
            continue;
        };
        if !all_paths_return(&body) {
            continue;
        }
        // host callees must themselves have parseable headers (for thunks)
        let thunkable = hosts.iter().all(|h| {
            infos
                .iter()
                .flatten()
                .any(|i| &i.name == h && i.params.len() <= 8)
        });
        if !thunkable {
            continue;
        }
        planned.push(Planned {
            info_idx: idx,
            prog: Compiler::compile(&body),
            slots,
            param_count,
            hosts,
        });
    }
    if planned.is_empty() {
        return Ok(PassOutcome::unchanged(code));
    }

    // preamble: host prototypes, interpreter, thunks
    let mut thunks_needed: BTreeMap<String, usize> = BTreeMap::new();
    for p in &planned {
        for h in &p.hosts {
            let argc = infos
                .iter()
                .flatten()
                .find(|i| &i.name == h)
                .map(|i| i.params.len())
                .unwrap_or(0);
            thunks_needed.insert(h.clone(), argc);
        }
    }
    let mut preamble = String::new();
    for (host, _) in &thunks_needed {
        let proto = infos
            .iter()
            .flatten()
            .find(|i| &i.name == host)
            .map(|i| i.header_text.trim().to_string())
            .unwrap_or_default();
        preamble.push_str(&format!("{proto};\n"));
    }
    preamble.push_str(c_interpreter());
    for (host, argc) in &thunks_needed {
        let args: Vec<String> = (0..*argc).map(|i| format!("args[{i}]")).collect();
        preamble.push_str(&format!(
            "static long bridge_{host}(long *args) {{ (void)args; return (long){host}({}); }}\n",
            args.join(", ")
        ));
    }

    let first_fn_start = funcs
        .iter()
        .map(|f| {
            let name_tok = &lexed.tokens[f.name_tok];
            lexed.src[..name_tok.start].rfind('\n').map(|p| p + 1).unwrap_or(0)
        })
        .min()
        .unwrap_or(0);
    let mut edits = vec![lang::Edit::insert(first_fn_start, preamble)];

    for p in &planned {
        let info = infos[p.info_idx].as_ref().unwrap();
        let prog_text: Vec<String> = p.prog.iter().map(|v| v.to_string()).collect();
        let mut body = String::from("\n");
        body.push_str(&format!(
            "    static const long encoded[] = {{ {} }};\n",
            prog_text.join(", ")
        ));
        body.push_str(&format!("    long frame[{}];\n", p.slots.len().max(1)));
        for (i, slot) in p.slots.iter().enumerate() {
            if i < p.param_count {
                body.push_str(&format!("    frame[{i}] = (long){slot};\n"));
            } else {
                body.push_str(&format!("    frame[{i}] = 0;\n"));
            }
        }
        if p.hosts.is_empty() {
            body.push_str("    long (*call_table[1])(long *) = { 0 };\n");
        } else {
            let entries: Vec<String> = p.hosts.iter().map(|h| format!("bridge_{h}")).collect();
            body.push_str(&format!(
                "    long (*call_table[{}])(long *) = {{ {} }};\n",
                p.hosts.len(),
                entries.join(", ")
            ));
        }
        let cast = if info.ret_type.ends_with("int") { "(int)" } else { "" };
        body.push_str(&format!(
            "    return {cast}{C_VM_NAME}(encoded, (long)(sizeof(encoded) / sizeof(long)), frame, call_table);\n"
        ));
        let open = &lexed.tokens[info.span.body_open];
        let close = &lexed.tokens[info.span.body_close];
        edits.push(lang::Edit::replace(open.end, close.start, body));
    }

    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites: planned.len() as u32 })
}

// ---------------------------------------------------------------------------
// Solidity front end and emission
// ---------------------------------------------------------------------------

fn solidity_interpreter() -> &'static str {
    r#"
    function runEncodedProgram(int256[] memory prog, int256[] memory frame) private pure returns (int256) {
        int256[] memory stack = new int256[](64);
        uint256 sp = 0;
        uint256 pc = 0;
        int256 lhs;
        int256 rhs;
        while (pc < prog.length) {
            int256 word = prog[pc];
            if (word == 1) { stack[sp] = prog[pc + 1]; sp = sp + 1; pc = pc + 2; }
            else if (word == 2) { stack[sp] = frame[uint256(prog[pc + 1])]; sp = sp + 1; pc = pc + 2; }
            else if (word == 3) { sp = sp - 1; frame[uint256(prog[pc + 1])] = stack[sp]; pc = pc + 2; }
            else if (word >= 4 && word <= 8) {
                sp = sp - 1; rhs = stack[sp]; sp = sp - 1; lhs = stack[sp];
                if (word == 4) { stack[sp] = lhs + rhs; }
                else if (word == 5) { stack[sp] = lhs - rhs; }
                else if (word == 6) { stack[sp] = lhs * rhs; }
                else if (word == 7) { stack[sp] = lhs / rhs; }
                else { stack[sp] = lhs % rhs; }
                sp = sp + 1; pc = pc + 1;
            }
            else if (word == 9) { stack[sp - 1] = -stack[sp - 1]; pc = pc + 1; }
            else if (word >= 10 && word <= 15) {
                sp = sp - 1; rhs = stack[sp]; sp = sp - 1; lhs = stack[sp];
                bool flag;
                if (word == 10) { flag = lhs == rhs; }
                else if (word == 11) { flag = lhs != rhs; }
                else if (word == 12) { flag = lhs < rhs; }
                else if (word == 13) { flag = lhs <= rhs; }
                else if (word == 14) { flag = lhs > rhs; }
                else { flag = lhs >= rhs; }
                stack[sp] = flag ? int256(1) : int256(0);
                sp = sp + 1; pc = pc + 1;
            }
            else if (word == 16) { pc = uint256(prog[pc + 1]); }
            else if (word == 17) { sp = sp - 1; if (stack[sp] == 0) { pc = uint256(prog[pc + 1]); } else { pc = pc + 2; } }
            else if (word == 19) { sp = sp - 1; return stack[sp]; }
            else if (word == 20) { sp = sp - 1; pc = pc + 1; }
            else { return 0; }
        }
        return 0;
    }
"#
}

fn pass_solidity(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, Language::Solidity).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    if code.contains("runEncodedProgram") {
        return Ok(PassOutcome::unchanged(code));
    }
    let funcs = cblock::find_functions(&lexed);
    let mut edits = Vec::new();
    let mut sites = 0u32;
    let mut last_close = None;

    for f in &funcs {
        last_close = Some(f.body_close.max(last_close.unwrap_or(0)));
        // signature: function name(int256 a, ...) ... returns (int256)
        let mut params = Vec::new();
        let ptoks: Vec<usize> = (f.params_open + 1..f.params_close)
            .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
            .collect();
        let mut k = 0usize;
        let mut ok = true;
        while k < ptoks.len() {
            if lexed.text(&lexed.tokens[ptoks[k]]) != "int256" {
                ok = false;
                break;
            }
            if k + 1 >= ptoks.len() || lexed.tokens[ptoks[k + 1]].kind != TokenKind::Ident {
                ok = false;
                break;
            }
            params.push(lexed.text(&lexed.tokens[ptoks[k + 1]]).to_string());
            k += 2;
            if k < ptoks.len() {
                if lexed.text(&lexed.tokens[ptoks[k]]) != "," {
                    ok = false;
                    break;
                }
                k += 1;
            }
        }
        if !ok {
            continue;
        }
        // returns (int256) between params and body
        let between: Vec<String> = (f.params_close + 1..f.body_open)
            .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
            .map(|i| lexed.text(&lexed.tokens[i]).to_string())
            .collect();
        let sig = between.join(" ");
        if !sig.contains("returns ( int256 )") {
            continue;
        }
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
        if stmts.is_empty() {
            continue;
        }
        let mut slots = params.clone();
        let param_count = slots.len();
        let mut hosts = Vec::new();
        let Some(body) = parse_solidity_body(&lexed, &stmts, &mut slots, &mut hosts) else { continue };
        if !hosts.is_empty() || !all_paths_return(&body) {
            continue;
        }
        let prog = Compiler::compile(&body);

        let mut new_body = String::from("\n");
        new_body.push_str(&format!(
            "        int256[] memory encoded = new int256[]({});\n",
            prog.len()
        ));
        for (i, w) in prog.iter().enumerate() {
            new_body.push_str(&format!("        encoded[{i}] = {w};\n"));
        }
        new_body.push_str(&format!(
            "        int256[] memory frame = new int256[]({});\n",
            slots.len().max(1)
        ));
        for (i, slot) in slots.iter().enumerate().take(param_count) {
            new_body.push_str(&format!("        frame[{i}] = {slot};\n"));
        }
        new_body.push_str("        return runEncodedProgram(encoded, frame);\n    ");
        let open = &lexed.tokens[f.body_open];
        let close = &lexed.tokens[f.body_close];
        edits.push(lang::Edit::replace(open.end, close.start, new_body));
        sites += 1;
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    let after = last_close.unwrap() + 1;
    let contract_close = (after..lexed.tokens.len())
        .find(|&i| lexed.text(&lexed.tokens[i]) == "}")
        .map(|i| lexed.tokens[i].start);
    if let Some(pos) = contract_close {
        edits.push(lang::Edit::insert(pos, format!("{}\n", solidity_interpreter())));
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

fn parse_solidity_body(
    lexed: &Lexed,
    stmts: &[CStmt],
    slots: &mut Vec<String>,
    hosts: &mut Vec<String>,
) -> Option<Vec<VStmt>> {
    let mut out = Vec::new();
    let no_fns: Vec<String> = Vec::new();
    for stmt in stmts {
        match stmt {
            CStmt::Simple { start, end } => {
                let mut toks = c_stmt_ptoks(lexed, *start, *end);
                if toks.last().map(|t| t.text == ";").unwrap_or(false) {
                    toks.pop();
                }
                if toks.is_empty() {
                    continue;
                }
                if toks[0].text == "return" {
                    let e = parse_expr(&toks[1..], "/", slots, hosts, &no_fns)?;
                    out.push(VStmt::Return(e));
                    continue;
                }
                if toks[0].text == "int256" {
                    if toks.len() < 2 || toks[1].kind != TokenKind::Ident {
                        return None;
                    }
                    let name = toks[1].text.clone();
                    if slots.contains(&name) {
                        return None;
                    }
                    slots.push(name);
                    let slot = slots.len() - 1;
                    if toks.len() == 2 {
                        out.push(VStmt::Assign(slot, VExpr::Const(0)));
                        continue;
                    }
                    if toks[2].text != "=" {
                        return None;
                    }
                    let e = parse_expr(&toks[3..], "/", slots, hosts, &no_fns)?;
                    out.push(VStmt::Assign(slot, e));
                    continue;
                }
                if toks.len() >= 3 && toks[0].kind == TokenKind::Ident && toks[1].text == "=" {
                    let slot = slots.iter().position(|s| s == &toks[0].text)?;
                    let e = parse_expr(&toks[2..], "/", slots, hosts, &no_fns)?;
                    out.push(VStmt::Assign(slot, e));
                    continue;
                }
                return None;
            }
            CStmt::Block { body, .. } => out.extend(parse_solidity_body(lexed, body, slots, hosts)?),
            CStmt::If { cond_open, cond_close, then, els, .. } => {
                let ctoks = c_stmt_ptoks(lexed, *cond_open + 1, *cond_close - 1);
                let cond = parse_expr(&ctoks, "/", slots, hosts, &no_fns)?;
                let t = parse_solidity_body(lexed, std::slice::from_ref(then), slots, hosts)?;
                let e = match els {
                    Some(e) => parse_solidity_body(lexed, std::slice::from_ref(e), slots, hosts)?,
                    None => Vec::new(),
                };
                if t.is_empty() {
                    return None;
                }
                out.push(VStmt::If(cond, t, e));
            }
            CStmt::While { cond_open, cond_close, body, .. } => {
                let ctoks = c_stmt_ptoks(lexed, *cond_open + 1, *cond_close - 1);
                let cond = parse_expr(&ctoks, "/", slots, hosts, &no_fns)?;
                let b = parse_solidity_body(lexed, std::slice::from_ref(body), slots, hosts)?;
                if b.is_empty() {
                    return None;
                }
                out.push(VStmt::While(cond, b));
            }
            _ => return None,
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_hosts(_: usize, _: &[i64]) -> i64 {
        panic!("no host calls expected")
    }

    #[test]
    fn empty_program_returns_unit() {
        let mut regs = vec![0i64; 4];
        assert_eq!(interpret(&[], &mut regs, &mut no_hosts), 0);
    }

    #[test]
    fn compiled_add_function_runs_on_reference_vm() {
        // f(a, b) = a + b
        let body = vec![VStmt::Return(VExpr::Bin(
            op::ADD,
            Box::new(VExpr::Var(0)),
            Box::new(VExpr::Var(1)),
        ))];
        let prog = Compiler::compile(&body);
        let mut regs = vec![3i64, 4];
        assert_eq!(interpret(&prog, &mut regs, &mut no_hosts), 7);
    }

    #[test]
    fn compiled_loop_and_branch() {
        // f(n): s = 0; i = 0; while i < n: if i % 2 == 0: s += i; i += 1; return s
        let body = vec![
            VStmt::Assign(1, VExpr::Const(0)),
            VStmt::Assign(2, VExpr::Const(0)),
            VStmt::While(
                VExpr::Bin(op::LT, Box::new(VExpr::Var(2)), Box::new(VExpr::Var(0))),
                vec![
                    VStmt::If(
                        VExpr::Bin(
                            op::EQ,
                            Box::new(VExpr::Bin(op::MOD, Box::new(VExpr::Var(2)), Box::new(VExpr::Const(2)))),
                            Box::new(VExpr::Const(0)),
                        ),
                        vec![VStmt::Assign(1, VExpr::Bin(op::ADD, Box::new(VExpr::Var(1)), Box::new(VExpr::Var(2))))],
                        vec![],
                    ),
                    VStmt::Assign(2, VExpr::Bin(op::ADD, Box::new(VExpr::Var(2)), Box::new(VExpr::Const(1)))),
                ],
            ),
            VStmt::Return(VExpr::Var(1)),
        ];
        let prog = Compiler::compile(&body);
        let mut regs = vec![10i64, 0, 0];
        // evens below 10: 0+2+4+6+8 = 20
        assert_eq!(interpret(&prog, &mut regs, &mut no_hosts), 20);
    }

    #[test]
    fn host_calls_dispatch() {
        // f(x) = g(x) + 1 with g = double
        let body = vec![VStmt::Return(VExpr::Bin(
            op::ADD,
            Box::new(VExpr::Call(0, vec![VExpr::Var(0)])),
            Box::new(VExpr::Const(1)),
        ))];
        let prog = Compiler::compile(&body);
        let mut regs = vec![5i64];
        let mut hosts = |idx: usize, args: &[i64]| {
            assert_eq!(idx, 0);
            args[0] * 2
        };
        assert_eq!(interpret(&prog, &mut regs, &mut hosts), 11);
    }

    #[test]
    fn python_function_virtualizes() {
        let code = "def combine(a, b):\n    total = a + b\n    return total\n\nprint(combine(2, 3))\n";
        let out = pass(code, Language::Python).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("run_encoded_program"));
        assert!(out.code.contains("program = ["));
        assert!(out.code.contains("print(combine(2, 3))"));
    }

    #[test]
    fn python_ineligible_function_skipped() {
        let code = "def shout(msg):\n    return msg.upper()\n";
        let out = pass(code, Language::Python).unwrap();
        assert_eq!(out.sites, 0);
        assert!(matches!(
            virtualize(code, Language::Python, 0),
            Err(ObfuscateError::NothingVirtualizable)
        ));
    }

    #[test]
    fn declarations_only_file_nothing_virtualizable() {
        let code = "x = 1\ny = 2\n";
        assert!(matches!(
            virtualize(code, Language::Python, 0),
            Err(ObfuscateError::NothingVirtualizable)
        ));
    }

    #[test]
    fn c_function_virtualizes_with_host_call() {
        let code = "#include <stdio.h>\nlong doubler(long v) { return v * 2; }\nlong apply(long x) { long r = doubler(x) + 1; return r; }\nint main(void) { printf(\"%ld\\n\", apply(4)); return 0; }\n";
        let out = pass(code, Language::C).unwrap();
        assert!(out.sites >= 1, "{}", out.code);
        assert!(out.code.contains("run_encoded_program"));
        assert!(out.code.contains("bridge_doubler"));
    }

    #[test]
    fn solidity_pure_function_virtualizes() {
        let code = "contract Math {\n    function triple(int256 v) public pure returns (int256) {\n        int256 r = v * 3;\n        return r;\n    }\n}\n";
        let out = pass(code, Language::Solidity).unwrap();
        assert_eq!(out.sites, 1, "{}", out.code);
        assert!(out.code.contains("runEncodedProgram"));
    }
}
