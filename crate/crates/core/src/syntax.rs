//! Text syntax: expressions, forms with inline symbol bindings, operators,
//! and rational one-forms `p(t)/q(t) dt` on the line.
//!
//! The grammar is written out in `docs/grammar.md`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bt_ops::{Cut, OperatorExpr};
use crate::diffop::DiffOperator;
use crate::error::{Error, Result};
use crate::forms::{AbstractForm, Binding, Expr, FormContext, Node};
use crate::geom::RationalForm;
use crate::poly::Poly;
use crate::scalars::{BaseKind, BaseScalar, ExtField, ExtScalar};
use crate::series::{parse_ext_scalar, Series};
use crate::tlf::{LiftingSpec, LiftingSystem, TlfDescriptor};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(String),
    Ident(String),
    /// Raw text between `[` and `]`.
    Bracket(String),
    P(char),
    Ge,
    Lt,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
    end: usize,
}

fn parse_err(position: usize, expected: impl Into<String>) -> Error {
    Error::Parse { position, expected: expected.into() }
}

fn lex(s: &str) -> Result<Vec<Token>> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            Tok::Num(s[start..i].to_string())
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            Tok::Ident(s[start..i].to_string())
        } else if c == '[' {
            let close = s[i..].find(']').ok_or_else(|| parse_err(i, "']'"))?;
            i += close + 1;
            Tok::Bracket(s[start + 1..i - 1].to_string())
        } else if c == '>' && b.get(i + 1) == Some(&b'=') {
            i += 2;
            Tok::Ge
        } else if c == '<' {
            i += 1;
            Tok::Lt
        } else if "()+-*/^,.{}=:;".contains(c) {
            i += 1;
            Tok::P(c)
        } else {
            return Err(parse_err(i, "a token"));
        };
        out.push(Token { tok, pos: start, end: i });
    }
    out.push(Token { tok: Tok::End, pos: s.len(), end: s.len() });
    Ok(out)
}

fn gen_index(name: &str) -> Option<usize> {
    let d = name.strip_prefix('t')?;
    if d.is_empty() || !d.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    d.parse().ok()
}

fn prefixed_index(name: &str, prefix: &str) -> Option<usize> {
    let d = name.strip_prefix(prefix)?;
    if d.is_empty() || !d.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    d.parse().ok()
}

#[derive(Clone, Debug)]
enum Val {
    Scalar(Expr),
    Form(AbstractForm),
}

impl Val {
    fn into_form(self) -> AbstractForm {
        match self {
            Val::Scalar(e) => AbstractForm::function(e),
            Val::Form(w) => w,
        }
    }
}

fn scale_form(w: &AbstractForm, s: &Expr, left: bool) -> AbstractForm {
    let terms = w
        .terms
        .iter()
        .map(|(g, h)| (if left { s.times(g) } else { g.times(s) }, h.clone()))
        .collect();
    AbstractForm { deg: w.deg, terms }
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    field: Arc<ExtField>,
    /// Generator `t_j` in the text is `t_{j - shift}` internally.
    shift: usize,
    /// `t` is the affine coordinate; `t1, t2, ...` are rejected.
    line: bool,
    bindings: BTreeMap<String, Expr>,
}

impl Parser {
    fn new(text: &str, field: &Arc<ExtField>) -> Result<Self> {
        Ok(Parser { toks: lex(text)?, i: 0, field: field.clone(), shift: 0, line: false, bindings: BTreeMap::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> usize {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::P(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(parse_err(self.pos(), format!("'{c}'")))
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(parse_err(self.pos(), "end of input"))
        }
    }

    fn int(&mut self) -> Result<i64> {
        let neg = self.eat('-');
        let pos = self.pos();
        match self.bump() {
            Tok::Num(s) => {
                let v: i64 = s.parse().map_err(|_| parse_err(pos, "a machine-size integer"))?;
                Ok(if neg { -v } else { v })
            }
            _ => Err(parse_err(pos, "an integer")),
        }
    }

    fn int_list(&self, raw: &str, pos: usize) -> Result<Vec<i64>> {
        if raw.trim().is_empty() {
            return Ok(vec![]);
        }
        raw.split(',').map(|x| x.trim().parse::<i64>().map_err(|_| parse_err(pos, "a list of integers"))).collect()
    }

    fn generator(&self, i: usize, pos: usize) -> Result<usize> {
        if self.line {
            return Err(parse_err(pos, "the variable t"));
        }
        if i <= self.shift {
            return Err(parse_err(pos, format!("a generator after t{}", self.shift)));
        }
        Ok(i - self.shift)
    }

    // form := wedge (('+' | '-') wedge)*
    fn sum(&mut self) -> Result<Val> {
        let mut acc = self.wedge()?;
        loop {
            let pos = self.pos();
            let minus = match self.peek() {
                Tok::P('+') => false,
                Tok::P('-') => true,
                _ => return Ok(acc),
            };
            self.bump();
            let rhs = self.wedge()?;
            acc = match (acc, rhs) {
                (Val::Scalar(a), Val::Scalar(b)) => Val::Scalar(if minus { a.sub(&b) } else { a.add(&b) }),
                (a, b) => {
                    let b = if minus { b.into_form().neg() } else { b.into_form() };
                    Val::Form(a.into_form().add(&b).map_err(|_| parse_err(pos, "summands of equal degree"))?)
                }
            };
        }
    }

    // wedge := product ('^' product)*
    fn wedge(&mut self) -> Result<Val> {
        let mut acc = self.product()?;
        while self.eat('^') {
            let rhs = self.product()?;
            acc = match (acc, rhs) {
                (Val::Scalar(a), Val::Scalar(b)) => Val::Scalar(a.mul(&b)),
                (Val::Scalar(a), Val::Form(w)) => Val::Form(scale_form(&w, &a, true)),
                (Val::Form(w), Val::Scalar(b)) => Val::Form(scale_form(&w, &b, false)),
                (Val::Form(a), Val::Form(b)) => Val::Form(a.wedge(&b)),
            };
        }
        Ok(acc)
    }

    // product := unary (('*' | '/') unary)*
    fn product(&mut self) -> Result<Val> {
        let mut acc = self.unary()?;
        loop {
            let pos = self.pos();
            let div = match self.peek() {
                Tok::P('*') => false,
                Tok::P('/') => true,
                _ => return Ok(acc),
            };
            self.bump();
            let rhs = self.unary()?;
            acc = match (acc, rhs, div) {
                (Val::Scalar(a), Val::Scalar(b), false) => Val::Scalar(a.mul(&b)),
                (Val::Scalar(a), Val::Scalar(b), true) => Val::Scalar(a.mul(&b.inv())),
                (Val::Scalar(a), Val::Form(w), false) => Val::Form(scale_form(&w, &a, true)),
                (Val::Form(w), Val::Scalar(b), false) => Val::Form(scale_form(&w, &b, false)),
                (Val::Form(w), Val::Scalar(b), true) => Val::Form(scale_form(&w, &b.inv(), false)),
                _ => return Err(parse_err(pos, "'^' between forms of positive degree")),
            };
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Val> {
        if self.eat('-') {
            return Ok(match self.unary()? {
                Val::Scalar(e) => Val::Scalar(e.neg()),
                Val::Form(w) => Val::Form(w.neg()),
            });
        }
        self.power()
    }

    fn power_follows(&self) -> bool {
        *self.peek() == Tok::P('^')
            && (matches!(self.peek_at(1), Tok::Num(_))
                || (*self.peek_at(1) == Tok::P('-') && matches!(self.peek_at(2), Tok::Num(_))))
    }

    // power := primary ('^' int)?
    fn power(&mut self) -> Result<Val> {
        let pos = self.pos();
        let base = self.primary()?;
        if self.power_follows() {
            self.bump();
            let k = self.int()?;
            return match base {
                Val::Scalar(e) => Ok(Val::Scalar(e.pow(k))),
                Val::Form(_) => Err(parse_err(pos, "a function before '^k'")),
            };
        }
        Ok(base)
    }

    fn scalar(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.sum()? {
            Val::Scalar(e) => Ok(e),
            Val::Form(_) => Err(parse_err(pos, "a function")),
        }
    }

    fn primary(&mut self) -> Result<Val> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(s) => {
                let b = BaseScalar::parse(self.field.base(), &s).map_err(|_| parse_err(pos, "a scalar"))?;
                Ok(Val::Scalar(Expr::konst(ExtScalar::from_base(&self.field, b))))
            }
            Tok::Bracket(raw) => {
                let c = parse_ext_scalar(&self.field, &format!("[{raw}]")).map_err(|_| parse_err(pos, "coordinates in k'"))?;
                Ok(Val::Scalar(Expr::konst(c)))
            }
            Tok::P('(') => {
                let v = self.sum()?;
                self.expect(')')?;
                Ok(v)
            }
            Tok::Ident(name) => self.named(name, pos),
            _ => Err(parse_err(pos, "an operand")),
        }
    }

    fn named(&mut self, name: String, pos: usize) -> Result<Val> {
        let call = *self.peek() == Tok::P('(');
        match name.as_str() {
            "d" if call => {
                self.bump();
                let h = self.scalar()?;
                self.expect(')')?;
                return Ok(Val::Form(AbstractForm::d(h, &self.field)));
            }
            "dlog" if call => {
                self.bump();
                let mut args = vec![self.scalar()?];
                while self.eat(',') {
                    args.push(self.scalar()?);
                }
                self.expect(')')?;
                return Ok(Val::Form(AbstractForm::dlog(&args, &self.field)));
            }
            "inv" if call => {
                self.bump();
                let x = self.scalar()?;
                self.expect(')')?;
                return Ok(Val::Scalar(x.inv()));
            }
            "O" if call => {
                self.bump();
                let gpos = self.pos();
                let i = match self.bump() {
                    Tok::Ident(g) => gen_index(&g).ok_or_else(|| parse_err(gpos, "a generator"))?,
                    _ => return Err(parse_err(gpos, "a generator")),
                };
                let i = self.generator(i, gpos)?;
                let k = if self.eat('^') { self.int()? } else { 1 };
                self.expect(')')?;
                return Ok(Val::Scalar(Expr::new(Node::BigO(i, k))));
            }
            _ => {}
        }
        if let Some(i) = gen_index(&name) {
            return Ok(Val::Scalar(Expr::gen(self.generator(i, pos)?)));
        }
        if self.line {
            return if name == "t" { Ok(Val::Scalar(Expr::sym("t"))) } else { Err(parse_err(pos, "the variable t")) };
        }
        if self.eat('{') {
            let kpos = self.pos();
            if self.bump() != Tok::Ident("series".into()) {
                return Err(parse_err(kpos, "'series'"));
            }
            self.expect('=')?;
            let e = self.scalar()?;
            self.expect('}')?;
            if !e.symbols().is_empty() {
                return Err(parse_err(kpos, "a binding over the generators only"));
            }
            match self.bindings.get(&name) {
                Some(old) if *old != e => return Err(parse_err(pos, format!("one binding for {name}"))),
                _ => {
                    self.bindings.insert(name.clone(), e);
                }
            }
        }
        Ok(Val::Scalar(Expr::sym(&name)))
    }
}

/// A parsed form together with the inline bindings of its symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedForm {
    pub form: AbstractForm,
    pub bindings: BTreeMap<String, Expr>,
}

impl ParsedForm {
    /// Evaluation context over `k`; every symbol must be bound.
    pub fn context(&self, k: &TlfDescriptor) -> Result<FormContext> {
        let base = FormContext::new(k.clone());
        let mut ctx = FormContext::new(k.clone());
        for s in self.form.symbols() {
            let e = self.bindings.get(&s).ok_or_else(|| Error::UnmappedSymbol(s.clone()))?;
            ctx.bindings.insert(s, Binding::new(base.eval(e)?));
        }
        Ok(ctx)
    }
}

pub fn parse_form(field: &Arc<ExtField>, text: &str) -> Result<ParsedForm> {
    let mut p = Parser::new(text, field)?;
    let v = p.sum()?;
    p.expect_end()?;
    Ok(ParsedForm { form: v.into_form(), bindings: p.bindings })
}

/// A function expression; bindings are not allowed.
pub fn parse_expr(field: &Arc<ExtField>, text: &str) -> Result<Expr> {
    let mut p = Parser::new(text, field)?;
    let e = p.scalar()?;
    p.expect_end()?;
    if let Some(s) = e.symbols().into_iter().next() {
        return Err(Error::UnmappedSymbol(s));
    }
    Ok(e)
}

pub fn parse_series(k: &TlfDescriptor, text: &str) -> Result<Series> {
    FormContext::new(k.clone()).eval(&parse_expr(&k.field, text)?)
}

/// Prints the form, attaching each binding at the first occurrence of its symbol.
pub fn format_form(p: &ParsedForm) -> String {
    let text = p.form.to_string();
    if p.bindings.is_empty() {
        return text;
    }
    let toks = lex(&text).expect("printer output lexes");
    let mut out = String::new();
    let mut last = 0;
    let mut done = std::collections::BTreeSet::new();
    for t in &toks {
        if let Tok::Ident(name) = &t.tok {
            if let Some(e) = p.bindings.get(name) {
                if done.insert(name.clone()) {
                    out.push_str(&text[last..t.end]);
                    out.push_str(&format!("{{series={e}}}"));
                    last = t.end;
                }
            }
        }
    }
    out.push_str(&text[last..]);
    out
}

fn descriptor(field: &Arc<ExtField>, depth: usize, window: i64) -> TlfDescriptor {
    TlfDescriptor::new(depth, field.clone()).with_window(window)
}

impl Parser {
    fn series_at(&mut self, depth: usize, window: i64) -> Result<Series> {
        let e = self.scalar()?;
        if let Some(s) = e.symbols().into_iter().next() {
            return Err(Error::UnmappedSymbol(s));
        }
        FormContext::new(descriptor(&self.field, depth, window)).eval(&e)
    }

    // op := comp (('+' | '-') comp)*
    fn op_sum(&mut self, depth: usize, window: i64) -> Result<OperatorExpr> {
        let mut acc = self.op_comp(depth, window)?;
        loop {
            let minus = match self.peek() {
                Tok::P('+') => false,
                Tok::P('-') => true,
                _ => return Ok(acc),
            };
            self.bump();
            let rhs = self.op_comp(depth, window)?;
            acc = OperatorExpr::add(acc, if minus { rhs.neg()? } else { rhs })?;
        }
    }

    // comp := unary ('.' comp)?
    fn op_comp(&mut self, depth: usize, window: i64) -> Result<OperatorExpr> {
        let a = self.op_unary(depth, window)?;
        if self.eat('.') {
            let b = self.op_comp(depth, window)?;
            return OperatorExpr::compose(a, b);
        }
        Ok(a)
    }

    fn op_unary(&mut self, depth: usize, window: i64) -> Result<OperatorExpr> {
        if self.eat('-') {
            return self.op_unary(depth, window)?.neg();
        }
        self.op_atom(depth, window)
    }

    fn indexed_rows(&mut self, depth: usize, window: i64) -> Result<Vec<(Vec<i64>, Series)>> {
        self.expect('{')?;
        let mut rows = Vec::new();
        if self.eat('}') {
            return Ok(rows);
        }
        loop {
            let pos = self.pos();
            let m = match self.bump() {
                Tok::Bracket(raw) => self.int_list(&raw, pos)?,
                _ => return Err(parse_err(pos, "an exponent vector [..]")),
            };
            if m.len() != depth {
                return Err(parse_err(pos, format!("{depth} exponents")));
            }
            self.expect(':')?;
            rows.push((m, self.series_at(depth, window)?));
            if self.eat('}') {
                return Ok(rows);
            }
            self.expect(';')?;
        }
    }

    fn op_atom(&mut self, depth: usize, window: i64) -> Result<OperatorExpr> {
        let pos = self.pos();
        let name = match self.bump() {
            Tok::P('(') => {
                let op = self.op_sum(depth, window)?;
                self.expect(')')?;
                return Ok(op);
            }
            Tok::Ident(name) => name,
            _ => return Err(parse_err(pos, "an operator")),
        };
        let f = self.field.clone();
        match name.as_str() {
            "mul" => {
                self.expect('(')?;
                let s = self.series_at(depth, window)?;
                self.expect(')')?;
                OperatorExpr::mul_by(s)
            }
            "id" => Ok(OperatorExpr::identity(&f, depth)),
            "zero" => Ok(OperatorExpr::zero(&f, depth)),
            "lift" => {
                if depth < 2 {
                    return Err(parse_err(pos, "an operator of depth at least 2 around lift"));
                }
                self.expect('(')?;
                self.shift += 1;
                let inner = self.op_sum(depth - 1, window);
                self.shift -= 1;
                let inner = inner?;
                self.expect(')')?;
                Ok(OperatorExpr::coeff_lift(inner, LiftingSpec::Standard))
            }
            "fin" => {
                let rows = self.indexed_rows(depth, window)?;
                OperatorExpr::finite_rank(&f, depth, rows)
            }
            "diff" => {
                let rows = self.indexed_rows(depth, window)?;
                let mut terms = Vec::new();
                for (a, c) in rows {
                    let a = a
                        .into_iter()
                        .map(|x| u32::try_from(x).map_err(|_| parse_err(pos, "nonnegative derivative orders")))
                        .collect::<Result<Vec<_>>>()?;
                    terms.push((a, c));
                }
                OperatorExpr::diff(DiffOperator::from_terms(&f, depth, terms))
            }
            _ => {
                if let Some(j) = prefixed_index(&name, "proj") {
                    let level = self.generator(j, pos)?;
                    self.expect('(')?;
                    let cpos = self.pos();
                    let cut = match self.bump() {
                        Tok::Ge => Cut::Ge(self.int()?),
                        Tok::Lt => Cut::Lt(self.int()?),
                        _ => return Err(parse_err(cpos, "'>=' or '<'")),
                    };
                    self.expect(')')?;
                    return OperatorExpr::proj(&f, depth, level, cut, LiftingSystem::standard(depth));
                }
                if let Some(j) = prefixed_index(&name, "d") {
                    let axis = self.generator(j, pos)?;
                    if axis > depth {
                        return Err(parse_err(pos, format!("a derivation among the {depth} generators")));
                    }
                    let e = if self.power_follows() {
                        self.bump();
                        u32::try_from(self.int()?).map_err(|_| parse_err(pos, "a nonnegative order"))?
                    } else {
                        1
                    };
                    let mut a = vec![0; depth];
                    a[axis - 1] = e;
                    return OperatorExpr::diff(DiffOperator::from_terms(&f, depth, vec![(a, Series::one(&f, depth))]));
                }
                Err(parse_err(pos, "an operator"))
            }
        }
    }
}

/// Parses an operator given either as JSON or in infix form.
pub fn parse_operator(k: &TlfDescriptor, text: &str) -> Result<OperatorExpr> {
    let t = text.trim();
    if t.starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(t).map_err(|e| parse_err(e.column().saturating_sub(1), format!("JSON ({e})")))?;
        return OperatorExpr::from_json(k, &v);
    }
    let mut p = Parser::new(t, &k.field)?;
    let op = p.op_sum(k.n, k.window)?;
    p.expect_end()?;
    Ok(op)
}

fn op_prec(op: &OperatorExpr) -> u8 {
    match op {
        OperatorExpr::Add(..) => 1,
        OperatorExpr::Compose(..) => 2,
        _ => 3,
    }
}

fn rows_text(rows: &[(Vec<i64>, String)]) -> String {
    let parts: Vec<String> = rows
        .iter()
        .map(|(m, s)| {
            let m: Vec<String> = m.iter().map(i64::to_string).collect();
            format!("[{}]: {s}", m.join(","))
        })
        .collect();
    format!("{{{}}}", parts.join("; "))
}

fn write_op(op: &OperatorExpr, first: usize, min: u8, out: &mut String) -> Result<()> {
    let paren = op_prec(op) < min;
    if paren {
        out.push('(');
    }
    match op {
        OperatorExpr::Add(a, b) => {
            write_op(a, first, 1, out)?;
            out.push_str(" + ");
            write_op(b, first, 2, out)?;
        }
        OperatorExpr::Compose(a, b) => {
            write_op(a, first, 3, out)?;
            out.push('.');
            write_op(b, first, 2, out)?;
        }
        OperatorExpr::MulBy(s) => out.push_str(&format!("mul({})", s.display_from(first))),
        OperatorExpr::FiniteRank { rows, .. } if rows.is_empty() => out.push_str("zero"),
        OperatorExpr::FiniteRank { rows, .. } => {
            let rows: Vec<_> = rows.iter().map(|(m, s)| (m.clone(), s.display_from(first))).collect();
            out.push_str(&format!("fin{}", rows_text(&rows)));
        }
        OperatorExpr::Diff(d) => {
            let single = d.terms().iter().next().filter(|_| d.terms().len() == 1).and_then(|(a, c)| {
                let nz: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0).collect();
                let unit = c.as_scalar().is_some_and(|s| s.is_one());
                (nz.len() == 1 && unit).then(|| (nz[0], a[nz[0]]))
            });
            match single {
                Some((i, 1)) => out.push_str(&format!("d{}", first + i)),
                Some((i, e)) => out.push_str(&format!("d{}^{e}", first + i)),
                None => {
                    let rows: Vec<_> = d
                        .terms()
                        .iter()
                        .map(|(a, c)| (a.iter().map(|&x| x as i64).collect(), c.display_from(first)))
                        .collect();
                    out.push_str(&format!("diff{}", rows_text(&rows)));
                }
            }
        }
        OperatorExpr::Proj { level, cut, sigma, .. } => {
            if !sigma.is_standard() {
                return Err(Error::Domain("twisted liftings have no infix form; use JSON".into()));
            }
            out.push_str(&format!("proj{}({})", first + level - 1, cut.to_text()));
        }
        OperatorExpr::CoeffLift { inner, sigma1 } => {
            if *sigma1 != LiftingSpec::Standard {
                return Err(Error::Domain("twisted liftings have no infix form; use JSON".into()));
            }
            out.push_str("lift(");
            write_op(inner, first + 1, 0, out)?;
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
    Ok(())
}

/// Infix text for operators built on standard liftings.
pub fn format_operator(op: &OperatorExpr) -> Result<String> {
    let mut out = String::new();
    write_op(op, 1, 0, &mut out)?;
    Ok(out)
}

fn line_value(e: &Expr, kind: BaseKind) -> Result<(Poly, Poly)> {
    let one = || Poly::constant(kind.one());
    Ok(match e.node() {
        Node::Const(c) => {
            let b = c.as_base().ok_or_else(|| Error::Domain("coefficients must lie in the base field".into()))?;
            (Poly::constant(b.clone()), one())
        }
        Node::Sym(_) => (Poly::monomial(kind, 1), one()),
        Node::Gen(_) | Node::BigO(..) => return Err(Error::Domain("only the variable t may appear".into())),
        Node::Add(a, b) | Node::Sub(a, b) => {
            let (an, ad) = line_value(a, kind)?;
            let (bn, bd) = line_value(b, kind)?;
            let (x, y) = (an.mul(&bd), bn.mul(&ad));
            (if matches!(e.node(), Node::Add(..)) { x.add(&y) } else { x.sub(&y) }, ad.mul(&bd))
        }
        Node::Mul(a, b) => {
            let (an, ad) = line_value(a, kind)?;
            let (bn, bd) = line_value(b, kind)?;
            (an.mul(&bn), ad.mul(&bd))
        }
        Node::Neg(a) => {
            let (n, d) = line_value(a, kind)?;
            (n.neg(), d)
        }
        Node::Inv(a) => {
            let (n, d) = line_value(a, kind)?;
            if n.is_zero() {
                return Err(Error::DivisionByZero);
            }
            (d, n)
        }
        Node::Pow(a, k) => {
            let (mut n, mut d) = line_value(a, kind)?;
            if *k < 0 {
                if n.is_zero() {
                    return Err(Error::DivisionByZero);
                }
                std::mem::swap(&mut n, &mut d);
            }
            let (mut pn, mut pd) = (one(), one());
            for _ in 0..k.unsigned_abs() {
                pn = pn.mul(&n);
                pd = pd.mul(&d);
            }
            (pn, pd)
        }
    })
}

/// Parses `p(t)/q(t) dt` over the prime field or `Q`.
pub fn parse_rational_form(kind: BaseKind, text: &str) -> Result<RationalForm> {
    let field = ExtField::trivial(kind);
    let mut p = Parser::new(text, &field)?;
    p.line = true;
    let e = p.scalar()?;
    let pos = p.pos();
    if p.bump() != Tok::Ident("dt".into()) {
        return Err(parse_err(pos, "'dt'"));
    }
    p.expect_end()?;
    let (num, den) = line_value(&e, kind)?;
    RationalForm::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::separate;
    use crate::residue::res_tlf;

    fn q() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Rational)
    }

    fn f5() -> Arc<ExtField> {
        ExtField::trivial(BaseKind::Prime(5))
    }

    fn roundtrip_form(field: &Arc<ExtField>, s: &str) {
        let a = parse_form(field, s).unwrap();
        let printed = format_form(&a);
        let b = parse_form(field, &printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
        assert_eq!(a, b, "{s} -> {printed}");
    }

    #[test]
    fn dlog_residue() {
        let k = TlfDescriptor::new(2, q());
        let p = parse_form(&k.field, "dlog(t1,t2)").unwrap();
        let w = separate(&p.form, &p.context(&k).unwrap()).unwrap();
        assert!(res_tlf(&w).unwrap().is_one());
    }

    #[test]
    fn bound_symbol_form() {
        let k = TlfDescriptor::new(2, q());
        let p = parse_form(&k.field, "t1^-1 * d(b{series=t1 + t2}) ^ t2^-1 * d(t2)").unwrap();
        assert_eq!(p.form.deg, 2);
        assert!(p.bindings.contains_key("b"));
        let w = separate(&p.form, &p.context(&k).unwrap()).unwrap();
        assert!(res_tlf(&w).unwrap().is_one());
        let printed = format_form(&p);
        assert_eq!(printed.matches("b{series=t1 + t2}").count(), 1, "{printed}");
        assert_eq!(parse_form(&k.field, &printed).unwrap(), p);
    }

    #[test]
    fn unbound_symbol_is_reported() {
        let k = TlfDescriptor::new(1, q());
        let p = parse_form(&k.field, "b * d(t1)").unwrap();
        assert!(matches!(p.context(&k), Err(Error::UnmappedSymbol(_))));
    }

    #[test]
    fn conflicting_bindings_rejected() {
        assert!(matches!(
            parse_form(&q(), "d(b{series=t1}) + d(b{series=t2})"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_form(&q(), "t1 + * t2") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_form(&q(), "d(t1"), Err(Error::Parse { .. })));
        assert!(matches!(parse_form(&q(), "t1 $"), Err(Error::Parse { position: 3, .. })));
    }

    #[test]
    fn corpus_round_trips() {
        let corpus = [
            "dlog(t1,t2)",
            "t1^-2*(1 + t2) * d(t1) ^ d(t2)",
            "t1^-1 * d(b{series=t1 + t2^2}) ^ t2^-1 * d(t2)",
            "(-t1^3 - [2]) * d(t1)",
            "(1 + t1)^-1 * d(t1) + t1^-1 * d(t1)",
            "inv(t1 - t2)/t2 * d(t1) ^ d(t2) - 3 * d(t2) ^ d(t1)",
            "[1/2]*t1^-1 * d(t1)",
            "1 + t1 + O(t1^4)",
            "d(u{series=1 + t1}) ^ d(u) ^ d(t3)",
            "t1*-t2 * d(t1)",
        ];
        for s in corpus {
            roundtrip_form(&q(), s);
        }
        roundtrip_form(&f5(), "4*t1^-1 * d(t1)");
        let qi = ExtField::from_i64s(BaseKind::Rational, &[1, 0, 1]).unwrap();
        roundtrip_form(&qi, "[0,1]*t1^-1 * d(t1)");
    }

    #[test]
    fn series_display_reparses() {
        let k = TlfDescriptor::new(2, q());
        let texts = ["(1 + t2 + O(t2^3))*t1^-1 + O(t1^2)", "t1^-1*(1 - t2)^-1", "(2 + t1)^-1", "-1/2*t1^2 + t2^-3"];
        for s in texts {
            let x = parse_series(&k, s).unwrap();
            let y = parse_series(&k, &x.to_string()).unwrap();
            assert_eq!(x, y, "{s} -> {x}");
        }
    }

    #[test]
    fn operators_infix_and_json() {
        let k = TlfDescriptor::new(2, q());
        for s in [
            "mul(t1^-1)",
            "proj1(>=0)",
            "proj2(<-1)",
            "d1",
            "d2^2",
            "mul(t1).d1 + proj1(<0)",
            "lift(proj2(>=0)).mul(t2^-1)",
            "(d1 + d2).proj1(>=0)",
            "fin{[0,0]: 1 + t1; [1,-1]: t2}",
            "diff{[1,0]: t1; [0,1]: t2}",
            "-mul(t2)",
            "zero",
        ] {
            let op = parse_operator(&k, s).unwrap();
            let text = format_operator(&op).unwrap();
            assert_eq!(parse_operator(&k, &text).unwrap(), op, "{s} -> {text}");
            let json = op.to_json().to_string();
            assert_eq!(parse_operator(&k, &json).unwrap(), op);
        }
        assert_eq!(format_operator(&parse_operator(&k, "lift(d2)").unwrap()).unwrap(), "lift(d2)");
    }

    #[test]
    fn operator_errors() {
        let k = TlfDescriptor::new(1, f5());
        assert!(matches!(parse_operator(&k, "d1"), Err(Error::CharacteristicObstruction(_))));
        assert!(matches!(parse_operator(&k, "proj1(=0)"), Err(Error::Parse { .. })));
        assert!(matches!(parse_operator(&k, "lift(d1)"), Err(Error::Parse { .. })));
        assert!(matches!(parse_operator(&k, "{\"op\":"), Err(Error::Parse { .. })));
    }

    #[test]
    fn rational_forms() {
        let w = parse_rational_form(BaseKind::Rational, "1/(t*(t-1)) dt").unwrap();
        assert_eq!(w.to_string(), "(1)/(t^2 - t) dt");
        assert_eq!(parse_rational_form(BaseKind::Rational, &w.to_string()).unwrap(), w);
        let w = parse_rational_form(BaseKind::Prime(5), "(t^2 + 3)/(t^3 - 2*t) dt").unwrap();
        assert_eq!(parse_rational_form(BaseKind::Prime(5), &w.to_string()).unwrap(), w);
        assert!(matches!(parse_rational_form(BaseKind::Rational, "1/t1 dt"), Err(Error::Parse { .. })));
        assert!(matches!(parse_rational_form(BaseKind::Rational, "1/t"), Err(Error::Parse { .. })));
        assert!(matches!(parse_rational_form(BaseKind::Rational, "1/(t - t) dt"), Err(Error::DivisionByZero)));
    }
}
