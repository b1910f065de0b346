//! Concrete syntax: s-expressions for types, terms of every family, and the
//! header forms of `.lst` program files.
//!
//! `;` starts a line comment. Binders are renamed to fresh internal names on
//! the way in; the printer chooses readable names again on the way out.

use std::collections::BTreeSet;
use std::fmt;

use crate::syntax::{base_name, fresh, name, CType, FgTerm, FgType, Name, Term, VType};
use crate::typecheck::Signature;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a, _) => Some(a),
            _ => None,
        }
    }
    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            _ => None,
        }
    }
    /// The head atom of a list form.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|v| v.first()).and_then(|h| h.atom())
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a, _) => f.write_str(a),
            Sexp::List(v, _) => {
                f.write_str("(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Grammar,
    UnknownConstant,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{origin}:{pos}: {kind:?} error: {msg}")]
pub struct ParseError {
    pub kind: ErrorKind,
    pub msg: String,
    pub pos: Pos,
    pub origin: String,
}

fn err<T>(kind: ErrorKind, pos: Pos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { kind, msg: msg.into(), pos, origin: String::new() })
}

/// A source text together with where it came from.
#[derive(Clone, Debug)]
pub struct SourceFile {
    pub text: String,
    pub origin: String,
}

impl SourceFile {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceFile { text: text.into(), origin: origin.into() }
    }
    pub fn stdin(text: impl Into<String>) -> Self {
        SourceFile::new(text, "<stdin>")
    }
}

fn is_atom_char(c: char) -> bool {
    c.is_alphanumeric() || "_-+*/<>=!?.'#:^&%$@~".contains(c)
}

/// Read every top-level s-expression in `src`.
pub fn read_all(src: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == ';' {
            while let Some(&d) = chars.peek() {
                if d == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        if c == '(' {
            chars.next();
            col += 1;
            stack.push((Vec::new(), pos));
            continue;
        }
        if c == ')' {
            chars.next();
            col += 1;
            let Some((items, p)) = stack.pop() else {
                return err(ErrorKind::Lexical, pos, "unbalanced `)`");
            };
            let e = Sexp::List(items, p);
            match stack.last_mut() {
                Some((v, _)) => v.push(e),
                None => out.push(e),
            }
            continue;
        }
        if is_atom_char(c) {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if !is_atom_char(d) {
                    break;
                }
                s.push(d);
                chars.next();
                col += 1;
            }
            let e = Sexp::Atom(s, pos);
            match stack.last_mut() {
                Some((v, _)) => v.push(e),
                None => out.push(e),
            }
            continue;
        }
        return err(ErrorKind::Lexical, pos, format!("unexpected character `{c}`"));
    }
    if let Some((_, p)) = stack.last() {
        return err(ErrorKind::Lexical, *p, "unclosed `(`");
    }
    Ok(out)
}

/// Read exactly one s-expression.
pub fn read_one(src: &str) -> Result<Sexp, ParseError> {
    let mut v = read_all(src)?;
    match v.len() {
        1 => Ok(v.pop().unwrap()),
        0 => err(ErrorKind::Grammar, Pos { line: 1, col: 1 }, "empty input"),
        _ => err(ErrorKind::Grammar, v[1].pos(), "trailing input after the first form"),
    }
}

const RESERVED: &[&str] = &[
    "star", "unit", "empty", "prod", "sum", "parr", "lolli", "tensor", "ozero", "osum", "power", "oone", "oprod",
    "pair", "fst", "snd", "lam", "app", "return", "let", "inl", "inr", "case", "absurd", "geff", "llam", "lapp",
    "tens", "lettens", "oinl", "oinr", "ocase", "oabsurd", "plam", "papp", "sacc", "const", "opair", "ofst",
    "osnd", "ounit",
];

fn ident(s: &Sexp) -> Result<&str, ParseError> {
    match s {
        Sexp::Atom(a, p) => {
            if RESERVED.contains(&a.as_str()) || a.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                err(ErrorKind::Grammar, *p, format!("`{a}` cannot be used as an identifier"))
            } else {
                Ok(a)
            }
        }
        Sexp::List(_, p) => err(ErrorKind::Grammar, *p, "expected an identifier"),
    }
}

fn args<'a>(s: &'a Sexp, n: usize, form: &str) -> Result<&'a [Sexp], ParseError> {
    let v = s.list().unwrap_or(&[]);
    if v.len() != n + 1 {
        return err(
            ErrorKind::Grammar,
            s.pos(),
            format!("`{form}` expects {n} argument(s), found {}", v.len().saturating_sub(1)),
        );
    }
    Ok(&v[1..])
}

// ---------------------------------------------------------------- types

pub fn sexp_to_fg_type(s: &Sexp) -> Result<FgType, ParseError> {
    match s {
        Sexp::Atom(a, p) => match a.as_str() {
            "unit" => Ok(FgType::Unit),
            "empty" => Ok(FgType::Empty),
            _ => Ok(FgType::Base(name(ident(s).map_err(|_| ParseError {
                kind: ErrorKind::Grammar,
                msg: format!("`{a}` is not a type"),
                pos: *p,
                origin: String::new(),
            })?))),
        },
        Sexp::List(..) => {
            let h = s.head().unwrap_or("");
            let bin = |f: fn(FgType, FgType) -> FgType| -> Result<FgType, ParseError> {
                let a = args(s, 2, h)?;
                Ok(f(sexp_to_fg_type(&a[0])?, sexp_to_fg_type(&a[1])?))
            };
            match h {
                "prod" => bin(FgType::prod),
                "sum" => bin(FgType::sum),
                "parr" => bin(FgType::parr),
                _ => err(ErrorKind::Grammar, s.pos(), format!("unknown type former `{h}`")),
            }
        }
    }
}

pub fn sexp_to_vtype(s: &Sexp) -> Result<VType, ParseError> {
    match s {
        Sexp::Atom(a, p) => match a.as_str() {
            "unit" => Ok(VType::Unit),
            "empty" => Ok(VType::Empty),
            _ => Ok(VType::Base(name(ident(s).map_err(|_| ParseError {
                kind: ErrorKind::Grammar,
                msg: format!("`{a}` is not a value type"),
                pos: *p,
                origin: String::new(),
            })?))),
        },
        Sexp::List(..) => {
            let h = s.head().unwrap_or("");
            match h {
                "prod" | "sum" => {
                    let a = args(s, 2, h)?;
                    let (l, r) = (sexp_to_vtype(&a[0])?, sexp_to_vtype(&a[1])?);
                    Ok(if h == "prod" { VType::prod(l, r) } else { VType::sum(l, r) })
                }
                "lolli" => {
                    let a = args(s, 2, h)?;
                    Ok(VType::lolli(sexp_to_ctype(&a[0])?, sexp_to_ctype(&a[1])?))
                }
                _ => err(ErrorKind::Grammar, s.pos(), format!("unknown value type former `{h}`")),
            }
        }
    }
}

pub fn sexp_to_ctype(s: &Sexp) -> Result<CType, ParseError> {
    match s {
        Sexp::Atom(a, _) => match a.as_str() {
            "ozero" => Ok(CType::Zero),
            "oone" => Ok(CType::One),
            _ => Ok(CType::Const(name(ident(s)?))),
        },
        Sexp::List(..) => {
            let h = s.head().unwrap_or("");
            match h {
                "tensor" | "power" => {
                    let a = args(s, 2, h)?;
                    let (v, c) = (sexp_to_vtype(&a[0])?, sexp_to_ctype(&a[1])?);
                    Ok(if h == "tensor" { CType::tensor(v, c) } else { CType::power(v, c) })
                }
                "osum" | "oprod" => {
                    let a = args(s, 2, h)?;
                    let (l, r) = (sexp_to_ctype(&a[0])?, sexp_to_ctype(&a[1])?);
                    Ok(if h == "osum" { CType::plus(l, r) } else { CType::with(l, r) })
                }
                _ => err(ErrorKind::Grammar, s.pos(), format!("unknown computation type former `{h}`")),
            }
        }
    }
}

pub fn parse_fg_type(src: &str) -> Result<FgType, ParseError> {
    sexp_to_fg_type(&read_one(src)?)
}
pub fn parse_vtype(src: &str) -> Result<VType, ParseError> {
    sexp_to_vtype(&read_one(src)?)
}
pub fn parse_ctype(src: &str) -> Result<CType, ParseError> {
    sexp_to_ctype(&read_one(src)?)
}

// ---------------------------------------------------------------- terms

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Val,
    Lin,
}

/// Scoped renaming environment used while converting s-expressions to terms.
struct Scope<'s> {
    /// Surface name, internal name, kind.
    bound: Vec<(String, Name, Kind)>,
    free_linear: BTreeSet<String>,
    declared: BTreeSet<String>,
    sig: Option<&'s Signature>,
}

impl<'s> Scope<'s> {
    fn new(sig: Option<&'s Signature>) -> Self {
        Scope { bound: Vec::new(), free_linear: BTreeSet::new(), declared: BTreeSet::new(), sig }
    }

    fn bind(&mut self, s: &Sexp, kind: Kind) -> Result<Name, ParseError> {
        let x = ident(s)?;
        if self.declared.contains(x) || self.bound.iter().any(|(n, _, _)| n == x) {
            return err(ErrorKind::Grammar, s.pos(), format!("`{x}` shadows a variable already in scope"));
        }
        let internal = fresh(x);
        self.bound.push((x.to_string(), internal.clone(), kind));
        Ok(internal)
    }

    fn unbind(&mut self) {
        self.bound.pop();
    }

    fn lookup(&self, x: &str) -> (Name, Kind) {
        if let Some((_, n, k)) = self.bound.iter().rev().find(|(n, _, _)| n == x) {
            return (n.clone(), *k);
        }
        let k = if self.free_linear.contains(x) { Kind::Lin } else { Kind::Val };
        (name(x), k)
    }

    fn check_effect(&self, s: &Sexp) -> Result<Name, ParseError> {
        let e = ident(s)?;
        if let Some(sig) = self.sig {
            if !sig.effects.contains_key(e) {
                return err(ErrorKind::UnknownConstant, s.pos(), format!("unknown effect constant `{e}`"));
            }
        }
        Ok(name(e))
    }

    fn check_const(&self, s: &Sexp) -> Result<Name, ParseError> {
        let f = ident(s)?;
        if let Some(sig) = self.sig {
            if !sig.consts.contains_key(f) {
                return err(ErrorKind::UnknownConstant, s.pos(), format!("unknown term constant `{f}`"));
            }
        }
        Ok(name(f))
    }
}

fn binder_pair(s: &Sexp) -> Result<(&Sexp, &Sexp), ParseError> {
    match s.list() {
        Some([x, t]) => Ok((x, t)),
        _ => err(ErrorKind::Grammar, s.pos(), "expected `(name type)`"),
    }
}

fn fg_term(s: &Sexp, sc: &mut Scope) -> Result<FgTerm, ParseError> {
    match s {
        Sexp::Atom(a, p) => {
            if a == "star" {
                return Ok(FgTerm::Star);
            }
            ident(s)?;
            let (n, k) = sc.lookup(a);
            if k == Kind::Lin {
                return err(ErrorKind::Grammar, *p, "linear variables do not exist in FGCBV");
            }
            Ok(FgTerm::Var(n))
        }
        Sexp::List(items, p) => {
            let h = s.head().ok_or_else(|| ParseError {
                kind: ErrorKind::Grammar,
                msg: "expected a form".into(),
                pos: *p,
                origin: String::new(),
            })?;
            let b = |t: FgTerm| Box::new(t);
            Ok(match h {
                "pair" => {
                    let a = args(s, 2, h)?;
                    FgTerm::Pair(b(fg_term(&a[0], sc)?), b(fg_term(&a[1], sc)?))
                }
                "fst" => FgTerm::Fst(b(fg_term(&args(s, 1, h)?[0], sc)?)),
                "snd" => FgTerm::Snd(b(fg_term(&args(s, 1, h)?[0], sc)?)),
                "return" => FgTerm::Return(b(fg_term(&args(s, 1, h)?[0], sc)?)),
                "app" => {
                    let a = args(s, 2, h)?;
                    FgTerm::App(b(fg_term(&a[0], sc)?), b(fg_term(&a[1], sc)?))
                }
                "lam" => {
                    let a = args(s, 2, h)?;
                    let (x, t) = binder_pair(&a[0])?;
                    let ty = sexp_to_fg_type(t)?;
                    let x = sc.bind(x, Kind::Val)?;
                    let body = fg_term(&a[1], sc);
                    sc.unbind();
                    FgTerm::Lam(x, ty, b(body?))
                }
                "let" | "seq" => {
                    let (x, m, n) = if h == "let" {
                        let a = args(s, 2, h)?;
                        let (x, m) = binder_pair(&a[0])?;
                        (Some(x), m, &a[1])
                    } else {
                        let a = args(s, 2, h)?;
                        (None, &a[0], &a[1])
                    };
                    let m = fg_term(m, sc)?;
                    let x = match x {
                        Some(x) => sc.bind(x, Kind::Val)?,
                        None => {
                            let f = fresh("u");
                            sc.bound.push((f.to_string(), f.clone(), Kind::Val));
                            f
                        }
                    };
                    let body = fg_term(n, sc);
                    sc.unbind();
                    FgTerm::Let(x, b(m), b(body?))
                }
                "inl" | "inr" => {
                    let a = args(s, 2, h)?;
                    let ty = sexp_to_fg_type(&a[0])?;
                    let v = b(fg_term(&a[1], sc)?);
                    if h == "inl" {
                        FgTerm::Inl(ty, v)
                    } else {
                        FgTerm::Inr(ty, v)
                    }
                }
                "absurd" => {
                    let a = args(s, 2, h)?;
                    FgTerm::Absurd(sexp_to_fg_type(&a[0])?, b(fg_term(&a[1], sc)?))
                }
                "case" | "case-p" => {
                    let a = args(s, 3, h)?;
                    let v = fg_term(&a[0], sc)?;
                    let mut branch = |br: &Sexp| -> Result<(Name, FgTerm), ParseError> {
                        let (x, w) = binder_pair(br)?;
                        let x = sc.bind(x, Kind::Val)?;
                        let w = fg_term(w, sc);
                        sc.unbind();
                        Ok((x, w?))
                    };
                    let (x1, w1) = branch(&a[1])?;
                    let (x2, w2) = branch(&a[2])?;
                    if h == "case" {
                        FgTerm::case(v, x1, w1, x2, w2)
                    } else {
                        FgTerm::case_p(v, x1, w1, x2, w2)
                    }
                }
                "inl-p" | "inr-p" => {
                    let a = args(s, 2, h)?;
                    FgTerm::in_p(h == "inr-p", sexp_to_fg_type(&a[0])?, fg_term(&a[1], sc)?)
                }
                "absurd-p" => {
                    let a = args(s, 2, h)?;
                    FgTerm::image_p(sexp_to_fg_type(&a[0])?, fg_term(&a[1], sc)?)
                }
                "not" => FgTerm::not(fg_term(&args(s, 1, h)?[0], sc)?),
                "geff" | "const" => {
                    if items.len() < 2 {
                        return err(ErrorKind::Grammar, *p, format!("`{h}` needs a name"));
                    }
                    let c = if h == "geff" { sc.check_effect(&items[1])? } else { sc.check_const(&items[1])? };
                    let vs = items[2..].iter().map(|v| fg_term(v, sc)).collect::<Result<Vec<_>, _>>()?;
                    if h == "geff" {
                        FgTerm::Geff(c, vs)
                    } else {
                        FgTerm::Const(c, vs)
                    }
                }
                other => return err(ErrorKind::Grammar, *p, format!("unknown FGCBV form `{other}`")),
            })
        }
    }
}

fn lin_term(s: &Sexp, sc: &mut Scope) -> Result<Term, ParseError> {
    match s {
        Sexp::Atom(a, _) => {
            match a.as_str() {
                "star" => return Ok(Term::Star),
                "ounit" => return Ok(Term::OUnit),
                _ => {}
            }
            ident(s)?;
            let (n, k) = sc.lookup(a);
            Ok(match k {
                Kind::Val => Term::Var(n),
                Kind::Lin => Term::LVar(n),
            })
        }
        Sexp::List(items, p) => {
            let h = s.head().ok_or_else(|| ParseError {
                kind: ErrorKind::Grammar,
                msg: "expected a form".into(),
                pos: *p,
                origin: String::new(),
            })?;
            let b = |t: Term| Box::new(t);
            macro_rules! two {
                ($c:path) => {{
                    let a = args(s, 2, h)?;
                    $c(b(lin_term(&a[0], sc)?), b(lin_term(&a[1], sc)?))
                }};
            }
            macro_rules! one {
                ($c:path) => {{
                    $c(b(lin_term(&args(s, 1, h)?[0], sc)?))
                }};
            }
            Ok(match h {
                "pair" => two!(Term::Pair),
                "lapp" => two!(Term::LApp),
                "tens" => two!(Term::Tens),
                "papp" => two!(Term::PApp),
                "opair" => two!(Term::OPair),
                "fst" => one!(Term::Fst),
                "snd" => one!(Term::Snd),
                "ofst" => one!(Term::OFst),
                "osnd" => one!(Term::OSnd),
                "llam" | "plam" => {
                    let a = args(s, 2, h)?;
                    let (x, t) = binder_pair(&a[0])?;
                    if h == "llam" {
                        let ty = sexp_to_ctype(t)?;
                        let z = sc.bind(x, Kind::Lin)?;
                        let body = lin_term(&a[1], sc);
                        sc.unbind();
                        Term::LLam(z, ty, b(body?))
                    } else {
                        let ty = sexp_to_vtype(t)?;
                        let x = sc.bind(x, Kind::Val)?;
                        let body = lin_term(&a[1], sc);
                        sc.unbind();
                        Term::PLam(x, ty, b(body?))
                    }
                }
                "lettens" => {
                    let a = args(s, 2, h)?;
                    let parts = match a[0].list() {
                        Some(v) if v.len() == 3 => v,
                        _ => return err(ErrorKind::Grammar, a[0].pos(), "expected `(x z t)`"),
                    };
                    let t = lin_term(&parts[2], sc)?;
                    let x = sc.bind(&parts[0], Kind::Val)?;
                    let z = match sc.bind(&parts[1], Kind::Lin) {
                        Ok(z) => z,
                        Err(e) => {
                            sc.unbind();
                            return Err(e);
                        }
                    };
                    let body = lin_term(&a[1], sc);
                    sc.unbind();
                    sc.unbind();
                    Term::LetTens(x, z, b(t), b(body?))
                }
                "inl" | "inr" | "absurd" => {
                    let a = args(s, 2, h)?;
                    let ty = sexp_to_vtype(&a[0])?;
                    let v = b(lin_term(&a[1], sc)?);
                    match h {
                        "inl" => Term::Inl(ty, v),
                        "inr" => Term::Inr(ty, v),
                        _ => Term::Absurd(ty, v),
                    }
                }
                "oinl" | "oinr" | "oabsurd" => {
                    let a = args(s, 2, h)?;
                    let ty = sexp_to_ctype(&a[0])?;
                    let v = b(lin_term(&a[1], sc)?);
                    match h {
                        "oinl" => Term::OInl(ty, v),
                        "oinr" => Term::OInr(ty, v),
                        _ => Term::OAbsurd(ty, v),
                    }
                }
                "case" | "ocase" => {
                    let a = args(s, 3, h)?;
                    let v = lin_term(&a[0], sc)?;
                    let kind = if h == "case" { Kind::Val } else { Kind::Lin };
                    let mut branch = |br: &Sexp| -> Result<(Name, Term), ParseError> {
                        let (x, w) = binder_pair(br)?;
                        let x = sc.bind(x, kind)?;
                        let w = lin_term(w, sc);
                        sc.unbind();
                        Ok((x, w?))
                    };
                    let (x1, w1) = branch(&a[1])?;
                    let (x2, w2) = branch(&a[2])?;
                    if h == "case" {
                        Term::case(v, x1, w1, x2, w2)
                    } else {
                        Term::ocase(v, x1, w1, x2, w2)
                    }
                }
                "not" => Term::not(lin_term(&args(s, 1, h)?[0], sc)?),
                "sacc" => Term::Sacc(sc.check_effect(&args(s, 1, h)?[0])?),
                "const" => {
                    if items.len() < 2 {
                        return err(ErrorKind::Grammar, *p, "`const` needs a name");
                    }
                    let c = sc.check_const(&items[1])?;
                    let vs = items[2..].iter().map(|v| lin_term(v, sc)).collect::<Result<Vec<_>, _>>()?;
                    Term::Const(c, vs)
                }
                other => return err(ErrorKind::Grammar, *p, format!("unknown ECBV/CPS form `{other}`")),
            })
        }
    }
}

fn with_origin<T>(r: Result<T, ParseError>, origin: &str) -> Result<T, ParseError> {
    r.map_err(|mut e| {
        e.origin = origin.to_string();
        e
    })
}

/// Parse a closed FGCBV term (free identifiers are taken as value variables).
pub fn parse_fg_term(src: &str) -> Result<FgTerm, ParseError> {
    fg_term(&read_one(src)?, &mut Scope::new(None))
}

/// Parse an ECBV or CPS term whose free linear variables are `linear`.
pub fn parse_term_with(src: &str, linear: &[&str]) -> Result<Term, ParseError> {
    let mut sc = Scope::new(None);
    sc.free_linear = linear.iter().map(|s| s.to_string()).collect();
    lin_term(&read_one(src)?, &mut sc)
}

/// Parse a closed ECBV or CPS term.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    parse_term_with(src, &[])
}

// ---------------------------------------------------------------- program files

/// Which family a program file belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Fg,
    Ecbv,
    Cps,
}

/// A parsed `.lst` program: optional context headers and one term.
#[derive(Clone, Debug)]
pub enum Program {
    Fg { gamma: Vec<(Name, FgType)>, term: FgTerm },
    Lin { family: Family, gamma: Vec<(Name, VType)>, delta: Option<(Name, CType)>, term: Term },
}

/// Parse a program file. Header forms `(context (x T) ...)` and
/// `(linear (z C))` may precede the single term.
pub fn parse_program(src: &SourceFile, family: Family, sig: Option<&Signature>) -> Result<Program, ParseError> {
    with_origin(parse_program_inner(&src.text, family, sig), &src.origin)
}

fn parse_program_inner(text: &str, family: Family, sig: Option<&Signature>) -> Result<Program, ParseError> {
    let forms = read_all(text)?;
    let mut sc = Scope::new(sig);
    let mut fg_gamma = Vec::new();
    let mut gamma = Vec::new();
    let mut delta = None;
    let mut term = None;
    for f in &forms {
        match f.head() {
            Some("context") => {
                for b in &f.list().unwrap()[1..] {
                    let (x, t) = binder_pair(b)?;
                    let xs = ident(x)?;
                    if !sc.declared.insert(xs.to_string()) {
                        return err(ErrorKind::Grammar, x.pos(), format!("`{xs}` declared twice"));
                    }
                    if family == Family::Fg {
                        fg_gamma.push((name(xs), sexp_to_fg_type(t)?));
                    } else {
                        gamma.push((name(xs), sexp_to_vtype(t)?));
                    }
                }
            }
            Some("linear") => {
                if family == Family::Fg {
                    return err(ErrorKind::Grammar, f.pos(), "FGCBV programs have no linear context");
                }
                let v = &f.list().unwrap()[1..];
                if v.len() != 1 || delta.is_some() {
                    return err(ErrorKind::Grammar, f.pos(), "the linear context holds exactly one variable");
                }
                let (z, t) = binder_pair(&v[0])?;
                let zs = ident(z)?;
                if !sc.declared.insert(zs.to_string()) {
                    return err(ErrorKind::Grammar, z.pos(), format!("`{zs}` declared twice"));
                }
                sc.free_linear.insert(zs.to_string());
                delta = Some((name(zs), sexp_to_ctype(t)?));
            }
            _ => {
                if term.is_some() {
                    return err(ErrorKind::Grammar, f.pos(), "a program holds a single term");
                }
                term = Some(f);
            }
        }
    }
    let Some(t) = term else {
        return err(ErrorKind::Grammar, Pos { line: 1, col: 1 }, "no term found");
    };
    Ok(match family {
        Family::Fg => Program::Fg { gamma: fg_gamma, term: fg_term(t, &mut sc)? },
        _ => Program::Lin { family, gamma, delta, term: lin_term(t, &mut sc)? },
    })
}

// ---------------------------------------------------------------- printing

pub fn print_fg_type(t: &FgType) -> String {
    match t {
        FgType::Base(n) => n.to_string(),
        FgType::Unit => "unit".into(),
        FgType::Empty => "empty".into(),
        FgType::Prod(a, b) => format!("(prod {} {})", print_fg_type(a), print_fg_type(b)),
        FgType::Sum(a, b) => format!("(sum {} {})", print_fg_type(a), print_fg_type(b)),
        FgType::Parr(a, b) => format!("(parr {} {})", print_fg_type(a), print_fg_type(b)),
    }
}

pub fn print_vtype(t: &VType) -> String {
    match t {
        VType::Base(n) => n.to_string(),
        VType::Unit => "unit".into(),
        VType::Empty => "empty".into(),
        VType::Prod(a, b) => format!("(prod {} {})", print_vtype(a), print_vtype(b)),
        VType::Sum(a, b) => format!("(sum {} {})", print_vtype(a), print_vtype(b)),
        VType::Lolli(a, b) => format!("(lolli {} {})", print_ctype(a), print_ctype(b)),
    }
}

pub fn print_ctype(t: &CType) -> String {
    match t {
        CType::Const(n) => n.to_string(),
        CType::Zero => "ozero".into(),
        CType::One => "oone".into(),
        CType::Tensor(a, c) => format!("(tensor {} {})", print_vtype(a), print_ctype(c)),
        CType::Power(a, c) => format!("(power {} {})", print_vtype(a), print_ctype(c)),
        CType::Plus(a, b) => format!("(osum {} {})", print_ctype(a), print_ctype(b)),
        CType::With(a, b) => format!("(oprod {} {})", print_ctype(a), print_ctype(b)),
    }
}

/// Chooses printed names for binders: the base of the internal name when it
/// is free in the current scope, otherwise the base with a numeric suffix.
struct Namer {
    avoid: BTreeSet<String>,
    scope: Vec<(Name, String)>,
}

impl Namer {
    fn new(free: impl IntoIterator<Item = Name>) -> Self {
        let mut avoid: BTreeSet<String> = free.into_iter().map(|n| n.to_string()).collect();
        avoid.extend(RESERVED.iter().map(|s| s.to_string()));
        Namer { avoid, scope: Vec::new() }
    }

    fn bind(&mut self, n: &Name) -> String {
        let base = base_name(n);
        let base = if base.is_empty() { "v" } else { base };
        let taken = |c: &str, me: &Namer| me.avoid.contains(c) || me.scope.iter().any(|(_, p)| p == c);
        let mut cand = base.to_string();
        let mut k = 1;
        while taken(&cand, self) {
            cand = format!("{base}_{k}");
            k += 1;
        }
        self.scope.push((n.clone(), cand.clone()));
        cand
    }

    fn unbind(&mut self) {
        self.scope.pop();
    }

    fn get(&self, n: &Name) -> String {
        match self.scope.iter().rev().find(|(m, _)| m == n) {
            Some((_, p)) => p.clone(),
            None => n.to_string(),
        }
    }
}

pub fn print_fg(t: &FgTerm) -> String {
    let mut nm = Namer::new(t.free_vars());
    let mut out = String::new();
    pfg(t, &mut nm, &mut out);
    out
}

fn pfg(t: &FgTerm, nm: &mut Namer, o: &mut String) {
    use FgTerm::*;
    let bin = |h: &str, a: &FgTerm, b: &FgTerm, nm: &mut Namer, o: &mut String| {
        o.push('(');
        o.push_str(h);
        o.push(' ');
        pfg(a, nm, o);
        o.push(' ');
        pfg(b, nm, o);
        o.push(')');
    };
    match t {
        Var(x) => o.push_str(&nm.get(x)),
        Star => o.push_str("star"),
        Pair(a, b) => bin("pair", a, b, nm, o),
        App(a, b) => bin("app", a, b, nm, o),
        Fst(a) | Snd(a) | Return(a) => {
            o.push_str(match t {
                Fst(_) => "(fst ",
                Snd(_) => "(snd ",
                _ => "(return ",
            });
            pfg(a, nm, o);
            o.push(')');
        }
        Lam(x, ty, b) => {
            let px = nm.bind(x);
            o.push_str(&format!("(lam ({px} {}) ", print_fg_type(ty)));
            pfg(b, nm, o);
            nm.unbind();
            o.push(')');
        }
        Let(x, m, n) => {
            o.push_str("(let (");
            let px_slot = o.len();
            o.push(' ');
            pfg(m, nm, o);
            o.push_str(") ");
            let px = nm.bind(x);
            o.insert_str(px_slot, &px);
            pfg(n, nm, o);
            nm.unbind();
            o.push(')');
        }
        Const(f, vs) | Geff(f, vs) => {
            o.push_str(if matches!(t, Const(..)) { "(const " } else { "(geff " });
            o.push_str(f);
            for v in vs {
                o.push(' ');
                pfg(v, nm, o);
            }
            o.push(')');
        }
        Inl(ty, v) | Inr(ty, v) | Absurd(ty, v) => {
            let h = match t {
                Inl(..) => "inl",
                Inr(..) => "inr",
                _ => "absurd",
            };
            o.push_str(&format!("({h} {} ", print_fg_type(ty)));
            pfg(v, nm, o);
            o.push(')');
        }
        Case(v, x1, w1, x2, w2) => {
            o.push_str("(case ");
            pfg(v, nm, o);
            for (x, w) in [(x1, w1), (x2, w2)] {
                let px = nm.bind(x);
                o.push_str(&format!(" ({px} "));
                pfg(w, nm, o);
                o.push(')');
                nm.unbind();
            }
            o.push(')');
        }
    }
}

pub fn print_term(t: &Term) -> String {
    let mut free = t.free_vars(crate::syntax::VarKind::Value);
    free.extend(t.free_vars(crate::syntax::VarKind::Linear));
    let mut nm = Namer::new(free);
    let mut out = String::new();
    plin(t, &mut nm, &mut out);
    out
}

fn plin(t: &Term, nm: &mut Namer, o: &mut String) {
    use Term::*;
    let head = |h: &str, o: &mut String| {
        o.push('(');
        o.push_str(h);
    };
    match t {
        Var(x) | LVar(x) => o.push_str(&nm.get(x)),
        Star => o.push_str("star"),
        OUnit => o.push_str("ounit"),
        Sacc(e) => o.push_str(&format!("(sacc {e})")),
        Pair(a, b) | LApp(a, b) | Tens(a, b) | PApp(a, b) | OPair(a, b) => {
            head(
                match t {
                    Pair(..) => "pair",
                    LApp(..) => "lapp",
                    Tens(..) => "tens",
                    PApp(..) => "papp",
                    _ => "opair",
                },
                o,
            );
            o.push(' ');
            plin(a, nm, o);
            o.push(' ');
            plin(b, nm, o);
            o.push(')');
        }
        Fst(a) | Snd(a) | OFst(a) | OSnd(a) => {
            head(
                match t {
                    Fst(_) => "fst",
                    Snd(_) => "snd",
                    OFst(_) => "ofst",
                    _ => "osnd",
                },
                o,
            );
            o.push(' ');
            plin(a, nm, o);
            o.push(')');
        }
        LLam(z, ty, b) => {
            let pz = nm.bind(z);
            o.push_str(&format!("(llam ({pz} {}) ", print_ctype(ty)));
            plin(b, nm, o);
            nm.unbind();
            o.push(')');
        }
        PLam(x, ty, b) => {
            let px = nm.bind(x);
            o.push_str(&format!("(plam ({px} {}) ", print_vtype(ty)));
            plin(b, nm, o);
            nm.unbind();
            o.push(')');
        }
        Const(f, vs) => {
            o.push_str(&format!("(const {f}"));
            for v in vs {
                o.push(' ');
                plin(v, nm, o);
            }
            o.push(')');
        }
        Inl(ty, v) | Inr(ty, v) | Absurd(ty, v) => {
            let h = match t {
                Inl(..) => "inl",
                Inr(..) => "inr",
                _ => "absurd",
            };
            o.push_str(&format!("({h} {} ", print_vtype(ty)));
            plin(v, nm, o);
            o.push(')');
        }
        OInl(ty, v) | OInr(ty, v) | OAbsurd(ty, v) => {
            let h = match t {
                OInl(..) => "oinl",
                OInr(..) => "oinr",
                _ => "oabsurd",
            };
            o.push_str(&format!("({h} {} ", print_ctype(ty)));
            plin(v, nm, o);
            o.push(')');
        }
        Case(v, x1, w1, x2, w2) | OCase(v, x1, w1, x2, w2) => {
            o.push_str(if matches!(t, Case(..)) { "(case " } else { "(ocase " });
            plin(v, nm, o);
            for (x, w) in [(x1, w1), (x2, w2)] {
                let px = nm.bind(x);
                o.push_str(&format!(" ({px} "));
                plin(w, nm, o);
                o.push(')');
                nm.unbind();
            }
            o.push(')');
        }
        LetTens(x, z, a, b) => {
            o.push_str("(lettens (");
            let slot = o.len();
            o.push(' ');
            plin(a, nm, o);
            o.push_str(") ");
            let px = nm.bind(x);
            let pz = nm.bind(z);
            o.insert_str(slot, &format!("{px} {pz}"));
            plin(b, nm, o);
            nm.unbind();
            nm.unbind();
            o.push(')');
        }
    }
}

/// Render a program header plus term.
pub fn print_program(p: &Program) -> String {
    match p {
        Program::Fg { gamma, term } => {
            let mut s = String::new();
            if !gamma.is_empty() {
                s.push_str("(context");
                for (x, t) in gamma {
                    s.push_str(&format!(" ({x} {})", print_fg_type(t)));
                }
                s.push_str(")\n");
            }
            s + &print_fg(term)
        }
        Program::Lin { gamma, delta, term, .. } => {
            let mut s = String::new();
            if !gamma.is_empty() {
                s.push_str("(context");
                for (x, t) in gamma {
                    s.push_str(&format!(" ({x} {})", print_vtype(t)));
                }
                s.push_str(")\n");
            }
            if let Some((z, c)) = delta {
                s.push_str(&format!("(linear ({z} {}))\n", print_ctype(c)));
            }
            s + &print_term(term)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, fg_alpha_eq};

    #[test]
    fn type_examples() {
        assert_eq!(parse_fg_type("(parr unit unit)").unwrap(), FgType::parr(FgType::Unit, FgType::Unit));
        assert_eq!(print_fg_type(&FgType::parr(FgType::Unit, FgType::Unit)), "(parr unit unit)");
        assert_eq!(print_ctype(&CType::tensor(VType::Unit, CType::state())), "(tensor unit S)");
    }

    #[test]
    fn term_examples() {
        let t = parse_term("(llam (z S) z)").unwrap();
        match &t {
            Term::LLam(z, CType::Const(s), body) => {
                assert_eq!(&**s, "S");
                assert_eq!(**body, Term::LVar(z.clone()));
            }
            _ => panic!("{t:?}"),
        }
        let f = parse_fg_term("(let (x (geff deref star)) (return x))").unwrap();
        assert!(matches!(f, FgTerm::Let(_, ref m, _) if matches!(**m, FgTerm::Geff(..))));
        assert_eq!(print_fg(&FgTerm::ret(FgTerm::Star)), "(return star)");
    }

    #[test]
    fn round_trip_keeps_readable_names() {
        let src = "(lam (x unit) (let (y (return x)) (return (pair x y))))";
        let t = parse_fg_term(src).unwrap();
        assert_eq!(print_fg(&t), src);
        let src = "(llam (z (tensor unit S)) (lettens (x s z) (tens x s)))";
        let t = parse_term(src).unwrap();
        assert_eq!(print_term(&t), src);
        assert!(alpha_eq(&parse_term(&print_term(&t)).unwrap(), &t));
    }

    #[test]
    fn shadowing_rejected() {
        let e = parse_fg_term("(lam (x unit) (lam (x unit) (return x)))").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Grammar);
    }

    #[test]
    fn errors_carry_locations() {
        let e = read_all("(a\n  (b))) ").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Lexical);
        assert_eq!(e.pos, Pos { line: 2, col: 7 });
        let e = parse_fg_term("(frob star)").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Grammar);
        let sig = Signature::bit_store();
        let e = parse_program(&SourceFile::stdin("(geff nope)"), Family::Fg, Some(&sig)).unwrap_err();
        assert_eq!(e.kind, ErrorKind::UnknownConstant);
        assert_eq!(e.origin, "<stdin>");
    }

    #[test]
    fn comments_ignored() {
        let t = parse_fg_term("; leading\n(return ; inner\n star)").unwrap();
        assert_eq!(t, FgTerm::ret(FgTerm::Star));
    }

    #[test]
    fn printer_avoids_collisions() {
        // Two distinct binders both called `x` internally must print apart.
        let x1 = fresh("x");
        let x2 = fresh("x");
        let t = FgTerm::lam(
            x1.clone(),
            FgType::Unit,
            FgTerm::ret(FgTerm::lam(x2.clone(), FgType::Unit, FgTerm::ret(FgTerm::pair(FgTerm::Var(x1), FgTerm::Var(x2))))),
        );
        let s = print_fg(&t);
        assert_eq!(s, "(lam (x unit) (return (lam (x_1 unit) (return (pair x x_1)))))");
        assert!(fg_alpha_eq(&parse_fg_term(&s).unwrap(), &t));
    }

    #[test]
    fn program_headers() {
        let src = SourceFile::stdin("(context (f (lolli S S)))\n(linear (s S))\n(lapp f s)");
        match parse_program(&src, Family::Ecbv, None).unwrap() {
            Program::Lin { gamma, delta, term, .. } => {
                assert_eq!(gamma.len(), 1);
                assert!(delta.is_some());
                assert_eq!(term, Term::lapp(Term::var("f"), Term::lvar("s")));
            }
            _ => panic!(),
        }
    }
}
