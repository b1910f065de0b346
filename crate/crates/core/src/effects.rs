//! Effect theories, comodels and the correspondence between state access
//! operations, generic effects and algebraic operations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::models::{
    enumerate_fg, eval_ecbv, graphs, morphisms_equal_fg, product, morphisms_equal_lin, ConcreteModel, Elem, ModelError,
    ModelVerdict, OpFn, Outcome, Reading, TVal, Weight, World,
};
use crate::surface::{parse_program, read_all, sexp_to_fg_type, Family, ParseError, Program, Sexp, SourceFile};
use crate::syntax::{name, FgTerm, FgType, Name, Term};
use crate::translate::{sps_ctx, sps_producer, TranslationEnv};
use crate::typecheck::{
    check_fg, sum_type, tuple_type, EffectArity, FgContext, FgMode, LinFamily, LinMode, Signature,
};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EffectError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("equation `{0}` leaves the first-order producer fragment: {1}")]
    FragmentViolation(String, String),
    #[error("equation `{0}` is ill-typed: {1}")]
    IllTyped(String, String),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("unknown theory `{0}`")]
    UnknownTheory(String),
    #[error("bad file: {0}")]
    Format(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
}

type R<T> = Result<T, EffectError>;

fn format_err<T>(msg: impl Into<String>) -> R<T> {
    Err(EffectError::Format(msg.into()))
}

fn arity_err<T>(msg: impl Into<String>) -> R<T> {
    Err(EffectError::Arity(msg.into()))
}

/// A producer equation `Γ ⊢ lhs ≡ rhs`.
#[derive(Clone, Debug)]
pub struct Equation {
    pub name: String,
    pub ctx: FgContext,
    pub lhs: FgTerm,
    pub rhs: FgTerm,
}

#[derive(Clone, Debug)]
pub struct EffectTheory {
    pub name: String,
    pub sig: Signature,
    pub equations: Vec<Equation>,
}

impl EffectTheory {
    pub fn validate(&self) -> R<()> {
        for eq in &self.equations {
            for side in [&eq.lhs, &eq.rhs] {
                check_fragment(side, true).map_err(|m| EffectError::FragmentViolation(eq.name.clone(), m))?;
            }
            let ill = |e: crate::typecheck::TypeError| EffectError::IllTyped(eq.name.clone(), e.to_string());
            let tl = check_fg(&self.sig, &eq.ctx, &eq.lhs, FgMode::Producer).map_err(ill)?;
            let tr = check_fg(&self.sig, &eq.ctx, &eq.rhs, FgMode::Producer).map_err(ill)?;
            if tl != tr {
                return Err(EffectError::IllTyped(eq.name.clone(), format!("sides have types {tl} and {tr}")));
            }
        }
        Ok(())
    }
}

/// Membership in the first-order producer fragment: values without
/// lambdas; producers built from `return`, `let`, generic effects and the
/// derived producer-level case.
pub fn check_fragment(t: &FgTerm, producer: bool) -> Result<(), String> {
    use FgTerm::*;
    match (t, producer) {
        (Return(v), true) => check_fragment(v, false),
        (Let(_, m, n), true) => {
            check_fragment(m, true)?;
            check_fragment(n, true)
        }
        (Geff(_, vs), true) => vs.iter().try_for_each(|v| check_fragment(v, false)),
        (App(f, a), true) => match (&**f, &**a) {
            (Case(v, _, l1, _, l2), Star) => match (&**l1, &**l2) {
                (Lam(_, FgType::Unit, n1), Lam(_, FgType::Unit, n2)) => {
                    check_fragment(v, false)?;
                    check_fragment(n1, true)?;
                    check_fragment(n2, true)
                }
                _ => Err(format!("application `{t}`")),
            },
            _ => Err(format!("application `{t}`")),
        },
        (Var(_) | Star, false) => Ok(()),
        (Pair(a, b), false) => {
            check_fragment(a, false)?;
            check_fragment(b, false)
        }
        (Fst(a) | Snd(a) | Inl(_, a) | Inr(_, a) | Absurd(_, a), false) => check_fragment(a, false),
        (Const(_, vs), false) => vs.iter().try_for_each(|v| check_fragment(v, false)),
        (Case(v, _, w1, _, w2), false) => {
            check_fragment(v, false)?;
            check_fragment(w1, false)?;
            check_fragment(w2, false)
        }
        (Lam(..), _) => Err(format!("lambda `{t}`")),
        (_, true) => Err(format!("`{t}` is not a producer")),
        (_, false) => Err(format!("`{t}` is not a value")),
    }
}

// ---------------------------------------------------------------- loading

fn parse_side(sig: &Signature, label: &str, ctx: &[Sexp], side: &Sexp) -> R<(FgContext, FgTerm)> {
    let binders: Vec<String> = ctx.iter().map(|b| b.to_string()).collect();
    let src = format!("(context {}) {side}", binders.join(" "));
    match parse_program(&SourceFile::new(src, label), Family::Fg, Some(sig))? {
        Program::Fg { gamma, term } => {
            let ctx = gamma.into_iter().fold(FgContext::new(), |c, (x, t)| c.with_name(x, t));
            Ok((ctx, term))
        }
        Program::Lin { .. } => unreachable!("parsed as FGCBV"),
    }
}

fn equation(sig: &Signature, label: &str, ctx: &[Sexp], lhs: &Sexp, rhs: &Sexp) -> R<Equation> {
    let (ctx_l, lhs) = parse_side(sig, label, ctx, lhs)?;
    let (_, rhs) = parse_side(sig, label, ctx, rhs)?;
    Ok(Equation { name: label.to_string(), ctx: ctx_l, lhs, rhs })
}

fn alt_types(s: &Sexp) -> R<Vec<FgType>> {
    match s {
        Sexp::List(v, _) if !matches!(s.head(), Some("prod" | "sum" | "parr")) => {
            v.iter().map(|t| Ok(sexp_to_fg_type(t)?)).collect()
        }
        _ => Ok(vec![sexp_to_fg_type(s)?]),
    }
}

/// Parse and validate a theory file:
/// `(theory name? (sort val) (const f (val val) val) (effect read () (val))
///  (effect write (val) (())) (eq label? ((x val)) lhs rhs))`.
pub fn load_theory(src: &str) -> R<EffectTheory> {
    let forms = read_all(src)?;
    let [form] = forms.as_slice() else { return format_err("expected a single (theory ...) form") };
    let Some(items) = form.list().filter(|_| form.head() == Some("theory")) else {
        return format_err("expected (theory ...)");
    };
    let mut rest = &items[1..];
    let mut theory_name = "theory".to_string();
    if let Some(Sexp::Atom(a, _)) = rest.first() {
        theory_name = a.clone();
        rest = &rest[1..];
    }
    let mut sig = Signature::empty();
    let mut raw_eqs = Vec::new();
    let mut seen = BTreeSet::new();
    for clause in rest {
        let parts = clause.list().unwrap_or(&[]);
        let atom = |i: usize| parts.get(i).and_then(|p| p.atom());
        let mut declare = |n: &str| {
            if seen.insert(n.to_string()) {
                Ok(())
            } else {
                Err(EffectError::Duplicate(n.to_string()))
            }
        };
        match clause.head() {
            Some("sort") if parts.len() == 2 => {
                let n = atom(1).ok_or(EffectError::Format("sort name".into()))?;
                declare(n)?;
                sig.sorts.insert(name(n));
            }
            Some("const") if parts.len() == 4 => {
                let n = atom(1).ok_or(EffectError::Format("constant name".into()))?;
                declare(n)?;
                let args = alt_types(&parts[2])?;
                let result = sexp_to_fg_type(&parts[3])?;
                sig = sig.with_const(n, args, result);
            }
            Some("effect") if parts.len() == 4 => {
                let n = atom(1).ok_or(EffectError::Format("effect name".into()))?;
                declare(n)?;
                let params = alt_types(&parts[2])?;
                let alts = match &parts[3] {
                    Sexp::List(v, _) => v.iter().map(alt_types).collect::<R<Vec<_>>>()?,
                    other => vec![alt_types(other)?],
                };
                sig = sig.with_effect(n, EffectArity::new(params, alts));
            }
            Some("eq") if parts.len() == 4 || parts.len() == 5 => raw_eqs.push(clause.clone()),
            _ => return format_err(format!("unknown clause {clause}")),
        }
    }
    let mut equations = Vec::new();
    let mut labels = BTreeSet::new();
    for (i, clause) in raw_eqs.iter().enumerate() {
        let parts = clause.list().unwrap();
        let (label, ctx, l, r) = if parts.len() == 5 {
            let label = parts[1].atom().ok_or(EffectError::Format("equation label".into()))?.to_string();
            (label, &parts[2], &parts[3], &parts[4])
        } else {
            (format!("eq{}", i + 1), &parts[1], &parts[2], &parts[3])
        };
        if !labels.insert(label.clone()) {
            return Err(EffectError::Duplicate(label));
        }
        let ctx = ctx.list().ok_or(EffectError::Format(format!("context of `{label}` must be a list")))?;
        equations.push(equation(&sig, &label, ctx, l, r)?);
    }
    let t = EffectTheory { name: theory_name, sig, equations };
    t.validate()?;
    Ok(t)
}

const BIT_STORE: &str = "
(theory bit-store
  (effect deref () (() ()))
  (effect flip () (()))
  (eq read-read () (let (x (geff deref)) (let (y (geff deref)) (return (pair x y))))
                   (let (x (geff deref)) (return (pair x x))))
  (eq read-discard () (return star) (seq (geff deref) (return star)))
  (eq flip-flip () (seq (geff flip) (geff flip)) (return star))
  (eq flip-read () (seq (geff flip) (geff deref))
                   (let (x (geff deref)) (seq (geff flip) (return (not x))))))";

const GLOBAL_STORE: &str = "
(theory global-store
  (sort val)
  (effect read () (val))
  (effect write (val) (()))
  (eq GS1 () (return star) (let (x (geff read)) (geff write x)))
  (eq GS2 ((x val)) (seq (geff write x) (geff read)) (seq (geff write x) (return x)))
  (eq GS3 ((x val) (y val)) (seq (geff write x) (geff write y)) (geff write y)))";

const PRINTING: &str = "
(theory printing
  (effect print0 () (()))
  (effect print1 () (())))";

const MEAN_VALUE: &str = "
(theory mean-value
  (effect toss () (() ()))
  (eq medial () (let (x (geff toss)) (let (y (geff toss)) (return (pair x y))))
                (let (y (geff toss)) (let (x (geff toss)) (return (pair x y)))))
  (eq idempotence () (return star) (seq (geff toss) (return star)))
  (eq commutativity () (geff toss) (let (x (geff toss)) (return (not x)))))";

/// Split `global-store:3` into the theory name and its size parameter.
fn split_builtin(spec: &str) -> R<(&str, Option<u32>)> {
    match spec.split_once(':') {
        Some((n, k)) => {
            let k = k.parse().map_err(|_| EffectError::UnknownTheory(spec.to_string()))?;
            if k == 0 {
                return Err(EffectError::UnknownTheory(spec.to_string()));
            }
            Ok((n, Some(k)))
        }
        None => Ok((spec, None)),
    }
}

/// A builtin theory by name: `bit-store`, `global-store[:n]`, `printing`,
/// `mean-value`.
pub fn builtin_theory(spec: &str) -> R<EffectTheory> {
    let (n, k) = split_builtin(spec)?;
    let src = match (n, k) {
        ("bit-store", None) => BIT_STORE,
        ("global-store", _) => GLOBAL_STORE,
        ("printing", None) => PRINTING,
        ("mean-value", None) => MEAN_VALUE,
        _ => return Err(EffectError::UnknownTheory(spec.to_string())),
    };
    load_theory(src)
}

pub const BUILTIN_THEORIES: &[&str] = &["bit-store", "global-store", "printing", "mean-value"];

/// The standard model of a builtin theory, interpreting generic effects.
pub fn builtin_model(spec: &str) -> R<ConcreteModel> {
    let (n, k) = split_builtin(spec)?;
    Ok(match n {
        "bit-store" => bit_store_comodel().model(),
        "global-store" => global_store_comodel(k.unwrap_or(2)).model(),
        "printing" => {
            let print = |c: u8| -> OpFn {
                Arc::new(move |_: &Elem, w: &World| {
                    let mut w = w.clone();
                    w.word.push(c);
                    Ok(vec![(Elem::Unit, w)])
                })
            };
            ConcreteModel::writer(b"01").with_effect("print0", print(b'0')).with_effect("print1", print(b'1'))
        }
        "mean-value" => ConcreteModel::dyadic().with_effect(
            "toss",
            Arc::new(|_: &Elem, w: &World| {
                let half = Weight::new(1, 2);
                Ok(vec![
                    (Elem::bit(false), World { weight: w.weight * half, ..w.clone() }),
                    (Elem::bit(true), World { weight: w.weight * half, ..w.clone() }),
                ])
            }),
        ),
        _ => return Err(EffectError::UnknownTheory(spec.to_string())),
    })
}

// ---------------------------------------------------------------- comodels

/// A candidate comodel: a finite state set and, per effect constant, the
/// graph of a state access map `(b, s) ↦ (a, s')`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComodelCandidate {
    pub states: u32,
    pub bases: BTreeMap<Name, u32>,
    pub ops: BTreeMap<Name, Vec<(Elem, u32, Elem, u32)>>,
}

impl ComodelCandidate {
    pub fn new(states: u32) -> Self {
        ComodelCandidate { states, bases: BTreeMap::new(), ops: BTreeMap::new() }
    }

    pub fn with_base(mut self, n: &str, k: u32) -> Self {
        self.bases.insert(name(n), k);
        self
    }

    /// Add an operation from a total function on parameters and states.
    pub fn with_op(mut self, e: &str, params: &[Elem], f: impl Fn(&Elem, u32) -> (Elem, u32)) -> Self {
        let mut g = Vec::new();
        for p in params {
            for s in 0..self.states {
                let (a, s2) = f(p, s);
                g.push((p.clone(), s, a, s2));
            }
        }
        self.ops.insert(name(e), g);
        self
    }

    /// Replace the output of one entry.
    pub fn mutate(&self, e: &str, param: &Elem, s: u32, out: (Elem, u32)) -> Self {
        let mut c = self.clone();
        if let Some(g) = c.ops.get_mut(e) {
            for entry in g.iter_mut() {
                if entry.0 == *param && entry.1 == s {
                    entry.2 = out.0.clone();
                    entry.3 = out.1;
                }
            }
        }
        c
    }

    /// The store model whose operations are given by the tables. Under the
    /// store reading the tables act as state access operations, under the
    /// Kleisli reading as generic effects.
    pub fn model(&self) -> ConcreteModel {
        let mut m = ConcreteModel::store(self.states);
        for (b, k) in &self.bases {
            m.bases.insert(b.clone(), *k);
        }
        for (e, g) in &self.ops {
            let g = Arc::new(g.clone());
            let e2 = e.clone();
            let op: OpFn = Arc::new(move |p: &Elem, w: &World| match g.iter().find(|x| x.0 == *p && x.1 == w.state) {
                Some((_, _, a, s2)) => Ok(vec![(a.clone(), World { state: *s2, ..w.clone() })]),
                None => Err(ModelError::Unsupported(format!("`{e2}` has no entry at ({p}, {})", w.state))),
            });
            m.effects.insert(e.clone(), op);
        }
        m
    }

    /// Check that every effect of the signature has a total table of the
    /// right type.
    pub fn check_arities(&self, sig: &Signature) -> R<()> {
        let m = self.model();
        for e in self.ops.keys() {
            if !sig.effects.contains_key(e) {
                return arity_err(format!("operation `{e}` is not in the signature"));
            }
        }
        for (e, ar) in &sig.effects {
            let g = self.ops.get(e).ok_or_else(|| EffectError::Arity(format!("no operation for `{e}`")))?;
            let params = enumerate_fg(&m, sig, &ar.param_type())?.elems;
            let results = enumerate_fg(&m, sig, &ar.result_type())?.elems;
            for p in &params {
                for s in 0..self.states {
                    let n = g.iter().filter(|x| x.0 == *p && x.1 == s).count();
                    if n != 1 {
                        return arity_err(format!("`{e}` has {n} entries at ({p}, {s})"));
                    }
                }
            }
            for (p, s, a, s2) in g {
                if !params.contains(p) || *s >= self.states {
                    return arity_err(format!("`{e}` entry ({p}, {s}) outside its domain"));
                }
                if !results.contains(a) || *s2 >= self.states {
                    return arity_err(format!("`{e}` entry ({a}, {s2}) outside its codomain"));
                }
            }
        }
        Ok(())
    }

    /// The state access operation of one effect constant.
    pub fn state_access(&self, sig: &Signature, e: &str) -> R<StateAccess> {
        let ar = sig.effects.get(e).ok_or_else(|| EffectError::Arity(format!("unknown effect `{e}`")))?;
        let graph = self.ops.get(e).ok_or_else(|| EffectError::Arity(format!("no operation for `{e}`")))?;
        Ok(StateAccess { arity: ar.clone(), states: self.states, graph: graph.clone() })
    }
}

fn elem_atom(s: &Sexp) -> R<Elem> {
    match s {
        Sexp::Atom(a, _) => match a.as_str() {
            "star" => Ok(Elem::Unit),
            "0" => Ok(Elem::bit(false)),
            "1" => Ok(Elem::bit(true)),
            other => match other.rsplit_once('.') {
                Some((b, i)) if !b.is_empty() => Ok(Elem::Base(
                    name(b),
                    i.parse().map_err(|_| EffectError::Format(format!("bad element `{other}`")))?,
                )),
                _ => format_err(format!("bad element `{other}`")),
            },
        },
        Sexp::List(v, _) => match (s.head(), v.len()) {
            (Some("pair"), 3) => Ok(Elem::pair(elem_atom(&v[1])?, elem_atom(&v[2])?)),
            (Some("inl"), 2) => Ok(Elem::inl(elem_atom(&v[1])?)),
            (Some("inr"), 2) => Ok(Elem::inr(elem_atom(&v[1])?)),
            _ => format_err(format!("bad element {s}")),
        },
    }
}

/// Parse an element written as `star`, `0`, `1`, `val.2`, `(pair a b)`,
/// `(inl a)` or `(inr a)`.
pub fn parse_elem(src: &str) -> R<Elem> {
    let forms = read_all(src)?;
    match forms.as_slice() {
        [s] => elem_atom(s),
        _ => format_err("expected one element"),
    }
}

fn num(s: &Sexp) -> R<u32> {
    s.atom().and_then(|a| a.parse().ok()).ok_or_else(|| EffectError::Format(format!("expected a number, found {s}")))
}

/// Parse a comodel file:
/// `(comodel (states 2) (base val 2) (op deref star 0 (inl star) 0) ...)`.
/// A `(builtin bit-store)` clause starts from a builtin comodel.
pub fn load_comodel(src: &str) -> R<ComodelCandidate> {
    let forms = read_all(src)?;
    let [form] = forms.as_slice() else { return format_err("expected a single (comodel ...) form") };
    let Some(items) = form.list().filter(|_| form.head() == Some("comodel")) else {
        return format_err("expected (comodel ...)");
    };
    let mut c = ComodelCandidate::new(0);
    let mut states = None;
    for clause in &items[1..] {
        let parts = clause.list().unwrap_or(&[]);
        match (clause.head(), parts.len()) {
            (Some("builtin"), 2) => {
                let spec = parts[1].atom().ok_or(EffectError::Format("builtin name".into()))?;
                c = builtin_comodel(spec)?;
                states.get_or_insert(c.states);
            }
            (Some("states"), 2) => states = Some(num(&parts[1])?),
            (Some("base"), 3) => {
                let b = parts[1].atom().ok_or(EffectError::Format("base name".into()))?;
                c.bases.insert(name(b), num(&parts[2])?);
            }
            (Some("op"), 6) => {
                let e = parts[1].atom().ok_or(EffectError::Format("operation name".into()))?;
                let entry = (elem_atom(&parts[2])?, num(&parts[3])?, elem_atom(&parts[4])?, num(&parts[5])?);
                let g = c.ops.entry(name(e)).or_default();
                g.retain(|x| !(x.0 == entry.0 && x.1 == entry.1));
                g.push(entry);
            }
            _ => return format_err(format!("unknown clause {clause}")),
        }
    }
    c.states = states.ok_or(EffectError::Format("missing (states n)".into()))?;
    if c.states == 0 {
        return Err(ModelError::EmptyBase(name("S")).into());
    }
    Ok(c)
}

pub fn print_comodel(c: &ComodelCandidate) -> String {
    let mut out = format!("(comodel\n  (states {})", c.states);
    for (b, k) in &c.bases {
        out.push_str(&format!("\n  (base {b} {k})"));
    }
    for (e, g) in &c.ops {
        for (p, s, a, s2) in g {
            out.push_str(&format!("\n  (op {e} {p} {s} {a} {s2})"));
        }
    }
    out.push_str(")\n");
    out
}

/// `read(x) = (x, x)`, `flip(x) = ¬x` on the two-element state set.
pub fn bit_store_comodel() -> ComodelCandidate {
    ComodelCandidate::new(2)
        .with_op("deref", &[Elem::Unit], |_, s| (Elem::bit(s == 1), s))
        .with_op("flip", &[Elem::Unit], |_, s| (Elem::Unit, 1 - s))
}

/// The six single-point mutants of the bit-store comodel: at each state,
/// corrupt the bit or the new state of `read`, or the new state of `flip`.
pub fn bit_store_mutants() -> Vec<(String, ComodelCandidate)> {
    let base = bit_store_comodel();
    let mut out = Vec::new();
    for s in 0..2u32 {
        let bit = s == 1;
        out.push((format!("read bit at {s}"), base.mutate("deref", &Elem::Unit, s, (Elem::bit(!bit), s))));
        out.push((format!("read state at {s}"), base.mutate("deref", &Elem::Unit, s, (Elem::bit(bit), 1 - s))));
        out.push((format!("flip state at {s}"), base.mutate("flip", &Elem::Unit, s, (Elem::Unit, s))));
    }
    out
}

/// `S = Val` with `read(x) = (x, x)` and `write(v, s) = v`.
pub fn global_store_comodel(vals: u32) -> ComodelCandidate {
    let vs: Vec<Elem> = (0..vals).map(|i| Elem::Base(name("val"), i)).collect();
    ComodelCandidate::new(vals)
        .with_base("val", vals)
        .with_op("read", &[Elem::Unit], |_, s| (Elem::Base(name("val"), s), s))
        .with_op("write", &vs, |v, _| (Elem::Unit, v.as_state().unwrap()))
}

/// The mutant `write(v, s) = s`.
pub fn global_store_write_mutant(vals: u32) -> ComodelCandidate {
    let vs: Vec<Elem> = (0..vals).map(|i| Elem::Base(name("val"), i)).collect();
    global_store_comodel(vals).with_op("write", &vs, |_, s| (Elem::Unit, s))
}

/// Binary strings of length at most `bound`, indexed so that the empty
/// string is 0 and `w·c` is `2·index(w) + 1 + c`. Printing appends; at the
/// bound the oldest symbol is dropped.
pub fn printing_comodel(bound: u32) -> ComodelCandidate {
    let words = printing_words(bound);
    let index: BTreeMap<Vec<u8>, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    let append = |c: u8| {
        let words = words.clone();
        let index = index.clone();
        move |_: &Elem, s: u32| {
            let mut w = words[s as usize].clone();
            w.push(c);
            if w.len() > bound as usize {
                w.remove(0);
            }
            (Elem::Unit, index[&w])
        }
    };
    let n = words.len() as u32;
    ComodelCandidate::new(n).with_op("print0", &[Elem::Unit], append(0)).with_op("print1", &[Elem::Unit], append(1))
}

/// The words indexing the states of [`printing_comodel`].
pub fn printing_words(bound: u32) -> Vec<Vec<u8>> {
    let mut words = vec![Vec::new()];
    let mut i = 0;
    while i < words.len() {
        if words[i].len() < bound as usize {
            for c in [0u8, 1] {
                let mut w = words[i].clone();
                w.push(c);
                words.push(w);
            }
        }
        i += 1;
    }
    words
}

pub const PRINTING_BOUND: u32 = 8;

/// A builtin comodel by theory name.
pub fn builtin_comodel(spec: &str) -> R<ComodelCandidate> {
    let (n, k) = split_builtin(spec)?;
    match (n, k) {
        ("bit-store", None) => Ok(bit_store_comodel()),
        ("global-store", _) => Ok(global_store_comodel(k.unwrap_or(2))),
        ("printing", None) => Ok(printing_comodel(k.unwrap_or(PRINTING_BOUND))),
        ("printing", Some(b)) => Ok(printing_comodel(b)),
        _ => Err(EffectError::UnknownTheory(spec.to_string())),
    }
}

// ---------------------------------------------------------------- law checking

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationCheck {
    pub name: String,
    pub verdict: ModelVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LawReport {
    pub checks: Vec<EquationCheck>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !matches!(c.verdict, ModelVerdict::Unequal(_)))
    }
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| matches!(c.verdict, ModelVerdict::Unequal(_))).map(|c| c.name.as_str()).collect()
    }
}

impl fmt::Display for LawReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match &c.verdict {
                ModelVerdict::Unequal(w) => writeln!(f, "FAIL {}: {w}", c.name)?,
                v => writeln!(f, "pass {} ({v})", c.name)?,
            }
        }
        write!(f, "{}", if self.passed() { "comodel: pass" } else { "comodel: FAIL" })
    }
}

/// Check that a candidate is a comodel: each equation's state-passing
/// translation holds in the store reading, exhaustively over parameters
/// and states.
pub fn check_comodel(theory: &EffectTheory, cand: &ComodelCandidate) -> R<LawReport> {
    cand.check_arities(&theory.sig)?;
    let m = cand.model().with_reading(Reading::Store);
    let env = TranslationEnv::default();
    let mut checks = Vec::new();
    for eq in &theory.equations {
        let s = name("s");
        let ctx = sps_ctx(&env, &eq.ctx).linear_name(s.clone(), crate::syntax::CType::Const(env.state.clone()));
        let l = sps_producer(&env, &eq.lhs, &s);
        let r = sps_producer(&env, &eq.rhs, &s);
        let verdict = morphisms_equal_lin(&m, &theory.sig, &ctx, &l, &r, LinMode::Computation, LinFamily::Ecbv)?;
        checks.push(EquationCheck { name: eq.name.clone(), verdict });
    }
    Ok(LawReport { checks })
}

/// Check the equations as producer equations in a Kleisli model, with the
/// generic effects given by the model.
pub fn check_model(theory: &EffectTheory, m: &ConcreteModel) -> R<LawReport> {
    let mut checks = Vec::new();
    for eq in &theory.equations {
        let verdict = morphisms_equal_fg(m, &theory.sig, &eq.ctx, &eq.lhs, &eq.rhs, FgMode::Producer)?;
        checks.push(EquationCheck { name: eq.name.clone(), verdict });
    }
    Ok(LawReport { checks })
}

/// Compare the comodel check with the Kleisli check under the generic
/// effects obtained from the same tables. Returns both reports.
pub fn comodel_kleisli_agreement(theory: &EffectTheory, cand: &ComodelCandidate) -> R<(LawReport, LawReport)> {
    let co = check_comodel(theory, cand)?;
    let mut m = cand.model().with_reading(Reading::Kleisli);
    for e in theory.sig.effects.keys() {
        let g = sacc_to_geff(&cand.state_access(&theory.sig, e)?)?;
        m.effects.insert(e.clone(), g.op());
    }
    let kl = check_model(theory, &m)?;
    Ok((co, kl))
}

/// Every candidate for a signature over `states` states.
pub fn enumerate_candidates(sig: &Signature, states: u32, bases: &BTreeMap<Name, u32>) -> R<Vec<ComodelCandidate>> {
    let mut out = vec![ComodelCandidate { states, bases: bases.clone(), ops: BTreeMap::new() }];
    for (e, ar) in &sig.effects {
        let accesses = enumerate_state_accesses(ar, states, bases)?;
        let mut next = Vec::new();
        for c in &out {
            for a in &accesses {
                let mut c2 = c.clone();
                c2.ops.insert(e.clone(), a.graph.clone());
                next.push(c2);
            }
        }
        out = next;
    }
    Ok(out)
}

// ---------------------------------------------------------------- the correspondence

/// A state access operation `B ⊗ S → (A₁ + … + Aₙ) ⊗ S` by its graph.
#[derive(Clone, Debug, PartialEq)]
pub struct StateAccess {
    pub arity: EffectArity,
    pub states: u32,
    pub graph: Vec<(Elem, u32, Elem, u32)>,
}

/// A generic effect `B → T(A₁ + … + Aₙ)` by its graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericEffect {
    pub arity: EffectArity,
    pub states: u32,
    pub graph: Vec<(Elem, TVal)>,
}

impl GenericEffect {
    /// The generic effect as a model operation.
    pub fn op(&self) -> OpFn {
        let g = Arc::new(self.graph.clone());
        let states = self.states;
        Arc::new(move |p: &Elem, w: &World| {
            let t = g
                .iter()
                .find(|x| x.0 == *p)
                .map(|x| &x.1)
                .ok_or_else(|| ModelError::Unsupported(format!("no entry at {p}")))?;
            ConcreteModel::store(states).run(t, w.clone())
        })
    }
}

fn bases_model(states: u32, bases: &BTreeMap<Name, u32>) -> ConcreteModel {
    let mut m = ConcreteModel::store(states);
    m.bases = bases.clone();
    m
}

/// Membership of an element in a first-order type.
pub fn elem_has_type(e: &Elem, t: &FgType, bases: &BTreeMap<Name, u32>) -> bool {
    match (e, t) {
        (Elem::Unit, FgType::Unit) => true,
        (Elem::Pair(a, b), FgType::Prod(s, t)) => elem_has_type(a, s, bases) && elem_has_type(b, t, bases),
        (Elem::Inl(a), FgType::Sum(s, _)) => elem_has_type(a, s, bases),
        (Elem::Inr(a), FgType::Sum(_, t)) => elem_has_type(a, t, bases),
        (Elem::Base(n, i), FgType::Base(m)) => n == m && *i < bases.get(n).copied().unwrap_or(2),
        _ => false,
    }
}

fn distinct_params(graph: &[(Elem, u32, Elem, u32)]) -> Vec<Elem> {
    let mut ps: Vec<Elem> = Vec::new();
    for (p, ..) in graph {
        if !ps.contains(p) {
            ps.push(p.clone());
        }
    }
    ps
}

fn lookup_access(f: &StateAccess, p: &Elem, s: u32) -> R<(Elem, u32)> {
    f.graph
        .iter()
        .find(|x| x.0 == *p && x.1 == s)
        .map(|x| (x.2.clone(), x.3))
        .ok_or_else(|| EffectError::Arity(format!("no entry at ({p}, {s})")))
}

/// Curry a state access operation into a generic effect.
pub fn sacc_to_geff(f: &StateAccess) -> R<GenericEffect> {
    let mut graph = Vec::new();
    for p in distinct_params(&f.graph) {
        let tab = (0..f.states).map(|s| lookup_access(f, &p, s)).collect::<R<Vec<_>>>()?;
        graph.push((p, TVal::Store(tab)));
    }
    if graph.len() * f.states as usize != f.graph.len() {
        return arity_err("state access graph is not a function");
    }
    Ok(GenericEffect { arity: f.arity.clone(), states: f.states, graph })
}

/// Uncurry a generic effect into a state access operation, checking that
/// it has the declared arity.
pub fn geff_to_sacc(g: &GenericEffect, bases: &BTreeMap<Name, u32>) -> R<StateAccess> {
    let (pt, rt) = (g.arity.param_type(), g.arity.result_type());
    let mut graph = Vec::new();
    for (p, t) in &g.graph {
        if !elem_has_type(p, &pt, bases) {
            return arity_err(format!("parameter {p} is not of type {pt}"));
        }
        let TVal::Store(tab) = t else { return arity_err("not a store computation") };
        if tab.len() != g.states as usize {
            return arity_err(format!("computation over {} states, expected {}", tab.len(), g.states));
        }
        for (s, (a, s2)) in tab.iter().enumerate() {
            if !elem_has_type(a, &rt, bases) {
                return arity_err(format!("result {a} is not of type {rt}"));
            }
            if *s2 >= g.states {
                return arity_err(format!("state {s2} out of range"));
            }
            graph.push((p.clone(), s as u32, a.clone(), *s2));
        }
    }
    Ok(StateAccess { arity: g.arity.clone(), states: g.states, graph })
}

/// Every state access operation of an arity over `states` states.
pub fn enumerate_state_accesses(ar: &EffectArity, states: u32, bases: &BTreeMap<Name, u32>) -> R<Vec<StateAccess>> {
    let m = bases_model(states, bases);
    let sig = Signature::empty();
    let params = enumerate_fg(&m, &sig, &ar.param_type())?.elems;
    let results = enumerate_fg(&m, &sig, &ar.result_type())?.elems;
    let dom: Vec<Elem> =
        params.iter().flat_map(|p| (0..states).map(move |s| Elem::pair(p.clone(), Elem::state(s)))).collect();
    let cod: Vec<(Elem, u32)> = results.iter().flat_map(|a| (0..states).map(move |s| (a.clone(), s))).collect();
    let (gs, sampled) = graphs(&dom, &cod, 1 << 20);
    if sampled {
        return Err(ModelError::NotEnumerable(format!("too many state access operations for {ar:?}")).into());
    }
    Ok(gs
        .into_iter()
        .map(|g| StateAccess {
            arity: ar.clone(),
            states,
            graph: g
                .into_iter()
                .map(|(d, (a, s2))| {
                    let Elem::Pair(p, s) = d else { unreachable!() };
                    (*p, s.as_state().unwrap(), a, s2)
                })
                .collect(),
        })
        .collect())
}

/// Every generic effect of an arity over `states` states, enumerated as
/// functions `B → T(A₁ + … + Aₙ)` independently of the state accesses.
pub fn enumerate_generic_effects(
    ar: &EffectArity,
    states: u32,
    bases: &BTreeMap<Name, u32>,
) -> R<Vec<GenericEffect>> {
    let m = bases_model(states, bases);
    let sig = Signature::empty();
    let params = enumerate_fg(&m, &sig, &ar.param_type())?.elems;
    let results = enumerate_fg(&m, &sig, &ar.result_type())?.elems;
    let cells: Vec<Elem> = results.iter().flat_map(|a| (0..states).map(move |s| Elem::pair(a.clone(), Elem::state(s)))).collect();
    let (tables, sampled) = product(&vec![cells; states as usize], 1 << 20);
    if sampled {
        return Err(ModelError::NotEnumerable(format!("too many computations for {ar:?}")).into());
    }
    let tvals: Vec<TVal> = tables
        .into_iter()
        .map(|row| {
            TVal::Store(
                row.into_iter()
                    .map(|c| {
                        let Elem::Pair(a, s) = c else { unreachable!("cells are pairs") };
                        (*a, s.as_state().unwrap())
                    })
                    .collect(),
            )
        })
        .collect();
    let (gs, sampled) = graphs(&params, &tvals, 1 << 20);
    if sampled {
        return Err(ModelError::NotEnumerable(format!("too many generic effects for {ar:?}")).into());
    }
    Ok(gs.into_iter().map(|graph| GenericEffect { arity: ar.clone(), states, graph }).collect())
}

/// Outcome of [`correspondence_sweep`].
#[derive(Clone, Debug, Default)]
pub struct CorrespondenceReport {
    pub states: u32,
    /// Per arity: the arity, the number of state accesses and of generic effects.
    pub rows: Vec<(EffectArity, usize, usize)>,
    pub failures: Vec<String>,
}

impl CorrespondenceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for CorrespondenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (ar, na, ng) in &self.rows {
            let ps: Vec<String> = ar.params.iter().map(|t| t.to_string()).collect();
            writeln!(f, "({} ; {}) |S|={}: {na} state accesses, {ng} generic effects", ps.join(" "), ar.result_type(), self.states)?;
        }
        for x in &self.failures {
            writeln!(f, "FAIL {x}")?;
        }
        write!(f, "{}", if self.passed() { "correspondence: pass" } else { "correspondence: FAIL" })
    }
}

/// Arities `(β⃗ ; α⃗₁ + … + α⃗ₙ)` with `|β⃗| ≤ max`, `n ≤ max_alts` and
/// `|α⃗ᵢ| ≤ max`, built from `unit` and base types `b<k>` of size `k`.
pub fn small_arities(max: u32, max_alts: usize) -> (Vec<EffectArity>, BTreeMap<Name, u32>) {
    let mut bases = BTreeMap::new();
    let mut shapes: Vec<Vec<FgType>> = vec![Vec::new()];
    for k in 2..=max {
        let b = format!("b{k}");
        bases.insert(name(&b), k);
        shapes.push(vec![FgType::base(&b)]);
    }
    let mut alts: Vec<Vec<Vec<FgType>>> = vec![Vec::new()];
    let mut out = Vec::new();
    for n in 0..=max_alts {
        for params in &shapes {
            for a in &alts {
                out.push(EffectArity::new(params.clone(), a.clone()));
            }
        }
        if n < max_alts {
            alts = alts
                .iter()
                .flat_map(|pre| shapes.iter().map(move |sh| [pre.clone(), vec![sh.clone()]].concat()))
                .collect();
        }
    }
    (out, bases)
}

/// Check the three-way correspondence exhaustively for every small arity:
/// `geff_to_sacc ∘ sacc_to_geff = id` on all state accesses,
/// `sacc_to_geff ∘ geff_to_sacc = id` on all generic effects, and the
/// state access is recovered from its induced algebraic operation.
pub fn correspondence_sweep(states: u32, max: u32, max_alts: usize) -> R<CorrespondenceReport> {
    let (arities, bases) = small_arities(max, max_alts);
    let mut rep = CorrespondenceReport { states, ..Default::default() };
    for ar in arities {
        let accesses = enumerate_state_accesses(&ar, states, &bases)?;
        let geffs = enumerate_generic_effects(&ar, states, &bases)?;
        for f in &accesses {
            if geff_to_sacc(&sacc_to_geff(f)?, &bases)? != *f {
                rep.failures.push(format!("sacc round trip at {ar:?}: {:?}", f.graph));
            }
            if sacc_from_algop(f, &bases)? != *f {
                rep.failures.push(format!("algebraic operation round trip at {ar:?}: {:?}", f.graph));
            }
        }
        for g in &geffs {
            if sacc_to_geff(&geff_to_sacc(g, &bases)?)? != *g {
                rep.failures.push(format!("geff round trip at {ar:?}"));
            }
        }
        if accesses.len() != geffs.len() {
            rep.failures.push(format!("{} state accesses but {} generic effects at {ar:?}", accesses.len(), geffs.len()));
        }
        rep.rows.push((ar, accesses.len(), geffs.len()));
    }
    Ok(rep)
}

/// Split an element of `A₁ + … + Aₙ` (right-nested) into its summand.
fn split_alt(e: &Elem, n: usize) -> R<(usize, Elem)> {
    if n == 1 {
        return Ok((0, e.clone()));
    }
    match e {
        Elem::Inl(a) => Ok((0, (**a).clone())),
        Elem::Inr(a) => {
            let (i, x) = split_alt(a, n - 1)?;
            Ok((i + 1, x))
        }
        _ => arity_err(format!("{e} is not in a {n}-fold sum")),
    }
}

/// An element of `U X = C(S, X)` for a finite `X = {0..k}`: a table over states.
pub type UElem = Vec<u32>;

/// The algebraic operation induced by a state access operation at a
/// finite object `X`: given `kᵢ : Aᵢ → U X` returns `B → U X`, with
/// `op(k)(b)(s) = kᵢ(a)(s')` where `f(b, s) = (inᵢ a, s')`.
pub fn algop_from_sacc(f: &StateAccess, x: u32, args: &[Vec<(Elem, UElem)>]) -> R<Vec<(Elem, UElem)>> {
    let n = f.arity.alts.len();
    if args.len() != n {
        return arity_err(format!("{} argument families for {n} alternatives", args.len()));
    }
    let mut out = Vec::new();
    for p in distinct_params(&f.graph) {
        let mut u = Vec::with_capacity(f.states as usize);
        for s in 0..f.states {
            let (r, s2) = lookup_access(f, &p, s)?;
            let (i, a) = split_alt(&r, n)?;
            let k = args[i]
                .iter()
                .find(|(d, _)| *d == a)
                .map(|(_, k)| k)
                .ok_or_else(|| EffectError::Arity(format!("argument {i} undefined at {a}")))?;
            let v = *k.get(s2 as usize).ok_or_else(|| EffectError::Arity("argument over too few states".into()))?;
            if v >= x {
                return arity_err(format!("value {v} outside X of size {x}"));
            }
            u.push(v);
        }
        out.push((p, u));
    }
    Ok(out)
}

/// All tables `{0..n} → {0..k}`.
pub fn all_tables(n: u32, k: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out.into_iter().flat_map(|t| (0..k).map(move |v| [t.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Every argument family `(kᵢ : Aᵢ → U X)ᵢ`.
pub fn algop_arguments(f: &StateAccess, x: u32, bases: &BTreeMap<Name, u32>) -> R<Vec<Vec<Vec<(Elem, UElem)>>>> {
    let m = bases_model(f.states, bases);
    let sig = Signature::empty();
    let ux = all_tables(f.states, x);
    let mut out: Vec<Vec<Vec<(Elem, UElem)>>> = vec![Vec::new()];
    for alt in &f.arity.alts {
        let dom = enumerate_fg(&m, &sig, &tuple_type(alt))?.elems;
        let (ks, sampled) = graphs(&dom, &ux, 1 << 16);
        if sampled {
            return Err(ModelError::NotEnumerable("too many argument families".into()).into());
        }
        out = out
            .into_iter()
            .flat_map(|pre| {
                ks.iter().map(move |k| {
                    let mut p = pre.clone();
                    p.push(k.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out)
}

/// Naturality of the induced operation along every map `g : X → Y`:
/// `op_Y(g ∘ k) = g ∘ op_X(k)` for every argument family `k`.
pub fn algop_natural(f: &StateAccess, x: u32, y: u32, bases: &BTreeMap<Name, u32>) -> R<bool> {
    let families = algop_arguments(f, x, bases)?;
    for g in all_tables(x, y) {
        let push = |u: &UElem| -> UElem { u.iter().map(|v| g[*v as usize]).collect() };
        for k in &families {
            let lhs_args: Vec<Vec<(Elem, UElem)>> =
                k.iter().map(|ki| ki.iter().map(|(a, u)| (a.clone(), push(u))).collect()).collect();
            let lhs = algop_from_sacc(f, y, &lhs_args)?;
            let rhs: Vec<(Elem, UElem)> =
                algop_from_sacc(f, x, k)?.into_iter().map(|(b, u)| (b, push(&u))).collect();
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Recover the state access operation from the induced operation at
/// `X = A ⊗ S`, applied to the family `kᵢ(a)(s) = (inᵢ a, s)`.
pub fn sacc_from_algop(f: &StateAccess, bases: &BTreeMap<Name, u32>) -> R<StateAccess> {
    let m = bases_model(f.states, bases);
    let sig = Signature::empty();
    let results = enumerate_fg(&m, &sig, &f.arity.result_type())?.elems;
    let cells: Vec<(Elem, u32)> =
        results.iter().flat_map(|a| (0..f.states).map(move |s| (a.clone(), s))).collect();
    let x = cells.len() as u32;
    let n = f.arity.alts.len();
    let mut args: Vec<Vec<(Elem, UElem)>> = vec![Vec::new(); n];
    for r in &results {
        let (i, a) = split_alt(r, n)?;
        let u: UElem = (0..f.states)
            .map(|s| cells.iter().position(|c| c.0 == *r && c.1 == s).unwrap() as u32)
            .collect();
        args[i].push((a, u));
    }
    let op = algop_from_sacc(f, x, &args)?;
    let mut graph = Vec::new();
    for (p, u) in op {
        for (s, v) in u.iter().enumerate() {
            let (a, s2) = cells[*v as usize].clone();
            graph.push((p.clone(), s as u32, a, s2));
        }
    }
    Ok(StateAccess { arity: f.arity.clone(), states: f.states, graph })
}

// ---------------------------------------------------------------- derived write

const WRITE_TERM: &str = "
(llam (x (tensor (sum unit unit) S))
  (lettens (b s0 x)
    (lettens (c t0 (lapp (sacc deref) (tens star s0)))
      (lapp (case (case b (u c) (v (not c)))
                  (p (llam (r S) r))
                  (q (llam (r S) (lettens (w r2 (lapp (sacc flip) (tens star r))) r2))))
            t0))))";

const WRITE0: &str = "(case-p (geff deref) (a (return star)) (b (geff flip)))";
const WRITE1: &str = "(case-p (geff deref) (a (geff flip)) (b (return star)))";

/// The combined ECBV `write : (2 ⊗ S) ⊸ S`.
pub fn write_term() -> R<Term> {
    let sig = Signature::bit_store();
    match parse_program(&SourceFile::new(WRITE_TERM, "write"), Family::Ecbv, Some(&sig))? {
        Program::Lin { term, .. } => Ok(term),
        Program::Fg { .. } => unreachable!("parsed as ECBV"),
    }
}

/// The derived producers `write₀` and `write₁`.
pub fn derived_writes() -> R<[FgTerm; 2]> {
    let sig = Signature::bit_store();
    let p = |src: &str| -> R<FgTerm> {
        match parse_program(&SourceFile::new(src, "write"), Family::Fg, Some(&sig))? {
            Program::Fg { term, .. } => Ok(term),
            Program::Lin { .. } => unreachable!("parsed as FGCBV"),
        }
    };
    Ok([p(WRITE0)?, p(WRITE1)?])
}

/// Per bit and state: the final state of `write₀`/`write₁` (state-passing)
/// and of the combined `write`, in a bit-store candidate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteRow {
    pub bit: bool,
    pub state: u32,
    pub derived: u32,
    pub combined: u32,
}

pub fn derived_write_table(cand: &ComodelCandidate) -> R<Vec<WriteRow>> {
    let sig = Signature::bit_store();
    cand.check_arities(&sig)?;
    let m = cand.model().with_reading(Reading::Store);
    let env = TranslationEnv::default();
    let w = write_term()?;
    let [w0, w1] = derived_writes()?;
    let z = name("z");
    let s = name("s");
    let applied = Term::LApp(Box::new(w), Box::new(Term::LVar(z.clone())));
    let mut rows = Vec::new();
    for bit in [false, true] {
        let derived = sps_producer(&env, if bit { &w1 } else { &w0 }, &s);
        for st in 0..cand.states {
            let d = eval_ecbv(&m, &sig, &[], Some((s.clone(), Elem::state(st))), &derived, LinMode::Computation)?;
            let c = eval_ecbv(
                &m,
                &sig,
                &[],
                Some((z.clone(), Elem::pair(Elem::bit(bit), Elem::state(st)))),
                &applied,
                LinMode::Computation,
            )?;
            let derived_state = match d {
                Outcome::Elem(Elem::Pair(_, s2)) => s2.as_state(),
                _ => None,
            };
            let combined_state = match c {
                Outcome::Elem(e) => e.as_state(),
                _ => None,
            };
            match (derived_state, combined_state) {
                (Some(d), Some(c)) => rows.push(WriteRow { bit, state: st, derived: d, combined: c }),
                _ => return Err(ModelError::Unsupported("write did not return a state".into()).into()),
            }
        }
    }
    Ok(rows)
}

/// The sum-of-alternatives type of an effect, exposed for reports.
pub fn effect_result_type(ar: &EffectArity) -> FgType {
    sum_type(&ar.alts.iter().map(|a| tuple_type(a)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtin_theories_load() {
        for n in BUILTIN_THEORIES {
            let t = builtin_theory(n).unwrap();
            assert_eq!(t.name, *n);
        }
        assert_eq!(builtin_theory("bit-store").unwrap().equations.len(), 4);
        assert!(builtin_theory("global-store:0").is_err());
        assert!(builtin_theory("heap").is_err());
    }

    #[test]
    fn theory_files_reject_duplicates_and_junk() {
        let dup = "(theory t (effect e () (())) (effect e () (())))";
        assert!(matches!(load_theory(dup), Err(EffectError::Duplicate(_))));
        let labels = "(theory t (effect e () (())) (eq a () (geff e) (geff e)) (eq a () (geff e) (geff e)))";
        assert!(matches!(load_theory(labels), Err(EffectError::Duplicate(_))));
        assert!(load_theory("(theory t (colour red))").is_err());
        assert!(load_theory("(model dyadic)").is_err());
        let unlabelled = load_theory("(theory t (effect e () (())) (eq () (geff e) (geff e)))").unwrap();
        assert_eq!(unlabelled.equations[0].name, "eq1");
    }

    #[test]
    fn bit_store_comodel_satisfies_its_theory() {
        let th = builtin_theory("bit-store").unwrap();
        assert!(check_comodel(&th, &bit_store_comodel()).unwrap().passed());
        for (label, m) in bit_store_mutants() {
            assert!(!check_comodel(&th, &m).unwrap().passed(), "{label}");
        }
    }

    #[test]
    fn write_mutant_breaks_gs2() {
        let th = builtin_theory("global-store").unwrap();
        let r = check_comodel(&th, &global_store_write_mutant(2)).unwrap();
        assert!(r.failing().contains(&"GS2"));
    }

    #[test]
    fn comodel_files_round_trip() {
        let c = bit_store_comodel();
        let back = load_comodel(&print_comodel(&c)).unwrap();
        assert_eq!(back.states, c.states);
        let th = builtin_theory("bit-store").unwrap();
        assert!(check_comodel(&th, &back).unwrap().passed());
        assert!(load_comodel("(comodel (base val 2))").is_err());
        assert!(load_comodel("(comodel (states 0))").is_err());
    }

    #[test]
    fn elements_parse() {
        assert_eq!(parse_elem("star").unwrap(), Elem::Unit);
        assert_eq!(parse_elem("(pair (inl star) (inr star))").unwrap(), Elem::pair(Elem::inl(Elem::Unit), Elem::inr(Elem::Unit)));
        assert!(parse_elem("star star").is_err());
    }

    #[test]
    fn derived_writes_agree_with_the_combined_write() {
        for row in derived_write_table(&bit_store_comodel()).unwrap() {
            assert_eq!(row.derived, row.combined, "{row:?}");
            assert_eq!(row.derived, row.bit as u32);
        }
    }

    #[test]
    fn small_sweep_passes() {
        let rep = correspondence_sweep(2, 2, 1).unwrap();
        assert!(rep.passed(), "{rep}");
        assert!(rep.to_string().ends_with("correspondence: pass"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn currying_round_trips(tab in proptest::collection::vec((any::<bool>(), 0u32..3), 3)) {
            let ar = EffectArity::new(vec![], vec![vec![], vec![]]);
            let graph = tab
                .iter()
                .enumerate()
                .map(|(s, (b, s2))| (Elem::Unit, s as u32, Elem::bit(*b), *s2))
                .collect();
            let f = StateAccess { arity: ar, states: 3, graph };
            let bases = BTreeMap::new();
            let g = sacc_to_geff(&f).unwrap();
            prop_assert_eq!(&geff_to_sacc(&g, &bases).unwrap(), &f);
            prop_assert_eq!(&sacc_from_algop(&f, &bases).unwrap(), &f);
        }
    }
}
