//! Abstract syntax for the four families: fine-grain call-by-value (FGCBV)
//! types and terms, and the shared tree used for both enriched call-by-value
//! (ECBV) terms and their CPS variant.
//!
//! Names are shared strings. Binders produced by the parser or by the
//! rewriting engine carry a `#n` suffix drawn from a global supply, which the
//! printer strips again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub type Name = Arc<str>;

static SUPPLY: AtomicU64 = AtomicU64::new(1);

/// The part of a name before any freshness suffix.
pub fn base_name(n: &str) -> &str {
    match n.find('#') {
        Some(i) => &n[..i],
        None => n,
    }
}

/// A name that has never been returned before, sharing the base of `hint`.
pub fn fresh(hint: &str) -> Name {
    let k = SUPPLY.fetch_add(1, Ordering::Relaxed);
    Arc::from(format!("{}#{}", base_name(hint), k))
}

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Variable kinds are kept apart in the AST.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Value,
    Linear,
}

// ---------------------------------------------------------------- FGCBV

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FgType {
    Base(Name),
    Unit,
    Prod(Box<FgType>, Box<FgType>),
    Parr(Box<FgType>, Box<FgType>),
    Empty,
    Sum(Box<FgType>, Box<FgType>),
}

impl FgType {
    pub fn prod(a: FgType, b: FgType) -> FgType {
        FgType::Prod(Box::new(a), Box::new(b))
    }
    pub fn parr(a: FgType, b: FgType) -> FgType {
        FgType::Parr(Box::new(a), Box::new(b))
    }
    pub fn sum(a: FgType, b: FgType) -> FgType {
        FgType::Sum(Box::new(a), Box::new(b))
    }
    pub fn base(n: &str) -> FgType {
        FgType::Base(name(n))
    }
    /// `1 + 1`, the type of bits.
    pub fn bool() -> FgType {
        FgType::sum(FgType::Unit, FgType::Unit)
    }
    pub fn size(&self) -> usize {
        match self {
            FgType::Base(_) | FgType::Unit | FgType::Empty => 1,
            FgType::Prod(a, b) | FgType::Parr(a, b) | FgType::Sum(a, b) => 1 + a.size() + b.size(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FgTerm {
    // values
    Var(Name),
    Star,
    Pair(Box<FgTerm>, Box<FgTerm>),
    Fst(Box<FgTerm>),
    Snd(Box<FgTerm>),
    Lam(Name, FgType, Box<FgTerm>),
    Const(Name, Vec<FgTerm>),
    /// Injections carry the full sum type.
    Inl(FgType, Box<FgTerm>),
    Inr(FgType, Box<FgTerm>),
    Case(Box<FgTerm>, Name, Box<FgTerm>, Name, Box<FgTerm>),
    /// `absurd` carries its result type.
    Absurd(FgType, Box<FgTerm>),
    // producers
    Return(Box<FgTerm>),
    Let(Name, Box<FgTerm>, Box<FgTerm>),
    App(Box<FgTerm>, Box<FgTerm>),
    Geff(Name, Vec<FgTerm>),
}

impl FgTerm {
    pub fn var(n: &str) -> FgTerm {
        FgTerm::Var(name(n))
    }
    pub fn pair(a: FgTerm, b: FgTerm) -> FgTerm {
        FgTerm::Pair(Box::new(a), Box::new(b))
    }
    pub fn fst(a: FgTerm) -> FgTerm {
        FgTerm::Fst(Box::new(a))
    }
    pub fn snd(a: FgTerm) -> FgTerm {
        FgTerm::Snd(Box::new(a))
    }
    pub fn lam(x: Name, ty: FgType, body: FgTerm) -> FgTerm {
        FgTerm::Lam(x, ty, Box::new(body))
    }
    pub fn ret(v: FgTerm) -> FgTerm {
        FgTerm::Return(Box::new(v))
    }
    pub fn let_(x: Name, m: FgTerm, n: FgTerm) -> FgTerm {
        FgTerm::Let(x, Box::new(m), Box::new(n))
    }
    pub fn app(v: FgTerm, w: FgTerm) -> FgTerm {
        FgTerm::App(Box::new(v), Box::new(w))
    }
    pub fn inl(ty: FgType, v: FgTerm) -> FgTerm {
        FgTerm::Inl(ty, Box::new(v))
    }
    pub fn inr(ty: FgType, v: FgTerm) -> FgTerm {
        FgTerm::Inr(ty, Box::new(v))
    }
    pub fn case(v: FgTerm, x1: Name, w1: FgTerm, x2: Name, w2: FgTerm) -> FgTerm {
        FgTerm::Case(Box::new(v), x1, Box::new(w1), x2, Box::new(w2))
    }
    pub fn absurd(ty: FgType, v: FgTerm) -> FgTerm {
        FgTerm::Absurd(ty, Box::new(v))
    }
    /// The bit `0`, i.e. `inl star : 1 + 1`.
    pub fn bit(b: bool) -> FgTerm {
        if b {
            FgTerm::inr(FgType::bool(), FgTerm::Star)
        } else {
            FgTerm::inl(FgType::bool(), FgTerm::Star)
        }
    }
    /// Negation of a bit, `case v (a. inr star) (b. inl star)`.
    pub fn not(v: FgTerm) -> FgTerm {
        FgTerm::case(v, fresh("a"), FgTerm::bit(true), fresh("b"), FgTerm::bit(false))
    }
    /// `M; N`, sequencing that discards the result of `M`.
    pub fn seq(m: FgTerm, n: FgTerm) -> FgTerm {
        FgTerm::let_(fresh("u"), m, n)
    }
    /// Producer-level case: `let z = M in (case z (x1. λw:1.N1) (x2. λw:1.N2)) ⋆`.
    pub fn case_p(m: FgTerm, x1: Name, n1: FgTerm, x2: Name, n2: FgTerm) -> FgTerm {
        let z = fresh("z");
        let w1 = fresh("w");
        let w2 = fresh("w");
        FgTerm::let_(
            z.clone(),
            m,
            FgTerm::app(
                FgTerm::case(
                    FgTerm::Var(z),
                    x1,
                    FgTerm::lam(w1, FgType::Unit, n1),
                    x2,
                    FgTerm::lam(w2, FgType::Unit, n2),
                ),
                FgTerm::Star,
            ),
        )
    }
    /// Producer-level injection: `let x = M in return (in_i x)`.
    pub fn in_p(right: bool, ty: FgType, m: FgTerm) -> FgTerm {
        let x = fresh("x");
        let v = if right {
            FgTerm::inr(ty, FgTerm::Var(x.clone()))
        } else {
            FgTerm::inl(ty, FgTerm::Var(x.clone()))
        };
        FgTerm::let_(x, m, FgTerm::ret(v))
    }
    /// Producer-level empty elimination: `let x = M in return (absurd x)`.
    pub fn image_p(ty: FgType, m: FgTerm) -> FgTerm {
        let x = fresh("x");
        FgTerm::let_(x.clone(), m, FgTerm::ret(FgTerm::absurd(ty, FgTerm::Var(x))))
    }

    pub fn is_producer_form(&self) -> bool {
        matches!(
            self,
            FgTerm::Return(_) | FgTerm::Let(..) | FgTerm::App(..) | FgTerm::Geff(..)
        )
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.for_each_child(|c| n += c.size());
        n + 1
    }

    /// Height of the syntax tree; leaves have depth 0.
    pub fn depth(&self) -> usize {
        let mut d = 0;
        self.for_each_child(|c| d = d.max(c.depth() + 1));
        d
    }

    pub fn for_each_child<'a>(&'a self, mut f: impl FnMut(&'a FgTerm)) {
        use FgTerm::*;
        match self {
            Var(_) | Star => {}
            Pair(a, b) | App(a, b) | Let(_, a, b) => {
                f(a);
                f(b)
            }
            Fst(a) | Snd(a) | Lam(_, _, a) | Inl(_, a) | Inr(_, a) | Absurd(_, a) | Return(a) => f(a),
            Const(_, vs) | Geff(_, vs) => vs.iter().for_each(f),
            Case(a, _, b, _, c) => {
                f(a);
                f(b);
                f(c)
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        fg_free(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn occurs_free(&self, x: &str) -> bool {
        self.free_vars().iter().any(|n| &**n == x)
    }

    /// Capture-avoiding substitution of the value `v` for `x`.
    pub fn subst(&self, x: &Name, v: &FgTerm) -> FgTerm {
        let fv = v.free_vars();
        fg_subst(self, x, v, &fv)
    }

    /// Rename every binder to a fresh name.
    pub fn freshen(&self) -> FgTerm {
        fg_freshen(self, &mut BTreeMap::new())
    }
}

fn fg_free(t: &FgTerm, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    use FgTerm::*;
    match t {
        Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Lam(x, _, b) => {
            bound.push(x.clone());
            fg_free(b, bound, out);
            bound.pop();
        }
        Let(x, m, n) => {
            fg_free(m, bound, out);
            bound.push(x.clone());
            fg_free(n, bound, out);
            bound.pop();
        }
        Case(v, x1, w1, x2, w2) => {
            fg_free(v, bound, out);
            bound.push(x1.clone());
            fg_free(w1, bound, out);
            bound.pop();
            bound.push(x2.clone());
            fg_free(w2, bound, out);
            bound.pop();
        }
        _ => t.for_each_child(|c| fg_free(c, bound, out)),
    }
}

fn fg_binder(x: &Name, body: &FgTerm, fv: &BTreeSet<Name>) -> (Name, FgTerm) {
    if fv.contains(x) {
        let y = fresh(x);
        let body = fg_rename(body, x, &y);
        (y, body)
    } else {
        (x.clone(), body.clone())
    }
}

fn fg_rename(t: &FgTerm, from: &Name, to: &Name) -> FgTerm {
    fg_subst(t, from, &FgTerm::Var(to.clone()), &BTreeSet::from([to.clone()]))
}

fn fg_subst(t: &FgTerm, x: &Name, v: &FgTerm, fv: &BTreeSet<Name>) -> FgTerm {
    use FgTerm::*;
    let go = |a: &FgTerm| Box::new(fg_subst(a, x, v, fv));
    match t {
        Var(y) => {
            if y == x {
                v.clone()
            } else {
                t.clone()
            }
        }
        Star => Star,
        Pair(a, b) => Pair(go(a), go(b)),
        Fst(a) => Fst(go(a)),
        Snd(a) => Snd(go(a)),
        Lam(y, ty, b) => {
            if y == x {
                return t.clone();
            }
            let (y, b) = fg_binder(y, b, fv);
            Lam(y, ty.clone(), Box::new(fg_subst(&b, x, v, fv)))
        }
        Const(f, vs) => Const(f.clone(), vs.iter().map(|a| fg_subst(a, x, v, fv)).collect()),
        Geff(e, vs) => Geff(e.clone(), vs.iter().map(|a| fg_subst(a, x, v, fv)).collect()),
        Inl(ty, a) => Inl(ty.clone(), go(a)),
        Inr(ty, a) => Inr(ty.clone(), go(a)),
        Absurd(ty, a) => Absurd(ty.clone(), go(a)),
        Return(a) => Return(go(a)),
        App(a, b) => App(go(a), go(b)),
        Let(y, m, n) => {
            let m = go(m);
            if y == x {
                return Let(y.clone(), m, n.clone());
            }
            let (y, n) = fg_binder(y, n, fv);
            Let(y, m, Box::new(fg_subst(&n, x, v, fv)))
        }
        Case(s, x1, w1, x2, w2) => {
            let s = go(s);
            let (x1, w1) = if x1 == x {
                (x1.clone(), (**w1).clone())
            } else {
                let (x1, w1) = fg_binder(x1, w1, fv);
                let w1 = fg_subst(&w1, x, v, fv);
                (x1, w1)
            };
            let (x2, w2) = if x2 == x {
                (x2.clone(), (**w2).clone())
            } else {
                let (x2, w2) = fg_binder(x2, w2, fv);
                let w2 = fg_subst(&w2, x, v, fv);
                (x2, w2)
            };
            Case(s, x1, Box::new(w1), x2, Box::new(w2))
        }
    }
}

fn fg_freshen(t: &FgTerm, env: &mut BTreeMap<Name, Name>) -> FgTerm {
    use FgTerm::*;
    let under = |x: &Name, b: &FgTerm, env: &mut BTreeMap<Name, Name>| {
        let y = fresh(x);
        let old = env.insert(x.clone(), y.clone());
        let b = fg_freshen(b, env);
        match old {
            Some(o) => env.insert(x.clone(), o),
            None => env.remove(x),
        };
        (y, Box::new(b))
    };
    match t {
        Var(x) => Var(env.get(x).cloned().unwrap_or_else(|| x.clone())),
        Star => Star,
        Pair(a, b) => Pair(Box::new(fg_freshen(a, env)), Box::new(fg_freshen(b, env))),
        Fst(a) => Fst(Box::new(fg_freshen(a, env))),
        Snd(a) => Snd(Box::new(fg_freshen(a, env))),
        Lam(x, ty, b) => {
            let (y, b) = under(x, b, env);
            Lam(y, ty.clone(), b)
        }
        Const(f, vs) => Const(f.clone(), vs.iter().map(|a| fg_freshen(a, env)).collect()),
        Geff(e, vs) => Geff(e.clone(), vs.iter().map(|a| fg_freshen(a, env)).collect()),
        Inl(ty, a) => Inl(ty.clone(), Box::new(fg_freshen(a, env))),
        Inr(ty, a) => Inr(ty.clone(), Box::new(fg_freshen(a, env))),
        Absurd(ty, a) => Absurd(ty.clone(), Box::new(fg_freshen(a, env))),
        Return(a) => Return(Box::new(fg_freshen(a, env))),
        App(a, b) => App(Box::new(fg_freshen(a, env)), Box::new(fg_freshen(b, env))),
        Let(x, m, n) => {
            let m = Box::new(fg_freshen(m, env));
            let (y, n) = under(x, n, env);
            Let(y, m, n)
        }
        Case(s, x1, w1, x2, w2) => {
            let s = Box::new(fg_freshen(s, env));
            let (y1, w1) = under(x1, w1, env);
            let (y2, w2) = under(x2, w2, env);
            Case(s, y1, w1, y2, w2)
        }
    }
}

// ---------------------------------------------------------------- ECBV / CPS

/// Value types of ECBV and of its CPS variant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VType {
    Base(Name),
    Unit,
    Prod(Box<VType>, Box<VType>),
    Lolli(Box<CType>, Box<CType>),
    Empty,
    Sum(Box<VType>, Box<VType>),
}

/// Computation types. `Tensor`, `Zero` and `Plus` belong to ECBV; `Power`,
/// `One` and `With` (the additive product) belong to the CPS variant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CType {
    Const(Name),
    Tensor(Box<VType>, Box<CType>),
    Zero,
    Plus(Box<CType>, Box<CType>),
    Power(Box<VType>, Box<CType>),
    One,
    With(Box<CType>, Box<CType>),
}

impl VType {
    pub fn prod(a: VType, b: VType) -> VType {
        VType::Prod(Box::new(a), Box::new(b))
    }
    pub fn sum(a: VType, b: VType) -> VType {
        VType::Sum(Box::new(a), Box::new(b))
    }
    pub fn lolli(a: CType, b: CType) -> VType {
        VType::Lolli(Box::new(a), Box::new(b))
    }
    pub fn base(n: &str) -> VType {
        VType::Base(name(n))
    }
    pub fn bool() -> VType {
        VType::sum(VType::Unit, VType::Unit)
    }
    /// Computation constants mentioned anywhere in the type.
    pub fn comp_consts(&self, out: &mut BTreeSet<Name>) {
        match self {
            VType::Base(_) | VType::Unit | VType::Empty => {}
            VType::Prod(a, b) | VType::Sum(a, b) => {
                a.comp_consts(out);
                b.comp_consts(out)
            }
            VType::Lolli(a, b) => {
                a.comp_consts(out);
                b.comp_consts(out)
            }
        }
    }
}

impl CType {
    pub fn konst(n: &str) -> CType {
        CType::Const(name(n))
    }
    pub fn state() -> CType {
        CType::konst("S")
    }
    pub fn ret() -> CType {
        CType::konst("R")
    }
    pub fn tensor(a: VType, c: CType) -> CType {
        CType::Tensor(Box::new(a), Box::new(c))
    }
    pub fn power(a: VType, c: CType) -> CType {
        CType::Power(Box::new(a), Box::new(c))
    }
    pub fn plus(a: CType, b: CType) -> CType {
        CType::Plus(Box::new(a), Box::new(b))
    }
    pub fn with(a: CType, b: CType) -> CType {
        CType::With(Box::new(a), Box::new(b))
    }
    pub fn comp_consts(&self, out: &mut BTreeSet<Name>) {
        match self {
            CType::Const(n) => {
                out.insert(n.clone());
            }
            CType::Zero | CType::One => {}
            CType::Tensor(a, c) | CType::Power(a, c) => {
                a.comp_consts(out);
                c.comp_consts(out)
            }
            CType::Plus(a, b) | CType::With(a, b) => {
                a.comp_consts(out);
                b.comp_consts(out)
            }
        }
    }
}

/// Terms of ECBV and of its CPS variant share one tree; the type checker
/// decides which constructors a family admits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    // values
    Var(Name),
    Star,
    Pair(Box<Term>, Box<Term>),
    Fst(Box<Term>),
    Snd(Box<Term>),
    LLam(Name, CType, Box<Term>),
    Const(Name, Vec<Term>),
    Inl(VType, Box<Term>),
    Inr(VType, Box<Term>),
    Case(Box<Term>, Name, Box<Term>, Name, Box<Term>),
    Absurd(VType, Box<Term>),
    Sacc(Name),
    // computations
    LVar(Name),
    LApp(Box<Term>, Box<Term>),
    Tens(Box<Term>, Box<Term>),
    LetTens(Name, Name, Box<Term>, Box<Term>),
    OInl(CType, Box<Term>),
    OInr(CType, Box<Term>),
    OCase(Box<Term>, Name, Box<Term>, Name, Box<Term>),
    OAbsurd(CType, Box<Term>),
    PLam(Name, VType, Box<Term>),
    PApp(Box<Term>, Box<Term>),
    OPair(Box<Term>, Box<Term>),
    OFst(Box<Term>),
    OSnd(Box<Term>),
    OUnit,
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn var(n: &str) -> Term {
        Term::Var(name(n))
    }
    pub fn lvar(n: &str) -> Term {
        Term::LVar(name(n))
    }
    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }
    pub fn fst(a: Term) -> Term {
        Term::Fst(Box::new(a))
    }
    pub fn snd(a: Term) -> Term {
        Term::Snd(Box::new(a))
    }
    pub fn llam(z: Name, ty: CType, body: Term) -> Term {
        Term::LLam(z, ty, Box::new(body))
    }
    pub fn lapp(f: Term, t: Term) -> Term {
        Term::LApp(Box::new(f), Box::new(t))
    }
    pub fn tens(v: Term, t: Term) -> Term {
        Term::Tens(Box::new(v), Box::new(t))
    }
    pub fn lettens(x: Name, z: Name, t: Term, u: Term) -> Term {
        Term::LetTens(x, z, Box::new(t), Box::new(u))
    }
    pub fn inl(ty: VType, v: Term) -> Term {
        Term::Inl(ty, Box::new(v))
    }
    pub fn inr(ty: VType, v: Term) -> Term {
        Term::Inr(ty, Box::new(v))
    }
    pub fn case(v: Term, x1: Name, w1: Term, x2: Name, w2: Term) -> Term {
        Term::Case(Box::new(v), x1, Box::new(w1), x2, Box::new(w2))
    }
    pub fn absurd(ty: VType, v: Term) -> Term {
        Term::Absurd(ty, Box::new(v))
    }
    pub fn oinl(ty: CType, t: Term) -> Term {
        Term::OInl(ty, Box::new(t))
    }
    pub fn oinr(ty: CType, t: Term) -> Term {
        Term::OInr(ty, Box::new(t))
    }
    pub fn ocase(t: Term, z1: Name, u1: Term, z2: Name, u2: Term) -> Term {
        Term::OCase(Box::new(t), z1, Box::new(u1), z2, Box::new(u2))
    }
    pub fn oabsurd(ty: CType, t: Term) -> Term {
        Term::OAbsurd(ty, Box::new(t))
    }
    pub fn plam(x: Name, ty: VType, t: Term) -> Term {
        Term::PLam(x, ty, Box::new(t))
    }
    pub fn papp(t: Term, v: Term) -> Term {
        Term::PApp(Box::new(t), Box::new(v))
    }
    pub fn opair(a: Term, b: Term) -> Term {
        Term::OPair(Box::new(a), Box::new(b))
    }
    pub fn ofst(a: Term) -> Term {
        Term::OFst(Box::new(a))
    }
    pub fn osnd(a: Term) -> Term {
        Term::OSnd(Box::new(a))
    }
    pub fn bit(b: bool) -> Term {
        if b {
            Term::inr(VType::bool(), Term::Star)
        } else {
            Term::inl(VType::bool(), Term::Star)
        }
    }
    pub fn not(v: Term) -> Term {
        Term::case(v, fresh("a"), Term::bit(true), fresh("b"), Term::bit(false))
    }

    /// True for the constructors that form computation terms.
    pub fn is_computation_form(&self) -> bool {
        use Term::*;
        matches!(
            self,
            LVar(_)
                | LApp(..)
                | Tens(..)
                | LetTens(..)
                | OInl(..)
                | OInr(..)
                | OCase(..)
                | OAbsurd(..)
                | PLam(..)
                | PApp(..)
                | OPair(..)
                | OFst(_)
                | OSnd(_)
                | OUnit
        )
    }

    pub fn size(&self) -> usize {
        let mut n = 1;
        self.for_each_child(|c| n += c.size());
        n
    }

    pub fn depth(&self) -> usize {
        let mut d = 0;
        self.for_each_child(|c| d = d.max(c.depth() + 1));
        d
    }

    pub fn for_each_child<'a>(&'a self, mut f: impl FnMut(&'a Term)) {
        use Term::*;
        match self {
            Var(_) | Star | Sacc(_) | LVar(_) | OUnit => {}
            Pair(a, b) | LApp(a, b) | Tens(a, b) | LetTens(_, _, a, b) | PApp(a, b) | OPair(a, b) => {
                f(a);
                f(b)
            }
            Fst(a) | Snd(a) | LLam(_, _, a) | Inl(_, a) | Inr(_, a) | Absurd(_, a) | OInl(_, a)
            | OInr(_, a) | OAbsurd(_, a) | PLam(_, _, a) | OFst(a) | OSnd(a) => f(a),
            Const(_, vs) => vs.iter().for_each(f),
            Case(a, _, b, _, c) | OCase(a, _, b, _, c) => {
                f(a);
                f(b);
                f(c)
            }
        }
    }

    /// Free variables of the given kind.
    pub fn free_vars(&self, kind: VarKind) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        lin_free(self, kind, &mut Vec::new(), &mut out);
        out
    }

    /// Number of free occurrences of the linear variable `z`.
    pub fn linear_occurrences(&self, z: &str) -> usize {
        fn go(t: &Term, z: &str) -> usize {
            use Term::*;
            match t {
                LVar(w) => usize::from(&**w == z),
                LLam(w, _, b) if &**w == z => {
                    let _ = b;
                    0
                }
                LetTens(_, w, a, b) => go(a, z) + if &**w == z { 0 } else { go(b, z) },
                OCase(a, w1, b, w2, c) => {
                    go(a, z)
                        + if &**w1 == z { 0 } else { go(b, z) }
                        + if &**w2 == z { 0 } else { go(c, z) }
                }
                _ => {
                    let mut n = 0;
                    t.for_each_child(|c| n += go(c, z));
                    n
                }
            }
        }
        go(self, z)
    }

    /// Capture-avoiding substitution of `r` for the variable `x` of `kind`.
    pub fn subst(&self, x: &Name, kind: VarKind, r: &Term) -> Term {
        let fv = r.free_vars(VarKind::Value);
        let fl = r.free_vars(VarKind::Linear);
        lin_subst(self, x, kind, r, &fv, &fl)
    }

    /// Substitution for the linear variable; fails unless `z` occurs free.
    pub fn subst_linear(&self, z: &Name, r: &Term) -> Result<Term, SubstError> {
        if self.linear_occurrences(z) == 0 {
            return Err(SubstError::LinearNotFree(z.to_string()));
        }
        Ok(self.subst(z, VarKind::Linear, r))
    }

    pub fn freshen(&self) -> Term {
        lin_freshen(self, &mut BTreeMap::new())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubstError {
    #[error("linear variable `{0}` does not occur in the target")]
    LinearNotFree(String),
    #[error("family mismatch in structural operation")]
    FamilyMismatch,
}

fn lin_free(t: &Term, kind: VarKind, bound: &mut Vec<(Name, VarKind)>, out: &mut BTreeSet<Name>) {
    use Term::*;
    let under = |x: &Name, k: VarKind, b: &Term, bound: &mut Vec<(Name, VarKind)>, out: &mut BTreeSet<Name>| {
        bound.push((x.clone(), k));
        lin_free(b, kind, bound, out);
        bound.pop();
    };
    match t {
        Var(x) if kind == VarKind::Value => {
            if !bound.iter().any(|(y, k)| y == x && *k == VarKind::Value) {
                out.insert(x.clone());
            }
        }
        LVar(x) if kind == VarKind::Linear => {
            if !bound.iter().any(|(y, k)| y == x && *k == VarKind::Linear) {
                out.insert(x.clone());
            }
        }
        LLam(z, _, b) => under(z, VarKind::Linear, b, bound, out),
        PLam(x, _, b) => under(x, VarKind::Value, b, bound, out),
        LetTens(x, z, a, b) => {
            lin_free(a, kind, bound, out);
            bound.push((x.clone(), VarKind::Value));
            bound.push((z.clone(), VarKind::Linear));
            lin_free(b, kind, bound, out);
            bound.pop();
            bound.pop();
        }
        Case(a, x1, b, x2, c) => {
            lin_free(a, kind, bound, out);
            under(x1, VarKind::Value, b, bound, out);
            under(x2, VarKind::Value, c, bound, out);
        }
        OCase(a, z1, b, z2, c) => {
            lin_free(a, kind, bound, out);
            under(z1, VarKind::Linear, b, bound, out);
            under(z2, VarKind::Linear, c, bound, out);
        }
        _ => t.for_each_child(|c| lin_free(c, kind, bound, out)),
    }
}

struct SubstCx<'a> {
    x: &'a Name,
    kind: VarKind,
    r: &'a Term,
    fv: &'a BTreeSet<Name>,
    fl: &'a BTreeSet<Name>,
}

impl SubstCx<'_> {
    /// Enter a binder `y` of kind `k` over `body`; returns the (possibly
    /// renamed) binder and the substituted body, or `None` when the binder
    /// shadows the substituted variable.
    fn binder(&self, y: &Name, k: VarKind, body: &Term) -> (Name, Term) {
        if y == self.x && k == self.kind {
            return (y.clone(), body.clone());
        }
        let clash = match k {
            VarKind::Value => self.fv.contains(y),
            VarKind::Linear => self.fl.contains(y),
        };
        let (y, body) = if clash {
            let y2 = fresh(y);
            let renamed = match k {
                VarKind::Value => body.subst(y, k, &Term::Var(y2.clone())),
                VarKind::Linear => body.subst(y, k, &Term::LVar(y2.clone())),
            };
            (y2, renamed)
        } else {
            (y.clone(), body.clone())
        };
        (y, self.go(&body))
    }

    fn go(&self, t: &Term) -> Term {
        use Term::*;
        let b = |a: &Term| Box::new(self.go(a));
        match t {
            Var(y) => {
                if self.kind == VarKind::Value && y == self.x {
                    self.r.clone()
                } else {
                    t.clone()
                }
            }
            LVar(y) => {
                if self.kind == VarKind::Linear && y == self.x {
                    self.r.clone()
                } else {
                    t.clone()
                }
            }
            Star | Sacc(_) | OUnit => t.clone(),
            Pair(a, c) => Pair(b(a), b(c)),
            Fst(a) => Fst(b(a)),
            Snd(a) => Snd(b(a)),
            LLam(z, ty, body) => {
                let (z, body) = self.binder(z, VarKind::Linear, body);
                LLam(z, ty.clone(), Box::new(body))
            }
            PLam(x, ty, body) => {
                let (x, body) = self.binder(x, VarKind::Value, body);
                PLam(x, ty.clone(), Box::new(body))
            }
            Const(f, vs) => Const(f.clone(), vs.iter().map(|a| self.go(a)).collect()),
            Inl(ty, a) => Inl(ty.clone(), b(a)),
            Inr(ty, a) => Inr(ty.clone(), b(a)),
            Absurd(ty, a) => Absurd(ty.clone(), b(a)),
            OInl(ty, a) => OInl(ty.clone(), b(a)),
            OInr(ty, a) => OInr(ty.clone(), b(a)),
            OAbsurd(ty, a) => OAbsurd(ty.clone(), b(a)),
            OFst(a) => OFst(b(a)),
            OSnd(a) => OSnd(b(a)),
            LApp(a, c) => LApp(b(a), b(c)),
            Tens(a, c) => Tens(b(a), b(c)),
            PApp(a, c) => PApp(b(a), b(c)),
            OPair(a, c) => OPair(b(a), b(c)),
            Case(s, x1, w1, x2, w2) => {
                let s = b(s);
                let (x1, w1) = self.binder(x1, VarKind::Value, w1);
                let (x2, w2) = self.binder(x2, VarKind::Value, w2);
                Case(s, x1, Box::new(w1), x2, Box::new(w2))
            }
            OCase(s, z1, u1, z2, u2) => {
                let s = b(s);
                let (z1, u1) = self.binder(z1, VarKind::Linear, u1);
                let (z2, u2) = self.binder(z2, VarKind::Linear, u2);
                OCase(s, z1, Box::new(u1), z2, Box::new(u2))
            }
            LetTens(x, z, a, body) => {
                let a = b(a);
                // Two binders: handle the value one, then the linear one.
                let stop_x = x == self.x && self.kind == VarKind::Value;
                let stop_z = z == self.x && self.kind == VarKind::Linear;
                if stop_x || stop_z {
                    return LetTens(x.clone(), z.clone(), a, body.clone());
                }
                let mut x2 = x.clone();
                let mut z2 = z.clone();
                let mut body = (**body).clone();
                if self.fv.contains(x) {
                    x2 = fresh(x);
                    body = body.subst(x, VarKind::Value, &Var(x2.clone()));
                }
                if self.fl.contains(z) {
                    z2 = fresh(z);
                    body = body.subst(z, VarKind::Linear, &LVar(z2.clone()));
                }
                LetTens(x2, z2, a, Box::new(self.go(&body)))
            }
        }
    }
}

fn lin_subst(t: &Term, x: &Name, kind: VarKind, r: &Term, fv: &BTreeSet<Name>, fl: &BTreeSet<Name>) -> Term {
    SubstCx { x, kind, r, fv, fl }.go(t)
}

fn lin_freshen(t: &Term, env: &mut BTreeMap<(Name, bool), Name>) -> Term {
    use Term::*;
    fn under(x: &Name, lin: bool, b: &Term, env: &mut BTreeMap<(Name, bool), Name>) -> (Name, Box<Term>) {
        let y = fresh(x);
        let key = (x.clone(), lin);
        let old = env.insert(key.clone(), y.clone());
        let b = lin_freshen(b, env);
        match old {
            Some(o) => env.insert(key, o),
            None => env.remove(&key),
        };
        (y, Box::new(b))
    }
    let go = |a: &Term, env: &mut BTreeMap<(Name, bool), Name>| Box::new(lin_freshen(a, env));
    match t {
        Var(x) => Var(env.get(&(x.clone(), false)).cloned().unwrap_or_else(|| x.clone())),
        LVar(x) => LVar(env.get(&(x.clone(), true)).cloned().unwrap_or_else(|| x.clone())),
        Star | Sacc(_) | OUnit => t.clone(),
        Pair(a, c) => Pair(go(a, env), go(c, env)),
        Fst(a) => Fst(go(a, env)),
        Snd(a) => Snd(go(a, env)),
        LLam(z, ty, b) => {
            let (z, b) = under(z, true, b, env);
            LLam(z, ty.clone(), b)
        }
        PLam(x, ty, b) => {
            let (x, b) = under(x, false, b, env);
            PLam(x, ty.clone(), b)
        }
        Const(f, vs) => Const(f.clone(), vs.iter().map(|a| lin_freshen(a, env)).collect()),
        Inl(ty, a) => Inl(ty.clone(), go(a, env)),
        Inr(ty, a) => Inr(ty.clone(), go(a, env)),
        Absurd(ty, a) => Absurd(ty.clone(), go(a, env)),
        OInl(ty, a) => OInl(ty.clone(), go(a, env)),
        OInr(ty, a) => OInr(ty.clone(), go(a, env)),
        OAbsurd(ty, a) => OAbsurd(ty.clone(), go(a, env)),
        OFst(a) => OFst(go(a, env)),
        OSnd(a) => OSnd(go(a, env)),
        LApp(a, c) => LApp(go(a, env), go(c, env)),
        Tens(a, c) => Tens(go(a, env), go(c, env)),
        PApp(a, c) => PApp(go(a, env), go(c, env)),
        OPair(a, c) => OPair(go(a, env), go(c, env)),
        Case(s, x1, w1, x2, w2) => {
            let s = go(s, env);
            let (x1, w1) = under(x1, false, w1, env);
            let (x2, w2) = under(x2, false, w2, env);
            Case(s, x1, w1, x2, w2)
        }
        OCase(s, z1, u1, z2, u2) => {
            let s = go(s, env);
            let (z1, u1) = under(z1, true, u1, env);
            let (z2, u2) = under(z2, true, u2, env);
            OCase(s, z1, u1, z2, u2)
        }
        LetTens(x, z, a, b) => {
            let a = go(a, env);
            let y = fresh(x);
            let w = fresh(z);
            let ox = env.insert((x.clone(), false), y.clone());
            let oz = env.insert((z.clone(), true), w.clone());
            let b = lin_freshen(b, env);
            match ox {
                Some(o) => env.insert((x.clone(), false), o),
                None => env.remove(&(x.clone(), false)),
            };
            match oz {
                Some(o) => env.insert((z.clone(), true), o),
                None => env.remove(&(z.clone(), true)),
            };
            LetTens(y, w, a, Box::new(b))
        }
    }
}

// ---------------------------------------------------------------- alpha equivalence

/// Bound-variable correspondence used by the alpha-equivalence checks.
#[derive(Default, Clone)]
struct Bij {
    left: Vec<(Name, bool)>,
    right: Vec<(Name, bool)>,
}

impl Bij {
    fn push(&mut self, a: &Name, b: &Name, lin: bool) {
        self.left.push((a.clone(), lin));
        self.right.push((b.clone(), lin));
    }
    fn pop(&mut self) {
        self.left.pop();
        self.right.pop();
    }
    /// Both sides bound at the same depth, or both free with equal names
    /// (after the optional free-name map).
    fn same(&self, a: &Name, b: &Name, lin: bool, free: &BTreeMap<Name, Name>) -> bool {
        let ia = self.left.iter().rposition(|(n, l)| n == a && *l == lin);
        let ib = self.right.iter().rposition(|(n, l)| n == b && *l == lin);
        match (ia, ib) {
            (Some(i), Some(j)) => i == j,
            (None, None) => free.get(a).unwrap_or(a) == b,
            _ => false,
        }
    }
}

/// Alpha-equivalence of FGCBV terms.
pub fn fg_alpha_eq(a: &FgTerm, b: &FgTerm) -> bool {
    fg_alpha(a, b, &mut Bij::default())
}

fn fg_alpha(a: &FgTerm, b: &FgTerm, bij: &mut Bij) -> bool {
    use FgTerm::*;
    let free = BTreeMap::new();
    match (a, b) {
        (Var(x), Var(y)) => bij.same(x, y, false, &free),
        (Star, Star) => true,
        (Pair(a1, a2), Pair(b1, b2)) | (App(a1, a2), App(b1, b2)) => fg_alpha(a1, b1, bij) && fg_alpha(a2, b2, bij),
        (Fst(x), Fst(y)) | (Snd(x), Snd(y)) | (Return(x), Return(y)) => fg_alpha(x, y, bij),
        (Lam(x, t1, m1), Lam(y, t2, m2)) => {
            if t1 != t2 {
                return false;
            }
            bij.push(x, y, false);
            let r = fg_alpha(m1, m2, bij);
            bij.pop();
            r
        }
        (Const(f, vs), Const(g, ws)) | (Geff(f, vs), Geff(g, ws)) => {
            f == g && vs.len() == ws.len() && vs.iter().zip(ws).all(|(v, w)| fg_alpha(v, w, bij))
        }
        (Inl(t1, x), Inl(t2, y)) | (Inr(t1, x), Inr(t2, y)) | (Absurd(t1, x), Absurd(t2, y)) => {
            t1 == t2 && fg_alpha(x, y, bij)
        }
        (Let(x, m1, n1), Let(y, m2, n2)) => {
            if !fg_alpha(m1, m2, bij) {
                return false;
            }
            bij.push(x, y, false);
            let r = fg_alpha(n1, n2, bij);
            bij.pop();
            r
        }
        (Case(s1, x1, v1, x2, w1), Case(s2, y1, v2, y2, w2)) => {
            if !fg_alpha(s1, s2, bij) {
                return false;
            }
            bij.push(x1, y1, false);
            let r1 = fg_alpha(v1, v2, bij);
            bij.pop();
            bij.push(x2, y2, false);
            let r2 = fg_alpha(w1, w2, bij);
            bij.pop();
            r1 && r2
        }
        _ => false,
    }
}

/// Alpha-equivalence of ECBV/CPS terms.
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    lin_alpha(a, b, &mut Bij::default(), &BTreeMap::new())
}

/// Alpha-equivalence where free linear variables of `a` are mapped by
/// `rename` before comparison (e.g. a state variable `s` to a continuation
/// variable `k`).
pub fn alpha_eq_with(a: &Term, b: &Term, rename: &BTreeMap<Name, Name>) -> bool {
    lin_alpha(a, b, &mut Bij::default(), rename)
}

fn lin_alpha(a: &Term, b: &Term, bij: &mut Bij, free: &BTreeMap<Name, Name>) -> bool {
    use Term::*;
    let under = |x: &Name, y: &Name, lin: bool, s: &Term, t: &Term, bij: &mut Bij| {
        bij.push(x, y, lin);
        let r = lin_alpha(s, t, bij, free);
        bij.pop();
        r
    };
    match (a, b) {
        (Var(x), Var(y)) => bij.same(x, y, false, free),
        (LVar(x), LVar(y)) => bij.same(x, y, true, free),
        (Star, Star) | (OUnit, OUnit) => true,
        (Sacc(e), Sacc(f)) => e == f,
        (Pair(a1, a2), Pair(b1, b2))
        | (LApp(a1, a2), LApp(b1, b2))
        | (Tens(a1, a2), Tens(b1, b2))
        | (PApp(a1, a2), PApp(b1, b2))
        | (OPair(a1, a2), OPair(b1, b2)) => lin_alpha(a1, b1, bij, free) && lin_alpha(a2, b2, bij, free),
        (Fst(x), Fst(y)) | (Snd(x), Snd(y)) | (OFst(x), OFst(y)) | (OSnd(x), OSnd(y)) => lin_alpha(x, y, bij, free),
        (LLam(x, t1, m1), LLam(y, t2, m2)) => t1 == t2 && under(x, y, true, m1, m2, bij),
        (PLam(x, t1, m1), PLam(y, t2, m2)) => t1 == t2 && under(x, y, false, m1, m2, bij),
        (Const(f, vs), Const(g, ws)) => {
            f == g && vs.len() == ws.len() && vs.iter().zip(ws).all(|(v, w)| lin_alpha(v, w, bij, free))
        }
        (Inl(t1, x), Inl(t2, y)) | (Inr(t1, x), Inr(t2, y)) | (Absurd(t1, x), Absurd(t2, y)) => {
            t1 == t2 && lin_alpha(x, y, bij, free)
        }
        (OInl(t1, x), OInl(t2, y)) | (OInr(t1, x), OInr(t2, y)) | (OAbsurd(t1, x), OAbsurd(t2, y)) => {
            t1 == t2 && lin_alpha(x, y, bij, free)
        }
        (LetTens(x1, z1, s1, u1), LetTens(x2, z2, s2, u2)) => {
            if !lin_alpha(s1, s2, bij, free) {
                return false;
            }
            bij.push(x1, x2, false);
            bij.push(z1, z2, true);
            let r = lin_alpha(u1, u2, bij, free);
            bij.pop();
            bij.pop();
            r
        }
        (Case(s1, x1, v1, x2, w1), Case(s2, y1, v2, y2, w2)) => {
            lin_alpha(s1, s2, bij, free) && under(x1, y1, false, v1, v2, bij) && under(x2, y2, false, w1, w2, bij)
        }
        (OCase(s1, x1, v1, x2, w1), OCase(s2, y1, v2, y2, w2)) => {
            lin_alpha(s1, s2, bij, free) && under(x1, y1, true, v1, v2, bij) && under(x2, y2, true, w1, w2, bij)
        }
        _ => false,
    }
}

/// Any term of any family, used by the family-generic entry points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyTerm {
    Fg(FgTerm),
    Ecbv(Term),
    Cps(Term),
}

/// Alpha-equivalence across the family-tagged wrapper.
pub fn alpha_eq_any(a: &AnyTerm, b: &AnyTerm) -> Result<bool, SubstError> {
    match (a, b) {
        (AnyTerm::Fg(x), AnyTerm::Fg(y)) => Ok(fg_alpha_eq(x, y)),
        (AnyTerm::Ecbv(x), AnyTerm::Ecbv(y)) | (AnyTerm::Cps(x), AnyTerm::Cps(y)) => Ok(alpha_eq(x, y)),
        _ => Err(SubstError::FamilyMismatch),
    }
}

impl fmt::Display for FgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::surface::print_fg_type(self))
    }
}
impl fmt::Display for VType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::surface::print_vtype(self))
    }
}
impl fmt::Display for CType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::surface::print_ctype(self))
    }
}
impl fmt::Display for FgTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::surface::print_fg(self))
    }
}
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::surface::print_term(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        name(s)
    }

    #[test]
    fn renaming_is_alpha_equal() {
        let a = FgTerm::lam(n("x"), FgType::Unit, FgTerm::ret(FgTerm::var("x")));
        let b = FgTerm::lam(n("y"), FgType::Unit, FgTerm::ret(FgTerm::var("y")));
        assert!(fg_alpha_eq(&a, &b));
        let c = FgTerm::lam(n("x"), FgType::Unit, FgTerm::ret(FgTerm::Star));
        assert!(!fg_alpha_eq(&a, &c));
    }

    #[test]
    fn lettens_renaming() {
        let a = Term::lettens(n("a"), n("b"), Term::lvar("z"), Term::tens(Term::var("a"), Term::lvar("b")));
        let b = Term::lettens(n("c"), n("d"), Term::lvar("z"), Term::tens(Term::var("c"), Term::lvar("d")));
        assert!(alpha_eq(&a, &b));
    }

    #[test]
    fn value_and_linear_variables_differ() {
        assert!(!alpha_eq(&Term::var("x"), &Term::lvar("x")));
    }

    #[test]
    fn subst_examples() {
        let t = FgTerm::ret(FgTerm::var("x"));
        assert_eq!(t.subst(&n("x"), &FgTerm::Star), FgTerm::ret(FgTerm::Star));
        let lam = FgTerm::lam(n("x"), FgType::Unit, FgTerm::ret(FgTerm::var("x")));
        assert_eq!(lam.subst(&n("x"), &FgTerm::var("v")), lam);
        let body = Term::lettens(n("a"), n("s"), Term::lvar("z"), Term::tens(Term::var("a"), Term::lvar("s")));
        let r = Term::lapp(Term::var("f"), Term::lvar("w"));
        let out = body.subst_linear(&n("z"), &r).unwrap();
        assert_eq!(
            out,
            Term::lettens(n("a"), n("s"), r.clone(), Term::tens(Term::var("a"), Term::lvar("s")))
        );
        assert!(Term::Star.subst_linear(&n("z"), &r).is_err());
    }

    #[test]
    fn subst_avoids_capture() {
        // (λy. return x)[y/x] must not capture y.
        let t = FgTerm::lam(n("y"), FgType::Unit, FgTerm::ret(FgTerm::var("x")));
        let out = t.subst(&n("x"), &FgTerm::var("y"));
        match &out {
            FgTerm::Lam(b, _, body) => {
                assert_ne!(b, &n("y"));
                assert_eq!(**body, FgTerm::ret(FgTerm::var("y")));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn linear_occurrence_count() {
        let t = Term::tens(Term::Star, Term::lettens(n("x"), n("w"), Term::lvar("z"), Term::lvar("w")));
        assert_eq!(t.linear_occurrences("z"), 1);
        assert_eq!(t.linear_occurrences("w"), 0);
    }

    #[test]
    fn freshen_preserves_alpha() {
        let t = Term::llam(
            n("z"),
            CType::state(),
            Term::lettens(n("x"), n("s"), Term::lvar("z"), Term::tens(Term::var("x"), Term::lvar("s"))),
        );
        let f = t.freshen();
        assert_ne!(t, f);
        assert!(alpha_eq(&t, &f));
    }
}
