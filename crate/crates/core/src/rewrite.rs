//! Normalization for all three calculi and the equality decision layer.
//!
//! Normalization is small-step and leftmost-outermost: every step re-scans
//! the term with a typed traversal, picks the outermost (then leftmost)
//! redex, contracts it and records a trace entry. β-rules and commuting
//! conversions are contractions; η-rules are type-directed expansions of
//! neutral terms outside elimination positions.

use std::collections::BTreeMap;
use std::fmt;

use crate::models::{morphisms_equal_fg, morphisms_equal_lin, ConcreteModel, ModelVerdict};
use crate::syntax::{alpha_eq, alpha_eq_with, fg_alpha_eq, fresh, CType, FgTerm, FgType, Name, Term, VType, VarKind};
use crate::translate::{sps_producer, sps_value, undualize_term, TranslationEnv};
use crate::typecheck::{
    check_fg, check_lin, FgContext, FgMode, LinContext, LinFamily, LinMode, LinType, Signature, TypeError,
    TypeErrorKind,
};

pub const DEFAULT_FUEL: usize = 10_000;

/// Fuel from `LINSTATE_FUEL`, falling back to [`DEFAULT_FUEL`].
pub fn default_fuel() -> usize {
    std::env::var("LINSTATE_FUEL").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_FUEL)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormConfig {
    pub fuel: usize,
    pub trace: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { fuel: default_fuel(), trace: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("fuel exhausted after {0} rewrite steps")]
    FuelExhausted(usize),
}

/// One contraction: the rule, the path of child indices from the root to
/// the redex, and the redex before and after.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep<T> {
    pub rule: &'static str,
    pub path: Vec<usize>,
    pub before: T,
    pub after: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteTrace<T> {
    pub steps: Vec<TraceStep<T>>,
}

impl<T> Default for RewriteTrace<T> {
    fn default() -> Self {
        RewriteTrace { steps: Vec::new() }
    }
}

impl<T: fmt::Display> fmt::Display for RewriteTrace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            let path: Vec<String> = s.path.iter().map(|p| p.to_string()).collect();
            writeln!(f, "{:>4}  {:<14} @[{}]  {}  ~>  {}", i + 1, s.rule, path.join("."), s.before, s.after)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Normalized<T> {
    pub term: T,
    pub steps: usize,
    pub trace: RewriteTrace<T>,
}

// ---------------------------------------------------------------- paths

/// Child of an FGCBV term by index (binders' bodies count as children).
pub fn fg_child_mut(t: &mut FgTerm, i: usize) -> Option<&mut FgTerm> {
    use FgTerm::*;
    match (t, i) {
        (Pair(a, _) | App(a, _) | Let(_, a, _), 0) => Some(a),
        (Pair(_, b) | App(_, b) | Let(_, _, b), 1) => Some(b),
        (Fst(a) | Snd(a) | Lam(_, _, a) | Inl(_, a) | Inr(_, a) | Absurd(_, a) | Return(a), 0) => Some(a),
        (Const(_, vs) | Geff(_, vs), i) => vs.get_mut(i),
        (Case(a, _, _, _, _), 0) => Some(a),
        (Case(_, _, b, _, _), 1) => Some(b),
        (Case(_, _, _, _, c), 2) => Some(c),
        _ => None,
    }
}

pub fn fg_at_path<'a>(t: &'a FgTerm, path: &[usize]) -> Option<&'a FgTerm> {
    let mut r = t;
    for &i in path {
        r = fg_child_ref(r, i)?;
    }
    Some(r)
}

fn fg_child_ref(t: &FgTerm, i: usize) -> Option<&FgTerm> {
    use FgTerm::*;
    match (t, i) {
        (Pair(a, _) | App(a, _) | Let(_, a, _), 0) => Some(a),
        (Pair(_, b) | App(_, b) | Let(_, _, b), 1) => Some(b),
        (Fst(a) | Snd(a) | Lam(_, _, a) | Inl(_, a) | Inr(_, a) | Absurd(_, a) | Return(a), 0) => Some(a),
        (Const(_, vs) | Geff(_, vs), i) => vs.get(i),
        (Case(a, _, _, _, _), 0) => Some(a),
        (Case(_, _, b, _, _), 1) => Some(b),
        (Case(_, _, _, _, c), 2) => Some(c),
        _ => None,
    }
}

pub fn fg_replace_at(t: &mut FgTerm, path: &[usize], new: FgTerm) -> bool {
    let mut cur = t;
    for &i in path {
        match fg_child_mut(cur, i) {
            Some(c) => cur = c,
            None => return false,
        }
    }
    *cur = new;
    true
}

pub fn lin_child_mut(t: &mut Term, i: usize) -> Option<&mut Term> {
    use Term::*;
    match (t, i) {
        (Pair(a, _) | LApp(a, _) | Tens(a, _) | PApp(a, _) | OPair(a, _) | LetTens(_, _, a, _), 0) => Some(a),
        (Pair(_, b) | LApp(_, b) | Tens(_, b) | PApp(_, b) | OPair(_, b) | LetTens(_, _, _, b), 1) => Some(b),
        (
            Fst(a) | Snd(a) | OFst(a) | OSnd(a) | Inl(_, a) | Inr(_, a) | Absurd(_, a) | OInl(_, a) | OInr(_, a)
            | OAbsurd(_, a) | LLam(_, _, a) | PLam(_, _, a),
            0,
        ) => Some(a),
        (Const(_, vs), i) => vs.get_mut(i),
        (Case(a, ..) | OCase(a, ..), 0) => Some(a),
        (Case(_, _, b, _, _) | OCase(_, _, b, _, _), 1) => Some(b),
        (Case(_, _, _, _, c) | OCase(_, _, _, _, c), 2) => Some(c),
        _ => None,
    }
}

fn lin_child_ref(t: &Term, i: usize) -> Option<&Term> {
    use Term::*;
    match (t, i) {
        (Pair(a, _) | LApp(a, _) | Tens(a, _) | PApp(a, _) | OPair(a, _) | LetTens(_, _, a, _), 0) => Some(a),
        (Pair(_, b) | LApp(_, b) | Tens(_, b) | PApp(_, b) | OPair(_, b) | LetTens(_, _, _, b), 1) => Some(b),
        (
            Fst(a) | Snd(a) | OFst(a) | OSnd(a) | Inl(_, a) | Inr(_, a) | Absurd(_, a) | OInl(_, a) | OInr(_, a)
            | OAbsurd(_, a) | LLam(_, _, a) | PLam(_, _, a),
            0,
        ) => Some(a),
        (Const(_, vs), i) => vs.get(i),
        (Case(a, ..) | OCase(a, ..), 0) => Some(a),
        (Case(_, _, b, _, _) | OCase(_, _, b, _, _), 1) => Some(b),
        (Case(_, _, _, _, c) | OCase(_, _, _, _, c), 2) => Some(c),
        _ => None,
    }
}

pub fn lin_at_path<'a>(t: &'a Term, path: &[usize]) -> Option<&'a Term> {
    let mut r = t;
    for &i in path {
        r = lin_child_ref(r, i)?;
    }
    Some(r)
}

pub fn lin_replace_at(t: &mut Term, path: &[usize], new: Term) -> bool {
    let mut cur = t;
    for &i in path {
        match lin_child_mut(cur, i) {
            Some(c) => cur = c,
            None => return false,
        }
    }
    *cur = new;
    true
}

// ---------------------------------------------------------------- shared

struct Hit<T> {
    rule: &'static str,
    rpath: Vec<usize>,
    new: T,
}

fn note<T>(acc: &mut Option<Hit<T>>, h: Option<Hit<T>>, i: usize) {
    if acc.is_none() {
        if let Some(mut h) = h {
            h.rpath.push(i);
            *acc = Some(h);
        }
    }
}

fn own<T>(rule: &'static str, new: T) -> Option<Hit<T>> {
    Some(Hit { rule, rpath: Vec::new(), new })
}

fn internal<T>(msg: impl Into<String>) -> Result<T, RewriteError> {
    Err(RewriteError::Type(TypeError { kind: TypeErrorKind::TypeMismatch, msg: msg.into() }))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VPos {
    Elim,
    Other,
}

// ---------------------------------------------------------------- FGCBV

fn fg_neutral(t: &FgTerm) -> bool {
    match t {
        FgTerm::Var(_) | FgTerm::Const(..) | FgTerm::Absurd(..) => true,
        FgTerm::Fst(a) | FgTerm::Snd(a) | FgTerm::Case(a, ..) => fg_neutral(a),
        _ => false,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PPos {
    Bound,
    Tail,
}

type FgGamma = Vec<(Name, FgType)>;
type FgOut = Result<(FgType, Option<Hit<FgTerm>>), RewriteError>;

struct FgNorm<'a> {
    sig: &'a Signature,
}

impl FgNorm<'_> {
    fn eta_val(&self, t: &FgTerm, ty: &FgType, pos: VPos) -> Option<Hit<FgTerm>> {
        if *ty == FgType::Unit {
            return if *t == FgTerm::Star { None } else { own("unit-eta", FgTerm::Star) };
        }
        if pos == VPos::Elim || !fg_neutral(t) {
            return None;
        }
        match ty {
            FgType::Prod(..) => own("prod-eta", FgTerm::pair(FgTerm::fst(t.clone()), FgTerm::snd(t.clone()))),
            FgType::Parr(a, _) => {
                let x = fresh("x");
                own("arrow-eta", FgTerm::lam(x.clone(), (**a).clone(), FgTerm::app(t.clone(), FgTerm::Var(x))))
            }
            _ => None,
        }
    }

    fn val(&self, t: &FgTerm, g: &mut FgGamma, pos: VPos) -> FgOut {
        use FgTerm::*;
        let mut hit = None;
        let ty = match t {
            Var(x) => match g.iter().rev().find(|(y, _)| y == x) {
                Some((_, ty)) => ty.clone(),
                None => return internal(format!("unbound variable `{x}`")),
            },
            Star => FgType::Unit,
            Pair(a, b) => {
                let (ta, h) = self.val(a, g, VPos::Other)?;
                note(&mut hit, h, 0);
                let (tb, h) = self.val(b, g, VPos::Other)?;
                note(&mut hit, h, 1);
                FgType::prod(ta, tb)
            }
            Fst(a) | Snd(a) => {
                let (ta, h) = self.val(a, g, VPos::Elim)?;
                note(&mut hit, h, 0);
                let FgType::Prod(l, r) = ta else { return internal("projection of a non-product") };
                let first = matches!(t, Fst(_));
                let ty = if first { *l } else { *r };
                if let Pair(p, q) = &**a {
                    return Ok((ty, own("proj-beta", if first { (**p).clone() } else { (**q).clone() })));
                }
                ty
            }
            Lam(x, s, b) => {
                g.push((x.clone(), s.clone()));
                let r = self.prod(b, g, PPos::Tail);
                g.pop();
                let (tb, h) = r?;
                note(&mut hit, h, 0);
                FgType::parr(s.clone(), tb)
            }
            Const(f, vs) => {
                for (i, v) in vs.iter().enumerate() {
                    let (_, h) = self.val(v, g, VPos::Other)?;
                    note(&mut hit, h, i);
                }
                match self.sig.consts.get(f) {
                    Some(ar) => ar.result.clone(),
                    None => return internal(format!("unknown constant `{f}`")),
                }
            }
            Inl(ty, a) | Inr(ty, a) => {
                let (_, h) = self.val(a, g, VPos::Other)?;
                note(&mut hit, h, 0);
                ty.clone()
            }
            Absurd(ty, a) => {
                let (_, h) = self.val(a, g, VPos::Other)?;
                note(&mut hit, h, 0);
                ty.clone()
            }
            Case(a, x1, w1, x2, w2) => {
                let (ta, h) = self.val(a, g, VPos::Other)?;
                note(&mut hit, h, 0);
                let FgType::Sum(l, r) = ta else { return internal("case on a non-sum") };
                g.push((x1.clone(), *l));
                let r1 = self.val(w1, g, VPos::Other);
                g.pop();
                let (t1, h) = r1?;
                note(&mut hit, h, 1);
                g.push((x2.clone(), *r));
                let r2 = self.val(w2, g, VPos::Other);
                g.pop();
                let (_, h) = r2?;
                note(&mut hit, h, 2);
                match &**a {
                    Inl(_, v) => return Ok((t1, own("case-beta", w1.subst(x1, v)))),
                    Inr(_, v) => return Ok((t1, own("case-beta", w2.subst(x2, v)))),
                    _ => {}
                }
                t1
            }
            Return(_) | Let(..) | App(..) | Geff(..) => return internal(format!("producer `{t}` in value position")),
        };
        if let Some(h) = self.eta_val(t, &ty, pos) {
            return Ok((ty, Some(h)));
        }
        Ok((ty, hit))
    }

    fn prod(&self, t: &FgTerm, g: &mut FgGamma, pos: PPos) -> FgOut {
        use FgTerm::*;
        let mut hit = None;
        match t {
            Return(v) => {
                let (ty, h) = self.val(v, g, VPos::Other)?;
                note(&mut hit, h, 0);
                Ok((ty, hit))
            }
            Let(x, m, n) => {
                let (tm, h) = self.prod(m, g, PPos::Bound)?;
                note(&mut hit, h, 0);
                g.push((x.clone(), tm));
                let r = self.prod(n, g, PPos::Tail);
                g.pop();
                let (tn, h) = r?;
                note(&mut hit, h, 1);
                match &**m {
                    Return(v) => return Ok((tn, own("let-beta", n.subst(x, v)))),
                    Let(y, m1, n1) => {
                        let y2 = fresh(y);
                        let n1 = n1.subst(y, &Var(y2.clone()));
                        let new = FgTerm::let_(y2, (**m1).clone(), FgTerm::let_(x.clone(), n1, (**n).clone()));
                        return Ok((tn, own("let-assoc", new)));
                    }
                    _ => {}
                }
                Ok((tn, hit))
            }
            App(v, w) => {
                let (tv, h) = self.val(v, g, VPos::Elim)?;
                note(&mut hit, h, 0);
                let (_, h) = self.val(w, g, VPos::Other)?;
                note(&mut hit, h, 1);
                let FgType::Parr(_, res) = tv else { return internal("application of a non-function") };
                if let Lam(x, _, body) = &**v {
                    return Ok((*res, own("app-beta", body.subst(x, w))));
                }
                if pos == PPos::Tail && fg_neutral(v) {
                    return Ok((*res, own("tail-eta", tail_expand(t))));
                }
                Ok((*res, hit))
            }
            Geff(e, vs) => {
                for (i, v) in vs.iter().enumerate() {
                    let (_, h) = self.val(v, g, VPos::Other)?;
                    note(&mut hit, h, i);
                }
                let Some(ar) = self.sig.effects.get(e) else { return internal(format!("unknown effect `{e}`")) };
                let res = ar.result_type();
                if ar.params.is_empty() && vs.len() == 1 {
                    return Ok((res, own("geff-unit-arg", Geff(e.clone(), vec![]))));
                }
                if pos == PPos::Tail {
                    return Ok((res, own("tail-eta", tail_expand(t))));
                }
                Ok((res, hit))
            }
            _ => internal(format!("value `{t}` in producer position")),
        }
    }
}

fn tail_expand(t: &FgTerm) -> FgTerm {
    let y = fresh("y");
    FgTerm::let_(y.clone(), t.clone(), FgTerm::ret(FgTerm::Var(y)))
}

/// Normalize an FGCBV value or producer.
pub fn normalize_fg(
    sig: &Signature,
    ctx: &FgContext,
    t: &FgTerm,
    mode: FgMode,
    cfg: NormConfig,
) -> Result<Normalized<FgTerm>, RewriteError> {
    check_fg(sig, ctx, t, mode)?;
    let n = FgNorm { sig };
    let mut cur = t.clone();
    let mut trace = RewriteTrace::default();
    let mut steps = 0;
    loop {
        let mut g = ctx.gamma.clone();
        let (_, hit) = match mode {
            FgMode::Value => n.val(&cur, &mut g, VPos::Other)?,
            FgMode::Producer => n.prod(&cur, &mut g, PPos::Tail)?,
        };
        let Some(hit) = hit else { break };
        if steps >= cfg.fuel {
            return Err(RewriteError::FuelExhausted(steps));
        }
        steps += 1;
        let mut path = hit.rpath;
        path.reverse();
        if cfg.trace {
            let before = fg_at_path(&cur, &path).cloned().unwrap_or(FgTerm::Star);
            trace.steps.push(TraceStep { rule: hit.rule, path: path.clone(), before, after: hit.new.clone() });
        }
        fg_replace_at(&mut cur, &path, hit.new);
    }
    Ok(Normalized { term: cur, steps, trace })
}

// ---------------------------------------------------------------- ECBV / CPS

fn lin_neutral_val(t: &Term) -> bool {
    match t {
        Term::Var(_) | Term::Const(..) | Term::Absurd(..) | Term::Sacc(_) => true,
        Term::Fst(a) | Term::Snd(a) | Term::Case(a, ..) => lin_neutral_val(a),
        _ => false,
    }
}

fn lin_neutral_comp(t: &Term) -> bool {
    match t {
        Term::LVar(_) => true,
        Term::LApp(f, _) => lin_neutral_val(f),
        Term::PApp(a, _) | Term::OFst(a) | Term::OSnd(a) => lin_neutral_comp(a),
        _ => false,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CPos {
    /// Scrutinee of `lettens`, `ocase` or `oabsurd`.
    Scrutinee,
    /// Head of `papp` or operand of an additive projection.
    Elim,
    Other,
}

#[derive(Default)]
struct LinEnv {
    g: Vec<(Name, VType)>,
    lin: Vec<(Name, CType)>,
}

type VOut = Result<(VType, Option<Hit<Term>>), RewriteError>;
type COut = Result<(CType, Option<Hit<Term>>), RewriteError>;

struct LinNorm<'a> {
    sig: &'a Signature,
    family: LinFamily,
}

/// The child of an ECBV frame that is the hole of a commuting conversion.
fn frame_hole(t: &Term) -> Option<&Term> {
    match t {
        Term::LApp(_, a) | Term::Tens(_, a) => Some(a),
        Term::LetTens(_, _, a, _) | Term::OInl(_, a) | Term::OInr(_, a) | Term::OCase(a, ..) | Term::OAbsurd(_, a) => {
            Some(a)
        }
        _ => None,
    }
}

fn plug(frame: &Term, hole: Term) -> Term {
    let mut f = frame.clone();
    let i = if matches!(frame, Term::LApp(..) | Term::Tens(..)) { 1 } else { 0 };
    if let Some(c) = lin_child_mut(&mut f, i) {
        *c = hole;
    }
    f
}

fn rename_lin(t: &Term, from: &Name, to: &Name) -> Term {
    t.subst(from, VarKind::Linear, &Term::LVar(to.clone()))
}

fn commute(node: &Term, node_ty: &CType) -> Option<Hit<Term>> {
    match frame_hole(node)? {
        Term::LetTens(x, w, a, u) => {
            let x2 = fresh(x);
            let w2 = fresh(w);
            let u2 = rename_lin(&u.subst(x, VarKind::Value, &Term::Var(x2.clone())), w, &w2);
            own("comm-lettens", Term::lettens(x2, w2, (**a).clone(), plug(node, u2)))
        }
        Term::OCase(a, z1, u1, z2, u2) => {
            let y1 = fresh(z1);
            let y2 = fresh(z2);
            let b1 = plug(node, rename_lin(u1, z1, &y1));
            let b2 = plug(node, rename_lin(u2, z2, &y2)).freshen();
            own("comm-ocase", Term::ocase((**a).clone(), y1, b1, y2, b2))
        }
        Term::OAbsurd(_, a) => own("comm-oabsurd", Term::oabsurd(node_ty.clone(), (**a).clone())),
        _ => None,
    }
}

impl LinNorm<'_> {
    fn eta_val(&self, t: &Term, ty: &VType, pos: VPos) -> Option<Hit<Term>> {
        if *ty == VType::Unit {
            return if *t == Term::Star { None } else { own("unit-eta", Term::Star) };
        }
        if pos == VPos::Elim || !lin_neutral_val(t) {
            return None;
        }
        match ty {
            VType::Prod(..) => own("prod-eta", Term::pair(Term::fst(t.clone()), Term::snd(t.clone()))),
            VType::Lolli(c, _) => {
                let z = fresh("z");
                own("lolli-eta", Term::llam(z.clone(), (**c).clone(), Term::lapp(t.clone(), Term::LVar(z))))
            }
            _ => None,
        }
    }

    fn eta_comp(&self, t: &Term, ty: &CType, pos: CPos) -> Option<Hit<Term>> {
        if self.family == LinFamily::Cps && *ty == CType::One {
            return if *t == Term::OUnit { None } else { own("one-eta", Term::OUnit) };
        }
        if pos != CPos::Other || !lin_neutral_comp(t) {
            return None;
        }
        match (self.family, ty) {
            (LinFamily::Ecbv, CType::Tensor(..)) => {
                let x = fresh("x");
                let z = fresh("z");
                own(
                    "tensor-eta",
                    Term::lettens(x.clone(), z.clone(), t.clone(), Term::tens(Term::Var(x), Term::LVar(z))),
                )
            }
            (LinFamily::Ecbv, CType::Plus(..)) => {
                let z1 = fresh("z");
                let z2 = fresh("z");
                own(
                    "plus-eta",
                    Term::ocase(
                        t.clone(),
                        z1.clone(),
                        Term::oinl(ty.clone(), Term::LVar(z1)),
                        z2.clone(),
                        Term::oinr(ty.clone(), Term::LVar(z2)),
                    ),
                )
            }
            (LinFamily::Ecbv, CType::Zero) => own("zero-eta", Term::oabsurd(CType::Zero, t.clone())),
            (LinFamily::Cps, CType::Power(a, _)) => {
                let x = fresh("x");
                own("power-eta", Term::plam(x.clone(), (**a).clone(), Term::papp(t.clone(), Term::Var(x))))
            }
            (LinFamily::Cps, CType::With(..)) => {
                own("with-eta", Term::opair(Term::ofst(t.clone()), Term::osnd(t.clone())))
            }
            _ => None,
        }
    }

    fn val(&self, t: &Term, e: &mut LinEnv, pos: VPos) -> VOut {
        use Term::*;
        let mut hit = None;
        let ty = match t {
            Var(x) => match e.g.iter().rev().find(|(y, _)| y == x) {
                Some((_, ty)) => ty.clone(),
                None => return internal(format!("unbound variable `{x}`")),
            },
            Star => VType::Unit,
            Pair(a, b) => {
                let (ta, h) = self.val(a, e, VPos::Other)?;
                note(&mut hit, h, 0);
                let (tb, h) = self.val(b, e, VPos::Other)?;
                note(&mut hit, h, 1);
                VType::prod(ta, tb)
            }
            Fst(a) | Snd(a) => {
                let (ta, h) = self.val(a, e, VPos::Elim)?;
                note(&mut hit, h, 0);
                let VType::Prod(l, r) = ta else { return internal("projection of a non-product") };
                let first = matches!(t, Fst(_));
                let ty = if first { *l } else { *r };
                if let Pair(p, q) = &**a {
                    return Ok((ty, own("proj-beta", if first { (**p).clone() } else { (**q).clone() })));
                }
                ty
            }
            LLam(z, c, body) => {
                e.lin.push((z.clone(), c.clone()));
                let r = self.comp(body, e, CPos::Other);
                e.lin.pop();
                let (tb, h) = r?;
                note(&mut hit, h, 0);
                VType::lolli(c.clone(), tb)
            }
            Const(f, vs) => {
                for (i, v) in vs.iter().enumerate() {
                    let (_, h) = self.val(v, e, VPos::Other)?;
                    note(&mut hit, h, i);
                }
                match self.sig.consts.get(f) {
                    Some(ar) => crate::typecheck::first_order(&ar.result),
                    None => return internal(format!("unknown constant `{f}`")),
                }
            }
            Inl(ty, a) | Inr(ty, a) | Absurd(ty, a) => {
                let (_, h) = self.val(a, e, VPos::Other)?;
                note(&mut hit, h, 0);
                ty.clone()
            }
            Case(a, x1, w1, x2, w2) => {
                let (ta, h) = self.val(a, e, VPos::Other)?;
                note(&mut hit, h, 0);
                let VType::Sum(l, r) = ta else { return internal("case on a non-sum") };
                e.g.push((x1.clone(), *l));
                let r1 = self.val(w1, e, VPos::Other);
                e.g.pop();
                let (t1, h) = r1?;
                note(&mut hit, h, 1);
                e.g.push((x2.clone(), *r));
                let r2 = self.val(w2, e, VPos::Other);
                e.g.pop();
                let (_, h) = r2?;
                note(&mut hit, h, 2);
                match &**a {
                    Inl(_, v) => return Ok((t1, own("case-beta", w1.subst(x1, VarKind::Value, v)))),
                    Inr(_, v) => return Ok((t1, own("case-beta", w2.subst(x2, VarKind::Value, v)))),
                    _ => {}
                }
                t1
            }
            Sacc(f) => {
                let ty = match self.family {
                    LinFamily::Ecbv => self.sig.sacc_type_ecbv(f),
                    LinFamily::Cps => self.sig.sacc_type_cps(f),
                };
                match ty {
                    Some(ty) => ty,
                    None => return internal(format!("unknown effect `{f}`")),
                }
            }
            _ => return internal(format!("computation `{t}` in value position")),
        };
        if let Some(h) = self.eta_val(t, &ty, pos) {
            return Ok((ty, Some(h)));
        }
        Ok((ty, hit))
    }

    fn comp(&self, t: &Term, e: &mut LinEnv, pos: CPos) -> COut {
        use Term::*;
        let mut hit = None;
        let mut beta = None;
        let ty = match t {
            LVar(z) => match e.lin.iter().rev().find(|(w, _)| w == z) {
                Some((_, c)) => c.clone(),
                None => return internal(format!("unbound linear variable `{z}`")),
            },
            LApp(f, a) => {
                let (tf, h) = self.val(f, e, VPos::Elim)?;
                note(&mut hit, h, 0);
                let (_, h) = self.comp(a, e, CPos::Other)?;
                note(&mut hit, h, 1);
                let VType::Lolli(_, cod) = tf else { return internal("linear application of a non-function") };
                if let LLam(z, _, body) = &**f {
                    beta = own("lapp-beta", body.subst(z, VarKind::Linear, a));
                }
                *cod
            }
            Tens(v, a) => {
                let (tv, h) = self.val(v, e, VPos::Other)?;
                note(&mut hit, h, 0);
                let (ta, h) = self.comp(a, e, CPos::Other)?;
                note(&mut hit, h, 1);
                CType::tensor(tv, ta)
            }
            LetTens(x, w, a, u) => {
                let (ta, h) = self.comp(a, e, CPos::Scrutinee)?;
                note(&mut hit, h, 0);
                let CType::Tensor(va, cb) = ta else { return internal("lettens on a non-tensor") };
                e.g.push((x.clone(), *va));
                e.lin.push((w.clone(), *cb));
                let r = self.comp(u, e, CPos::Other);
                e.g.pop();
                e.lin.pop();
                let (tu, h) = r?;
                note(&mut hit, h, 1);
                if let Tens(v, s) = &**a {
                    let body = u.subst(x, VarKind::Value, v).subst(w, VarKind::Linear, s);
                    beta = own("lettens-beta", body);
                }
                tu
            }
            OInl(ty, a) | OInr(ty, a) => {
                let (_, h) = self.comp(a, e, CPos::Other)?;
                note(&mut hit, h, 0);
                ty.clone()
            }
            OCase(a, z1, u1, z2, u2) => {
                let (ta, h) = self.comp(a, e, CPos::Scrutinee)?;
                note(&mut hit, h, 0);
                let CType::Plus(l, r) = ta else { return internal("ocase on a non-sum") };
                e.lin.push((z1.clone(), *l));
                let r1 = self.comp(u1, e, CPos::Other);
                e.lin.pop();
                let (t1, h) = r1?;
                note(&mut hit, h, 1);
                e.lin.push((z2.clone(), *r));
                let r2 = self.comp(u2, e, CPos::Other);
                e.lin.pop();
                let (_, h) = r2?;
                note(&mut hit, h, 2);
                match &**a {
                    OInl(_, s) => beta = own("ocase-beta", u1.subst(z1, VarKind::Linear, s)),
                    OInr(_, s) => beta = own("ocase-beta", u2.subst(z2, VarKind::Linear, s)),
                    _ => {}
                }
                t1
            }
            OAbsurd(ty, a) => {
                let (_, h) = self.comp(a, e, CPos::Scrutinee)?;
                note(&mut hit, h, 0);
                ty.clone()
            }
            PLam(x, a, body) => {
                e.g.push((x.clone(), a.clone()));
                let r = self.comp(body, e, CPos::Other);
                e.g.pop();
                let (tb, h) = r?;
                note(&mut hit, h, 0);
                CType::power(a.clone(), tb)
            }
            PApp(a, v) => {
                let (ta, h) = self.comp(a, e, CPos::Elim)?;
                note(&mut hit, h, 0);
                let (_, h) = self.val(v, e, VPos::Other)?;
                note(&mut hit, h, 1);
                let CType::Power(_, cod) = ta else { return internal("papp of a non-power") };
                if let PLam(x, _, body) = &**a {
                    beta = own("papp-beta", body.subst(x, VarKind::Value, v));
                }
                *cod
            }
            OPair(a, b) => {
                let (ta, h) = self.comp(a, e, CPos::Other)?;
                note(&mut hit, h, 0);
                let (tb, h) = self.comp(b, e, CPos::Other)?;
                note(&mut hit, h, 1);
                CType::with(ta, tb)
            }
            OFst(a) | OSnd(a) => {
                let (ta, h) = self.comp(a, e, CPos::Elim)?;
                note(&mut hit, h, 0);
                let CType::With(l, r) = ta else { return internal("projection of a non-additive product") };
                let first = matches!(t, OFst(_));
                if let OPair(p, q) = &**a {
                    beta = own("oproj-beta", if first { (**p).clone() } else { (**q).clone() });
                }
                if first {
                    *l
                } else {
                    *r
                }
            }
            OUnit => CType::One,
            _ => return internal(format!("value `{t}` in computation position")),
        };
        if beta.is_some() {
            return Ok((ty, beta));
        }
        if self.family == LinFamily::Ecbv {
            if let Some(h) = commute(t, &ty) {
                return Ok((ty, Some(h)));
            }
        }
        if let Some(h) = self.eta_comp(t, &ty, pos) {
            return Ok((ty, Some(h)));
        }
        Ok((ty, hit))
    }
}

/// Normalize an ECBV or CPS value or computation.
pub fn normalize_lin(
    sig: &Signature,
    ctx: &LinContext,
    t: &Term,
    mode: LinMode,
    family: LinFamily,
    cfg: NormConfig,
) -> Result<Normalized<Term>, RewriteError> {
    check_lin(sig, ctx, t, mode, family)?;
    let n = LinNorm { sig, family };
    let mut cur = t.clone();
    let mut trace = RewriteTrace::default();
    let mut steps = 0;
    loop {
        let mut env = LinEnv { g: ctx.gamma.clone(), lin: ctx.delta.iter().cloned().collect() };
        let hit = match mode {
            LinMode::Value => n.val(&cur, &mut env, VPos::Other)?.1,
            LinMode::Computation => n.comp(&cur, &mut env, CPos::Other)?.1,
        };
        let Some(hit) = hit else { break };
        if steps >= cfg.fuel {
            return Err(RewriteError::FuelExhausted(steps));
        }
        steps += 1;
        let mut path = hit.rpath;
        path.reverse();
        if cfg.trace {
            let before = lin_at_path(&cur, &path).cloned().unwrap_or(Term::Star);
            trace.steps.push(TraceStep { rule: hit.rule, path: path.clone(), before, after: hit.new.clone() });
        }
        lin_replace_at(&mut cur, &path, hit.new);
    }
    Ok(Normalized { term: cur, steps, trace })
}

// ---------------------------------------------------------------- equality

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equal,
    Unequal,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equal => "equal",
            Verdict::Unequal => "unequal",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EqReport {
    pub verdict: Verdict,
    pub reason: String,
    pub witness: Option<String>,
}

impl EqReport {
    fn new(verdict: Verdict, reason: impl Into<String>) -> Self {
        EqReport { verdict, reason: reason.into(), witness: None }
    }
}

/// Options for [`decide_eq_fg`] and [`decide_eq_lin`].
#[derive(Clone, Debug, Default)]
pub struct EqConfig {
    pub norm: NormConfig,
    /// A finite model of the ambient effect theory, used to separate terms.
    pub model: Option<ConcreteModel>,
    /// The model is complete for closed terms of ground type (it is the
    /// free model of the theory), so agreement there also proves equality.
    pub model_complete: bool,
}

fn fg_ground(t: &FgType) -> bool {
    match t {
        FgType::Unit | FgType::Empty => true,
        FgType::Prod(a, b) | FgType::Sum(a, b) => fg_ground(a) && fg_ground(b),
        FgType::Base(_) | FgType::Parr(..) => false,
    }
}

fn fg_effect_free(t: &FgTerm) -> bool {
    match t {
        FgTerm::Geff(..) => false,
        _ => {
            let mut ok = true;
            let mut probe = t.clone();
            for i in 0.. {
                match fg_child_mut(&mut probe, i) {
                    Some(c) => ok &= fg_effect_free(c),
                    None => break,
                }
            }
            ok
        }
    }
}

fn lin_effect_free(t: &Term) -> bool {
    let mut ok = !matches!(t, Term::Sacc(_));
    t.for_each_child(|c| ok &= lin_effect_free(c));
    ok
}

/// Decide equality of two FGCBV terms in the base theory (plus the theory
/// modelled by `cfg.model`, when given).
pub fn decide_eq_fg(
    sig: &Signature,
    ctx: &FgContext,
    a: &FgTerm,
    b: &FgTerm,
    mode: FgMode,
    cfg: &EqConfig,
) -> Result<EqReport, TypeError> {
    let ta = check_fg(sig, ctx, a, mode)?;
    let tb = check_fg(sig, ctx, b, mode)?;
    if ta != tb {
        return Err(TypeError {
            kind: TypeErrorKind::TypeMismatch,
            msg: format!("terms have different types {ta} and {tb}"),
        });
    }
    if ctx.gamma.iter().any(|(_, t)| *t == FgType::Empty) {
        return Ok(EqReport::new(Verdict::Equal, "context contains a variable of empty type"));
    }
    let na = normalize_fg(sig, ctx, a, mode, cfg.norm);
    let nb = normalize_fg(sig, ctx, b, mode, cfg.norm);
    let mut note = String::new();
    match (&na, &nb) {
        (Ok(x), Ok(y)) => {
            if fg_alpha_eq(&x.term, &y.term) {
                return Ok(EqReport::new(Verdict::Equal, "normal forms are alpha-equivalent"));
            }
            if sps_agree(sig, ctx, &x.term, &y.term, mode, cfg.norm) {
                return Ok(EqReport::new(Verdict::Equal, "state-passing normal forms are alpha-equivalent"));
            }
        }
        (Err(e), _) | (_, Err(e)) => note = format!("{e}; "),
    }
    let effect_free = fg_effect_free(a) && fg_effect_free(b);
    let (model, complete) = match (&cfg.model, effect_free) {
        (Some(m), _) => (m.clone(), cfg.model_complete),
        (None, true) => (ConcreteModel::pure_default(), true),
        (None, false) => return Ok(EqReport::new(Verdict::Unknown, format!("{note}no model for the effects"))),
    };
    let ground = fg_ground(&ta) && ctx.gamma.iter().all(|(_, t)| fg_ground(t));
    Ok(match morphisms_equal_fg(&model, sig, ctx, a, b, mode) {
        Ok(ModelVerdict::Unequal(w)) => EqReport {
            verdict: Verdict::Unequal,
            reason: format!("{note}distinguished in the {} model", model.describe()),
            witness: Some(w),
        },
        Ok(ModelVerdict::Equal) if complete && ground => {
            EqReport::new(Verdict::Equal, format!("{note}equal in a complete model at ground type"))
        }
        Ok(_) => EqReport::new(Verdict::Unknown, format!("{note}normal forms differ; not separated by the model")),
        Err(e) => EqReport::new(Verdict::Unknown, format!("{note}model evaluation unavailable: {e}")),
    })
}

fn sps_agree(sig: &Signature, ctx: &FgContext, a: &FgTerm, b: &FgTerm, mode: FgMode, norm: NormConfig) -> bool {
    let env = TranslationEnv::default();
    let lctx = crate::translate::sps_ctx(&env, ctx);
    let (lctx, lmode, ta, tb) = match mode {
        FgMode::Value => (lctx, LinMode::Value, sps_value(&env, a), sps_value(&env, b)),
        FgMode::Producer => {
            let s = fresh("s");
            let ta = sps_producer(&env, a, &s);
            let tb = sps_producer(&env, b, &s);
            (lctx.linear_name(s, CType::state()), LinMode::Computation, ta, tb)
        }
    };
    let na = normalize_lin(sig, &lctx, &ta, lmode, LinFamily::Ecbv, norm);
    let nb = normalize_lin(sig, &lctx, &tb, lmode, LinFamily::Ecbv, norm);
    matches!((na, nb), (Ok(x), Ok(y)) if alpha_eq(&x.term, &y.term))
}

/// Decide equality of two ECBV or CPS terms.
pub fn decide_eq_lin(
    sig: &Signature,
    ctx: &LinContext,
    a: &Term,
    b: &Term,
    mode: LinMode,
    family: LinFamily,
    cfg: &EqConfig,
) -> Result<EqReport, TypeError> {
    let ta = check_lin(sig, ctx, a, mode, family)?;
    let tb = check_lin(sig, ctx, b, mode, family)?;
    if ta != tb {
        return Err(TypeError {
            kind: TypeErrorKind::TypeMismatch,
            msg: format!("terms have different types {ta} and {tb}"),
        });
    }
    if ctx.gamma.iter().any(|(_, t)| *t == VType::Empty) {
        return Ok(EqReport::new(Verdict::Equal, "context contains a variable of empty type"));
    }
    let na = normalize_lin(sig, ctx, a, mode, family, cfg.norm);
    let nb = normalize_lin(sig, ctx, b, mode, family, cfg.norm);
    let mut note = String::new();
    match (&na, &nb) {
        (Ok(x), Ok(y)) => {
            if alpha_eq(&x.term, &y.term) {
                return Ok(EqReport::new(Verdict::Equal, "normal forms are alpha-equivalent"));
            }
            if family == LinFamily::Cps && undual_agree(sig, ctx, a, b, mode, cfg.norm) {
                return Ok(EqReport::new(Verdict::Equal, "dual ECBV normal forms are alpha-equivalent"));
            }
        }
        (Err(e), _) | (_, Err(e)) => note = format!("{e}; "),
    }
    let effect_free = lin_effect_free(a) && lin_effect_free(b);
    let model = match (&cfg.model, effect_free) {
        (Some(m), _) => m.clone(),
        (None, true) => ConcreteModel::pure_default(),
        (None, false) => return Ok(EqReport::new(Verdict::Unknown, format!("{note}no model for the effects"))),
    };
    Ok(match morphisms_equal_lin(&model, sig, ctx, a, b, mode, family) {
        Ok(ModelVerdict::Unequal(w)) => EqReport {
            verdict: Verdict::Unequal,
            reason: format!("{note}distinguished in the {} model", model.describe()),
            witness: Some(w),
        },
        Ok(_) => EqReport::new(Verdict::Unknown, format!("{note}normal forms differ; not separated by the model")),
        Err(e) => EqReport::new(Verdict::Unknown, format!("{note}model evaluation unavailable: {e}")),
    })
}

fn undual_agree(sig: &Signature, ctx: &LinContext, a: &Term, b: &Term, mode: LinMode, norm: NormConfig) -> bool {
    let env = TranslationEnv::default();
    let (Ok(da), Ok(db)) = (undualize_term(&env, sig, ctx, a, mode), undualize_term(&env, sig, ctx, b, mode)) else {
        return false;
    };
    let (Ok(na), Ok(nb)) = (
        normalize_lin(sig, &da.ctx, &da.term, mode, LinFamily::Ecbv, norm),
        normalize_lin(sig, &db.ctx, &db.term, mode, LinFamily::Ecbv, norm),
    ) else {
        return false;
    };
    let mut ren = BTreeMap::new();
    if let (Some((x, _)), Some((y, _))) = (&da.ctx.delta, &db.ctx.delta) {
        ren.insert(x.clone(), y.clone());
    }
    alpha_eq_with(&na.term, &nb.term, &ren)
}

/// The type of a checked term, for callers that need it alongside a verdict.
pub fn lin_type(sig: &Signature, ctx: &LinContext, t: &Term, mode: LinMode, family: LinFamily) -> Option<LinType> {
    check_lin(sig, ctx, t, mode, family).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::builtin_model;
    use crate::gen::{GenConfig, LinTy, TermGen};
    use crate::surface::{parse_fg_term, parse_term_with};
    use proptest::prelude::*;

    fn cfg() -> NormConfig {
        NormConfig { fuel: DEFAULT_FUEL, trace: true }
    }

    #[test]
    fn beta_reduces_application() {
        let sig = Signature::empty();
        let t = parse_fg_term("(app (lam (x unit) (return x)) star)").unwrap();
        let n = normalize_fg(&sig, &FgContext::new(), &t, FgMode::Producer, cfg()).unwrap();
        assert_eq!(n.term, FgTerm::ret(FgTerm::Star));
        assert_eq!(n.trace.steps[0].rule, "app-beta");
        assert!(n.trace.to_string().contains("app-beta"));
    }

    #[test]
    fn let_of_return_is_substituted() {
        let sig = Signature::empty();
        let t = parse_fg_term("(let (x (return star)) (return (pair x x)))").unwrap();
        let n = normalize_fg(&sig, &FgContext::new(), &t, FgMode::Producer, cfg()).unwrap();
        assert_eq!(n.term, FgTerm::ret(FgTerm::pair(FgTerm::Star, FgTerm::Star)));
    }

    #[test]
    fn eta_expands_neutral_pairs() {
        let sig = Signature::empty();
        let ctx = FgContext::new().with("p", FgType::prod(FgType::base("a"), FgType::base("b")));
        let n = normalize_fg(&sig, &ctx, &FgTerm::var("p"), FgMode::Value, cfg()).unwrap();
        assert_eq!(n.term, FgTerm::pair(FgTerm::fst(FgTerm::var("p")), FgTerm::snd(FgTerm::var("p"))));
    }

    #[test]
    fn linear_beta_substitutes_the_argument() {
        let sig = Signature::empty();
        let ctx = LinContext::new().linear("s", CType::state());
        let t = parse_term_with("(lapp (llam (z S) (tens star z)) s)", &["s"]).unwrap();
        let n = normalize_lin(&sig, &ctx, &t, LinMode::Computation, LinFamily::Ecbv, cfg()).unwrap();
        assert_eq!(n.term, Term::tens(Term::Star, Term::lvar("s")));
    }

    #[test]
    fn fuel_is_enforced() {
        let sig = Signature::empty();
        let t = parse_fg_term("(app (lam (x unit) (app (lam (y unit) (return y)) x)) star)").unwrap();
        let r = normalize_fg(&sig, &FgContext::new(), &t, FgMode::Producer, NormConfig { fuel: 1, trace: false });
        assert_eq!(r.unwrap_err(), RewriteError::FuelExhausted(1));
    }

    #[test]
    fn deref_and_constant_answer_are_separated() {
        let sig = Signature::bit_store();
        let eq = EqConfig { model: Some(builtin_model("bit-store").unwrap()), model_complete: true, ..Default::default() };
        let a = parse_fg_term("(geff deref)").unwrap();
        let b = parse_fg_term("(return (inl (sum unit unit) star))").unwrap();
        let r = decide_eq_fg(&sig, &FgContext::new(), &a, &b, FgMode::Producer, &eq).unwrap();
        assert_eq!(r.verdict, Verdict::Unequal);
        assert!(r.witness.is_some());
    }

    #[test]
    fn effects_without_a_model_are_unknown_unless_syntactically_equal() {
        let sig = Signature::bit_store();
        let a = parse_fg_term("(let (x (geff flip)) (geff deref))").unwrap();
        let b = parse_fg_term("(geff deref)").unwrap();
        let r = decide_eq_fg(&sig, &FgContext::new(), &a, &b, FgMode::Producer, &EqConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Unknown);
        let r = decide_eq_fg(&sig, &FgContext::new(), &a, &a, FgMode::Producer, &EqConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Equal);
    }

    #[test]
    fn differently_typed_terms_are_a_type_error() {
        let sig = Signature::empty();
        let a = parse_fg_term("star").unwrap();
        let b = parse_fg_term("(inl (sum unit unit) star)").unwrap();
        assert!(decide_eq_fg(&sig, &FgContext::new(), &a, &b, FgMode::Value, &EqConfig::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fg_normal_forms_are_stable(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            let s = g.fg_judgement();
            let n1 = normalize_fg(&g.sig, &s.ctx, &s.term, s.mode, NormConfig::default()).unwrap();
            prop_assert_eq!(check_fg(&g.sig, &s.ctx, &n1.term, s.mode).unwrap(), s.ty.clone());
            let n2 = normalize_fg(&g.sig, &s.ctx, &n1.term, s.mode, NormConfig::default()).unwrap();
            prop_assert!(fg_alpha_eq(&n1.term, &n2.term), "{} vs {}", n1.term, n2.term);
            prop_assert_eq!(n2.steps, 0);
        }

        #[test]
        fn ecbv_normal_forms_are_stable(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            let s = g.ecbv_judgement();
            let mode = match s.ty { LinTy::Val(_) => LinMode::Value, LinTy::Comp(_) => LinMode::Computation };
            let n1 = normalize_lin(&g.sig, &s.ctx, &s.term, mode, LinFamily::Ecbv, NormConfig::default()).unwrap();
            let n2 = normalize_lin(&g.sig, &s.ctx, &n1.term, mode, LinFamily::Ecbv, NormConfig::default()).unwrap();
            prop_assert!(alpha_eq(&n1.term, &n2.term));
        }

        #[test]
        fn decide_eq_is_reflexive(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            let s = g.fg_judgement();
            let r = decide_eq_fg(&g.sig, &s.ctx, &s.term, &s.term.freshen(), s.mode, &EqConfig::default()).unwrap();
            prop_assert_eq!(r.verdict, Verdict::Equal);
        }
    }
}
