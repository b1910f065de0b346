//! Syntax-directed type checking for FGCBV, ECBV (with linearity) and the
//! CPS variant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::surface::{Family, Program};
use crate::syntax::{name, CType, FgTerm, FgType, Name, Term, VType};

/// Arity `(β⃗ ; α⃗₁ + … + α⃗ₙ)` of an effect constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectArity {
    pub params: Vec<FgType>,
    pub alts: Vec<Vec<FgType>>,
}

/// Tuple type of a list: `unit`, the single type, or a right-nested product.
pub fn tuple_type(ts: &[FgType]) -> FgType {
    match ts {
        [] => FgType::Unit,
        [t] => t.clone(),
        [t, rest @ ..] => FgType::prod(t.clone(), tuple_type(rest)),
    }
}

/// Sum type of a list: `empty`, the single type, or a right-nested sum.
pub fn sum_type(ts: &[FgType]) -> FgType {
    match ts {
        [] => FgType::Empty,
        [t] => t.clone(),
        [t, rest @ ..] => FgType::sum(t.clone(), sum_type(rest)),
    }
}

impl EffectArity {
    pub fn new(params: Vec<FgType>, alts: Vec<Vec<FgType>>) -> Self {
        EffectArity { params, alts }
    }
    /// The parameter type `β⃗` as a single tuple type.
    pub fn param_type(&self) -> FgType {
        tuple_type(&self.params)
    }
    /// The result type `α⃗₁ + … + α⃗ₙ`.
    pub fn result_type(&self) -> FgType {
        sum_type(&self.alts.iter().map(|a| tuple_type(a)).collect::<Vec<_>>())
    }
}

/// Term-constant arity `f : (α₁ … αₙ) → β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstArity {
    pub args: Vec<FgType>,
    pub result: FgType,
}

/// Declared constants. Base type names are not restricted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub sorts: BTreeSet<Name>,
    pub consts: BTreeMap<Name, ConstArity>,
    pub effects: BTreeMap<Name, EffectArity>,
    pub state: Option<Name>,
}

impl Signature {
    pub fn empty() -> Self {
        Signature::default()
    }

    pub fn with_effect(mut self, e: &str, ar: EffectArity) -> Self {
        self.effects.insert(name(e), ar);
        self
    }

    pub fn with_const(mut self, f: &str, args: Vec<FgType>, result: FgType) -> Self {
        self.consts.insert(name(f), ConstArity { args, result });
        self
    }

    /// `deref : ( ; 1 + 1)` and `flip : ( ; 1)`.
    pub fn bit_store() -> Self {
        Signature::empty()
            .with_effect("deref", EffectArity::new(vec![], vec![vec![], vec![]]))
            .with_effect("flip", EffectArity::new(vec![], vec![vec![]]))
    }

    /// `read : ( ; val)` and `write : (val ; 1)` over the sort `val`.
    pub fn global_store() -> Self {
        let val = FgType::base("val");
        let mut s = Signature::empty()
            .with_effect("read", EffectArity::new(vec![], vec![vec![val.clone()]]))
            .with_effect("write", EffectArity::new(vec![val], vec![vec![]]));
        s.sorts.insert(name("val"));
        s
    }

    pub fn printing() -> Self {
        Signature::empty()
            .with_effect("print0", EffectArity::new(vec![], vec![vec![]]))
            .with_effect("print1", EffectArity::new(vec![], vec![vec![]]))
    }

    pub fn mean_value() -> Self {
        Signature::empty().with_effect("toss", EffectArity::new(vec![], vec![vec![], vec![]]))
    }

    /// Name of the state constant, `S` unless overridden.
    pub fn state_name(&self) -> Name {
        self.state.clone().unwrap_or_else(|| name("S"))
    }

    /// Type of `sacc e` in ECBV: `(β⃗ ⊗ S) ⊸ (α⃗ ⊗ S)`.
    pub fn sacc_type_ecbv(&self, e: &str) -> Option<VType> {
        let ar = self.effects.get(e)?;
        let s = CType::Const(self.state_name());
        Some(VType::lolli(
            CType::tensor(first_order(&ar.param_type()), s.clone()),
            CType::tensor(first_order(&ar.result_type()), s),
        ))
    }

    /// Type of `sacc e` in the CPS variant: `(α⃗ → R) ⊸ (β⃗ → R)`.
    pub fn sacc_type_cps(&self, e: &str) -> Option<VType> {
        let ar = self.effects.get(e)?;
        let r = CType::ret();
        Some(VType::lolli(
            CType::power(first_order(&ar.result_type()), r.clone()),
            CType::power(first_order(&ar.param_type()), r),
        ))
    }
}

/// The ECBV value type of an FGCBV type, with partial arrows read in
/// state-passing form over `S`.
pub fn first_order(t: &FgType) -> VType {
    match t {
        FgType::Base(n) => VType::Base(n.clone()),
        FgType::Unit => VType::Unit,
        FgType::Empty => VType::Empty,
        FgType::Prod(a, b) => VType::prod(first_order(a), first_order(b)),
        FgType::Sum(a, b) => VType::sum(first_order(a), first_order(b)),
        FgType::Parr(a, b) => {
            let s = CType::state();
            VType::lolli(CType::tensor(first_order(a), s.clone()), CType::tensor(first_order(b), s))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnboundVariable,
    LinearityViolation,
    ModeMismatch,
    ArityMismatch,
    AnnotationMismatch,
    TypeMismatch,
    UnknownConstant,
    Stratification,
    FamilyViolation,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind:?}: {msg}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub msg: String,
}

fn terr<T>(kind: TypeErrorKind, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError { kind, msg: msg.into() })
}

/// Γ plus an optional single linear binding Δ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypingContext<V> {
    pub gamma: Vec<(Name, V)>,
    pub delta: Option<(Name, CType)>,
}

impl<V> Default for TypingContext<V> {
    fn default() -> Self {
        TypingContext { gamma: Vec::new(), delta: None }
    }
}

impl<V: Clone> TypingContext<V> {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn with(mut self, x: &str, t: V) -> Self {
        self.gamma.push((name(x), t));
        self
    }
    pub fn with_name(mut self, x: Name, t: V) -> Self {
        self.gamma.push((x, t));
        self
    }
    pub fn linear(mut self, z: &str, c: CType) -> Self {
        self.delta = Some((name(z), c));
        self
    }
    pub fn linear_name(mut self, z: Name, c: CType) -> Self {
        self.delta = Some((z, c));
        self
    }
    pub fn lookup(&self, x: &str) -> Option<&V> {
        self.gamma.iter().rev().find(|(y, _)| &**y == x).map(|(_, t)| t)
    }
}

pub type FgContext = TypingContext<FgType>;
pub type LinContext = TypingContext<VType>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FgMode {
    Value,
    Producer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinMode {
    Value,
    Computation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinFamily {
    Ecbv,
    Cps,
}

/// Either side of an ECBV/CPS judgement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinType {
    Val(VType),
    Comp(CType),
}

impl fmt::Display for LinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinType::Val(v) => write!(f, "{v}"),
            LinType::Comp(c) => write!(f, "{c}"),
        }
    }
}

// ---------------------------------------------------------------- FGCBV

pub fn check_fg(sig: &Signature, ctx: &FgContext, t: &FgTerm, mode: FgMode) -> Result<FgType, TypeError> {
    if ctx.delta.is_some() {
        return terr(TypeErrorKind::ModeMismatch, "FGCBV judgements have no linear context");
    }
    let mut g = ctx.gamma.clone();
    let mut c = FgChecker { sig };
    match mode {
        FgMode::Value => c.val(&mut g, t),
        FgMode::Producer => c.prod(&mut g, t),
    }
}

struct FgChecker<'a> {
    sig: &'a Signature,
}

fn mismatch<T>(what: &str, expected: impl fmt::Display, found: impl fmt::Display) -> Result<T, TypeError> {
    terr(TypeErrorKind::TypeMismatch, format!("{what}: expected {expected}, found {found}"))
}

fn fg_tuple_args(vs: &[FgTerm]) -> FgTerm {
    match vs {
        [] => FgTerm::Star,
        [v] => v.clone(),
        [v, rest @ ..] => FgTerm::pair(v.clone(), fg_tuple_args(rest)),
    }
}

impl FgChecker<'_> {
    fn under<T>(
        &mut self,
        g: &mut Vec<(Name, FgType)>,
        x: &Name,
        ty: FgType,
        f: impl FnOnce(&mut Self, &mut Vec<(Name, FgType)>) -> T,
    ) -> T {
        g.push((x.clone(), ty));
        let r = f(self, g);
        g.pop();
        r
    }

    fn val(&mut self, g: &mut Vec<(Name, FgType)>, t: &FgTerm) -> Result<FgType, TypeError> {
        use FgTerm::*;
        match t {
            Var(x) => match g.iter().rev().find(|(y, _)| y == x) {
                Some((_, ty)) => Ok(ty.clone()),
                None => terr(TypeErrorKind::UnboundVariable, format!("unbound variable `{x}`")),
            },
            Star => Ok(FgType::Unit),
            Pair(a, b) => Ok(FgType::prod(self.val(g, a)?, self.val(g, b)?)),
            Fst(a) | Snd(a) => match self.val(g, a)? {
                FgType::Prod(l, r) => Ok(if matches!(t, Fst(_)) { *l } else { *r }),
                other => mismatch("projection", "a product", other),
            },
            Lam(x, ty, body) => {
                let res = self.under(g, x, ty.clone(), |c, g| c.prod(g, body))?;
                Ok(FgType::parr(ty.clone(), res))
            }
            Const(f, vs) => {
                let Some(ar) = self.sig.consts.get(f) else {
                    return terr(TypeErrorKind::UnknownConstant, format!("unknown term constant `{f}`"));
                };
                if ar.args.len() != vs.len() {
                    return terr(
                        TypeErrorKind::ArityMismatch,
                        format!("`{f}` expects {} argument(s), found {}", ar.args.len(), vs.len()),
                    );
                }
                for (v, a) in vs.iter().zip(&ar.args) {
                    let tv = self.val(g, v)?;
                    if &tv != a {
                        return mismatch(&format!("argument of `{f}`"), a, tv);
                    }
                }
                Ok(ar.result.clone())
            }
            Inl(ty, v) | Inr(ty, v) => {
                let FgType::Sum(l, r) = ty else {
                    return terr(TypeErrorKind::AnnotationMismatch, format!("injection annotated with non-sum {ty}"));
                };
                let want = if matches!(t, Inl(..)) { l } else { r };
                let tv = self.val(g, v)?;
                if tv != **want {
                    return terr(
                        TypeErrorKind::AnnotationMismatch,
                        format!("injection into {ty} of a value of type {tv}"),
                    );
                }
                Ok(ty.clone())
            }
            Case(v, x1, w1, x2, w2) => {
                let FgType::Sum(l, r) = self.val(g, v)? else {
                    return terr(TypeErrorKind::TypeMismatch, "case on a non-sum value");
                };
                let t1 = self.under(g, x1, *l, |c, g| c.val(g, w1))?;
                let t2 = self.under(g, x2, *r, |c, g| c.val(g, w2))?;
                if t1 != t2 {
                    return mismatch("case branches", t1, t2);
                }
                Ok(t1)
            }
            Absurd(ty, v) => match self.val(g, v)? {
                FgType::Empty => Ok(ty.clone()),
                other => mismatch("absurd", "empty", other),
            },
            Return(_) | Let(..) | App(..) | Geff(..) => {
                terr(TypeErrorKind::ModeMismatch, format!("producer `{t}` in value position"))
            }
        }
    }

    fn prod(&mut self, g: &mut Vec<(Name, FgType)>, t: &FgTerm) -> Result<FgType, TypeError> {
        use FgTerm::*;
        match t {
            Return(v) => self.val(g, v),
            Let(x, m, n) => {
                let tm = self.prod(g, m)?;
                self.under(g, x, tm, |c, g| c.prod(g, n))
            }
            App(v, w) => match self.val(g, v)? {
                FgType::Parr(a, b) => {
                    let tw = self.val(g, w)?;
                    if tw != *a {
                        return mismatch("argument", a, tw);
                    }
                    Ok(*b)
                }
                other => terr(TypeErrorKind::TypeMismatch, format!("non-function of type {other} applied")),
            },
            Geff(e, vs) => {
                let Some(ar) = self.sig.effects.get(e) else {
                    return terr(TypeErrorKind::UnknownConstant, format!("unknown effect constant `{e}`"));
                };
                let unit_arg = ar.params.is_empty() && vs.len() == 1;
                if ar.params.len() != vs.len() && !unit_arg {
                    return terr(
                        TypeErrorKind::ArityMismatch,
                        format!("`{e}` expects {} parameter(s), found {}", ar.params.len(), vs.len()),
                    );
                }
                let tv = self.val(g, &fg_tuple_args(vs))?;
                if tv != ar.param_type() {
                    return mismatch(&format!("parameters of `{e}`"), ar.param_type(), tv);
                }
                Ok(ar.result_type())
            }
            _ => terr(TypeErrorKind::ModeMismatch, format!("value `{t}` in producer position")),
        }
    }
}

/// The judgement a whole program was found to inhabit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Judgement {
    Fg(FgMode, FgType),
    Lin(LinFamily, LinType),
}

impl fmt::Display for Judgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Judgement::Fg(FgMode::Value, t) => write!(f, "value {t}"),
            Judgement::Fg(FgMode::Producer, t) => write!(f, "producer {t}"),
            Judgement::Lin(_, LinType::Val(t)) => write!(f, "value {t}"),
            Judgement::Lin(_, LinType::Comp(c)) => write!(f, "computation {c}"),
        }
    }
}

pub fn lin_family(f: Family) -> LinFamily {
    match f {
        Family::Cps => LinFamily::Cps,
        _ => LinFamily::Ecbv,
    }
}

/// Check a parsed program. FGCBV terms headed by a producer former are
/// checked as producers, all others as values; linear programs are
/// computations exactly when they declare a linear variable.
pub fn check_program(sig: &Signature, p: &Program) -> Result<Judgement, TypeError> {
    match p {
        Program::Fg { gamma, term } => {
            let ctx = FgContext { gamma: gamma.clone(), delta: None };
            let mode = if term.is_producer_form() { FgMode::Producer } else { FgMode::Value };
            Ok(Judgement::Fg(mode, check_fg(sig, &ctx, term, mode)?))
        }
        Program::Lin { family, gamma, delta, term } => {
            let ctx = LinContext { gamma: gamma.clone(), delta: delta.clone() };
            let mode = if delta.is_some() { LinMode::Computation } else { LinMode::Value };
            let fam = lin_family(*family);
            Ok(Judgement::Lin(fam, check_lin(sig, &ctx, term, mode, fam)?))
        }
    }
}

// ---------------------------------------------------------------- ECBV / CPS

pub fn check_ecbv(sig: &Signature, ctx: &LinContext, t: &Term, mode: LinMode) -> Result<LinType, TypeError> {
    check_lin(sig, ctx, t, mode, LinFamily::Ecbv)
}

pub fn check_cps(sig: &Signature, ctx: &LinContext, t: &Term, mode: LinMode) -> Result<LinType, TypeError> {
    check_lin(sig, ctx, t, mode, LinFamily::Cps)
}

pub fn check_lin(
    sig: &Signature,
    ctx: &LinContext,
    t: &Term,
    mode: LinMode,
    family: LinFamily,
) -> Result<LinType, TypeError> {
    let mut c = LinChecker { sig, family, linear_scope: Vec::new() };
    let mut g = ctx.gamma.clone();
    for (_, ty) in &ctx.gamma {
        c.check_vtype(ty)?;
    }
    match (mode, &ctx.delta) {
        (LinMode::Value, None) => Ok(LinType::Val(c.val(&mut g, t)?)),
        (LinMode::Computation, Some((z, ct))) => {
            c.check_ctype(ct)?;
            c.linear_scope.push(z.clone());
            Ok(LinType::Comp(c.comp(&mut g, z, ct, t)?))
        }
        (LinMode::Value, Some(_)) => terr(TypeErrorKind::ModeMismatch, "value judgement with a linear context"),
        (LinMode::Computation, None) => {
            terr(TypeErrorKind::ModeMismatch, "computation judgement needs a linear variable")
        }
    }
}

struct LinChecker<'a> {
    sig: &'a Signature,
    family: LinFamily,
    /// Linear binders lexically in scope, current one last.
    linear_scope: Vec<Name>,
}

type Gamma = Vec<(Name, VType)>;

impl LinChecker<'_> {
    fn family_err<T>(&self, what: &str) -> Result<T, TypeError> {
        terr(TypeErrorKind::FamilyViolation, format!("{what} is not available in {:?}", self.family))
    }

    fn check_vtype(&self, t: &VType) -> Result<(), TypeError> {
        match t {
            VType::Base(_) | VType::Unit | VType::Empty => Ok(()),
            VType::Prod(a, b) | VType::Sum(a, b) => {
                self.check_vtype(a)?;
                self.check_vtype(b)
            }
            VType::Lolli(a, b) => {
                self.check_ctype(a)?;
                self.check_ctype(b)
            }
        }
    }

    fn check_ctype(&self, t: &CType) -> Result<(), TypeError> {
        match (t, self.family) {
            (CType::Const(_), _) => Ok(()),
            (CType::Tensor(a, c), LinFamily::Ecbv) | (CType::Power(a, c), LinFamily::Cps) => {
                self.check_vtype(a)?;
                self.check_ctype(c)
            }
            (CType::Zero, LinFamily::Ecbv) | (CType::One, LinFamily::Cps) => Ok(()),
            (CType::Plus(a, b), LinFamily::Ecbv) | (CType::With(a, b), LinFamily::Cps) => {
                self.check_ctype(a)?;
                self.check_ctype(b)
            }
            _ => terr(TypeErrorKind::Stratification, format!("computation type {t} is not a {:?} type", self.family)),
        }
    }

    fn under<T>(&mut self, g: &mut Gamma, x: &Name, ty: VType, f: impl FnOnce(&mut Self, &mut Gamma) -> T) -> T {
        g.push((x.clone(), ty));
        let r = f(self, g);
        g.pop();
        r
    }

    fn linear_under<T>(&mut self, z: &Name, f: impl FnOnce(&mut Self) -> T) -> T {
        self.linear_scope.push(z.clone());
        let r = f(self);
        self.linear_scope.pop();
        r
    }

    fn val(&mut self, g: &mut Gamma, t: &Term) -> Result<VType, TypeError> {
        use Term::*;
        match t {
            Var(x) => match g.iter().rev().find(|(y, _)| y == x) {
                Some((_, ty)) => Ok(ty.clone()),
                None => terr(TypeErrorKind::UnboundVariable, format!("unbound variable `{x}`")),
            },
            LVar(z) => {
                if self.linear_scope.contains(z) {
                    terr(TypeErrorKind::LinearityViolation, format!("linear variable `{z}` used in value position"))
                } else {
                    terr(TypeErrorKind::UnboundVariable, format!("unbound linear variable `{z}`"))
                }
            }
            Star => Ok(VType::Unit),
            Pair(a, b) => Ok(VType::prod(self.val(g, a)?, self.val(g, b)?)),
            Fst(a) | Snd(a) => match self.val(g, a)? {
                VType::Prod(l, r) => Ok(if matches!(t, Fst(_)) { *l } else { *r }),
                other => mismatch("projection", "a product", other),
            },
            LLam(z, ct, body) => {
                self.check_ctype(ct)?;
                let res = self.linear_under(z, |c| c.comp(g, z, ct, body))?;
                Ok(VType::lolli(ct.clone(), res))
            }
            Const(f, vs) => {
                let Some(ar) = self.sig.consts.get(f) else {
                    return terr(TypeErrorKind::UnknownConstant, format!("unknown term constant `{f}`"));
                };
                if ar.args.len() != vs.len() {
                    return terr(
                        TypeErrorKind::ArityMismatch,
                        format!("`{f}` expects {} argument(s), found {}", ar.args.len(), vs.len()),
                    );
                }
                for (v, a) in vs.iter().zip(&ar.args) {
                    let tv = self.val(g, v)?;
                    let want = first_order(a);
                    if tv != want {
                        return mismatch(&format!("argument of `{f}`"), want, tv);
                    }
                }
                Ok(first_order(&ar.result))
            }
            Inl(ty, v) | Inr(ty, v) => {
                self.check_vtype(ty)?;
                let VType::Sum(l, r) = ty else {
                    return terr(TypeErrorKind::AnnotationMismatch, format!("injection annotated with non-sum {ty}"));
                };
                let want = if matches!(t, Inl(..)) { l } else { r };
                let tv = self.val(g, v)?;
                if tv != **want {
                    return terr(
                        TypeErrorKind::AnnotationMismatch,
                        format!("injection into {ty} of a value of type {tv}"),
                    );
                }
                Ok(ty.clone())
            }
            Case(v, x1, w1, x2, w2) => {
                let VType::Sum(l, r) = self.val(g, v)? else {
                    return terr(TypeErrorKind::TypeMismatch, "case on a non-sum value");
                };
                let t1 = self.under(g, x1, *l, |c, g| c.val(g, w1))?;
                let t2 = self.under(g, x2, *r, |c, g| c.val(g, w2))?;
                if t1 != t2 {
                    return mismatch("case branches", t1, t2);
                }
                Ok(t1)
            }
            Absurd(ty, v) => {
                self.check_vtype(ty)?;
                match self.val(g, v)? {
                    VType::Empty => Ok(ty.clone()),
                    other => mismatch("absurd", "empty", other),
                }
            }
            Sacc(e) => {
                let ty = match self.family {
                    LinFamily::Ecbv => self.sig.sacc_type_ecbv(e),
                    LinFamily::Cps => self.sig.sacc_type_cps(e),
                };
                ty.ok_or_else(|| TypeError {
                    kind: TypeErrorKind::UnknownConstant,
                    msg: format!("unknown effect constant `{e}`"),
                })
            }
            _ => terr(TypeErrorKind::ModeMismatch, format!("computation `{t}` in value position")),
        }
    }

    /// Γ; z:ct ⊢ t : result. The linear variable `z` must be consumed exactly once.
    fn comp(&mut self, g: &mut Gamma, z: &Name, ct: &CType, t: &Term) -> Result<CType, TypeError> {
        if self.family == LinFamily::Ecbv {
            let n = t.linear_occurrences(z);
            if n != 1 {
                let how = if n == 0 { "discarded" } else { "used more than once" };
                return terr(TypeErrorKind::LinearityViolation, format!("linear variable `{z}` is {how}"));
            }
        }
        self.comp_inner(g, z, ct, t)
    }

    fn comp_inner(&mut self, g: &mut Gamma, z: &Name, ct: &CType, t: &Term) -> Result<CType, TypeError> {
        use Term::*;
        match t {
            LVar(w) => {
                if w == z {
                    Ok(ct.clone())
                } else if self.linear_scope.contains(w) {
                    terr(
                        TypeErrorKind::LinearityViolation,
                        format!("linear variable `{w}` is no longer available (already consumed or out of scope)"),
                    )
                } else {
                    terr(TypeErrorKind::UnboundVariable, format!("unbound linear variable `{w}`"))
                }
            }
            LApp(f, a) => {
                let tf = self.val(g, f).map_err(|e| self.value_position(e, z, f))?;
                let VType::Lolli(dom, cod) = tf else {
                    return terr(TypeErrorKind::TypeMismatch, format!("linear application of non-function of type {tf}"));
                };
                let ta = self.comp(g, z, ct, a)?;
                if ta != *dom {
                    return mismatch("linear argument", dom, ta);
                }
                Ok(*cod)
            }
            Tens(v, a) => {
                if self.family != LinFamily::Ecbv {
                    return self.family_err("tens");
                }
                let tv = self.val(g, v).map_err(|e| self.value_position(e, z, v))?;
                let ta = self.comp(g, z, ct, a)?;
                Ok(CType::tensor(tv, ta))
            }
            LetTens(x, w, a, u) => {
                if self.family != LinFamily::Ecbv {
                    return self.family_err("lettens");
                }
                let CType::Tensor(va, cb) = self.comp(g, z, ct, a)? else {
                    return terr(TypeErrorKind::TypeMismatch, "lettens on a non-tensor");
                };
                self.under(g, x, *va, |c, g| c.linear_under(w, |c| c.comp(g, w, &cb, u)))
            }
            OInl(ty, a) | OInr(ty, a) => {
                if self.family != LinFamily::Ecbv {
                    return self.family_err("computation injection");
                }
                self.check_ctype(ty)?;
                let CType::Plus(l, r) = ty else {
                    return terr(TypeErrorKind::AnnotationMismatch, format!("injection annotated with non-sum {ty}"));
                };
                let want = if matches!(t, OInl(..)) { l } else { r };
                let ta = self.comp(g, z, ct, a)?;
                if ta != **want {
                    return terr(TypeErrorKind::AnnotationMismatch, format!("injection into {ty} of {ta}"));
                }
                Ok(ty.clone())
            }
            OCase(a, z1, u1, z2, u2) => {
                if self.family != LinFamily::Ecbv {
                    return self.family_err("ocase");
                }
                let CType::Plus(l, r) = self.comp(g, z, ct, a)? else {
                    return terr(TypeErrorKind::TypeMismatch, "ocase on a non-sum computation");
                };
                let t1 = self.linear_under(z1, |c| c.comp(g, z1, &l, u1))?;
                let t2 = self.linear_under(z2, |c| c.comp(g, z2, &r, u2))?;
                if t1 != t2 {
                    return mismatch("ocase branches", t1, t2);
                }
                Ok(t1)
            }
            OAbsurd(ty, a) => {
                if self.family != LinFamily::Ecbv {
                    return self.family_err("oabsurd");
                }
                self.check_ctype(ty)?;
                match self.comp(g, z, ct, a)? {
                    CType::Zero => Ok(ty.clone()),
                    other => mismatch("oabsurd", "ozero", other),
                }
            }
            PLam(x, ty, body) => {
                if self.family != LinFamily::Cps {
                    return self.family_err("plam");
                }
                self.check_vtype(ty)?;
                let tb = self.under(g, x, ty.clone(), |c, g| c.comp(g, z, ct, body))?;
                Ok(CType::power(ty.clone(), tb))
            }
            PApp(a, v) => {
                if self.family != LinFamily::Cps {
                    return self.family_err("papp");
                }
                let CType::Power(dom, cod) = self.comp(g, z, ct, a)? else {
                    return terr(TypeErrorKind::TypeMismatch, "papp of a non-power computation");
                };
                let tv = self.val(g, v).map_err(|e| self.value_position(e, z, v))?;
                if tv != *dom {
                    return mismatch("power argument", dom, tv);
                }
                Ok(*cod)
            }
            OPair(a, b) => {
                if self.family != LinFamily::Cps {
                    return self.family_err("opair");
                }
                let ta = self.comp(g, z, ct, a)?;
                let tb = self.comp(g, z, ct, b)?;
                Ok(CType::with(ta, tb))
            }
            OFst(a) | OSnd(a) => {
                if self.family != LinFamily::Cps {
                    return self.family_err("computation projection");
                }
                match self.comp(g, z, ct, a)? {
                    CType::With(l, r) => Ok(if matches!(t, OFst(_)) { *l } else { *r }),
                    other => mismatch("computation projection", "an additive product", other),
                }
            }
            OUnit => {
                if self.family != LinFamily::Cps {
                    return self.family_err("ounit");
                }
                Ok(CType::One)
            }
            _ => {
                if t.linear_occurrences(z) == 0 {
                    terr(
                        TypeErrorKind::LinearityViolation,
                        format!("linear variable `{z}` is discarded by value term `{t}`"),
                    )
                } else {
                    terr(TypeErrorKind::ModeMismatch, format!("value `{t}` in computation position"))
                }
            }
        }
    }

    /// A value-position error caused by the current linear variable is
    /// reported as a linearity violation.
    fn value_position(&self, e: TypeError, z: &Name, v: &Term) -> TypeError {
        if e.kind == TypeErrorKind::UnboundVariable && v.linear_occurrences(z) > 0 {
            TypeError {
                kind: TypeErrorKind::LinearityViolation,
                msg: format!("linear variable `{z}` used in value position"),
            }
        } else {
            e
        }
    }
}

/// Convenience: type of a closed FGCBV value or producer.
pub fn type_of_fg(sig: &Signature, t: &FgTerm) -> Result<FgType, TypeError> {
    let mode = if t.is_producer_form() { FgMode::Producer } else { FgMode::Value };
    check_fg(sig, &FgContext::new(), t, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{parse_fg_term, parse_term, parse_term_with};

    fn ecbv_val(src: &str) -> Result<LinType, TypeError> {
        check_ecbv(&Signature::bit_store(), &LinContext::new(), &parse_term(src).unwrap(), LinMode::Value)
    }

    #[test]
    fn fg_lambda() {
        let t = parse_fg_term("(lam (x unit) (return x))").unwrap();
        let ty = check_fg(&Signature::empty(), &FgContext::new(), &t, FgMode::Value).unwrap();
        assert_eq!(ty, FgType::parr(FgType::Unit, FgType::Unit));
    }

    #[test]
    fn fg_global_store_write() {
        let t = parse_fg_term("(geff write x)").unwrap();
        let ctx = FgContext::new().with("x", FgType::base("val"));
        assert_eq!(check_fg(&Signature::global_store(), &ctx, &t, FgMode::Producer).unwrap(), FgType::Unit);
    }

    #[test]
    fn fg_errors() {
        let sig = Signature::bit_store();
        let t = parse_fg_term("(app star star)").unwrap();
        assert_eq!(check_fg(&sig, &FgContext::new(), &t, FgMode::Producer).unwrap_err().kind, TypeErrorKind::TypeMismatch);
        let t = parse_fg_term("(return star)").unwrap();
        assert_eq!(check_fg(&sig, &FgContext::new(), &t, FgMode::Value).unwrap_err().kind, TypeErrorKind::ModeMismatch);
        let t = parse_fg_term("(return y)").unwrap();
        assert_eq!(
            check_fg(&sig, &FgContext::new(), &t, FgMode::Producer).unwrap_err().kind,
            TypeErrorKind::UnboundVariable
        );
        let t = parse_fg_term("(geff deref star star)").unwrap();
        assert_eq!(check_fg(&sig, &FgContext::new(), &t, FgMode::Producer).unwrap_err().kind, TypeErrorKind::ArityMismatch);
        let t = parse_fg_term("(geff deref)").unwrap();
        assert_eq!(check_fg(&sig, &FgContext::new(), &t, FgMode::Producer).unwrap(), FgType::bool());
        let t = parse_fg_term("(return (inl (sum unit unit) (pair star star)))").unwrap();
        assert_eq!(
            check_fg(&sig, &FgContext::new(), &t, FgMode::Producer).unwrap_err().kind,
            TypeErrorKind::AnnotationMismatch
        );
    }

    #[test]
    fn linear_identity() {
        assert_eq!(ecbv_val("(llam (z S) z)").unwrap(), LinType::Val(VType::lolli(CType::state(), CType::state())));
    }

    #[test]
    fn tensor_elim() {
        let t = parse_term_with("(lettens (x s z) (tens x s))", &["z"]).unwrap();
        let ty = CType::tensor(VType::Unit, CType::state());
        let ctx = LinContext::new().linear("z", ty.clone());
        assert_eq!(check_ecbv(&Signature::empty(), &ctx, &t, LinMode::Computation).unwrap(), LinType::Comp(ty));
        let ctx = LinContext::new().linear("z", CType::state());
        assert_eq!(
            check_ecbv(&Signature::empty(), &ctx, &t, LinMode::Computation).unwrap_err().kind,
            TypeErrorKind::TypeMismatch
        );
    }

    #[test]
    fn duplicated_linear_variable() {
        let e = ecbv_val("(llam (z S) (tens star (lettens (x w z) (lettens (y v z) v))))").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::LinearityViolation);
    }

    #[test]
    fn discarded_linear_variable() {
        let e = ecbv_val("(llam (z S) (lapp (llam (w S) w) (lapp (llam (y S) y) star)))").unwrap_err();
        assert!(matches!(e.kind, TypeErrorKind::LinearityViolation | TypeErrorKind::ModeMismatch));
        let e = ecbv_val("(llam (z S) (llam (w S) z))").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::ModeMismatch);
    }

    #[test]
    fn snapback_rejected() {
        let src = "(llam (z (tensor a S)) (lettens (x s z) (lettens (y s2 (lapp f (tens x s))) (tens y s))))";
        let ctx = LinContext::new().with(
            "f",
            VType::lolli(CType::tensor(VType::base("a"), CType::state()), CType::tensor(VType::base("a"), CType::state())),
        );
        let e = check_ecbv(&Signature::empty(), &ctx, &parse_term(src).unwrap(), LinMode::Value).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::LinearityViolation);
    }

    #[test]
    fn cps_rules() {
        let sig = Signature::empty();
        let t = parse_term("(llam (k R) k)").unwrap();
        assert_eq!(
            check_cps(&sig, &LinContext::new(), &t, LinMode::Value).unwrap(),
            LinType::Val(VType::lolli(CType::ret(), CType::ret()))
        );
        let t = parse_term_with("(plam (x unit) k)", &["k"]).unwrap();
        let ctx = LinContext::new().linear("k", CType::ret());
        assert_eq!(
            check_cps(&sig, &ctx, &t, LinMode::Computation).unwrap(),
            LinType::Comp(CType::power(VType::Unit, CType::ret()))
        );
        let t = parse_term_with("(papp k star)", &["k"]).unwrap();
        assert_eq!(check_cps(&sig, &ctx, &t, LinMode::Computation).unwrap_err().kind, TypeErrorKind::TypeMismatch);
        let t = parse_term_with("(tens star k)", &["k"]).unwrap();
        assert_eq!(check_cps(&sig, &ctx, &t, LinMode::Computation).unwrap_err().kind, TypeErrorKind::FamilyViolation);
    }

    #[test]
    fn sacc_types() {
        let sig = Signature::bit_store();
        let t = parse_term("(sacc deref)").unwrap();
        let want = VType::lolli(CType::tensor(VType::Unit, CType::state()), CType::tensor(VType::bool(), CType::state()));
        assert_eq!(check_ecbv(&sig, &LinContext::new(), &t, LinMode::Value).unwrap(), LinType::Val(want));
        let want = VType::lolli(CType::power(VType::bool(), CType::ret()), CType::power(VType::Unit, CType::ret()));
        assert_eq!(check_cps(&sig, &LinContext::new(), &t, LinMode::Value).unwrap(), LinType::Val(want));
    }

    #[test]
    fn stratification() {
        let t = parse_term("(llam (z (power unit R)) z)").unwrap();
        let e = check_ecbv(&Signature::empty(), &LinContext::new(), &t, LinMode::Value).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Stratification);
    }

    #[test]
    fn weakening() {
        let sig = Signature::bit_store();
        let t = parse_fg_term("(let (b (geff deref star)) (return (pair b x)))").unwrap();
        let ctx = FgContext::new().with("x", FgType::Unit);
        let ty = check_fg(&sig, &ctx, &t, FgMode::Producer).unwrap();
        let ctx2 = ctx.clone().with("fresh_y", FgType::bool());
        assert_eq!(check_fg(&sig, &ctx2, &t, FgMode::Producer).unwrap(), ty);
    }
}
