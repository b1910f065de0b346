//! Translations out of FGCBV: the linear-use state-passing translation into
//! ECBV, the CPS translation into the CPS variant, the dualization bijection
//! between ECBV and CPS, type reflection and readback from normal forms.

use std::collections::BTreeSet;

use crate::syntax::{fresh, name, CType, FgTerm, FgType, Name, Term, VType};
use crate::typecheck::{
    check_cps, check_ecbv, check_fg, FgContext, FgMode, LinContext, LinMode, LinType, Signature, TypeError,
};

/// Names of the state and return constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationEnv {
    pub state: Name,
    pub ret: Name,
}

impl Default for TranslationEnv {
    fn default() -> Self {
        TranslationEnv { state: name("S"), ret: name("R") }
    }
}

impl TranslationEnv {
    fn s(&self) -> CType {
        CType::Const(self.state.clone())
    }
    fn r(&self) -> CType {
        CType::Const(self.ret.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("foreign computation constant `{0}`")]
    ForeignConstant(Name),
    #[error("not in the image fragment: {0}")]
    NotInImageFragment(String),
    #[error("readback incomplete: {0}")]
    ReadbackIncomplete(String),
}

/// A translated judgement: the output context, term and type.
#[derive(Clone, Debug)]
pub struct Translated {
    pub ctx: LinContext,
    pub term: Term,
    pub ty: LinType,
}

// ---------------------------------------------------------------- state-passing

pub fn sps_type(env: &TranslationEnv, t: &FgType) -> VType {
    match t {
        FgType::Base(n) => VType::Base(n.clone()),
        FgType::Unit => VType::Unit,
        FgType::Empty => VType::Empty,
        FgType::Prod(a, b) => VType::prod(sps_type(env, a), sps_type(env, b)),
        FgType::Sum(a, b) => VType::sum(sps_type(env, a), sps_type(env, b)),
        FgType::Parr(a, b) => {
            VType::lolli(CType::tensor(sps_type(env, a), env.s()), CType::tensor(sps_type(env, b), env.s()))
        }
    }
}

pub fn sps_ctx(env: &TranslationEnv, ctx: &FgContext) -> LinContext {
    LinContext {
        gamma: ctx.gamma.iter().map(|(x, t)| (x.clone(), sps_type(env, t))).collect(),
        delta: None,
    }
}

/// The tuple `⟨V₁,…,Vₘ⟩` of generic-effect arguments.
pub fn tuple_term(vs: &[Term]) -> Term {
    match vs {
        [] => Term::Star,
        [v] => v.clone(),
        [v, rest @ ..] => Term::pair(v.clone(), tuple_term(rest)),
    }
}

pub fn sps_value(env: &TranslationEnv, v: &FgTerm) -> Term {
    use FgTerm::*;
    let b = |t: &FgTerm| Box::new(sps_value(env, t));
    match v {
        Var(x) => Term::Var(x.clone()),
        Star => Term::Star,
        Pair(a, c) => Term::Pair(b(a), b(c)),
        Fst(a) => Term::Fst(b(a)),
        Snd(a) => Term::Snd(b(a)),
        Lam(x, ty, body) => {
            let z = fresh("z");
            let s = fresh("s");
            Term::llam(
                z.clone(),
                CType::tensor(sps_type(env, ty), env.s()),
                Term::lettens(x.clone(), s.clone(), Term::LVar(z), sps_producer(env, body, &s)),
            )
        }
        Const(f, vs) => Term::Const(f.clone(), vs.iter().map(|t| sps_value(env, t)).collect()),
        Inl(ty, a) => Term::Inl(sps_type(env, ty), b(a)),
        Inr(ty, a) => Term::Inr(sps_type(env, ty), b(a)),
        Absurd(ty, a) => Term::Absurd(sps_type(env, ty), b(a)),
        Case(a, x1, w1, x2, w2) => Term::Case(b(a), x1.clone(), b(w1), x2.clone(), b(w2)),
        Return(_) | Let(..) | App(..) | Geff(..) => {
            unreachable!("sps_value on a producer; callers typecheck first")
        }
    }
}

/// `⟦M⟧ₛ` for a producer `M` and state variable `s`.
pub fn sps_producer(env: &TranslationEnv, m: &FgTerm, s: &Name) -> Term {
    use FgTerm::*;
    match m {
        Return(v) => Term::tens(sps_value(env, v), Term::LVar(s.clone())),
        Let(x, m1, n) => {
            let s2 = fresh("s");
            Term::lettens(x.clone(), s2.clone(), sps_producer(env, m1, s), sps_producer(env, n, &s2))
        }
        App(v, w) => Term::lapp(sps_value(env, v), Term::tens(sps_value(env, w), Term::LVar(s.clone()))),
        Geff(e, vs) => {
            let args: Vec<Term> = vs.iter().map(|v| sps_value(env, v)).collect();
            Term::lapp(Term::Sacc(e.clone()), Term::tens(tuple_term(&args), Term::LVar(s.clone())))
        }
        _ => unreachable!("sps_producer on a value; callers typecheck first"),
    }
}

/// State-passing translation of a judgement. Producers land in
/// `⟦Γ⟧; s:S ⊢ ⟦M⟧ : ⟦σ⟧ ⊗ S`.
pub fn sps_term(
    env: &TranslationEnv,
    sig: &Signature,
    ctx: &FgContext,
    t: &FgTerm,
    mode: FgMode,
) -> Result<Translated, TranslateError> {
    let ty = check_fg(sig, ctx, t, mode)?;
    let lctx = sps_ctx(env, ctx);
    Ok(match mode {
        FgMode::Value => Translated { ctx: lctx, term: sps_value(env, t), ty: LinType::Val(sps_type(env, &ty)) },
        FgMode::Producer => {
            let s = fresh("s");
            Translated {
                ctx: lctx.linear_name(s.clone(), env.s()),
                term: sps_producer(env, t, &s),
                ty: LinType::Comp(CType::tensor(sps_type(env, &ty), env.s())),
            }
        }
    })
}

// ---------------------------------------------------------------- CPS

pub fn cps_type(env: &TranslationEnv, t: &FgType) -> VType {
    match t {
        FgType::Base(n) => VType::Base(n.clone()),
        FgType::Unit => VType::Unit,
        FgType::Empty => VType::Empty,
        FgType::Prod(a, b) => VType::prod(cps_type(env, a), cps_type(env, b)),
        FgType::Sum(a, b) => VType::sum(cps_type(env, a), cps_type(env, b)),
        FgType::Parr(a, b) => {
            VType::lolli(CType::power(cps_type(env, b), env.r()), CType::power(cps_type(env, a), env.r()))
        }
    }
}

struct Cps<'a> {
    env: &'a TranslationEnv,
    sig: &'a Signature,
    gamma: Vec<(Name, FgType)>,
}

impl Cps<'_> {
    fn ptype(&self, m: &FgTerm) -> Result<FgType, TypeError> {
        let ctx = FgContext { gamma: self.gamma.clone(), delta: None };
        check_fg(self.sig, &ctx, m, FgMode::Producer)
    }

    fn under<T>(&mut self, x: &Name, ty: FgType, f: impl FnOnce(&mut Self) -> T) -> T {
        self.gamma.push((x.clone(), ty));
        let r = f(self);
        self.gamma.pop();
        r
    }

    fn vtype(&self, v: &FgTerm) -> Result<FgType, TypeError> {
        let ctx = FgContext { gamma: self.gamma.clone(), delta: None };
        check_fg(self.sig, &ctx, v, FgMode::Value)
    }

    fn value(&mut self, v: &FgTerm) -> Result<Term, TypeError> {
        use FgTerm::*;
        Ok(match v {
            Var(x) => Term::Var(x.clone()),
            Star => Term::Star,
            Pair(a, c) => Term::pair(self.value(a)?, self.value(c)?),
            Fst(a) => Term::fst(self.value(a)?),
            Snd(a) => Term::snd(self.value(a)?),
            Lam(x, ty, body) => {
                let tau = self.under(x, ty.clone(), |c| c.ptype(body))?;
                let k = fresh("k");
                let inner = self.under(x, ty.clone(), |c| c.producer(body, &k))?;
                Term::llam(
                    k,
                    CType::power(cps_type(self.env, &tau), self.env.r()),
                    Term::plam(x.clone(), cps_type(self.env, ty), inner),
                )
            }
            Const(f, vs) => Term::Const(f.clone(), vs.iter().map(|t| self.value(t)).collect::<Result<_, _>>()?),
            Inl(ty, a) => Term::inl(cps_type(self.env, ty), self.value(a)?),
            Inr(ty, a) => Term::inr(cps_type(self.env, ty), self.value(a)?),
            Absurd(ty, a) => Term::absurd(cps_type(self.env, ty), self.value(a)?),
            Case(a, x1, w1, x2, w2) => {
                let FgType::Sum(l, r) = self.vtype(a)? else { unreachable!("typechecked") };
                let sa = self.value(a)?;
                let s1 = self.under(x1, *l, |c| c.value(w1))?;
                let s2 = self.under(x2, *r, |c| c.value(w2))?;
                Term::case(sa, x1.clone(), s1, x2.clone(), s2)
            }
            _ => unreachable!("typechecked"),
        })
    }

    fn producer(&mut self, m: &FgTerm, k: &Name) -> Result<Term, TypeError> {
        use FgTerm::*;
        Ok(match m {
            Return(v) => Term::papp(Term::LVar(k.clone()), self.value(v)?),
            Let(x, m1, n) => {
                let sigma = self.ptype(m1)?;
                let k2 = fresh("k");
                let first = self.producer(m1, &k2)?;
                let rest = self.under(x, sigma.clone(), |c| c.producer(n, k))?;
                Term::lapp(
                    Term::llam(k2, CType::power(cps_type(self.env, &sigma), self.env.r()), first),
                    Term::plam(x.clone(), cps_type(self.env, &sigma), rest),
                )
            }
            App(v, w) => Term::papp(Term::lapp(self.value(v)?, Term::LVar(k.clone())), self.value(w)?),
            Geff(e, vs) => {
                let args = vs.iter().map(|v| self.value(v)).collect::<Result<Vec<_>, _>>()?;
                Term::papp(Term::lapp(Term::Sacc(e.clone()), Term::LVar(k.clone())), tuple_term(&args))
            }
            _ => unreachable!("typechecked"),
        })
    }
}

pub fn cps_ctx(env: &TranslationEnv, ctx: &FgContext) -> LinContext {
    LinContext {
        gamma: ctx.gamma.iter().map(|(x, t)| (x.clone(), cps_type(env, t))).collect(),
        delta: None,
    }
}

/// CPS translation of a judgement. Producers land in
/// `⟦Γ⟧; k:⟦σ⟧→R ⊢ ⟦M⟧ₖ : R`.
pub fn cps_term(
    env: &TranslationEnv,
    sig: &Signature,
    ctx: &FgContext,
    t: &FgTerm,
    mode: FgMode,
) -> Result<Translated, TranslateError> {
    let ty = check_fg(sig, ctx, t, mode)?;
    let mut c = Cps { env, sig, gamma: ctx.gamma.clone() };
    let lctx = cps_ctx(env, ctx);
    Ok(match mode {
        FgMode::Value => Translated { ctx: lctx, term: c.value(t)?, ty: LinType::Val(cps_type(env, &ty)) },
        FgMode::Producer => {
            let k = fresh("k");
            let term = c.producer(t, &k)?;
            Translated {
                ctx: lctx.linear_name(k, CType::power(cps_type(env, &ty), env.r())),
                term,
                ty: LinType::Comp(env.r()),
            }
        }
    })
}

// ---------------------------------------------------------------- dualization

pub fn dualize_vtype(env: &TranslationEnv, t: &VType) -> Result<VType, TranslateError> {
    Ok(match t {
        VType::Base(_) | VType::Unit | VType::Empty => t.clone(),
        VType::Prod(a, b) => VType::prod(dualize_vtype(env, a)?, dualize_vtype(env, b)?),
        VType::Sum(a, b) => VType::sum(dualize_vtype(env, a)?, dualize_vtype(env, b)?),
        VType::Lolli(a, b) => VType::lolli(dualize_ctype(env, b)?, dualize_ctype(env, a)?),
    })
}

pub fn dualize_ctype(env: &TranslationEnv, t: &CType) -> Result<CType, TranslateError> {
    Ok(match t {
        CType::Const(n) if *n == env.state => env.r(),
        CType::Const(n) => return Err(TranslateError::ForeignConstant(n.clone())),
        CType::Tensor(a, c) => CType::power(dualize_vtype(env, a)?, dualize_ctype(env, c)?),
        CType::Zero => CType::One,
        CType::Plus(a, b) => CType::with(dualize_ctype(env, a)?, dualize_ctype(env, b)?),
        CType::Power(..) | CType::One | CType::With(..) => {
            return Err(TranslateError::NotInImageFragment(format!("{t} is not an ECBV computation type")))
        }
    })
}

pub fn undualize_vtype(env: &TranslationEnv, t: &VType) -> Result<VType, TranslateError> {
    Ok(match t {
        VType::Base(_) | VType::Unit | VType::Empty => t.clone(),
        VType::Prod(a, b) => VType::prod(undualize_vtype(env, a)?, undualize_vtype(env, b)?),
        VType::Sum(a, b) => VType::sum(undualize_vtype(env, a)?, undualize_vtype(env, b)?),
        VType::Lolli(a, b) => VType::lolli(undualize_ctype(env, b)?, undualize_ctype(env, a)?),
    })
}

pub fn undualize_ctype(env: &TranslationEnv, t: &CType) -> Result<CType, TranslateError> {
    Ok(match t {
        CType::Const(n) if *n == env.ret => env.s(),
        CType::Const(n) => return Err(TranslateError::ForeignConstant(n.clone())),
        CType::Power(a, c) => CType::tensor(undualize_vtype(env, a)?, undualize_ctype(env, c)?),
        CType::One => CType::Zero,
        CType::With(a, b) => CType::plus(undualize_ctype(env, a)?, undualize_ctype(env, b)?),
        CType::Tensor(..) | CType::Zero | CType::Plus(..) => {
            return Err(TranslateError::NotInImageFragment(format!("{t} is not a CPS computation type")))
        }
    })
}

/// Which way a [`Dual`] walker maps.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// ECBV to CPS.
    Forward,
    /// CPS to ECBV.
    Backward,
}

struct Dual<'a> {
    env: &'a TranslationEnv,
    sig: &'a Signature,
    dir: Dir,
    gamma: Vec<(Name, VType)>,
}

impl Dual<'_> {
    fn vty(&self, t: &VType) -> Result<VType, TranslateError> {
        match self.dir {
            Dir::Forward => dualize_vtype(self.env, t),
            Dir::Backward => undualize_vtype(self.env, t),
        }
    }

    fn cty(&self, t: &CType) -> Result<CType, TranslateError> {
        match self.dir {
            Dir::Forward => dualize_ctype(self.env, t),
            Dir::Backward => undualize_ctype(self.env, t),
        }
    }

    /// Type of a source computation under the linear binding `(z, c)`.
    fn comp_type(&self, z: &Name, c: &CType, t: &Term) -> Result<CType, TranslateError> {
        let ctx = LinContext { gamma: self.gamma.clone(), delta: Some((z.clone(), c.clone())) };
        let r = match self.dir {
            Dir::Forward => check_ecbv(self.sig, &ctx, t, LinMode::Computation)?,
            Dir::Backward => check_cps(self.sig, &ctx, t, LinMode::Computation)?,
        };
        match r {
            LinType::Comp(c) => Ok(c),
            LinType::Val(_) => unreachable!(),
        }
    }

    fn val_type(&self, v: &Term) -> Result<VType, TranslateError> {
        let ctx = LinContext { gamma: self.gamma.clone(), delta: None };
        let r = match self.dir {
            Dir::Forward => check_ecbv(self.sig, &ctx, v, LinMode::Value)?,
            Dir::Backward => check_cps(self.sig, &ctx, v, LinMode::Value)?,
        };
        match r {
            LinType::Val(t) => Ok(t),
            LinType::Comp(_) => unreachable!(),
        }
    }

    fn under<T>(&mut self, x: &Name, ty: VType, f: impl FnOnce(&mut Self) -> T) -> T {
        self.gamma.push((x.clone(), ty));
        let r = f(self);
        self.gamma.pop();
        r
    }

    fn value(&mut self, v: &Term) -> Result<Term, TranslateError> {
        use Term::*;
        Ok(match v {
            Var(_) | Star | Sacc(_) => v.clone(),
            Pair(a, b) => Term::pair(self.value(a)?, self.value(b)?),
            Fst(a) => Term::fst(self.value(a)?),
            Snd(a) => Term::snd(self.value(a)?),
            Const(f, vs) => Term::Const(f.clone(), vs.iter().map(|t| self.value(t)).collect::<Result<_, _>>()?),
            Inl(ty, a) => Term::inl(self.vty(ty)?, self.value(a)?),
            Inr(ty, a) => Term::inr(self.vty(ty)?, self.value(a)?),
            Absurd(ty, a) => Term::absurd(self.vty(ty)?, self.value(a)?),
            Case(a, x1, w1, x2, w2) => {
                let VType::Sum(l, r) = self.val_type(a)? else { unreachable!("typechecked") };
                let sa = self.value(a)?;
                let d1 = self.under(x1, *l, |c| c.value(w1))?;
                let d2 = self.under(x2, *r, |c| c.value(w2))?;
                Term::case(sa, x1.clone(), d1, x2.clone(), d2)
            }
            LLam(z, a, body) => {
                let b = self.comp_type(z, a, body)?;
                let k = fresh(if self.dir == Dir::Forward { "k" } else { "z" });
                let kty = self.cty(&b)?;
                let out = self.comp(z, a, body, Term::LVar(k.clone()))?;
                Term::llam(k, kty, out)
            }
            _ => unreachable!("typechecked value"),
        })
    }

    fn comp(&mut self, z: &Name, zty: &CType, t: &Term, acc: Term) -> Result<Term, TranslateError> {
        match self.dir {
            Dir::Forward => self.forward(z, zty, t, acc),
            Dir::Backward => self.backward(z, zty, t, acc),
        }
    }

    /// `D(t, acc)`: `t` is an ECBV computation with linear variable `z`.
    fn forward(&mut self, z: &Name, zty: &CType, t: &Term, acc: Term) -> Result<Term, TranslateError> {
        use Term::*;
        match t {
            LVar(_) => Ok(acc),
            LApp(f, a) => {
                let f2 = self.value(f)?;
                self.forward(z, zty, a, Term::lapp(f2, acc))
            }
            Tens(v, a) => {
                let v2 = self.value(v)?;
                self.forward(z, zty, a, Term::papp(acc, v2))
            }
            LetTens(x, w, r, u) => {
                let CType::Tensor(xa, wc) = self.comp_type(z, zty, r)? else { unreachable!("typechecked") };
                let xd = self.vty(&xa)?;
                let body = self.under(x, (*xa).clone(), |c| c.forward(w, &wc, u, acc))?;
                let lam = Term::plam(x.clone(), xd.clone(), body);
                if matches!(&**r, LVar(_)) {
                    Ok(lam)
                } else {
                    let k2 = fresh("k");
                    let kty = CType::power(xd, self.cty(&wc)?);
                    let inner = self.forward(z, zty, r, Term::LVar(k2.clone()))?;
                    Ok(Term::lapp(Term::llam(k2, kty, inner), lam))
                }
            }
            OInl(_, a) => self.forward(z, zty, a, Term::ofst(acc)),
            OInr(_, a) => self.forward(z, zty, a, Term::osnd(acc)),
            OCase(a, z1, u1, z2, u2) => {
                let CType::Plus(l, r) = self.comp_type(z, zty, a)? else { unreachable!("typechecked") };
                let d1 = self.forward(z1, &l, u1, acc.clone())?;
                let d2 = self.forward(z2, &r, u2, acc)?;
                self.forward(z, zty, a, Term::opair(d1, d2))
            }
            OAbsurd(_, a) => self.forward(z, zty, a, Term::OUnit),
            _ => Err(TranslateError::NotInImageFragment(format!("`{t}` is not an ECBV computation"))),
        }
    }

    /// `E(p, acc)`: `p` is a CPS computation with linear variable `z`.
    fn backward(&mut self, z: &Name, zty: &CType, p: &Term, acc: Term) -> Result<Term, TranslateError> {
        use Term::*;
        match p {
            LVar(_) => Ok(acc),
            PLam(x, a, q) => {
                let w = fresh("z");
                let body = self.under(x, a.clone(), |cx| cx.backward(z, zty, q, Term::LVar(w.clone())))?;
                Ok(Term::lettens(x.clone(), w, acc, body))
            }
            LApp(f, a) => {
                if let (LLam(k2, kty, inner), PLam(x, xa, q)) = (&**f, &**a) {
                    let first = self.backward(k2, kty, inner, acc)?;
                    let w = fresh("z");
                    let body = self.under(x, xa.clone(), |cx| cx.backward(z, zty, q, Term::LVar(w.clone())))?;
                    return Ok(Term::lettens(x.clone(), w, first, body));
                }
                let f2 = self.value(f)?;
                self.backward(z, zty, a, Term::lapp(f2, acc))
            }
            PApp(a, v) => {
                let v2 = self.value(v)?;
                self.backward(z, zty, a, Term::tens(v2, acc))
            }
            OFst(a) | OSnd(a) => {
                let ty = self.comp_type(z, zty, a)?;
                let plus = self.cty(&ty)?;
                let acc2 = if matches!(p, OFst(_)) { Term::oinl(plus, acc) } else { Term::oinr(plus, acc) };
                self.backward(z, zty, a, acc2)
            }
            OPair(a, b) => {
                let z1 = fresh("z");
                let z2 = fresh("z");
                let e1 = self.backward(z, zty, a, Term::LVar(z1.clone()))?;
                let e2 = self.backward(z, zty, b, Term::LVar(z2.clone()))?;
                Ok(Term::ocase(acc, z1, e1, z2, e2))
            }
            OUnit => {
                let target = self.cty(zty)?;
                Ok(Term::oabsurd(target, acc))
            }
            _ => Err(TranslateError::NotInImageFragment(format!("`{p}` is not a CPS computation"))),
        }
    }
}

/// Result of dualizing a judgement.
#[derive(Clone, Debug)]
pub struct Dualized {
    pub ctx: LinContext,
    pub term: Term,
    pub ty: LinType,
}

fn dual_run(
    env: &TranslationEnv,
    sig: &Signature,
    ctx: &LinContext,
    t: &Term,
    mode: LinMode,
    dir: Dir,
) -> Result<Dualized, TranslateError> {
    let ty = match dir {
        Dir::Forward => check_ecbv(sig, ctx, t, mode)?,
        Dir::Backward => check_cps(sig, ctx, t, mode)?,
    };
    let mut d = Dual { env, sig, dir, gamma: ctx.gamma.clone() };
    let gamma = ctx.gamma.iter().map(|(x, a)| Ok((x.clone(), d.vty(a)?))).collect::<Result<Vec<_>, TranslateError>>()?;
    match (&ctx.delta, ty) {
        (None, LinType::Val(a)) => Ok(Dualized {
            ctx: LinContext { gamma, delta: None },
            term: d.value(t)?,
            ty: LinType::Val(d.vty(&a)?),
        }),
        (Some((z, c)), LinType::Comp(b)) => {
            let k = fresh(if dir == Dir::Forward { "k" } else { "z" });
            let term = d.comp(z, c, t, Term::LVar(k.clone()))?;
            Ok(Dualized {
                ctx: LinContext { gamma, delta: Some((k, d.cty(&b)?)) },
                term,
                ty: LinType::Comp(d.cty(c)?),
            })
        }
        _ => unreachable!("checker enforces the mode"),
    }
}

/// The bijection `(−)°` from ECBV judgements to CPS judgements.
/// `Γ; z:A ⊢ t : B` becomes `Γ°; k:B° ⊢ t° : A°`.
pub fn dualize_term(
    env: &TranslationEnv,
    sig: &Signature,
    ctx: &LinContext,
    t: &Term,
    mode: LinMode,
) -> Result<Dualized, TranslateError> {
    dual_run(env, sig, ctx, t, mode, Dir::Forward)
}

/// Inverse of [`dualize_term`].
pub fn undualize_term(
    env: &TranslationEnv,
    sig: &Signature,
    ctx: &LinContext,
    t: &Term,
    mode: LinMode,
) -> Result<Dualized, TranslateError> {
    dual_run(env, sig, ctx, t, mode, Dir::Backward)
}

// ---------------------------------------------------------------- reflection

/// An FGCBV type with an isomorphism `⟦σ⟧ ≅ A`, given as a pair of terms
/// over one variable each.
#[derive(Clone, Debug)]
pub struct Reflection {
    pub sigma: FgType,
    /// `x : A ⊢ to : ⟦σ⟧`
    pub to: (Name, Term),
    /// `y : ⟦σ⟧ ⊢ from : A`
    pub from: (Name, Term),
}

/// Computation-level reflection: `z:C ⊢ to : ⟦σ⟧⊗S` and `w:⟦σ⟧⊗S ⊢ from : C`.
struct CompReflection {
    sigma: FgType,
    to: (Name, Term),
    from: (Name, Term),
}

fn ident_witness(hint: &str, lin: bool) -> (Name, Term) {
    let x = fresh(hint);
    let t = if lin { Term::LVar(x.clone()) } else { Term::Var(x.clone()) };
    (x, t)
}

/// Apply an open witness to an argument.
fn plug((x, t): &(Name, Term), arg: &Term, lin: bool) -> Term {
    let kind = if lin { crate::syntax::VarKind::Linear } else { crate::syntax::VarKind::Value };
    t.freshen().subst(x, kind, arg)
}

pub fn reflect_type(env: &TranslationEnv, a: &VType) -> Result<Reflection, TranslateError> {
    let mut cs = BTreeSet::new();
    a.comp_consts(&mut cs);
    if let Some(c) = cs.into_iter().find(|c| *c != env.state) {
        return Err(TranslateError::ForeignConstant(c));
    }
    reflect_v(env, a)
}

fn reflect_v(env: &TranslationEnv, a: &VType) -> Result<Reflection, TranslateError> {
    let id = |sigma: FgType| Reflection { sigma, to: ident_witness("x", false), from: ident_witness("y", false) };
    Ok(match a {
        VType::Base(n) => id(FgType::Base(n.clone())),
        VType::Unit => id(FgType::Unit),
        VType::Empty => id(FgType::Empty),
        VType::Prod(l, r) => {
            let (rl, rr) = (reflect_v(env, l)?, reflect_v(env, r)?);
            let sigma = FgType::prod(rl.sigma.clone(), rr.sigma.clone());
            if sps_type(env, &sigma) == *a {
                return Ok(id(sigma));
            }
            let x = fresh("x");
            let y = fresh("y");
            let xv = Term::Var(x.clone());
            let yv = Term::Var(y.clone());
            Reflection {
                to: (
                    x,
                    Term::pair(plug(&rl.to, &Term::fst(xv.clone()), false), plug(&rr.to, &Term::snd(xv), false)),
                ),
                from: (
                    y,
                    Term::pair(plug(&rl.from, &Term::fst(yv.clone()), false), plug(&rr.from, &Term::snd(yv), false)),
                ),
                sigma,
            }
        }
        VType::Sum(l, r) => {
            let (rl, rr) = (reflect_v(env, l)?, reflect_v(env, r)?);
            let sigma = FgType::sum(rl.sigma.clone(), rr.sigma.clone());
            if sps_type(env, &sigma) == *a {
                return Ok(id(sigma));
            }
            let image = sps_type(env, &sigma);
            let x = fresh("x");
            let y = fresh("y");
            let (a1, a2, b1, b2) = (fresh("a"), fresh("a"), fresh("b"), fresh("b"));
            Reflection {
                to: (
                    x.clone(),
                    Term::case(
                        Term::Var(x),
                        a1.clone(),
                        Term::inl(image.clone(), plug(&rl.to, &Term::Var(a1), false)),
                        a2.clone(),
                        Term::inr(image, plug(&rr.to, &Term::Var(a2), false)),
                    ),
                ),
                from: (
                    y.clone(),
                    Term::case(
                        Term::Var(y),
                        b1.clone(),
                        Term::inl(a.clone(), plug(&rl.from, &Term::Var(b1), false)),
                        b2.clone(),
                        Term::inr(a.clone(), plug(&rr.from, &Term::Var(b2), false)),
                    ),
                ),
                sigma,
            }
        }
        VType::Lolli(c, d) => {
            let (rc, rd) = (reflect_c(env, c)?, reflect_c(env, d)?);
            let sigma = FgType::parr(rc.sigma.clone(), rd.sigma.clone());
            if sps_type(env, &sigma) == *a {
                return Ok(id(sigma));
            }
            let image = sps_type(env, &sigma);
            let VType::Lolli(ic, _) = &image else { unreachable!() };
            let (f, g, w, z) = (fresh("f"), fresh("g"), fresh("w"), fresh("z"));
            Reflection {
                to: (
                    f.clone(),
                    Term::llam(
                        w.clone(),
                        (**ic).clone(),
                        plug(&rd.to, &Term::lapp(Term::Var(f), plug(&rc.from, &Term::LVar(w), true)), true),
                    ),
                ),
                from: (
                    g.clone(),
                    Term::llam(
                        z.clone(),
                        (**c).clone(),
                        plug(&rd.from, &Term::lapp(Term::Var(g), plug(&rc.to, &Term::LVar(z), true)), true),
                    ),
                ),
                sigma,
            }
        }
    })
}

fn reflect_c(env: &TranslationEnv, c: &CType) -> Result<CompReflection, TranslateError> {
    let s = env.s();
    Ok(match c {
        CType::Const(n) if *n == env.state => {
            let (z, w) = (fresh("z"), fresh("w"));
            let (x, s2) = (fresh("x"), fresh("s"));
            CompReflection {
                sigma: FgType::Unit,
                to: (z.clone(), Term::tens(Term::Star, Term::LVar(z))),
                from: (w.clone(), Term::lettens(x, s2.clone(), Term::LVar(w), Term::LVar(s2))),
            }
        }
        CType::Const(n) => return Err(TranslateError::ForeignConstant(n.clone())),
        CType::Tensor(a, rest) if **rest == s => {
            let ra = reflect_v(env, a)?;
            let (z, w) = (fresh("z"), fresh("w"));
            let (x, s1, y, s2) = (fresh("x"), fresh("s"), fresh("y"), fresh("s"));
            CompReflection {
                to: (
                    z.clone(),
                    Term::lettens(
                        x.clone(),
                        s1.clone(),
                        Term::LVar(z),
                        Term::tens(plug(&ra.to, &Term::Var(x), false), Term::LVar(s1)),
                    ),
                ),
                from: (
                    w.clone(),
                    Term::lettens(
                        y.clone(),
                        s2.clone(),
                        Term::LVar(w),
                        Term::tens(plug(&ra.from, &Term::Var(y), false), Term::LVar(s2)),
                    ),
                ),
                sigma: ra.sigma,
            }
        }
        CType::Tensor(a, rest) => {
            let ra = reflect_v(env, a)?;
            let rr = reflect_c(env, rest)?;
            let sigma = FgType::prod(ra.sigma.clone(), rr.sigma.clone());
            let (z, w) = (fresh("z"), fresh("w"));
            let (x, z1, y, s1) = (fresh("x"), fresh("z"), fresh("y"), fresh("s"));
            let (p, s2) = (fresh("p"), fresh("s"));
            let to = Term::lettens(
                x.clone(),
                z1.clone(),
                Term::LVar(z.clone()),
                Term::lettens(
                    y.clone(),
                    s1.clone(),
                    plug(&rr.to, &Term::LVar(z1), true),
                    Term::tens(Term::pair(plug(&ra.to, &Term::Var(x), false), Term::Var(y)), Term::LVar(s1)),
                ),
            );
            let from = Term::lettens(
                p.clone(),
                s2.clone(),
                Term::LVar(w.clone()),
                Term::tens(
                    plug(&ra.from, &Term::fst(Term::Var(p.clone())), false),
                    plug(&rr.from, &Term::tens(Term::snd(Term::Var(p)), Term::LVar(s2)), true),
                ),
            );
            CompReflection { sigma, to: (z, to), from: (w, from) }
        }
        CType::Zero => {
            let (z, w) = (fresh("z"), fresh("w"));
            let (p, s2) = (fresh("p"), fresh("s"));
            CompReflection {
                sigma: FgType::Empty,
                to: (z.clone(), Term::oabsurd(CType::tensor(VType::Empty, s.clone()), Term::LVar(z))),
                from: (
                    w.clone(),
                    Term::lettens(
                        p.clone(),
                        s2.clone(),
                        Term::LVar(w),
                        Term::lapp(Term::absurd(VType::lolli(s.clone(), CType::Zero), Term::Var(p)), Term::LVar(s2)),
                    ),
                ),
            }
        }
        CType::Plus(l, r) => {
            let (rl, rr) = (reflect_c(env, l)?, reflect_c(env, r)?);
            let sigma = FgType::sum(rl.sigma.clone(), rr.sigma.clone());
            let image = sps_type(env, &sigma);
            let (z, w, z1, z2) = (fresh("z"), fresh("w"), fresh("z"), fresh("z"));
            let (x1, t1, x2, t2) = (fresh("x"), fresh("s"), fresh("x"), fresh("s"));
            let to = Term::ocase(
                Term::LVar(z.clone()),
                z1.clone(),
                Term::lettens(
                    x1.clone(),
                    t1.clone(),
                    plug(&rl.to, &Term::LVar(z1), true),
                    Term::tens(Term::inl(image.clone(), Term::Var(x1)), Term::LVar(t1)),
                ),
                z2.clone(),
                Term::lettens(
                    x2.clone(),
                    t2.clone(),
                    plug(&rr.to, &Term::LVar(z2), true),
                    Term::tens(Term::inr(image, Term::Var(x2)), Term::LVar(t2)),
                ),
            );
            let (p, s2, b1, b2, u1, u2) = (fresh("p"), fresh("s"), fresh("b"), fresh("b"), fresh("u"), fresh("u"));
            let from = Term::lettens(
                p.clone(),
                s2.clone(),
                Term::LVar(w.clone()),
                Term::lapp(
                    Term::case(
                        Term::Var(p),
                        b1.clone(),
                        Term::llam(
                            u1.clone(),
                            s.clone(),
                            Term::oinl(c.clone(), plug(&rl.from, &Term::tens(Term::Var(b1), Term::LVar(u1)), true)),
                        ),
                        b2.clone(),
                        Term::llam(
                            u2.clone(),
                            s.clone(),
                            Term::oinr(c.clone(), plug(&rr.from, &Term::tens(Term::Var(b2), Term::LVar(u2)), true)),
                        ),
                    ),
                    Term::LVar(s2),
                ),
            );
            CompReflection { sigma, to: (z, to), from: (w, from) }
        }
        CType::Power(..) | CType::One | CType::With(..) => {
            return Err(TranslateError::NotInImageFragment(format!("{c} is not an ECBV computation type")))
        }
    })
}

// ---------------------------------------------------------------- readback

/// The inverse of [`sps_type`] on its image.
pub fn unsps_type(env: &TranslationEnv, a: &VType) -> Result<FgType, TranslateError> {
    Ok(match a {
        VType::Base(n) => FgType::Base(n.clone()),
        VType::Unit => FgType::Unit,
        VType::Empty => FgType::Empty,
        VType::Prod(l, r) => FgType::prod(unsps_type(env, l)?, unsps_type(env, r)?),
        VType::Sum(l, r) => FgType::sum(unsps_type(env, l)?, unsps_type(env, r)?),
        VType::Lolli(c, d) => match (&**c, &**d) {
            (CType::Tensor(x, s1), CType::Tensor(y, s2)) if **s1 == env.s() && **s2 == env.s() => {
                FgType::parr(unsps_type(env, x)?, unsps_type(env, y)?)
            }
            _ => {
                let mut cs = BTreeSet::new();
                a.comp_consts(&mut cs);
                if let Some(q) = cs.into_iter().find(|q| *q != env.state) {
                    return Err(TranslateError::NotInImageFragment(format!("computation constant `{q}`")));
                }
                return Err(TranslateError::ReadbackIncomplete(format!("type {a} is not a translated type")));
            }
        },
    })
}

/// Which judgement a readback target has.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadbackShape {
    Value,
    /// A producer whose state variable is the given linear variable.
    Producer(Name),
}

fn foreign_in_term(env: &TranslationEnv, t: &Term) -> Option<Name> {
    let mut cs = BTreeSet::new();
    collect_consts(t, &mut cs);
    cs.into_iter().find(|c| *c != env.state)
}

fn collect_consts(t: &Term, out: &mut BTreeSet<Name>) {
    match t {
        Term::LLam(_, c, _) | Term::OInl(c, _) | Term::OInr(c, _) | Term::OAbsurd(c, _) => c.comp_consts(out),
        Term::Inl(a, _) | Term::Inr(a, _) | Term::Absurd(a, _) | Term::PLam(_, a, _) => a.comp_consts(out),
        _ => {}
    }
    t.for_each_child(|c| collect_consts(c, out));
}

/// Read a normal form in the image of the state-passing translation back to
/// an FGCBV term.
pub fn untranslate(env: &TranslationEnv, t: &Term, shape: &ReadbackShape) -> Result<FgTerm, TranslateError> {
    if let Some(q) = foreign_in_term(env, t) {
        return Err(TranslateError::NotInImageFragment(format!("computation constant `{q}`")));
    }
    match shape {
        ReadbackShape::Value => rb_val(env, t),
        ReadbackShape::Producer(s) => rb_prod(env, t, s),
    }
}

fn incomplete<T>(what: &str, t: &Term) -> Result<T, TranslateError> {
    Err(TranslateError::ReadbackIncomplete(format!("{what}: `{t}`")))
}

fn untuple(v: &Term, arity: Option<usize>) -> Vec<Term> {
    match arity {
        Some(0) => vec![],
        Some(1) | None => vec![v.clone()],
        Some(n) => match v {
            Term::Pair(a, b) => {
                let mut out = vec![(**a).clone()];
                out.extend(untuple(b, Some(n - 1)));
                out
            }
            _ => {
                // Not literally a tuple: project the components out.
                let mut out = Vec::new();
                let mut cur = v.clone();
                for _ in 0..n - 1 {
                    out.push(Term::fst(cur.clone()));
                    cur = Term::snd(cur);
                }
                out.push(cur);
                out
            }
        },
    }
}

fn rb_prod(env: &TranslationEnv, t: &Term, s: &Name) -> Result<FgTerm, TranslateError> {
    use Term::*;
    match t {
        Tens(v, k) if matches!(&**k, LVar(w) if w == s) => Ok(FgTerm::ret(rb_val(env, v)?)),
        LetTens(x, s2, r, p) => {
            let LApp(f, arg) = &**r else { return incomplete("let-bound computation", r) };
            let Tens(v, k) = &**arg else { return incomplete("application argument", arg) };
            if !matches!(&**k, LVar(w) if w == s) {
                return incomplete("state threading", arg);
            }
            let head = match &**f {
                Sacc(e) => {
                    let args = untuple(v, None);
                    let args = args.iter().map(|a| rb_val(env, a)).collect::<Result<Vec<_>, _>>()?;
                    FgTerm::Geff(e.clone(), args)
                }
                _ => FgTerm::app(rb_val(env, f)?, rb_val(env, v)?),
            };
            Ok(FgTerm::let_(x.clone(), head, rb_prod(env, p, s2)?))
        }
        _ => incomplete("producer", t),
    }
}

fn rb_val(env: &TranslationEnv, t: &Term) -> Result<FgTerm, TranslateError> {
    use Term::*;
    let b = |a: &Term| rb_val(env, a).map(Box::new);
    Ok(match t {
        Var(x) => FgTerm::Var(x.clone()),
        Star => FgTerm::Star,
        Pair(a, c) => FgTerm::Pair(b(a)?, b(c)?),
        Fst(a) => FgTerm::Fst(b(a)?),
        Snd(a) => FgTerm::Snd(b(a)?),
        Const(f, vs) => FgTerm::Const(f.clone(), vs.iter().map(|v| rb_val(env, v)).collect::<Result<_, _>>()?),
        Inl(ty, a) => FgTerm::Inl(unsps_type(env, ty)?, b(a)?),
        Inr(ty, a) => FgTerm::Inr(unsps_type(env, ty)?, b(a)?),
        Absurd(ty, a) => FgTerm::Absurd(unsps_type(env, ty)?, b(a)?),
        Case(a, x1, w1, x2, w2) => FgTerm::Case(b(a)?, x1.clone(), b(w1)?, x2.clone(), b(w2)?),
        LLam(z, CType::Tensor(a, st), body) if **st == env.s() => {
            let LetTens(x, s, scrut, p) = &**body else { return incomplete("abstraction body", body) };
            if !matches!(&**scrut, LVar(w) if w == z) {
                return incomplete("abstraction body", body);
            }
            FgTerm::lam(x.clone(), unsps_type(env, a)?, rb_prod(env, p, s)?)
        }
        Sacc(e) => return incomplete(&format!("unapplied state access `{e}`"), t),
        _ => return incomplete("value", t),
    })
}

/// Readback with knowledge of effect arities, splitting tupled arguments.
pub fn untranslate_with(
    env: &TranslationEnv,
    sig: &Signature,
    t: &Term,
    shape: &ReadbackShape,
) -> Result<FgTerm, TranslateError> {
    let m = untranslate(env, t, shape)?;
    Ok(split_geff_args(sig, &m))
}

fn split_geff_args(sig: &Signature, m: &FgTerm) -> FgTerm {
    use FgTerm::*;
    let go = |t: &FgTerm| Box::new(split_geff_args(sig, t));
    match m {
        Geff(e, vs) if vs.len() == 1 => {
            let n = sig.effects.get(e).map(|a| a.params.len());
            let v = &vs[0];
            let parts = match n {
                Some(0) => vec![],
                Some(n) if n > 1 => fg_untuple(v, n),
                _ => vec![v.clone()],
            };
            Geff(e.clone(), parts.iter().map(|p| split_geff_args(sig, p)).collect())
        }
        Geff(e, vs) => Geff(e.clone(), vs.iter().map(|p| split_geff_args(sig, p)).collect()),
        Var(_) | Star => m.clone(),
        Pair(a, c) => Pair(go(a), go(c)),
        App(a, c) => App(go(a), go(c)),
        Fst(a) => Fst(go(a)),
        Snd(a) => Snd(go(a)),
        Return(a) => Return(go(a)),
        Lam(x, t, b) => Lam(x.clone(), t.clone(), go(b)),
        Let(x, a, b) => Let(x.clone(), go(a), go(b)),
        Const(f, vs) => Const(f.clone(), vs.iter().map(|p| split_geff_args(sig, p)).collect()),
        Inl(t, a) => Inl(t.clone(), go(a)),
        Inr(t, a) => Inr(t.clone(), go(a)),
        Absurd(t, a) => Absurd(t.clone(), go(a)),
        Case(a, x1, w1, x2, w2) => Case(go(a), x1.clone(), go(w1), x2.clone(), go(w2)),
    }
}

fn fg_untuple(v: &FgTerm, n: usize) -> Vec<FgTerm> {
    if n <= 1 {
        return vec![v.clone()];
    }
    match v {
        FgTerm::Pair(a, b) => {
            let mut out = vec![(**a).clone()];
            out.extend(fg_untuple(b, n - 1));
            out
        }
        _ => {
            let mut out = vec![FgTerm::fst(v.clone())];
            out.extend(fg_untuple(&FgTerm::snd(v.clone()), n - 1));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{parse_fg_term, parse_term, parse_vtype};
    use crate::syntax::{alpha_eq, alpha_eq_with, fg_alpha_eq};
    use std::collections::BTreeMap;

    fn env() -> TranslationEnv {
        TranslationEnv::default()
    }

    #[test]
    fn type_examples() {
        let t = sps_type(&env(), &FgType::parr(FgType::Unit, FgType::Unit));
        assert_eq!(t, parse_vtype("(lolli (tensor unit S) (tensor unit S))").unwrap());
        let t = cps_type(&env(), &FgType::parr(FgType::base("a"), FgType::base("b")));
        assert_eq!(t, parse_vtype("(lolli (power b R) (power a R))").unwrap());
        assert_eq!(sps_type(&env(), &FgType::sum(FgType::base("a"), FgType::base("b"))), parse_vtype("(sum a b)").unwrap());
    }

    #[test]
    fn return_translates_to_tensor() {
        let ctx = FgContext::new().with("x", FgType::base("a"));
        let r = sps_term(&env(), &Signature::empty(), &ctx, &parse_fg_term("(return x)").unwrap(), FgMode::Producer)
            .unwrap();
        let (s, _) = r.ctx.delta.clone().unwrap();
        assert_eq!(r.term, Term::tens(Term::var("x"), Term::LVar(s)));
        let r = cps_term(&env(), &Signature::empty(), &ctx, &parse_fg_term("(return x)").unwrap(), FgMode::Producer)
            .unwrap();
        let (k, _) = r.ctx.delta.clone().unwrap();
        assert_eq!(r.term, Term::papp(Term::LVar(k), Term::var("x")));
    }

    #[test]
    fn geff_translation() {
        let m = parse_fg_term("(geff deref star)").unwrap();
        let r = sps_term(&env(), &Signature::bit_store(), &FgContext::new(), &m, FgMode::Producer).unwrap();
        let (s, _) = r.ctx.delta.clone().unwrap();
        assert_eq!(r.term, Term::lapp(Term::Sacc(name("deref")), Term::tens(Term::Star, Term::LVar(s))));
    }

    #[test]
    fn dualize_types() {
        let e = env();
        assert_eq!(
            dualize_ctype(&e, &CType::tensor(VType::Unit, CType::state())).unwrap(),
            CType::power(VType::Unit, CType::ret())
        );
        assert_eq!(
            dualize_vtype(&e, &parse_vtype("(lolli S (tensor a S))").unwrap()).unwrap(),
            parse_vtype("(lolli (power a R) R)").unwrap()
        );
        assert_eq!(dualize_vtype(&e, &VType::Unit).unwrap(), VType::Unit);
        assert!(matches!(dualize_ctype(&e, &CType::konst("Q")), Err(TranslateError::ForeignConstant(_))));
    }

    #[test]
    fn cps_equals_dualized_sps() {
        let sig = Signature::bit_store();
        let m = parse_fg_term(
            "(let (f (return (lam (x (sum unit unit)) (let (y (geff flip)) (return x))))) (let (b (geff deref)) (app f b)))",
        )
        .unwrap();
        let s = sps_term(&env(), &sig, &FgContext::new(), &m, FgMode::Producer).unwrap();
        let d = dualize_term(&env(), &sig, &s.ctx, &s.term, LinMode::Computation).unwrap();
        let c = cps_term(&env(), &sig, &FgContext::new(), &m, FgMode::Producer).unwrap();
        let mut ren = BTreeMap::new();
        ren.insert(d.ctx.delta.clone().unwrap().0, c.ctx.delta.clone().unwrap().0);
        assert!(alpha_eq_with(&d.term, &c.term, &ren), "{}\n{}", d.term, c.term);
        assert_eq!(d.ctx.delta.unwrap().1, c.ctx.delta.unwrap().1);
    }

    #[test]
    fn undualize_inverts() {
        let sig = Signature::empty();
        let t = parse_term("(llam (z (tensor a S)) (lettens (x s z) (tens x s)))").unwrap();
        let d = dualize_term(&env(), &sig, &LinContext::new(), &t, LinMode::Value).unwrap();
        let back = undualize_term(&env(), &sig, &LinContext::new(), &d.term, LinMode::Value).unwrap();
        assert!(alpha_eq(&back.term, &t), "{}", back.term);
    }

    #[test]
    fn reflect_examples() {
        let e = env();
        let r = reflect_type(&e, &parse_vtype("(lolli (tensor a S) (tensor b S))").unwrap()).unwrap();
        assert_eq!(r.sigma, FgType::parr(FgType::base("a"), FgType::base("b")));
        assert!(matches!(r.to.1, Term::Var(_)));
        let r = reflect_type(&e, &parse_vtype("(lolli S S)").unwrap()).unwrap();
        assert_eq!(r.sigma, FgType::parr(FgType::Unit, FgType::Unit));
        let r = reflect_type(&e, &parse_vtype("(lolli (tensor a (tensor b S)) S)").unwrap()).unwrap();
        assert_eq!(r.sigma, FgType::parr(FgType::prod(FgType::base("a"), FgType::base("b")), FgType::Unit));
        assert!(matches!(reflect_type(&e, &parse_vtype("(lolli Q S)").unwrap()), Err(TranslateError::ForeignConstant(_))));
    }

    #[test]
    fn reflect_witnesses_typecheck() {
        let e = env();
        let sig = Signature::empty();
        for src in ["(lolli S S)", "(lolli (tensor a (tensor b S)) S)", "(lolli (osum S S) ozero)", "(prod (lolli S S) unit)"] {
            let a = parse_vtype(src).unwrap();
            let r = reflect_type(&e, &a).unwrap();
            let img = sps_type(&e, &r.sigma);
            let ctx = LinContext::new().with_name(r.to.0.clone(), a.clone());
            assert_eq!(check_ecbv(&sig, &ctx, &r.to.1, LinMode::Value).unwrap(), LinType::Val(img.clone()), "{src}");
            let ctx = LinContext::new().with_name(r.from.0.clone(), img);
            assert_eq!(check_ecbv(&sig, &ctx, &r.from.1, LinMode::Value).unwrap(), LinType::Val(a), "{src}");
        }
    }

    #[test]
    fn readback_examples() {
        let e = env();
        let t = parse_term("(llam (z (tensor unit S)) (lettens (x s z) (tens x s)))").unwrap();
        let m = untranslate(&e, &t, &ReadbackShape::Value).unwrap();
        assert!(fg_alpha_eq(&m, &parse_fg_term("(lam (x unit) (return x))").unwrap()));
        let t = parse_term("(llam (z Q) z)").unwrap();
        assert!(matches!(untranslate(&e, &t, &ReadbackShape::Value), Err(TranslateError::NotInImageFragment(_))));
        let t = parse_term("(llam (z S) z)").unwrap();
        assert!(matches!(untranslate(&e, &t, &ReadbackShape::Value), Err(TranslateError::ReadbackIncomplete(_))));
    }

    #[test]
    fn readback_of_translation() {
        let e = env();
        let sig = Signature::bit_store();
        let m = parse_fg_term("(let (b (geff deref)) (let (u (geff flip)) (return b)))").unwrap();
        let s = sps_term(&e, &sig, &FgContext::new(), &m, FgMode::Producer).unwrap();
        let back =
            untranslate_with(&e, &sig, &s.term, &ReadbackShape::Producer(s.ctx.delta.unwrap().0)).unwrap();
        assert!(fg_alpha_eq(&back, &m), "{back}");
    }
}
