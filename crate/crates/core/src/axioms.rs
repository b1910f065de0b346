//! The equational axioms of the three calculi as instance generators.
//!
//! Every [`Axiom`] produces small closed instances `lhs ≡ rhs` from a
//! [`TermGen`]. Computation judgements keep their single linear input, and
//! the rules about the empty type use a single variable of type `0`.
//! [`check_axiom`] confronts each instance with the decision procedure and
//! with a finite model.

use std::fmt;

use crate::gen::TermGen;
use crate::models::{morphisms_equal_fg, morphisms_equal_lin, ConcreteModel, ModelVerdict};
use crate::rewrite::{decide_eq_fg, decide_eq_lin, EqConfig, Verdict};
use crate::syntax::{fresh, CType, FgTerm, FgType, Name, Term, VType, VarKind};
use crate::typecheck::{FgContext, FgMode, LinContext, LinFamily, LinMode, Signature};

const TERM_DEPTH: usize = 2;
const TYPE_DEPTH: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Calculus {
    Fg,
    Ecbv,
    Cps,
}

impl fmt::Display for Calculus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Calculus::Fg => "fgcbv",
            Calculus::Ecbv => "ecbv",
            Calculus::Cps => "cps",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Instance {
    Fg { ctx: FgContext, lhs: FgTerm, rhs: FgTerm, mode: FgMode },
    Lin { ctx: LinContext, lhs: Term, rhs: Term, mode: LinMode, family: LinFamily },
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instance::Fg { lhs, rhs, .. } => write!(f, "{lhs}  =  {rhs}"),
            Instance::Lin { ctx, lhs, rhs, .. } => match &ctx.delta {
                Some((z, c)) => write!(f, "{}:{c} |- {lhs}  =  {rhs}", crate::syntax::base_name(z)),
                None => write!(f, "{lhs}  =  {rhs}"),
            },
        }
    }
}

#[derive(Clone, Copy)]
pub struct Axiom {
    pub name: &'static str,
    pub calculus: Calculus,
    /// `core` for the structural rules, `sums` for the rules about sums and
    /// the empty type, `powers` for the CPS-specific rules.
    pub group: &'static str,
    make: fn(&mut TermGen) -> Instance,
}

impl Axiom {
    pub fn instance(&self, g: &mut TermGen) -> Instance {
        (self.make)(g)
    }
}

impl fmt::Debug for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.calculus, self.name)
    }
}

// ---------------------------------------------------------------- FGCBV

fn fg_value(ctx: FgContext, lhs: FgTerm, rhs: FgTerm) -> Instance {
    Instance::Fg { ctx, lhs, rhs, mode: FgMode::Value }
}

fn fg_producer(ctx: FgContext, lhs: FgTerm, rhs: FgTerm) -> Instance {
    Instance::Fg { ctx, lhs, rhs, mode: FgMode::Producer }
}

fn fg_closed(g: &mut TermGen, ty: &FgType) -> FgTerm {
    g.fg_value(&Vec::new(), ty, TERM_DEPTH)
}

fn fg_unit_eta(g: &mut TermGen) -> Instance {
    let a = g.fg_type(TYPE_DEPTH);
    let lhs = match g.below(3) {
        0 => FgTerm::snd(FgTerm::pair(fg_closed(g, &a), FgTerm::Star)),
        1 => FgTerm::fst(FgTerm::pair(FgTerm::Star, fg_closed(g, &a))),
        _ => {
            let b = fg_closed(g, &FgType::bool());
            FgTerm::case(b, fresh("x"), FgTerm::Star, fresh("x"), FgTerm::Star)
        }
    };
    fg_value(FgContext::new(), lhs, FgTerm::Star)
}

fn fg_prod_beta(g: &mut TermGen, first: bool) -> Instance {
    let (a, b) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let (v, w) = (fg_closed(g, &a), fg_closed(g, &b));
    let p = FgTerm::pair(v.clone(), w.clone());
    if first {
        fg_value(FgContext::new(), FgTerm::fst(p), v)
    } else {
        fg_value(FgContext::new(), FgTerm::snd(p), w)
    }
}

fn fg_prod_eta(g: &mut TermGen) -> Instance {
    let ty = FgType::prod(g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let v = fg_closed(g, &ty);
    fg_value(FgContext::new(), FgTerm::pair(FgTerm::fst(v.clone()), FgTerm::snd(v.clone())), v)
}

fn fg_arrow_beta(g: &mut TermGen) -> Instance {
    let (a, b) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let x = fresh("x");
    let m = g.fg_producer(&vec![(x.clone(), a.clone())], &b, TERM_DEPTH);
    let v = fg_closed(g, &a);
    fg_producer(FgContext::new(), FgTerm::app(FgTerm::lam(x.clone(), a, m.clone()), v.clone()), m.subst(&x, &v))
}

fn fg_arrow_eta(g: &mut TermGen) -> Instance {
    let (a, b) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let f = fg_closed(g, &FgType::parr(a.clone(), b));
    let x = fresh("x");
    fg_value(FgContext::new(), FgTerm::lam(x.clone(), a, FgTerm::app(f.clone(), FgTerm::Var(x))), f)
}

fn fg_let_beta(g: &mut TermGen) -> Instance {
    let (a, b) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let x = fresh("x");
    let n = g.fg_producer(&vec![(x.clone(), a.clone())], &b, TERM_DEPTH);
    let v = fg_closed(g, &a);
    fg_producer(FgContext::new(), FgTerm::let_(x.clone(), FgTerm::ret(v.clone()), n.clone()), n.subst(&x, &v))
}

fn fg_let_eta(g: &mut TermGen) -> Instance {
    let a = g.fg_type(TYPE_DEPTH);
    let m = g.fg_producer(&Vec::new(), &a, TERM_DEPTH);
    let x = fresh("x");
    fg_producer(FgContext::new(), FgTerm::let_(x.clone(), m.clone(), FgTerm::ret(FgTerm::Var(x))), m)
}

fn fg_let_assoc(g: &mut TermGen) -> Instance {
    let (a, b, c) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let (x, y) = (fresh("x"), fresh("y"));
    let m = g.fg_producer(&Vec::new(), &a, TERM_DEPTH);
    let n = g.fg_producer(&vec![(x.clone(), a)], &b, TERM_DEPTH);
    let p = g.fg_producer(&vec![(y.clone(), b)], &c, TERM_DEPTH);
    let lhs = FgTerm::let_(y.clone(), FgTerm::let_(x.clone(), m.clone(), n.clone()), p.clone());
    let rhs = FgTerm::let_(x, m, FgTerm::let_(y, n, p));
    fg_producer(FgContext::new(), lhs, rhs)
}

fn fg_case_beta(g: &mut TermGen, left: bool) -> Instance {
    let (a1, a2, b) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let sum = FgType::sum(a1.clone(), a2.clone());
    let (x1, x2) = (fresh("x"), fresh("x"));
    let w1 = g.fg_value(&vec![(x1.clone(), a1.clone())], &b, TERM_DEPTH);
    let w2 = g.fg_value(&vec![(x2.clone(), a2.clone())], &b, TERM_DEPTH);
    let (scrut, rhs) = if left {
        let v = fg_closed(g, &a1);
        (FgTerm::inl(sum, v.clone()), w1.subst(&x1, &v))
    } else {
        let v = fg_closed(g, &a2);
        (FgTerm::inr(sum, v.clone()), w2.subst(&x2, &v))
    };
    fg_value(FgContext::new(), FgTerm::case(scrut, x1, w1, x2, w2), rhs)
}

fn fg_case_eta(g: &mut TermGen) -> Instance {
    let (a1, a2, b) = (g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH), g.fg_type(TYPE_DEPTH));
    let sum = FgType::sum(a1, a2);
    let z = fresh("z");
    let w = g.fg_value(&vec![(z.clone(), sum.clone())], &b, TERM_DEPTH);
    let v = fg_closed(g, &sum);
    let (x1, x2) = (fresh("x"), fresh("x"));
    let rhs = FgTerm::case(
        v.clone(),
        x1.clone(),
        w.subst(&z, &FgTerm::inl(sum.clone(), FgTerm::Var(x1))),
        x2.clone(),
        w.subst(&z, &FgTerm::inr(sum, FgTerm::Var(x2))),
    );
    fg_value(FgContext::new(), w.subst(&z, &v), rhs)
}

fn fg_absurd(g: &mut TermGen) -> Instance {
    let a = g.fg_type(TYPE_DEPTH);
    let (e, x) = (fresh("e"), fresh("x"));
    let w = g.fg_value(&vec![(x.clone(), FgType::Empty)], &a, TERM_DEPTH);
    let ctx = FgContext::new().with_name(e.clone(), FgType::Empty);
    fg_value(ctx, FgTerm::absurd(a, FgTerm::Var(e.clone())), w.subst(&x, &FgTerm::Var(e)))
}

// ---------------------------------------------------------------- ECBV

fn lin_value(family: LinFamily, lhs: Term, rhs: Term) -> Instance {
    Instance::Lin { ctx: LinContext::new(), lhs, rhs, mode: LinMode::Value, family }
}

fn lin_comp(family: LinFamily, z: Name, c: CType, lhs: Term, rhs: Term) -> Instance {
    Instance::Lin { ctx: LinContext::new().linear_name(z, c), lhs, rhs, mode: LinMode::Computation, family }
}

/// Closed values and computations of either linear family.
struct Lin<'a> {
    g: &'a mut TermGen,
    family: LinFamily,
}

impl Lin<'_> {
    fn vtype(&mut self) -> VType {
        match self.family {
            LinFamily::Ecbv => self.g.vtype(TYPE_DEPTH),
            LinFamily::Cps => self.g.cps_vtype(TYPE_DEPTH),
        }
    }

    /// A computation type usable as the type of a linear input.
    fn source(&mut self) -> CType {
        match self.family {
            LinFamily::Ecbv => self.g.target_ctype(TYPE_DEPTH),
            LinFamily::Cps => self.g.cps_ctype(TYPE_DEPTH, false),
        }
    }

    fn target(&mut self) -> CType {
        match self.family {
            LinFamily::Ecbv => self.g.target_ctype(TYPE_DEPTH),
            LinFamily::Cps => self.g.cps_ctype(TYPE_DEPTH, true),
        }
    }

    fn value(&mut self, gamma: &[(Name, VType)], ty: &VType) -> Term {
        match self.family {
            LinFamily::Ecbv => self.g.lin_value(&gamma.to_vec(), ty, TERM_DEPTH),
            LinFamily::Cps => self.g.cps_value(&gamma.to_vec(), ty, TERM_DEPTH),
        }
    }

    fn comp(&mut self, gamma: &[(Name, VType)], z: &Name, c: &CType, d: &CType) -> Term {
        match self.family {
            LinFamily::Ecbv => self.g.lin_comp(&gamma.to_vec(), z, c, d, TERM_DEPTH),
            LinFamily::Cps => self.g.cps_comp(&gamma.to_vec(), &Term::LVar(z.clone()), c, d, TERM_DEPTH),
        }
    }
}

fn lin_unit_eta(g: &mut TermGen, family: LinFamily) -> Instance {
    let mut l = Lin { g, family };
    let a = l.vtype();
    let lhs = match l.g.below(3) {
        0 => Term::snd(Term::pair(l.value(&[], &a), Term::Star)),
        1 => Term::fst(Term::pair(Term::Star, l.value(&[], &a))),
        _ => {
            let b = l.value(&[], &VType::bool());
            Term::case(b, fresh("x"), Term::Star, fresh("x"), Term::Star)
        }
    };
    lin_value(family, lhs, Term::Star)
}

fn lin_prod_beta(g: &mut TermGen, family: LinFamily, first: bool) -> Instance {
    let mut l = Lin { g, family };
    let (a, b) = (l.vtype(), l.vtype());
    let (v, w) = (l.value(&[], &a), l.value(&[], &b));
    let p = Term::pair(v.clone(), w.clone());
    if first {
        lin_value(family, Term::fst(p), v)
    } else {
        lin_value(family, Term::snd(p), w)
    }
}

fn lin_prod_eta(g: &mut TermGen, family: LinFamily) -> Instance {
    let mut l = Lin { g, family };
    let ty = VType::prod(l.vtype(), l.vtype());
    let v = l.value(&[], &ty);
    lin_value(family, Term::pair(Term::fst(v.clone()), Term::snd(v.clone())), v)
}

fn lin_lolli_beta(g: &mut TermGen, family: LinFamily) -> Instance {
    let mut l = Lin { g, family };
    let (c0, c, d) = (l.source(), l.source(), l.target());
    let (z0, z) = (fresh("z"), fresh("z"));
    let u = l.comp(&[], &z0, &c0, &c);
    let t = l.comp(&[], &z, &c, &d);
    let rhs = t.subst(&z, VarKind::Linear, &u);
    lin_comp(family, z0, c0, Term::lapp(Term::llam(z, c, t), u), rhs)
}

fn lin_lolli_eta(g: &mut TermGen, family: LinFamily) -> Instance {
    let mut l = Lin { g, family };
    let (c, d) = (l.source(), l.target());
    let f = l.value(&[], &VType::lolli(c.clone(), d));
    let z = fresh("z");
    lin_value(family, Term::llam(z.clone(), c, Term::lapp(f.clone(), Term::LVar(z))), f)
}

fn ecbv_tensor_beta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let (c0, a, c, d) = (l.source(), l.vtype(), l.source(), l.target());
    let (z0, x, z) = (fresh("z"), fresh("x"), fresh("z"));
    let v = l.value(&[], &a);
    let u = l.comp(&[], &z0, &c0, &c);
    let w = l.comp(&[(x.clone(), a)], &z, &c, &d);
    let rhs = w.subst(&x, VarKind::Value, &v).subst(&z, VarKind::Linear, &u);
    lin_comp(LinFamily::Ecbv, z0, c0, Term::lettens(x, z, Term::tens(v, u), w), rhs)
}

fn ecbv_tensor_eta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let (c0, a, c, d) = (l.source(), l.vtype(), l.source(), l.target());
    let ty = CType::tensor(a, c);
    let (z0, y, x, z) = (fresh("z"), fresh("y"), fresh("x"), fresh("z"));
    let t = l.comp(&[], &z0, &c0, &ty);
    let u = l.comp(&[], &y, &ty, &d);
    let lhs = Term::lettens(
        x.clone(),
        z.clone(),
        t.clone(),
        u.subst(&y, VarKind::Linear, &Term::tens(Term::Var(x), Term::LVar(z))),
    );
    lin_comp(LinFamily::Ecbv, z0, c0, lhs, u.subst(&y, VarKind::Linear, &t))
}

fn ecbv_case_beta(g: &mut TermGen, left: bool) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let (a1, a2, b) = (l.vtype(), l.vtype(), l.vtype());
    let sum = VType::sum(a1.clone(), a2.clone());
    let (x1, x2) = (fresh("x"), fresh("x"));
    let w1 = l.value(&[(x1.clone(), a1.clone())], &b);
    let w2 = l.value(&[(x2.clone(), a2.clone())], &b);
    let (scrut, rhs) = if left {
        let v = l.value(&[], &a1);
        (Term::inl(sum, v.clone()), w1.subst(&x1, VarKind::Value, &v))
    } else {
        let v = l.value(&[], &a2);
        (Term::inr(sum, v.clone()), w2.subst(&x2, VarKind::Value, &v))
    };
    lin_value(LinFamily::Ecbv, Term::case(scrut, x1, w1, x2, w2), rhs)
}

fn ecbv_case_eta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let (a1, a2, b) = (l.vtype(), l.vtype(), l.vtype());
    let sum = VType::sum(a1, a2);
    let z = fresh("z");
    let w = l.value(&[(z.clone(), sum.clone())], &b);
    let v = l.value(&[], &sum);
    let (x1, x2) = (fresh("x"), fresh("x"));
    let rhs = Term::case(
        v.clone(),
        x1.clone(),
        w.subst(&z, VarKind::Value, &Term::inl(sum.clone(), Term::Var(x1))),
        x2.clone(),
        w.subst(&z, VarKind::Value, &Term::inr(sum, Term::Var(x2))),
    );
    lin_value(LinFamily::Ecbv, w.subst(&z, VarKind::Value, &v), rhs)
}

fn ecbv_ocase_beta(g: &mut TermGen, left: bool) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let (c0, c1, c2, d) = (l.source(), l.source(), l.source(), l.target());
    let sum = CType::plus(c1.clone(), c2.clone());
    let (z0, z1, z2) = (fresh("z"), fresh("z"), fresh("z"));
    let t1 = l.comp(&[], &z1, &c1, &d);
    let t2 = l.comp(&[], &z2, &c2, &d);
    let (scrut, rhs) = if left {
        let s = l.comp(&[], &z0, &c0, &c1);
        (Term::oinl(sum, s.clone()), t1.subst(&z1, VarKind::Linear, &s))
    } else {
        let s = l.comp(&[], &z0, &c0, &c2);
        (Term::oinr(sum, s.clone()), t2.subst(&z2, VarKind::Linear, &s))
    };
    lin_comp(LinFamily::Ecbv, z0, c0, Term::ocase(scrut, z1, t1, z2, t2), rhs)
}

fn ecbv_ocase_eta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let (c0, c1, c2, d) = (l.source(), l.source(), l.source(), l.target());
    let sum = CType::plus(c1, c2);
    let (z0, y, z1, z2) = (fresh("z"), fresh("y"), fresh("z"), fresh("z"));
    let t = l.comp(&[], &z0, &c0, &sum);
    let u = l.comp(&[], &y, &sum, &d);
    let rhs = Term::ocase(
        t.clone(),
        z1.clone(),
        u.subst(&y, VarKind::Linear, &Term::oinl(sum.clone(), Term::LVar(z1))),
        z2.clone(),
        u.subst(&y, VarKind::Linear, &Term::oinr(sum, Term::LVar(z2))),
    );
    lin_comp(LinFamily::Ecbv, z0, c0, u.subst(&y, VarKind::Linear, &t), rhs)
}

fn ecbv_absurd(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let a = l.vtype();
    let (e, x) = (fresh("e"), fresh("x"));
    let w = l.value(&[(x.clone(), VType::Empty)], &a);
    let ctx = LinContext::new().with_name(e.clone(), VType::Empty);
    Instance::Lin {
        ctx,
        lhs: Term::absurd(a, Term::Var(e.clone())),
        rhs: w.subst(&x, VarKind::Value, &Term::Var(e)),
        mode: LinMode::Value,
        family: LinFamily::Ecbv,
    }
}

fn ecbv_oabsurd(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Ecbv };
    let d = l.target();
    let (z0, x) = (fresh("z"), fresh("x"));
    let u = l.comp(&[], &x, &CType::Zero, &d);
    let rhs = u.subst(&x, VarKind::Linear, &Term::LVar(z0.clone()));
    lin_comp(LinFamily::Ecbv, z0.clone(), CType::Zero, Term::oabsurd(d, Term::LVar(z0)), rhs)
}

// ---------------------------------------------------------------- CPS

fn cps_power_beta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Cps };
    let (c0, a, c) = (l.source(), l.vtype(), l.target());
    let (z0, x) = (fresh("z"), fresh("x"));
    let t = l.comp(&[(x.clone(), a.clone())], &z0, &c0, &c);
    let v = l.value(&[], &a);
    let rhs = t.subst(&x, VarKind::Value, &v);
    lin_comp(LinFamily::Cps, z0, c0, Term::papp(Term::plam(x, a, t), v), rhs)
}

fn cps_power_eta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Cps };
    let (c0, a, c) = (l.source(), l.vtype(), l.target());
    let (z0, x) = (fresh("z"), fresh("x"));
    let t = l.comp(&[], &z0, &c0, &CType::power(a.clone(), c));
    let rhs = Term::plam(x.clone(), a, Term::papp(t.clone(), Term::Var(x)));
    lin_comp(LinFamily::Cps, z0, c0, t, rhs)
}

fn cps_with_beta(g: &mut TermGen, first: bool) -> Instance {
    let mut l = Lin { g, family: LinFamily::Cps };
    let (c0, c1, c2) = (l.source(), l.target(), l.target());
    let z0 = fresh("z");
    let t1 = l.comp(&[], &z0, &c0, &c1);
    let t2 = l.comp(&[], &z0, &c0, &c2);
    let p = Term::opair(t1.clone(), t2.clone());
    if first {
        lin_comp(LinFamily::Cps, z0, c0, Term::ofst(p), t1)
    } else {
        lin_comp(LinFamily::Cps, z0, c0, Term::osnd(p), t2)
    }
}

fn cps_with_eta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Cps };
    let (c0, c1, c2) = (l.source(), l.target(), l.target());
    let z0 = fresh("z");
    let t = l.comp(&[], &z0, &c0, &CType::with(c1, c2));
    let rhs = Term::opair(Term::ofst(t.clone()), Term::osnd(t.clone()));
    lin_comp(LinFamily::Cps, z0, c0, t, rhs)
}

fn cps_one_eta(g: &mut TermGen) -> Instance {
    let mut l = Lin { g, family: LinFamily::Cps };
    let (c0, c) = (l.source(), l.target());
    let z0 = fresh("z");
    let t = match l.g.below(2) {
        0 => Term::ofst(l.comp(&[], &z0, &c0, &CType::with(CType::One, c))),
        _ => {
            let f = l.value(&[], &VType::lolli(c0.clone(), CType::One));
            Term::lapp(f, Term::LVar(z0.clone()))
        }
    };
    lin_comp(LinFamily::Cps, z0, c0, t, Term::OUnit)
}

macro_rules! ax {
    ($name:expr, $calc:ident, $group:expr, $f:expr) => {
        Axiom { name: $name, calculus: Calculus::$calc, group: $group, make: $f }
    };
}

/// Every axiom of the three calculi.
pub fn catalogue() -> Vec<Axiom> {
    use LinFamily::{Cps, Ecbv};
    vec![
        ax!("unit-eta", Fg, "core", fg_unit_eta),
        ax!("prod-beta-1", Fg, "core", |g| fg_prod_beta(g, true)),
        ax!("prod-beta-2", Fg, "core", |g| fg_prod_beta(g, false)),
        ax!("prod-eta", Fg, "core", fg_prod_eta),
        ax!("arrow-beta", Fg, "core", fg_arrow_beta),
        ax!("arrow-eta", Fg, "core", fg_arrow_eta),
        ax!("let-beta", Fg, "core", fg_let_beta),
        ax!("let-eta", Fg, "core", fg_let_eta),
        ax!("let-assoc", Fg, "core", fg_let_assoc),
        ax!("case-beta-1", Fg, "sums", |g| fg_case_beta(g, true)),
        ax!("case-beta-2", Fg, "sums", |g| fg_case_beta(g, false)),
        ax!("case-eta", Fg, "sums", fg_case_eta),
        ax!("absurd-eta", Fg, "sums", fg_absurd),
        ax!("unit-eta", Ecbv, "core", |g| lin_unit_eta(g, Ecbv)),
        ax!("prod-beta-1", Ecbv, "core", |g| lin_prod_beta(g, Ecbv, true)),
        ax!("prod-beta-2", Ecbv, "core", |g| lin_prod_beta(g, Ecbv, false)),
        ax!("prod-eta", Ecbv, "core", |g| lin_prod_eta(g, Ecbv)),
        ax!("lolli-beta", Ecbv, "core", |g| lin_lolli_beta(g, Ecbv)),
        ax!("lolli-eta", Ecbv, "core", |g| lin_lolli_eta(g, Ecbv)),
        ax!("tensor-beta", Ecbv, "core", ecbv_tensor_beta),
        ax!("tensor-eta", Ecbv, "core", ecbv_tensor_eta),
        ax!("case-beta-1", Ecbv, "sums", |g| ecbv_case_beta(g, true)),
        ax!("case-beta-2", Ecbv, "sums", |g| ecbv_case_beta(g, false)),
        ax!("case-eta", Ecbv, "sums", ecbv_case_eta),
        ax!("ocase-beta-1", Ecbv, "sums", |g| ecbv_ocase_beta(g, true)),
        ax!("ocase-beta-2", Ecbv, "sums", |g| ecbv_ocase_beta(g, false)),
        ax!("ocase-eta", Ecbv, "sums", ecbv_ocase_eta),
        ax!("absurd-eta", Ecbv, "sums", ecbv_absurd),
        ax!("oabsurd-eta", Ecbv, "sums", ecbv_oabsurd),
        ax!("unit-eta", Cps, "core", |g| lin_unit_eta(g, Cps)),
        ax!("prod-beta-1", Cps, "core", |g| lin_prod_beta(g, Cps, true)),
        ax!("prod-beta-2", Cps, "core", |g| lin_prod_beta(g, Cps, false)),
        ax!("prod-eta", Cps, "core", |g| lin_prod_eta(g, Cps)),
        ax!("lolli-beta", Cps, "core", |g| lin_lolli_beta(g, Cps)),
        ax!("lolli-eta", Cps, "core", |g| lin_lolli_eta(g, Cps)),
        ax!("power-beta", Cps, "powers", cps_power_beta),
        ax!("power-eta", Cps, "powers", cps_power_eta),
        ax!("with-beta-1", Cps, "powers", |g| cps_with_beta(g, true)),
        ax!("with-beta-2", Cps, "powers", |g| cps_with_beta(g, false)),
        ax!("with-eta", Cps, "powers", cps_with_eta),
        ax!("one-eta", Cps, "powers", cps_one_eta),
    ]
}

// ---------------------------------------------------------------- checking

/// The two verdicts for one instance.
#[derive(Clone, Debug)]
pub struct InstanceCheck {
    pub instance: Instance,
    pub decided: Verdict,
    pub reason: String,
    pub model: Result<ModelVerdict, String>,
}

impl InstanceCheck {
    pub fn passed(&self) -> bool {
        self.decided == Verdict::Equal && matches!(self.model, Ok(ModelVerdict::Equal))
    }
}

pub fn check_instance(sig: &Signature, model: &ConcreteModel, inst: &Instance) -> InstanceCheck {
    let cfg = EqConfig { model: Some(model.clone()), model_complete: true, ..EqConfig::default() };
    let (dec, mv) = match inst {
        Instance::Fg { ctx, lhs, rhs, mode } => (
            decide_eq_fg(sig, ctx, lhs, rhs, *mode, &cfg),
            morphisms_equal_fg(model, sig, ctx, lhs, rhs, *mode).map_err(|e| e.to_string()),
        ),
        Instance::Lin { ctx, lhs, rhs, mode, family } => (
            decide_eq_lin(sig, ctx, lhs, rhs, *mode, *family, &cfg),
            morphisms_equal_lin(model, sig, ctx, lhs, rhs, *mode, *family).map_err(|e| e.to_string()),
        ),
    };
    let (decided, reason) = match dec {
        Ok(r) => (r.verdict, r.reason),
        Err(e) => (Verdict::Unknown, format!("ill-typed instance: {e}")),
    };
    InstanceCheck { instance: inst.clone(), decided, reason, model: mv }
}

#[derive(Clone, Debug)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub checks: Vec<InstanceCheck>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(InstanceCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InstanceCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bad = self.failures().count();
        write!(f, "{} {}/{}: {}/{} instances", if bad == 0 { "pass" } else { "FAIL" }, self.axiom.calculus, self.axiom.name, self.checks.len() - bad, self.checks.len())?;
        if let Some(c) = self.failures().next() {
            let m = match &c.model {
                Ok(v) => v.to_string(),
                Err(e) => e.clone(),
            };
            write!(f, "\n  {}\n  decide: {} ({}); model: {m}", c.instance, c.decided, c.reason)?;
        }
        Ok(())
    }
}

/// Check `count` fresh instances of one axiom.
pub fn check_axiom(ax: &Axiom, g: &mut TermGen, model: &ConcreteModel, count: usize) -> AxiomReport {
    let sig = g.sig.clone();
    let checks = (0..count).map(|_| check_instance(&sig, model, &ax.instance(g))).collect();
    AxiomReport { axiom: *ax, checks }
}

/// Check the whole catalogue, `count` instances per axiom.
pub fn check_catalogue(g: &mut TermGen, model: &ConcreteModel, count: usize) -> Vec<AxiomReport> {
    catalogue().iter().map(|ax| check_axiom(ax, g, model, count)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::builtin_model;
    use crate::gen::GenConfig;
    use crate::typecheck::{check_fg, check_lin};
    use proptest::prelude::*;

    #[test]
    fn catalogue_names_are_unique_per_calculus() {
        let cat = catalogue();
        assert_eq!(cat.len(), 41);
        for (i, a) in cat.iter().enumerate() {
            assert!(cat[..i].iter().all(|b| (b.calculus, b.name) != (a.calculus, a.name)), "{a:?}");
        }
        for (c, n) in [(Calculus::Fg, 13), (Calculus::Ecbv, 16), (Calculus::Cps, 12)] {
            assert_eq!(cat.iter().filter(|a| a.calculus == c).count(), n, "{c}");
        }
    }

    #[test]
    fn a_false_equation_is_caught() {
        let sig = crate::typecheck::Signature::bit_store();
        let m = builtin_model("bit-store").unwrap();
        let inst = Instance::Fg {
            ctx: FgContext::new(),
            lhs: crate::surface::parse_fg_term("(geff deref)").unwrap(),
            rhs: crate::surface::parse_fg_term("(let (x (geff flip)) (geff deref))").unwrap(),
            mode: FgMode::Producer,
        };
        let c = check_instance(&sig, &m, &inst);
        assert!(!c.passed());
        assert!(matches!(c.model, Ok(ModelVerdict::Unequal(_))));
    }

    #[test]
    fn reports_name_the_first_failure() {
        let m = builtin_model("bit-store").unwrap();
        let mut g = TermGen::new(1, GenConfig::default());
        let r = check_axiom(&catalogue()[0], &mut g, &m, 3);
        assert!(r.passed());
        assert!(r.to_string().starts_with("pass fgcbv/unit-eta: 3/3"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn instances_are_well_typed_on_both_sides(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            for ax in catalogue() {
                match ax.instance(&mut g) {
                    Instance::Fg { ctx, lhs, rhs, mode } => {
                        let a = check_fg(&g.sig, &ctx, &lhs, mode).unwrap();
                        prop_assert_eq!(a, check_fg(&g.sig, &ctx, &rhs, mode).unwrap(), "{:?}", ax);
                    }
                    Instance::Lin { ctx, lhs, rhs, mode, family } => {
                        let a = check_lin(&g.sig, &ctx, &lhs, mode, family).unwrap();
                        prop_assert_eq!(a, check_lin(&g.sig, &ctx, &rhs, mode, family).unwrap(), "{:?}", ax);
                    }
                }
            }
        }
    }
}
