//! Seeded generators of well-typed terms, used by tests, benchmarks and
//! the acceptance harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{fresh, name, CType, FgTerm, FgType, Name, Term, VType};
use crate::typecheck::{FgContext, FgMode, LinContext, Signature};

#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Upper bound on the height of generated terms.
    pub max_depth: usize,
    /// Base type names; each gets a nullary constant `c<name>`.
    pub bases: Vec<String>,
    /// Whether bit-store generic effects may appear.
    pub effects: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_depth: 6, bases: vec!["a".into(), "b".into()], effects: true }
    }
}

/// The bit-store signature extended with one constant per base type.
pub fn generator_signature(cfg: &GenConfig) -> Signature {
    let mut sig = if cfg.effects { Signature::bit_store() } else { Signature::empty() };
    for b in &cfg.bases {
        sig = sig.with_const(&format!("c{b}"), vec![], FgType::base(b));
    }
    sig
}

/// A generated FGCBV judgement.
#[derive(Clone, Debug)]
pub struct FgSample {
    pub ctx: FgContext,
    pub term: FgTerm,
    pub mode: FgMode,
    pub ty: FgType,
}

/// A generated ECBV judgement: a closed value, or a computation with one
/// linear input.
#[derive(Clone, Debug)]
pub struct LinSample {
    pub ctx: LinContext,
    pub term: Term,
    pub ty: LinTy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinTy {
    Val(VType),
    Comp(CType),
}

pub struct TermGen {
    rng: ChaCha8Rng,
    pub cfg: GenConfig,
    pub sig: Signature,
}

type Gamma = Vec<(Name, FgType)>;
type LGamma = Vec<(Name, VType)>;

impl TermGen {
    pub fn new(seed: u64, cfg: GenConfig) -> Self {
        let sig = generator_signature(&cfg);
        TermGen { rng: ChaCha8Rng::seed_from_u64(seed), cfg, sig }
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    /// A uniform index below `n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn pick<T: Clone>(&mut self, xs: &[T]) -> T {
        xs[self.rng.gen_range(0..xs.len())].clone()
    }

    fn base(&mut self) -> String {
        let bs = self.cfg.bases.clone();
        self.pick(&bs)
    }

    // ------------------------------------------------------------ FGCBV

    pub fn fg_type(&mut self, depth: usize) -> FgType {
        let leaf = |g: &mut Self| match g.rng.gen_range(0..3) {
            0 => FgType::Unit,
            1 => FgType::bool(),
            _ if g.cfg.bases.is_empty() => FgType::Unit,
            _ => FgType::base(&g.base()),
        };
        if depth == 0 || self.coin(0.5) {
            return leaf(self);
        }
        match self.rng.gen_range(0..3) {
            0 => FgType::prod(self.fg_type(depth - 1), self.fg_type(depth - 1)),
            1 => FgType::sum(self.fg_type(depth - 1), self.fg_type(depth - 1)),
            _ => FgType::parr(self.fg_type(depth - 1), self.fg_type(depth - 1)),
        }
    }

    fn fg_leaf(&mut self, g: &Gamma, ty: &FgType) -> Option<FgTerm> {
        let mut cands: Vec<FgTerm> = g.iter().filter(|(_, t)| t == ty).map(|(x, _)| FgTerm::Var(x.clone())).collect();
        for (x, t) in g {
            if let FgType::Prod(a, b) = t {
                if **a == *ty {
                    cands.push(FgTerm::fst(FgTerm::Var(x.clone())));
                }
                if **b == *ty {
                    cands.push(FgTerm::snd(FgTerm::Var(x.clone())));
                }
            }
        }
        if cands.is_empty() {
            None
        } else {
            Some(self.pick(&cands))
        }
    }

    pub fn fg_value(&mut self, g: &Gamma, ty: &FgType, depth: usize) -> FgTerm {
        if let Some(v) = self.fg_leaf(g, ty) {
            if depth == 0 || self.coin(0.35) {
                return v;
            }
        }
        if depth > 0 && self.coin(0.1) {
            let sums: Vec<(Name, FgType, FgType)> = g
                .iter()
                .filter_map(|(x, t)| match t {
                    FgType::Sum(a, b) => Some((x.clone(), (**a).clone(), (**b).clone())),
                    _ => None,
                })
                .collect();
            if !sums.is_empty() {
                let (z, a, b) = self.pick(&sums);
                let (x1, x2) = (fresh("x"), fresh("x"));
                let mut g1 = g.clone();
                g1.push((x1.clone(), a));
                let w1 = self.fg_value(&g1, ty, depth - 1);
                let mut g2 = g.clone();
                g2.push((x2.clone(), b));
                let w2 = self.fg_value(&g2, ty, depth - 1);
                return FgTerm::case(FgTerm::Var(z), x1, w1, x2, w2);
            }
        }
        let d = depth.saturating_sub(1);
        match ty {
            FgType::Unit => FgTerm::Star,
            FgType::Base(n) => FgTerm::Const(name(&format!("c{n}")), vec![]),
            FgType::Prod(a, b) => FgTerm::pair(self.fg_value(g, a, d), self.fg_value(g, b, d)),
            FgType::Sum(a, b) => {
                if self.coin(0.5) {
                    FgTerm::inl(ty.clone(), self.fg_value(g, a, d))
                } else {
                    FgTerm::inr(ty.clone(), self.fg_value(g, b, d))
                }
            }
            FgType::Parr(a, b) => {
                let x = fresh("x");
                let mut g2 = g.clone();
                g2.push((x.clone(), (**a).clone()));
                FgTerm::lam(x, (**a).clone(), self.fg_producer(&g2, b, d))
            }
            FgType::Empty => unreachable!("generators never target the empty type without a variable"),
        }
    }

    fn geff_for(&mut self, ty: &FgType) -> Option<FgTerm> {
        if !self.cfg.effects {
            return None;
        }
        if *ty == FgType::bool() {
            Some(FgTerm::Geff(name("deref"), vec![]))
        } else if *ty == FgType::Unit {
            Some(FgTerm::Geff(name("flip"), vec![]))
        } else {
            None
        }
    }

    pub fn fg_producer(&mut self, g: &Gamma, ty: &FgType, depth: usize) -> FgTerm {
        let geff = self.geff_for(ty);
        if depth == 0 {
            return match geff {
                Some(e) if self.coin(0.5) => e,
                _ => FgTerm::ret(self.fg_value(g, ty, 0)),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..10) {
            0 | 1 => FgTerm::ret(self.fg_value(g, ty, d)),
            2..=4 => {
                let a = self.fg_type(1);
                let x = fresh("x");
                let m = self.fg_producer(g, &a, d);
                let mut g2 = g.clone();
                g2.push((x.clone(), a));
                FgTerm::let_(x, m, self.fg_producer(&g2, ty, d))
            }
            5 | 6 => {
                let a = self.fg_type(0);
                let f = self.fg_value(g, &FgType::parr(a.clone(), ty.clone()), d);
                FgTerm::app(f, self.fg_value(g, &a, d))
            }
            7 if self.cfg.effects && depth >= 3 => {
                let d2 = depth.saturating_sub(3);
                let m = self.fg_producer(g, &FgType::bool(), d2);
                let (x1, x2) = (fresh("x"), fresh("x"));
                let mut g1 = g.clone();
                g1.push((x1.clone(), FgType::Unit));
                let n1 = self.fg_producer(&g1, ty, d2);
                let mut g2 = g.clone();
                g2.push((x2.clone(), FgType::Unit));
                let n2 = self.fg_producer(&g2, ty, d2);
                FgTerm::case_p(m, x1, n1, x2, n2)
            }
            _ => match geff {
                Some(e) => e,
                None => FgTerm::ret(self.fg_value(g, ty, d)),
            },
        }
    }

    fn bounded<T>(&mut self, mut make: impl FnMut(&mut Self, usize) -> T, depth: impl Fn(&T) -> usize) -> Option<T> {
        let limit = self.cfg.max_depth;
        for budget in (0..limit).rev() {
            for _ in 0..8 {
                let t = make(self, budget);
                if depth(&t) <= limit {
                    return Some(t);
                }
            }
        }
        None
    }

    /// A closed producer of a random type.
    pub fn closed_producer(&mut self) -> (FgTerm, FgType) {
        loop {
            let ty = self.fg_type(2);
            if let Some(t) = self.bounded(|g, d| g.fg_producer(&Vec::new(), &ty, d), |t| t.depth()) {
                return (t, ty);
            }
        }
    }

    /// A judgement with up to two free variables, value or producer.
    pub fn fg_judgement(&mut self) -> FgSample {
        let n = self.rng.gen_range(0..3);
        let gamma: Gamma = (0..n).map(|_| (fresh("v"), self.fg_type(1))).collect();
        let mode = if self.coin(0.7) { FgMode::Producer } else { FgMode::Value };
        let (term, ty) = loop {
            let ty = self.fg_type(2);
            let t = self.bounded(
                |g, d| match mode {
                    FgMode::Producer => g.fg_producer(&gamma, &ty, d),
                    FgMode::Value => g.fg_value(&gamma, &ty, d),
                },
                |t| t.depth(),
            );
            if let Some(t) = t {
                break (t, ty);
            }
        };
        let ctx = gamma.into_iter().fold(FgContext::new(), |c, (x, t)| c.with_name(x, t));
        FgSample { ctx, term, mode, ty }
    }

    // ------------------------------------------------------------ ECBV

    pub fn vtype(&mut self, depth: usize) -> VType {
        if depth == 0 || self.coin(0.45) {
            return match self.rng.gen_range(0..3) {
                0 => VType::Unit,
                1 => VType::bool(),
                _ if self.cfg.bases.is_empty() => VType::Unit,
                _ => VType::base(&self.base()),
            };
        }
        match self.rng.gen_range(0..3) {
            0 => VType::prod(self.vtype(depth - 1), self.vtype(depth - 1)),
            1 => VType::sum(self.vtype(depth - 1), self.vtype(depth - 1)),
            _ => VType::lolli(self.source_ctype(depth - 1), self.target_ctype(depth - 1)),
        }
    }

    /// Computation types built from `S`, `⊗` and `⊕`.
    pub fn target_ctype(&mut self, depth: usize) -> CType {
        if depth == 0 || self.coin(0.4) {
            return CType::state();
        }
        if self.coin(0.6) {
            CType::tensor(self.vtype(depth - 1), self.target_ctype(depth - 1))
        } else {
            CType::plus(self.target_ctype(depth - 1), self.target_ctype(depth - 1))
        }
    }

    /// Like [`Self::target_ctype`], occasionally with `0`.
    pub fn source_ctype(&mut self, depth: usize) -> CType {
        if self.coin(0.1) {
            CType::Zero
        } else {
            self.target_ctype(depth)
        }
    }

    pub fn lin_value(&mut self, g: &LGamma, ty: &VType, depth: usize) -> Term {
        let vars: Vec<Term> = g.iter().filter(|(_, t)| t == ty).map(|(x, _)| Term::Var(x.clone())).collect();
        if !vars.is_empty() && (depth == 0 || self.coin(0.35)) {
            return self.pick(&vars);
        }
        let d = depth.saturating_sub(1);
        match ty {
            VType::Unit => Term::Star,
            VType::Base(n) => Term::Const(name(&format!("c{n}")), vec![]),
            VType::Prod(a, b) => Term::pair(self.lin_value(g, a, d), self.lin_value(g, b, d)),
            VType::Sum(a, b) => {
                if self.coin(0.5) {
                    Term::inl(ty.clone(), self.lin_value(g, a, d))
                } else {
                    Term::inr(ty.clone(), self.lin_value(g, b, d))
                }
            }
            VType::Lolli(c, e) => {
                let z = fresh("z");
                let body = self.lin_comp(g, &z, c, e, d);
                Term::llam(z, (**c).clone(), body)
            }
            VType::Empty => unreachable!("generators never target the empty type"),
        }
    }

    /// A computation `Γ; z:C ⊢ t : D`.
    pub fn lin_comp(&mut self, g: &LGamma, z: &Name, c: &CType, dt: &CType, depth: usize) -> Term {
        let d = depth.saturating_sub(1);
        if depth > 0 && self.coin(0.15) {
            let mid = self.target_ctype(1);
            let arg = self.lin_comp(g, z, c, &mid, d);
            let f = self.lin_value(g, &VType::lolli(mid, dt.clone()), d);
            return Term::lapp(f, arg);
        }
        if c == dt && (depth == 0 || self.coin(0.4)) {
            return Term::LVar(z.clone());
        }
        let decompose = !matches!(c, CType::Const(_)) && (self.coin(0.5) || matches!(dt, CType::Const(_)));
        if decompose {
            match c {
                CType::Tensor(a, c2) => {
                    let (x, z2) = (fresh("x"), fresh("z"));
                    let mut g2 = g.clone();
                    g2.push((x.clone(), (**a).clone()));
                    let body = self.lin_comp(&g2, &z2, c2, dt, d);
                    return Term::lettens(x, z2.clone(), Term::LVar(z.clone()), body);
                }
                CType::Plus(c1, c2) => {
                    let (z1, z2) = (fresh("z"), fresh("z"));
                    let u1 = self.lin_comp(g, &z1, c1, dt, d);
                    let u2 = self.lin_comp(g, &z2, c2, dt, d);
                    return Term::ocase(Term::LVar(z.clone()), z1, u1, z2, u2);
                }
                CType::Zero => return Term::oabsurd(dt.clone(), Term::LVar(z.clone())),
                _ => {}
            }
        }
        match dt {
            CType::Tensor(a, d2) => {
                let v = self.lin_value(g, a, d);
                Term::tens(v, self.lin_comp(g, z, c, d2, d))
            }
            CType::Plus(d1, d2) => {
                if self.coin(0.5) {
                    Term::oinl(dt.clone(), self.lin_comp(g, z, c, d1, d))
                } else {
                    Term::oinr(dt.clone(), self.lin_comp(g, z, c, d2, d))
                }
            }
            _ => match c {
                CType::Const(_) => Term::LVar(z.clone()),
                _ => {
                    // The target is `S`; the source still has structure to remove.
                    let c2 = c.clone();
                    self.force_decompose(g, z, &c2, dt, d)
                }
            },
        }
    }

    fn force_decompose(&mut self, g: &LGamma, z: &Name, c: &CType, dt: &CType, d: usize) -> Term {
        match c {
            CType::Tensor(a, c2) => {
                let (x, z2) = (fresh("x"), fresh("z"));
                let mut g2 = g.clone();
                g2.push((x.clone(), (**a).clone()));
                let body = self.lin_comp(&g2, &z2, c2, dt, d);
                Term::lettens(x, z2.clone(), Term::LVar(z.clone()), body)
            }
            CType::Plus(c1, c2) => {
                let (z1, z2) = (fresh("z"), fresh("z"));
                let u1 = self.lin_comp(g, &z1, c1, dt, d);
                let u2 = self.lin_comp(g, &z2, c2, dt, d);
                Term::ocase(Term::LVar(z.clone()), z1, u1, z2, u2)
            }
            CType::Zero => Term::oabsurd(dt.clone(), Term::LVar(z.clone())),
            _ => Term::LVar(z.clone()),
        }
    }

    /// A closed ECBV value of a random type.
    pub fn ecbv_value(&mut self) -> LinSample {
        let (term, ty) = loop {
            let ty = self.vtype(2);
            if let Some(t) = self.bounded(|g, d| g.lin_value(&Vec::new(), &ty, d), |t| t.depth()) {
                break (t, ty);
            }
        };
        LinSample { ctx: LinContext::new(), term, ty: LinTy::Val(ty) }
    }

    /// An ECBV computation with one linear input.
    pub fn ecbv_comp(&mut self) -> LinSample {
        let z = fresh("z");
        let (term, c, dt) = loop {
            let c = self.source_ctype(2);
            let dt = self.target_ctype(2);
            if let Some(t) = self.bounded(|g, d| g.lin_comp(&Vec::new(), &z, &c, &dt, d), |t| t.depth()) {
                break (t, c, dt);
            }
        };
        LinSample { ctx: LinContext::new().linear_name(z, c), term, ty: LinTy::Comp(dt) }
    }

    pub fn ecbv_judgement(&mut self) -> LinSample {
        if self.coin(0.5) {
            self.ecbv_value()
        } else {
            self.ecbv_comp()
        }
    }

    // ------------------------------------------------------------ CPS

    /// Computation types built from `S`, powers and additive products;
    /// `1` only when `unit` is set.
    pub fn cps_ctype(&mut self, depth: usize, unit: bool) -> CType {
        if unit && self.coin(0.1) {
            return CType::One;
        }
        if depth == 0 || self.coin(0.4) {
            return CType::state();
        }
        if self.coin(0.6) {
            CType::power(self.cps_vtype(depth - 1), self.cps_ctype(depth - 1, unit))
        } else {
            CType::with(self.cps_ctype(depth - 1, unit), self.cps_ctype(depth - 1, unit))
        }
    }

    pub fn cps_vtype(&mut self, depth: usize) -> VType {
        if depth == 0 || self.coin(0.5) {
            return match self.rng.gen_range(0..3) {
                0 => VType::Unit,
                1 => VType::bool(),
                _ if self.cfg.bases.is_empty() => VType::Unit,
                _ => VType::base(&self.base()),
            };
        }
        match self.rng.gen_range(0..3) {
            0 => VType::prod(self.cps_vtype(depth - 1), self.cps_vtype(depth - 1)),
            1 => VType::sum(self.cps_vtype(depth - 1), self.cps_vtype(depth - 1)),
            _ => VType::lolli(self.cps_ctype(depth - 1, false), self.cps_ctype(depth - 1, true)),
        }
    }

    pub fn cps_value(&mut self, g: &LGamma, ty: &VType, depth: usize) -> Term {
        let vars: Vec<Term> = g.iter().filter(|(_, t)| t == ty).map(|(x, _)| Term::Var(x.clone())).collect();
        if !vars.is_empty() && (depth == 0 || self.coin(0.35)) {
            return self.pick(&vars);
        }
        let d = depth.saturating_sub(1);
        match ty {
            VType::Unit => Term::Star,
            VType::Base(n) => Term::Const(name(&format!("c{n}")), vec![]),
            VType::Prod(a, b) => Term::pair(self.cps_value(g, a, d), self.cps_value(g, b, d)),
            VType::Sum(a, b) => {
                if self.coin(0.5) {
                    Term::inl(ty.clone(), self.cps_value(g, a, d))
                } else {
                    Term::inr(ty.clone(), self.cps_value(g, b, d))
                }
            }
            VType::Lolli(c, e) => {
                let z = fresh("z");
                let body = self.cps_comp(g, &Term::LVar(z.clone()), c, e, d);
                Term::llam(z, (**c).clone(), body)
            }
            VType::Empty => unreachable!("generators never target the empty type"),
        }
    }

    /// A CPS computation of type `dt` built from the computation `src : c`.
    /// The source type must not mention `1`.
    pub fn cps_comp(&mut self, g: &LGamma, src: &Term, c: &CType, dt: &CType, depth: usize) -> Term {
        let d = depth.saturating_sub(1);
        if depth > 0 && self.coin(0.15) {
            let mid = self.cps_ctype(1, false);
            let arg = self.cps_comp(g, src, c, &mid, d);
            let f = self.cps_value(g, &VType::lolli(mid, dt.clone()), d);
            return Term::lapp(f, arg);
        }
        if c == dt && (depth == 0 || self.coin(0.4)) {
            return src.clone();
        }
        match dt {
            CType::Power(a, d2) => {
                let x = fresh("x");
                let mut g2 = g.clone();
                g2.push((x.clone(), (**a).clone()));
                let body = self.cps_comp(&g2, src, c, d2, d);
                Term::plam(x, (**a).clone(), body)
            }
            CType::With(d1, d2) => Term::opair(self.cps_comp(g, src, c, d1, d), self.cps_comp(g, src, c, d2, d)),
            CType::One => Term::OUnit,
            _ => match c {
                CType::Power(a, c2) => {
                    let v = self.cps_value(g, a, d);
                    self.cps_comp(g, &Term::papp(src.clone(), v), c2, dt, d)
                }
                CType::With(c1, c2) => {
                    if self.coin(0.5) {
                        self.cps_comp(g, &Term::ofst(src.clone()), c1, dt, d)
                    } else {
                        self.cps_comp(g, &Term::osnd(src.clone()), c2, dt, d)
                    }
                }
                _ => src.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::{check_cps, check_ecbv, check_fg, LinMode};
    use proptest::prelude::*;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let mut a = TermGen::new(11, GenConfig::default());
        let mut b = TermGen::new(11, GenConfig::default());
        for _ in 0..20 {
            let ((x, tx), (y, ty)) = (a.closed_producer(), b.closed_producer());
            assert_eq!(tx, ty);
            assert!(crate::syntax::fg_alpha_eq(&x, &y), "{x} vs {y}");
            let (x, y) = (a.fg_judgement(), b.fg_judgement());
            assert_eq!((x.ty, x.mode, x.ctx.gamma.len()), (y.ty, y.mode, y.ctx.gamma.len()));
        }
    }

    #[test]
    fn effect_free_configuration_has_no_effects() {
        let cfg = GenConfig { effects: false, ..GenConfig::default() };
        assert!(generator_signature(&cfg).effects.is_empty());
        assert_eq!(generator_signature(&GenConfig::default()).effects.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn fg_samples_are_well_typed(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            let s = g.fg_judgement();
            prop_assert!(s.term.depth() <= g.cfg.max_depth);
            prop_assert_eq!(check_fg(&g.sig, &s.ctx, &s.term, s.mode).unwrap(), s.ty);
        }

        #[test]
        fn ecbv_samples_are_well_typed(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            let s = g.ecbv_judgement();
            match &s.ty {
                LinTy::Val(t) => prop_assert_eq!(&check_ecbv(&g.sig, &s.ctx, &s.term, LinMode::Value).unwrap(), &crate::typecheck::LinType::Val(t.clone())),
                LinTy::Comp(c) => prop_assert_eq!(&check_ecbv(&g.sig, &s.ctx, &s.term, LinMode::Computation).unwrap(), &crate::typecheck::LinType::Comp(c.clone())),
            }
        }

        #[test]
        fn cps_computations_are_well_typed(seed in any::<u64>()) {
            let mut g = TermGen::new(seed, GenConfig::default());
            let c = g.cps_ctype(2, false);
            let dt = g.cps_ctype(2, true);
            let z = fresh("z");
            let t = g.cps_comp(&Vec::new(), &Term::LVar(z.clone()), &c, &dt, 3);
            let ctx = LinContext::new().linear_name(z, c);
            prop_assert!(check_cps(&g.sig, &ctx, &t, LinMode::Computation).is_ok(), "{}", t);
        }
    }
}
