//! Finite concrete models: the store, writer and dyadic-distribution monads,
//! evaluation of all three calculi, extensional comparison of denotations
//! and the linear-use state monad check.
//!
//! Producers are run against a [`World`] (current state, output word and
//! probability weight) and may branch; this threading is exactly Kleisli
//! composition for the three monads supported here. ECBV computations are
//! read in one of two ways: the store reading interprets `S` as the finite
//! state set and `sacc` by the comodel, the Kleisli reading interprets `S`
//! as the one-point set and `sacc` by the generic effects.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::surface::{read_all, Sexp};
use crate::syntax::{name, CType, FgTerm, FgType, Name, Term, VType};
use crate::typecheck::{
    check_fg, check_lin, FgContext, FgMode, LinContext, LinFamily, LinMode, LinType, Signature, TypeError,
};

pub type Weight = Ratio<u64>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("unbound variable `{0}` in the environment")]
    MissingVariable(Name),
    #[error("no interpretation for `{0}`")]
    Uninterpreted(Name),
    #[error("not enumerable: {0}")]
    NotEnumerable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("empty base set `{0}`")]
    EmptyBase(Name),
    #[error("non-dyadic weight {0}")]
    NonDyadic(Weight),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("bad model description: {0}")]
    Description(String),
    #[error("evaluation reached an element of the empty type")]
    Unreachable,
}

type R<T> = Result<T, ModelError>;

// ---------------------------------------------------------------- elements

#[derive(Clone, Debug)]
pub enum Elem {
    Unit,
    Pair(Box<Elem>, Box<Elem>),
    Inl(Box<Elem>),
    Inr(Box<Elem>),
    Base(Name, u32),
    Fun(Fun),
}

/// A function element. Equality is identity; use observations to compare
/// functions extensionally.
#[derive(Clone)]
pub struct Fun(Arc<Closure>);

impl fmt::Debug for Fun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<fun>")
    }
}

impl PartialEq for Fun {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl PartialEq for Elem {
    fn eq(&self, other: &Self) -> bool {
        use Elem::*;
        match (self, other) {
            (Unit, Unit) => true,
            (Pair(a, b), Pair(c, d)) => a == c && b == d,
            (Inl(a), Inl(b)) | (Inr(a), Inr(b)) => a == b,
            (Base(n, i), Base(m, j)) => n == m && i == j,
            (Fun(f), Fun(g)) => f == g,
            _ => false,
        }
    }
}

impl Elem {
    pub fn pair(a: Elem, b: Elem) -> Elem {
        Elem::Pair(Box::new(a), Box::new(b))
    }
    pub fn inl(a: Elem) -> Elem {
        Elem::Inl(Box::new(a))
    }
    pub fn inr(a: Elem) -> Elem {
        Elem::Inr(Box::new(a))
    }
    /// `inl ⋆` for 0 and `inr ⋆` for 1.
    pub fn bit(b: bool) -> Elem {
        if b {
            Elem::inr(Elem::Unit)
        } else {
            Elem::inl(Elem::Unit)
        }
    }
    pub fn as_bit(&self) -> Option<bool> {
        match self {
            Elem::Inl(x) if **x == Elem::Unit => Some(false),
            Elem::Inr(x) if **x == Elem::Unit => Some(true),
            _ => None,
        }
    }
    /// A state of the store model.
    pub fn state(i: u32) -> Elem {
        Elem::Base(name("S"), i)
    }
    pub fn as_state(&self) -> Option<u32> {
        match self {
            Elem::Base(_, i) => Some(*i),
            _ => None,
        }
    }
    fn split(&self) -> R<(&Elem, &Elem)> {
        match self {
            Elem::Pair(a, b) => Ok((a, b)),
            _ => Err(ModelError::Unsupported(format!("expected a pair, found {self}"))),
        }
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Unit => f.write_str("star"),
            Elem::Pair(a, b) => write!(f, "(pair {a} {b})"),
            Elem::Inl(a) => write!(f, "(inl {a})"),
            Elem::Inr(a) => write!(f, "(inr {a})"),
            Elem::Base(n, i) => write!(f, "{n}.{i}"),
            Elem::Fun(_) => f.write_str("<fun>"),
        }
    }
}

/// Tuple of generic-effect arguments, matching the typing convention.
pub fn tuple_elem(vs: &[Elem]) -> Elem {
    match vs {
        [] => Elem::Unit,
        [v] => v.clone(),
        [v, rest @ ..] => Elem::pair(v.clone(), tuple_elem(rest)),
    }
}

/// Persistent variable environment.
#[derive(Clone, Default)]
pub struct Env(Option<Arc<EnvNode>>);

struct EnvNode {
    name: Name,
    val: Elem,
    next: Env,
}

impl Env {
    pub fn new() -> Env {
        Env(None)
    }
    pub fn from_pairs(ps: &[(Name, Elem)]) -> Env {
        ps.iter().fold(Env::new(), |e, (x, v)| e.bind(x.clone(), v.clone()))
    }
    pub fn bind(&self, x: Name, v: Elem) -> Env {
        Env(Some(Arc::new(EnvNode { name: x, val: v, next: self.clone() })))
    }
    pub fn get(&self, x: &Name) -> Option<&Elem> {
        let mut cur = &self.0;
        while let Some(n) = cur {
            if n.name == *x {
                return Some(&n.val);
            }
            cur = &n.next.0;
        }
        None
    }
}

enum Closure {
    FgLam { x: Name, body: FgTerm, env: Env },
    LLam { z: Name, body: Term, env: Env, family: LinFamily },
    PLam { x: Name, body: Term, env: Env, lin: Env, family: LinFamily },
    Sacc(Name, LinFamily),
    SaccCont { e: Name, k: Elem },
    SaccState { e: Name, k: Elem, b: Elem },
    /// `a ↦ s ↦ (a, s + shift)`, the final continuation of CPS runs.
    Answer { shift: u32 },
    AnswerAt { a: Elem, shift: u32 },
    Table(Vec<(Elem, Elem)>),
    TTable(Vec<(Elem, TVal)>),
    /// A Kleisli function `σ ⇀ τ` read as `(σ ⊗ S) ⊸ (τ ⊗ S)`.
    ToStore { from: FgType, to: FgType, f: Elem },
    /// The inverse reading.
    FromStore { from: FgType, to: FgType, g: Elem },
}

fn fun(c: Closure) -> Elem {
    Elem::Fun(Fun(Arc::new(c)))
}

/// The generic CPS continuation `a ↦ s ↦ (a, s)`.
pub fn answer_continuation() -> Elem {
    fun(Closure::Answer { shift: 0 })
}

/// A pure function element given by its graph.
pub fn table_fun(graph: Vec<(Elem, Elem)>) -> Elem {
    fun(Closure::Table(graph))
}

/// A Kleisli function element `A → T B` given by its graph.
pub fn kleisli_fun(graph: Vec<(Elem, TVal)>) -> Elem {
    fun(Closure::TTable(graph))
}

// ---------------------------------------------------------------- monads

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    pub state: u32,
    pub word: Vec<u8>,
    pub weight: Weight,
}

impl World {
    pub fn at(state: u32) -> World {
        World { state, word: Vec::new(), weight: Weight::from_integer(1) }
    }
}

/// An element of `T A` for one of the supported monads.
#[derive(Clone, Debug, PartialEq)]
pub enum TVal {
    /// Indexed by initial state: result and final state.
    Store(Vec<(Elem, u32)>),
    Writer(Vec<u8>, Elem),
    Dist(Vec<(Elem, Weight)>),
}

impl fmt::Display for TVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TVal::Store(t) => {
                let parts: Vec<String> = t.iter().enumerate().map(|(s, (e, s2))| format!("{s}->({e},{s2})")).collect();
                write!(f, "[{}]", parts.join(" "))
            }
            TVal::Writer(w, e) => write!(f, "(\"{}\", {e})", String::from_utf8_lossy(w)),
            TVal::Dist(d) => {
                let parts: Vec<String> = d.iter().map(|(e, p)| format!("{p}:{e}")).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MonadKind {
    Store { states: u32 },
    Writer { alphabet: Vec<u8> },
    Dyadic,
}

/// How ECBV computation types and `sacc` are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reading {
    /// Computation objects are sets, `S` is the state set, `sacc` is the comodel.
    Store,
    /// Computation objects are Kleisli objects, `S` is the one-point set.
    Kleisli,
}

/// An effect operation run in a world: parameters to branches.
pub type OpFn = Arc<dyn Fn(&Elem, &World) -> R<Vec<(Elem, World)>> + Send + Sync>;
pub type ConstFn = Arc<dyn Fn(&[Elem]) -> R<Elem> + Send + Sync>;

#[derive(Clone)]
pub struct ConcreteModel {
    pub monad: MonadKind,
    pub bases: BTreeMap<Name, u32>,
    pub default_base: u32,
    pub effects: BTreeMap<Name, OpFn>,
    pub consts: BTreeMap<Name, ConstFn>,
    pub reading: Reading,
    /// Bound on exhaustive enumeration before falling back to sampling.
    pub sample_cap: usize,
}

impl fmt::Debug for ConcreteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConcreteModel")
            .field("monad", &self.monad)
            .field("bases", &self.bases)
            .field("effects", &self.effects.keys().collect::<Vec<_>>())
            .field("reading", &self.reading)
            .finish()
    }
}

impl ConcreteModel {
    fn with_monad(monad: MonadKind, reading: Reading) -> Self {
        ConcreteModel {
            monad,
            bases: BTreeMap::new(),
            default_base: 2,
            effects: BTreeMap::new(),
            consts: BTreeMap::new(),
            reading,
            sample_cap: 512,
        }
    }
    pub fn store(states: u32) -> Self {
        Self::with_monad(MonadKind::Store { states }, Reading::Store)
    }
    pub fn writer(alphabet: &[u8]) -> Self {
        Self::with_monad(MonadKind::Writer { alphabet: alphabet.to_vec() }, Reading::Kleisli)
    }
    pub fn dyadic() -> Self {
        Self::with_monad(MonadKind::Dyadic, Reading::Kleisli)
    }
    /// The one-state store model, used for effect-free terms.
    pub fn pure_default() -> Self {
        Self::store(1)
    }
    pub fn with_base(mut self, n: &str, size: u32) -> Self {
        self.bases.insert(name(n), size);
        self
    }
    pub fn with_effect(mut self, e: &str, op: OpFn) -> Self {
        self.effects.insert(name(e), op);
        self
    }
    pub fn with_const(mut self, f: &str, c: ConstFn) -> Self {
        self.consts.insert(name(f), c);
        self
    }
    pub fn with_reading(mut self, r: Reading) -> Self {
        self.reading = r;
        self
    }

    pub fn states(&self) -> u32 {
        match self.monad {
            MonadKind::Store { states } => states,
            _ => 1,
        }
    }

    pub fn describe(&self) -> String {
        match &self.monad {
            MonadKind::Store { states } => format!("store |S|={states}"),
            MonadKind::Writer { alphabet } => format!("writer over {:?}", String::from_utf8_lossy(alphabet)),
            MonadKind::Dyadic => "dyadic distribution".to_string(),
        }
    }

    pub fn base_size(&self, n: &Name) -> R<u32> {
        let k = self.bases.get(n).copied().unwrap_or(self.default_base);
        if k == 0 {
            return Err(ModelError::EmptyBase(n.clone()));
        }
        Ok(k)
    }

    pub fn unit(&self, e: Elem) -> TVal {
        match self.monad {
            MonadKind::Store { states } => TVal::Store((0..states).map(|s| (e.clone(), s)).collect()),
            MonadKind::Writer { .. } => TVal::Writer(Vec::new(), e),
            MonadKind::Dyadic => TVal::Dist(vec![(e, Weight::from_integer(1))]),
        }
    }

    /// Collect the branches of a world-threaded run into a `T`-element.
    pub fn reify(&self, run: impl Fn(World) -> R<Vec<(Elem, World)>>) -> R<TVal> {
        match self.monad {
            MonadKind::Store { states } => {
                let mut out = Vec::new();
                for s in 0..states {
                    let mut r = run(World::at(s))?;
                    if r.len() != 1 {
                        return Err(ModelError::Unsupported("store run did not yield one result".into()));
                    }
                    let (e, w) = r.pop().unwrap();
                    out.push((e, w.state));
                }
                Ok(TVal::Store(out))
            }
            MonadKind::Writer { .. } => {
                let mut r = run(World::at(0))?;
                if r.len() != 1 {
                    return Err(ModelError::Unsupported("writer run did not yield one result".into()));
                }
                let (e, w) = r.pop().unwrap();
                Ok(TVal::Writer(w.word, e))
            }
            MonadKind::Dyadic => {
                let r = run(World::at(0))?;
                let mut total = Weight::from_integer(0);
                for (_, w) in &r {
                    if !w.weight.denom().is_power_of_two() {
                        return Err(ModelError::NonDyadic(w.weight));
                    }
                    total += w.weight;
                }
                if total != Weight::from_integer(1) {
                    return Err(ModelError::NonDyadic(total));
                }
                Ok(TVal::Dist(r.into_iter().map(|(e, w)| (e, w.weight)).collect()))
            }
        }
    }

    /// Run a `T`-element in a world.
    pub fn run(&self, t: &TVal, w: World) -> R<Vec<(Elem, World)>> {
        match t {
            TVal::Store(tab) => {
                let (e, s) = tab
                    .get(w.state as usize)
                    .ok_or_else(|| ModelError::Unsupported(format!("state {} out of range", w.state)))?;
                Ok(vec![(e.clone(), World { state: *s, ..w })])
            }
            TVal::Writer(word, e) => {
                let mut w = w;
                w.word.extend_from_slice(word);
                Ok(vec![(e.clone(), w)])
            }
            TVal::Dist(d) => Ok(d
                .iter()
                .map(|(e, p)| (e.clone(), World { weight: w.weight * *p, ..w.clone() }))
                .collect()),
        }
    }

    pub fn bind(&self, t: &TVal, f: impl Fn(&Elem) -> R<TVal>) -> R<TVal> {
        self.reify(|w| {
            let mut out = Vec::new();
            for (a, w1) in self.run(t, w)? {
                out.extend(self.run(&f(&a)?, w1)?);
            }
            Ok(out)
        })
    }
}

// ---------------------------------------------------------------- model files

fn desc_err<T>(msg: impl Into<String>) -> R<T> {
    Err(ModelError::Description(msg.into()))
}

fn sexp_u32(s: &Sexp) -> R<u32> {
    s.atom().and_then(|a| a.parse().ok()).map_or_else(|| desc_err(format!("expected a number, found {s}")), Ok)
}

/// Parse `(model store (state 2) (base bool 2) (base val 3))`,
/// `(model writer (alphabet 0 1))` or `(model dyadic)`.
pub fn parse_model(src: &str) -> R<ConcreteModel> {
    let forms = read_all(src).map_err(|e| ModelError::Description(e.to_string()))?;
    let [form] = forms.as_slice() else { return desc_err("expected exactly one model form") };
    let items = form.list().filter(|_| form.head() == Some("model")).ok_or(ModelError::Description(
        "expected (model kind clauses...)".into(),
    ))?;
    let kind = items.get(1).and_then(|k| k.atom()).ok_or(ModelError::Description("missing model kind".into()))?;
    let mut states = 2;
    let mut alphabet = b"01".to_vec();
    let mut bases = Vec::new();
    let mut reading = None;
    for clause in &items[2..] {
        let parts = clause.list().ok_or(ModelError::Description(format!("bad clause {clause}")))?;
        match clause.head() {
            Some("state") if parts.len() == 2 => states = sexp_u32(&parts[1])?,
            Some("base") if parts.len() == 3 => {
                let n = parts[1].atom().ok_or(ModelError::Description("base name".into()))?;
                let k = sexp_u32(&parts[2])?;
                if k == 0 {
                    return Err(ModelError::EmptyBase(name(n)));
                }
                bases.push((n.to_string(), k));
            }
            Some("alphabet") => {
                alphabet = parts[1..]
                    .iter()
                    .map(|p| p.atom().and_then(|a| a.bytes().next()).ok_or(ModelError::Description("symbol".into())))
                    .collect::<R<_>>()?;
            }
            Some("reading") if parts.len() == 2 => {
                reading = Some(match parts[1].atom() {
                    Some("store") => Reading::Store,
                    Some("kleisli") => Reading::Kleisli,
                    _ => return desc_err("reading is store or kleisli"),
                })
            }
            _ => return desc_err(format!("unknown clause {clause}")),
        }
    }
    let mut m = match kind {
        "store" => {
            if states == 0 {
                return Err(ModelError::EmptyBase(name("S")));
            }
            ConcreteModel::store(states)
        }
        "writer" => ConcreteModel::writer(&alphabet),
        "dyadic" => ConcreteModel::dyadic(),
        other => return desc_err(format!("unknown model kind `{other}`")),
    };
    for (n, k) in bases {
        m = m.with_base(&n, k);
    }
    if let Some(r) = reading {
        m.reading = r;
    }
    Ok(m)
}

// ---------------------------------------------------------------- evaluation

struct Ev<'a> {
    m: &'a ConcreteModel,
    sig: &'a Signature,
}

type Branches = Vec<(Elem, World)>;

fn single(mut r: Branches, what: &str) -> R<(Elem, World)> {
    if r.len() != 1 {
        return Err(ModelError::Unsupported(format!("{what} must be deterministic here")));
    }
    Ok(r.pop().unwrap())
}

impl Ev<'_> {
    fn lookup(&self, env: &Env, x: &Name) -> R<Elem> {
        env.get(x).cloned().ok_or_else(|| ModelError::MissingVariable(x.clone()))
    }

    fn op(&self, e: &Name, arg: &Elem, w: &World) -> R<Branches> {
        let op = self.m.effects.get(e).ok_or_else(|| ModelError::Uninterpreted(e.clone()))?;
        op(arg, w)
    }

    fn konst(&self, f: &Name, args: Vec<Elem>) -> R<Elem> {
        if let Some(c) = self.m.consts.get(f) {
            return c(&args);
        }
        let ar = self.sig.consts.get(f).ok_or_else(|| ModelError::Uninterpreted(f.clone()))?;
        let dom = self.fg_dom(&ar.result)?;
        if dom.elems.is_empty() {
            return Err(ModelError::Unreachable);
        }
        let key = format!("{f}{args:?}");
        let h = key.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
        Ok(dom.elems[(h % dom.elems.len() as u64) as usize].clone())
    }

    fn case_fg(&self, env: &Env, v: &Elem, x1: &Name, w1: &FgTerm, x2: &Name, w2: &FgTerm) -> R<Elem> {
        match v {
            Elem::Inl(a) => self.fg_val(&env.bind(x1.clone(), (**a).clone()), w1),
            Elem::Inr(a) => self.fg_val(&env.bind(x2.clone(), (**a).clone()), w2),
            _ => Err(ModelError::Unsupported(format!("case on {v}"))),
        }
    }

    fn fg_val(&self, env: &Env, t: &FgTerm) -> R<Elem> {
        use FgTerm::*;
        Ok(match t {
            Var(x) => self.lookup(env, x)?,
            Star => Elem::Unit,
            Pair(a, b) => Elem::pair(self.fg_val(env, a)?, self.fg_val(env, b)?),
            Fst(a) => self.fg_val(env, a)?.split()?.0.clone(),
            Snd(a) => self.fg_val(env, a)?.split()?.1.clone(),
            Lam(x, _, body) => fun(Closure::FgLam { x: x.clone(), body: (**body).clone(), env: env.clone() }),
            Const(f, vs) => {
                let args = vs.iter().map(|v| self.fg_val(env, v)).collect::<R<Vec<_>>>()?;
                self.konst(f, args)?
            }
            Inl(_, a) => Elem::inl(self.fg_val(env, a)?),
            Inr(_, a) => Elem::inr(self.fg_val(env, a)?),
            Case(a, x1, w1, x2, w2) => {
                let v = self.fg_val(env, a)?;
                self.case_fg(env, &v, x1, w1, x2, w2)?
            }
            Absurd(..) => return Err(ModelError::Unreachable),
            Return(_) | Let(..) | App(..) | Geff(..) => {
                return Err(ModelError::Unsupported(format!("producer `{t}` in value position")))
            }
        })
    }

    fn fg_prod(&self, env: &Env, t: &FgTerm, w: World) -> R<Branches> {
        use FgTerm::*;
        match t {
            Return(v) => Ok(vec![(self.fg_val(env, v)?, w)]),
            Let(x, m, n) => {
                let mut out = Vec::new();
                for (a, w1) in self.fg_prod(env, m, w)? {
                    out.extend(self.fg_prod(&env.bind(x.clone(), a), n, w1)?);
                }
                Ok(out)
            }
            App(f, a) => {
                let f = self.fg_val(env, f)?;
                let a = self.fg_val(env, a)?;
                self.apply(&f, a, w)
            }
            Geff(e, vs) => {
                let args = vs.iter().map(|v| self.fg_val(env, v)).collect::<R<Vec<_>>>()?;
                self.op(e, &tuple_elem(&args), &w)
            }
            _ => Err(ModelError::Unsupported(format!("value `{t}` in producer position"))),
        }
    }

    fn lin_val(&self, env: &Env, t: &Term, family: LinFamily) -> R<Elem> {
        use Term::*;
        Ok(match t {
            Var(x) => self.lookup(env, x)?,
            Star => Elem::Unit,
            Pair(a, b) => Elem::pair(self.lin_val(env, a, family)?, self.lin_val(env, b, family)?),
            Fst(a) => self.lin_val(env, a, family)?.split()?.0.clone(),
            Snd(a) => self.lin_val(env, a, family)?.split()?.1.clone(),
            LLam(z, _, body) => fun(Closure::LLam { z: z.clone(), body: (**body).clone(), env: env.clone(), family }),
            Const(f, vs) => {
                let args = vs.iter().map(|v| self.lin_val(env, v, family)).collect::<R<Vec<_>>>()?;
                self.konst(f, args)?
            }
            Inl(_, a) => Elem::inl(self.lin_val(env, a, family)?),
            Inr(_, a) => Elem::inr(self.lin_val(env, a, family)?),
            Case(a, x1, w1, x2, w2) => match self.lin_val(env, a, family)? {
                Elem::Inl(v) => self.lin_val(&env.bind(x1.clone(), *v), w1, family)?,
                Elem::Inr(v) => self.lin_val(&env.bind(x2.clone(), *v), w2, family)?,
                v => return Err(ModelError::Unsupported(format!("case on {v}"))),
            },
            Absurd(..) => return Err(ModelError::Unreachable),
            Sacc(e) => fun(Closure::Sacc(e.clone(), family)),
            _ => return Err(ModelError::Unsupported(format!("computation `{t}` in value position"))),
        })
    }

    fn lin_comp(&self, env: &Env, lin: &Env, t: &Term, w: World, family: LinFamily) -> R<Branches> {
        use Term::*;
        match t {
            LVar(z) => Ok(vec![(self.lookup(lin, z)?, w)]),
            LApp(f, a) => {
                let fv = self.lin_val(env, f, family)?;
                let mut out = Vec::new();
                for (x, w1) in self.lin_comp(env, lin, a, w, family)? {
                    out.extend(self.apply(&fv, x, w1)?);
                }
                Ok(out)
            }
            Tens(v, a) => {
                let ve = self.lin_val(env, v, family)?;
                let r = self.lin_comp(env, lin, a, w, family)?;
                Ok(r.into_iter().map(|(x, w)| (Elem::pair(ve.clone(), x), w)).collect())
            }
            LetTens(x, z, a, u) => {
                let mut out = Vec::new();
                for (p, w1) in self.lin_comp(env, lin, a, w, family)? {
                    let (l, r) = p.split()?;
                    let env2 = env.bind(x.clone(), l.clone());
                    let lin2 = lin.bind(z.clone(), r.clone());
                    out.extend(self.lin_comp(&env2, &lin2, u, w1, family)?);
                }
                Ok(out)
            }
            OInl(_, a) => Ok(self.lin_comp(env, lin, a, w, family)?.into_iter().map(|(x, w)| (Elem::inl(x), w)).collect()),
            OInr(_, a) => Ok(self.lin_comp(env, lin, a, w, family)?.into_iter().map(|(x, w)| (Elem::inr(x), w)).collect()),
            OCase(a, z1, u1, z2, u2) => {
                let mut out = Vec::new();
                for (p, w1) in self.lin_comp(env, lin, a, w, family)? {
                    out.extend(match p {
                        Elem::Inl(q) => self.lin_comp(env, &lin.bind(z1.clone(), *q), u1, w1, family)?,
                        Elem::Inr(q) => self.lin_comp(env, &lin.bind(z2.clone(), *q), u2, w1, family)?,
                        other => return Err(ModelError::Unsupported(format!("ocase on {other}"))),
                    });
                }
                Ok(out)
            }
            OAbsurd(_, a) => {
                if self.lin_comp(env, lin, a, w, family)?.is_empty() {
                    Ok(Vec::new())
                } else {
                    Err(ModelError::Unreachable)
                }
            }
            PLam(x, _, body) => Ok(vec![(
                fun(Closure::PLam { x: x.clone(), body: (**body).clone(), env: env.clone(), lin: lin.clone(), family }),
                w,
            )]),
            PApp(a, v) => {
                let ve = self.lin_val(env, v, family)?;
                let mut out = Vec::new();
                for (f, w1) in self.lin_comp(env, lin, a, w, family)? {
                    out.extend(self.apply(&f, ve.clone(), w1)?);
                }
                Ok(out)
            }
            OPair(a, b) => {
                let (x, _) = single(self.lin_comp(env, lin, a, w.clone(), family)?, "additive pair")?;
                let (y, _) = single(self.lin_comp(env, lin, b, w.clone(), family)?, "additive pair")?;
                Ok(vec![(Elem::pair(x, y), w)])
            }
            OFst(a) | OSnd(a) => {
                let first = matches!(t, OFst(_));
                let r = self.lin_comp(env, lin, a, w, family)?;
                r.into_iter()
                    .map(|(p, w)| {
                        let (l, rr) = p.split()?;
                        Ok((if first { l.clone() } else { rr.clone() }, w))
                    })
                    .collect()
            }
            OUnit => Ok(vec![(Elem::Unit, w)]),
            _ => Err(ModelError::Unsupported(format!("value `{t}` in computation position"))),
        }
    }

    fn store_op(&self, e: &Name, params: &Elem, s: u32, w: &World) -> R<(Elem, u32)> {
        let (res, w2) = single(self.op(e, params, &World { state: s, ..w.clone() })?, "a state access")?;
        if w2.word != w.word || w2.weight != w.weight {
            return Err(ModelError::Unsupported(format!("`{e}` is not a pure state access")));
        }
        Ok((res, w2.state))
    }

    fn apply(&self, f: &Elem, a: Elem, w: World) -> R<Branches> {
        let Elem::Fun(Fun(c)) = f else { return Err(ModelError::Unsupported(format!("applying {f}"))) };
        match &**c {
            Closure::FgLam { x, body, env } => self.fg_prod(&env.bind(x.clone(), a), body, w),
            Closure::LLam { z, body, env, family } => {
                self.lin_comp(env, &Env::new().bind(z.clone(), a), body, w, *family)
            }
            Closure::PLam { x, body, env, lin, family } => self.lin_comp(&env.bind(x.clone(), a), lin, body, w, *family),
            Closure::Sacc(e, LinFamily::Ecbv) => {
                let (params, st) = a.split()?;
                match self.m.reading {
                    Reading::Store => {
                        let s = st.as_state().ok_or_else(|| ModelError::Unsupported(format!("state {st}")))?;
                        let (res, s2) = self.store_op(e, params, s, &w)?;
                        Ok(vec![(Elem::pair(res, Elem::state(s2)), w)])
                    }
                    Reading::Kleisli => Ok(self
                        .op(e, params, &w)?
                        .into_iter()
                        .map(|(res, w)| (Elem::pair(res, Elem::Unit), w))
                        .collect()),
                }
            }
            Closure::Sacc(e, LinFamily::Cps) => Ok(vec![(fun(Closure::SaccCont { e: e.clone(), k: a }), w)]),
            Closure::SaccCont { e, k } => Ok(vec![(fun(Closure::SaccState { e: e.clone(), k: k.clone(), b: a }), w)]),
            Closure::SaccState { e, k, b } => {
                let s = a.as_state().ok_or_else(|| ModelError::Unsupported(format!("state {a}")))?;
                let (res, s2) = self.store_op(e, b, s, &w)?;
                let (r, w1) = single(self.apply(k, res, w)?, "a continuation")?;
                self.apply(&r, Elem::state(s2), w1)
            }
            Closure::Answer { shift } => Ok(vec![(fun(Closure::AnswerAt { a, shift: *shift }), w)]),
            Closure::AnswerAt { a: v, shift } => {
                let s = a.as_state().ok_or_else(|| ModelError::Unsupported(format!("state {a}")))?;
                let n = self.m.states().max(1);
                Ok(vec![(Elem::pair(v.clone(), Elem::state((s + shift) % n)), w)])
            }
            Closure::ToStore { from, to, f } => {
                let (x, st) = a.split()?;
                let s = st.as_state().ok_or_else(|| ModelError::Unsupported(format!("state {st}")))?;
                let (y, w2) =
                    single(self.apply(f, from_store(from, x), World { state: s, ..w.clone() })?, "a store function")?;
                Ok(vec![(Elem::pair(to_store(to, &y), Elem::state(w2.state)), w)])
            }
            Closure::FromStore { from, to, g } => {
                let arg = Elem::pair(to_store(from, &a), Elem::state(w.state));
                let (p, _) = single(self.apply(g, arg, w.clone())?, "a store function")?;
                let (y, st) = p.split()?;
                let s2 = st.as_state().ok_or_else(|| ModelError::Unsupported(format!("state {st}")))?;
                Ok(vec![(from_store(to, y), World { state: s2, ..w })])
            }
            Closure::Table(g) => match g.iter().find(|(x, _)| *x == a) {
                Some((_, y)) => Ok(vec![(y.clone(), w)]),
                None => Err(ModelError::Unsupported(format!("{a} outside a tabulated domain"))),
            },
            Closure::TTable(g) => match g.iter().find(|(x, _)| *x == a) {
                Some((_, t)) => self.m.run(t, w),
                None => Err(ModelError::Unsupported(format!("{a} outside a tabulated domain"))),
            },
        }
    }
}

/// Transport an element of the Kleisli model of the store monad to the
/// store reading of its state-passing type.
pub fn to_store(ty: &FgType, e: &Elem) -> Elem {
    match (ty, e) {
        (FgType::Prod(a, b), Elem::Pair(x, y)) => Elem::pair(to_store(a, x), to_store(b, y)),
        (FgType::Sum(a, _), Elem::Inl(x)) => Elem::inl(to_store(a, x)),
        (FgType::Sum(_, b), Elem::Inr(x)) => Elem::inr(to_store(b, x)),
        (FgType::Parr(a, b), f) => {
            fun(Closure::ToStore { from: (**a).clone(), to: (**b).clone(), f: f.clone() })
        }
        _ => e.clone(),
    }
}

/// Inverse of [`to_store`].
pub fn from_store(ty: &FgType, e: &Elem) -> Elem {
    match (ty, e) {
        (FgType::Prod(a, b), Elem::Pair(x, y)) => Elem::pair(from_store(a, x), from_store(b, y)),
        (FgType::Sum(a, _), Elem::Inl(x)) => Elem::inl(from_store(a, x)),
        (FgType::Sum(_, b), Elem::Inr(x)) => Elem::inr(from_store(b, x)),
        (FgType::Parr(a, b), g) => {
            fun(Closure::FromStore { from: (**a).clone(), to: (**b).clone(), g: g.clone() })
        }
        _ => e.clone(),
    }
}

// ---------------------------------------------------------------- public evaluation

/// Result of an evaluation: a plain element or a `T`-element.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Elem(Elem),
    T(TVal),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Elem(e) => write!(f, "{e}"),
            Outcome::T(t) => write!(f, "{t}"),
        }
    }
}

/// Evaluate an FGCBV term in the Kleisli model.
pub fn eval_fg(m: &ConcreteModel, sig: &Signature, env: &[(Name, Elem)], t: &FgTerm, mode: FgMode) -> R<Outcome> {
    let ev = Ev { m, sig };
    let env = Env::from_pairs(env);
    match mode {
        FgMode::Value => Ok(Outcome::Elem(ev.fg_val(&env, t)?)),
        FgMode::Producer => Ok(Outcome::T(m.reify(|w| ev.fg_prod(&env, t, w))?)),
    }
}

/// Run a producer from one initial world.
pub fn run_fg(m: &ConcreteModel, sig: &Signature, env: &[(Name, Elem)], t: &FgTerm, w: World) -> R<Vec<(Elem, World)>> {
    Ev { m, sig }.fg_prod(&Env::from_pairs(env), t, w)
}

/// Evaluate an ECBV or CPS term. Under the store reading (and for CPS)
/// the result is an element; under the Kleisli reading computations give
/// `T`-elements.
pub fn eval_lin(
    m: &ConcreteModel,
    sig: &Signature,
    family: LinFamily,
    env: &[(Name, Elem)],
    lin: Option<(Name, Elem)>,
    t: &Term,
    mode: LinMode,
) -> R<Outcome> {
    let ev = Ev { m, sig };
    let env = Env::from_pairs(env);
    match (mode, lin) {
        (LinMode::Value, _) => Ok(Outcome::Elem(ev.lin_val(&env, t, family)?)),
        (LinMode::Computation, Some((z, e))) => {
            let lenv = Env::new().bind(z, e);
            if family == LinFamily::Cps || m.reading == Reading::Store {
                let (x, _) = single(ev.lin_comp(&env, &lenv, t, World::at(0), family)?, "a computation")?;
                Ok(Outcome::Elem(x))
            } else {
                Ok(Outcome::T(m.reify(|w| ev.lin_comp(&env, &lenv, t, w, family))?))
            }
        }
        (LinMode::Computation, None) => Err(ModelError::Arity("a computation needs a linear input".into())),
    }
}

pub fn eval_ecbv(
    m: &ConcreteModel,
    sig: &Signature,
    env: &[(Name, Elem)],
    lin: Option<(Name, Elem)>,
    t: &Term,
    mode: LinMode,
) -> R<Outcome> {
    eval_lin(m, sig, LinFamily::Ecbv, env, lin, t, mode)
}

/// Apply a function element to an argument in a world.
pub fn apply_elem(m: &ConcreteModel, sig: &Signature, f: &Elem, a: Elem, w: World) -> R<Vec<(Elem, World)>> {
    Ev { m, sig }.apply(f, a, w)
}

// ---------------------------------------------------------------- enumeration

/// A list of elements, flagged when it is a sample rather than everything.
#[derive(Clone, Debug)]
pub struct Dom {
    pub elems: Vec<Elem>,
    pub sampled: bool,
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_1234)
}

/// All tuples of the cartesian product, or a deterministic sample of `cap`.
pub fn product(lists: &[Vec<Elem>], cap: usize) -> (Vec<Vec<Elem>>, bool) {
    let total = lists.iter().fold(1usize, |acc, l| acc.saturating_mul(l.len()));
    if total <= cap {
        let mut out = vec![Vec::new()];
        for l in lists {
            let mut next = Vec::with_capacity(out.len() * l.len());
            for pre in &out {
                for e in l {
                    let mut p = pre.clone();
                    p.push(e.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        (out, false)
    } else {
        let mut r = rng();
        let out = (0..cap).map(|_| lists.iter().map(|l| l[r.gen_range(0..l.len())].clone()).collect()).collect();
        (out, true)
    }
}

/// All graphs of functions `dom → cod`, or a deterministic sample.
pub fn graphs<V: Clone>(dom: &[Elem], cod: &[V], cap: usize) -> (Vec<Vec<(Elem, V)>>, bool) {
    if dom.is_empty() {
        return (vec![Vec::new()], false);
    }
    if cod.is_empty() {
        return (Vec::new(), false);
    }
    let total = (0..dom.len()).try_fold(1usize, |acc, _| acc.checked_mul(cod.len()).filter(|n| *n <= cap));
    match total {
        Some(total) => {
            let out = (0..total)
                .map(|mut k| {
                    dom.iter()
                        .map(|d| {
                            let v = cod[k % cod.len()].clone();
                            k /= cod.len();
                            (d.clone(), v)
                        })
                        .collect()
                })
                .collect();
            (out, false)
        }
        None => {
            let mut r = rng();
            let out = (0..cap)
                .map(|_| dom.iter().map(|d| (d.clone(), cod[r.gen_range(0..cod.len())].clone())).collect())
                .collect();
            (out, true)
        }
    }
}

impl Ev<'_> {
    fn fg_dom(&self, t: &FgType) -> R<Dom> {
        Ok(match t {
            FgType::Unit => Dom { elems: vec![Elem::Unit], sampled: false },
            FgType::Empty => Dom { elems: vec![], sampled: false },
            FgType::Base(n) => {
                Dom { elems: (0..self.m.base_size(n)?).map(|i| Elem::Base(n.clone(), i)).collect(), sampled: false }
            }
            FgType::Prod(a, b) => self.pair_dom(self.fg_dom(a)?, self.fg_dom(b)?),
            FgType::Sum(a, b) => sum_dom(self.fg_dom(a)?, self.fg_dom(b)?),
            FgType::Parr(a, b) => {
                let da = self.fg_dom(a)?;
                let ts = self.t_dom(&self.fg_dom(b)?);
                let (gs, s) = graphs(&da.elems, &ts.elems_t, self.m.sample_cap);
                Dom { elems: gs.into_iter().map(kleisli_fun).collect(), sampled: s || da.sampled || ts.sampled }
            }
        })
    }

    fn pair_dom(&self, a: Dom, b: Dom) -> Dom {
        let (ps, s) = product(&[a.elems, b.elems], self.m.sample_cap);
        Dom {
            elems: ps.into_iter().map(|mut p| {
                let y = p.pop().unwrap();
                let x = p.pop().unwrap();
                Elem::pair(x, y)
            }).collect(),
            sampled: s || a.sampled || b.sampled,
        }
    }

    /// `T`-elements over a domain: exhaustive for the store monad, a sample
    /// otherwise.
    fn t_dom(&self, d: &Dom) -> TDom {
        match &self.m.monad {
            MonadKind::Store { states } => {
                let outs: Vec<Elem> = d
                    .elems
                    .iter()
                    .flat_map(|e| (0..*states).map(move |s| Elem::pair(e.clone(), Elem::state(s))))
                    .collect();
                let sts: Vec<Elem> = (0..*states).map(Elem::state).collect();
                let (gs, s) = graphs(&sts, &outs, self.m.sample_cap);
                let elems_t = gs
                    .into_iter()
                    .map(|g| {
                        TVal::Store(
                            g.into_iter()
                                .map(|(_, o)| {
                                    let Elem::Pair(e, st) = o else { unreachable!() };
                                    (*e, st.as_state().unwrap())
                                })
                                .collect(),
                        )
                    })
                    .collect();
                TDom { elems_t, sampled: s || d.sampled }
            }
            MonadKind::Writer { alphabet } => {
                let mut elems_t = Vec::new();
                for e in &d.elems {
                    elems_t.push(TVal::Writer(Vec::new(), e.clone()));
                    for c in alphabet {
                        elems_t.push(TVal::Writer(vec![*c], e.clone()));
                    }
                }
                TDom { elems_t, sampled: true }
            }
            MonadKind::Dyadic => {
                let half = Weight::new(1, 2);
                let mut elems_t: Vec<TVal> =
                    d.elems.iter().map(|e| TVal::Dist(vec![(e.clone(), Weight::from_integer(1))])).collect();
                for (i, a) in d.elems.iter().enumerate() {
                    for b in &d.elems[i + 1..] {
                        elems_t.push(TVal::Dist(vec![(a.clone(), half), (b.clone(), half)]));
                    }
                }
                TDom { elems_t, sampled: true }
            }
        }
    }

    fn v_dom(&self, t: &VType) -> R<Dom> {
        Ok(match t {
            VType::Unit => Dom { elems: vec![Elem::Unit], sampled: false },
            VType::Empty => Dom { elems: vec![], sampled: false },
            VType::Base(n) => {
                Dom { elems: (0..self.m.base_size(n)?).map(|i| Elem::Base(n.clone(), i)).collect(), sampled: false }
            }
            VType::Prod(a, b) => self.pair_dom(self.v_dom(a)?, self.v_dom(b)?),
            VType::Sum(a, b) => sum_dom(self.v_dom(a)?, self.v_dom(b)?),
            VType::Lolli(c, d) => {
                let dc = self.c_dom(c)?;
                let dd = self.c_dom(d)?;
                match self.m.reading {
                    Reading::Store => {
                        let (gs, s) = graphs(&dc.elems, &dd.elems, self.m.sample_cap);
                        Dom { elems: gs.into_iter().map(table_fun).collect(), sampled: s || dc.sampled || dd.sampled }
                    }
                    Reading::Kleisli => {
                        let ts = self.t_dom(&dd);
                        let (gs, s) = graphs(&dc.elems, &ts.elems_t, self.m.sample_cap);
                        Dom { elems: gs.into_iter().map(kleisli_fun).collect(), sampled: s || dc.sampled || ts.sampled }
                    }
                }
            }
        })
    }

    fn c_dom(&self, t: &CType) -> R<Dom> {
        Ok(match t {
            CType::Const(n) if **n == *"R" => Dom {
                elems: vec![fun(Closure::AnswerAt { a: Elem::Unit, shift: 0 }), fun(Closure::AnswerAt { a: Elem::Unit, shift: 1 })],
                sampled: true,
            },
            CType::Const(n) => match self.m.reading {
                Reading::Store => Dom { elems: (0..self.m.states()).map(Elem::state).collect(), sampled: false },
                Reading::Kleisli if **n == *"S" => Dom { elems: vec![Elem::Unit], sampled: false },
                Reading::Kleisli => {
                    Dom { elems: (0..self.m.base_size(n)?).map(|i| Elem::Base(n.clone(), i)).collect(), sampled: false }
                }
            },
            CType::Tensor(a, c) => self.pair_dom(self.v_dom(a)?, self.c_dom(c)?),
            CType::With(a, b) => self.pair_dom(self.c_dom(a)?, self.c_dom(b)?),
            CType::Zero => Dom { elems: vec![], sampled: false },
            CType::One => Dom { elems: vec![Elem::Unit], sampled: false },
            CType::Plus(a, b) => sum_dom(self.c_dom(a)?, self.c_dom(b)?),
            CType::Power(_, r) if matches!(&**r, CType::Const(n) if **n == *"R") => Dom {
                elems: vec![fun(Closure::Answer { shift: 0 }), fun(Closure::Answer { shift: 1 })],
                sampled: true,
            },
            CType::Power(a, c) => {
                let da = self.v_dom(a)?;
                let dc = self.c_dom(c)?;
                let (gs, s) = graphs(&da.elems, &dc.elems, self.m.sample_cap);
                Dom { elems: gs.into_iter().map(table_fun).collect(), sampled: s || da.sampled || dc.sampled }
            }
        })
    }
}

struct TDom {
    elems_t: Vec<TVal>,
    sampled: bool,
}

fn sum_dom(a: Dom, b: Dom) -> Dom {
    let mut elems: Vec<Elem> = a.elems.into_iter().map(Elem::inl).collect();
    elems.extend(b.elems.into_iter().map(Elem::inr));
    Dom { elems, sampled: a.sampled || b.sampled }
}

/// Enumerate the elements of an FGCBV type in a model.
pub fn enumerate_fg(m: &ConcreteModel, sig: &Signature, t: &FgType) -> R<Dom> {
    Ev { m, sig }.fg_dom(t)
}

/// Enumerate the elements of an ECBV/CPS value type.
pub fn enumerate_vtype(m: &ConcreteModel, sig: &Signature, t: &VType) -> R<Dom> {
    Ev { m, sig }.v_dom(t)
}

/// Enumerate the elements of a computation type under the model's reading.
pub fn enumerate_ctype(m: &ConcreteModel, sig: &Signature, t: &CType) -> R<Dom> {
    Ev { m, sig }.c_dom(t)
}

// ---------------------------------------------------------------- observation

/// A closure-free, totally ordered rendering of a denotation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Obs {
    Unit,
    Pair(Box<Obs>, Box<Obs>),
    Inl(Box<Obs>),
    Inr(Box<Obs>),
    Base(Name, u32),
    Tab(Vec<(Obs, Obs)>),
    Store(Vec<(Obs, u32)>),
    Writer(Vec<u8>, Box<Obs>),
    Dist(Vec<(Obs, Weight)>),
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Unit => f.write_str("star"),
            Obs::Pair(a, b) => write!(f, "(pair {a} {b})"),
            Obs::Inl(a) => write!(f, "(inl {a})"),
            Obs::Inr(a) => write!(f, "(inr {a})"),
            Obs::Base(n, i) => write!(f, "{n}.{i}"),
            Obs::Tab(t) => {
                let parts: Vec<String> = t.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Obs::Store(t) => {
                let parts: Vec<String> = t.iter().enumerate().map(|(s, (e, s2))| format!("{s}->({e},{s2})")).collect();
                write!(f, "[{}]", parts.join(" "))
            }
            Obs::Writer(w, e) => write!(f, "(\"{}\", {e})", String::from_utf8_lossy(w)),
            Obs::Dist(d) => {
                let parts: Vec<String> = d.iter().map(|(e, p)| format!("{p}:{e}")).collect();
                write!(f, "<{}>", parts.join(", "))
            }
        }
    }
}

struct Observer<'a> {
    ev: Ev<'a>,
    sampled: bool,
}

impl Observer<'_> {
    fn raw(&self, e: &Elem) -> R<Obs> {
        Ok(match e {
            Elem::Unit => Obs::Unit,
            Elem::Pair(a, b) => Obs::Pair(Box::new(self.raw(a)?), Box::new(self.raw(b)?)),
            Elem::Inl(a) => Obs::Inl(Box::new(self.raw(a)?)),
            Elem::Inr(a) => Obs::Inr(Box::new(self.raw(a)?)),
            Elem::Base(n, i) => Obs::Base(n.clone(), *i),
            Elem::Fun(_) => return Err(ModelError::NotEnumerable("untyped function element".into())),
        })
    }

    fn t(&mut self, t: &TVal, mut f: impl FnMut(&mut Self, &Elem) -> R<Obs>) -> R<Obs> {
        Ok(match t {
            TVal::Store(tab) => Obs::Store(tab.iter().map(|(e, s)| Ok((f(self, e)?, *s))).collect::<R<_>>()?),
            TVal::Writer(w, e) => Obs::Writer(w.clone(), Box::new(f(self, e)?)),
            TVal::Dist(d) => {
                let mut acc: BTreeMap<Obs, Weight> = BTreeMap::new();
                for (e, p) in d {
                    *acc.entry(f(self, e)?).or_insert(Weight::from_integer(0)) += *p;
                }
                Obs::Dist(acc.into_iter().filter(|(_, p)| *p != Weight::from_integer(0)).collect())
            }
        })
    }

    fn fg(&mut self, ty: &FgType, e: &Elem) -> R<Obs> {
        Ok(match (ty, e) {
            (FgType::Prod(a, b), Elem::Pair(x, y)) => Obs::Pair(Box::new(self.fg(a, x)?), Box::new(self.fg(b, y)?)),
            (FgType::Sum(a, _), Elem::Inl(x)) => Obs::Inl(Box::new(self.fg(a, x)?)),
            (FgType::Sum(_, b), Elem::Inr(x)) => Obs::Inr(Box::new(self.fg(b, x)?)),
            (FgType::Parr(a, b), f) => {
                let dom = self.ev.fg_dom(a)?;
                self.sampled |= dom.sampled;
                let mut tab = Vec::new();
                for d in dom.elems {
                    let tv = self.ev.m.reify(|w| self.ev.apply(f, d.clone(), w))?;
                    let o = self.t(&tv, |s, x| s.fg(b, x))?;
                    tab.push((self.fg(a, &d)?, o));
                }
                Obs::Tab(tab)
            }
            _ => self.raw(e)?,
        })
    }

    fn v(&mut self, ty: &VType, e: &Elem) -> R<Obs> {
        Ok(match (ty, e) {
            (VType::Prod(a, b), Elem::Pair(x, y)) => Obs::Pair(Box::new(self.v(a, x)?), Box::new(self.v(b, y)?)),
            (VType::Sum(a, _), Elem::Inl(x)) => Obs::Inl(Box::new(self.v(a, x)?)),
            (VType::Sum(_, b), Elem::Inr(x)) => Obs::Inr(Box::new(self.v(b, x)?)),
            (VType::Lolli(c, d), f) => {
                let dom = self.ev.c_dom(c)?;
                self.sampled |= dom.sampled;
                let mut tab = Vec::new();
                for x in dom.elems {
                    let o = self.apply_comp(f, x.clone(), d)?;
                    tab.push((self.c(c, &x)?, o));
                }
                Obs::Tab(tab)
            }
            _ => self.raw(e)?,
        })
    }

    /// Observe `f x` at computation type `d` under the model's reading.
    fn apply_comp(&mut self, f: &Elem, x: Elem, d: &CType) -> R<Obs> {
        if self.ev.m.reading == Reading::Store || is_cps_type(d) {
            let (y, _) = single(self.ev.apply(f, x, World::at(0))?, "a linear function")?;
            self.c(d, &y)
        } else {
            let tv = self.ev.m.reify(|w| self.ev.apply(f, x.clone(), w))?;
            self.t(&tv, |s, y| s.c(d, y))
        }
    }

    fn c(&mut self, ty: &CType, e: &Elem) -> R<Obs> {
        Ok(match (ty, e) {
            (CType::Const(n), f) if **n == *"R" => {
                let mut tab = Vec::new();
                for s in 0..self.ev.m.states() {
                    let (a, _) = single(self.ev.apply(f, Elem::state(s), World::at(0))?, "an answer")?;
                    tab.push((Obs::Base(name("S"), s), self.raw(&a)?));
                }
                Obs::Tab(tab)
            }
            (CType::Tensor(a, c), Elem::Pair(x, y)) => Obs::Pair(Box::new(self.v(a, x)?), Box::new(self.c(c, y)?)),
            (CType::With(a, b), Elem::Pair(x, y)) => Obs::Pair(Box::new(self.c(a, x)?), Box::new(self.c(b, y)?)),
            (CType::Plus(a, _), Elem::Inl(x)) => Obs::Inl(Box::new(self.c(a, x)?)),
            (CType::Plus(_, b), Elem::Inr(x)) => Obs::Inr(Box::new(self.c(b, x)?)),
            (CType::Power(a, c), f) => {
                let dom = self.ev.v_dom(a)?;
                self.sampled |= dom.sampled;
                let mut tab = Vec::new();
                for x in dom.elems {
                    let (y, _) = single(self.ev.apply(f, x.clone(), World::at(0))?, "a power element")?;
                    tab.push((self.v(a, &x)?, self.c(c, &y)?));
                }
                Obs::Tab(tab)
            }
            _ => self.raw(e)?,
        })
    }
}

fn is_cps_type(c: &CType) -> bool {
    match c {
        CType::Power(..) | CType::With(..) | CType::One => true,
        CType::Const(n) => **n == *"R",
        _ => false,
    }
}

// ---------------------------------------------------------------- comparison

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelVerdict {
    Equal,
    Unequal(String),
    SampledEqual,
}

impl fmt::Display for ModelVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelVerdict::Equal => f.write_str("equal"),
            ModelVerdict::Unequal(w) => write!(f, "unequal ({w})"),
            ModelVerdict::SampledEqual => f.write_str("sampled-equal"),
        }
    }
}

fn show_env(names: &[Name], vals: &[Elem]) -> String {
    let parts: Vec<String> =
        names.iter().zip(vals).map(|(n, v)| format!("{}={v}", crate::syntax::base_name(n))).collect();
    if parts.is_empty() {
        "closed".to_string()
    } else {
        parts.join(", ")
    }
}

/// Compare the denotations of two FGCBV terms over all environments.
pub fn morphisms_equal_fg(
    m: &ConcreteModel,
    sig: &Signature,
    ctx: &FgContext,
    a: &FgTerm,
    b: &FgTerm,
    mode: FgMode,
) -> R<ModelVerdict> {
    let ty = check_fg(sig, ctx, a, mode)?;
    let tb = check_fg(sig, ctx, b, mode)?;
    if ty != tb {
        return Err(ModelError::Arity(format!("codomains differ: {ty} and {tb}")));
    }
    let ev = Ev { m, sig };
    let doms = ctx.gamma.iter().map(|(_, t)| ev.fg_dom(t)).collect::<R<Vec<_>>>()?;
    let mut sampled = doms.iter().any(|d| d.sampled);
    let lists: Vec<Vec<Elem>> = doms.into_iter().map(|d| d.elems).collect();
    let (envs, s) = product(&lists, m.sample_cap);
    sampled |= s;
    let names: Vec<Name> = ctx.gamma.iter().map(|(x, _)| x.clone()).collect();
    for vals in envs {
        let env = Env::from_pairs(&names.iter().cloned().zip(vals.iter().cloned()).collect::<Vec<_>>());
        let mut ob = Observer { ev: Ev { m, sig }, sampled: false };
        let (oa, obb) = match mode {
            FgMode::Value => {
                let x = ob.ev.fg_val(&env, a)?;
                let y = ob.ev.fg_val(&env, b)?;
                (ob.fg(&ty, &x)?, ob.fg(&ty, &y)?)
            }
            FgMode::Producer => {
                let x = m.reify(|w| ob.ev.fg_prod(&env, a, w))?;
                let y = m.reify(|w| ob.ev.fg_prod(&env, b, w))?;
                (ob.t(&x, |s, e| s.fg(&ty, e))?, ob.t(&y, |s, e| s.fg(&ty, e))?)
            }
        };
        sampled |= ob.sampled;
        if oa != obb {
            return Ok(ModelVerdict::Unequal(format!("at {}: {oa} vs {obb}", show_env(&names, &vals))));
        }
    }
    Ok(if sampled { ModelVerdict::SampledEqual } else { ModelVerdict::Equal })
}

/// Compare the denotations of two ECBV or CPS terms over all environments
/// and linear inputs.
pub fn morphisms_equal_lin(
    m: &ConcreteModel,
    sig: &Signature,
    ctx: &LinContext,
    a: &Term,
    b: &Term,
    mode: LinMode,
    family: LinFamily,
) -> R<ModelVerdict> {
    let ty = check_lin(sig, ctx, a, mode, family)?;
    let tb = check_lin(sig, ctx, b, mode, family)?;
    if ty != tb {
        return Err(ModelError::Arity(format!("codomains differ: {ty} and {tb}")));
    }
    let ev = Ev { m, sig };
    let mut doms = ctx.gamma.iter().map(|(_, t)| ev.v_dom(t)).collect::<R<Vec<_>>>()?;
    let mut names: Vec<Name> = ctx.gamma.iter().map(|(x, _)| x.clone()).collect();
    if let Some((z, c)) = &ctx.delta {
        doms.push(ev.c_dom(c)?);
        names.push(z.clone());
    }
    let mut sampled = doms.iter().any(|d| d.sampled);
    let lists: Vec<Vec<Elem>> = doms.into_iter().map(|d| d.elems).collect();
    let (envs, s) = product(&lists, m.sample_cap);
    sampled |= s;
    let ng = ctx.gamma.len();
    for vals in envs {
        let env = Env::from_pairs(&names[..ng].iter().cloned().zip(vals[..ng].iter().cloned()).collect::<Vec<_>>());
        let mut ob = Observer { ev: Ev { m, sig }, sampled: false };
        let (oa, obb) = match (&ty, &ctx.delta) {
            (LinType::Val(vt), _) => {
                let x = ob.ev.lin_val(&env, a, family)?;
                let y = ob.ev.lin_val(&env, b, family)?;
                (ob.v(vt, &x)?, ob.v(vt, &y)?)
            }
            (LinType::Comp(ct), Some((z, _))) => {
                let lin = Env::new().bind(z.clone(), vals[ng].clone());
                if family == LinFamily::Cps || m.reading == Reading::Store {
                    let (x, _) = single(ob.ev.lin_comp(&env, &lin, a, World::at(0), family)?, "a computation")?;
                    let (y, _) = single(ob.ev.lin_comp(&env, &lin, b, World::at(0), family)?, "a computation")?;
                    (ob.c(ct, &x)?, ob.c(ct, &y)?)
                } else {
                    let x = m.reify(|w| ob.ev.lin_comp(&env, &lin, a, w, family))?;
                    let y = m.reify(|w| ob.ev.lin_comp(&env, &lin, b, w, family))?;
                    (ob.t(&x, |s, e| s.c(ct, e))?, ob.t(&y, |s, e| s.c(ct, e))?)
                }
            }
            (LinType::Comp(_), None) => return Err(ModelError::Arity("computation without linear input".into())),
        };
        sampled |= ob.sampled;
        if oa != obb {
            return Ok(ModelVerdict::Unequal(format!("at {}: {oa} vs {obb}", show_env(&names, &vals))));
        }
    }
    Ok(if sampled { ModelVerdict::SampledEqual } else { ModelVerdict::Equal })
}

/// Observe an FGCBV element at a type (functions tabulated).
pub fn observe_fg(m: &ConcreteModel, sig: &Signature, ty: &FgType, e: &Elem) -> R<Obs> {
    Observer { ev: Ev { m, sig }, sampled: false }.fg(ty, e)
}

/// Observe a `T`-element over an FGCBV type.
pub fn observe_fg_t(m: &ConcreteModel, sig: &Signature, ty: &FgType, t: &TVal) -> R<Obs> {
    Observer { ev: Ev { m, sig }, sampled: false }.t(t, |s, e| s.fg(ty, e))
}

/// Observe an ECBV/CPS value element.
pub fn observe_vtype(m: &ConcreteModel, sig: &Signature, ty: &VType, e: &Elem) -> R<Obs> {
    Observer { ev: Ev { m, sig }, sampled: false }.v(ty, e)
}

/// Observe a computation element under the model's reading.
pub fn observe_ctype(m: &ConcreteModel, sig: &Signature, ty: &CType, e: &Elem) -> R<Obs> {
    Observer { ev: Ev { m, sig }, sampled: false }.c(ty, e)
}

// ---------------------------------------------------------------- linear-use state monad

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearStateReport {
    pub states: u32,
    pub values: u32,
    /// `|C(S, A⊗S)|` counted as functions `S → A×S`.
    pub hom_count: usize,
    /// `|T A|` counted as store `T`-elements.
    pub t_count: usize,
    pub bijective: bool,
    pub unit_ok: bool,
    pub bind_ok: bool,
}

impl LinearStateReport {
    pub fn ok(&self) -> bool {
        self.hom_count == self.t_count && self.bijective && self.unit_ok && self.bind_ok
    }
}

/// For the store model with `|S| = states` and a base set `A` of size
/// `values`, count both sides of `C(S, A⊗S) ≅ T A`, check that the
/// canonical map is a bijection and that it carries unit and bind of `T`
/// Kleisli arrows tried per element in the bind check.
pub const BIND_SAMPLE: usize = 256;


pub fn linear_state_monad_check(states: u32, values: u32) -> R<LinearStateReport> {
    let m = ConcreteModel::store(states).with_base("a", values);
    let sig = Signature::empty();
    let ev = Ev { m: &m, sig: &sig };
    let a_ty = VType::base("a");
    let sts: Vec<Elem> = (0..states).map(Elem::state).collect();
    let a_dom = ev.v_dom(&a_ty)?.elems;
    let outs = ev.pair_dom(Dom { elems: a_dom.clone(), sampled: false }, Dom { elems: sts.clone(), sampled: false });
    let (homs, _) = graphs(&sts, &outs.elems, usize::MAX / 2);
    let ts = ev.t_dom(&Dom { elems: a_dom.clone(), sampled: false });
    let to_hom = |t: &TVal| -> Vec<(Elem, Elem)> {
        let TVal::Store(tab) = t else { unreachable!("store model") };
        tab.iter().enumerate().map(|(i, (e, s2))| (Elem::state(i as u32), Elem::pair(e.clone(), Elem::state(*s2)))).collect()
    };
    let images: Vec<Vec<(Elem, Elem)>> = ts.elems_t.iter().map(to_hom).collect();
    let bijective = images.len() == homs.len() && homs.iter().all(|h| images.iter().filter(|i| *i == h).count() == 1);
    // unit: η(a) ↦ λs.(a, s)
    let unit_ok = a_dom.iter().all(|a| {
        let h = to_hom(&m.unit(a.clone()));
        h.iter().all(|(x, y)| *y == Elem::pair(a.clone(), x.clone()))
    });
    // bind: t >>= f ↦ composite of the linear maps
    let (fs, _) = graphs(&a_dom, &ts.elems_t, BIND_SAMPLE);
    let mut bind_ok = true;
    'outer: for t in &ts.elems_t {
        for f in &fs {
            let look = |a: &Elem| f.iter().find(|(x, _)| x == a).map(|(_, t)| t.clone()).unwrap();
            let bound = m.bind(t, |a| Ok(look(a)))?;
            let lhs = to_hom(&bound);
            let ht = to_hom(t);
            for (x, y) in &lhs {
                let (_, mid) = ht.iter().find(|(x2, _)| x2 == x).unwrap();
                let (a, s1) = mid.split()?;
                let hf = to_hom(&look(a));
                let (_, fin) = hf.iter().find(|(x2, _)| x2 == s1).unwrap();
                if fin != y {
                    bind_ok = false;
                    break 'outer;
                }
            }
        }
    }
    Ok(LinearStateReport {
        states,
        values,
        hom_count: homs.len(),
        t_count: ts.elems_t.len(),
        bijective,
        unit_ok,
        bind_ok,
    })
}

// ---------------------------------------------------------------- coherence

/// One initial state of a coherence check: the Kleisli result transported
/// to the store reading, and the result of the state-passing translation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoherenceRow {
    pub state: u32,
    pub kleisli: Obs,
    pub store: Obs,
}

impl CoherenceRow {
    pub fn agrees(&self) -> bool {
        self.kleisli == self.store
    }
}

/// Run a closed producer in the Kleisli reading and its state-passing
/// translation in the store reading, at every initial state.
pub fn coherence_check(m: &ConcreteModel, sig: &Signature, t: &FgTerm) -> R<Vec<CoherenceRow>> {
    use crate::translate::{sps_term, sps_type, TranslationEnv};
    let env = TranslationEnv::default();
    let ty = check_fg(sig, &FgContext::new(), t, FgMode::Producer)?;
    let tr = sps_term(&env, sig, &FgContext::new(), t, FgMode::Producer)
        .map_err(|e| ModelError::Unsupported(e.to_string()))?;
    let (s, _) = tr.ctx.delta.clone().ok_or_else(|| ModelError::Unsupported("no state variable".into()))?;
    let vt = sps_type(&env, &ty);
    let st = m.clone().with_reading(Reading::Store);
    let kl = m.clone().with_reading(Reading::Kleisli);
    let ev_kl = Ev { m: &kl, sig };
    let ev_st = Ev { m: &st, sig };
    let mut rows = Vec::new();
    for s0 in 0..m.states() {
        let (e, w) = single(ev_kl.fg_prod(&Env::new(), t, World::at(s0))?, "a store producer")?;
        let kleisli = Obs::Pair(
            Box::new(observe_vtype(&st, sig, &vt, &to_store(&ty, &e))?),
            Box::new(Obs::Base(name("S"), w.state)),
        );
        let lin = Env::new().bind(s.clone(), Elem::state(s0));
        let (r, _) = single(ev_st.lin_comp(&Env::new(), &lin, &tr.term, World::at(0), LinFamily::Ecbv)?, "a computation")?;
        let (x, s1) = r.split()?;
        let store = Obs::Pair(Box::new(observe_vtype(&st, sig, &vt, x)?), Box::new(Observer { ev: Ev { m: &st, sig }, sampled: false }.raw(s1)?));
        rows.push(CoherenceRow { state: s0, kleisli, store });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::builtin_model;
    use crate::gen::{GenConfig, TermGen};
    use crate::surface::parse_fg_term;
    use proptest::prelude::*;

    fn samples(m: &ConcreteModel) -> Vec<TVal> {
        let mut out = vec![m.unit(Elem::bit(false)), m.unit(Elem::bit(true))];
        match &m.monad {
            MonadKind::Store { states } => {
                out.push(TVal::Store((0..*states).map(|s| (Elem::bit(s % 2 == 0), (s + 1) % states)).collect()))
            }
            MonadKind::Writer { .. } => out.push(TVal::Writer(b"10".to_vec(), Elem::bit(true))),
            MonadKind::Dyadic => out.push(TVal::Dist(vec![
                (Elem::bit(false), Weight::new(1, 4)),
                (Elem::bit(true), Weight::new(3, 4)),
            ])),
        }
        out
    }

    fn kleisli(m: &ConcreteModel) -> impl Fn(&Elem) -> R<TVal> + '_ {
        move |e| {
            let flip = Elem::bit(!e.as_bit().unwrap());
            Ok(match &m.monad {
                MonadKind::Store { states } => TVal::Store((0..*states).map(|s| (flip.clone(), states - 1 - s)).collect()),
                MonadKind::Writer { .. } => TVal::Writer(vec![b'0'], flip),
                MonadKind::Dyadic => TVal::Dist(vec![(flip.clone(), Weight::new(1, 2)), (e.clone(), Weight::new(1, 2))]),
            })
        }
    }

    fn models() -> Vec<ConcreteModel> {
        vec![ConcreteModel::store(3), ConcreteModel::writer(b"01"), ConcreteModel::dyadic()]
    }

    #[test]
    fn monad_laws_hold_on_samples() {
        for m in models() {
            let f = kleisli(&m);
            for t in samples(&m) {
                assert_eq!(m.bind(&t, |e| Ok(m.unit(e.clone()))).unwrap(), t, "{}", m.describe());
                let nested = m.bind(&m.bind(&t, &f).unwrap(), &f).unwrap();
                let flat = m.bind(&t, |e| m.bind(&f(e)?, &f)).unwrap();
                assert_eq!(nested, flat, "{}", m.describe());
            }
            for b in [false, true] {
                let a = Elem::bit(b);
                assert_eq!(m.bind(&m.unit(a.clone()), &f).unwrap(), f(&a).unwrap());
            }
        }
    }

    #[test]
    fn reify_rejects_non_dyadic_weights() {
        let m = ConcreteModel::dyadic();
        let third = |w: World| Ok(vec![(Elem::Unit, World { weight: Weight::new(1, 3), ..w })]);
        assert!(matches!(m.reify(third), Err(ModelError::NonDyadic(_))));
    }

    #[test]
    fn model_descriptions_parse() {
        let m = parse_model("(model store (state 3) (base val 4) (reading kleisli))").unwrap();
        assert_eq!(m.states(), 3);
        assert_eq!(m.base_size(&name("val")).unwrap(), 4);
        assert_eq!(m.reading, Reading::Kleisli);
        assert_eq!(parse_model("(model writer (alphabet a b c))").unwrap().monad, MonadKind::Writer { alphabet: b"abc".to_vec() });
        assert_eq!(parse_model("(model dyadic)").unwrap().monad, MonadKind::Dyadic);
        assert!(matches!(parse_model("(model store (base val 0))"), Err(ModelError::EmptyBase(_))));
        assert!(parse_model("(model heap)").is_err());
        assert!(parse_model("(model store (colour red))").is_err());
    }

    #[test]
    fn deref_reads_the_state_without_changing_it() {
        let m = builtin_model("bit-store").unwrap();
        let sig = Signature::bit_store();
        let t = parse_fg_term("(geff deref)").unwrap();
        let r0 = run_fg(&m, &sig, &[], &t, World::at(0)).unwrap();
        let r1 = run_fg(&m, &sig, &[], &t, World::at(1)).unwrap();
        assert_eq!(r0.len(), 1);
        assert_ne!(r0[0].0, r1[0].0);
        assert_eq!((r0[0].1.state, r1[0].1.state), (0, 1));
    }

    #[test]
    fn distinct_producers_get_a_witness() {
        let m = builtin_model("bit-store").unwrap();
        let sig = Signature::bit_store();
        let a = parse_fg_term("(geff deref)").unwrap();
        let b = parse_fg_term("(let (x (geff flip)) (geff deref))").unwrap();
        let v = morphisms_equal_fg(&m, &sig, &FgContext::new(), &a, &b, FgMode::Producer).unwrap();
        assert!(matches!(v, ModelVerdict::Unequal(_)), "{v}");
        assert_eq!(morphisms_equal_fg(&m, &sig, &FgContext::new(), &a, &a, FgMode::Producer).unwrap(), ModelVerdict::Equal);
    }

    #[test]
    fn store_transport_is_inverse_on_first_order_data() {
        let ty = FgType::prod(FgType::bool(), FgType::sum(FgType::Unit, FgType::bool()));
        let e = Elem::pair(Elem::bit(true), Elem::inr(Elem::bit(false)));
        assert_eq!(from_store(&ty, &to_store(&ty, &e)), e);
    }

    #[test]
    fn product_respects_the_cap() {
        let l = vec![Elem::bit(false), Elem::bit(true)];
        let (all, sampled) = product(&[l.clone(), l.clone()], 100);
        assert_eq!((all.len(), sampled), (4, false));
        let (some, sampled) = product(&[l.clone(), l.clone(), l], 3);
        assert!(sampled && some.len() <= 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn store_bind_composes_tables(tab in proptest::collection::vec((any::<bool>(), 0u32..3), 3)) {
            let m = ConcreteModel::store(3);
            let t = TVal::Store(tab.iter().map(|(b, s)| (Elem::bit(*b), *s)).collect());
            let f = kleisli(&m);
            let TVal::Store(out) = m.bind(&t, &f).unwrap() else { unreachable!() };
            for (s, (b, s1)) in tab.iter().enumerate() {
                prop_assert_eq!(&out[s], &(Elem::bit(!b), 2 - s1));
            }
        }

        #[test]
        fn closed_producers_are_coherent(seed in any::<u64>()) {
            let m = builtin_model("bit-store").unwrap();
            let mut g = TermGen::new(seed, GenConfig::default());
            let (t, _) = g.closed_producer();
            for row in coherence_check(&m, &g.sig, &t).unwrap() {
                prop_assert!(row.agrees(), "{} at {}", t, row.state);
            }
        }
    }
}
