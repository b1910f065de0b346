use std::collections::BTreeMap;

use linstate::gen::{GenConfig, LinTy, TermGen};
use linstate::models::coherence_check;
use linstate::effects::builtin_model;
use linstate::rewrite::{decide_eq_fg, decide_eq_lin, normalize_lin, EqConfig, NormConfig, Verdict};
use linstate::syntax::{alpha_eq_with, Term};
use linstate::translate::*;
use linstate::typecheck::*;

fn env() -> TranslationEnv {
    TranslationEnv::default()
}

#[test]
fn translations_preserve_types() {
    let mut g = TermGen::new(1, GenConfig::default());
    for _ in 0..300 {
        let s = g.fg_judgement();
        assert!(s.term.depth() <= 6);
        check_fg(&g.sig, &s.ctx, &s.term, s.mode).unwrap();
        let t = sps_term(&env(), &g.sig, &s.ctx, &s.term, s.mode).unwrap();
        let ty = check_ecbv(&g.sig, &t.ctx, &t.term, if s.mode == FgMode::Value { LinMode::Value } else { LinMode::Computation }).unwrap();
        assert_eq!(ty, t.ty);
        let c = cps_term(&env(), &g.sig, &s.ctx, &s.term, s.mode).unwrap();
        let ty = check_cps(&g.sig, &c.ctx, &c.term, if s.mode == FgMode::Value { LinMode::Value } else { LinMode::Computation }).unwrap();
        assert_eq!(ty, c.ty);
    }
}

#[test]
fn coherence() {
    let mut g = TermGen::new(2, GenConfig::default());
    let m = builtin_model("bit-store").unwrap();
    for _ in 0..200 {
        let (t, _) = g.closed_producer();
        for row in coherence_check(&m, &g.sig, &t).unwrap() {
            assert!(row.agrees(), "{t}\n{}\n{}", row.kleisli, row.store);
        }
    }
}

#[test]
fn round_trip() {
    let mut g = TermGen::new(3, GenConfig::default());
    let mut unknown = 0;
    for _ in 0..200 {
        let s = g.fg_judgement();
        let tr = sps_term(&env(), &g.sig, &s.ctx, &s.term, s.mode).unwrap();
        let (mode, shape) = match (&tr.ctx.delta, s.mode) {
            (Some((z, _)), FgMode::Producer) => (LinMode::Computation, ReadbackShape::Producer(z.clone())),
            _ => (LinMode::Value, ReadbackShape::Value),
        };
        let n = normalize_lin(&g.sig, &tr.ctx, &tr.term, mode, LinFamily::Ecbv, NormConfig::default()).unwrap();
        let back = untranslate_with(&env(), &g.sig, &n.term, &shape).unwrap_or_else(|e| panic!("{e}\n{}\n{}", s.term, n.term));
        let r = decide_eq_fg(&g.sig, &s.ctx, &back, &s.term, s.mode, &EqConfig::default()).unwrap();
        match r.verdict {
            Verdict::Equal => {}
            Verdict::Unknown => unknown += 1,
            Verdict::Unequal => panic!("{}\n{}\n{}", s.term, back, r.reason),
        }
    }
    assert_eq!(unknown, 0);
}

#[test]
fn duality() {
    let mut g = TermGen::new(4, GenConfig::default());
    let mut stats = [0usize; 3];
    for _ in 0..300 {
        let t = g.vtype(3);
        let d = dualize_vtype(&env(), &t).unwrap();
        assert_eq!(undualize_vtype(&env(), &d).unwrap(), t);
        assert_eq!(dualize_vtype(&env(), &undualize_vtype(&env(), &d).unwrap()).unwrap(), d);
        let s = g.ecbv_judgement();
        let mode = match s.ty { LinTy::Val(_) => LinMode::Value, LinTy::Comp(_) => LinMode::Computation };
        check_ecbv(&g.sig, &s.ctx, &s.term, mode).unwrap_or_else(|e| panic!("{e}\n{}", s.term));
        let d = dualize_term(&env(), &g.sig, &s.ctx, &s.term, mode).unwrap();
        let b = undualize_term(&env(), &g.sig, &d.ctx, &d.term, mode).unwrap();
        let d2 = dualize_term(&env(), &g.sig, &b.ctx, &b.term, mode).unwrap();
        let mut ren = BTreeMap::new();
        if let (Some((x, _)), Some((y, _))) = (&d2.ctx.delta, &d.ctx.delta) {
            ren.insert(x.clone(), y.clone());
        }
        assert!(alpha_eq_with(&d2.term, &d.term, &ren), "{}\n{}", d.term, d2.term);
        let mut ren = BTreeMap::new();
        if let (Some((x, _)), Some((y, _))) = (&b.ctx.delta, &s.ctx.delta) {
            ren.insert(x.clone(), y.clone());
        }
        if alpha_eq_with(&b.term, &s.term, &ren) {
            stats[0] += 1;
        } else {
            let b2 = b.term.subst(&b.ctx.delta.clone().map(|x| x.0).unwrap_or_else(|| linstate::syntax::name("_")), linstate::syntax::VarKind::Linear, &Term::LVar(s.ctx.delta.clone().map(|x| x.0).unwrap_or_else(|| linstate::syntax::name("_"))));
            let r = decide_eq_lin(&g.sig, &s.ctx, &b2, &s.term, mode, LinFamily::Ecbv, &EqConfig::default()).unwrap();
            match r.verdict { Verdict::Equal => stats[1] += 1, _ => { stats[2] += 1; eprintln!("{}\n{}\n{}", s.term, b2, r.reason) } }
        }
    }
    eprintln!("{stats:?}");
    assert_eq!(stats[2], 0);
}
