use std::collections::BTreeMap;

use linstate::effects::*;
use linstate::models::{Elem, ModelVerdict, TVal};
use linstate::typecheck::{EffectArity, Signature};

#[test]
fn bit_store_comodel_passes_all_equations() {
    let th = builtin_theory("bit-store").unwrap();
    assert_eq!(th.equations.len(), 4);
    let r = check_comodel(&th, &bit_store_comodel()).unwrap();
    assert!(r.passed(), "{r}");
    assert!(r.checks.iter().all(|c| c.verdict == ModelVerdict::Equal));
}

#[test]
fn every_bit_store_mutant_fails_an_equation() {
    let th = builtin_theory("bit-store").unwrap();
    let ms = bit_store_mutants();
    assert_eq!(ms.len(), 6);
    for (label, m) in ms {
        let r = check_comodel(&th, &m).unwrap();
        assert!(!r.passed(), "mutant {label} passed");
    }
}

#[test]
fn read_state_mutant_fails_discard_at_zero() {
    let th = builtin_theory("bit-store").unwrap();
    let m = bit_store_comodel().mutate("deref", &Elem::Unit, 0, (Elem::bit(false), 1));
    let r = check_comodel(&th, &m).unwrap();
    assert!(r.failing().contains(&"read-discard"));
    let c = r.checks.iter().find(|c| c.name == "read-discard").unwrap();
    let ModelVerdict::Unequal(w) = &c.verdict else { panic!() };
    assert!(w.contains("s=S.0"), "{w}");
}

#[test]
fn global_store_comodel_and_write_mutant() {
    let th = builtin_theory("global-store").unwrap();
    for n in [2, 3] {
        assert!(check_comodel(&th, &global_store_comodel(n)).unwrap().passed());
        let r = check_comodel(&th, &global_store_write_mutant(n)).unwrap();
        assert!(r.failing().contains(&"GS2"), "{r}");
    }
}

#[test]
fn printing_comodel_passes() {
    let th = builtin_theory("printing").unwrap();
    let c = printing_comodel(PRINTING_BOUND);
    assert_eq!(c.states, 511);
    assert!(check_comodel(&th, &c).unwrap().passed());
}

#[test]
fn builtin_models_satisfy_their_theories() {
    for t in ["bit-store", "global-store:2", "global-store:3", "printing", "mean-value"] {
        let th = builtin_theory(t).unwrap();
        let r = check_model(&th, &builtin_model(t).unwrap()).unwrap();
        assert!(r.passed(), "{t}: {r}");
    }
}

#[test]
fn lambda_in_equation_is_a_fragment_violation() {
    let src = "(theory (effect flip () (())) (eq () (app (lam (x unit) (return x)) star) (return star)))";
    assert!(matches!(load_theory(src), Err(EffectError::FragmentViolation(..))));
}

#[test]
fn duplicate_effect_is_rejected() {
    let src = "(theory (effect flip () (())) (effect flip () (())))";
    assert!(matches!(load_theory(src), Err(EffectError::Duplicate(_))));
}

#[test]
fn comodel_iff_kleisli_on_all_bit_store_candidates() {
    let th = builtin_theory("bit-store").unwrap();
    let cands = enumerate_candidates(&th.sig, 2, &BTreeMap::new()).unwrap();
    assert_eq!(cands.len(), 64);
    let mut comodels = 0;
    for c in cands {
        let (co, kl) = comodel_kleisli_agreement(&th, &c).unwrap();
        assert_eq!(co.passed(), kl.passed());
        comodels += co.passed() as usize;
    }
    assert!(comodels >= 1);
}

#[test]
fn deref_as_generic_effect() {
    let sig = Signature::bit_store();
    let f = bit_store_comodel().state_access(&sig, "deref").unwrap();
    let g = sacc_to_geff(&f).unwrap();
    assert_eq!(g.graph, vec![(Elem::Unit, TVal::Store(vec![(Elem::bit(false), 0), (Elem::bit(true), 1)]))]);
    assert_eq!(geff_to_sacc(&g, &BTreeMap::new()).unwrap(), f);
}

#[test]
fn mismatched_codomain_is_rejected() {
    let ar = EffectArity::new(vec![], vec![vec![]]);
    let g = GenericEffect { arity: ar, states: 2, graph: vec![(Elem::Unit, TVal::Store(vec![(Elem::bit(true), 0), (Elem::Unit, 1)]))] };
    assert!(matches!(geff_to_sacc(&g, &BTreeMap::new()), Err(EffectError::Arity(_))));
}

#[test]
fn read_operation_at_two() {
    let sig = Signature::bit_store();
    let f = bit_store_comodel().state_access(&sig, "deref").unwrap();
    for h in all_tables(2, 2) {
        for k in all_tables(2, 2) {
            let out = algop_from_sacc(&f, 2, &[vec![(Elem::Unit, h.clone())], vec![(Elem::Unit, k.clone())]]).unwrap();
            let oracle: Vec<u32> = (0..2).map(|s| if s == 0 { h[s] } else { k[s] }).collect();
            assert_eq!(out, vec![(Elem::Unit, oracle)]);
        }
    }
    assert!(algop_natural(&f, 2, 3, &BTreeMap::new()).unwrap());
    assert_eq!(sacc_from_algop(&f, &BTreeMap::new()).unwrap(), f);
}

#[test]
fn derived_writes_match_combined_write() {
    for row in derived_write_table(&bit_store_comodel()).unwrap() {
        assert_eq!(row.derived, row.combined);
        assert_eq!(row.combined, row.bit as u32);
    }
}

#[test]
fn correspondence_round_trips_are_exhaustive_identities() {
    let rep = correspondence_sweep(2, 2, 2).unwrap();
    assert!(rep.passed(), "{rep}");
    assert_eq!(rep.rows.len(), 14);
    let big = rep.rows.iter().map(|r| r.1).max().unwrap();
    assert_eq!(big, 4096);
}
