mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use linstate::axioms::{catalogue, check_catalogue, Calculus, Instance};
use linstate::effects::*;
use linstate::gen::{FgSample, GenConfig, LinTy, TermGen};
use linstate::models::{coherence_check, linear_state_monad_check, Elem};
use linstate::rewrite::{decide_eq_fg, normalize_lin, EqConfig, NormConfig, Verdict};
use linstate::syntax::alpha_eq_with;
use linstate::translate::*;
use linstate::typecheck::*;

type Outcome = Result<String, String>;

fn env() -> TranslationEnv {
    TranslationEnv::default()
}

fn corpus(seed: u64, n: usize) -> (Signature, Vec<FgSample>) {
    let mut g = TermGen::new(seed, GenConfig::default());
    let v = (0..n).map(|_| g.fg_judgement()).collect();
    (g.sig, v)
}

fn lin_mode(m: FgMode) -> LinMode {
    match m {
        FgMode::Value => LinMode::Value,
        FgMode::Producer => LinMode::Computation,
    }
}

fn comodel_laws() -> Outcome {
    let th = builtin_theory("bit-store").map_err(|e| e.to_string())?;
    let r = check_comodel(&th, &bit_store_comodel()).map_err(|e| e.to_string())?;
    if !r.passed() || r.checks.len() != 4 {
        return Err(format!("bit-store comodel: {r}"));
    }
    let mutants = bit_store_mutants();
    for (label, m) in &mutants {
        if check_comodel(&th, m).map_err(|e| e.to_string())?.passed() {
            return Err(format!("mutant {label} satisfies every equation"));
        }
    }
    Ok(format!("4 equations hold, {} mutants rejected", mutants.len()))
}

fn global_store() -> Outcome {
    let th = builtin_theory("global-store").map_err(|e| e.to_string())?;
    for n in [2, 3] {
        let r = check_comodel(&th, &global_store_comodel(n)).map_err(|e| e.to_string())?;
        if !r.passed() {
            return Err(format!("|Val|={n}: {r}"));
        }
        let r = check_comodel(&th, &global_store_write_mutant(n)).map_err(|e| e.to_string())?;
        if !r.failing().contains(&"GS2") {
            return Err(format!("|Val|={n}: write(v,s)=s mutant does not fail GS2"));
        }
    }
    Ok("GS1-GS3 hold at |Val| 2 and 3; mutant fails GS2".into())
}

fn type_preservation() -> Outcome {
    let (sig, terms) = corpus(3, 1000);
    for s in &terms {
        if s.term.depth() > 6 {
            return Err(format!("generated term too deep: {}", s.term));
        }
        let t = sps_term(&env(), &sig, &s.ctx, &s.term, s.mode).map_err(|e| format!("{e}: {}", s.term))?;
        let ty = check_ecbv(&sig, &t.ctx, &t.term, lin_mode(s.mode)).map_err(|e| format!("sps: {e}: {}", s.term))?;
        if ty != t.ty {
            return Err(format!("sps type {ty} differs from the predicted {}", t.ty));
        }
        let c = cps_term(&env(), &sig, &s.ctx, &s.term, s.mode).map_err(|e| format!("{e}: {}", s.term))?;
        let ty = check_cps(&sig, &c.ctx, &c.term, lin_mode(s.mode)).map_err(|e| format!("cps: {e}: {}", s.term))?;
        if ty != c.ty {
            return Err(format!("cps type {ty} differs from the predicted {}", c.ty));
        }
    }
    Ok(format!("{} terms", terms.len()))
}

fn coherence() -> Outcome {
    let mut g = TermGen::new(4, GenConfig::default());
    let m = builtin_model("bit-store").map_err(|e| e.to_string())?;
    for _ in 0..200 {
        let (t, _) = g.closed_producer();
        for row in coherence_check(&m, &g.sig, &t).map_err(|e| e.to_string())? {
            if !row.agrees() {
                return Err(format!("{t} at s={}: {} vs {}", row.state, row.kleisli, row.store));
            }
        }
    }
    Ok("200 closed producers agree at every initial state".into())
}

fn round_trip() -> Outcome {
    let (sig, terms) = corpus(5, 500);
    let cfg = EqConfig::default();
    let mut incomplete = 0;
    let mut unknown = 0;
    for s in &terms {
        let tr = sps_term(&env(), &sig, &s.ctx, &s.term, s.mode).map_err(|e| e.to_string())?;
        let (mode, shape) = match (&tr.ctx.delta, s.mode) {
            (Some((z, _)), FgMode::Producer) => (LinMode::Computation, ReadbackShape::Producer(z.clone())),
            _ => (LinMode::Value, ReadbackShape::Value),
        };
        let n = normalize_lin(&sig, &tr.ctx, &tr.term, mode, LinFamily::Ecbv, NormConfig::default())
            .map_err(|e| e.to_string())?;
        let back = match untranslate_with(&env(), &sig, &n.term, &shape) {
            Ok(b) => b,
            Err(_) => {
                incomplete += 1;
                continue;
            }
        };
        match decide_eq_fg(&sig, &s.ctx, &back, &s.term, s.mode, &cfg).map_err(|e| e.to_string())?.verdict {
            Verdict::Equal => {}
            Verdict::Unknown => unknown += 1,
            Verdict::Unequal => return Err(format!("{} reads back as {back}", s.term)),
        }
    }
    if incomplete + unknown > 0 {
        return Err(format!("{incomplete} incomplete readbacks, {unknown} undecided"));
    }
    Ok("500 terms, readback incomplete rate 0".into())
}

fn soundness() -> Outcome {
    let m = builtin_model("bit-store").map_err(|e| e.to_string())?;
    let mut g = TermGen::new(6, GenConfig::default());
    let reports = check_catalogue(&mut g, &m, 20);
    if let Some(r) = reports.iter().find(|r| !r.passed()) {
        return Err(r.to_string());
    }
    Ok(format!("{} axioms x 20 instances", reports.len()))
}

fn duality() -> Outcome {
    let mut g = TermGen::new(7, GenConfig::default());
    for _ in 0..1000 {
        let t = g.vtype(3);
        let d = dualize_vtype(&env(), &t).map_err(|e| e.to_string())?;
        if undualize_vtype(&env(), &d).map_err(|e| e.to_string())? != t {
            return Err(format!("type {t} does not survive the round trip"));
        }
        let s = g.ecbv_judgement();
        let mode = match s.ty {
            LinTy::Val(_) => LinMode::Value,
            LinTy::Comp(_) => LinMode::Computation,
        };
        let d = dualize_term(&env(), &g.sig, &s.ctx, &s.term, mode).map_err(|e| e.to_string())?;
        let b = undualize_term(&env(), &g.sig, &d.ctx, &d.term, mode).map_err(|e| e.to_string())?;
        let d2 = dualize_term(&env(), &g.sig, &b.ctx, &b.term, mode).map_err(|e| e.to_string())?;
        if !alpha_eq_with(&d2.term, &d.term, &linear_renaming(&d2.ctx, &d.ctx)) {
            return Err(format!("{} does not survive the round trip", d.term));
        }
    }
    let (sig, terms) = corpus(3, 1000);
    for s in &terms {
        let sp = sps_term(&env(), &sig, &s.ctx, &s.term, s.mode).map_err(|e| e.to_string())?;
        let d = dualize_term(&env(), &sig, &sp.ctx, &sp.term, lin_mode(s.mode)).map_err(|e| e.to_string())?;
        let c = cps_term(&env(), &sig, &s.ctx, &s.term, s.mode).map_err(|e| e.to_string())?;
        if !alpha_eq_with(&d.term, &c.term, &linear_renaming(&d.ctx, &c.ctx)) {
            return Err(format!("{}: dual of sps {} differs from cps {}", s.term, d.term, c.term));
        }
    }
    Ok("1000 types and terms; sps dual matches cps on 1000 terms".into())
}

fn linear_renaming(from: &LinContext, to: &LinContext) -> BTreeMap<linstate::syntax::Name, linstate::syntax::Name> {
    let mut ren = BTreeMap::new();
    if let (Some((x, _)), Some((y, _))) = (&from.delta, &to.delta) {
        ren.insert(x.clone(), y.clone());
    }
    ren
}

fn linear_state_monad() -> Outcome {
    let mut counts = Vec::new();
    for (s, a) in [(1, 1), (1, 3), (2, 2), (2, 3), (3, 2)] {
        let r = linear_state_monad_check(s, a).map_err(|e| e.to_string())?;
        let want = ((a * s) as usize).pow(s);
        if !r.ok() || r.hom_count != want {
            return Err(format!("{r:?}"));
        }
        counts.push(format!("({s},{a})={}", r.hom_count));
    }
    Ok(counts.join(" "))
}

fn correspondence() -> Outcome {
    let rep = correspondence_sweep(2, 2, 2).map_err(|e| e.to_string())?;
    if !rep.passed() {
        return Err(rep.to_string());
    }
    let sig = Signature::bit_store();
    let read = bit_store_comodel().state_access(&sig, "deref").map_err(|e| e.to_string())?;
    for h in all_tables(2, 2) {
        for k in all_tables(2, 2) {
            let args = [vec![(Elem::Unit, h.clone())], vec![(Elem::Unit, k.clone())]];
            let got = algop_from_sacc(&read, 2, &args).map_err(|e| e.to_string())?;
            let oracle: Vec<u32> = (0..2).map(|s| if s == 0 { h[s] } else { k[s] }).collect();
            if got != vec![(Elem::Unit, oracle)] {
                return Err(format!("read at h={h:?} k={k:?} gives {got:?}"));
            }
        }
    }
    let total: usize = rep.rows.iter().map(|r| r.1).sum();
    Ok(format!("{} arities, {total} state accesses; read matches the oracle", rep.rows.len()))
}

fn linearity_gate() -> Outcome {
    let bad = common::run_golden("linearity");
    if !bad.is_empty() {
        return Err(bad.join("; "));
    }
    let mut g = TermGen::new(10, GenConfig::default());
    let mut n = 0;
    for ax in catalogue().iter().filter(|a| a.calculus == Calculus::Ecbv && a.group == "core") {
        for _ in 0..20 {
            let Instance::Lin { ctx, lhs, rhs, mode, .. } = ax.instance(&mut g) else { unreachable!() };
            for t in [&lhs, &rhs] {
                check_ecbv(&g.sig, &ctx, t, mode).map_err(|e| format!("{}: {e}: {t}", ax.name))?;
                n += 1;
            }
        }
    }
    let cases = common::golden_cases("linearity").len();
    Ok(format!("{cases} golden files; {n} rule instances accepted"))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("comodel laws and mutants", 1, comodel_laws),
        ("global store", 1, global_store),
        ("translation type preservation", 30, type_preservation),
        ("Kleisli/state-passing coherence", 30, coherence),
        ("full-completeness round trip", 60, round_trip),
        ("equational soundness", 60, soundness),
        ("duality", 10, duality),
        ("linear-use state monad", 5, linear_state_monad),
        ("state access correspondence", 10, correspondence),
        ("linearity gate", 1, linearity_gate),
    ];
    let mut failed = 0;
    for (i, (label, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = run();
        let took = start.elapsed();
        let late = took > Duration::from_secs(*limit);
        let (tag, detail) = match (&res, late) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the time limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} {:>2} {label} [{:.2}s / {limit}s] {detail}", i + 1, took.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
