use criterion::{black_box, criterion_group, criterion_main, Criterion};

use linstate::effects::{bit_store_comodel, builtin_model, builtin_theory, check_comodel, correspondence_sweep};
use linstate::rewrite::{decide_eq_fg, normalize_fg, normalize_lin, EqConfig, NormConfig};
use linstate::translate::{cps_term, sps_term, TranslationEnv};
use linstate::typecheck::{check_fg, FgMode, LinFamily, LinMode};
use linstate_bench::corpus;

fn lin_mode(m: FgMode) -> LinMode {
    match m {
        FgMode::Value => LinMode::Value,
        FgMode::Producer => LinMode::Computation,
    }
}

fn pipeline(c: &mut Criterion) {
    let (sig, terms) = corpus(3, 100);
    let env = TranslationEnv::default();

    c.bench_function("typecheck_fg", |b| {
        b.iter(|| {
            for s in &terms {
                black_box(check_fg(&sig, &s.ctx, &s.term, s.mode).unwrap());
            }
        })
    });

    c.bench_function("sps_and_cps", |b| {
        b.iter(|| {
            for s in &terms {
                black_box(sps_term(&env, &sig, &s.ctx, &s.term, s.mode).unwrap());
                black_box(cps_term(&env, &sig, &s.ctx, &s.term, s.mode).unwrap());
            }
        })
    });

    c.bench_function("normalize_fg", |b| {
        b.iter(|| {
            for s in &terms {
                black_box(normalize_fg(&sig, &s.ctx, &s.term, s.mode, NormConfig::default()).unwrap());
            }
        })
    });

    let translated: Vec<_> =
        terms.iter().map(|s| (sps_term(&env, &sig, &s.ctx, &s.term, s.mode).unwrap(), lin_mode(s.mode))).collect();
    c.bench_function("normalize_sps_image", |b| {
        b.iter(|| {
            for (t, m) in &translated {
                black_box(normalize_lin(&sig, &t.ctx, &t.term, *m, LinFamily::Ecbv, NormConfig::default()).unwrap());
            }
        })
    });

    let model = builtin_model("bit-store").unwrap();
    let cfg = EqConfig { model: Some(model), model_complete: true, ..EqConfig::default() };
    c.bench_function("decide_eq_reflexive", |b| {
        b.iter(|| {
            for s in &terms {
                black_box(decide_eq_fg(&sig, &s.ctx, &s.term, &s.term.freshen(), s.mode, &cfg).unwrap());
            }
        })
    });

    let theory = builtin_theory("bit-store").unwrap();
    let comodel = bit_store_comodel();
    c.bench_function("check_comodel_bit_store", |b| b.iter(|| black_box(check_comodel(&theory, &comodel).unwrap())));

    c.bench_function("correspondence_sweep", |b| b.iter(|| black_box(correspondence_sweep(2, 2, 1).unwrap())));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = pipeline
}
criterion_main!(benches);
