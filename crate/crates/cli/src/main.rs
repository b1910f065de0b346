use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use linstate::effects::{
    builtin_comodel, builtin_model, builtin_theory, check_comodel, correspondence_sweep, load_comodel, load_theory,
    parse_elem, EffectTheory,
};
use linstate::models::{eval_fg, eval_lin, parse_model, run_fg, ConcreteModel, Elem, World};
use linstate::rewrite::{decide_eq_fg, decide_eq_lin, normalize_fg, normalize_lin, EqConfig, NormConfig, Verdict};
use linstate::surface::{parse_program, print_program, read_all, Family, ParseError, Program, SourceFile};
use linstate::syntax::{base_name, name, CType, Name, Term, VarKind};
use linstate::translate::{cps_term, sps_term, unsps_type, untranslate_with, ReadbackShape, TranslationEnv};
use linstate::typecheck::{
    check_program, lin_family, FgContext, FgMode, Judgement, LinContext, LinMode, LinType, Signature, TypeError,
};

#[derive(Parser)]
#[command(name = "linstate", version, about = "Fine-grain and enriched call-by-value toolchain")]
struct Cli {
    /// Emit a JSON report instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Fg,
    Ecbv,
    Cps,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sps,
    Cps,
}

#[derive(clap::Args)]
struct Input {
    /// Program file (`.lst`); `-` reads standard input.
    file: PathBuf,
    /// Calculus of the program; defaults to the `.fg`, `.ecbv` or `.cps`
    /// suffix of the file stem, else fgcbv.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Builtin theory name or theory file providing the signature.
    #[arg(long, default_value = "bit-store")]
    theory: String,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck a program and print its judgement.
    Check(Input),
    /// Translate an FGCBV program into ECBV (sps) or CPS.
    Translate {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Write the translated program here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Read a state-passing ECBV program back to FGCBV.
    Untranslate(Input),
    /// Normalize a program.
    Normalize {
        #[command(flatten)]
        input: Input,
        /// Print every rewrite step before the normal form.
        #[arg(long)]
        trace: bool,
    },
    /// Decide equality of two programs of the same calculus.
    Eq {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long, default_value = "bit-store")]
        theory: String,
        /// Model used to separate terms (builtin name or model file).
        #[arg(long)]
        model: Option<String>,
        /// Treat the model as complete for closed ground producers.
        #[arg(long)]
        complete: bool,
    },
    /// Evaluate a program in a finite model.
    Eval {
        #[command(flatten)]
        input: Input,
        /// Builtin model name, `(model ...)` file or `(comodel ...)` file.
        #[arg(long)]
        model: String,
        /// Initial state (producers) or state-typed linear input.
        #[arg(long)]
        state: Option<u32>,
        /// Linear input as an element, e.g. `(pair 1 0)`.
        #[arg(long)]
        linear: Option<String>,
        /// Bindings `x=element` for the context, repeatable or comma-separated.
        #[arg(long, value_delimiter = ',')]
        env: Vec<String>,
    },
    /// Check a comodel against the equations of a theory.
    CheckTheory {
        #[arg(long)]
        theory: String,
        /// Comodel file; defaults to the builtin comodel of the theory.
        #[arg(long)]
        comodel: Option<PathBuf>,
    },
    /// Translate, normalize, read back and compare with the original.
    Roundtrip(Input),
    /// Exhaustive state access / generic effect / algebraic operation report.
    Correspond {
        #[arg(long, default_value_t = 2)]
        states: u32,
        /// Largest base type size.
        #[arg(long, default_value_t = 2)]
        max: u32,
        /// Largest number of alternatives.
        #[arg(long, default_value_t = 2)]
        alts: usize,
    },
}

#[derive(Serialize)]
struct Diagnostic {
    kind: String,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    col: Option<usize>,
}

#[derive(Serialize)]
struct Report {
    verdict: String,
    diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
    output: String,
    #[serde(skip)]
    code: u8,
}

impl Report {
    fn ok(verdict: &str, output: String) -> Self {
        Report { verdict: verdict.into(), diagnostics: Vec::new(), witness: None, output, code: 0 }
    }
    fn fail(verdict: &str, output: String) -> Self {
        Report { code: 1, ..Report::ok(verdict, output) }
    }
}

/// A failure that ends the command early.
struct Failure {
    code: u8,
    diag: Diagnostic,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 2, diag: Diagnostic { kind: "usage".into(), message: msg.into(), line: None, col: None } }
    }
    fn error(kind: &str, msg: impl ToString) -> Self {
        Failure { code: 1, diag: Diagnostic { kind: kind.into(), message: msg.to_string(), line: None, col: None } }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure {
            code: 1,
            diag: Diagnostic {
                kind: format!("parse/{:?}", e.kind),
                message: e.to_string(),
                line: Some(e.pos.line),
                col: Some(e.pos.col),
            },
        }
    }
}

impl From<TypeError> for Failure {
    fn from(e: TypeError) -> Self {
        Failure::error(&format!("type/{:?}", e.kind), e)
    }
}

type Res<T> = Result<T, Failure>;

fn read_source(path: &Path) -> Res<SourceFile> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s).map_err(|e| Failure::usage(e.to_string()))?;
        return Ok(SourceFile::stdin(s));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(SourceFile::new(text, path.display().to_string()))
}

fn family_of(path: &Path, arg: Option<FamilyArg>) -> Family {
    match arg {
        Some(FamilyArg::Fg) => Family::Fg,
        Some(FamilyArg::Ecbv) => Family::Ecbv,
        Some(FamilyArg::Cps) => Family::Cps,
        None => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            match stem.rsplit_once('.').map(|(_, s)| s) {
                Some("ecbv") => Family::Ecbv,
                Some("cps") => Family::Cps,
                _ => Family::Fg,
            }
        }
    }
}

fn theory(spec: &str) -> Res<EffectTheory> {
    if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).map_err(|e| Failure::usage(e.to_string()))?;
        return load_theory(&text).map_err(|e| Failure::error("theory", e));
    }
    builtin_theory(spec).map_err(|e| Failure::usage(e.to_string()))
}

fn model(spec: &str) -> Res<ConcreteModel> {
    if !Path::new(spec).is_file() {
        return builtin_model(spec).map_err(|e| Failure::usage(e.to_string()));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::usage(e.to_string()))?;
    let head = read_all(&text)?.first().and_then(|f| f.head().map(str::to_string));
    match head.as_deref() {
        Some("comodel") => Ok(load_comodel(&text).map_err(|e| Failure::error("model", e))?.model()),
        _ => parse_model(&text).map_err(|e| Failure::error("model", e)),
    }
}

struct Loaded {
    sig: Signature,
    program: Program,
    judgement: Judgement,
}

fn load(input: &Input) -> Res<Loaded> {
    let sig = theory(&input.theory)?.sig;
    load_with(&input.file, input.family, sig)
}

fn load_with(path: &Path, family: Option<FamilyArg>, sig: Signature) -> Res<Loaded> {
    let src = read_source(path)?;
    let program = parse_program(&src, family_of(path, family), Some(&sig))?;
    let judgement = check_program(&sig, &program)?;
    Ok(Loaded { sig, program, judgement })
}

fn fg_parts(l: &Loaded) -> Res<(FgContext, linstate::syntax::FgTerm, FgMode)> {
    match (&l.program, &l.judgement) {
        (Program::Fg { gamma, term }, Judgement::Fg(mode, _)) => {
            Ok((FgContext { gamma: gamma.clone(), delta: None }, term.clone(), *mode))
        }
        _ => Err(Failure::usage("expected an FGCBV program")),
    }
}

fn lin_parts(l: &Loaded) -> Option<(LinContext, Term, LinMode, Family)> {
    match &l.program {
        Program::Lin { family, gamma, delta, term } => {
            let mode = if delta.is_some() { LinMode::Computation } else { LinMode::Value };
            Some((LinContext { gamma: gamma.clone(), delta: delta.clone() }, term.clone(), mode, *family))
        }
        Program::Fg { .. } => None,
    }
}

/// Rename a freshly generated linear variable back to its base name.
fn tidy(ctx: &LinContext, term: Term) -> (Option<(Name, CType)>, Term) {
    match &ctx.delta {
        Some((z, c)) if base_name(z) != &**z && ctx.lookup(base_name(z)).is_none() => {
            let plain = name(base_name(z));
            let term = term.subst(z, VarKind::Linear, &Term::LVar(plain.clone()));
            (Some((plain, c.clone())), term)
        }
        d => (d.clone(), term),
    }
}

fn lin_program(family: Family, ctx: &LinContext, term: Term) -> Program {
    let (delta, term) = tidy(ctx, term);
    Program::Lin { family, gamma: ctx.gamma.clone(), delta, term }
}

fn cmd_check(input: &Input) -> Res<Report> {
    let l = load(input)?;
    Ok(Report::ok("well-typed", l.judgement.to_string()))
}

fn cmd_translate(input: &Input, mode: Mode, out: Option<&Path>) -> Res<Report> {
    let l = load(input)?;
    let (ctx, term, fmode) = fg_parts(&l)?;
    let env = TranslationEnv::default();
    let (tr, family) = match mode {
        Mode::Sps => (sps_term(&env, &l.sig, &ctx, &term, fmode), Family::Ecbv),
        Mode::Cps => (cps_term(&env, &l.sig, &ctx, &term, fmode), Family::Cps),
    };
    let tr = tr.map_err(|e| Failure::error("translate", e))?;
    let text = print_program(&lin_program(family, &tr.ctx, tr.term)) + "\n";
    match out {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            Ok(Report::ok("translated", format!("{} : {}", p.display(), tr.ty)))
        }
        None => Ok(Report::ok("translated", text.trim_end().to_string())),
    }
}

fn cmd_untranslate(input: &Input) -> Res<Report> {
    let l = load(input)?;
    let (ctx, term, mode, family) = lin_parts(&l).ok_or_else(|| Failure::usage("expected an ECBV program"))?;
    if family != Family::Ecbv {
        return Err(Failure::usage("readback applies to ECBV programs"));
    }
    let env = TranslationEnv::default();
    let n = normalize_lin(&l.sig, &ctx, &term, mode, lin_family(family), NormConfig::default())
        .map_err(|e| Failure::error("normalize", e))?;
    let shape = match &ctx.delta {
        Some((z, _)) => ReadbackShape::Producer(z.clone()),
        None => ReadbackShape::Value,
    };
    let back = untranslate_with(&env, &l.sig, &n.term, &shape).map_err(|e| Failure::error("readback", e))?;
    let gamma = ctx
        .gamma
        .iter()
        .map(|(x, t)| Ok((x.clone(), unsps_type(&env, t).map_err(|e| Failure::error("readback", e))?)))
        .collect::<Res<Vec<_>>>()?;
    Ok(Report::ok("read back", print_program(&Program::Fg { gamma, term: back })))
}

fn cmd_normalize(input: &Input, trace: bool) -> Res<Report> {
    let l = load(input)?;
    let cfg = NormConfig { trace, ..NormConfig::default() };
    let (steps, trace_text, program) = match lin_parts(&l) {
        None => {
            let (ctx, term, mode) = fg_parts(&l)?;
            let n = normalize_fg(&l.sig, &ctx, &term, mode, cfg).map_err(|e| Failure::error("normalize", e))?;
            (n.steps, n.trace.to_string(), Program::Fg { gamma: ctx.gamma, term: n.term })
        }
        Some((ctx, term, mode, family)) => {
            let n = normalize_lin(&l.sig, &ctx, &term, mode, lin_family(family), cfg)
                .map_err(|e| Failure::error("normalize", e))?;
            (n.steps, n.trace.to_string(), lin_program(family, &ctx, n.term))
        }
    };
    let mut out = String::new();
    if trace {
        out.push_str(&trace_text);
        out.push_str(&format!("{steps} steps\n"));
    }
    out.push_str(&print_program(&program));
    Ok(Report::ok("normalized", out))
}

#[allow(clippy::too_many_arguments)]
fn cmd_eq(
    first: &Path,
    second: &Path,
    family: Option<FamilyArg>,
    th: &str,
    model_spec: Option<&str>,
    complete: bool,
) -> Res<Report> {
    let sig = theory(th)?.sig;
    let a = load_with(first, family, sig.clone())?;
    let fam = family.or(match family_of(first, None) {
        Family::Fg => Some(FamilyArg::Fg),
        Family::Ecbv => Some(FamilyArg::Ecbv),
        Family::Cps => Some(FamilyArg::Cps),
    });
    let b = load_with(second, fam, sig.clone())?;
    let (model, complete) = match model_spec {
        Some(m) => (Some(model(m)?), complete),
        None if th == "bit-store" => (Some(model(th)?), true),
        None => (builtin_model(th).ok(), complete),
    };
    let cfg = EqConfig { model, model_complete: complete, ..EqConfig::default() };
    let r = match (lin_parts(&a), lin_parts(&b)) {
        (None, None) => {
            let (ctx, ta, mode) = fg_parts(&a)?;
            let (_, tb, mb) = fg_parts(&b)?;
            if mode != mb {
                return Err(Failure::error("type/ModeMismatch", "a value and a producer are never equal"));
            }
            decide_eq_fg(&sig, &ctx, &ta, &tb, mode, &cfg)
        }
        (Some((ctx, ta, mode, f)), Some((_, tb, mb, fb))) if f == fb && mode == mb => {
            decide_eq_lin(&sig, &ctx, &ta, &tb, mode, lin_family(f), &cfg)
        }
        _ => return Err(Failure::usage("the two programs belong to different calculi or judgements")),
    }
    .map_err(|e| Failure::error("eq", e))?;
    let mut rep = match r.verdict {
        Verdict::Equal => Report::ok("equal", format!("equal: {}", r.reason)),
        v => Report::fail(&v.to_string(), format!("{v}: {}", r.reason)),
    };
    rep.witness = r.witness;
    Ok(rep)
}

fn parse_binding(b: &str) -> Res<(Name, Elem)> {
    let (x, e) = b.split_once('=').ok_or_else(|| Failure::usage(format!("binding `{b}` is not x=element")))?;
    let e = parse_elem(e.trim()).map_err(|e| Failure::usage(e.to_string()))?;
    Ok((name(x.trim()), e))
}

fn cmd_eval(input: &Input, model_spec: &str, state: Option<u32>, lin_input: Option<&str>, env: &[String]) -> Res<Report> {
    let l = load(input)?;
    let m = model(model_spec)?;
    if let Some(s) = state {
        if s >= m.states() {
            return Err(Failure::usage(format!("state {s} out of range for {}", m.describe())));
        }
    }
    let env = env.iter().filter(|b| !b.is_empty()).map(|b| parse_binding(b)).collect::<Res<Vec<_>>>()?;
    let out = match lin_parts(&l) {
        None => {
            let (_, term, mode) = fg_parts(&l)?;
            match (mode, state) {
                (FgMode::Producer, Some(s)) => {
                    let r = run_fg(&m, &l.sig, &env, &term, World::at(s)).map_err(|e| Failure::error("eval", e))?;
                    let parts: Vec<String> = r.iter().map(|(e, w)| format!("{e} @ state {}", w.state)).collect();
                    parts.join("\n")
                }
                _ => eval_fg(&m, &l.sig, &env, &term, mode).map_err(|e| Failure::error("eval", e))?.to_string(),
            }
        }
        Some((ctx, term, mode, family)) => {
            let lin = match (&ctx.delta, lin_input, state) {
                (Some((z, _)), Some(e), _) => {
                    Some((z.clone(), parse_elem(e).map_err(|e| Failure::usage(e.to_string()))?))
                }
                (Some((z, _)), None, Some(s)) => Some((z.clone(), Elem::state(s))),
                (Some(_), None, None) => return Err(Failure::usage("a computation needs --state or --linear")),
                (None, ..) => None,
            };
            eval_lin(&m, &l.sig, lin_family(family), &env, lin, &term, mode)
                .map_err(|e| Failure::error("eval", e))?
                .to_string()
        }
    };
    Ok(Report::ok("evaluated", out))
}

fn cmd_check_theory(th: &str, comodel: Option<&Path>) -> Res<Report> {
    let t = theory(th)?;
    let cand = match comodel {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            load_comodel(&text).map_err(|e| Failure::error("comodel", e))?
        }
        None => builtin_comodel(th).map_err(|e| Failure::usage(e.to_string()))?,
    };
    let r = check_comodel(&t, &cand).map_err(|e| Failure::error("comodel", e))?;
    let mut rep = if r.passed() { Report::ok("pass", r.to_string()) } else { Report::fail("fail", r.to_string()) };
    rep.witness = r
        .checks
        .iter()
        .find_map(|c| matches!(c.verdict, linstate::models::ModelVerdict::Unequal(_)).then(|| format!("{}: {}", c.name, c.verdict)));
    Ok(rep)
}

fn cmd_roundtrip(input: &Input) -> Res<Report> {
    let l = load(input)?;
    let (ctx, term, mode) = fg_parts(&l)?;
    let env = TranslationEnv::default();
    let tr = sps_term(&env, &l.sig, &ctx, &term, mode).map_err(|e| Failure::error("translate", e))?;
    let lmode = match (&tr.ty, mode) {
        (LinType::Comp(_), _) | (_, FgMode::Producer) => LinMode::Computation,
        _ => LinMode::Value,
    };
    let n = normalize_lin(&l.sig, &tr.ctx, &tr.term, lmode, lin_family(Family::Ecbv), NormConfig::default())
        .map_err(|e| Failure::error("normalize", e))?;
    let shape = match (&tr.ctx.delta, mode) {
        (Some((z, _)), FgMode::Producer) => ReadbackShape::Producer(z.clone()),
        _ => ReadbackShape::Value,
    };
    let back = untranslate_with(&env, &l.sig, &n.term, &shape).map_err(|e| Failure::error("readback", e))?;
    let r = decide_eq_fg(&l.sig, &ctx, &back, &term, mode, &EqConfig::default()).map_err(|e| Failure::error("eq", e))?;
    let (_, shown_tr) = tidy(&tr.ctx, tr.term);
    let (_, shown_nf) = tidy(&tr.ctx, n.term);
    let out = format!(
        "translated: {shown_tr}\nnormal form: {shown_nf}\nread back: {back}\nverdict: {} ({})",
        r.verdict, r.reason
    );
    Ok(match r.verdict {
        Verdict::Equal => Report::ok("equal", out),
        v => Report::fail(&v.to_string(), out),
    })
}

fn cmd_correspond(states: u32, max: u32, alts: usize) -> Res<Report> {
    if states == 0 || max == 0 {
        return Err(Failure::usage("sizes must be positive"));
    }
    let r = correspondence_sweep(states, max, alts).map_err(|e| Failure::error("correspond", e))?;
    let mut rep = if r.passed() { Report::ok("pass", r.to_string()) } else { Report::fail("fail", r.to_string()) };
    rep.witness = r.failures.first().cloned();
    Ok(rep)
}

fn run(cli: &Cli) -> Res<Report> {
    match &cli.command {
        Command::Check(i) => cmd_check(i),
        Command::Translate { input, mode, output } => cmd_translate(input, *mode, output.as_deref()),
        Command::Untranslate(i) => cmd_untranslate(i),
        Command::Normalize { input, trace } => cmd_normalize(input, *trace),
        Command::Eq { first, second, family, theory, model, complete } => {
            cmd_eq(first, second, *family, theory, model.as_deref(), *complete)
        }
        Command::Eval { input, model, state, linear, env } => cmd_eval(input, model, *state, linear.as_deref(), env),
        Command::CheckTheory { theory, comodel } => cmd_check_theory(theory, comodel.as_deref()),
        Command::Roundtrip(i) => cmd_roundtrip(i),
        Command::Correspond { states, max, alts } => cmd_correspond(*states, *max, *alts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let rep = run(&cli).unwrap_or_else(|f| Report {
        verdict: if f.code == 2 { "usage".into() } else { "error".into() },
        diagnostics: vec![f.diag],
        witness: None,
        output: String::new(),
        code: f.code,
    });
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&rep).expect("reports serialize"));
    } else {
        if !rep.output.is_empty() {
            println!("{}", rep.output);
        }
        if let Some(w) = &rep.witness {
            println!("witness: {w}");
        }
        for d in &rep.diagnostics {
            match (d.line, d.col) {
                (Some(l), Some(c)) => eprintln!("error[{}] at {l}:{c}: {}", d.kind, d.message),
                _ => eprintln!("error[{}]: {}", d.kind, d.message),
            }
        }
    }
    ExitCode::from(rep.code)
}
