use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use octawitt::algiv::{Alg, AlgElement, Algebra, Splittable};
use octawitt::herm::HermitianForm;
use octawitt::morita::Classify;
use octawitt::octagon::{
    configuration, jacobson_check, lewis_five, lewis_seven, make_octagon, node_label, OctagonData, Part,
    SequenceReport, NODES,
};
use octawitt::ring::{make_ring, AnyRing, BaseRing, RingElement};
use octawitt::witt::WittTable;
use octawitt::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "octawitt", version, about = "Hermitian forms, Witt groups and the exact octagon over small rings")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone, Debug)]
struct Opts {
    /// Base ring: Z/m, GF(p), R, or a product such as "Z/3 x GF(5)"
    #[arg(long, global = true, default_value = "Z/3")]
    ring: String,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Parameter of the etale factor for the unitary tensor configuration
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha1: Option<String>,
    /// Algebra for form verbs: scalar, etale or quaternion (inferred from --alpha/--beta)
    #[arg(long, global = true)]
    alg: Option<String>,
    #[arg(long, global = true, default_value = "+1", allow_hyphen_values = true)]
    eps: String,
    #[arg(long, global = true)]
    rank_cap: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Form file in the JSON form schema (repeatable)
    #[arg(long = "in", global = true)]
    input: Vec<String>,
    /// Diagonal form such as "1,2" or "[0,1,0,0],2" (repeatable)
    #[arg(long, global = true, allow_hyphen_values = true)]
    form: Vec<String>,
    #[arg(long, global = true)]
    part: Option<String>,
    /// Rank of the hyperbolic form
    #[arg(long, global = true, default_value_t = 1)]
    rank: usize,
    /// Octagon node for chain witnesses (all nodes when omitted)
    #[arg(long, global = true)]
    node: Option<usize>,
    /// Random diagonal inputs per node for chain witnesses
    #[arg(long, global = true, default_value_t = 20)]
    samples: usize,
    /// Summand cap for the preimage oracle
    #[arg(long, global = true)]
    search_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single forms
    Form {
        #[command(subcommand)]
        verb: FormVerb,
    },
    /// Witt groups
    Witt {
        #[command(subcommand)]
        verb: WittVerb,
    },
    /// Octagon configurations
    Octagon {
        #[command(subcommand)]
        verb: OctVerb,
    },
    /// Lewis exact sequences
    Sequence {
        #[command(subcommand)]
        verb: SeqVerb,
    },
    /// Isotropy and isometry of a form versus its trace form
    Jacobson,
}

#[derive(Subcommand, Clone, Copy)]
enum FormVerb {
    Diag,
    Hyp,
    Witt,
    Disc,
    Isometric,
}

#[derive(Subcommand, Clone, Copy)]
enum WittVerb {
    Table,
}

#[derive(Subcommand, Clone, Copy)]
enum OctVerb {
    Make,
    Check,
    Finer,
    Chain,
}

#[derive(Subcommand, Clone, Copy)]
enum SeqVerb {
    Five,
    Seven,
}

struct Report {
    json: Value,
    text: Vec<String>,
    ok: bool,
}

impl Report {
    fn ok(json: Value, text: Vec<String>) -> Self {
        Report { json, text, ok: true }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Inconclusive(_) | Error::CapExceeded(_) => 3,
        Error::InternalInconsistency(_) | Error::InvalidWitness(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    panic::set_hook(Box::new(|_| {}));
    let res = panic::catch_unwind(AssertUnwindSafe(|| dispatch(&cli)));
    match res {
        Ok(Ok(rep)) => {
            if cli.opts.json {
                println!("{}", serde_json::to_string_pretty(&rep.json).unwrap_or_default());
            } else {
                for l in &rep.text {
                    println!("{l}");
                }
            }
            ExitCode::from(if rep.ok { 0 } else { 1 })
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if cli.opts.json {
                println!("{}", json!({"error": e.to_string()}));
            }
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Report, Error> {
    match make_ring(&cli.opts.ring)? {
        AnyRing::Finite(r) => run(&r, &cli.cmd, &cli.opts),
        AnyRing::Real(r) => run(&r, &cli.cmd, &cli.opts),
    }
}

fn run<R: Classify + Splittable>(base: &BaseRing<R>, cmd: &Cmd, o: &Opts) -> Result<Report, Error> {
    match cmd {
        Cmd::Form { verb } => form_verb(base, *verb, o),
        Cmd::Witt { verb: WittVerb::Table } => {
            let a = algebra(base, o)?;
            let t = WittTable::build(&a, &a.sign(sign(&o.eps)?), o.rank_cap)?;
            t.check_axioms()?;
            let j = t.to_json();
            let text = vec![format!("classes: {}", t.len()), format!("structure: {}", j["structure"])];
            Ok(Report::ok(j, text))
        }
        Cmd::Octagon { verb } => oct_verb(base, *verb, o),
        Cmd::Sequence { verb } => {
            let alpha = elem(base, &o.alpha, "--alpha")?;
            let rep = match verb {
                SeqVerb::Five => lewis_five(base, &alpha, o.rank_cap)?,
                SeqVerb::Seven => lewis_seven(base, &alpha, &elem(base, &o.beta, "--beta")?, o.rank_cap)?,
            };
            Ok(sequence_report(rep))
        }
        Cmd::Jacobson => {
            let a = algebra(base, o)?;
            let fs = forms(&a, &a.one(), o)?;
            let f = fs.first().ok_or_else(|| Error::InvalidSpec("jacobson needs --form or --in".into()))?;
            let rep = jacobson_check(f, fs.get(1))?;
            let word = |b: bool| if b { "isotropic" } else { "anisotropic" };
            let mut text = vec![
                format!("form: {}", word(rep.isotropic)),
                format!("trace form: {}", word(rep.trace_isotropic)),
                format!("isotropy equivalence: {}", verdict(rep.isotropy_equiv)),
            ];
            if let (Some(x), Some(y)) = (rep.isometric, rep.trace_isometric) {
                text.push(format!("isometric: {x}, trace forms isometric: {y}"));
            }
            text.push(format!("isometry equivalence: {}", verdict(rep.isometry_equiv)));
            let ok = rep.isotropy_equiv && rep.isometry_equiv;
            Ok(Report { json: serde_json::to_value(&rep).unwrap_or(Value::Null), text, ok })
        }
    }
}

fn verdict(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "FAILS"
    }
}

fn sign(s: &str) -> Result<i64, Error> {
    match s.trim() {
        "+1" | "1" | "+" => Ok(1),
        "-1" | "-" => Ok(-1),
        _ => Err(Error::InvalidSpec(format!("epsilon must be +1 or -1, got '{s}'"))),
    }
}

fn elem<R: Classify>(base: &BaseRing<R>, v: &Option<String>, flag: &str) -> Result<RingElement<R>, Error> {
    let s = v.as_deref().ok_or_else(|| Error::InvalidSpec(format!("{flag} is required")))?;
    base.parse_elem(s)
}

fn algebra<R: Classify>(base: &BaseRing<R>, o: &Opts) -> Result<Alg<R>, Error> {
    let kind = match (&o.alg, &o.alpha, &o.beta) {
        (Some(k), _, _) => k.as_str(),
        (None, _, Some(_)) => "quaternion",
        (None, Some(_), None) => "etale",
        (None, None, None) => "scalar",
    };
    match kind {
        "scalar" => Algebra::scalar(base),
        "etale" => Algebra::quadratic_etale(base, &elem(base, &o.alpha, "--alpha")?),
        "quaternion" => Algebra::quaternion(base, &elem(base, &o.alpha, "--alpha")?, &elem(base, &o.beta, "--beta")?),
        k => Err(Error::InvalidSpec(format!("unknown algebra '{k}'"))),
    }
}

/// Splits at top-level commas or semicolons.
fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for ch in s.chars() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            _ => {}
        }
        if (ch == ',' || ch == ';') && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    out.push(cur);
    out.into_iter().map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

fn entry_json(s: &str) -> Value {
    match s.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        Some(inner) => Value::Array(
            inner
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|x| !x.is_empty())
                .map(|x| Value::String(x.to_string()))
                .collect(),
        ),
        None => Value::String(s.to_string()),
    }
}

fn forms<R: Classify>(a: &Alg<R>, eps: &AlgElement<R>, o: &Opts) -> Result<Vec<HermitianForm<R>>, Error> {
    let mut out = Vec::new();
    for path in &o.input {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidSpec(format!("{path}: {e}")))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{path}: {e}")))?;
        let mut f = HermitianForm::from_json(a, &v)?;
        if v.get("epsilon").is_none() {
            f = f.with_gram(eps.clone(), f.gram.clone())?;
        }
        out.push(f);
    }
    for s in &o.form {
        let entries = split_top(s)
            .iter()
            .map(|e| a.elem_from_json(&entry_json(e)))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(HermitianForm::diagonal(a, eps, &entries)?);
    }
    Ok(out)
}

fn one_form<R: Classify>(a: &Alg<R>, eps: &AlgElement<R>, o: &Opts) -> Result<HermitianForm<R>, Error> {
    forms(a, eps, o)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidSpec("a form is required (--form or --in)".into()))
}

fn form_verb<R: Classify>(base: &BaseRing<R>, verb: FormVerb, o: &Opts) -> Result<Report, Error> {
    let a = algebra(base, o)?;
    let eps = a.sign(sign(&o.eps)?);
    match verb {
        FormVerb::Diag | FormVerb::Hyp => {
            let f = match verb {
                FormVerb::Hyp => HermitianForm::hyperbolic(&a, &eps, o.rank)?,
                _ => one_form(&a, &eps, o)?,
            };
            let text = vec![
                format!("rank: {}", f.n),
                format!("unimodular: {}", f.is_unimodular()),
                format!("hyperbolic: {}", f.is_hyperbolic()?),
            ];
            Ok(Report::ok(f.to_json(), text))
        }
        FormVerb::Witt => {
            let f = one_form(&a, &eps, o)?;
            let d = f.witt_decompose()?;
            let text = vec![
                format!("hyperbolic planes: {:?}", d.hyperbolic_rank),
                format!("anisotropic kernel rank: {}", d.kernel.n),
            ];
            Ok(Report::ok(json!({"hyperbolic_rank": d.hyperbolic_rank, "kernel": d.kernel.to_json()}), text))
        }
        FormVerb::Disc => {
            let f = one_form(&a, &eps, o)?;
            let d = f.discriminant()?;
            let text = vec![format!("{}: {}", d.kind, d.value), format!("trivial: {:?}", d.trivial)];
            Ok(Report::ok(serde_json::to_value(&d).unwrap_or(Value::Null), text))
        }
        FormVerb::Isometric => {
            let fs = forms(&a, &eps, o)?;
            if fs.len() != 2 {
                return Err(Error::InvalidSpec("form isometric needs exactly two forms".into()));
            }
            let iso = fs[0].is_isometric(&fs[1])?;
            Ok(Report::ok(json!({"isometric": iso}), vec![format!("isometric: {iso}")]))
        }
    }
}

fn octagon<R: Classify>(base: &BaseRing<R>, o: &Opts) -> Result<OctagonData<R>, Error> {
    let alpha1 = o.alpha1.as_ref().map(|s| base.parse_elem(s)).transpose()?;
    let a = configuration(base, &elem(base, &o.alpha, "--alpha")?, &elem(base, &o.beta, "--beta")?, alpha1.as_ref())?;
    make_octagon(&a, &a.sign(sign(&o.eps)?))
}

fn oct_verb<R: Classify + Splittable>(base: &BaseRing<R>, verb: OctVerb, o: &Opts) -> Result<Report, Error> {
    let d = octagon(base, o)?;
    match verb {
        OctVerb::Make => {
            let j = d.to_json();
            let text = vec![
                format!("A: {} of dimension {}", d.a.kind_name(), d.a.dim),
                format!("B: rank {} over R", d.b_basis.len()),
                format!("T connected: {}", d.t_connected),
                format!("types: {}", serde_json::to_string(&d.types).unwrap_or_default()),
            ];
            Ok(Report::ok(j, text))
        }
        OctVerb::Check => {
            let rep = d.check_exact(Some(o.rank_cap.unwrap_or(8)))?;
            let mut text: Vec<String> = rep
                .nodes
                .iter()
                .map(|n| {
                    format!(
                        "node {} {}: {} classes, structure {:?}, {}",
                        n.node,
                        n.label,
                        n.classes,
                        n.structure,
                        if n.exact { "exact" } else { "NOT exact" }
                    )
                })
                .collect();
            for n in rep.nodes.iter().filter(|n| !n.exact) {
                if let Some(c) = &n.counterexample {
                    text.push(format!("counterexample at node {}: {c}", n.node));
                }
            }
            let ok = rep.exact;
            Ok(Report { json: serde_json::to_value(&rep).unwrap_or(Value::Null), text, ok })
        }
        OctVerb::Finer => {
            let part = Part::parse(o.part.as_deref().ok_or_else(|| Error::InvalidSpec("--part is required".into()))?)?;
            let (side, s) = NODES[part.node()];
            let f = one_form(d.alg_on(side), &d.eps_on(side, s)?, o)?;
            let predicate = d.finer_predicate(part, &f)?;
            let oracle = match d.preimage_oracle(part, &f, o.search_cap) {
                Ok(g) => Some(g),
                Err(Error::NotFound) => None,
                Err(e) => return Err(e),
            };
            let ok = predicate == oracle.is_some();
            let mut j = json!({
                "part": format!("{part:?}"),
                "node": node_label(part.node()),
                "predicate": predicate,
                "preimage_found": oracle.is_some(),
                "agree": ok,
            });
            if let Some(g) = &oracle {
                j["preimage"] = g.to_json();
            }
            if !ok {
                j["counterexample"] = f.to_json();
            }
            let text = vec![
                format!("part {part:?} at {}", node_label(part.node())),
                format!("predicate: {predicate}"),
                format!("preimage found: {}", oracle.is_some()),
                format!("agreement: {}", verdict(ok)),
            ];
            Ok(Report { json: j, text, ok })
        }
        OctVerb::Chain => chain(&d, o),
    }
}

fn chain<R: Classify>(d: &OctagonData<R>, o: &Opts) -> Result<Report, Error> {
    let nodes: Vec<usize> = match o.node {
        Some(k) if k < 8 => vec![k],
        Some(k) => return Err(Error::IndexError(k)),
        None => (0..8).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut rows = Vec::new();
    let mut text = Vec::new();
    let mut ok = true;
    for k in nodes {
        let (side, s) = NODES[k];
        let alg = d.alg_on(side);
        let eps = d.eps_on(side, s)?;
        let mut inputs = forms(alg, &eps, o)?;
        if inputs.is_empty() {
            let units: Vec<_> = alg.sym_elements(&eps)?.into_iter().filter(|u| alg.is_unit(u)).collect();
            inputs.push(HermitianForm::hyperbolic(alg, &eps, 1)?);
            if !units.is_empty() {
                for _ in 0..o.samples {
                    let n = rng.gen_range(1..=2);
                    let entries: Vec<_> = (0..n).filter_map(|_| units.choose(&mut rng).cloned()).collect();
                    inputs.push(HermitianForm::diagonal(alg, &eps, &entries)?);
                }
            }
        }
        let mut failures = Vec::new();
        for f in &inputs {
            let w = d.chain_witness(k, f)?;
            if !w.composite.verify_lagrangian(&w.lagrangian)? {
                failures.push(f.to_json());
            }
        }
        ok &= failures.is_empty();
        text.push(format!(
            "node {k} {}: {} inputs, {}",
            node_label(k),
            inputs.len(),
            if failures.is_empty() { "witness verified" } else { "WITNESS FAILED" }
        ));
        let mut row = json!({"node": k, "label": node_label(k), "inputs": inputs.len(), "verified": failures.is_empty()});
        if let Some(c) = failures.first() {
            row["counterexample"] = c.clone();
        }
        rows.push(row);
    }
    Ok(Report { json: json!({"seed": o.seed, "nodes": rows, "verified": ok}), text, ok })
}

fn sequence_report(rep: SequenceReport) -> Report {
    let mut text: Vec<String> = rep
        .nodes
        .iter()
        .map(|n| {
            format!(
                "node {} {}: {} classes, structure {:?}, {}",
                n.node,
                n.label,
                n.classes,
                n.structure,
                if n.exact { "exact" } else { "NOT exact" }
            )
        })
        .collect();
    for c in &rep.side_checks {
        text.push(format!("{}: {}", c.name, verdict(c.ok)));
    }
    let ok = rep.exact && rep.side_checks.iter().all(|c| c.ok);
    Report { json: serde_json::to_value(&rep).unwrap_or(Value::Null), text, ok }
}
