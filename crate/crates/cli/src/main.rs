use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use adcollapse::algebra::MonoidRegistry;
use adcollapse::boundary::{boundary_points, CollapseContext};
use adcollapse::collapse::{collapse, pipeline, prepare_quant, ramsey_reduce, CollapseResult};
use adcollapse::harness::{equivalence_check, lemma_suite, neutral_invariance_check, EquivReport, SamplerConfig, SuiteConfig};
use adcollapse::semantics::{eval_finite, eval_omega, Assignment, OmegaPolicy};
use adcollapse::sorting_tree;
use adcollapse::syntax::{normalize, normalize_bodies, parse_with, Formula, Kind, Value, Var};
use adcollapse::words::{parse_word, Alphabet, DomainDr, WordModel};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "adcollapse", version, about = "Collapse monoid-quantifier formulas over (N,<,+) to order-only active-domain formulas")]
struct Cli {
    /// JSON monoid definitions to make available by name.
    #[arg(long = "monoid-file", global = true)]
    monoid_files: Vec<PathBuf>,
    /// Word literal, e.g. `neutral=_; w={5:a,25:b}` or `..a.b`.
    #[arg(long, global = true)]
    word: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Base of the sample domain `D_r`.
    #[arg(long, global = true)]
    r: Option<u64>,
    #[arg(long = "max-exp", global = true)]
    max_exp: Option<u32>,
    /// Evaluate over the finite prefix `[0, horizon)` instead of the infinite word.
    #[arg(long, global = true)]
    horizon: Option<Value>,
    /// Print the intermediate formulas.
    #[arg(long, global = true)]
    trace: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Non-neutral letters.
    #[arg(long, global = true, default_value = "ab")]
    letters: String,
    #[arg(long, global = true, default_value_t = '_')]
    neutral: char,
    /// Values of free variables, e.g. `x=5,y=25`.
    #[arg(long, global = true)]
    assign: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a formula on a word.
    Eval {
        formula: String,
        /// Treat undefined infinite products as false.
        #[arg(long)]
        strict: bool,
    },
    /// Normalize the bodies of a quantifier, or a formula in the pivot `--var`.
    Normalize {
        formula: String,
        #[arg(long)]
        var: Option<String>,
    },
    /// Boundary points of the outermost quantifier on a word.
    Boundary { formula: String },
    /// Sorting trees of the outermost quantifier, or of a small reference instance.
    TreeDump {
        formula: Option<String>,
        #[arg(long)]
        offset: Option<usize>,
    },
    /// Active-domain collapse.
    Collapse { formula: String },
    /// Replace numeric atoms of an active-domain formula by order types.
    Ramsey {
        formula: String,
        #[arg(long, default_value_t = 3)]
        need: usize,
    },
    /// Collapse followed by the Ramsey step.
    Pipeline {
        formula: String,
        #[arg(long, default_value_t = 3)]
        need: usize,
    },
    /// Compare two formulas on sampled words.
    Equiv {
        phi: String,
        psi: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Run one of the property suites.
    Suite {
        name: String,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Check that an active-domain formula ignores neutral letters.
    Invariance {
        formula: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

struct Env {
    registry: MonoidRegistry,
    alphabet: Alphabet,
}

impl Env {
    fn new(cli: &Cli) -> Result<Self> {
        let mut registry = MonoidRegistry::new();
        for path in &cli.monoid_files {
            registry.load_file(path).with_context(|| format!("loading {}", path.display()))?;
        }
        let mut letters: BTreeSet<char> = cli.letters.chars().filter(|&c| c != cli.neutral).collect();
        if let Some(w) = &cli.word {
            let w = parse_word(w)?;
            letters.extend(w.alphabet().non_neutral());
        }
        Ok(Env { registry, alphabet: Alphabet::with_neutral(letters, cli.neutral) })
    }

    fn parse(&self, text: &str) -> Result<Formula> {
        let f = parse_with(text, &self.registry)?;
        Ok(f)
    }

    /// The alphabet extended by the letters of `f`.
    fn alphabet_for(&self, fs: &[&Formula]) -> Alphabet {
        let mut letters: BTreeSet<char> = self.alphabet.non_neutral().collect();
        for f in fs {
            f.visit_unique(&mut |g| {
                if let Kind::Letter(c, _) = g.kind() {
                    letters.insert(*c);
                }
            });
        }
        letters.remove(&self.alphabet.neutral());
        Alphabet::with_neutral(letters, self.alphabet.neutral())
    }
}

fn word(cli: &Cli, alphabet: &Alphabet) -> Result<WordModel> {
    let text = cli.word.as_deref().ok_or_else(|| anyhow!("--word is required"))?;
    let w = parse_word(text)?;
    let w = if w.support().is_empty() { WordModel::empty(alphabet.clone()) } else { w.with_alphabet(alphabet.clone())? };
    if w.neutral() != alphabet.neutral() && !w.support().is_empty() {
        bail!("word neutral letter {} differs from --neutral {}", w.neutral(), alphabet.neutral());
    }
    Ok(w)
}

fn assignment(cli: &Cli) -> Result<Assignment> {
    let mut a = Assignment::new();
    let Some(text) = &cli.assign else { return Ok(a) };
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part.split_once('=').ok_or_else(|| anyhow!("expected name=value, got {part}"))?;
        let value: Value = value.trim().parse().with_context(|| format!("bad value in {part}"))?;
        a.insert(Var::named(name.trim()), value);
    }
    Ok(a)
}

fn outer_quant(f: &Formula) -> Result<&adcollapse::syntax::Quant> {
    f.as_quant().ok_or_else(|| anyhow!("expected a quantifier formula"))
}

fn group_order(q: &adcollapse::syntax::Quant) -> usize {
    q.monoid.as_group().map_or(1, |g| g.size())
}

fn print_report(cli: &Cli, report: &EquivReport) {
    match cli.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report).expect("report serializes")),
        Format::Text => {
            println!("{}", report.summary());
            for c in report.counterexamples.iter().take(5) {
                println!("counterexample: {} {:?}: {} vs {}", c.word, c.assignment, c.lhs, c.rhs);
            }
        }
    }
}

fn report_exit(report: &EquivReport) -> ExitCode {
    if report.counterexamples.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_collapse(cli: &Cli, res: &CollapseResult) {
    match cli.format {
        Format::Json => {
            let mut v = json!({ "formula": res.formula.to_string(), "threshold": res.threshold, "dag_size": res.formula.dag_size() });
            if cli.trace {
                v["trace"] = serde_json::to_value(&res.trace).expect("trace serializes");
            }
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        }
        Format::Text => {
            if cli.trace {
                for t in &res.trace {
                    println!("{}: {}", t.name, t.formula);
                }
            }
            println!("threshold: {}", res.threshold);
            println!("{}", res.formula);
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let env = Env::new(cli)?;
    match &cli.command {
        Command::Eval { formula, strict } => {
            let phi = env.parse(formula)?;
            let ab = env.alphabet_for(&[&phi]);
            let w = word(cli, &ab)?;
            let a = assignment(cli)?;
            let verdict = match cli.horizon {
                Some(h) => format!("{}", eval_finite(&phi, &w, &a, h)?),
                None => {
                    let policy = if *strict { OmegaPolicy::strict() } else { OmegaPolicy::default() };
                    format!("{:?}", eval_omega(&phi, &w, &a, &policy)?)
                }
            };
            match cli.format {
                Format::Json => println!("{}", json!({ "formula": phi.to_string(), "word": w.to_string(), "verdict": verdict })),
                Format::Text => println!("{verdict}"),
            }
        }
        Command::Normalize { formula, var } => {
            let phi = env.parse(formula)?;
            let ab = env.alphabet_for(&[&phi]);
            let (bodies, divisor) = match (var, phi.as_quant()) {
                (Some(v), _) => {
                    let n = normalize(&phi, Var::named(v), &ab, None)?;
                    (vec![n.formula], n.divisor)
                }
                (None, Some(q)) => normalize_bodies(&q.expanded_bodies(), q.var, &ab, Some(&q.monoid))?,
                (None, None) => bail!("give --var or a quantifier formula"),
            };
            match cli.format {
                Format::Json => {
                    let bodies: Vec<String> = bodies.iter().map(|b| b.to_string()).collect();
                    println!("{}", json!({ "divisor": divisor, "bodies": bodies }));
                }
                Format::Text => {
                    println!("divisor: {divisor}");
                    for b in &bodies {
                        println!("{b}");
                    }
                }
            }
        }
        Command::Boundary { formula } => {
            let phi = env.parse(formula)?;
            let q = outer_quant(&phi)?;
            let ab = env.alphabet_for(&[&phi]);
            let w = word(cli, &ab)?;
            let a = assignment(cli)?;
            let (ctx, _) = prepare_quant(q, &ab, group_order(q), 0)?;
            let b = boundary_points(&w.nnp(), &a, &ctx)?;
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&json!({ "context": ctx, "boundary": b }))?),
                Format::Text => {
                    println!("offsets: {}", ctx.offsets.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", "));
                    println!("{:>12}  {:<12}  {}", "point", "offsets", "gap to next");
                    for (i, &pt) in b.points.iter().enumerate() {
                        let ts: Vec<String> = (0..b.per_offset.len())
                            .filter(|&t| b.per_offset[t].binary_search(&pt).is_ok())
                            .map(|t| t.to_string())
                            .collect();
                        let gap = match b.points.get(i + 1) {
                            Some(&next) => format!("({pt}, {next})"),
                            None => format!("({pt}, inf)"),
                        };
                        println!("{pt:>12}  {:<12}  {gap}", ts.join(","));
                    }
                }
            }
        }
        Command::TreeDump { formula, offset } => {
            let (ctx, nnp, r) = match formula {
                Some(text) => {
                    let phi = env.parse(text)?;
                    let q = outer_quant(&phi)?;
                    let ab = env.alphabet_for(&[&phi]);
                    let (ctx, _) = prepare_quant(q, &ab, group_order(q), 0)?;
                    let w = word(cli, &ab)?;
                    let r = cli.r.unwrap_or(ctx.rphi) as Value;
                    (ctx, w.nnp(), r)
                }
                None => {
                    let nnp = match &cli.word {
                        Some(_) => word(cli, &env.alphabet)?.nnp(),
                        None => vec![5, 25, 625],
                    };
                    (CollapseContext::synthetic(2, 2, 1, 1, vec![]), nnp, cli.r.unwrap_or(5) as Value)
                }
            };
            let a = assignment(cli)?;
            let ts: Vec<usize> = match offset {
                Some(t) => vec![*t],
                None => (0..ctx.offsets.len()).collect(),
            };
            let mut out = Vec::new();
            for t in ts {
                let tree = sorting_tree::build(t, &nnp, r, &ctx, &a)?;
                match cli.format {
                    Format::Json => out.push(json!({ "offset": t, "tree": tree })),
                    Format::Text => {
                        println!("t = {t} ({})", ctx.offsets[t]);
                        print!("{}", tree.dump(&ctx));
                    }
                }
            }
            if cli.format == Format::Json {
                println!("{}", serde_json::to_string_pretty(&out)?);
            }
        }
        Command::Collapse { formula } => {
            let phi = env.parse(formula)?;
            let ab = env.alphabet_for(&[&phi]);
            print_collapse(cli, &collapse(&phi, &ab)?);
        }
        Command::Ramsey { formula, need } => {
            let phi = env.parse(formula)?;
            let d = DomainDr::new(cli.r.unwrap_or(4), cli.max_exp.unwrap_or(8))?;
            let res = ramsey_reduce(&phi, &d.points(), *need)?;
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&res)?),
                Format::Text => {
                    println!("Y: {:?}", res.y);
                    println!("atoms: {} colorings: {}", res.atoms, res.colorings);
                    println!("{}", res.formula);
                }
            }
        }
        Command::Pipeline { formula, need } => {
            let phi = env.parse(formula)?;
            let ab = env.alphabet_for(&[&phi]);
            let res = pipeline(&phi, &ab, cli.r, cli.max_exp.unwrap_or(8), *need)?;
            match cli.format {
                Format::Json => {
                    let mut v = serde_json::to_value(&res)?;
                    if !cli.trace {
                        v["collapse"]["trace"] = json!([]);
                    }
                    println!("{}", serde_json::to_string_pretty(&v)?);
                }
                Format::Text => {
                    if cli.trace {
                        print_collapse(cli, &res.collapse);
                    }
                    println!("r: {}", res.r);
                    println!("Y: {:?}", res.ramsey.y);
                    println!("{}", res.ramsey.formula);
                }
            }
        }
        Command::Equiv { phi, psi, samples } => {
            let phi = env.parse(phi)?;
            let psi = env.parse(psi)?;
            let ab = env.alphabet_for(&[&phi, &psi]);
            let defaults = SamplerConfig::default();
            let cfg = SamplerConfig {
                r: cli.r.map_or(defaults.r.clone(), |r| vec![r]),
                max_exp: cli.max_exp.unwrap_or(defaults.max_exp),
                samples: *samples,
                seed: cli.seed,
                ..defaults
            };
            let report = equivalence_check(&phi, &psi, &ab, &cfg)?;
            print_report(cli, &report);
            return Ok(report_exit(&report));
        }
        Command::Suite { name, instances } => {
            let defaults = SuiteConfig::default();
            let cfg = SuiteConfig { instances: *instances, seed: cli.seed, max_exp: cli.max_exp.unwrap_or(defaults.max_exp), ..defaults };
            let report = lemma_suite(name, &cfg)?;
            print_report(cli, &report);
            return Ok(report_exit(&report));
        }
        Command::Invariance { formula, trials } => {
            let psi = env.parse(formula)?;
            let ab = env.alphabet_for(&[&psi]);
            let report = neutral_invariance_check(&psi, &ab, *trials, cli.seed)?;
            print_report(cli, &report);
            return Ok(report_exit(&report));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
