//! The `homforge` command line.
//!
//! Every command prints one JSON document on stdout. Exit codes: 0 for a YES
//! / definable answer (or plain success), 1 for NO / not definable, 2 for
//! usage and input errors, 3 when a size guard or enumeration cap is hit.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::cq::{canonical_query, evaluate_named, parse_query};
use crate::cqdef::{decide_cq_definability, parse_relation, reduce_php_to_nondefinability, relation_from_names, DefinabilityVerdict};
use crate::error::{Error, Result};
use crate::format::{read_structure, structure_to_value, write_structure};
use crate::normalform::{digraph_transform, single_relation_transform};
use crate::solver::{decide_php, PhpAnswer, Propagation, SolverConfig, VariableOrder};
use crate::structure::{binarize_unary, compose_id, product, PhpInstance, PointedStructure, ProductIndex, Structure, DEFAULT_PRODUCT_GUARD};
use crate::tiling::{brute_force_tiling, encode_tiling_php, tiling_from_product_map, tiling_to_json, EncodingMode, TileSystem, TilingInstance};

/// Environment variable overriding the default product guard.
pub const GUARD_ENV: &str = "HOMFORGE_GUARD";

pub const EXIT_YES: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "homforge", version, about = "Product homomorphism problem toolkit")]
struct Cli {
    /// Pretty-print the JSON output.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether the product of the factors maps homomorphically to the target.
    CheckHom {
        #[arg(required = true)]
        factors: Vec<PathBuf>,
        #[arg(long)]
        target: PathBuf,
        /// Include the homomorphism in the output.
        #[arg(long)]
        witness: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Materialize the direct product of the factors.
    Product {
        #[arg(required = true)]
        factors: Vec<PathBuf>,
        /// Write the product here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        guard: Option<u64>,
    },
    #[command(subcommand)]
    Reduce(ReduceCommand),
    /// Decide a tiling instance, by brute force or through its product encoding.
    SolveTiling {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        prefix: Vec<String>,
        /// Solve the encoded product instance and decode the homomorphism.
        #[arg(long)]
        via_php: bool,
        #[arg(long, default_value = "exact")]
        mode: ModeArg,
        #[command(flatten)]
        solver: SolverArgs,
    },
    #[command(subcommand)]
    Cq(CqCommand),
    #[command(subcommand)]
    Cqdef(CqdefCommand),
}

#[derive(Debug, Subcommand)]
enum ReduceCommand {
    /// Encode a tiling instance as factors A1..A2m and target B.
    Tiling {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        prefix: Vec<String>,
        #[arg(long, default_value = "exact")]
        mode: ModeArg,
        /// Replace the unary prefix relations by binary diagonals.
        #[arg(long)]
        binarize: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Rewrite every structure to a single relation (star transform, then merge).
    SingleRel {
        #[command(flatten)]
        inst: InstanceArgs,
    },
    /// Rewrite a single-relation instance into gadget digraphs.
    Digraph {
        #[command(flatten)]
        inst: InstanceArgs,
    },
    /// Build the definability instance C.json and S.json from a digraph instance.
    PhpToCqdef {
        #[command(flatten)]
        inst: InstanceArgs,
    },
}

#[derive(Debug, Subcommand)]
enum CqCommand {
    /// Evaluate a query file on a structure.
    Eval {
        #[arg(long)]
        query: PathBuf,
        structure: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Print the canonical query of a structure pointed at the given elements.
    Canonical {
        structure: PathBuf,
        #[arg(long, num_args = 0..)]
        distinguished: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum CqdefCommand {
    /// Decide whether the relation in --relation is CQ-definable in the structure.
    Check {
        structure: PathBuf,
        #[arg(long)]
        relation: PathBuf,
        #[arg(long)]
        witness: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Args)]
struct InstanceArgs {
    #[arg(required = true)]
    factors: Vec<PathBuf>,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "most-constrained")]
    order: OrderArg,
    #[arg(long, default_value = "arc-consistency")]
    propagation: PropagationArg,
    /// Build product constraints without materializing the product.
    #[arg(long)]
    lazy: bool,
    /// Maximum product size (defaults to $HOMFORGE_GUARD or 1000000).
    #[arg(long)]
    guard: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    MostConstrained,
    Input,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PropagationArg {
    None,
    ArcConsistency,
}

impl From<ModeArg> for EncodingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => EncodingMode::Exact,
            ModeArg::PaperLiteral => EncodingMode::PaperLiteral,
        }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Ctx {
    pretty: bool,
    env_guard: Option<u64>,
}

impl Ctx {
    fn guard(&self, flag: Option<u64>) -> u64 {
        flag.or(self.env_guard).unwrap_or(DEFAULT_PRODUCT_GUARD)
    }

    fn config(&self, args: &SolverArgs) -> SolverConfig {
        SolverConfig {
            variable_order: match args.order {
                OrderArg::MostConstrained => VariableOrder::MostConstrainedFirst,
                OrderArg::Input => VariableOrder::InputOrder,
            },
            propagation: match args.propagation {
                PropagationArg::None => Propagation::None,
                PropagationArg::ArcConsistency => Propagation::ArcConsistency,
            },
            enumeration_cap: None,
            product_guard: self.guard(args.guard),
            threads: args.threads,
            lazy_product: args.lazy,
        }
    }

    fn render(&self, v: &Value) -> String {
        let mut s = if self.pretty {
            serde_json::to_string_pretty(v).expect("json values serialize")
        } else {
            serde_json::to_string(v).expect("json values serialize")
        };
        s.push('\n');
        s
    }
}

/// Runs the CLI on `args` (including the program name). `guard_env` is the
/// value of `HOMFORGE_GUARD`, if set.
pub fn execute<I, T>(args: I, guard_env: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_YES };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let env_guard = match guard_env.map(str::parse::<u64>) {
        None => None,
        Some(Ok(g)) if g > 0 => Some(g),
        Some(_) => {
            return Outcome {
                code: EXIT_USAGE,
                stdout: String::new(),
                stderr: format!("error: {GUARD_ENV} must be a positive integer\n"),
            }
        }
    };
    let ctx = Ctx { pretty: cli.pretty, env_guard };
    match run(&ctx, cli.command) {
        Ok((code, value)) => Outcome { code, stdout: ctx.render(&value), stderr: String::new() },
        Err(e) => {
            let code = match e {
                Error::GuardExceeded { .. } | Error::CapExceeded { .. } => EXIT_GUARD,
                _ => EXIT_USAGE,
            };
            Outcome { code, stdout: String::new(), stderr: format!("error: {e}\n") }
        }
    }
}

fn read_instance(factors: &[PathBuf], target: &Path) -> Result<PhpInstance> {
    let factors = factors.iter().map(read_structure).collect::<Result<Vec<_>>>()?;
    PhpInstance::new(factors, read_structure(target)?)
}

fn read_tiling(system: &Path, prefix: &[String]) -> Result<TilingInstance> {
    let text = std::fs::read_to_string(system).map_err(|e| Error::Io(format!("{}: {e}", system.display())))?;
    let sys = TileSystem::parse(&text)?;
    TilingInstance::new(sys, prefix).map_err(|e| Error::Parse(e.to_string()))
}

fn product_element_name(factors: &[Structure], index: &ProductIndex, x: usize) -> String {
    let comps: Vec<&str> = index.decode(x).iter().zip(factors).map(|(&c, f)| f.element(c)).collect();
    compose_id(&comps)
}

fn write_instance(dir: &Path, inst: &PhpInstance) -> Result<Value> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut factors = Vec::new();
    for (i, f) in inst.factors().iter().enumerate() {
        let path = dir.join(format!("A{}.json", i + 1));
        write_structure(&path, f)?;
        factors.push(path.display().to_string());
    }
    let target = dir.join("B.json");
    write_structure(&target, inst.target())?;
    Ok(json!({
        "factors": factors,
        "target": target.display().to_string(),
        "signature": inst.signature().to_string(),
    }))
}

fn run(ctx: &Ctx, command: Command) -> Result<(i32, Value)> {
    match command {
        Command::CheckHom { factors, target, witness, solver } => {
            let inst = read_instance(&factors, &target)?;
            let cfg = ctx.config(&solver);
            let answer = decide_php(&inst, &cfg)?;
            let mut out = json!({
                "answer": if answer.is_yes() { "YES" } else { "NO" },
                "factors": inst.factors().len(),
                "product_size": u64::try_from(inst.product_cardinality()).map_or_else(|_| json!(inst.product_cardinality().to_string()), |n| json!(n)),
            });
            if let (true, PhpAnswer::Yes(h)) = (witness, &answer) {
                let index = ProductIndex::of(inst.factors());
                let map: BTreeMap<String, &str> = h
                    .mapping()
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (product_element_name(inst.factors(), &index, x), inst.target().element(y)))
                    .collect();
                out["witness"] = json!(map);
            }
            Ok((if answer.is_yes() { EXIT_YES } else { EXIT_NO }, out))
        }
        Command::Product { factors, out, guard } => {
            let factors = factors.iter().map(read_structure).collect::<Result<Vec<_>>>()?;
            let p = product(&factors, ctx.guard(guard))?;
            match out {
                Some(path) => {
                    write_structure(&path, &p)?;
                    Ok((EXIT_YES, json!({ "written": path.display().to_string(), "size": p.len() })))
                }
                None => Ok((EXIT_YES, structure_to_value(&p))),
            }
        }
        Command::Reduce(r) => run_reduce(r),
        Command::SolveTiling { system, prefix, via_php, mode, solver } => {
            let inst = read_tiling(&system, &prefix)?;
            let found = if via_php {
                let php = encode_tiling_php(&inst, mode.into());
                decide_php(&php, &ctx.config(&solver))?
                    .witness()
                    .map(|h| tiling_from_product_map(h, &inst))
            } else {
                brute_force_tiling(&inst)?
            };
            let mut out = json!({
                "answer": if found.is_some() { "YES" } else { "NO" },
                "m": inst.m(),
                "method": if via_php { "php" } else { "brute-force" },
            });
            if let Some(t) = &found {
                out["tiling"] = tiling_to_json(t, inst.system());
                out["valid"] = json!(t.is_valid(&inst));
            }
            Ok((if found.is_some() { EXIT_YES } else { EXIT_NO }, out))
        }
        Command::Cq(CqCommand::Eval { query, structure, solver }) => {
            let text = std::fs::read_to_string(&query).map_err(|e| Error::Io(format!("{}: {e}", query.display())))?;
            let q = parse_query(&text)?;
            let s = read_structure(&structure)?;
            let answers = evaluate_named(&q, &s, &ctx.config(&solver))?;
            Ok((EXIT_YES, json!({ "count": answers.len(), "answers": answers })))
        }
        Command::Cq(CqCommand::Canonical { structure, distinguished }) => {
            let s = read_structure(&structure)?;
            let p = PointedStructure::from_names(s, &distinguished).map_err(|e| Error::Parse(e.to_string()))?;
            let q = canonical_query(&p)?;
            Ok((EXIT_YES, serde_json::to_value(&q)?))
        }
        Command::Cqdef(CqdefCommand::Check { structure, relation, witness, solver }) => {
            let s = read_structure(&structure)?;
            let text =
                std::fs::read_to_string(&relation).map_err(|e| Error::Io(format!("{}: {e}", relation.display())))?;
            let rel = relation_from_names(&s, &parse_relation(&text)?).map_err(|e| Error::Parse(e.to_string()))?;
            match decide_cq_definability(&s, &rel, &ctx.config(&solver))? {
                DefinabilityVerdict::Definable { query } => Ok((
                    EXIT_YES,
                    json!({ "answer": "Definable", "query": query, "text": query.to_string() }),
                )),
                DefinabilityVerdict::NotDefinable { witness_tuple, witness_hom } => {
                    let tuple: Vec<&str> = witness_tuple.iter().map(|&x| s.element(x)).collect();
                    let mut out = json!({ "answer": "NotDefinable", "witness_tuple": tuple });
                    if witness {
                        let copies = vec![s.clone(); rel.len()];
                        let index = ProductIndex::of(&copies);
                        let map: BTreeMap<String, &str> = witness_hom
                            .mapping()
                            .iter()
                            .enumerate()
                            .map(|(x, &y)| (product_element_name(&copies, &index, x), s.element(y)))
                            .collect();
                        out["witness"] = json!(map);
                    }
                    Ok((EXIT_NO, out))
                }
            }
        }
    }
}

fn run_reduce(r: ReduceCommand) -> Result<(i32, Value)> {
    match r {
        ReduceCommand::Tiling { system, prefix, mode, binarize, out_dir } => {
            let inst = read_tiling(&system, &prefix)?;
            let mut php = encode_tiling_php(&inst, mode.into());
            if binarize {
                php = php.map_structures(|s| Ok(binarize_unary(s)))?;
            }
            let mut out = write_instance(&out_dir, &php)?;
            out["m"] = json!(inst.m());
            out["mode"] = json!(match mode {
                ModeArg::Exact => "exact",
                ModeArg::PaperLiteral => "paper-literal",
            });
            Ok((EXIT_YES, out))
        }
        ReduceCommand::SingleRel { inst } => {
            let php = read_instance(&inst.factors, &inst.target)?;
            Ok((EXIT_YES, write_instance(&inst.out_dir, &single_relation_transform(&php)?)?))
        }
        ReduceCommand::Digraph { inst } => {
            let php = read_instance(&inst.factors, &inst.target)?;
            Ok((EXIT_YES, write_instance(&inst.out_dir, &digraph_transform(&php)?)?))
        }
        ReduceCommand::PhpToCqdef { inst } => {
            let php = read_instance(&inst.factors, &inst.target)?;
            let red = reduce_php_to_nondefinability(&php)?;
            let dir = &inst.out_dir;
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let c_path = dir.join("C.json");
            write_structure(&c_path, &red.structure)?;
            let s_path = dir.join("S.json");
            let tuples: Vec<Vec<&str>> = red
                .relation
                .iter()
                .map(|t| t.iter().map(|&x| red.structure.element(x)).collect())
                .collect();
            let mut text = serde_json::to_string(&tuples)?;
            text.push('\n');
            std::fs::write(&s_path, text).map_err(|e| Error::Io(format!("{}: {e}", s_path.display())))?;
            Ok((
                EXIT_YES,
                json!({
                    "structure": c_path.display().to_string(),
                    "relation": s_path.display().to_string(),
                    "path_length": red.path_length,
                    "apex_audit": red.apex_audit(),
                }),
            ))
        }
    }
}
