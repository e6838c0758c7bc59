//! Command-line front end for the MRSO solver toolkit.
//!
//! Every command reads the files named by its flags and writes a single-line
//! JSON document to standard output. Domain outcomes that are answers rather
//! than failures (an infeasible instance, a graph that is not a cograph)
//! exit 0; input and validation problems exit 1; an internal assertion
//! failure exits 2.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mrso_core::builders::{
    cograph_expression, implied_graph, mis_reduction, naive_expression, random_instance,
    tree_expression, BuildError, PlainGraph,
};
use mrso_core::compare::{compare_instances, CompareOptions};
use mrso_core::cwexpr::{parse_expression, validate_against, CwExpression};
use mrso_core::instance::{Alphabet, MrsoInstance};
use mrso_core::solver::{brute_force, solve, Mode, SolveOptions, DEFAULT_BRUTE_BUDGET};

#[derive(Parser)]
#[command(name = "mrso", version, about = "MRSO solver toolkit", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Exact,
    Conservative,
}

impl From<ModeArg> for Mode {
    fn from(value: ModeArg) -> Mode {
        match value {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Conservative => Mode::Conservative,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum RelationArg {
    Le,
    Eq,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance over a clique-width expression
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        expr: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Include the optimal labeling in the output
        #[arg(long)]
        witness: bool,
    },
    /// Solve an instance by exhaustive enumeration
    Brute {
        #[arg(long)]
        instance: PathBuf,
        /// Maximum number of assignments to enumerate
        #[arg(long, default_value_t = DEFAULT_BRUTE_BUDGET)]
        budget: u64,
        #[arg(long)]
        witness: bool,
    },
    /// Compare the optima of two instances
    Compare {
        /// Left side as INSTANCE.json,EXPR.cwx
        #[arg(long, value_parser = parse_pair)]
        a: InstancePair,
        /// Right side as INSTANCE.json,EXPR.cwx
        #[arg(long, value_parser = parse_pair)]
        b: InstancePair,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Additionally answer one question: le (left <= right) or eq
        #[arg(long, value_enum)]
        relation: Option<RelationArg>,
        /// Reject instances whose structure graph is not degree-at-most-one
        #[arg(long)]
        d1: bool,
    },
    /// Print the implied structure graph of an instance
    Derive {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Check that an expression defines an instance's implied graph (or a
    /// plain graph given as an edge list)
    ExprCheck {
        #[arg(long)]
        expr: PathBuf,
        #[arg(long, conflicts_with = "graph")]
        instance: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Evaluate an expression to its labeled graph
    ExprEval {
        #[arg(long)]
        expr: PathBuf,
    },
    /// Print the width of an expression
    ExprWidth {
        #[arg(long)]
        expr: PathBuf,
    },
    /// Generate instances and expressions
    #[command(subcommand)]
    Gen(GenCommand),
    /// Score a labeling against an instance
    Score {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated codon values, one per codon index
        #[arg(long)]
        labeling: String,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// One label per vertex; works for every graph
    Naive(GraphToExpr),
    /// Width-2 expression of a cograph
    Cograph(GraphToExpr),
    /// Width-3 expression of a tree
    Tree(GraphToExpr),
    /// Reduce maximum independent set on a degree-<=3 graph to an MRSO-d1
    /// instance (plus its one-label-per-vertex expression)
    Mis {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Seeded random instance with degree-at-most-one bonds
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        bonds: usize,
        #[arg(long)]
        seed: u64,
        /// Alphabet size: 2 gives {x, y}, 4 gives {A, C, G, U}
        #[arg(long, default_value_t = 4)]
        sigma: usize,
        #[arg(long, default_value_t = 3)]
        codon_length: usize,
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

#[derive(Args)]
struct GraphToExpr {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Clone)]
struct InstancePair {
    instance: PathBuf,
    expr: PathBuf,
}

fn parse_pair(text: &str) -> Result<InstancePair, String> {
    match text.split_once(',') {
        Some((instance, expr)) if !instance.is_empty() && !expr.is_empty() => Ok(InstancePair {
            instance: instance.into(),
            expr: expr.into(),
        }),
        _ => Err("expected INSTANCE.json,EXPR.cwx".into()),
    }
}

fn main() {
    let exit = match panic::catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(())) => 0,
        Ok(Err(error)) => {
            eprintln!("error: {error:#}");
            1
        }
        Err(_) => {
            eprintln!("error: internal assertion failure");
            2
        }
    };
    std::process::exit(exit);
}

fn run() -> Result<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error)
            if matches!(
                error.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{error}");
            return Ok(());
        }
        Err(error) => return Err(anyhow!("{error}")),
    };
    match cli.command {
        Command::Solve {
            instance,
            expr,
            mode,
            witness,
        } => {
            let instance = load_instance(&instance)?;
            let expr = load_expression(&expr)?;
            let options = SolveOptions {
                mode: mode.into(),
                pruning: true,
            };
            let mut solution = solve(&instance, &expr, &options)?;
            if !witness {
                solution.witness = None;
            }
            println!("{}", solution.to_json_string(instance.alphabet()));
        }
        Command::Brute {
            instance,
            budget,
            witness,
        } => {
            let instance = load_instance(&instance)?;
            let mut solution = brute_force(&instance, budget)?;
            if !witness {
                solution.witness = None;
            }
            println!("{}", solution.to_json_string(instance.alphabet()));
        }
        Command::Compare {
            a,
            b,
            mode,
            relation,
            d1,
        } => {
            let left_instance = load_instance(&a.instance)?;
            let left_expr = load_expression(&a.expr)?;
            let right_instance = load_instance(&b.instance)?;
            let right_expr = load_expression(&b.expr)?;
            let options = CompareOptions {
                mode: mode.into(),
                pruning: true,
                enforce_d1: d1,
            };
            let result = compare_instances(
                (&left_instance, &left_expr),
                (&right_instance, &right_expr),
                &options,
            )?;
            #[derive(Serialize)]
            struct Doc {
                left: String,
                right: String,
                relation: &'static str,
                le: bool,
                eq: bool,
                exact: bool,
                #[serde(skip_serializing_if = "Option::is_none")]
                answer: Option<bool>,
            }
            let doc = Doc {
                left: result.left.to_string(),
                right: result.right.to_string(),
                relation: result.relation.as_str(),
                le: result.le,
                eq: result.eq,
                exact: result.exact,
                answer: relation.map(|r| match r {
                    RelationArg::Le => result.le,
                    RelationArg::Eq => result.eq,
                }),
            };
            println!("{}", serde_json::to_string(&doc)?);
        }
        Command::Derive { instance } => {
            let instance = load_instance(&instance)?;
            println!("{}", derive_doc(&instance)?);
        }
        Command::ExprCheck {
            expr,
            instance,
            graph,
        } => {
            let expr = load_expression(&expr)?;
            let matches = match (instance, graph) {
                (Some(path), None) => {
                    let instance = load_instance(&path)?;
                    validate_against(&expr, instance.implied())
                }
                (None, Some(path)) => {
                    let graph = load_graph(&path)?;
                    validate_against(&expr, &graph)
                }
                _ => bail!("exactly one of --instance or --graph is required"),
            };
            #[derive(Serialize)]
            struct Doc {
                matches: bool,
                width: u32,
            }
            println!(
                "{}",
                serde_json::to_string(&Doc {
                    matches,
                    width: expr.width(),
                })?
            );
        }
        Command::ExprEval { expr } => {
            let expr = load_expression(&expr)?;
            let graph = expr.evaluate();
            #[derive(Serialize)]
            struct VertexDoc {
                id: u32,
                label: u32,
            }
            #[derive(Serialize)]
            struct Doc {
                vertices: Vec<VertexDoc>,
                edges: Vec<(u32, u32)>,
            }
            let doc = Doc {
                vertices: graph
                    .labels()
                    .iter()
                    .map(|(&id, &label)| VertexDoc { id, label })
                    .collect(),
                edges: graph.edges().iter().copied().collect(),
            };
            println!("{}", serde_json::to_string(&doc)?);
        }
        Command::ExprWidth { expr } => {
            let expr = load_expression(&expr)?;
            #[derive(Serialize)]
            struct Doc {
                width: u32,
            }
            println!("{}", serde_json::to_string(&Doc { width: expr.width() })?);
        }
        Command::Gen(gen) => run_gen(gen)?,
        Command::Score { instance, labeling } => {
            let instance = load_instance(&instance)?;
            let texts: Vec<String> = labeling.split(',').map(str::to_string).collect();
            let labeling = instance.parse_labeling(&texts)?;
            let value = instance.score_labeling(&labeling)?;
            #[derive(Serialize)]
            struct Doc {
                value: String,
            }
            println!(
                "{}",
                serde_json::to_string(&Doc {
                    value: value.to_string(),
                })?
            );
        }
    }
    Ok(())
}

fn run_gen(gen: GenCommand) -> Result<()> {
    #[derive(Serialize)]
    struct ExprDoc {
        expression: String,
        width: u32,
    }
    #[derive(Serialize)]
    struct AnswerDoc {
        result: &'static str,
    }
    let class_result = |outcome: Result<CwExpression, BuildError>,
                        out_prefix: &Path|
     -> Result<()> {
        match outcome {
            Ok(expr) => {
                let path = with_extension(out_prefix, "cwx");
                write_file(&path, &(mrso_core::format_expression(&expr) + "\n"))?;
                println!(
                    "{}",
                    serde_json::to_string(&ExprDoc {
                        expression: path.display().to_string(),
                        width: expr.width(),
                    })?
                );
                Ok(())
            }
            Err(BuildError::NotCograph) => {
                println!("{}", serde_json::to_string(&AnswerDoc { result: "not_cograph" })?);
                Ok(())
            }
            Err(BuildError::NotTree) => {
                println!("{}", serde_json::to_string(&AnswerDoc { result: "not_tree" })?);
                Ok(())
            }
            Err(other) => Err(other.into()),
        }
    };
    match gen {
        GenCommand::Naive(args) => {
            let graph = load_graph(&args.graph)?;
            class_result(naive_expression(&graph), &args.out_prefix)
        }
        GenCommand::Cograph(args) => {
            let graph = load_graph(&args.graph)?;
            class_result(cograph_expression(&graph), &args.out_prefix)
        }
        GenCommand::Tree(args) => {
            let graph = load_graph(&args.graph)?;
            class_result(tree_expression(&graph), &args.out_prefix)
        }
        GenCommand::Mis { graph, out_prefix } => {
            let graph = load_graph(&graph)?;
            let instance = mis_reduction(&graph)?;
            let expr = naive_expression(&graph)?;
            write_instance_and_expr(&instance, &expr, &out_prefix)?;
            Ok(())
        }
        GenCommand::Random {
            n,
            bonds,
            seed,
            sigma,
            codon_length,
            out_prefix,
        } => {
            let alphabet = match sigma {
                2 => Alphabet::binary(codon_length),
                4 => Alphabet::rna(codon_length),
                other => bail!("unsupported --sigma {other}; use 2 or 4"),
            };
            let instance = random_instance(n, bonds, &alphabet, seed)?;
            let expr = naive_expression(&implied_graph(&instance))?;
            write_instance_and_expr(&instance, &expr, &out_prefix)?;
            Ok(())
        }
    }
}

fn write_instance_and_expr(
    instance: &MrsoInstance,
    expr: &CwExpression,
    out_prefix: &Path,
) -> Result<()> {
    let instance_path = with_extension(out_prefix, "json");
    let expr_path = with_extension(out_prefix, "cwx");
    write_file(&instance_path, &(instance.to_json_string() + "\n"))?;
    write_file(&expr_path, &(mrso_core::format_expression(expr) + "\n"))?;
    #[derive(Serialize)]
    struct Doc {
        instance: String,
        expression: String,
    }
    println!(
        "{}",
        serde_json::to_string(&Doc {
            instance: instance_path.display().to_string(),
            expression: expr_path.display().to_string(),
        })?
    );
    Ok(())
}

fn with_extension(prefix: &Path, extension: &str) -> PathBuf {
    let mut path = prefix.as_os_str().to_owned();
    path.push(".");
    path.push(extension);
    PathBuf::from(path)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_instance(path: &Path) -> Result<MrsoInstance> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    MrsoInstance::from_json_str(&text).with_context(|| format!("in {}", path.display()))
}

fn load_expression(path: &Path) -> Result<CwExpression> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_expression(&text).with_context(|| format!("in {}", path.display()))
}

fn load_graph(path: &Path) -> Result<PlainGraph> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    PlainGraph::from_edge_list(&text).with_context(|| format!("in {}", path.display()))
}

fn derive_doc(instance: &MrsoInstance) -> Result<String> {
    #[derive(Serialize)]
    struct EdgeDoc {
        i: u32,
        j: u32,
        patterns: Vec<(u8, u8)>,
    }
    #[derive(Serialize)]
    struct IntraDoc {
        i: u32,
        pairs: Vec<(u8, u8)>,
    }
    #[derive(Serialize)]
    struct Doc {
        n: usize,
        edges: Vec<EdgeDoc>,
        intra: Vec<IntraDoc>,
        d1: bool,
    }
    let implied = instance.implied();
    let doc = Doc {
        n: instance.codon_count(),
        edges: implied
            .edge_bonds()
            .iter()
            .map(|(&(i, j), patterns)| EdgeDoc {
                i: i + 1,
                j: j + 1,
                patterns: patterns.iter().map(|&(p, q)| (p + 1, q + 1)).collect(),
            })
            .collect(),
        intra: implied
            .intra()
            .iter()
            .map(|(&i, pairs)| IntraDoc {
                i: i + 1,
                pairs: pairs.iter().map(|&(p, q)| (p + 1, q + 1)).collect(),
            })
            .collect(),
        d1: instance.structure().is_d1(),
    };
    Ok(serde_json::to_string(&doc)?)
}
