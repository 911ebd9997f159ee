use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use modstan::api::{self, to_json, Annotations};
use modstan::checks::Diagnostic;
use modstan::compile::{compile, Compiled, QueryError, DEFAULT_CAP};
use modstan::program::{canonical, Selection};
use modstan::search::{greedy_search, ExternalCommand, ParameterCount, ScoreError, Scorer, SearchTrace};
use modstan::service::{self, AppState};

#[derive(Parser)]
#[command(name = "modstan", version, about = "Check, concretize and explore modular Stan programs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, expand and check a program.
    Check {
        file: PathBuf,
        /// Print the compile result as JSON; diagnostics go to stderr.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Print the concrete program for a selection such as `Mean:normal,Stddev:standard`.
    Concretize {
        file: PathBuf,
        selection: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Print the model graph.
    Graph {
        file: PathBuf,
        #[arg(long)]
        nodes_only: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the models one module swap away from a selection.
    Neighbors {
        file: PathBuf,
        selection: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the module dependency graph.
    ModuleGraph {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Print the number of models and collection member counts.
    Count {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Greedy search from a start model, scoring with a command or by parameter count.
    Search {
        file: PathBuf,
        /// Defaults to the first implementation of every hole by name.
        #[arg(long)]
        start: Option<String>,
        /// Scoring command; `{file}` is replaced by the concrete program's path.
        #[arg(long)]
        scorer_cmd: Option<String>,
        /// Seconds before a scoring command is killed.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API for a program file or a directory.
    Serve {
        path: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
}

/// Exit statuses: problems with the program or query, and with files.
const INVALID: u8 = 1;
const IO: u8 = 2;

enum Failure {
    Invalid,
    Io(String),
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid) => ExitCode::from(INVALID),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(IO)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> Outcome {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_diagnostics(diags: &[Diagnostic], json: bool) {
    if json {
        eprint!("{}", to_json(diags));
    } else {
        for d in diags {
            eprintln!("{d}");
        }
    }
}

fn report_query_error(e: &QueryError, json: bool) -> Failure {
    if json {
        eprint!("{}", to_json(e));
    } else {
        eprintln!("{}: {e}", e.code());
    }
    Failure::Invalid
}

fn load(file: &Path, json: bool) -> Result<Compiled, Failure> {
    let src = read(file)?;
    compile(&src).map_err(|d| {
        report_diagnostics(&d, json);
        Failure::Invalid
    })
}

fn run(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Check { file, json, cap } => {
            let src = read(&file)?;
            let (compiled, resp) = api::compile_response(&src, cap);
            if json {
                print!("{}", to_json(&resp));
            }
            if compiled.is_none() {
                report_diagnostics(&resp.diagnostics, json);
                return Err(Failure::Invalid);
            }
            Ok(())
        }
        Cmd::Concretize {
            file,
            selection,
            output,
            json,
            cap,
        } => {
            let c = load(&file, json)?;
            if json {
                let r = api::concretize_response(&c, &selection, cap).map_err(|e| report_query_error(&e, true))?;
                emit(&to_json(&r), output.as_deref())?;
                if r.program.is_none() {
                    return Err(Failure::Invalid);
                }
                return Ok(());
            }
            let text = c.concretize(&selection).map_err(|e| {
                if let Some(vs) = e.violations() {
                    eprintln!("{}: invalid selection", e.code());
                    for v in vs {
                        eprintln!("  {v}");
                    }
                    Failure::Invalid
                } else {
                    report_query_error(&e, false)
                }
            })?;
            emit(&text, output.as_deref())
        }
        Cmd::Graph {
            file,
            nodes_only,
            format,
            cap,
            output,
        } => {
            let c = load(&file, false)?;
            let g = c.graph(nodes_only, cap).map_err(|e| report_query_error(&e, matches!(format, Format::Json)))?;
            let text = match format {
                Format::Json => to_json(&g.to_json()),
                Format::Dot => g.to_dot(),
            };
            emit(&text, output.as_deref())
        }
        Cmd::Neighbors { file, selection, json } => {
            let c = load(&file, json)?;
            let r = api::neighbors_response(&c, &selection).map_err(|e| report_query_error(&e, json))?;
            if json {
                print!("{}", to_json(&r));
            } else {
                for n in &r.neighbors {
                    println!("{}", n.id);
                }
            }
            Ok(())
        }
        Cmd::ModuleGraph { file, format } => {
            let c = load(&file, false)?;
            let g = c.module_graph();
            match format {
                Format::Json => print!("{}", to_json(&g)),
                Format::Dot => print!("{}", g.to_dot()),
            }
            Ok(())
        }
        Cmd::Count { file, cap } => {
            let c = load(&file, false)?;
            let (_, resp) = api::compile_response(&read(&file)?, cap);
            print!(
                "{}",
                to_json(&serde_json::json!({
                    "models": c.model_count(cap),
                    "collections": resp.collections,
                }))
            );
            Ok(())
        }
        Cmd::Search {
            file,
            start,
            scorer_cmd,
            timeout,
            json,
        } => search(&file, start, scorer_cmd, timeout, json),
        Cmd::Serve { path, port, cap } => serve(&path, port, cap),
    }
}

fn search(file: &Path, start: Option<String>, scorer_cmd: Option<String>, timeout: Option<f64>, json: bool) -> Outcome {
    let c = load(file, json)?;
    let start: Selection = match &start {
        Some(s) => c.valid_selection(s).map(|sel| c.label(&sel)),
        None => c.default_start(),
    }
    .map_err(|e| report_query_error(&e, json))?;
    let text = |s: &Selection| c.concretize(&canonical(s)).map_err(|e| e.to_string());
    let neighbors = |s: &Selection| c.neighbors(&canonical(s)).map_err(|e| e.to_string());
    let external;
    let counting;
    let scorer: &dyn Scorer = match &scorer_cmd {
        Some(cmd) => {
            external = ExternalCommand::new(cmd, timeout.map(Duration::from_secs_f64), &text)
                .map_err(|e| Failure::Io(e.to_string()))?;
            &external
        }
        None => {
            counting = ParameterCount { text: &text };
            &counting
        }
    };
    let print = |t: &SearchTrace| {
        if json {
            print!("{}", to_json(t));
        } else {
            for s in &t.visited {
                println!("{}\t{}", s.score, s.selection);
            }
            println!("evaluations: {}", t.evaluations);
            if let Some(r) = &t.result {
                println!("result: {} ({})", r.selection, r.score);
            }
        }
    };
    match greedy_search(&start, &neighbors, scorer) {
        Ok(t) => {
            print(&t);
            Ok(())
        }
        Err(aborted) => {
            print(&aborted.trace);
            eprintln!("search stopped: {}", aborted.error);
            Err(match aborted.error {
                ScoreError::Spawn(_) => Failure::Io(aborted.error.to_string()),
                _ => Failure::Invalid,
            })
        }
    }
}

fn serve(path: &Path, port: u16, cap: usize) -> Outcome {
    let source = if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "stan"))
            .collect();
        files.sort();
        files.into_iter().next()
    } else {
        Some(path.to_path_buf())
    };
    let compiled = match &source {
        Some(f) => Some(load(f, false)?),
        None => None,
    };
    let annotations = match &source {
        Some(f) => Annotations::path_for(f),
        None => path.join("workspace.annotations.json"),
    };
    let state = Arc::new(AppState::new(compiled, annotations, cap));
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    eprintln!("listening on http://{addr}");
    rt.block_on(service::serve(addr, state)).map_err(|e| Failure::Io(e.to_string()))
}
