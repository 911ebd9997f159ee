//! Greedy search over the model graph: score the neighbours of the current
//! model, move to the best model seen so far, stop when that is the current one.

use std::collections::HashMap;
use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Serialize;
use wait_timeout::ChildExt;

use crate::program::{canonical, Selection};
use crate::syntax::{parse, BlockKind, StmtKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("cannot build the program for {selection}: {message}")]
    Concretize { selection: String, message: String },
    #[error("scorer could not start: {0}")]
    Spawn(String),
    #[error("scorer exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("scorer timed out after {0:?}")]
    Timeout(Duration),
    #[error("scorer printed `{0}`, not a number")]
    Unparsable(String),
    #[error("cannot enumerate neighbours: {0}")]
    Neighbors(String),
}

/// Scores a model; higher is better.
pub trait Scorer: Sync {
    fn score(&self, sel: &Selection) -> Result<f64, ScoreError>;
}

impl<F> Scorer for F
where
    F: Fn(&Selection) -> Result<f64, ScoreError> + Sync,
{
    fn score(&self, sel: &Selection) -> Result<f64, ScoreError> {
        self(sel)
    }
}

/// Builds the concrete program text of a selection.
pub type ProgramText<'a> = &'a (dyn Fn(&Selection) -> Result<String, String> + Sync);

fn program_text(text: ProgramText<'_>, sel: &Selection) -> Result<String, ScoreError> {
    text(sel).map_err(|message| ScoreError::Concretize {
        selection: canonical(sel),
        message,
    })
}

/// Number of declarations in the `parameters` block of the concrete program.
pub fn parameter_count(program: &str) -> Result<usize, String> {
    let ast = parse(program).map_err(|e| e.to_string())?;
    Ok(ast
        .blocks
        .iter()
        .filter(|b| b.kind == BlockKind::Parameters)
        .flat_map(|b| &b.stmts)
        .filter(|s| matches!(s.kind, StmtKind::Decl { .. }))
        .count())
}

/// Deterministic stand-in for a real metric: more parameters score higher.
pub struct ParameterCount<'a> {
    pub text: ProgramText<'a>,
}

impl Scorer for ParameterCount<'_> {
    fn score(&self, sel: &Selection) -> Result<f64, ScoreError> {
        let program = program_text(self.text, sel)?;
        parameter_count(&program).map(|n| n as f64).map_err(|message| ScoreError::Concretize {
            selection: canonical(sel),
            message,
        })
    }
}

/// Runs a command on the concrete program written to a temporary file and
/// reads a number from the start of its standard output. `{file}` in the command is
/// replaced by the file path; without it the path is appended.
pub struct ExternalCommand<'a> {
    argv: Vec<String>,
    pub timeout: Option<Duration>,
    pub text: ProgramText<'a>,
    calls: AtomicU64,
}

impl<'a> ExternalCommand<'a> {
    pub fn new(template: &str, timeout: Option<Duration>, text: ProgramText<'a>) -> Result<ExternalCommand<'a>, ScoreError> {
        let argv = shell_words::split(template).map_err(|e| ScoreError::Spawn(e.to_string()))?;
        if argv.is_empty() {
            return Err(ScoreError::Spawn("empty command".into()));
        }
        Ok(ExternalCommand {
            argv,
            timeout,
            text,
            calls: AtomicU64::new(0),
        })
    }

    /// Processes started so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Scorer for ExternalCommand<'_> {
    fn score(&self, sel: &Selection) -> Result<f64, ScoreError> {
        let program = program_text(self.text, sel)?;
        let file = tempfile::Builder::new()
            .suffix(".stan")
            .tempfile()
            .map_err(|e| ScoreError::Spawn(e.to_string()))?;
        std::fs::write(file.path(), program).map_err(|e| ScoreError::Spawn(e.to_string()))?;
        let path = file.path().to_string_lossy().into_owned();
        let mut args: Vec<String> = self.argv.iter().map(|a| a.replace("{file}", &path)).collect();
        if !self.argv.iter().any(|a| a.contains("{file}")) {
            args.push(path);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut child = Command::new(&args[0])
            .args(&args[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ScoreError::Spawn(format!("{}: {e}", args[0])))?;
        let status = match self.timeout {
            Some(t) => match child.wait_timeout(t).map_err(|e| ScoreError::Spawn(e.to_string()))? {
                Some(s) => s,
                None => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ScoreError::Timeout(t));
                }
            },
            None => child.wait().map_err(|e| ScoreError::Spawn(e.to_string()))?,
        };
        let mut stdout = String::new();
        let mut stderr = String::new();
        if let Some(mut o) = child.stdout.take() {
            let _ = o.read_to_string(&mut stdout);
        }
        if let Some(mut e) = child.stderr.take() {
            let _ = e.read_to_string(&mut stderr);
        }
        if !status.success() {
            return Err(ScoreError::Failed {
                status: status.to_string(),
                stderr: stderr.trim().to_string(),
            });
        }
        // The score is the first word, so `echo 1.5` works with the path appended.
        let out = stdout.trim();
        out.split_whitespace()
            .next()
            .and_then(|w| w.parse::<f64>().ok())
            .ok_or_else(|| ScoreError::Unparsable(out.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub selection: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace {
    /// Every model scored, in scoring order.
    pub visited: Vec<Scored>,
    pub evaluations: usize,
    /// Models moved through, starting with the start.
    pub path: Vec<String>,
    pub result: Option<Scored>,
}

/// A search stopped by a failing scorer, with what it did before.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{error}")]
pub struct SearchAborted {
    pub error: ScoreError,
    pub trace: SearchTrace,
}

/// Greedy search from `start`. Each distinct selection is scored once; ties
/// keep the current model, then prefer the smallest canonical string.
#[allow(clippy::result_large_err)]
pub fn greedy_search(
    start: &Selection,
    neighbors: &dyn Fn(&Selection) -> Result<Vec<Selection>, String>,
    scorer: &dyn Scorer,
) -> Result<SearchTrace, SearchAborted> {
    let mut trace = SearchTrace {
        visited: Vec::new(),
        evaluations: 0,
        path: Vec::new(),
        result: None,
    };
    let mut seen: HashMap<String, (Selection, f64)> = HashMap::new();
    let score = |sel: &Selection, trace: &mut SearchTrace, seen: &mut HashMap<String, (Selection, f64)>| {
        let id = canonical(sel);
        if let Some((_, s)) = seen.get(&id) {
            return Ok(*s);
        }
        let s = scorer.score(sel)?;
        trace.evaluations += 1;
        trace.visited.push(Scored {
            selection: id.clone(),
            score: s,
        });
        seen.insert(id, (sel.clone(), s));
        Ok(s)
    };
    let abort = |error: ScoreError, trace: &SearchTrace| SearchAborted {
        error,
        trace: trace.clone(),
    };

    let mut current = start.clone();
    let mut current_score = score(&current, &mut trace, &mut seen).map_err(|e| abort(e, &trace))?;
    trace.path.push(canonical(&current));
    loop {
        let ns = neighbors(&current).map_err(|e| abort(ScoreError::Neighbors(e), &trace))?;
        for n in &ns {
            score(n, &mut trace, &mut seen).map_err(|e| abort(e, &trace))?;
        }
        let best = seen
            .iter()
            .max_by(|(ia, (_, a)), (ib, (_, b))| a.total_cmp(b).then_with(|| ib.cmp(ia)))
            .map(|(id, (sel, s))| (id.clone(), sel.clone(), *s))
            .expect("start is scored");
        if best.2 <= current_score {
            trace.result = Some(Scored {
                selection: canonical(&current),
                score: current_score,
            });
            return Ok(trace);
        }
        trace.path.push(best.0);
        current = best.1;
        current_score = best.2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::compile;
    use crate::testutil::MEAN_STDDEV;

    fn sel(s: &str) -> Selection {
        s.split(',')
            .map(|b| {
                let (h, i) = b.split_once(':').unwrap();
                (h.to_string(), i.to_string())
            })
            .collect()
    }

    fn triangle(s: &Selection) -> Result<Vec<Selection>, String> {
        Ok(["a", "b", "c"].iter().filter(|i| s["H"] != **i).map(|i| sel(&format!("H:{i}"))).collect())
    }

    #[test]
    fn climbs_to_the_best_implementation() {
        let by_index = |s: &Selection| Ok(["a", "b", "c"].iter().position(|i| s["H"] == *i).unwrap() as f64);
        let t = greedy_search(&sel("H:a"), &triangle, &by_index).unwrap();
        assert_eq!(t.evaluations, 3);
        assert_eq!(t.path, ["H:a", "H:c"]);
        assert_eq!(t.result.unwrap().selection, "H:c");
    }

    #[test]
    fn constant_scores_stay_put() {
        let t = greedy_search(&sel("H:b"), &triangle, &|_: &Selection| Ok(1.0)).unwrap();
        assert_eq!(t.evaluations, 3);
        assert_eq!(t.path, ["H:b"]);
    }

    #[test]
    fn ties_prefer_the_smallest_name() {
        let t = greedy_search(&sel("H:a"), &triangle, &|s: &Selection| Ok(if s["H"] == "a" { 0.0 } else { 1.0 })).unwrap();
        assert_eq!(t.result.unwrap().selection, "H:b");
    }

    #[test]
    fn failures_keep_the_partial_trace() {
        let failing = |s: &Selection| {
            if s["H"] == "c" {
                Err(ScoreError::Unparsable("nan?".into()))
            } else {
                Ok(0.0)
            }
        };
        let e = greedy_search(&sel("H:a"), &triangle, &failing).unwrap_err();
        assert_eq!(e.trace.evaluations, 2);
        assert_eq!(e.error, ScoreError::Unparsable("nan?".into()));
    }

    #[test]
    fn mean_stddev_parameter_count() {
        let c = compile(MEAN_STDDEV).unwrap();
        let text = |s: &Selection| c.concretize(&canonical(s)).map_err(|e| e.to_string());
        let neighbors = |s: &Selection| c.neighbors(&canonical(s)).map_err(|e| e.to_string());
        let scorer = ParameterCount { text: &text };
        let t = greedy_search(&sel("Mean:standard,Stddev:standard"), &neighbors, &scorer).unwrap();
        let r = t.result.unwrap();
        assert_eq!(r.score, 2.0);
        assert!(r.selection.starts_with("Mean:normal,Stddev:lognormal,StddevInformative:"));
    }

    #[test]
    fn external_command_scores_and_times_out() {
        let text = |_: &Selection| Ok("model { }".to_string());
        let echo = ExternalCommand::new("echo 1.5", None, &text).unwrap();
        assert_eq!(echo.score(&sel("H:a")), Ok(1.5));
        let cat = ExternalCommand::new("sh -c 'wc -c < {file}'", None, &text).unwrap();
        assert!(cat.score(&sel("H:a")).unwrap() > 0.0);
        let bad = ExternalCommand::new("sh -c 'echo oops'", None, &text).unwrap();
        assert_eq!(bad.score(&sel("H:a")), Err(ScoreError::Unparsable("oops".into())));
        let fail = ExternalCommand::new("false", None, &text).unwrap();
        assert!(matches!(fail.score(&sel("H:a")), Err(ScoreError::Failed { .. })));
        let slow = ExternalCommand::new("sh -c 'sleep 5; echo 1' {file}", Some(Duration::from_millis(100)), &text).unwrap();
        assert!(matches!(slow.score(&sel("H:a")), Err(ScoreError::Timeout(_))));
    }

    #[test]
    fn cache_means_one_process_per_model() {
        let text = |_: &Selection| Ok("model { }".to_string());
        let echo = ExternalCommand::new("echo 1", None, &text).unwrap();
        let t = greedy_search(&sel("H:a"), &triangle, &echo).unwrap();
        assert_eq!(t.evaluations, 3);
        assert_eq!(echo.calls(), 3);
    }
}
