//! Fixtures and program generators shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

/// One implementation of a generated hole: the later holes it calls, as a
/// bit mask over hole positions, and whether it declares a parameter.
#[derive(Debug, Clone)]
pub struct ImplShape {
    pub calls: u32,
    pub parameter: bool,
}

/// A generated modular program. Implementations only call holes after
/// their own, so every shape is acyclic.
#[derive(Debug, Clone)]
pub struct Shape {
    pub base_calls: u32,
    pub holes: Vec<Vec<ImplShape>>,
}

fn hole_name(k: usize) -> String {
    format!("H{k}")
}

fn call_sum(mask: u32, from: usize, n: usize, out: &mut String) {
    for j in from..n {
        if mask & (1 << j) != 0 {
            write!(out, " + {}()", hole_name(j)).unwrap();
        }
    }
}

impl Shape {
    pub fn render(&self) -> String {
        let n = self.holes.len();
        let mut s = String::from("data {\n  real y;\n}\nmodel {\n  y ~ normal(0");
        call_sum(self.base_calls, 0, n, &mut s);
        s.push_str(", 1);\n}\n");
        for (k, impls) in self.holes.iter().enumerate() {
            for (i, imp) in impls.iter().enumerate() {
                let name = ["a", "b", "c"][i];
                let h = hole_name(k);
                writeln!(s, "module \"{name}\" {h}() {{").unwrap();
                let mut ret = String::from("1");
                if imp.parameter {
                    writeln!(s, "  parameters {{\n    real p_{h}_{name};\n  }}").unwrap();
                    ret = format!("p_{h}_{name}");
                }
                call_sum(imp.calls, k + 1, n, &mut ret);
                writeln!(s, "  return {ret};\n}}").unwrap();
            }
        }
        s
    }
}

/// Up to five holes with up to three implementations each.
pub fn random_shape(rng: &mut impl Rng) -> Shape {
    let n = rng.gen_range(1..=5);
    let holes = (0..n)
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| ImplShape {
                    calls: rng.gen_range(0..32),
                    parameter: rng.gen_bool(0.5),
                })
                .collect()
        })
        .collect();
    Shape {
        base_calls: rng.gen_range(1..(1u32 << n)),
        holes,
    }
}

/// `H1` to `Hd`, each either stopping or going on to the next hole.
pub fn tall_chain(depth: usize) -> String {
    let mut s = String::from("data {\n  real y;\n}\nmodel {\n  y ~ normal(H1(), 1);\n}\n");
    for k in 1..=depth {
        writeln!(s, "module \"stop\" H{k}() {{\n  return 0;\n}}").unwrap();
        let next = if k == depth { "1".to_string() } else { format!("H{}()", k + 1) };
        writeln!(s, "module \"go\" H{k}() {{\n  return {next};\n}}").unwrap();
    }
    s
}
