//! Seeded synthetic bug bundles: small Java projects whose changed file
//! carries one to three planted lines with a rare identifier or operator.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;

use natrank::bundle::write_bundle;
use natrank_core::corpus::{BugBundle, SourceFile};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FIELDS: &[&str] = &["count", "total", "index", "size", "value", "offset", "limit", "result"];
const LISTS: &[&str] = &["items", "nodes", "names"];
const METHODS: &[&str] = &["update", "reset", "compute", "apply", "refresh", "clear", "load"];
const RARE_OPS: &[&str] = &[">>>", "^", "%", "<<"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).copied().expect("nonempty")
    }

    fn rare_ident(&mut self) -> String {
        let consonants = b"bcdfghjklmnpqrstvwxz";
        let mut s = String::from("q");
        for _ in 0..5 {
            s.push(consonants[self.rng.gen_range(0..consonants.len())] as char);
        }
        s
    }

    /// One ordinary statement.
    fn statement(&mut self) -> String {
        let a = self.pick(FIELDS);
        let b = self.pick(FIELDS);
        let l = self.pick(LISTS);
        match self.rng.gen_range(0..8) {
            0 => format!("{a} = {b} + 1;"),
            1 => format!("{a} = {a} + {b};"),
            2 => format!("{a} += {b};"),
            3 => format!("{l}.add({a});"),
            4 => format!("{a} = {l}.size();"),
            5 => format!("{a} = {b} * 2;"),
            6 => format!("{a} = 0;"),
            _ => format!("{a}++;"),
        }
    }

    /// A statement carrying a rare token.
    fn planted(&mut self) -> String {
        let a = self.pick(FIELDS);
        let b = self.pick(FIELDS);
        if self.rng.gen_bool(0.5) {
            let r = self.rare_ident();
            match self.rng.gen_range(0..3) {
                0 => format!("{a} = {b} + {r};"),
                1 => format!("{a} = {r} * 2;"),
                _ => format!("{a} += {r};"),
            }
        } else {
            let op = self.pick(RARE_OPS);
            format!("{a} = {b} {op} 3;")
        }
    }

    /// A class of a few methods; returns the text and the 1-based lines of
    /// its ordinary statements.
    fn class(&mut self, name: &str, plant: usize) -> (String, Vec<usize>) {
        let mut lines: Vec<String> = vec!["package demo;".into(), "".into(), "import java.util.List;".into(), "".into()];
        lines.push(format!("public class {name} {{"));
        for f in FIELDS {
            lines.push(format!("    private int {f};"));
        }
        for l in LISTS {
            lines.push(format!("    private List<Integer> {l};"));
        }
        let mut stmt_lines = Vec::new();
        let n_methods = self.rng.gen_range(3..=5);
        for m in 0..n_methods {
            lines.push("".into());
            lines.push(format!("    public void {}{m}() {{", self.pick(METHODS)));
            for _ in 0..self.rng.gen_range(4..=8) {
                lines.push(format!("        {}", self.statement()));
                stmt_lines.push(lines.len());
            }
            if self.rng.gen_bool(0.5) {
                let a = self.pick(FIELDS);
                let b = self.pick(FIELDS);
                lines.push(format!("        if ({a} > {b}) {{"));
                lines.push(format!("            {}", self.statement()));
                stmt_lines.push(lines.len());
                lines.push("        }".into());
            }
            lines.push("    }".into());
        }
        lines.push("}".into());
        let mut planted = Vec::new();
        let mut candidates = stmt_lines.clone();
        candidates.shuffle(&mut self.rng);
        for &ln in candidates.iter().take(plant) {
            let indent = lines[ln - 1].len() - lines[ln - 1].trim_start().len();
            lines[ln - 1] = format!("{}{}", " ".repeat(indent), self.planted());
            planted.push(ln);
        }
        planted.sort_unstable();
        (lines.join("\n") + "\n", planted)
    }
}

/// Bundle `i` of the seeded dataset: five files, the first one changed.
pub fn synthetic_bundle(seed: u64, i: usize) -> BugBundle {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i as u64)),
    };
    let plant = g.rng.gen_range(1..=3);
    let mut files = Vec::new();
    let mut buggy = BTreeMap::new();
    for f in 0..5 {
        let name = format!("Part{f}");
        let (text, planted) = g.class(&name, if f == 0 { plant } else { 0 });
        let path = format!("demo/{name}.java");
        if f == 0 {
            buggy.insert(path.clone(), planted.into_iter().collect::<BTreeSet<usize>>());
        }
        files.push(SourceFile::new(path, text));
    }
    let changed: BTreeSet<String> = buggy.keys().cloned().collect();
    BugBundle::new(format!("bug{i:02}"), "demo", files, changed, buggy).expect("generated bundle is valid")
}

/// Writes `n` bundles under `root/bugNN`.
pub fn write_dataset(root: &Path, seed: u64, n: usize) -> Vec<BugBundle> {
    (0..n)
        .map(|i| {
            let b = synthetic_bundle(seed, i);
            write_bundle(&root.join(&b.bundle_id), &b).expect("write bundle");
            b
        })
        .collect()
}

pub fn natrank_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_natrank"))
}

pub fn stub_oracle_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_natrank-stub-oracle"))
}

/// Runs `natrank` with `args`; returns (exit code, stderr).
pub fn natrank(args: &[&str]) -> (i32, String) {
    let out = Command::new(natrank_bin())
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run natrank");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}
