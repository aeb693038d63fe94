#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn kgwalk() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kgwalk"));
    c.env_remove("KGWALK_OUT_DIR");
    c
}

pub fn run(args: &[&str]) -> Output {
    kgwalk().args(args).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Paths of a generated labelled graph.
pub struct Fixture {
    pub graph: PathBuf,
    pub split: PathBuf,
    pub leak: PathBuf,
}

impl Fixture {
    pub fn graph(&self) -> &str {
        self.graph.to_str().unwrap()
    }
    pub fn split(&self) -> &str {
        self.split.to_str().unwrap()
    }
    pub fn leak(&self) -> &str {
        self.leak.to_str().unwrap()
    }
}

/// Entities in three classes, each pointing at class-specific topics; the
/// `label` predicate restates the class and is listed as a leak.
pub fn write_fixture(dir: &Path, entities: usize) -> Fixture {
    let mut state = 7u64;
    let mut next = |m: usize| {
        state = kgwalk::seed::mix64(state);
        (state % m as u64) as usize
    };
    let mut nt = String::new();
    let mut split = String::new();
    for i in 0..entities {
        let c = i % 3;
        let e = format!("http://ex.org/e{i}");
        for _ in 0..3 {
            nt += &format!("<{e}> <http://ex.org/topic> <http://ex.org/t{c}_{}> .\n", next(4));
        }
        nt += &format!("<{e}> <http://ex.org/knows> <http://ex.org/e{}> .\n", next(entities));
        nt += &format!("<{e}> <http://ex.org/name> \"name {i}\" .\n");
        nt += &format!("<{e}> <http://ex.org/label> <http://ex.org/class{c}> .\n");
        let part = if i % 4 == 0 { "test" } else { "train" };
        split += &format!("<{e}>\tc{c}\t{part}\n");
    }
    for c in 0..3 {
        for k in 0..4 {
            nt += &format!("<http://ex.org/t{c}_{k}> <http://ex.org/field> <http://ex.org/f{c}> .\n");
        }
    }
    let f = Fixture {
        graph: dir.join("graph.nt"),
        split: dir.join("split.tsv"),
        leak: dir.join("leak.txt"),
    };
    fs::write(&f.graph, nt).unwrap();
    fs::write(&f.split, split).unwrap();
    fs::write(&f.leak, "<http://ex.org/label>\n").unwrap();
    f
}
