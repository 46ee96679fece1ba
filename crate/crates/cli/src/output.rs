use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gmmkl::certificates::{Certificate, Verdict};
use gmmkl::numeric::fmt17;
use gmmkl::Result;
use serde_json::Value;

/// What a command expects of a certificate it emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    /// `holds` or `diverges`.
    Success,
    /// A counterexample check that must come out `fails`.
    Failure,
}

impl Expect {
    fn met(self, c: &Certificate) -> bool {
        match self {
            Expect::Success => c.succeeded(),
            Expect::Failure => !c.succeeded(),
        }
    }
}

/// The output directory of one run, collecting emitted certificates.
pub struct Output {
    dir: PathBuf,
    emitted: Vec<(String, Certificate, Expect)>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            emitted: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        Ok(())
    }

    /// Echoes the full configuration. `timestamp_unix` is the only field
    /// that differs between reruns.
    pub fn manifest(&self, command: &str, config: Value, workers: usize, seed: u64) -> Result<()> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = serde_json::json!({
            "timestamp_unix": stamp,
            "command": command,
            "seed": seed,
            "workers": workers,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
        });
        self.write("manifest.json", &gmmkl::json::to_string(&doc))
    }

    pub fn certificate(&mut self, name: &str, cert: Certificate, expect: Expect) -> Result<()> {
        debug_assert!(cert.audit().is_empty(), "{:?}", cert.audit());
        self.write(name, &cert.to_json())?;
        let verdict = match &cert.verdict {
            Verdict::Holds => "holds",
            Verdict::Fails { .. } => "fails",
            Verdict::Diverges { .. } => "diverges",
        };
        let mark = if expect.met(&cert) { "ok" } else { "FAIL" };
        println!("{name}: {} -> {verdict} [{mark}]", cert.subject);
        self.emitted.push((name.to_string(), cert, expect));
        Ok(())
    }

    /// Exit status: 0 when every certificate met its expectation, else 1
    /// after printing the first one that did not.
    pub fn finish(self) -> i32 {
        match self.emitted.iter().find(|(_, c, e)| !e.met(c)) {
            None => 0,
            Some((name, cert, _)) => {
                eprintln!("certificate {name} did not meet its expectation:");
                eprint!("{}", cert.summary());
                1
            }
        }
    }
}

pub fn csv_row(cells: &[f64]) -> String {
    let mut s = cells.iter().map(|&v| fmt17(v)).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}
