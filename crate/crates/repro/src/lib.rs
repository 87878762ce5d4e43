//! Bookkeeping for the acceptance run: each criterion is a closure that
//! returns a verdict, panics are caught and reported as failures, and the
//! run prints one line per criterion followed by a summary.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Collects findings inside one criterion. Every failed check is kept; the
/// notes are informational.
#[derive(Debug, Default)]
pub struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    pub fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    pub fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    pub fn verdict(self) -> Verdict {
        if self.failures.is_empty() {
            Verdict::new(true, self.notes.join("; "))
        } else if self.notes.is_empty() {
            Verdict::new(false, self.failures.join("; "))
        } else {
            Verdict::new(
                false,
                format!(
                    "{} | passed: {}",
                    self.failures.join("; "),
                    self.notes.join("; ")
                ),
            )
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub number: usize,
    pub title: &'static str,
    pub verdict: Verdict,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}: {} ({:.1} s) {}",
            self.number,
            self.title,
            if self.verdict.pass { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.verdict.detail
        )
    }
}

/// Runs `f`, timing it and turning a panic into a failed verdict. The
/// line is printed as soon as the criterion finishes.
pub fn run_criterion(number: usize, title: &'static str, f: impl FnOnce() -> Verdict) -> Outcome {
    let start = Instant::now();
    let verdict = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Verdict::new(false, format!("panicked: {msg}"))
        }
    };
    let out = Outcome {
        number,
        title,
        verdict,
        elapsed: start.elapsed(),
    };
    println!("{}", out.line());
    out
}

/// Summary line; `true` when every criterion passed.
pub fn summarize(outcomes: &[Outcome]) -> bool {
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.verdict.pass)
        .map(|o| o.number.to_string())
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", outcomes.len());
        true
    } else {
        println!(
            "acceptance: {} of {} criteria failed ({})",
            failed.len(),
            outcomes.len(),
            failed.join(", ")
        );
        false
    }
}
