//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Turn a failed check into an `Err` with a message.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

mod e2e;
mod scoping;
mod stats;
mod storage;
mod tables;

use std::process::ExitCode;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

struct Criterion {
    number: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        number: 1,
        name: "entropy normalization reproduces table 4",
        budget: Duration::from_secs(1),
        run: tables::normalization,
    },
    Criterion {
        number: 2,
        name: "None proportion arithmetic",
        budget: Duration::from_secs(1),
        run: tables::none_proportions,
    },
    Criterion {
        number: 3,
        name: "question corpus classification",
        budget: Duration::from_secs(1),
        run: tables::fixture_corpus,
    },
    Criterion { number: 4, name: "statistics properties", budget: Duration::from_secs(30), run: stats::properties },
    Criterion { number: 5, name: "storage properties", budget: Duration::from_secs(60), run: storage::properties },
    Criterion {
        number: 6,
        name: "partition-scoped retrieval",
        budget: Duration::from_secs(5),
        run: scoping::examined_counts,
    },
    Criterion { number: 7, name: "relationship math", budget: Duration::from_secs(5), run: relate::oracle },
    Criterion { number: 8, name: "CLI and HTTP end to end", budget: Duration::from_secs(30), run: e2e::session },
];

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes extra arguments; run everything.
    let mut failed = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {} ({elapsed:.2?}) {detail}", c.number, c.name),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {} ({elapsed:.2?}) {why}", c.number, c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
