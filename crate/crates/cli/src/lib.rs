//! Scenario runner for the quantum Brownian motion toolkit.

pub mod compare;
pub mod config;
pub mod run;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use config::Scenario;
use run::{run_scenario, RunError, RunOutput, RunStatus};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_TRUNCATION: u8 = 2;

/// Run every scenario with at most `jobs` running at once. Results come back
/// in scenario order.
pub fn run_all(scenarios: &[Scenario], out_dir: &Path, jobs: usize) -> Vec<Result<RunOutput, RunError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunOutput, RunError>>>> =
        Mutex::new((0..scenarios.len()).map(|_| None).collect());
    let workers = jobs.clamp(1, scenarios.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(s) = scenarios.get(k) else { break };
                let result = run_scenario(s, out_dir);
                slots.lock().expect("no worker panics while holding the lock")[k] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

/// 1 if anything failed, else 2 if any run hit the truncation guard, else 0.
pub fn exit_status(results: &[Result<RunOutput, RunError>]) -> u8 {
    if results.iter().any(|r| r.is_err()) {
        EXIT_ERROR
    } else if results
        .iter()
        .any(|r| matches!(r, Ok(o) if o.summary.status == RunStatus::TruncationOverflow))
    {
        EXIT_TRUNCATION
    } else {
        EXIT_OK
    }
}
