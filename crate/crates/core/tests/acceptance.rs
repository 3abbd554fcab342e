//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

use std::io::Write;
use std::process::ExitCode;

use rasim_core::validation::run_all;

fn main() -> ExitCode {
    // A filter argument restricts the run to criteria whose name contains it,
    // mirroring the libtest convention.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut out = std::io::stdout();
    let results = match &filter {
        Some(f) => rasim_core::validation::CRITERIA
            .iter()
            .filter(|(_, name)| name.contains(f.as_str()))
            .filter_map(|(id, _)| rasim_core::validation::run_criterion(*id))
            .inspect(|r| {
                let _ = writeln!(out, "{r}");
            })
            .collect::<Vec<_>>(),
        None => run_all(|r| {
            let _ = writeln!(out, "{r}");
        }),
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
