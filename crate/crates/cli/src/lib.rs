//! Command-line front end: subcommands, reproduction scenarios and report
//! emission for the `modspace` binary.

pub mod commands;
pub mod plot;
pub mod scenarios;

/// Sizes the global thread pool from `MODSPACE_THREADS` when set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("MODSPACE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("MODSPACE_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err("MODSPACE_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
