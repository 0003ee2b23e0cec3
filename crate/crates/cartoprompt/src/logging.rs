//! JSON-lines logs on stderr. The level comes from `CARTOPROMPT_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`; default `info`).

use tracing::Level;

pub const LOG_ENV: &str = "CARTOPROMPT_LOG";

pub fn level_from(value: Option<&str>) -> Level {
    value
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(Level::INFO)
}

/// Installs the global subscriber once; later calls are no-ops.
pub fn init() {
    let level = level_from(std::env::var(LOG_ENV).ok().as_deref());
    let _ = tracing_subscriber::fmt()
        .json()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_current_span(false)
        .try_init();
}
