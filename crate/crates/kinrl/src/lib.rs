//! Command-line companion to `kinrl-core`: config files, parameter sweeps,
//! CSV/JSON/SVG output and run manifests.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod settings;

pub use commands::{RunError, IDENTITY_TOLERANCE};
pub use config::{load, ConfigError, Loaded, Settings};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "KINRL_OUT_DIR";

/// Long options the argument parser owns; any other `--key=value` is a config override.
const OWN_LONGS: [&str; 4] = ["out", "help", "version", "config"];

/// Separates config overrides (`--key=value`) from the arguments meant for the
/// argument parser. Everything after a bare `--` is passed through unchanged.
pub fn split_overrides<I: IntoIterator<Item = String>>(args: I) -> (Vec<String>, Vec<String>) {
    let mut passthrough = Vec::new();
    let mut overrides = Vec::new();
    let mut literal = false;
    for arg in args {
        if literal {
            passthrough.push(arg);
            continue;
        }
        if arg == "--" {
            literal = true;
            passthrough.push(arg);
            continue;
        }
        let is_override = arg
            .strip_prefix("--")
            .and_then(|rest| rest.split_once('='))
            .is_some_and(|(key, _)| !key.is_empty() && !OWN_LONGS.contains(&key));
        if is_override {
            overrides.push(arg);
        } else {
            passthrough.push(arg);
        }
    }
    (passthrough, overrides)
}
