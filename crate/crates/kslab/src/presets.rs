//! Configurations shipped with the crate, addressed as `preset:<name>`.

use crate::config::Config;
use crate::error::{HarnessError, Result};
use std::path::Path;

pub const PRESETS: [(&str, &str); 6] = [
    ("s1-smoke", include_str!("../presets/s1-smoke.toml")),
    ("s2-smoke", include_str!("../presets/s2-smoke.toml")),
    ("s3-radial", include_str!("../presets/s3-radial.toml")),
    ("dichotomy-sweep", include_str!("../presets/dichotomy-sweep.toml")),
    ("continuity-ladder", include_str!("../presets/continuity-ladder.toml")),
    ("eps-family", include_str!("../presets/eps-family.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<Config> {
    let text = preset_text(name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        HarnessError::Config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
    })?;
    Config::from_toml(text)
}

/// Loads `preset:<name>` or a TOML file path.
pub fn load_config(source: &str) -> Result<Config> {
    match source.strip_prefix("preset:") {
        Some(name) => preset(name),
        None => Config::load(Path::new(source)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for (name, _) in PRESETS {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(load_config("preset:nope").is_err());
    }
}
