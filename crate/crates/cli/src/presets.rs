//! Bundled configurations.

use crate::config::RunConfig;

pub const PRESETS: [(&str, &str); 3] = [
    ("quadratic-well-2d", include_str!("../presets/quadratic-well-2d.json")),
    ("landau", include_str!("../presets/landau.json")),
    ("quadratic-well-4d", include_str!("../presets/quadratic-well-4d.json")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset(name: &str) -> Option<RunConfig> {
    PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| RunConfig::from_json(p.1).expect("bundled presets are valid"))
}
