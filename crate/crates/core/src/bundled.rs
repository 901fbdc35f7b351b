//! Scenarios shipped with the library.

use crate::scenario::{ScenarioSpec, SpecError};

const SOURCES: [(&str, &str); 11] = [
    ("steady", include_str!("../scenarios/steady.scenario")),
    ("join_tail", include_str!("../scenarios/join_tail.scenario")),
    ("join_middle", include_str!("../scenarios/join_middle.scenario")),
    ("aeb_head", include_str!("../scenarios/aeb_head.scenario")),
    ("aeb_middle", include_str!("../scenarios/aeb_middle.scenario")),
    ("cut_in", include_str!("../scenarios/cut_in.scenario")),
    ("leave_middle", include_str!("../scenarios/leave_middle.scenario")),
    ("leave_tail", include_str!("../scenarios/leave_tail.scenario")),
    ("v2v_fault", include_str!("../scenarios/v2v_fault.scenario")),
    ("radar_fault", include_str!("../scenarios/radar_fault.scenario")),
    ("integrated", include_str!("../scenarios/integrated.scenario")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a bundled scenario. Panics only on an unknown name.
pub fn load(name: &str) -> Result<ScenarioSpec, SpecError> {
    let text = source(name).unwrap_or_else(|| panic!("no bundled scenario named {name}"));
    ScenarioSpec::from_toml(text)
}
