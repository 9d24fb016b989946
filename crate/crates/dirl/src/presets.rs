//! Shipped environment layouts and specification presets.
//!
//! Layouts: `rooms9`, `rooms16_open`, `rooms16_blocked`, and the single big
//! room `rooms1`. Specifications: `rooms9/phi1` .. `rooms9/phi5`,
//! `rooms9/phi_ex`, and `rooms16/phi1` .. `rooms16/phi5` (usable with either
//! 16-rooms layout). The raw files live under `presets/` in the crate and
//! are embedded here so the binary works from any directory.

use thiserror::Error;

use crate::rooms::{LayoutError, RoomsLayout};

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("unknown preset `{0}` (available: {1})")]
    Unknown(String, String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

pub const LAYOUTS: &[(&str, &str)] = &[
    ("rooms9", include_str!("../presets/layouts/rooms9.layout")),
    ("rooms16_open", include_str!("../presets/layouts/rooms16_open.layout")),
    ("rooms16_blocked", include_str!("../presets/layouts/rooms16_blocked.layout")),
    ("rooms1", include_str!("../presets/layouts/rooms1.layout")),
];

pub const SPECS: &[(&str, &str)] = &[
    ("rooms9/phi1", include_str!("../presets/specs/rooms9/phi1.spec")),
    ("rooms9/phi2", include_str!("../presets/specs/rooms9/phi2.spec")),
    ("rooms9/phi3", include_str!("../presets/specs/rooms9/phi3.spec")),
    ("rooms9/phi4", include_str!("../presets/specs/rooms9/phi4.spec")),
    ("rooms9/phi5", include_str!("../presets/specs/rooms9/phi5.spec")),
    ("rooms9/phi_ex", include_str!("../presets/specs/rooms9/phi_ex.spec")),
    ("rooms16/phi1", include_str!("../presets/specs/rooms16/phi1.spec")),
    ("rooms16/phi2", include_str!("../presets/specs/rooms16/phi2.spec")),
    ("rooms16/phi3", include_str!("../presets/specs/rooms16/phi3.spec")),
    ("rooms16/phi4", include_str!("../presets/specs/rooms16/phi4.spec")),
    ("rooms16/phi5", include_str!("../presets/specs/rooms16/phi5.spec")),
];

fn names(table: &[(&str, &str)]) -> String {
    table.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

/// Looks up and parses a layout preset.
pub fn layout(name: &str) -> Result<RoomsLayout, PresetError> {
    let text = LAYOUTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| PresetError::Unknown(name.into(), names(LAYOUTS)))?;
    Ok(RoomsLayout::parse(text)?)
}

/// Looks up a specification preset's DSL text.
pub fn spec_text(name: &str) -> Result<&'static str, PresetError> {
    SPECS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| PresetError::Unknown(name.into(), names(SPECS)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, VecDeque};

    #[test]
    fn every_layout_parses_and_validates() {
        for (name, _) in LAYOUTS {
            let l = layout(name).unwrap();
            assert!(l.rows >= 1 && l.cols >= 1, "{name}");
        }
    }

    #[test]
    fn every_spec_parses_against_its_layout() {
        for (name, text) in SPECS {
            let env = if name.starts_with("rooms9") { "rooms9" } else { "rooms16_open" };
            let l = layout(env).unwrap();
            crate::spec_lang::parse_spec(text, &l).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn all_rooms_stay_connected_in_every_layout() {
        for (name, _) in LAYOUTS {
            let l = layout(name).unwrap();
            let mut seen = BTreeSet::from([l.init_room]);
            let mut queue = VecDeque::from([l.init_room]);
            while let Some((r, c)) = queue.pop_front() {
                let mut neighbors = Vec::new();
                if r > 0 {
                    neighbors.push((r - 1, c));
                }
                if c > 0 {
                    neighbors.push((r, c - 1));
                }
                if r + 1 < l.rows {
                    neighbors.push((r + 1, c));
                }
                if c + 1 < l.cols {
                    neighbors.push((r, c + 1));
                }
                for n in neighbors {
                    if l.door_open((r, c), n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            assert_eq!(seen.len(), l.rows * l.cols, "layout {name} is disconnected");
        }
    }

    #[test]
    fn unknown_names_are_reported_with_alternatives() {
        let err = layout("atrium").unwrap_err();
        assert!(err.to_string().contains("rooms9"));
        assert!(spec_text("rooms9/phi9").is_err());
    }
}
