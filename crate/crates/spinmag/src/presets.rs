//! Built-in configurations, embedded at compile time.

use crate::config::RunConfig;
use crate::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig1-desk", include_str!("../presets/fig1-desk.toml")),
    ("fig2-desk", include_str!("../presets/fig2-desk.toml")),
];

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(k, _)| *k == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(k, _)| *k).collect();
            Error::UnknownPreset(name.to_string(), known.join(", "))
        })
}

pub fn preset(name: &str) -> Result<RunConfig> {
    RunConfig::from_toml(preset_text(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_hit_their_ratios() {
        for (name, ratio) in [("fig1", 0.1), ("fig2", 10.0), ("fig1-desk", 0.1), ("fig2-desk", 10.0)] {
            let e = preset(name).unwrap().to_experiment().unwrap();
            assert!((e.measurement_ratio().unwrap() - ratio).abs() < 1e-12 * ratio, "{name}");
            assert!((e.larmor_hz() - 699.812).abs() < 1e-3);
            assert!((e.total_time - 0.1).abs() < 1e-15);
        }
        assert_eq!(preset("fig1").unwrap().atoms.n, 10_000);
        assert_eq!(preset("fig2-desk").unwrap().atoms.n, 10);
    }

    #[test]
    fn desk_variants_share_the_probe() {
        for name in ["fig1", "fig2"] {
            let full = preset(name).unwrap();
            let desk = preset(&format!("{name}-desk")).unwrap();
            assert_eq!(full.probe, desk.probe);
            assert_eq!(full.field, desk.field);
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("fig3"), Err(Error::UnknownPreset(..))));
    }
}
