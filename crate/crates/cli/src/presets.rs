//! Bundled parameter sets. The first `#` line of each file describes it.

use crate::config::{parse_config, Scenario, ScenarioConfig};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            text: include_str!(concat!("../presets/", $name, ".json")),
        }
    };
}

pub const ALL: &[Preset] = &[
    preset!("fig3-s1"),
    preset!("fig3-s1-obe"),
    preset!("fig3-multi"),
    preset!("fig4a"),
    preset!("fig5a"),
    preset!("fig5b"),
    preset!("thermometry-pgc"),
    preset!("invert-pgc"),
    preset!("fit-fano-s1"),
    preset!("fit-exp-fig5b"),
    preset!("presets"),
];

impl Preset {
    pub fn description(&self) -> &'static str {
        self.text
            .lines()
            .find_map(|l| l.trim_start().strip_prefix('#'))
            .map(str::trim)
            .unwrap_or("")
    }

    pub fn config(&self) -> ScenarioConfig {
        parse_config(self.text).expect("bundled presets parse")
    }

    pub fn scenario(&self) -> Scenario {
        self.config().scenario
    }
}

pub fn find(name: &str) -> Option<&'static Preset> {
    ALL.iter().find(|p| p.name == name)
}
