//! Fixtures shared by the kernel benchmarks.

use levyexit_core::experiments::{CampaignConfig, System, SystemSpec};
use levyexit_core::HilbertVector;

/// System built from a named preset.
pub fn preset_system(name: &str) -> System {
    System::build(&SystemSpec::preset(name).expect("known preset")).expect("preset builds")
}

/// Campaign config for a preset with a single noise level.
pub fn single_level_config(name: &str, eps: f64) -> CampaignConfig {
    CampaignConfig::for_preset(name, vec![eps], 100, 1).expect("valid config")
}

/// A state displaced from the system's stable state along the first mode.
pub fn displaced_state(system: &System, shift: f64) -> HilbertVector {
    let mut x = system.phi.clone();
    x.axpy(shift, &HilbertVector::unit_mode(x.modes(), 1));
    x
}
