//! Embedded experiment configurations, addressable by name.

const PRESETS: &[(&str, &str)] = &[
    ("fig4_coherent_z", include_str!("../../presets/fig4_coherent_z.json")),
    ("fig5_overrotation", include_str!("../../presets/fig5_overrotation.json")),
    ("fig5_adversarial_plus", include_str!("../../presets/fig5_adversarial_plus.json")),
    ("fig5_adversarial_minus", include_str!("../../presets/fig5_adversarial_minus.json")),
    ("fig7_gauge_coherent_z", include_str!("../../presets/fig7_gauge_coherent_z.json")),
    ("fig7_gauge_overrotation", include_str!("../../presets/fig7_gauge_overrotation.json")),
    ("xrb_coherent_z", include_str!("../../presets/xrb_coherent_z.json")),
    ("sweep_theta1", include_str!("../../presets/sweep_theta1.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::ExperimentConfig;

    #[test]
    fn every_preset_validates() {
        for n in names() {
            let cfg = ExperimentConfig::from_json(get(n).unwrap()).unwrap_or_else(|e| panic!("{n}: {e}"));
            assert_eq!(cfg.name.as_deref(), Some(n));
        }
    }
}
