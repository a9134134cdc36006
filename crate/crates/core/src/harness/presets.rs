//! Scenario files shipped with the binary.

use super::config::{parse_config, ConfigError, Scenario};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig3",
        description: "2x2, L=L'=2, i.i.d. interferer, SIR 3 dB",
        text: include_str!("../../presets/fig3.conf"),
    },
    Preset {
        name: "fig4",
        description: "2x2, L=L'=2, i.i.d. interferer, SIR 5 dB",
        text: include_str!("../../presets/fig4.conf"),
    },
    Preset {
        name: "fig5",
        description: "4x2, L=L'=2, i.i.d. interferer, SIR 5 dB",
        text: include_str!("../../presets/fig5.conf"),
    },
    Preset {
        name: "fig5-rank",
        description: "2x2, L=2, single-antenna flat interferer (rank 1), SIR 3 dB",
        text: include_str!("../../presets/fig5-rank.conf"),
    },
    Preset {
        name: "fig6-s1",
        description: "4x4, L=2, four-antenna interferer with L'=2, SIR 1 dB",
        text: include_str!("../../presets/fig6-s1.conf"),
    },
    Preset {
        name: "fig6-s2",
        description: "4x4, L=2, two-antenna flat interferer of rank 2, SIR 1 dB",
        text: include_str!("../../presets/fig6-s2.conf"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load(name: &str) -> Option<Result<Scenario, ConfigError>> {
    find(name).map(|p| parse_config(p.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let s = parse_config(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(s.rounds, 3);
            assert_eq!(s.turbo_iters, 5);
            assert!(s.cci.is_some());
            assert_eq!(s.ebn0_db.len() % 2, 1);
        }
        assert!(find("fig7").is_none());
    }

    #[test]
    fn preset_parameters() {
        let s = load("fig6-s2").unwrap().unwrap();
        assert_eq!((s.n_tx, s.n_rx), (4, 4));
        let c = s.cci.unwrap();
        assert_eq!((c.n_tx, c.rank, c.tap_powers.len()), (2, None, 1));
        let s = load("fig5-rank").unwrap().unwrap();
        assert_eq!(s.cci.unwrap().n_tx, 1);
    }
}
