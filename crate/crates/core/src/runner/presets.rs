//! Shipped experiment configurations. Each one is a desk-scale version of a
//! published test; the description records how the resolution was reduced.

use crate::error::{Error, Result};
use crate::runner::config::{parse_with_overrides, ExperimentConfig};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig10",
        description: "near-equilibrium data, alpha = 0: lambda sweep for the O(lambda) / O(lambda^2) \
                      error rates (reference mesh 2048 cells, 128 modes, dt 1e-4 reduced to \
                      513 cells, 64 modes, dt = lambda/50)",
        toml: r#"
schema_version = 1

[case]
kind = "near_equilibrium"
delta = 0.1
alpha = 0.0
k_x = 0.3141592653589793
domain = [-10.0, 10.0]

[scheme]
lambda = 0.1
dt = 0.002
t_final = 2.0
order = 2
n_h = 64
n_x = 513

[sweep]
lambdas = [0.32, 0.18, 0.1, 0.056, 0.032]
dt_per_lambda = 50.0
"#,
    },
    Preset {
        name: "fig11",
        description: "near-equilibrium data, alpha = 0.5: lambda sweep for the O(lambda^0.5) / \
                      O(lambda^1.5) error rates (same reduction as fig10)",
        toml: r#"
schema_version = 1

[case]
kind = "near_equilibrium"
delta = 0.1
alpha = 0.5
k_x = 0.3141592653589793
domain = [-10.0, 10.0]

[scheme]
lambda = 0.1
dt = 0.002
t_final = 2.0
order = 2
n_h = 64
n_x = 513

[sweep]
lambdas = [0.32, 0.18, 0.1, 0.056, 0.032]
dt_per_lambda = 50.0
"#,
    },
    Preset {
        name: "fig13",
        description: "near-equilibrium data, alpha = 1, second-order scheme at dt = 0.2 on a coarse \
                      mesh (64 cells made odd: 65): potential energy across lambda, blow-up is \
                      recorded as an outcome",
        toml: r#"
schema_version = 1

[case]
kind = "near_equilibrium"
delta = 0.1
alpha = 1.0
k_x = 0.3141592653589793
domain = [-10.0, 10.0]

[scheme]
lambda = 0.01
dt = 0.2
t_final = 10.0
order = 2
n_h = 64
n_x = 65

[sweep]
lambdas = [1.0, 0.1, 0.01, 0.001, 0.0001]
"#,
    },
    Preset {
        name: "ap",
        description: "asymptotic-preserving check: near-equilibrium data, alpha = 1, first-order \
                      scheme, dt = 0.2, 65 cells, 64 modes, lambda down to 1e-4 with a lambda = 1 \
                      sanity row",
        toml: r#"
schema_version = 1

[case]
kind = "near_equilibrium"
delta = 0.1
alpha = 1.0
k_x = 0.3141592653589793
domain = [-10.0, 10.0]

[scheme]
lambda = 0.01
dt = 0.2
t_final = 10.0
order = 1
n_h = 64
n_x = 65

[sweep]
lambdas = [1.0, 0.01, 0.001, 0.0001]
"#,
    },
    Preset {
        name: "fig20",
        description: "temperature perturbation T(x) = 1 + 0.1 cos(pi x / 10): potential energy over \
                      time (reference 100 cells, 400 modes reduced to 101 cells, 128 modes)",
        toml: r#"
schema_version = 1

[case]
kind = "temperature_perturbation"
delta = 0.1
k_x = 0.3141592653589793
domain = [-10.0, 10.0]

[scheme]
lambda = 0.1
dt = 0.2
t_final = 30.0
order = 2
n_h = 128
n_x = 101

[sweep]
lambdas = [1.0, 0.1, 0.01, 0.001]
"#,
    },
    Preset {
        name: "fig30",
        description: "oscillatory velocity perturbation sin(3 pi v): phase-space snapshots \
                      (reference 1200 modes reduced to 256)",
        toml: r#"
schema_version = 1

[case]
kind = "oscillatory_perturbation"
delta = 0.05
k_x = 0.3141592653589793
domain = [-10.0, 10.0]

[scheme]
lambda = 0.001
dt = 0.1
t_final = 50.0
order = 2
n_h = 256
n_x = 101

[sweep]
lambdas = [1.0, 0.1, 0.01, 0.001]

[output]
snapshot_times = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
v_grid = { min = -6.0, max = 6.0, points = 241 }
"#,
    },
    Preset {
        name: "fig40",
        description: "two-stream instability: electric-field growth and phase-space snapshot \
                      (reference 2048 cells, 2000 modes reduced to 129 cells, 128 modes; lambda = 0.04 \
                      is set explicitly)",
        toml: r#"
schema_version = 1

[case]
kind = "two_stream"
delta = 0.01
k_x = 0.5235987755982988
domain = [-6.0, 6.0]

[scheme]
lambda = 0.04
dt = 0.01
t_final = 10.0
order = 2
n_h = 128
n_x = 129

[sweep]
lambdas = [0.2, 0.1, 0.04]

[output]
snapshot_times = [8.0, 10.0]
v_grid = { min = -6.0, max = 6.0, points = 241 }
"#,
    },
    Preset {
        name: "steady",
        description: "unperturbed Maxwellian: every diagnostic stays at its initial value",
        toml: r#"
schema_version = 1

[case]
kind = "near_equilibrium"
delta = 0.0

[scheme]
lambda = 0.1
dt = 0.1
t_final = 1.0
n_h = 8
n_x = 33
"#,
    },
];

pub fn find_preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        Error::Config(format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })
}

pub fn load_preset(name: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    parse_with_overrides(find_preset(name)?.toml, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::CaseKind;
    use crate::scheme::Order;
    use std::f64::consts::PI;

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            let cfg = load_preset(p.name, &[]).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(cfg.scheme.n_x % 2, 1);
        }
    }

    #[test]
    fn fig10_matches_published_perturbation() {
        let cfg = load_preset("fig10", &[]).unwrap();
        assert_eq!(cfg.case.kind, CaseKind::NearEquilibrium);
        assert_eq!(cfg.case.delta, 0.1);
        assert!((cfg.case.k_x - PI / 10.0).abs() < 1e-15);
        assert_eq!(cfg.case.domain, (-10.0, 10.0));
        assert_eq!(cfg.case.alpha, 0.0);
    }

    #[test]
    fn ap_preset_is_first_order_with_sanity_row() {
        let cfg = load_preset("ap", &[]).unwrap();
        assert_eq!(cfg.scheme.order, Order::First);
        assert_eq!(cfg.scheme.dt, 0.2);
        assert!(cfg.sweep.lambdas.contains(&1.0));
    }

    #[test]
    fn unknown_preset_lists_choices() {
        let err = find_preset("fig99").unwrap_err();
        assert!(err.to_string().contains("fig10"));
    }
}
