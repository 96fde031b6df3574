//! Named configurations for the reference experiments.

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    /// Command the preset is written for.
    pub command: &'static str,
    /// What the run should reproduce.
    pub target: &'static str,
    /// Tolerance of the corresponding acceptance check.
    pub tolerance: &'static str,
    pub toml: &'static str,
}

const THRESHOLD_BASE: &str = "
[model]
b2 = 1.7
L = 50.0
";

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1b",
        command: "simulate",
        target: "stationary pattern at L=250, b=0.7: 8 full spikes, alpha0=0.478, alpha16=0.244, gamma16=-0.102",
        tolerance: "spikes +-1, coefficients +-0.02",
        toml: "
[model]
L = 250.0
[perturbation]
kind = \"cosine\"
mode = 16
amplitude = -1e-3
",
    },
    Preset {
        name: "fig2a",
        command: "dispersion",
        target: "most unstable wavenumber k* = 0.213, 0.413, 0.498 for chi = -10, -50, -90",
        tolerance: "k* +-0.01",
        toml: "
[stability]
k_min = 0.0
k_max = 1.5
points = 3001
[sweep]
param = \"chi\"
values = [-10.0, -50.0, -90.0]
",
    },
    Preset {
        name: "fig2b",
        command: "critical-b",
        target: "b_min = 0.6, k = 0.2 at default parameters",
        tolerance: "b_min +-0.05, k +-0.02",
        toml: "",
    },
    Preset {
        name: "fig3a",
        command: "critical-b",
        target: "b_min rises with D1; instability disappears at D1 = 2.6",
        tolerance: "cutoff +-0.2",
        toml: "
[sweep]
param = \"D1\"
start = 1.0
stop = 3.5
step = 0.1
",
    },
    Preset {
        name: "fig3b",
        command: "critical-b",
        target: "b_min rises with chi; instability disappears at chi = -6",
        tolerance: "cutoff +-0.5",
        toml: "
[sweep]
param = \"chi\"
start = -10.0
stop = -3.0
step = 0.25
",
    },
    Preset {
        name: "fig3c",
        command: "critical-b",
        target: "b_min rises with r1; instability disappears at r1 = 0.3",
        tolerance: "cutoff +-0.03",
        toml: "
[sweep]
param = \"r1\"
start = 0.1
stop = 0.4
step = 0.01
",
    },
    Preset {
        name: "fig3d",
        command: "critical-b",
        target: "b_min falls with r2; instability disappears below r2 = 0.04",
        tolerance: "cutoff +-0.01",
        toml: "
[sweep]
param = \"r2\"
start = 0.1
stop = 0.01
step = -0.005
",
    },
    Preset {
        name: "fig4",
        command: "simulate",
        target: "v top-hat of 0.9 on (1,0,0) at b2=1.7, L=50 settles into 2 full spikes",
        tolerance: "exact spike count",
        toml: "
[model]
b2 = 1.7
L = 50.0
[perturbation]
kind = \"finite\"
base = \"extinction-of-v\"
field = \"v\"
amplitude = 0.9
width_fraction = 0.2
placement = \"center\"
",
    },
    Preset {
        name: "fig5a",
        command: "threshold-amplitude",
        target: "threshold amplitude rises with D1; no pattern above D1 = 1.3",
        tolerance: "cutoff +-0.2",
        toml: "
[sweep]
param = \"D1\"
start = 0.5
stop = 1.4
step = 0.1
",
    },
    Preset {
        name: "fig5b",
        command: "threshold-amplitude",
        target: "threshold amplitude falls with |chi|; no pattern above chi = -9",
        tolerance: "cutoff +-1",
        toml: "
[sweep]
param = \"chi\"
values = [-30.0, -20.0, -15.0, -11.0, -10.0, -9.5, -9.0]
",
    },
    Preset {
        name: "fig5c",
        command: "threshold-amplitude",
        target: "threshold amplitude falls with b1; no pattern below b1 = 0.3",
        tolerance: "cutoff +-0.05",
        toml: "
[sweep]
param = \"b1\"
start = 0.3
stop = 0.9
step = 0.1
",
    },
    Preset {
        name: "fig5d",
        command: "threshold-amplitude",
        target: "threshold amplitude rises with b2",
        tolerance: "monotone trend",
        toml: "
[sweep]
param = \"b2\"
start = 1.1
stop = 2.1
step = 0.2
",
    },
    Preset {
        name: "fig5e",
        command: "threshold-amplitude",
        target: "threshold amplitude rises with r1; no pattern above r1 = 0.15",
        tolerance: "cutoff +-0.03",
        toml: "
[sweep]
param = \"r1\"
start = 0.05
stop = 0.16
step = 0.01
",
    },
    Preset {
        name: "fig5f",
        command: "threshold-amplitude",
        target: "no pattern below r2 = 0.1",
        tolerance: "cutoff +-0.02",
        toml: "
[sweep]
param = \"r2\"
values = [0.05, 0.08, 0.1, 0.15, 0.2, 0.3]
",
    },
    Preset {
        name: "fig6a",
        command: "wavelength-scan",
        target: "weak competition: homogeneous for L < 10 with alpha0 = 0.6; Lambda0 = 15, alpha_max = 0.244",
        tolerance: "Lambda0 +-1, alpha +-0.02",
        toml: "
[perturbation]
kind = \"noise\"
seed = 1
amplitude = 1e-3
[scan]
l_start = 1.0
l_stop = 50.0
l_step = 1.0
",
    },
    Preset {
        name: "fig6b",
        command: "wavelength-scan",
        target: "weak-strong competition: alpha_i against L",
        tolerance: "qualitative",
        toml: "
[model]
b2 = 1.7
[perturbation]
kind = \"finite\"
base = \"extinction-of-v\"
field = \"v\"
amplitude = 1.0
width_fraction = 0.4
placement = \"left\"
[scan]
l_start = 1.0
l_stop = 50.0
l_step = 1.0
",
    },
    Preset {
        name: "fig7",
        command: "truncation-study",
        target: "weak competition at L=15: ER(u) = 1.38 at M=1, <= 0.01 at M=3",
        tolerance: "ER(M=1) +-0.1",
        toml: TABLE1,
    },
    Preset {
        name: "fig8",
        command: "param-study",
        target: "half-wavelength and amplitude of the Galerkin pattern against chi",
        tolerance: "qualitative trends",
        toml: "
[sweep]
param = \"chi\"
values = [-30.0, -20.0, -15.0, -10.0, -7.0]
[scan]
l_start = 4.0
l_stop = 40.0
l_step = 0.5
[galerkin]
modes = 4
",
    },
    Preset {
        name: "fig9",
        command: "truncation-study",
        target: "weak-strong competition at L=10: ER(u) = 1.39 at M=1, <= 0.03 at M=4",
        tolerance: "ER(M=1) +-0.1",
        toml: TABLE2,
    },
    Preset {
        name: "table1",
        command: "truncation-study",
        target: "alpha at M=1: (0.1878, 0.3330); M=2: (0.4753, 0.2446, 0.0961); M=3: (0.4702, 0.2532, 0.0849, 0.0241)",
        tolerance: "+-0.005",
        toml: TABLE1,
    },
    Preset {
        name: "table2",
        command: "truncation-study",
        target: "alpha at M=4: (0.3208, -0.4419, 0.2241, -0.0916, 0.0342)",
        tolerance: "+-0.01",
        toml: TABLE2,
    },
];

const TABLE1: &str = "
[model]
L = 15.0
[perturbation]
kind = \"cosine\"
mode = 1
amplitude = -1e-3
[galerkin]
modes = 3
max_modes = 3
seed = \"simulated\"
first_order = \"base-kick\"
";

const TABLE2: &str = "
[model]
b2 = 1.7
L = 10.0
[perturbation]
kind = \"finite\"
base = \"extinction-of-v\"
field = \"v\"
amplitude = 1.0
width_fraction = 0.4
placement = \"left\"
[galerkin]
modes = 4
max_modes = 4
seed = \"simulated\"
first_order = \"base-kick\"
";

pub fn find(name: &str) -> Result<&'static Preset, CliError> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown preset `{name}`; known: {}", known.join(", ")))
    })
}

/// Config text of the preset, with the shared threshold section prepended for
/// threshold presets.
pub fn text(preset: &Preset) -> String {
    if preset.command == "threshold-amplitude" {
        format!("{THRESHOLD_BASE}{}", preset.toml)
    } else {
        preset.toml.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_table, ExperimentConfig};

    #[test]
    fn every_preset_parses_and_validates() {
        for p in PRESETS {
            let layer = parse_table(&text(p), p.name).unwrap();
            ExperimentConfig::layered(&[layer], &[]).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn required_presets_exist() {
        for name in [
            "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig3c", "fig3d", "fig4", "fig5a", "fig5b", "fig5c",
            "fig5d", "fig5e", "fig5f", "fig6a", "fig6b", "fig7", "fig8", "fig9", "table1", "table2",
        ] {
            assert!(find(name).is_ok(), "{name}");
        }
        assert!(matches!(find("fig10"), Err(CliError::Config(_))));
    }

    #[test]
    fn preset_values() {
        let cfg = |n: &str| ExperimentConfig::layered(&[parse_table(&text(find(n).unwrap()), n).unwrap()], &[]).unwrap();
        let f4 = cfg("fig4");
        assert_eq!((f4.model.b1, f4.model.b2, f4.model.length), (0.7, 1.7, 50.0));
        assert_eq!(f4.perturbation.amplitude, 0.9);
        let t1 = cfg("table1");
        assert_eq!((t1.model.b1, t1.model.b2, t1.model.length), (0.7, 0.7, 15.0));
        assert_eq!(t1.galerkin.max_modes, 3);
        assert_eq!(cfg("fig1b").model.length, 250.0);
    }
}
