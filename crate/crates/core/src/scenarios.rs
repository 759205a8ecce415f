//! Built-in experiment configs for the two worked examples and every graph
//! schedule they are simulated on. The files under `configs/` are TOML
//! renderings of these.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::config::{
    AnalysisSection, BasisSection, CouplingSection, DynamicsSection, ExperimentConfig, GainMode,
    GainSection, OutputSection, Rows, ScheduleKindName, ScheduleSection, SimulationSection,
};
use crate::tolerances::Tolerances;

/// Rotation by π/4: `[[c, s], [-s, c]]`.
pub fn example1_a() -> Rows {
    vec![vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], vec![-FRAC_1_SQRT_2, FRAC_1_SQRT_2]]
}

pub fn example1_b() -> Rows {
    vec![vec![0.0], vec![1.0]]
}

/// Triple Jordan block at 1.
pub fn example2_a() -> Rows {
    vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]]
}

pub fn example2_b() -> Rows {
    vec![vec![-1.0], vec![1.0], vec![-1.0]]
}

/// Four single-edge graphs visiting the ring 1-2, 2-3, 3-4, 4-1.
pub fn ring_palette() -> Vec<Rows> {
    [(0, 1), (1, 2), (2, 3), (3, 0)]
        .iter()
        .map(|&(i, j)| {
            let mut l = vec![vec![0.0; 4]; 4];
            l[i][i] = 1.0;
            l[j][j] = 1.0;
            l[i][j] = -1.0;
            l[j][i] = -1.0;
            l
        })
        .collect()
}

/// Walsh-type orthonormal complement of `1/√N` for four agents.
pub fn walsh_complement() -> Rows {
    [
        [1.0, 1.0, -1.0],
        [-1.0, -1.0, -1.0],
        [-1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
    ]
    .iter()
    .map(|r| r.iter().map(|v| 0.5 * v).collect())
    .collect()
}

fn schedule(kind: ScheduleKindName) -> ScheduleSection {
    ScheduleSection {
        kind,
        palette: ring_palette(),
        dwell: None,
        stride: None,
        seed: None,
        sequence: None,
    }
}

fn example1(name: &str, schedule: ScheduleSection, t_c: usize, t_o: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        dynamics: DynamicsSection {
            a: example1_a(),
            b: example1_b(),
        },
        gain: GainSection {
            mode: GainMode::Stable,
            gamma: None,
            eps_gamma: None,
            max_iter: crate::gain_design::RiccatiOptions::default().max_iter,
            f: None,
        },
        coupling: CouplingSection { mu: 0.5 },
        schedule,
        basis: BasisSection {
            complement: Some(walsh_complement()),
        },
        analysis: AnalysisSection {
            t_c,
            t_o,
            ..AnalysisSection::default()
        },
        simulation: SimulationSection::default(),
        tolerances: Tolerances::default(),
        output: OutputSection::default(),
    }
}

/// Windows grow with the stride so each one holds the same number of active graphs.
fn example2(name: &str, schedule: ScheduleSection, stride: usize) -> ExperimentConfig {
    let mut cfg = example1(name, schedule, 4 * stride, 10 * stride - 1);
    cfg.dynamics = DynamicsSection {
        a: example2_a(),
        b: example2_b(),
    };
    cfg.gain.mode = GainMode::Unstable;
    cfg.gain.gamma = Some(1.1);
    cfg.gain.eps_gamma = Some(1e-5);
    cfg.analysis.t_eps = Some(30 * stride);
    cfg
}

pub fn example1_period4() -> ExperimentConfig {
    example1("example1-period4", schedule(ScheduleKindName::Periodic), 4, 3)
}

pub fn example1_dwell2() -> ExperimentConfig {
    let mut s = schedule(ScheduleKindName::Dwell);
    s.dwell = Some(2);
    example1("example1-dwell2", s, 8, 7)
}

pub fn example1_random() -> ExperimentConfig {
    example1("example1-random", schedule(ScheduleKindName::Random), 16, 15)
}

pub fn example2_period4() -> ExperimentConfig {
    example2("example2-period4", schedule(ScheduleKindName::Periodic), 1)
}

pub fn example2_stride2() -> ExperimentConfig {
    let mut s = schedule(ScheduleKindName::Sparse);
    s.stride = Some(2);
    example2("example2-stride2", s, 2)
}

pub fn example2_stride3() -> ExperimentConfig {
    let mut s = schedule(ScheduleKindName::Sparse);
    s.stride = Some(3);
    example2("example2-stride3", s, 3)
}

/// Which example a scenario belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Example1,
    Example2,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "example1" => Some(Suite::Example1),
            "example2" => Some(Suite::Example2),
            "all" => Some(Suite::All),
            _ => None,
        }
    }

    pub fn includes(&self, example: u8) -> bool {
        match self {
            Suite::Example1 => example == 1,
            Suite::Example2 => example == 2,
            Suite::All => true,
        }
    }
}

/// Every built-in scenario as `(example, config)`, in a fixed order.
pub fn all() -> Vec<(u8, ExperimentConfig)> {
    vec![
        (1, example1_period4()),
        (1, example1_dwell2()),
        (1, example1_random()),
        (2, example2_period4()),
        (2, example2_stride2()),
        (2, example2_stride3()),
    ]
}

pub fn by_name(name: &str) -> Option<ExperimentConfig> {
    all().into_iter().map(|(_, c)| c).find(|c| c.name == name)
}
