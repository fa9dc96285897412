//! The ten scenarios, their documented dimension bounds and defaults.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    TopChern,
    GaussBonnet,
    MaslovSpark,
    NicolaescuResidue,
    UnitaryFlows,
    Superconnection,
    MathaiQuillen,
    BlowupModels,
    TransgressionStokes,
    AtomicityVolumes,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 10] = [
        ScenarioId::TopChern,
        ScenarioId::GaussBonnet,
        ScenarioId::MaslovSpark,
        ScenarioId::NicolaescuResidue,
        ScenarioId::UnitaryFlows,
        ScenarioId::Superconnection,
        ScenarioId::MathaiQuillen,
        ScenarioId::BlowupModels,
        ScenarioId::TransgressionStokes,
        ScenarioId::AtomicityVolumes,
    ];

    pub fn as_str(self) -> &'static str {
        info(self).name
    }

    pub fn parse(s: &str) -> Option<ScenarioId> {
        ScenarioId::ALL.into_iter().find(|id| id.as_str() == s)
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A configurable dimension with its inclusive bounds.
#[derive(Debug, Clone, Copy)]
pub struct DimSpec {
    pub key: &'static str,
    pub default: usize,
    pub min: usize,
    pub max: usize,
    pub meaning: &'static str,
}

#[derive(Debug)]
pub struct ScenarioInfo {
    pub id: ScenarioId,
    pub name: &'static str,
    /// Topic of the underlying construction.
    pub anchor: &'static str,
    pub summary: &'static str,
    /// Acceptance criteria exercised by the default configuration.
    pub criteria: &'static [u32],
    pub dims: &'static [DimSpec],
    pub tolerances: &'static [(&'static str, f64)],
    pub t_schedule: &'static [f64],
    pub points: usize,
    pub samples: usize,
}

const fn dim(key: &'static str, default: usize, min: usize, max: usize, meaning: &'static str) -> DimSpec {
    DimSpec { key, default, min, max, meaning }
}

static CATALOG: [ScenarioInfo; 10] = [
    ScenarioInfo {
        id: ScenarioId::TopChern,
        name: "top_chern",
        anchor: "top Chern class scenario",
        summary: "c_n of tau-perp over CP^n, curvature at [0:1], and the flowed section of O(1) over S^2 concentrating on its zero",
        criteria: &[4, 5],
        dims: &[dim("n", 2, 1, 2, "projective dimension of the residue fiber")],
        tolerances: &[("residue_n1", 1e-5), ("residue_n2", 1e-2), ("curvature", 1e-5), ("chern_integral", 5e-2), ("weak", 5e-2)],
        t_schedule: &[1.0, 2.0, 4.0, 6.0],
        points: 48,
        samples: 400_000,
    },
    ScenarioInfo {
        id: ScenarioId::GaussBonnet,
        name: "gauss_bonnet",
        anchor: "Chern-Gauss-Bonnet scenario",
        summary: "sphere-fiber residue 1 + (-1)^n, Euler integral of TS^2 and signed zeros of a gradient field",
        criteria: &[6],
        dims: &[dim("n", 2, 2, 2, "sphere fiber dimension")],
        tolerances: &[("residue", 1e-4), ("euler_integral", 1e-3)],
        t_schedule: &[],
        points: 48,
        samples: 100_000,
    },
    ScenarioInfo {
        id: ScenarioId::MaslovSpark,
        name: "maslov_spark",
        anchor: "Maslov spark equation",
        summary: "quadrature of the Maslov form against signed crossings with the Maslov cycle for random loops in U(2)",
        criteria: &[7],
        dims: &[dim("loops", 5, 1, 8, "number of random loops")],
        tolerances: &[("integer", 1e-6)],
        t_schedule: &[],
        points: 24,
        samples: 100_000,
    },
    ScenarioInfo {
        id: ScenarioId::NicolaescuResidue,
        name: "nicolaescu_residue",
        anchor: "odd Chern residue over the resolution",
        summary:
            "integral of c_{k-1/2} over the resolution of the Maslov stratum, the circle identity and the weighted supertrace identity",
        criteria: &[1, 2, 3],
        dims: &[dim("k", 3, 1, 3, "largest unitary rank of the residue integral")],
        tolerances: &[("residue_k1", 1e-6), ("residue_k2", 1e-3), ("residue_k3", 3e-2), ("circle", 1e-8), ("wstr", 1e-12)],
        t_schedule: &[],
        points: 24,
        samples: 400_000,
    },
    ScenarioInfo {
        id: ScenarioId::UnitaryFlows,
        name: "unitary_flows",
        anchor: "tanh flow on U(E)",
        summary: "semigroup, unitarity and limit classification of the tanh, f_A and Grassmannian flows",
        criteria: &[8],
        dims: &[dim("n", 3, 1, 4, "unitary rank")],
        tolerances: &[("semigroup", 1e-9), ("unitarity", 1e-10), ("limit", 1e-6), ("reflection", 1e-12)],
        t_schedule: &[],
        points: 2,
        samples: 100,
    },
    ScenarioInfo {
        id: ScenarioId::Superconnection,
        name: "superconnection",
        anchor: "superconnection Chern character",
        summary: "odd Chern character of t A over S^1 concentrating at the kernel point of A",
        criteria: &[9],
        dims: &[],
        tolerances: &[("weak", 5e-2), ("mass", 1e-4)],
        t_schedule: &[1.0, 2.0, 4.0, 8.0],
        points: 24,
        samples: 100,
    },
    ScenarioInfo {
        id: ScenarioId::MathaiQuillen,
        name: "mathai_quillen",
        anchor: "Mathai-Quillen form",
        summary: "Gaussian fiber integral of mu_t, closedness on TS^2 and concentration of s* mu_t on the zeros of s",
        criteria: &[10],
        dims: &[],
        tolerances: &[("fiber_integral", 1e-6), ("closed", 1e-5), ("weak", 5e-2)],
        t_schedule: &[1.0, 2.0, 4.0, 8.0],
        points: 32,
        samples: 100,
    },
    ScenarioInfo {
        id: ScenarioId::BlowupModels,
        name: "blowup_models",
        anchor: "blow-up local model",
        summary: "exact identities of psi and Psi, flowline level points against time stepping, continuity of theta_delta",
        criteria: &[11],
        dims: &[dim("k", 2, 1, 3, "unstable dimension"), dim("m", 3, 1, 3, "stable dimension"), dim("p", 1, 0, 3, "critical dimension")],
        tolerances: &[("identity", 1e-13), ("flowline", 1e-10), ("continuity", 1e-6)],
        t_schedule: &[],
        points: 2,
        samples: 10_000,
    },
    ScenarioInfo {
        id: ScenarioId::TransgressionStokes,
        name: "transgression_stokes",
        anchor: "transgression operator",
        summary: "boundary identity of the transgression for the top Chern and Gauss-Bonnet flows",
        criteria: &[12],
        dims: &[],
        tolerances: &[("boundary", 1e-3)],
        t_schedule: &[0.5, 1.0],
        points: 8,
        samples: 100,
    },
    ScenarioInfo {
        id: ScenarioId::AtomicityVolumes,
        name: "atomicity_volumes",
        anchor: "geometric atomicity",
        summary: "flow-tube volume increments beyond T for the tanh and Grassmannian flows, divergence for the radial flow",
        criteria: &[13],
        dims: &[],
        tolerances: &[("increment", 1e-3), ("divergence", 1e-6)],
        t_schedule: &[10.0, 12.0, 14.0],
        points: 16,
        samples: 100,
    },
];

pub fn info(id: ScenarioId) -> &'static ScenarioInfo {
    CATALOG.iter().find(|i| i.id == id).expect("every scenario is catalogued")
}

/// All scenarios in stable order.
pub fn list_scenarios() -> &'static [ScenarioInfo] {
    &CATALOG
}

/// The scenario whose default configuration covers acceptance criterion `n`.
pub fn scenario_for_criterion(n: u32) -> Option<ScenarioId> {
    CATALOG.iter().find(|i| i.criteria.contains(&n)).map(|i| i.id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_complete_and_stable() {
        let names: Vec<&str> = list_scenarios().iter().map(|i| i.name).collect();
        assert_eq!(names.len(), 10);
        for (id, info) in ScenarioId::ALL.iter().zip(list_scenarios()) {
            assert_eq!(*id, info.id);
            assert!(!info.anchor.is_empty());
            assert_eq!(ScenarioId::parse(info.name), Some(*id));
            let json = serde_json::to_string(id).unwrap();
            assert_eq!(json, format!("\"{}\"", info.name));
        }
        assert_eq!(info(ScenarioId::TopChern).anchor, "top Chern class scenario");
    }

    #[test]
    fn every_criterion_has_one_scenario() {
        for n in 1..=13 {
            assert_eq!(list_scenarios().iter().filter(|i| i.criteria.contains(&n)).count(), 1, "criterion {n}");
        }
    }

    #[test]
    fn dimension_bounds_respect_the_global_caps() {
        for i in list_scenarios() {
            for d in i.dims {
                assert!(d.min <= d.default && d.default <= d.max);
            }
        }
    }
}
