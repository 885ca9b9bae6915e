//! Formation scenarios: desired poses, observation graph, controller and
//! sensor settings. Read from and written to JSON.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::graph::{remove_random_edges_keep_connected, ObservationGraph};
use crate::sensor::SensorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub desired: Vec<Pose>,
    pub graph: ObservationGraph,
    pub controller: ControllerConfig,
    pub sensor: SensorSpec,
    /// Initial positions are drawn uniformly in a ball of this radius.
    pub init_radius: f64,
    pub horizon_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub p: [f64; 3],
    #[serde(default)]
    pub psi: f64,
}

/// On-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub agents: Vec<AgentSpec>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default = "default_horizon")]
    pub horizon_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub init_radius: f64,
}

fn default_horizon() -> usize {
    2000
}
fn default_radius() -> f64 {
    20.0
}

impl Scenario {
    pub fn new(desired: Vec<Pose>, graph: ObservationGraph) -> Result<Self> {
        let s = Self {
            desired,
            graph,
            controller: ControllerConfig::default(),
            sensor: SensorSpec::default(),
            init_radius: default_radius(),
            horizon_steps: default_horizon(),
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_agents(&self) -> usize {
        self.desired.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.desired.len() < 2 {
            return Err(Error::Config("a formation needs at least two agents".into()));
        }
        if self.graph.n_agents() != self.desired.len() {
            return Err(Error::Config("graph size does not match the number of agents".into()));
        }
        if self
            .desired
            .iter()
            .any(|q| !(q.p.iter().all(|v| v.is_finite()) && q.psi.is_finite()))
        {
            return Err(Error::Config("desired poses must be finite".into()));
        }
        if !self.graph.is_connected() {
            return Err(Error::Graph("observation graph is disconnected".into()));
        }
        if self.graph.count_passive_sinks() > 1 {
            return Err(Error::Graph("more than one agent observes nobody".into()));
        }
        for (i, j) in self.graph.edges() {
            if self.desired[i].p == self.desired[j].p {
                return Err(Error::Config(format!("agents {i} and {j} share a desired position")));
            }
        }
        self.controller.validate()?;
        self.sensor.validate()?;
        if !(self.init_radius.is_finite() && self.init_radius >= 0.0) {
            return Err(Error::Config("init_radius must be non-negative".into()));
        }
        if self.horizon_steps == 0 {
            return Err(Error::Config("horizon_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            agents: self
                .desired
                .iter()
                .map(|q| AgentSpec {
                    p: [q.p.x, q.p.y, q.p.z],
                    psi: q.psi,
                })
                .collect(),
            edges: self.graph.edges().map(|(i, j)| [i, j]).collect(),
            controller: self.controller,
            sensor: self.sensor,
            horizon_steps: self.horizon_steps,
            seed: self.seed,
            init_radius: self.init_radius,
        }
    }

    pub fn from_file(f: &ScenarioFile) -> Result<Self> {
        let desired = f
            .agents
            .iter()
            .map(|a| Pose::new(Vec3::from(a.p), a.psi))
            .collect::<Vec<_>>();
        let graph = ObservationGraph::new(desired.len(), f.edges.iter().map(|e| (e[0], e[1])))?;
        let s = Self {
            desired,
            graph,
            controller: f.controller,
            sensor: f.sensor,
            init_radius: f.init_radius,
            horizon_steps: f.horizon_steps,
            seed: f.seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(&f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serialises")
    }

    pub fn with_rate(mut self, rate_hz: f64) -> Self {
        self.sensor.rate_hz = rate_hz;
        self
    }

    pub fn with_ell(mut self, ell: f64) -> Self {
        self.controller.ell = ell;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Smallest desired distance over the observed pairs.
    pub fn min_desired_distance(&self) -> f64 {
        self.graph
            .edges()
            .map(|(i, j)| (self.desired[j].p - self.desired[i].p).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

fn mutual_pairs(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect()
}

/// Flat triangle of side 10 m with its edge midpoints: six agents whose
/// closest pairs are 5 m apart.
fn six_agent_triangle() -> Vec<Pose> {
    let h = 5.0 * 3f64.sqrt();
    [
        (0.0, 0.0),
        (10.0, 0.0),
        (5.0, h),
        (5.0, 0.0),
        (7.5, 0.5 * h),
        (2.5, 0.5 * h),
    ]
    .iter()
    .map(|&(x, y)| Pose::from_xyz(x, y, 0.0, 0.0))
    .collect()
}

/// Seed of the edge pruning in the six-agent sparse scenario.
pub const SPARSE_GRAPH_SEED: u64 = 2024;

/// The four reference formations, by name.
pub fn builtin_scenarios() -> Vec<(&'static str, Scenario)> {
    let two = Scenario::new(
        vec![Pose::from_xyz(0.0, 0.0, 0.0, 0.0), Pose::from_xyz(5.0, 0.0, 0.0, 0.0)],
        ObservationGraph::new(2, mutual_pairs(&[(0, 1)])).unwrap(),
    )
    .unwrap();
    let tri = Scenario::new(
        vec![
            Pose::from_xyz(0.0, 0.0, 0.0, 0.0),
            Pose::from_xyz(5.0, 0.0, 0.0, 0.0),
            Pose::from_xyz(2.5, 2.5 * 3f64.sqrt(), 0.0, 0.0),
        ],
        ObservationGraph::complete(3),
    )
    .unwrap();
    let full = Scenario::new(six_agent_triangle(), ObservationGraph::complete(6)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SPARSE_GRAPH_SEED);
    let sparse_graph = remove_random_edges_keep_connected(&ObservationGraph::complete(6), 0.5, &mut rng).unwrap();
    let sparse = Scenario::new(six_agent_triangle(), sparse_graph).unwrap();
    vec![
        ("two_agents", two),
        ("three_agents", tri),
        ("six_agents_full", full),
        ("six_agents_sparse", sparse),
    ]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
}
