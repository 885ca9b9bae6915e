//! Rigidity matrices of the relative-pose formation function, the gradient
//! action they induce, and positive-definiteness audits of `M = H Hᵀ`.
//!
//! Edges are stacked in lexicographic order, four rows per edge: the
//! relative position in the observer's body frame, then the relative heading.

use nalgebra::{DMatrix, DVector, Matrix4, Vector3};
use rand::Rng;
use serde::Serialize;

use crate::controller::{proportional_command, ControlCommand, ControllerConfig, NoisyRelativePose, Observation};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{relative_pose, rotz, skew_z, wrap_angle, Mat3, Pose, Vec3};
use crate::graph::{remove_random_edges_keep_connected, ObservationGraph};
use crate::linalg::{is_positive_definite_minors, symmetric_eigen};
use crate::rng::stream_rng;
use crate::scenario::Scenario;

/// Run id of the audit's random formations in the RNG stream layout.
const RUN_AUDIT: u64 = 2;

/// Central-difference step of the Jacobian check.
pub const FD_STEP: f64 = 1e-6;

/// A stacked Jacobian with one 4-row band per edge and one 4-column block
/// (position, heading) per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityMatrix {
    pub matrix: DMatrix<f64>,
    pub edges: Vec<(usize, usize)>,
}

impl RigidityMatrix {
    fn zeros(graph: &ObservationGraph) -> Self {
        let edges: Vec<_> = graph.edges().collect();
        Self {
            matrix: DMatrix::zeros(4 * edges.len(), 4 * graph.n_agents()),
            edges,
        }
    }

    /// The four rows belonging to edge number `e`.
    pub fn band(&self, e: usize) -> DMatrix<f64> {
        self.matrix.rows(4 * e, 4).into_owned()
    }

    fn set3(&mut self, e: usize, agent: usize, block: &Mat3) {
        self.matrix.fixed_view_mut::<3, 3>(4 * e, 4 * agent).copy_from(block);
    }

    fn set_col3(&mut self, e: usize, agent: usize, v: &Vec3) {
        self.matrix.fixed_view_mut::<3, 1>(4 * e, 4 * agent + 3).copy_from(v);
    }

    fn set_heading_row(&mut self, e: usize, i: usize, j: usize) {
        self.matrix[(4 * e + 3, 4 * i + 3)] = -1.0;
        self.matrix[(4 * e + 3, 4 * j + 3)] = 1.0;
    }
}

fn check_sizes(poses: &[Pose], graph: &ObservationGraph) -> Result<()> {
    if poses.len() != graph.n_agents() {
        return Err(Error::Config(format!(
            "{} poses for a graph of {} agents",
            poses.len(),
            graph.n_agents()
        )));
    }
    Ok(())
}

/// Stacked relative poses. Headings are plain differences, not wrapped, so
/// the function is smooth in the poses.
pub fn kappa(poses: &[Pose], graph: &ObservationGraph) -> DVector<f64> {
    let edges: Vec<_> = graph.edges().collect();
    let mut k = DVector::zeros(4 * edges.len());
    for (e, &(i, j)) in edges.iter().enumerate() {
        let p = rotz(poses[i].psi).transpose() * (poses[j].p - poses[i].p);
        k.fixed_rows_mut::<3>(4 * e).copy_from(&p);
        k[4 * e + 3] = poses[j].psi - poses[i].psi;
    }
    k
}

/// Formation error `κ(q_d) − κ(q)` with wrapped heading components.
pub fn error_vector(poses: &[Pose], desired: &[Pose], graph: &ObservationGraph) -> DVector<f64> {
    let mut e = kappa(desired, graph) - kappa(poses, graph);
    for r in (3..e.len()).step_by(4) {
        e[r] = wrap_angle(e[r]);
    }
    e
}

/// `∂κ/∂q` in world coordinates.
pub fn rigidity_world(poses: &[Pose], graph: &ObservationGraph) -> Result<RigidityMatrix> {
    check_sizes(poses, graph)?;
    let mut h = RigidityMatrix::zeros(graph);
    for e in 0..h.edges.len() {
        let (i, j) = h.edges[e];
        let rt = rotz(poses[i].psi).transpose();
        h.set3(e, i, &-rt);
        h.set_col3(e, i, &(skew_z().transpose() * rt * (poses[j].p - poses[i].p)));
        h.set3(e, j, &rt);
        h.set_heading_row(e, i, j);
    }
    Ok(h)
}

/// The world Jacobian with every agent's columns rotated into its own body
/// frame. Depends on relative poses only: the observer's block is `−I`, its
/// heading column `Sᵀ p_ij`, and the observed agent's block `R(ψ_ij)`.
pub fn rigidity_local(poses: &[Pose], graph: &ObservationGraph) -> Result<RigidityMatrix> {
    check_sizes(poses, graph)?;
    let mut h = RigidityMatrix::zeros(graph);
    for e in 0..h.edges.len() {
        let (i, j) = h.edges[e];
        let rel = relative_pose(&poses[i], &poses[j]);
        h.set3(e, i, &-Mat3::identity());
        h.set_col3(e, i, &(skew_z().transpose() * rel.p));
        h.set3(e, j, &rotz(rel.psi));
        h.set_heading_row(e, i, j);
    }
    Ok(h)
}

fn split_commands(q: &DVector<f64>) -> Vec<ControlCommand> {
    (0..q.len() / 4)
        .map(|k| ControlCommand {
            u: q.fixed_rows::<3>(4 * k).into_owned(),
            omega: q[4 * k + 3],
        })
        .collect()
}

/// Body-frame gradient action `k_e Hˡᵀ e_F` of every agent.
pub fn stacked_action(
    poses: &[Pose],
    desired: &[Pose],
    graph: &ObservationGraph,
    k_e: f64,
) -> Result<Vec<ControlCommand>> {
    check_sizes(desired, graph)?;
    let h = rigidity_local(poses, graph)?;
    let q = h.matrix.transpose() * error_vector(poses, desired, graph) * k_e;
    Ok(split_commands(&q))
}

/// Per-agent gradient action written out edge by edge: every observed
/// neighbour contributes through its own measurement, every observer of the
/// agent through the observer's measurement.
pub fn fec_raw_command(
    poses: &[Pose],
    desired: &[Pose],
    graph: &ObservationGraph,
    k_e: f64,
) -> Result<Vec<ControlCommand>> {
    check_sizes(poses, graph)?;
    check_sizes(desired, graph)?;
    let mut out = vec![ControlCommand::default(); poses.len()];
    for (i, j) in graph.edges() {
        let r = relative_pose(&poses[i], &poses[j]);
        let d = relative_pose(&desired[i], &desired[j]);
        let dp = r.p - d.p;
        let dpsi = wrap_angle(r.psi - d.psi);
        // Agent i observes j.
        out[i].u += dp;
        out[i].omega += -r.p.dot(&(skew_z() * dp)) + dpsi;
        // Agent j is observed by i.
        out[j].u -= rotz(r.psi).transpose() * dp;
        out[j].omega -= dpsi;
    }
    for c in &mut out {
        c.u *= k_e;
        c.omega *= k_e;
    }
    Ok(out)
}

/// The proportional controller fed with exact measurements.
pub fn proportional_clean_command(
    poses: &[Pose],
    desired: &[Pose],
    graph: &ObservationGraph,
    k_e: f64,
) -> Vec<ControlCommand> {
    let cfg = ControllerConfig {
        k_e,
        ..ControllerConfig::default()
    };
    (0..poses.len())
        .map(|i| {
            let obs: Vec<Observation> = graph
                .out_neighbors(i)
                .map(|j| Observation {
                    measured: NoisyRelativePose::exact(&relative_pose(&poses[i], &poses[j])),
                    desired: relative_pose(&desired[i], &desired[j]),
                })
                .collect();
            proportional_command(&obs, &cfg)
        })
        .collect()
}

/// `∂κ/∂q` by central differences.
pub fn rigidity_finite_difference(poses: &[Pose], graph: &ObservationGraph, eps: f64) -> DMatrix<f64> {
    let n = poses.len();
    let rows = 4 * graph.n_edges();
    let mut h = DMatrix::zeros(rows, 4 * n);
    for k in 0..n {
        for c in 0..4 {
            let shifted = |s: f64| {
                let mut q = poses.to_vec();
                if c < 3 {
                    q[k].p[c] += s;
                } else {
                    q[k].psi += s;
                }
                kappa(&q, graph)
            };
            let col = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            h.set_column(4 * k + c, &col);
        }
    }
    h
}

/// Frobenius-relative difference between the analytic and the
/// finite-difference Jacobian.
pub fn jacobian_relative_error(poses: &[Pose], graph: &ObservationGraph) -> Result<f64> {
    let h = rigidity_world(poses, graph)?.matrix;
    let fd = rigidity_finite_difference(poses, graph, FD_STEP);
    Ok((&h - fd).norm() / h.norm().max(f64::MIN_POSITIVE))
}

pub fn m_matrix(poses: &[Pose], graph: &ObservationGraph) -> Result<DMatrix<f64>> {
    let h = rigidity_world(poses, graph)?.matrix;
    Ok(&h * h.transpose())
}

/// The two-agent `M` as displayed for the single edge (1, 2) with agent 1
/// at zero heading, in terms of the world offset `p`. It equals
/// [`m_matrix`] when `p = p₁ − p₂`; with `p = p₂ − p₁` the off-diagonal
/// entries of the heading row and column change sign.
pub fn two_agent_m_display(p: &Vec3) -> Matrix4<f64> {
    let (x, y) = (p.x, p.y);
    #[rustfmt::skip]
    let m = Matrix4::new(
        2.0 + y * y, -y * x, 0.0, y,
        -y * x, 2.0 + x * x, 0.0, -x,
        0.0, 0.0, 2.0, 0.0,
        y, -x, 0.0, 2.0,
    );
    m
}

/// Closed-form leading principal minors of the single-edge `M`, with `p`
/// the observed offset in the observer's body frame.
pub fn two_agent_minors(p: &Vec3) -> [f64; 4] {
    let h2 = p.x * p.x + p.y * p.y;
    let m2 = 4.0 + 2.0 * h2;
    [2.0 + p.y * p.y, m2, 2.0 * m2, 16.0 + 4.0 * h2]
}

/// How two edges meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePairing {
    Disjoint,
    Same,
    /// Both leave the shared agent.
    OutOut,
    /// Both enter the shared agent.
    InIn,
    /// The first enters the agent the second leaves.
    InOut,
    /// The first leaves the agent the second enters.
    OutIn,
    /// The same pair of agents in opposite directions.
    Opposite,
}

pub fn edge_pairing(a: (usize, usize), b: (usize, usize)) -> EdgePairing {
    let ((i, j), (k, l)) = (a, b);
    if a == b {
        EdgePairing::Same
    } else if i == l && j == k {
        EdgePairing::Opposite
    } else if i == k {
        EdgePairing::OutOut
    } else if j == l {
        EdgePairing::InIn
    } else if j == k {
        EdgePairing::InOut
    } else if i == l {
        EdgePairing::OutIn
    } else {
        EdgePairing::Disjoint
    }
}

/// `w = Sᵀ R(ψ_i)ᵀ (p_j − p_i)`, the heading column of edge (i, j).
fn heading_column(poses: &[Pose], (i, j): (usize, usize)) -> Vec3 {
    skew_z().transpose() * rotz(poses[i].psi).transpose() * (poses[j].p - poses[i].p)
}

fn block(tl: Mat3, tr: Vec3, bl: Vec3, br: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&tl);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&tr);
    m.fixed_view_mut::<1, 3>(3, 0).copy_from(&bl.transpose());
    m[(3, 3)] = br;
    m
}

/// The block `E_a E_bᵀ` of `M` for edges `a` and `b`, built from the case
/// formulas rather than from the bands.
pub fn e_ab_block(a: (usize, usize), b: (usize, usize), poses: &[Pose]) -> Matrix4<f64> {
    let r = |k: usize| rotz(poses[k].psi);
    let wa = heading_column(poses, a);
    let wb = heading_column(poses, b);
    let z = Vector3::zeros();
    match edge_pairing(a, b) {
        EdgePairing::Disjoint => Matrix4::zeros(),
        EdgePairing::Same => block(Mat3::identity() * 2.0 + wa * wa.transpose(), -wa, -wa, 2.0),
        EdgePairing::OutOut => block(Mat3::identity() + wa * wb.transpose(), -wa, -wb, 1.0),
        EdgePairing::InIn => block(r(a.0).transpose() * r(b.0), z, z, 1.0),
        EdgePairing::InOut => block(-r(a.0).transpose() * r(a.1), z, wb, -1.0),
        EdgePairing::OutIn => block(-r(b.1).transpose() * r(b.0), wa, z, -1.0),
        EdgePairing::Opposite => block(-r(a.0).transpose() * r(a.1) * 2.0, wa, wb, -2.0),
    }
}

/// `M` assembled block by block from [`e_ab_block`].
pub fn m_blockwise(poses: &[Pose], graph: &ObservationGraph) -> Result<DMatrix<f64>> {
    check_sizes(poses, graph)?;
    let edges: Vec<_> = graph.edges().collect();
    let mut m = DMatrix::zeros(4 * edges.len(), 4 * edges.len());
    for (ea, &a) in edges.iter().enumerate() {
        for (eb, &b) in edges.iter().enumerate() {
            m.fixed_view_mut::<4, 4>(4 * ea, 4 * eb)
                .copy_from(&e_ab_block(a, b, poses));
        }
    }
    Ok(m)
}

/// `V̇` for `V = e_Fᵀ e_F` under the gradient flow: `−2 k_e e_Fᵀ M e_F`.
pub fn lyapunov_rate(poses: &[Pose], graph: &ObservationGraph, e_f: &DVector<f64>, k_e: f64) -> Result<f64> {
    let m = m_matrix(poses, graph)?;
    if e_f.len() != m.nrows() {
        return Err(Error::Config("error vector length does not match the graph".into()));
    }
    Ok(-2.0 * k_e * e_f.dot(&(m * e_f)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdAudit {
    pub minors: Vec<f64>,
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
}

pub fn pd_audit(m: &DMatrix<f64>) -> Result<PdAudit> {
    let (positive_definite, minors) = is_positive_definite_minors(m)?;
    let min_eigenvalue = symmetric_eigen(m)?.values[0];
    Ok(PdAudit {
        minors,
        positive_definite,
        min_eigenvalue,
    })
}

/// Uniform random poses: positions in a cube of half-width `extent`,
/// headings on (−π, π).
pub fn random_poses<R: Rng + ?Sized>(n: usize, extent: f64, rng: &mut R) -> Vec<Pose> {
    (0..n)
        .map(|_| {
            let p = Vec3::from_fn(|_, _| rng.random_range(-extent..extent));
            Pose::new(p, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        })
        .collect()
}

/// A random connected directed graph: the complete graph with a random
/// fraction of its edges removed, never disconnecting it.
pub fn random_connected_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ObservationGraph> {
    let fraction = rng.random_range(0.0..0.8);
    remove_random_edges_keep_connected(&ObservationGraph::complete(n), fraction, rng)
}

fn max_command_gap(a: &[ControlCommand], b: &[ControlCommand]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.u - y.u).amax().max((x.omega - y.omega).abs()))
        .fold(0.0, f64::max)
}

/// Checks on one random state of a scenario's formation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleAudit {
    /// Largest gap between the stacked action and the per-edge form.
    pub stacked_vs_raw: f64,
    /// Same against the proportional controller; only meaningful on graphs
    /// where every edge is observed both ways.
    pub raw_vs_proportional: Option<f64>,
    pub jacobian_rel_error: f64,
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub n_agents: usize,
    pub n_edges: usize,
    pub mutual: bool,
    /// `M` at the desired formation.
    pub at_desired: PdAudit,
    pub samples: usize,
    pub max_stacked_vs_raw: f64,
    pub max_raw_vs_proportional: Option<f64>,
    pub max_jacobian_rel_error: f64,
    /// Fraction of sampled states whose `M` has all leading minors positive.
    pub pd_fraction: f64,
    pub sample_details: Vec<SampleAudit>,
}

fn is_mutual(graph: &ObservationGraph) -> bool {
    graph.edges().all(|(i, j)| graph.has_edge(j, i))
}

/// Audits a scenario at its desired formation and at `samples` random
/// states drawn around it.
pub fn audit_scenario(scenario: &Scenario, samples: usize, exec: Execution) -> Result<AuditReport> {
    let g = &scenario.graph;
    let mutual = is_mutual(g);
    let k_e = scenario.controller.k_e;
    let at_desired = pd_audit(&m_matrix(&scenario.desired, g)?)?;
    let details: Vec<SampleAudit> = map_indexed(samples, exec, |s| {
        let mut rng = stream_rng(scenario.seed, RUN_AUDIT, s as u64);
        let poses = random_poses(scenario.n_agents(), scenario.init_radius.max(1.0), &mut rng);
        let stacked = stacked_action(&poses, &scenario.desired, g, k_e)?;
        let raw = fec_raw_command(&poses, &scenario.desired, g, k_e)?;
        let raw_vs_proportional =
            mutual.then(|| max_command_gap(&raw, &proportional_clean_command(&poses, &scenario.desired, g, k_e)));
        let pd = pd_audit(&m_matrix(&poses, g)?)?;
        Ok(SampleAudit {
            stacked_vs_raw: max_command_gap(&stacked, &raw),
            raw_vs_proportional,
            jacobian_rel_error: jacobian_relative_error(&poses, g)?,
            positive_definite: pd.positive_definite,
            min_eigenvalue: pd.min_eigenvalue,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let max_of = |f: &dyn Fn(&SampleAudit) -> f64| details.iter().map(f).fold(0.0, f64::max);
    Ok(AuditReport {
        n_agents: scenario.n_agents(),
        n_edges: g.n_edges(),
        mutual,
        at_desired,
        samples,
        max_stacked_vs_raw: max_of(&|d| d.stacked_vs_raw),
        max_raw_vs_proportional: mutual.then(|| max_of(&|d| d.raw_vs_proportional.unwrap_or(0.0))),
        max_jacobian_rel_error: max_of(&|d| d.jacobian_rel_error),
        pd_fraction: details.iter().filter(|d| d.positive_definite).count() as f64 / samples.max(1) as f64,
        sample_details: details,
    })
}
