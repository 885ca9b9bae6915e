//! Discrete-time simulation of a formation under noisy relative
//! measurements, with per-run convergence metrics and parameter sweeps.

use rand::Rng;
use serde::Serialize;

use crate::controller::{compute_command, ControlCommand, NoisyRelativePose, Observation};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::geometry::{relative_pose, rotz, wrap_angle, Pose, Vec3};
use crate::graph::ObservationGraph;
use crate::oned::convergence_metrics_1d;
use crate::rng::{stream_rng, StreamRng};
use crate::scenario::Scenario;
use crate::sensor::sample_measurement;

const RUN_INIT: u64 = 0;
const RUN_SENSE: u64 = 1;

/// A run counts as converged only if its final positional spread is below
/// this fraction of the smallest desired distance.
pub const CONVERGED_SPREAD_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormationError {
    /// Norm of the stacked per-edge errors (position and wrapped heading).
    pub e_f: f64,
    /// Per-agent mean position error over observed neighbours, averaged
    /// over observing agents.
    pub e_p: f64,
    /// Same for the absolute heading error.
    pub e_psi: f64,
    /// Norm of the stacked position errors alone.
    pub pos_norm: f64,
    /// Norm of the stacked heading errors alone.
    pub head_norm: f64,
}

pub fn formation_error(poses: &[Pose], desired: &[Pose], graph: &ObservationGraph) -> FormationError {
    let n = poses.len();
    let mut pos2 = 0.0;
    let mut head2 = 0.0;
    let mut per_p = vec![(0.0, 0usize); n];
    let mut per_h = vec![0.0; n];
    for (i, j) in graph.edges() {
        let r = relative_pose(&poses[i], &poses[j]);
        let d = relative_pose(&desired[i], &desired[j]);
        let ep = (r.p - d.p).norm();
        let eh = wrap_angle(r.psi - d.psi);
        pos2 += ep * ep;
        head2 += eh * eh;
        per_p[i].0 += ep;
        per_p[i].1 += 1;
        per_h[i] += eh.abs();
    }
    let observers: Vec<usize> = (0..n).filter(|&i| per_p[i].1 > 0).collect();
    let m = observers.len().max(1) as f64;
    FormationError {
        e_f: (pos2 + head2).sqrt(),
        e_p: observers.iter().map(|&i| per_p[i].0 / per_p[i].1 as f64).sum::<f64>() / m,
        e_psi: observers.iter().map(|&i| per_h[i] / per_p[i].1 as f64).sum::<f64>() / m,
        pos_norm: pos2.sqrt(),
        head_norm: head2.sqrt(),
    }
}

/// Uniform positions in a ball of radius `scenario.init_radius` and uniform
/// headings, drawn from the scenario seed only.
pub fn initial_poses(scenario: &Scenario) -> Vec<Pose> {
    let mut rng = stream_rng(scenario.seed, RUN_INIT, 0);
    let r = scenario.init_radius;
    (0..scenario.n_agents())
        .map(|_| {
            let p = loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm_squared() <= 1.0 {
                    break v * r;
                }
            };
            let psi = wrap_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            Pose::new(p, psi)
        })
        .collect()
}

/// Per-agent noise streams of a run.
pub fn sensor_streams(scenario: &Scenario) -> Vec<StreamRng> {
    (0..scenario.n_agents())
        .map(|i| stream_rng(scenario.seed, RUN_SENSE, i as u64))
        .collect()
}

/// Commands of every agent from fresh measurements of its out-neighbours.
pub fn commands(poses: &[Pose], scenario: &Scenario, rngs: &mut [StreamRng]) -> Result<Vec<ControlCommand>> {
    let mut out = Vec::with_capacity(poses.len());
    let mut obs = Vec::new();
    for (i, rng) in rngs.iter_mut().enumerate() {
        obs.clear();
        for j in scenario.graph.out_neighbors(i) {
            let truth = relative_pose(&poses[i], &poses[j]);
            let measured: NoisyRelativePose = sample_measurement(&truth.p, truth.psi, &scenario.sensor, rng)?;
            obs.push(Observation {
                measured,
                desired: relative_pose(&scenario.desired[i], &scenario.desired[j]),
            });
        }
        out.push(compute_command(&obs, &scenario.controller, scenario.sensor.rate_hz)?);
    }
    Ok(out)
}

/// Moves every agent for one control period: straight-line motion at the
/// world velocity of the command, constant yaw rate.
pub fn integrate(poses: &[Pose], cmds: &[ControlCommand], rate_hz: f64) -> Vec<Pose> {
    poses
        .iter()
        .zip(cmds)
        .map(|(q, c)| Pose::new(q.p + rotz(q.psi) * c.u / rate_hz, wrap_angle(q.psi + c.omega / rate_hz)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time_s: f64,
    pub error: FormationError,
    pub poses: Vec<[f64; 4]>,
    /// Command applied from this state; zero on the final state.
    pub commands: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub rate_hz: f64,
    pub ell: f64,
    pub seed: u64,
    pub t_cp: f64,
    pub t_cpsi: f64,
    pub sigma_tp: f64,
    pub sigma_tpsi: f64,
    /// Mean change of world-frame velocity between consecutive periods (m/s).
    pub mean_dv: f64,
    /// Mean change of yaw rate between consecutive periods (rad/s).
    pub mean_domega: f64,
    /// `mean_dv` per period, as an acceleration (m/s²).
    pub a_p: f64,
    /// Mean absolute yaw rate (rad/s).
    pub v_psi: f64,
    pub fiedler: f64,
    pub converged: bool,
    /// Final formation error norm.
    pub final_e_f: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub errors: Vec<FormationError>,
    /// Full per-step states, when requested.
    pub steps: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Runs a scenario from its seeded initial poses.
pub fn simulate(scenario: &Scenario, record_steps: bool) -> Result<RunRecord> {
    simulate_from(scenario, &initial_poses(scenario), record_steps)
}

/// Runs a scenario from the given initial poses.
pub fn simulate_from(scenario: &Scenario, initial: &[Pose], record_steps: bool) -> Result<RunRecord> {
    scenario.validate()?;
    if initial.len() != scenario.n_agents() {
        return Err(Error::Config("initial pose count does not match the scenario".into()));
    }
    let f = scenario.sensor.rate_hz;
    let fiedler = scenario.graph.fiedler_value()?;
    let mut rngs = sensor_streams(scenario);
    let mut poses = initial.to_vec();
    let mut errors = Vec::with_capacity(scenario.horizon_steps + 1);
    let mut steps = Vec::new();
    let mut prev: Option<Vec<(Vec3, f64)>> = None;
    let (mut dv_sum, mut dw_sum, mut w_sum, mut n_dv, mut n_w) = (0.0, 0.0, 0.0, 0usize, 0usize);

    for k in 0..=scenario.horizon_steps {
        let err = formation_error(&poses, &scenario.desired, &scenario.graph);
        if !err.e_f.is_finite() {
            return Err(Error::Domain(format!("formation state became non-finite at step {k}")));
        }
        errors.push(err);
        let cmds = if k < scenario.horizon_steps {
            commands(&poses, scenario, &mut rngs)?
        } else {
            vec![ControlCommand::default(); poses.len()]
        };
        if record_steps {
            steps.push(StepRecord {
                step: k,
                time_s: k as f64 / f,
                error: err,
                poses: poses.iter().map(|q| [q.p.x, q.p.y, q.p.z, q.psi]).collect(),
                commands: cmds.iter().map(|c| [c.u.x, c.u.y, c.u.z, c.omega]).collect(),
            });
        }
        if k == scenario.horizon_steps {
            break;
        }
        let world: Vec<(Vec3, f64)> = poses
            .iter()
            .zip(&cmds)
            .map(|(q, c)| (rotz(q.psi) * c.u, c.omega))
            .collect();
        for &(_, w) in &world {
            w_sum += w.abs();
            n_w += 1;
        }
        if let Some(p) = &prev {
            for ((v0, w0), (v1, w1)) in p.iter().zip(&world) {
                dv_sum += (v1 - v0).norm();
                dw_sum += (w1 - w0).abs();
                n_dv += 1;
            }
        }
        prev = Some(world);
        poses = integrate(&poses, &cmds, f);
    }

    let pos: Vec<f64> = errors.iter().map(|e| e.pos_norm).collect();
    let head: Vec<f64> = errors.iter().map(|e| e.head_norm).collect();
    let mp = convergence_metrics_1d(&pos, 0.0, f)?;
    let mh = convergence_metrics_1d(&head, 0.0, f)?;
    let mean_dv = dv_sum / n_dv.max(1) as f64;
    let summary = RunSummary {
        rate_hz: f,
        ell: scenario.controller.ell,
        seed: scenario.seed,
        t_cp: mp.t_c,
        t_cpsi: mh.t_c,
        sigma_tp: mp.sigma_t,
        sigma_tpsi: mh.sigma_t,
        mean_dv,
        mean_domega: dw_sum / n_dv.max(1) as f64,
        a_p: mean_dv * f,
        v_psi: w_sum / n_w.max(1) as f64,
        fiedler,
        converged: mp.converged && mp.sigma_t <= CONVERGED_SPREAD_FRACTION * scenario.min_desired_distance(),
        final_e_f: errors.last().map(|e| e.e_f).unwrap_or(f64::NAN),
    };
    Ok(RunRecord { errors, steps, summary })
}

/// Runs every combination of rate, quantile level and seed. Runs sharing a
/// seed share their initial poses and noise streams.
pub fn sweep(
    scenario: &Scenario,
    rates: &[f64],
    ells: &[f64],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<RunSummary>> {
    let combos: Vec<(f64, f64, u64)> = rates
        .iter()
        .flat_map(|&f| ells.iter().flat_map(move |&l| seeds.iter().map(move |&s| (f, l, s))))
        .collect();
    map_indexed(combos.len(), exec, |i| {
        let (f, l, s) = combos[i];
        let sc = scenario.clone().with_rate(f).with_ell(l).with_seed(s);
        simulate(&sc, false).map(|r| r.summary)
    })
    .into_iter()
    .collect()
}

/// Median of a slice (mean of the two central values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
