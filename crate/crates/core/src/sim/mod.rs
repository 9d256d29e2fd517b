//! Closed-loop navigation episodes on a navmesh: a kinematic agent, termination
//! rules, shaped rewards and NE/SR/SPL/IR evaluation.

mod policy;

pub use policy::{ExpertPolicy, ExternalPolicy, FnPolicy, Policy, PolicyError, RandomPolicy};

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nav::{EdgeKind, NavError, NavMesh, SurfacePoint};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error("no episodes to evaluate")]
    NoEpisodes,
    #[error("episode log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reward coefficients: `+r_succ` on success, `-r_fail` on stuck or out of
/// bounds, `-alpha + beta * (d_prev - d_new)` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub r_succ: f64,
    pub r_fail: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Discount for [`Episode::discounted_return`].
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { r_succ: 10.0, r_fail: 5.0, alpha: 0.01, beta: 1.0, gamma: 0.99 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [("r_succ", self.r_succ), ("r_fail", self.r_fail), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(SimError::InvalidParameter(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeLimits {
    pub max_steps: usize,
    /// Success when the geodesic distance to the goal is at most this, meters.
    pub success_radius: f64,
    /// Stuck when the agent moved less than `stuck_delta` over the last `stuck_window` steps.
    pub stuck_window: usize,
    pub stuck_delta: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub dt: f64,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            success_radius: 1.0,
            stuck_window: 50,
            stuck_delta: 0.05,
            v_max: 1.5,
            omega_max: 1.5,
            dt: 0.1,
        }
    }
}

impl EpisodeLimits {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [("success_radius", self.success_radius), ("v_max", self.v_max), ("omega_max", self.omega_max), ("dt", self.dt)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 || self.stuck_window == 0 {
            return Err(SimError::InvalidParameter("max_steps and stuck_window must be at least 1".into()));
        }
        if !(self.stuck_delta >= 0.0) {
            return Err(SimError::InvalidParameter("stuck_delta must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub limits: EpisodeLimits,
    pub reward: RewardConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.limits.validate()?;
        self.reward.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vector3<f64>,
    /// Radians, counter-clockwise about the navmesh up axis.
    pub heading: f64,
    pub step_index: usize,
    /// Navmesh triangle holding `position`.
    pub triangle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// m/s, clamped to `[0, v_max]`.
    pub forward_velocity: f64,
    /// rad/s, clamped to `[-omega_max, omega_max]`.
    pub yaw_rate: f64,
    pub dt: f64,
}

impl Action {
    pub fn new(forward_velocity: f64, yaw_rate: f64) -> Self {
        Self { forward_velocity, yaw_rate, dt: EpisodeLimits::default().dt }
    }

    /// Bounds enforced; non-finite commands become zero.
    pub fn clamped(&self, limits: &EpisodeLimits) -> Self {
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        Self {
            forward_velocity: finite(self.forward_velocity).clamp(0.0, limits.v_max),
            yaw_rate: finite(self.yaw_rate).clamp(-limits.omega_max, limits.omega_max),
            dt: limits.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Moved,
    /// The move would have crossed a non-walkable edge; the agent stays put.
    Blocked,
    /// The move would have left the scanned surface; the agent stays put.
    OutOfBounds,
}

/// Maps an angle into `(-pi, pi]`, leaving angles already there untouched.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

enum Walk {
    Arrived(usize),
    Stopped(StepOutcome),
}

/// Walks the straight segment `from -> to` (projected) across triangles starting in `tri`.
fn walk(nav: &NavMesh, tri: usize, from: Vector2<f64>, to: Vector2<f64>) -> Walk {
    let cross = |a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>| (b - a).perp(&(c - a));
    let mut t = tri;
    let mut x = from;
    for _ in 0..nav.len() + 8 {
        let pts = nav.triangle_points(t).map(|p| nav.project(&p));
        let mut exit: Option<(f64, usize)> = None;
        for e in 0..3 {
            let (a, b) = (pts[e], pts[(e + 1) % 3]);
            let cq = cross(&a, &b, &to);
            if cq >= -1e-12 * (b - a).norm_squared() {
                continue;
            }
            let cx = cross(&a, &b, &x).max(0.0);
            let s = cx / (cx - cq);
            if exit.is_none_or(|(best, _)| s < best) {
                exit = Some((s, e));
            }
        }
        let Some((s, e)) = exit else { return Walk::Arrived(t) };
        match (nav.edge_kinds()[t][e], nav.neighbors()[t][e]) {
            (EdgeKind::Portal, Some(n)) => {
                x += (to - x) * s;
                t = n;
            }
            (EdgeKind::Open, _) => return Walk::Stopped(StepOutcome::OutOfBounds),
            _ => return Walk::Stopped(StepOutcome::Blocked),
        }
    }
    Walk::Stopped(StepOutcome::Blocked)
}

/// Turns by `yaw_rate * dt`, then moves `forward_velocity * dt` along the new
/// heading in the plane perpendicular to up, following the surface across
/// portals. A move that would cross a wall or leave the surface is cancelled.
pub fn step(state: &AgentState, action: &Action, nav: &NavMesh) -> (AgentState, StepOutcome) {
    let heading = wrap_angle(state.heading + action.yaw_rate * action.dt);
    let mut next = AgentState { heading, step_index: state.step_index + 1, ..*state };
    let dist = action.forward_velocity * action.dt;
    if !(dist > 0.0) {
        return (next, StepOutcome::Moved);
    }
    let from = nav.project(&state.position);
    let to = from + Vector2::new(heading.cos(), heading.sin()) * dist;
    match walk(nav, state.triangle, from, to) {
        Walk::Arrived(t) => {
            next.position = nav.lift(t, &to);
            next.triangle = t;
            (next, StepOutcome::Moved)
        }
        Walk::Stopped(outcome) => (next, outcome),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    Timeout,
    Stuck,
    OutOfBounds,
    /// The policy failed; the episode is excluded from metrics.
    HarnessError,
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Stuck | Termination::OutOfBounds)
    }
}

pub fn reward(prev_d: f64, new_d: f64, termination: Option<Termination>, cfg: &RewardConfig) -> f64 {
    match termination {
        Some(Termination::Success) => cfg.r_succ,
        Some(Termination::Stuck | Termination::OutOfBounds) => -cfg.r_fail,
        _ => -cfg.alpha + cfg.beta * (prev_d - new_d),
    }
}

/// What the policy sees each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: Vector3<f64>,
    pub heading: f64,
    /// `goal - position`.
    pub goal_vector: Vector3<f64>,
    pub geodesic_distance: f64,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub config: SimConfig,
    pub start: Vector3<f64>,
    pub goal: Vector3<f64>,
    /// Shortest-path length from start to goal.
    pub optimal_length: f64,
    /// Distance travelled by the agent.
    pub actual_length: f64,
    pub states: Vec<AgentState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Geodesic distance to the goal at each state.
    pub distances: Vec<f64>,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Episode {
    pub fn final_position(&self) -> Vector3<f64> {
        self.states.last().expect("episodes hold the initial state").position
    }

    /// Euclidean distance from the final position to the goal.
    pub fn navigation_error(&self) -> f64 {
        (self.final_position() - self.goal).norm()
    }

    pub fn discounted_return(&self) -> f64 {
        self.rewards.iter().rev().fold(0.0, |acc, r| r + self.config.reward.gamma * acc)
    }
}

/// Runs one episode from `start` to `goal` (both snapped onto `nav`).
///
/// After every step the rules are checked in order: success, out of bounds,
/// stuck, timeout. A policy failure ends the episode as
/// [`Termination::HarnessError`].
pub fn run_episode(
    nav: &NavMesh,
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    heading: f64,
    policy: &mut dyn Policy,
    cfg: &SimConfig,
) -> Result<Episode, SimError> {
    cfg.validate()?;
    let s = nav.snap_endpoint(start)?;
    let g = nav.snap_endpoint(goal)?;
    let optimal = nav.path_between(&s, &g)?.length;
    let limits = &cfg.limits;
    let mut state = AgentState { position: s.point, heading: wrap_angle(heading), step_index: 0, triangle: s.triangle };
    let geodesic = |st: &AgentState| -> Result<f64, NavError> {
        let here = SurfacePoint { point: st.position, triangle: st.triangle, distance: 0.0 };
        Ok(nav.path_between(&here, &g)?.length)
    };
    let mut ep = Episode {
        config: cfg.clone(),
        start: s.point,
        goal: g.point,
        optimal_length: optimal,
        actual_length: 0.0,
        states: vec![state],
        actions: Vec::new(),
        rewards: Vec::new(),
        distances: vec![optimal],
        termination: Termination::Timeout,
        error: None,
    };
    let mut d = optimal;
    loop {
        let obs = Observation {
            position: state.position,
            heading: state.heading,
            goal_vector: g.point - state.position,
            geodesic_distance: d,
            step_index: state.step_index,
        };
        let action = match policy.act(&obs) {
            Ok(a) => a.clamped(limits),
            Err(e) => {
                ep.termination = Termination::HarnessError;
                ep.error = Some(e.to_string());
                return Ok(ep);
            }
        };
        let (next, outcome) = step(&state, &action, nav);
        let d_new = geodesic(&next)?;
        let k = next.step_index;
        let termination = if d_new <= limits.success_radius {
            Some(Termination::Success)
        } else if outcome == StepOutcome::OutOfBounds {
            Some(Termination::OutOfBounds)
        } else if k >= limits.stuck_window
            && (next.position - ep.states[k - limits.stuck_window].position).norm() < limits.stuck_delta
        {
            Some(Termination::Stuck)
        } else if k >= limits.max_steps {
            Some(Termination::Timeout)
        } else {
            None
        };
        ep.actual_length += (next.position - state.position).norm();
        ep.rewards.push(reward(d, d_new, termination, &cfg.reward));
        ep.actions.push(action);
        ep.states.push(next);
        ep.distances.push(d_new);
        state = next;
        d = d_new;
        if let Some(t) = termination {
            ep.termination = t;
            return Ok(ep);
        }
    }
}

/// Aggregate navigation metrics. Harness-error episodes are counted in
/// `excluded` and left out of every other field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavReport {
    /// Mean Euclidean distance from the final position to the goal, meters.
    pub ne: f64,
    pub sr: f64,
    pub spl: f64,
    /// Fraction ending stuck or out of bounds.
    pub ir: f64,
    pub episodes: usize,
    pub excluded: usize,
}

pub fn evaluate(episodes: &[Episode]) -> Result<NavReport, SimError> {
    let valid: Vec<&Episode> = episodes.iter().filter(|e| e.termination != Termination::HarnessError).collect();
    if valid.is_empty() {
        return Err(SimError::NoEpisodes);
    }
    let n = valid.len() as f64;
    let (mut ne, mut successes, mut spl, mut failures) = (0.0, 0usize, 0.0, 0usize);
    for e in &valid {
        ne += e.navigation_error();
        if e.termination == Termination::Success {
            successes += 1;
            let denom = e.actual_length.max(e.optimal_length);
            spl += if denom > 0.0 { e.optimal_length / denom } else { 1.0 };
        }
        if e.termination.is_failure() {
            failures += 1;
        }
    }
    let report = NavReport {
        ne: ne / n,
        sr: successes as f64 / n,
        spl: spl / n,
        ir: failures as f64 / n,
        episodes: valid.len(),
        excluded: episodes.len() - valid.len(),
    };
    Ok(report)
}

/// One JSON episode per line.
pub fn write_episodes<W: Write>(mut w: W, episodes: &[Episode]) -> Result<(), SimError> {
    for e in episodes {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episodes<R: BufRead>(r: R) -> Result<Vec<Episode>, SimError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| SimError::Log { line: i + 1, message: e.to_string() })?;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::NavParams;
    use crate::recon::TriangleMesh;

    fn floor(n: usize) -> NavMesh {
        let mut vertices = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Vector3::new(i as f64, j as f64, 0.0));
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::new();
        for j in 0..n {
            for i in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        NavMesh::bake(&TriangleMesh { vertices, triangles }, &NavParams { min_region_faces: 1, ..NavParams::default() })
            .unwrap()
    }

    fn state_at(nav: &NavMesh, p: Vector3<f64>, heading: f64) -> AgentState {
        let s = nav.snap(&p);
        AgentState { position: s.point, heading, step_index: 0, triangle: s.triangle }
    }

    #[test]
    fn zero_action_only_advances_step() {
        let nav = floor(4);
        let s = state_at(&nav, Vector3::new(1.3, 2.2, 0.0), 0.4);
        let (n, o) = step(&s, &Action { forward_velocity: 0.0, yaw_rate: 0.0, dt: 0.1 }, &nav);
        assert_eq!(o, StepOutcome::Moved);
        assert_eq!(n, AgentState { step_index: 1, ..s });
    }

    #[test]
    fn forward_one_meter() {
        let nav = floor(10);
        let s = state_at(&nav, Vector3::new(2.3, 2.6, 0.0), 0.7);
        let (n, o) = step(&s, &Action { forward_velocity: 1.0, yaw_rate: 0.0, dt: 1.0 }, &nav);
        assert_eq!(o, StepOutcome::Moved);
        let expect = s.position + Vector3::new(0.7f64.cos(), 0.7f64.sin(), 0.0);
        assert!((n.position - expect).norm() < 1e-6);
        assert!(nav.snap(&n.position).distance < 1e-12);
        assert!((nav.snap(&n.position).point - n.position).norm() < 1e-12);
    }

    #[test]
    fn leaving_the_surface_is_out_of_bounds() {
        let nav = floor(3);
        let s = state_at(&nav, Vector3::new(2.9, 1.5, 0.0), 0.0);
        let (n, o) = step(&s, &Action { forward_velocity: 1.0, yaw_rate: 0.0, dt: 1.0 }, &nav);
        assert_eq!(o, StepOutcome::OutOfBounds);
        assert_eq!(n.position, s.position);
    }

    #[test]
    fn reward_cases() {
        let cfg = RewardConfig::default();
        assert_eq!(reward(5.0, 4.0, Some(Termination::Success), &cfg), 10.0);
        assert_eq!(reward(5.0, 4.0, Some(Termination::Stuck), &cfg), -5.0);
        assert_eq!(reward(5.0, 4.0, Some(Termination::OutOfBounds), &cfg), -5.0);
        assert!((reward(5.0, 4.0, None, &cfg) - 0.99).abs() < 1e-15);
        assert!((reward(5.0, 4.0, Some(Termination::Timeout), &cfg) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    fn episode(termination: Termination, optimal: f64, actual: f64, final_d: f64) -> Episode {
        let st = |x: f64| AgentState { position: Vector3::new(x, 0.0, 0.0), heading: 0.0, step_index: 0, triangle: 0 };
        Episode {
            config: SimConfig::default(),
            start: Vector3::zeros(),
            goal: Vector3::new(final_d + 1.0, 0.0, 0.0),
            optimal_length: optimal,
            actual_length: actual,
            states: vec![st(0.0), st(1.0)],
            actions: vec![Action::new(1.0, 0.0)],
            rewards: vec![0.0],
            distances: vec![optimal, final_d],
            termination,
            error: None,
        }
    }

    #[test]
    fn evaluate_examples() {
        let r = evaluate(&[episode(Termination::Success, 10.0, 10.0, 0.0)]).unwrap();
        assert_eq!((r.spl, r.sr, r.ir), (1.0, 1.0, 0.0));
        let r = evaluate(&[episode(Termination::Success, 10.0, 20.0, 0.0)]).unwrap();
        assert_eq!(r.spl, 0.5);
        let three = [
            episode(Termination::Success, 10.0, 10.0, 0.0),
            episode(Termination::Timeout, 10.0, 10.0, 0.0),
            episode(Termination::Stuck, 10.0, 10.0, 0.0),
            episode(Termination::HarnessError, 10.0, 10.0, 0.0),
        ];
        let r = evaluate(&three).unwrap();
        assert!((r.sr - 1.0 / 3.0).abs() < 1e-15 && (r.ir - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((r.episodes, r.excluded), (3, 1));
        assert!(matches!(evaluate(&three[3..]), Err(SimError::NoEpisodes)));
    }

    #[test]
    fn jsonl_round_trip() {
        let eps = vec![episode(Termination::Success, 3.0, 4.0, 0.5), episode(Termination::Stuck, 3.0, 0.0, 3.0)];
        let mut buf = Vec::new();
        write_episodes(&mut buf, &eps).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 2);
        assert_eq!(read_episodes(buf.as_slice()).unwrap(), eps);
    }
}
