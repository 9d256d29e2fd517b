use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use super::{wrap_angle, Action, EpisodeLimits, Observation};
use crate::nav::NavMesh;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy failed: {0}")]
    Failed(String),
    #[error("policy protocol error: {0}")]
    Protocol(String),
    #[error("policy i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Maps observations to actions. Actions are clamped by the harness.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> Result<Action, PolicyError>;
}

/// Adapts an in-process closure.
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(&Observation) -> Result<Action, PolicyError>> Policy for FnPolicy<F> {
    fn act(&mut self, obs: &Observation) -> Result<Action, PolicyError> {
        (self.0)(obs)
    }
}

/// Follows the shortest path, replanned every step. It turns in place until the
/// next waypoint is reachable within one step's turn, then drives straight at it.
pub struct ExpertPolicy<'a> {
    nav: &'a NavMesh,
    goal: Vector3<f64>,
    limits: EpisodeLimits,
}

impl<'a> ExpertPolicy<'a> {
    pub fn new(nav: &'a NavMesh, goal: Vector3<f64>, limits: EpisodeLimits) -> Self {
        Self { nav, goal, limits }
    }
}

impl Policy for ExpertPolicy<'_> {
    fn act(&mut self, obs: &Observation) -> Result<Action, PolicyError> {
        let dt = self.limits.dt;
        let path = self.nav.shortest_path(&obs.position, &self.goal).map_err(|e| PolicyError::Failed(e.to_string()))?;
        let here = self.nav.project(&obs.position);
        let Some((target, dist)) = path
            .waypoints
            .iter()
            .map(|w| (w, (self.nav.project(w) - here).norm()))
            .find(|(_, d)| *d > 1e-9)
        else {
            return Ok(Action { forward_velocity: 0.0, yaw_rate: 0.0, dt });
        };
        let desired = self.nav.heading_of(&(target - obs.position));
        let delta = wrap_angle(desired - obs.heading);
        let max_turn = self.limits.omega_max * dt;
        Ok(if delta.abs() <= max_turn {
            Action { forward_velocity: self.limits.v_max.min(dist / dt), yaw_rate: delta / dt, dt }
        } else {
            Action { forward_velocity: 0.0, yaw_rate: self.limits.omega_max.copysign(delta), dt }
        })
    }
}

/// Uniformly random commands from a seeded generator.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    limits: EpisodeLimits,
}

impl RandomPolicy {
    pub fn new(seed: u64, limits: EpisodeLimits) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), limits }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &Observation) -> Result<Action, PolicyError> {
        let v = self.rng.random_range(0.0..=self.limits.v_max);
        let w = self.rng.random_range(-self.limits.omega_max..=self.limits.omega_max);
        Ok(Action { forward_velocity: v, yaw_rate: w, dt: self.limits.dt })
    }
}

#[derive(Deserialize)]
struct WireAction {
    forward_velocity: f64,
    yaw_rate: f64,
}

/// A policy in a child process: one JSON observation per line on its stdin,
/// one JSON action (`forward_velocity`, `yaw_rate`) per line on its stdout.
pub struct ExternalPolicy {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    dt: f64,
}

impl ExternalPolicy {
    pub fn spawn(program: &str, args: &[String], limits: &EpisodeLimits) -> Result<Self, PolicyError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Self { child, stdin, stdout, dt: limits.dt })
    }
}

impl Policy for ExternalPolicy {
    fn act(&mut self, obs: &Observation) -> Result<Action, PolicyError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| PolicyError::Protocol("policy input closed".into()))?;
        let mut line = serde_json::to_vec(obs).map_err(|e| PolicyError::Protocol(e.to_string()))?;
        line.push(b'\n');
        stdin.write_all(&line)?;
        stdin.flush()?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply)? == 0 {
            return Err(PolicyError::Protocol("policy closed its output".into()));
        }
        let a: WireAction =
            serde_json::from_str(reply.trim()).map_err(|e| PolicyError::Protocol(format!("bad action {:?}: {e}", reply.trim())))?;
        Ok(Action { forward_velocity: a.forward_velocity, yaw_rate: a.yaw_rate, dt: self.dt })
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        // Closing stdin asks the child to exit; kill it if it lingers.
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_secs(1);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
