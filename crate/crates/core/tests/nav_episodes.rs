mod common;

use common::{grid_mesh, u_corridor};
use nalgebra::Vector3;
use wanderkit_core::geom::Trajectory;
use wanderkit_core::nav::{NavMesh, NavParams};
use wanderkit_core::sim::{
    evaluate, run_episode, Action, Episode, ExpertPolicy, FnPolicy, PolicyError, RandomPolicy, SimConfig, Termination,
};

fn fixture_scenes() -> Vec<(NavMesh, Trajectory)> {
    let floor = NavMesh::bake(&grid_mesh(10, 10, 1.0, |_, _| false), &NavParams::default()).unwrap();
    let floor_cams = Trajectory::from_translations(&[
        Vector3::new(1.5, 1.5, 1.6),
        Vector3::new(8.5, 1.5, 1.6),
        Vector3::new(8.5, 8.5, 1.6),
        Vector3::new(1.5, 8.5, 1.6),
    ]);
    let u = NavMesh::bake(&u_corridor(), &NavParams::default()).unwrap();
    let u_cams = Trajectory::from_translations(&[
        Vector3::new(1.0, 0.8, 1.6),
        Vector3::new(1.2, 3.5, 1.6),
        Vector3::new(4.8, 3.5, 1.6),
        Vector3::new(5.0, 0.8, 1.6),
    ]);
    vec![(floor, floor_cams), (u, u_cams)]
}

fn expert_episodes(nav: &NavMesh, cams: &Trajectory, n: u64, cfg: &SimConfig) -> Vec<Episode> {
    (0..n)
        .map(|seed| {
            let (s, g) = nav.sample_endpoints(cams, 0.5, 2.0, seed).unwrap();
            let mut policy = ExpertPolicy::new(nav, g.point, cfg.limits.clone());
            run_episode(nav, &s.point, &g.point, seed as f64, &mut policy, cfg).unwrap()
        })
        .collect()
}

/// Sum of the shaping rewards, i.e. every reward except a terminal success/failure bonus.
fn shaping_check(e: &Episode) {
    let cfg = &e.config.reward;
    let shaped = match e.termination {
        Termination::Success | Termination::Stuck | Termination::OutOfBounds => e.rewards.len() - 1,
        _ => e.rewards.len(),
    };
    let sum: f64 = e.rewards[..shaped].iter().sum();
    let expect = -cfg.alpha * shaped as f64 + cfg.beta * (e.distances[0] - e.distances[shaped]);
    assert!((sum - expect).abs() < 1e-9, "{sum} vs {expect}");
}

#[test]
fn expert_reaches_every_goal() {
    let cfg = SimConfig::default();
    for (nav, cams) in fixture_scenes() {
        let eps = expert_episodes(&nav, &cams, 20, &cfg);
        let report = evaluate(&eps).unwrap();
        assert_eq!(report.sr, 1.0);
        assert!(report.spl >= 0.95, "{report:?}");
        assert!(report.spl <= report.sr);
        for e in &eps {
            shaping_check(e);
            assert_eq!(e.rewards.len(), e.actions.len());
            assert_eq!(e.states.len(), e.actions.len() + 1);
            for s in &e.states {
                assert!(nav.snap(&s.position).distance <= 1e-6);
            }
        }
    }
}

#[test]
fn zero_action_gets_stuck() {
    let cfg = SimConfig::default();
    let (nav, _) = fixture_scenes().remove(0);
    let mut idle = FnPolicy(|_: &_| Ok::<_, PolicyError>(Action::new(0.0, 0.0)));
    let e = run_episode(&nav, &Vector3::new(0.5, 0.5, 0.0), &Vector3::new(9.5, 7.5, 0.0), 0.0, &mut idle, &cfg).unwrap();
    assert_eq!(e.termination, Termination::Stuck);
    assert_eq!(e.actions.len(), cfg.limits.stuck_window);
    assert_eq!(*e.rewards.last().unwrap(), -cfg.reward.r_fail);
    shaping_check(&e);
}

#[test]
fn random_walk_times_out_at_step_cap() {
    let cfg = SimConfig::default();
    let nav = NavMesh::bake(&grid_mesh(40, 40, 10.0, |_, _| false), &NavParams::default()).unwrap();
    let mut policy = RandomPolicy::new(9, cfg.limits.clone());
    let start = Vector3::new(200.0, 200.0, 0.0);
    let e = run_episode(&nav, &start, &Vector3::new(390.0, 390.0, 0.0), 0.0, &mut policy, &cfg).unwrap();
    assert_eq!(e.termination, Termination::Timeout);
    assert_eq!(e.actions.len(), 1000);
    shaping_check(&e);

    let short = SimConfig { limits: wanderkit_core::sim::EpisodeLimits { max_steps: 10, ..cfg.limits.clone() }, ..cfg };
    let mut policy = RandomPolicy::new(9, short.limits.clone());
    let e = run_episode(&nav, &start, &Vector3::new(390.0, 390.0, 0.0), 0.0, &mut policy, &short).unwrap();
    assert_eq!(e.termination, Termination::Timeout);
    assert_eq!(e.actions.len(), 10);
}

#[test]
fn policy_failure_is_a_harness_error() {
    let cfg = SimConfig::default();
    let (nav, _) = fixture_scenes().remove(0);
    let mut calls = 0;
    let mut flaky = FnPolicy(|_: &_| {
        calls += 1;
        if calls > 3 {
            Err(PolicyError::Failed("boom".into()))
        } else {
            Ok(Action::new(1.0, 0.0))
        }
    });
    let e = run_episode(&nav, &Vector3::new(0.5, 0.5, 0.0), &Vector3::new(9.5, 0.5, 0.0), 0.0, &mut flaky, &cfg).unwrap();
    assert_eq!(e.termination, Termination::HarnessError);
    assert_eq!(e.actions.len(), 3);
    assert!(e.error.unwrap().contains("boom"));
}

#[test]
fn episodes_are_deterministic() {
    let cfg = SimConfig::default();
    let (nav, cams) = fixture_scenes().remove(1);
    assert_eq!(expert_episodes(&nav, &cams, 3, &cfg), expert_episodes(&nav, &cams, 3, &cfg));
}
