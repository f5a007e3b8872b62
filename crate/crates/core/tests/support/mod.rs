//! Oracles written against the rules directly, shared by the integration
//! tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use raymaze_core::rng::Rng;
use raymaze_core::scenario::{scenario_step, ItemColor, ObjectKind, STEP_LIMIT};
use raymaze_core::{Action, EpisodeState, Event, MazeGrid, ScenarioConfig, ScenarioKind, VecEnv};

// ---------------------------------------------------------------- mazes

fn round_half_away(x: f64) -> usize {
    let fl = x.floor();
    if x - fl >= 0.5 {
        fl as usize + 1
    } else {
        fl as usize
    }
}

/// Walls a grid of side `n` keeps: interior slots `2n(n-1)`, minus the
/// `n^2 - 1` a spanning tree opens, scaled by `f`.
pub fn expected_wall_count(n: usize, f: f64) -> usize {
    let slots = 2 * n * (n - 1);
    let residual = slots - (n * n - 1);
    round_half_away(f * residual as f64)
}

/// Connected components of the open-passage graph (union-find).
pub fn component_count(maze: &MazeGrid) -> usize {
    let n = maze.n();
    let mut parent: Vec<usize> = (0..n * n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut comps = n * n;
    for slot in 0..2 * n * (n - 1) {
        if maze.has_slot_wall(slot) {
            continue;
        }
        let (a, b) = maze.slot_cells(slot);
        let (ra, rb) = (find(&mut parent, a.y * n + a.x), find(&mut parent, b.y * n + b.x));
        if ra != rb {
            parent[ra] = rb;
            comps -= 1;
        }
    }
    comps
}

pub fn closed_slot_count(maze: &MazeGrid) -> usize {
    let n = maze.n();
    (0..2 * n * (n - 1)).filter(|&s| maze.has_slot_wall(s)).count()
}

/// BFS distance through open slots, from scratch.
pub fn bfs_reachable(maze: &MazeGrid, from: (usize, usize)) -> Vec<bool> {
    let n = maze.n();
    let mut adj = vec![Vec::new(); n * n];
    for slot in 0..2 * n * (n - 1) {
        if !maze.has_slot_wall(slot) {
            let (a, b) = maze.slot_cells(slot);
            adj[a.y * n + a.x].push(b.y * n + b.x);
            adj[b.y * n + b.x].push(a.y * n + a.x);
        }
    }
    let mut seen = vec![false; n * n];
    let mut queue = std::collections::VecDeque::from([from.1 * n + from.0]);
    seen[from.1 * n + from.0] = true;
    while let Some(c) = queue.pop_front() {
        for &d in &adj[c] {
            if !seen[d] {
                seen[d] = true;
                queue.push_back(d);
            }
        }
    }
    seen
}

/// Distance from a point to the nearest wall segment, border included.
pub fn clearance_oracle(maze: &MazeGrid, x: f64, y: f64) -> f64 {
    let n = maze.n() as f64;
    let seg = |ax: f64, ay: f64, bx: f64, by: f64| {
        // Segments are axis-aligned.
        let cx = x.clamp(ax.min(bx), ax.max(bx));
        let cy = y.clamp(ay.min(by), ay.max(by));
        ((x - cx).powi(2) + (y - cy).powi(2)).sqrt()
    };
    let mut best = [seg(0.0, 0.0, n, 0.0), seg(0.0, n, n, n), seg(0.0, 0.0, 0.0, n), seg(n, 0.0, n, n)]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    for slot in 0..2 * maze.n() * (maze.n() - 1) {
        if !maze.has_slot_wall(slot) {
            continue;
        }
        let (a, b) = maze.slot_cells(slot);
        let d = if b.x == a.x + 1 {
            seg(b.x as f64, a.y as f64, b.x as f64, a.y as f64 + 1.0)
        } else {
            seg(a.x as f64, b.y as f64, a.x as f64 + 1.0, b.y as f64)
        };
        best = best.min(d);
    }
    best
}

// ---------------------------------------------------------------- rewards

/// A scripted episode: the events fed at each decision step and what the
/// scenario returned.
pub struct Script {
    pub steps: Vec<Vec<Event>>,
    pub rewards: Vec<f64>,
    pub last_done: bool,
    pub state: EpisodeState,
}

/// Random scenario configuration for reward scripts.
pub fn random_config(kind_tag: usize, rng: &mut Rng) -> ScenarioConfig {
    let kind = match kind_tag {
        0 => ScenarioKind::Labyrinth,
        1 => ScenarioKind::FindAndReturn,
        2 => ScenarioKind::OrderedKItem { k: [2, 4, 6, 8][rng.index(4)] },
        _ => ScenarioKind::TwoColorCorrelation { complexity: [1, 3, 5, 7][rng.index(4)] },
    };
    let n = 5 + rng.index(4);
    ScenarioConfig::generate(kind, n, rng.next_u64(), None).expect("config")
}

/// Drives `scenario_step` with random events that are valid for the current
/// state until the episode ends.
pub fn play_script(cfg: &ScenarioConfig, rng: &mut Rng) -> Script {
    let mut st = EpisodeState::new(cfg, rng.next_u64());
    // Event density per step; 0 forces a step-limit episode.
    let rate = [0.0, 0.003, 0.03, 0.2, 0.6][rng.index(5)];
    let mut steps = Vec::new();
    let mut rewards = Vec::new();
    let mut last_done = false;
    while !last_done {
        let mut events = Vec::new();
        if rng.unit_f64() < rate {
            let mut candidates: Vec<Event> = cfg
                .placements
                .iter()
                .enumerate()
                .filter_map(|(p, pl)| match pl.object {
                    ObjectKind::Exit | ObjectKind::Entry => Some(Event::Arrival(p)),
                    ObjectKind::Totem { .. } => None,
                    _ if st.collected[p] => None,
                    _ => Some(Event::Pickup(p)),
                })
                .collect();
            // Ordered tasks: favor the expected item so long correct runs occur.
            if let ScenarioKind::OrderedKItem { .. } = cfg.kind {
                if rng.unit_f64() < 0.8 {
                    candidates.retain(|e| {
                        cfg.placements[e.placement()].object == ObjectKind::OrderedItem { order: st.next_order }
                    });
                }
            }
            rng.shuffle(&mut candidates);
            let take = 1 + rng.index(2);
            events.extend(candidates.into_iter().take(take));
        }
        let out = scenario_step(cfg, &mut st, &events).expect("valid script");
        steps.push(events);
        rewards.push(out.reward);
        last_done = out.done;
    }
    Script { steps, rewards, last_done, state: st }
}

/// What the rules say a script is worth.
#[derive(Debug, PartialEq)]
pub struct Expected {
    pub episode_return: f64,
    pub length: usize,
    pub wrong_order_terminal: bool,
    /// Expected reward of the terminal step of a wrong-order episode: the
    /// -0.25 penalty, the step penalty, and any correct pickup earlier in
    /// the same step.
    pub terminal_reward: Option<f64>,
    pub health: Option<f64>,
}

/// Return and length implied by the event log alone.
pub fn closed_form(cfg: &ScenarioConfig, steps: &[Vec<Event>]) -> Expected {
    let limit = STEP_LIMIT as usize;
    let object = |e: &Event| cfg.placements[e.placement()].object;
    match cfg.kind {
        ScenarioKind::Labyrinth => {
            let exit = steps.iter().position(|s| !s.is_empty()).map(|i| i + 1);
            let length = exit.unwrap_or(limit).min(limit);
            Expected {
                episode_return: exit.map_or(0.0, |_| 1.0) - 0.0001 * length as f64,
                length,
                wrong_order_terminal: false,
                terminal_reward: None,
                health: None,
            }
        }
        ScenarioKind::FindAndReturn => {
            let mut found = None;
            let mut returned = None;
            'outer: for (i, s) in steps.iter().enumerate() {
                for e in s {
                    match object(e) {
                        ObjectKind::Goal => found = Some(i + 1),
                        ObjectKind::Entry if found.is_some() => {
                            returned = Some(i + 1);
                            break 'outer;
                        }
                        _ => {}
                    }
                }
            }
            let length = returned.unwrap_or(limit);
            Expected {
                episode_return: 0.5 * found.is_some() as u8 as f64 + 0.5 * returned.is_some() as u8 as f64
                    - 0.0001 * length as f64,
                length,
                wrong_order_terminal: false,
                terminal_reward: None,
                health: None,
            }
        }
        ScenarioKind::OrderedKItem { k } => {
            let mut correct = 0usize;
            let mut end = None;
            let mut wrong = false;
            let mut terminal_reward = None;
            'outer: for (i, s) in steps.iter().enumerate() {
                let before = correct;
                for e in s {
                    let ObjectKind::OrderedItem { order } = object(e) else { unreachable!() };
                    if order == correct {
                        correct += 1;
                        if correct == k {
                            end = Some(i + 1);
                            break 'outer;
                        }
                    } else {
                        wrong = true;
                        terminal_reward = Some(0.5 * (correct - before) as f64 - 0.25 - 0.0001);
                        end = Some(i + 1);
                        break 'outer;
                    }
                }
            }
            let length = end.unwrap_or(limit);
            Expected {
                episode_return: 0.5 * correct as f64 - 0.25 * wrong as u8 as f64 - 0.0001 * length as f64,
                length,
                wrong_order_terminal: wrong,
                terminal_reward,
                health: None,
            }
        }
        ScenarioKind::TwoColorCorrelation { .. } => {
            let totem = cfg.totem_color.expect("totem color");
            let (mut good, mut bad) = (0i64, 0i64);
            let mut length = limit;
            let mut health = 0.0;
            for (i, s) in steps.iter().enumerate() {
                for e in s {
                    match object(e) {
                        ObjectKind::ColorItem { color } if color == totem => good += 1,
                        ObjectKind::ColorItem { color: ItemColor::Red | ItemColor::Green } => bad += 1,
                        _ => unreachable!(),
                    }
                }
                let t = (i + 1) as i64;
                health = (100 + 25 * (good - bad) - t) as f64;
                if health < 0.0 || t as usize == limit {
                    length = t as usize;
                    break;
                }
            }
            Expected {
                episode_return: 0.1 * good as f64 - 0.01 * length as f64,
                length,
                wrong_order_terminal: false,
                terminal_reward: None,
                health: Some(health),
            }
        }
    }
}

/// Checks one script against the closed form; returns a description of the
/// first mismatch.
pub fn check_script(cfg: &ScenarioConfig, script: &Script) -> Result<(), String> {
    let exp = closed_form(cfg, &script.steps);
    let got: f64 = script.rewards.iter().sum();
    if script.steps.len() != exp.length {
        return Err(format!("length {} != {}", script.steps.len(), exp.length));
    }
    if (got - exp.episode_return).abs() > 1e-9 || (script.state.cumulative_return - exp.episode_return).abs() > 1e-9 {
        return Err(format!("return {got} != {}", exp.episode_return));
    }
    if let Some(want) = exp.terminal_reward {
        let last = *script.rewards.last().unwrap();
        if (last - want).abs() > 1e-12 {
            return Err(format!("wrong-order terminal reward {last}"));
        }
    }
    if let Some(h) = exp.health {
        if script.state.health != h {
            return Err(format!("health {} != {h}", script.state.health));
        }
    }
    if !script.last_done || !script.state.done {
        return Err("episode did not end".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- rollouts

/// Hash of every observation, reward and done flag of a scripted rollout of
/// `batches` batched steps. Actions come from their own seeded stream.
pub fn rollout_digest(configs: &[ScenarioConfig], num_envs: usize, workers: usize, batches: usize, seed: u64) -> u64 {
    let mut venv = VecEnv::new(configs, num_envs, 4, workers, seed).expect("venv");
    let mut rng = Rng::new(seed ^ 0xa5a5);
    let mut h = DefaultHasher::new();
    h.write(venv.obs());
    let mut actions = vec![Action::Forward; num_envs];
    for _ in 0..batches {
        for a in actions.iter_mut() {
            *a = Action::ALL[rng.index(Action::COUNT)];
        }
        let view = venv.step(&actions).expect("step");
        h.write(view.obs);
        for (r, d) in view.rewards.iter().zip(view.dones) {
            h.write_u64(r.to_bits());
            h.write_u8(*d as u8);
        }
    }
    h.finish()
}
