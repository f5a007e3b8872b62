//! Task rulesets: object placement, rewards, health and termination for the
//! four scenario kinds, plus seeded train/test configuration sets.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::Pose;
use crate::error::{Error, Result};
use crate::maze::{generate_maze, Cell, MazeGrid};
use crate::rng::{derive_seed, Rng};

/// Decision-step cap shared by every scenario kind.
pub const STEP_LIMIT: u32 = 2100;
/// Per-step penalty for Labyrinth, Find-and-return and Ordered k-item.
pub const NAV_STEP_PENALTY: f64 = 0.0001;
pub const LABYRINTH_EXIT_REWARD: f64 = 1.0;
pub const FIND_REWARD: f64 = 0.5;
pub const RETURN_REWARD: f64 = 0.5;
pub const ORDERED_ITEM_REWARD: f64 = 0.5;
pub const WRONG_ORDER_PENALTY: f64 = -0.25;
pub const TWO_COLOR_ITEM_REWARD: f64 = 0.1;
pub const TWO_COLOR_STEP_PENALTY: f64 = 0.01;
pub const INITIAL_HEALTH: f64 = 100.0;
pub const HEALTH_PER_ITEM: f64 = 25.0;
pub const HEALTH_DECAY: f64 = 1.0;
/// Decision steps before a collected two-color item reappears.
pub const RESPAWN_DELAY: u32 = 32;
/// Default share of post-carving walls kept for the navigation tasks.
pub const DEFAULT_RETAIN_FRACTION: f64 = 0.6;
/// Share of cells holding one color of two-color items (per color).
pub const TWO_COLOR_ITEM_DENSITY: f64 = 0.2;
/// Current `ConfigSet` file format version.
pub const CONFIG_SET_VERSION: u32 = 1;

const MAX_PLACEMENT_ATTEMPTS: usize = 64;
const MAX_DISTINCT_ATTEMPTS: u64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ScenarioKind {
    Labyrinth,
    FindAndReturn,
    OrderedKItem { k: usize },
    TwoColorCorrelation { complexity: u32 },
}

impl ScenarioKind {
    /// Share of residual walls kept after carving. Two-color complexity `c`
    /// keeps `0.1 * c`.
    pub fn retain_fraction(&self) -> f64 {
        match self {
            ScenarioKind::TwoColorCorrelation { complexity } => 0.1 * *complexity as f64,
            _ => DEFAULT_RETAIN_FRACTION,
        }
    }

    pub fn step_penalty(&self) -> f64 {
        match self {
            ScenarioKind::TwoColorCorrelation { .. } => TWO_COLOR_STEP_PENALTY,
            _ => NAV_STEP_PENALTY,
        }
    }

    /// Largest achievable task reward, ignoring step penalties. Used for
    /// item-normalized returns.
    pub fn max_task_reward(&self) -> f64 {
        match self {
            ScenarioKind::Labyrinth => LABYRINTH_EXIT_REWARD,
            ScenarioKind::FindAndReturn => FIND_REWARD + RETURN_REWARD,
            ScenarioKind::OrderedKItem { k } => ORDERED_ITEM_REWARD * *k as f64,
            ScenarioKind::TwoColorCorrelation { .. } => f64::INFINITY,
        }
    }

    pub fn has_health(&self) -> bool {
        matches!(self, ScenarioKind::TwoColorCorrelation { .. })
    }

    /// Parses `labyrinth`, `find-and-return`, `ordered-k-item:<k>` or
    /// `two-color:<complexity>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |default: usize| -> Result<usize> {
            arg.map_or(Ok(default), |a| {
                a.parse()
                    .map_err(|_| Error::Parse(format!("bad scenario argument {a:?}")))
            })
        };
        match name {
            "labyrinth" => Ok(ScenarioKind::Labyrinth),
            "find-and-return" | "find_and_return" => Ok(ScenarioKind::FindAndReturn),
            "ordered-k-item" | "ordered_k_item" | "k-item" => Ok(ScenarioKind::OrderedKItem { k: num(4)? }),
            "two-color" | "two_color" | "two-color-correlation" => {
                let c = num(1)?;
                if c > 10 {
                    return Err(Error::InvalidParameter(format!(
                        "two-color complexity {c} keeps more than all walls"
                    )));
                }
                Ok(ScenarioKind::TwoColorCorrelation { complexity: c as u32 })
            }
            other => Err(Error::Parse(format!("unknown scenario {other:?}"))),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Labyrinth => write!(f, "labyrinth"),
            ScenarioKind::FindAndReturn => write!(f, "find-and-return"),
            ScenarioKind::OrderedKItem { k } => write!(f, "ordered-k-item:{k}"),
            ScenarioKind::TwoColorCorrelation { complexity } => write!(f, "two-color:{complexity}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemColor {
    Red,
    Green,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "object", rename_all = "snake_case")]
pub enum ObjectKind {
    /// Labyrinth exit pad; reached by arrival.
    Exit,
    /// Find-and-return starting marker; sits on the spawn cell.
    Entry,
    /// Find-and-return target object.
    Goal,
    /// Ordered k-item object with its position in the collection order.
    OrderedItem { order: usize },
    /// Two-color pickup.
    ColorItem { color: ItemColor },
    /// Two-color central indicator; never collected.
    Totem { color: ItemColor },
}

impl ObjectKind {
    pub fn is_pickup(&self) -> bool {
        matches!(
            self,
            ObjectKind::Goal | ObjectKind::OrderedItem { .. } | ObjectKind::ColorItem { .. }
        )
    }

    pub fn is_zone(&self) -> bool {
        matches!(self, ObjectKind::Exit | ObjectKind::Entry)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    #[serde(flatten)]
    pub object: ObjectKind,
    pub cell: Cell,
}

/// Spawn cell and one of four cardinal headings (`heading * 90` degrees,
/// counter-clockwise from +x).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Spawn {
    pub cell: Cell,
    pub heading: u8,
}

impl Spawn {
    pub fn pose(&self) -> Pose {
        let (x, y) = self.cell.center();
        Pose {
            x,
            y,
            heading: self.heading as f64 * std::f64::consts::FRAC_PI_2,
        }
    }
}

/// One immutable task instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub n: usize,
    pub config_seed: u64,
    pub retain_fraction: f64,
    pub maze: MazeGrid,
    pub spawn: Spawn,
    pub placements: Vec<Placement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub totem_color: Option<ItemColor>,
}

impl ScenarioConfig {
    /// Generates one configuration from its seed. For the two-color task
    /// `totem_color` picks the indicator color (random when `None`).
    pub fn generate(kind: ScenarioKind, n: usize, seed: u64, totem_color: Option<ItemColor>) -> Result<Self> {
        if let ScenarioKind::OrderedKItem { k: 0 } = kind {
            return Err(Error::InvalidParameter("ordered k-item needs k >= 1".into()));
        }
        let retain_fraction = kind.retain_fraction();
        let maze = generate_maze(n, derive_seed(seed, &[0x4d41_5a45]), retain_fraction)?;
        let mut rng = Rng::derive(seed, &[0x504c_4143]);
        let cells: Vec<Cell> = (0..maze.cell_count()).map(|i| maze.cell_at(i)).collect();
        let heading = rng.below(4) as u8;

        let (spawn_cell, placements, totem) = match kind {
            ScenarioKind::Labyrinth | ScenarioKind::FindAndReturn => {
                let (spawn, far) = pick_far_pair(&maze, &cells, &mut rng)?;
                let placements = if kind == ScenarioKind::Labyrinth {
                    vec![Placement { object: ObjectKind::Exit, cell: far }]
                } else {
                    vec![
                        Placement { object: ObjectKind::Goal, cell: far },
                        Placement { object: ObjectKind::Entry, cell: spawn },
                    ]
                };
                (spawn, placements, None)
            }
            ScenarioKind::OrderedKItem { k } => {
                if cells.len() < k + 1 {
                    return Err(Error::Capacity(format!("{k} items do not fit in a {n}x{n} maze")));
                }
                let mut pool = cells.clone();
                rng.shuffle(&mut pool);
                let spawn = pool[0];
                let placements = pool[1..=k]
                    .iter()
                    .enumerate()
                    .map(|(order, &cell)| Placement { object: ObjectKind::OrderedItem { order }, cell })
                    .collect();
                (spawn, placements, None)
            }
            ScenarioKind::TwoColorCorrelation { .. } => {
                let per_color = two_color_items_per_color(n);
                let center = Cell::new(n / 2, n / 2);
                let mut pool: Vec<Cell> = cells.iter().copied().filter(|&c| c != center).collect();
                if pool.len() < 2 * per_color + 1 {
                    return Err(Error::Capacity(format!("two-color items do not fit in a {n}x{n} maze")));
                }
                let color = totem_color.unwrap_or(if rng.coin() { ItemColor::Red } else { ItemColor::Green });
                rng.shuffle(&mut pool);
                let spawn = pool[0];
                let mut placements = vec![Placement { object: ObjectKind::Totem { color }, cell: center }];
                for (i, &cell) in pool[1..=2 * per_color].iter().enumerate() {
                    let color = if i < per_color { ItemColor::Red } else { ItemColor::Green };
                    placements.push(Placement { object: ObjectKind::ColorItem { color }, cell });
                }
                (spawn, placements, Some(color))
            }
        };

        let cfg = ScenarioConfig {
            kind,
            n,
            config_seed: seed,
            retain_fraction,
            maze,
            spawn: Spawn { cell: spawn_cell, heading },
            placements,
            totem_color: totem,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the placement invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let dist = self.maze.distances_from(self.spawn.cell);
        for p in &self.placements {
            if !self.maze.contains(p.cell) {
                return Err(Error::Consistency(format!("placement {p:?} outside maze")));
            }
            if dist[self.maze.cell_index(p.cell)].is_none() {
                return Err(Error::Consistency(format!("placement {p:?} unreachable from spawn")));
            }
            if p.object == ObjectKind::Entry {
                if p.cell != self.spawn.cell {
                    return Err(Error::Consistency("entry marker must sit on the spawn cell".into()));
                }
                continue;
            }
            if p.cell == self.spawn.cell || !seen.insert(p.cell) {
                return Err(Error::Consistency(format!("placement {p:?} collides")));
            }
        }
        let count = |pred: &dyn Fn(&ObjectKind) -> bool| self.placements.iter().filter(|p| pred(&p.object)).count();
        match self.kind {
            ScenarioKind::Labyrinth => {
                if count(&|o| *o == ObjectKind::Exit) != 1 {
                    return Err(Error::Consistency("labyrinth needs exactly one exit".into()));
                }
            }
            ScenarioKind::FindAndReturn => {
                if count(&|o| *o == ObjectKind::Goal) != 1 || count(&|o| *o == ObjectKind::Entry) != 1 {
                    return Err(Error::Consistency("find-and-return needs one goal and one entry".into()));
                }
            }
            ScenarioKind::OrderedKItem { k } => {
                let mut orders: Vec<usize> = self
                    .placements
                    .iter()
                    .filter_map(|p| match p.object {
                        ObjectKind::OrderedItem { order } => Some(order),
                        _ => None,
                    })
                    .collect();
                orders.sort_unstable();
                if orders != (0..k).collect::<Vec<_>>() {
                    return Err(Error::Consistency(format!("expected {k} ordered items")));
                }
            }
            ScenarioKind::TwoColorCorrelation { .. } => {
                let center = Cell::new(self.n / 2, self.n / 2);
                let totems: Vec<_> = self
                    .placements
                    .iter()
                    .filter(|p| matches!(p.object, ObjectKind::Totem { .. }))
                    .collect();
                if totems.len() != 1 || totems[0].cell != center {
                    return Err(Error::Consistency("two-color needs one central totem".into()));
                }
                let red = count(&|o| *o == ObjectKind::ColorItem { color: ItemColor::Red });
                let green = count(&|o| *o == ObjectKind::ColorItem { color: ItemColor::Green });
                if red != green || red == 0 {
                    return Err(Error::Consistency("two-color needs equal red and green counts".into()));
                }
            }
        }
        Ok(())
    }

    pub fn totem_cell(&self) -> Option<Cell> {
        self.placements
            .iter()
            .find(|p| matches!(p.object, ObjectKind::Totem { .. }))
            .map(|p| p.cell)
    }

    /// Key used to check distinctness across a configuration set.
    fn identity(&self) -> (MazeGrid, Vec<Placement>) {
        (self.maze.clone(), self.placements.clone())
    }
}

pub fn two_color_items_per_color(n: usize) -> usize {
    ((n * n) as f64 * TWO_COLOR_ITEM_DENSITY).round().max(1.0) as usize
}

/// Picks a spawn cell and a target at BFS distance >= n from it.
fn pick_far_pair(maze: &MazeGrid, cells: &[Cell], rng: &mut Rng) -> Result<(Cell, Cell)> {
    let n = maze.n();
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let spawn = cells[rng.index(cells.len())];
        let dist = maze.distances_from(spawn);
        let far: Vec<Cell> = cells
            .iter()
            .copied()
            .filter(|&c| dist[maze.cell_index(c)].is_some_and(|d| d >= n))
            .collect();
        if !far.is_empty() {
            return Ok((spawn, far[rng.index(far.len())]));
        }
    }
    Err(Error::Capacity(format!(
        "no cell at distance >= {n} from any sampled spawn"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Parse(format!("unknown split {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Disjoint train and test configurations derived from one master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSet {
    pub format_version: u32,
    pub kind: ScenarioKind,
    pub n: usize,
    pub master_seed: u64,
    pub train: Vec<ScenarioConfig>,
    pub test: Vec<ScenarioConfig>,
}

impl ConfigSet {
    pub fn split(&self, split: Split) -> &[ScenarioConfig] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// True when no `(maze, placements)` pair appears twice across both splits.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        self.train.iter().chain(&self.test).all(|c| seen.insert(c.identity()))
    }

    /// Copy keeping only the first `n_train` training configurations.
    pub fn with_train_prefix(&self, n_train: usize) -> ConfigSet {
        ConfigSet {
            train: self.train[..n_train.min(self.train.len())].to_vec(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: ConfigSet = serde_json::from_str(text)?;
        if set.format_version != CONFIG_SET_VERSION {
            return Err(Error::Config(format!(
                "unsupported config set version {}",
                set.format_version
            )));
        }
        for cfg in set.train.iter().chain(&set.test) {
            cfg.validate()?;
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Builds a configuration set. Configuration `i` of split `s` uses seed
/// `derive_seed(master_seed, &[s, i, attempt])` where `s` is 0 for train and
/// 1 for test, and `attempt` counts rejections of duplicates.
pub fn build_config_set(
    kind: ScenarioKind,
    n: usize,
    n_train: usize,
    n_test: usize,
    master_seed: u64,
) -> Result<ConfigSet> {
    let mut seen = HashSet::new();
    let mut make_split = |split: Split, count: usize| -> Result<Vec<ScenarioConfig>> {
        let colors = balanced_colors(master_seed, split, count);
        let mut out = Vec::with_capacity(count);
        for index in 0..count {
            let mut accepted = None;
            for attempt in 0..MAX_DISTINCT_ATTEMPTS {
                let seed = derive_seed(master_seed, &[split.tag(), index as u64, attempt]);
                let cfg = ScenarioConfig::generate(kind, n, seed, colors.get(index).copied().flatten())?;
                if seen.insert(cfg.identity()) {
                    accepted = Some(cfg);
                    break;
                }
            }
            out.push(accepted.ok_or_else(|| {
                Error::Capacity(format!(
                    "could not find a distinct {split} configuration #{index} for {kind} n={n}"
                ))
            })?);
        }
        Ok(out)
    };
    let train = make_split(Split::Train, n_train)?;
    let test = make_split(Split::Test, n_test)?;
    Ok(ConfigSet {
        format_version: CONFIG_SET_VERSION,
        kind,
        n,
        master_seed,
        train,
        test,
    })
}

/// Two-color sets alternate totem colors through a seeded shuffle so both
/// colors appear equally often (within one for odd counts).
fn balanced_colors(master_seed: u64, split: Split, count: usize) -> Vec<Option<ItemColor>> {
    let mut colors: Vec<Option<ItemColor>> = (0..count)
        .map(|i| Some(if i % 2 == 0 { ItemColor::Red } else { ItemColor::Green }))
        .collect();
    Rng::derive(master_seed, &[split.tag(), 0x434f_4c52]).shuffle(&mut colors);
    colors
}

/// Something the agent touched during one decision step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    /// Touched an uncollected pickup placement.
    Pickup(usize),
    /// Entered an exit or entry zone.
    Arrival(usize),
}

impl Event {
    pub fn placement(&self) -> usize {
        match *self {
            Event::Pickup(p) | Event::Arrival(p) => p,
        }
    }
}

/// How an episode ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    WrongOrder,
    HealthDepleted,
    StepLimit,
}

/// Mutable per-episode state; owned by one environment.
#[derive(Clone, Debug)]
pub struct EpisodeState {
    pub pose: Pose,
    pub t: u32,
    /// Per-placement collected flags (pickups only).
    pub collected: Vec<bool>,
    /// Current cell of every placement; two-color items move on respawn.
    pub positions: Vec<Cell>,
    /// Step at which a collected two-color item reappears.
    pub respawn_at: Vec<Option<u32>>,
    pub health: f64,
    pub done: bool,
    pub cumulative_return: f64,
    /// Next ordered item expected.
    pub next_order: usize,
    /// Find-and-return: goal touched.
    pub found: bool,
    pub correct_pickups: u32,
    pub wrong_pickups: u32,
    pub termination: Option<Termination>,
    pub rng: Rng,
}

impl EpisodeState {
    pub fn new(cfg: &ScenarioConfig, episode_seed: u64) -> Self {
        let count = cfg.placements.len();
        EpisodeState {
            pose: cfg.spawn.pose(),
            t: 0,
            collected: vec![false; count],
            positions: cfg.placements.iter().map(|p| p.cell).collect(),
            respawn_at: vec![None; count],
            health: if cfg.kind.has_health() { INITIAL_HEALTH } else { 0.0 },
            done: false,
            cumulative_return: 0.0,
            next_order: 0,
            found: false,
            correct_pickups: 0,
            wrong_pickups: 0,
            termination: None,
            rng: Rng::derive(episode_seed, &[0x4550_4953]),
        }
    }

    pub fn success(&self) -> bool {
        self.termination == Some(Termination::Success)
    }

    /// Whether placement `p` is currently present in the world.
    pub fn is_present(&self, cfg: &ScenarioConfig, p: usize) -> bool {
        !cfg.placements[p].object.is_pickup() || !self.collected[p]
    }
}

/// Result of one scenario decision step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

/// Applies one decision step of task rules to `st` given the events gathered
/// during that step's physics ticks. The per-step penalty is charged on
/// every step, terminal steps included.
pub fn scenario_step(cfg: &ScenarioConfig, st: &mut EpisodeState, events: &[Event]) -> Result<StepOutcome> {
    if st.done {
        return Err(Error::EpisodeDone);
    }
    for ev in events {
        let p = ev.placement();
        let placement = cfg
            .placements
            .get(p)
            .ok_or_else(|| Error::Consistency(format!("event {ev:?} references unknown placement")))?;
        let valid = match ev {
            Event::Pickup(_) => placement.object.is_pickup() && !st.collected[p],
            Event::Arrival(_) => placement.object.is_zone(),
        };
        if !valid {
            return Err(Error::Consistency(format!("event {ev:?} does not apply to {placement:?}")));
        }
    }

    st.t += 1;
    let mut reward = -cfg.kind.step_penalty();
    let mut done = false;

    for ev in events {
        if done {
            break;
        }
        let p = ev.placement();
        match (cfg.kind, cfg.placements[p].object) {
            (ScenarioKind::Labyrinth, ObjectKind::Exit) => {
                reward += LABYRINTH_EXIT_REWARD;
                st.termination = Some(Termination::Success);
                done = true;
            }
            (ScenarioKind::FindAndReturn, ObjectKind::Goal) => {
                reward += FIND_REWARD;
                st.collected[p] = true;
                st.found = true;
            }
            (ScenarioKind::FindAndReturn, ObjectKind::Entry) => {
                if st.found {
                    reward += RETURN_REWARD;
                    st.termination = Some(Termination::Success);
                    done = true;
                }
            }
            (ScenarioKind::OrderedKItem { k }, ObjectKind::OrderedItem { order }) => {
                st.collected[p] = true;
                if order == st.next_order {
                    reward += ORDERED_ITEM_REWARD;
                    st.next_order += 1;
                    st.correct_pickups += 1;
                    if st.next_order == k {
                        st.termination = Some(Termination::Success);
                        done = true;
                    }
                } else {
                    reward += WRONG_ORDER_PENALTY;
                    st.wrong_pickups += 1;
                    st.termination = Some(Termination::WrongOrder);
                    done = true;
                }
            }
            (ScenarioKind::TwoColorCorrelation { .. }, ObjectKind::ColorItem { color }) => {
                st.collected[p] = true;
                st.respawn_at[p] = Some(st.t + RESPAWN_DELAY);
                if Some(color) == cfg.totem_color {
                    reward += TWO_COLOR_ITEM_REWARD;
                    st.health += HEALTH_PER_ITEM;
                    st.correct_pickups += 1;
                } else {
                    st.health -= HEALTH_PER_ITEM;
                    st.wrong_pickups += 1;
                }
            }
            (kind, object) => {
                return Err(Error::Consistency(format!("{object:?} does not belong to {kind}")));
            }
        }
    }

    if cfg.kind.has_health() {
        st.health -= HEALTH_DECAY;
        if st.health < 0.0 {
            st.termination = Some(Termination::HealthDepleted);
            done = true;
        } else {
            respawn_items(cfg, st);
        }
    }
    if !done && st.t >= STEP_LIMIT {
        st.termination = Some(if cfg.kind.has_health() {
            Termination::Success
        } else {
            Termination::StepLimit
        });
        done = true;
    }
    st.cumulative_return += reward;
    st.done = done;
    Ok(StepOutcome { reward, done })
}

/// Moves due two-color items to a random free cell: not the totem cell, not
/// the agent's cell, and not holding another present item. An item with no
/// free cell waits for the next step.
fn respawn_items(cfg: &ScenarioConfig, st: &mut EpisodeState) {
    let n = cfg.n;
    let agent = Cell::new(
        (st.pose.x.floor().max(0.0) as usize).min(n - 1),
        (st.pose.y.floor().max(0.0) as usize).min(n - 1),
    );
    for p in 0..cfg.placements.len() {
        if !st.respawn_at[p].is_some_and(|due| due <= st.t) {
            continue;
        }
        let occupied = |c: Cell, st: &EpisodeState| {
            c == agent
                || cfg
                    .placements
                    .iter()
                    .enumerate()
                    .any(|(q, pl)| st.positions[q] == c && (!pl.object.is_pickup() || !st.collected[q]))
        };
        let free: Vec<Cell> = (0..n * n)
            .map(|i| cfg.maze.cell_at(i))
            .filter(|&c| !occupied(c, st))
            .collect();
        if free.is_empty() {
            continue;
        }
        let cell = free[st.rng.index(free.len())];
        st.positions[p] = cell;
        st.collected[p] = false;
        st.respawn_at[p] = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ScenarioKind, n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig::generate(kind, n, seed, None).unwrap()
    }

    fn run_idle(cfg: &ScenarioConfig, st: &mut EpisodeState) -> u32 {
        while !st.done {
            scenario_step(cfg, st, &[]).unwrap();
        }
        st.t
    }

    #[test]
    fn labyrinth_exit_at_step_100() {
        let c = cfg(ScenarioKind::Labyrinth, 7, 1);
        let mut st = EpisodeState::new(&c, 0);
        for _ in 0..99 {
            assert!(!scenario_step(&c, &mut st, &[]).unwrap().done);
        }
        let out = scenario_step(&c, &mut st, &[Event::Arrival(0)]).unwrap();
        assert!(out.done);
        assert!(st.success());
        assert!((st.cumulative_return - 0.99).abs() < 1e-12);
    }

    #[test]
    fn labyrinth_times_out() {
        let c = cfg(ScenarioKind::Labyrinth, 5, 2);
        let mut st = EpisodeState::new(&c, 0);
        assert_eq!(run_idle(&c, &mut st), STEP_LIMIT);
        assert_eq!(st.termination, Some(Termination::StepLimit));
        assert!((st.cumulative_return + 0.21).abs() < 1e-9);
    }

    #[test]
    fn done_is_absorbing() {
        let c = cfg(ScenarioKind::Labyrinth, 5, 3);
        let mut st = EpisodeState::new(&c, 0);
        scenario_step(&c, &mut st, &[Event::Arrival(0)]).unwrap();
        assert!(matches!(scenario_step(&c, &mut st, &[]), Err(Error::EpisodeDone)));
    }

    #[test]
    fn unknown_placement_is_inconsistent() {
        let c = cfg(ScenarioKind::Labyrinth, 5, 3);
        let mut st = EpisodeState::new(&c, 0);
        assert!(matches!(
            scenario_step(&c, &mut st, &[Event::Pickup(9)]),
            Err(Error::Consistency(_))
        ));
        assert!(matches!(
            scenario_step(&c, &mut st, &[Event::Pickup(0)]),
            Err(Error::Consistency(_))
        ));
        assert_eq!(st.t, 0);
    }

    #[test]
    fn ordered_wrong_first_pickup() {
        let c = cfg(ScenarioKind::OrderedKItem { k: 4 }, 5, 4);
        let mut st = EpisodeState::new(&c, 0);
        let second = c
            .placements
            .iter()
            .position(|p| p.object == ObjectKind::OrderedItem { order: 1 })
            .unwrap();
        let out = scenario_step(&c, &mut st, &[Event::Pickup(second)]).unwrap();
        assert!(out.done);
        assert!((out.reward - (-0.25 - 0.0001)).abs() < 1e-12);
        assert_eq!(st.termination, Some(Termination::WrongOrder));
    }

    #[test]
    fn ordered_all_in_order() {
        let c = cfg(ScenarioKind::OrderedKItem { k: 3 }, 5, 5);
        let mut st = EpisodeState::new(&c, 0);
        for order in 0..3 {
            let p = c
                .placements
                .iter()
                .position(|p| p.object == ObjectKind::OrderedItem { order })
                .unwrap();
            scenario_step(&c, &mut st, &[Event::Pickup(p)]).unwrap();
        }
        assert!(st.done && st.success());
        assert!((st.cumulative_return - (1.5 - 3.0 * 0.0001)).abs() < 1e-12);
    }

    #[test]
    fn find_and_return_needs_the_goal_first() {
        let c = cfg(ScenarioKind::FindAndReturn, 5, 6);
        let goal = c.placements.iter().position(|p| p.object == ObjectKind::Goal).unwrap();
        let entry = c.placements.iter().position(|p| p.object == ObjectKind::Entry).unwrap();
        let mut st = EpisodeState::new(&c, 0);
        let out = scenario_step(&c, &mut st, &[Event::Arrival(entry)]).unwrap();
        assert!(!out.done);
        scenario_step(&c, &mut st, &[Event::Pickup(goal)]).unwrap();
        assert!(st.found);
        let out = scenario_step(&c, &mut st, &[Event::Arrival(entry)]).unwrap();
        assert!(out.done && st.success());
        assert!((st.cumulative_return - (1.0 - 3.0 * 0.0001)).abs() < 1e-12);
    }

    #[test]
    fn two_color_health_decay() {
        let c = cfg(ScenarioKind::TwoColorCorrelation { complexity: 1 }, 5, 7);
        let mut st = EpisodeState::new(&c, 0);
        for t in 1..=100 {
            let out = scenario_step(&c, &mut st, &[]).unwrap();
            assert!(!out.done);
            assert_eq!(st.health, 100.0 - t as f64);
        }
        let out = scenario_step(&c, &mut st, &[]).unwrap();
        assert!(out.done);
        assert_eq!(st.t, 101);
        assert_eq!(st.health, -1.0);
        assert_eq!(st.termination, Some(Termination::HealthDepleted));
    }

    #[test]
    fn two_color_items_respawn_after_delay() {
        let c = cfg(ScenarioKind::TwoColorCorrelation { complexity: 1 }, 5, 8);
        let mut st = EpisodeState::new(&c, 1);
        let item = c
            .placements
            .iter()
            .position(|p| p.object == ObjectKind::ColorItem { color: c.totem_color.unwrap() })
            .unwrap();
        let out = scenario_step(&c, &mut st, &[Event::Pickup(item)]).unwrap();
        assert!((out.reward - (0.1 - 0.01)).abs() < 1e-12);
        assert_eq!(st.health, 124.0);
        for _ in 0..RESPAWN_DELAY - 1 {
            scenario_step(&c, &mut st, &[]).unwrap();
            assert!(st.collected[item]);
        }
        scenario_step(&c, &mut st, &[]).unwrap();
        assert!(!st.collected[item]);
        assert_ne!(Some(st.positions[item]), c.totem_cell());
    }

    #[test]
    fn config_invariants_hold() {
        for seed in 0..40 {
            for kind in [
                ScenarioKind::Labyrinth,
                ScenarioKind::FindAndReturn,
                ScenarioKind::OrderedKItem { k: 4 },
                ScenarioKind::TwoColorCorrelation { complexity: 3 },
            ] {
                let c = cfg(kind, 5, seed);
                c.validate().unwrap();
                if let Some(goal) = c.placements.iter().find(|p| matches!(p.object, ObjectKind::Exit | ObjectKind::Goal)) {
                    let d = crate::maze::shortest_path_length(&c.maze, c.spawn.cell, goal.cell).unwrap().unwrap();
                    assert!(d >= 5);
                }
            }
        }
    }

    #[test]
    fn empty_config_set() {
        let set = build_config_set(ScenarioKind::FindAndReturn, 5, 0, 0, 3).unwrap();
        assert!(set.train.is_empty() && set.test.is_empty());
    }

    #[test]
    fn tiny_mazes_run_out_of_distinct_configs() {
        let err = build_config_set(ScenarioKind::OrderedKItem { k: 1 }, 2, 40, 0, 1).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)), "{err}");
        assert!(matches!(
            ScenarioConfig::generate(ScenarioKind::Labyrinth, 1, 0, None),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn config_set_json_round_trip() {
        let set = build_config_set(ScenarioKind::TwoColorCorrelation { complexity: 5 }, 5, 6, 2, 11).unwrap();
        let back = ConfigSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
        let bumped = set.to_json().unwrap().replacen("\"format_version\": 1", "\"format_version\": 9", 1);
        assert!(matches!(ConfigSet::from_json(&bumped), Err(Error::Config(_))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(ScenarioKind::parse("labyrinth").unwrap(), ScenarioKind::Labyrinth);
        assert_eq!(ScenarioKind::parse("ordered-k-item:6").unwrap(), ScenarioKind::OrderedKItem { k: 6 });
        assert_eq!(
            ScenarioKind::parse("two-color:7").unwrap(),
            ScenarioKind::TwoColorCorrelation { complexity: 7 }
        );
        for k in [ScenarioKind::FindAndReturn, ScenarioKind::OrderedKItem { k: 2 }] {
            assert_eq!(ScenarioKind::parse(&k.to_string()).unwrap(), k);
        }
        assert!(ScenarioKind::parse("doom").is_err());
    }
}
