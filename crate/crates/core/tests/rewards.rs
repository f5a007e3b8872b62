mod support;

use proptest::prelude::*;
use raymaze_core::rng::Rng;
use raymaze_core::scenario::{scenario_step, ItemColor, ObjectKind, Termination};
use raymaze_core::{EpisodeState, Event, ScenarioConfig, ScenarioKind};
use support::{check_script, play_script, random_config};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn scripted_returns_match_closed_form(kind in 0usize..4, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let cfg = random_config(kind, &mut rng);
        let script = play_script(&cfg, &mut rng);
        prop_assert_eq!(check_script(&cfg, &script), Ok(()));
    }
}

fn ordered(k: usize) -> ScenarioConfig {
    ScenarioConfig::generate(ScenarioKind::OrderedKItem { k }, 5, 9, None).unwrap()
}

fn item(cfg: &ScenarioConfig, order: usize) -> usize {
    cfg.placements.iter().position(|p| p.object == ObjectKind::OrderedItem { order }).unwrap()
}

#[test]
fn wrong_first_item_ends_with_quarter_penalty() {
    let cfg = ordered(4);
    let mut st = EpisodeState::new(&cfg, 0);
    let out = scenario_step(&cfg, &mut st, &[Event::Pickup(item(&cfg, 1))]).unwrap();
    assert!(out.done);
    assert!((out.reward - (-0.25 - 0.0001)).abs() < 1e-15);
    assert_eq!(st.termination, Some(Termination::WrongOrder));
}

#[test]
fn events_after_a_terminal_event_are_ignored() {
    let cfg = ordered(2);
    let mut st = EpisodeState::new(&cfg, 0);
    let out = scenario_step(&cfg, &mut st, &[Event::Pickup(item(&cfg, 1)), Event::Pickup(item(&cfg, 0))]).unwrap();
    assert!(out.done);
    assert!((out.reward + 0.2501).abs() < 1e-15);
}

#[test]
fn all_items_in_order_succeed() {
    let cfg = ordered(4);
    let mut st = EpisodeState::new(&cfg, 0);
    for order in 0..4 {
        scenario_step(&cfg, &mut st, &[]).unwrap();
        scenario_step(&cfg, &mut st, &[Event::Pickup(item(&cfg, order))]).unwrap();
    }
    assert!(st.done && st.success());
    assert!((st.cumulative_return - (2.0 - 8.0 * 0.0001)).abs() < 1e-12);
}

#[test]
fn two_color_health_decays_to_termination_at_101() {
    let cfg = ScenarioConfig::generate(ScenarioKind::TwoColorCorrelation { complexity: 3 }, 5, 4, None).unwrap();
    let mut st = EpisodeState::new(&cfg, 0);
    let mut t = 0;
    while !scenario_step(&cfg, &mut st, &[]).unwrap().done {
        t += 1;
        assert_eq!(st.health, 100.0 - t as f64);
    }
    assert_eq!(st.t, 101);
    assert_eq!(st.health, -1.0);
    assert_eq!(st.termination, Some(Termination::HealthDepleted));
}

#[test]
fn two_color_items_respawn_after_delay() {
    let cfg = ScenarioConfig::generate(ScenarioKind::TwoColorCorrelation { complexity: 3 }, 5, 4, Some(ItemColor::Red)).unwrap();
    let p = cfg
        .placements
        .iter()
        .position(|pl| pl.object == ObjectKind::ColorItem { color: ItemColor::Red })
        .unwrap();
    let mut st = EpisodeState::new(&cfg, 0);
    let out = scenario_step(&cfg, &mut st, &[Event::Pickup(p)]).unwrap();
    assert!((out.reward - (0.1 - 0.01)).abs() < 1e-15);
    assert_eq!(st.health, 124.0);
    for _ in 0..31 {
        scenario_step(&cfg, &mut st, &[]).unwrap();
        assert!(st.collected[p]);
    }
    scenario_step(&cfg, &mut st, &[]).unwrap();
    assert!(!st.collected[p]);
    assert_ne!(st.positions[p], cfg.totem_cell().unwrap());
}

#[test]
fn invalid_events_are_consistency_errors() {
    let cfg = ordered(2);
    let mut st = EpisodeState::new(&cfg, 0);
    assert!(scenario_step(&cfg, &mut st, &[Event::Pickup(99)]).is_err());
    assert!(scenario_step(&cfg, &mut st, &[Event::Arrival(0)]).is_err());
    assert_eq!(st.t, 0);
    scenario_step(&cfg, &mut st, &[Event::Pickup(item(&cfg, 0))]).unwrap();
    assert!(scenario_step(&cfg, &mut st, &[Event::Pickup(item(&cfg, 0))]).is_err());
}

#[test]
fn done_is_absorbing() {
    let cfg = ordered(2);
    let mut st = EpisodeState::new(&cfg, 0);
    scenario_step(&cfg, &mut st, &[Event::Pickup(item(&cfg, 1))]).unwrap();
    let before = st.cumulative_return;
    assert!(scenario_step(&cfg, &mut st, &[]).is_err());
    assert_eq!(st.cumulative_return, before);
}
