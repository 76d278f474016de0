use forage_core::agents::{softmax_choice, utility_field};
use forage_core::view::VisibleForager;
use forage_core::{
    decide_action, init_game, observer_view, preset, validate_config, AgentMemory, Cell, Color, Condition, ForagerId,
    Grid, ObserverView, SimConfig, StrategyParams,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const COLORS: [Color; 5] = [Color::Purple, Color::Blue, Color::Yellow, Color::Orange, Color::Red];

fn cell() -> impl Strategy<Value = Cell> {
    (0..20i32, 0..20i32).prop_map(|(x, y)| Cell::new(x, y))
}

fn params() -> impl Strategy<Value = StrategyParams> {
    (0..5usize, 0.0..2.0f64, 0.0..2.0f64, prop::bool::ANY).prop_map(|(i, w, t, cold)| {
        let mut p = preset(["random", "private", "food_greedy", "social", "scrounger"][i]).unwrap();
        p.w_food += w;
        p.w_succ += w / 2.0;
        p.temperature = if cold { 0.0 } else { t + 0.05 };
        p
    })
}

fn view(me: Cell, food: Vec<(Cell, u32)>, others: Vec<(Cell, usize)>) -> ObserverView {
    let mut foragers = vec![VisibleForager {
        id: ForagerId(0),
        icon: "heart".into(),
        position: me,
        color: Color::Purple,
    }];
    for (i, (c, color)) in others.into_iter().enumerate() {
        foragers.push(VisibleForager {
            id: ForagerId(i as u32 + 1),
            icon: format!("icon{i}"),
            position: c,
            color: COLORS[color],
        });
    }
    let mut food = food;
    food.sort();
    food.dedup_by_key(|f| f.0);
    ObserverView {
        observer: ForagerId(0),
        tick: 10,
        t: 1.0,
        grid: Grid::new(20, 20),
        position: me,
        score: 0,
        food,
        markers: vec![],
        foragers,
    }
}

fn memory(history: Vec<(Cell, f64)>) -> AgentMemory {
    let mut m = AgentMemory::default();
    m.reward_history.extend(history);
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_inputs_same_action(
        me in cell(),
        food in prop::collection::vec((cell(), 1..5u32), 0..10),
        others in prop::collection::vec((cell(), 0..5usize), 0..5),
        history in prop::collection::vec((cell(), 0.1..5.0f64), 0..6),
        p in params(),
        seed in any::<u64>(),
    ) {
        let v = view(me, food, others);
        let mut m1 = memory(history.clone());
        let mut m2 = memory(history);
        let a = decide_action(&v, &mut m1, &p, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = decide_action(&v, &mut m2, &p, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
        prop_assert_eq!(m1.last_target, m2.last_target);
    }

    /// Moving the other foragers around a real world must not change what an
    /// agent does when foragers are hidden.
    #[test]
    fn hidden_foragers_cannot_matter(
        moves in prop::collection::vec(prop::collection::vec(cell(), 4), 2),
        p in params(),
        world_seed in 0..50u64,
        seed in any::<u64>(),
    ) {
        let cfg = validate_config(SimConfig {
            n_foragers: 5,
            seed: world_seed,
            condition: Condition { food_visible: true, foragers_visible: false, success_indicated: false },
            ..SimConfig::default()
        }).unwrap();
        let mut state = init_game(&cfg).unwrap();
        for _ in 0..3 {
            state.spawn_food_tick(&cfg);
        }
        let mut actions = Vec::new();
        for placement in &moves {
            for (f, c) in state.foragers.iter_mut().skip(1).zip(placement) {
                f.position = *c;
            }
            let v = observer_view(&state, &cfg, ForagerId(0)).unwrap();
            prop_assert_eq!(v.others().count(), 0);
            let mut m = AgentMemory::default();
            actions.push(decide_action(&v, &mut m, &p, &mut ChaCha8Rng::seed_from_u64(seed)));
        }
        prop_assert_eq!(actions[0], actions[1]);
    }

    #[test]
    fn constant_shift_keeps_draws(
        utilities in prop::collection::vec(-5.0..5.0f64, 1..40),
        shift in -50.0..50.0f64,
        temperature in prop_oneof![Just(0.0), 0.05..3.0f64],
        seed in any::<u64>(),
    ) {
        // shifts that are exact in binary so the comparison is not about rounding
        let shift = (shift * 4.0).round() / 4.0;
        let utilities: Vec<f64> = utilities.iter().map(|u| (u * 64.0).round() / 64.0).collect();
        let shifted: Vec<f64> = utilities.iter().map(|u| u + shift).collect();
        let a = softmax_choice(&utilities, temperature, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = softmax_choice(&shifted, temperature, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
        if temperature == 0.0 {
            let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(utilities[a], max);
        }
    }

    #[test]
    fn cold_agents_target_a_best_cell(
        me in cell(),
        food in prop::collection::vec((cell(), 1..5u32), 0..10),
        others in prop::collection::vec((cell(), 0..5usize), 0..5),
        p in params(),
        seed in any::<u64>(),
    ) {
        let p = StrategyParams { temperature: 0.0, ..p };
        let v = view(me, food, others);
        let mut m = AgentMemory::default();
        decide_action(&v, &mut m, &p, &mut ChaCha8Rng::seed_from_u64(seed));
        let field = utility_field(&v, &AgentMemory::default(), &p);
        let best = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let target = m.last_target.unwrap();
        prop_assert_eq!(field[v.grid.index(target)], best);
    }

    #[test]
    fn history_mass_never_grows_without_collections(
        history in prop::collection::vec((cell(), 0.0..10.0f64), 0..20),
        decay in 0.01..=1.0f64,
        ticks in 1..50usize,
    ) {
        let p = StrategyParams { history_decay: decay, ..StrategyParams::default() };
        let v = view(Cell::new(0, 0), vec![], vec![]);
        let mut m = memory(history);
        let mut last = m.total_mass();
        for _ in 0..ticks {
            m.update(&v, 0, &p);
            let now = m.total_mass();
            prop_assert!(now <= last);
            prop_assert!(m.reward_history.values().all(|&x| x >= 0.0));
            last = now;
        }
    }
}

#[test]
fn scrounger_prefers_more_successful_company() {
    // same distance, one red and one blue neighbor: red wins under argmax
    let me = Cell::new(10, 10);
    let v = view(me, vec![], vec![(Cell::new(13, 10), 4), (Cell::new(7, 10), 1)]);
    let p = StrategyParams {
        temperature: 0.0,
        ..preset("scrounger").unwrap()
    };
    for seed in 0..20 {
        let mut m = AgentMemory::default();
        decide_action(&v, &mut m, &p, &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(m.last_target, Some(Cell::new(13, 10)));
    }
}
