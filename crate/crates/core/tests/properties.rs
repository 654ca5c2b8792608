use std::f64::consts::PI;

use proptest::prelude::*;
use qwgame::dynamics::{evolve, StrategyProfile, WalkConfig};
use qwgame::equilibrium::{
    analyze, jacobian_at, learn, EquilibriumOptions, FnGame, PayoffModel, StrategyGrid, WalkGame,
};
use qwgame::games::{payoff, GameSpec};
use qwgame::hilbert::{measure_joint, Boundary, CoinState, LatticeGeometry};
use qwgame::interactions::{InteractionKind, InteractionSpec};
use qwgame::perturbation::{collision_weight, first_order_slope, g_estimate, DEFAULT_SCHEDULE};

fn lattice(size: usize, reflecting: bool) -> LatticeGeometry {
    LatticeGeometry::new(size, if reflecting { Boundary::Reflecting } else { Boundary::Periodic }).unwrap()
}

fn preset(i: usize) -> CoinState {
    [
        CoinState::right(),
        CoinState::left(),
        CoinState::plus(),
        CoinState::minus(),
        CoinState::plus_i(),
        CoinState::minus_i(),
    ][i]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn race_is_antisymmetric_under_player_swap(
        reflecting in any::<bool>(),
        steps in 1usize..=8,
        ta in 0.0..=PI,
        tb in 0.0..=PI,
        ia in 0usize..6,
        ib in 0usize..6,
        kind in prop_oneof![
            Just(InteractionKind::None),
            Just(InteractionKind::CollisionPhase),
            Just(InteractionKind::AttractiveCollision),
            Just(InteractionKind::LongRange),
            Just(InteractionKind::CoinDependent),
        ],
        phi in -3.0..3.0f64,
    ) {
        let g = lattice(2 * steps + 3, reflecting);
        let spec = InteractionSpec { range_exponent: Some(1.5), ..InteractionSpec::with_kind(kind, phi) };
        let forward = WalkConfig::new(g, steps).with_coins(preset(ia), preset(ib)).with_interaction(spec);
        let backward = WalkConfig::new(g, steps).with_coins(preset(ib), preset(ia)).with_interaction(spec);
        let u = |cfg: &WalkConfig, a: f64, b: f64| {
            payoff(&measure_joint(&evolve(cfg, StrategyProfile::new(a, b).unwrap(), 0).unwrap()), &GameSpec::race()).unwrap().u_a
        };
        prop_assert!((u(&forward, ta, tb) + u(&backward, tb, ta)).abs() < 1e-10);
    }

    #[test]
    fn global_noise_leaves_statistics_unchanged(
        reflecting in any::<bool>(),
        steps in 1usize..=10,
        ta in 0.0..=PI,
        tb in 0.0..=PI,
        phi in -3.0..3.0f64,
        sigma in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let g = lattice(2 * steps + 1, reflecting);
        let p = StrategyProfile::new(ta, tb).unwrap();
        let clean = WalkConfig::new(g, steps).with_interaction(InteractionSpec::collision(phi));
        let noisy = clean.with_interaction(InteractionSpec::noisy(phi, sigma));
        let a = measure_joint(&evolve(&clean, p, 0).unwrap());
        let b = measure_joint(&evolve(&noisy, p, seed).unwrap());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sum_games_are_exact(
        steps in 1usize..=8,
        ta in 0.0..=PI,
        tb in 0.0..=PI,
        phi in -3.0..3.0f64,
        tug in any::<bool>(),
    ) {
        let cfg = WalkConfig::new(lattice(2 * steps + 1, false), steps).with_interaction(InteractionSpec::collision(phi));
        let game = if tug { GameSpec::tug_of_war() } else { GameSpec::race() };
        let pt = payoff(&measure_joint(&evolve(&cfg, StrategyProfile::new(ta, tb).unwrap(), 0).unwrap()), &game).unwrap();
        prop_assert_eq!(pt.u_a + pt.u_b, 0.0);
    }

    #[test]
    fn collision_weight_is_bounded(steps in 1usize..=12, ta in 0.0..=PI, tb in 0.0..=PI, ia in 0usize..6, ib in 0usize..6) {
        let cfg = WalkConfig::new(lattice(2 * steps + 1, false), steps).with_coins(preset(ia), preset(ib));
        let w = collision_weight(&cfg, StrategyProfile::new(ta, tb).unwrap(), 0).unwrap();
        prop_assert!((-1e-12..=steps as f64 + 1e-12).contains(&w));
    }
}

#[test]
fn first_order_term_swaps_sign_with_players() {
    let g = lattice(31, false);
    let cfg = WalkConfig::new(g, 10).with_interaction(InteractionSpec::collision(0.01));
    let forward = cfg.with_coins(CoinState::right(), CoinState::plus_i());
    let backward = cfg.with_coins(CoinState::plus_i(), CoinState::right());
    for (a, b) in [(1.0, 2.0), (0.4, 2.9), (PI / 3.0, 2.0 * PI / 3.0)] {
        let x = g_estimate(&forward, &GameSpec::race(), StrategyProfile::new(a, b).unwrap(), 0).unwrap();
        let y = g_estimate(&backward, &GameSpec::race(), StrategyProfile::new(b, a).unwrap(), 0).unwrap();
        assert!(x.abs() > 1e-3);
        assert!((x + y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn real_coins_have_no_first_order_term() {
    let cfg = WalkConfig::new(lattice(31, false), 10).with_interaction(InteractionSpec::collision(1.0));
    let est = first_order_slope(&cfg, &GameSpec::race(), StrategyProfile::new(1.0, 2.0).unwrap(), &DEFAULT_SCHEDULE, 0)
        .unwrap();
    assert!(est.g.abs() < 1e-3, "{}", est.g);
    assert!(est.table[0].slope.abs() > 10.0 * est.g.abs());
    assert!(est.perturbative, "{:?}", est.note);
    for row in est.table.iter().filter_map(|r| r.ratio) {
        assert!((row - 0.5).abs() < 0.05);
    }
}

#[test]
fn collision_weight_examples() {
    let g = lattice(15, false);
    let together = WalkConfig::new(g, 20);
    let w = collision_weight(&together, StrategyProfile::new(0.0, 0.0).unwrap(), 0).unwrap();
    assert_eq!(w, 20.0);
    // opposite movers meet again once their separation 2t wraps the ring
    let apart = together.with_coins(CoinState::right(), CoinState::left());
    let w = collision_weight(&apart, StrategyProfile::new(0.0, 0.0).unwrap(), 0).unwrap();
    assert_eq!(w, 1.0);
    let short = WalkConfig::new(g, 7).with_coins(CoinState::right(), CoinState::left());
    assert_eq!(collision_weight(&short, StrategyProfile::new(0.0, 0.0).unwrap(), 0).unwrap(), 0.0);
}

#[test]
fn synthetic_jacobian_is_recovered() {
    let c = PI / 2.0;
    let model = FnGame(move |a: f64, b: f64| {
        let (x, y) = (a - c, b - c);
        (-x * x + x * y, -y * y + x * y)
    });
    let opts = EquilibriumOptions::default();
    let j = jacobian_at(&model, c, c, &opts).unwrap();
    let want = [[-2.0, 1.0], [1.0, -2.0]];
    for (got, want) in j.matrix.iter().flatten().zip(want.iter().flatten()) {
        assert!((got - want).abs() < 1e-4);
    }
    assert!(j.is_stable());
    let mut ev: Vec<f64> = j.eigenvalues.iter().map(|e| e.re).collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] + 3.0).abs() < 1e-4 && (ev[1] + 1.0).abs() < 1e-4);
    assert!((j.spectral_radius - (1.0 - 0.05)).abs() < 1e-4);

    let (_, report) = analyze(&model, StrategyGrid::new(21).unwrap(), &opts).unwrap();
    let interior: Vec<_> = report.stationary_points.iter().filter(|p| p.is_interior()).collect();
    assert_eq!(interior.len(), 1);
    assert!((interior[0].theta_a - c).abs() < 1e-3 && (interior[0].theta_b - c).abs() < 1e-3);

    let run = learn(&model, StrategyProfile::new(c + 0.3, c - 0.2).unwrap(), &opts).unwrap();
    assert!(run.converged);
    assert!((run.last().theta_a - c).abs() < 1e-2 && (run.last().theta_b - c).abs() < 1e-2);
}

#[test]
fn growing_oscillation_is_diagnosed() {
    let model = FnGame(|a: f64, b: f64| {
        let (x, y) = (a - PI / 2.0, b - PI / 2.0);
        (-25.0 * x * x, -25.0 * y * y)
    });
    let run = learn(&model, StrategyProfile::new(PI / 2.0 + 0.01, PI / 2.0).unwrap(), &EquilibriumOptions::default())
        .unwrap();
    assert!(!run.converged);
    assert!(run.diagnostic.unwrap().contains("oscillation"));
}

#[test]
fn tug_of_war_interior_point_is_stable() {
    let cfg = WalkConfig::new(lattice(15, false), 20).with_interaction(InteractionSpec::collision(PI));
    let model = WalkGame::new(cfg, GameSpec::tug_of_war(), 7);
    let opts = EquilibriumOptions::default();
    let (_, report) = analyze(&model, StrategyGrid::new(31).unwrap(), &opts).unwrap();
    let (i, p) = report.stationary_points.iter().enumerate().find(|(_, p)| p.is_interior()).expect("interior point");
    assert!(p.passes_residual(opts.tolerance));
    let j = report.jacobians[i].as_ref().unwrap();
    assert!(j.is_stable() && j.spectral_radius < 1.0);
    let run =
        learn(&model, StrategyProfile::new(p.theta_a + 0.05, (p.theta_b - 0.1).max(0.0)).unwrap(), &opts).unwrap();
    assert!(run.converged, "{:?}", run.diagnostic);
    let (u, _) = model.payoffs(p.theta_a, p.theta_b).unwrap();
    assert!((run.last().u_a - u).abs() < 1e-2);
}
