use platoon_core::bundled;
use platoon_core::engine::run;
use platoon_core::scenario::{EventSpec, ScenarioSpec};
use platoon_core::types::VehicleId;
use proptest::prelude::*;

fn steady(duration: f64) -> ScenarioSpec {
    let mut spec = bundled::load("steady").unwrap();
    spec.run.duration = duration;
    spec
}

/// Peak deviation of each vehicle's speed from the new platoon speed,
/// counted only in the direction of the step.
fn overshoots(spec: &ScenarioSpec, step: f64) -> Vec<f64> {
    let out = run(spec).unwrap();
    assert!(!out.collided());
    let target = spec.parameters.management.platoon_speed;
    spec.platoon
        .members
        .iter()
        .map(|&id| {
            out.trace
                .series(id)
                .map(|(_, c)| (c.v - target) * step.signum())
                .fold(0.0, f64::max)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn speed_step_does_not_amplify_down_the_string(step in prop_oneof![-2.0..-0.5f64, 0.5..2.0f64]) {
        let mut spec = steady(40.0);
        spec.parameters.management.platoon_speed = 20.0 + step;
        let o = overshoots(&spec, step);
        for pair in o.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 0.05, "overshoots {:?}", o);
        }
    }

    #[test]
    fn members_are_conserved_through_leaves(
        leaving in prop::sample::subsequence(vec![2u32, 3, 4, 5], 1..4),
        start in 40..160u32,
    ) {
        let mut spec = steady(0.0);
        let mut t = f64::from(start) * 0.05;
        for id in &leaving {
            spec.events.push(EventSpec::Leave { t, target: VehicleId(*id) });
            t += 20.0;
        }
        spec.run.duration = (t + 10.0).round();
        let out = run(&spec).unwrap();
        prop_assert!(!out.collided());
        let last = out.trace.rows.len() - 1;
        let cells: Vec<_> = spec.vehicles.iter().map(|v| out.trace.cell(last, v.id).unwrap()).collect();
        let size = cells[0].size;
        let free = cells.iter().filter(|c| c.role == "FreeVehicle").count();
        let in_platoon = cells.iter().filter(|c| c.role != "FreeVehicle").count();
        prop_assert_eq!(size + free, spec.vehicle_count());
        prop_assert_eq!(size, in_platoon);
        prop_assert_eq!(size, spec.vehicle_count() - leaving.len());
    }
}

#[test]
fn every_bundled_scenario_runs_without_collision() {
    for name in bundled::names() {
        let out = run(&bundled::load(name).unwrap()).unwrap();
        assert!(!out.collided(), "{name}: {:?}", out.report.collisions);
    }
}

#[test]
fn halt_on_collision_stops_the_run() {
    let mut spec = bundled::load("radar_fault").unwrap();
    spec.modes.degradation_enabled = false;
    spec.run.halt_on_collision = true;
    let out = run(&spec).unwrap();
    assert!(out.collided());
    assert!((out.trace.rows.len() as u64) < spec.run.ticks());
}

#[test]
fn trace_has_one_row_per_tick_plus_the_initial_state() {
    let spec = steady(5.0);
    let out = run(&spec).unwrap();
    assert_eq!(out.trace.rows.len() as u64, spec.run.ticks() + 1);
    assert_eq!(out.trace.rows[0].tick, 0);
}

#[test]
fn intruders_get_ids_after_the_declared_vehicles() {
    let spec = bundled::load("cut_in").unwrap();
    let out = run(&spec).unwrap();
    assert_eq!(out.trace.vehicles.len(), spec.vehicle_count() + spec.cut_in_count());
    assert_eq!(out.trace.vehicles.last(), Some(&VehicleId(6)));
    assert!(out.trace.cell(0, VehicleId(6)).is_none());
}

#[test]
fn cut_in_from_a_lane_not_next_to_the_target_is_skipped() {
    let mut spec = bundled::load("cut_in").unwrap();
    spec.parameters.geometry.lane_count = 4;
    if let Some(EventSpec::CutIn { lane, .. }) = spec.events.iter_mut().find(|e| matches!(e, EventSpec::CutIn { .. })) {
        *lane = 3;
    }
    let out = run(&spec).unwrap();
    assert!(out.events.iter().any(|e| e.text.contains("skipped")));
    assert!(out.trace.series(VehicleId(6)).next().is_none());
}

#[test]
fn events_log_is_ordered_by_time() {
    let out = run(&bundled::load("integrated").unwrap()).unwrap();
    assert!(out.events.windows(2).all(|w| w[0].tick <= w[1].tick));
}
