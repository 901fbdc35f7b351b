use platoon_core::bundled;
use platoon_core::engine::run_with_registry;
use platoon_core::management::{
    default_registry, Phase, RegistryError, Strategy, StrategyContext, StrategyError, StrategyKey, StrategyOutput,
    StrategyProgress,
};
use platoon_core::scenario::EventSpec;
use platoon_core::types::{Longitudinal, Maneuver, Role, VehicleId};

/// Drops back for a few seconds, then resumes platooning.
struct SlowDown;

impl Strategy for SlowDown {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        if progress.phase == Phase::Start {
            progress.advance(Phase::Custom(1), ctx.tick);
        }
        let out = StrategyOutput::with(Longitudinal::Cc { v_set: 17.0 });
        if ctx.seconds_since(progress.phase_tick) >= 3.0 {
            return Ok(out.done());
        }
        Ok(out)
    }
}

fn key(role: Role) -> StrategyKey {
    StrategyKey::new(Maneuver::Extension("Slow-down".into()), role)
}

#[test]
fn extension_runs_through_the_public_registry() {
    let mut registry = default_registry();
    registry.register(key(Role::Leader), Box::new(SlowDown)).unwrap();
    registry.register(key(Role::Follower), Box::new(SlowDown)).unwrap();
    let mut spec = bundled::load("steady").unwrap();
    spec.run.duration = 30.0;
    spec.events.push(EventSpec::Extension {
        t: 5.0,
        name: "Slow-down".into(),
        target: VehicleId(4),
    });
    let out = run_with_registry(&spec, &registry).unwrap();
    assert!(!out.collided());
    let active = out.trace.series(VehicleId(4)).filter(|(_, c)| c.maneuver == "Slow-down").count();
    assert!((55..=65).contains(&active), "active for {active} rows");
    let last = out.trace.rows.len() - 1;
    assert_eq!(out.trace.cell(last, VehicleId(4)).unwrap().maneuver, "Platooning");
}

#[test]
fn duplicate_registration_is_rejected() {
    let mut registry = default_registry();
    let builtin = StrategyKey::new(Maneuver::JoinTail, Role::FreeVehicle);
    assert!(matches!(
        registry.register(builtin, Box::new(SlowDown)),
        Err(RegistryError::DuplicateKey(_))
    ));
}

#[test]
fn registries_are_independent() {
    let mut a = default_registry();
    let b = default_registry();
    a.register(key(Role::Follower), Box::new(SlowDown)).unwrap();
    assert!(a.lookup(&key(Role::Follower)).is_some());
    assert!(b.lookup(&key(Role::Follower)).is_none());
    assert_eq!(a.len(), b.len() + 1);
}

#[test]
fn unregistered_extension_holds_the_controller() {
    let mut spec = bundled::load("steady").unwrap();
    spec.run.duration = 10.0;
    spec.events.push(EventSpec::Extension {
        t: 2.0,
        name: "Slow-down".into(),
        target: VehicleId(4),
    });
    let out = run_with_registry(&spec, &default_registry()).unwrap();
    assert!(!out.collided());
    assert!(out.events.iter().any(|e| e.vehicle == Some(VehicleId(4)) && e.text.contains("no strategy")));
    assert!(out.trace.series(VehicleId(4)).all(|(_, c)| c.ctrl == "CACC"));
}

#[test]
fn removing_one_strategy_leaves_unrelated_runs_untouched() {
    let spec = bundled::load("join_tail").unwrap();
    let baseline = run_with_registry(&spec, &default_registry()).unwrap().trace;
    let keys: Vec<StrategyKey> = default_registry().keys().cloned().collect();
    for key in keys {
        if matches!(key.maneuver, Maneuver::Platooning | Maneuver::JoinTail) {
            continue;
        }
        let mut registry = default_registry();
        assert!(registry.unregister(&key).is_some());
        let trace = run_with_registry(&spec, &registry).unwrap().trace;
        assert_eq!(trace, baseline, "removing {key} changed a join-tail run");
    }
}
