use platoon_core::bundled;
use platoon_core::engine::{run, RunOutput};
use platoon_core::scenario::ScenarioSpec;
use platoon_core::types::VehicleId;

fn runs() -> Vec<(&'static str, ScenarioSpec, RunOutput)> {
    bundled::names()
        .map(|name| {
            let spec = bundled::load(name).unwrap();
            let out = run(&spec).unwrap();
            (name, spec, out)
        })
        .collect()
}

fn sends<'a>(out: &'a RunOutput, what: &'a str) -> impl Iterator<Item = (u64, VehicleId)> + 'a {
    out.events
        .iter()
        .filter(move |e| e.text == format!("sends {what}"))
        .map(|e| (e.tick, e.vehicle.unwrap()))
}

#[test]
fn speed_and_acceleration_stay_in_bounds() {
    for (name, spec, out) in runs() {
        let lim = spec.parameters.dynamics;
        let bound = lim.a_max.max(lim.d_max);
        for row in &out.trace.rows {
            for c in row.cells.iter().flatten() {
                assert!(c.v >= 0.0, "{name} tick {}: v = {}", row.tick, c.v);
                assert!(c.a.abs() <= bound, "{name} tick {}: a = {}", row.tick, c.a);
            }
        }
    }
}

#[test]
fn aeb_brakes_at_full_deceleration_while_moving() {
    for (name, spec, out) in runs() {
        let d_max = spec.parameters.dynamics.d_max;
        for id in spec.vehicles.iter().map(|v| v.id) {
            let series: Vec<_> = out.trace.series(id).map(|(_, c)| c).collect();
            for w in series.windows(2) {
                if w[1].ctrl == "AEB" && w[0].v > 0.0 && w[1].v > 0.0 {
                    assert_eq!(w[1].a, -d_max, "{name} {id}");
                }
            }
        }
    }
}

#[test]
fn leader_size_counts_the_members_when_settled() {
    for (name, spec, out) in runs() {
        let leader = spec.platoon.leader;
        for (r, row) in out.trace.rows.iter().enumerate() {
            let cells: Vec<_> = spec.vehicles.iter().map(|v| out.trace.cell(r, v.id).unwrap()).collect();
            if cells.iter().any(|c| c.maneuver != "Platooning") {
                continue;
            }
            let members = cells.iter().filter(|c| c.role != "FreeVehicle").count();
            let leaders = cells.iter().filter(|c| c.role == "Leader").count();
            let size = out.trace.cell(r, leader).unwrap().size;
            assert!(leaders <= 1, "{name} tick {}", row.tick);
            assert_eq!(size, members, "{name} tick {}", row.tick);
        }
    }
}

#[test]
fn takeover_is_terminal() {
    for (name, spec, out) in runs() {
        for id in spec.vehicles.iter().map(|v| v.id) {
            let after: Vec<_> = out
                .trace
                .series(id)
                .skip_while(|(_, c)| !c.takeover)
                .skip_while(|(_, c)| c.role != "FreeVehicle")
                .collect();
            assert!(after.iter().all(|(_, c)| c.role == "FreeVehicle"), "{name}: {id} rejoined after a takeover");
        }
    }
}

#[test]
fn announced_maneuvers_reach_every_member() {
    for (name, spec, out) in runs() {
        if spec.has_fault() {
            continue;
        }
        let delay = spec.parameters.bus.delivery_delay_ticks;
        for e in &out.events {
            let Some(m) = e.text.strip_prefix("sends ManeuverAnnounce(").and_then(|s| s.strip_suffix(')')) else {
                continue;
            };
            let sender = e.vehicle.unwrap();
            let row = e.tick as usize;
            for v in &spec.vehicles {
                let c = out.trace.cell(row, v.id).unwrap();
                if v.id == sender || c.role == "FreeVehicle" {
                    continue;
                }
                let end = row + delay as usize + 2;
                let reached = (row..=end).any(|r| out.trace.cell(r, v.id).is_some_and(|c| c.maneuver == m));
                assert!(reached, "{name}: {} announced {m} at tick {}, {} not in it by row {end}", sender, e.tick, v.id);
            }
        }
    }
}

#[test]
fn every_join_flag_is_answered_once() {
    for (name, spec, out) in runs() {
        let delay = spec.parameters.bus.delivery_delay_ticks;
        let updates: Vec<u64> = sends(&out, "UpdateFlag").map(|(t, _)| t).collect();
        for (t, who) in sends(&out, "JoinFlag") {
            let answered = updates.iter().filter(|&&u| u > t && u <= t + delay + 1).count();
            assert_eq!(answered, 1, "{name}: JoinFlag from {who} at tick {t}");
        }
    }
}

#[test]
fn completions_are_logged_by_the_leader_for_every_join() {
    for (name, spec, out) in runs() {
        let joins = spec
            .events
            .iter()
            .filter(|e| matches!(e, platoon_core::scenario::EventSpec::Join { .. }))
            .count();
        let done = out
            .report
            .completions
            .iter()
            .filter(|c| c.maneuver.starts_with("Join"))
            .count();
        assert!(done >= joins, "{name}: {done} join completions for {joins} joins");
    }
}
