use platoon_core::bundled;
use platoon_core::engine::run;
use platoon_core::trace::{replay_check, ReplayVerdict, Trace, TraceRow, VehicleRow};
use platoon_core::types::VehicleId;
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["CC", "ACC", "CACC", "AEB", "Driver", "Platooning", "JoinTail", "Leader", "Split-stub"])
        .prop_map(str::to_string)
}

fn num() -> impl Strategy<Value = f64> {
    (-1.0e6..1.0e6f64).prop_map(platoon_core::trace::quantize)
}

fn cell() -> impl Strategy<Value = Option<VehicleRow>> {
    let row = (
        (num(), 0..4u32, num(), num(), num()),
        (label(), prop::option::of(num()), label(), label()),
        (prop::option::of(num()), prop::option::of(1..20u32), 0..10usize, any::<bool>()),
    )
        .prop_map(|((s, lane, y, v, a), (ctrl, vset, maneuver, role), (gap, target, size, takeover))| VehicleRow {
            s,
            lane,
            y,
            v,
            a,
            ctrl,
            vset,
            maneuver,
            role,
            gap,
            target: target.map(VehicleId),
            size,
            takeover,
        });
    prop::option::weighted(0.9, row)
}

fn trace() -> impl Strategy<Value = Trace> {
    (1..5usize, 0..6usize).prop_flat_map(|(n, rows)| {
        prop::collection::vec(prop::collection::vec(cell(), n), rows).prop_map(move |cells| {
            let mut t = Trace::new("h".into(), (1..=n as u32).map(VehicleId).collect());
            for (i, cells) in cells.into_iter().enumerate() {
                t.rows.push(TraceRow {
                    tick: i as u64,
                    time: platoon_core::trace::quantize(i as f64 * 0.05),
                    cells,
                });
            }
            t
        })
    })
}

proptest! {
    #[test]
    fn csv_round_trips(t in trace()) {
        let back = Trace::from_csv(&t.to_csv(), "h").unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn from_csv_never_panics(text in "\\PC*") {
        let _ = Trace::from_csv(&text, "h");
    }

    #[test]
    fn from_csv_rejects_or_accepts_mangled_traces(t in trace(), cut in 0usize..400, junk in "[,0-9a-z.\\n-]{0,8}") {
        let mut csv = t.to_csv();
        let at = cut.min(csv.len());
        csv.insert_str(at, &junk);
        let _ = Trace::from_csv(&csv, "h");
    }
}

#[test]
fn bundled_run_survives_the_csv_round_trip() {
    let spec = bundled::load("join_tail").unwrap();
    let out = run(&spec).unwrap();
    let back = Trace::from_csv(&out.trace.to_csv(), &out.trace.spec_hash).unwrap();
    assert_eq!(replay_check(&out.trace, &back), ReplayVerdict::Equal);
}

#[test]
fn changed_dt_is_a_different_scenario() {
    let spec = bundled::load("steady").unwrap();
    let mut other = spec.clone();
    other.run.dt = 0.04;
    assert_ne!(spec.spec_hash(), other.spec_hash());
    let a = run(&spec).unwrap();
    let b = run(&other).unwrap();
    assert_eq!(replay_check(&a.trace, &b.trace), ReplayVerdict::SpecHashMismatch);
}

#[test]
fn seed_does_not_change_the_hash() {
    let spec = bundled::load("steady").unwrap();
    let mut other = spec.clone();
    other.run.seed = 42;
    assert_eq!(spec.spec_hash(), other.spec_hash());
}

#[test]
fn tampered_row_is_reported_as_divergence() {
    let spec = bundled::load("steady").unwrap();
    let a = run(&spec).unwrap().trace;
    let mut b = a.clone();
    b.rows[10].cells[2].as_mut().unwrap().v += 1e-6;
    match replay_check(&a, &b) {
        ReplayVerdict::Diverged { row, detail } => {
            assert_eq!(row, 10);
            assert!(detail.contains("v3"), "{detail}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn truncated_file_reports_the_line() {
    let spec = bundled::load("steady").unwrap();
    let csv = run(&spec).unwrap().trace.to_csv();
    let cut: String = csv.lines().take(3).collect::<Vec<_>>().join("\n") + "\n1,0.1,5";
    let e = Trace::from_csv(&cut, "h").unwrap_err();
    assert_eq!(e.line, 4);
}
