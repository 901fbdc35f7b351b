#![no_main]

use libfuzzer_sys::fuzz_target;
use platoon_core::trace::Trace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(trace) = Trace::from_csv(text, "fuzz") {
        let back = Trace::from_csv(&trace.to_csv(), "fuzz").expect("written trace parses");
        assert_eq!(back.vehicles, trace.vehicles);
        assert_eq!(back.rows.len(), trace.rows.len());
    }
});
