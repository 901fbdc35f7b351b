#![no_main]

use libfuzzer_sys::fuzz_target;
use platoon_core::scenario::ScenarioSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = ScenarioSpec::from_toml(text) {
        // Anything accepted must survive a round trip unchanged.
        let again = ScenarioSpec::from_toml(&spec.to_toml()).expect("serialized spec parses");
        assert_eq!(spec.spec_hash(), again.spec_hash());
    }
});
