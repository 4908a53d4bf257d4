#![no_main]

use dog_barometer::PolicyTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(policy) = PolicyTable::parse(text) {
        let again = PolicyTable::parse(&policy.to_text()).expect("printed policies parse");
        assert_eq!(again.pressure_visible(), policy.pressure_visible());
        assert_eq!(again.len(), policy.len());
    }
});
