#![no_main]

use dog_barometer::approx::checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = checkpoint::decode(text) {
        let again = checkpoint::decode(&checkpoint::encode(&net)).expect("encoded checkpoints decode");
        assert_eq!(again.sizes(), net.sizes());
        assert_eq!(again.params().len(), net.params().len());
    }
});
