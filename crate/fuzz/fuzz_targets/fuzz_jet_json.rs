#![no_main]

use libfuzzer_sys::fuzz_target;
use magwell::jet::Jet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(j) = Jet::from_json(text) {
        let back = Jet::from_json(&j.to_json()).expect("serialized jets parse");
        assert_eq!(j, back);
    }
});
