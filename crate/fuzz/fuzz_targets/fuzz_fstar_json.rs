#![no_main]

use libfuzzer_sys::fuzz_target;
use magwell::birkhoff::FStar;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = FStar::from_json(text) {
        let back = FStar::from_json(&f.to_json()).expect("serialized tables parse");
        assert_eq!(f.table, back.table);
    }
});
