#![no_main]

use libfuzzer_sys::fuzz_target;
use magwell_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        // accepted configs survive a canonical round trip with the same hash
        let again = RunConfig::from_json(&cfg.canonical_json()).expect("canonical form parses");
        assert_eq!(cfg.hash(), again.hash());
        let _ = cfg.system();
    }
});
