#![no_main]

use casimir_td::cli::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // Accepted configs must enumerate their sweep deterministically.
        let a = cfg.points().expect("validated config must build its points");
        let b = parse_config(text).unwrap().points().unwrap();
        assert_eq!(a.len(), b.len());
    }
});
