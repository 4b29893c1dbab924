#![no_main]

use casimir_td::cli::tables::{self, read_forces, read_table, write_forces};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for schema in [
        tables::WEIGHT_SPECTRUM,
        tables::WEIGHT_TIME,
        tables::REFERENCE_TERMS,
        tables::GAMMA_DUMP,
        tables::RAW_DUMP,
        tables::PROBE_LEGEND,
    ] {
        let _ = read_table(text, &schema);
    }
    if let Ok(rows) = read_forces(text) {
        // Accepted force tables survive a write/read round trip.
        let mut buf = Vec::new();
        write_forces(&mut buf, None, &rows).unwrap();
        let again = read_forces(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows, again);
    }
});
