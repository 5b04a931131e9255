#![no_main]

use libfuzzer_sys::fuzz_target;
use trimmed_l1::io::{parse_csv, write_matrix_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(x) = parse_csv(data) else { return };
    assert!(x.n() >= 1 && x.p() >= 1);
    assert!(x.values().iter().all(|v| v.is_finite()));
    // Anything accepted must survive a write/read round trip.
    let mut out = Vec::new();
    write_matrix_csv(&x, &mut out).unwrap();
    let y = parse_csv(&out).unwrap();
    assert_eq!(x, y);
});
