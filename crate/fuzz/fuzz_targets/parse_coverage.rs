#![no_main]

use libfuzzer_sys::fuzz_target;
use trimmed_l1::io::{parse_coverage, CoverageSpec};

fuzz_target!(|data: (&str, u16)| {
    let (text, n) = data;
    let Ok(spec) = parse_coverage(text) else { return };
    if let CoverageSpec::Fraction(f) = spec {
        assert!(f > 0.0 && f <= 1.0);
    }
    let n = n as usize;
    if let Ok(h) = spec.resolve(n) {
        assert!(h >= 1 && h <= n);
    }
});
