#![no_main]

use libfuzzer_sys::fuzz_target;
use trimmed_l1::io::Settings;

fuzz_target!(|data: &str| {
    let mut s = Settings::default();
    if s.apply_all(data.lines()).is_ok() {
        assert!(s.driver.validate().is_ok());
        assert!(s.heuristic.restarts >= 1);
    }
});
