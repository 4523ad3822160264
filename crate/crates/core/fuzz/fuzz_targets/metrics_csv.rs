#![no_main]

use libfuzzer_sys::fuzz_target;
use navacl::ppo::train::{parse_metrics_csv, write_metrics_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_metrics_csv(text) {
        let rendered = write_metrics_csv(&rows);
        let again = parse_metrics_csv(&rendered).expect("rendered metrics must parse");
        assert_eq!(write_metrics_csv(&again), rendered);
    }
});
