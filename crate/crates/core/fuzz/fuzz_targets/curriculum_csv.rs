#![no_main]

use libfuzzer_sys::fuzz_target;
use navacl::metrics::{parse_curriculum_csv, write_curriculum_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_curriculum_csv(text) {
        let rendered = write_curriculum_csv(&rows).expect("rows must serialize");
        let again = parse_curriculum_csv(&rendered).expect("rendered log must parse");
        assert_eq!(write_curriculum_csv(&again).expect("rows must serialize"), rendered);
    }
});
