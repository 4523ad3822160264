#![no_main]

use libfuzzer_sys::fuzz_target;
use navacl::harness::cli::parse_task_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(task) = parse_task_spec(text) {
            assert!(task.start.x.is_finite() && task.goal.y.is_finite());
        }
    }
});
