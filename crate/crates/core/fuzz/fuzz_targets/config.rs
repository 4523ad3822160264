#![no_main]

use libfuzzer_sys::fuzz_target;
use navacl::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let rendered = cfg.render();
        let again = ExperimentConfig::parse(&rendered).expect("rendered config must parse");
        assert_eq!(again.render(), rendered);
    }
});
