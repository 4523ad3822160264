#![no_main]

use libfuzzer_sys::fuzz_target;
use navacl::checkpoint::TensorArchive;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(archive) = TensorArchive::parse(text) {
        let rendered = archive.render();
        let again = TensorArchive::parse(&rendered).expect("rendered archive must parse");
        assert_eq!(again.render(), rendered);
    }
});
