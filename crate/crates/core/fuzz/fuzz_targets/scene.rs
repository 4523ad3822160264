#![no_main]

use libfuzzer_sys::fuzz_target;
use navacl::world::{parse_scene, render_scene};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scene) = parse_scene(text) {
        let rendered = render_scene(&scene);
        let again = parse_scene(&rendered).expect("rendered scene must parse");
        assert_eq!(render_scene(&again), rendered);
    }
});
