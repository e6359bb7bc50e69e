#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(parsed) = graphalign::io::parse_center(text) {
            let again = graphalign::io::parse_center(&graphalign::io::center_to_json("c", &parsed)).unwrap();
            assert_eq!(again.hard, parsed.hard);
        }
    }
});
