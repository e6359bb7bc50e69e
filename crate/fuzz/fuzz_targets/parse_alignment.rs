#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(parsed) = graphalign::io::parse_alignment(text) {
            let again = graphalign::io::parse_alignment(&graphalign::io::alignment_to_json(&parsed)).unwrap();
            assert_eq!(again, parsed);
        }
    }
});
