#![no_main]

use dnt_core::formats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = formats::parse_post_processing_map(text) {
        let again = formats::parse_post_processing_map(&formats::to_json_string(&formats::map_value(&m)));
        assert_eq!(again.unwrap(), m);
    }
});
