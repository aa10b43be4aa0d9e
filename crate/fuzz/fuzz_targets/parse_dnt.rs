#![no_main]

use dnt_core::formats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = formats::parse_dnt(text) {
        let again = formats::parse_dnt(&formats::to_json_string(&formats::dnt_value(&d)));
        assert_eq!(again.unwrap(), d);
    }
});
