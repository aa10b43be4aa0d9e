#![no_main]

use dnt_core::formats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = formats::parse_doubly_stochastic(text) {
        let json = formats::to_json_string(&formats::doubly_stochastic_value(&d));
        assert_eq!(formats::parse_doubly_stochastic(&json).unwrap(), d);
    }
});
