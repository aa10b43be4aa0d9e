#![no_main]

use dnt_core::formats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(j) = formats::parse_jm_instance(text) {
        let json = formats::to_json_string(&formats::jm_instance_value(&j));
        assert_eq!(formats::parse_jm_instance(&json).unwrap(), j);
    }
});
