#![no_main]

use dnt_core::formats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = formats::parse_povm(text) {
        let again = formats::parse_povm(&formats::to_json_string(&formats::povm_value(&p)));
        assert_eq!(again.unwrap(), p);
    }
});
