#![no_main]

use dnt_core::formats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = formats::parse_sdp_problem(text) {
        let json = formats::to_json_string(&formats::sdp_problem_value(&p));
        assert_eq!(formats::parse_sdp_problem(&json).unwrap(), p);
    }
});
