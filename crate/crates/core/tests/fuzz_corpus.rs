//! Replays the checked-in fuzz corpus on stable: every seed must parse or be
//! rejected without panicking, and accepted inputs must survive a
//! write/parse round trip.

use std::fs;
use std::path::{Path, PathBuf};

use dnt_core::formats::{self, to_json_string};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = String::from_utf8_lossy(&fs::read(&p).unwrap()).into_owned();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

/// Seeds named `bad_*`, `not_*`, `garbage*`, `short*`, `ragged*` are
/// expected to be rejected; everything else must parse.
fn expect_ok(path: &Path) -> bool {
    let stem = path.file_stem().unwrap().to_string_lossy();
    !["bad_", "not_", "garbage", "short", "ragged"]
        .iter()
        .any(|p| stem.starts_with(p))
}

macro_rules! round_trip {
    ($name:ident, $target:literal, $parse:path, $write:path) => {
        #[test]
        fn $name() {
            for (path, text) in seeds($target) {
                match $parse(&text) {
                    Ok(v) => {
                        assert!(expect_ok(&path), "{} parsed", path.display());
                        let again = $parse(&to_json_string(&$write(&v))).unwrap();
                        assert_eq!(again, v, "{}", path.display());
                    }
                    Err(e) => assert!(!expect_ok(&path), "{}: {e}", path.display()),
                }
            }
        }
    };
}

round_trip!(matrix, "parse_matrix", formats::parse_matrix, formats::matrix_value);
round_trip!(povm, "parse_povm", formats::parse_povm, formats::povm_value);
round_trip!(
    post_processing_map,
    "parse_post_processing_map",
    formats::parse_post_processing_map,
    formats::map_value
);
round_trip!(
    doubly_stochastic,
    "parse_doubly_stochastic",
    formats::parse_doubly_stochastic,
    formats::doubly_stochastic_value
);
round_trip!(dnt, "parse_dnt", formats::parse_dnt, formats::dnt_value);
round_trip!(
    jm_instance,
    "parse_jm_instance",
    formats::parse_jm_instance,
    formats::jm_instance_value
);
round_trip!(
    sdp_problem,
    "parse_sdp_problem",
    formats::parse_sdp_problem,
    formats::sdp_problem_value
);

#[test]
fn dnt_grid() {
    for (path, text) in seeds("parse_dnt_grid") {
        // the grid parser checks shape only, so unnormalized grids are accepted
        let ok = expect_ok(&path) || path.file_stem().unwrap() == "not_normalized";
        assert_eq!(formats::parse_dnt_grid(&text).is_ok(), ok, "{}", path.display());
    }
}

#[test]
fn trivial_mother() {
    for (path, text) in seeds("parse_trivial_mother") {
        assert_eq!(
            formats::parse_trivial_mother(&text).is_ok(),
            expect_ok(&path),
            "{}",
            path.display()
        );
    }
}
