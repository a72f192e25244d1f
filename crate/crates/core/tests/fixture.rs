use std::path::PathBuf;

use augcat_core::data::fixture_bank;
use augcat_core::data::io::{bank_to_json, load_bank};

const FIXTURE_SEED: u64 = 42;

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/generating_bank_v1.json")
}

/// Set AUGCAT_REGENERATE_FIXTURES=1 to rewrite the file from the generator.
#[test]
fn generating_bank_fixture_matches_generator() {
    let expected = bank_to_json(&fixture_bank(FIXTURE_SEED));
    if std::env::var_os("AUGCAT_REGENERATE_FIXTURES").is_some() {
        std::fs::write(fixture_path(), &expected).unwrap();
    }
    let on_disk = std::fs::read_to_string(fixture_path()).unwrap();
    assert_eq!(on_disk, expected);
    assert_eq!(load_bank(&fixture_path()).unwrap(), fixture_bank(FIXTURE_SEED));
}
