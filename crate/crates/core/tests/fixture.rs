mod common;

use common::{fixture_dir, shipped_fixture, Fixture};

/// The shipped files must match the seeded generator. Set
/// `SENTALIGN_REGEN_FIXTURES=1` to rewrite them.
#[test]
fn shipped_fixture_matches_generator() {
    let generated = shipped_fixture();
    if std::env::var_os("SENTALIGN_REGEN_FIXTURES").is_some() {
        generated.write_to(&fixture_dir()).unwrap();
    }
    let shipped = Fixture::read_from(&fixture_dir()).unwrap();
    assert_eq!(shipped, generated);
    assert_eq!(shipped.source.len(), 1005);
    assert_eq!(shipped.target.len(), 985);
}
