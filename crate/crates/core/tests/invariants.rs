mod common;

use common::SUITES;

fn run(name: &str) {
    let (_, suite) = SUITES.iter().find(|(n, _)| *n == name).unwrap();
    let cases = suite().unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(cases >= 100);
}

#[test]
fn semigroup_law() {
    run("semigroup law");
}

#[test]
fn projection_idempotence() {
    run("projection idempotence");
}

#[test]
fn contractivity() {
    run("contractivity");
}

#[test]
fn conservativity() {
    run("conservativity");
}

#[test]
fn bielecki_identities() {
    run("Bielecki identities");
}

#[test]
fn shipped_limit_systems_commute() {
    for sh in common::shipped() {
        assert!(sh.mp.commutation_defect() <= 1e-8, "{}: {}", sh.name, sh.mp.commutation_defect());
        let g = &sh.mp.limit.generator;
        let p = sh.mp.projection().matrix();
        assert!((p * g.matrix() * p - g.matrix()).amax() <= 1e-8 * g.matrix().amax().max(1.0), "{}", sh.name);
    }
}
