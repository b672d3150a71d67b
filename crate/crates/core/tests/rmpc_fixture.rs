//! Two-stage inventory program with one sampled trajectory per stage,
//! assembled by hand and compared against the stored dump.
//! Regenerate the dump with `SCENOPT_BLESS=1 cargo test --test rmpc_fixture`.

use scenopt::rmpc::{build_rmpc_lp, inventory, nominal_demand};
use scenopt::scenario::RowTag;

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/inventory_t2_nu1_n11.lp"
);
const SEED: u64 = 2024;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

#[test]
fn hand_assembled_two_stage_program() {
    let p = inventory(2, 1, 0.2).unwrap();
    let built = build_rmpc_lp(&p, &[1, 1], SEED).unwrap();
    let lp = &built.lp;
    let (v0, v1) = (nominal_demand(0), nominal_demand(1));

    // z = (h0, h1, M+, M-), the single feedback entry maps delta_0 into u_1
    assert_eq!(lp.n_vars(), 4);
    assert_eq!(lp.cost, vec![200.0, 101.0, 0.0, 0.0]);
    let constant = 100.0 * 600.0 + 100.0 * (600.0 - v0) + 100.0 * (600.0 - v0 - v1);
    assert!(close(built.cost_constant, constant));

    let fixed: Vec<_> = lp.rows.iter().filter(|r| r.tag == RowTag::Fixed).collect();
    let expected_fixed = [
        ([1.0, 0.0, 0.0, 0.0], 567.0),
        ([-1.0, 0.0, 0.0, 0.0], 0.0),
        ([0.0, 1.0, 200.0, 200.0], 567.0),
        ([0.0, -1.0, 200.0, 200.0], 0.0),
    ];
    assert_eq!(fixed.len(), 4);
    for (row, (coeffs, rhs)) in fixed.iter().zip(expected_fixed) {
        assert_eq!(row.coeffs, coeffs);
        assert_eq!(row.rhs, rhs);
    }

    assert_eq!(built.sample_stage, vec![1, 2]);
    let first = &built.trajectories[0];
    let second = &built.trajectories[1];
    let s1 = lp.rows.iter().find(|r| r.tag == RowTag::Sample(0)).unwrap();
    let s2 = lp.rows.iter().find(|r| r.tag == RowTag::Sample(1)).unwrap();
    // -x_1 <= -500 with x_1 = 600 + h0 - v0 - delta_0
    assert_eq!(s1.coeffs, vec![-1.0, 0.0, 0.0, 0.0]);
    assert!(close(s1.rhs, 100.0 - v0 - first[0]));
    // -x_2 <= -500 with x_2 = x_1 + h1 + m delta_0 - v1 - delta_1
    let d0 = second[0];
    assert_eq!(s2.coeffs, vec![-1.0, -1.0, -d0, d0]);
    assert!(close(s2.rhs, 100.0 - v0 - v1 - second[0] - second[1]));

    assert_eq!(lp.all_rows().len(), 4 + 2 + 2 * 4);
    assert!(lp.all_rows().iter().any(|r| r.tag == RowTag::Domain));
}

#[test]
fn dump_matches_fixture() {
    let p = inventory(2, 1, 0.2).unwrap();
    let dump = build_rmpc_lp(&p, &[1, 1], SEED).unwrap().lp.dump();
    if std::env::var_os("SCENOPT_BLESS").is_some() {
        std::fs::write(FIXTURE, &dump).unwrap();
    }
    let stored = std::fs::read_to_string(FIXTURE).unwrap();
    assert_eq!(dump, stored);
}
