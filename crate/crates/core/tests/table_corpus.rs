mod common;

use common::corpus;
use finsym::classify::classify;
use finsym::symmetry::check_lie_symmetry;

#[test]
fn every_row_classifies_and_its_basis_holds() {
    for (expected, eq) in corpus() {
        let r = classify(&eq).unwrap();
        assert_eq!(r.case_id, expected, "{eq}");
        for v in &r.basis {
            let verdict = check_lie_symmetry(&eq, v, 11, 1e-9).unwrap();
            assert!(verdict.holds, "{eq}: {v} residual {}", verdict.max_residual);
        }
    }
}

#[test]
fn row_sizes_match_the_table() {
    let dims = [1, 2, 2, 2, 2, 2, 3, 3, 4, 4, 4, 5, 5];
    for (expected, eq) in corpus() {
        let r = classify(&eq).unwrap();
        assert_eq!(r.basis.len(), dims[expected as usize - 1], "{eq}");
    }
}
