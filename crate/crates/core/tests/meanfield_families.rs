use definetti_core::meanfield::{verify_gs_bound, HamiltonianFamily, ProductSearch, GS_INVARIANCE_TOL};

#[test]
fn families_at_six_sites() {
    for family in HamiltonianFamily::ALL {
        let spec = family.spec(6).unwrap();
        let (res, report) = verify_gs_bound(&spec, &ProductSearch::default()).unwrap();
        println!("{} {}", family.name(), report.summary_line());
        for n in &report.notes {
            println!("    {n}");
        }
        assert!(res.gap >= -1e-9);
        assert!(res.invariance_violation <= GS_INVARIANCE_TOL || !report.pass);
    }
}
