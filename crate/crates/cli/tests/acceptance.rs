//! Acceptance run: executes the full suite twice with a fixed seed, prints
//! one PASS/FAIL line per criterion and exits non-zero only when a
//! criterion's outcome differs from the expected one (criteria 3, 4 and 6
//! are known to fail; see the printed reasons).

use std::time::Instant;

use definetti_cli::config::Opts;
use definetti_cli::suites::{SuiteOutput, Table};
use definetti_cli::{execute, write_table};
use definetti_core::VerificationReport;

struct Run {
    outputs: Vec<SuiteOutput>,
    seconds: f64,
}

impl Run {
    fn reports(&self, claim: &str) -> Vec<&VerificationReport> {
        self.outputs
            .iter()
            .flat_map(|o| &o.reports)
            .filter(|r| r.claim == claim)
            .collect()
    }

    fn table(&self, file: &str) -> &Table {
        self.outputs
            .iter()
            .flat_map(|o| &o.tables)
            .find(|t| t.file == file)
            .unwrap_or_else(|| panic!("missing table {file}"))
    }

    fn suite_seconds(&self, name: &str) -> f64 {
        self.outputs
            .iter()
            .filter(|o| o.name == name)
            .flat_map(|o| &o.reports)
            .map(|r| r.wall_time_s)
            .sum()
    }
}

fn column(t: &Table, name: &str) -> usize {
    t.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {}", t.file))
}

fn cell(t: &Table, row: &[String], name: &str) -> f64 {
    row[column(t, name)].parse().unwrap_or(f64::NAN)
}

fn text(t: &Table, row: &[String], name: &str) -> String {
    row[column(t, name)].clone()
}

fn input<'a>(r: &'a VerificationReport, key: &str) -> Option<&'a str> {
    r.inputs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn all_pass(rs: &[&VerificationReport]) -> bool {
    !rs.is_empty() && rs.iter().all(|r| r.pass)
}

fn run_all() -> Run {
    let opts = Opts {
        seed: Some(0),
        ..Opts::default()
    };
    let start = Instant::now();
    let outputs = execute("all", opts).expect("all runs");
    Run {
        outputs,
        seconds: start.elapsed().as_secs_f64(),
    }
}

struct Outcome {
    id: usize,
    pass: bool,
    expected_pass: bool,
    detail: String,
}

fn c1(run: &Run) -> Outcome {
    let r = run.reports("algebra-oracle");
    let rows = run.table("algebra.csv").rows.len();
    let secs = run.suite_seconds("check-algebra");
    Outcome {
        id: 1,
        pass: all_pass(&r) && rows == 500 && secs < 30.0,
        expected_pass: true,
        detail: format!("{rows} cases, max diff {:.1e}, {secs:.1} s", r[0].lhs),
    }
}

fn c2(run: &Run) -> Outcome {
    let p = run.reports("pinching-norm");
    let c = run.reports("cauchy-schwarz");
    let n = (run.table("pinching.csv").rows.len(), run.table("cauchy_schwarz.csv").rows.len());
    Outcome {
        id: 2,
        pass: all_pass(&p) && all_pass(&c) && n == (200, 200),
        expected_pass: true,
        detail: format!("{} + {} instances, worst excess {:.1e} / {:.1e}", n.0, n.1, p[0].lhs, c[0].lhs),
    }
}

/// Rows of a sweep table split by whether the input was a state.
fn state_split(t: &Table) -> (Vec<&Vec<String>>, Vec<&Vec<String>>) {
    t.rows.iter().partition(|row| text(t, row, "status") == "ok")
}

fn c3(run: &Run) -> Outcome {
    let t = run.table("lemma3.csv");
    let (states, others) = state_split(t);
    let states_ok = states.iter().all(|r| text(t, r, "pass") == "true");
    let k1_zero = t.rows.iter().filter(|r| text(t, r, "k") == "1").all(|r| cell(t, r, "lhs") == 0.0);
    let others_are_mu_one = others
        .iter()
        .all(|r| text(t, r, "status") == "not-a-state" && cell(t, r, "input").abs() == 1.0);
    let operator_within = others.iter().all(|r| cell(t, r, "lhs") <= cell(t, r, "rhs") + 1e-9);
    let secs = run.suite_seconds("verify-lemma3");
    let pass = states_ok && k1_zero && others.is_empty() && secs < 120.0;
    Outcome {
        id: 3,
        pass,
        expected_pass: !(states_ok && k1_zero && others_are_mu_one && operator_within && !others.is_empty()),
        detail: format!(
            "{} state rows pass, k=1 exact zero: {k1_zero}; {} rows with mu = +-1 are not states \
             (operator values within the bound: {operator_within}); {secs:.1} s",
            states.len(),
            others.len()
        ),
    }
}

fn c4(run: &Run) -> Outcome {
    let t = run.table("theorem1.csv");
    let (states, others) = state_split(t);
    let states_ok = states.iter().all(|r| text(t, r, "pass") == "true");
    let zero_ok = states
        .iter()
        .filter(|r| cell(t, r, "input") == 0.0)
        .all(|r| cell(t, r, "distance") < 1e-6);
    let comps = run.table("theorem1_components.csv");
    let diagonal = comps.rows.iter().all(|r| cell(comps, r, "off_diagonal") <= 1e-8);
    let others_are_mu_one = others
        .iter()
        .all(|r| text(t, r, "status") == "not-a-state" && cell(t, r, "input").abs() == 1.0);
    let pass = states_ok && zero_ok && diagonal && others.is_empty();
    Outcome {
        id: 4,
        pass,
        expected_pass: !(states_ok && zero_ok && diagonal && others_are_mu_one && !others.is_empty()),
        detail: format!(
            "{} state rows within the bound, mu=0 distance < 1e-6: {zero_ok}, {} components diagonal: {diagonal}; \
             {} rows with mu = +-1 are not states",
            states.len(),
            comps.rows.len(),
            others.len()
        ),
    }
}

fn c5(run: &Run) -> Outcome {
    let l = run.reports("lemma4");
    let d = run.reports("delta-rule");
    let worst = l.iter().map(|r| r.lhs).fold(0.0, f64::max);
    let secs: f64 = l.iter().chain(&d).map(|r| r.wall_time_s).sum();
    Outcome {
        id: 5,
        pass: all_pass(&l) && all_pass(&d) && l.len() == 6 && secs < 120.0,
        expected_pass: true,
        detail: format!(
            "{} tuples, max |direct - closed| {worst:.1e}; delta rule on {} sizes; {secs:.1} s",
            run.table("lemma4.csv").rows.len(),
            d.len()
        ),
    }
}

fn c6(run: &Run) -> Outcome {
    let eq = run.reports("suppression-equality");
    let t = run.table("suppression.csv");
    let undefined = t
        .rows
        .iter()
        .all(|r| cell(t, r, "K4_single") == 0.0 && cell(t, r, "ratio").is_nan());
    let witness = eq
        .iter()
        .flat_map(|r| &r.notes)
        .any(|n| n.contains("gives ratio 1.000000000000"));
    let bound_holds = all_pass(&run.reports("suppression"));
    Outcome {
        id: 6,
        pass: all_pass(&eq) && eq.len() == 7,
        expected_pass: !(undefined && witness && bound_holds),
        detail: format!(
            "ratio is 0/0 for V = 2..8: single-mode K_4 vanishes for every even one-mode state ({undefined}); \
             inequality holds: {bound_holds}; two-mode correlated state gives ratio 1: {witness}"
        ),
    }
}

fn c7(run: &Run) -> Outcome {
    let r = run.reports("corollary-slope");
    Outcome {
        id: 7,
        pass: all_pass(&r),
        expected_pass: true,
        detail: format!("slope {:.4} (p = {})", r[0].lhs, input(r[0], "p").unwrap_or("?")),
    }
}

fn c8(run: &Run) -> Outcome {
    let s = run.reports("rdm-spectrum");
    let k0 = run.reports("rdm-k0");
    let b = run.reports("pauli-constraints");
    let t = run.table("rdm_spectrum.csv");
    let complex = t.rows.iter().any(|r| cell(t, r, "b_im") != 0.0);
    let real = t.rows.iter().any(|r| cell(t, r, "b_im") == 0.0);
    Outcome {
        id: 8,
        pass: all_pass(&s) && all_pass(&k0) && all_pass(&b) && complex && real,
        expected_pass: true,
        detail: format!(
            "max deviation {:.1e} over {} rows, k=0 deviation {:.1e}, {} mu-family instances",
            s[0].lhs,
            t.rows.len(),
            k0[0].lhs,
            b.len()
        ),
    }
}

fn c9(run: &Run) -> Outcome {
    let g = run.reports("gs-bound");
    let c = run.reports("gs-convexity");
    let t = run.table("gs_bound.csv");
    let gaps_ok = t
        .rows
        .iter()
        .all(|r| cell(t, r, "gap") >= -1e-9 && cell(t, r, "gap") <= cell(t, r, "bound") + 1e-6);
    Outcome {
        id: 9,
        pass: all_pass(&g) && all_pass(&c) && gaps_ok,
        expected_pass: true,
        detail: format!("{} families at V = 6, {} convexity checks", g.len(), c.len()),
    }
}

fn c10(first: &Run, second: &Run) -> Outcome {
    let dir1 = tempfile::tempdir().expect("tempdir");
    let dir2 = tempfile::tempdir().expect("tempdir");
    let mut identical = true;
    let mut files = 0;
    for (a, b) in first.outputs.iter().zip(&second.outputs) {
        for (ta, tb) in a.tables.iter().zip(&b.tables) {
            write_table(dir1.path(), ta).expect("write");
            write_table(dir2.path(), tb).expect("write");
            let fa = std::fs::read(dir1.path().join(&ta.file)).expect("read");
            let fb = std::fs::read(dir2.path().join(&tb.file)).expect("read");
            identical &= fa == fb;
            files += 1;
        }
    }
    let slowest = first.seconds.max(second.seconds);
    Outcome {
        id: 10,
        pass: identical && files > 0 && slowest < 900.0,
        expected_pass: true,
        detail: format!("{files} CSV files byte-identical: {identical}; slowest run {slowest:.0} s"),
    }
}

fn main() {
    let first = run_all();
    let second = run_all();
    let outcomes = [
        c1(&first),
        c2(&first),
        c3(&first),
        c4(&first),
        c5(&first),
        c6(&first),
        c7(&first),
        c8(&first),
        c9(&first),
        c10(&first, &second),
    ];
    let mut unexpected = 0;
    for o in &outcomes {
        println!(
            "criterion {:>2}: {} - {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if o.pass != o.expected_pass {
            unexpected += 1;
            println!("criterion {:>2}: outcome differs from the expected one", o.id);
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
