//! One function per command. Each returns its reports and CSV tables; all
//! numbers in tables are formatted with a fixed precision so reruns with the
//! same seed produce identical files.

use std::path::Path;
use std::time::Instant;

use definetti_core::cumulant::{
    corollary_rate, fourier_labels, lemma4_sweep, product_deviation_scaling, verify_corollary,
    verify_suppression, LadderIndex,
};
use definetti_core::definetti::{best_mixture_approx, certify_theorem1, theorem1_bound, OptimizerParams};
use definetti_core::even_state::SingleSiteState;
use definetti_core::fock::to_matrix;
use definetti_core::invariance::{
    check_invariance, lemma3_bound, mu_family_operator, mu_family_state, odd_part_distance,
    validate_expansion_state, verify_lemma3, MuFamilyParams, DEFAULT_DEGREE_CAP, INVARIANCE_TOL,
};
use definetti_core::linalg::CMatrix;
use definetti_core::meanfield::{
    verify_convexity, verify_gs_bound, HamiltonianFamily, ProductSearch,
};
use definetti_core::oracle::{algebra_sweep, cauchy_schwarz_sweep, pinching_sweep, InequalityRow};
use definetti_core::rdm::{one_rdm, spectrum_rows, verify_pauli_constraints, CirculantParams};
use definetti_core::{Error, OperatorExpansion, SystemShape, VerificationReport};
use num_complex::Complex64;

use crate::config::Opts;
use crate::CliError;

pub const ALGEBRA_TOL: f64 = 1e-10;
pub const INEQUALITY_TOL: f64 = 1e-9;
pub const LEMMA4_TOL: f64 = 1e-9;
pub const DELTA_TOL: f64 = 1e-12;
pub const SPECTRUM_TOL: f64 = 1e-10;
pub const ZERO_DISTANCE_TOL: f64 = 1e-6;
/// Below this the single-site fourth cumulant counts as zero.
pub const K4_ZERO: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&str]) -> Self {
        Table {
            file: file.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub name: String,
    pub reports: Vec<VerificationReport>,
    pub tables: Vec<Table>,
}

impl SuiteOutput {
    fn new(name: &str) -> Self {
        SuiteOutput {
            name: name.to_string(),
            reports: Vec::new(),
            tables: Vec::new(),
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "singular".to_string())
}

/// Splits instance-level domain problems (reported as failures) from
/// resource errors (which abort the run).
fn instance<T>(r: definetti_core::Result<T>) -> Result<Result<T, String>, CliError> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ Error::Resource { .. }) => Err(CliError::Core(e)),
        Err(e) => Ok(Err(e.to_string())),
    }
}

pub fn check_algebra(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let cases = opts.cases.unwrap_or(500);
    let seed = opts.seed.unwrap_or(0);
    let mut out = SuiteOutput::new("check-algebra");

    let start = Instant::now();
    let rows = algebra_sweep(cases, seed)?;
    let mut table = Table::new("algebra.csv", &["case", "V", "p", "product_diff", "adjoint_diff", "permutation_diff"]);
    let mut worst: f64 = 0.0;
    for r in &rows {
        worst = worst.max(r.max_diff());
        table.push(vec![
            r.case.to_string(),
            r.sites.to_string(),
            r.modes_per_site.to_string(),
            num(r.product_diff),
            num(r.adjoint_diff),
            num(r.permutation_diff),
        ]);
    }
    out.reports.push(
        VerificationReport::inequality("algebra-oracle", worst, 0.0, ALGEBRA_TOL)
            .input("cases", cases)
            .input("seed", seed)
            .timed(start),
    );
    out.tables.push(table);

    let lemma_cases = opts.cases.map(|c| c.min(200)).unwrap_or(200);
    let pinch = pinching_sweep(lemma_cases, seed.wrapping_add(1))?;
    let cs = cauchy_schwarz_sweep(lemma_cases, seed.wrapping_add(2))?;
    for (claim, rows, file) in [("pinching-norm", &pinch, "pinching.csv"), ("cauchy-schwarz", &cs, "cauchy_schwarz.csv")] {
        let start = Instant::now();
        let (table, excess) = inequality_table(file, rows);
        out.reports.push(
            VerificationReport::inequality(claim, excess, 0.0, INEQUALITY_TOL)
                .input("cases", rows.len())
                .input("seed", seed)
                .note("lhs is the largest excess of the left side over the right side")
                .timed(start),
        );
        out.tables.push(table);
    }
    Ok(out)
}

fn inequality_table(file: &str, rows: &[InequalityRow]) -> (Table, f64) {
    let mut table = Table::new(file, &["case", "V", "p", "site", "sign", "lhs", "rhs"]);
    let mut excess = f64::NEG_INFINITY;
    for r in rows {
        excess = excess.max(r.lhs - r.rhs);
        table.push(vec![
            r.case.to_string(),
            r.sites.to_string(),
            r.modes_per_site.to_string(),
            r.site.map(|s| s.to_string()).unwrap_or_default(),
            r.plus.map(|p| if p { "+" } else { "-" }.to_string()).unwrap_or_default(),
            num(r.lhs),
            num(r.rhs),
        ]);
    }
    (table, excess)
}

/// One input state of a sweep.
struct StateCase {
    sites: usize,
    modes_per_site: usize,
    mu: Option<f64>,
    label: String,
    /// The operator as given; a state only if `state` is `Ok`.
    operator: OperatorExpansion,
    state: Result<OperatorExpansion, String>,
}

fn state_cases(opts: &Opts, default_sites: &[usize], default_mu: &[f64]) -> Result<Vec<StateCase>, CliError> {
    let p = opts.p.unwrap_or(1);
    if let Some(path) = &opts.fixture {
        return Ok(vec![fixture_case(path, opts, p)?]);
    }
    if let Some(f) = &opts.family {
        if f.iter().any(|name| name != "mu") {
            return Err(CliError::Usage(format!("unknown state family {f:?} (expected `mu` or --fixture)")));
        }
    }
    let sites = opts.sites.clone().unwrap_or_else(|| default_sites.to_vec());
    let mus = opts.mu.clone().unwrap_or_else(|| default_mu.to_vec());
    let mut cases = Vec::new();
    for &v in &sites {
        for &mu in &mus {
            let params = MuFamilyParams {
                sites: v,
                modes_per_site: p,
                mu,
            };
            let operator = mu_family_operator(params)?;
            let state = instance(mu_family_state(params))?;
            cases.push(StateCase {
                sites: v,
                modes_per_site: p,
                mu: Some(mu),
                label: format!("{mu}"),
                operator,
                state,
            });
        }
    }
    Ok(cases)
}

fn fixture_case(path: &Path, opts: &Opts, p: usize) -> Result<StateCase, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read fixture {}: {e}", path.display())))?;
    let sites = match opts.sites.as_deref() {
        Some([v]) => *v,
        _ => return Err(CliError::Usage("a fixture needs exactly one --V".into())),
    };
    let shape = SystemShape::new(sites, p)?;
    let operator = OperatorExpansion::from_text(shape, &text)?;
    let state = instance(validate_expansion_state(&operator))?.map(|_| operator.clone());
    Ok(StateCase {
        sites,
        modes_per_site: p,
        mu: None,
        label: path.display().to_string(),
        operator,
        state,
    })
}

fn ks_for(opts: &Opts, sites: usize) -> Result<Vec<usize>, CliError> {
    match &opts.k {
        None => Ok((1..sites).collect()),
        Some(ks) => {
            if let Some(bad) = ks.iter().find(|&&k| k == 0 || k >= sites) {
                return Err(CliError::Usage(format!("k = {bad} outside 1..{sites}")));
            }
            Ok(ks.clone())
        }
    }
}

const ACCEPTANCE_SITES: [usize; 2] = [6, 8];
const ACCEPTANCE_MU: [f64; 5] = [0.0, 0.5, -0.5, 1.0, -1.0];

pub fn check_invariance_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let mut out = SuiteOutput::new("check-invariance");
    let mut table = Table::new(
        "invariance.csv",
        &["V", "p", "input", "condition1", "condition2", "full", "words", "permutations", "exhaustive", "pass", "status"],
    );
    for case in state_cases(opts, &ACCEPTANCE_SITES, &ACCEPTANCE_MU)? {
        let start = Instant::now();
        let (report, row) = match &case.state {
            Err(msg) => {
                let r = VerificationReport::property("invariance", f64::NAN, INVARIANCE_TOL, INVARIANCE_TOL, false)
                    .fail(format!("not a state: {msg}"));
                (r, vec![String::new(); 6].into_iter().chain(["false".into(), "not-a-state".into()]).collect::<Vec<_>>())
            }
            Ok(rho) => {
                let inv = check_invariance(rho, DEFAULT_DEGREE_CAP, INVARIANCE_TOL)?;
                let worst = inv.condition1_max_violation.max(inv.condition2_max_violation);
                let r = VerificationReport::property("invariance", worst, inv.tolerance, inv.tolerance, inv.is_invariant())
                    .note(format!("full permutation violation {:.3e}", inv.full_max_violation))
                    .note(format!(
                        "{} words, {} permutations ({})",
                        inv.checked_words,
                        inv.checked_permutations,
                        if inv.exhaustive { "exhaustive" } else { "sampled" }
                    ));
                let row = vec![
                    num(inv.condition1_max_violation),
                    num(inv.condition2_max_violation),
                    num(inv.full_max_violation),
                    inv.checked_words.to_string(),
                    inv.checked_permutations.to_string(),
                    inv.exhaustive.to_string(),
                    inv.is_invariant().to_string(),
                    "ok".into(),
                ];
                (r, row)
            }
        };
        let mut full = vec![case.sites.to_string(), case.modes_per_site.to_string(), case.label.clone()];
        full.extend(row);
        table.push(full);
        out.reports.push(
            report
                .input("V", case.sites)
                .input("p", case.modes_per_site)
                .input("input", &case.label)
                .timed(start),
        );
    }
    out.tables.push(table);
    Ok(out)
}

pub fn verify_lemma3_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let allow = opts.allow_nonpositive.unwrap_or(false);
    let mut out = SuiteOutput::new("verify-lemma3");
    let mut table = Table::new("lemma3.csv", &["V", "p", "input", "k", "lhs", "rhs", "pass", "status"]);
    for case in state_cases(opts, &ACCEPTANCE_SITES, &ACCEPTANCE_MU)? {
        for k in ks_for(opts, case.sites)? {
            let start = Instant::now();
            let rhs = lemma3_bound(case.modes_per_site, case.sites, k);
            let (report, status) = match &case.state {
                Ok(rho) => match instance(verify_lemma3(rho, k))? {
                    Ok(r) => (r, "ok"),
                    Err(msg) => {
                        let lhs = odd_part_distance(rho, k)?;
                        let r = VerificationReport::inequality("lemma3", lhs, rhs, 1e-9)
                            .fail(format!("precondition failed: {msg}"));
                        (r, "precondition-failed")
                    }
                },
                Err(msg) => {
                    let lhs = odd_part_distance(&case.operator, k)?;
                    let r = VerificationReport::inequality("lemma3", lhs, rhs, 1e-9);
                    if allow {
                        (r.note(format!("evaluated on an operator that is not a state: {msg}")), "operator")
                    } else {
                        (r.fail(format!("not a state: {msg}")), "not-a-state")
                    }
                }
            };
            let report = report
                .input("V", case.sites)
                .input("p", case.modes_per_site)
                .input("input", &case.label)
                .input("k", k)
                .timed(start);
            table.push(vec![
                case.sites.to_string(),
                case.modes_per_site.to_string(),
                case.label.clone(),
                k.to_string(),
                num(report.lhs),
                num(report.rhs),
                report.pass.to_string(),
                status.to_string(),
            ]);
            out.reports.push(report);
        }
    }
    out.tables.push(table);
    Ok(out)
}

fn optimizer_params(opts: &Opts, p: usize, seed: u64) -> OptimizerParams {
    let base = OptimizerParams::for_modes(p);
    OptimizerParams {
        components: opts.components.unwrap_or(base.components),
        restarts: opts.restarts.unwrap_or(base.restarts),
        iters: opts.iters.unwrap_or(base.iters),
        seed,
        ..base
    }
}

pub fn verify_theorem1_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let seed = opts.require_seed("verify-theorem1")?;
    let mut out = SuiteOutput::new("verify-theorem1");
    let mut table = Table::new(
        "theorem1.csv",
        &["V", "p", "input", "k", "distance", "bound", "components", "pass", "status"],
    );
    let mut comps = Table::new(
        "theorem1_components.csv",
        &["V", "p", "input", "k", "component", "weight", "purity", "off_diagonal"],
    );
    for case in state_cases(opts, &ACCEPTANCE_SITES, &ACCEPTANCE_MU)? {
        let params = optimizer_params(opts, case.modes_per_site, seed);
        for k in ks_for(opts, case.sites)? {
            let start = Instant::now();
            let (report, status, mixture) = match &case.state {
                Ok(rho) => match instance(certify_theorem1(rho, k, &params))? {
                    Ok(o) => {
                        let mut r = o.report;
                        if case.mu == Some(0.0) && o.distance >= ZERO_DISTANCE_TOL {
                            r = r.fail(format!("product input left distance {:.3e}", o.distance));
                        }
                        (r, "ok", Some(o.mixture))
                    }
                    Err(msg) => (
                        VerificationReport::inequality("theorem1", f64::NAN, theorem1_bound(case.modes_per_site, case.sites, k), 1e-9)
                            .fail(format!("precondition failed: {msg}")),
                        "precondition-failed",
                        None,
                    ),
                },
                Err(msg) => {
                    let keep: Vec<usize> = (1..=k).collect();
                    let reduced = to_matrix(&case.operator.reduce_to_sites(&keep)?)?;
                    let mut r = VerificationReport::inequality(
                        "theorem1",
                        f64::NAN,
                        theorem1_bound(case.modes_per_site, case.sites, k),
                        1e-9,
                    );
                    match instance(best_mixture_approx(&reduced, &params))? {
                        Ok((_, distance)) => {
                            r.lhs = distance;
                            r = r.note("distance of the reduced operator to the best mixture found");
                        }
                        Err(why) => r = r.note(format!("reduced operator: {why}")),
                    }
                    let r = r.fail(format!("not a state: {msg}"));
                    (r, "not-a-state", None)
                }
            };
            if let Some(m) = &mixture {
                for (l, (a, c)) in m.weights.iter().zip(&m.components).enumerate() {
                    comps.push(vec![
                        case.sites.to_string(),
                        case.modes_per_site.to_string(),
                        case.label.clone(),
                        k.to_string(),
                        l.to_string(),
                        num(*a),
                        num(c.purity()),
                        num(c.off_diagonal_mass()),
                    ]);
                }
            }
            let report = if status == "ok" {
                report
            } else {
                report.input("V", case.sites).input("p", case.modes_per_site).input("k", k)
            };
            let report = report.input("input", &case.label).timed(start);
            table.push(vec![
                case.sites.to_string(),
                case.modes_per_site.to_string(),
                case.label.clone(),
                k.to_string(),
                num(report.lhs),
                num(report.rhs),
                mixture.map(|m| m.len()).unwrap_or(0).to_string(),
                report.pass.to_string(),
                status.to_string(),
            ]);
            out.reports.push(report);
        }
    }
    out.tables.push(table);
    out.tables.push(comps);
    Ok(out)
}

fn clt_state(opts: &Opts) -> Result<SingleSiteState, CliError> {
    let n = opts.occupation.unwrap_or(2.0 / 3.0);
    if !(0.0..=1.0).contains(&n) {
        return Err(CliError::Usage(format!("occupation {n} outside [0, 1]")));
    }
    Ok(SingleSiteState::diagonal(1.0 - n)?)
}

/// Non-Gaussian two-mode state with correlated occupations.
pub fn correlated_pair() -> SingleSiteState {
    SingleSiteState::new(2, CMatrix::from_diag(&[0.4, 0.1, 0.1, 0.4])).expect("valid state")
}

fn resonant_quadruple(sites: usize, mode: usize) -> Vec<LadderIndex> {
    let q = fourier_labels(sites).into_iter().find(|&q| q != 0).unwrap_or(0);
    vec![
        LadderIndex::fourier(-1, mode, 0),
        LadderIndex::fourier(1, mode, 0),
        LadderIndex::fourier(-1, mode, q),
        LadderIndex::fourier(1, mode, q),
    ]
}

pub fn verify_clt_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let xi = clt_state(opts)?;
    let sites = opts.sites.clone().unwrap_or_else(|| vec![2, 3, 4]);
    let orders = opts.w.clone().unwrap_or_else(|| vec![2, 4]);
    let mut out = SuiteOutput::new("verify-clt");
    let mut table = Table::new(
        "lemma4.csv",
        &["V", "w", "ops", "direct_re", "direct_im", "closed_re", "closed_im", "abs_diff"],
    );
    for &v in &sites {
        for &w in &orders {
            let start = Instant::now();
            let rows = lemma4_sweep(&xi, v, w)?;
            let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
            for r in &rows {
                table.push(vec![
                    v.to_string(),
                    w.to_string(),
                    r.ops.clone(),
                    num(r.direct.re),
                    num(r.direct.im),
                    num(r.closed_form.re),
                    num(r.closed_form.im),
                    num(r.abs_diff),
                ]);
            }
            out.reports.push(
                VerificationReport::inequality("lemma4", worst, 0.0, LEMMA4_TOL)
                    .input("V", v)
                    .input("w", w)
                    .input("tuples", rows.len())
                    .timed(start),
            );
            if w == 2 {
                let off: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.closed_form.norm() == 0.0)
                    .map(|r| r.direct.norm())
                    .collect();
                let worst_off = off.iter().copied().fold(0.0, f64::max);
                out.reports.push(
                    VerificationReport::equality("delta-rule", worst_off, 0.0, DELTA_TOL)
                        .input("V", v)
                        .input("off_resonant", off.len()),
                );
            }
        }
    }
    out.tables.push(table);

    let mut supp = Table::new("suppression.csv", &["V", "ops", "lhs", "rhs", "K4_single", "ratio"]);
    let pair = correlated_pair();
    for v in 2..=8 {
        let ops = resonant_quadruple(v, 1);
        let start = Instant::now();
        let report = verify_suppression(&xi, v, &ops)?;
        let k4 = report.rhs * v as f64;
        let ratio = if k4 > K4_ZERO { report.lhs * v as f64 / k4 } else { f64::NAN };
        supp.push(vec![
            v.to_string(),
            definetti_core::cumulant::format_ops(&ops),
            num(report.lhs),
            num(report.rhs),
            num(k4),
            num(ratio),
        ]);
        out.reports.push(report);

        let mut eq = VerificationReport::equality("suppression-equality", ratio, 1.0, 1e-9)
            .input("V", v)
            .input("occupation", num(1.0 - xi.matrix()[(0, 0)].re))
            .timed(start);
        if !ratio.is_finite() {
            eq = eq.fail(format!(
                "ratio undefined: |K_4| of the single-mode state is {k4:.1e}; every even single-mode state is Gaussian"
            ));
            if v <= 6 {
                let check = verify_suppression(&pair, v, &resonant_pair_quadruple(v))?;
                let r = check.lhs / check.rhs;
                eq = eq.note(format!("two-mode correlated state diag(0.4,0.1,0.1,0.4) gives ratio {r:.12}"));
            }
        }
        out.reports.push(eq);
    }
    out.tables.push(supp);
    Ok(out)
}

fn resonant_pair_quadruple(sites: usize) -> Vec<LadderIndex> {
    let _ = sites;
    vec![
        LadderIndex::fourier(-1, 1, 0),
        LadderIndex::fourier(1, 1, 0),
        LadderIndex::fourier(-1, 2, 0),
        LadderIndex::fourier(1, 2, 0),
    ]
}

pub fn verify_corollary_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let p = opts.p.unwrap_or(2);
    let xi = match p {
        1 => clt_state(opts)?,
        2 => correlated_pair(),
        _ => return Err(CliError::Usage("verify-corollary supports p = 1 or p = 2".into())),
    };
    let ks = opts.k.clone().unwrap_or_else(|| vec![2, 3, 4, 5]);
    if ks.len() < 2 || ks.contains(&0) {
        return Err(CliError::Usage("the slope fit needs at least two k >= 1".into()));
    }
    let mut out = SuiteOutput::new("verify-corollary");
    let start = Instant::now();
    let (rows, slope) = product_deviation_scaling(&xi, &ks)?;
    let mut table = Table::new("corollary_slope.csv", &["p", "k", "deviation"]);
    for r in &rows {
        table.push(vec![p.to_string(), r.k.to_string(), num(r.deviation)]);
    }
    let mut report = VerificationReport::property("corollary-slope", slope, -1.0, 0.3, slope.is_finite() && (slope + 1.0).abs() <= 0.3)
        .input("p", p)
        .input("ks", ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
    if rows.iter().any(|r| r.deviation == 0.0) {
        report = report.fail("deviation vanishes for a Gaussian input; slope undefined");
    }
    out.reports.push(report.timed(start));
    out.tables.push(table);

    let seed = opts.seed.unwrap_or(0);
    let mut mu_table = Table::new("corollary_mu.csv", &["V", "mu", "k", "deviation", "rate", "constant", "pass"]);
    let sites = opts.sites.clone().unwrap_or_else(|| vec![6]);
    let mus = opts.mu.clone().unwrap_or_else(|| vec![0.0, 0.5]);
    for &v in &sites {
        for &mu in &mus {
            let params = MuFamilyParams {
                sites: v,
                modes_per_site: 1,
                mu,
            };
            let rho = match instance(mu_family_state(params))? {
                Ok(r) => r,
                Err(msg) => {
                    out.reports.push(
                        VerificationReport::property("corollary", f64::NAN, f64::NAN, 0.0, false)
                            .input("V", v)
                            .input("mu", mu)
                            .fail(format!("not a state: {msg}")),
                    );
                    continue;
                }
            };
            for &k in ks.iter().filter(|&&k| k < v) {
                let report = verify_corollary(&rho, k, &optimizer_params(opts, 1, seed))?.input("mu", mu);
                mu_table.push(vec![
                    v.to_string(),
                    format!("{mu}"),
                    k.to_string(),
                    num(report.lhs),
                    num(corollary_rate(v, k)),
                    num(report.lhs / report.rhs),
                    report.pass.to_string(),
                ]);
                out.reports.push(report);
            }
        }
    }
    out.tables.push(mu_table);
    Ok(out)
}

pub fn rdm_spectrum_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let sites = opts.sites.clone().unwrap_or_else(|| (2..=12).collect());
    let a = opts.a.unwrap_or(0.5);
    let branches: Vec<Complex64> = match (opts.b, opts.b_im) {
        (None, None) => vec![Complex64::new(0.05, 0.0), Complex64::new(0.05, 0.03)],
        (b, im) => vec![Complex64::new(b.unwrap_or(0.0), im.unwrap_or(0.0))],
    };
    let mut out = SuiteOutput::new("rdm-spectrum");
    let mut table = Table::new("rdm_spectrum.csv", &["V", "a", "b_re", "b_im", "k", "formula", "direct", "abs_diff"]);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_k0: f64 = 0.0;
    let mut singular = 0usize;
    for &b in &branches {
        for &v in &sites {
            let params = CirculantParams { sites: v, a, b };
            let rows = spectrum_rows(params)?;
            for r in &rows {
                match r.abs_diff {
                    Some(d) => worst = worst.max(d),
                    None => singular += 1,
                }
                table.push(vec![
                    v.to_string(),
                    num(a),
                    num(b.re),
                    num(b.im),
                    r.k.to_string(),
                    opt_num(r.formula),
                    num(r.direct),
                    opt_num(r.abs_diff),
                ]);
            }
            if b.im == 0.0 {
                if let Some(f0) = rows[0].formula {
                    worst_k0 = worst_k0.max((f0 - (a + b.re * (v as f64 - 1.0))).abs());
                }
            }
        }
    }
    let mut report = VerificationReport::inequality("rdm-spectrum", worst, 0.0, SPECTRUM_TOL)
        .input("a", num(a))
        .input("branches", branches.len())
        .timed(start);
    if singular > 0 {
        report = report.note(format!("{singular} singular k excluded"));
    }
    out.reports.push(report);
    if branches.iter().any(|b| b.im == 0.0) {
        out.reports.push(VerificationReport::equality("rdm-k0", worst_k0, 0.0, 1e-12).input("a", num(a)));
    }
    out.tables.push(table);

    let mut mu_table = Table::new("rdm_mu.csv", &["V", "mu", "b_abs", "bound", "min_eig", "max_eig", "pass"]);
    let mus = opts.mu.clone().unwrap_or_else(|| vec![0.0, 0.5, -0.5]);
    for &v in sites.iter().filter(|&&v| (2..=10).contains(&v)) {
        for &mu in &mus {
            let params = MuFamilyParams {
                sites: v,
                modes_per_site: 1,
                mu,
            };
            let Ok(rho) = instance(mu_family_state(params))? else {
                continue;
            };
            let gamma = one_rdm(&to_matrix(&rho)?)?;
            let report = verify_pauli_constraints(&gamma, true).input("mu", mu);
            let eig = gamma.eigenvalues();
            mu_table.push(vec![
                v.to_string(),
                format!("{mu}"),
                num(gamma.lower_value().norm()),
                num(definetti_core::rdm::off_diagonal_bound(v)),
                num(eig[0]),
                num(eig[eig.len() - 1]),
                report.pass.to_string(),
            ]);
            out.reports.push(report);
        }
    }
    out.tables.push(mu_table);
    Ok(out)
}

pub const DEFAULT_FAMILIES: [HamiltonianFamily; 4] = [
    HamiltonianFamily::Field,
    HamiltonianFamily::PairHopping,
    HamiltonianFamily::Interacting,
    HamiltonianFamily::Hubbard,
];

pub fn gs_bound_suite(opts: &Opts) -> Result<SuiteOutput, CliError> {
    let seed = opts.require_seed("gs-bound")?;
    let families = match &opts.family {
        None => DEFAULT_FAMILIES.to_vec(),
        Some(names) => names
            .iter()
            .map(|n| HamiltonianFamily::from_name(n).map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?,
    };
    let sites = opts.sites.clone().unwrap_or_else(|| vec![6]);
    let search = ProductSearch {
        restarts: opts.restarts.unwrap_or(8),
        iters: opts.iters.unwrap_or(400),
        seed,
    };
    let mut out = SuiteOutput::new("gs-bound");
    let mut table = Table::new(
        "gs_bound.csv",
        &["family", "V", "p", "k", "e_ground", "e_product", "gap", "bound", "degeneracy", "invariance_violation", "label", "pass"],
    );
    for &v in &sites {
        for &family in &families {
            let spec = family.spec(v)?;
            let (res, report) = verify_gs_bound(&spec, &search)?;
            table.push(vec![
                family.name().to_string(),
                v.to_string(),
                family.modes_per_site().to_string(),
                family.k().to_string(),
                num(res.e_ground),
                num(res.e_product_min),
                num(res.gap),
                num(res.bound),
                res.degeneracy.to_string(),
                num(res.invariance_violation),
                res.label.as_str().to_string(),
                res.pass.to_string(),
            ]);
            out.reports.push(report.input("family", family.name()));
        }
    }
    out.tables.push(table);

    // mixtures found for the reduced states of the mu family
    let mut conv = Table::new("gs_convexity.csv", &["family", "V", "mu", "k", "mixture_energy", "product_min", "pass"]);
    let params = optimizer_params(opts, 1, seed);
    for &v in &sites {
        for mu in [0.0, 0.5, -0.5] {
            let Ok(rho) = instance(mu_family_state(MuFamilyParams {
                sites: 6,
                modes_per_site: 1,
                mu,
            }))?
            else {
                continue;
            };
            for k in [2, 3] {
                let outcome = certify_theorem1(&rho, k, &params)?;
                for &family in families.iter().filter(|f| f.modes_per_site() == 1) {
                    let spec = family.spec(v)?;
                    let report = verify_convexity(&spec, &outcome.mixture, &search)?
                        .input("family", family.name())
                        .input("mu", mu)
                        .input("mixture_k", k);
                    conv.push(vec![
                        family.name().to_string(),
                        v.to_string(),
                        format!("{mu}"),
                        k.to_string(),
                        num(report.rhs),
                        num(report.lhs),
                        report.pass.to_string(),
                    ]);
                    out.reports.push(report);
                }
            }
        }
    }
    out.tables.push(conv);
    Ok(out)
}

pub fn run_suite(command: &str, opts: &Opts) -> Result<SuiteOutput, CliError> {
    match command {
        "check-algebra" => check_algebra(opts),
        "check-invariance" => check_invariance_suite(opts),
        "verify-lemma3" => verify_lemma3_suite(opts),
        "verify-theorem1" => verify_theorem1_suite(opts),
        "verify-clt" => verify_clt_suite(opts),
        "verify-corollary" => verify_corollary_suite(opts),
        "rdm-spectrum" => rdm_spectrum_suite(opts),
        "gs-bound" => gs_bound_suite(opts),
        other => Err(CliError::Usage(format!("unknown command {other}"))),
    }
}
