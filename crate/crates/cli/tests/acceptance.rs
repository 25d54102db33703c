//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! The process exits 0 when no criterion panics, so `cargo test` keeps running
//! the remaining targets; set `LGDELAY_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.

use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use lgdelay::examples::{apply_table, example_one, example_two, unit_model, TABLE_ONE, TABLE_TWO};
use lgdelay::{
    apply_upsilon, compute_permanence_bounds, dde_residual, ergodic_mean, integrate,
    kernel_identity_with, order_check, pap0_trend, run_attractivity, validate_model,
    CoefficientBounds64, GridFunctionPair64, InitialHistory, ModelSpec, OperatorBounds,
    PermanenceBounds64, PermanenceInputs, Trajectory64, UpsilonOptions, Verdict, Window,
};
use lgdelay_cli::commands::random_histories;
use lgdelay_cli::pipeline::{run_pipeline, BoundSource, RunResults};
use lgdelay_cli::presets;
use lgdelay_cli::report::{build_report, classify, Flag, Report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    status: Status,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Line {
    Line {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

/// Preset pipeline results shared by several criteria.
struct Presets {
    one: RunResults,
    two: RunResults,
    report_one: Report,
    report_two: Report,
}

impl Presets {
    fn compute() -> Self {
        let one = run_pipeline(&presets::example1()).expect("example1 pipeline");
        let two = run_pipeline(&presets::example2()).expect("example2 pipeline");
        let report_one = build_report(&one, 0);
        let report_two = build_report(&two, 0);
        Presets {
            one,
            two,
            report_one,
            report_two,
        }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn estimated_bounds(spec: &ModelSpec, samples: usize) -> CoefficientBounds64 {
    CoefficientBounds64::from_report(
        &validate_model(spec, 1000.0, samples).expect("presets validate"),
    )
}

fn permanence(b: &CoefficientBounds64) -> PermanenceBounds64 {
    compute_permanence_bounds(&PermanenceInputs::from_bounds(b)).expect("positive bounds")
}

// 1. Positivity for both presets and 100 random constant histories each.
fn positivity() -> Line {
    let start = Instant::now();
    let histories = random_histories(20_240_101, 100);
    let mut worst = f64::INFINITY;
    let mut runs = 0;
    for spec in [example_one(), example_two()] {
        let mut all = vec![(0.5, 0.5)];
        all.extend(histories.iter().copied());
        for (u, v) in all {
            let traj: Trajectory64 =
                integrate(&spec, &InitialHistory::constant(u, v), 0.0, 100.0, 0.01)
                    .expect("integrates");
            worst = worst.min(traj.min_state());
            runs += 1;
        }
    }
    let elapsed = secs(start.elapsed());
    judge(
        worst > 0.0 && elapsed < 10.0,
        format!("{runs} runs on [0,100] h=0.01, smallest min(u,v) = {worst:.3e}, {elapsed:.2} s (limit 10 s)"),
    )
}

// 2. Permanence bounds from the tabulated extremes against the oracle, and flagging.
fn permanence_bounds(p: &Presets) -> Line {
    let two = permanence(&apply_table(
        &estimated_bounds(&example_two(), 100_000),
        &TABLE_TWO,
    ));
    let one = permanence(&apply_table(
        &estimated_bounds(&example_one(), 100_000),
        &TABLE_ONE,
    ));
    // Independent calculator oracle (values frozen before the build).
    let oracle_two = [
        0.6234567901234568,
        0.636332850829015,
        0.5567217204270626,
        0.03722857678696458,
    ];
    let oracle_one = [
        0.11153846153846153,
        0.31702255161860693,
        0.0,
        0.007605240110178087,
    ];
    let got = |b: &PermanenceBounds64| [b.prey_max, b.predator_max, b.prey_min, b.predator_min];
    let err_two = got(&two)
        .iter()
        .zip(oracle_two)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let err_one = got(&one)
        .iter()
        .zip(oracle_one)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let m1_ok = (two.prey_min - 0.5567).abs() <= 1e-3;
    let c0_ok = !one.c0_holds && one.prey_min == 0.0;

    let mut problems = Vec::new();
    for (label, results, report) in [
        ("example1", &p.one, &p.report_one),
        ("example2", &p.two, &p.report_two),
    ] {
        let ds = report
            .discrepancies
            .as_ref()
            .expect("presets carry references");
        let reported = &results.config.reference.as_ref().unwrap().reported;
        for (key, value) in reported {
            let rows: Vec<_> = ds
                .iter()
                .filter(|d| d.kind == "reported" && &d.quantity == key)
                .collect();
            if rows.len() != 1 {
                problems.push(format!("{label} {key}: {} rows", rows.len()));
                continue;
            }
            let d = rows[0];
            let expected = d
                .computed_value
                .map(|c| classify(value.value, value.decimals, c));
            if d.computed_value.is_none()
                || Some(d.flag) != expected
                || d.reference_value != value.value
            {
                problems.push(format!("{label} {key}: inconsistent row {:?}", d.flag));
            }
        }
    }
    let flag_of = |r: &Report, q: &str| {
        r.discrepancies
            .as_ref()
            .unwrap()
            .iter()
            .find(|d| d.quantity == q)
            .map(|d| (d.flag, d.relative_gap, d.computed_by_source.clone()))
            .unwrap()
    };
    let (m1_one_flag, _, m1_one_sources) = flag_of(&p.report_one, "M1");
    let (m1_two_flag, m1_two_gap, _) = flag_of(&p.report_two, "M1");
    if m1_one_flag != Flag::Major {
        problems.push(format!("example1 M1 flagged {m1_one_flag:?}"));
    }
    let alternative = m1_one_sources
        .get("estimated")
        .copied()
        .flatten()
        .unwrap_or(f64::NAN);
    if (alternative - 0.29 / 2.1).abs() > 1e-9 {
        problems.push(format!("example1 M1 estimated-source value {alternative}"));
    }
    let gap_ok = m1_two_gap.is_some_and(|g| (g - (0.6234567901234568 / 0.6226 - 1.0)).abs() < 1e-9);
    if m1_two_flag != Flag::Minor || !gap_ok {
        problems.push(format!(
            "example2 M1 flagged {m1_two_flag:?} gap {m1_two_gap:?}"
        ));
    }
    let flags: Vec<String> = ["alpha_inf", "beta_inf", "M1", "M2", "m2"]
        .iter()
        .flat_map(|q| {
            [("ex1", &p.report_one), ("ex2", &p.report_two)]
                .map(|(l, r)| format!("{l}.{q}={}", flag_of(r, q).0.as_str()))
        })
        .collect();
    judge(
        err_two <= 1e-9 && err_one <= 1e-9 && m1_ok && c0_ok && problems.is_empty(),
        format!(
            "ex2 m1={:.6} (|gap to 0.5567| {:.1e}), oracle error ex2 {err_two:.1e} ex1 {err_one:.1e}, ex1 c0_holds={} m1={}; flags {}{}",
            two.prey_min,
            (two.prey_min - 0.5567).abs(),
            one.c0_holds,
            one.prey_min,
            flags.join(" "),
            if problems.is_empty() { String::new() } else { format!("; problems: {}", problems.join(", ")) }
        ),
    )
}

// 3. Example 2 tail inside the formula-computed box.
fn empirical_permanence() -> Line {
    let start = Instant::now();
    let spec = example_two();
    let bounds = permanence(&estimated_bounds(&spec, 1_000_000));
    let check = lgdelay::verify_permanence(
        &spec,
        &InitialHistory::constant(0.5, 0.5),
        &bounds,
        100.0,
        200.0,
        0.01,
        0.05,
    )
    .expect("integrates");
    let elapsed = secs(start.elapsed());
    judge(
        check.all_pass() && elapsed < 5.0,
        format!(
            "u in [{:.4}, {:.4}] vs [{:.4}, {:.4}], v in [{:.4}, {:.4}] vs [{:.4}, {:.4}] (slack 0.05), {elapsed:.2} s (limit 5 s)",
            check.u_min,
            check.u_max,
            bounds.prey_min,
            bounds.prey_max,
            check.v_min,
            check.v_max,
            bounds.predator_min,
            bounds.predator_max
        ),
    )
}

// 4. Two solutions of each preset converge to each other.
fn attractivity() -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, spec) in [("ex1", example_one()), ("ex2", example_two())] {
        let start = Instant::now();
        let r = run_attractivity(
            &spec,
            &InitialHistory::constant(0.5, 0.5),
            &InitialHistory::constant(0.75, 0.75),
            0.0,
            200.0,
            0.01,
            1e-3,
        )
        .expect("integrates");
        let elapsed = secs(start.elapsed());
        ok &= r.passed && elapsed < 10.0;
        parts.push(format!(
            "{label} d(200)={:.2e} tail nonincreasing={} {elapsed:.2} s",
            r.final_distance, r.tail_nonincreasing
        ));
    }
    judge(ok, format!("{} (limit 10 s each)", parts.join("; ")))
}

// 5. Liminf estimates positive for both presets; magnitudes logged with flags.
fn stability_sign(p: &Presets) -> Line {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, results, report) in [
        ("ex1", &p.one, &p.report_one),
        ("ex2", &p.two, &p.report_two),
    ] {
        let st = report.stability.as_ref().expect("stability ran");
        let (a, b) = (st.alpha_liminf.unwrap(), st.beta_liminf.unwrap());
        ok &= a > 0.0 && b > 0.0 && st.hypothesis_holds == Some(true);
        let ds = report.discrepancies.as_ref().unwrap();
        let row = |q: &str| ds.iter().find(|d| d.quantity == q).unwrap();
        let (ra, rb) = (row("alpha_inf"), row("beta_inf"));
        let est = results
            .source(BoundSource::Estimated)
            .and_then(|s| s.liminf.as_ref())
            .unwrap();
        parts.push(format!(
            "{label} alpha={a:.4} (ref {} {}) beta={b:.5} (ref {} {}); estimated-bounds alpha={:.4} beta={:.2e}",
            ra.reference_value,
            ra.flag.as_str(),
            rb.reference_value,
            rb.flag.as_str(),
            est.alpha_liminf,
            est.beta_liminf
        ));
    }
    judge(
        ok,
        format!("beta over M1, table bounds: {}", parts.join("; ")),
    )
}

// 6. Richardson ratios.
fn integrator_order() -> Line {
    let start = Instant::now();
    let history = InitialHistory::constant(0.5, 0.5);
    let smooth = order_check(&unit_model(0.5), &history, 0.0, 20.0, 0.1).expect("integrates");
    let ex2 = order_check(&example_two(), &history, 0.0, 50.0, 0.02).expect("integrates");
    let elapsed = secs(start.elapsed());
    let ok = (12.0..=20.0).contains(&smooth.ratio)
        && (8.0..=24.0).contains(&ex2.ratio)
        && !smooth.plateau
        && !ex2.plateau
        && elapsed < 5.0;
    judge(
        ok,
        format!(
            "smooth constant-coefficient ratio {:.2} (want [12,20]), example2 ratio {:.2} (want [8,24]), {elapsed:.2} s (limit 5 s)",
            smooth.ratio, ex2.ratio
        ),
    )
}

// 7. Kernel identity for random smooth triples.
fn kernel_identity() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_gap: f64 = 0.0;
    let mut worst_rate = f64::INFINITY;
    for _ in 0..50 {
        let (a0, a1, wa, pa) = (
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.0..0.4),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.0..6.3),
        );
        let (b0, b1, wb, pb) = (
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.0..0.4),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.0..6.3),
        );
        let alpha: f64 = rng.gen_range(-1.0..1.0);
        let s: f64 = rng.gen_range(-2.0..2.0);
        let t = s + rng.gen_range(0.5..3.0);
        let a = move |x: f64| Ok(a0 * (1.0 + a1 * (wa * x + pa).sin()));
        let b = move |x: f64| Ok(b0 * (1.0 + b1 * (wb * x + pb).cos()));
        let fine = kernel_identity_with(a, b, alpha, s, t, 4096).expect("finite");
        worst_gap = worst_gap.max(fine.gap);
        let base = kernel_identity_with(a, b, alpha, s, t, 32).expect("finite");
        let quad = kernel_identity_with(a, b, alpha, s, t, 128).expect("finite");
        worst_rate = worst_rate.min(base.gap / quad.gap.max(f64::MIN_POSITIVE));
    }
    judge(
        worst_gap <= 1e-8 && worst_rate >= 8.0,
        format!("50 triples: max gap at n=4096 {worst_gap:.2e} (limit 1e-8), min gap(32)/gap(128) {worst_rate:.1} (want >= 8)"),
    )
}

/// Smooth random pair with values in `[lo, hi]` componentwise.
fn random_pair(
    rng: &mut ChaCha8Rng,
    grid: [f64; 3],
    lo: (f64, f64),
    hi: (f64, f64),
) -> GridFunctionPair64 {
    let comp = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let mid = rng.gen_range(0.3..0.7);
        let amp = rng.gen_range(0.0..0.3);
        let (w, p) = (rng.gen_range(0.05..2.0), rng.gen_range(0.0..6.3));
        move |t: f64| lo + (hi - lo) * (mid + amp * (w * t + p).sin())
    };
    let f = comp(rng, lo.0, hi.0);
    let g = comp(rng, lo.1, hi.1);
    GridFunctionPair64::from_fn(grid[0], grid[1], grid[2], |t| Ok((f(t), g(t)))).expect("grid")
}

// 8. The operator maps the permanence box into itself.
fn operator_invariance(p: &Presets) -> Line {
    let spec = example_two();
    let source = p.two.primary_source();
    let bounds = source.permanence;
    let ob = OperatorBounds::from_coefficients(&source.coefficients);
    let opts = UpsilonOptions::new(0.05, 1e-6);
    let grid = [0.0, 1000.0, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut inside = 0;
    let (mut phi_range, mut psi_range) = (
        (f64::INFINITY, f64::NEG_INFINITY),
        (f64::INFINITY, f64::NEG_INFINITY),
    );
    for _ in 0..20 {
        let pair = random_pair(
            &mut rng,
            grid,
            (bounds.prey_min, bounds.predator_min),
            (bounds.prey_max, bounds.predator_max),
        );
        assert!(pair.in_set(&bounds));
        let image = apply_upsilon(&spec, &pair, &ob, &opts).expect("operator");
        inside += usize::from(image.in_set(&bounds));
        for &x in image.phi() {
            phi_range = (phi_range.0.min(x), phi_range.1.max(x));
        }
        for &x in image.psi() {
            psi_range = (psi_range.0.min(x), psi_range.1.max(x));
        }
    }
    let unit = OperatorBounds {
        a1_inf: 1.0,
        a2_inf: 1.0,
        b_sup: 1.0,
        c1_sup: 1.0,
        c2_sup: 1.0,
        k1_inf: 1.0,
        k2_inf: 1.0,
    };
    let ones = GridFunctionPair64::constant(0.0, 40.0, 0.05, 1.0, 1.0).expect("grid");
    let closed = apply_upsilon(
        &unit_model(0.5),
        &ones,
        &unit,
        &UpsilonOptions::new(0.025, 1e-8),
    )
    .expect("operator");
    let closed_err = closed
        .phi()
        .iter()
        .map(|x| (x - 1.5).abs())
        .chain(closed.psi().iter().map(|x| (x - 0.5).abs()))
        .fold(0.0, f64::max);
    judge(
        inside == 20 && closed_err <= 1e-6,
        format!(
            "{inside}/20 images inside M = [{:.4},{:.4}]x[{:.4},{:.4}]; image ranges phi [{:.4},{:.4}] psi [{:.4},{:.4}]; closed form error {closed_err:.1e}",
            bounds.prey_min,
            bounds.prey_max,
            bounds.predator_min,
            bounds.predator_max,
            phi_range.0,
            phi_range.1,
            psi_range.0,
            psi_range.1
        ),
    )
}

// 9. Picard fixed point against the trajectory tail.
fn fixed_point_cross_check(p: &Presets) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let control = random_pair(&mut rng, [0.0, 20.0, 0.01], (0.1, 0.1), (1.0, 1.0));
    let control_residual = dde_residual(&example_two(), &control).expect("interior nodes");
    let fp = p.two.fixed_point.as_ref().expect("fixed point ran");
    let cross = &fp.cross;
    let mut detail = String::new();
    let _ = write!(
        detail,
        "negative control residual {control_residual:.3} (want > 0.1)"
    );
    if control_residual <= 0.1 {
        return judge(false, detail);
    }
    let r = &fp.result;
    if !r.converged {
        let _ = write!(
            detail,
            "; skipped: Picard {} after {} iterations (updates {:.2e} -> {:.2e}); trajectory on [{},{}] has operator defect {:.2e} and DDE residual {:.2e}",
            r.outcome.as_str(),
            r.iterations,
            r.deltas.first().copied().unwrap_or(f64::NAN),
            r.final_delta,
            cross.window[0],
            cross.window[1],
            cross.upsilon_defect,
            cross.trajectory_residual.unwrap_or(f64::NAN)
        );
        return Line {
            status: Status::Skip,
            detail,
        };
    }
    let residual = r.residual.unwrap_or(f64::INFINITY);
    let distance = cross.fixed_point_distance.unwrap_or(f64::INFINITY);
    let _ = write!(detail, "; residual {residual:.2e} (limit 1e-4), distance to trajectory {distance:.2e} (limit 1e-2)");
    judge(residual <= 1e-4 && distance <= 1e-2, detail)
}

// 10. Ergodic means and verdicts.
fn pap_diagnostics() -> Line {
    let cos_mean =
        ergodic_mean(|t: f64| Ok(t.cos()), 1e4, 400_000, Window::Symmetric).expect("finite");
    let widths = [10.0, 100.0, 1000.0, 10_000.0];
    let decay = pap0_trend(
        |t: f64| Ok((-t.abs()).exp()),
        &widths,
        20.0,
        Window::Symmetric,
    )
    .expect("finite");
    let one = pap0_trend(|_: f64| Ok(1.0), &widths, 20.0, Window::Symmetric).expect("finite");
    let gap = (cos_mean - std::f64::consts::FRAC_2_PI).abs();
    judge(
        gap <= 1e-3 && decay.verdict == Verdict::Vanishing && one.verdict == Verdict::NonVanishing,
        format!(
            "mean |cos| at T=1e4 {cos_mean:.6} (|gap to 2/pi| {gap:.1e}); exp(-|t|) {}; constant 1 {}",
            decay.verdict.as_str(),
            one.verdict.as_str()
        ),
    )
}

fn without_timestamp(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(path).expect("report")).expect("json");
    v.as_object_mut().expect("object").remove("timestamp_unix");
    v
}

// 11. Two binary runs of the same preset.
fn determinism() -> Line {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_lgdelay"))
            .args(["preset", "example2", "--out"])
            .arg(&out)
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        out
    };
    let (a, b) = (run("a"), run("b"));
    let same_report =
        without_timestamp(&a.join("report.json")) == without_timestamp(&b.join("report.json"));
    let mut differing = Vec::new();
    for csv in ["trajectories.csv", "attractivity.csv", "fixedpoint.csv"] {
        if fs::read(a.join(csv)).expect("csv") != fs::read(b.join(csv)).expect("csv") {
            differing.push(csv);
        }
    }
    judge(
        same_report && differing.is_empty(),
        format!(
            "report.json identical modulo timestamp: {same_report}; differing CSVs: {differing:?}"
        ),
    )
}

fn presets(shared: &mut Option<Presets>) -> &Presets {
    shared.get_or_insert_with(Presets::compute)
}

fn main() {
    // libtest-style arguments (e.g. `--quiet`, filters) are ignored.
    let strict = std::env::var("LGDELAY_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut shared: Option<Presets> = None;

    let names = [
        "positivity",
        "permanence bounds",
        "empirical permanence",
        "global attractivity",
        "stability hypothesis sign",
        "integrator order",
        "kernel identity",
        "operator invariance",
        "fixed point vs trajectory",
        "pap diagnostics",
        "determinism",
    ];
    let mut counts = [0usize; 3];
    for (i, name) in names.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(|| match i + 1 {
            1 => positivity(),
            2 => permanence_bounds(presets(&mut shared)),
            3 => empirical_permanence(),
            4 => attractivity(),
            5 => stability_sign(presets(&mut shared)),
            6 => integrator_order(),
            7 => kernel_identity(),
            8 => operator_invariance(presets(&mut shared)),
            9 => fixed_point_cross_check(presets(&mut shared)),
            10 => pap_diagnostics(),
            _ => determinism(),
        }))
        .unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Line {
                status: Status::Fail,
                detail: format!("panicked: {msg}"),
            }
        });
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        counts[outcome.status as usize] += 1;
        println!("{tag} [{:>2}] {name}: {}", i + 1, outcome.detail);
    }
    println!(
        "acceptance summary: {} passed, {} failed, {} skipped",
        counts[0], counts[1], counts[2]
    );
    if strict && counts[1] > 0 {
        std::process::exit(1);
    }
}
