//! Acceptance suite: one PASS/FAIL line per criterion, exit status nonzero
//! when any criterion fails. Runs as a plain binary so the lines always show.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use plm_core::analytics::{
    assumption_int_check, assumption_reg_check, hole_bounds_check, hole_probability_at_cutoff,
    hole_probability_exact, hole_probability_mc, ols, radius_tail_vs_hole, Verdict, DEFAULT_TOLERANCE,
    RHO_RATIO_LIMIT,
};
use plm_core::cover::{cover_trial, verify_cover_properties, Cover, CoverOptions};
use plm_core::matching::{hall_check_bruteforce, match_sites, match_window};
use plm_core::oned::{
    audit_blocking, tail_curve_m0, truncated_moment_curve, variance_exact, MomentVerdict, BOOTSTRAP_REPS,
};
use plm_core::rng::{rng_from, trial_seed};
use plm_core::{sample_realization, Cube, DyadicBox, Error, PerturbationLaw};

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

struct Suite {
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn record(&mut self, id: u32, budget_s: Option<u64>, start: Instant, pass: bool, detail: String) {
        let elapsed = start.elapsed();
        let budget = budget_s.map(Duration::from_secs);
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let o = Outcome { id, pass: pass && in_time, detail, elapsed, budget };
        let budget_note = o.budget.map(|b| format!(" / budget {:.0}s", b.as_secs_f64())).unwrap_or_default();
        let time_note = if in_time { "" } else { " [over time budget]" };
        println!(
            "criterion {:>2}: {} ({:.1}s{budget_note}){time_note} {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.elapsed.as_secs_f64(),
            o.detail
        );
        self.outcomes.push(o);
    }
}

fn gaussian(sigma: f64, d: usize) -> PerturbationLaw {
    PerturbationLaw::gaussian(sigma, d).unwrap()
}

fn poly_coord(alpha: f64, d: usize) -> PerturbationLaw {
    PerturbationLaw::poly_coord(alpha, d).unwrap()
}

fn pow2(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

/// Exponent of `-log h(r)` against `r` by least squares on `ln r`.
fn hole_slope(law: &PerturbationLaw, grid: &[f64]) -> Result<(f64, Vec<f64>), Error> {
    let logs: Vec<f64> =
        grid.iter().map(|&r| hole_probability_exact(law, r, DEFAULT_TOLERANCE).map(|h| h.log_h)).collect::<Result<_, _>>()?;
    let pts: Vec<(f64, f64)> = grid.iter().zip(&logs).map(|(r, l)| (r.ln(), (-l).ln())).collect();
    Ok((ols(&pts)?.slope, logs))
}

fn criterion_hole_exponent(s: &mut Suite, id: u32, d: usize, lo: f64, hi: f64, budget: u64) {
    let t = Instant::now();
    let grid = pow2(1, 5);
    match hole_slope(&gaussian(1.0, d), &grid) {
        Ok((slope, logs)) => {
            let local: Vec<String> = logs.windows(2).map(|w| format!("{:.3}", (w[1] / w[0]).ln() / 2f64.ln())).collect();
            s.record(
                id,
                Some(budget),
                t,
                (lo..=hi).contains(&slope),
                format!("Gaussian d={d}: slope {slope:.4}, target [{lo}, {hi}]; local slopes {}", local.join(" ")),
            );
        }
        Err(e) => s.record(id, Some(budget), t, false, format!("error: {e}")),
    }
}

fn criterion_3(s: &mut Suite) {
    let t = Instant::now();
    let grid = pow2(3, 7);
    let laws = [poly_coord(2.0, 1), PerturbationLaw::poly_radial(2.0, 2).unwrap(), poly_coord(2.0, 2)];
    let mut pass = true;
    let mut parts = Vec::new();
    for law in &laws {
        let d = law.dim() as i32;
        let ratios: Result<Vec<f64>, Error> = grid
            .iter()
            .map(|&r| hole_probability_exact(law, r, DEFAULT_TOLERANCE).map(|h| -h.log_h / (r.powi(d) * r.ln())))
            .collect();
        match ratios {
            Ok(v) => {
                let max = v.iter().cloned().fold(f64::MIN, f64::max);
                let min = v.iter().cloned().fold(f64::MAX, f64::min);
                pass &= min > 0.0 && max / min <= 4.0;
                parts.push(format!("{law} d={d}: max/min {:.3}", max / min));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{law} d={d}: error {e}"));
            }
        }
    }
    s.record(3, Some(30), t, pass, format!("{} (limit 4)", parts.join("; ")));
}

fn criterion_4(s: &mut Suite) {
    let t = Instant::now();
    let cases = [
        (gaussian(1.0, 2), pow2(1, 5)),
        (gaussian(1.0, 1), pow2(1, 5)),
        (poly_coord(2.0, 1), pow2(3, 7)),
        (PerturbationLaw::poly_radial(2.0, 2).unwrap(), pow2(3, 7)),
        (poly_coord(2.0, 2), pow2(3, 7)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (law, grid) in &cases {
        match hole_bounds_check(law, grid, RHO_RATIO_LIMIT) {
            Ok(rep) => {
                pass &= rep.pass;
                parts.push(format!("{law} d={}: ρ ∈ [{:.3e}, {:.3e}] ratio {:.2}", rep.d, rep.rho_min, rep.rho_max, rep.ratio));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{law}: error {e}"));
            }
        }
    }
    s.record(4, None, t, pass, format!("{} (limit {RHO_RATIO_LIMIT})", parts.join("; ")));
}

/// Doubling the cutoff moves log h by less than the reported bound.
fn hole_truncation_invariant() -> (bool, String) {
    let cases = [
        (gaussian(1.0, 2), pow2(1, 5)),
        (gaussian(1.0, 1), pow2(1, 5)),
        (poly_coord(2.0, 1), pow2(3, 7)),
        (PerturbationLaw::poly_radial(2.0, 2).unwrap(), pow2(3, 7)),
        (poly_coord(2.0, 2), pow2(3, 7)),
    ];
    let mut worst: f64 = 0.0;
    for (law, grid) in &cases {
        for &r in grid {
            let (h, doubled) = match hole_probability_exact(law, r, DEFAULT_TOLERANCE)
                .and_then(|h| hole_probability_at_cutoff(law, r, 2 * h.cutoff).map(|dbl| (h, dbl)))
            {
                Ok(x) => x,
                Err(e) => return (false, format!("{law} r={r}: {e}")),
            };
            let change = (h.log_h - doubled.log_h).abs();
            if change > h.bound {
                return (false, format!("{law} r={r}: change {change:.3e} > bound {:.3e}", h.bound));
            }
            worst = worst.max(change / h.bound.max(f64::MIN_POSITIVE));
        }
    }
    (true, format!("largest change/bound {worst:.3}"))
}

#[derive(Default)]
struct CoverTally {
    trials: u64,
    cover_ok: u64,
    margin_failures: u64,
    saturated: u64,
    distance_ok: u64,
    errors: Vec<String>,
}

fn cover_batch(law: &PerturbationLaw, l: i64, trials: u64, seed: u64) -> CoverTally {
    let opts = CoverOptions::default();
    let rows: Vec<(bool, bool, bool, bool, Option<String>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial = match cover_trial(law, l, trial_seed(seed, t), &opts) {
                Ok(x) => x,
                Err(e) => {
                    let margin = matches!(e, Error::MarginInsufficient(_));
                    return (false, margin, false, false, Some(e.to_string()));
                }
            };
            let cover_ok = verify_cover_properties(&trial.realization, &trial.fields).map(|r| r.passed()).unwrap_or(false);
            match match_window(&trial.realization, &trial.fields, trial.realization.core()) {
                Ok(m) => (cover_ok, false, true, m.distance_violations.is_empty(), None),
                Err(e) => (cover_ok, false, false, false, Some(e.to_string())),
            }
        })
        .collect();
    let mut tally = CoverTally { trials, ..Default::default() };
    for (c, m, sat, dist, err) in rows {
        tally.cover_ok += c as u64;
        tally.margin_failures += m as u64;
        tally.saturated += sat as u64;
        tally.distance_ok += dist as u64;
        tally.errors.extend(err);
    }
    tally
}

fn criteria_5_6(s: &mut Suite) {
    let t = Instant::now();
    let a = cover_batch(&gaussian(1.0, 2), 32, 500, 5);
    let b = cover_batch(&gaussian(1.0, 1), 256, 500, 6);
    let pass5 = [&a, &b].iter().all(|x| x.cover_ok == x.trials && x.margin_failures == 0);
    let first_error = a.errors.iter().chain(&b.errors).next().map(|e| format!("; first error: {e}")).unwrap_or_default();
    s.record(
        5,
        Some(300),
        t,
        pass5,
        format!(
            "d=2 L=32: {}/{} covers pass, {} MarginInsufficient; d=1 L=256: {}/{} pass, {} MarginInsufficient{first_error}",
            a.cover_ok, a.trials, a.margin_failures, b.cover_ok, b.trials, b.margin_failures
        ),
    );
    let t6 = Instant::now();
    let pass6 = [&a, &b].iter().all(|x| x.saturated == x.trials && x.distance_ok == x.trials);
    s.record(
        6,
        None,
        t6,
        pass6,
        format!(
            "deep interior saturated in {}/{} and {}/{}; distance bound held in {}/{} and {}/{}",
            a.saturated, a.trials, b.saturated, b.trials, a.distance_ok, a.trials, b.distance_ok, b.trials
        ),
    );
}

fn criterion_7(s: &mut Suite) {
    let t = Instant::now();
    let region = Cube::centered(1, 5);
    let sites: Vec<_> = region.sites().collect();
    let mut agree = 0;
    let mut hall_true = 0;
    let mut detail_err = String::new();
    for i in 0..50u64 {
        // half the instances use the constructed cover, half bare unit cells,
        // which violate Hall's condition whenever points wander off
        let (real, cover) = if i % 2 == 0 {
            let law = [gaussian(0.5, 1), gaussian(1.0, 1), gaussian(2.0, 1), gaussian(3.0, 1)][(i / 2 % 4) as usize].clone();
            match cover_trial(&law, 4, trial_seed(70, i), &CoverOptions::default()) {
                Ok(tr) => (tr.realization, tr.fields.cover),
                Err(e) => {
                    detail_err = format!("; instance {i}: {e}");
                    continue;
                }
            }
        } else {
            let real = sample_realization(&gaussian(1.5, 1), 6, 2, trial_seed(71, i)).unwrap();
            let region = Cube::centered(1, 7);
            let boxes = region.sites().map(|v| DyadicBox::new(0, &v[..1]).unwrap()).collect();
            (real, Cover::from_boxes(region, boxes))
        };
        let hall = hall_check_bruteforce(&real, &cover, region).unwrap();
        let saturated = match_sites(&real, &cover, &sites).matched_count() == sites.len();
        agree += (hall == saturated) as u32;
        hall_true += hall as u32;
    }
    s.record(
        7,
        Some(10),
        t,
        agree == 50,
        format!("{agree}/50 agree ({hall_true} satisfy Hall, {} do not){detail_err}", 50 - hall_true),
    );
}

fn criterion_8(s: &mut Suite) {
    let t = Instant::now();
    let law = gaussian(1.0, 1);
    let exact = hole_probability_exact(&law, 1.0, 1e-12).unwrap().log_h.exp();
    match hole_probability_mc(&law, 1.0, 1_000_000, 0) {
        Ok(mc) => {
            let z = (mc.estimate - exact).abs() / mc.stderr;
            s.record(
                8,
                Some(30),
                t,
                z <= 3.0,
                format!("exact {exact:.6}, MC {:.6} ± {:.6}, |diff| = {z:.2} stderr (limit 3)", mc.estimate, mc.stderr),
            );
        }
        Err(e) => s.record(8, Some(30), t, false, format!("error: {e}")),
    }
}

fn criterion_9(s: &mut Suite) {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.3, 0.5, 0.7] {
        let law = poly_coord(alpha, 1);
        let pts: Vec<(f64, f64)> = (4..=14)
            .map(|k| {
                let tt = 1i64 << k;
                ((tt as f64).ln(), variance_exact(&law, tt).unwrap().variance.ln())
            })
            .collect();
        let slope = ols(&pts).unwrap().slope;
        let last = (pts[10].1 - pts[9].1) / (pts[10].0 - pts[9].0);
        let ok = (slope - (1.0 - alpha)).abs() <= 0.05;
        pass &= ok;
        parts.push(format!("α={alpha}: slope {slope:.4} vs {:.1} (last local {last:.3})", 1.0 - alpha));
    }
    s.record(9, Some(30), t, pass, format!("{} (tolerance ±0.05)", parts.join("; ")));
}

fn criteria_10_11_12(s: &mut Suite) {
    let t = Instant::now();
    let law = poly_coord(0.5, 1);
    let (l, trials, seed) = (10_000i64, 20_000u64, 10u64);
    let grid = pow2(0, 12);
    let tail = match tail_curve_m0(&law, l, l, trials, &grid, seed) {
        Ok(x) => x,
        Err(e) => {
            s.record(10, Some(900), t, false, format!("error: {e}"));
            s.record(11, None, Instant::now(), false, "no samples".into());
            s.record(12, None, Instant::now(), false, "no samples".into());
            return;
        }
    };
    match &tail.fit {
        Some(fit) => {
            let c = fit.intercept.exp();
            let n = trials as f64;
            let resolvable: Vec<_> = tail.curve.points.iter().filter(|p| p.value * n >= 10.0).collect();
            let envelope = resolvable.iter().all(|p| p.value <= c * p.r.powf(-0.6));
            let ok = (fit.slope + 0.75).abs() <= 0.15 && envelope;
            s.record(
                10,
                Some(900),
                t,
                ok,
                format!(
                    "slope {:.4} over r ∈ [{}, {}] ({} points, target −0.75 ± 0.15); below {c:.3}·r^-0.6: {envelope}; flagged {}",
                    fit.slope,
                    resolvable.first().map_or(0.0, |p| p.r),
                    resolvable.last().map_or(0.0, |p| p.r),
                    fit.points,
                    tail.flagged
                ),
            );
        }
        None => s.record(10, Some(900), t, false, "fewer than 3 resolvable radii".into()),
    }

    let t11 = Instant::now();
    let t_grid: Vec<f64> = (0..=10).map(|k| 10f64.powf(2.0 + k as f64 / 10.0)).collect();
    let curve = truncated_moment_curve(&tail.samples, 0.5, &t_grid, BOOTSTRAP_REPS, seed);
    let band_lo = curve.points.iter().map(|p| p.ci_lo).fold(f64::INFINITY, f64::min);
    let mut rng = rng_from(111);
    let control: Vec<f64> = (0..trials).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
    let control_curve = truncated_moment_curve(&control, 0.5, &t_grid, BOOTSTRAP_REPS, seed);
    let control_end = control_curve.points.last().map_or(f64::NAN, |p| p.ci_hi);
    let start_band = curve.points.first().map_or(f64::NAN, |p| p.ci_lo);
    let ok11 = curve.verdict == MomentVerdict::BoundedBelow
        && band_lo > 0.0
        && control_curve.verdict == MomentVerdict::DecayingToZero
        && control_end < band_lo;
    s.record(
        11,
        Some(120),
        t11,
        ok11,
        format!(
            "min lower band {band_lo:.3} (first {start_band:.3}), slope {:.3}, verdict {:?}; exponential control ends at upper band {control_end:.3}, verdict {:?}",
            curve.slope.unwrap_or(f64::NAN),
            curve.verdict,
            control_curve.verdict
        ),
    );

    let t12 = Instant::now();
    match audit_blocking(&law, l, l, trials, 1000, seed) {
        Ok(a) => s.record(
            12,
            None,
            t12,
            a.blocking_pairs == 0 && a.audited.len() == 1000,
            format!("{} blocking pairs in {} audited trials", a.blocking_pairs, a.audited.len()),
        ),
        Err(e) => s.record(12, None, t12, false, format!("error: {e}")),
    }
}

fn criterion_13(s: &mut Suite) {
    let t = Instant::now();
    let law = gaussian(2.0, 1);
    match radius_tail_vs_hole(&law, 64, 100_000, &[1.0, 2.0, 4.0, 8.0], 13, &CoverOptions::default()) {
        Ok(rep) => {
            let curve: Vec<String> = rep.points.iter().map(|p| format!("{}:{:.3e}", p.r, p.p_hat)).collect();
            let monotone = rep.points.windows(2).all(|w| w[1].p_hat <= w[0].p_hat);
            s.record(
                13,
                Some(300),
                t,
                rep.pass && monotone,
                format!("c* = {:.4e}, below h^(c*/2): {}, P̂(R0 > r) {}", rep.c_star, rep.below_half_power, curve.join(" ")),
            );
        }
        Err(Error::Unresolvable(msg)) => s.record(13, Some(300), t, true, format!("Unresolvable reported: {msg}")),
        Err(e) => s.record(13, Some(300), t, false, format!("error: {e}")),
    }
}

fn criterion_14(s: &mut Suite) {
    let t = Instant::now();
    let grid = pow2(0, 10);
    let int_g = assumption_int_check(&gaussian(1.0, 1), &grid);
    let int_2 = assumption_int_check(&poly_coord(2.0, 1), &grid);
    let int_half = assumption_int_check(&poly_coord(0.5, 1), &grid);
    let mut pass = int_g.verdict == Verdict::Pass && int_2.verdict == Verdict::Pass && int_half.verdict == Verdict::DivergentIntegral;
    let mut parts = vec![format!(
        "Int: Gaussian {:?} (max {:.3}), α=2 {:?} (max {:.3}), α=0.5 {:?}",
        int_g.verdict, int_g.max_ratio, int_2.verdict, int_2.max_ratio, int_half.verdict
    )];
    for law in [gaussian(1.0, 1), poly_coord(2.0, 1), poly_coord(0.5, 1)] {
        let rep = assumption_reg_check(&law, &[2.0, 3.0], &grid);
        pass &= rep.pass;
        let maxes: Vec<String> = rep.scales.iter().map(|k| format!("k={}: {:.3}", k.k, k.max_ratio)).collect();
        parts.push(format!("Reg {law}: {} {}", if rep.pass { "finite" } else { "FAILED" }, maxes.join(", ")));
    }
    s.record(14, Some(5), t, pass, parts.join("; "));
}

const CLI_RUNS: &[&[&str]] = &[
    &["hole-exact", "--law", "gaussian:sigma=1", "--d", "2", "--r", "2,4,8"],
    &["hole-mc", "--law", "gaussian:sigma=1", "--r", "1,2", "--trials", "20000"],
    &["hole-bounds", "--law", "poly-coord:alpha=2", "--r", "8:64:2"],
    &["assumptions", "--law", "poly-coord:alpha=2"],
    &["cover-verify", "--law", "gaussian:sigma=1", "--d", "2", "--L", "16", "--trials", "4"],
    &["match-tail", "--law", "gaussian:sigma=1", "--d", "2", "--L", "8", "--trials", "8"],
    &["radius-tail", "--law", "gaussian:sigma=2", "--L", "32", "--trials", "200", "--r", "1,2,4"],
    &["oned-tail", "--law", "poly-coord:alpha=0.5", "--L", "1000", "--trials", "300", "--seed", "5", "--audit-trials", "20"],
    &["oned-variance", "--law", "poly-coord:alpha=0.3", "--t", "16:1024:2"],
    &["oned-moment", "--law", "poly-coord:alpha=0.5", "--L", "1000", "--trials", "300", "--seed", "5", "--reps", "100"],
];

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .map(|rd| rd.flatten().map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap_or_default())).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn criterion_15(s: &mut Suite) {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let mut files = 0;
    for (i, args) in CLI_RUNS.iter().enumerate() {
        let mut outs = Vec::new();
        for (run, workers) in [(0, "1"), (1, "3")] {
            let dir = tmp.path().join(format!("{i}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_plm"))
                .args(*args)
                .args(["--workers", workers, "--output"])
                .arg(&dir)
                .output()
                .map(|o| o.status.success())
                .unwrap_or(false);
            if !status {
                failures.push(format!("{} exited with an error", args[0]));
            }
            outs.push(data_files(&dir));
        }
        files += outs[0].len();
        if outs[0] != outs[1] || outs[0].len() < 2 {
            failures.push(format!("{} differs between runs", args[0]));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} subcommands, {files} files byte-identical across re-runs with 1 and 3 workers", CLI_RUNS.len())
    } else {
        failures.join("; ")
    };
    s.record(15, None, t, failures.is_empty(), detail);
}

fn main() {
    // `cargo test -- <filter>` passes arguments; run everything regardless,
    // but honor `--list` so test discovery stays quiet
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut s = Suite { outcomes: Vec::new() };
    criterion_hole_exponent(&mut s, 1, 2, 3.8, 4.2, 10);
    criterion_hole_exponent(&mut s, 2, 1, 2.8, 3.2, 5);
    criterion_3(&mut s);
    criterion_4(&mut s);
    let (ok, detail) = hole_truncation_invariant();
    println!("invariant   : {} hole truncation bound honored when the cutoff doubles; {detail}", if ok { "PASS" } else { "FAIL" });
    criteria_5_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    criteria_10_11_12(&mut s);
    criterion_13(&mut s);
    criterion_14(&mut s);
    criterion_15(&mut s);
    s.outcomes.sort_by_key(|o| o.id);
    let failed: Vec<String> = s.outcomes.iter().filter(|o| !o.pass).map(|o| o.id.to_string()).collect();
    println!("acceptance: {}/{} criteria pass", s.outcomes.len() - failed.len(), s.outcomes.len());
    if !failed.is_empty() || !ok {
        println!("failing: {}", failed.join(", "));
        std::process::exit(1);
    }
}
