//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAIL` are reported like the others but do not
//! fail the process; every other FAIL does.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gevrey_core::energy::{s_star, s_yuzawa, threshold_table};
use gevrey_core::runner::{run_dir, run_pipeline, RunManifest, RunOptions, Scenario, Stage};
use gevrey_core::symbol::{adjugate_poly, char_poly, eval_char_poly, to_block_sylvester, SystemSpec, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// With delta0 = 1 the planned decay rate kappa exceeds 1 on wave_t2, so the
/// lower bound delta0 - kappa T is negative; see the decisions ledger.
const EXPECTED_FAIL: &[&str] = &["AC-6"];

struct Outcome {
    id: &'static str,
    pass: bool,
    seconds: f64,
    detail: String,
}

fn table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = {}", row[key]))
}

fn doc(path: &Path) -> toml::Table {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display())).parse().unwrap()
}

fn float(doc: &toml::Table, key: &str) -> f64 {
    // dotted keys nest in the parsed table
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for p in &parts[..parts.len() - 1] {
        cur = cur[*p].as_table().unwrap();
    }
    cur[parts[parts.len() - 1]].as_float().unwrap_or_else(|| panic!("{key} is not a float"))
}

fn run(root: &Path, name: &str, stage: Stage) -> (RunManifest, PathBuf, f64) {
    let sc = Scenario::builtin(name).unwrap();
    let start = Instant::now();
    let m = run_pipeline(&sc, stage, &RunOptions::new(root)).unwrap();
    (m, run_dir(root, &sc, stage), start.elapsed().as_secs_f64())
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = rng.random_range(1..=4);
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-5.0..5.0));
        let l = adjugate_poly(&a);
        let b = char_poly(&a);
        for _ in 0..4 {
            let tau = C64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let shifted = DMatrix::from_fn(m, m, |i, j| {
                let d = if i == j { tau } else { C64::new(0.0, 0.0) };
                d - C64::new(a[(i, j)], 0.0)
            });
            let resid = (l.eval(tau) * shifted - DMatrix::<C64>::identity(m, m) * eval_char_poly(&b, tau)).norm();
            let scale = (1.0 + a.norm()).powi(m as i32) * (1.0 + tau.norm()).powi(m as i32);
            worst = worst.max(resid / scale);
        }
    }
    let scalar = SystemSpec::from_strs(1.0, 1.0, &[&[&["2*t + 1", "t^2"]]], &[&["cos(t)"]]).unwrap();
    let red = to_block_sylvester(&scalar);
    let exact = [0.0, 0.25, 0.7, 1.0].iter().all(|&t| {
        let xi = [1.5, -2.0];
        let at = red.at(t, &xi).unwrap();
        let (a, b) = scalar.eval(t, &xi).unwrap();
        at.principal_block[(0, 0)] == a[(0, 0)] && at.lower[(0, 0)] == C64::new(b[(0, 0)], 0.0)
    });
    let seconds = start.elapsed().as_secs_f64();
    Outcome {
        id: "AC-1",
        pass: worst <= 1e-10 && exact && seconds < 10.0,
        seconds,
        detail: format!("max normalized adjugate residual {worst:.2e}, m=1 exact {exact}"),
    }
}

fn prop_check(dir: &Path) -> (bool, String) {
    let rows = table(&dir.join("eigen_prop.csv"));
    let spread = |key: &str| {
        let v: Vec<f64> = rows.iter().map(|r| num(r, key)).collect();
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let eps: Vec<f64> = rows.iter().map(|r| num(r, "eps")).collect();
    let covers = (0..7).all(|k| eps.iter().any(|e| *e == 2f64.powi(-3 - k)));
    let (si, sii) = (spread("c_i"), spread("c_ii"));
    let sep = rows.iter().all(|r| r["separation_holds"] == "true");
    (si <= 2.0 && sii <= 2.0 && sep && covers, format!("c_i spread {si:.3}, c_ii spread {sii:.3}, separation {sep}"))
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let root = root.path();
    let mut out = vec![ac1()];

    // one full wave_t2 pipeline backs AC-2..AC-6 and is repeated for AC-8
    let (wave, wave_dir, wave_secs) = run(root, "wave_t2", Stage::GevreyFit);
    let (holder, holder_dir, holder_secs) = run(root, "holder_abs(0.5)", Stage::Eigen);
    {
        let (p1, d1) = prop_check(&wave_dir);
        let (p2, d2) = prop_check(&holder_dir);
        let seconds = wave.stages.iter().take(2).map(|s| s.seconds).sum::<f64>() + holder_secs;
        out.push(Outcome {
            id: "AC-2",
            pass: p1 && p2 && seconds < 30.0 && holder.stages.iter().all(|s| s.error.is_none()),
            seconds,
            detail: format!("wave_t2: {d1}; holder_abs(0.5): {d2}"),
        });
    }

    {
        let (_, lower_dir, lower_secs) = run(root, "wave_t2_lower", Stage::EnergyScan);
        let e = doc(&wave_dir.join("energy_summary.toml"));
        let el = doc(&lower_dir.join("energy_summary.toml"));
        let alpha = 1.0;
        let m = 2.0;
        let (q1, q2, q3) = (float(&e, "fit.q1.slope"), float(&e, "fit.q2.slope"), float(&e, "fit.q3.slope"));
        let q4 = float(&el, "fit.q4.slope");
        let in_band = |x: f64| (-1.15..=-0.85).contains(&x);
        let seconds = wave.stages.iter().take(3).map(|s| s.seconds).sum::<f64>() + lower_secs;
        out.push(Outcome {
            id: "AC-3",
            pass: in_band(q1)
                && in_band(q2)
                && (alpha - 0.15..=alpha + 0.15).contains(&q3)
                && q4 >= alpha * (1.0 - m) - 0.15
                && seconds < 120.0,
            seconds,
            detail: format!("slopes q1 {q1:.3}, q2 {q2:.3}, q3/<xi> {q3:.3}, q4 (wave_t2_lower) {q4:.3}"),
        });
    }

    {
        let (_, triple_dir, triple_secs) = run(root, "triple_degenerate", Stage::Solve);
        let worst = |dir: &Path| {
            table(&dir.join("solve_summary.csv"))
                .iter()
                .filter(|r| num(r, "xi_radius") <= 128.0)
                .map(|r| num(r, "consistency_err"))
                .fold(0.0, f64::max)
        };
        let (w, t) = (worst(&wave_dir), worst(&triple_dir));
        out.push(Outcome {
            id: "AC-4",
            pass: w <= 1e-6 && t <= 1e-6 && triple_secs < 120.0,
            seconds: triple_secs,
            detail: format!("max relative error wave_t2 {w:.2e}, triple_degenerate {t:.2e}"),
        });
    }

    {
        let plan = doc(&wave_dir.join("weight_plan_s1.8.toml"));
        let xi0 = float(&plan, "Xi0");
        let rows = table(&wave_dir.join("solve_summary.csv"));
        let included: Vec<&BTreeMap<String, String>> =
            rows.iter().filter(|r| num(r, "xi_radius") >= xi0 && num(r, "xi_radius") <= 4096.0).collect();
        let worst = included.iter().map(|r| num(r, "absW_max_ratio")).fold(0.0, f64::max);
        let reaches_top = included.iter().any(|r| num(r, "xi_radius") == 4096.0);
        let gamma = float(&plan, "gamma");
        let seconds = wave.stages.iter().take(4).map(|s| s.seconds).sum::<f64>();
        out.push(Outcome {
            id: "AC-5",
            pass: worst <= 1.0 + 1e-8 && reaches_top && gamma == 0.5 && seconds < 180.0,
            seconds,
            detail: format!(
                "gamma {gamma}, kappa {:.4}, Xi0 {xi0}, {} radii, max |W(t)|/|W(0)| {worst:.12}",
                float(&plan, "kappa"),
                included.len()
            ),
        });
    }

    {
        let g = doc(&wave_dir.join("gevrey_fit.toml"));
        let (delta, residual, bound) = (float(&g, "delta"), float(&g, "residual"), float(&g, "delta_lower_bound"));
        let kappa = float(&g, "kappa");
        out.push(Outcome {
            id: "AC-6",
            pass: bound > 0.0 && delta >= bound && residual <= 0.05 && wave_secs < 180.0,
            seconds: wave_secs,
            detail: format!(
                "delta {delta:.4}, residual {:.2}%, kappa {kappa:.4}, delta0 - kappa T = {bound:.4}",
                residual * 100.0
            ),
        });
    }

    {
        let start = Instant::now();
        let alphas: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
        let ms: Vec<usize> = (1..=5).collect();
        let rows = threshold_table(&alphas, &ms);
        let grid_ok = rows.len() == 100 && rows.iter().all(|r| r.improvement >= 0.0);
        let values_ok = s_star(1.0, 2) == 2.0
            && s_yuzawa(1.0, 2) == 1.5
            && s_star(0.5, 3) == 1.5
            && (s_yuzawa(0.5, 3) - 7.0 / 6.0).abs() < 1e-15;
        let seconds = start.elapsed().as_secs_f64();
        out.push(Outcome {
            id: "AC-7",
            pass: grid_ok && values_ok && seconds < 1.0,
            seconds,
            detail: format!("s*(1,2) = {}, s*(1/2,3) = {}, 20x5 grid nonnegative {grid_ok}", s_star(1.0, 2), s_star(0.5, 3)),
        });
    }

    {
        let second_root = tempfile::tempdir().unwrap();
        let (again, _, again_secs) = run(second_root.path(), "wave_t2", Stage::GevreyFit);
        let sums = |m: &RunManifest| m.files.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect::<Vec<_>>();
        let same = sums(&wave) == sums(&again) && !wave.files.is_empty();
        let seconds = wave_secs + again_secs;
        out.push(Outcome {
            id: "AC-8",
            pass: same && seconds < 300.0,
            seconds,
            detail: format!("{} files, checksums identical {same}", wave.files.len()),
        });
    }

    let mut unexpected = 0;
    for o in &out {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && EXPECTED_FAIL.contains(&o.id) { " (expected)" } else { "" };
        println!("{} {status}{note} [{:.1}s] {}", o.id, o.seconds, o.detail);
        if !o.pass && !EXPECTED_FAIL.contains(&o.id) {
            unexpected += 1;
        }
        if o.pass && EXPECTED_FAIL.contains(&o.id) {
            println!("   {} now passes; drop it from EXPECTED_FAIL", o.id);
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
