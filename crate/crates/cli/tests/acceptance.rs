//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines show up in plain
//! `cargo test` output.

use std::process::Command;
use std::time::Instant;

use ftn_core::dilation::{cp_extension, range_invariance_defect, CpExtension, SpanSpec, UnitalMapSpec};
use ftn_core::matkit::{c, gaussian_matrix, op_norm};
use ftn_core::norms::{cauchy_schwarz_bound, dec_norm, haagerup_upper, HTensorElement, OperatorTuple};
use ftn_core::sdp::FARKAS_THRESHOLD;
use ftn_core::seed::derive;
use ftn_core::verify::{
    suite_commutant_stabilization, suite_free_product, suite_gauge, suite_lemma4, suite_prop6, SuiteResult, LEMMA4_TOL,
};
use ftn_core::CMatrix;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn suite_outcome(s: &SuiteResult) -> Outcome {
    Outcome {
        pass: s.pass,
        detail: format!("{}: {} instances, max violation {:.3e} (tolerance {:.0e})", s.name, s.instances, s.max_violation, s.tolerance),
    }
}

fn engine_agreement() -> Outcome {
    let start = Instant::now();
    let s = suite_lemma4(50, &[1, 2, 3, 4], SEED, LEMMA4_TOL, 32);
    let secs = start.elapsed().as_secs_f64();
    let mut o = suite_outcome(&s);
    o.pass &= secs <= 300.0;
    o.detail = format!("{}, {secs:.1} s (limit 300 s)", o.detail);
    o
}

fn closed_forms() -> Outcome {
    let mut worst_pos: f64 = 0.0;
    for i in 0..10u64 {
        let n = 1 + (i % 4) as usize;
        let k = 1 + (i % 3) as usize;
        let items: Vec<CMatrix> = (0..n)
            .map(|j| {
                let g = gaussian_matrix(k, k, derive(100 + i, &[j as u64]));
                g.mul_adjoint(&g)
            })
            .collect();
        let mut sum = CMatrix::zeros(k, k);
        for x in &items {
            sum = &sum + x;
        }
        let expected = op_norm(&sum).unwrap();
        let (v, _) = dec_norm(&OperatorTuple::new(items, None).unwrap(), 1e-9).unwrap();
        worst_pos = worst_pos.max((v - expected).abs() / expected.max(1.0));
    }
    let mut worst_scalar: f64 = 0.0;
    for i in 0..10u64 {
        let g = gaussian_matrix(1, 4, 200 + i);
        let coeffs = g.row(0).to_vec();
        let expected: f64 = coeffs.iter().map(|z| z.norm()).sum();
        let items = coeffs.iter().map(|&z| CMatrix::diag(&[z])).collect();
        let (v, _) = dec_norm(&OperatorTuple::new(items, None).unwrap(), 1e-9).unwrap();
        worst_scalar = worst_scalar.max((v - expected).abs() / expected.max(1.0));
    }
    let mut worst_row: f64 = 0.0;
    for n in 1..=4 {
        let items = (0..n).map(|i| CMatrix::unit(n, n, 0, i)).collect();
        let (v, _) = dec_norm(&OperatorTuple::new(items, None).unwrap(), 1e-9).unwrap();
        worst_row = worst_row.max((v - (n as f64).sqrt()).abs());
    }
    Outcome {
        pass: worst_pos <= 1e-8 && worst_scalar <= 1e-8 && worst_row <= 1e-6,
        detail: format!(
            "positive {worst_pos:.2e} (tol 1e-8), scalar {worst_scalar:.2e} (tol 1e-8), matrix-unit row {worst_row:.2e} (tol 1e-6)"
        ),
    }
}

fn cauchy_schwarz() -> Outcome {
    let mut violations = 0;
    let mut worst_margin = f64::INFINITY;
    for i in 0..1000u64 {
        let s = derive(SEED, &[40, i]);
        let n = 1 + (s % 4) as usize;
        let (p, q, r) = (1 + (s >> 8) as usize % 3, 1 + (s >> 16) as usize % 3, 1 + (s >> 24) as usize % 3);
        let a: Vec<CMatrix> = (0..n).map(|j| gaussian_matrix(p, q, derive(s, &[0, j as u64]))).collect();
        let b: Vec<CMatrix> = (0..n).map(|j| gaussian_matrix(q, r, derive(s, &[1, j as u64]))).collect();
        let mut prod = CMatrix::zeros(p, r);
        for (x, y) in a.iter().zip(&b) {
            prod = &prod + &x.matmul(y);
        }
        let lhs = op_norm(&prod).unwrap();
        let bound = cauchy_schwarz_bound(&a, &b).unwrap();
        worst_margin = worst_margin.min(bound - lhs);
        if lhs > bound + 1e-9 {
            violations += 1;
        }
    }
    Outcome { pass: violations == 0, detail: format!("1000 factorizations, {violations} violations, smallest margin {worst_margin:.2e}") }
}

fn haagerup() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=4 {
        let row = HTensorElement::new((0..n).map(|i| (CMatrix::unit(n, n, i, 0), CMatrix::unit(n, n, 0, i))).collect()).unwrap();
        let col = HTensorElement::new((0..n).map(|i| (CMatrix::unit(n, n, 0, i), CMatrix::unit(n, n, i, 0))).collect()).unwrap();
        worst = worst.max((haagerup_upper(&row, 200).unwrap().0 - 1.0).abs());
        worst = worst.max((haagerup_upper(&col, 200).unwrap().0 - n as f64).abs());
    }
    let s = suite_free_product(10, SEED, 10_000, 3);
    let o = suite_outcome(&s);
    Outcome { pass: worst <= 1e-6 && o.pass, detail: format!("row/column error {worst:.2e} (tol 1e-6); {}", o.detail) }
}

fn prop6() -> Outcome {
    let s = suite_prop6(SEED);
    let span = SpanSpec::new(vec![CMatrix::diag(&[c(0.0, 1.0), c(0.0, -1.0)])], true).unwrap();
    let target = UnitalMapSpec::new(vec![CMatrix::identity(1)]).unwrap();
    let obstructed = match cp_extension(&span, &target) {
        Ok(CpExtension::Infeasible(cert)) => cert.separating_value > FARKAS_THRESHOLD && cert.max_block_eigenvalue <= FARKAS_THRESHOLD,
        _ => false,
    };
    let o = suite_outcome(&s);
    Outcome { pass: o.pass && obstructed, detail: format!("{} (violations in units of each tolerance); obstruction certified: {obstructed}", o.detail) }
}

fn rotation_defect() -> Outcome {
    let s = CMatrix::column(&[c(1.0, 0.0), c(0.0, 0.0)]);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / 99.0;
        let (sn, cs) = theta.sin_cos();
        let u = CMatrix::from_real_rows(&[&[cs, -sn], &[sn, cs]]);
        let d = range_invariance_defect(&u, &s).unwrap();
        worst = worst.max((d - sn.abs()).abs());
    }
    Outcome { pass: worst <= 1e-9, detail: format!("100-point grid, max |defect - |sin θ|| = {worst:.2e} (tol 1e-9)") }
}

fn strip_timing(text: &str) -> Option<String> {
    let mut v: serde_json::Value = serde_json::from_str(text).ok()?;
    v.as_object_mut()?.remove("timing");
    serde_json::to_string(&v).ok()
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_ftn"))
            .args(["verify", "--suite", "all", "--seed", "7", "--no-cache"])
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let (sa, sb) = (String::from_utf8_lossy(&a.stdout), String::from_utf8_lossy(&b.stdout));
    let same = match (strip_timing(&sa), strip_timing(&sb)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    };
    let codes = (a.status.code(), b.status.code());
    Outcome { pass: same && codes == (Some(0), Some(0)), detail: format!("identical modulo timing: {same}, exit codes {codes:?}") }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("engine agreement", engine_agreement),
        ("closed forms", closed_forms),
        ("gauge invariance", || suite_outcome(&suite_gauge(20, SEED, 32))),
        ("cauchy-schwarz bound", cauchy_schwarz),
        ("commutant stabilization", || suite_outcome(&suite_commutant_stabilization(20, SEED, 32))),
        ("haagerup norms", haagerup),
        ("cp extension battery", prop6),
        ("range-invariance defect", rotation_defect),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "acceptance {}: {:<24} {}  {} [{:.1} s]",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
