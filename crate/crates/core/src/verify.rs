//! Property suites that tie the engines together.
//!
//! Each suite runs a batch of seeded instances, measures one violation per
//! instance and compares the worst against a declared tolerance. Instances
//! get their own derived seeds, so a failing instance can be replayed alone.
//! Wall time is not measured here (the crate has no clock); callers that
//! have one pass it to [`run_all_timed`], which keeps the timings apart from
//! the reproducible part of the report.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dilation::{hom_extension_check, HomVerdict, SpanSpec, UnitalMapSpec};
use crate::error::Result;
use crate::matkit::{c, gaussian_matrix, haar_unitary, op_norm_unchecked, CMatrix, C64};
use crate::norms::{
    dec_norm, gauge_reduce, haagerup_rep_lower, haagerup_upper, unitary_sup, unitary_sup_with, HTensorElement,
    OperatorTuple, SupConfig,
};
use crate::seed::derive;

/// Gap tolerance handed to the SDP solver by every suite.
pub const SUITE_GAP_TOL: f64 = 1e-9;
/// Violation recorded for an instance that errored or contradicted its expectation.
pub const CRASH_VIOLATION: f64 = f64::MAX;

pub const LEMMA4_TOL: f64 = 1e-3;
pub const GAUGE_DEC_TOL: f64 = 1e-8;
pub const GAUGE_SUP_TOL: f64 = 1e-4;
pub const COMMUTANT_TOL: f64 = 1e-3;
pub const FREE_PRODUCT_TOL: f64 = 5e-2;
pub const PROP6_RECONSTRUCTION_TOL: f64 = 1e-7;
pub const PROP6_RANGE_TOL: f64 = 1e-6;
pub const PROP6_WORD_TOL: f64 = 1e-5;

/// One instance of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    /// Seed that regenerates the instance.
    pub seed: u64,
    /// FNV-1a hash of the instance's input matrices, hex.
    pub input_hash: String,
    /// Suite-specific measurements, labelled.
    pub values: Vec<(String, f64)>,
    pub violation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Index of the worst instance in `records`.
    pub worst: Option<usize>,
    pub records: Vec<InstanceRecord>,
}

impl SuiteResult {
    fn from_records(name: &str, tolerance: f64, records: Vec<InstanceRecord>) -> Self {
        let mut worst = None;
        let mut max_violation: f64 = 0.0;
        for (i, r) in records.iter().enumerate() {
            // NaN counts as the worst possible outcome.
            if r.violation.is_nan() || worst.is_none() || r.violation > max_violation {
                worst = Some(i);
                max_violation = if r.violation.is_nan() { CRASH_VIOLATION } else { r.violation };
            }
        }
        SuiteResult {
            name: name.to_string(),
            instances: records.len(),
            max_violation,
            tolerance,
            pass: !records.is_empty() && max_violation <= tolerance,
            worst,
            records,
        }
    }

    fn crashed(name: &str, tolerance: f64, message: String) -> Self {
        let record = InstanceRecord {
            index: 0,
            seed: 0,
            input_hash: String::new(),
            values: Vec::new(),
            violation: CRASH_VIOLATION,
            note: Some(message),
        };
        SuiteResult::from_records(name, tolerance, alloc::vec![record])
    }
}

/// Wall-clock measurements, kept out of the reproducible part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub suites: Vec<(String, f64)>,
    pub total_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
    pub aggregate_pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Lemma4,
    Gauge,
    CommutantStabilization,
    FreeProduct,
    Prop6,
}

impl SuiteName {
    pub const ALL: [SuiteName; 5] =
        [SuiteName::Lemma4, SuiteName::Gauge, SuiteName::CommutantStabilization, SuiteName::FreeProduct, SuiteName::Prop6];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Lemma4 => "lemma4",
            SuiteName::Gauge => "gauge",
            SuiteName::CommutantStabilization => "commutant_stabilization",
            SuiteName::FreeProduct => "free_product",
            SuiteName::Prop6 => "prop6",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SuiteName::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

/// Instance counts, dimensions and tolerances for [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub suites: Vec<SuiteName>,
    pub lemma4_count: usize,
    /// Unitary-tuple dimensions `k` cycled through by the lemma4 suite.
    pub lemma4_dims: Vec<usize>,
    pub lemma4_tol: f64,
    pub restarts: usize,
    pub gauge_count: usize,
    pub commutant_count: usize,
    pub free_product_count: usize,
    pub free_product_samples: usize,
    pub mult_max: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            suites: SuiteName::ALL.to_vec(),
            lemma4_count: 50,
            lemma4_dims: alloc::vec![1, 2, 3, 4],
            lemma4_tol: LEMMA4_TOL,
            restarts: crate::norms::DEFAULT_RESTARTS,
            gauge_count: 20,
            commutant_count: 20,
            free_product_count: 10,
            free_product_samples: 10_000,
            mult_max: 3,
        }
    }
}

fn fnv1a(mats: &[&CMatrix]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for m in mats {
        for byte in (m.rows() as u64).to_le_bytes().into_iter().chain((m.cols() as u64).to_le_bytes()) {
            h = (h ^ byte as u64).wrapping_mul(0x0100_0000_01b3);
        }
        for z in m.as_slice() {
            for byte in z.re.to_bits().to_le_bytes().into_iter().chain(z.im.to_bits().to_le_bytes()) {
                h = (h ^ byte as u64).wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    format!("{h:016x}")
}

fn uniform(seed: u64, lo: usize, hi: usize) -> usize {
    lo + (seed % (hi - lo + 1) as u64) as usize
}

/// Matrix with independent standard complex Gaussian entries, scaled to operator norm 1.
pub fn normalized_gaussian(k: usize, seed: u64) -> CMatrix {
    let g = gaussian_matrix(k, k, seed);
    let n = op_norm_unchecked(&g);
    g.scale_real(1.0 / n)
}

/// `n` normalized Gaussian `k×k` matrices.
pub fn random_tuple(n: usize, k: usize, unit_index: Option<usize>, seed: u64) -> Result<OperatorTuple> {
    let items = (0..n).map(|i| normalized_gaussian(k, derive(seed, &[i as u64]))).collect();
    OperatorTuple::new(items, unit_index)
}

fn tuple_hash(t: &OperatorTuple) -> String {
    fnv1a(&t.items().iter().collect::<Vec<_>>())
}

fn crash_record(index: usize, seed: u64, err: impl core::fmt::Display) -> InstanceRecord {
    InstanceRecord {
        index,
        seed,
        input_hash: String::new(),
        values: Vec::new(),
        violation: CRASH_VIOLATION,
        note: Some(format!("{err}")),
    }
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn sup_config(restarts: usize, seed: u64) -> SupConfig {
    SupConfig { restarts, seed, ..SupConfig::default() }
}

/// Upper and lower engines agree on random tuples.
///
/// Instance `i` uses `k = dims[i mod len]` and `n ∈ 1..=4` items; the
/// violation is the relative gap `|upper − lower| / upper`.
pub fn suite_lemma4(count: usize, dims: &[usize], seed: u64, tol: f64, restarts: usize) -> SuiteResult {
    const NAME: &str = "lemma4";
    if count == 0 || dims.is_empty() || dims.contains(&0) {
        return SuiteResult::crashed(NAME, tol, "needs at least one instance and positive dimensions".into());
    }
    let records = crate::par::map_indexed(count, |i| {
        let s = derive(seed, &[1, i as u64]);
        let k = dims[i % dims.len()];
        let n = uniform(derive(s, &[0]), 1, 4);
        let run = || -> Result<InstanceRecord> {
            let t = random_tuple(n, k, None, derive(s, &[1]))?;
            let (upper, _) = dec_norm(&t, SUITE_GAP_TOL)?;
            let lower = unitary_sup_with(&t, &sup_config(restarts, derive(s, &[2])))?.value;
            Ok(InstanceRecord {
                index: i,
                seed: s,
                input_hash: tuple_hash(&t),
                values: alloc::vec![("n".into(), n as f64), ("k".into(), k as f64), ("upper".into(), upper), ("lower".into(), lower)],
                violation: relative(upper, lower),
                note: None,
            })
        };
        run().unwrap_or_else(|e| crash_record(i, s, e))
    });
    SuiteResult::from_records(NAME, tol, records)
}

/// Absorbing the unit coefficient into a free unitary changes neither norm.
///
/// Each instance has a unit coefficient at index 0. The factorization value
/// is compared before and after [`gauge_reduce`] (with the items rotated so
/// the solver sees a different program), the unitary supremum with the unit
/// pinned against the one with all unitaries free. Each discrepancy is
/// divided by its own tolerance, so the suite tolerance is 1.
pub fn suite_gauge(count: usize, seed: u64, restarts: usize) -> SuiteResult {
    const NAME: &str = "gauge";
    if count == 0 {
        return SuiteResult::crashed(NAME, 1.0, "needs at least one instance".into());
    }
    let records = crate::par::map_indexed(count, |i| {
        let s = derive(seed, &[2, i as u64]);
        let k = uniform(derive(s, &[0]), 2, 3);
        let n = uniform(derive(s, &[1]), 2, 3);
        let run = || -> Result<InstanceRecord> {
            let pinned = random_tuple(n, k, Some(0), derive(s, &[2]))?;
            let free = gauge_reduce(&pinned)?;
            let rotation: Vec<usize> = (0..n).map(|j| (j + 1) % n).collect();
            let free = free.permuted(&rotation)?;
            let (dec_pinned, _) = dec_norm(&pinned, SUITE_GAP_TOL)?;
            let (dec_free, _) = dec_norm(&free, SUITE_GAP_TOL)?;
            let cfg = sup_config(restarts, derive(s, &[3]));
            let sup_pinned = unitary_sup_with(&pinned, &cfg)?.value;
            let sup_free = unitary_sup_with(&free, &cfg)?.value;
            let dec_gap = relative(dec_pinned, dec_free);
            let sup_gap = relative(sup_pinned, sup_free);
            Ok(InstanceRecord {
                index: i,
                seed: s,
                input_hash: tuple_hash(&pinned),
                values: alloc::vec![
                    ("dec_pinned".into(), dec_pinned),
                    ("dec_free".into(), dec_free),
                    ("sup_pinned".into(), sup_pinned),
                    ("sup_free".into(), sup_free),
                    ("dec_gap".into(), dec_gap),
                    ("sup_gap".into(), sup_gap),
                ],
                violation: (dec_gap / GAUGE_DEC_TOL).max(sup_gap / GAUGE_SUP_TOL),
                note: None,
            })
        };
        run().unwrap_or_else(|e| crash_record(i, s, e))
    });
    SuiteResult::from_records(NAME, 1.0, records)
}

/// Unitaries of dimension `k` already attain the supremum for `k×k` items.
pub fn suite_commutant_stabilization(count: usize, seed: u64, restarts: usize) -> SuiteResult {
    const NAME: &str = "commutant_stabilization";
    if count == 0 {
        return SuiteResult::crashed(NAME, COMMUTANT_TOL, "needs at least one instance".into());
    }
    let records = crate::par::map_indexed(count, |i| {
        let s = derive(seed, &[3, i as u64]);
        let k = uniform(derive(s, &[0]), 2, 3);
        let n = uniform(derive(s, &[1]), 2, 4);
        let run = || -> Result<InstanceRecord> {
            let t = random_tuple(n, k, None, derive(s, &[2]))?;
            let at_k = unitary_sup(&t, &[k], restarts, derive(s, &[3]))?.value;
            let at_2k = unitary_sup(&t, &[2 * k], restarts, derive(s, &[4]))?.value;
            Ok(InstanceRecord {
                index: i,
                seed: s,
                input_hash: tuple_hash(&t),
                values: alloc::vec![("k".into(), k as f64), ("sup_k".into(), at_k), ("sup_2k".into(), at_2k)],
                violation: relative(at_k, at_2k),
                note: None,
            })
        };
        run().unwrap_or_else(|e| crash_record(i, s, e))
    });
    SuiteResult::from_records(NAME, COMMUTANT_TOL, records)
}

/// Random three-term element of `M_k ⊗ M_m`, factors normalized.
pub fn random_element(k: usize, m: usize, terms: usize, seed: u64) -> Result<HTensorElement> {
    let terms = (0..terms)
        .map(|l| {
            let c = normalized_gaussian(k, derive(seed, &[l as u64, 0]));
            let d = normalized_gaussian(m, derive(seed, &[l as u64, 1]));
            (c, d)
        })
        .collect();
    HTensorElement::new(terms)
}

/// Representation lower bounds meet the factorization upper bound.
pub fn suite_free_product(count: usize, seed: u64, samples: usize, mult_max: usize) -> SuiteResult {
    const NAME: &str = "free_product";
    if count == 0 {
        return SuiteResult::crashed(NAME, FREE_PRODUCT_TOL, "needs at least one instance".into());
    }
    let records = crate::par::map_indexed(count, |i| {
        let s = derive(seed, &[4, i as u64]);
        let k = uniform(derive(s, &[0]), 1, 3);
        let m = uniform(derive(s, &[1]), 1, 3);
        let run = || -> Result<InstanceRecord> {
            let x = random_element(k, m, 3, derive(s, &[2]))?;
            let (upper, _) = haagerup_upper(&x, crate::sdp::DEFAULT_MAX_ITER)?;
            let lower = haagerup_rep_lower(&x, samples, mult_max, derive(s, &[3]))?.value;
            let mats: Vec<&CMatrix> = x.terms().iter().flat_map(|(c, d)| [c, d]).collect();
            let mut violation = relative(upper, lower);
            let mut note = None;
            if lower > upper * (1.0 + 1e-6) + 1e-12 {
                violation = CRASH_VIOLATION;
                note = Some("lower bound exceeds upper bound".into());
            }
            Ok(InstanceRecord {
                index: i,
                seed: s,
                input_hash: fnv1a(&mats),
                values: alloc::vec![("k".into(), k as f64), ("m".into(), m as f64), ("upper".into(), upper), ("lower".into(), lower)],
                violation,
                note,
            })
        };
        run().unwrap_or_else(|e| crash_record(i, s, e))
    });
    SuiteResult::from_records(NAME, FREE_PRODUCT_TOL, records)
}

struct Prop6Case {
    label: String,
    span: Vec<CMatrix>,
    images: Vec<CMatrix>,
    extendable: bool,
}

fn prop6_battery(seed: u64) -> Result<Vec<Prop6Case>> {
    let z = CMatrix::diag_real(&[1.0, -1.0]);
    let x = CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let i = |s: f64| C64::new(0.0, s);
    let mut cases = alloc::vec![
        Prop6Case { label: "identity".into(), span: alloc::vec![z.clone()], images: alloc::vec![z.clone()], extendable: true },
        Prop6Case { label: "hadamard".into(), span: alloc::vec![z.clone()], images: alloc::vec![x], extendable: true },
        Prop6Case {
            label: "character".into(),
            span: alloc::vec![CMatrix::diag(&[c(1.0, 0.0), i(1.0), c(-1.0, 0.0)])],
            images: alloc::vec![CMatrix::diag(&[i(1.0)])],
            extendable: true,
        },
    ];
    for (j, k) in [2usize, 2, 3].into_iter().enumerate() {
        let s = derive(seed, &[5, j as u64]);
        let u1 = haar_unitary(k, derive(s, &[0]))?;
        let u2 = haar_unitary(k, derive(s, &[1]))?;
        let v = haar_unitary(k, derive(s, &[2]))?;
        let conj = |u: &CMatrix| v.matmul(u).mul_adjoint(&v);
        cases.push(Prop6Case {
            label: format!("conjugation_pair_{j}"),
            images: alloc::vec![conj(&u1), conj(&u2)],
            span: alloc::vec![u1, u2],
            extendable: true,
        });
    }
    let u = haar_unitary(2, derive(seed, &[5, 9]))?;
    cases.push(Prop6Case { label: "amplification".into(), images: alloc::vec![u.direct_sum(&u)], span: alloc::vec![u], extendable: true });
    cases.push(Prop6Case {
        label: "obstructed_pm_i".into(),
        span: alloc::vec![CMatrix::diag(&[i(1.0), i(-1.0)])],
        images: alloc::vec![CMatrix::identity(1)],
        extendable: false,
    });
    cases.push(Prop6Case {
        label: "obstructed_character".into(),
        span: alloc::vec![CMatrix::diag(&[c(1.0, 0.0), i(1.0), c(-1.0, 0.0)])],
        images: alloc::vec![CMatrix::diag(&[i(-1.0)])],
        extendable: false,
    });
    Ok(cases)
}

/// Unital CP extensions that send unitaries to unitaries are multiplicative.
///
/// Extendable cases are scored by the largest of reconstruction error,
/// range defect and word defect, each divided by its tolerance; obstructed
/// cases must come back infeasible. The suite tolerance is therefore 1.
pub fn suite_prop6(seed: u64) -> SuiteResult {
    const NAME: &str = "prop6";
    let cases = match prop6_battery(seed) {
        Ok(c) => c,
        Err(e) => return SuiteResult::crashed(NAME, 1.0, format!("{e}")),
    };
    let records = crate::par::map_indexed(cases.len(), |idx| {
        let case = &cases[idx];
        let mats: Vec<&CMatrix> = case.span.iter().chain(&case.images).collect();
        let run = || -> Result<InstanceRecord> {
            let span = SpanSpec::new(case.span.clone(), true)?;
            let target = UnitalMapSpec::new(case.images.clone())?;
            let report = hom_extension_check(&span, &target)?;
            let mut values = alloc::vec![("extendable_expected".into(), case.extendable as u8 as f64)];
            let (violation, note) = match (&report.extension, &report.certificate, case.extendable) {
                (Some(ext), _, true) => {
                    values.push(("reconstruction_error".into(), ext.reconstruction_error));
                    values.push(("max_range_defect".into(), report.max_range_defect()));
                    values.push(("multiplicativity_defect".into(), ext.multiplicativity_defect));
                    values.push(("dilation_dim".into(), ext.dilation_dim as f64));
                    let v = (ext.reconstruction_error / PROP6_RECONSTRUCTION_TOL)
                        .max(report.max_range_defect() / PROP6_RANGE_TOL)
                        .max(ext.multiplicativity_defect / PROP6_WORD_TOL);
                    (v, None)
                }
                (None, Some(cert), false) => {
                    values.push(("separating_value".into(), cert.separating_value));
                    (0.0, None)
                }
                _ => (
                    CRASH_VIOLATION,
                    Some(format!("expected extendable = {}, got verdict {:?}", case.extendable, report.verdict)),
                ),
            };
            debug_assert!(report.verdict != HomVerdict::NoCpExtension || report.extension.is_none());
            Ok(InstanceRecord { index: idx, seed, input_hash: fnv1a(&mats), values, violation, note })
        };
        let mut r = run().unwrap_or_else(|e| crash_record(idx, seed, e));
        r.note = r.note.map(|n| format!("{}: {n}", case.label)).or_else(|| Some(case.label.clone()));
        r
    });
    SuiteResult::from_records(NAME, 1.0, records)
}

fn run_suite(name: SuiteName, cfg: &VerifyConfig) -> SuiteResult {
    match name {
        SuiteName::Lemma4 => suite_lemma4(cfg.lemma4_count, &cfg.lemma4_dims, cfg.seed, cfg.lemma4_tol, cfg.restarts),
        SuiteName::Gauge => suite_gauge(cfg.gauge_count, cfg.seed, cfg.restarts),
        SuiteName::CommutantStabilization => suite_commutant_stabilization(cfg.commutant_count, cfg.seed, cfg.restarts),
        SuiteName::FreeProduct => suite_free_product(cfg.free_product_count, cfg.seed, cfg.free_product_samples, cfg.mult_max),
        SuiteName::Prop6 => suite_prop6(cfg.seed),
    }
}

/// Runs the selected suites in order. Deterministic per configuration.
pub fn run_all(cfg: &VerifyConfig) -> Report {
    let suites: Vec<SuiteResult> = cfg.suites.iter().map(|&n| run_suite(n, cfg)).collect();
    let aggregate_pass = !suites.is_empty() && suites.iter().all(|s| s.pass);
    Report { version: crate::VERSION.to_string(), seed: cfg.seed, suites, aggregate_pass, timing: None }
}

/// [`run_all`] with per-suite wall times from `clock` (seconds, monotone).
pub fn run_all_timed(cfg: &VerifyConfig, clock: &dyn Fn() -> f64) -> Report {
    let start = clock();
    let mut suites = Vec::new();
    let mut times = Vec::new();
    for &name in &cfg.suites {
        let t0 = clock();
        suites.push(run_suite(name, cfg));
        times.push((name.as_str().to_string(), clock() - t0));
    }
    let aggregate_pass = !suites.is_empty() && suites.iter().all(|s| s.pass);
    Report {
        version: crate::VERSION.to_string(),
        seed: cfg.seed,
        suites,
        aggregate_pass,
        timing: Some(Timing { suites: times, total_seconds: clock() - start, timestamp: None }),
    }
}
