//! Deterministic verification suites. Every check returns plain JSON data with no timings,
//! so two runs with the same configuration serialize to identical bytes.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use statrs::function::gamma::ln_gamma;

use crate::density::{kernel_l1_gap, synthesize_symbol, SynthesisParams};
use crate::error::{Error, Result};
use crate::extension::{
    b_coefficients, coeff, coeff_recurrence, extend_eval, grid_check, product_difference, CellEvaluation,
    GridCheckConfig,
};
use crate::fock::{degree_profile, diagonalization_report, radial_function};
use crate::index::{MultiIndex, Partition, Window};
use crate::lattice::{LatticeFunction, LatticeRule};
use crate::metric::{modulus_profile, shift_left, shift_right};
use crate::obstruction::{greedy_net, lipschitz_scan, root_spaced_rows, row_sup_scan, separation_scan};
use crate::quad::{gamma_mc, Mode, DEFAULT_ORDER};
use crate::spectrum::{
    adjacent_kernel_distance, eigen_table_with, eigenvalue_with, kernel_l1_distance, kernel_l1_quadrature,
    lipschitz_certificate, DEFAULT_CELL_CAP,
};
use crate::symbol::{Expr, QuasiRadialSymbol, Scalar, Term};

/// Inputs shared by the suites. `symbol`, `lattice` and `partition` replace the built-in
/// test objects of the checks that use them.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: u64,
    pub order: usize,
    pub mode: Mode,
    pub partition: Option<Partition>,
    pub symbol: Option<QuasiRadialSymbol>,
    pub lattice: Option<LatticeFunction>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 1, samples: 1_000_000, order: DEFAULT_ORDER, mode: Mode::Auto, partition: None, symbol: None, lattice: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Schur,
    Lipschitz,
    Shifts,
    Extension,
    Density,
    Obstruction,
    All,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Schur, Suite::Lipschitz, Suite::Shifts, Suite::Extension, Suite::Density, Suite::Obstruction];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Schur => "schur",
            Suite::Lipschitz => "lipschitz",
            Suite::Shifts => "shifts",
            Suite::Extension => "extension",
            Suite::Density => "density",
            Suite::Obstruction => "obstruction",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::param(format!("unknown suite `{s}`")))
    }
}

pub fn run(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Schur => vec![schur_blocks(cfg)?, oracle_agreement(cfg)?],
        Suite::Lipschitz => vec![closed_forms(cfg)?, lipschitz_bounds(cfg)?],
        Suite::Shifts => vec![exact_identities(cfg)?, shift_moduli(cfg)?],
        Suite::Extension => vec![extension_checks(cfg)?],
        Suite::Density => vec![density_pipeline(cfg)?],
        Suite::Obstruction => vec![obstruction_witness(cfg)?],
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::ALL {
                all.extend(run(s, cfg)?.checks);
            }
            all
        }
    };
    Ok(SuiteReport { suite: suite.name().into(), seed: cfg.seed, passed: checks.iter().all(|c| c.passed), checks })
}

fn check(name: &str, passed: bool, details: Value) -> Check {
    Check { name: name.into(), passed, details }
}

/// A generator seeded from the run seed and a per-check tag.
fn rng_for(cfg: &VerifyConfig, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(tag);
    rng
}

fn c(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn one_dim(expr: Expr) -> QuasiRadialSymbol {
    QuasiRadialSymbol::with_arity(expr, 1).expect("valid test symbol")
}

/// Constant, box indicator and Gaussian of the radii, each of arity `k`.
pub fn invariant_test_symbols(k: usize) -> Vec<(String, QuasiRadialSymbol)> {
    let gaussian = if k == 1 {
        Expr::Gaussian { coord: 0, scale: 0.5 }
    } else {
        Expr::Product { factors: (0..k).map(|j| Expr::Gaussian { coord: j, scale: 0.5 }).collect() }
    };
    let boxed = Expr::Box { coords: None, lower: vec![0.0; k], upper: (0..k).map(|j| 1.0 + 0.3 * j as f64).collect() };
    [("constant", Expr::constant(1.0)), ("box", boxed), ("gaussian", gaussian)]
        .into_iter()
        .map(|(n, e)| (n.to_string(), QuasiRadialSymbol::with_arity(e, k).expect("valid test symbol")))
        .collect()
}

/// Bounded symbols used by the Lipschitz check, for `k = 1` and `k = 2`.
pub fn lipschitz_test_symbols(k: usize) -> Vec<(String, QuasiRadialSymbol)> {
    let mut out = invariant_test_symbols(k);
    let extra: Vec<(&str, Expr)> = if k == 1 {
        vec![
            ("sin", Expr::Sin { coord: 0, freq: 1.0 }),
            ("cos3", Expr::Cos { coord: 0, freq: 3.0 }),
            ("capped_power", Expr::Power { coord: 0, exponent: 1.0, cap: 3.0 }),
        ]
    } else {
        vec![
            ("sin_cos", Expr::Product { factors: vec![Expr::Sin { coord: 0, freq: 1.0 }, Expr::Cos { coord: 1, freq: 2.0 }] }),
            (
                "sum",
                Expr::Sum {
                    terms: vec![
                        Term { weight: Scalar(Complex64::new(0.5, 0.5)), expr: Expr::Sin { coord: 0, freq: 0.7 } },
                        Term { weight: Scalar::real(0.5), expr: Expr::unit_box(vec![1], 4.0) },
                    ],
                },
            ),
        ]
    };
    out.extend(extra.into_iter().map(|(n, e)| (n.to_string(), QuasiRadialSymbol::with_arity(e, k).expect("valid test symbol"))));
    out
}

/// A random one-coordinate factor whose values vary where `Gamma(c)` puts its mass.
fn random_factor(rng: &mut ChaCha8Rng, coord: usize, c: f64) -> Expr {
    let root = c.sqrt();
    match rng.random_range(0..5) {
        0 => Expr::Box {
            coords: Some(vec![coord]),
            lower: vec![(root - rng.random_range(0.3..1.5)).max(0.0)],
            upper: vec![root + rng.random_range(0.3..1.5)],
        },
        1 => Expr::Sin { coord, freq: rng.random_range(0.5..3.0) },
        2 => Expr::Cos { coord, freq: rng.random_range(0.5..3.0) },
        3 => Expr::Gaussian { coord, scale: rng.random_range(0.2..2.0) / c },
        _ => {
            let exponent = if rng.random::<bool>() { 1.0 } else { 2.0 };
            Expr::Power { coord, exponent, cap: rng.random_range(0.5..1.5) * c.powf(exponent / 2.0) }
        }
    }
}

/// A random symbol of arity `shapes.len()` (1 or 2) adapted to the Gamma shapes.
fn random_symbol(rng: &mut ChaCha8Rng, shapes: &[f64]) -> QuasiRadialSymbol {
    let k = shapes.len();
    let expr = if k == 1 {
        random_factor(rng, 0, shapes[0])
    } else {
        let a = random_factor(rng, 0, shapes[0]);
        let b = random_factor(rng, 1, shapes[1]);
        if rng.random::<bool>() {
            Expr::Product { factors: vec![a, b] }
        } else {
            let w = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            Expr::Sum { terms: vec![Term { weight: Scalar(w), expr: a }, Term { weight: Scalar::real(1.0), expr: b }] }
        }
    };
    QuasiRadialSymbol::with_arity(expr, k).expect("valid random symbol")
}

fn random_case(rng: &mut ChaCha8Rng, max_m: usize) -> (Partition, MultiIndex) {
    let k = rng.random_range(1..=2);
    let n = Partition::new((0..k).map(|_| rng.random_range(1..=3)).collect()).expect("positive parts");
    let m = MultiIndex((0..k).map(|_| rng.random_range(0..=max_m)).collect());
    (n, m)
}

fn relative_gap(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Toeplitz operators of radial symbols are diagonal on the monomial basis, with the
/// eigenvalue of the monomial's degree profile on the diagonal.
pub fn schur_blocks(cfg: &VerifyConfig) -> Result<Check> {
    let partition = cfg.partition.clone().unwrap_or_else(|| Partition::new(vec![2, 1]).expect("valid"));
    let k = partition.k();
    let symbols = match &cfg.symbol {
        Some(s) => vec![("input".to_string(), s.lift(k)?)],
        None => invariant_test_symbols(k),
    };
    let max_degree = 4;
    let mut passed = true;
    let mut rows = Vec::new();
    for (idx, (name, a)) in symbols.iter().enumerate() {
        let phi = radial_function(a, &partition)?;
        let report = diagonalization_report(phi, &partition, max_degree, cfg.samples, cfg.seed.wrapping_add(idx as u64))?;
        let mut max_diag_z = 0.0f64;
        let mut worst_diag = Value::Null;
        for (alpha, est) in report.basis.iter().zip(&report.diagonal) {
            let m = MultiIndex(degree_profile(alpha, &partition)?);
            let exact = eigenvalue_with(a, &partition, &m, cfg.order, cfg.mode)?.value;
            let gap = (est.mean - exact).norm();
            let z = if est.std_error > 0.0 { gap / est.std_error } else if gap > 0.0 { f64::INFINITY } else { 0.0 };
            if z > max_diag_z || worst_diag.is_null() {
                max_diag_z = max_diag_z.max(z);
                worst_diag = json!({"alpha": alpha, "estimate": c(est.mean), "std_error": est.std_error, "eigenvalue": c(exact)});
            }
        }
        let ok = report.max_offdiag_z <= 4.0 && max_diag_z <= 4.0;
        passed &= ok;
        rows.push(json!({
            "symbol": name,
            "passed": ok,
            "basis_size": report.basis.len(),
            "blocks": report.blocks.len(),
            "max_offdiag": report.max_offdiag,
            "max_offdiag_z": report.max_offdiag_z,
            "worst_offdiag": report.worst_offdiag.as_ref().map(|w| json!({
                "alpha": w.alpha, "beta": w.beta, "mean": c(w.mean), "std_error": w.std_error
            })),
            "max_diagonal_z": max_diag_z,
            "worst_diagonal": worst_diag,
        }));
    }
    Ok(check(
        "schur_diagonalization",
        passed,
        json!({"partition": partition.parts(), "max_degree": max_degree, "samples": cfg.samples, "z_limit": 4.0, "symbols": rows}),
    ))
}

/// Quadrature against direct Gamma sampling on random `(symbol, n, m)` triples.
pub fn oracle_agreement(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg, 2);
    let cases = 50;
    let mut passed = true;
    let mut max_z = 0.0f64;
    let mut worst = Value::Null;
    for case in 0..cases {
        let (n, m) = random_case(&mut rng, 50);
        let shapes = n.shapes(&m)?;
        let a = random_symbol(&mut rng, &shapes);
        let quad = eigenvalue_with(&a, &n, &m, cfg.order, cfg.mode)?;
        let mc = gamma_mc(&a, &shapes, cfg.samples, cfg.seed.wrapping_add(1000 + case))?;
        let gap = (quad.value - mc.mean).norm();
        let ok = gap <= 4.0 * mc.std_error + quad.error;
        passed &= ok;
        let z = if mc.std_error > 0.0 { gap / mc.std_error } else { 0.0 };
        if !ok || z > max_z || worst.is_null() {
            max_z = max_z.max(z);
            worst = json!({
                "symbol": a.to_value(), "n": n.parts(), "m": m.0,
                "quadrature": c(quad.value), "quadrature_error": quad.error,
                "monte_carlo": c(mc.mean), "std_error": mc.std_error, "passed": ok,
            });
        }
    }
    Ok(check(
        "oracle_agreement",
        passed,
        json!({"cases": cases, "samples": cfg.samples, "max_z": max_z, "worst": worst}),
    ))
}

/// `gamma_{n,a}(m) = gamma_{1,a}(m + n - 1)` and the factorization over product symbols.
pub fn exact_identities(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg, 3);
    let cases = 100;
    let mut shift_max = 0.0f64;
    let mut shift_worst = Value::Null;
    for _ in 0..cases {
        let (n, m) = random_case(&mut rng, 200);
        let a = random_symbol(&mut rng, &n.shapes(&m)?);
        let lhs = eigenvalue_with(&a, &n, &m, cfg.order, cfg.mode)?.value;
        let ones = Partition::ones(n.k());
        let moved = m.checked_add(&n.minus_one())?;
        let rhs = eigenvalue_with(&a, &ones, &moved, cfg.order, cfg.mode)?.value;
        let gap = relative_gap(lhs, rhs);
        if gap > shift_max || shift_worst.is_null() {
            shift_max = shift_max.max(gap);
            shift_worst = json!({"n": n.parts(), "m": m.0, "general": c(lhs), "shifted": c(rhs)});
        }
    }
    let mut prod_max = 0.0f64;
    let mut prod_worst = Value::Null;
    for _ in 0..cases {
        let n = Partition::new(vec![rng.random_range(1..=3), rng.random_range(1..=3)])?;
        let m = MultiIndex(vec![rng.random_range(0..=200), rng.random_range(0..=200)]);
        let shapes = n.shapes(&m)?;
        let fa = random_factor(&mut rng, 0, shapes[0]);
        let fb = random_factor(&mut rng, 0, shapes[1]);
        let joint = QuasiRadialSymbol::with_arity(Expr::Product { factors: vec![fa.clone(), fb.remap_coordinate(0, 1)] }, 2)?;
        let lhs = eigenvalue_with(&joint, &n, &m, cfg.order, cfg.mode)?.value;
        let ga = eigenvalue_with(&one_dim(fa), &Partition::new(vec![n.parts()[0]])?, &MultiIndex(vec![m.0[0]]), cfg.order, cfg.mode)?;
        let gb = eigenvalue_with(&one_dim(fb), &Partition::new(vec![n.parts()[1]])?, &MultiIndex(vec![m.0[1]]), cfg.order, cfg.mode)?;
        let rhs = ga.value * gb.value;
        let gap = relative_gap(lhs, rhs);
        if gap > prod_max || prod_worst.is_null() {
            prod_max = prod_max.max(gap);
            prod_worst = json!({"n": n.parts(), "m": m.0, "joint": c(lhs), "factored": c(rhs)});
        }
    }
    let passed = shift_max <= 1e-12 && prod_max <= 1e-10;
    Ok(check(
        "exact_identities",
        passed,
        json!({
            "shift": {"cases": cases, "max_relative_gap": shift_max, "tolerance": 1e-12, "worst": shift_worst},
            "product": {"cases": cases, "max_relative_gap": prod_max, "tolerance": 1e-10, "worst": prod_worst},
        }),
    ))
}

/// `P(m + 1, 1) = e^{-1} sum_{j > m} 1/j!`, summed in log space.
pub fn regularized_gamma_at_one(m: u64) -> f64 {
    let mut sum = 0.0;
    for j in (m + 1)..(m + 60) {
        sum += (-1.0 - ln_gamma(j as f64 + 1.0)).exp();
    }
    sum
}

/// Indicator of `[0, 1)` and the capped identity `min(s^2, cap)`.
pub fn closed_forms(cfg: &VerifyConfig) -> Result<Check> {
    let ones = Partition::ones(1);
    let boxed = one_dim(Expr::unit_box(vec![0], 1.0));
    let window = Window::new(vec![300])?;
    let table = eigen_table_with(&boxed, &ones, &window, cfg.order, cfg.mode, DEFAULT_CELL_CAP)?;
    let (box_max, box_arg) = table
        .values
        .iter()
        .enumerate()
        .map(|(m, v)| ((v - Complex64::new(regularized_gamma_at_one(m as u64), 0.0)).norm(), m))
        .fold((0.0f64, 0), |b, x| if x.0 > b.0 { x } else { b });

    let mut powers = Vec::new();
    let mut passed = box_max <= 1e-10;
    for cap in [200.0, 1000.0] {
        let a = one_dim(Expr::Power { coord: 0, exponent: 2.0, cap });
        // mass of Gamma(m + 1) above cap is negligible
        let valid: Vec<usize> = (0..=300usize)
            .filter(|&m| {
                let c = (m + 1) as f64;
                c + 12.0 * c.sqrt() + 30.0 <= cap
            })
            .collect();
        let mut max_rel = 0.0f64;
        let mut arg = 0;
        for &m in &valid {
            let g = eigenvalue_with(&a, &ones, &MultiIndex(vec![m]), cfg.order, cfg.mode)?.value;
            let target = (m + 1) as f64;
            let rel = (g - Complex64::new(target, 0.0)).norm() / target;
            if rel > max_rel {
                max_rel = rel;
                arg = m;
            }
        }
        passed &= max_rel <= 1e-10;
        powers.push(json!({"cap": cap, "checked_m": valid.len(), "max_relative_gap": max_rel, "argmax": arg}));
    }
    Ok(check(
        "closed_forms",
        passed,
        json!({
            "box": {"max_m": 300, "max_abs_gap": box_max, "argmax": box_arg, "tolerance": 1e-10},
            "capped_power": powers,
        }),
    ))
}

/// Empirical Lipschitz ratios on `[0, 200]^k` and the adjacent kernel distances.
pub fn lipschitz_bounds(cfg: &VerifyConfig) -> Result<Check> {
    let mut symbols = Vec::new();
    match &cfg.symbol {
        Some(s) if s.arity() <= 2 => symbols.push(("input".to_string(), s.clone())),
        Some(s) => {
            return Err(Error::Unsupported {
                kind: format!("lipschitz scan at arity {}", s.arity()),
                location: "symbol".into(),
            })
        }
        None => {
            for k in 1..=2 {
                symbols.extend(lipschitz_test_symbols(k));
            }
        }
    }
    let mut passed = true;
    let mut rows = Vec::new();
    for (name, a) in &symbols {
        let k = a.arity();
        let window = Window::cube(k, 200);
        let table = eigen_table_with(a, &Partition::ones(k), &window, cfg.order, cfg.mode, DEFAULT_CELL_CAP)?;
        let cert = lipschitz_certificate(&table, a.declared_sup())?;
        let ok = cert.max_ratio <= cert.bound + 1e-9;
        passed &= ok;
        rows.push(json!({
            "symbol": name, "k": k, "passed": ok, "max_ratio": cert.max_ratio, "bound": cert.bound,
            "witness": [cert.witness.0 .0, cert.witness.1 .0],
        }));
    }

    let top = 10_000u64;
    let kernel: Vec<(f64, f64, f64)> = (1..=top)
        .into_par_iter()
        .map(|m| {
            let d = kernel_l1_distance(m, m - 1);
            let closed = adjacent_kernel_distance(m);
            let quad = kernel_l1_quadrature(m, m - 1).0;
            (d - (2.0 / (PI * m as f64)).sqrt(), (quad - closed).abs(), d)
        })
        .collect();
    let (excess, excess_at) = kernel
        .iter()
        .enumerate()
        .map(|(i, x)| (x.0, i as u64 + 1))
        .fold((f64::NEG_INFINITY, 0), |b, x| if x.0 > b.0 { x } else { b });
    let (gap, gap_at) = kernel
        .iter()
        .enumerate()
        .map(|(i, x)| (x.1, i as u64 + 1))
        .fold((0.0f64, 0), |b, x| if x.0 > b.0 { x } else { b });
    let kernel_ok = excess <= 0.0 && gap <= 1e-10;
    passed &= kernel_ok;
    Ok(check(
        "lipschitz_bounds",
        passed,
        json!({
            "symbols": rows,
            "kernel": {
                "max_m": top,
                "max_excess_over_bound": excess, "excess_argmax": excess_at,
                "max_closed_form_gap": gap, "gap_argmax": gap_at,
                "distance_at_max_m": kernel[kernel.len() - 1].2,
                "passed": kernel_ok,
            },
        }),
    ))
}

fn integer_table(k: usize, side: usize, rng: &mut ChaCha8Rng) -> LatticeFunction {
    let values = (0..side.pow(k as u32)).map(|_| Complex64::new(rng.random_range(-5..=5) as f64, 0.0)).collect();
    LatticeFunction::table(vec![side; k], values, Complex64::new(rng.random_range(-5..=5) as f64, 0.0))
        .expect("valid table")
}

fn extension_test_lattices(k: usize, rng: &mut ChaCha8Rng) -> Vec<(String, LatticeFunction, bool)> {
    let wave = if k == 1 {
        Expr::Sin { coord: 0, freq: 2.0 }
    } else {
        Expr::Product {
            factors: (0..k).map(|j| if j % 2 == 0 { Expr::Sin { coord: j, freq: 2.0 } } else { Expr::Cos { coord: j, freq: 1.5 } }).collect(),
        }
    };
    let point: Vec<usize> = [2, 3, 1][..k].to_vec();
    vec![
        ("integer_table".into(), integer_table(k, 8, rng), true),
        ("root_wave".into(), LatticeFunction::sqrt_expr(wave, k).expect("valid"), false),
        ("point_indicator".into(), LatticeFunction::indicator(vec![MultiIndex(point)], k).expect("valid"), true),
    ]
}

/// Properties of the square-root multilinear extension for `k` in 1..=3.
pub fn extension_checks(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg, 6);
    let mut passed = true;
    let mut rows = Vec::new();
    let lattices: Vec<(String, LatticeFunction, bool)> = match &cfg.lattice {
        Some(l) if l.arity() <= 3 => vec![("input".into(), l.clone(), false)],
        Some(l) => {
            return Err(Error::Unsupported { kind: format!("extension grid at arity {}", l.arity()), location: "lattice".into() })
        }
        None => (1..=3).flat_map(|k| extension_test_lattices(k, &mut rng)).collect(),
    };
    for (name, sigma, integer) in &lattices {
        let k = sigma.arity();
        let inner = Window::cube(k, 6);

        let restriction_exact = inner.points().all(|m| {
            let x: Vec<f64> = m.0.iter().map(|&v| v as f64).collect();
            extend_eval(sigma, &x).is_ok_and(|v| v == sigma.at(&m.0))
        });

        let mut bit_exact = true;
        if *integer {
            for m in inner.points() {
                let cell = CellEvaluation::new(sigma, &m)?;
                for mask in 1..1usize << k {
                    let subset: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
                    let d = coeff(sigma, &m, &subset)?;
                    bit_exact &= d == coeff_recurrence(sigma, &m, &subset)? && d == cell.coefficient(mask);
                }
            }
        }

        let mut partition_gap = 0.0f64;
        let mut min_weight = f64::INFINITY;
        let mut reproduction_gap = 0.0f64;
        for _ in 0..10_000 {
            let m = MultiIndex((0..k).map(|_| rng.random_range(0..6)).collect());
            let x: Vec<f64> = m.0.iter().map(|&v| v as f64 + rng.random::<f64>()).collect();
            let b = b_coefficients(&m, &x)?;
            partition_gap = partition_gap.max((b.sum() - 1.0).abs());
            min_weight = min_weight.min(b.min());
            reproduction_gap = reproduction_gap.max((b.combine(sigma)? - extend_eval(sigma, &x)?).norm());
        }

        // points on a face shared by two cells, evaluated from both sides
        let mut face_gap = 0.0f64;
        for _ in 0..2_000 {
            let axis = rng.random_range(0..k);
            let mut x: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 6.0).collect();
            let face = rng.random_range(1..=6usize);
            x[axis] = face as f64;
            let base: Vec<usize> = x.iter().map(|v| (v.floor() as usize).min(5)).collect();
            let mut below = base.clone();
            below[axis] = face - 1;
            let mut above = base;
            above[axis] = face;
            let lo = CellEvaluation::new(sigma, &MultiIndex(below))?.value(&x)?;
            let hi = CellEvaluation::new(sigma, &MultiIndex(above))?.value(&x)?;
            face_gap = face_gap.max((lo - hi).norm());
        }

        let grid = grid_check(sigma, GridCheckConfig::default())?;
        let ok = restriction_exact
            && bit_exact
            && partition_gap <= 1e-12
            && min_weight >= -1e-12
            && reproduction_gap <= 1e-12 * sigma.declared_sup().max(1.0)
            && face_gap <= 1e-12
            && grid.passed();
        passed &= ok;
        rows.push(json!({
            "lattice": name, "k": k, "passed": ok,
            "restriction_exact": restriction_exact,
            "coefficients_bit_exact": if *integer { json!(bit_exact) } else { Value::Null },
            "partition_of_unity_gap": partition_gap,
            "min_weight": min_weight,
            "reproduction_gap": reproduction_gap,
            "boundary_gap": face_gap,
            "grid": grid,
        }));
    }

    let mut lemma_excess = f64::NEG_INFINITY;
    let unit = |r: &mut ChaCha8Rng| Complex64::from_polar(r.random::<f64>().sqrt(), r.random::<f64>() * 2.0 * PI);
    for _ in 0..100_000 {
        let l = rng.random_range(1..=8);
        let a: Vec<Complex64> = (0..l).map(|_| unit(&mut rng)).collect();
        let b: Vec<Complex64> = (0..l).map(|_| unit(&mut rng)).collect();
        let (lhs, rhs) = product_difference(&a, &b)?;
        lemma_excess = lemma_excess.max(lhs - rhs);
    }
    let lemma_ok = lemma_excess <= 1e-12;
    passed &= lemma_ok;
    Ok(check(
        "extension",
        passed,
        json!({
            "lattices": rows,
            "product_difference": {"tuples": 100_000, "max_length": 8, "max_excess": lemma_excess, "passed": lemma_ok},
        }),
    ))
}

/// Twenty one-dimensional lattice functions with varied moduli.
pub fn shift_test_lattices(rng: &mut ChaCha8Rng) -> Vec<(String, LatticeFunction)> {
    let mut out: Vec<(String, LatticeFunction)> = Vec::new();
    let root = |e: Expr| LatticeFunction::sqrt_expr(e, 1).expect("valid");
    for f in [0.5, 1.0, 2.0, 4.0] {
        out.push((format!("sin_{f}"), root(Expr::Sin { coord: 0, freq: f })));
        out.push((format!("cos_{f}"), root(Expr::Cos { coord: 0, freq: f })));
    }
    for s in [0.01, 0.1] {
        out.push((format!("gaussian_{s}"), root(Expr::Gaussian { coord: 0, scale: s })));
    }
    for u in [2.5, 7.0] {
        out.push((format!("box_{u}"), root(Expr::unit_box(vec![0], u))));
    }
    out.push((
        "band".into(),
        root(Expr::Box { coords: None, lower: vec![1.5], upper: vec![3.5] }),
    ));
    out.push(("capped_root".into(), root(Expr::Power { coord: 0, exponent: 1.0, cap: 10.0 })));
    out.push(("point".into(), LatticeFunction::indicator(vec![MultiIndex(vec![3])], 1).expect("valid")));
    for side in [10, 40, 200] {
        let values = (0..side).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        out.push((format!("table_{side}"), LatticeFunction::table(vec![side], values, Complex64::new(0.0, 0.0)).expect("valid")));
    }
    let product = LatticeRule::Product {
        factors: vec![LatticeRule::SqrtExpr { expr: Expr::Sum {
            terms: vec![
                Term { weight: Scalar::real(0.5), expr: Expr::Sin { coord: 0, freq: 3.0 } },
                Term { weight: Scalar(Complex64::new(0.0, 0.5)), expr: Expr::Cos { coord: 0, freq: 0.3 } },
            ],
        } }],
    };
    out.push(("mixed".into(), LatticeFunction::with_arity(product, 1).expect("valid")));
    out.push(("sin_shifted".into(), shift_left(&root(Expr::Sin { coord: 0, freq: 1.5 }), &MultiIndex(vec![7])).expect("valid")));
    out
}

/// Left shifts do not increase the modulus; right shifts by `s` satisfy
/// `omega(tau_R sigma, delta) <= omega(sigma, sqrt 2 delta)` when `delta < sqrt(2s) - sqrt(2s - 1)`.
pub fn shift_moduli(cfg: &VerifyConfig) -> Result<Check> {
    let mut rng = rng_for(cfg, 7);
    let lattices = match &cfg.lattice {
        Some(l) if l.arity() == 1 => vec![("input".to_string(), l.clone())],
        Some(l) => {
            return Err(Error::Unsupported { kind: format!("shift scan at arity {}", l.arity()), location: "lattice".into() })
        }
        None => shift_test_lattices(&mut rng),
    };
    let bound = 2000usize;
    let deltas: Vec<f64> = (1..=20).map(|i| i as f64 / 10.0).collect();
    let widened: Vec<f64> = deltas.iter().map(|d| d * 2f64.sqrt()).collect();
    let window = Window::new(vec![bound])?;

    let rows: Vec<Result<Value>> = lattices
        .par_iter()
        .map(|(name, sigma)| {
            let base = modulus_profile(sigma, &widened, &window)?;
            let mut left_excess = f64::NEG_INFINITY;
            let mut right_excess = f64::NEG_INFINITY;
            let mut right_checked = 0usize;
            let mut beyond_threshold_holds = 0usize;
            let mut beyond_threshold = 0usize;
            for s in 0..=5usize {
                let shift = MultiIndex(vec![s]);
                let wide = Window::new(vec![bound + s])?;
                let reference = modulus_profile(sigma, &deltas, &wide)?;
                let left = modulus_profile(&shift_left(sigma, &shift)?, &deltas, &window)?;
                for (l, r) in left.iter().zip(&reference) {
                    left_excess = left_excess.max(l - r);
                }
                let right = modulus_profile(&shift_right(sigma, &shift)?, &deltas, &window)?;
                let threshold = if s == 0 { f64::INFINITY } else { (2.0 * s as f64).sqrt() - (2.0 * s as f64 - 1.0).sqrt() };
                for ((d, r), b) in deltas.iter().zip(&right).zip(&base) {
                    if *d < threshold {
                        right_checked += 1;
                        right_excess = right_excess.max(r - b);
                    } else {
                        beyond_threshold += 1;
                        beyond_threshold_holds += usize::from(r <= b);
                    }
                }
            }
            Ok(json!({
                "lattice": name,
                "left_max_excess": left_excess,
                "right_max_excess": right_excess,
                "right_checked": right_checked,
                "right_beyond_threshold": beyond_threshold,
                "right_beyond_threshold_holding": beyond_threshold_holds,
                "passed": left_excess <= 0.0 && right_excess <= 0.0,
            }))
        })
        .collect();
    let rows: Vec<Value> = rows.into_iter().collect::<Result<_>>()?;
    let passed = rows.iter().all(|r| r["passed"] == json!(true));
    Ok(check(
        "shift_moduli",
        passed,
        json!({"window": bound, "max_shift": 5, "deltas": deltas, "lattices": rows}),
    ))
}

/// Reference values of `int |G(m, .) - H| dr`, computed independently at 50 digits.
pub const KERNEL_GAP_REFERENCE: [(u64, f64); 6] = [
    (0, 0.785_496_813_649_613_7),
    (1, 0.453_988_511_055_750_9),
    (10, 0.166_254_520_676_421_2),
    (100, 0.053_129_937_631_659_157),
    (1000, 0.016_818_909_553_725_396),
    (10_000, 0.005_319_167_978_877_687),
];

/// Kernel gaps, synthesis of `sin sqrt m`, constant targets and the reduction of general `n`.
pub fn density_pipeline(cfg: &VerifyConfig) -> Result<Check> {
    let gaps: Vec<(u64, f64, f64)> =
        KERNEL_GAP_REFERENCE.iter().map(|&(m, r)| (m, kernel_l1_gap(m), r)).collect();
    let gap = |m: u64| gaps.iter().find(|g| g.0 == m).expect("tabulated").1;
    let decreasing = [1, 10, 100, 1000].windows(2).all(|w| gap(w[1]) < gap(w[0]));
    let fifth = gap(10_000) < gap(1) / 5.0;
    let reference_gap = gaps.iter().map(|g| (g.1 - g.2).abs()).fold(0.0, f64::max);
    let gaps_ok = decreasing && fifth && reference_gap <= 1e-9;

    let params = SynthesisParams { order: cfg.order, mode: cfg.mode, ..SynthesisParams::default() };
    let ones = Partition::ones(1);
    let sine = LatticeFunction::sqrt_expr(Expr::Sin { coord: 0, freq: 1.0 }, 1)?;
    let (_, sine_report) = synthesize_symbol(&sine, &ones, 0.1, &Window::new(vec![400])?, &params)?;
    let sine_ok = sine_report.sup_residual < 0.1;

    let mut constants = Vec::new();
    let mut constants_ok = true;
    for value in [1.0, -0.5, 3.0] {
        let (_, r) = synthesize_symbol(&LatticeFunction::constant(value, 1), &ones, 1e-6, &Window::new(vec![400])?, &params)?;
        constants_ok &= r.sup_residual < 1e-6;
        constants.push(json!({"value": value, "sup_residual": r.sup_residual}));
    }

    let bound = 60usize;
    let three = Partition::new(vec![3])?;
    let (a3, _) = synthesize_symbol(&sine, &three, 0.1, &Window::new(vec![bound])?, &params)?;
    let shifted = shift_right(&sine, &MultiIndex(vec![2]))?;
    let (a1, _) = synthesize_symbol(&shifted, &ones, 0.1, &Window::new(vec![bound + 2])?, &params)?;
    let g3 = eigen_table_with(&a3, &three, &Window::new(vec![bound])?, cfg.order, cfg.mode, DEFAULT_CELL_CAP)?;
    let g1 = eigen_table_with(&a1, &ones, &Window::new(vec![bound + 2])?, cfg.order, cfg.mode, DEFAULT_CELL_CAP)?;
    let reduction_gap = (0..=bound).map(|m| (g3.values[m] - g1.values[m + 2]).norm()).fold(0.0, f64::max);
    let reduction_ok = reduction_gap <= 1e-9;

    let passed = gaps_ok && sine_ok && constants_ok && reduction_ok;
    Ok(check(
        "density",
        passed,
        json!({
            "kernel_gaps": {
                "values": gaps.iter().map(|g| json!({"m": g.0, "gap": g.1, "reference": g.2})).collect::<Vec<_>>(),
                "strictly_decreasing": decreasing,
                "tail_below_fifth": fifth,
                "max_reference_gap": reference_gap,
                "passed": gaps_ok,
            },
            "sine_root": {"window": 400, "sup_residual": sine_report.sup_residual, "flags": sine_report.flags, "passed": sine_ok},
            "constants": {"targets": constants, "passed": constants_ok},
            "partition_reduction": {"window": bound, "max_gap": reduction_gap, "passed": reduction_ok},
        }),
    ))
}

/// The two-variable function `g`: 1-Lipschitz for `rho_2`, with rows bounded away from
/// each other, so no finite net of rows exists.
pub fn obstruction_witness(cfg: &VerifyConfig) -> Result<Check> {
    let lip = lipschitz_scan(100_000, 1_000_000, cfg.seed);
    let lip_ok = lip.max_excess <= 1e-12;

    let mut rng = rng_for(cfg, 9);
    let mut rows: Vec<u64> = (0..=10_000).collect();
    rows.extend((0..100).map(|_| rng.random_range(0..=100_000_000u64)));
    let sups = row_sup_scan(&rows);
    let sup_ok = sups.min_sup >= 0.5;

    let sep = separation_scan(1_000, 1_000_000, cfg.seed.wrapping_add(1));
    let sep_ok = sep.min_separation >= 0.5;

    let spaced = root_spaced_rows(40, PI + 0.1);
    let net = greedy_net(&spaced, 0.25);
    let net_ok = net.len() == spaced.len();

    Ok(check(
        "obstruction",
        lip_ok && sup_ok && sep_ok && net_ok,
        json!({
            "lipschitz": {"scan": lip, "passed": lip_ok},
            "row_sup": {"scan": sups, "passed": sup_ok},
            "separation": {"scan": sep, "passed": sep_ok},
            "net": {"rows": spaced.len(), "centers": net.len(), "radius": 0.25, "passed": net_ok},
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn incomplete_gamma_series() {
        assert!((regularized_gamma_at_one(2) - (1.0 - 2.5 * (-1f64).exp())).abs() < 1e-15);
        assert!((regularized_gamma_at_one(0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(regularized_gamma_at_one(300), 0.0);
    }

    #[test]
    fn twenty_shift_lattices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(shift_test_lattices(&mut rng).len(), 20);
    }
}
