//! `E[a(sqrt R_1, ..., sqrt R_k)]` for independent `R_j ~ Gamma(shape_j, 1)`.
//!
//! The symbol is first split into pieces: scalar multiples of products of
//! single-coordinate factors (integrated one coordinate at a time) and joint
//! pieces that couple coordinates (integrated on a tensor grid).
//!
//! Smooth mode uses generalized Gauss-Laguerre in `r` and estimates its error
//! by comparing against the rule of half the order. Adaptive mode integrates
//! in `s = sqrt r`, where the density `2 s^{2c-1} e^{-s^2} / Gamma(c)` has
//! width below one for every shape, using G7/K15 on canonical panels: the
//! multiples of 0.25 together with the symbol's jump and kink locations.
//! Its error estimate is `|K15 - G7|` plus analytic Gamma tail bounds for the
//! mass outside `[c - 12 sqrt c - 30, c + 12 sqrt c + 30]`.
//!
//! Panels depend only on the symbol, so every shape reuses the same nodes.
//! Tables over many shapes exploit this and reproduce pointwise results bit for bit.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::kronrod::panel_points;
use super::laguerre::{laguerre_rule, QuadRule};
use crate::error::{Error, Result};
use crate::symbol::{Expr, QuasiRadialSymbol};

pub const DEFAULT_ORDER: usize = 80;
const PANEL: f64 = 0.25;
const SIGMAS: f64 = 12.0;
const PAD: f64 = 30.0;
/// Relative rounding allowance folded into every error estimate.
const ROUNDING: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Smooth where the symbol permits it, adaptive elsewhere.
    #[default]
    Auto,
    Smooth,
    Adaptive,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Mode::Auto),
            "smooth" => Ok(Mode::Smooth),
            "adaptive" => Ok(Mode::Adaptive),
            other => Err(Error::param(format!("unknown quadrature mode `{other}`"))),
        }
    }
}

/// A quadrature value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

/// The `r`-interval `[max(0, c - 12 sqrt c - 30), c + 12 sqrt c + 30]` carrying
/// all but a negligible part of the `Gamma(c, 1)` mass.
pub fn gamma_window(shape: f64) -> (f64, f64) {
    let spread = SIGMAS * shape.sqrt() + PAD;
    ((shape - spread).max(0.0), shape + spread)
}

/// Upper bound on `Q(c, t) = Gamma(c, t) / Gamma(c)`.
pub fn upper_tail_bound(c: f64, t: f64) -> f64 {
    if t <= 0.0 || (c > 1.0 && t <= c - 1.0) {
        return 1.0;
    }
    let log = (c - 1.0) * t.ln() - t - ln_gamma(c);
    let denom = if c > 1.0 { 1.0 - (c - 1.0) / t } else { 1.0 };
    (log.exp() / denom).min(1.0)
}

/// Upper bound on the regularized lower incomplete gamma `P(c, x)`.
pub fn lower_tail_bound(c: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= c + 1.0 {
        return 1.0;
    }
    let log = c * x.ln() - x - ln_gamma(c + 1.0);
    (log.exp() / (1.0 - x / (c + 1.0))).min(1.0)
}

fn rule_cache() -> &'static Mutex<HashMap<(u64, usize), Arc<QuadRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<QuadRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Memoized [`laguerre_rule`]; rules are deterministic so caching cannot change results.
pub(crate) fn cached_rule(alpha: f64, order: usize) -> Result<Arc<QuadRule>> {
    let key = (alpha.to_bits(), order);
    if let Some(r) = rule_cache().lock().expect("rule cache poisoned").get(&key) {
        return Ok(r.clone());
    }
    let rule = Arc::new(laguerre_rule(alpha, order)?);
    let mut cache = rule_cache().lock().expect("rule cache poisoned");
    if cache.len() >= 8192 {
        cache.clear();
    }
    cache.insert(key, rule.clone());
    Ok(rule)
}

#[inline]
fn axpy(acc: &mut Complex64, f: Complex64, w: f64) {
    *acc += f * w;
}

/// Canonical panel boundaries in `s` along one coordinate.
#[derive(Debug, Clone)]
struct AxisGrid {
    bounds: Vec<f64>,
}

impl AxisGrid {
    fn new(breaks: &[f64], hi: f64) -> Self {
        let top_i = (hi / PANEL).ceil().max(1.0) as usize;
        let mut bounds: Vec<f64> = (0..=top_i).map(|i| i as f64 * PANEL).collect();
        let top = bounds[top_i];
        bounds.extend(breaks.iter().copied().filter(|&x| x > 0.0 && x < top));
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();
        Self { bounds }
    }

    /// Panels `[p0, p1)` covering `[lo, hi]`.
    fn span(&self, lo: f64, hi: f64) -> (usize, usize) {
        let p0 = self.bounds.partition_point(|&x| x <= lo).saturating_sub(1);
        let p1 = self.bounds.partition_point(|&x| x < hi).min(self.bounds.len() - 1);
        (p0, p1.max(p0 + 1))
    }

    fn panel_nodes(&self, p: usize) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let (a, b) = (self.bounds[p], self.bounds[p + 1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        panel_points().into_iter().map(move |(x, wk, wg)| (mid + half * x, wk * half, wg * half))
    }

    fn nodes(&self) -> Vec<f64> {
        (0..self.bounds.len() - 1).flat_map(|p| self.panel_nodes(p).map(|n| n.0)).collect()
    }
}

/// Per-shape weights on a contiguous run of panels of an [`AxisGrid`].
#[derive(Debug, Clone)]
struct AxisRule {
    /// Global index of the first node.
    first: usize,
    nodes: Vec<f64>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
    /// Probability mass outside the covered panels (upper bound).
    tail: f64,
}

fn adaptive_rule(grid: &AxisGrid, shape: f64) -> AxisRule {
    let (lo_r, hi_r) = gamma_window(shape);
    let (p0, p1) = grid.span(lo_r.sqrt(), hi_r.sqrt());
    let log_norm = LN_2 - ln_gamma(shape);
    let n = 15 * (p1 - p0);
    let (mut nodes, mut kronrod, mut gauss) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in p0..p1 {
        for (s, wk, wg) in grid.panel_nodes(p) {
            let dens = (log_norm + (2.0 * shape - 1.0) * s.ln() - s * s).exp();
            nodes.push(s);
            kronrod.push(wk * dens);
            gauss.push(wg * dens);
        }
    }
    let lo = grid.bounds[p0];
    let hi = grid.bounds[p1];
    let tail = lower_tail_bound(shape, lo * lo) + upper_tail_bound(shape, hi * hi);
    AxisRule { first: 15 * p0, nodes, kronrod, gauss, tail }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolved {
    Smooth,
    Adaptive,
}

/// A single-coordinate factor, rewritten to read coordinate 0.
#[derive(Debug, Clone)]
struct Factor {
    coord: usize,
    expr: Expr,
    breaks: Vec<f64>,
    sup: f64,
    jumps: bool,
    smooth: bool,
}

#[derive(Debug, Clone)]
enum Piece {
    Separable {
        scalar: Complex64,
        factors: Vec<Factor>,
    },
    Joint {
        weight: Complex64,
        expr: Expr,
        coords: Vec<usize>,
        breaks: Vec<Vec<f64>>,
        sup: f64,
        jumps: bool,
        smooth: bool,
    },
}

fn sorted_breaks(expr: &Expr, coord: usize) -> Vec<f64> {
    let mut b = Vec::new();
    expr.breakpoints(coord, &mut b);
    b.retain(|x| x.is_finite() && *x > 0.0);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn decompose(expr: &Expr, weight: Complex64, out: &mut Vec<Piece>) {
    if let Expr::Sum { terms } = expr {
        for t in terms {
            decompose(&t.expr, weight * t.weight.0, out);
        }
        return;
    }
    match expr.separate() {
        Some((scalar, factors)) => out.push(Piece::Separable {
            scalar: weight * scalar,
            factors: factors
                .into_iter()
                .map(|(coord, e)| Factor {
                    coord,
                    breaks: sorted_breaks(&e, 0),
                    sup: e.sup_bound(),
                    jumps: e.has_jumps(),
                    smooth: e.is_smooth_in_square(),
                    expr: e,
                })
                .collect(),
        }),
        None => {
            let coords = expr.coordinates();
            out.push(Piece::Joint {
                weight,
                breaks: coords.iter().map(|&c| sorted_breaks(expr, c)).collect(),
                sup: expr.sup_bound(),
                jumps: expr.has_jumps(),
                smooth: expr.is_smooth_in_square(),
                coords,
                expr: expr.clone(),
            })
        }
    }
}

fn resolve(mode: Mode, jumps: bool, smooth: bool, breaks: &[&[f64]], shapes: &[f64]) -> Resolved {
    match mode {
        Mode::Smooth => Resolved::Smooth,
        Mode::Adaptive => Resolved::Adaptive,
        Mode::Auto => {
            let clear = breaks.iter().zip(shapes).all(|(b, &c)| {
                let hi = gamma_window(c).1.sqrt();
                c >= 1.0 && b.iter().all(|&x| x > hi)
            });
            if !jumps && smooth && clear {
                Resolved::Smooth
            } else {
                Resolved::Adaptive
            }
        }
    }
}

/// Reusable evaluator for one symbol, order and mode.
#[derive(Debug, Clone)]
pub struct GammaPlan {
    arity: usize,
    order: usize,
    mode: Mode,
    pieces: Vec<Piece>,
}

impl GammaPlan {
    pub fn new(a: &QuasiRadialSymbol, order: usize, mode: Mode) -> Result<Self> {
        if order == 0 {
            return Err(Error::param("quadrature order must be >= 1"));
        }
        let mut pieces = Vec::new();
        decompose(a.expr(), Complex64::new(1.0, 0.0), &mut pieces);
        if mode == Mode::Smooth {
            let jumps = pieces.iter().any(|p| match p {
                Piece::Separable { factors, .. } => factors.iter().any(|f| f.jumps),
                Piece::Joint { jumps, .. } => *jumps,
            });
            if jumps {
                return Err(Error::Mode("smooth mode cannot integrate box or grid symbols".into()));
            }
        }
        Ok(Self { arity: a.arity(), order, mode, pieces })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    fn check_shapes(&self, shape: &[f64]) -> Result<()> {
        if shape.len() != self.arity {
            return Err(Error::arity(self.arity, shape.len()));
        }
        if let Some(c) = shape.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::param(format!("gamma shapes must be positive, got {c}")));
        }
        Ok(())
    }

    /// Expectation at one shape vector.
    pub fn expect(&self, shape: &[f64]) -> Result<Estimate> {
        self.check_shapes(shape)?;
        let mut parts = Vec::with_capacity(self.pieces.len());
        for piece in &self.pieces {
            parts.push(match piece {
                Piece::Separable { scalar, factors } => {
                    let ests = factors
                        .iter()
                        .map(|f| self.factor_estimate(f, shape[f.coord]))
                        .collect::<Result<Vec<_>>>()?;
                    separable_combine(*scalar, &ests)
                }
                Piece::Joint { .. } => self.joint_estimate(piece, shape)?,
            });
        }
        Ok(sum_parts(&parts))
    }

    /// Expectations on the product of per-coordinate shape lists, row-major.
    pub fn table(&self, axes: &[Vec<f64>]) -> Result<Vec<Estimate>> {
        if axes.len() != self.arity {
            return Err(Error::arity(self.arity, axes.len()));
        }
        for ax in axes {
            if ax.is_empty() {
                return Err(Error::param("empty shape axis"));
            }
            if let Some(c) = ax.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
                return Err(Error::param(format!("gamma shapes must be positive, got {c}")));
            }
        }
        let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
        let cells: usize = dims.iter().product();

        // per piece: factor tables, or a 2-D joint table
        let mut factor_tables: Vec<Vec<Vec<Estimate>>> = Vec::with_capacity(self.pieces.len());
        let mut joint_tables: Vec<Option<Vec<Estimate>>> = Vec::with_capacity(self.pieces.len());
        for piece in &self.pieces {
            match piece {
                Piece::Separable { factors, .. } => {
                    let mut tabs = Vec::with_capacity(factors.len());
                    for f in factors {
                        let col = axes[f.coord]
                            .par_iter()
                            .map(|&c| self.factor_estimate(f, c))
                            .collect::<Result<Vec<_>>>()?;
                        tabs.push(col);
                    }
                    factor_tables.push(tabs);
                    joint_tables.push(None);
                }
                Piece::Joint { coords, .. } if coords.len() == 2 => {
                    factor_tables.push(Vec::new());
                    joint_tables.push(Some(self.joint_table_2d(piece, &axes[coords[0]], &axes[coords[1]])?));
                }
                Piece::Joint { .. } => {
                    factor_tables.push(Vec::new());
                    joint_tables.push(None);
                }
            }
        }

        (0..cells)
            .into_par_iter()
            .map(|flat| {
                let mut idx = vec![0usize; dims.len()];
                let mut rest = flat;
                for d in (0..dims.len()).rev() {
                    idx[d] = rest % dims[d];
                    rest /= dims[d];
                }
                let shape: Vec<f64> = idx.iter().zip(axes).map(|(&i, ax)| ax[i]).collect();
                let mut parts = Vec::with_capacity(self.pieces.len());
                for (pi, piece) in self.pieces.iter().enumerate() {
                    parts.push(match piece {
                        Piece::Separable { scalar, factors } => {
                            let ests: Vec<Estimate> = factors
                                .iter()
                                .zip(&factor_tables[pi])
                                .map(|(f, tab)| tab[idx[f.coord]])
                                .collect();
                            separable_combine(*scalar, &ests)
                        }
                        Piece::Joint { coords, .. } => match &joint_tables[pi] {
                            Some(tab) => {
                                let n2 = axes[coords[1]].len();
                                let e = tab[idx[coords[0]] * n2 + idx[coords[1]]];
                                match e.error.is_nan() {
                                    // NaN marks cells resolved to smooth mode
                                    true => self.joint_estimate(piece, &shape)?,
                                    false => e,
                                }
                            }
                            None => self.joint_estimate(piece, &shape)?,
                        },
                    });
                }
                Ok(sum_parts(&parts))
            })
            .collect()
    }

    fn factor_estimate(&self, f: &Factor, shape: f64) -> Result<Estimate> {
        let mode = resolve(self.mode, f.jumps, f.smooth, &[&f.breaks], &[shape]);
        let mut s = [0.0f64];
        let mut eval = |x: f64| {
            s[0] = x;
            f.expr.eval(&s)
        };
        match mode {
            Resolved::Smooth => {
                let full = cached_rule(shape - 1.0, self.order)?;
                let half = cached_rule(shape - 1.0, (self.order / 2).max(1))?;
                let mut v = Complex64::new(0.0, 0.0);
                for (&x, &w) in full.nodes.iter().zip(&full.weights) {
                    axpy(&mut v, eval(x.sqrt()), w);
                }
                let mut vh = Complex64::new(0.0, 0.0);
                for (&x, &w) in half.nodes.iter().zip(&half.weights) {
                    axpy(&mut vh, eval(x.sqrt()), w);
                }
                Ok(Estimate { value: v, error: (v - vh).norm() + ROUNDING * f.sup })
            }
            Resolved::Adaptive => {
                let (_, hi) = gamma_window(shape);
                let grid = AxisGrid::new(&f.breaks, hi.sqrt());
                let rule = adaptive_rule(&grid, shape);
                let mut v = Complex64::new(0.0, 0.0);
                let mut err = 0.0;
                for panel in 0..rule.nodes.len() / 15 {
                    let mut diff = Complex64::new(0.0, 0.0);
                    for i in 15 * panel..15 * (panel + 1) {
                        let y = eval(rule.nodes[i]);
                        axpy(&mut v, y, rule.kronrod[i]);
                        axpy(&mut diff, y, rule.kronrod[i] - rule.gauss[i]);
                    }
                    err += diff.norm();
                }
                Ok(Estimate { value: v, error: err + f.sup * rule.tail + ROUNDING * f.sup })
            }
        }
    }

    fn joint_estimate(&self, piece: &Piece, shape: &[f64]) -> Result<Estimate> {
        let Piece::Joint { weight, expr, coords, breaks, sup, jumps, smooth } = piece else {
            unreachable!("joint_estimate on a separable piece")
        };
        let local: Vec<f64> = coords.iter().map(|&c| shape[c]).collect();
        let brefs: Vec<&[f64]> = breaks.iter().map(Vec::as_slice).collect();
        let mode = resolve(self.mode, *jumps, *smooth, &brefs, &local);
        let mut point = vec![0.0; self.arity];
        let (value, err) = match mode {
            Resolved::Smooth => {
                let mut rules = Vec::with_capacity(coords.len());
                let mut halves = Vec::with_capacity(coords.len());
                for &c in &local {
                    let r = cached_rule(c - 1.0, self.order)?;
                    let h = cached_rule(c - 1.0, (self.order / 2).max(1))?;
                    rules.push((r.nodes.iter().map(|x| x.sqrt()).collect::<Vec<_>>(), r.weights.clone()));
                    halves.push((h.nodes.iter().map(|x| x.sqrt()).collect::<Vec<_>>(), h.weights.clone()));
                }
                let full: Vec<(&[f64], &[f64], &[f64])> =
                    rules.iter().map(|(n, w)| (n.as_slice(), w.as_slice(), w.as_slice())).collect();
                let half: Vec<(&[f64], &[f64], &[f64])> =
                    halves.iter().map(|(n, w)| (n.as_slice(), w.as_slice(), w.as_slice())).collect();
                let (v, _) = tensor_sum(expr, &mut point, coords, &full, 0);
                let (vh, _) = tensor_sum(expr, &mut point, coords, &half, 0);
                (v, (v - vh).norm() + ROUNDING * sup)
            }
            Resolved::Adaptive => {
                let rules: Vec<AxisRule> = local
                    .iter()
                    .zip(breaks)
                    .map(|(&c, b)| adaptive_rule(&AxisGrid::new(b, gamma_window(c).1.sqrt()), c))
                    .collect();
                let views: Vec<(&[f64], &[f64], &[f64])> = rules
                    .iter()
                    .map(|r| (r.nodes.as_slice(), r.kronrod.as_slice(), r.gauss.as_slice()))
                    .collect();
                let (vk, vg) = tensor_sum(expr, &mut point, coords, &views, 0);
                let tails: f64 = rules.iter().map(|r| r.tail).sum();
                (vk, (vk - vg).norm() + sup * tails + ROUNDING * sup)
            }
        };
        Ok(Estimate { value: *weight * value, error: weight.norm() * err })
    }

    /// Adaptive joint piece on two coordinates for all shape pairs, by
    /// contracting the symbol sampled on the shared node grid. Cells whose
    /// mode resolves to smooth are marked with a NaN error.
    fn joint_table_2d(&self, piece: &Piece, ax1: &[f64], ax2: &[f64]) -> Result<Vec<Estimate>> {
        let Piece::Joint { weight, expr, coords, breaks, sup, jumps, smooth } = piece else {
            unreachable!("joint_table_2d on a separable piece")
        };
        let modes: Vec<Resolved> = ax1
            .iter()
            .flat_map(|&c1| {
                ax2.iter()
                    .map(move |&c2| resolve(self.mode, *jumps, *smooth, &[&breaks[0], &breaks[1]], &[c1, c2]))
            })
            .collect();
        let marked = Estimate { value: Complex64::new(0.0, 0.0), error: f64::NAN };
        if modes.iter().all(|&m| m == Resolved::Smooth) {
            return Ok(vec![marked; modes.len()]);
        }
        let hi = |ax: &[f64]| ax.iter().map(|&c| gamma_window(c).1.sqrt()).fold(0.0, f64::max);
        let g1 = AxisGrid::new(&breaks[0], hi(ax1));
        let g2 = AxisGrid::new(&breaks[1], hi(ax2));
        let nodes1 = g1.nodes();
        let nodes2 = g2.nodes();
        let rules1: Vec<AxisRule> = ax1.par_iter().map(|&c| adaptive_rule(&g1, c)).collect();
        let rules2: Vec<AxisRule> = ax2.par_iter().map(|&c| adaptive_rule(&g2, c)).collect();

        let arity = self.arity;
        let (c1, c2) = (coords[0], coords[1]);
        let samples: Vec<Complex64> = nodes1
            .par_iter()
            .flat_map_iter(|&s1| {
                let mut point = vec![0.0; arity];
                point[c1] = s1;
                nodes2
                    .iter()
                    .map(|&s2| {
                        point[c2] = s2;
                        expr.eval(&point)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let n2 = nodes2.len();

        // inner sums over the second coordinate, for every node of the first
        let inner: Vec<(Vec<Complex64>, Vec<Complex64>)> = rules2
            .par_iter()
            .map(|r2| {
                let mut tk = vec![Complex64::new(0.0, 0.0); nodes1.len()];
                let mut tg = vec![Complex64::new(0.0, 0.0); nodes1.len()];
                for p in 0..nodes1.len() {
                    let row = &samples[p * n2 + r2.first..p * n2 + r2.first + r2.nodes.len()];
                    let (mut ak, mut ag) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for (q, &y) in row.iter().enumerate() {
                        axpy(&mut ak, y, r2.kronrod[q]);
                        axpy(&mut ag, y, r2.gauss[q]);
                    }
                    tk[p] = ak;
                    tg[p] = ag;
                }
                (tk, tg)
            })
            .collect();

        Ok((0..modes.len())
            .into_par_iter()
            .map(|flat| {
                if modes[flat] == Resolved::Smooth {
                    return marked;
                }
                let (i1, i2) = (flat / ax2.len(), flat % ax2.len());
                let r1 = &rules1[i1];
                let (tk, tg) = &inner[i2];
                let (mut vk, mut vg) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for p in 0..r1.nodes.len() {
                    axpy(&mut vk, tk[r1.first + p], r1.kronrod[p]);
                    axpy(&mut vg, tg[r1.first + p], r1.gauss[p]);
                }
                let err = (vk - vg).norm() + sup * (r1.tail + rules2[i2].tail) + ROUNDING * sup;
                Estimate { value: *weight * vk, error: weight.norm() * err }
            })
            .collect())
    }
}

/// Nested tensor sum returning the sums under both weight sets of each axis.
fn tensor_sum(
    expr: &Expr,
    point: &mut [f64],
    coords: &[usize],
    rules: &[(&[f64], &[f64], &[f64])],
    level: usize,
) -> (Complex64, Complex64) {
    let (nodes, w1, w2) = rules[level];
    let (mut a1, mut a2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for i in 0..nodes.len() {
        point[coords[level]] = nodes[i];
        let (v1, v2) = if level + 1 == coords.len() {
            let y = expr.eval(point);
            (y, y)
        } else {
            tensor_sum(expr, point, coords, rules, level + 1)
        };
        axpy(&mut a1, v1, w1[i]);
        axpy(&mut a2, v2, w2[i]);
    }
    (a1, a2)
}

fn separable_combine(scalar: Complex64, ests: &[Estimate]) -> Estimate {
    let mut value = scalar;
    let (mut upper, mut exact) = (1.0f64, 1.0f64);
    for e in ests {
        value *= e.value;
        upper *= e.value.norm() + e.error;
        exact *= e.value.norm();
    }
    Estimate { value, error: scalar.norm() * (upper - exact).max(0.0) }
}

fn sum_parts(parts: &[Estimate]) -> Estimate {
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for p in parts {
        value += p.value;
        error += p.error;
    }
    Estimate { value, error }
}

/// `E[a(sqrt R)]` with `R_j ~ Gamma(shape_j, 1)` independent.
pub fn gamma_expectation(a: &QuasiRadialSymbol, shape: &[f64], order: usize, mode: Mode) -> Result<Estimate> {
    GammaPlan::new(a, order, mode)?.expect(shape)
}
