//! Quasi-radial symbols `a: R_+^k -> C` and their JSON grammar.
//!
//! A symbol document is a tree of nodes tagged by `"kind"`. Coordinates are the
//! block radii `s_j = |z_(j)|`, numbered from zero. The root node may carry an
//! explicit `"arity"`; otherwise the arity is one more than the largest
//! referenced coordinate.
//!
//! ```json
//! {"kind":"sum","terms":[
//!   {"weight":0.5,"expr":{"kind":"box","lower":[0,0],"upper":[1,2]}},
//!   {"weight":1.0,"expr":{"kind":"power","coord":1,"exponent":2,"cap":100}}
//! ]}
//! ```

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// A complex number that serializes as a bare JSON number when it is real and
/// as `[re, im]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Scalar(pub Complex64);

impl Scalar {
    pub fn real(x: f64) -> Self {
        Scalar(Complex64::new(x, 0.0))
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::real(x)
    }
}

impl From<Complex64> for Scalar {
    fn from(z: Complex64) -> Self {
        Scalar(z)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            serializer.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Pair([f64; 2]),
        }
        match Repr::deserialize(deserializer) {
            Ok(Repr::Real(x)) => Ok(Scalar::real(x)),
            Ok(Repr::Pair([re, im])) => Ok(Scalar(Complex64::new(re, im))),
            Err(_) => Err(de::Error::custom("expected a number or a [re, im] pair")),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// One weighted summand of a [`Expr::Sum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: Scalar,
    pub expr: Expr,
}

/// Expression tree over the radii `s_0, ..., s_{k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Const {
        value: Scalar,
    },
    /// `min(s_coord^exponent, cap)`.
    Power {
        coord: usize,
        exponent: f64,
        cap: f64,
    },
    /// Indicator of the half-open box `prod [lower_i, upper_i)` over `coords`
    /// (default `0..lower.len()`).
    Box {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<usize>>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `sin(freq * s_coord)`.
    Sin {
        coord: usize,
        #[serde(default = "one")]
        freq: f64,
    },
    /// `cos(freq * s_coord)`.
    Cos {
        coord: usize,
        #[serde(default = "one")]
        freq: f64,
    },
    /// `exp(-scale * s_coord^2)`.
    Gaussian {
        coord: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    Sum {
        terms: Vec<Term>,
    },
    Product {
        factors: Vec<Expr>,
    },
    /// Piecewise constant on a rectangular grid; `values` are row-major over
    /// the cells `[edges_d[i], edges_d[i+1])`, `outside` applies elsewhere.
    Grid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coords: Option<Vec<usize>>,
        edges: Vec<Vec<f64>>,
        values: Vec<Scalar>,
        outside: Scalar,
    },
}

const KNOWN_KINDS: &[&str] = &[
    "const", "power", "box", "sin", "cos", "gaussian", "sum", "product", "grid",
];

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value: Scalar::real(value) }
    }

    pub fn unit_box(coords: Vec<usize>, upper: f64) -> Self {
        let d = coords.len();
        Expr::Box { coords: Some(coords), lower: vec![0.0; d], upper: vec![upper; d] }
    }

    fn box_coords(coords: &Option<Vec<usize>>, dim: usize) -> Vec<usize> {
        coords.clone().unwrap_or_else(|| (0..dim).collect())
    }

    /// One past the largest coordinate referenced (0 for constants).
    pub fn referenced_arity(&self) -> usize {
        match self {
            Expr::Const { .. } => 0,
            Expr::Power { coord, .. }
            | Expr::Sin { coord, .. }
            | Expr::Cos { coord, .. }
            | Expr::Gaussian { coord, .. } => coord + 1,
            Expr::Box { coords, lower, .. } => Self::box_coords(coords, lower.len())
                .iter()
                .map(|c| c + 1)
                .max()
                .unwrap_or(0),
            Expr::Grid { coords, edges, .. } => Self::box_coords(coords, edges.len())
                .iter()
                .map(|c| c + 1)
                .max()
                .unwrap_or(0),
            Expr::Sum { terms } => terms.iter().map(|t| t.expr.referenced_arity()).max().unwrap_or(0),
            Expr::Product { factors } => factors.iter().map(Expr::referenced_arity).max().unwrap_or(0),
        }
    }

    /// Bottom-up bound on `|a|`: exact for leaves and products, triangle
    /// inequality for sums.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Expr::Const { value } => value.0.norm(),
            Expr::Power { exponent, cap, .. } => {
                if *exponent > 0.0 {
                    *cap
                } else {
                    cap.min(1.0)
                }
            }
            Expr::Box { .. } | Expr::Sin { .. } | Expr::Cos { .. } | Expr::Gaussian { .. } => 1.0,
            Expr::Sum { terms } => terms.iter().map(|t| t.weight.0.norm() * t.expr.sup_bound()).sum(),
            Expr::Product { factors } => factors.iter().map(Expr::sup_bound).product(),
            Expr::Grid { values, outside, .. } => values
                .iter()
                .map(|v| v.0.norm())
                .fold(outside.0.norm(), f64::max),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let bad = |msg: &str| Error::Parse { location: path.to_string(), message: msg.to_string() };
        match self {
            Expr::Const { value } => {
                if !value.0.re.is_finite() || !value.0.im.is_finite() {
                    return Err(bad("constant must be finite"));
                }
            }
            Expr::Power { exponent, cap, .. } => {
                if !(exponent.is_finite() && *exponent >= 0.0) {
                    return Err(bad("power exponent must be finite and nonnegative"));
                }
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(bad("power cap must be finite and positive"));
                }
            }
            Expr::Box { coords, lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(bad("box lower/upper must be nonempty and of equal length"));
                }
                if let Some(c) = coords {
                    if c.len() != lower.len() {
                        return Err(bad("box coords must match lower/upper length"));
                    }
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
                    return Err(bad("box bounds must be finite with lower <= upper"));
                }
            }
            Expr::Sin { freq, .. } | Expr::Cos { freq, .. } => {
                if !freq.is_finite() {
                    return Err(bad("frequency must be finite"));
                }
            }
            Expr::Gaussian { scale, .. } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(bad("gaussian scale must be finite and nonnegative"));
                }
            }
            Expr::Sum { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    t.expr.validate(&format!("{path}.terms[{i}].expr"))?;
                }
            }
            Expr::Product { factors } => {
                for (i, f) in factors.iter().enumerate() {
                    f.validate(&format!("{path}.factors[{i}]"))?;
                }
            }
            Expr::Grid { coords, edges, values, .. } => {
                if edges.is_empty() {
                    return Err(bad("grid needs at least one axis"));
                }
                if let Some(c) = coords {
                    if c.len() != edges.len() {
                        return Err(bad("grid coords must match the number of edge arrays"));
                    }
                }
                let mut cells = 1usize;
                for e in edges {
                    if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|x| !x.is_finite()) {
                        return Err(bad("grid edges must be finite, strictly increasing, at least two per axis"));
                    }
                    cells *= e.len() - 1;
                }
                if values.len() != cells {
                    return Err(bad("grid values length must equal the number of cells"));
                }
            }
        }
        Ok(())
    }

    /// Evaluate without an arity check; coordinates beyond `s.len()` read as 0.
    pub fn eval(&self, s: &[f64]) -> Complex64 {
        let at = |c: usize| s.get(c).copied().unwrap_or(0.0);
        match self {
            Expr::Const { value } => value.0,
            Expr::Power { coord, exponent, cap } => {
                let v = at(*coord).powf(*exponent);
                Complex64::new(v.min(*cap), 0.0)
            }
            Expr::Box { coords, lower, upper } => {
                let inside = Self::box_coords(coords, lower.len())
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(&c, (l, u))| {
                        let x = at(c);
                        *l <= x && x < *u
                    });
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            }
            Expr::Sin { coord, freq } => Complex64::new((freq * at(*coord)).sin(), 0.0),
            Expr::Cos { coord, freq } => Complex64::new((freq * at(*coord)).cos(), 0.0),
            Expr::Gaussian { coord, scale } => {
                let x = at(*coord);
                Complex64::new((-scale * x * x).exp(), 0.0)
            }
            Expr::Sum { terms } => terms.iter().map(|t| t.weight.0 * t.expr.eval(s)).sum(),
            Expr::Product { factors } => factors.iter().map(|f| f.eval(s)).product(),
            Expr::Grid { coords, edges, values, outside } => {
                let axes = Self::box_coords(coords, edges.len());
                let mut flat = 0usize;
                for (&c, e) in axes.iter().zip(edges) {
                    let x = at(c);
                    let cells = e.len() - 1;
                    if x < e[0] || x >= e[cells] {
                        return outside.0;
                    }
                    // last edge <= x
                    let i = e.partition_point(|&edge| edge <= x) - 1;
                    flat = flat * cells + i;
                }
                values[flat].0
            }
        }
    }

    /// Points along `coord` where the expression is discontinuous or kinked.
    pub fn breakpoints(&self, coord: usize, out: &mut Vec<f64>) {
        match self {
            Expr::Power { coord: c, exponent, cap } if *c == coord && *exponent > 0.0 => {
                out.push(cap.powf(1.0 / exponent));
            }
            Expr::Box { coords, lower, upper } => {
                for (i, &c) in Self::box_coords(coords, lower.len()).iter().enumerate() {
                    if c == coord {
                        out.push(lower[i]);
                        out.push(upper[i]);
                    }
                }
            }
            Expr::Grid { coords, edges, .. } => {
                for (i, &c) in Self::box_coords(coords, edges.len()).iter().enumerate() {
                    if c == coord {
                        out.extend_from_slice(&edges[i]);
                    }
                }
            }
            Expr::Sum { terms } => terms.iter().for_each(|t| t.expr.breakpoints(coord, out)),
            Expr::Product { factors } => factors.iter().for_each(|f| f.breakpoints(coord, out)),
            _ => {}
        }
    }

    /// True when the tree contains a box or grid node.
    pub fn has_jumps(&self) -> bool {
        match self {
            Expr::Box { .. } | Expr::Grid { .. } => true,
            Expr::Sum { terms } => terms.iter().any(|t| t.expr.has_jumps()),
            Expr::Product { factors } => factors.iter().any(Expr::has_jumps),
            _ => false,
        }
    }

    /// True when `r -> a(sqrt r)` is analytic in each coordinate (up to power caps),
    /// so Gauss-Laguerre converges geometrically.
    pub fn is_smooth_in_square(&self) -> bool {
        match self {
            Expr::Const { .. } | Expr::Cos { .. } | Expr::Gaussian { .. } => true,
            Expr::Power { exponent, .. } => exponent.fract() == 0.0 && (*exponent as u64) % 2 == 0,
            Expr::Sin { freq, .. } => *freq == 0.0,
            Expr::Box { .. } | Expr::Grid { .. } => false,
            Expr::Sum { terms } => terms.iter().all(|t| t.expr.is_smooth_in_square()),
            Expr::Product { factors } => factors.iter().all(Expr::is_smooth_in_square),
        }
    }

    /// `Some(c)` when the expression is structurally constant.
    pub fn as_constant(&self) -> Option<Complex64> {
        match self {
            Expr::Const { value } => Some(value.0),
            Expr::Sum { terms } => terms
                .iter()
                .map(|t| t.expr.as_constant().map(|c| t.weight.0 * c))
                .sum(),
            Expr::Product { factors } => factors.iter().map(Expr::as_constant).product(),
            _ => None,
        }
    }

    /// Split a product into a scalar times single-coordinate factors.
    ///
    /// Factors are keyed by coordinate (ascending) and rewritten to read
    /// coordinate 0. Boxes over several coordinates split into one interval per
    /// coordinate. Returns `None` when some factor couples coordinates.
    pub fn separate(&self) -> Option<(Complex64, Vec<(usize, Expr)>)> {
        let mut scalar = Complex64::new(1.0, 0.0);
        let mut parts: Vec<(usize, Vec<Expr>)> = Vec::new();
        self.collect_factors(&mut scalar, &mut parts)?;
        parts.sort_by_key(|(c, _)| *c);
        let factors = parts
            .into_iter()
            .map(|(c, mut fs)| {
                let e = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product { factors: fs } };
                (c, e)
            })
            .collect();
        Some((scalar, factors))
    }

    fn collect_factors(&self, scalar: &mut Complex64, parts: &mut Vec<(usize, Vec<Expr>)>) -> Option<()> {
        let mut push = |c: usize, e: Expr| match parts.iter_mut().find(|(pc, _)| *pc == c) {
            Some((_, fs)) => fs.push(e),
            None => parts.push((c, vec![e])),
        };
        match self {
            Expr::Const { value } => *scalar *= value.0,
            Expr::Product { factors } => {
                for f in factors {
                    f.collect_factors(scalar, parts)?;
                }
            }
            Expr::Box { coords, lower, upper } => {
                for (i, c) in Self::box_coords(coords, lower.len()).into_iter().enumerate() {
                    push(c, Expr::Box { coords: Some(vec![0]), lower: vec![lower[i]], upper: vec![upper[i]] });
                }
            }
            other => {
                if let Some(c) = other.as_constant() {
                    *scalar *= c;
                    return Some(());
                }
                let c = other.single_coordinate()?;
                push(c, other.remap_coordinate(c, 0));
            }
        }
        Some(())
    }

    /// Sorted distinct coordinates referenced by the expression.
    pub fn coordinates(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        self.collect_coords(&mut seen);
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    fn single_coordinate(&self) -> Option<usize> {
        let seen = self.coordinates();
        (seen.len() == 1).then(|| seen[0])
    }

    fn collect_coords(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const { .. } => {}
            Expr::Power { coord, .. }
            | Expr::Sin { coord, .. }
            | Expr::Cos { coord, .. }
            | Expr::Gaussian { coord, .. } => out.push(*coord),
            Expr::Box { coords, lower, .. } => out.extend(Self::box_coords(coords, lower.len())),
            Expr::Grid { coords, edges, .. } => out.extend(Self::box_coords(coords, edges.len())),
            Expr::Sum { terms } => terms.iter().for_each(|t| t.expr.collect_coords(out)),
            Expr::Product { factors } => factors.iter().for_each(|f| f.collect_coords(out)),
        }
    }

    /// Same expression with coordinate `from` renamed to `to` everywhere.
    pub fn remap_coordinate(&self, from: usize, to: usize) -> Expr {
        let map = |c: usize| if c == from { to } else { c };
        match self {
            Expr::Power { coord, exponent, cap } => Expr::Power { coord: map(*coord), exponent: *exponent, cap: *cap },
            Expr::Sin { coord, freq } => Expr::Sin { coord: map(*coord), freq: *freq },
            Expr::Cos { coord, freq } => Expr::Cos { coord: map(*coord), freq: *freq },
            Expr::Gaussian { coord, scale } => Expr::Gaussian { coord: map(*coord), scale: *scale },
            Expr::Box { coords, lower, upper } => Expr::Box {
                coords: Some(Self::box_coords(coords, lower.len()).into_iter().map(map).collect()),
                lower: lower.clone(),
                upper: upper.clone(),
            },
            Expr::Grid { coords, edges, values, outside } => Expr::Grid {
                coords: Some(Self::box_coords(coords, edges.len()).into_iter().map(map).collect()),
                edges: edges.clone(),
                values: values.clone(),
                outside: *outside,
            },
            Expr::Sum { terms } => Expr::Sum {
                terms: terms
                    .iter()
                    .map(|t| Term { weight: t.weight, expr: t.expr.remap_coordinate(from, to) })
                    .collect(),
            },
            Expr::Product { factors } => Expr::Product {
                factors: factors.iter().map(|f| f.remap_coordinate(from, to)).collect(),
            },
            Expr::Const { value } => Expr::Const { value: *value },
        }
    }
}

/// A bounded quasi-radial symbol with its arity and sup bound.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiRadialSymbol {
    expr: Expr,
    arity: usize,
    declared_sup: f64,
}

impl QuasiRadialSymbol {
    pub fn new(expr: Expr) -> Result<Self> {
        let arity = expr.referenced_arity().max(1);
        Self::with_arity(expr, arity)
    }

    pub fn with_arity(expr: Expr, arity: usize) -> Result<Self> {
        expr.validate("$")?;
        let referenced = expr.referenced_arity();
        if arity == 0 || referenced > arity {
            return Err(Error::arity(arity, referenced));
        }
        let declared_sup = expr.sup_bound();
        Ok(Self { expr, arity, declared_sup })
    }

    pub fn constant(value: f64, arity: usize) -> Self {
        Self::with_arity(Expr::constant(value), arity).expect("constant symbols are always valid")
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The essential-sup bound `||a||_inf` used throughout.
    pub fn declared_sup(&self) -> f64 {
        self.declared_sup
    }

    /// Reinterpret the symbol on `R_+^k` for a larger `k`; unreferenced
    /// coordinates are ignored.
    pub fn lift(&self, k: usize) -> Result<Self> {
        if self.expr.referenced_arity() > k || k == 0 {
            return Err(Error::arity(k, self.expr.referenced_arity()));
        }
        Ok(Self { expr: self.expr.clone(), arity: k, declared_sup: self.declared_sup })
    }

    pub fn eval(&self, s: &[f64]) -> Result<Complex64> {
        if s.len() != self.arity {
            return Err(Error::arity(self.arity, s.len()));
        }
        if let Some(x) = s.iter().find(|x| !(**x >= 0.0)) {
            return Err(Error::Domain(format!("radius {x} is negative")));
        }
        Ok(self.expr.eval(s))
    }

    /// Sorted, deduplicated breakpoints along `coord` that lie in `(0, inf)`.
    pub fn breakpoints(&self, coord: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.expr.breakpoints(coord, &mut out);
        out.retain(|x| x.is_finite() && *x > 0.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(&self.expr).expect("expression trees always serialize");
        if let Value::Object(map) = &mut v {
            map.insert("arity".into(), Value::from(self.arity));
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("values always serialize")
    }
}

/// Parse a symbol document.
pub fn parse_symbol(text: &str) -> Result<QuasiRadialSymbol> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    symbol_from_value(value)
}

pub fn symbol_from_value(mut value: Value) -> Result<QuasiRadialSymbol> {
    check_kinds(&value, "$", KNOWN_KINDS)?;
    let arity = match &mut value {
        Value::Object(map) => match map.remove("arity") {
            None => None,
            Some(Value::Number(n)) => Some(n.as_u64().ok_or_else(|| Error::Parse {
                location: "$.arity".into(),
                message: "arity must be a positive integer".into(),
            })? as usize),
            Some(_) => {
                return Err(Error::Parse { location: "$.arity".into(), message: "arity must be a number".into() })
            }
        },
        _ => None,
    };
    let expr: Expr = serde_json::from_value(value)
        .map_err(|e| Error::Parse { location: "$".into(), message: e.to_string() })?;
    match arity {
        Some(k) => QuasiRadialSymbol::with_arity(expr, k),
        None => QuasiRadialSymbol::new(expr),
    }
}

/// Reject any `"kind"` not in `known` before typed deserialization so unknown
/// node kinds get their own error.
pub(crate) fn check_kinds(value: &Value, path: &str, known: &[&str]) -> Result<()> {
    match value {
        Value::Object(map) => {
            if let Some(kind) = map.get("kind") {
                match kind.as_str() {
                    Some(k) if known.contains(&k) => {}
                    Some(k) => return Err(Error::Unsupported { kind: k.to_string(), location: path.to_string() }),
                    None => {
                        return Err(Error::Parse { location: path.to_string(), message: "kind must be a string".into() })
                    }
                }
            }
            for (key, child) in map {
                check_kinds(child, &format!("{path}.{key}"), known)?;
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                check_kinds(child, &format!("{path}[{i}]"), known)?;
            }
        }
        _ => {}
    }
    Ok(())
}
