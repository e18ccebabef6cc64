//! Bounded functions `sigma: N_0^k -> C` and their JSON grammar.
//!
//! Rules:
//! - `{"kind":"sqrt_expr","expr":<symbol expr>}`: `sigma(m) = expr(sqrt m_1, ..., sqrt m_k)`
//! - `{"kind":"table","shape":[..],"values":[..],"tail":c}`: row-major table on
//!   `[0, shape_1) x ...`, constant `tail` elsewhere
//! - `{"kind":"indicator","points":[[..],..]}`
//! - `{"kind":"product","factors":[..]}`: factor `j` is one-dimensional and acts on `m_j`
//! - `{"kind":"shift_left"|"shift_right","shift":[..],"inner":..}`

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::symbol::{check_kinds, Expr, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeRule {
    SqrtExpr { expr: Expr },
    Table { shape: Vec<usize>, values: Vec<Scalar>, tail: Scalar },
    Indicator { points: Vec<Vec<usize>> },
    Product { factors: Vec<LatticeRule> },
    ShiftLeft { shift: Vec<usize>, inner: Box<LatticeRule> },
    ShiftRight { shift: Vec<usize>, inner: Box<LatticeRule> },
}

const LATTICE_KINDS: &[&str] = &[
    "sqrt_expr", "table", "indicator", "product", "shift_left", "shift_right",
    // symbol kinds may appear inside sqrt_expr
    "const", "power", "box", "sin", "cos", "gaussian", "sum", "grid",
];

impl LatticeRule {
    fn natural_arity(&self) -> Option<usize> {
        match self {
            LatticeRule::SqrtExpr { expr } => Some(expr.referenced_arity().max(1)),
            LatticeRule::Table { shape, .. } => Some(shape.len()),
            LatticeRule::Indicator { points } => points.first().map(Vec::len),
            LatticeRule::Product { factors } => Some(factors.len()),
            LatticeRule::ShiftLeft { shift, .. } | LatticeRule::ShiftRight { shift, .. } => Some(shift.len()),
        }
    }

    fn validate(&self, arity: usize, path: &str) -> Result<()> {
        let bad = |msg: String| Error::Parse { location: path.to_string(), message: msg };
        match self {
            LatticeRule::SqrtExpr { expr } => {
                if expr.referenced_arity() > arity {
                    return Err(Error::arity(arity, expr.referenced_arity()));
                }
                crate::symbol::QuasiRadialSymbol::with_arity(expr.clone(), arity)?;
            }
            LatticeRule::Table { shape, values, .. } => {
                if shape.len() != arity {
                    return Err(Error::arity(arity, shape.len()));
                }
                let cells: usize = shape.iter().product();
                if cells != values.len() {
                    return Err(bad(format!("table has {} values but shape needs {cells}", values.len())));
                }
            }
            LatticeRule::Indicator { points } => {
                if let Some(p) = points.iter().find(|p| p.len() != arity) {
                    return Err(Error::arity(arity, p.len()));
                }
            }
            LatticeRule::Product { factors } => {
                if factors.len() != arity {
                    return Err(Error::arity(arity, factors.len()));
                }
                for (i, f) in factors.iter().enumerate() {
                    f.validate(1, &format!("{path}.factors[{i}]"))?;
                }
            }
            LatticeRule::ShiftLeft { shift, inner } | LatticeRule::ShiftRight { shift, inner } => {
                if shift.len() != arity {
                    return Err(Error::arity(arity, shift.len()));
                }
                inner.validate(arity, &format!("{path}.inner"))?;
            }
        }
        Ok(())
    }

    fn sup_bound(&self) -> f64 {
        match self {
            LatticeRule::SqrtExpr { expr } => expr.sup_bound(),
            LatticeRule::Table { values, tail, .. } => {
                values.iter().map(|v| v.0.norm()).fold(tail.0.norm(), f64::max)
            }
            LatticeRule::Indicator { points } => {
                if points.is_empty() {
                    0.0
                } else {
                    1.0
                }
            }
            LatticeRule::Product { factors } => factors.iter().map(LatticeRule::sup_bound).product(),
            LatticeRule::ShiftLeft { inner, .. } | LatticeRule::ShiftRight { inner, .. } => inner.sup_bound(),
        }
    }

    fn eval(&self, m: &[usize]) -> Complex64 {
        match self {
            LatticeRule::SqrtExpr { expr } => {
                let s: Vec<f64> = m.iter().map(|&x| (x as f64).sqrt()).collect();
                expr.eval(&s)
            }
            LatticeRule::Table { shape, values, tail } => {
                let mut flat = 0usize;
                for (&mi, &side) in m.iter().zip(shape) {
                    if mi >= side {
                        return tail.0;
                    }
                    flat = flat * side + mi;
                }
                values[flat].0
            }
            LatticeRule::Indicator { points } => {
                let hit = points.iter().any(|p| p.as_slice() == m);
                Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0)
            }
            LatticeRule::Product { factors } => {
                factors.iter().zip(m).map(|(f, &mi)| f.eval(&[mi])).product()
            }
            LatticeRule::ShiftLeft { shift, inner } => {
                let moved: Vec<usize> = m.iter().zip(shift).map(|(a, b)| a + b).collect();
                inner.eval(&moved)
            }
            LatticeRule::ShiftRight { shift, inner } => {
                let moved: Option<Vec<usize>> = m.iter().zip(shift).map(|(a, b)| a.checked_sub(*b)).collect();
                match moved {
                    Some(p) => inner.eval(&p),
                    None => Complex64::new(0.0, 0.0),
                }
            }
        }
    }

    fn as_constant(&self) -> Option<Complex64> {
        match self {
            LatticeRule::SqrtExpr { expr } => expr.as_constant(),
            LatticeRule::Table { values, tail, .. } => values.iter().all(|v| v == tail).then_some(tail.0),
            LatticeRule::Indicator { points } => points.is_empty().then_some(Complex64::new(0.0, 0.0)),
            LatticeRule::Product { factors } => factors.iter().map(LatticeRule::as_constant).product(),
            LatticeRule::ShiftLeft { inner, .. } => inner.as_constant(),
            LatticeRule::ShiftRight { shift, inner } => {
                let c = inner.as_constant()?;
                (shift.iter().all(|&s| s == 0) || c == Complex64::new(0.0, 0.0)).then_some(c)
            }
        }
    }
}

/// A total bounded function on `N_0^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    rule: LatticeRule,
    arity: usize,
    declared_sup: f64,
}

impl LatticeFunction {
    pub fn new(rule: LatticeRule) -> Result<Self> {
        let arity = rule
            .natural_arity()
            .ok_or_else(|| Error::param("cannot infer arity of an empty indicator; give \"arity\""))?;
        Self::with_arity(rule, arity)
    }

    pub fn with_arity(rule: LatticeRule, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::param("lattice functions need arity >= 1"));
        }
        rule.validate(arity, "$")?;
        let declared_sup = rule.sup_bound();
        Ok(Self { rule, arity, declared_sup })
    }

    /// `sigma(m) = expr(sqrt m)`.
    pub fn sqrt_expr(expr: Expr, arity: usize) -> Result<Self> {
        Self::with_arity(LatticeRule::SqrtExpr { expr }, arity)
    }

    pub fn constant(value: f64, arity: usize) -> Self {
        Self::sqrt_expr(Expr::constant(value), arity).expect("constants are valid")
    }

    pub fn table(shape: Vec<usize>, values: Vec<Complex64>, tail: Complex64) -> Result<Self> {
        Self::new(LatticeRule::Table {
            shape,
            values: values.into_iter().map(Scalar).collect(),
            tail: Scalar(tail),
        })
    }

    pub fn indicator(points: Vec<MultiIndex>, arity: usize) -> Result<Self> {
        Self::with_arity(LatticeRule::Indicator { points: points.into_iter().map(|p| p.0).collect() }, arity)
    }

    pub fn rule(&self) -> &LatticeRule {
        &self.rule
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn declared_sup(&self) -> f64 {
        self.declared_sup
    }

    pub fn eval(&self, m: &MultiIndex) -> Result<Complex64> {
        self.eval_slice(&m.0)
    }

    pub fn eval_slice(&self, m: &[usize]) -> Result<Complex64> {
        if m.len() != self.arity {
            return Err(Error::arity(self.arity, m.len()));
        }
        Ok(self.rule.eval(m))
    }

    /// Evaluation without the arity check, for hot loops.
    pub fn at(&self, m: &[usize]) -> Complex64 {
        debug_assert_eq!(m.len(), self.arity);
        self.rule.eval(m)
    }

    pub fn as_constant(&self) -> Option<Complex64> {
        self.rule.as_constant()
    }

    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(&self.rule).expect("lattice rules always serialize");
        if let Value::Object(map) = &mut v {
            map.insert("arity".into(), Value::from(self.arity));
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("values always serialize")
    }
}

/// Parse a lattice-function document.
pub fn parse_lattice(text: &str) -> Result<LatticeFunction> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    check_kinds(&value, "$", LATTICE_KINDS)?;
    let arity = match &mut value {
        Value::Object(map) => map.remove("arity").map(|a| {
            a.as_u64().map(|x| x as usize).ok_or_else(|| Error::Parse {
                location: "$.arity".into(),
                message: "arity must be a positive integer".into(),
            })
        }),
        _ => None,
    }
    .transpose()?;
    let rule: LatticeRule = serde_json::from_value(value)
        .map_err(|e| Error::Parse { location: "$".into(), message: e.to_string() })?;
    match arity {
        Some(k) => LatticeFunction::with_arity(rule, k),
        None => LatticeFunction::new(rule),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_sine() {
        let s = parse_lattice(r#"{"kind":"sqrt_expr","expr":{"kind":"sin","coord":0}}"#).unwrap();
        let v = s.eval(&MultiIndex(vec![4])).unwrap();
        assert!((v.re - 2f64.sin()).abs() < 1e-15);
        assert!((v.re - 0.9092974).abs() < 1e-7);
    }

    #[test]
    fn singleton_indicator() {
        let s = parse_lattice(r#"{"kind":"indicator","points":[[3]]}"#).unwrap();
        assert_eq!(s.eval(&MultiIndex(vec![3])).unwrap().re, 1.0);
        assert_eq!(s.eval(&MultiIndex(vec![4])).unwrap().re, 0.0);
    }

    #[test]
    fn table_tail_applies_outside_window() {
        let s = parse_lattice(r#"{"kind":"table","shape":[2],"values":[2,5],"tail":0}"#).unwrap();
        assert_eq!(s.eval(&MultiIndex(vec![1])).unwrap().re, 5.0);
        assert_eq!(s.eval(&MultiIndex(vec![7])).unwrap().re, 0.0);
        assert_eq!(s.declared_sup(), 5.0);
    }

    #[test]
    fn arity_mismatch() {
        let s = parse_lattice(r#"{"kind":"table","shape":[2],"values":[2,5],"tail":0}"#).unwrap();
        assert_eq!(s.eval(&MultiIndex(vec![1, 1])), Err(Error::arity(1, 2)));
    }

    #[test]
    fn product_acts_per_coordinate() {
        let s = parse_lattice(
            r#"{"kind":"product","factors":[{"kind":"indicator","points":[[1]]},
               {"kind":"table","shape":[3],"values":[1,2,3],"tail":9}]}"#,
        )
        .unwrap();
        assert_eq!(s.arity(), 2);
        assert_eq!(s.eval(&MultiIndex(vec![1, 2])).unwrap().re, 3.0);
        assert_eq!(s.eval(&MultiIndex(vec![1, 5])).unwrap().re, 9.0);
        assert_eq!(s.eval(&MultiIndex(vec![0, 2])).unwrap().re, 0.0);
    }

    #[test]
    fn constants_are_detected() {
        let c = parse_lattice(r#"{"kind":"sqrt_expr","expr":{"kind":"const","value":0.5}}"#).unwrap();
        assert_eq!(c.as_constant(), Some(Complex64::new(0.5, 0.0)));
        let t = parse_lattice(r#"{"kind":"table","shape":[2],"values":[1,1],"tail":1}"#).unwrap();
        assert_eq!(t.as_constant(), Some(Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn unknown_rule_is_unsupported() {
        assert!(matches!(parse_lattice(r#"{"kind":"spline"}"#), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn empty_indicator_needs_arity() {
        assert!(parse_lattice(r#"{"kind":"indicator","points":[]}"#).is_err());
        let z = parse_lattice(r#"{"kind":"indicator","points":[],"arity":2}"#).unwrap();
        assert_eq!(z.eval(&MultiIndex(vec![0, 0])).unwrap().re, 0.0);
    }
}
