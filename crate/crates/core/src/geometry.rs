//! Spatial domains, analysis subregions and coordinates that may carry an
//! exact rational value.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

/// A scalar coordinate. Values parsed from fractions such as `1/3` keep their
/// exact rational form so that number-theoretic membership tests stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    value: f64,
    exact: Option<Rational64>,
}

impl Coord {
    pub fn real(value: f64) -> Self {
        Self { value, exact: None }
    }

    pub fn ratio(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidDomain(format!(
                "zero denominator in {numer}/{denom}"
            )));
        }
        let r = Rational64::new(numer, denom);
        Ok(Self::from(r))
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Rational64> {
        self.exact
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

impl From<f64> for Coord {
    fn from(v: f64) -> Self {
        Self::real(v)
    }
}

impl From<Rational64> for Coord {
    fn from(r: Rational64) -> Self {
        Self {
            value: r.to_f64().unwrap_or(f64::NAN),
            exact: Some(r),
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.value),
        }
    }
}

impl FromStr for Coord {
    type Err = String;

    /// Accepts plain reals (`0.25`, `1e-3`) and fractions (`1/3`, `-2/7`).
    /// Only the fraction form is kept exact.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{s}`"))?;
            let d: i64 = d
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{s}`"))?;
            return Coord::ratio(n, d).map_err(|e| e.to_string());
        }
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if !v.is_finite() {
            return Err(format!("`{s}` is not finite"));
        }
        Ok(Coord::real(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// The spatial domain: `(0, L)` or `(0, L1) x (0, L2)`, Dirichlet on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lengths: Vec<f64>,
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        Self::new(vec![length])
    }

    pub fn rectangle(l1: f64, l2: f64) -> Result<Self> {
        Self::new(vec![l1, l2])
    }

    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(Error::InvalidDomain(format!(
                "expected 1 or 2 lengths, got {}",
                lengths.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidDomain(format!(
                "length {l} is not strictly positive"
            )));
        }
        Ok(Self { lengths })
    }

    pub fn kind(&self) -> DomainKind {
        if self.lengths.len() == 1 {
            DomainKind::Interval
        } else {
            DomainKind::Rectangle
        }
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    /// Closed-domain membership.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.lengths)
                .all(|(x, l)| *x >= 0.0 && *x <= *l)
    }

    /// Open-domain membership.
    pub fn contains_interior(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.lengths)
                .all(|(x, l)| *x > 0.0 && *x < *l)
    }

    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// The whole domain as a subregion.
    pub fn whole(&self) -> Subregion {
        Subregion {
            bounds: self
                .lengths
                .iter()
                .map(|l| (Coord::real(0.0), Coord::real(*l)))
                .collect(),
        }
    }

    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        if !self.contains(point) {
            return Err(Error::PointOutsideDomain(point.to_vec()));
        }
        Ok(())
    }
}

/// An axis-aligned analysis region `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subregion {
    bounds: Vec<(Coord, Coord)>,
}

impl Subregion {
    pub fn interval(alpha: impl Into<Coord>, beta: impl Into<Coord>) -> Result<Self> {
        Self::new(vec![(alpha.into(), beta.into())])
    }

    pub fn rectangle(
        x: (impl Into<Coord>, impl Into<Coord>),
        y: (impl Into<Coord>, impl Into<Coord>),
    ) -> Result<Self> {
        Self::new(vec![(x.0.into(), x.1.into()), (y.0.into(), y.1.into())])
    }

    pub fn new(bounds: Vec<(Coord, Coord)>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::DegenerateRegion(format!(
                "expected 1 or 2 axis bounds, got {}",
                bounds.len()
            )));
        }
        for (a, b) in &bounds {
            if !(a.value().is_finite() && b.value().is_finite()) || a.value() >= b.value() {
                return Err(Error::DegenerateRegion(format!(
                    "bounds ({a}, {b}) are empty"
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(Coord, Coord)] {
        &self.bounds
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.bounds[axis].0.value()
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.bounds[axis].1.value()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper(axis) - self.lower(axis)
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .enumerate()
                .all(|(k, x)| *x >= self.lower(k) && *x <= self.upper(k))
    }

    /// `0 <= α < β <= L` on every axis.
    pub fn check_inside(&self, domain: &Domain) -> Result<()> {
        if self.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: self.dim(),
            });
        }
        for k in 0..self.dim() {
            if self.lower(k) < 0.0 || self.upper(k) > domain.length(k) {
                return Err(Error::RegionOutsideDomain(self.to_string()));
            }
        }
        Ok(())
    }

    /// True when the region covers the domain exactly.
    pub fn covers(&self, domain: &Domain) -> bool {
        self.dim() == domain.dim()
            && (0..self.dim()).all(|k| self.lower(k) <= 0.0 && self.upper(k) >= domain.length(k))
    }
}

impl fmt::Display for Subregion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (a, b)) in self.bounds.iter().enumerate() {
            if k > 0 {
                write!(f, " x ")?;
            }
            write!(f, "({a}, {b})")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_exactly() {
        let c: Coord = "1/3".parse().unwrap();
        assert_eq!(c.exact(), Some(Rational64::new(1, 3)));
        assert!((c.value() - 1.0 / 3.0).abs() < 1e-16);
        let d: Coord = "0.5".parse().unwrap();
        assert!(!d.is_exact());
        assert!("1/0".parse::<Coord>().is_err());
        assert!("abc".parse::<Coord>().is_err());
    }

    #[test]
    fn domain_rejects_nonpositive_lengths() {
        assert!(Domain::interval(0.0).is_err());
        assert!(Domain::rectangle(1.0, -2.0).is_err());
        assert_eq!(Domain::rectangle(1.0, 2.0).unwrap().dim(), 2);
    }

    #[test]
    fn region_inside_domain() {
        let d = Domain::interval(1.0).unwrap();
        assert!(Subregion::interval(0.2, 0.5)
            .unwrap()
            .check_inside(&d)
            .is_ok());
        assert!(matches!(
            Subregion::interval(0.2, 1.5).unwrap().check_inside(&d),
            Err(Error::RegionOutsideDomain(_))
        ));
        assert!(Subregion::interval(0.5, 0.5).is_err());
        assert!(d.whole().covers(&d));
    }
}
