//! Dirichlet Laplacian eigen-systems on intervals and rectangles, semigroup
//! propagation, gradient evaluation and the gradient-trace Gram matrix.
//!
//! Every mode is a tensor product of sines
//! `φ(ξ) = Π_k √(2/l_k) · sin(n_k π (ξ_k − o_k) / l_k)` with eigenvalue
//! `λ = −π² Σ_k n_k² / l_k²`, where the frame `(o_k, l_k)` is `(0, L_k)` for the
//! global basis and `(α_k, β_k − α_k)` for the subregion-adapted one.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Subregion};
use crate::quadrature::{GaussLegendre, QuadratureSpec};

/// A mode index: `n` in one dimension, `(i, j)` in two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Line(usize),
    Grid(usize, usize),
}

impl Mode {
    pub fn dim(&self) -> usize {
        match self {
            Mode::Line(_) => 1,
            Mode::Grid(..) => 2,
        }
    }

    pub fn index(&self, axis: usize) -> usize {
        match (self, axis) {
            (Mode::Line(n), 0) => *n,
            (Mode::Grid(i, _), 0) => *i,
            (Mode::Grid(_, j), 1) => *j,
            _ => panic!("axis {axis} out of range for {self}"),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Line(n) => write!(f, "{n}"),
            Mode::Grid(i, j) => write!(f, "({i},{j})"),
        }
    }
}

/// Which eigen-system the basis uses.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Adaptation {
    /// Eigenfunctions of the whole domain.
    #[default]
    Global,
    /// Sine functions built on the subregion's own extent.
    Subregion(Subregion),
}

/// Truncated modal basis, sorted by eigenvalue closest to zero first.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    domain: Domain,
    adaptation: Adaptation,
    frames: Vec<(f64, f64)>,
    truncation: usize,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
}

pub fn build_basis(
    domain: &Domain,
    truncation: usize,
    adaptation: Adaptation,
) -> Result<ModalBasis> {
    ModalBasis::new(domain, truncation, adaptation)
}

impl ModalBasis {
    pub fn new(domain: &Domain, truncation: usize, adaptation: Adaptation) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidTruncation(0));
        }
        let frames: Vec<(f64, f64)> = match &adaptation {
            Adaptation::Global => domain.lengths().iter().map(|l| (0.0, *l)).collect(),
            Adaptation::Subregion(region) => {
                region.check_inside(domain)?;
                (0..domain.dim())
                    .map(|k| (region.lower(k), region.width(k)))
                    .collect()
            }
        };
        let mut modes: Vec<Mode> = match domain.dim() {
            1 => (1..=truncation).map(Mode::Line).collect(),
            _ => (1..=truncation)
                .flat_map(|i| (1..=truncation).map(move |j| Mode::Grid(i, j)))
                .collect(),
        };
        let eig = |m: &Mode| -> f64 {
            let s: f64 = frames
                .iter()
                .enumerate()
                .map(|(k, (_, l))| {
                    let n = m.index(k) as f64;
                    n * n / (l * l)
                })
                .sum();
            -PI * PI * s
        };
        modes.sort_by(|a, b| eig(b).total_cmp(&eig(a)).then(a.cmp(b)));
        let eigenvalues = modes.iter().map(eig).collect();
        Ok(Self {
            domain: domain.clone(),
            adaptation,
            frames,
            truncation,
            modes,
            eigenvalues,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn adaptation(&self) -> &Adaptation {
        &self.adaptation
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `(offset, length)` of the sine frame on each axis.
    pub fn frames(&self) -> &[(f64, f64)] {
        &self.frames
    }

    pub fn position(&self, mode: Mode) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))
    }

    /// Normalisation constant `Π_k √(2/l_k)`.
    pub fn amplitude(&self) -> f64 {
        self.frames.iter().map(|(_, l)| (2.0 / l).sqrt()).product()
    }

    /// Angular wavenumber `n_k π / l_k` of mode `m` along `axis`.
    pub fn wavenumber(&self, m: usize, axis: usize) -> f64 {
        self.modes[m].index(axis) as f64 * PI / self.frames[axis].1
    }

    /// Upper bound of `|Σ_k ∂φ_m/∂ξ_k|` over the domain.
    pub fn gradient_scale(&self, m: usize) -> f64 {
        self.amplitude() * (0..self.dim()).map(|k| self.wavenumber(m, k)).sum::<f64>()
    }

    fn phase(&self, m: usize, axis: usize, x: f64) -> f64 {
        self.wavenumber(m, axis) * (x - self.frames[axis].0)
    }

    /// `φ_m(point)` by position in the basis; the point is not checked.
    pub fn value_at(&self, m: usize, point: &[f64]) -> f64 {
        let mut v = self.amplitude();
        for (k, x) in point.iter().enumerate() {
            v *= self.phase(m, k, *x).sin();
        }
        v
    }

    /// `∇φ_m(point)` by position in the basis; the point is not checked.
    pub fn gradient_at(&self, m: usize, point: &[f64]) -> Vec<f64> {
        let amp = self.amplitude();
        let d = self.dim();
        let sines: Vec<f64> = (0..d).map(|k| self.phase(m, k, point[k]).sin()).collect();
        (0..d)
            .map(|k| {
                let mut g = amp * self.wavenumber(m, k) * self.phase(m, k, point[k]).cos();
                for (q, s) in sines.iter().enumerate() {
                    if q != k {
                        g *= s;
                    }
                }
                g
            })
            .collect()
    }

    pub fn check_coefficients(&self, coeffs: &Coefficients) -> Result<()> {
        if coeffs.len() != self.len() {
            return Err(Error::BasisMismatch(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// Exact evaluation of `φ_mode(point)`.
pub fn eval_eigenfunction(basis: &ModalBasis, mode: Mode, point: &[f64]) -> Result<f64> {
    let m = basis.position(mode)?;
    basis.domain().check_point(point)?;
    Ok(basis.value_at(m, point))
}

/// Exact partial derivatives of `φ_mode` at `point`.
pub fn eval_eigenfunction_gradient(
    basis: &ModalBasis,
    mode: Mode,
    point: &[f64],
) -> Result<Vec<f64>> {
    let m = basis.position(mode)?;
    basis.domain().check_point(point)?;
    Ok(basis.gradient_at(m, point))
}

/// Modal coordinates `a_m = ⟨x, φ_m⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Unit vector on basis position `m`.
    pub fn unit(n: usize, m: usize) -> Self {
        let mut v = vec![0.0; n];
        v[m] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Coefficients) -> Coefficients {
        Coefficients(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

/// Apply the semigroup: `a_m ↦ e^{λ_m t} a_m`.
pub fn propagate(basis: &ModalBasis, coeffs: &Coefficients, t: f64) -> Result<Coefficients> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    basis.check_coefficients(coeffs)?;
    Ok(Coefficients(
        coeffs
            .0
            .iter()
            .zip(basis.eigenvalues())
            .map(|(a, l)| if *a == 0.0 { 0.0 } else { a * (l * t).exp() })
            .collect(),
    ))
}

/// One-dimensional integrals of sine/cosine products along an axis, for every
/// pair of axis indices up to the truncation.
struct AxisIntegrals {
    sin_sin: Vec<Vec<f64>>,
    cos_cos: Vec<Vec<f64>>,
}

fn axis_integrals(
    basis: &ModalBasis,
    axis: usize,
    lo: f64,
    hi: f64,
    quad: &QuadratureSpec,
) -> Result<AxisIntegrals> {
    let n = basis.truncation();
    let (offset, len) = basis.frames()[axis];
    let rule = GaussLegendre::new(quad.order)?;
    let panels = quad.panels_for(hi - lo, 2.0 * n as f64, len);
    let (xs, ws) = rule.composite(lo, hi, panels);
    let k = PI / len;
    let sins: Vec<Vec<f64>> = (1..=n)
        .map(|a| {
            xs.iter()
                .map(|x| (a as f64 * k * (x - offset)).sin())
                .collect()
        })
        .collect();
    let coss: Vec<Vec<f64>> = (1..=n)
        .map(|a| {
            xs.iter()
                .map(|x| (a as f64 * k * (x - offset)).cos())
                .collect()
        })
        .collect();
    let mut sin_sin = vec![vec![0.0; n]; n];
    let mut cos_cos = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let ss: f64 = (0..xs.len()).map(|q| ws[q] * sins[a][q] * sins[b][q]).sum();
            let cc: f64 = (0..xs.len()).map(|q| ws[q] * coss[a][q] * coss[b][q]).sum();
            sin_sin[a][b] = ss;
            sin_sin[b][a] = ss;
            cos_cos[a][b] = cc;
            cos_cos[b][a] = cc;
        }
    }
    Ok(AxisIntegrals { sin_sin, cos_cos })
}

/// Gram matrix `W_{mm'} = Σ_k ∫_ω ∂_k φ_m ∂_k φ_{m'}` of the gradient traces.
pub fn gradient_gram(
    basis: &ModalBasis,
    region: &Subregion,
    quad: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    region.check_inside(basis.domain())?;
    if region.measure() <= 0.0 {
        return Err(Error::DegenerateRegion(region.to_string()));
    }
    let tables: Vec<AxisIntegrals> = (0..basis.dim())
        .map(|k| axis_integrals(basis, k, region.lower(k), region.upper(k), quad))
        .collect::<Result<_>>()?;
    let amp2 = basis.amplitude().powi(2);
    let n = basis.len();
    let mut w = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let ma = basis.modes()[a];
            let mb = basis.modes()[b];
            let mut total = 0.0;
            for k in 0..basis.dim() {
                let mut term = basis.wavenumber(a, k) * basis.wavenumber(b, k);
                for (q, t) in tables.iter().enumerate() {
                    let (ia, ib) = (ma.index(q) - 1, mb.index(q) - 1);
                    term *= if q == k {
                        t.cos_cos[ia][ib]
                    } else {
                        t.sin_sin[ia][ib]
                    };
                }
                total += term;
            }
            w[(a, b)] = amp2 * total;
            w[(b, a)] = amp2 * total;
        }
    }
    Ok(w)
}

/// `(L²)ⁿ` norm of `χ∇x` for `x = Σ a_m φ_m` over `region`, or over the whole
/// domain when `region` is `None`.
pub fn norm_on_region(
    basis: &ModalBasis,
    coeffs: &Coefficients,
    region: Option<&Subregion>,
    quad: &QuadratureSpec,
) -> Result<f64> {
    basis.check_coefficients(coeffs)?;
    let whole = basis.domain().whole();
    let w = gradient_gram(basis, region.unwrap_or(&whole), quad)?;
    Ok(quadratic_form(&w, coeffs.as_slice()).max(0.0).sqrt())
}

pub(crate) fn quadratic_form(w: &DMatrix<f64>, a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            s += a[i] * w[(i, j)] * a[j];
        }
    }
    s
}

/// A sampled vector field with `dim` components per point. Fields sampled on a
/// quadrature grid carry weights and can be integrated.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl GradientField {
    /// Evaluate `∇(Σ a_m φ_m)` at each point.
    pub fn sample(basis: &ModalBasis, coeffs: &Coefficients, points: &[Vec<f64>]) -> Result<Self> {
        basis.check_coefficients(coeffs)?;
        let dim = basis.dim();
        let mut flat_points = Vec::with_capacity(points.len() * dim);
        let mut values = vec![0.0; points.len() * dim];
        for (p, point) in points.iter().enumerate() {
            basis.domain().check_point(point)?;
            flat_points.extend_from_slice(point);
            for (m, a) in coeffs.0.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let g = basis.gradient_at(m, point);
                for k in 0..dim {
                    values[p * dim + k] += a * g[k];
                }
            }
        }
        Ok(Self {
            dim,
            points: flat_points,
            values,
            weights: None,
        })
    }

    /// Sample on the tensor Gauss–Legendre grid of `region`, keeping weights.
    pub fn sample_quadrature(
        basis: &ModalBasis,
        coeffs: &Coefficients,
        region: &Subregion,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        region.check_inside(basis.domain())?;
        let rule = GaussLegendre::new(quad.order)?;
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..basis.dim())
            .map(|k| {
                let panels = quad.panels_for(
                    region.width(k),
                    2.0 * basis.truncation() as f64,
                    basis.frames()[k].1,
                );
                rule.composite(region.lower(k), region.upper(k), panels)
            })
            .collect();
        let (points, weights) = tensor_grid(&axes);
        let mut field = Self::sample(basis, coeffs, &points)?;
        field.weights = Some(weights);
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Quadrature `(L²)ⁿ` norm; `None` when the field has no weights.
    pub fn l2_norm(&self) -> Option<f64> {
        let w = self.weights.as_ref()?;
        let s: f64 = (0..self.len())
            .map(|i| w[i] * self.value(i).iter().map(|v| v * v).sum::<f64>())
            .sum();
        Some(s.sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn tensor_grid(axes: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    let mut weights = vec![1.0];
    for (xs, ws) in axes {
        let mut np = Vec::with_capacity(points.len() * xs.len());
        let mut nw = Vec::with_capacity(points.len() * xs.len());
        for (p, w0) in points.iter().zip(&weights) {
            for (x, w) in xs.iter().zip(ws) {
                let mut q = p.clone();
                q.push(*x);
                np.push(q);
                nw.push(w0 * w);
            }
        }
        points = np;
        weights = nw;
    }
    (points, weights)
}
