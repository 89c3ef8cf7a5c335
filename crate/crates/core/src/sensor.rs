//! Sensor geometry, modal signatures and forward simulation of measurements.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{Coord, Domain};
use crate::quadrature::{GaussLegendre, QuadratureSpec};
use crate::spectral::{tensor_grid, Coefficients, ModalBasis};

/// Spatial distribution `f` of a zonal sensor over its box `D`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Uniform,
    /// `Π_k max(0, 1 − ((ξ_k − c_k)/h_k)²)` with `h_k` the half-width of `D`.
    Bump {
        center: Vec<f64>,
    },
    /// Values on a uniform grid spanning `D` (row-major, last axis fastest),
    /// interpolated multilinearly.
    Tabulated {
        shape: Vec<usize>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensorKind {
    Pointwise {
        location: Vec<Coord>,
    },
    Zonal {
        lower: Vec<f64>,
        upper: Vec<f64>,
        weight: Weight,
    },
    /// Polyline through `points`, observed with arclength measure.
    Filament {
        points: Vec<Vec<f64>>,
    },
}

/// A sensor `(D, f)` with a positive gain applied to its distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub kind: SensorKind,
    pub gain: f64,
}

/// Which modal functional a sensor is paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignatureMode {
    /// `⟨φ_m, f⟩`: the physical output.
    State,
    /// `Σ_k ⟨∂φ_m/∂ξ_k, f⟩`: the rank-condition pairing.
    #[default]
    Gradient,
}

/// Whether gradient signatures sum the partial derivatives into one scalar or
/// keep one entry per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignatureForm {
    #[default]
    Summed,
    Componentwise,
}

impl Sensor {
    pub fn pointwise(location: Vec<Coord>) -> Self {
        Self {
            kind: SensorKind::Pointwise { location },
            gain: 1.0,
        }
    }

    pub fn point(location: &[f64]) -> Self {
        Self::pointwise(location.iter().map(|x| Coord::real(*x)).collect())
    }

    pub fn zonal(lower: Vec<f64>, upper: Vec<f64>, weight: Weight) -> Self {
        Self {
            kind: SensorKind::Zonal {
                lower,
                upper,
                weight,
            },
            gain: 1.0,
        }
    }

    pub fn filament(points: Vec<Vec<f64>>) -> Self {
        Self {
            kind: SensorKind::Filament { points },
            gain: 1.0,
        }
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SensorKind::Pointwise { .. } => "pointwise",
            SensorKind::Zonal { .. } => "zonal",
            SensorKind::Filament { .. } => "filament",
        }
    }

    /// Float location of a pointwise sensor.
    pub fn location(&self) -> Option<Vec<f64>> {
        match &self.kind {
            SensorKind::Pointwise { location } => Some(location.iter().map(Coord::value).collect()),
            _ => None,
        }
    }

    /// Total variation `∫|g f|` of the sensor's distribution; the natural
    /// scale of any signature it produces.
    pub fn mass(&self) -> f64 {
        let g = self.gain.abs();
        match &self.kind {
            SensorKind::Pointwise { .. } => g,
            SensorKind::Zonal {
                lower,
                upper,
                weight,
            } => {
                let rule = GaussLegendre::new(8).expect("fixed rule");
                let axes: Vec<_> = lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| rule.composite(*a, *b, 16))
                    .collect();
                let (pts, ws) = tensor_grid(&axes);
                g * pts
                    .iter()
                    .zip(&ws)
                    .map(|(p, w)| w * weight_value(weight, lower, upper, p).abs())
                    .sum::<f64>()
            }
            SensorKind::Filament { points } => g * polyline_length(points),
        }
    }

    /// Centre of symmetry of the sensor's distribution, if it has one: the box
    /// centre for symmetric zonal weights, the bounding-box centre for a
    /// mirror-symmetric filament.
    pub fn symmetry_center(&self) -> Option<Vec<f64>> {
        const TOL: f64 = 1e-12;
        match &self.kind {
            SensorKind::Pointwise { .. } => self.location(),
            SensorKind::Zonal {
                lower,
                upper,
                weight,
            } => {
                let mid: Vec<f64> = lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                let symmetric = match weight {
                    Weight::Uniform => true,
                    Weight::Bump { center } => center
                        .iter()
                        .zip(&mid)
                        .all(|(c, m)| (c - m).abs() <= TOL * (1.0 + m.abs())),
                    Weight::Tabulated { shape, values } => tabulated_symmetric(shape, values),
                };
                symmetric.then_some(mid)
            }
            SensorKind::Filament { points } => {
                let dim = points.first()?.len();
                let mid: Vec<f64> = (0..dim)
                    .map(|k| {
                        let lo = points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                        let hi = points
                            .iter()
                            .map(|p| p[k])
                            .fold(f64::NEG_INFINITY, f64::max);
                        0.5 * (lo + hi)
                    })
                    .collect();
                // mirror about ξ_axis = mid_axis maps the point set onto itself
                let mirrored = |axis: usize| {
                    points.iter().all(|p| {
                        let mut r = p.clone();
                        r[axis] = 2.0 * mid[axis] - p[axis];
                        points
                            .iter()
                            .any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() <= 1e-9))
                    })
                };
                (0..dim).any(mirrored).then_some(mid)
            }
        }
    }
}

fn tabulated_symmetric(shape: &[usize], values: &[f64]) -> bool {
    // mirror symmetry about the centre line of every axis separately
    let strides: Vec<usize> = (0..shape.len())
        .map(|k| shape[k + 1..].iter().product())
        .collect();
    (0..values.len()).all(|i| {
        (0..shape.len()).all(|k| {
            let c = (i / strides[k]) % shape[k];
            let j = i - c * strides[k] + (shape[k] - 1 - c) * strides[k];
            (values[i] - values[j]).abs() <= 1e-12 * (1.0 + values[i].abs())
        })
    })
}

fn polyline_length(points: &[Vec<f64>]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

fn weight_value(weight: &Weight, lower: &[f64], upper: &[f64], p: &[f64]) -> f64 {
    match weight {
        Weight::Uniform => 1.0,
        Weight::Bump { center } => p
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let h = 0.5 * (upper[k] - lower[k]);
                let r = (x - center[k]) / h;
                (1.0 - r * r).max(0.0)
            })
            .product(),
        Weight::Tabulated { shape, values } => {
            // multilinear interpolation on the uniform table
            let dim = shape.len();
            let mut base = Vec::with_capacity(dim);
            let mut frac = Vec::with_capacity(dim);
            for k in 0..dim {
                let cells = (shape[k] - 1) as f64;
                let s = ((p[k] - lower[k]) / (upper[k] - lower[k]) * cells).clamp(0.0, cells);
                let i = (s.floor() as usize).min(shape[k] - 2);
                base.push(i);
                frac.push(s - i as f64);
            }
            let mut acc = 0.0;
            for corner in 0..(1usize << dim) {
                let mut w = 1.0;
                let mut idx = 0;
                for k in 0..dim {
                    let bit = (corner >> k) & 1;
                    w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                    idx = idx * shape[k] + base[k] + bit;
                }
                acc += w * values[idx];
            }
            acc
        }
    }
}

/// Check a sensor against the domain and return its normalised form
/// (consecutive duplicate filament vertices removed).
pub fn validate_sensor(sensor: &Sensor, domain: &Domain) -> Result<Sensor> {
    if !(sensor.gain.is_finite() && sensor.gain > 0.0) {
        return Err(Error::InvalidWeight(format!(
            "gain {} must be positive",
            sensor.gain
        )));
    }
    let dim = domain.dim();
    match &sensor.kind {
        SensorKind::Pointwise { location } => {
            if location.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: location.len(),
                });
            }
            let b: Vec<f64> = location.iter().map(Coord::value).collect();
            if !domain.contains_interior(&b) {
                return Err(Error::SensorOutsideDomain(format!(
                    "pointwise location {b:?} is not strictly inside the domain"
                )));
            }
            Ok(sensor.clone())
        }
        SensorKind::Zonal {
            lower,
            upper,
            weight,
        } => {
            if lower.len() != dim || upper.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: lower.len().min(upper.len()),
                });
            }
            for k in 0..dim {
                if !(lower[k] < upper[k]) {
                    return Err(Error::EmptyZone(format!(
                        "axis {k}: [{}, {}] has no interior",
                        lower[k], upper[k]
                    )));
                }
            }
            if !domain.contains(lower) || !domain.contains(upper) {
                return Err(Error::SensorOutsideDomain(format!(
                    "zone [{lower:?}, {upper:?}] is not inside the domain"
                )));
            }
            match weight {
                Weight::Uniform => {}
                Weight::Bump { center } => {
                    if center.len() != dim
                        || (0..dim).any(|k| center[k] < lower[k] || center[k] > upper[k])
                    {
                        return Err(Error::InvalidWeight(format!(
                            "bump centre {center:?} must lie inside the zone"
                        )));
                    }
                }
                Weight::Tabulated { shape, values } => {
                    if shape.len() != dim || shape.iter().any(|s| *s < 2) {
                        return Err(Error::InvalidWeight(format!(
                            "table shape {shape:?} needs at least 2 samples per axis"
                        )));
                    }
                    if shape.iter().product::<usize>() != values.len() {
                        return Err(Error::InvalidWeight(format!(
                            "table shape {shape:?} does not match {} values",
                            values.len()
                        )));
                    }
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidWeight("table values must be finite".into()));
                    }
                }
            }
            Ok(sensor.clone())
        }
        SensorKind::Filament { points } => {
            if dim != 2 {
                return Err(Error::DegenerateCurve(
                    "filament sensors need a 2D domain".into(),
                ));
            }
            if points.iter().any(|p| p.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: 0,
                });
            }
            if let Some(p) = points.iter().find(|p| !domain.contains(p)) {
                return Err(Error::SensorOutsideDomain(format!("filament vertex {p:?}")));
            }
            let mut clean: Vec<Vec<f64>> = Vec::with_capacity(points.len());
            for p in points {
                if clean.last() != Some(p) {
                    clean.push(p.clone());
                }
            }
            if clean.len() < 2 || polyline_length(&clean) <= 0.0 {
                return Err(Error::DegenerateCurve(
                    "need at least 2 distinct points".into(),
                ));
            }
            Ok(Sensor {
                kind: SensorKind::Filament { points: clean },
                gain: sensor.gain,
            })
        }
    }
}

/// Integrate `eval(point)` (a vector with one entry per basis mode and output
/// component) against the sensor's distribution.
fn sensor_functional<F>(
    basis: &ModalBasis,
    sensor: &Sensor,
    quad: &QuadratureSpec,
    width: usize,
    eval: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let sensor = validate_sensor(sensor, basis.domain())?;
    let mut out = vec![0.0; width];
    let mut tmp = vec![0.0; width];
    let n = basis.truncation() as f64;
    match &sensor.kind {
        SensorKind::Pointwise { location } => {
            let b: Vec<f64> = location.iter().map(Coord::value).collect();
            eval(&b, &mut out);
        }
        SensorKind::Zonal {
            lower,
            upper,
            weight,
        } => {
            let rule = GaussLegendre::new(quad.order)?;
            let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..basis.dim())
                .map(|k| {
                    let (mut lo, mut hi) = (lower[k], upper[k]);
                    if let Weight::Bump { center } = weight {
                        let h = 0.5 * (hi - lo);
                        lo = lo.max(center[k] - h);
                        hi = hi.min(center[k] + h);
                    }
                    let mut panels = quad.panels_for(hi - lo, n, basis.frames()[k].1);
                    if let Weight::Tabulated { shape, .. } = weight {
                        let cells = shape[k] - 1;
                        panels = cells * panels.div_ceil(cells);
                    }
                    rule.composite(lo, hi, panels)
                })
                .collect();
            let (points, weights) = tensor_grid(&axes);
            for (p, w) in points.iter().zip(&weights) {
                let f = weight_value(weight, lower, upper, p);
                if f == 0.0 {
                    continue;
                }
                eval(p, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += w * f * t;
                }
            }
        }
        SensorKind::Filament { points } => {
            let rule = GaussLegendre::new(quad.order)?;
            let max_len = basis
                .frames()
                .iter()
                .map(|f| f.1)
                .fold(f64::INFINITY, f64::min);
            for seg in points.windows(2) {
                let len = polyline_length(seg);
                let panels = quad.panels_for(len, n * 2f64.sqrt(), max_len);
                let (ss, ws) = rule.composite(0.0, 1.0, panels);
                for (s, w) in ss.iter().zip(&ws) {
                    let p: Vec<f64> = seg[0]
                        .iter()
                        .zip(&seg[1])
                        .map(|(a, b)| a + s * (b - a))
                        .collect();
                    eval(&p, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += w * len * t;
                    }
                }
            }
        }
    }
    for o in &mut out {
        *o *= sensor.gain;
    }
    Ok(out)
}

/// `s_m = ⟨φ_m, f⟩` for every mode of the basis.
pub fn state_signature(basis: &ModalBasis, sensor: &Sensor) -> Result<Vec<f64>> {
    state_signature_with(basis, sensor, &QuadratureSpec::default())
}

pub fn state_signature_with(
    basis: &ModalBasis,
    sensor: &Sensor,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    sensor_functional(basis, sensor, quad, basis.len(), |p, out| {
        for (m, o) in out.iter_mut().enumerate() {
            *o = basis.value_at(m, p);
        }
    })
}

/// `g_m = Σ_k ⟨∂φ_m/∂ξ_k, f⟩`, the summed-partials signature of the rank condition.
pub fn gradient_signature(basis: &ModalBasis, sensor: &Sensor) -> Result<Vec<f64>> {
    gradient_signature_with(basis, sensor, &QuadratureSpec::default())
}

pub fn gradient_signature_with(
    basis: &ModalBasis,
    sensor: &Sensor,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    sensor_functional(basis, sensor, quad, basis.len(), |p, out| {
        for (m, o) in out.iter_mut().enumerate() {
            *o = basis.gradient_at(m, p).iter().sum();
        }
    })
}

/// Per-axis gradient signatures: result `[k][m] = ⟨∂φ_m/∂ξ_k, f⟩`.
pub fn gradient_signature_components(
    basis: &ModalBasis,
    sensor: &Sensor,
    quad: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    let n = basis.len();
    let d = basis.dim();
    let flat = sensor_functional(basis, sensor, quad, n * d, |p, out| {
        for m in 0..n {
            let g = basis.gradient_at(m, p);
            for k in 0..d {
                out[k * n + m] = g[k];
            }
        }
    })?;
    Ok(flat.chunks(n).map(<[f64]>::to_vec).collect())
}

/// Signature rows contributed by one sensor: one row, or one per axis for the
/// componentwise gradient form.
pub fn signature_rows(
    basis: &ModalBasis,
    sensor: &Sensor,
    mode: SignatureMode,
    form: SignatureForm,
    quad: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    match (mode, form) {
        (SignatureMode::State, _) => Ok(vec![state_signature_with(basis, sensor, quad)?]),
        (SignatureMode::Gradient, SignatureForm::Summed) => {
            Ok(vec![gradient_signature_with(basis, sensor, quad)?])
        }
        (SignatureMode::Gradient, SignatureForm::Componentwise) => {
            gradient_signature_components(basis, sensor, quad)
        }
    }
}

/// Signature matrix with one row per sensor (summed form), `q × N`.
pub fn signature_matrix(
    basis: &ModalBasis,
    sensors: &[Sensor],
    mode: SignatureMode,
    quad: &QuadratureSpec,
) -> Result<DMatrix<f64>> {
    if sensors.is_empty() {
        return Err(Error::EmptySensorList);
    }
    let rows = sensors
        .iter()
        .map(|s| {
            signature_rows(basis, s, mode, SignatureForm::Summed, quad).map(|mut r| r.remove(0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(rows.len(), basis.len(), |i, m| rows[i][m]))
}

/// Largest value a signature of mode `m` can reach for a unit-mass sensor.
pub fn mode_scale(basis: &ModalBasis, m: usize, mode: SignatureMode) -> f64 {
    match mode {
        SignatureMode::State => basis.amplitude(),
        SignatureMode::Gradient => basis.gradient_scale(m),
    }
}

/// Observation times `t_1 < … < t_M` inside `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    times: Vec<f64>,
}

impl TimeGrid {
    /// `M` uniform samples `T/M, 2T/M, …, T`.
    pub fn uniform(horizon: f64, samples: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::EmptyTimeGrid);
        }
        let times = (1..=samples)
            .map(|j| horizon * j as f64 / samples as f64)
            .collect();
        Self::new(horizon, times)
    }

    pub fn new(horizon: f64, times: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        if times.is_empty() {
            return Err(Error::EmptyTimeGrid);
        }
        if times.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
            return Err(Error::InvalidTimeGrid(format!(
                "times must lie in [0, {horizon}]"
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTimeGrid(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Self { horizon, times })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sensor outputs `y_i(t_j)`, one row per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub grid: TimeGrid,
    pub values: Vec<Vec<f64>>,
}

impl MeasurementSeries {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyMeasurements);
        }
        if let Some(r) = values.iter().find(|r| r.len() != grid.len()) {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: r.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn sensor_count(&self) -> usize {
        self.values.len()
    }

    pub fn sample_count(&self) -> usize {
        self.grid.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub stddev: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub signature_mode: SignatureMode,
    pub noise: Option<Noise>,
    pub quadrature: QuadratureSpec,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            signature_mode: SignatureMode::State,
            noise: None,
            quadrature: QuadratureSpec::default(),
        }
    }
}

/// `y_i(t_j) = Σ_m a_m e^{λ_m t_j} s^{(i)}_m`, plus optional seeded Gaussian noise.
pub fn simulate_output(
    basis: &ModalBasis,
    coeffs: &Coefficients,
    sensors: &[Sensor],
    grid: &TimeGrid,
    options: &SimulationOptions,
) -> Result<MeasurementSeries> {
    basis.check_coefficients(coeffs)?;
    let sig = signature_matrix(basis, sensors, options.signature_mode, &options.quadrature)?;
    let mut values = vec![vec![0.0; grid.len()]; sensors.len()];
    for (j, t) in grid.times().iter().enumerate() {
        let decayed: Vec<f64> = coeffs
            .0
            .iter()
            .zip(basis.eigenvalues())
            .map(|(a, l)| if *a == 0.0 { 0.0 } else { a * (l * t).exp() })
            .collect();
        for (i, row) in values.iter_mut().enumerate() {
            row[j] = decayed
                .iter()
                .enumerate()
                .map(|(m, d)| d * sig[(i, m)])
                .sum();
        }
    }
    if let Some(noise) = options.noise {
        if !(noise.stddev.is_finite() && noise.stddev >= 0.0) {
            return Err(Error::InvalidTolerance {
                name: "noise.stddev",
                value: noise.stddev,
            });
        }
        if noise.stddev > 0.0 {
            let normal =
                Normal::new(0.0, noise.stddev).map_err(|e| Error::Numerical(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            for row in &mut values {
                for v in row.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    MeasurementSeries::new(grid.clone(), values)
}
