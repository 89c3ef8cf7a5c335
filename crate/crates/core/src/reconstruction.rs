//! Recovery of the initial-state gradient on `ω` from sensor measurements by
//! regularised modal least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Subregion;
use crate::quadrature::QuadratureSpec;
use crate::sensor::{MeasurementSeries, Sensor, SignatureForm, SignatureMode};
use crate::spectral::{gradient_gram, quadratic_form, Coefficients, GradientField, ModalBasis};
use crate::strategic::{vanishing_modes, SignatureTable, DEFAULT_VANISH_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    None,
    Tikhonov(f64),
    /// Pick the Tikhonov weight whose residual matches the noise level
    /// (standard deviation per sample).
    Discrepancy {
        noise_level: f64,
    },
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Tikhonov(1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub signature_mode: SignatureMode,
    pub regularization: Regularization,
    /// Normalised signature magnitude below which a mode is unidentifiable.
    pub identifiability_tol: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            signature_mode: SignatureMode::State,
            regularization: Regularization::default(),
            identifiability_tol: DEFAULT_VANISH_TOL,
            quadrature: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub coefficients: Coefficients,
    /// Basis positions whose design-matrix column is degenerate; their
    /// coefficients are set to zero.
    pub unidentifiable: Vec<usize>,
    pub regularization: f64,
    pub residual_norm: f64,
    /// `σ_max/σ_min` of the design matrix on the identifiable columns.
    pub condition_number: f64,
    /// The same after scaling every column to unit norm.
    pub scaled_condition_number: f64,
}

fn design_matrix(
    measurements: &MeasurementSeries,
    basis: &ModalBasis,
    table: &SignatureTable,
    cols: &[usize],
) -> DMatrix<f64> {
    let times = measurements.grid.times();
    let m_count = times.len();
    let q = measurements.sensor_count();
    let lambdas = basis.eigenvalues();
    DMatrix::from_fn(q * m_count, cols.len(), |r, c| {
        let (i, j) = (r / m_count, r % m_count);
        let m = cols[c];
        (lambdas[m] * times[j]).exp() * table.rows[i][m]
    })
}

/// Least-squares fit of `y_i(t_j) = Σ_m a_m e^{λ_m t_j} sig^{(i)}_m`.
pub fn estimate_coefficients(
    measurements: &MeasurementSeries,
    basis: &ModalBasis,
    sensors: &[Sensor],
    options: &EstimateOptions,
) -> Result<Estimate> {
    if measurements.sensor_count() == 0 || measurements.sample_count() == 0 {
        return Err(Error::EmptyMeasurements);
    }
    if sensors.len() != measurements.sensor_count() {
        return Err(Error::DimensionMismatch {
            expected: sensors.len(),
            got: measurements.sensor_count(),
        });
    }
    let table = SignatureTable::new(
        basis,
        sensors,
        options.signature_mode,
        SignatureForm::Summed,
        &options.quadrature,
    )?;
    let mut unidentifiable = vanishing_modes(&table, options.identifiability_tol);
    let candidates: Vec<usize> = (0..basis.len())
        .filter(|m| !unidentifiable.contains(m))
        .collect();
    let full = design_matrix(measurements, basis, &table, &candidates);
    let mut cols = Vec::new();
    for (c, m) in candidates.iter().enumerate() {
        if full.column(c).norm() > f64::MIN_POSITIVE {
            cols.push(*m);
        } else {
            unidentifiable.push(*m);
        }
    }
    unidentifiable.sort_unstable();
    if cols.is_empty() {
        return Err(Error::AllColumnsDegenerate);
    }
    let x = design_matrix(measurements, basis, &table, &cols);
    let y = DVector::from_iterator(
        x.nrows(),
        measurements
            .values
            .iter()
            .flat_map(|row| row.iter().copied()),
    );

    let scales: Vec<f64> = (0..x.ncols()).map(|c| x.column(c).norm()).collect();
    let xs = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] / scales[c]);
    let svd_scaled = xs.clone().svd(true, true);
    let svd = x.clone().svd(true, true);
    let cond = |sv: &DVector<f64>| {
        let max = sv.max();
        let min = sv.min();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };

    let (solution, reg) = match options.regularization {
        Regularization::None => {
            let u = svd_scaled.u.as_ref().expect("u requested");
            let vt = svd_scaled.v_t.as_ref().expect("v requested");
            let uty = u.transpose() * &y;
            let sv = &svd_scaled.singular_values;
            let z = DVector::from_fn(
                sv.len(),
                |k, _| if sv[k] > 0.0 { uty[k] / sv[k] } else { 0.0 },
            );
            let scaled = vt.transpose() * z;
            (
                DVector::from_fn(scaled.len(), |c, _| scaled[c] / scales[c]),
                0.0,
            )
        }
        Regularization::Tikhonov(lambda) => {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidTolerance {
                    name: "tikhonov",
                    value: lambda,
                });
            }
            (tikhonov_solve(&svd, &y, lambda), lambda)
        }
        Regularization::Discrepancy { noise_level } => {
            if !(noise_level > 0.0) {
                return Err(Error::InvalidTolerance {
                    name: "discrepancy noise level",
                    value: noise_level,
                });
            }
            let target = noise_level * (y.len() as f64).sqrt();
            let lambda = discrepancy_weight(&svd, &y, target);
            (tikhonov_solve(&svd, &y, lambda), lambda)
        }
    };
    let mut coeffs = vec![0.0; basis.len()];
    for (c, m) in cols.iter().enumerate() {
        coeffs[*m] = solution[c];
    }
    let residual_norm = (&x * &solution - &y).norm();
    if !residual_norm.is_finite() {
        return Err(Error::Numerical("non-finite residual".into()));
    }
    Ok(Estimate {
        coefficients: Coefficients(coeffs),
        unidentifiable,
        regularization: reg,
        residual_norm,
        condition_number: cond(&svd.singular_values),
        scaled_condition_number: cond(&svd_scaled.singular_values),
    })
}

/// `a = V diag(σ/(σ² + λ)) Uᵀ y`.
fn tikhonov_solve(
    svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    y: &DVector<f64>,
    lambda: f64,
) -> DVector<f64> {
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v requested");
    let uty = u.transpose() * y;
    let sv = &svd.singular_values;
    let z = DVector::from_fn(sv.len(), |k, _| {
        let s = sv[k];
        let d = s * s + lambda;
        if d > 0.0 {
            s * uty[k] / d
        } else {
            0.0
        }
    });
    vt.transpose() * z
}

fn discrepancy_weight(
    svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    y: &DVector<f64>,
    target: f64,
) -> f64 {
    let u = svd.u.as_ref().expect("u requested");
    let uty = u.transpose() * y;
    let sv = &svd.singular_values;
    let perp2 = (y.norm_squared() - uty.norm_squared()).max(0.0);
    let residual = |lambda: f64| -> f64 {
        let r2: f64 = (0..sv.len())
            .map(|k| {
                let f = lambda / (sv[k] * sv[k] + lambda);
                (f * uty[k]).powi(2)
            })
            .sum();
        (r2 + perp2).sqrt()
    };
    let s1 = sv.max().max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = ((1e-20 * s1 * s1).ln(), (1e4 * s1 * s1).ln());
    if residual(lo.exp()) >= target {
        return lo.exp();
    }
    if residual(hi.exp()) <= target {
        return hi.exp();
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if residual(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Sample points for a gradient field on `ω`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `n` equally spaced points per axis, endpoints included.
    Uniform(usize),
    Points(Vec<Vec<f64>>),
    /// Gauss–Legendre nodes, keeping weights for integration.
    Quadrature(QuadratureSpec),
}

/// `χ_ω∇x̂₀` sampled on `grid`.
pub fn gradient_field_on_region(
    basis: &ModalBasis,
    coeffs: &Coefficients,
    region: &Subregion,
    grid: &GridSpec,
) -> Result<GradientField> {
    region.check_inside(basis.domain())?;
    match grid {
        GridSpec::Quadrature(q) => GradientField::sample_quadrature(basis, coeffs, region, q),
        GridSpec::Uniform(n) => {
            if *n == 0 {
                return Err(Error::Quadrature(
                    "uniform grid needs at least one point".into(),
                ));
            }
            let axes: Vec<Vec<f64>> = (0..region.dim())
                .map(|k| {
                    if *n == 1 {
                        vec![region.lower(k) + 0.5 * region.width(k)]
                    } else {
                        (0..*n)
                            .map(|i| region.lower(k) + region.width(k) * i as f64 / (*n - 1) as f64)
                            .collect()
                    }
                })
                .collect();
            let mut points: Vec<Vec<f64>> = vec![Vec::new()];
            for ax in &axes {
                points = points
                    .iter()
                    .flat_map(|p| {
                        ax.iter().map(move |x| {
                            let mut q = p.clone();
                            q.push(*x);
                            q
                        })
                    })
                    .collect();
            }
            GradientField::sample(basis, coeffs, &points)
        }
        GridSpec::Points(points) => {
            if let Some(p) = points.iter().find(|p| !region.contains(p)) {
                return Err(Error::PointOutsideRegion(p.clone()));
            }
            GradientField::sample(basis, coeffs, points)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionError {
    /// `‖χ_ω∇(x₀ − x̂₀)‖`.
    pub region: f64,
    /// `‖∇(x₀ − x̂₀)‖` over the whole domain.
    pub whole: f64,
}

pub fn reconstruction_error(
    truth: &Coefficients,
    estimate: &Coefficients,
    basis: &ModalBasis,
    region: &Subregion,
    quad: &QuadratureSpec,
) -> Result<ReconstructionError> {
    basis.check_coefficients(truth)?;
    basis.check_coefficients(estimate)?;
    let e = truth.sub(estimate);
    let w_whole = gradient_gram(basis, &basis.domain().whole(), quad)?;
    let whole = quadratic_form(&w_whole, e.as_slice()).max(0.0).sqrt();
    let inner = if region.covers(basis.domain()) {
        whole
    } else {
        let w = gradient_gram(basis, region, quad)?;
        quadratic_form(&w, e.as_slice()).max(0.0).sqrt()
    };
    if inner > whole + 1e-12 * whole.max(1.0) {
        return Err(Error::Numerical(format!(
            "restricted error {inner} exceeds full error {whole}"
        )));
    }
    Ok(ReconstructionError {
        region: inner,
        whole,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub estimate: Estimate,
    pub field: GradientField,
    pub errors: Option<ReconstructionError>,
}

/// Estimate, sample the gradient on `ω`, and score against `truth` if known.
pub fn reconstruct(
    measurements: &MeasurementSeries,
    basis: &ModalBasis,
    sensors: &[Sensor],
    region: &Subregion,
    options: &EstimateOptions,
    grid: &GridSpec,
    truth: Option<&Coefficients>,
) -> Result<ReconstructionResult> {
    let estimate = estimate_coefficients(measurements, basis, sensors, options)?;
    let field = gradient_field_on_region(basis, &estimate.coefficients, region, grid)?;
    let errors = truth
        .map(|t| {
            reconstruction_error(
                t,
                &estimate.coefficients,
                basis,
                region,
                &options.quadrature,
            )
        })
        .transpose()?;
    Ok(ReconstructionResult {
        estimate,
        field,
        errors,
    })
}
