//! Finite-rank regional gradient observability Gramian.
//!
//! On the span of the gradient traces `v = Σ c_m χ_ω∇φ_m` the Gramian acts as
//! the pencil `(W A W, W)`: `cᵀWc = ‖v‖²` and `cᵀWAWc` is the output energy of
//! the adjoint state `∇*χ_ω* v`, whose modal coefficients are `Wc`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Subregion;
use crate::linalg::symmetric_eigen;
use crate::quadrature::QuadratureSpec;
use crate::sensor::{signature_matrix, Sensor, SignatureMode};
use crate::spectral::{gradient_gram, ModalBasis};
use crate::strategic::{group_eigenvalues, DEFAULT_GROUP_TOL};

pub const DEFAULT_MARGIN_TOL: f64 = 1e-10;
pub const DEFAULT_W_CUTOFF: f64 = 1e-12;

/// `∫₀ᵀ e^{(λ + λ')t} dt`, including the `λ + λ' → 0` limit and `T = ∞`.
pub fn time_correlation(lambda: f64, lambda_prime: f64, horizon: f64) -> f64 {
    let s = lambda + lambda_prime;
    if s == 0.0 {
        return horizon;
    }
    if horizon.is_infinite() {
        return if s < 0.0 { -1.0 / s } else { f64::INFINITY };
    }
    (s * horizon).exp_m1() / s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramianOptions {
    pub signature_mode: SignatureMode,
    pub margin_tol: f64,
    /// Relative eigenvalue cutoff defining `range(W)`.
    pub w_cutoff: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for GramianOptions {
    fn default() -> Self {
        Self {
            signature_mode: SignatureMode::Gradient,
            margin_tol: DEFAULT_MARGIN_TOL,
            w_cutoff: DEFAULT_W_CUTOFF,
            quadrature: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianResult {
    /// Modal time–sensor correlations `A_{mm'}`.
    pub a: DMatrix<f64>,
    /// Gradient-trace Gram matrix on `ω`.
    pub w: DMatrix<f64>,
    /// Smallest eigenvalue of the pencil `(WAW, W)` on `range(W)`, floored at 0.
    pub margin: f64,
    /// The same pencil with `A` restricted to its eigenvalue-group diagonal
    /// blocks, i.e. outputs of distinct decay rates treated as orthogonal.
    /// Diagnostic only; it does not drive any verdict.
    pub decoupled_margin: f64,
    pub positive_definite: bool,
    pub w_rank: usize,
    pub w_deficient: bool,
    pub zero_signatures: bool,
    pub signature_mode: SignatureMode,
    pub horizon: f64,
    pub truncation: usize,
    pub margin_tol: f64,
}

pub fn assemble_gramian(
    basis: &ModalBasis,
    sensors: &[Sensor],
    region: &Subregion,
    horizon: f64,
    options: &GramianOptions,
) -> Result<GramianResult> {
    if !(horizon > 0.0) {
        return Err(Error::NonPositiveHorizon(horizon));
    }
    if !(options.margin_tol > 0.0) {
        return Err(Error::InvalidTolerance {
            name: "margin_tol",
            value: options.margin_tol,
        });
    }
    let sig = signature_matrix(basis, sensors, options.signature_mode, &options.quadrature)?;
    let n = basis.len();
    let lambdas = basis.eigenvalues();
    let sensor_gram = sig.transpose() * &sig;
    let a = DMatrix::from_fn(n, n, |m, k| {
        time_correlation(lambdas[m], lambdas[k], horizon) * sensor_gram[(m, k)]
    });
    let w = gradient_gram(basis, region, &options.quadrature)?;

    let groups = group_eigenvalues(basis, DEFAULT_GROUP_TOL)?;
    let mut group_of = vec![0; n];
    for (g, grp) in groups.iter().enumerate() {
        for m in &grp.members {
            group_of[*m] = g;
        }
    }
    let a_blocks = DMatrix::from_fn(n, n, |m, k| {
        if group_of[m] == group_of[k] {
            a[(m, k)]
        } else {
            0.0
        }
    });

    let (w_vals, w_vecs) = symmetric_eigen(&w);
    let w_max = w_vals.last().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..n)
        .filter(|i| w_vals[*i] > options.w_cutoff * w_max)
        .collect();
    // columns U_k √μ_k span range(W)
    let basis_range = DMatrix::from_fn(n, kept.len(), |r, c| {
        w_vecs[(r, kept[c])] * w_vals[kept[c]].sqrt()
    });
    let pencil_min = |mat: &DMatrix<f64>| -> f64 {
        if kept.is_empty() {
            return 0.0;
        }
        let reduced = basis_range.transpose() * mat * &basis_range;
        symmetric_eigen(&reduced).0[0].max(0.0)
    };
    let zero_signatures = sig.iter().all(|v| *v == 0.0);
    let margin = if zero_signatures { 0.0 } else { pencil_min(&a) };
    let decoupled_margin = if zero_signatures {
        0.0
    } else {
        pencil_min(&a_blocks)
    };
    Ok(GramianResult {
        a,
        w,
        margin,
        decoupled_margin,
        positive_definite: margin > options.margin_tol,
        w_rank: kept.len(),
        w_deficient: kept.len() < n,
        zero_signatures,
        signature_mode: options.signature_mode,
        horizon,
        truncation: basis.truncation(),
        margin_tol: options.margin_tol,
    })
}

/// Smallest `c` with `‖v‖ <= c‖K∇*χ_ω* v‖` on the truncated span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservabilityConstant {
    Finite(f64),
    /// Margin at or below tolerance: not exactly gradient observable at this
    /// truncation.
    Infinite,
}

impl ObservabilityConstant {
    pub fn value(&self) -> f64 {
        match self {
            ObservabilityConstant::Finite(c) => *c,
            ObservabilityConstant::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ObservabilityConstant::Finite(_))
    }
}

pub fn observability_constant(result: &GramianResult) -> ObservabilityConstant {
    constant_from_margin(result.margin, result.margin_tol)
}

pub fn constant_from_margin(margin: f64, tol: f64) -> ObservabilityConstant {
    if margin > tol {
        ObservabilityConstant::Finite(1.0 / margin.sqrt())
    } else {
        ObservabilityConstant::Infinite
    }
}
