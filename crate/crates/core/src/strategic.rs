//! Strategic-sensor analysis: eigenvalue grouping, the per-group signature
//! matrices `G_n` and their rank test, the one-dimensional forbidden location
//! sets, the closed-form rectangle conditions and the kernel/complement split
//! of the modal basis.

use nalgebra::DMatrix;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::geometry::{Coord, Subregion};
use crate::linalg::{rank_above, select, singular_values, symmetric_eigen};
use crate::quadrature::QuadratureSpec;
use crate::sensor::{
    mode_scale, signature_rows, validate_sensor, Sensor, SensorKind, SignatureForm, SignatureMode,
};
use crate::spectral::{gradient_gram, ModalBasis, Mode};

pub const DEFAULT_GROUP_TOL: f64 = 1e-9;
pub const DEFAULT_RANK_RTOL: f64 = 1e-10;
pub const DEFAULT_VANISH_TOL: f64 = 1e-10;

/// Modes sharing one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    pub eigenvalue: f64,
    /// Positions in the basis.
    pub members: Vec<usize>,
    pub modes: Vec<Mode>,
}

impl EigenGroup {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// Partition the basis by `|λ − λ'| <= rel_tol·|λ|`, closest to zero first.
pub fn group_eigenvalues(basis: &ModalBasis, rel_tol: f64) -> Result<Vec<EigenGroup>> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidTolerance {
            name: "group rel_tol",
            value: rel_tol,
        });
    }
    let mut groups: Vec<EigenGroup> = Vec::new();
    for (m, (lambda, mode)) in basis.eigenvalues().iter().zip(basis.modes()).enumerate() {
        match groups.last_mut() {
            Some(g) if (lambda - g.eigenvalue).abs() <= rel_tol * g.eigenvalue.abs() => {
                g.members.push(m);
                g.modes.push(*mode);
            }
            _ => groups.push(EigenGroup {
                eigenvalue: *lambda,
                members: vec![m],
                modes: vec![*mode],
            }),
        }
    }
    Ok(groups)
}

/// Raw and scale-normalised signature rows of a sensor suite.
///
/// Normalised entries divide by the sensor mass and by the largest value the
/// mode's signature can reach, so they lie in `[−1, 1]` whatever the sensor
/// gains or mode indices are.
#[derive(Debug, Clone)]
pub struct SignatureTable {
    pub mode: SignatureMode,
    pub form: SignatureForm,
    pub rows: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    /// Sensor index that produced each row.
    pub sensor_of_row: Vec<usize>,
    pub sensor_count: usize,
}

impl SignatureTable {
    pub fn new(
        basis: &ModalBasis,
        sensors: &[Sensor],
        mode: SignatureMode,
        form: SignatureForm,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::EmptySensorList);
        }
        let mut rows = Vec::new();
        let mut normalized = Vec::new();
        let mut sensor_of_row = Vec::new();
        for (i, s) in sensors.iter().enumerate() {
            let s = validate_sensor(s, basis.domain())?;
            let mass = s.mass();
            for row in signature_rows(basis, &s, mode, form, quad)? {
                let norm: Vec<f64> = row
                    .iter()
                    .enumerate()
                    .map(|(m, v)| v / (mass * mode_scale(basis, m, mode)))
                    .collect();
                rows.push(row);
                normalized.push(norm);
                sensor_of_row.push(i);
            }
        }
        Ok(Self {
            mode,
            form,
            rows,
            normalized,
            sensor_of_row,
            sensor_count: sensors.len(),
        })
    }

    /// `G_n` restricted to the given rows: `(G_n)_{ij}` = signature of member `j` for row `i`.
    pub fn group_matrix(
        &self,
        group: &EigenGroup,
        normalized: bool,
        rows: &[usize],
    ) -> DMatrix<f64> {
        let src = if normalized {
            &self.normalized
        } else {
            &self.rows
        };
        DMatrix::from_fn(rows.len(), group.members.len(), |r, c| {
            src[rows[r]][group.members[c]]
        })
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).collect()
    }

    fn rows_of_sensor(&self, sensor: usize) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|r| self.sensor_of_row[*r] == sensor)
            .collect()
    }
}

/// The `q × r_n` gradient-signature matrix of one eigenvalue group.
pub fn assemble_gn(
    group: &EigenGroup,
    sensors: &[Sensor],
    basis: &ModalBasis,
) -> Result<DMatrix<f64>> {
    let table = SignatureTable::new(
        basis,
        sensors,
        SignatureMode::Gradient,
        SignatureForm::Summed,
        &QuadratureSpec::default(),
    )?;
    Ok(table.group_matrix(group, false, &table.all_rows()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOptions {
    pub rank_rtol: f64,
    pub group_tol: f64,
    pub form: SignatureForm,
    pub quadrature: QuadratureSpec,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            rank_rtol: DEFAULT_RANK_RTOL,
            group_tol: DEFAULT_GROUP_TOL,
            form: SignatureForm::Summed,
            quadrature: QuadratureSpec::default(),
        }
    }
}

/// Numerical rank of one normalised group matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRank {
    pub eigenvalue: f64,
    pub modes: Vec<Mode>,
    pub multiplicity: usize,
    pub rank: usize,
    pub passed: bool,
    /// A singular value sits within a factor 10 of the threshold.
    pub marginal: bool,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailureReason {
    TooFewSensors {
        sensors: usize,
        max_multiplicity: usize,
    },
    RankDeficient {
        group: usize,
        eigenvalue: f64,
        rank: usize,
        multiplicity: usize,
    },
}

/// Verdict for one signature kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteVerdict {
    pub mode: SignatureMode,
    /// Joint condition: `q >= r` and `rank G_n = r_n` for every group.
    pub strategic: bool,
    pub enough_sensors: bool,
    /// Some single sensor of the suite passes on its own.
    pub any_member: bool,
    pub marginal: bool,
    pub first_failure: Option<usize>,
    pub reason: Option<FailureReason>,
    pub groups: Vec<GroupRank>,
}

impl SuiteVerdict {
    /// Indices of failing groups.
    pub fn failing_groups(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.passed)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategicVerdict {
    pub truncation: usize,
    pub rank_rtol: f64,
    pub group_tol: f64,
    pub sensor_count: usize,
    pub max_multiplicity: usize,
    pub gradient: SuiteVerdict,
    pub state: SuiteVerdict,
}

impl StrategicVerdict {
    pub fn gradient_strategic(&self) -> bool {
        self.gradient.strategic
    }

    pub fn state_strategic(&self) -> bool {
        self.state.strategic
    }
}

fn rank_group(matrix: &DMatrix<f64>, rank_rtol: f64) -> (usize, bool, Vec<f64>) {
    let sv = singular_values(matrix);
    let reference = sv.first().copied().unwrap_or(0.0).max(1.0);
    let threshold = rank_rtol * reference;
    let rank = rank_above(&sv, threshold);
    let marginal = sv
        .iter()
        .any(|s| *s > threshold / 10.0 && *s <= threshold * 10.0);
    (rank, marginal, sv)
}

fn suite_verdict(
    table: &SignatureTable,
    groups: &[EigenGroup],
    rank_rtol: f64,
    sensors: usize,
) -> SuiteVerdict {
    let r = groups
        .iter()
        .map(EigenGroup::multiplicity)
        .max()
        .unwrap_or(0);
    let all = table.all_rows();
    let ranks: Vec<GroupRank> = groups
        .iter()
        .map(|g| {
            let (rank, marginal, sv) = rank_group(&table.group_matrix(g, true, &all), rank_rtol);
            GroupRank {
                eigenvalue: g.eigenvalue,
                modes: g.modes.clone(),
                multiplicity: g.multiplicity(),
                rank,
                passed: rank == g.multiplicity(),
                marginal,
                singular_values: sv,
            }
        })
        .collect();
    let enough = sensors >= r;
    let first_failure = ranks.iter().position(|g| !g.passed);
    let reason = if !enough {
        Some(FailureReason::TooFewSensors {
            sensors,
            max_multiplicity: r,
        })
    } else {
        first_failure.map(|i| FailureReason::RankDeficient {
            group: i,
            eigenvalue: ranks[i].eigenvalue,
            rank: ranks[i].rank,
            multiplicity: ranks[i].multiplicity,
        })
    };
    let any_member = r <= 1
        && (0..table.sensor_count).any(|s| {
            let rows = table.rows_of_sensor(s);
            groups.iter().all(|g| {
                rank_group(&table.group_matrix(g, true, &rows), rank_rtol).0 == g.multiplicity()
            })
        });
    SuiteVerdict {
        mode: table.mode,
        strategic: enough && first_failure.is_none(),
        enough_sensors: enough,
        any_member,
        marginal: ranks.iter().any(|g| g.marginal),
        first_failure,
        reason,
        groups: ranks,
    }
}

/// Rank test over every eigenvalue group, for gradient signatures and, for
/// comparison, for state signatures.
pub fn rank_test(
    basis: &ModalBasis,
    sensors: &[Sensor],
    options: &RankOptions,
) -> Result<StrategicVerdict> {
    if sensors.is_empty() {
        return Err(Error::EmptySensorList);
    }
    if !(options.rank_rtol > 0.0) {
        return Err(Error::InvalidTolerance {
            name: "rank_rtol",
            value: options.rank_rtol,
        });
    }
    let groups = group_eigenvalues(basis, options.group_tol)?;
    if groups.is_empty() {
        return Err(Error::NoGroups);
    }
    let grad = SignatureTable::new(
        basis,
        sensors,
        SignatureMode::Gradient,
        options.form,
        &options.quadrature,
    )?;
    let state = SignatureTable::new(
        basis,
        sensors,
        SignatureMode::State,
        SignatureForm::Summed,
        &options.quadrature,
    )?;
    Ok(StrategicVerdict {
        truncation: basis.truncation(),
        rank_rtol: options.rank_rtol,
        group_tol: options.group_tol,
        sensor_count: sensors.len(),
        max_multiplicity: groups
            .iter()
            .map(EigenGroup::multiplicity)
            .max()
            .unwrap_or(0),
        gradient: suite_verdict(&grad, &groups, options.rank_rtol, sensors.len()),
        state: suite_verdict(&state, &groups, options.rank_rtol, sensors.len()),
    })
}

/// A member `(2k+1)/(2n)` or `k/n` of a forbidden set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Witness {
    pub n: u64,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForbiddenSets {
    pub location: Coord,
    pub max_index: u64,
    pub exact: bool,
    /// `b = k/n`: every mode `n` in the list has `sin(nπb) = 0`.
    pub s_witnesses: Vec<Witness>,
    /// `b = (2k+1)/(2n)`: every mode `n` in the list has `cos(nπb) = 0`.
    pub s_g_witnesses: Vec<Witness>,
}

impl ForbiddenSets {
    pub fn in_s(&self) -> bool {
        !self.s_witnesses.is_empty()
    }

    pub fn in_s_g(&self) -> bool {
        !self.s_g_witnesses.is_empty()
    }
}

/// Membership of `b ∈ (0, 1)` in the state-blind set `S` and the
/// gradient-blind set `S_G`, restricted to mode indices `n <= max_index`.
/// Exact rational locations are decided exactly; otherwise `|sin(nπb)|` and
/// `|cos(nπb)|` are compared with `tol`.
pub fn forbidden_sets_1d(b: Coord, max_index: u64, tol: f64) -> Result<ForbiddenSets> {
    if !(b.value() > 0.0 && b.value() < 1.0) {
        return Err(Error::BoundaryLocation(b.to_string()));
    }
    if max_index == 0 {
        return Err(Error::InvalidTruncation(0));
    }
    match b.exact() {
        Some(r) => Ok(exact_forbidden(b, r, max_index)),
        None => {
            if !(tol > 0.0) {
                return Err(Error::InvalidTolerance {
                    name: "forbidden-set tol",
                    value: tol,
                });
            }
            Ok(numeric_forbidden(b, max_index, tol))
        }
    }
}

fn exact_forbidden(b: Coord, r: Rational64, max_index: u64) -> ForbiddenSets {
    let p = *r.numer() as u64;
    let q = *r.denom() as u64;
    // b = p/q in lowest terms with q >= 2
    let s_witnesses = (1..)
        .map(|j| Witness { n: q * j, k: p * j })
        .take_while(|w| w.n <= max_index)
        .collect();
    let s_g_witnesses = if q.is_multiple_of(2) {
        let h = q / 2;
        (0..)
            .map(|j| {
                let odd = 2 * j + 1;
                Witness {
                    n: h * odd,
                    k: (p * odd - 1) / 2,
                }
            })
            .take_while(|w| w.n <= max_index)
            .collect()
    } else {
        Vec::new()
    };
    ForbiddenSets {
        location: b,
        max_index,
        exact: true,
        s_witnesses,
        s_g_witnesses,
    }
}

fn numeric_forbidden(b: Coord, max_index: u64, tol: f64) -> ForbiddenSets {
    let x0 = b.value();
    let mut s_witnesses = Vec::new();
    let mut s_g_witnesses = Vec::new();
    for n in 1..=max_index {
        let x = n as f64 * x0;
        // |sin(πx)| and |cos(πx)| from the distance to the nearest zero
        let ks = x.round();
        if (std::f64::consts::PI * (x - ks)).sin().abs() <= tol {
            s_witnesses.push(Witness { n, k: ks as u64 });
        }
        let kc = (x - 0.5).round();
        if (std::f64::consts::PI * (x - 0.5 - kc)).sin().abs() <= tol {
            s_g_witnesses.push(Witness { n, k: kc as u64 });
        }
    }
    ForbiddenSets {
        location: b,
        max_index,
        exact: false,
        s_witnesses,
        s_g_witnesses,
    }
}

/// The closed-form placement conditions for the unit rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corollary {
    /// Zonal sensor with weights symmetric about the zone centre.
    SymmetricZone,
    /// Pointwise sensor.
    Pointwise,
    /// Filament symmetric about a line through its centre.
    Filament,
}

impl Corollary {
    pub fn for_sensor(sensor: &Sensor) -> Self {
        match sensor.kind {
            SensorKind::Pointwise { .. } => Corollary::Pointwise,
            SensorKind::Zonal { .. } => Corollary::SymmetricZone,
            SensorKind::Filament { .. } => Corollary::Filament,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Corollary::SymmetricZone => "symmetric-zone",
            Corollary::Pointwise => "pointwise",
            Corollary::Filament => "filament",
        }
    }

    /// Whether the printed condition quantifies over some `(i, j)` rather
    /// than all of them.
    pub fn quantifier_is_some(&self) -> bool {
        !matches!(self, Corollary::Filament)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryVerdict {
    pub corollary: Corollary,
    pub reference_point: Vec<Coord>,
    /// The symmetry hypothesis of the condition holds for the sensor.
    pub hypothesis_holds: bool,
    pub exact: bool,
    pub max_index: usize,
    /// `natural[k][i-1]`: `i(ξ_k − α_k)/(β_k − α_k)` is a natural number (0 included).
    pub natural: [Vec<bool>; 2],
    pub all_pass: bool,
    pub any_pass: bool,
}

impl CorollaryVerdict {
    /// The `(i, j)` condition: neither index ratio is a natural number.
    pub fn pair_passes(&self, i: usize, j: usize) -> bool {
        !self.natural[0][i - 1] && !self.natural[1][j - 1]
    }

    /// The verdict under the quantifier as printed.
    pub fn printed_verdict(&self) -> bool {
        self.hypothesis_holds
            && if self.corollary.quantifier_is_some() {
                self.any_pass
            } else {
                self.all_pass
            }
    }
}

fn exact_value(c: &Coord) -> Option<Rational64> {
    c.exact().or_else(|| {
        let v = c.value();
        (v.fract() == 0.0 && v.abs() < 1e15).then(|| Rational64::from_integer(v as i64))
    })
}

/// Evaluate the closed-form rectangle condition
/// `i(ξ_1 − α_1)/(β_1 − α_1) ∉ N` and `j(ξ_2 − α_2)/(β_2 − α_2) ∉ N` for all
/// `i, j <= max_index`, exactly when every input is rational.
pub fn corollary_condition(
    sensor: &Sensor,
    region: &Subregion,
    corollary: Corollary,
    max_index: usize,
    tol: f64,
) -> Result<CorollaryVerdict> {
    if region.dim() != 2 {
        return Err(Error::CorollaryMismatch {
            corollary: corollary.label(),
            reason: "closed-form conditions are stated for rectangles".into(),
        });
    }
    if Corollary::for_sensor(sensor) != corollary {
        return Err(Error::CorollaryMismatch {
            corollary: corollary.label(),
            reason: format!("sensor is {}", sensor.kind_name()),
        });
    }
    if max_index == 0 {
        return Err(Error::InvalidTruncation(0));
    }
    let (reference, hypothesis_holds): (Vec<Coord>, bool) = match &sensor.kind {
        SensorKind::Pointwise { location } => (location.clone(), true),
        SensorKind::Zonal { lower, upper, .. } => match sensor.symmetry_center() {
            Some(c) => (c.into_iter().map(Coord::real).collect(), true),
            None => (
                lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| Coord::real(0.5 * (a + b)))
                    .collect(),
                false,
            ),
        },
        SensorKind::Filament { points } => match sensor.symmetry_center() {
            Some(c) => (c.into_iter().map(Coord::real).collect(), true),
            None => {
                let n = points.len() as f64;
                let c = (0..2).map(|k| Coord::real(points.iter().map(|p| p[k]).sum::<f64>() / n));
                (c.collect(), false)
            }
        },
    };
    if reference.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: reference.len(),
        });
    }
    let exact_inputs: Option<Vec<(Rational64, Rational64, Rational64)>> = (0..2)
        .map(|k| {
            let (a, b) = &region.bounds()[k];
            Some((
                exact_value(&reference[k])?,
                exact_value(a)?,
                exact_value(b)?,
            ))
        })
        .collect();
    let exact = exact_inputs.is_some();
    let natural: [Vec<bool>; 2] = std::array::from_fn(|k| {
        (1..=max_index)
            .map(|i| match &exact_inputs {
                Some(e) => {
                    let (x, a, b) = e[k];
                    let u = Rational64::from_integer(i as i64) * (x - a) / (b - a);
                    u.is_integer() && !(u < Rational64::zero())
                }
                None => {
                    let u = i as f64 * (reference[k].value() - region.lower(k)) / region.width(k);
                    let r = u.round();
                    r >= 0.0 && (u - r).abs() <= tol * u.abs().max(1.0)
                }
            })
            .collect()
    });
    let all_pass = natural.iter().all(|ax| ax.iter().all(|n| !n));
    let any_pass = natural.iter().all(|ax| ax.iter().any(|n| !n));
    Ok(CorollaryVerdict {
        corollary,
        reference_point: reference,
        hypothesis_holds,
        exact,
        max_index,
        natural,
        all_pass,
        any_pass,
    })
}

/// Modes whose normalised signatures vanish for every row of the table.
pub fn vanishing_modes(table: &SignatureTable, tol: f64) -> Vec<usize> {
    let n = table.normalized.first().map_or(0, Vec::len);
    (0..n)
        .filter(|m| table.normalized.iter().all(|row| row[*m].abs() <= tol))
        .collect()
}

/// Kernel/complement split of the modal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSplit {
    /// Basis positions of the gradient-blind modes.
    pub kernel: Vec<usize>,
    pub complement: Vec<usize>,
}

impl BasisSplit {
    pub fn kernel_modes(&self, basis: &ModalBasis) -> Vec<Mode> {
        self.kernel.iter().map(|m| basis.modes()[*m]).collect()
    }
}

pub fn basis_split(
    basis: &ModalBasis,
    sensors: &[Sensor],
    tol: f64,
    quad: &QuadratureSpec,
) -> Result<BasisSplit> {
    let table = SignatureTable::new(
        basis,
        sensors,
        SignatureMode::Gradient,
        SignatureForm::Summed,
        quad,
    )?;
    let kernel = vanishing_modes(&table, tol);
    let complement = (0..basis.len()).filter(|m| !kernel.contains(m)).collect();
    Ok(BasisSplit { kernel, complement })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualIndependence {
    /// The kernel gradient traces stay linearly independent on `Ω∖ω`.
    pub independent: bool,
    pub min_eigenvalue: f64,
    /// Gram matrix of the kernel gradient traces on `Ω∖ω`.
    pub complement_gram: DMatrix<f64>,
    /// Kernel traces are mutually orthogonal on `ω`.
    pub orthogonal_on_region: bool,
    pub max_offdiag_ratio: f64,
}

/// Gram test of the kernel gradient traces on the complement of `ω`, plus the
/// orthogonality of the same traces on `ω`.
pub fn residual_independence_check(
    kernel: &[usize],
    basis: &ModalBasis,
    region: &Subregion,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<ResidualIndependence> {
    if kernel.is_empty() {
        return Ok(ResidualIndependence {
            independent: true,
            min_eigenvalue: f64::INFINITY,
            complement_gram: DMatrix::zeros(0, 0),
            orthogonal_on_region: true,
            max_offdiag_ratio: 0.0,
        });
    }
    if region.covers(basis.domain()) {
        return Err(Error::ZeroMeasureComplement);
    }
    if let Some(m) = kernel.iter().find(|m| **m >= basis.len()) {
        return Err(Error::UnknownMode(format!("basis position {m}")));
    }
    let inner = select(&gradient_gram(basis, region, quad)?, kernel, kernel);
    let whole = select(
        &gradient_gram(basis, &basis.domain().whole(), quad)?,
        kernel,
        kernel,
    );
    let complement = &whole - &inner;
    let (eig, _) = symmetric_eigen(&complement);
    let min_eigenvalue = eig[0];
    let scale = (0..complement.nrows())
        .map(|i| complement[(i, i)])
        .fold(0.0, f64::max);
    let mut max_offdiag_ratio: f64 = 0.0;
    for i in 0..inner.nrows() {
        for j in 0..inner.ncols() {
            if i != j {
                let d = (inner[(i, i)] * inner[(j, j)]).sqrt();
                let ratio = if d > 0.0 {
                    inner[(i, j)].abs() / d
                } else {
                    0.0
                };
                max_offdiag_ratio = max_offdiag_ratio.max(ratio);
            }
        }
    }
    Ok(ResidualIndependence {
        independent: scale > 0.0 && min_eigenvalue > tol * scale,
        min_eigenvalue,
        complement_gram: complement,
        orthogonal_on_region: max_offdiag_ratio <= tol,
        max_offdiag_ratio,
    })
}

/// Exact value `p/q` of a location, reduced, when the coordinate carries one.
pub fn as_fraction(c: &Coord) -> Option<(i64, i64)> {
    c.exact().map(|r| (*r.numer(), *r.denom()))
}

/// Float view of an exact rational.
pub fn ratio_value(r: Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
