//! Scenario files: flat `key = value` lines with dotted section names.
//!
//! The full key list lives in `docs/scenario.md`.

use std::collections::BTreeMap;
use std::path::Path;

use gradsense_core::gramian::DEFAULT_MARGIN_TOL;
use gradsense_core::strategic::{DEFAULT_GROUP_TOL, DEFAULT_RANK_RTOL, DEFAULT_VANISH_TOL};
use gradsense_core::{
    build_basis, validate_sensor, Adaptation, Coefficients, Coord, Domain, ModalBasis, Noise,
    QuadratureSpec, Regularization, Sensor, SignatureForm, SignatureMode, Subregion, TimeGrid,
    Weight,
};

use crate::error::CliError;

pub const DEFAULT_FORBIDDEN_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_FIELD_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub group: f64,
    pub rank: f64,
    pub margin: f64,
    pub forbidden: f64,
    pub identifiability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            group: DEFAULT_GROUP_TOL,
            rank: DEFAULT_RANK_RTOL,
            margin: DEFAULT_MARGIN_TOL,
            forbidden: DEFAULT_FORBIDDEN_TOL,
            identifiability: DEFAULT_VANISH_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub domain: Domain,
    pub region: Subregion,
    pub truncation: usize,
    pub adapted: bool,
    pub basis: ModalBasis,
    /// Sensor names in file order, with the validated sensors.
    pub sensor_names: Vec<String>,
    pub sensors: Vec<Sensor>,
    pub horizon: f64,
    pub times: TimeGrid,
    /// `None` means the command's own default.
    pub signature_mode: Option<SignatureMode>,
    pub signature_form: SignatureForm,
    pub tolerances: Tolerances,
    pub noise: Option<Noise>,
    pub initial: Option<Coefficients>,
    pub regularization: Regularization,
    pub field_points: usize,
    pub quadrature: QuadratureSpec,
    pub scan_grid: Option<String>,
    /// Every key as written, in file order, for echoing into reports.
    pub entries: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

const TOP_KEYS: &[&str] = &[
    "domain.kind",
    "domain.lengths",
    "region.bounds",
    "basis.truncation",
    "basis.adaptation",
    "horizon",
    "time.samples",
    "time.points",
    "signature.mode",
    "signature.form",
    "tolerance.group",
    "tolerance.rank",
    "tolerance.margin",
    "tolerance.forbidden",
    "tolerance.identifiability",
    "noise.stddev",
    "noise.seed",
    "initial.coefficients",
    "reconstruct.regularization",
    "reconstruct.points",
    "quadrature.order",
    "quadrature.panels",
    "scan.grid",
];

const SENSOR_FIELDS: &[&str] = &[
    "kind",
    "location",
    "box",
    "weight",
    "weight.center",
    "weight.shape",
    "weight.values",
    "points",
    "gain",
];

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    let mut order = Vec::new();
    let mut sensor_ids: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(CliError::Parse {
                line,
                message: "empty key".into(),
            });
        }
        if let Some(rest) = key.strip_prefix("sensor.") {
            let (id, field) = rest.split_once('.').ok_or_else(|| CliError::Parse {
                line,
                message: format!("unknown key `{key}`"),
            })?;
            if id.is_empty() || !SENSOR_FIELDS.contains(&field) {
                return Err(CliError::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if !sensor_ids.iter().any(|s| s == id) {
                sensor_ids.push(id.to_string());
            }
        } else if !TOP_KEYS.contains(&key.as_str()) {
            return Err(CliError::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if let Some(prev) = map.get(&key) {
            return Err(CliError::Parse {
                line,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
        order.push((key.clone(), value.clone()));
        map.insert(key, Entry { line, value });
    }
    Builder { map }.build(sensor_ids, order)
}

struct Builder {
    map: BTreeMap<String, Entry>,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

impl Builder {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.value.as_str())
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| invalid(key, "missing required key"))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| invalid(key, format!("`{v}` is not a valid number")))
            })
            .transpose()
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.number::<f64>(key)?.unwrap_or(default);
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(key, format!("must be strictly positive, got {v}")));
        }
        Ok(v)
    }

    fn reals(&self, key: &str, value: &str) -> Result<Vec<f64>, CliError> {
        split_list(value)
            .iter()
            .map(|t| {
                t.parse::<Coord>()
                    .map(|c| c.value())
                    .map_err(|e| invalid(key, e))
            })
            .collect()
    }

    fn coords(&self, key: &str, value: &str) -> Result<Vec<Coord>, CliError> {
        split_list(value)
            .iter()
            .map(|t| t.parse::<Coord>().map_err(|e| invalid(key, e)))
            .collect()
    }

    /// `a, b` or `a1, b1; a2, b2`.
    fn bounds(&self, key: &str, value: &str) -> Result<Vec<(Coord, Coord)>, CliError> {
        value
            .split(';')
            .map(|axis| {
                let c = self.coords(key, axis)?;
                if c.len() != 2 {
                    return Err(invalid(
                        key,
                        format!("each axis needs `lower, upper`, got `{}`", axis.trim()),
                    ));
                }
                Ok((c[0], c[1]))
            })
            .collect()
    }

    fn build(
        self,
        sensor_ids: Vec<String>,
        entries: Vec<(String, String)>,
    ) -> Result<Scenario, CliError> {
        let lengths = match self.get("domain.lengths") {
            Some(v) => self.reals("domain.lengths", v)?,
            None => vec![1.0],
        };
        let kind = self.get("domain.kind").unwrap_or(if lengths.len() == 2 {
            "rectangle"
        } else {
            "interval"
        });
        let expected = match kind {
            "interval" => 1,
            "rectangle" => 2,
            other => {
                return Err(invalid(
                    "domain.kind",
                    format!("expected `interval` or `rectangle`, got `{other}`"),
                ))
            }
        };
        let lengths = match (lengths.len(), expected) {
            (1, 2) => vec![lengths[0]; 2],
            (a, b) if a == b => lengths,
            (a, b) => {
                return Err(invalid(
                    "domain.lengths",
                    format!("{kind} needs {b} lengths, got {a}"),
                ))
            }
        };
        let domain = Domain::new(lengths).map_err(|e| invalid("domain.lengths", e.to_string()))?;

        let region = match self.get("region.bounds") {
            Some(v) => Subregion::new(self.bounds("region.bounds", v)?)
                .map_err(|e| invalid("region.bounds", e.to_string()))?,
            None => domain.whole(),
        };
        if region.dim() != domain.dim() {
            return Err(invalid(
                "region.bounds",
                format!("expected {} axes, got {}", domain.dim(), region.dim()),
            ));
        }
        region
            .check_inside(&domain)
            .map_err(|e| invalid("region.bounds", e.to_string()))?;

        let truncation_raw = self.required("basis.truncation")?;
        let truncation: usize =
            truncation_raw
                .parse()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| {
                    invalid(
                        "basis.truncation",
                        format!("must be a positive integer, got `{truncation_raw}`"),
                    )
                })?;
        let adapted = match self.get("basis.adaptation").unwrap_or("global") {
            "global" => false,
            "region" => true,
            other => {
                return Err(invalid(
                    "basis.adaptation",
                    format!("expected `global` or `region`, got `{other}`"),
                ))
            }
        };
        let adaptation = if adapted {
            Adaptation::Subregion(region.clone())
        } else {
            Adaptation::Global
        };
        let basis = build_basis(&domain, truncation, adaptation)
            .map_err(|e| invalid("basis.truncation", e.to_string()))?;

        let mut sensors = Vec::new();
        for id in &sensor_ids {
            let s = self.sensor(id, &domain)?;
            sensors.push(s);
        }

        let horizon = self.positive("horizon", 1.0)?;
        let times = match (
            self.get("time.points"),
            self.number::<usize>("time.samples")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "time.samples",
                    "give either `time.samples` or `time.points`",
                ))
            }
            (Some(v), None) => {
                let pts = self.reals("time.points", v)?;
                TimeGrid::new(horizon, pts).map_err(|e| invalid("time.points", e.to_string()))?
            }
            (None, m) => {
                let m = m.unwrap_or(DEFAULT_SAMPLES);
                TimeGrid::uniform(horizon, m).map_err(|e| invalid("time.samples", e.to_string()))?
            }
        };

        let signature_mode = self
            .get("signature.mode")
            .map(|v| match v {
                "gradient" => Ok(SignatureMode::Gradient),
                "state" => Ok(SignatureMode::State),
                other => Err(invalid(
                    "signature.mode",
                    format!("expected `gradient` or `state`, got `{other}`"),
                )),
            })
            .transpose()?;
        let signature_form = match self.get("signature.form").unwrap_or("summed") {
            "summed" => SignatureForm::Summed,
            "componentwise" => SignatureForm::Componentwise,
            other => {
                return Err(invalid(
                    "signature.form",
                    format!("expected `summed` or `componentwise`, got `{other}`"),
                ))
            }
        };
        let d = Tolerances::default();
        let tolerances = Tolerances {
            group: self.positive("tolerance.group", d.group)?,
            rank: self.positive("tolerance.rank", d.rank)?,
            margin: self.positive("tolerance.margin", d.margin)?,
            forbidden: self.positive("tolerance.forbidden", d.forbidden)?,
            identifiability: self.positive("tolerance.identifiability", d.identifiability)?,
        };

        let noise = match self.get("noise.stddev") {
            None => {
                if self.get("noise.seed").is_some() {
                    return Err(invalid("noise.seed", "set `noise.stddev` as well"));
                }
                None
            }
            Some(_) => Some(Noise {
                stddev: self.positive("noise.stddev", 0.0)?,
                seed: self.number::<u64>("noise.seed")?.unwrap_or(0),
            }),
        };

        let initial = match self.get("initial.coefficients") {
            None => None,
            Some(v) => {
                let a = self.reals("initial.coefficients", v)?;
                if a.len() != basis.len() {
                    return Err(invalid(
                        "initial.coefficients",
                        format!(
                            "expected {} coefficients (one per mode), got {}",
                            basis.len(),
                            a.len()
                        ),
                    ));
                }
                Some(Coefficients(a))
            }
        };
        let regularization = match self.get("reconstruct.regularization") {
            None => Regularization::default(),
            Some(v) => {
                parse_regularization(v).map_err(|m| invalid("reconstruct.regularization", m))?
            }
        };
        let field_points = self
            .number::<usize>("reconstruct.points")?
            .unwrap_or(DEFAULT_FIELD_POINTS);
        if field_points == 0 {
            return Err(invalid("reconstruct.points", "must be at least 1"));
        }
        let qd = QuadratureSpec::default();
        let quadrature = QuadratureSpec::new(
            self.number::<usize>("quadrature.order")?
                .unwrap_or(qd.order),
            self.number::<usize>("quadrature.panels")?
                .unwrap_or(qd.panels),
        )
        .map_err(|e| invalid("quadrature.order", e.to_string()))?;

        Ok(Scenario {
            domain,
            region,
            truncation,
            adapted,
            basis,
            sensor_names: sensor_ids,
            sensors,
            horizon,
            times,
            signature_mode,
            signature_form,
            tolerances,
            noise,
            initial,
            regularization,
            field_points,
            quadrature,
            scan_grid: self.get("scan.grid").map(str::to_string),
            entries,
        })
    }

    fn sensor(&self, id: &str, domain: &Domain) -> Result<Sensor, CliError> {
        let key = |f: &str| format!("sensor.{id}.{f}");
        let kind_key = key("kind");
        let kind = self.get(&kind_key).unwrap_or("pointwise");
        let allowed: &[&str] = match kind {
            "pointwise" => &["kind", "location", "gain"],
            "zonal" => &[
                "kind",
                "box",
                "weight",
                "weight.center",
                "weight.shape",
                "weight.values",
                "gain",
            ],
            "filament" => &["kind", "points", "gain"],
            other => {
                return Err(invalid(
                    &kind_key,
                    format!("expected `pointwise`, `zonal` or `filament`, got `{other}`"),
                ))
            }
        };
        for f in SENSOR_FIELDS {
            if !allowed.contains(f) && self.get(&key(f)).is_some() {
                return Err(invalid(&key(f), format!("not used by {kind} sensors")));
            }
        }
        let sensor = match kind {
            "pointwise" => {
                let k = key("location");
                let loc = self.coords(&k, self.required(&k)?)?;
                Sensor::pointwise(loc)
            }
            "zonal" => {
                let k = key("box");
                let b = self.bounds(&k, self.required(&k)?)?;
                let lower: Vec<f64> = b.iter().map(|(l, _)| l.value()).collect();
                let upper: Vec<f64> = b.iter().map(|(_, u)| u.value()).collect();
                let wk = key("weight");
                let weight = match self.get(&wk).unwrap_or("uniform") {
                    "uniform" => Weight::Uniform,
                    "bump" => {
                        let ck = key("weight.center");
                        let center = match self.get(&ck) {
                            Some(v) => self.reals(&ck, v)?,
                            None => lower
                                .iter()
                                .zip(&upper)
                                .map(|(a, b)| 0.5 * (a + b))
                                .collect(),
                        };
                        Weight::Bump { center }
                    }
                    "tabulated" => {
                        let sk = key("weight.shape");
                        let shape = split_list(self.required(&sk)?)
                            .iter()
                            .map(|t| {
                                t.parse::<usize>()
                                    .map_err(|_| invalid(&sk, format!("`{t}` is not a count")))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        let vk = key("weight.values");
                        let values = self.reals(&vk, self.required(&vk)?)?;
                        Weight::Tabulated { shape, values }
                    }
                    other => {
                        return Err(invalid(
                            &wk,
                            format!("expected `uniform`, `bump` or `tabulated`, got `{other}`"),
                        ))
                    }
                };
                Sensor::zonal(lower, upper, weight)
            }
            _ => {
                let k = key("points");
                let pts = self
                    .required(&k)?
                    .split(';')
                    .map(|p| self.reals(&k, p))
                    .collect::<Result<Vec<_>, _>>()?;
                Sensor::filament(pts)
            }
        };
        let gain = self.number::<f64>(&key("gain"))?.unwrap_or(1.0);
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(invalid(
                &key("gain"),
                format!("must be strictly positive, got {gain}"),
            ));
        }
        let sensor = sensor.with_gain(gain);
        validate_sensor(&sensor, domain)
            .map_err(|e| invalid(&format!("sensor.{id}"), e.to_string()))
    }
}

/// `none`, `tikhonov(λ)` or `discrepancy(δ)`.
pub fn parse_regularization(v: &str) -> Result<Regularization, String> {
    let v = v.trim();
    if v == "none" {
        return Ok(Regularization::None);
    }
    let (name, arg) = v
        .strip_suffix(')')
        .and_then(|s| s.split_once('('))
        .ok_or_else(|| format!("expected `none`, `tikhonov(λ)` or `discrepancy(δ)`, got `{v}`"))?;
    let x: f64 = arg
        .trim()
        .parse()
        .map_err(|_| format!("`{arg}` is not a number"))?;
    match name.trim() {
        "tikhonov" if x >= 0.0 => Ok(Regularization::Tikhonov(x)),
        "discrepancy" if x > 0.0 => Ok(Regularization::Discrepancy { noise_level: x }),
        "tikhonov" | "discrepancy" => Err(format!("parameter must be positive, got {x}")),
        other => Err(format!("unknown regularisation `{other}`")),
    }
}

pub fn regularization_label(r: &Regularization) -> String {
    match r {
        Regularization::None => "none".into(),
        Regularization::Tikhonov(l) => format!("tikhonov({l:e})"),
        Regularization::Discrepancy { noise_level } => format!("discrepancy({noise_level:e})"),
    }
}
