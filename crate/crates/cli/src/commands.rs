//! Command dispatch. Each command turns a scenario into a [`Report`].

use num_rational::Rational64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use gradsense_core::strategic::{Witness, DEFAULT_VANISH_TOL};
use gradsense_core::{
    assemble_gramian, basis_split, corollary_condition, estimate_coefficients, forbidden_sets_1d,
    gradient_field_on_region, observability_constant, rank_test, reconstruction_error,
    residual_independence_check, simulate_output, Adaptation, Coord, Corollary, EstimateOptions,
    FailureReason, ForbiddenSets, GramianOptions, GridSpec, ModalBasis, ObservabilityConstant,
    RankOptions, Sensor, SensorKind, SignatureMode, SimulationOptions, StrategicVerdict,
    SuiteVerdict,
};

use crate::error::CliError;
use crate::grid::parse_grid;
use crate::report::{num, nums, Cell, Report, Table};
use crate::scenario::{regularization_label, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Check,
    Gramian,
    Simulate,
    Reconstruct,
    Scan,
    Split,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Gramian => "gramian",
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::Scan => "scan",
            Command::Split => "split",
        }
    }
}

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub grid: Option<String>,
    pub seed: Option<u64>,
}

pub fn run_command(
    scenario: &Scenario,
    command: Command,
    options: &RunOptions,
) -> Result<Report, CliError> {
    let mut scenario = scenario.clone();
    if let (Some(seed), Some(noise)) = (options.seed, scenario.noise.as_mut()) {
        noise.seed = seed;
    }
    let (results, table) = match command {
        Command::Check => check(&scenario)?,
        Command::Gramian => gramian(&scenario)?,
        Command::Simulate => simulate(&scenario)?,
        Command::Reconstruct => reconstruct(&scenario)?,
        Command::Scan => {
            let spec = options
                .grid
                .clone()
                .or_else(|| scenario.scan_grid.clone())
                .ok_or_else(|| {
                    CliError::Usage(
                        "scan needs `--grid <spec>` or `scan.grid` in the scenario".into(),
                    )
                })?;
            location_scan(&scenario, &spec)?
        }
        Command::Split => split(&scenario)?,
    };
    let mut body = Map::new();
    body.insert("tool".into(), json!("gradsense"));
    body.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    body.insert("command".into(), json!(command.name()));
    body.insert("scenario".into(), scenario_echo(&scenario));
    body.insert("settings".into(), settings(&scenario, command));
    body.insert("results".into(), results);
    Ok(Report {
        command: command.name().into(),
        body,
        table,
    })
}

fn scenario_echo(s: &Scenario) -> Value {
    Value::Object(
        s.entries
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect(),
    )
}

fn default_mode(command: Command) -> SignatureMode {
    match command {
        Command::Simulate | Command::Reconstruct => SignatureMode::State,
        _ => SignatureMode::Gradient,
    }
}

fn mode_label(m: SignatureMode) -> &'static str {
    match m {
        SignatureMode::Gradient => "gradient",
        SignatureMode::State => "state",
    }
}

fn settings(s: &Scenario, command: Command) -> Value {
    let t = &s.tolerances;
    json!({
        "domain_lengths": nums(s.domain.lengths()),
        "region": s.region.to_string(),
        "truncation": s.truncation,
        "modes": s.basis.len(),
        "adaptation": if s.adapted { "region" } else { "global" },
        "horizon": num(s.horizon),
        "samples": s.times.len(),
        "signature_mode": mode_label(s.signature_mode.unwrap_or(default_mode(command))),
        "signature_form": match s.signature_form {
            gradsense_core::SignatureForm::Summed => "summed",
            gradsense_core::SignatureForm::Componentwise => "componentwise",
        },
        "tolerances": {
            "group": num(t.group),
            "rank": num(t.rank),
            "margin": num(t.margin),
            "forbidden": num(t.forbidden),
            "identifiability": num(t.identifiability),
        },
        "quadrature": { "order": s.quadrature.order, "panels": s.quadrature.panels },
        "noise": s.noise.map(|n| json!({ "stddev": num(n.stddev), "seed": n.seed })),
        "regularization": regularization_label(&s.regularization),
    })
}

fn rank_options(s: &Scenario) -> RankOptions {
    RankOptions {
        rank_rtol: s.tolerances.rank,
        group_tol: s.tolerances.group,
        form: s.signature_form,
        quadrature: s.quadrature,
    }
}

fn gramian_options(s: &Scenario, mode: SignatureMode) -> GramianOptions {
    GramianOptions {
        signature_mode: mode,
        margin_tol: s.tolerances.margin,
        quadrature: s.quadrature,
        ..Default::default()
    }
}

fn require_sensors(s: &Scenario) -> Result<(), CliError> {
    if s.sensors.is_empty() {
        return Err(CliError::Validation {
            field: "sensor".into(),
            message: "no sensors defined".into(),
        });
    }
    Ok(())
}

fn mode_names(basis: &ModalBasis, positions: &[usize]) -> Value {
    Value::Array(
        positions
            .iter()
            .map(|m| json!(basis.modes()[*m].to_string()))
            .collect(),
    )
}

fn suite_json(v: &SuiteVerdict) -> Value {
    let reason = match &v.reason {
        None => Value::Null,
        Some(FailureReason::TooFewSensors {
            sensors,
            max_multiplicity,
        }) => json!({
            "kind": "too_few_sensors",
            "detail": format!("q = {sensors} < r = {max_multiplicity}"),
            "sensors": sensors,
            "max_multiplicity": max_multiplicity,
        }),
        Some(FailureReason::RankDeficient {
            group,
            eigenvalue,
            rank,
            multiplicity,
        }) => json!({
            "kind": "rank_deficient",
            "group": group,
            "eigenvalue": num(*eigenvalue),
            "rank": rank,
            "multiplicity": multiplicity,
        }),
    };
    let first_failure = v.first_failure.map(|g| {
        let grp = &v.groups[g];
        json!({
            "group": g,
            "eigenvalue": num(grp.eigenvalue),
            "modes": grp.modes.iter().map(ToString::to_string).collect::<Vec<_>>(),
        })
    });
    let groups: Vec<Value> = v
        .groups
        .iter()
        .map(|g| {
            json!({
                "eigenvalue": num(g.eigenvalue),
                "modes": g.modes.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "multiplicity": g.multiplicity,
                "rank": g.rank,
                "passed": g.passed,
                "marginal": g.marginal,
                "singular_values": nums(&g.singular_values),
            })
        })
        .collect();
    json!({
        "strategic": v.strategic,
        "enough_sensors": v.enough_sensors,
        "any_member_strategic": v.any_member,
        "marginal": v.marginal,
        "reason": reason,
        "first_failure": first_failure,
        "groups": groups,
    })
}

fn witnesses_json(w: &[Witness]) -> Value {
    Value::Array(w.iter().map(|w| json!({ "n": w.n, "k": w.k })).collect())
}

/// Location divided by the interval length, exact when both allow it.
fn unit_location(b: &Coord, length: f64) -> Coord {
    match b.exact() {
        Some(r) if length.fract() == 0.0 && length < i64::MAX as f64 => {
            Coord::from(r / Rational64::from_integer(length as i64))
        }
        _ => Coord::real(b.value() / length),
    }
}

fn closed_form_1d(s: &Scenario, verdict: &StrategicVerdict) -> Result<Value, CliError> {
    let applicable = matches!(s.basis.adaptation(), Adaptation::Global)
        && s.sensors
            .iter()
            .all(|x| matches!(x.kind, SensorKind::Pointwise { .. }));
    if !applicable {
        return Ok(json!({
            "applicable": false,
            "note": "closed-form sets cover pointwise sensors with the global basis only",
        }));
    }
    let n_max = s.truncation as u64;
    let sets: Vec<ForbiddenSets> = s
        .sensors
        .iter()
        .map(|x| {
            let SensorKind::Pointwise { location } = &x.kind else {
                unreachable!()
            };
            forbidden_sets_1d(
                unit_location(&location[0], s.domain.length(0)),
                n_max,
                s.tolerances.forbidden,
            )
        })
        .collect::<Result<_, _>>()?;
    // a mode is blind for the suite when every sensor is blind to it
    let blind_for_all = |pick: fn(&ForbiddenSets) -> &Vec<Witness>| -> Vec<u64> {
        (1..=n_max)
            .filter(|n| sets.iter().all(|f| pick(f).iter().any(|w| w.n == *n)))
            .collect()
    };
    let grad_blind = blind_for_all(|f| &f.s_g_witnesses);
    let state_blind = blind_for_all(|f| &f.s_witnesses);
    let predicted_gradient = grad_blind.is_empty();
    let predicted_state = state_blind.is_empty();
    let sensors: Vec<Value> = s
        .sensor_names
        .iter()
        .zip(&sets)
        .map(|(name, f)| {
            json!({
                "sensor": name,
                "location": f.location.to_string(),
                "exact": f.exact,
                "in_S": f.in_s(),
                "in_S_G": f.in_s_g(),
                "S_witnesses": witnesses_json(&f.s_witnesses),
                "S_G_witnesses": witnesses_json(&f.s_g_witnesses),
            })
        })
        .collect();
    Ok(json!({
        "applicable": true,
        "sensors": sensors,
        "gradient_blind_modes": grad_blind,
        "state_blind_modes": state_blind,
        "predicted_gradient_strategic": predicted_gradient,
        "predicted_state_strategic": predicted_state,
        "gradient_agrees": predicted_gradient == verdict.gradient_strategic(),
        "state_agrees": predicted_state == verdict.state_strategic(),
    }))
}

fn corollaries_2d(s: &Scenario) -> Result<Value, CliError> {
    let opts = rank_options(s);
    let mut out = Vec::new();
    let mut all_agree = true;
    for (name, sensor) in s.sensor_names.iter().zip(&s.sensors) {
        let c = Corollary::for_sensor(sensor);
        let v = corollary_condition(sensor, &s.region, c, s.truncation, s.tolerances.forbidden)?;
        let single = rank_test(&s.basis, std::slice::from_ref(sensor), &opts)?;
        let agrees = v.printed_verdict() == single.gradient_strategic();
        all_agree &= agrees;
        out.push(json!({
            "sensor": name,
            "corollary": c.label(),
            "reference_point": v.reference_point.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "hypothesis_holds": v.hypothesis_holds,
            "exact": v.exact,
            "quantifier": if c.quantifier_is_some() { "some" } else { "all" },
            "all_pass": v.all_pass,
            "any_pass": v.any_pass,
            "printed_verdict": v.printed_verdict(),
            "rank_test_gradient_strategic": single.gradient_strategic(),
            "agrees": agrees,
        }));
    }
    Ok(json!({ "sensors": out, "all_agree": all_agree }))
}

fn check(s: &Scenario) -> Result<(Value, Table), CliError> {
    require_sensors(s)?;
    let v = rank_test(&s.basis, &s.sensors, &rank_options(s))?;
    let closed = if s.domain.dim() == 1 {
        closed_form_1d(s, &v)?
    } else {
        corollaries_2d(s)?
    };
    let results = json!({
        "truncation": v.truncation,
        "sensor_count": v.sensor_count,
        "max_multiplicity": v.max_multiplicity,
        "gradient_strategic": v.gradient_strategic(),
        "state_strategic": v.state_strategic(),
        "marginal": v.gradient.marginal || v.state.marginal,
        "gradient": suite_json(&v.gradient),
        "state": suite_json(&v.state),
        "closed_form": closed,
    });
    let table = Table {
        header: [
            "eigenvalue",
            "modes",
            "multiplicity",
            "gradient_rank",
            "gradient_pass",
            "state_rank",
            "state_pass",
        ]
        .map(String::from)
        .to_vec(),
        rows: v
            .gradient
            .groups
            .iter()
            .zip(&v.state.groups)
            .map(|(g, st)| {
                vec![
                    Cell::Num(g.eigenvalue),
                    Cell::Text(
                        g.modes
                            .iter()
                            .map(ToString::to_string)
                            .collect::<Vec<_>>()
                            .join(" "),
                    ),
                    Cell::Count(g.multiplicity),
                    Cell::Count(g.rank),
                    Cell::Bool(g.passed),
                    Cell::Count(st.rank),
                    Cell::Bool(st.passed),
                ]
            })
            .collect(),
    };
    Ok((results, table))
}

fn constant_json(c: ObservabilityConstant) -> (Value, bool) {
    match c {
        ObservabilityConstant::Finite(x) => (num(x), true),
        ObservabilityConstant::Infinite => (Value::Null, false),
    }
}

fn gramian(s: &Scenario) -> Result<(Value, Table), CliError> {
    require_sensors(s)?;
    let mode = s.signature_mode.unwrap_or(SignatureMode::Gradient);
    let r = assemble_gramian(
        &s.basis,
        &s.sensors,
        &s.region,
        s.horizon,
        &gramian_options(s, mode),
    )?;
    let (c, finite) = constant_json(observability_constant(&r));
    let results = json!({
        "signature_mode": mode_label(mode),
        "horizon": num(r.horizon),
        "truncation": r.truncation,
        "margin": num(r.margin),
        "margin_tol": num(r.margin_tol),
        "positive_definite": r.positive_definite,
        "observability_constant": c,
        "constant_finite": finite,
        "note": if finite { Value::Null } else { json!("not exactly gradient observable on the region at this truncation") },
        "decoupled_margin": num(r.decoupled_margin),
        "w_rank": r.w_rank,
        "w_deficient": r.w_deficient,
        "zero_signatures": r.zero_signatures,
        "a_diagonal": nums(&r.a.diagonal().iter().copied().collect::<Vec<_>>()),
    });
    let table = Table {
        header: [
            "margin",
            "positive_definite",
            "observability_constant",
            "decoupled_margin",
            "w_rank",
        ]
        .map(String::from)
        .to_vec(),
        rows: vec![vec![
            Cell::Num(r.margin),
            Cell::Bool(r.positive_definite),
            Cell::Num(observability_constant(&r).value()),
            Cell::Num(r.decoupled_margin),
            Cell::Count(r.w_rank),
        ]],
    };
    Ok((results, table))
}

fn require_initial(s: &Scenario) -> Result<&gradsense_core::Coefficients, CliError> {
    s.initial.as_ref().ok_or_else(|| CliError::Validation {
        field: "initial.coefficients".into(),
        message: "required by this command".into(),
    })
}

fn simulate(s: &Scenario) -> Result<(Value, Table), CliError> {
    require_sensors(s)?;
    let a = require_initial(s)?;
    let mode = s.signature_mode.unwrap_or(SignatureMode::State);
    let opts = SimulationOptions {
        signature_mode: mode,
        noise: s.noise,
        quadrature: s.quadrature,
    };
    let y = simulate_output(&s.basis, a, &s.sensors, &s.times, &opts)?;
    let series: Vec<Value> = s
        .sensor_names
        .iter()
        .zip(&y.values)
        .map(|(n, v)| json!({ "sensor": n, "values": nums(v) }))
        .collect();
    let results = json!({
        "signature_mode": mode_label(mode),
        "times": nums(s.times.times()),
        "series": series,
    });
    let mut header = vec!["t".to_string()];
    header.extend(s.sensor_names.iter().cloned());
    let rows = s
        .times
        .times()
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let mut row = vec![Cell::Num(*t)];
            row.extend(y.values.iter().map(|r| Cell::Num(r[j])));
            row
        })
        .collect();
    Ok((results, Table { header, rows }))
}

fn reconstruct(s: &Scenario) -> Result<(Value, Table), CliError> {
    require_sensors(s)?;
    let truth = require_initial(s)?;
    let mode = s.signature_mode.unwrap_or(SignatureMode::State);
    let sim = SimulationOptions {
        signature_mode: mode,
        noise: s.noise,
        quadrature: s.quadrature,
    };
    let y = simulate_output(&s.basis, truth, &s.sensors, &s.times, &sim)?;
    let opts = EstimateOptions {
        signature_mode: mode,
        regularization: s.regularization,
        identifiability_tol: s.tolerances.identifiability,
        quadrature: s.quadrature,
    };
    let e = estimate_coefficients(&y, &s.basis, &s.sensors, &opts)?;
    let field = gradient_field_on_region(
        &s.basis,
        &e.coefficients,
        &s.region,
        &GridSpec::Uniform(s.field_points),
    )?;
    let err = reconstruction_error(truth, &e.coefficients, &s.basis, &s.region, &s.quadrature)?;
    let dim = field.dim();
    let points: Vec<Value> = (0..field.len()).map(|i| nums(field.point(i))).collect();
    let values: Vec<Value> = (0..field.len()).map(|i| nums(field.value(i))).collect();
    let results = json!({
        "signature_mode": mode_label(mode),
        "regularization": regularization_label(&s.regularization),
        "regularization_used": num(e.regularization),
        "modes": s.basis.modes().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "estimate": nums(e.coefficients.as_slice()),
        "truth": nums(truth.as_slice()),
        "unidentifiable_modes": mode_names(&s.basis, &e.unidentifiable),
        "residual_norm": num(e.residual_norm),
        "condition_number": num(e.condition_number),
        "scaled_condition_number": num(e.scaled_condition_number),
        "errors": {
            "region": num(err.region),
            "whole": num(err.whole),
            "relative_coefficient": num(truth.sub(&e.coefficients).norm() / truth.norm()),
        },
        "field": { "points": points, "gradient": values },
    });
    let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    header.extend((1..=dim).map(|k| format!("g{k}")));
    let rows = (0..field.len())
        .map(|i| {
            field
                .point(i)
                .iter()
                .chain(field.value(i))
                .map(|v| Cell::Num(*v))
                .collect()
        })
        .collect();
    Ok((results, Table { header, rows }))
}

/// Nearest member `k/n` (or `(2k+1)/(2n)` when `half`) with `n <= n_max`.
fn nearest_member(x: f64, n_max: usize, half: bool) -> (String, f64) {
    let mut best = (String::new(), f64::INFINITY);
    for n in 1..=n_max {
        let (num_scale, den) = if half { (2 * n, 2 * n) } else { (n, n) };
        let k = if half {
            ((x * num_scale as f64 - 1.0) / 2.0).round().max(0.0) as usize
        } else {
            (x * n as f64).round() as usize
        };
        let numer = if half { 2 * k + 1 } else { k };
        if numer == 0 || numer >= den {
            continue;
        }
        let d = (x - numer as f64 / den as f64).abs();
        if d < best.1 {
            let g = gcd(numer, den);
            best = (format!("{}/{}", numer / g, den / g), d);
        }
    }
    best
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn location_scan(s: &Scenario, spec: &str) -> Result<(Value, Table), CliError> {
    let points = parse_grid(spec, &s.domain)?;
    let dim = s.domain.dim();
    // half the smallest spacing between distinct candidates, per axis
    let resolution: f64 = (0..dim)
        .map(|k| {
            let mut v: Vec<f64> = points.iter().map(|p| p[k].value()).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
                / 2.0
        })
        .fold(f64::INFINITY, f64::min);
    let opts = rank_options(s);
    let gopts = gramian_options(s, s.signature_mode.unwrap_or(SignatureMode::Gradient));
    let rows: Vec<(Vec<Coord>, bool, bool, f64)> = points
        .par_iter()
        .map(|p| {
            let sensor = [Sensor::pointwise(p.clone())];
            let v = rank_test(&s.basis, &sensor, &opts)?;
            let g = assemble_gramian(&s.basis, &sensor, &s.region, s.horizon, &gopts)?;
            Ok((
                p.clone(),
                v.state_strategic(),
                v.gradient_strategic(),
                g.margin,
            ))
        })
        .collect::<Result<_, gradsense_core::Error>>()?;
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|(p, st, gr, m)| {
            let mut row = json!({
                "location": p.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "state_strategic": st,
                "gradient_strategic": gr,
                "margin": num(*m),
            });
            if dim == 1 {
                let x = p[0].value() / s.domain.length(0);
                let near = |half| {
                    let (label, d) = nearest_member(x, s.truncation, half);
                    if d <= resolution / s.domain.length(0) {
                        json!({ "member": label, "distance": num(d) })
                    } else {
                        Value::Null
                    }
                };
                row["nearest_S"] = near(false);
                row["nearest_S_G"] = near(true);
            }
            row
        })
        .collect();
    let table = Table {
        header: [
            "b1",
            "b2",
            "state_strategic",
            "gradient_strategic",
            "margin",
        ]
        .map(String::from)
        .to_vec(),
        rows: rows
            .iter()
            .map(|(p, st, gr, m)| {
                vec![
                    Cell::Num(p[0].value()),
                    p.get(1).map_or(Cell::Empty, |c| Cell::Num(c.value())),
                    Cell::Bool(*st),
                    Cell::Bool(*gr),
                    Cell::Num(*m),
                ]
            })
            .collect(),
    };
    let results = json!({
        "grid": spec,
        "candidates": rows.len(),
        "resolution": if resolution.is_finite() { num(resolution) } else { Value::Null },
        "rows": json_rows,
    });
    Ok((results, table))
}

fn split(s: &Scenario) -> Result<(Value, Table), CliError> {
    require_sensors(s)?;
    let tol = s.tolerances.identifiability;
    let sp = basis_split(&s.basis, &s.sensors, tol, &s.quadrature)?;
    let residual = if s.region.covers(&s.domain) {
        Value::Null
    } else {
        let r = residual_independence_check(
            &sp.kernel,
            &s.basis,
            &s.region,
            &s.quadrature,
            DEFAULT_VANISH_TOL,
        )?;
        json!({
            "independent_off_region": r.independent,
            "min_eigenvalue": num(r.min_eigenvalue),
            "orthogonal_on_region": r.orthogonal_on_region,
            "max_offdiag_ratio": num(r.max_offdiag_ratio),
        })
    };
    let results = json!({
        "kernel": mode_names(&s.basis, &sp.kernel),
        "complement": mode_names(&s.basis, &sp.complement),
        "residual": residual,
    });
    let table = Table {
        header: vec!["mode".into(), "eigenvalue".into(), "in_kernel".into()],
        rows: (0..s.basis.len())
            .map(|m| {
                vec![
                    Cell::Text(s.basis.modes()[m].to_string()),
                    Cell::Num(s.basis.eigenvalues()[m]),
                    Cell::Bool(sp.kernel.contains(&m)),
                ]
            })
            .collect(),
    };
    Ok((results, table))
}
