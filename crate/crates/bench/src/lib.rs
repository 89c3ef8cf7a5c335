//! Fixtures shared by the benchmarks.

use gradsense_cli::{parse_scenario, Scenario};
use gradsense_core::{
    build_basis, simulate_output, Adaptation, Coefficients, Domain, MeasurementSeries, ModalBasis,
    Sensor, SimulationOptions, Subregion, TimeGrid, Weight,
};

pub fn interval_basis(n: usize) -> ModalBasis {
    build_basis(&Domain::interval(1.0).unwrap(), n, Adaptation::Global).unwrap()
}

pub fn square_basis(n: usize) -> ModalBasis {
    build_basis(&Domain::rectangle(1.0, 1.0).unwrap(), n, Adaptation::Global).unwrap()
}

pub fn interval_sensors() -> Vec<Sensor> {
    vec![
        Sensor::point(&[0.3]),
        Sensor::zonal(vec![0.6], vec![0.75], Weight::Uniform),
    ]
}

pub fn square_sensors() -> Vec<Sensor> {
    vec![
        Sensor::point(&[0.9 / std::f64::consts::SQRT_2, 0.31]),
        Sensor::point(&[0.13, 1.0 / 5f64.sqrt()]),
        Sensor::filament(vec![vec![0.2, 0.35], vec![0.8, 0.35]]),
    ]
}

pub fn region() -> Subregion {
    Subregion::interval(0.2, 0.5).unwrap()
}

/// Noiseless samples from a decaying initial state.
pub fn measurements(basis: &ModalBasis, sensors: &[Sensor], samples: usize) -> MeasurementSeries {
    let truth = Coefficients((0..basis.len()).map(|m| 1.0 / (m + 1) as f64).collect());
    let grid = TimeGrid::uniform(1.0, samples).unwrap();
    simulate_output(basis, &truth, sensors, &grid, &SimulationOptions::default()).unwrap()
}

pub fn scan_scenario(grid: usize) -> Scenario {
    parse_scenario(&format!(
        "domain.kind = rectangle\ndomain.lengths = 1, 1\nbasis.truncation = 3\nscan.grid = {grid}\n"
    ))
    .unwrap()
}
