//! Candidate locations for `scan`.
//!
//! Per axis: `a:b:n` (n points from a to b inclusive), `n` (n cell centres
//! across the domain), or a comma list such as `0.1, 1/3, 0.5`. Two axes are
//! separated by `;`; a single axis on a rectangle is reused for both.

use gradsense_core::{Coord, Domain};

use crate::error::CliError;

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: "grid".into(),
        message: message.into(),
    }
}

fn parse_axis(spec: &str, length: f64) -> Result<Vec<Coord>, CliError> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(invalid("empty axis"));
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(invalid(format!(
                "expected `start:stop:count`, got `{spec}`"
            )));
        }
        let a = parts[0].parse::<Coord>().map_err(invalid)?.value();
        let b = parts[1].parse::<Coord>().map_err(invalid)?.value();
        let n: usize = parts[2]
            .parse()
            .map_err(|_| invalid(format!("`{}` is not a count", parts[2])))?;
        return match n {
            0 => Err(invalid("empty grid")),
            1 => Ok(vec![Coord::real(a)]),
            _ => Ok((0..n)
                .map(|i| Coord::real(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()),
        };
    }
    if !spec.contains(',') {
        if let Ok(n) = spec.parse::<usize>() {
            if n == 0 {
                return Err(invalid("empty grid"));
            }
            return Ok((0..n)
                .map(|i| Coord::real((i as f64 + 0.5) * length / n as f64))
                .collect());
        }
    }
    spec.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<Coord>().map_err(invalid))
        .collect()
}

/// Candidate points in row order (first axis outermost).
pub fn parse_grid(spec: &str, domain: &Domain) -> Result<Vec<Vec<Coord>>, CliError> {
    let axes: Vec<&str> = spec.split(';').collect();
    let dim = domain.dim();
    let axes: Vec<Vec<Coord>> = match (axes.len(), dim) {
        (1, 1) => vec![parse_axis(axes[0], domain.length(0))?],
        (1, 2) => vec![
            parse_axis(axes[0], domain.length(0))?,
            parse_axis(axes[0], domain.length(1))?,
        ],
        (2, 2) => vec![
            parse_axis(axes[0], domain.length(0))?,
            parse_axis(axes[1], domain.length(1))?,
        ],
        (a, d) => {
            return Err(invalid(format!(
                "{a} axes given for a {d}-dimensional domain"
            )))
        }
    };
    let points: Vec<Vec<Coord>> = if dim == 1 {
        axes[0].iter().map(|c| vec![*c]).collect()
    } else {
        axes[0]
            .iter()
            .flat_map(|x| axes[1].iter().map(move |y| vec![*x, *y]))
            .collect()
    };
    if points.is_empty() {
        return Err(invalid("empty grid"));
    }
    for p in &points {
        let v: Vec<f64> = p.iter().map(Coord::value).collect();
        if !domain.contains_interior(&v) {
            return Err(invalid(format!(
                "candidate {v:?} is not strictly inside the domain"
            )));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_forms() {
        let d = Domain::interval(1.0).unwrap();
        let g = parse_grid("0.1:0.9:9", &d).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[4][0].value(), 0.5);
        let g = parse_grid("4", &d).unwrap();
        assert_eq!(
            g.iter().map(|p| p[0].value()).collect::<Vec<_>>(),
            vec![0.125, 0.375, 0.625, 0.875]
        );
        let g = parse_grid("0.2, 1/3", &d).unwrap();
        assert!(g[1][0].is_exact());
        assert!(parse_grid("0:1:3", &d).is_err());
        assert!(parse_grid("0", &d).is_err());
    }

    #[test]
    fn square_grid() {
        let d = Domain::rectangle(1.0, 1.0).unwrap();
        let g = parse_grid("8", &d).unwrap();
        assert_eq!(g.len(), 64);
        let g = parse_grid("0.25, 0.5; 0.1:0.3:3", &d).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!((g[1][0].value(), g[1][1].value()), (0.25, 0.2));
    }
}
