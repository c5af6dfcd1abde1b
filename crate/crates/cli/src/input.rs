//! Reading Hamiltonian files and initial states.

use std::fs;
use std::path::Path;

use tlcu_core::dyson::{parse_time_dependent, TimeDependentHamiltonian};
use tlcu_core::hamiltonian::parse_hamiltonian;
use tlcu_core::linalg::{basis_state, norm};
use tlcu_core::{Complex64, LcuHamiltonian};

use crate::Failure;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

fn with_path(path: &Path, err: tlcu_core::Error) -> Failure {
    let mut f = Failure::from(err);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn is_thm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "thm")
}

pub fn hamiltonian(path: &Path) -> Result<LcuHamiltonian, Failure> {
    if is_thm(path) {
        return Err(Failure::invalid(format!(
            "{}: time-dependent input needs `simulate-td`",
            path.display()
        )));
    }
    parse_hamiltonian(&read(path)?).map_err(|e| with_path(path, e))
}

/// A `.thm` file, or a `.ham` file read as constant coefficients.
pub fn time_dependent(path: &Path) -> Result<TimeDependentHamiltonian, Failure> {
    let text = read(path)?;
    if is_thm(path) {
        parse_time_dependent(&text).map_err(|e| with_path(path, e))
    } else {
        let h = parse_hamiltonian(&text).map_err(|e| with_path(path, e))?;
        Ok(TimeDependentHamiltonian::from(&h))
    }
}

pub enum Source {
    Ham(LcuHamiltonian),
    Thm(TimeDependentHamiltonian),
}

pub fn any(path: &Path) -> Result<Source, Failure> {
    if is_thm(path) {
        Ok(Source::Thm(time_dependent(path)?))
    } else {
        Ok(Source::Ham(hamiltonian(path)?))
    }
}

/// Parses `--state`: a basis index, `plus`, or a path to an amplitude file.
pub fn state(spec: &str, dim: usize) -> Result<Vec<Complex64>, Failure> {
    if spec == "plus" {
        let a = 1.0 / (dim as f64).sqrt();
        return Ok(vec![Complex64::new(a, 0.0); dim]);
    }
    if let Ok(index) = spec.parse::<usize>() {
        if index >= dim {
            return Err(Failure::invalid(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        return Ok(basis_state(dim, index));
    }
    let path = Path::new(spec);
    let text = read(path)?;
    let mut amps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let nums: Vec<f64> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::invalid(format!("{}:{}: expected `re [im]`", path.display(), i + 1)))?;
        match nums[..] {
            [re] => amps.push(Complex64::new(re, 0.0)),
            [re, im] => amps.push(Complex64::new(re, im)),
            _ => {
                return Err(Failure::invalid(format!(
                    "{}:{}: expected `re [im]`",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if amps.len() != dim {
        return Err(Failure::invalid(format!(
            "state has {} amplitudes, expected {dim}",
            amps.len()
        )));
    }
    let nrm = norm(&amps);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Failure::invalid(format!("initial state is not normalized (norm {nrm})")));
    }
    Ok(amps)
}
