//! Qubit and gate counts of the circuit-level construction.
//!
//! Per segment, `A` costs three `B`, three `B†`, two `select(V)` and one
//! `select(V)†`. The ancilla holds the order `k` in unary (`K` qubits), `K`
//! term registers of `⌈log2 L⌉` qubits, `K` time registers of `⌈log2 M⌉`
//! qubits in the time-dependent case, and the flag qubit.

use serde::Serialize;

use crate::dyson::{plan_dyson, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::taylor::plan_segments;
use crate::{LcuHamiltonian, Limits};

/// Convention constants. The construction only fixes big-O costs, so the
/// multipliers are explicit and adjustable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostModel {
    /// Gates per amplitude of an `L`-dimensional state preparation.
    pub c_prep: u64,
    /// Gates per control qubit of a generalized Toffoli.
    pub c_toffoli: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            c_prep: 2,
            c_toffoli: 6,
        }
    }
}

pub const ASYMPTOTIC_LABELS: [&str; 6] = [
    "K = O(log(T/ε) / log log(T/ε))",
    "ancilla qubits = O(log(L) log(T/ε) / log log(T/ε))",
    "B gates = O(L log(T/ε) / log log(T/ε))",
    "select(V) gates = O(L(n + log L) log(T/ε) / log log(T/ε))",
    "total gates = r · O(L(n + log L) log(T/ε) / log log(T/ε)), r = O(T)",
    "sparse oracle, gates per segment = O(n log²(T/ε) / log log(T/ε))",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceEstimate {
    #[serde(rename = "K")]
    pub order: u64,
    pub r: u64,
    #[serde(rename = "L")]
    pub num_terms: u64,
    pub n: u64,
    #[serde(rename = "M")]
    pub samples: u64,
    pub epsilon: f64,
    pub time: f64,
    pub ancilla_qubits: u64,
    pub b_gates_per_segment: u64,
    #[serde(rename = "selectV_gates_per_segment")]
    pub select_v_gates_per_segment: u64,
    pub total_gates: u64,
    pub cost_model: CostModel,
    pub asymptotic_labels: Vec<String>,
}

/// `⌈log2 x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        64 - u64::from((x - 1).leading_zeros())
    }
}

pub fn ancilla_qubits(order: u64, num_terms: u64, samples: u64) -> u64 {
    let time = if samples > 1 { order * ceil_log2(samples) } else { 0 };
    order + order * ceil_log2(num_terms) + time + 1
}

fn overflow() -> Error {
    Error::InvalidArgument("gate count overflows 64 bits".into())
}

/// Counts for given `K`, `r`, `L`, `n`, `M`.
pub fn estimate_from_counts(
    order: u64,
    r: u64,
    num_terms: u64,
    n: u64,
    samples: u64,
    model: CostModel,
) -> Result<ResourceEstimate> {
    let lg = ceil_log2(num_terms);
    let b = order
        .checked_mul(model.c_prep)
        .and_then(|x| x.checked_mul(num_terms))
        .and_then(|x| x.checked_add(order))
        .ok_or_else(overflow)?;
    let sel = order
        .checked_mul(num_terms)
        .and_then(|x| x.checked_mul(n + lg + model.c_toffoli * lg))
        .ok_or_else(overflow)?;
    let per_segment = b
        .checked_mul(6)
        .and_then(|x| sel.checked_mul(3).and_then(|y| x.checked_add(y)))
        .ok_or_else(overflow)?;
    let total = per_segment.checked_mul(r).ok_or_else(overflow)?;
    Ok(ResourceEstimate {
        order,
        r,
        num_terms,
        n,
        samples,
        epsilon: f64::NAN,
        time: f64::NAN,
        ancilla_qubits: ancilla_qubits(order, num_terms, samples),
        b_gates_per_segment: b,
        select_v_gates_per_segment: sel,
        total_gates: total,
        cost_model: model,
        asymptotic_labels: ASYMPTOTIC_LABELS.iter().map(|s| s.to_string()).collect(),
    })
}

/// Estimate for `exp(-iHt)` at error `epsilon`. `K` is the larger of the
/// full-segment and final-segment orders.
pub fn estimate_resources(
    h: &LcuHamiltonian,
    t: f64,
    epsilon: f64,
    model: CostModel,
    limits: &Limits,
) -> Result<ResourceEstimate> {
    let plan = plan_segments(h, t, epsilon, limits)?;
    let order = plan.order.max(plan.final_order) as u64;
    let mut est = estimate_from_counts(
        order,
        plan.segments as u64,
        h.num_terms() as u64,
        h.num_qubits() as u64,
        1,
        model,
    )?;
    est.epsilon = epsilon;
    est.time = t;
    Ok(est)
}

/// Estimate for a time-dependent run, using the planned `K`, `r` and `M`.
pub fn estimate_resources_td(
    hd: &TimeDependentHamiltonian,
    t: f64,
    epsilon: f64,
    model: CostModel,
    limits: &Limits,
) -> Result<ResourceEstimate> {
    let plan = plan_dyson(hd, t, epsilon, limits)?;
    let order = match &plan.constant_plan {
        Some(base) => base.order.max(base.final_order),
        None => plan.order,
    } as u64;
    let mut est = estimate_from_counts(
        order,
        plan.segments as u64,
        hd.num_terms() as u64,
        hd.num_qubits() as u64,
        plan.samples as u64,
        model,
    )?;
    est.epsilon = epsilon;
    est.time = t;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub estimate: ResourceEstimate,
    /// `total_gates(ε²) / total_gates(ε)`.
    pub squared_epsilon_gate_ratio: f64,
    /// `K(ε²) / K(ε)`.
    pub squared_epsilon_order_ratio: f64,
}

/// One row per `ε`, each with the cost ratio of squaring `ε`.
pub fn sweep_report(
    h: &LcuHamiltonian,
    t: f64,
    epsilons: &[f64],
    model: CostModel,
    limits: &Limits,
) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(Error::EmptyInput);
    }
    epsilons
        .iter()
        .map(|&eps| {
            let estimate = estimate_resources(h, t, eps, model, limits)?;
            let squared = estimate_resources(h, t, eps * eps, model, limits)?;
            Ok(SweepRow {
                epsilon: eps,
                squared_epsilon_gate_ratio: squared.total_gates as f64 / estimate.total_gates as f64,
                squared_epsilon_order_ratio: squared.order as f64 / estimate.order as f64,
                estimate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::parse_hamiltonian;

    #[test]
    fn ancilla_examples() {
        assert_eq!(ancilla_qubits(5, 4, 1), 16);
        assert_eq!(ancilla_qubits(7, 1, 1), 8);
        assert_eq!(ancilla_qubits(3, 4, 8), 3 + 6 + 9 + 1);
        let e = estimate_from_counts(5, 1, 4, 3, 1, CostModel::default()).unwrap();
        assert_eq!(e.ancilla_qubits, 16);
        assert_eq!(e.b_gates_per_segment, 5 + 5 * 2 * 4);
        assert_eq!(e.select_v_gates_per_segment, 5 * 4 * (3 + 2 + 12));
        assert_eq!(e.total_gates, 6 * 45 + 3 * 340);
    }

    #[test]
    fn ancilla_grid_matches_closed_form() {
        for k in 0..12u64 {
            for l in 1..40u64 {
                for m in [1u64, 2, 3, 16, 1000] {
                    let lg = (l as f64).log2().ceil() as u64;
                    let mg = if m > 1 { (m as f64).log2().ceil() as u64 } else { 0 };
                    assert_eq!(ancilla_qubits(k, l, m), k + k * lg + k * mg + 1);
                }
            }
        }
    }

    #[test]
    fn linear_in_segments() {
        let m = CostModel::default();
        let one = estimate_from_counts(6, 1, 3, 2, 1, m).unwrap().total_gates;
        for r in [2u64, 7, 100] {
            assert_eq!(estimate_from_counts(6, r, 3, 2, 1, m).unwrap().total_gates, r * one);
        }
    }

    #[test]
    fn monotone_in_precision() {
        let h = parse_hamiltonian("0.5 XZ\n0.25 YY\n0.25 ZI").unwrap();
        let lim = Limits::default();
        let mut prev = (0, 0);
        let mut eps = 1e-1;
        while eps > 1e-12 {
            let e = estimate_resources(&h, 2.0, eps, CostModel::default(), &lim).unwrap();
            assert!(e.order >= prev.0 && e.total_gates >= prev.1);
            prev = (e.order, e.total_gates);
            eps /= 2.0;
        }
    }

    #[test]
    fn sweep_rows() {
        let h = parse_hamiltonian("0.5 X\n0.5 Z").unwrap();
        let lim = Limits::default();
        let rows = sweep_report(&h, 3.0, &[1e-2, 1e-4, 1e-8], CostModel::default(), &lim).unwrap();
        let ks: Vec<u64> = rows.iter().map(|r| r.estimate.order).collect();
        assert!(ks[0] < ks[1] && ks[1] < ks[2], "{ks:?}");
        for r in &rows {
            assert!(r.squared_epsilon_order_ratio <= 2.5);
        }
        assert_eq!(sweep_report(&h, 3.0, &[1e-3], CostModel::default(), &lim).unwrap().len(), 1);
        assert!(sweep_report(&h, 3.0, &[], CostModel::default(), &lim).is_err());
    }
}
