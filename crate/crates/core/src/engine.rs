//! Segment-by-segment simulation with robust oblivious amplitude
//! amplification.
//!
//! Each segment starts the ancilla in `|0⟩`, applies `A = -W R W† R W`,
//! projects the ancilla back onto `|0⟩` and renormalizes the system block.
//! The leaked probability and the residual of the closed form
//! `P A |0⟩|ψ⟩ = |0⟩ (3g·Ũ - 4g³·ŨŨ†Ũ) |ψ⟩` (with `g = ⟨0|W|0⟩`-scale `1/s`)
//! are recorded per segment.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::LcuHamiltonian;
use crate::linalg::{distance, matvec, norm, random_state, scale};
use crate::operators::{apply_u_tilde, dense_u_tilde, project_in_place, FlagRotation, LcuCircuit, PrepareUnitary};
use crate::taylor::{build_coefficient_table, build_final_table, plan_segments, table_len, CoefficientTable, SegmentPlan};
use crate::Limits;

/// Seed used for identity checks when the caller does not pick one.
pub const DEFAULT_SEED: u64 = 0x5eed_0aa1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Segments keeping less probability than this abort the run.
    pub kept_floor: f64,
    /// Evaluate the closed-form residual of every segment (costs about one
    /// extra application of `A`).
    pub check_identity: bool,
    /// `c` in the per-segment check `deficit ≤ c · ε / r`.
    pub deficit_constant: f64,
    pub limits: Limits,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            kept_floor: 0.5,
            check_identity: true,
            deficit_constant: 2.0,
            limits: Limits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub segment_index: usize,
    /// Coefficient sum `s` of the segment's table.
    pub s: f64,
    /// Truncation order `K`.
    pub order: usize,
    /// Duration of the segment.
    pub duration: f64,
    /// Whether the flag-qubit correction for `s < 2` was applied.
    pub corrected: bool,
    pub kept_probability: f64,
    /// `‖P A|0⟩|ψ⟩ - |0⟩(3g·Ũ - 4g³·ŨŨ†Ũ)|ψ⟩‖`, when evaluated.
    pub oaa_identity_residual: Option<f64>,
    /// `|1 - ‖projected‖|`.
    pub post_projection_norm_deficit: f64,
    /// `c · ε / r`, the allowance the deficit is compared against.
    pub deficit_budget: f64,
}

impl SegmentReport {
    pub fn within_budget(&self) -> bool {
        self.post_projection_norm_deficit <= self.deficit_budget
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub final_state: Vec<Complex64>,
    pub reports: Vec<SegmentReport>,
    /// Sum of the per-segment norm deficits.
    pub total_trace_distance_bound: f64,
    pub wall_time: Duration,
    pub plan: Option<SegmentPlan>,
}

fn check_unit(psi: &[Complex64]) -> Result<()> {
    let nrm = norm(psi);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm: nrm });
    }
    Ok(())
}

/// `(3g·Ũ - 4g³·ŨŨ†Ũ) ψ`.
pub fn amplified_closed_form(table: &CoefficientTable, g: f64, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    let u = apply_u_tilde(table, psi, false)?;
    let ud = apply_u_tilde(table, &u, true)?;
    let uud = apply_u_tilde(table, &ud, false)?;
    Ok(u.iter()
        .zip(&uud)
        .map(|(a, b)| a * (3.0 * g) - b * (4.0 * g * g * g))
        .collect())
}

/// Per-segment information needed besides the table.
#[derive(Debug, Clone, Copy)]
pub struct SegmentContext {
    pub index: usize,
    pub duration: f64,
    /// Per-segment error allowance `ε / r`.
    pub budget: f64,
}

fn run_circuit(
    circuit: &LcuCircuit<'_>,
    psi: &[Complex64],
    ctx: SegmentContext,
    options: &EngineOptions,
) -> Result<(Vec<Complex64>, SegmentReport)> {
    check_unit(psi)?;
    let mut joint = circuit.initial_state(psi)?;
    circuit.apply_a(&mut joint)?;
    let kept = project_in_place(&mut joint);
    let mut out = joint.block(0).to_vec();
    drop(joint);

    let residual = if options.check_identity {
        let expected = amplified_closed_form(circuit.table, circuit.good_amplitude(), psi)?;
        Some(distance(&out, &expected))
    } else {
        None
    };

    let kept_norm = kept.sqrt();
    let report = SegmentReport {
        segment_index: ctx.index,
        s: circuit.table.s(),
        order: circuit.table.order(),
        duration: ctx.duration,
        corrected: circuit.flag.is_some(),
        kept_probability: kept.clamp(0.0, 1.0),
        oaa_identity_residual: residual,
        post_projection_norm_deficit: (1.0 - kept_norm).abs(),
        deficit_budget: options.deficit_constant * ctx.budget,
    };
    if kept < options.kept_floor {
        return Err(Error::KeptProbabilityFloor {
            segment: ctx.index,
            kept,
            floor: options.kept_floor,
        });
    }
    scale(&mut out, 1.0 / kept_norm);
    Ok((out, report))
}

/// One segment with `s ≈ 2`: ancilla in `|0⟩`, apply `A`, project, discard.
pub fn run_segment(
    psi: &[Complex64],
    table: &CoefficientTable,
    prep: &PrepareUnitary,
    ctx: SegmentContext,
    options: &EngineOptions,
) -> Result<(Vec<Complex64>, SegmentReport)> {
    run_circuit(&LcuCircuit::new(table, prep), psi, ctx, options)
}

/// One segment with `s ≤ 2`, using an extra ancilla qubit rotated so that the
/// good amplitude is exactly `1/2` before amplification.
pub fn run_final_segment(
    psi: &[Complex64],
    table: &CoefficientTable,
    prep: &PrepareUnitary,
    ctx: SegmentContext,
    options: &EngineOptions,
) -> Result<(Vec<Complex64>, SegmentReport)> {
    let flag = FlagRotation::for_normalization(table.s())?;
    run_circuit(&LcuCircuit::new(table, prep).with_flag(flag), psi, ctx, options)
}

/// Simulates `exp(-iHt) ψ0` to trace distance `epsilon`.
pub fn run_evolution(
    h: &LcuHamiltonian,
    t: f64,
    epsilon: f64,
    psi0: &[Complex64],
    options: &EngineOptions,
) -> Result<EvolutionResult> {
    let start = Instant::now();
    if psi0.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: psi0.len(),
        });
    }
    check_unit(psi0)?;
    if t == 0.0 {
        return Ok(EvolutionResult {
            final_state: psi0.to_vec(),
            reports: Vec::new(),
            total_trace_distance_bound: 0.0,
            wall_time: start.elapsed(),
            plan: None,
        });
    }
    let limits = &options.limits;
    let plan = plan_segments(h, t, epsilon, limits)?;
    let budget = plan.segment_budget();
    let m_full = table_len(h.num_terms(), plan.order).unwrap_or(u128::MAX);
    let m_final = table_len(h.num_terms(), plan.final_order).unwrap_or(u128::MAX);
    for (m, flagged) in [(m_full, false), (m_final, !plan.exact_multiple)] {
        let m = usize::try_from(m).unwrap_or(usize::MAX);
        limits.check_joint(m, h.num_qubits(), flagged)?;
    }

    let mut state = psi0.to_vec();
    let mut reports = Vec::with_capacity(plan.segments);
    if plan.full_segments() > 0 {
        let table = build_coefficient_table(h, &plan, limits)?;
        let prep = PrepareUnitary::for_table(&table);
        for index in 0..plan.full_segments() {
            let ctx = SegmentContext {
                index,
                duration: plan.seg_time,
                budget,
            };
            let (next, report) = run_segment(&state, &table, &prep, ctx, options)?;
            state = next;
            reports.push(report);
        }
    }
    if !plan.exact_multiple {
        let table = build_final_table(h, &plan, limits)?;
        let prep = PrepareUnitary::for_table(&table);
        let ctx = SegmentContext {
            index: plan.segments - 1,
            duration: plan.final_time,
            budget,
        };
        let (next, report) = run_final_segment(&state, &table, &prep, ctx, options)?;
        state = next;
        reports.push(report);
    }

    let total = reports.iter().map(|r| r.post_projection_norm_deficit).sum();
    Ok(EvolutionResult {
        final_state: state,
        reports,
        total_trace_distance_bound: total,
        wall_time: start.elapsed(),
        plan: Some(plan),
    })
}

/// Largest residual of the amplified closed form over `trials` random states,
/// with `Ũ` evaluated densely.
pub fn verify_oaa_identity(circuit: &LcuCircuit<'_>, trials: usize, seed: u64, limits: &Limits) -> Result<f64> {
    let table = circuit.table;
    let u = dense_u_tilde(table, limits)?;
    let g = circuit.good_amplitude();
    let operator: DMatrix<Complex64> =
        &u * Complex64::new(3.0 * g, 0.0) - (&u * u.adjoint() * &u) * Complex64::new(4.0 * g * g * g, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let psi = random_state(&mut rng, table.dim());
        let mut joint = circuit.initial_state(&psi)?;
        circuit.apply_a(&mut joint)?;
        let expected = matvec(&operator, &psi);
        worst = worst.max(distance(joint.block(0), &expected));
    }
    Ok(worst)
}
