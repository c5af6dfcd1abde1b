//! Report assembly for each subcommand.

use serde::Serialize;

use tlcu_core::dyson::{run_evolution_td, DysonPlan};
use tlcu_core::engine::{run_evolution, verify_oaa_identity, EngineOptions, EvolutionResult, SegmentReport};
use tlcu_core::hamiltonian::build_dense;
use tlcu_core::operators::{FlagRotation, LcuCircuit, PrepareUnitary};
use tlcu_core::oracle::{expm_hermitian, time_ordered_exact, trace_distance};
use tlcu_core::resources::{
    estimate_resources, estimate_resources_td, sweep_report, ResourceEstimate, SweepRow,
};
use tlcu_core::taylor::{build_coefficient_table, build_final_table, plan_segments};
use tlcu_core::Complex64;

use crate::input::{self, Source};
use crate::{EstimateArgs, Failure, Format, Outcome, SimulateArgs, SweepArgs, VerifyArgs};

/// Residual above which `verify-oaa` reports a broken identity.
const IDENTITY_TOL: f64 = 1e-11;
/// Initial step count of the time-ordered oracle (doubled until converged).
const ORACLE_STEPS: usize = 16;

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::invariant(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn amplitudes(state: &[Complex64]) -> Vec<[f64; 2]> {
    state.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct SimulateReport {
    mode: &'static str,
    input: String,
    n: usize,
    L: usize,
    time: f64,
    epsilon: f64,
    /// `Σ|α_ℓ|`, or its bound over `[0, t]` for time-dependent input.
    alpha: f64,
    h_prime: Option<f64>,
    r: usize,
    K: usize,
    K_final: usize,
    M: usize,
    seg_time: f64,
    final_time: f64,
    exact_multiple: bool,
    table_len: u64,
    s_per_segment: Vec<f64>,
    kept_probability_per_segment: Vec<f64>,
    max_oaa_identity_residual: Option<f64>,
    total_trace_distance_bound: f64,
    trace_distance_to_oracle: Option<f64>,
    within_epsilon: Option<bool>,
    segments: Vec<SegmentReport>,
    final_state: Vec<[f64; 2]>,
    wall_time: Option<f64>,
}

struct Layout {
    alpha: f64,
    h_prime: Option<f64>,
    r: usize,
    k: usize,
    k_final: usize,
    m: usize,
    seg_time: f64,
    final_time: f64,
    exact_multiple: bool,
    table_len: u64,
}

fn layout_from_td(plan: &DysonPlan) -> Layout {
    match &plan.constant_plan {
        Some(base) => Layout {
            alpha: plan.alpha_bound,
            h_prime: Some(plan.h_prime),
            r: base.segments,
            k: base.order,
            k_final: base.final_order,
            m: 1,
            seg_time: base.seg_time,
            final_time: base.final_time,
            exact_multiple: base.exact_multiple,
            table_len: plan.table_len,
        },
        None => Layout {
            alpha: plan.alpha_bound,
            h_prime: Some(plan.h_prime),
            r: plan.segments,
            k: plan.order,
            k_final: plan.order,
            m: plan.samples,
            seg_time: plan.seg_time,
            final_time: plan.seg_time,
            exact_multiple: true,
            table_len: plan.table_len,
        },
    }
}

pub fn simulate(args: &SimulateArgs, time_dependent: bool) -> Result<Outcome, Failure> {
    let common = &args.common;
    let limits = common.caps.limits();
    let options = EngineOptions {
        limits,
        ..EngineOptions::default()
    };
    let (t, eps) = (common.time, common.eps);
    let oracle_on = !args.no_oracle;

    let (n, l, result, layout, exact_state) = if time_dependent {
        let hd = input::time_dependent(&common.ham)?;
        if oracle_on {
            limits.check_dense(hd.num_qubits())?;
        }
        let psi0 = input::state(&args.state, hd.dim())?;
        let run = run_evolution_td(&hd, t, eps, &psi0, &options)?;
        let exact = if oracle_on && t > 0.0 {
            let family = hd.dense_family(&limits)?;
            Some(time_ordered_exact(family, t, ORACLE_STEPS, &limits)?.apply(&psi0))
        } else if oracle_on {
            Some(psi0.clone())
        } else {
            None
        };
        let layout = layout_from_td(&run.plan);
        (hd.num_qubits(), hd.num_terms(), run.result, layout, exact)
    } else {
        let h = input::hamiltonian(&common.ham)?;
        if oracle_on {
            limits.check_dense(h.num_qubits())?;
        }
        let psi0 = input::state(&args.state, h.dim())?;
        let result: EvolutionResult = run_evolution(&h, t, eps, &psi0, &options)?;
        let exact = if oracle_on {
            let dense = build_dense(&h, &limits)?;
            Some(expm_hermitian(&dense, t, &limits)?.apply(&psi0))
        } else {
            None
        };
        let layout = match &result.plan {
            Some(p) => Layout {
                alpha: p.alpha_sum,
                h_prime: None,
                r: p.segments,
                k: p.order,
                k_final: p.final_order,
                m: 1,
                seg_time: p.seg_time,
                final_time: p.final_time,
                exact_multiple: p.exact_multiple,
                table_len: tlcu_core::taylor::table_len(h.num_terms(), p.order.max(p.final_order))
                    .map_or(u64::MAX, |m| m as u64),
            },
            None => Layout {
                alpha: h.alpha_sum(),
                h_prime: None,
                r: 0,
                k: 0,
                k_final: 0,
                m: 1,
                seg_time: 0.0,
                final_time: 0.0,
                exact_multiple: true,
                table_len: 1,
            },
        };
        (h.num_qubits(), h.num_terms(), result, layout, exact)
    };

    let distance = match &exact_state {
        Some(exact) => Some(trace_distance(&result.final_state, exact)?),
        None => None,
    };
    let within = distance.map(|d| d <= eps);
    let max_residual = result
        .reports
        .iter()
        .filter_map(|r| r.oaa_identity_residual)
        .reduce(f64::max);
    let report = SimulateReport {
        mode: if time_dependent { "simulate-td" } else { "simulate" },
        input: common.ham.display().to_string(),
        n,
        L: l,
        time: t,
        epsilon: eps,
        alpha: layout.alpha,
        h_prime: layout.h_prime,
        r: layout.r,
        K: layout.k,
        K_final: layout.k_final,
        M: layout.m,
        seg_time: layout.seg_time,
        final_time: layout.final_time,
        exact_multiple: layout.exact_multiple,
        table_len: layout.table_len,
        s_per_segment: result.reports.iter().map(|r| r.s).collect(),
        kept_probability_per_segment: result.reports.iter().map(|r| r.kept_probability).collect(),
        max_oaa_identity_residual: max_residual,
        total_trace_distance_bound: result.total_trace_distance_bound,
        trace_distance_to_oracle: distance,
        within_epsilon: within,
        segments: result.reports.clone(),
        final_state: amplitudes(&result.final_state),
        wall_time: args.timing.then(|| result.wall_time.as_secs_f64()),
    };
    let failure = match (within, distance) {
        (Some(false), Some(d)) => Some(Failure::invariant(format!(
            "trace distance to the oracle {d:e} exceeds epsilon {eps:e}"
        ))),
        _ => None,
    };
    Ok(Outcome {
        text: to_json(&report)?,
        failure,
    })
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    mode: &'static str,
    input: String,
    #[serde(flatten)]
    estimate: ResourceEstimate,
}

pub fn estimate(args: &EstimateArgs) -> Result<Outcome, Failure> {
    let common = &args.common;
    let limits = common.caps.limits();
    let model = args.cost.model();
    let estimate = match input::any(&common.ham)? {
        Source::Ham(h) => estimate_resources(&h, common.time, common.eps, model, &limits)?,
        Source::Thm(hd) => estimate_resources_td(&hd, common.time, common.eps, model, &limits)?,
    };
    let report = EstimateReport {
        mode: "estimate",
        input: common.ham.display().to_string(),
        estimate,
    };
    Ok(Outcome {
        text: to_json(&report)?,
        failure: None,
    })
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct TableCheck {
    segment: &'static str,
    s: f64,
    K: usize,
    table_len: usize,
    corrected: bool,
    max_identity_residual: f64,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    mode: &'static str,
    input: String,
    time: f64,
    epsilon: f64,
    trials: usize,
    seed: u64,
    tables: Vec<TableCheck>,
    max_identity_residual: f64,
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome, Failure> {
    let common = &args.common;
    let limits = common.caps.limits();
    let h = input::hamiltonian(&common.ham)?;
    limits.check_dense(h.num_qubits())?;
    if common.time == 0.0 {
        return Err(Failure::invalid("time must be positive for verify-oaa"));
    }
    let plan = plan_segments(&h, common.time, common.eps, &limits)?;
    let mut tables = Vec::new();
    if plan.full_segments() > 0 {
        let table = build_coefficient_table(&h, &plan, &limits)?;
        let prep = PrepareUnitary::for_table(&table);
        let residual = verify_oaa_identity(&LcuCircuit::new(&table, &prep), args.trials, args.seed, &limits)?;
        tables.push(TableCheck {
            segment: "full",
            s: table.s(),
            K: table.order(),
            table_len: table.len(),
            corrected: false,
            max_identity_residual: residual,
        });
    }
    if !plan.exact_multiple {
        let table = build_final_table(&h, &plan, &limits)?;
        let prep = PrepareUnitary::for_table(&table);
        let flag = FlagRotation::for_normalization(table.s())?;
        let circuit = LcuCircuit::new(&table, &prep).with_flag(flag);
        let residual = verify_oaa_identity(&circuit, args.trials, args.seed, &limits)?;
        tables.push(TableCheck {
            segment: "final",
            s: table.s(),
            K: table.order(),
            table_len: table.len(),
            corrected: true,
            max_identity_residual: residual,
        });
    }
    let worst = tables.iter().map(|c| c.max_identity_residual).fold(0.0, f64::max);
    let report = VerifyReport {
        mode: "verify-oaa",
        input: common.ham.display().to_string(),
        time: common.time,
        epsilon: common.eps,
        trials: args.trials,
        seed: args.seed,
        tables,
        max_identity_residual: worst,
    };
    let failure = (worst > IDENTITY_TOL).then(|| {
        Failure::invariant(format!("identity residual {worst:e} exceeds {IDENTITY_TOL:e}"))
    });
    Ok(Outcome {
        text: to_json(&report)?,
        failure,
    })
}

#[derive(Debug, Serialize)]
struct SweepReport {
    mode: &'static str,
    input: String,
    time: f64,
    rows: Vec<SweepRow>,
}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct CsvRow {
    epsilon: f64,
    K: u64,
    r: u64,
    L: u64,
    n: u64,
    M: u64,
    ancilla_qubits: u64,
    b_gates_per_segment: u64,
    selectV_gates_per_segment: u64,
    total_gates: u64,
    squared_epsilon_gate_ratio: f64,
    squared_epsilon_order_ratio: f64,
}

pub fn sweep(args: &SweepArgs) -> Result<Outcome, Failure> {
    let limits = args.caps.limits();
    let h = input::hamiltonian(&args.ham)?;
    let rows = sweep_report(&h, args.time, &args.eps_list, args.cost.model(), &limits)?;
    let text = match args.format {
        Format::Json => to_json(&SweepReport {
            mode: "sweep",
            input: args.ham.display().to_string(),
            time: args.time,
            rows,
        })?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                let e = &row.estimate;
                w.serialize(CsvRow {
                    epsilon: row.epsilon,
                    K: e.order,
                    r: e.r,
                    L: e.num_terms,
                    n: e.n,
                    M: e.samples,
                    ancilla_qubits: e.ancilla_qubits,
                    b_gates_per_segment: e.b_gates_per_segment,
                    selectV_gates_per_segment: e.select_v_gates_per_segment,
                    total_gates: e.total_gates,
                    squared_epsilon_gate_ratio: row.squared_epsilon_gate_ratio,
                    squared_epsilon_order_ratio: row.squared_epsilon_order_ratio,
                })
                .map_err(|e| Failure::invariant(format!("cannot write csv: {e}")))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Failure::invariant(format!("cannot write csv: {e}")))?;
            String::from_utf8(bytes).map_err(|e| Failure::invariant(e.to_string()))?
        }
    };
    Ok(Outcome { text, failure: None })
}
