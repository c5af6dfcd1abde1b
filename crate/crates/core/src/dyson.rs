//! Time-dependent Hamiltonians `H(t) = Σ_ℓ α_ℓ(t) H_ℓ` with polynomial
//! coefficients, simulated with the discretized truncated Dyson series
//!
//! `Ũ = Σ_{k≤K} (-iτ)^k / (M^k k!) Σ_{j_1..j_k} T H(t_{j_k}) ⋯ H(t_{j_1})`,
//! `t_j = start + (j/M) τ`.
//!
//! Each segment gets its own coefficient table whose factors carry the
//! sample index as rank, so the table's application order implements `T`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::engine::{run_final_segment, run_segment, EngineOptions, EvolutionResult, SegmentContext};
use crate::error::{Error, Result};
use crate::hamiltonian::{at_line, content_of, normalize_terms, Pauli, PauliOp, PauliTerm, Phase};
use crate::linalg::{c, norm, spectral_norm};
use crate::operators::PrepareUnitary;
use crate::taylor::{plan_for_alpha, table_len, truncation_order, CoefficientTable, Factor, SegmentPlan, LN2};
use crate::{LcuHamiltonian, Limits};

/// Points used to bound `max_t Σ_ℓ |α_ℓ(t)|`.
const ALPHA_GRID: usize = 1024;
/// Largest number of segments tried by the planner.
const MAX_SEGMENTS: usize = 1 << 14;

/// `c_0 + c_1 t + … + c_d t^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonRealCoefficient { text: bad.to_string() });
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    /// `Σ_{i≥1} |i c_i| t_max^{i-1}`, an upper bound on `|p'(t)|` over
    /// `[0, t_max]`.
    pub fn derivative_bound(&self, t_max: f64) -> f64 {
        let mut pow = 1.0;
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate().skip(1) {
            acc += (i as f64 * c).abs() * pow;
            pow *= t_max;
        }
        acc
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "poly(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c:?}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeDependentTerm {
    pub coefficient: Polynomial,
    pub axes: Vec<Pauli>,
    #[serde(skip)]
    op: PauliOp,
}

impl TimeDependentTerm {
    pub fn new(coefficient: Polynomial, axes: Vec<Pauli>) -> Result<Self> {
        let axes_text: String = axes.iter().map(|p| p.as_char()).collect();
        if coefficient.is_zero() {
            return Err(Error::ZeroCoefficient { axes: axes_text });
        }
        if axes.is_empty() {
            return Err(Error::EmptyInput);
        }
        let op = PauliOp::new(&axes, Phase::PlusOne);
        Ok(Self { coefficient, axes, op })
    }

    pub fn axes_string(&self) -> String {
        self.axes.iter().map(|p| p.as_char()).collect()
    }

    /// The term at time `t` as a positive weight and a sign-carrying unitary.
    pub fn factor_at(&self, t: f64) -> (f64, PauliOp) {
        let a = self.coefficient.eval(t);
        (a.abs(), self.op.with_phase(Phase::from_sign(a)))
    }
}

/// `H(t) = Σ_ℓ α_ℓ(t) H_ℓ` with real polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeDependentHamiltonian {
    n: usize,
    terms: Vec<TimeDependentTerm>,
}

impl TimeDependentHamiltonian {
    pub fn new(terms: Vec<TimeDependentTerm>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::EmptyInput);
        };
        let n = first.axes.len();
        for t in &terms {
            if t.axes.len() != n {
                return Err(Error::InconsistentLength {
                    axes: t.axes_string(),
                    expected: n,
                    got: t.axes.len(),
                });
            }
        }
        Ok(Self { n, terms })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[TimeDependentTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient.is_constant())
    }

    /// Signed coefficients `α_ℓ(t)`.
    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        self.terms.iter().map(|term| term.coefficient.eval(t)).collect()
    }

    /// Snapshot `H(t)`; terms whose coefficient vanishes at `t` are dropped.
    pub fn at(&self, t: f64) -> Result<LcuHamiltonian> {
        let terms = self
            .terms
            .iter()
            .filter_map(|term| {
                let a = term.coefficient.eval(t);
                (a != 0.0).then(|| normalize_terms(a, &term.axes_string()))
            })
            .collect::<Result<Vec<PauliTerm>>>()?;
        LcuHamiltonian::new(terms)
    }

    /// Upper bound on `max_{t ∈ [0, t_max]} ‖dH/dt‖`.
    pub fn h_prime(&self, t_max: f64) -> f64 {
        self.terms.iter().map(|t| t.coefficient.derivative_bound(t_max)).sum()
    }

    /// Upper bound on `max_{t ∈ [0, t_max]} Σ_ℓ |α_ℓ(t)|`: the grid maximum
    /// plus the Lipschitz allowance between grid points.
    pub fn alpha_bound(&self, t_max: f64) -> f64 {
        let sum_at = |t: f64| self.coefficients_at(t).iter().map(|a| a.abs()).sum::<f64>();
        if self.is_constant() || t_max == 0.0 {
            return sum_at(0.0);
        }
        let step = t_max / ALPHA_GRID as f64;
        let grid_max = (0..=ALPHA_GRID)
            .map(|i| sum_at(i as f64 * step))
            .fold(0.0, f64::max);
        grid_max + 0.5 * step * self.h_prime(t_max)
    }

    /// Dense `H(t)` evaluator with the Pauli matrices built once.
    pub fn dense_family(&self, limits: &Limits) -> Result<impl Fn(f64) -> DMatrix<Complex64> + '_> {
        limits.check_dense(self.n)?;
        let dim = self.dim();
        let mut mats = Vec::with_capacity(self.terms.len());
        let mut e = vec![c(0.0, 0.0); dim];
        let mut img = vec![c(0.0, 0.0); dim];
        for term in &self.terms {
            let mut m = DMatrix::<Complex64>::zeros(dim, dim);
            for x in 0..dim {
                e[x] = c(1.0, 0.0);
                term.op.apply_into(&e, &mut img, false);
                e[x] = c(0.0, 0.0);
                for (y, v) in img.iter().enumerate() {
                    m[(y, x)] = *v;
                }
            }
            mats.push(m);
        }
        Ok(move |t: f64| {
            let mut h = DMatrix::<Complex64>::zeros(dim, dim);
            for (term, m) in self.terms.iter().zip(&mats) {
                h += m * c(term.coefficient.eval(t), 0.0);
            }
            h
        })
    }

    pub fn to_thm_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{} {}\n", t.coefficient, t.axes_string()));
        }
        out
    }
}

impl From<&LcuHamiltonian> for TimeDependentHamiltonian {
    fn from(h: &LcuHamiltonian) -> Self {
        let terms = h
            .terms()
            .iter()
            .map(|t| {
                let sign = if t.phase() == Phase::MinusOne { -1.0 } else { 1.0 };
                TimeDependentTerm {
                    coefficient: Polynomial {
                        coeffs: vec![sign * t.weight()],
                    },
                    axes: t.axes().to_vec(),
                    op: PauliOp::new(t.axes(), Phase::PlusOne),
                }
            })
            .collect();
        Self {
            n: h.num_qubits(),
            terms,
        }
    }
}

fn parse_polynomial(text: &str) -> Result<Polynomial> {
    let inner = if let Some(rest) = text.strip_prefix("poly(") {
        rest.strip_suffix(')').ok_or_else(|| Error::InvalidArgument(format!("unclosed polynomial {text:?}")))?
    } else {
        text
    };
    let coeffs = inner
        .split(',')
        .map(|part| {
            let part = part.trim();
            match part.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonRealCoefficient { text: part.to_string() }),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Polynomial::new(coeffs)
}

/// Parses the `.thm` line format: `poly(c0,c1,…,cd) <axes>` per line, `#`
/// comments. A bare real number is accepted as a constant coefficient.
pub fn parse_time_dependent(text: &str) -> Result<TimeDependentHamiltonian> {
    let mut terms = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some(body) = content_of(line) else {
            continue;
        };
        let Some(split) = body.rfind(char::is_whitespace) else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `poly(...) <axes>`, found {body:?}"),
            });
        };
        let (coeff, axes) = (body[..split].trim(), body[split..].trim());
        let poly = parse_polynomial(&coeff.replace(char::is_whitespace, "")).map_err(|e| at_line(line_no, e))?;
        let axes = axes
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| at_line(line_no, e))?;
        let term = TimeDependentTerm::new(poly, axes).map_err(|e| at_line(line_no, e))?;
        if let Some(first) = terms.first() {
            let first: &TimeDependentTerm = first;
            if first.axes.len() != term.axes.len() {
                return Err(at_line(
                    line_no,
                    Error::InconsistentLength {
                        axes: term.axes_string(),
                        expected: first.axes.len(),
                        got: term.axes.len(),
                    },
                ));
            }
        }
        terms.push(term);
    }
    TimeDependentHamiltonian::new(terms)
}

impl FromStr for TimeDependentHamiltonian {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_time_dependent(s)
    }
}

/// Coefficient table of one segment of the discretized Dyson series. Digit
/// `ℓ·M + j` stands for `H_ℓ` sampled at `t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DysonTable {
    pub table: CoefficientTable,
    pub samples: usize,
    pub num_terms: usize,
    pub segment_start: f64,
    pub seg_time: f64,
}

impl DysonTable {
    pub fn sample_time(&self, j: usize) -> f64 {
        self.segment_start + (j as f64 / self.samples as f64) * self.seg_time
    }

    /// `(ℓ, j)` of a digit.
    pub fn split_digit(&self, digit: usize) -> (usize, usize) {
        (digit / self.samples, digit % self.samples)
    }
}

pub fn build_dyson_table(
    hd: &TimeDependentHamiltonian,
    seg_time: f64,
    order: usize,
    segment_start: f64,
    samples: usize,
    limits: &Limits,
) -> Result<DysonTable> {
    if samples == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if samples > limits.max_time_steps {
        return Err(Error::StepCapExceeded {
            m: samples,
            cap: limits.max_time_steps,
        });
    }
    let mut factors = Vec::with_capacity(hd.num_terms() * samples);
    for (l, term) in hd.terms.iter().enumerate() {
        for j in 0..samples {
            let t = segment_start + (j as f64 / samples as f64) * seg_time;
            let (weight, op) = term.factor_at(t);
            factors.push(Factor {
                op,
                weight,
                rank: j,
                term: l,
            });
        }
    }
    let table = CoefficientTable::tree(hd.n, factors, order, seg_time / samples as f64, limits)?;
    Ok(DysonTable {
        table,
        samples,
        num_terms: hd.num_terms(),
        segment_start,
        seg_time,
    })
}

/// Dense `Ũ` of a Dyson segment, computed as the degree-`K` truncation of
/// `Π_{j=M-1..0} Σ_c (-iτH(t_j)/M)^c x^c / c!` evaluated at `x = 1`.
pub fn dense_dyson_u_tilde(
    hd: &TimeDependentHamiltonian,
    seg_time: f64,
    order: usize,
    segment_start: f64,
    samples: usize,
    limits: &Limits,
) -> Result<DMatrix<Complex64>> {
    let family = hd.dense_family(limits)?;
    Ok(dense_dyson_with(&family, hd.dim(), seg_time, order, segment_start, samples))
}

fn dense_dyson_with<F: Fn(f64) -> DMatrix<Complex64>>(
    family: &F,
    dim: usize,
    seg_time: f64,
    order: usize,
    segment_start: f64,
    samples: usize,
) -> DMatrix<Complex64> {
    let zero = DMatrix::<Complex64>::zeros(dim, dim);
    let mut poly = vec![zero.clone(); order + 1];
    poly[0] = DMatrix::identity(dim, dim);
    let h_step = seg_time / samples as f64;
    for j in 0..samples {
        let t = segment_start + (j as f64 / samples as f64) * seg_time;
        let g = family(t) * c(0.0, -h_step);
        // powers g^c / c!
        let mut powers = Vec::with_capacity(order + 1);
        powers.push(DMatrix::<Complex64>::identity(dim, dim));
        for k in 1..=order {
            let next = &g * &powers[k - 1] * c(1.0 / k as f64, 0.0);
            powers.push(next);
        }
        let mut next = vec![zero.clone(); order + 1];
        for (k, slot) in next.iter_mut().enumerate() {
            for cc in 0..=k {
                *slot += &powers[cc] * &poly[k - cc];
            }
        }
        poly = next;
    }
    poly.into_iter().fold(zero, |acc, m| acc + m)
}

/// Smallest power of two `M` with `‖Ũ(M) - Ũ(2M)‖ ≤ tolerance` on every
/// segment `[i·τ, (i+1)·τ)`, `i < segments`. Returns `None` once `M` exceeds
/// `max_samples`.
pub fn choose_samples(
    hd: &TimeDependentHamiltonian,
    seg_time: f64,
    segments: usize,
    order: usize,
    tolerance: f64,
    max_samples: usize,
    limits: &Limits,
) -> Result<Option<usize>> {
    if hd.is_constant() {
        return Ok(Some(1));
    }
    let family = hd.dense_family(limits)?;
    let dim = hd.dim();
    let mut m = 1usize;
    for i in 0..segments {
        let start = i as f64 * seg_time;
        let mut current = dense_dyson_with(&family, dim, seg_time, order, start, m);
        loop {
            if 2 * m > max_samples {
                return Ok(None);
            }
            let refined = dense_dyson_with(&family, dim, seg_time, order, start, 2 * m);
            if spectral_norm(&(&refined - &current)) <= tolerance {
                break;
            }
            current = refined;
            m *= 2;
        }
    }
    Ok(Some(m))
}

/// Segment layout, truncation order and sample count for a time-dependent
/// run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DysonPlan {
    pub segments: usize,
    /// Duration of a (full) segment.
    pub seg_time: f64,
    pub order: usize,
    /// Time samples per segment `M`.
    pub samples: usize,
    pub epsilon: f64,
    pub time: f64,
    pub alpha_bound: f64,
    pub h_prime: f64,
    /// Table length `m = Σ_{k≤K} (L·M)^k`.
    pub table_len: u64,
    /// Set when every coefficient is constant; the layout is then the
    /// time-independent one.
    pub constant_plan: Option<SegmentPlan>,
}

impl DysonPlan {
    pub fn segment_budget(&self) -> f64 {
        self.epsilon / self.segments as f64
    }
}

fn check_td_inputs(t: f64, epsilon: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidTime(t));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

fn table_budget(hd: &TimeDependentHamiltonian, limits: &Limits) -> usize {
    limits.max_table_len.min(limits.max_joint_amplitudes >> (hd.n + 1))
}

/// Plans a time-dependent run.
///
/// Constant input gets the time-independent layout with `M = 1`. Otherwise
/// `r` starts at `⌈α_bound t / ln 2⌉` and is doubled; each candidate gets
/// `K` from the tail at `α_bound t / r` against `ε/(2r)` and `M` from the
/// self-convergence test at `ε/(4r)`. Among candidates whose table fits, the
/// one with least `r · m · (K+1)` wins; the search stops two doublings after
/// the first feasible candidate.
pub fn plan_dyson(hd: &TimeDependentHamiltonian, t: f64, epsilon: f64, limits: &Limits) -> Result<DysonPlan> {
    check_td_inputs(t, epsilon)?;
    let alpha_bound = hd.alpha_bound(t);
    let h_prime = hd.h_prime(t);
    let l = hd.num_terms();
    if hd.is_constant() {
        let base = plan_for_alpha(alpha_bound, t, epsilon, limits)?;
        let m = table_len(l, base.order.max(base.final_order)).unwrap_or(u128::MAX);
        return Ok(DysonPlan {
            segments: base.segments,
            seg_time: base.seg_time,
            order: base.order,
            samples: 1,
            epsilon,
            time: t,
            alpha_bound,
            h_prime,
            table_len: u64::try_from(m).unwrap_or(u64::MAX),
            constant_plan: Some(base),
        });
    }

    let budget = table_budget(hd, limits);
    let r0 = ((alpha_bound * t / LN2).ceil() as usize).max(1);
    let mut best: Option<(f64, DysonPlan)> = None;
    let mut after_first = 0;
    let mut r = r0;
    let mut last_err = None;
    while r <= MAX_SEGMENTS {
        let seg_time = t / r as f64;
        let x = (alpha_bound * seg_time).min(LN2);
        let order = truncation_order(x, epsilon / (2.0 * r as f64), limits.max_order)?;
        // largest M whose table still fits
        let mut max_samples = 0usize;
        while max_samples < limits.max_time_steps {
            let next = if max_samples == 0 { 1 } else { max_samples * 2 };
            match table_len(l * next, order) {
                Some(m) if m <= budget as u128 => max_samples = next,
                _ => break,
            }
        }
        if max_samples >= 1 {
            let tol = epsilon / (4.0 * r as f64);
            if let Some(samples) = choose_samples(hd, seg_time, r, order, tol, max_samples, limits)? {
                let m = table_len(l * samples, order).unwrap_or(u128::MAX);
                let cost = r as f64 * m as f64 * (order + 1) as f64;
                let plan = DysonPlan {
                    segments: r,
                    seg_time,
                    order,
                    samples,
                    epsilon,
                    time: t,
                    alpha_bound,
                    h_prime,
                    table_len: m as u64,
                    constant_plan: None,
                };
                if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                    best = Some((cost, plan));
                }
            } else {
                last_err = Some(Error::StepCapExceeded {
                    m: max_samples * 2,
                    cap: max_samples,
                });
            }
        } else {
            last_err = Some(Error::TableBudgetExceeded {
                m: table_len(l, order).unwrap_or(u128::MAX),
                budget,
            });
        }
        if best.is_some() {
            after_first += 1;
            if after_first > 2 {
                break;
            }
        }
        r *= 2;
    }
    match best {
        Some((_, plan)) => Ok(plan),
        None => Err(last_err.unwrap_or(Error::NonConvergence {
            what: "time-dependent segment planning",
            limit: MAX_SEGMENTS,
        })),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DysonEvolution {
    pub result: EvolutionResult,
    pub plan: DysonPlan,
}

/// Simulates the time-ordered evolution of `hd` over `[0, t]` to trace
/// distance `epsilon`.
pub fn run_evolution_td(
    hd: &TimeDependentHamiltonian,
    t: f64,
    epsilon: f64,
    psi0: &[Complex64],
    options: &EngineOptions,
) -> Result<DysonEvolution> {
    let start = Instant::now();
    if psi0.len() != hd.dim() {
        return Err(Error::DimensionMismatch {
            expected: hd.dim(),
            got: psi0.len(),
        });
    }
    let nrm = norm(psi0);
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm: nrm });
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidTime(t));
    }
    if t == 0.0 {
        check_td_inputs(1.0, epsilon)?;
        return Ok(DysonEvolution {
            result: EvolutionResult {
                final_state: psi0.to_vec(),
                reports: Vec::new(),
                total_trace_distance_bound: 0.0,
                wall_time: start.elapsed(),
                plan: None,
            },
            plan: DysonPlan {
                segments: 0,
                seg_time: 0.0,
                order: 0,
                samples: 1,
                epsilon,
                time: 0.0,
                alpha_bound: hd.alpha_bound(0.0),
                h_prime: hd.h_prime(0.0),
                table_len: 1,
                constant_plan: None,
            },
        });
    }
    let limits = &options.limits;
    let plan = plan_dyson(hd, t, epsilon, limits)?;
    limits.check_joint(plan.table_len as usize, hd.n, true)?;
    let budget = plan.segment_budget();

    // (start, duration, order, flagged) per segment
    let layout: Vec<(f64, f64, usize, bool)> = match &plan.constant_plan {
        Some(base) => {
            let mut v: Vec<_> = (0..base.full_segments())
                .map(|i| (i as f64 * base.seg_time, base.seg_time, base.order, false))
                .collect();
            if !base.exact_multiple {
                let s = (base.segments - 1) as f64 * base.seg_time;
                v.push((s, base.final_time, base.final_order, true));
            }
            v
        }
        None => (0..plan.segments)
            .map(|i| (i as f64 * plan.seg_time, plan.seg_time, plan.order, true))
            .collect(),
    };

    let mut state = psi0.to_vec();
    let mut reports = Vec::with_capacity(layout.len());
    let mut cached: Option<(f64, usize, DysonTable, PrepareUnitary)> = None;
    for (index, &(seg_start, duration, order, flagged)) in layout.iter().enumerate() {
        // constant tables do not depend on the start time
        let reuse = plan.constant_plan.is_some()
            && cached.as_ref().is_some_and(|(d, k, _, _)| *d == duration && *k == order);
        if !reuse {
            let table = build_dyson_table(hd, duration, order, seg_start, plan.samples, limits)?;
            let prep = PrepareUnitary::for_table(&table.table);
            cached = Some((duration, order, table, prep));
        }
        let (_, _, table, prep) = cached.as_ref().expect("table built above");
        let ctx = SegmentContext {
            index,
            duration,
            budget,
        };
        let (next, report) = if flagged {
            run_final_segment(&state, &table.table, prep, ctx, options)?
        } else {
            run_segment(&state, &table.table, prep, ctx, options)?
        };
        state = next;
        reports.push(report);
    }
    let total = reports.iter().map(|r| r.post_projection_norm_deficit).sum();
    Ok(DysonEvolution {
        result: EvolutionResult {
            final_state: state,
            reports,
            total_trace_distance_bound: total,
            wall_time: start.elapsed(),
            plan: plan.constant_plan.clone(),
        },
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_evolution, verify_oaa_identity};
    use crate::hamiltonian::parse_hamiltonian;
    use crate::linalg::{basis_state, distance};
    use crate::operators::{dense_u_tilde, LcuCircuit};
    use crate::oracle::{time_ordered_exact, trace_distance};
    use crate::taylor::taylor_table;

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn parses_thm() {
        let hd = parse_time_dependent("# drive\npoly(1, 1) Z\npoly(0,0,0.5) X  # quadratic\n0.25 Y\n").unwrap();
        assert_eq!(hd.num_terms(), 3);
        assert_eq!(hd.coefficients_at(2.0), vec![3.0, 2.0, 0.25]);
        assert!(!hd.is_constant());
        let again = parse_time_dependent(&hd.to_thm_text()).unwrap();
        assert_eq!(again, hd);
        assert!(matches!(parse_time_dependent("poly(1,) Z"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_time_dependent("poly(0,0) Z"), Err(Error::Parse { .. })));
        assert!(matches!(parse_time_dependent("poly(1) Z\npoly(1) ZZ"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_time_dependent("poly(1 Z"), Err(Error::Parse { .. })));
        assert_eq!(parse_time_dependent("# nothing\n"), Err(Error::EmptyInput));
    }

    #[test]
    fn derivative_and_alpha_bounds() {
        let hd = parse_time_dependent("poly(1,1) Z\npoly(0,-2,3) X").unwrap();
        // |1| + |−2| + |6 t| on [0, 2]
        assert_eq!(hd.h_prime(2.0), 1.0 + 2.0 + 12.0);
        let fine = (0..=100_000)
            .map(|i| {
                let t = 2.0 * i as f64 / 100_000.0;
                hd.coefficients_at(t).iter().map(|a| a.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max);
        let bound = hd.alpha_bound(2.0);
        assert!(bound >= fine && bound <= fine * 1.05, "{bound} vs {fine}");
    }

    #[test]
    fn linear_ramp_betas() {
        let hd = parse_time_dependent("poly(1,1) Z").unwrap();
        let dt = build_dyson_table(&hd, 0.1, 1, 0.0, 2, &lim()).unwrap();
        let b = dt.table.betas();
        assert_eq!(b.len(), 3);
        assert_eq!(b[0], 1.0);
        assert!((b[1] - 0.05).abs() < 1e-15);
        assert!((b[2] - 0.0525).abs() < 1e-15);
        assert!((dt.sample_time(1) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn constant_coefficients_reduce_to_taylor() {
        let h = parse_hamiltonian("0.5 XI\n-0.3 ZY\n0.2 IZ").unwrap();
        let hd = TimeDependentHamiltonian::from(&h);
        let taylor = dense_u_tilde(&taylor_table(&h, 0.4, 3, &lim()).unwrap(), &lim()).unwrap();
        for m in [1, 2, 3] {
            let dt = build_dyson_table(&hd, 0.4, 3, 0.7, m, &lim()).unwrap();
            let dense = dense_u_tilde(&dt.table, &lim()).unwrap();
            assert!(spectral_norm(&(&dense - &taylor)) <= 1e-12, "M = {m}");
            let gen = dense_dyson_u_tilde(&hd, 0.4, 3, 0.7, m, &lim()).unwrap();
            assert!(spectral_norm(&(&gen - &taylor)) <= 1e-12);
        }
        let base = build_dyson_table(&hd, 0.4, 2, 0.0, 1, &lim()).unwrap();
        assert_eq!(base.table.betas(), taylor_table(&h, 0.4, 2, &lim()).unwrap().betas());
    }

    #[test]
    fn table_matches_generating_function() {
        let hd = parse_time_dependent("poly(0.3,0.8) XI\npoly(0.5,0,-0.4) ZZ\npoly(-0.1,0.2) YX").unwrap();
        for (m, k) in [(1, 3), (2, 3), (4, 2), (3, 4)] {
            let dt = build_dyson_table(&hd, 0.3, k, 0.25, m, &lim()).unwrap();
            let a = dense_u_tilde(&dt.table, &lim()).unwrap();
            let b = dense_dyson_u_tilde(&hd, 0.3, k, 0.25, m, &lim()).unwrap();
            assert!(spectral_norm(&(&a - &b)) <= 1e-13, "M={m} K={k}");
        }
    }

    #[test]
    fn time_ordering_is_symmetric_in_positions() {
        let hd = parse_time_dependent("poly(0.3,0.8) X\npoly(0.5,-0.4) Z").unwrap();
        let dt = build_dyson_table(&hd, 0.3, 2, 0.0, 4, &lim()).unwrap();
        let radix = dt.table.radix().unwrap();
        assert_eq!(radix, 8);
        let mut checked = 0;
        for a in 0..radix {
            for b in 0..radix {
                let (_, ja) = dt.split_digit(a);
                let (_, jb) = dt.split_digit(b);
                if ja == jb {
                    continue;
                }
                let idx = |d1: usize, d2: usize| {
                    dt.table
                        .encode(&crate::taylor::IndexTuple {
                            order: 2,
                            digits: vec![d1, d2],
                        })
                        .unwrap()
                };
                let (p1, f1) = dt.table.entry(idx(a, b)).unwrap();
                let (p2, f2) = dt.table.entry(idx(b, a)).unwrap();
                assert_eq!(p1, p2);
                assert_eq!(f1, f2);
                // earlier sample acts first
                let first = dt.table.factors()[f1[0]].rank;
                assert_eq!(first, ja.min(jb));
                let (x, y) = (dt.table.betas()[idx(a, b)], dt.table.betas()[idx(b, a)]);
                assert!((x - y).abs() <= 1e-15 * x);
                checked += 1;
            }
        }
        assert_eq!(checked, 48);
    }

    #[test]
    fn refinement_differences_decrease() {
        let hd = parse_time_dependent("poly(0.2,1) X\npoly(1,0,-0.5) Z").unwrap();
        let mut prev = f64::INFINITY;
        let mut last = dense_dyson_u_tilde(&hd, 0.5, 4, 0.0, 1, &lim()).unwrap();
        for p in 1..8 {
            let next = dense_dyson_u_tilde(&hd, 0.5, 4, 0.0, 1 << p, &lim()).unwrap();
            let d = spectral_norm(&(&next - &last));
            assert!(d <= prev * (1.0 + 1e-9), "M = {}: {d} > {prev}", 1 << p);
            prev = d;
            last = next;
        }
    }

    #[test]
    fn choose_samples_examples() {
        let hd = parse_time_dependent("poly(1,1) Z").unwrap();
        let m = choose_samples(&hd, 0.5, 1, 6, 1e-4 / 4.0, 1 << 16, &lim()).unwrap().unwrap();
        assert!(m.is_power_of_two() && m > 1);
        let c = parse_time_dependent("0.5 X\n0.5 Z").unwrap();
        assert_eq!(choose_samples(&c, 0.5, 1, 6, 1e-8, 1 << 16, &lim()).unwrap(), Some(1));
        assert!(matches!(plan_dyson(&hd, 0.5, 2.0, &lim()), Err(Error::InvalidEpsilon(_))));
    }

    #[test]
    fn identity_holds_for_dyson_tables() {
        let hd = parse_time_dependent("poly(0.3,0.8) XI\npoly(0.5,0,-0.4) ZZ\npoly(-0.1,0.2) YX").unwrap();
        let dt = build_dyson_table(&hd, 0.4, 3, 0.2, 4, &lim()).unwrap();
        let prep = PrepareUnitary::for_table(&dt.table);
        assert!(verify_oaa_identity(&LcuCircuit::new(&dt.table, &prep), 10, 5, &lim()).unwrap() <= 1e-11);
    }

    #[test]
    fn linear_ramp_against_analytic_phase() {
        let hd = parse_time_dependent("poly(1,1) Z").unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = vec![c(s, 0.0), c(s, 0.0)];
        let run = run_evolution_td(&hd, 1.0, 1e-3, &psi, &EngineOptions::default()).unwrap();
        let target = vec![Complex64::from_polar(s, -1.5), Complex64::from_polar(s, 1.5)];
        let d = trace_distance(&run.result.final_state, &target).unwrap();
        assert!(d <= 1e-3, "{d}");
        for r in &run.result.reports {
            assert!(r.corrected);
            assert!(r.oaa_identity_residual.unwrap() <= 1e-11);
        }
    }

    #[test]
    fn constant_input_matches_time_independent_run() {
        let h = parse_hamiltonian("0.5 X\n0.5 Z").unwrap();
        let hd = parse_time_dependent("poly(0.5) X\npoly(0.5) Z").unwrap();
        let psi = basis_state(2, 0);
        for t in [1.0, 2.0 * LN2] {
            let a = run_evolution(&h, t, 1e-4, &psi, &EngineOptions::default()).unwrap();
            let b = run_evolution_td(&hd, t, 1e-4, &psi, &EngineOptions::default()).unwrap();
            assert!(distance(&a.final_state, &b.result.final_state) <= 1e-10);
            assert_eq!(b.plan.samples, 1);
        }
    }

    #[test]
    fn rotating_drive_against_fine_product() {
        // cos and sin replaced by their degree-9/10 Taylor polynomials
        let hd = parse_time_dependent(
            "poly(1,0,-0.5,0,0.041666666666666664,0,-0.001388888888888889,0,2.48015873015873e-5,0,-2.755731922398589e-7) X\n\
             poly(0,1,0,-0.16666666666666666,0,0.008333333333333333,0,-0.0001984126984126984,0,2.7557319223985893e-6) Z",
        )
        .unwrap();
        let psi = basis_state(2, 0);
        let run = run_evolution_td(&hd, 1.0, 1e-3, &psi, &EngineOptions::default()).unwrap();
        let lim = lim();
        let exact = time_ordered_exact(
            |t: f64| {
                let mut m = DMatrix::<Complex64>::zeros(2, 2);
                m[(0, 1)] = c(t.cos(), 0.0);
                m[(1, 0)] = c(t.cos(), 0.0);
                m[(0, 0)] = c(t.sin(), 0.0);
                m[(1, 1)] = c(-t.sin(), 0.0);
                m
            },
            1.0,
            16,
            &lim,
        )
        .unwrap();
        let d = trace_distance(&run.result.final_state, &exact.apply(&psi)).unwrap();
        assert!(d <= 1e-3, "{d}");
    }
}
