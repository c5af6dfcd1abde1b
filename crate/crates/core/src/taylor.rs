//! Segmentation, truncation order and the coefficient table of the
//! truncated Taylor series `Ũ = Σ_j β_j V_j`.
//!
//! Full segments have length `ln 2 / Σα`, so the untruncated coefficient sum
//! of each is exactly 2. The last segment covers whatever time remains and
//! has its own truncation order and normalization `s < 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{LcuHamiltonian, PauliOp, Phase};
use crate::linalg::compensated_sum;
use crate::Limits;

pub const LN2: f64 = std::f64::consts::LN_2;

/// Relative tolerance for treating `T / ln 2` as an exact integer.
const EXACT_MULTIPLE_TOL: f64 = 1e-9;

/// `Σ_{k>K} ln(2)^k / k!`, summed forward from the first omitted term so
/// that tiny tails keep their relative accuracy.
pub fn tail_ln2(order: usize) -> f64 {
    tail_at(LN2, order)
}

/// `Σ_{k>K} x^k / k!` for `x ≥ 0`, summed forward from the first omitted term.
pub fn tail_at(x: f64, order: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for k in 1..=order + 1 {
        term *= x / k as f64;
    }
    let mut acc = 0.0;
    let mut k = order + 1;
    while term > 0.0 && term > acc * f64::EPSILON * 0.25 {
        acc += term;
        k += 1;
        term *= x / k as f64;
        if k > order + 400 {
            break;
        }
    }
    acc
}

/// `Σ_{k≤K} x^k / k!`.
pub fn partial_exp(x: f64, order: usize) -> f64 {
    let mut term = 1.0;
    let mut terms = Vec::with_capacity(order + 1);
    terms.push(1.0);
    for k in 1..=order {
        term *= x / k as f64;
        terms.push(term);
    }
    compensated_sum(terms)
}

fn smallest_order(tail: impl Fn(usize) -> f64, budget: f64, cap: usize) -> Result<usize> {
    for k in 0..=cap {
        if tail(k) <= budget {
            return Ok(k);
        }
    }
    Err(Error::OrderCapExceeded {
        order: cap + 1,
        cap,
    })
}

/// Smallest `K` whose truncation tail at scaled segment time `x ≤ ln 2` is at
/// most `budget`.
pub fn truncation_order(x: f64, budget: f64, cap: usize) -> Result<usize> {
    if (x - LN2).abs() <= 4.0 * f64::EPSILON {
        smallest_order(tail_ln2, budget, cap)
    } else {
        smallest_order(|k| tail_at(x, k), budget, cap)
    }
}

fn check_inputs(t: f64, epsilon: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidTime(t));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Segment layout and truncation orders for one evolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentPlan {
    /// Number of segments `r`.
    pub segments: usize,
    /// Duration of a full segment, `ln 2 / alpha_sum`.
    pub seg_time: f64,
    /// Truncation order `K` of full segments.
    pub order: usize,
    pub epsilon: f64,
    pub time: f64,
    pub alpha_sum: f64,
    /// `T = alpha_sum · t`.
    pub scaled_time: f64,
    /// True when `T` is an integer multiple of `ln 2`, so every segment is full.
    pub exact_multiple: bool,
    /// Duration of the last segment.
    pub final_time: f64,
    /// Truncation order of the last segment.
    pub final_order: usize,
    /// Coefficient sum of the last segment.
    pub final_s: f64,
}

impl SegmentPlan {
    /// Per-segment error allowance `ε / r`.
    pub fn segment_budget(&self) -> f64 {
        self.epsilon / self.segments as f64
    }

    /// Segments run without the final-segment correction.
    pub fn full_segments(&self) -> usize {
        if self.exact_multiple {
            self.segments
        } else {
            self.segments - 1
        }
    }

    /// `Σ_{k≤K} ln(2)^k / k!`, the normalization of a full segment.
    pub fn full_s(&self) -> f64 {
        2.0 - tail_ln2(self.order)
    }
}

/// Plans segments for `exp(-iHt)` with total error budget `epsilon`.
pub fn plan_segments(
    h: &LcuHamiltonian,
    t: f64,
    epsilon: f64,
    limits: &Limits,
) -> Result<SegmentPlan> {
    plan_for_alpha(h.alpha_sum(), t, epsilon, limits)
}

pub(crate) fn plan_for_alpha(
    alpha_sum: f64,
    t: f64,
    epsilon: f64,
    limits: &Limits,
) -> Result<SegmentPlan> {
    check_inputs(t, epsilon)?;
    let scaled_time = alpha_sum * t;
    let q = scaled_time / LN2;
    let nearest = q.round();
    let exact_multiple = nearest >= 1.0 && (q - nearest).abs() <= EXACT_MULTIPLE_TOL * q.max(1.0);
    let segments = if exact_multiple {
        nearest as usize
    } else {
        (q.ceil() as usize).max(1)
    };
    let seg_time = LN2 / alpha_sum;
    let budget = epsilon / segments as f64;
    let order = smallest_order(tail_ln2, budget, limits.max_order)?;

    let (final_time, final_order, final_s) = if exact_multiple {
        (seg_time, order, 2.0 - tail_ln2(order))
    } else {
        let final_time = (t - (segments - 1) as f64 * seg_time).max(0.0);
        let x = (alpha_sum * final_time).min(LN2);
        let k = truncation_order(x, budget, limits.max_order)?;
        (final_time, k, partial_exp(x, k))
    };

    Ok(SegmentPlan {
        segments,
        seg_time,
        order,
        epsilon,
        time: t,
        alpha_sum,
        scaled_time,
        exact_multiple,
        final_time,
        final_order,
        final_s,
    })
}

/// Index `(k; ℓ_1, …, ℓ_k)` of a tree-structured table. Digits are positions
/// into the table's factor pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexTuple {
    pub order: usize,
    pub digits: Vec<usize>,
}

/// One unitary `phase · P` that can appear as a factor of some `V_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub op: PauliOp,
    /// Non-negative magnitude entering the coefficient.
    pub weight: f64,
    /// Time-sample index; factors with a larger rank act later.
    pub rank: usize,
    /// Index `ℓ` of the Hamiltonian term this factor came from.
    pub term: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// Entry `(k; d_1..d_k)` for every `k ≤ K` and digits below `radix`,
    /// enumerated in lexicographic order of `(k, d_1, …, d_k)`.
    Tree { radix: usize, offsets: Vec<usize> },
    /// Arbitrary entries given explicitly.
    Explicit(Vec<ExplicitEntry>),
}

#[derive(Debug, Clone, PartialEq)]
struct ExplicitEntry {
    phase: Phase,
    /// Factor ids, first-applied first.
    factors: Vec<usize>,
}

/// The coefficients `β_j` and the operators `V_j` of a linear combination of
/// unitaries `Ũ = Σ_j β_j V_j`.
///
/// For tree tables `V_{(k; d_1..d_k)} = (-i)^k F_{d_1} ⋯ F_{d_k}` with the
/// factors applied in increasing rank, ties broken so that the later position
/// acts first (`F_{d_k}` is applied to the state first when all ranks agree).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    n: usize,
    order: usize,
    factors: Vec<Factor>,
    layout: Layout,
    betas: Vec<f64>,
    s: f64,
    uniform_rank: bool,
}

fn tree_len(radix: usize, order: usize) -> Option<u128> {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for k in 0..=order {
        if k > 0 {
            level = level.checked_mul(radix as u128)?;
        }
        total = total.checked_add(level)?;
    }
    Some(total)
}

/// `m = Σ_{k≤K} radix^k`, or `None` on overflow.
pub fn table_len(radix: usize, order: usize) -> Option<u128> {
    tree_len(radix, order)
}

impl CoefficientTable {
    /// Tree table with `β_{(k; d⃗)} = step^k / k! · Π_i weight(d_i)`.
    pub fn tree(
        n: usize,
        factors: Vec<Factor>,
        order: usize,
        step: f64,
        limits: &Limits,
    ) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptyInput);
        }
        if order > limits.max_order {
            return Err(Error::OrderCapExceeded {
                order,
                cap: limits.max_order,
            });
        }
        let radix = factors.len();
        let m = tree_len(radix, order).unwrap_or(u128::MAX);
        if m > limits.max_table_len as u128 {
            return Err(Error::TableBudgetExceeded {
                m,
                budget: limits.max_table_len,
            });
        }
        let m = m as usize;
        let mut betas = Vec::with_capacity(m);
        let mut offsets = Vec::with_capacity(order + 2);
        offsets.push(0);
        betas.push(1.0);
        offsets.push(1);
        let mut prev = 0..1;
        for k in 1..=order {
            let start = betas.len();
            let scale = step / k as f64;
            for p in prev.clone() {
                let base = betas[p] * scale;
                for f in &factors {
                    betas.push(base * f.weight);
                }
            }
            prev = start..betas.len();
            offsets.push(betas.len());
        }
        let s = compensated_sum(betas.iter().copied());
        let uniform_rank = factors.iter().all(|f| f.rank == factors[0].rank);
        Ok(Self {
            n,
            order,
            factors,
            layout: Layout::Tree { radix, offsets },
            betas,
            s,
            uniform_rank,
        })
    }

    /// Explicit table. Each entry is `(β, phase, factor ids)` with the factor
    /// ids listed in the order they are applied to the state.
    pub fn explicit(
        n: usize,
        ops: Vec<PauliOp>,
        entries: Vec<(f64, Phase, Vec<usize>)>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut betas = Vec::with_capacity(entries.len());
        let mut list = Vec::with_capacity(entries.len());
        let mut order = 0;
        for (beta, phase, ids) in entries {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "coefficient {beta} is not a non-negative real"
                )));
            }
            if let Some(&bad) = ids.iter().find(|&&i| i >= ops.len()) {
                return Err(Error::InvalidArgument(format!("factor id {bad} out of range")));
            }
            order = order.max(ids.len());
            betas.push(beta);
            list.push(ExplicitEntry {
                phase,
                factors: ids,
            });
        }
        let factors = ops
            .into_iter()
            .enumerate()
            .map(|(i, op)| Factor {
                op,
                weight: 1.0,
                rank: 0,
                term: i,
            })
            .collect();
        let s = compensated_sum(betas.iter().copied());
        Ok(Self {
            n,
            order,
            factors,
            layout: Layout::Explicit(list),
            betas,
            s,
            uniform_rank: true,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Truncation order `K` (longest product length for explicit tables).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of entries `m`.
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `s = Σ_j β_j`.
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Number of distinct factor digits (`L` for Taylor tables, `L·M` for Dyson tables).
    pub fn radix(&self) -> Option<usize> {
        match &self.layout {
            Layout::Tree { radix, .. } => Some(*radix),
            Layout::Explicit(_) => None,
        }
    }

    pub fn encode(&self, index: &IndexTuple) -> Result<usize> {
        let Layout::Tree { radix, offsets } = &self.layout else {
            return Err(Error::InvalidArgument("explicit tables have no tuple codec".into()));
        };
        if index.order > self.order || index.digits.len() != index.order {
            return Err(Error::InvalidArgument(format!("bad index tuple {index:?}")));
        }
        let mut local = 0usize;
        for &d in &index.digits {
            if d >= *radix {
                return Err(Error::InvalidArgument(format!("digit {d} out of range")));
            }
            local = local * radix + d;
        }
        Ok(offsets[index.order] + local)
    }

    pub fn decode(&self, j: usize) -> Result<IndexTuple> {
        let Layout::Tree { radix, offsets } = &self.layout else {
            return Err(Error::InvalidArgument("explicit tables have no tuple codec".into()));
        };
        if j >= self.betas.len() {
            return Err(Error::InvalidArgument(format!("index {j} out of range")));
        }
        let order = offsets.partition_point(|&o| o <= j) - 1;
        let mut local = j - offsets[order];
        let mut digits = vec![0; order];
        for slot in digits.iter_mut().rev() {
            *slot = local % radix;
            local /= radix;
        }
        Ok(IndexTuple { order, digits })
    }

    fn application_order(&self, digits: &[usize], out: &mut Vec<usize>) {
        out.clear();
        if self.uniform_rank {
            out.extend(digits.iter().rev().copied());
            return;
        }
        let mut positions: Vec<usize> = (0..digits.len()).collect();
        positions.sort_by_key(|&p| (self.factors[digits[p]].rank, std::cmp::Reverse(p)));
        out.extend(positions.into_iter().map(|p| digits[p]));
    }

    /// Phase and first-applied-first factor list of entry `j`.
    pub fn entry(&self, j: usize) -> Result<(Phase, Vec<usize>)> {
        match &self.layout {
            Layout::Tree { .. } => {
                let idx = self.decode(j)?;
                let mut order = Vec::new();
                self.application_order(&idx.digits, &mut order);
                Ok((Phase::minus_i_pow(idx.order), order))
            }
            Layout::Explicit(list) => {
                let e = list
                    .get(j)
                    .ok_or_else(|| Error::InvalidArgument(format!("index {j} out of range")))?;
                Ok((e.phase, e.factors.clone()))
            }
        }
    }

    /// Calls `f(j, phase, factors)` for every entry in index order, with the
    /// factors listed first-applied first.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, Phase, &[usize])) {
        match &self.layout {
            Layout::Explicit(list) => {
                for (j, e) in list.iter().enumerate() {
                    f(j, e.phase, &e.factors);
                }
            }
            Layout::Tree { radix, .. } => {
                let mut j = 0usize;
                let mut digits: Vec<usize> = Vec::with_capacity(self.order);
                let mut applied = Vec::with_capacity(self.order);
                for k in 0..=self.order {
                    digits.clear();
                    digits.resize(k, 0);
                    let phase = Phase::minus_i_pow(k);
                    loop {
                        self.application_order(&digits, &mut applied);
                        f(j, phase, &applied);
                        j += 1;
                        // odometer, last digit fastest
                        let mut wrapped = true;
                        for pos in (0..k).rev() {
                            digits[pos] += 1;
                            if digits[pos] < *radix {
                                wrapped = false;
                                break;
                            }
                            digits[pos] = 0;
                        }
                        if wrapped {
                            break;
                        }
                    }
                }
            }
        }
    }
}

/// Pauli factors of `h` at unit weight scaling, one per term.
pub(crate) fn taylor_factors(h: &LcuHamiltonian) -> Vec<Factor> {
    h.terms()
        .iter()
        .enumerate()
        .map(|(l, t)| Factor {
            op: t.op(),
            weight: t.weight(),
            rank: 0,
            term: l,
        })
        .collect()
}

/// Truncated Taylor table of `exp(-iH·seg_time)` at order `order`.
pub fn taylor_table(
    h: &LcuHamiltonian,
    seg_time: f64,
    order: usize,
    limits: &Limits,
) -> Result<CoefficientTable> {
    CoefficientTable::tree(h.num_qubits(), taylor_factors(h), order, seg_time, limits)
}

/// Coefficient table of a full segment of `plan`.
pub fn build_coefficient_table(
    h: &LcuHamiltonian,
    plan: &SegmentPlan,
    limits: &Limits,
) -> Result<CoefficientTable> {
    taylor_table(h, plan.seg_time, plan.order, limits)
}

/// Coefficient table of the last segment of `plan`.
pub fn build_final_table(
    h: &LcuHamiltonian,
    plan: &SegmentPlan,
    limits: &Limits,
) -> Result<CoefficientTable> {
    taylor_table(h, plan.final_time, plan.final_order, limits)
}

/// `a_j = sqrt(β_j / s)`, the first column of the prepare unitary.
pub fn prepare_amplitudes(table: &CoefficientTable) -> Vec<f64> {
    let s = table.s();
    table.betas().iter().map(|b| (b / s).sqrt()).collect()
}
