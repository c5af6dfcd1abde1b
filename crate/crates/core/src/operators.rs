//! The prepare, select, projector, reflection and amplification operators,
//! applied to a state on the joint (ancilla ⊗ system) space.
//!
//! The ancilla is addressed by the compressed table index `j` rather than by
//! qubit registers. When the final-segment correction is active the ancilla
//! carries one more qubit `b`, and amplitudes are laid out as `(b, j, x)`,
//! row-major.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, norm};
use crate::taylor::{prepare_amplitudes, CoefficientTable};
use crate::Limits;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Amplitudes on `(flag qubit) ⊗ (ancilla index j < m) ⊗ (system, dim 2^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    m: usize,
    n: usize,
    flagged: bool,
    amps: Vec<Complex64>,
}

impl JointState {
    /// `|0⟩|ψ⟩`, with the flag qubit (if any) also in `|0⟩`.
    pub fn with_zero_ancilla(m: usize, psi: &[Complex64], flagged: bool) -> Result<Self> {
        let dim = psi.len();
        if !dim.is_power_of_two() || m == 0 {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two(),
                got: dim,
            });
        }
        let halves = if flagged { 2 } else { 1 };
        let mut amps = vec![ZERO; halves * m * dim];
        amps[..dim].copy_from_slice(psi);
        Ok(Self {
            m,
            n: dim.trailing_zeros() as usize,
            flagged,
            amps,
        })
    }

    pub fn from_amplitudes(m: usize, n: usize, flagged: bool, amps: Vec<Complex64>) -> Result<Self> {
        let expected = (if flagged { 2 } else { 1 }) * m * (1usize << n);
        if amps.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amps.len(),
            });
        }
        Ok(Self { m, n, flagged, amps })
    }

    pub fn ancilla_len(&self) -> usize {
        self.m
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn system_dim(&self) -> usize {
        1 << self.n
    }

    pub fn is_flagged(&self) -> bool {
        self.flagged
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// System amplitudes for ancilla index `j` (flag qubit `0`).
    pub fn block(&self, j: usize) -> &[Complex64] {
        let d = self.system_dim();
        &self.amps[j * d..(j + 1) * d]
    }

    fn halves_mut(&mut self) -> impl Iterator<Item = &mut [Complex64]> {
        let half = self.m * self.system_dim();
        self.amps.chunks_mut(half)
    }
}

/// A unitary `B` with `B|0⟩ = Σ_j sqrt(β_j / s) |j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub enum PrepareUnitary {
    /// Real Householder reflection `I - 2vvᵀ` with `v ∝ target - e_0`;
    /// `None` when the target already is `e_0`. Involutory, so `B† = B`.
    Householder {
        target: Vec<f64>,
        v: Option<Vec<f64>>,
    },
    /// An explicit unitary completion, for small ancilla spaces.
    Dense {
        target: Vec<f64>,
        matrix: DMatrix<Complex64>,
    },
}

impl PrepareUnitary {
    pub fn householder(target: Vec<f64>) -> Self {
        let mut u = target.clone();
        u[0] -= 1.0;
        let nrm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = (nrm > 1e-300).then(|| u.iter().map(|x| x / nrm).collect());
        PrepareUnitary::Householder { target, v }
    }

    pub fn for_table(table: &CoefficientTable) -> Self {
        Self::householder(prepare_amplitudes(table))
    }

    /// Uses `matrix` as the completion; its first column must be `target`
    /// and it must be unitary.
    pub fn dense(target: Vec<f64>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let m = target.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: matrix.nrows(),
            });
        }
        for (j, &a) in target.iter().enumerate() {
            if (matrix[(j, 0)] - c(a, 0.0)).norm() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "completion's first column differs from the target".into(),
                ));
            }
        }
        let gram = matrix.adjoint() * &matrix - DMatrix::<Complex64>::identity(m, m);
        if gram.iter().any(|z| z.norm() > 1e-12) {
            return Err(Error::InvalidArgument("completion is not unitary".into()));
        }
        Ok(PrepareUnitary::Dense { target, matrix })
    }

    pub fn target(&self) -> &[f64] {
        match self {
            PrepareUnitary::Householder { target, .. } | PrepareUnitary::Dense { target, .. } => target,
        }
    }

    pub fn len(&self) -> usize {
        self.target().len()
    }

    pub fn is_empty(&self) -> bool {
        self.target().is_empty()
    }
}

fn check_ancilla(state: &JointState, m: usize) -> Result<()> {
    if state.m != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: state.m,
        });
    }
    Ok(())
}

/// Applies `B ⊗ 1` (or `B† ⊗ 1`) to the ancilla index.
pub fn apply_b(state: &mut JointState, prep: &PrepareUnitary, adjoint: bool) -> Result<()> {
    check_ancilla(state, prep.len())?;
    let dim = state.system_dim();
    let m = state.m;
    match prep {
        PrepareUnitary::Householder { v: None, .. } => {}
        PrepareUnitary::Householder { v: Some(v), .. } => {
            let mut dots = vec![ZERO; dim];
            for half in state.halves_mut() {
                dots.iter_mut().for_each(|d| *d = ZERO);
                for (j, &vj) in v.iter().enumerate() {
                    if vj == 0.0 {
                        continue;
                    }
                    for (d, a) in dots.iter_mut().zip(&half[j * dim..(j + 1) * dim]) {
                        *d += a * vj;
                    }
                }
                for (j, &vj) in v.iter().enumerate() {
                    if vj == 0.0 {
                        continue;
                    }
                    let f = -2.0 * vj;
                    for (a, d) in half[j * dim..(j + 1) * dim].iter_mut().zip(&dots) {
                        *a += d * f;
                    }
                }
            }
        }
        PrepareUnitary::Dense { matrix, .. } => {
            let op = if adjoint {
                matrix.adjoint()
            } else {
                matrix.clone()
            };
            let mut column = vec![ZERO; m];
            for half in state.halves_mut() {
                for x in 0..dim {
                    for (j, slot) in column.iter_mut().enumerate() {
                        *slot = half[j * dim + x];
                    }
                    for r in 0..m {
                        let mut acc = ZERO;
                        for (j, cj) in column.iter().enumerate() {
                            acc += op[(r, j)] * cj;
                        }
                        half[r * dim + x] = acc;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Applies `V_j` (or `V_j†`) in place to one system block using `scratch`.
#[inline]
fn apply_entry(
    table: &CoefficientTable,
    phase: crate::hamiltonian::Phase,
    applied: &[usize],
    block: &mut [Complex64],
    scratch: &mut [Complex64],
    adjoint: bool,
) {
    let factors = table.factors();
    let mut in_block = true;
    let mut step = |id: usize, in_block: &mut bool| {
        let op = &factors[id].op;
        if *in_block {
            op.apply_into(block, scratch, adjoint);
        } else {
            op.apply_into(scratch, block, adjoint);
        }
        *in_block = !*in_block;
    };
    if adjoint {
        for &id in applied.iter().rev() {
            step(id, &mut in_block);
        }
    } else {
        for &id in applied {
            step(id, &mut in_block);
        }
    }
    let p = if adjoint { phase.conj() } else { phase }.value();
    if in_block {
        if p != c(1.0, 0.0) {
            block.iter_mut().for_each(|z| *z *= p);
        }
    } else {
        for (dst, src) in block.iter_mut().zip(scratch.iter()) {
            *dst = src * p;
        }
    }
}

/// Applies `select(V) = Σ_j |j⟩⟨j| ⊗ V_j` (or its adjoint).
pub fn apply_select_v(state: &mut JointState, table: &CoefficientTable, adjoint: bool) -> Result<()> {
    check_ancilla(state, table.len())?;
    if state.n != table.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: table.num_qubits(),
            got: state.n,
        });
    }
    let dim = state.system_dim();
    let mut scratch = vec![ZERO; dim];
    for half in state.halves_mut() {
        table.for_each_entry(|j, phase, applied| {
            let block = &mut half[j * dim..(j + 1) * dim];
            apply_entry(table, phase, applied, block, &mut scratch, adjoint);
        });
    }
    Ok(())
}

/// Zeroes every ancilla block except `j = 0` (flag `0`). Returns the squared
/// norm that was kept; the result is not renormalized.
pub fn apply_projector(state: &JointState) -> (JointState, f64) {
    let mut out = state.clone();
    let kept = project_in_place(&mut out);
    (out, kept)
}

pub fn project_in_place(state: &mut JointState) -> f64 {
    let dim = state.system_dim();
    let kept = state.amps[..dim].iter().map(|z| z.norm_sqr()).sum();
    state.amps[dim..].iter_mut().for_each(|z| *z = ZERO);
    kept
}

/// `R = 1 - 2P`: negates the `j = 0` block.
pub fn apply_reflection(state: &mut JointState) {
    let dim = state.system_dim();
    state.amps[..dim].iter_mut().for_each(|z| *z = -*z);
}

/// Rotation of the flag qubit, `|0⟩ ↦ cos θ|0⟩ + sin θ|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlagRotation {
    cos: f64,
    sin: f64,
}

impl FlagRotation {
    /// The rotation scaling the good amplitude `1/s` to exactly `1/2`:
    /// `cos θ = s / 2`, with `s` clamped to 2 when round-off pushes it over.
    pub fn for_normalization(s: f64) -> Result<Self> {
        if s > 2.0 + 1e-9 {
            return Err(Error::NormalizationAboveTwo(s));
        }
        let cos = (s / 2.0).min(1.0);
        let theta = cos.acos();
        Ok(Self {
            cos,
            sin: theta.sin(),
        })
    }

    pub fn cos(&self) -> f64 {
        self.cos
    }

    pub fn apply(&self, state: &mut JointState, adjoint: bool) -> Result<()> {
        if !state.flagged {
            return Err(Error::InvalidArgument("state has no flag qubit".into()));
        }
        let sin = if adjoint { -self.sin } else { self.sin };
        let half = state.m * state.system_dim();
        let (lo, hi) = state.amps.split_at_mut(half);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a0, *a1);
            *a0 = x * self.cos - y * sin;
            *a1 = x * sin + y * self.cos;
        }
        Ok(())
    }
}

/// `W = (B† ⊗ 1) select(V) (B ⊗ 1)`, optionally tensored with a flag
/// rotation, and the amplification step `A = -W R W† R W` built from it.
#[derive(Debug, Clone, Copy)]
pub struct LcuCircuit<'a> {
    pub table: &'a CoefficientTable,
    pub prep: &'a PrepareUnitary,
    pub flag: Option<FlagRotation>,
}

impl<'a> LcuCircuit<'a> {
    pub fn new(table: &'a CoefficientTable, prep: &'a PrepareUnitary) -> Self {
        Self {
            table,
            prep,
            flag: None,
        }
    }

    pub fn with_flag(mut self, flag: FlagRotation) -> Self {
        self.flag = Some(flag);
        self
    }

    /// Amplitude of the good branch: `⟨0|W|0⟩ = cos θ / s` as an operator
    /// multiple of `Ũ`.
    pub fn good_amplitude(&self) -> f64 {
        self.flag.map_or(1.0, |f| f.cos()) / self.table.s()
    }

    pub fn initial_state(&self, psi: &[Complex64]) -> Result<JointState> {
        if psi.len() != self.table.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.table.dim(),
                got: psi.len(),
            });
        }
        JointState::with_zero_ancilla(self.table.len(), psi, self.flag.is_some())
    }

    fn check_flag(&self, state: &JointState) -> Result<()> {
        if state.flagged != self.flag.is_some() {
            return Err(Error::InvalidArgument(
                "flag qubit presence differs between state and circuit".into(),
            ));
        }
        Ok(())
    }

    pub fn apply_w(&self, state: &mut JointState, adjoint: bool) -> Result<()> {
        self.check_flag(state)?;
        if adjoint {
            apply_b(state, self.prep, false)?;
            apply_select_v(state, self.table, true)?;
            apply_b(state, self.prep, true)?;
            if let Some(f) = self.flag {
                f.apply(state, true)?;
            }
        } else {
            if let Some(f) = self.flag {
                f.apply(state, false)?;
            }
            apply_b(state, self.prep, false)?;
            apply_select_v(state, self.table, false)?;
            apply_b(state, self.prep, true)?;
        }
        Ok(())
    }

    pub fn apply_a(&self, state: &mut JointState) -> Result<()> {
        self.apply_w(state, false)?;
        apply_reflection(state);
        self.apply_w(state, true)?;
        apply_reflection(state);
        self.apply_w(state, false)?;
        state.amps.iter_mut().for_each(|z| *z = -*z);
        Ok(())
    }
}

pub fn apply_w(
    state: &mut JointState,
    prep: &PrepareUnitary,
    table: &CoefficientTable,
    adjoint: bool,
) -> Result<()> {
    LcuCircuit::new(table, prep).apply_w(state, adjoint)
}

pub fn apply_a(state: &mut JointState, prep: &PrepareUnitary, table: &CoefficientTable) -> Result<()> {
    LcuCircuit::new(table, prep).apply_a(state)
}

/// `Σ_j β_j V_j ψ` (or `Σ_j β_j V_j† ψ`), streamed over the table without
/// forming the joint state.
pub fn apply_u_tilde(table: &CoefficientTable, psi: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>> {
    let dim = table.dim();
    if psi.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: psi.len(),
        });
    }
    let betas = table.betas();
    let mut out = vec![ZERO; dim];
    let mut block = vec![ZERO; dim];
    let mut scratch = vec![ZERO; dim];
    table.for_each_entry(|j, phase, applied| {
        let beta = betas[j];
        if beta == 0.0 {
            return;
        }
        block.copy_from_slice(psi);
        apply_entry(table, phase, applied, &mut block, &mut scratch, adjoint);
        for (o, b) in out.iter_mut().zip(&block) {
            *o += b * beta;
        }
    });
    Ok(out)
}

/// Dense `Ũ = Σ_j β_j V_j`, accumulated term by term.
pub fn dense_u_tilde(table: &CoefficientTable, limits: &Limits) -> Result<DMatrix<Complex64>> {
    limits.check_dense(table.num_qubits())?;
    let dim = table.dim();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    let mut e = vec![ZERO; dim];
    for x in 0..dim {
        e[x] = c(1.0, 0.0);
        let col = apply_u_tilde(table, &e, false)?;
        e[x] = ZERO;
        out.set_column(x, &nalgebra::DVector::from_vec(col));
    }
    Ok(out)
}
