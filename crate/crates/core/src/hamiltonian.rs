//! Hamiltonians written as positive-weighted sums of Pauli-product unitaries,
//! `H = Σ_ℓ α_ℓ H_ℓ` with `α_ℓ > 0` and `H_ℓ = phase_ℓ · (P_1 ⊗ ⋯ ⊗ P_n)`.
//!
//! Text format (`.ham`): one `<coefficient> <axes>` pair per line, `#` starts
//! a comment, blank lines are ignored. The first letter of an axes string acts
//! on the most significant bit of the basis index, so `"XI"` flips bit `n-1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::Limits;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::InvalidPauli { letter: other }),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A unit-modulus phase from the group `{1, -1, i, -i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Phase {
    PlusOne,
    MinusOne,
    PlusI,
    MinusI,
}

impl Phase {
    pub fn value(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    /// Exponent `e` with `phase = i^e`.
    fn exponent(self) -> u8 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    fn from_exponent(e: u8) -> Self {
        match e % 4 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn conj(self) -> Self {
        Phase::from_exponent(4 - self.exponent())
    }

    /// `(-i)^k`, the phase carried by an order-`k` Taylor term.
    pub fn minus_i_pow(k: usize) -> Self {
        Phase::from_exponent((3 * (k % 4)) as u8)
    }

    pub fn from_sign(x: f64) -> Self {
        if x < 0.0 {
            Phase::MinusOne
        } else {
            Phase::PlusOne
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_exponent(self.exponent() + rhs.exponent())
    }
}

/// Bit-mask form of `phase · P_1 ⊗ ⋯ ⊗ P_n`, applied in `O(2^n)` without
/// materializing the matrix.
///
/// With `Y = i·X·Z`, the operator maps `|x⟩` to
/// `phase · i^{#Y} · (-1)^{popcount(x & z_mask)} |x ⊕ x_mask⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliOp {
    x_mask: usize,
    z_mask: usize,
    y_phase: Phase,
    phase: Phase,
}

impl PauliOp {
    pub fn new(axes: &[Pauli], phase: Phase) -> Self {
        let n = axes.len();
        let mut x_mask = 0usize;
        let mut z_mask = 0usize;
        let mut y_count = 0u8;
        for (q, p) in axes.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x_mask |= bit,
                Pauli::Z => z_mask |= bit,
                Pauli::Y => {
                    x_mask |= bit;
                    z_mask |= bit;
                    y_count = y_count.wrapping_add(1);
                }
            }
        }
        Self {
            x_mask,
            z_mask,
            y_phase: Phase::from_exponent(y_count % 4),
            phase,
        }
    }

    pub fn with_phase(self, phase: Phase) -> Self {
        Self { phase, ..self }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Writes `op · input` (or `op† · input`) into `output`.
    #[inline]
    pub fn apply_into(&self, input: &[Complex64], output: &mut [Complex64], adjoint: bool) {
        debug_assert_eq!(input.len(), output.len());
        let phase = if adjoint { self.phase.conj() } else { self.phase };
        let c = (phase * self.y_phase).value();
        let neg = -c;
        for (x, &amp) in input.iter().enumerate() {
            let sign = if (x & self.z_mask).count_ones() & 1 == 1 {
                neg
            } else {
                c
            };
            output[x ^ self.x_mask] = sign * amp;
        }
    }
}

/// One weighted term `α · phase · P` of the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliTerm {
    weight: f64,
    phase: Phase,
    axes: Vec<Pauli>,
    #[serde(skip)]
    op: PauliOp,
}

impl PauliTerm {
    pub fn new(weight: f64, phase: Phase, axes: Vec<Pauli>) -> Result<Self> {
        if !weight.is_finite() {
            return Err(Error::NonRealCoefficient {
                text: weight.to_string(),
            });
        }
        if weight <= 0.0 {
            return Err(Error::ZeroCoefficient {
                axes: axes.iter().map(|p| p.as_char()).collect(),
            });
        }
        if axes.is_empty() {
            return Err(Error::InvalidArgument("empty axes string".into()));
        }
        let op = PauliOp::new(&axes, phase);
        Ok(Self {
            weight,
            phase,
            axes,
            op,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn axes_string(&self) -> String {
        self.axes.iter().map(|p| p.as_char()).collect()
    }

    pub fn num_qubits(&self) -> usize {
        self.axes.len()
    }

    /// The unitary part `phase · P` without the weight.
    pub fn op(&self) -> PauliOp {
        self.op
    }
}

fn parse_axes(axes: &str) -> Result<Vec<Pauli>> {
    axes.chars().map(Pauli::from_char).collect()
}

/// Folds the sign of a real coefficient into the term's phase so that the
/// stored weight is positive.
pub fn normalize_terms(raw_coefficient: f64, axes: &str) -> Result<PauliTerm> {
    if !raw_coefficient.is_finite() {
        return Err(Error::NonRealCoefficient {
            text: raw_coefficient.to_string(),
        });
    }
    if raw_coefficient == 0.0 {
        return Err(Error::ZeroCoefficient {
            axes: axes.to_string(),
        });
    }
    let axes = parse_axes(axes)?;
    PauliTerm::new(
        raw_coefficient.abs(),
        Phase::from_sign(raw_coefficient),
        axes,
    )
}

fn parse_coefficient(text: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonRealCoefficient {
            text: text.to_string(),
        }),
    }
}

/// Splits a line of a term file into its content, dropping `#` comments.
/// Returns `None` for blank and comment-only lines.
pub(crate) fn content_of(line: &str) -> Option<&str> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let body = body.trim();
    (!body.is_empty()).then_some(body)
}

pub(crate) fn two_fields(line_no: usize, body: &str) -> Result<(&str, &str)> {
    let mut it = body.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::Parse {
            line: line_no,
            message: format!("expected `<coefficient> <axes>`, found {body:?}"),
        }),
    }
}

pub(crate) fn at_line(line: usize, err: Error) -> Error {
    match err {
        Error::Parse { .. } => err,
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

/// `H = Σ_ℓ α_ℓ H_ℓ` with all `α_ℓ > 0`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcuHamiltonian {
    n: usize,
    terms: Vec<PauliTerm>,
    alpha_sum: f64,
}

impl LcuHamiltonian {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        let first = terms.first().ok_or(Error::EmptyInput)?;
        let n = first.num_qubits();
        for t in &terms {
            if t.num_qubits() != n {
                return Err(Error::InconsistentLength {
                    axes: t.axes_string(),
                    expected: n,
                    got: t.num_qubits(),
                });
            }
        }
        let alpha_sum = terms.iter().map(PauliTerm::weight).sum();
        let h = Self {
            n,
            terms,
            alpha_sum,
        };
        // Pauli products with real phases are Hermitian; only imaginary
        // phases need the dense check.
        if h.terms.iter().any(|t| !t.phase.is_real()) {
            if n > Limits::default().dense_qubits {
                return Err(Error::NotHermitian {
                    deviation: f64::INFINITY,
                });
            }
            let dense = build_dense(&h, &Limits::default())?;
            let deviation = crate::linalg::hermitian_deviation(&dense);
            if deviation > HERMITIAN_TOL {
                return Err(Error::NotHermitian { deviation });
            }
        }
        Ok(h)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha_sum
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(PauliTerm::weight).collect()
    }

    /// Renders the Hamiltonian back into the `.ham` text format.
    ///
    /// Fails for terms with an imaginary phase, which the format cannot carry.
    pub fn to_ham_text(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.terms {
            let coeff = match t.phase {
                Phase::PlusOne => t.weight,
                Phase::MinusOne => -t.weight,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "term {} has an imaginary phase",
                        t.axes_string()
                    )))
                }
            };
            out.push_str(&format!("{coeff} {}\n", t.axes_string()));
        }
        Ok(out)
    }
}

impl FromStr for LcuHamiltonian {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_hamiltonian(s)
    }
}

impl fmt::Display for LcuHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}·{:?}·{}", t.weight, t.phase, t.axes_string())?;
        }
        Ok(())
    }
}

/// Parses the `.ham` line format. Duplicate axes strings are kept as distinct
/// terms.
pub fn parse_hamiltonian(text: &str) -> Result<LcuHamiltonian> {
    let mut terms = Vec::new();
    let mut n: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some(body) = content_of(line) else {
            continue;
        };
        let (coeff, axes) = two_fields(line_no, body)?;
        let coeff = parse_coefficient(coeff).map_err(|e| at_line(line_no, e))?;
        let term = normalize_terms(coeff, axes).map_err(|e| at_line(line_no, e))?;
        match n {
            None => n = Some(term.num_qubits()),
            Some(expected) if expected != term.num_qubits() => {
                return Err(at_line(
                    line_no,
                    Error::InconsistentLength {
                        axes: axes.to_string(),
                        expected,
                        got: term.num_qubits(),
                    },
                ))
            }
            Some(_) => {}
        }
        terms.push(term);
    }
    LcuHamiltonian::new(terms)
}

/// Returns `phase · P · state` for one term (the weight is not applied).
pub fn apply_pauli_term(term: &PauliTerm, state: &[Complex64]) -> Result<Vec<Complex64>> {
    let dim = 1usize << term.num_qubits();
    if state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: state.len(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    term.op.apply_into(state, &mut out, false);
    Ok(out)
}

/// Dense `Σ_ℓ α_ℓ · phase_ℓ · P_ℓ`.
pub fn build_dense(h: &LcuHamiltonian, limits: &Limits) -> Result<DMatrix<Complex64>> {
    limits.check_dense(h.n)?;
    let dim = h.dim();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    let mut column = vec![Complex64::new(0.0, 0.0); dim];
    let mut image = vec![Complex64::new(0.0, 0.0); dim];
    for t in &h.terms {
        for x in 0..dim {
            column[x] = Complex64::new(1.0, 0.0);
            t.op.apply_into(&column, &mut image, false);
            column[x] = Complex64::new(0.0, 0.0);
            for (row, v) in image.iter().enumerate() {
                if *v != Complex64::new(0.0, 0.0) {
                    m[(row, x)] += *v * t.weight;
                }
            }
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_state};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(dim: usize, i: usize) -> Vec<Complex64> {
        let mut v = vec![c(0.0, 0.0); dim];
        v[i] = c(1.0, 0.0);
        v
    }

    #[test]
    fn parses_single_term() {
        let h = parse_hamiltonian("0.5 XZ").unwrap();
        assert_eq!(h.num_terms(), 1);
        assert_eq!(h.num_qubits(), 2);
        let t = &h.terms()[0];
        assert_eq!(t.weight(), 0.5);
        assert_eq!(t.phase(), Phase::PlusOne);
        assert_eq!(t.axes_string(), "XZ");
    }

    #[test]
    fn folds_negative_sign_into_phase() {
        let h = parse_hamiltonian("1.0 X\n-0.25 Z").unwrap();
        assert_eq!(h.weights(), vec![1.0, 0.25]);
        let phases: Vec<_> = h.terms().iter().map(|t| t.phase()).collect();
        assert_eq!(phases, vec![Phase::PlusOne, Phase::MinusOne]);
        assert_eq!(h.alpha_sum(), 1.25);
    }

    #[test]
    fn rejects_bad_letter() {
        let err = parse_hamiltonian("0.3 XQ").unwrap_err();
        assert!(err.to_string().contains("invalid Pauli letter 'Q'"), "{err}");
    }

    #[test]
    fn rejects_malformed_inputs() {
        assert_eq!(parse_hamiltonian("").unwrap_err(), Error::EmptyInput);
        assert_eq!(
            parse_hamiltonian("# only a comment\n\n").unwrap_err(),
            Error::EmptyInput
        );
        assert!(parse_hamiltonian("0.0 Z").is_err());
        assert!(parse_hamiltonian("1+2i Z").is_err());
        assert!(parse_hamiltonian("nan Z").is_err());
        assert!(parse_hamiltonian("1.0 X\n1.0 XX").is_err());
        assert!(parse_hamiltonian("1.0").is_err());
        assert!(parse_hamiltonian("1.0 X Z").is_err());
    }

    #[test]
    fn comments_and_duplicates() {
        let h = parse_hamiltonian("# header\n0.5 X # trailing\n\n0.5 X\n").unwrap();
        assert_eq!(h.num_terms(), 2);
        assert_eq!(h.alpha_sum(), 1.0);
    }

    #[test]
    fn normalize_examples() {
        let t = normalize_terms(-0.5, "X").unwrap();
        assert_eq!((t.weight(), t.phase()), (0.5, Phase::MinusOne));
        let t = normalize_terms(2.0, "IZ").unwrap();
        assert_eq!((t.weight(), t.phase()), (2.0, Phase::PlusOne));
        assert!(matches!(
            normalize_terms(0.0, "Z"),
            Err(Error::ZeroCoefficient { .. })
        ));
    }

    #[test]
    fn pauli_actions() {
        let xx = normalize_terms(1.0, "XX").unwrap();
        assert_eq!(apply_pauli_term(&xx, &basis(4, 0)).unwrap(), basis(4, 3));

        let y = normalize_terms(1.0, "Y").unwrap();
        let out = apply_pauli_term(&y, &basis(2, 0)).unwrap();
        assert_eq!(out, vec![c(0.0, 0.0), c(0.0, 1.0)]);

        let mz = normalize_terms(-1.0, "Z").unwrap();
        assert_eq!(apply_pauli_term(&mz, &basis(2, 1)).unwrap(), basis(2, 1));

        // First letter acts on the most significant bit.
        let xi = normalize_terms(1.0, "XI").unwrap();
        assert_eq!(apply_pauli_term(&xi, &basis(4, 0)).unwrap(), basis(4, 2));

        assert!(matches!(
            apply_pauli_term(&xi, &basis(2, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn phase_algebra() {
        assert_eq!(Phase::minus_i_pow(0), Phase::PlusOne);
        assert_eq!(Phase::minus_i_pow(1), Phase::MinusI);
        assert_eq!(Phase::minus_i_pow(2), Phase::MinusOne);
        assert_eq!(Phase::minus_i_pow(3), Phase::PlusI);
        assert_eq!(Phase::minus_i_pow(6), Phase::MinusOne);
        assert_eq!(Phase::PlusI.conj(), Phase::MinusI);
        assert_eq!(Phase::PlusI * Phase::PlusI, Phase::MinusOne);
    }

    #[test]
    fn dense_examples() {
        let lim = Limits::default();
        let z = build_dense(&parse_hamiltonian("1.0 Z").unwrap(), &lim).unwrap();
        assert_eq!(z[(0, 0)], c(1.0, 0.0));
        assert_eq!(z[(1, 1)], c(-1.0, 0.0));
        assert_eq!(z[(0, 1)], c(0.0, 0.0));

        let m = build_dense(&parse_hamiltonian("0.5 X\n0.5 Z").unwrap(), &lim).unwrap();
        let expected = [[0.5, 0.5], [0.5, -0.5]];
        for r in 0..2 {
            for col in 0..2 {
                assert_eq!(m[(r, col)], c(expected[r][col], 0.0));
            }
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let h = parse_hamiltonian("1.0 XXXX").unwrap();
        let lim = Limits {
            dense_qubits: 3,
            ..Limits::default()
        };
        assert_eq!(
            build_dense(&h, &lim).unwrap_err(),
            Error::DenseCapExceeded { n: 4, cap: 3 }
        );
    }

    #[test]
    fn imaginary_phase_must_cancel() {
        let plus = PauliTerm::new(1.0, Phase::PlusI, vec![Pauli::Z]).unwrap();
        let minus = PauliTerm::new(1.0, Phase::MinusI, vec![Pauli::Z]).unwrap();
        assert!(matches!(
            LcuHamiltonian::new(vec![plus.clone()]),
            Err(Error::NotHermitian { .. })
        ));
        // i·Z - i·Z = 0 is (trivially) Hermitian.
        assert!(LcuHamiltonian::new(vec![plus.clone(), minus]).is_ok());
        assert!(LcuHamiltonian::new(vec![plus]).is_err());
        assert!(LcuHamiltonian::new(vec![]).is_err());
    }

    fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize, l: usize) -> LcuHamiltonian {
        use rand::Rng;
        let letters = ['I', 'X', 'Y', 'Z'];
        let mut text = String::new();
        for _ in 0..l {
            let coeff: f64 = rng.random_range(-1.0..1.0);
            let coeff = if coeff == 0.0 { 0.5 } else { coeff };
            let axes: String = (0..n).map(|_| letters[rng.random_range(0..4)]).collect();
            text.push_str(&format!("{coeff} {axes}\n"));
        }
        parse_hamiltonian(&text).unwrap()
    }

    #[test]
    fn dense_matches_termwise_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hamiltonian(&mut rng, 3, 5);
        let m = build_dense(&h, &Limits::default()).unwrap();
        assert!(crate::linalg::hermitian_deviation(&m) <= 1e-12);
        for i in 0..8 {
            let e = basis(8, i);
            let mut acc = vec![c(0.0, 0.0); 8];
            for t in h.terms() {
                let v = apply_pauli_term(t, &e).unwrap();
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b * t.weight();
                }
            }
            for r in 0..8 {
                assert!((m[(r, i)] - acc[r]).norm() <= 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn pauli_application_preserves_norm(seed in any::<u64>(), n in 1usize..6, l in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hamiltonian(&mut rng, n, l);
            let psi = random_state(&mut rng, 1 << n);
            for t in h.terms() {
                let out = apply_pauli_term(t, &psi).unwrap();
                let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() <= 1e-14);
            }
        }

        #[test]
        fn dense_rendering_is_hermitian(seed in any::<u64>(), n in 1usize..4, l in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hamiltonian(&mut rng, n, l);
            let m = build_dense(&h, &Limits::default()).unwrap();
            prop_assert!(crate::linalg::hermitian_deviation(&m) <= 1e-12);
        }

        #[test]
        fn text_round_trip(seed in any::<u64>(), n in 1usize..5, l in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hamiltonian(&mut rng, n, l);
            let again = parse_hamiltonian(&h.to_ham_text().unwrap()).unwrap();
            prop_assert_eq!(&again, &h);
            let third = parse_hamiltonian(&again.to_ham_text().unwrap()).unwrap();
            prop_assert_eq!(third, again);
        }
    }
}
