//! Labeled bases for the polarization and OAM qubits, pure and mixed states.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * circular polarization: `|L> = (|H> + i|V>)/√2`, `|R> = (|H> - i|V>)/√2`;
//! * the OAM qubit spans `{|+2>, |-2>}` with `|+2>` as logical 0;
//! * two-photon states are ordered `{|H,+2>, |H,-2>, |V,+2>, |V,-2>}`, i.e.
//!   Alice's polarization is the most significant factor.
//!
//! The OAM superpositions `|a>` and `|d>` carry their global phases
//! `e^{∓iπ/4}` verbatim. No probability depends on them.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, cr, hermitian_eigen, hermitian_part, is_hermitian, CMatrix, CVector, ALGEBRA_TOL, C64, PSD_TOL,
};

/// The degree of freedom a named basis state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Degree {
    Polarization,
    OamO2,
    OamFundamental,
}

/// A named single-photon state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    H,
    V,
    /// `(|H> + |V>)/√2`
    Plus,
    /// `(|H> - |V>)/√2`
    Minus,
    L,
    R,
    /// OAM `m = +2`
    OamPlus2,
    /// OAM `m = -2`
    OamMinus2,
    /// `(|+2> + |-2>)/√2`
    OamH,
    /// `(|+2> - |-2>)/√2`
    OamV,
    /// `e^{-iπ/4}(|+2> + i|-2>)/√2`
    OamA,
    /// `e^{iπ/4}(|+2> - i|-2>)/√2`
    OamD,
    /// The fundamental `m = 0` mode.
    Oam0,
}

impl BasisLabel {
    pub const POLARIZATION: [BasisLabel; 6] = [
        BasisLabel::H,
        BasisLabel::V,
        BasisLabel::Plus,
        BasisLabel::Minus,
        BasisLabel::L,
        BasisLabel::R,
    ];
    pub const OAM_O2: [BasisLabel; 6] = [
        BasisLabel::OamPlus2,
        BasisLabel::OamMinus2,
        BasisLabel::OamH,
        BasisLabel::OamV,
        BasisLabel::OamA,
        BasisLabel::OamD,
    ];

    /// Builds a label from its degree and name, rejecting names that belong
    /// to another degree (`h` is not a polarization state, `H` is not OAM).
    pub fn new(degree: Degree, name: &str) -> Result<Self> {
        let label = match (degree, name) {
            (Degree::Polarization, "H") => BasisLabel::H,
            (Degree::Polarization, "V") => BasisLabel::V,
            (Degree::Polarization, "+") => BasisLabel::Plus,
            (Degree::Polarization, "-" | "−") => BasisLabel::Minus,
            (Degree::Polarization, "L") => BasisLabel::L,
            (Degree::Polarization, "R") => BasisLabel::R,
            (Degree::OamO2, "+2") => BasisLabel::OamPlus2,
            (Degree::OamO2, "-2" | "−2") => BasisLabel::OamMinus2,
            (Degree::OamO2, "h") => BasisLabel::OamH,
            (Degree::OamO2, "v") => BasisLabel::OamV,
            (Degree::OamO2, "a") => BasisLabel::OamA,
            (Degree::OamO2, "d") => BasisLabel::OamD,
            (Degree::OamFundamental, "0") => BasisLabel::Oam0,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "`{name}` is not a basis state of {degree:?}"
                )))
            }
        };
        Ok(label)
    }

    pub fn degree(self) -> Degree {
        use BasisLabel::*;
        match self {
            H | V | Plus | Minus | L | R => Degree::Polarization,
            OamPlus2 | OamMinus2 | OamH | OamV | OamA | OamD => Degree::OamO2,
            Oam0 => Degree::OamFundamental,
        }
    }

    pub fn name(self) -> &'static str {
        use BasisLabel::*;
        match self {
            H => "H",
            V => "V",
            Plus => "+",
            Minus => "-",
            L => "L",
            R => "R",
            OamPlus2 => "+2",
            OamMinus2 => "-2",
            OamH => "h",
            OamV => "v",
            OamA => "a",
            OamD => "d",
            Oam0 => "0",
        }
    }

    /// The factor space this state lives in.
    pub fn factor(self) -> Factor {
        match self.degree() {
            Degree::Polarization => Factor::Polarization,
            Degree::OamO2 => Factor::OamO2,
            Degree::OamFundamental => Factor::OamFundamental,
        }
    }

    /// Raw amplitudes in the factor's computational basis.
    pub(crate) fn amplitudes(self) -> Vec<C64> {
        use BasisLabel::*;
        let s = FRAC_1_SQRT_2;
        match self {
            H | OamPlus2 => vec![cr(1.0), cr(0.0)],
            V | OamMinus2 => vec![cr(0.0), cr(1.0)],
            Plus | OamH => vec![cr(s), cr(s)],
            Minus | OamV => vec![cr(s), cr(-s)],
            L => vec![cr(s), c(0.0, s)],
            R => vec![cr(s), c(0.0, -s)],
            OamA => {
                let g = C64::from_polar(s, -FRAC_PI_4);
                vec![g, g * c(0.0, 1.0)]
            }
            OamD => {
                let g = C64::from_polar(s, FRAC_PI_4);
                vec![g, g * c(0.0, -1.0)]
            }
            Oam0 => vec![cr(1.0)],
        }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisLabel {
    type Err = Error;

    /// Parses any unambiguous name; polarization and OAM names are disjoint.
    fn from_str(s: &str) -> Result<Self> {
        [Degree::Polarization, Degree::OamO2, Degree::OamFundamental]
            .into_iter()
            .find_map(|d| BasisLabel::new(d, s).ok())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown basis label `{s}`")))
    }
}

/// A tensor factor: the Hilbert space of one degree of freedom of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    /// `{|H>, |V>}`
    Polarization,
    /// `{|+2>, |-2>}`
    OamO2,
    /// `{|0>}`, the single mode a single-mode fiber transmits.
    OamFundamental,
    /// `{|0>, |+2>, |-2>}`, used where a spatial mode is not yet filtered.
    OamTruncated,
}

impl Factor {
    pub fn dim(self) -> usize {
        match self {
            Factor::Polarization | Factor::OamO2 => 2,
            Factor::OamFundamental => 1,
            Factor::OamTruncated => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::Polarization => "polarization",
            Factor::OamO2 => "oam_o2",
            Factor::OamFundamental => "oam_0",
            Factor::OamTruncated => "oam_0_pm2",
        }
    }

    pub fn is_oam(self) -> bool {
        !matches!(self, Factor::Polarization)
    }

    /// Isometric embedding of `self` into `target`, when one exists.
    pub(crate) fn embedding_into(self, target: Factor) -> Option<CMatrix> {
        if self == target {
            return Some(CMatrix::identity(self.dim(), self.dim()));
        }
        let mut m = CMatrix::zeros(target.dim(), self.dim());
        match (self, target) {
            (Factor::OamFundamental, Factor::OamTruncated) => m[(0, 0)] = cr(1.0),
            (Factor::OamO2, Factor::OamTruncated) => {
                m[(1, 0)] = cr(1.0);
                m[(2, 1)] = cr(1.0);
            }
            _ => return None,
        }
        Some(m)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polarization" => Ok(Factor::Polarization),
            "oam_o2" => Ok(Factor::OamO2),
            "oam_0" => Ok(Factor::OamFundamental),
            "oam_0_pm2" => Ok(Factor::OamTruncated),
            _ => Err(Error::InvalidArgument(format!("unknown factor `{s}`"))),
        }
    }
}

fn total_dim(factors: &[Factor]) -> usize {
    factors.iter().map(|f| f.dim()).product()
}

pub(crate) fn dims(factors: &[Factor]) -> Vec<usize> {
    factors.iter().map(|f| f.dim()).collect()
}

/// A pure state (or the unnormalized output of a filtering element).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    factors: Vec<Factor>,
    normalized: bool,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, factors: Vec<Factor>) -> Result<Self> {
        let expected = total_dim(&factors);
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: amplitudes.len(),
            });
        }
        let v = CVector::from_vec(amplitudes);
        let n = v.norm_squared();
        if (n - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::NotNormalized(n.sqrt()));
        }
        Ok(StateVector {
            amplitudes: v,
            factors,
            normalized: true,
        })
    }

    pub(crate) fn from_raw(amplitudes: CVector, factors: Vec<Factor>, normalized: bool) -> Self {
        debug_assert_eq!(amplitudes.len(), total_dim(&factors));
        StateVector {
            amplitudes,
            factors,
            normalized,
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn renormalized(&self) -> Result<StateVector> {
        let n = self.amplitudes.norm();
        if n <= ALGEBRA_TOL {
            return Err(Error::DegenerateInput("zero state cannot be renormalized".into()));
        }
        Ok(StateVector::from_raw(
            self.amplitudes.unscale(n),
            self.factors.clone(),
            true,
        ))
    }
}

/// `|label>` as a single-factor state.
pub fn basis_ket(label: BasisLabel) -> StateVector {
    StateVector::from_raw(CVector::from_vec(label.amplitudes()), vec![label.factor()], true)
}

/// A square operator on a labeled tensor space; used for observables and for
/// estimates that are not (yet) physical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixRecord", try_from = "MatrixRecord")]
pub struct Operator {
    matrix: CMatrix,
    factors: Vec<Factor>,
}

impl Operator {
    pub fn new(matrix: CMatrix, factors: Vec<Factor>) -> Result<Self> {
        let expected = total_dim(&factors);
        if !matrix.is_square() || matrix.nrows() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: matrix.nrows(),
            });
        }
        Ok(Operator { matrix, factors })
    }

    pub fn identity(factors: Vec<Factor>) -> Self {
        let d = total_dim(&factors);
        Operator {
            matrix: CMatrix::identity(d, d),
            factors,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        is_hermitian(&self.matrix, tol)
    }
}

/// A mixed state: Hermitian, positive semidefinite, unit trace. Outputs of
/// filtering elements carry the same type flagged unnormalized, with the
/// trace equal to the success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixRecord", try_from = "MatrixRecord")]
pub struct DensityMatrix {
    matrix: CMatrix,
    factors: Vec<Factor>,
    normalized: bool,
}

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix, factors: Vec<Factor>) -> Result<Self> {
        let op = Operator::new(matrix, factors)?;
        if !op.is_hermitian(ALGEBRA_TOL) {
            return Err(Error::InvalidArgument("density matrix is not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > ALGEBRA_TOL || tr.im.abs() > ALGEBRA_TOL {
            return Err(Error::NotNormalized(tr.re));
        }
        let lowest = linalg::hermitian_eigenvalues(&op.matrix)[0];
        if lowest < -PSD_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix has negative eigenvalue {lowest:e}"
            )));
        }
        Ok(DensityMatrix {
            matrix: hermitian_part(&op.matrix),
            factors: op.factors,
            normalized: true,
        })
    }

    pub(crate) fn from_raw(matrix: CMatrix, factors: Vec<Factor>, normalized: bool) -> Self {
        debug_assert_eq!(matrix.nrows(), total_dim(&factors));
        DensityMatrix {
            matrix: hermitian_part(&matrix),
            factors,
            normalized,
        }
    }

    pub fn maximally_mixed(factors: Vec<Factor>) -> Self {
        let d = total_dim(&factors);
        DensityMatrix::from_raw(CMatrix::identity(d, d).unscale(d as f64), factors, true)
    }

    /// `|psi><psi|`; `psi` must be normalized.
    pub fn from_ket(psi: &StateVector) -> Result<Self> {
        let n = psi.norm_sqr();
        if !psi.is_normalized() || (n - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::NotNormalized(n.sqrt()));
        }
        Ok(DensityMatrix::from_raw(
            linalg::outer(&psi.amplitudes, &psi.amplitudes),
            psi.factors.clone(),
            true,
        ))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        // Tr(ρρ) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.norm_squared()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }

    /// `Tr(ρ A)`
    pub fn expectation(&self, observable: &CMatrix) -> Result<C64> {
        if observable.nrows() != self.dim() || observable.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: observable.nrows(),
            });
        }
        Ok(linalg::trace(&(&self.matrix * observable)))
    }

    /// `U ρ U†` for a unitary on the full space.
    pub fn conjugated(&self, unitary: &CMatrix) -> Result<DensityMatrix> {
        if unitary.ncols() != self.dim() || unitary.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: unitary.ncols(),
            });
        }
        Ok(DensityMatrix::from_raw(
            unitary * &self.matrix * unitary.adjoint(),
            self.factors.clone(),
            self.normalized,
        ))
    }

    pub fn renormalized(&self) -> Result<DensityMatrix> {
        let tr = self.trace();
        if tr <= ALGEBRA_TOL {
            return Err(Error::DegenerateInput("zero-trace state cannot be renormalized".into()));
        }
        Ok(DensityMatrix::from_raw(
            self.matrix.unscale(tr),
            self.factors.clone(),
            true,
        ))
    }

    /// Convex mixture `w·self + (1−w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.factors != other.factors {
            return Err(Error::InvalidArgument("mixing states on different spaces".into()));
        }
        Ok(DensityMatrix::from_raw(
            self.matrix.scale(w) + other.matrix.scale(1.0 - w),
            self.factors.clone(),
            self.normalized && other.normalized,
        ))
    }

    pub fn to_operator(&self) -> Operator {
        Operator {
            matrix: self.matrix.clone(),
            factors: self.factors.clone(),
        }
    }

    /// Reduced state on the factors listed in `keep`; the rest are traced out.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.factors.len();
        if let Some(&index) = keep.iter().find(|&&k| k >= n) {
            return Err(Error::IndexOutOfRange { index, len: n });
        }
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let dims = dims(&self.factors);
        let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let d_keep: usize = kept_dims.iter().product();
        let mut out = CMatrix::zeros(d_keep, d_keep);
        let d = self.dim();
        for i in 0..d {
            let di = linalg::digits(i, &dims);
            for j in 0..d {
                let dj = linalg::digits(j, &dims);
                if traced.iter().any(|&t| di[t] != dj[t]) {
                    continue;
                }
                let ki: Vec<usize> = keep.iter().map(|&k| di[k]).collect();
                let kj: Vec<usize> = keep.iter().map(|&k| dj[k]).collect();
                out[(linalg::compose(&ki, &kept_dims), linalg::compose(&kj, &kept_dims))] += self.matrix[(i, j)];
            }
        }
        Ok(DensityMatrix::from_raw(
            out,
            keep.iter().map(|&k| self.factors[k]).collect(),
            self.normalized,
        ))
    }
}

/// Convenience wrapper for [`DensityMatrix::from_ket`].
pub fn density_from_ket(psi: &StateVector) -> Result<DensityMatrix> {
    DensityMatrix::from_ket(psi)
}

/// Convenience wrapper for [`DensityMatrix::partial_trace`].
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    rho.partial_trace(keep)
}

/// Kronecker product with concatenated factor lists.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Result<Self> {
        if self.normalized != other.normalized {
            return Err(Error::InvalidArgument(
                "cannot tensor a normalized state with an unnormalized one".into(),
            ));
        }
        let factors = [self.factors.as_slice(), other.factors.as_slice()].concat();
        Ok(StateVector::from_raw(
            linalg::kron_vec(&self.amplitudes, &other.amplitudes),
            factors,
            self.normalized,
        ))
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Result<Self> {
        if self.normalized != other.normalized {
            return Err(Error::InvalidArgument(
                "cannot tensor a normalized state with an unnormalized one".into(),
            ));
        }
        let factors = [self.factors.as_slice(), other.factors.as_slice()].concat();
        Ok(DensityMatrix::from_raw(
            linalg::kron(&self.matrix, &other.matrix),
            factors,
            self.normalized,
        ))
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let factors = [self.factors.as_slice(), other.factors.as_slice()].concat();
        Ok(Operator {
            matrix: linalg::kron(&self.matrix, &other.matrix),
            factors,
        })
    }
}

pub fn tensor<T: Tensor>(u: &T, v: &T) -> Result<T> {
    u.tensor(v)
}

/// Nearest physical state by eigenvalue clamping: negative eigenvalues are
/// set to zero and the remainder renormalized to unit trace.
pub fn project_to_physical(op: &Operator) -> Result<DensityMatrix> {
    if !op.is_hermitian(1e-9) {
        return Err(Error::InvalidArgument("projection needs a Hermitian input".into()));
    }
    let (values, vectors) = hermitian_eigen(&op.matrix);
    let clamped: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= ALGEBRA_TOL {
        return Err(Error::DegenerateInput("matrix has no positive spectral weight".into()));
    }
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        clamped.len(),
        clamped.iter().map(|&x| cr(x / total)),
    ));
    Ok(DensityMatrix::from_raw(
        &vectors * diag * vectors.adjoint(),
        op.factors.clone(),
        true,
    ))
}

/// JSON form shared by [`Operator`] and [`DensityMatrix`]: `basis` lists the
/// factors, `matrix` holds rows of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub basis: Vec<String>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixRecord {
    fn from_parts(matrix: &CMatrix, factors: &[Factor]) -> Self {
        MatrixRecord {
            basis: factors.iter().map(|f| f.name().to_string()).collect(),
            matrix: (0..matrix.nrows())
                .map(|i| {
                    (0..matrix.ncols())
                        .map(|j| [matrix[(i, j)].re, matrix[(i, j)].im])
                        .collect()
                })
                .collect(),
        }
    }

    fn into_parts(self) -> Result<(CMatrix, Vec<Factor>)> {
        let factors = self.basis.iter().map(|s| s.parse()).collect::<Result<Vec<Factor>>>()?;
        let n = self.matrix.len();
        if self.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        let m = CMatrix::from_fn(n, n, |i, j| c(self.matrix[i][j][0], self.matrix[i][j][1]));
        Ok((m, factors))
    }
}

impl From<Operator> for MatrixRecord {
    fn from(op: Operator) -> Self {
        MatrixRecord::from_parts(&op.matrix, &op.factors)
    }
}

impl From<DensityMatrix> for MatrixRecord {
    fn from(rho: DensityMatrix) -> Self {
        MatrixRecord::from_parts(&rho.matrix, &rho.factors)
    }
}

impl TryFrom<MatrixRecord> for Operator {
    type Error = Error;

    fn try_from(rec: MatrixRecord) -> Result<Self> {
        let (m, f) = rec.into_parts()?;
        Operator::new(m, f)
    }
}

impl TryFrom<MatrixRecord> for DensityMatrix {
    type Error = Error;

    fn try_from(rec: MatrixRecord) -> Result<Self> {
        let (m, f) = rec.into_parts()?;
        DensityMatrix::new(m, f)
    }
}
