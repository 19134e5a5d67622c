//! Optical elements as linear maps between labeled factor spaces.
//!
//! Each element is a single Kraus operator. `Unitary` elements are isometries
//! on their domain (`K†K = 1` there); `Filter` elements are contractions and
//! return unnormalized states whose norm is the success probability.
//!
//! The q-plate (charge 1) maps `|L,0> -> |R,+2>` and `|R,0> -> |L,-2>`. The
//! polarization-to-OAM transferrer is the q-plate followed by a polarizing
//! beamsplitter transmitting `|H>`, then a fixed phase on the OAM qubit that
//! brings the image of `|V>` to `|v>` (the raw composite sends it to `-i|v>`).
//! With that frame `H -> h`, `V -> v`, `+ -> +2`, `- -> -2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, lift, CMatrix};
use crate::states::{basis_ket, dims, BasisLabel, Degree, DensityMatrix, Factor, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    Unitary,
    Filter,
}

/// Probabilistic transferrers use a polarizing beamsplitter (success 1/2);
/// deterministic ones an interferometric layout with unit success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    #[default]
    Probabilistic,
    Deterministic,
}

impl TransferMode {
    pub fn success_probability(self) -> f64 {
        match self {
            TransferMode::Probabilistic => 0.5,
            TransferMode::Deterministic => 1.0,
        }
    }
}

/// A state after an element, with the probability the element let it through.
#[derive(Debug, Clone)]
pub struct Filtered<T> {
    pub state: T,
    pub success_probability: f64,
}

#[derive(Debug, Clone)]
pub struct OpticalMap {
    name: String,
    kind: MapKind,
    matrix: CMatrix,
    input: Vec<Factor>,
    output: Vec<Factor>,
    /// Projector onto the admissible part of the input space.
    domain: Option<CMatrix>,
}

impl OpticalMap {
    fn new(name: impl Into<String>, kind: MapKind, matrix: CMatrix, input: Vec<Factor>, output: Vec<Factor>) -> Self {
        debug_assert_eq!(matrix.ncols(), dims(&input).iter().product::<usize>());
        debug_assert_eq!(matrix.nrows(), dims(&output).iter().product::<usize>());
        OpticalMap {
            name: name.into(),
            kind,
            matrix,
            input,
            output,
            domain: None,
        }
    }

    fn with_domain(mut self, projector: CMatrix) -> Self {
        self.domain = Some(projector);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn input_factors(&self) -> &[Factor] {
        &self.input
    }

    pub fn output_factors(&self) -> &[Factor] {
        &self.output
    }

    /// `K†K` restricted to the domain, compared with the identity there.
    pub fn is_isometry(&self, tol: f64) -> bool {
        let gram = self.matrix.adjoint() * &self.matrix;
        let target = match &self.domain {
            Some(p) => p.clone(),
            None => CMatrix::identity(gram.nrows(), gram.ncols()),
        };
        let restricted = match &self.domain {
            Some(p) => p * gram * p,
            None => gram,
        };
        (restricted - target).norm() <= tol
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &OpticalMap) -> Result<OpticalMap> {
        if next.input != self.output {
            return Err(Error::InvalidArgument(format!(
                "cannot compose `{}` after `{}`: factor mismatch",
                next.name, self.name
            )));
        }
        let kind = if self.kind == MapKind::Unitary && next.kind == MapKind::Unitary {
            MapKind::Unitary
        } else {
            MapKind::Filter
        };
        let mut out = OpticalMap::new(
            format!("{} ∘ {}", next.name, self.name),
            kind,
            &next.matrix * &self.matrix,
            self.input.clone(),
            next.output.clone(),
        );
        out.domain = self.domain.clone();
        Ok(out)
    }

    /// Inverse of a unitary element, defined on its range.
    pub fn inverse(&self) -> Result<OpticalMap> {
        if self.kind != MapKind::Unitary {
            return Err(Error::Unsupported(format!(
                "`{}` is a filter and has no inverse",
                self.name
            )));
        }
        let range = &self.matrix * self.matrix.adjoint();
        Ok(OpticalMap::new(
            format!("{}⁻¹", self.name),
            MapKind::Unitary,
            self.matrix.adjoint(),
            self.output.clone(),
            self.input.clone(),
        )
        .with_domain(range))
    }

    /// Full-space operator for a state whose factors are `factors`, acting on
    /// `targets`. Returns the operator, the output factor list, and the
    /// full-space projector onto the complement of the domain (if any).
    fn resolve(&self, factors: &[Factor], targets: &[usize]) -> Result<(CMatrix, Vec<Factor>, Option<CMatrix>)> {
        if targets.len() != self.input.len() {
            return Err(Error::InvalidArgument(format!(
                "`{}` acts on {} factors, {} given",
                self.name,
                self.input.len(),
                targets.len()
            )));
        }
        for (k, &t) in targets.iter().enumerate() {
            if t >= factors.len() {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    len: factors.len(),
                });
            }
            if targets[..k].contains(&t) {
                return Err(Error::InvalidArgument(format!("factor {t} targeted twice")));
            }
        }
        // embed each target factor into the space the element expects
        let mut embed = CMatrix::identity(1, 1);
        for (&t, &want) in targets.iter().zip(&self.input) {
            let found = factors[t];
            let e = found.embedding_into(want).ok_or_else(|| {
                Error::InvalidInputSubspace(format!("`{}` expects {want} on factor {t}, found {found}", self.name))
            })?;
            embed = linalg::kron(&embed, &e);
        }
        let state_dims = dims(factors);
        let out_local = dims(&self.output);
        let full = lift(&(&self.matrix * &embed), &state_dims, targets, &out_local);
        let outside = self.domain.as_ref().map(|p| {
            let n = p.nrows();
            let q = CMatrix::identity(n, n) - p;
            let in_local: Vec<usize> = self.input.iter().map(|f| f.dim()).collect();
            lift(&(q * &embed), &state_dims, targets, &in_local)
        });
        let mut out_factors = factors.to_vec();
        for (&t, &f) in targets.iter().zip(&self.output) {
            out_factors[t] = f;
        }
        Ok((full, out_factors, outside))
    }

    pub fn apply_ket(&self, psi: &StateVector, targets: &[usize]) -> Result<Filtered<StateVector>> {
        let (full, factors, outside) = self.resolve(psi.factors(), targets)?;
        let norm_in = psi.norm_sqr();
        if let Some(q) = outside {
            let leak = (q * psi.amplitudes()).norm_squared();
            if leak > 1e-10 * norm_in.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidInputSubspace(format!(
                    "`{}` input has weight {leak:e} outside its domain",
                    self.name
                )));
            }
        }
        let out = full * psi.amplitudes();
        let p = if norm_in > 0.0 {
            out.norm_squared() / norm_in
        } else {
            0.0
        };
        let normalized = psi.is_normalized() && self.kind == MapKind::Unitary;
        Ok(Filtered {
            state: StateVector::from_raw(out, factors, normalized),
            success_probability: p,
        })
    }

    pub fn apply_density(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<Filtered<DensityMatrix>> {
        let (full, factors, outside) = self.resolve(rho.factors(), targets)?;
        let tr_in = rho.trace();
        if let Some(q) = outside {
            let leak = linalg::trace(&(&q * rho.matrix() * q.adjoint())).re;
            if leak > 1e-10 * tr_in.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidInputSubspace(format!(
                    "`{}` input has weight {leak:e} outside its domain",
                    self.name
                )));
            }
        }
        let out = &full * rho.matrix() * full.adjoint();
        let tr_out = linalg::trace(&out).re;
        let p = if tr_in > 0.0 { tr_out / tr_in } else { 0.0 };
        let normalized = rho.is_normalized() && self.kind == MapKind::Unitary;
        Ok(Filtered {
            state: DensityMatrix::from_raw(out, factors, normalized),
            success_probability: p,
        })
    }

    pub fn success_probability(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<f64> {
        Ok(self.apply_density(rho, targets)?.success_probability)
    }
}

fn ket_col(label: BasisLabel) -> CMatrix {
    let k = basis_ket(label);
    CMatrix::from_column_slice(k.dim(), 1, k.amplitudes().as_slice())
}

/// `|out><in|` for two single-factor labels or their tensor products.
fn ketbra(out: &CMatrix, inp: &CMatrix) -> CMatrix {
    out * inp.adjoint()
}

/// Charge-`q` q-plate acting on (polarization, OAM m=0). Only `q = 1` is
/// modeled.
pub fn qplate(q: i32) -> Result<OpticalMap> {
    if q != 1 {
        return Err(Error::Unsupported(format!("q-plate charge {q} (only q = 1)")));
    }
    let zero = ket_col(BasisLabel::Oam0);
    let l_in = linalg::kron(&ket_col(BasisLabel::L), &zero);
    let r_in = linalg::kron(&ket_col(BasisLabel::R), &zero);
    let r_plus2 = linalg::kron(&ket_col(BasisLabel::R), &ket_col(BasisLabel::OamPlus2));
    let l_minus2 = linalg::kron(&ket_col(BasisLabel::L), &ket_col(BasisLabel::OamMinus2));
    let m = ketbra(&r_plus2, &l_in) + ketbra(&l_minus2, &r_in);
    Ok(OpticalMap::new(
        "qplate(q=1)",
        MapKind::Unitary,
        m,
        vec![Factor::Polarization, Factor::OamFundamental],
        vec![Factor::Polarization, Factor::OamO2],
    ))
}

/// Rank-1 projector on a polarization state (analyzer arm: waveplates + PBS).
pub fn polarizer(label: BasisLabel) -> Result<OpticalMap> {
    if label.degree() != Degree::Polarization {
        return Err(Error::InvalidArgument(format!(
            "polarizer needs a polarization state, got `{label}`"
        )));
    }
    let k = ket_col(label);
    Ok(OpticalMap::new(
        format!("polarizer({label})"),
        MapKind::Filter,
        ketbra(&k, &k),
        vec![Factor::Polarization],
        vec![Factor::Polarization],
    ))
}

/// Half-wave plate with fast axis at `theta` from horizontal, global phase
/// dropped: `[[cos 2θ, sin 2θ], [sin 2θ, -cos 2θ]]`.
pub fn half_waveplate(theta: f64) -> OpticalMap {
    let (s, c2) = (2.0 * theta).sin_cos();
    let m = CMatrix::from_row_slice(2, 2, &[cr(c2), cr(s), cr(s), cr(-c2)]);
    OpticalMap::new(
        format!("hwp({theta})"),
        MapKind::Unitary,
        m,
        vec![Factor::Polarization],
        vec![Factor::Polarization],
    )
}

/// Quarter-wave plate with fast axis at `theta` from horizontal, global
/// phase dropped.
pub fn quarter_waveplate(theta: f64) -> OpticalMap {
    let (s, co) = theta.sin_cos();
    let off = c(s * co, -s * co);
    let m = CMatrix::from_row_slice(2, 2, &[c(co * co, s * s), off, off, c(s * s, co * co)]);
    OpticalMap::new(
        format!("qwp({theta})"),
        MapKind::Unitary,
        m,
        vec![Factor::Polarization],
        vec![Factor::Polarization],
    )
}

/// Single-mode fiber: keeps only the `m = 0` spatial mode.
pub fn smf_filter() -> OpticalMap {
    let mut m = CMatrix::zeros(1, 3);
    m[(0, 0)] = cr(1.0);
    OpticalMap::new(
        "smf",
        MapKind::Filter,
        m,
        vec![Factor::OamTruncated],
        vec![Factor::OamFundamental],
    )
}

/// Fixed OAM frame rotation applied after the raw q-plate + PBS composite.
/// It sends the normalized raw image of `|H>` to `|h>` and that of `|V>` to
/// `|v>`.
fn transferrer_frame(raw: &CMatrix) -> CMatrix {
    // raw is 4x2 on (pol ⊗ o2) <- (pol ⊗ 0); the H output rows are 0 and 1
    let mut w = CMatrix::zeros(2, 2);
    for (col, target) in [(0, BasisLabel::OamH), (1, BasisLabel::OamV)] {
        let image = raw.view((0, col), (2, 1)).into_owned();
        let image = image.unscale(image.norm());
        w += ketbra(&ket_col(target), &image);
    }
    w
}

/// The unit-success polarization-to-OAM map `|φ>|0> -> |H>|φ'>`, derived from
/// the q-plate and the PBS projection.
fn transferrer_isometry() -> CMatrix {
    let qp = qplate(1).expect("q = 1 is supported");
    let pbs = linalg::kron(
        &ketbra(&ket_col(BasisLabel::H), &ket_col(BasisLabel::H)),
        &CMatrix::identity(2, 2),
    );
    let raw = pbs * qp.matrix();
    let frame = linalg::kron(&CMatrix::identity(2, 2), &transferrer_frame(&raw));
    // raw has K†K = 1/2
    (frame * raw).scale(std::f64::consts::SQRT_2)
}

/// Polarization-to-OAM transferrer on (polarization, OAM m=0).
pub fn transferrer_pi_to_o2(mode: TransferMode) -> OpticalMap {
    let m = transferrer_isometry().scale(mode.success_probability().sqrt());
    let kind = match mode {
        TransferMode::Probabilistic => MapKind::Filter,
        TransferMode::Deterministic => MapKind::Unitary,
    };
    OpticalMap::new(
        format!("transferrer π→o2 ({mode:?})"),
        kind,
        m,
        vec![Factor::Polarization, Factor::OamFundamental],
        vec![Factor::Polarization, Factor::OamO2],
    )
}

/// OAM-to-polarization transferrer: `|H>|φ'> -> |φ>|0>`, the adjoint of the
/// forward isometry. Inputs must carry `|H>` polarization.
pub fn transferrer_o2_to_pi(mode: TransferMode) -> OpticalMap {
    let m = transferrer_isometry()
        .adjoint()
        .scale(mode.success_probability().sqrt());
    let kind = match mode {
        TransferMode::Probabilistic => MapKind::Filter,
        TransferMode::Deterministic => MapKind::Unitary,
    };
    let h = ket_col(BasisLabel::H);
    let domain = linalg::kron(&ketbra(&h, &h), &CMatrix::identity(2, 2));
    OpticalMap::new(
        format!("transferrer o2→π ({mode:?})"),
        kind,
        m,
        vec![Factor::Polarization, Factor::OamO2],
        vec![Factor::Polarization, Factor::OamFundamental],
    )
    .with_domain(domain)
}

/// The two compensation plates after the single-mode fiber on Bob's arm:
/// `hwp(π/8)` then `hwp(0)`, a rotation taking `|H> -> |->`, `|V> -> |+>`.
/// Together with the transferrer frame this sends the polarization singlet to
/// `(|H,+2> - |V,-2>)/√2`.
pub fn fiber_compensation() -> OpticalMap {
    half_waveplate(std::f64::consts::FRAC_PI_8)
        .then(&half_waveplate(0.0))
        .expect("polarization maps compose")
}
