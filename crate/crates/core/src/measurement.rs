//! Born-rule probabilities, Poissonian coincidence counts and fringe scans.
//!
//! Every setting draws from its own random stream, derived from a global seed,
//! a stream domain and the setting index. Results therefore do not depend on
//! the order (or thread) in which settings are simulated.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::elements::half_waveplate;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ALGEBRA_TOL};
use crate::states::{basis_ket, BasisLabel, DensityMatrix, Factor, StateVector};

/// Rank-1 projector `|k><k|` on one factor, with a display name.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    ket: CVector,
    factor: Factor,
    name: String,
}

impl Projector {
    pub fn from_label(label: BasisLabel) -> Self {
        let k = basis_ket(label);
        Projector {
            ket: k.amplitudes().clone(),
            factor: label.factor(),
            name: label.name().to_string(),
        }
    }

    pub fn from_ket(ket: &StateVector, name: impl Into<String>) -> Result<Self> {
        if ket.factors().len() != 1 {
            return Err(Error::InvalidArgument("projector ket must be single-factor".into()));
        }
        if !ket.is_normalized() || (ket.norm_sqr() - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::NotNormalized(ket.norm_sqr().sqrt()));
        }
        Ok(Projector {
            ket: ket.amplitudes().clone(),
            factor: ket.factors()[0],
            name: name.into(),
        })
    }

    pub fn ket(&self) -> &CVector {
        &self.ket
    }

    pub fn factor(&self) -> Factor {
        self.factor
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> CMatrix {
        linalg::outer(&self.ket, &self.ket)
    }

    /// The label this projector was built from, if any.
    pub fn basis_label(&self) -> Option<BasisLabel> {
        self.name.parse().ok()
    }
}

/// One analyzer configuration: a projector for Alice's polarization, one for
/// Bob's OAM, and how long the coincidences are accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub alice: Projector,
    pub bob: Projector,
    pub duration_s: f64,
    pub label: String,
}

impl MeasurementSetting {
    pub fn new(alice: Projector, bob: Projector, duration_s: f64) -> Result<Self> {
        if alice.factor != Factor::Polarization {
            return Err(Error::InvalidArgument("Alice measures polarization".into()));
        }
        if !(duration_s >= 0.0 && duration_s.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration {duration_s} s")));
        }
        let label = format!("{}|{}", alice.name, bob.name);
        Ok(MeasurementSetting {
            alice,
            bob,
            duration_s,
            label,
        })
    }

    pub fn from_labels(alice: BasisLabel, bob: BasisLabel, duration_s: f64) -> Result<Self> {
        Self::new(Projector::from_label(alice), Projector::from_label(bob), duration_s)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `Π_A ⊗ Π_B`
    pub fn joint_projector(&self) -> CMatrix {
        linalg::kron(&self.alice.matrix(), &self.bob.matrix())
    }
}

/// Coincidences recorded for one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub counts: u64,
    pub expected_rate_cps: f64,
    /// Seed of the stream the counts were drawn from.
    pub seed: u64,
}

/// `Tr[ρ (Π_A ⊗ Π_B)]`
pub fn joint_probability(rho: &DensityMatrix, s: &MeasurementSetting) -> Result<f64> {
    let d = s.alice.ket.len() * s.bob.ket.len();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.dim(),
        });
    }
    let psi = linalg::kron_vec(&s.alice.ket, &s.bob.ket);
    Ok((psi.adjoint() * rho.matrix() * &psi)[(0, 0)].re)
}

/// Stream domains, so different experiments with the same global seed do not
/// share random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    Tomography = 1,
    Fringe = 2,
    Chsh = 3,
    Bootstrap = 4,
    Test = 99,
}

/// Seed for setting `index` of `domain`, read off a counter-based ChaCha
/// stream keyed by `global`.
pub fn stream_seed(global: u64, domain: StreamDomain, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(global);
    rng.set_stream(domain as u64);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One Poisson draw with mean `mean` (zero mean gives zero counts).
pub fn poisson_draw(mean: f64, rng: &mut impl rand::Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

/// Draws the coincidences for one setting. The mean is
/// `probability × rate_cps × duration`; the four outcomes of a complete pair of
/// local bases share the full pair rate.
pub fn simulate_counts(rho: &DensityMatrix, s: &MeasurementSetting, rate_cps: f64, seed: u64) -> Result<CountRecord> {
    if rate_cps < 0.0 || !rate_cps.is_finite() {
        return Err(Error::NegativeRate(rate_cps));
    }
    let p = joint_probability(rho, s)?.clamp(0.0, 1.0);
    let rate = p * rate_cps;
    let mut rng = rng_from_seed(seed);
    Ok(CountRecord {
        setting: s.clone(),
        counts: poisson_draw(rate * s.duration_s, &mut rng),
        expected_rate_cps: rate,
        seed,
    })
}

/// Counts at one half-wave-plate angle of a fringe scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    /// Fringe phase; the plate's fast axis sits at `theta / 4`.
    pub theta: f64,
    pub counts: u64,
    pub expected: f64,
}

/// Alice's analyzer for fringe phase `theta`: `|H>` rotated by a half-wave
/// plate at `theta / 4`, i.e. `cos(θ/2)|H> + sin(θ/2)|V>`.
pub fn fringe_projector(theta: f64) -> Projector {
    let rotated = half_waveplate(theta / 4.0)
        .apply_ket(&basis_ket(BasisLabel::H), &[0])
        .expect("polarization element on a polarization ket")
        .state;
    Projector::from_ket(&rotated, format!("hwp({:.6})H", theta / 4.0)).expect("unitary output")
}

/// Coincidences as Alice's half-wave plate turns, Bob fixed on `bob`.
pub fn fringe_scan(
    rho: &DensityMatrix,
    bob: &Projector,
    theta_grid: &[f64],
    rate_cps: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<FringePoint>> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidArgument("empty fringe grid".into()));
    }
    theta_grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let s = MeasurementSetting::new(fringe_projector(theta), bob.clone(), duration_s)?;
            let rec = simulate_counts(rho, &s, rate_cps, stream_seed(seed, StreamDomain::Fringe, i as u64))?;
            Ok(FringePoint {
                theta,
                counts: rec.counts,
                expected: rec.expected_rate_cps * duration_s,
            })
        })
        .collect()
}

/// Parameters of `N(θ) = N0 (1 + V cos(θ − φ0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub n0: f64,
    pub visibility: f64,
    pub phi0: f64,
}

/// Linear least squares on `c0 + c1 cos θ + c2 sin θ`; visibility clamped to
/// `[0, 1]`.
pub fn fit_fringe(points: &[(f64, f64)]) -> Result<FringeFit> {
    if points.len() < 4 {
        return Err(Error::FitFailure(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for &(theta, n) in points {
        let row = Vector3::new(1.0, theta.cos(), theta.sin());
        normal += row * row.transpose();
        rhs += row * n;
    }
    let svd = normal.svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if smin <= 1e-10 * smax {
        return Err(Error::FitFailure("grid does not resolve the fringe".into()));
    }
    let coef = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::FitFailure("singular normal equations".into()))?;
    let n0 = coef[0];
    if n0 <= 0.0 {
        return Err(Error::FitFailure(format!("non-positive mean level {n0}")));
    }
    let amp = coef[1].hypot(coef[2]);
    Ok(FringeFit {
        n0,
        visibility: (amp / n0).clamp(0.0, 1.0),
        phi0: coef[2].atan2(coef[1]),
    })
}

/// `(max − min)/(max + min)` over the recorded counts.
pub fn minmax_visibility(points: &[(f64, f64)]) -> f64 {
    let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

/// One CSV row: `setting_label, alice, bob, duration_s, counts, seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub setting_label: String,
    pub alice: String,
    pub bob: String,
    pub duration_s: f64,
    pub counts: u64,
    pub seed: u64,
}

impl From<&CountRecord> for CountRow {
    fn from(r: &CountRecord) -> Self {
        CountRow {
            setting_label: r.setting.label.clone(),
            alice: r.setting.alice.name.clone(),
            bob: r.setting.bob.name.clone(),
            duration_s: r.setting.duration_s,
            counts: r.counts,
            seed: r.seed,
        }
    }
}

pub fn write_counts_csv<W: Write>(records: &[CountRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CountRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_counts_csv<R: Read>(input: R) -> Result<Vec<CountRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
