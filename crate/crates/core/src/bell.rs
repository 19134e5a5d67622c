//! CHSH test between Alice's polarization and Bob's OAM.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_8, SQRT_2};

use crate::error::{Error, Result};
use crate::linalg::{cr, CMatrix, ALGEBRA_TOL};
use crate::measurement::{simulate_counts, stream_seed, CountRecord, MeasurementSetting, Projector, StreamDomain};
use crate::states::{BasisLabel, DensityMatrix, Factor, StateVector};

/// Local CHSH bound.
pub const CLASSICAL_BOUND: f64 = 2.0;
/// Tsirelson bound `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * SQRT_2;

/// A ±1-valued observable `Π₊ − Π₋` on one qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicObservable {
    pub plus: Projector,
    pub minus: Projector,
    pub label: String,
}

impl DichotomicObservable {
    /// Checks that the projectors are orthogonal and complete.
    pub fn new(plus: Projector, minus: Projector, label: impl Into<String>) -> Result<Self> {
        if plus.factor() != minus.factor() || plus.factor().dim() != 2 {
            return Err(Error::InvalidArgument("outcomes must live on the same qubit".into()));
        }
        let sum = plus.matrix() + minus.matrix();
        if (sum - CMatrix::identity(2, 2)).norm() > ALGEBRA_TOL {
            return Err(Error::InvalidArgument(format!(
                "outcomes `{}` and `{}` are not complete",
                plus.name(),
                minus.name()
            )));
        }
        Ok(DichotomicObservable {
            plus,
            minus,
            label: label.into(),
        })
    }

    pub fn from_labels(plus: BasisLabel, minus: BasisLabel) -> Result<Self> {
        let label = format!("{}/{}", plus.name(), minus.name());
        DichotomicObservable::new(Projector::from_label(plus), Projector::from_label(minus), label)
    }

    /// `cos θ |+2> + sin θ |−2>` as the `+1` outcome.
    pub fn oam_rotated(theta: f64, label: &str) -> Result<Self> {
        let ket = |a: f64, b: f64| StateVector::new(vec![cr(a), cr(b)], vec![Factor::OamO2]);
        DichotomicObservable::new(
            Projector::from_ket(&ket(theta.cos(), theta.sin())?, format!("{label}+"))?,
            Projector::from_ket(&ket(-theta.sin(), theta.cos())?, format!("{label}-"))?,
            label,
        )
    }

    /// Same observable with the outcomes relabeled.
    pub fn swapped(&self) -> Self {
        DichotomicObservable {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
            label: format!("-{}", self.label),
        }
    }

    pub fn operator(&self) -> CMatrix {
        self.plus.matrix() - self.minus.matrix()
    }
}

/// The four CHSH observables.
#[derive(Debug, Clone, PartialEq)]
pub struct ChshSettings {
    pub a: DichotomicObservable,
    pub a_prime: DichotomicObservable,
    pub b: DichotomicObservable,
    pub b_prime: DichotomicObservable,
}

impl ChshSettings {
    /// The pairs entering `S = E(a,b) + E(a',b) + E(a,b') − E(a',b')`, with
    /// their signs.
    pub fn terms(&self) -> [(&DichotomicObservable, &DichotomicObservable, f64); 4] {
        [
            (&self.a, &self.b, 1.0),
            (&self.a_prime, &self.b, 1.0),
            (&self.a, &self.b_prime, 1.0),
            (&self.a_prime, &self.b_prime, -1.0),
        ]
    }
}

/// `a = {H,V}`, `a' = {+,−}`; `b` and `b'` are the `{|±2>}` basis rotated by
/// `−π/8` and `+π/8`.
pub fn paper_settings() -> ChshSettings {
    let obs = |p, m| DichotomicObservable::from_labels(p, m).expect("basis labels are complete");
    ChshSettings {
        a: obs(BasisLabel::H, BasisLabel::V),
        a_prime: obs(BasisLabel::Plus, BasisLabel::Minus),
        b: DichotomicObservable::oam_rotated(-FRAC_PI_8, "b").expect("unit ket"),
        b_prime: DichotomicObservable::oam_rotated(FRAC_PI_8, "b'").expect("unit ket"),
    }
}

/// `Tr[ρ (A ⊗ B)]`
pub fn correlation(rho: &DensityMatrix, a: &DichotomicObservable, b: &DichotomicObservable) -> Result<f64> {
    let op = crate::linalg::kron(&a.operator(), &b.operator());
    Ok(rho.expectation(&op)?.re)
}

/// Coincidences for the four outcome combinations of one setting pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl OutcomeCounts {
    pub fn new(pp: u64, pm: u64, mp: u64, mm: u64) -> Self {
        OutcomeCounts { pp, pm, mp, mm }
    }

    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }
}

/// `E = [N(+,+) + N(−,−) − N(+,−) − N(−,+)] / ΣN`
pub fn correlation_from_counts(n: &OutcomeCounts) -> Result<f64> {
    let total = n.total();
    if total == 0 {
        return Err(Error::UndefinedCorrelation);
    }
    let same = (n.pp + n.mm) as f64;
    let diff = (n.pm + n.mp) as f64;
    Ok((same - diff) / total as f64)
}

/// First-order Poisson error of [`correlation_from_counts`]:
/// `σ² = (1−E)² N_same / N² + (1+E)² N_diff / N²`.
pub fn correlation_sigma(n: &OutcomeCounts) -> Result<f64> {
    let e = correlation_from_counts(n)?;
    let total = n.total() as f64;
    let same = (n.pp + n.mm) as f64;
    let diff = (n.pm + n.mp) as f64;
    Ok(((1.0 - e).powi(2) * same + (1.0 + e).powi(2) * diff).sqrt() / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChshMode {
    Exact,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTerm {
    pub alice: String,
    pub bob: String,
    pub sign: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub sigma: Option<f64>,
    pub counts: Option<OutcomeCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    #[serde(rename = "S")]
    pub s: f64,
    pub sigma: Option<f64>,
    /// `(S − 2)/σ`; absent in exact mode.
    pub violation_sigmas: Option<f64>,
    pub violates_classical_bound: bool,
    pub mode: ChshMode,
    pub settings: Vec<CorrelationTerm>,
}

/// Exact-mode `S` from the state.
pub fn chsh_exact(rho: &DensityMatrix, settings: &ChshSettings) -> Result<ChshResult> {
    let mut s = 0.0;
    let mut terms = Vec::with_capacity(4);
    for (a, b, sign) in settings.terms() {
        let e = correlation(rho, a, b)?;
        s += sign * e;
        terms.push(CorrelationTerm {
            alice: a.label.clone(),
            bob: b.label.clone(),
            sign,
            e,
            sigma: None,
            counts: None,
        });
    }
    Ok(ChshResult {
        s,
        sigma: None,
        violation_sigmas: None,
        violates_classical_bound: s.abs() > CLASSICAL_BOUND,
        mode: ChshMode::Exact,
        settings: terms,
    })
}

/// The 16 single-projector runs of an empirical CHSH test, in term order and
/// `(+,+), (+,−), (−,+), (−,−)` within each term.
pub fn chsh_runs(settings: &ChshSettings, duration_s: f64) -> Result<Vec<MeasurementSetting>> {
    let mut runs = Vec::with_capacity(16);
    for (a, b, _) in settings.terms() {
        for pa in [&a.plus, &a.minus] {
            for pb in [&b.plus, &b.minus] {
                runs.push(MeasurementSetting::new(pa.clone(), pb.clone(), duration_s)?);
            }
        }
    }
    Ok(runs)
}

/// `S` and its propagated error from counts of the 16 runs of [`chsh_runs`].
pub fn chsh_from_counts(settings: &ChshSettings, counts: &[u64]) -> Result<ChshResult> {
    if counts.len() != 16 {
        return Err(Error::DimensionMismatch {
            expected: 16,
            found: counts.len(),
        });
    }
    let mut s = 0.0;
    let mut var = 0.0;
    let mut terms = Vec::with_capacity(4);
    for (k, (a, b, sign)) in settings.terms().into_iter().enumerate() {
        let n = OutcomeCounts::new(counts[4 * k], counts[4 * k + 1], counts[4 * k + 2], counts[4 * k + 3]);
        let e = correlation_from_counts(&n)?;
        let sigma = correlation_sigma(&n)?;
        s += sign * e;
        var += sigma * sigma;
        terms.push(CorrelationTerm {
            alice: a.label.clone(),
            bob: b.label.clone(),
            sign,
            e,
            sigma: Some(sigma),
            counts: Some(n),
        });
    }
    let sigma = var.sqrt();
    Ok(ChshResult {
        s,
        sigma: Some(sigma),
        violation_sigmas: (sigma > 0.0).then(|| (s.abs() - CLASSICAL_BOUND) / sigma),
        violates_classical_bound: s.abs() > CLASSICAL_BOUND,
        mode: ChshMode::Empirical,
        settings: terms,
    })
}

/// Simulated 16-run CHSH test; run `i` draws from stream `i` of the CHSH
/// domain.
pub fn chsh_empirical(
    rho: &DensityMatrix,
    settings: &ChshSettings,
    rate_cps: f64,
    duration_s: f64,
    seed: u64,
) -> Result<(ChshResult, Vec<CountRecord>)> {
    let records = chsh_runs(settings, duration_s)?
        .iter()
        .enumerate()
        .map(|(i, run)| simulate_counts(rho, run, rate_cps, stream_seed(seed, StreamDomain::Chsh, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<u64> = records.iter().map(|r| r.counts).collect();
    Ok((chsh_from_counts(settings, &counts)?, records))
}

/// `S` expected for a state whose correlations all shrink by the fringe
/// visibility `V`: `2√2 V`.
pub fn predicted_s_from_visibility(visibility: f64) -> f64 {
    TSIRELSON_BOUND * visibility
}
