//! Coincidence-rate bookkeeping for the hybrid link.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Source rate and the efficiencies along the preparation and detection arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateBudget {
    pub c_source_cps: f64,
    pub qplate_eff: f64,
    pub transfer_prep_eff: f64,
    pub transfer_det_eff: f64,
    pub fiber_coupling: f64,
    #[serde(default)]
    pub deterministic_prep: bool,
    #[serde(default)]
    pub deterministic_det: bool,
}

impl Default for RateBudget {
    fn default() -> Self {
        RateBudget::paper_defaults()
    }
}

impl RateBudget {
    /// 6 kHz source, 0.8 q-plate, 0.5 per probabilistic transferrer, 0.2
    /// single-mode fiber coupling.
    pub fn paper_defaults() -> Self {
        RateBudget {
            c_source_cps: 6000.0,
            qplate_eff: 0.8,
            transfer_prep_eff: 0.5,
            transfer_det_eff: 0.5,
            fiber_coupling: 0.2,
            deterministic_prep: false,
            deterministic_det: false,
        }
    }

    /// Both transferrers deterministic and the fiber coupling raised to
    /// `fiber_coupling`. With 0.4 this is an 8× gain over the defaults.
    pub fn deterministic_projection(fiber_coupling: f64) -> Result<Self> {
        let b = RateBudget {
            deterministic_prep: true,
            deterministic_det: true,
            fiber_coupling,
            ..RateBudget::paper_defaults()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_source_cps >= 0.0 && self.c_source_cps.is_finite()) {
            return Err(Error::NegativeRate(self.c_source_cps));
        }
        for (name, v) in [
            ("qplate_eff", self.qplate_eff),
            ("transfer_prep_eff", self.transfer_prep_eff),
            ("transfer_det_eff", self.transfer_det_eff),
            ("fiber_coupling", self.fiber_coupling),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn prep_probability(&self) -> f64 {
        self.qplate_eff
            * if self.deterministic_prep {
                1.0
            } else {
                self.transfer_prep_eff
            }
    }

    pub fn det_probability(&self) -> f64 {
        self.qplate_eff
            * if self.deterministic_det {
                1.0
            } else {
                self.transfer_det_eff
            }
            * self.fiber_coupling
    }

    pub fn expected_rate(&self) -> f64 {
        self.c_source_cps * self.prep_probability() * self.det_probability()
    }

    pub fn report(&self) -> BudgetReport {
        let reference = RateBudget::paper_defaults().expected_rate();
        BudgetReport {
            budget: *self,
            p_prep: self.prep_probability(),
            p_det: self.det_probability(),
            expected_rate_cps: self.expected_rate(),
            gain_over_defaults: if reference > 0.0 {
                self.expected_rate() / reference
            } else {
                f64::NAN
            },
            observed_rate_cps: OBSERVED_RATE_CPS,
            projected_observed_cps: OBSERVED_RATE_CPS * self.expected_rate() / reference,
        }
    }
}

/// Coincidence rate measured with the probabilistic setup.
pub const OBSERVED_RATE_CPS: f64 = 100.0;

/// Budget outcome, with the measured rate scaled by the model's gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub budget: RateBudget,
    pub p_prep: f64,
    pub p_det: f64,
    pub expected_rate_cps: f64,
    pub gain_over_defaults: f64,
    pub observed_rate_cps: f64,
    pub projected_observed_cps: f64,
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.budget;
        let mode = |d: bool| if d { "deterministic" } else { "probabilistic" };
        writeln!(f, "{:<28}{:>12}", "quantity", "value")?;
        writeln!(f, "{:-<40}", "")?;
        writeln!(f, "{:<28}{:>12.1}", "source rate [cps]", b.c_source_cps)?;
        writeln!(f, "{:<28}{:>12.3}", "q-plate efficiency", b.qplate_eff)?;
        writeln!(f, "{:<28}{:>12}", "prep transferrer", mode(b.deterministic_prep))?;
        writeln!(f, "{:<28}{:>12}", "det transferrer", mode(b.deterministic_det))?;
        writeln!(f, "{:<28}{:>12.3}", "fiber coupling", b.fiber_coupling)?;
        writeln!(f, "{:<28}{:>12.4}", "p_prep", self.p_prep)?;
        writeln!(f, "{:<28}{:>12.4}", "p_det", self.p_det)?;
        writeln!(f, "{:<28}{:>12.1}", "expected rate [cps]", self.expected_rate_cps)?;
        writeln!(f, "{:<28}{:>12.2}", "gain over defaults", self.gain_over_defaults)?;
        write!(
            f,
            "{:<28}{:>12.1}",
            "projected observed [cps]", self.projected_observed_cps
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn defaults() {
        let b = RateBudget::paper_defaults();
        assert_abs_diff_eq!(b.prep_probability(), 0.40, epsilon = 1e-15);
        assert_abs_diff_eq!(b.det_probability(), 0.08, epsilon = 1e-15);
        assert_abs_diff_eq!(b.expected_rate(), 192.0, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_flags() {
        let mut b = RateBudget::paper_defaults();
        b.deterministic_prep = true;
        assert_abs_diff_eq!(b.prep_probability(), 0.80, epsilon = 1e-15);
        b.deterministic_det = true;
        assert_abs_diff_eq!(b.expected_rate() / 192.0, 4.0, epsilon = 1e-12);
        let r = RateBudget::deterministic_projection(0.4).unwrap().report();
        assert_abs_diff_eq!(r.gain_over_defaults, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.projected_observed_cps, 800.0, epsilon = 1e-9);
    }

    #[test]
    fn edge_values() {
        let unit = RateBudget {
            c_source_cps: 1.0,
            qplate_eff: 1.0,
            transfer_prep_eff: 1.0,
            transfer_det_eff: 1.0,
            fiber_coupling: 1.0,
            deterministic_prep: false,
            deterministic_det: false,
        };
        assert_eq!(unit.prep_probability(), 1.0);
        let zero = RateBudget {
            c_source_cps: 0.0,
            ..RateBudget::paper_defaults()
        };
        assert_eq!(zero.expected_rate(), 0.0);
        assert!(RateBudget {
            qplate_eff: 1.2,
            ..unit
        }
        .validate()
        .is_err());
        assert!(RateBudget {
            c_source_cps: -1.0,
            ..unit
        }
        .validate()
        .is_err());
        assert!(RateBudget::paper_defaults().report().to_string().contains("p_prep"));
    }
}
