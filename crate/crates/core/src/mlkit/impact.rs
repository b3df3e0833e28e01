//! Population-level counts of correct treatment recommendations.

use super::{MlError, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Impact {
    pub correctly_recommended: u64,
    pub correctly_discouraged: u64,
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(MlError::InvalidRates(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// `round(N·prev·sens)` and `round(N·(1−prev)·spec)`, rounding halves away
/// from zero.
pub fn impact_extrapolation(population: u64, prevalence: f64, sensitivity: f64, specificity: f64) -> Result<Impact> {
    check_rate("prevalence", prevalence)?;
    check_rate("sensitivity", sensitivity)?;
    check_rate("specificity", specificity)?;
    let n = population as f64;
    Ok(Impact {
        correctly_recommended: (n * prevalence * sensitivity).round() as u64,
        correctly_discouraged: (n * (1.0 - prevalence) * specificity).round() as u64,
    })
}

/// Prevalences implied separately by a reported pair of counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedPrevalences {
    pub population: u64,
    pub from_recommended: f64,
    pub from_discouraged: f64,
    /// Positive and negative group sizes the two counts imply.
    pub implied_positive: f64,
    pub implied_negative: f64,
}

impl ImpliedPrevalences {
    /// The two counts agree on one prevalence only if this is zero.
    pub fn gap(&self) -> f64 {
        (self.from_recommended - self.from_discouraged).abs()
    }

    /// Implied group sizes minus the stated population.
    pub fn population_shortfall(&self) -> f64 {
        self.population as f64 - (self.implied_positive + self.implied_negative)
    }
}

impl fmt::Display for ImpliedPrevalences {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "prevalence implied by recommended count: {:.6}", self.from_recommended)?;
        writeln!(f, "prevalence implied by discouraged count: {:.6}", self.from_discouraged)?;
        writeln!(
            f,
            "implied groups: {:.0} positive + {:.0} negative = {:.0} (population {})",
            self.implied_positive,
            self.implied_negative,
            self.implied_positive + self.implied_negative,
            self.population
        )?;
        if self.gap() > 1e-6 {
            write!(f, "INCONSISTENT: no single prevalence reproduces both counts (gap {:.6})", self.gap())
        } else {
            write!(f, "consistent: one prevalence reproduces both counts")
        }
    }
}

pub fn implied_prevalences(
    population: u64,
    sensitivity: f64,
    specificity: f64,
    recommended: u64,
    discouraged: u64,
) -> Result<ImpliedPrevalences> {
    check_rate("sensitivity", sensitivity)?;
    check_rate("specificity", specificity)?;
    if population == 0 || sensitivity == 0.0 || specificity == 0.0 {
        return Err(MlError::InvalidRates("population, sensitivity and specificity must be positive".into()));
    }
    let n = population as f64;
    let implied_positive = recommended as f64 / sensitivity;
    let implied_negative = discouraged as f64 / specificity;
    Ok(ImpliedPrevalences {
        population,
        from_recommended: implied_positive / n,
        from_discouraged: 1.0 - implied_negative / n,
        implied_positive,
        implied_negative,
    })
}
