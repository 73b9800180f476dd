//! Conditional-error pathway for design extensions: the conditional
//! probability of rejection given the first-stage score at the originally
//! planned analysis, the derived second-stage cutoffs c*/b*, the psi decision
//! on the extended dataset, and the algebraic equivalence with the
//! combination test under observed-information weights.
//!
//! Joint null model: with equal allocation, (S1(t), S12(t) - S1(t)) is
//! approximately zero-mean normal with independent components of variances
//! D1(t)/4 and (D12(t) - D1(t))/4; every formula here standardizes with D/4.

use thiserror::Error;

use crate::combo_test::{
    combine, decide, irle_weights, p1_first_stage, p2_increment, ComboError, StagePValues,
};
use crate::numerics::{norm_cdf, norm_quantile, NumError};

#[derive(Debug, Error)]
pub enum CondError {
    /// Conditional error is undefined once every planned event is first-stage.
    #[error("all information used: d1 at the planned analysis equals d12 = {d12}")]
    AllInformationUsed { d12: usize },
    #[error("degenerate increment: d12_star = {d12_star} must exceed d1_star = {d1_star}")]
    DegenerateIncrement { d12_star: usize, d1_star: usize },
    #[error("zero events in the extension cohort")]
    ZeroEvents,
    #[error("probability {0} outside the open interval (0, 1)")]
    Domain(f64),
    #[error(transparent)]
    Combo(#[from] ComboError),
}

impl From<NumError> for CondError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::Domain(_) => CondError::Domain(f64::NAN),
            other => panic!("unexpected numeric error in cond_error: {other}"),
        }
    }
}

/// Conditional error record: the budget `ce` together with the standardized
/// cutoff c* = Phi^-1(1 - ce) and the pooled-score cutoff b* derived from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionalErrorRecord {
    pub ce: f64,
    pub c_star: f64,
    pub b_star: f64,
}

/// Conditional rejection probability of the level-alpha pooled logrank test,
/// given first-stage information (d1, p1) at the originally planned analysis:
///
///   1 - Phi[ Phi^-1(1-alpha) sqrt(d12/(d12-d1)) - Phi^-1(1-p1) sqrt(d1/(d12-d1)) ]
///
/// d1 = 0 carries no conditioning information and returns alpha exactly.
pub fn conditional_error(
    p1: f64,
    d1_t12: usize,
    d12: usize,
    alpha: f64,
) -> Result<f64, CondError> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(CondError::Domain(p1));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CondError::Domain(alpha));
    }
    if d1_t12 == 0 {
        return Ok(alpha);
    }
    if d1_t12 >= d12 {
        return Err(CondError::AllInformationUsed { d12 });
    }
    let d1 = d1_t12 as f64;
    let d12 = d12 as f64;
    let z_alpha = -norm_quantile(alpha).expect("alpha validated");
    let z1 = -norm_quantile(p1).expect("p1 validated");
    let rest = d12 - d1;
    Ok(norm_cdf(-(z_alpha * (d12 / rest).sqrt() - z1 * (d1 / rest).sqrt())))
}

/// Standardized second-stage cutoff c* = Phi^-1(1 - ce).
pub fn cutoff_c_star(ce: f64) -> Result<f64, CondError> {
    if !(ce > 0.0 && ce < 1.0) {
        return Err(CondError::Domain(ce));
    }
    Ok(-norm_quantile(ce).expect("ce validated"))
}

/// Pooled-score cutoff b* = (2 s1* + c* sqrt(d12* - d1*)) / sqrt(d12*); the
/// unique value making {2 S12*/sqrt(d12*) >= b*} coincide with
/// {2 (S12* - s1*)/sqrt(d12* - d1*) >= c*}.
pub fn cutoff_b_star(
    c_star: f64,
    s1_star: f64,
    d1_star: usize,
    d12_star: usize,
) -> Result<f64, CondError> {
    if d12_star <= d1_star {
        return Err(CondError::DegenerateIncrement { d12_star, d1_star });
    }
    let incr = (d12_star - d1_star) as f64;
    Ok((2.0 * s1_star + c_star * incr.sqrt()) / (d12_star as f64).sqrt())
}

/// Second-stage decision 1{2 s12*/sqrt(d12*) >= b*} (weak inequality).
pub fn psi_decision(s12_star: f64, d12_star: usize, b_star: f64) -> bool {
    assert!(d12_star >= 1, "psi_decision requires at least one event");
    2.0 * s12_star / (d12_star as f64).sqrt() >= b_star
}

/// Decision for an entirely new extension cohort: 1{2 s2+/sqrt(d2+) >= b*},
/// where the caller passes the standardized cutoff (c* from the conditional
/// error) as `b_star`, so the conditional null expectation equals the
/// conditional error.
pub fn psi_extended(s2_plus: f64, d2_plus: usize, b_star: f64) -> Result<bool, CondError> {
    if d2_plus == 0 {
        return Err(CondError::ZeroEvents);
    }
    Ok(2.0 * s2_plus / (d2_plus as f64).sqrt() >= b_star)
}

/// Two-stage score snapshots at the originally planned analysis time and at
/// the extended analysis time.
#[derive(Clone, Copy, Debug)]
pub struct TwoStageSnapshots {
    /// first-stage score and events at the planned pooled analysis
    pub s1_t12: f64,
    pub d1_t12: usize,
    /// planned pooled event target
    pub d12: usize,
    /// first-stage score and events at the extended analysis
    pub s1_star: f64,
    pub d1_star: usize,
    /// pooled score at the extended analysis and extended event target
    pub s12_star: f64,
    pub d12_star: usize,
}

/// Checks that the conditional-error decision (psi via b*) and the
/// combination decision (observed-information weights, increment p2) agree.
///
/// The two are algebraically identical; they can differ only within float
/// noise of the decision boundary (psi uses >=, the combination uses >), so
/// disagreement is tolerated solely when the pooled statistic sits within
/// 1e-12 of b*.
pub fn equivalence_check(snaps: &TwoStageSnapshots, alpha: f64) -> Result<bool, CondError> {
    let p1 = p1_first_stage(snaps.s1_t12, snaps.d1_t12)?;
    let ce = conditional_error(p1, snaps.d1_t12, snaps.d12, alpha)?;
    let c_star = cutoff_c_star(ce)?;
    let b_star = cutoff_b_star(c_star, snaps.s1_star, snaps.d1_star, snaps.d12_star)?;
    let psi = psi_decision(snaps.s12_star, snaps.d12_star, b_star);

    let w = irle_weights(snaps.d1_t12, snaps.d12);
    let p2 = p2_increment(snaps.s12_star, snaps.s1_star, snaps.d12_star, snaps.d1_star)?;
    let z = combine(&w, &StagePValues { p1, p2 })?;
    let z_alpha = -norm_quantile(alpha).expect("alpha validated upstream");
    let comb = decide(z, z_alpha).reject;

    let standardized = 2.0 * snaps.s12_star / (snaps.d12_star as f64).sqrt();
    let near_boundary = (standardized - b_star).abs() <= 1e-12 * b_star.abs().max(1.0);
    Ok(psi == comb || near_boundary)
}

/// Full conditional-error record for a planned extension: the budget at the
/// planned analysis plus both cutoffs at the extended analysis.
pub fn conditional_error_record(
    p1: f64,
    d1_t12: usize,
    d12: usize,
    alpha: f64,
    s1_star: f64,
    d1_star: usize,
    d12_star: usize,
) -> Result<ConditionalErrorRecord, CondError> {
    let ce = conditional_error(p1, d1_t12, d12, alpha)?;
    let c_star = cutoff_c_star(ce)?;
    let b_star = cutoff_b_star(c_star, s1_star, d1_star, d12_star)?;
    Ok(ConditionalErrorRecord { ce, c_star, b_star })
}

// ---------------------------------------------------------------------------
