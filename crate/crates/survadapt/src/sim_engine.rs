//! Scenario-driven trial simulator: event-time models with closed-form
//! inverse-hazard sampling, quota accrual with blocked 1:1 allocation, the
//! two-stage analysis pipelines for prespecified and observed-information
//! weighting, adaptive extension rules, an adversarial follow-up stopper, and
//! Monte Carlo operating characteristics.
//!
//! Replications are driven by [`crate::numerics::Rng::substream`], so results
//! for a given `(scenario, rule, n_reps, seed)` are reproducible regardless
//! of thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use thiserror::Error;

use crate::combo_test::{
    combine, decide, irle_weights, jenkins_weights, p1_first_stage, p2_increment,
    p2_second_stage, z_star_naive, ComboError, StagePValues, Weights,
};
use crate::cond_error::TwoStageSnapshots;
use crate::numerics::{integrate, norm_quantile, Rng};
use crate::surv_core::{
    calendar_time_of_event_count, event_calendar_time, snapshot, Arm, Stage, StageCensor,
    SubjectRecord, SurvError,
};
use crate::wiener_bound::corrected_kstar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Surv(#[from] SurvError),
    #[error(transparent)]
    Combo(#[from] ComboError),
    /// An analysis clock needs more events than occur before follow-up ends.
    #[error("needed {needed} events by end of follow-up, observed {observed}")]
    EventsBeyondFollowup { needed: usize, observed: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("corrected cutoff solve failed: {0}")]
    Cutoff(String),
}

// ---------------------------------------------------------------------------
// event-time models
// ---------------------------------------------------------------------------

/// Event-time distribution on the patient-time scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HazardModel {
    /// Constant hazard `lambda` (months^-1).
    Exponential { lambda: f64 },
    /// Hazard 1 / (1/base - slope * tau) rising on [0, limit], frozen at its
    /// value at `limit` beyond. Requires 1/base - slope * limit > 0.
    DivergingControl { base: f64, slope: f64, limit: f64 },
}

impl HazardModel {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        match *self {
            HazardModel::Exponential { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad(format!("exponential hazard must be positive, got {lambda}"));
                }
            }
            HazardModel::DivergingControl { base, slope, limit } => {
                if !(base > 0.0 && base.is_finite()) {
                    return bad(format!("base hazard must be positive, got {base}"));
                }
                if !(slope > 0.0 && slope.is_finite()) {
                    return bad(format!("hazard slope must be positive, got {slope}"));
                }
                if !(limit > 0.0 && limit.is_finite()) {
                    return bad(format!("hazard domain limit must be positive, got {limit}"));
                }
                if 1.0 / base - slope * limit <= 0.0 {
                    return bad(format!(
                        "diverging hazard explodes before its domain limit: \
                         1/base - slope*limit = {} <= 0",
                        1.0 / base - slope * limit
                    ));
                }
            }
        }
        Ok(())
    }

    /// Integrated hazard H(tau); continuous and strictly increasing.
    pub fn cumulative_hazard(&self, tau: f64) -> f64 {
        assert!(tau >= 0.0, "patient time must be nonnegative");
        match *self {
            HazardModel::Exponential { lambda } => lambda * tau,
            HazardModel::DivergingControl { base, slope, limit } => {
                let inv = 1.0 / base;
                if tau <= limit {
                    (inv / (inv - slope * tau)).ln() / slope
                } else {
                    let at_limit = (inv / (inv - slope * limit)).ln() / slope;
                    at_limit + (tau - limit) / (inv - slope * limit)
                }
            }
        }
    }

    /// S(tau) = exp(-H(tau)).
    pub fn survival(&self, tau: f64) -> f64 {
        (-self.cumulative_hazard(tau)).exp()
    }

    /// Draws one event time by inverting the cumulative hazard at a unit
    /// exponential deviate.
    pub fn sample_survival(&self, rng: &mut Rng) -> f64 {
        let h = -rng.uniform().ln();
        match *self {
            HazardModel::Exponential { lambda } => h / lambda,
            HazardModel::DivergingControl { base, slope, limit } => {
                let inv = 1.0 / base;
                let at_limit = (inv / (inv - slope * limit)).ln() / slope;
                if h <= at_limit {
                    (1.0 - (-slope * h).exp()) * inv / slope
                } else {
                    limit + (h - at_limit) * (inv - slope * limit)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// scenario description
// ---------------------------------------------------------------------------

/// When the recruitment cohorts are split into first and second stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interim {
    /// Subjects entered by this calendar month are first-stage.
    AtMonth(f64),
    /// Subjects entered by the calendar time of the d-th pooled event.
    AtEvents(usize),
}

/// How the two stage p-values are weighted and where they are read off.
///
/// `Jenkins`: both event targets fixed in advance; the first-stage p-value is
/// taken at the d1-th first-stage event, the second-stage p-value uses only
/// second-stage subjects at their d2-th event, and the weights are
/// sqrt(d1/(d1+d2)), sqrt(d2/(d1+d2)).
///
/// `Irle`: the first-stage p-value is taken from first-stage subjects at the
/// calendar time of the d12-th pooled event, the second stage is the pooled
/// score increment beyond that time, and the weights use the observed
/// first-stage event count at that analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightRule {
    Jenkins { d1: usize, d2: usize },
    Irle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Reference log hazard ratio the event target is powered for.
    pub theta_r: f64,
    /// Planned total event target of the combined analysis.
    pub d12: usize,
    pub weight_rule: WeightRule,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub control: HazardModel,
    pub experimental: HazardModel,
    /// Subjects recruited per month; monthly quotas round the cumulative
    /// target so the total over `accrual_months` is round(rate * months).
    pub accrual_rate: f64,
    pub accrual_months: f64,
    /// Additional follow-up after accrual closes; the trial ends at
    /// `accrual_months + followup_months`.
    pub followup_months: f64,
    pub interim: Interim,
    pub design: DesignSpec,
}

impl ScenarioConfig {
    pub fn t_max(&self) -> f64 {
        self.accrual_months + self.followup_months
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        self.control.validate()?;
        self.experimental.validate()?;
        if !(self.accrual_rate > 0.0 && self.accrual_rate.is_finite()) {
            return bad(format!("accrual rate must be positive, got {}", self.accrual_rate));
        }
        if !(self.accrual_months > 0.0 && self.accrual_months.is_finite()) {
            return bad(format!("accrual months must be positive, got {}", self.accrual_months));
        }
        if !(self.followup_months >= 0.0 && self.followup_months.is_finite()) {
            return bad(format!(
                "follow-up months must be nonnegative, got {}",
                self.followup_months
            ));
        }
        let d = &self.design;
        if !(d.alpha > 0.0 && d.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", d.alpha));
        }
        if !(d.beta > 0.0 && d.beta < 1.0) {
            return bad(format!("beta must lie in (0,1), got {}", d.beta));
        }
        if !(d.theta_r > 0.0 && d.theta_r.is_finite()) {
            return bad(format!("theta_R must be positive, got {}", d.theta_r));
        }
        if d.d12 < 2 {
            return bad(format!("combined event target must be >= 2, got {}", d.d12));
        }
        if let WeightRule::Jenkins { d1, d2 } = d.weight_rule {
            if d1 == 0 || d2 == 0 {
                return bad(format!("stage event targets must be >= 1, got {d1}, {d2}"));
            }
            if d1 + d2 != d.d12 {
                return bad(format!(
                    "stage event targets {d1} + {d2} must sum to the combined target {}",
                    d.d12
                ));
            }
        }
        match self.interim {
            Interim::AtMonth(t) => {
                if !(t > 0.0 && t < self.t_max()) {
                    return bad(format!(
                        "interim month {t} must lie strictly between 0 and t_max {}",
                        self.t_max()
                    ));
                }
            }
            Interim::AtEvents(d) => {
                if d == 0 {
                    return bad("interim event count must be >= 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Mid-trial change applied after the interim look.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdaptiveRule {
    NoChange,
    /// Raise the combined event target to `d12_star` (> planned d12).
    IncreaseEvents { d12_star: usize },
    /// Keep the design unchanged but report the first-stage evidence at the
    /// follow-up time maximizing its standardized logrank, scanning the
    /// first-stage event calendar times between the scheduled analysis and
    /// the end of the trial.
    AdversarialMaxStop,
}

// ---------------------------------------------------------------------------
// event-target planning
// ---------------------------------------------------------------------------

/// Schoenfeld event target for a one-sided level-alpha logrank test with
/// power 1-beta at log hazard ratio `theta_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RequiredEvents {
    /// `raw` rounded up to an even integer (equal stage splits stay whole).
    pub count: usize,
    /// 4 ((z_alpha + z_beta) / theta_r)^2 before rounding.
    pub raw: f64,
}

pub fn required_events(alpha: f64, beta: f64, theta_r: f64) -> RequiredEvents {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    assert!(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
    assert!(theta_r > 0.0 && theta_r.is_finite(), "theta_R must be positive");
    let z_sum = -(norm_quantile(alpha).expect("alpha in (0,1)"))
        - norm_quantile(beta).expect("beta in (0,1)");
    let raw = 4.0 * (z_sum / theta_r).powi(2);
    let mut count = raw.ceil() as usize;
    if count % 2 == 1 {
        count += 1;
    }
    RequiredEvents { count, raw }
}

/// Expected pooled event count of the scenario at calendar time `t`,
/// integrating each arm's event probability over the uniform entry
/// distribution. Deterministic companion to [`simulate_trial`].
pub fn expected_events(sc: &ScenarioConfig, t: f64) -> Result<f64, SimError> {
    sc.validate()?;
    assert!(t >= 0.0 && t.is_finite(), "calendar time must be nonnegative");
    let a = sc.accrual_months;
    let upper = a.min(t);
    if upper <= 0.0 {
        return Ok(0.0);
    }
    let total = (sc.accrual_rate * a).round() as usize;
    let n_control = total / 2;
    let n_exp = total - n_control;
    let arm_mean = |model: &HazardModel, n: usize| -> f64 {
        if n == 0 {
            return 0.0;
        }
        n as f64 / a * integrate(|e| 1.0 - model.survival(t - e), 0.0, upper, 64)
    };
    Ok(arm_mean(&sc.control, n_control) + arm_mean(&sc.experimental, n_exp))
}

// ---------------------------------------------------------------------------
// data generation
// ---------------------------------------------------------------------------

/// Generates one trial dataset: monthly quotas with uniform entry jitter,
/// alternating-pair treatment allocation in randomized order, event times
/// from the arm's hazard model, stage labels split at the interim time.
///
/// Draw order per subject is fixed (block coin on even indices, then entry,
/// then survival), so a seeded [`Rng`] reproduces the dataset exactly.
pub fn simulate_trial(sc: &ScenarioConfig, rng: &mut Rng) -> Result<Vec<SubjectRecord>, SimError> {
    sc.validate()?;
    let months = sc.accrual_months;
    let mut subjects: Vec<SubjectRecord> = Vec::new();
    let mut pending: Option<Arm> = None;
    let whole_months = months.ceil() as usize;
    for m in 0..whole_months {
        let lo = m as f64;
        let hi = months.min(lo + 1.0);
        let quota = (sc.accrual_rate * hi).round() as i64 - (sc.accrual_rate * lo).round() as i64;
        for _ in 0..quota.max(0) {
            let arm = match pending.take() {
                Some(second_of_block) => second_of_block,
                None => {
                    let control_first = rng.below(2) == 0;
                    let (first, second) = if control_first {
                        (Arm::Control, Arm::Experimental)
                    } else {
                        (Arm::Experimental, Arm::Control)
                    };
                    pending = Some(second);
                    first
                }
            };
            let entry = lo + rng.uniform() * (hi - lo);
            let model = match arm {
                Arm::Control => &sc.control,
                Arm::Experimental => &sc.experimental,
            };
            let surv = model.sample_survival(rng);
            subjects.push(SubjectRecord { entry, surv, arm, stage: Stage::First });
        }
    }
    let t_interim = match sc.interim {
        Interim::AtMonth(t) => t,
        Interim::AtEvents(d) => {
            let t = calendar_time_of_event_count(&subjects, d)?;
            if t >= sc.t_max() {
                return Err(SimError::EventsBeyondFollowup {
                    needed: d,
                    observed: snapshot(&subjects, sc.t_max(), StageCensor::NONE).d_events,
                });
            }
            t
        }
    };
    for s in &mut subjects {
        s.stage = if s.entry <= t_interim { Stage::First } else { Stage::Second };
    }
    Ok(subjects)
}

// ---------------------------------------------------------------------------
// one replication
// ---------------------------------------------------------------------------

/// Everything observed in one simulated trial. The three decisions share one
/// dataset: `combination` is the prespecified-weight test at its scheduled
/// analyses, `naive` re-reads the first-stage evidence at `t_star` (equal to
/// the scheduled time unless the rule is adversarial) against the same
/// nominal cutoff, `corrected` compares the same statistic to the worst-case
/// calibrated cutoff for the scenario's weight and information fraction.
#[derive(Clone, Copy, Debug)]
pub struct TrialRecord {
    pub combination_reject: bool,
    pub naive_reject: bool,
    pub corrected_reject: bool,
    pub z_combination: f64,
    pub z_naive: f64,
    pub k_star: f64,
    pub w1: f64,
    /// Fraction of the first-stage cohort's eventual events used at the
    /// scheduled first-stage analysis (denominator: cohort size, every
    /// subject's event eventually occurs).
    pub u1: f64,
    /// Scheduled first-stage analysis time.
    pub t_scheduled: f64,
    /// Follow-up time actually reported by the naive analysis.
    pub t_star: f64,
    /// Calendar time of the last analysis of the trial.
    pub t_final: f64,
    pub d1_scheduled: usize,
    pub d1_star: usize,
    pub d1_final: usize,
    pub d1_tmax: usize,
    /// Events consumed by the final analysis (pooled target, or the sum of
    /// stage targets under prespecified stage clocks).
    pub d12_final: usize,
    /// Nominal event increase minus the first-stage events accrued over the
    /// extension; zero when the rule changes nothing.
    pub effective_info_deficit: f64,
    /// Scores and counts for the conditional-error identity; present for the
    /// observed-information (pooled-clock) weight rule.
    pub irle: Option<TwoStageSnapshots>,
}

/// Rates and mean event counts over a batch of replications.
#[derive(Clone, Copy, Debug)]
pub struct SimSummary {
    pub replications: usize,
    pub combination_rate: f64,
    pub combination_se: f64,
    pub naive_rate: f64,
    pub naive_se: f64,
    pub corrected_rate: f64,
    pub corrected_se: f64,
    pub mean_d1_scheduled: f64,
    pub mean_d1_final: f64,
    pub mean_d1_tmax: f64,
    pub mean_d12_final: f64,
    pub mean_effective_info_deficit: f64,
}

/// Memoizes the corrected cutoff per (w1, u1); replications within one
/// scenario mostly share a handful of keys.
struct KstarCache {
    alpha: f64,
    cells: Mutex<HashMap<(u64, u64), Arc<OnceLock<Result<f64, String>>>>>,
}

impl KstarCache {
    fn new(alpha: f64) -> Self {
        KstarCache { alpha, cells: Mutex::new(HashMap::new()) }
    }

    fn get(&self, w1: f64, u1: f64) -> Result<f64, SimError> {
        let key = (w1.to_bits(), u1.to_bits());
        let cell = {
            let mut map = self.cells.lock().expect("cutoff cache poisoned");
            map.entry(key).or_default().clone()
        };
        cell.get_or_init(|| corrected_kstar(w1, u1, self.alpha).map_err(|e| e.to_string()))
            .clone()
            .map_err(SimError::Cutoff)
    }
}

fn event_time_capped(
    subjects: &[SubjectRecord],
    d: usize,
    t_max: f64,
) -> Result<f64, SimError> {
    let t = calendar_time_of_event_count(subjects, d)?;
    if t > t_max {
        return Err(SimError::EventsBeyondFollowup {
            needed: d,
            observed: snapshot(subjects, t_max, StageCensor::NONE).d_events,
        });
    }
    Ok(t)
}

struct StageAnalyses {
    w: Weights,
    p2: f64,
    z_combination: f64,
    t_scheduled: f64,
    s1_scheduled: f64,
    d1_scheduled: usize,
    u1: f64,
    t_final: f64,
    d1_final: usize,
    d12_final: usize,
    effective_info_deficit: f64,
    irle: Option<TwoStageSnapshots>,
}

fn analyze_irle(
    sc: &ScenarioConfig,
    rule: AdaptiveRule,
    data: &[SubjectRecord],
    first: &[SubjectRecord],
) -> Result<StageAnalyses, SimError> {
    let d12 = sc.design.d12;
    let t_max = sc.t_max();
    let t12 = event_time_capped(data, d12, t_max)?;
    let snap1_t12 = snapshot(first, t12, StageCensor::NONE);
    let d1_t12 = snap1_t12.d_events;
    let w = irle_weights(d1_t12, d12);
    let p1 = p1_first_stage(snap1_t12.score, d1_t12)?;

    let (t_final, d12_final) = match rule {
        AdaptiveRule::IncreaseEvents { d12_star } => {
            (event_time_capped(data, d12_star, t_max)?, d12_star)
        }
        _ => (t12, d12),
    };
    let snap1_final = snapshot(first, t_final, StageCensor::NONE);
    let snap12_final = snapshot(data, t_final, StageCensor::NONE);
    debug_assert_eq!(snap12_final.d_events, d12_final, "pooled event clock must hit its target");
    let p2 = p2_increment(
        snap12_final.score,
        snap1_final.score,
        d12_final,
        snap1_final.d_events,
    )?;
    let z_combination = combine(&w, &StagePValues { p1, p2 })?;
    let deficit =
        (d12_final - d12) as f64 - (snap1_final.d_events - d1_t12) as f64;

    Ok(StageAnalyses {
        w,
        p2,
        z_combination,
        t_scheduled: t12,
        s1_scheduled: snap1_t12.score,
        d1_scheduled: d1_t12,
        u1: d1_t12 as f64 / first.len() as f64,
        t_final,
        d1_final: snap1_final.d_events,
        d12_final,
        effective_info_deficit: deficit,
        irle: Some(TwoStageSnapshots {
            s1_t12: snap1_t12.score,
            d1_t12,
            d12,
            s1_star: snap1_final.score,
            d1_star: snap1_final.d_events,
            s12_star: snap12_final.score,
            d12_star: d12_final,
        }),
    })
}

fn analyze_jenkins(
    sc: &ScenarioConfig,
    rule: AdaptiveRule,
    d1: usize,
    d2: usize,
    data: &[SubjectRecord],
    first: &[SubjectRecord],
) -> Result<StageAnalyses, SimError> {
    let t_max = sc.t_max();
    let t1 = event_time_capped(first, d1, t_max)?;
    let snap1 = snapshot(first, t1, StageCensor::NONE);
    debug_assert_eq!(snap1.d_events, d1, "first-stage event clock must hit its target");
    let w = jenkins_weights(d1, d2);
    let p1 = p1_first_stage(snap1.score, d1)?;

    let second: Vec<SubjectRecord> =
        data.iter().copied().filter(|s| s.stage == Stage::Second).collect();
    let d2_final = match rule {
        AdaptiveRule::IncreaseEvents { d12_star } => d12_star - d1,
        _ => d2,
    };
    let t2 = event_time_capped(&second, d2_final, t_max)?;
    let snap2 = snapshot(&second, t2, StageCensor::NONE);
    debug_assert_eq!(snap2.d_events, d2_final, "second-stage event clock must hit its target");
    let p2 = p2_second_stage(snap2.score, d2_final)?;
    let z_combination = combine(&w, &StagePValues { p1, p2 })?;

    let t_final = t1.max(t2);
    let deficit = match rule {
        AdaptiveRule::IncreaseEvents { .. } => {
            // Pooled events gained over the extension window minus the
            // first-stage events gained there; the stage-separated test
            // never reads the latter.
            let t2_orig = calendar_time_of_event_count(&second, d2)?;
            let t_orig = t1.max(t2_orig).min(t_final);
            let gained_pooled = snapshot(data, t_final, StageCensor::NONE).d_events
                - snapshot(data, t_orig, StageCensor::NONE).d_events;
            let gained_first = snapshot(first, t_final, StageCensor::NONE).d_events
                - snapshot(first, t_orig, StageCensor::NONE).d_events;
            (gained_pooled - gained_first) as f64
        }
        _ => 0.0,
    };

    Ok(StageAnalyses {
        w,
        p2,
        z_combination,
        t_scheduled: t1,
        s1_scheduled: snap1.score,
        d1_scheduled: d1,
        u1: d1 as f64 / first.len() as f64,
        t_final,
        d1_final: snapshot(first, t_final, StageCensor::NONE).d_events,
        d12_final: d1 + d2_final,
        effective_info_deficit: deficit,
        irle: None,
    })
}

fn run_adaptive_cached(
    sc: &ScenarioConfig,
    rule: AdaptiveRule,
    rng: &mut Rng,
    cache: &KstarCache,
) -> Result<TrialRecord, SimError> {
    if let AdaptiveRule::IncreaseEvents { d12_star } = rule {
        if d12_star <= sc.design.d12 {
            return Err(SimError::InvalidScenario(format!(
                "extended event target {d12_star} must exceed the planned target {}",
                sc.design.d12
            )));
        }
    }
    let data = simulate_trial(sc, rng)?;
    let first: Vec<SubjectRecord> =
        data.iter().copied().filter(|s| s.stage == Stage::First).collect();
    if first.is_empty() || first.len() == data.len() {
        return Err(SimError::InvalidScenario(
            "interim split leaves an empty recruitment stage".into(),
        ));
    }

    let analyses = match sc.design.weight_rule {
        WeightRule::Irle => analyze_irle(sc, rule, &data, &first)?,
        WeightRule::Jenkins { d1, d2 } => analyze_jenkins(sc, rule, d1, d2, &data, &first)?,
    };

    let t_max = sc.t_max();
    let z_alpha = -norm_quantile(sc.design.alpha).expect("alpha validated in scenario");

    // Naive monitored statistic; under the adversarial rule, the maximum over
    // first-stage event calendar times in [t_scheduled, t_max].
    let (t_star, z_naive) = {
        let base = z_star_naive(
            &analyses.w,
            analyses.s1_scheduled,
            analyses.d1_scheduled,
            analyses.p2,
        )?;
        match rule {
            AdaptiveRule::AdversarialMaxStop => {
                let mut times: Vec<f64> = first
                    .iter()
                    .map(event_calendar_time)
                    .filter(|&t| t > analyses.t_scheduled && t <= t_max)
                    .collect();
                times.sort_unstable_by(f64::total_cmp);
                let mut best = (analyses.t_scheduled, base);
                for t in times {
                    let snap = snapshot(&first, t, StageCensor::NONE);
                    let z = z_star_naive(&analyses.w, snap.score, snap.d_events, analyses.p2)?;
                    if z > best.1 {
                        best = (t, z);
                    }
                }
                best
            }
            _ => (analyses.t_scheduled, base),
        }
    };

    let k_star = cache.get(analyses.w.w1(), analyses.u1)?;
    let d1_star = snapshot(&first, t_star, StageCensor::NONE).d_events;
    let d1_tmax = snapshot(&first, t_max, StageCensor::NONE).d_events;

    Ok(TrialRecord {
        combination_reject: decide(analyses.z_combination, z_alpha).reject,
        naive_reject: decide(z_naive, z_alpha).reject,
        corrected_reject: decide(z_naive, k_star).reject,
        z_combination: analyses.z_combination,
        z_naive,
        k_star,
        w1: analyses.w.w1(),
        u1: analyses.u1,
        t_scheduled: analyses.t_scheduled,
        t_star,
        t_final: analyses.t_final,
        d1_scheduled: analyses.d1_scheduled,
        d1_star,
        d1_final: analyses.d1_final,
        d1_tmax,
        d12_final: analyses.d12_final,
        effective_info_deficit: analyses.effective_info_deficit,
        irle: analyses.irle,
    })
}

/// Simulates one trial and evaluates all three decision paths.
pub fn run_adaptive(
    sc: &ScenarioConfig,
    rule: AdaptiveRule,
    rng: &mut Rng,
) -> Result<TrialRecord, SimError> {
    run_adaptive_cached(sc, rule, rng, &KstarCache::new(sc.design.alpha))
}

/// Runs `n_reps` independent replications (replication i uses
/// `Rng::substream(seed, i)`), in parallel, preserving replication order.
pub fn run_replications(
    sc: &ScenarioConfig,
    rule: AdaptiveRule,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>, SimError> {
    assert!(n_reps >= 1, "need at least one replication");
    sc.validate()?;
    let cache = KstarCache::new(sc.design.alpha);
    (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = Rng::substream(seed, rep as u64);
            run_adaptive_cached(sc, rule, &mut rng, &cache)
        })
        .collect()
}

/// Rejection rates (with binomial standard errors) and mean event counts.
pub fn summarize(records: &[TrialRecord]) -> SimSummary {
    assert!(!records.is_empty(), "cannot summarize zero replications");
    let n = records.len() as f64;
    let rate = |f: &dyn Fn(&TrialRecord) -> bool| {
        records.iter().filter(|r| f(r)).count() as f64 / n
    };
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    let mean = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;

    let combination_rate = rate(&|r| r.combination_reject);
    let naive_rate = rate(&|r| r.naive_reject);
    let corrected_rate = rate(&|r| r.corrected_reject);
    SimSummary {
        replications: records.len(),
        combination_rate,
        combination_se: se(combination_rate),
        naive_rate,
        naive_se: se(naive_rate),
        corrected_rate,
        corrected_se: se(corrected_rate),
        mean_d1_scheduled: mean(&|r| r.d1_scheduled as f64),
        mean_d1_final: mean(&|r| r.d1_final as f64),
        mean_d1_tmax: mean(&|r| r.d1_tmax as f64),
        mean_d12_final: mean(&|r| r.d12_final as f64),
        mean_effective_info_deficit: mean(&|r| r.effective_info_deficit),
    }
}

/// [`run_replications`] followed by [`summarize`].
pub fn operating_characteristics(
    sc: &ScenarioConfig,
    rule: AdaptiveRule,
    n_reps: usize,
    seed: u64,
) -> Result<SimSummary, SimError> {
    Ok(summarize(&run_replications(sc, rule, n_reps, seed)?))
}

// ---------------------------------------------------------------------------
