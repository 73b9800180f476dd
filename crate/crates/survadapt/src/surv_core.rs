//! Survival-data model: subject records with staggered entry, administrative
//! censoring at calendar time, logrank score snapshots, event-count clocks,
//! and Kaplan-Meier curves.
//!
//! Time scales: `entry` is calendar months from study start; `surv` is latent
//! survival in months since entry. An analysis at calendar time `t` observes
//! subject `j` on the patient-time window [0, t - entry_j]; the logrank score
//! is computed on the patient-time scale. Sign convention (used by every
//! module): the score is the observed-minus-expected sum over Control-arm
//! events, so a positive score favors Experimental.
//!
//! Censoring is administrative only; there is no dropout model. Standardized
//! statistics elsewhere in the crate use the equal-allocation variance
//! approximation D/4, never the exact hypergeometric sum.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurvError {
    /// `calendar_time_of_event_count` asked for more events than ever occur.
    #[error("insufficient events: requested {requested}, only {available} ever occur")]
    InsufficientEvents { requested: usize, available: usize },
    /// Information time is undefined when no first-stage events exist by t_max.
    #[error("no first-stage events by t_max; information time undefined")]
    ZeroInformation,
    #[error("invalid time ordering: t = {t} exceeds t_max = {t_max}")]
    TimeOrder { t: f64, t_max: f64 },
    #[error("dataset parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Control,
    Experimental,
}

/// Recruitment stage: `First` iff the subject entered before the interim
/// analysis time of the scenario that produced the record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    First,
    Second,
}

/// One subject. `entry` >= 0 (calendar months), `surv` > 0 (months since
/// entry to the latent event).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubjectRecord {
    pub entry: f64,
    pub surv: f64,
    pub arm: Arm,
    pub stage: Stage,
}

/// Event count and logrank score of a dataset at one analysis time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub calendar_time: f64,
    pub d_events: usize,
    pub score: f64,
}

/// Optional extra administrative censor times (calendar months) applied per
/// recruitment stage on top of the analysis time, e.g. to freeze first-stage
/// follow-up at the originally planned analysis while second-stage subjects
/// are followed longer.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageCensor {
    pub first: Option<f64>,
    pub second: Option<f64>,
}

impl StageCensor {
    pub const NONE: StageCensor = StageCensor { first: None, second: None };

    fn cap(&self, stage: Stage) -> Option<f64> {
        match stage {
            Stage::First => self.first,
            Stage::Second => self.second,
        }
    }
}

/// Product-limit estimate for one arm. `steps` holds (patient time, survival
/// probability after that time) at observed event times only; the curve is 1
/// before the first step and nonincreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct KmCurve {
    pub arm: Arm,
    pub steps: Vec<(f64, f64)>,
}

// ---------------------------------------------------------------------------
// snapshots
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Obs {
    time: f64, // patient time at event or censoring
    event: bool,
    control: bool,
}

/// Observed (patient-time, event, arm) triples at calendar time `t`, sorted
/// ascending by time. Subjects not entered by their censor horizon drop out.
fn observations(data: &[SubjectRecord], t: f64, extra: StageCensor) -> Vec<Obs> {
    let mut obs = Vec::with_capacity(data.len());
    for r in data {
        let end = match extra.cap(r.stage) {
            Some(c) => t.min(c),
            None => t,
        };
        let window = end - r.entry;
        if window < 0.0 {
            continue;
        }
        let control = r.arm == Arm::Control;
        if r.surv <= window {
            obs.push(Obs { time: r.surv, event: true, control });
        } else {
            obs.push(Obs { time: window, event: false, control });
        }
    }
    obs.sort_unstable_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    obs
}

/// Event count and logrank score of `data` at calendar time `t`.
///
/// The score is sum over distinct event times of (observed - expected)
/// Control events, with the hypergeometric mean d * n_C / n at ties; subjects
/// censored exactly at an event time count as at risk there. Empty data (or
/// no one under observation) gives `Snapshot { t, 0, 0.0 }`.
pub fn snapshot(data: &[SubjectRecord], t: f64, extra: StageCensor) -> Snapshot {
    let obs = observations(data, t, extra);
    let n = obs.len();
    // suffix control counts: ctrl_from[i] = # Control among obs[i..]
    let mut ctrl_from = vec![0usize; n + 1];
    for i in (0..n).rev() {
        ctrl_from[i] = ctrl_from[i + 1] + usize::from(obs[i].control);
    }
    let mut d_events = 0usize;
    let mut score = 0.0;
    let mut i = 0;
    while i < n {
        let tau = obs[i].time;
        let mut j = i;
        let mut d_tot = 0usize;
        let mut d_ctrl = 0usize;
        while j < n && obs[j].time == tau {
            if obs[j].event {
                d_tot += 1;
                d_ctrl += usize::from(obs[j].control);
            }
            j += 1;
        }
        if d_tot > 0 {
            let at_risk = (n - i) as f64;
            let ctrl_risk = ctrl_from[i] as f64;
            score += d_ctrl as f64 - d_tot as f64 * ctrl_risk / at_risk;
            d_events += d_tot;
        }
        i = j;
    }
    Snapshot { calendar_time: t, d_events, score }
}

/// Calendar time of a subject's event, consistent with the window arithmetic
/// of [`snapshot`]: the smallest representable t with t - entry >= surv, so a
/// snapshot at exactly this time counts the event.
pub fn event_calendar_time(r: &SubjectRecord) -> f64 {
    let mut t = r.entry + r.surv;
    if t - r.entry < r.surv {
        t = t.next_up();
    }
    debug_assert!(t - r.entry >= r.surv);
    t
}

/// Calendar time of the d-th event (d >= 1) over the whole latent dataset,
/// min{t : D(t) = d}.
pub fn calendar_time_of_event_count(
    data: &[SubjectRecord],
    d: usize,
) -> Result<f64, SurvError> {
    if d == 0 || d > data.len() {
        return Err(SurvError::InsufficientEvents { requested: d, available: data.len() });
    }
    let mut times: Vec<f64> = data.iter().map(event_calendar_time).collect();
    times.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(times[d - 1])
}

/// Information time u = D1(t) / D1(t_max) of the first-stage subject set.
pub fn information_time(
    first_stage: &[SubjectRecord],
    t: f64,
    t_max: f64,
) -> Result<f64, SurvError> {
    if t > t_max {
        return Err(SurvError::TimeOrder { t, t_max });
    }
    let d_max = snapshot(first_stage, t_max, StageCensor::NONE).d_events;
    if d_max == 0 {
        return Err(SurvError::ZeroInformation);
    }
    let d_t = snapshot(first_stage, t, StageCensor::NONE).d_events;
    Ok(d_t as f64 / d_max as f64)
}

/// Kaplan-Meier curve for one arm at calendar time `t` (administrative
/// censoring, plus the optional per-stage extra censor).
pub fn km_curve(data: &[SubjectRecord], t: f64, extra: StageCensor, arm: Arm) -> KmCurve {
    let of_arm: Vec<SubjectRecord> = data.iter().copied().filter(|r| r.arm == arm).collect();
    let obs = observations(&of_arm, t, extra);
    let n = obs.len();
    let mut steps = Vec::new();
    let mut surv = 1.0;
    let mut i = 0;
    while i < n {
        let tau = obs[i].time;
        let mut j = i;
        let mut d_tot = 0usize;
        while j < n && obs[j].time == tau {
            d_tot += usize::from(obs[j].event);
            j += 1;
        }
        if d_tot > 0 {
            let at_risk = (n - i) as f64;
            surv *= 1.0 - d_tot as f64 / at_risk;
            steps.push((tau, surv));
        }
        i = j;
    }
    KmCurve { arm, steps }
}

// ---------------------------------------------------------------------------
// dataset CSV (header: entry,surv,arm,stage with arm in {C,E}, stage in {1,2})
// ---------------------------------------------------------------------------

pub const DATASET_CSV_HEADER: &str = "entry,surv,arm,stage";

pub fn dataset_to_csv(data: &[SubjectRecord]) -> String {
    let mut out = String::from(DATASET_CSV_HEADER);
    out.push('\n');
    for r in data {
        let arm = match r.arm {
            Arm::Control => 'C',
            Arm::Experimental => 'E',
        };
        let stage = match r.stage {
            Stage::First => '1',
            Stage::Second => '2',
        };
        out.push_str(&format!("{},{},{},{}\n", r.entry, r.surv, arm, stage));
    }
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Vec<SubjectRecord>, SurvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == DATASET_CSV_HEADER => {}
        Some((_, h)) => {
            return Err(SurvError::Parse {
                line: 1,
                msg: format!("expected header '{DATASET_CSV_HEADER}', got '{h}'"),
            })
        }
        None => return Err(SurvError::Parse { line: 1, msg: "empty file".into() }),
    }
    let mut out = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(SurvError::Parse {
                line: line_no,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let entry: f64 = fields[0].trim().parse().map_err(|_| SurvError::Parse {
            line: line_no,
            msg: format!("bad entry time '{}'", fields[0]),
        })?;
        let surv: f64 = fields[1].trim().parse().map_err(|_| SurvError::Parse {
            line: line_no,
            msg: format!("bad survival time '{}'", fields[1]),
        })?;
        if !(entry.is_finite() && entry >= 0.0) {
            return Err(SurvError::Parse {
                line: line_no,
                msg: format!("entry must be finite and >= 0, got {entry}"),
            });
        }
        if !(surv.is_finite() && surv > 0.0) {
            return Err(SurvError::Parse {
                line: line_no,
                msg: format!("surv must be finite and > 0, got {surv}"),
            });
        }
        let arm = match fields[2].trim() {
            "C" => Arm::Control,
            "E" => Arm::Experimental,
            other => {
                return Err(SurvError::Parse {
                    line: line_no,
                    msg: format!("arm must be C or E, got '{other}'"),
                })
            }
        };
        let stage = match fields[3].trim() {
            "1" => Stage::First,
            "2" => Stage::Second,
            other => {
                return Err(SurvError::Parse {
                    line: line_no,
                    msg: format!("stage must be 1 or 2, got '{other}'"),
                })
            }
        };
        out.push(SubjectRecord { entry, surv, arm, stage });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
