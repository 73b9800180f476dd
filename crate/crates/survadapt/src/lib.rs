//! Toolkit for two-stage adaptive survival trials with flexible follow-up.
//!
//! The crate covers the full workflow:
//!
//! * [`surv_core`] — survival datasets, logrank scores, event-count
//!   timing, and Kaplan-Meier curves;
//! * [`combo_test`] — stage-wise p-values and the weighted inverse-normal
//!   combination test;
//! * [`cond_error`] — conditional-error cutoffs for design extensions and
//!   the equivalence between the cutoff and combination formulations;
//! * [`wiener_bound`] — worst-case type I error of naive monitoring under
//!   unspecified follow-up, via boundary-crossing probabilities of a
//!   Brownian motion, and the corrected critical values that restore level
//!   alpha;
//! * [`sim_engine`] — trial simulation with staggered accrual, adaptive
//!   rules (including an adversarial stopping rule that realizes the
//!   worst-case bound), and operating characteristics;
//! * [`numerics`] — the deterministic numeric kernels everything else
//!   builds on;
//! * [`cli`] — the `survadapt` command-line front end.

pub mod cond_error;
pub mod numerics;
pub mod sim_engine;
pub mod surv_core;
pub mod wiener_bound;

pub mod cli;
