//! Post-processing of path results: martingale functionals, the event
//! classifier, ensemble statistics, decay fits and diagnostics.

pub mod appendix;
pub mod cluster;
pub mod event;
pub mod fit;
pub mod ks;
pub mod martingale;
pub mod stats;

pub use appendix::{
    appendix_a_mask, concave_envelope, envelope_branch_point, envelope_target, two_particle_lower_bound,
    TwoParticleBound,
};
pub use cluster::{cluster_norm, collision_lyapunov};
pub use event::{event_a, EventAParams, EventClass, EventConstant, EventOutcome};
pub use fit::{default_window, fit_decay, linear_fit, DecayModel, LinearFit, RateFit};
pub use ks::{inverse_gamma_scale_mle, ks_critical, ks_inverse_gamma, ks_statistic};
pub use martingale::{
    comparison_process, comparison_value, exp_functional, exp_martingale, exp_martingale_value, ExpFunctional,
};
pub use stats::{conditional, flocking_metrics, mean_se, EnsembleStats, Frequency, NormStats, Series, Z95};
