//! Tightness verdicts and the procedures that produce them.

mod bounds;
mod enumerate;
mod montecarlo;
mod rnn;
mod series;
mod verdict;

pub use bounds::{
    certify_nontight_upper_bound, certify_tight_lower_bound, certify_tight_lower_bound_checked, EosBoundFamily,
    SeriesClass, BOUND_SLACK,
};
pub use montecarlo::{monte_carlo_termination, monte_carlo_termination_with, McEstimate, DEFAULT_MAX_LEN};
pub use rnn::{rnn_hidden_norm_sup, rnn_log_norm_test, rnn_uniform_eos_floor};
pub use series::{
    assess_series, product_sum_duality_check, ptilde_eos_enumerate, ptilde_eos_fsa, termination_cdf, DualityReport,
    PtildeSeries, HIT_ONE_TOL,
};
pub use verdict::{Certificate, Evidence, TightnessVerdict, Witness};
