//! Closed forms, exact recurrences and the rational enumeration oracle.

pub mod conditional;
pub mod enumerate;
pub mod hyper;
pub mod moments;
pub mod series;

pub use conditional::{conditional_eps_moments, conditional_eps_moments_exact, EpsMoments};
pub use enumerate::{enumerate_exact, enumerate_histories, enumerate_levels, Budget, ExactLaw, ExactMoments};
pub use hyper::{hyper3f2_unit, Hyper3F2};
pub use moments::{
    closed_form_second_moment, exact_second_moment, exact_second_moment_rational, expected_occupation, expected_sigma,
    finite_l_second_moment, limit_constants, superdiffusive_moments, LMoments, LimitConstants, MomentTable,
};
pub use series::{gamma_ratio_an, gamma_ratio_an_closed, vn, vn_asymptote, GammaRatioIter, GammaRatioSeries, VnAsymptote};
