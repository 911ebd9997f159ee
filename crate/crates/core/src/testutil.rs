//! Shared test programs.

pub const MEAN_STDDEV: &str = include_str!("../fixtures/mean_stddev.stan");
