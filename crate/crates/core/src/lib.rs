//! Panel forecasting of state-level violent crime with a from-scratch
//! LSTM→GRU recurrent network.
//!
//! The pipeline: ingest or synthesize a state-year panel ([`panel`]), engineer
//! lagged and rolling features and split chronologically ([`features`]), train
//! the hand-built recurrent net with Adam, early stopping, and plateau LR
//! reduction ([`net`], [`train`]), then score and aggregate repeated trials
//! into reports and an error-bar chart ([`eval`], [`trials`], [`chart`]).

pub mod chart;
pub mod eval;
pub mod features;
pub mod net;
pub mod panel;
pub mod rng;
pub mod train;
pub mod trials;
