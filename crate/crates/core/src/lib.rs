//! Repeated trust-game experiments: game engine, scripted counterpart,
//! questionnaires, discount-rate estimation, robust OLS, session service and
//! a simulator that drives the whole pipeline.

pub mod bot;
pub mod econometrics;
pub mod estimation;
pub mod game;
pub mod questionnaire;
pub mod session;
pub mod simulation;
