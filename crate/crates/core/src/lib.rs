//! Engine for gamified voice competitions.
//!
//! Participants record a catch phrase while trying to make the waveform of
//! their voice note match a target contour. This crate scores those
//! recordings, tracks campaign funnels and leaderboards in an append-only
//! event log, drives the chat dialog, and computes engagement reports.

pub mod analytics;
pub mod audio;
pub mod campaign;
pub mod contour;
pub mod conversation;
pub mod fixtures;
pub mod scoring;
pub mod synth;
