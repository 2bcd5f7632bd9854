//! Closed-loop multirotor simulation with a text-protocol decision layer.
//!
//! A hover-linearized LQR position controller flies a simulated vehicle
//! through a timed mission. Every decision period the tracking error is turned
//! into failure codes, rendered as a short query, and answered by a decision
//! policy with a list of whitelisted actions. The actions nudge additive
//! control offsets, retune the LQR weights, or abort the mission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advisor;
pub mod controller;
pub mod dynamics;
pub mod executor;
pub mod harness;
pub mod llm_client;
pub mod mission;
pub mod monitor;
