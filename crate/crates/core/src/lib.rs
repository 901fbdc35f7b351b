//! Deterministic discrete-time simulator for cooperative vehicle platoons.

pub mod acceptance;
pub mod bundled;
pub mod cloud;
pub mod comms;
pub mod controllers;
pub mod dynamics;
pub mod engine;
pub mod fsm;
pub mod management;
pub mod scenario;
pub mod trace;
pub mod types;
