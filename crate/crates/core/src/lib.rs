//! Behavioral simulation of a transimpedance amplifier whose feedback element
//! is a two-state memristor, giving it automatic gain control.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod blocks;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod controller;
pub mod engine;
pub mod error;
pub mod memristor;
pub mod metrics;
pub mod output;
pub mod variability;
