#![cfg_attr(not(test), no_std)]
extern crate alloc;

pub mod geometry;
pub mod scene;
pub mod intent;
pub mod grasp;
pub mod fsm;
pub mod robot;
pub mod pipeline;
pub mod stats;
pub mod harness;
pub mod defaults;
