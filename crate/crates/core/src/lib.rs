#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod channel;
pub mod keytree;
pub mod ldpc;
pub mod modmath;
pub mod rng;
pub mod sim;
pub mod stats;
