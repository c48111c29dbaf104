//! Yao garbling with free-XOR and point-and-permute, plus base oblivious
//! transfer for the evaluator's input labels.

mod block;
mod garble;
pub mod ot;

pub use block::Block;
pub use garble::{
    decode_and_prove, evaluate, garble, verify_output, GarbleError, GarbledCircuit, GarblerState,
};
