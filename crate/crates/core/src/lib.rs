//! Maximal lotteries and distributionally robust lotteries over grouped
//! pairwise preference data, with the LP solver and experiment harness
//! they need.

pub mod harness;
pub mod lottery;
pub mod lp;
pub mod prefdata;
pub mod robust;
pub mod seeds;
pub mod synth;
