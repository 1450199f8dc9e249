//! One user-facing seed fans out to independent per-module streams.

/// Odd 64-bit mixing constant (golden ratio). Offsets are multiples of it so
/// nearby user seeds never reuse each other's module streams.
const STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate = 0,
    Split = 1,
    Federated = 2,
    EvalPool = 3,
    LabelInference = 4,
}

/// `seed + offset(stage)` with wrapping arithmetic.
pub fn derive(seed: u64, stage: Stage) -> u64 {
    seed.wrapping_add((stage as u64).wrapping_mul(STRIDE))
}
