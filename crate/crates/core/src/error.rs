use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("wave curves meet at or below vacuum (w_L - z_R = {gap:e}); floor policy applies")]
    NearVacuum { gap: f64 },

    #[error("fan orientation error: z_M = {z_m} < z_L = {z_l}")]
    FanOrientation { z_l: f64, z_m: f64 },

    #[error("invariant region collapsed at node {node}: lo = {lo} > hi = {hi}")]
    BandCollapse { node: usize, lo: f64, hi: f64 },

    #[error("instability at level {level}: {detail}")]
    Instability { level: usize, detail: String },

    #[error("time level {level} outside 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("map coordinates require an even time level, got {level}")]
    ParityMismatch { level: usize },

    #[error("decode did not converge after {sweeps} sweeps (defect {defect:e})")]
    DecodeDivergence { sweeps: usize, defect: f64 },

    #[error("map point is unphysical at node {node}: w - z = {gap}")]
    Unphysical { node: usize, gap: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
