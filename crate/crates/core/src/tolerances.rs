//! Fixed numerical tolerances shared by the qubit algebra and the measures.

/// Algebraic identities (hermiticity, trace, formula agreement).
pub const ALGEBRAIC: f64 = 1e-12;

/// Slack allowed below zero for eigenvalues of a density matrix.
pub const PSD_SLACK: f64 = 1e-10;

/// Slack allowed outside the unit Bloch ball.
pub const BLOCH_SLACK: f64 = 1e-10;

/// Slack for channels mapping the Bloch ball into itself.
pub const CHANNEL_SLACK: f64 = 1e-8;

/// Orthogonality of measurement frames.
pub const ORTHOGONALITY: f64 = 1e-10;

/// Tolerance below which a bound audit does not count a violation.
pub const AUDIT: f64 = 1e-8;
