//! Unfitted parametric finite element solver for the two-dimensional
//! degenerate multi-phase Stefan problem with triple junctions.
//!
//! The domain is a box `(-H,H)^2` partitioned into phases by a network of
//! polygonal curves that may meet in triple junctions. A chemical potential
//! is harmonic in the bulk, coupled to the curves through a Gibbs–Thomson
//! condition (jump of the potential balances surface tension times
//! curvature) and a Stefan-type velocity law (jump of the normal flux drives
//! the interfaces). The curves are discretized with parametric piecewise
//! linear elements, the bulk with P1 elements on an adaptive quadtree
//! triangulation that is not fitted to the interfaces; the coupling terms
//! are integrated exactly along element cuts.
//!
//! Two time stepping schemes are provided:
//!
//! * a linear scheme, one sparse solve per step, unconditionally stable;
//! * a conservative scheme that evaluates the vertex normals on the
//!   interpolated mid-step geometry and thereby conserves the total
//!   energy content `v = Σ_ℓ β_ℓ |Ω_ℓ|` exactly. It is nonlinear and is
//!   resolved by a lagged fixed-point iteration.
//!
//! Concentric-circle configurations admit semianalytic solutions (radii
//! ODEs plus a closed-form potential); these live in [`exact`] and serve as
//! oracles for the convergence harness in the CLI and the test suite.

pub mod bulk;
pub mod cluster;
pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod evolution;
pub mod exact;
pub mod geometry;
pub mod scenario;
pub mod system;
pub mod verify;

use std::fmt;

/// Crate-wide error type.
///
/// Variants mirror the failure modes of the individual subsystems; the CLI
/// maps them onto process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Inconsistent cluster topology (orientation map, junction incidence, β values).
    Topology(String),
    /// Invalid geometry (zero-length segment, mismatched junction coordinates,
    /// non-closing phase boundary cycle).
    Geometry(String),
    /// Point or curve outside the computational box.
    OutOfDomain(String),
    /// Segment clipping against the bulk mesh failed to produce a partition.
    WalkStall(String),
    /// Block sizes do not match between cluster, bulk mesh and coupling data.
    DimensionMismatch(String),
    /// Linear solve failed or did not meet the residual tolerance.
    SolveFailure(String),
    /// A curve segment collapsed below the resolvable scale.
    DegenerateMesh(String),
    /// The lagged iteration of the conservative scheme did not converge.
    FixedPointDivergence(String),
    /// A topology change outside the two supported surgery cases.
    SurgeryUnsupported(String),
    /// Root finding could not bracket a root.
    RootBracket(String),
    /// Invalid arguments to a semianalytic solution (e.g. R1 >= R2).
    Domain(String),
    /// Malformed configuration or cluster file; carries a line number.
    Parse { line: usize, message: String },
    /// File system failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Topology(m) => write!(f, "topology error: {m}"),
            Error::Geometry(m) => write!(f, "geometry error: {m}"),
            Error::OutOfDomain(m) => write!(f, "out of domain: {m}"),
            Error::WalkStall(m) => write!(f, "segment clipping stalled: {m}"),
            Error::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
            Error::SolveFailure(m) => write!(f, "solve failure: {m}"),
            Error::DegenerateMesh(m) => write!(f, "degenerate mesh: {m}"),
            Error::FixedPointDivergence(m) => write!(f, "fixed point iteration diverged: {m}"),
            Error::SurgeryUnsupported(m) => write!(f, "unsupported topology event: {m}"),
            Error::RootBracket(m) => write!(f, "root bracketing failed: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
