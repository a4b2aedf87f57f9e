use num_complex::Complex64;

/// Error type shared by the whole library.
///
/// Parse errors carry the byte offset into the source text. Numerical errors
/// carry enough context (point, time, iteration count) to reproduce the
/// failure from a log line.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("expression uses `t` but was declared as a function of z alone")]
    ArityViolation,

    #[error("a time argument was {} but the function has arity {arity}", if *.supplied { "supplied" } else { "omitted" })]
    TimeArgumentMismatch { supplied: bool, arity: u8 },

    #[error("division by zero while evaluating at z = {z}")]
    DivisionByZero { z: Complex64 },

    #[error("branch point: {func}(0) is singular (evaluating at z = {z})")]
    BranchPoint { func: &'static str, z: Complex64 },

    #[error("non-finite value produced while evaluating at z = {z}")]
    NonFinite { z: Complex64 },

    #[error("point lies outside the open unit disc: |z| = {modulus}")]
    NotInDisc { modulus: f64 },

    #[error("point is not on the unit circle: |z| = {modulus}")]
    NotOnCircle { modulus: f64 },

    #[error("quadrature did not converge after {levels} refinement levels")]
    QuadratureNonConvergent { levels: u32 },

    #[error(
        "Newton iteration did not converge within {iterations} iterations (last residual {residual:.3e})"
    )]
    NoConvergence { iterations: u32, residual: f64 },

    #[error("Newton iteration converged to a point outside the unit disc: |z| = {modulus}")]
    ConvergedOutsideDisc { modulus: f64 },

    #[error("no Denjoy-Wolff candidate found (no interior zero and no boundary point with rate <= 1e-6)")]
    NoDenjoyWolff,

    #[error("the vector field is identically zero on the validation grid")]
    ZeroField,

    #[error("radial limit at {tau} did not converge (Richardson tail {tail:.3e})")]
    RadialLimitDiverges { tau: Complex64, tail: f64 },

    #[error("boundary rate has a non-real part: Im = {imaginary:.3e} at {tau}")]
    RateNotReal { tau: Complex64, imaginary: f64 },

    #[error("not an infinitesimal generator: Re p = {re_p:.3e} at z = {z}, t = {t}")]
    NotAGenerator { z: Complex64, t: f64, re_p: f64 },

    #[error("hyperbolic pair constraint violated: Re(lambda(sigma+tau)) = {lhs:.6e} but |lambda||1+tau*sigma| = {rhs:.6e}")]
    GroupConstraintViolated { lhs: f64, rhs: f64 },

    #[error(
        "hyperbolic step test inconclusive after {iterations} iterations (last increment {increment:.3e})"
    )]
    StepInconclusive { iterations: u32, increment: f64 },

    #[error("operation requires a boundary Denjoy-Wolff point but tau = {tau} is interior")]
    NotBoundaryCase { tau: Complex64 },

    #[error("operation requires an interior Denjoy-Wolff point but tau = {tau} is on the circle")]
    NotInteriorCase { tau: Complex64 },

    #[error("ODE step size underflow at t = {t} (|h| = {h:.3e}); trajectory pressed against the unit circle or the field is too stiff")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("trajectory left the unit disc at t = {t}: |z| = {modulus}")]
    LeftDisc { t: f64, modulus: f64 },

    #[error("times must satisfy s <= t, got s = {s}, t = {t}")]
    TimeOrder { s: f64, t: f64 },

    #[error("sample time {t} touches a breakpoint of the field; move it off the breakpoint")]
    OnBreakpoint { t: f64 },

    #[error("time factor must not decrease: lambda({t1}) = {v1:.6e} > lambda({t2}) = {v2:.6e}")]
    DecreasingTimeFactor { t1: f64, v1: f64, t2: f64, v2: f64 },

    #[error("the field does not split as g(t)G(z): across-grid dispersion {dispersion:.3e} at t = {t}")]
    NotSplitting { t: f64, dispersion: f64 },

    #[error("{what} needs at least {min} entries, got {got}")]
    TooFewEntries { what: &'static str, min: usize, got: usize },

    #[error("{msg}")]
    Invalid { msg: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid { msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
