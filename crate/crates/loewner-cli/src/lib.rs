//! Command line driver for the `loewner` library.
//!
//! The binary exposes six subcommands: `evolve` (integrate the evolution
//! family), `classify` (semigroup kind of a generator), `koenigs` (the
//! linearizing conjugation), `chain` (affine Loewner chains of splitting
//! fields), `check` (property batteries with verdicts), and `demo` (built-in
//! fields with predicted outcomes).
//!
//! Exit codes: 0 when every requested verdict holds, 2 when any verdict is
//! false, 1 on an execution error (bad flags, unparseable expressions,
//! certification failures).

pub mod cli;
pub mod commands;
pub mod config;
pub mod demos;
pub mod output;
