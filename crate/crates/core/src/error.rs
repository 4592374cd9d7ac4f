// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed case text. `line` is 1-based; 0 when no line applies.
    Parse {
        line: usize,
        msg: String,
    },
    /// A branch or generator names a bus that does not exist.
    UnknownBus {
        what: String,
        bus: u32,
    },
    DuplicateBus(u32),
    /// A record violates one of its field invariants.
    Invalid(String),
    /// Buses not reachable from the first bus once out-of-service elements are gone.
    Disconnected {
        island: Vec<u32>,
    },
    ZeroImpedance {
        from: u32,
        to: u32,
    },
    /// A symmetric matrix had an unexpected numerical rank.
    Rank {
        bus: u32,
        what: String,
        expected: usize,
        found: usize,
    },
    NotIncident {
        bus: u32,
        branch: usize,
    },
    Dimension(String),
    /// The central normal matrix could not be factored.
    SingularNormal,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line: 0, msg } => write!(f, "parse error: {msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::UnknownBus { what, bus } => write!(f, "{what} refers to unknown bus {bus}"),
            Error::DuplicateBus(id) => write!(f, "duplicate bus id {id}"),
            Error::Invalid(msg) => write!(f, "invalid case: {msg}"),
            Error::Disconnected { island } => {
                write!(f, "network is not connected; island buses:")?;
                for b in island {
                    write!(f, " {b}")?;
                }
                Ok(())
            }
            Error::ZeroImpedance { from, to } => {
                write!(f, "branch {from}-{to} has zero series impedance")
            }
            Error::Rank { bus, what, expected, found } => write!(f, "bus {bus}: {what} matrix has numerical rank {found}, expected {expected}"),
            Error::NotIncident { bus, branch } => {
                write!(f, "branch {branch} is not incident to bus {bus}")
            }
            Error::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::SingularNormal => write!(f, "central normal matrix is not positive definite"),
        }
    }
}

impl core::error::Error for Error {}
