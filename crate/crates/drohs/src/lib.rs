// SPDX-License-Identifier: Apache-2.0

//! Std companion to `drohs-core`: file formats, a threaded executor and
//! the pieces the command line tool is built from.

pub mod driver;
pub mod exec;
pub mod io;

pub use exec::Threaded;
