//! Support code for the `sparse-code` binary that is worth unit-testing on
//! its own (and reusing from integration tests): Matrix Market I/O.

pub mod mtx;
