//! Acceptance suite for `mdenoise-core`; see `tests/acceptance.rs`.
//!
//! Run it with `cargo test -p mdenoise-validation --test acceptance`. It
//! prints one PASS or FAIL line per criterion and exits non-zero when any
//! criterion fails. Positional arguments select criteria by number.
