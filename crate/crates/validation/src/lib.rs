//! Acceptance criteria for `stochnls` live in `tests/acceptance.rs`.
