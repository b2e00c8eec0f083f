//! Empty library; the acceptance criteria live in `tests/acceptance.rs`.
