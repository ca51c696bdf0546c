//! Acceptance suite for `lerayflow`. The suite is the `acceptance` test
//! target in `tests/`; it runs after every other test target in the
//! workspace.
