//! Library half of the command-line tool: test-instance generation and the
//! input/output conventions shared with the integration tests.

pub mod instance;
