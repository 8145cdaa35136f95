//! Scenario runner, KAT replay, reports and file formats on top of
//! `qran-core`.

pub mod armor;
pub mod cli;
pub mod compare;
pub mod entropy;
pub mod kat;
pub mod report;
pub mod runner;

pub use compare::{compare_profiles, size_table, Comparison, SizeRow};
pub use kat::{run_suite, KatError, KatSummary};
pub use report::{exit, ChannelResult, Report};
pub use runner::{load_scenario, run_scenario, HarnessError, RunOptions};
