//! Experiment engine: configuration, learn/update chains, the private
//! retraining baseline, the unlearning certificate and reports.

mod baseline;
mod certify;
mod chain;
mod config;
mod report;

pub use baseline::{baseline_accuracy, plan_baseline, run_retrain_baseline, unlearn_accuracy_bound, BaselinePlan};
pub use certify::{verify_unlearning_certificate, CertificateReport, RoundCertificate, CERTIFICATE_SCHEMA};
pub use chain::{retrain, run_chain, run_experiment, MetricsRecord, Reference};
pub use config::{ChainConfig, ChainMode, ExperimentConfig, Prepared, TrialInputs, OUTPUT_DIR_ENV};
pub use report::{emit_report, read_records, write_json, Percentiles, Summary, RECORDS_FILE, REPORT_SCHEMA, SUMMARY_FILE};
