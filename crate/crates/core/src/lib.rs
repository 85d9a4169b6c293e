//! Power outage reliability analysis: OE-417 style ingestion, IEEE 1366
//! SAIDI/SAIFI/CAIDI metrics, through-origin and intercept regression with
//! influence diagnostics, LASSO predictor selection, and 2.5-beta major event
//! day detection.

pub mod ingest;
pub mod med;
pub mod numeric;
pub mod regress;
pub mod reliability;
pub mod select;
