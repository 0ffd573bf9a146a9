//! File formats and batch commands around `sepl-core`: label-map PNGs,
//! mask-record JSON, dataset manifests, score-stack files, and the
//! manifest-driven enhance/eval/synth pipelines the `sepl` binary exposes.

pub mod cam;
pub mod io;
pub mod runner;
