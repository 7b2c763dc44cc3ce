//! File formats, IO, adapter transports and the end-to-end commands built
//! on `skillbench-core`.

pub mod adapter;
pub mod cache;
pub mod config;
pub mod dataset;
pub mod http_embed;
pub mod output;
pub mod pipeline;
pub mod store;
