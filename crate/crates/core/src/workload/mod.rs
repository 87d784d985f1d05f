//! Transaction generators and timestamped arrival streams.

pub mod stream;
pub mod tpcc;
pub mod ycsb;
pub mod zipf;

pub use stream::{build_stream, Arrival, Spacing, StreamRecord, WorkloadConfig, WorkloadStream};
pub use tpcc::{gen_tpcc_txn, sweep_geo_pct, TpccConfig, TpccGenerator};
pub use ycsb::{gen_ycsb_txn, YcsbConfig, YcsbGenerator};
pub use zipf::{zipf_sample, Zipf};
