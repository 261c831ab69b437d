//! Benchmark orchestration: specs, synthetic fixtures, partitioned
//! evaluation, dilution analysis, head-to-head tables and output layout.

mod compare;
mod dilution;
mod fixture;
mod output;
mod runner;
mod spec;

pub use compare::{head_to_head_csv, per_file_head_to_head, scorer_view, HeadToHead};
pub use dilution::{
    compare_precision, dilution_analysis, top_f1_precisions, DilutionLevel, DilutionReport,
    TOP_F1_THRESHOLDS,
};
pub use fixture::{
    generate_dilution_fixture, generate_fixture, random_smiles, DilutionFixture,
    DilutionFixtureSpec, Fixture, SyntheticFixtureSpec,
};
pub use output::{dilution_csv, write_benchmark_outputs, write_dilution_outputs};
pub use runner::{
    curve_thresholds, evaluate_benchmark, labeled_top1, partition_queries, run_benchmark,
    value_order,
};
pub use spec::{
    config_hash, truth_from_queries, BenchmarkInputs, BenchmarkSpec, Metric, NamedScorer,
    PartitionSpec, SampleFilter,
};
