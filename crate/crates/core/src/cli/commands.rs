use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::settings::{GenerateSettings, TrainSettings};
use super::{BenchArgs, CompareArgs, REPORT_SCHEMA};
use crate::delta::{diff, write_delta_stream, TransferLedger};
use crate::dist::{
    compare_partitioning_report, partition_transfer_cost, plan_snapshot_partition, snapshot_volume,
    train_distributed, CommLedger, DistOptions, PartitionRow,
};
use crate::dtdg::{
    apply_edge_life, build_m_matrix, degree_features, generate_random_dtdg, laplacian_sequence,
    load_edge_list, m_transform_features, m_transform_graph, save_edge_list, DynamicGraph,
};
use crate::error::Result;
use crate::models::{write_params, Architecture, GraphInput, ModelConfig, ParamSet};
use crate::tensor::SparseMatrix;
use crate::training::{sample_link_prediction_sets, ActivationLedger, EpochRecord, TrainOptions};

/// Writes a generated graph and returns it.
pub fn cmd_generate(s: &GenerateSettings) -> Result<DynamicGraph> {
    let g = generate_random_dtdg(s.timesteps, s.vertices, s.density, s.seed)?;
    save_edge_list(&g, &s.out)?;
    Ok(g)
}

/// The graph the GCN aggregates over, before normalization: edge-life
/// smoothing for EGCN-O, the M-transform for TM-GCN, the raw graph for
/// CD-GCN.
pub fn model_graph(cfg: &ModelConfig, raw: &DynamicGraph) -> Result<DynamicGraph> {
    match cfg.architecture {
        Architecture::EgcnO => apply_edge_life(raw, cfg.edge_life),
        Architecture::TmGcn => {
            m_transform_graph(raw, &build_m_matrix(raw.num_timesteps(), cfg.window)?)
        }
        Architecture::CdGcn => Ok(raw.clone()),
    }
}

pub struct PreparedInput {
    pub graph: DynamicGraph,
    pub input: GraphInput,
}

/// Model input for `raw`: normalized Laplacians of [`model_graph`] and the
/// raw graph's degree features (M-transformed for TM-GCN).
pub fn prepare_input(cfg: &ModelConfig, raw: &DynamicGraph) -> Result<PreparedInput> {
    let graph = model_graph(cfg, raw)?;
    let mut features = degree_features(raw);
    if cfg.architecture == Architecture::TmGcn {
        features =
            m_transform_features(&features, &build_m_matrix(raw.num_timesteps(), cfg.window)?)?;
    }
    let input = GraphInput::new(cfg, laplacian_sequence(&graph), features)?;
    Ok(PreparedInput { graph, input })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub timesteps: usize,
    pub vertices: usize,
    /// Stored entries of the input graph, all snapshots.
    pub entries: usize,
    /// Stored entries after model-specific preprocessing.
    pub model_entries: usize,
}

impl DataSummary {
    fn new(raw: &DynamicGraph, model: &DynamicGraph) -> Self {
        Self {
            timesteps: raw.num_timesteps(),
            vertices: raw.num_vertices(),
            entries: raw.total_nnz(),
            model_entries: model.total_nnz(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferSummary {
    /// Graph-difference streaming.
    pub delta: TransferLedger,
    /// Every snapshot shipped in full.
    pub naive: TransferLedger,
    pub delta_fraction: f64,
    /// Delta index entries over naive index entries.
    pub index_ratio: f64,
}

impl TransferSummary {
    fn new(delta: TransferLedger, naive: TransferLedger) -> Self {
        let index_ratio = match naive.index_entries_sent {
            0 => 0.0,
            n => delta.index_entries_sent as f64 / n as f64,
        };
        Self {
            delta_fraction: delta.delta_fraction(),
            index_ratio,
            delta,
            naive,
        }
    }
}

/// Wall-clock milliseconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub load_ms: f64,
    pub preprocess_ms: f64,
    pub train_ms: f64,
    pub total_ms: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: &'static str,
    pub config: TrainSettings,
    pub data: DataSummary,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub epochs: Vec<EpochRecord>,
    pub final_accuracy: Option<f64>,
    pub comm: CommLedger,
    pub transfer: TransferSummary,
    pub activations: ActivationLedger,
    pub timings: Timings,
}

/// Loads the graph, preprocesses it, samples link-prediction pairs and
/// trains with simulated workers.
pub fn cmd_train(s: &TrainSettings, data: &Path, params_out: Option<&Path>) -> Result<RunReport> {
    s.validate()?;
    let start = Instant::now();
    let raw = load_edge_list(data)?;
    let load_ms = ms_since(start);
    let (mut report, params) = train_graph(s, &raw)?;
    if let Some(p) = params_out {
        write_params(p, &params)?;
    }
    report.timings.load_ms = load_ms;
    report.timings.total_ms = ms_since(start);
    Ok(report)
}

/// [`cmd_train`] on a graph already in memory. Returns the report (with
/// zero load time) and the trained parameters.
pub fn train_graph(s: &TrainSettings, raw: &DynamicGraph) -> Result<(RunReport, ParamSet)> {
    s.validate()?;
    let start = Instant::now();
    plan_snapshot_partition(raw.num_timesteps(), s.workers, s.blocks)?;
    let cfg = s.model_config();
    let prepared = prepare_input(&cfg, raw)?;
    let (train, test) = sample_link_prediction_sets(raw, s.theta, s.seed)?;
    let preprocess_ms = ms_since(start);

    let t = Instant::now();
    let train_opts = TrainOptions {
        epochs: s.epochs,
        nblk: s.blocks,
        seed: s.seed,
        adam: s.adam(),
    };
    let dist_opts = DistOptions {
        workers: s.workers,
        nblk: s.blocks,
        scheduler: s.scheduler,
    };
    let out = train_distributed(
        &cfg,
        &prepared.input,
        &train,
        &test,
        &train_opts,
        &dist_opts,
    )?;
    let train_ms = ms_since(t);
    let report = RunReport {
        schema: REPORT_SCHEMA,
        command: "train",
        config: s.clone(),
        data: DataSummary::new(raw, &prepared.graph),
        train_pairs: train.total(),
        test_pairs: test.total(),
        final_accuracy: out.outcome.trace.last().and_then(|r| r.accuracy),
        epochs: out.outcome.trace,
        comm: out.comm,
        transfer: TransferSummary::new(out.transfer, out.naive_transfer),
        activations: out.activations,
        timings: Timings {
            load_ms: 0.0,
            preprocess_ms,
            train_ms,
            total_ms: ms_since(start),
        },
    };
    Ok((report, out.outcome.params))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub workers: usize,
    pub bsize: usize,
    pub transfer: TransferSummary,
    /// `(bsize - P) / bsize`
    pub expected_delta_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTransferReport {
    pub schema: &'static str,
    pub command: &'static str,
    pub config: TrainSettings,
    pub data: DataSummary,
    pub rows: Vec<BenchRow>,
}

/// Deltas of the whole timeline, the first taken against an empty snapshot.
pub fn timeline_deltas(snapshots: &[SparseMatrix]) -> Result<Vec<crate::delta::SnapshotDelta>> {
    let mut prev = match snapshots.first() {
        Some(s) => SparseMatrix::empty(s.dim()),
        None => return Ok(Vec::new()),
    };
    let mut out = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        out.push(diff(&prev, s)?);
        prev = s.clone();
    }
    Ok(out)
}

/// Transfer cost of the model's Laplacian snapshots per worker count, one
/// pass over the timeline.
pub fn cmd_bench_transfer(a: &BenchArgs) -> Result<BenchTransferReport> {
    let (mut s, file) = TrainSettings::from_model_args(&a.model)?;
    s.blocks = a.blocks.or(file.blocks).unwrap_or(s.blocks);
    s.validate()?;
    let cfg = s.model_config();
    let raw = load_edge_list(&a.model.data)?;
    let graph = model_graph(&cfg, &raw)?;
    let laps = laplacian_sequence(&graph);
    if let Some(p) = &a.dump_deltas {
        write_delta_stream(p, &timeline_deltas(laps.snapshots())?)?;
    }
    let rows = a
        .workers
        .iter()
        .map(|&p| {
            let plan = plan_snapshot_partition(raw.num_timesteps(), p, s.blocks)?;
            let (delta, naive) = partition_transfer_cost(laps.snapshots(), &plan)?;
            let bsize = plan.bsize();
            Ok(BenchRow {
                workers: p,
                bsize,
                transfer: TransferSummary::new(delta, naive),
                expected_delta_fraction: (bsize - p) as f64 / bsize as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchTransferReport {
        schema: REPORT_SCHEMA,
        command: "bench-transfer",
        config: s,
        data: DataSummary::new(&raw, &graph),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparePartitioningReport {
    pub schema: &'static str,
    pub command: &'static str,
    pub config: TrainSettings,
    pub data: DataSummary,
    /// Largest possible snapshot-partitioning volume, `4 * layers * T * N`.
    pub snapshot_bound: f64,
    pub rows: Vec<PartitionRow>,
}

/// Per-epoch communication volume of both partitioning schemes over the
/// graph the model aggregates on.
pub fn cmd_compare_partitioning(a: &CompareArgs) -> Result<ComparePartitioningReport> {
    let (s, _) = TrainSettings::from_model_args(&a.model)?;
    s.validate()?;
    let raw = load_edge_list(&a.model.data)?;
    compare_partitioning_graph(&s, &raw, &a.workers)
}

/// [`cmd_compare_partitioning`] on a graph already in memory.
pub fn compare_partitioning_graph(
    s: &TrainSettings,
    raw: &DynamicGraph,
    workers: &[usize],
) -> Result<ComparePartitioningReport> {
    s.validate()?;
    let cfg = s.model_config();
    let graph = model_graph(&cfg, raw)?;
    let rows = compare_partitioning_report(&graph, &cfg, workers)?;
    let bound = match cfg.architecture {
        Architecture::EgcnO => 0.0,
        _ => 4.0 * (cfg.layers() * raw.num_timesteps() * raw.num_vertices()) as f64,
    };
    debug_assert!(rows.iter().all(|r| r.snapshot_units
        == snapshot_volume(&cfg, raw.num_timesteps(), raw.num_vertices(), r.workers)));
    Ok(ComparePartitioningReport {
        schema: REPORT_SCHEMA,
        command: "compare-partitioning",
        config: s.clone(),
        data: DataSummary::new(raw, &graph),
        snapshot_bound: bound,
        rows,
    })
}
