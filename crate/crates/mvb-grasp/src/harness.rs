//! Benchmark runner: both methods over the scenario grid, per-stage
//! latencies, aggregation, and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{build_voxel_index, check_collision_indexed, GripperModel};
use crate::obb::{extract_faces, fit_obb, select_faces};
use crate::scoring::{
    filter_and_rescore, normalize_scores, vanilla_rank, GraspCandidate, ScoringConfig, ScoringError,
};
use crate::synth::{
    feasibility_oracle, make_object_cloud_with, sample_candidates_with, scenario_grid,
    FailureReason, FeasibilitySpec, ObjectKind, Scenario, SynthParams,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output file {0} exists; pass --force to overwrite")]
    WouldOverwrite(PathBuf),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// The two methods under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodId {
    Vanilla,
    MvbGrasp,
}

impl MethodId {
    pub const ALL: [MethodId; 2] = [MethodId::Vanilla, MethodId::MvbGrasp];

    pub fn name(&self) -> &'static str {
        match self {
            MethodId::Vanilla => "vanilla",
            MethodId::MvbGrasp => "mvb_grasp",
        }
    }
}

/// Full benchmark configuration; all fields have defaults so a partial JSON
/// config works.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub master_seed: u64,
    pub num_candidates: usize,
    pub scoring: ScoringConfig,
    pub synth: SynthParams,
    pub feasibility: FeasibilitySpec,
    /// Collision gate is off by default; the geometric filter is meant to
    /// make it optional.
    pub collision_enabled: bool,
    pub collision_tau: f64,
    /// Worker threads; 0 means serial.
    pub workers: usize,
    /// Subset of objects to run; empty means all three.
    pub objects: Vec<ObjectKind>,
    /// Origin face selection measures distance from; defaults to the synth
    /// camera position.
    pub face_origin: Option<[f64; 3]>,
    /// Occlusion levels; only "none" is generated, the field is reserved.
    pub occlusion_levels: Vec<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            num_candidates: 800,
            scoring: ScoringConfig::default(),
            synth: SynthParams::default(),
            feasibility: FeasibilitySpec::default(),
            collision_enabled: false,
            collision_tau: crate::collision::DEFAULT_TAU,
            workers: 0,
            objects: Vec::new(),
            face_origin: None,
            occlusion_levels: vec!["none".to_string()],
        }
    }
}

impl BenchConfig {
    pub fn face_origin_vec(&self) -> Vector3<f64> {
        match self.face_origin {
            Some([x, y, z]) => Vector3::new(x, y, z),
            None => self.synth.camera_pos(),
        }
    }
}

/// Per-episode outcome with stage latencies in milliseconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: Scenario,
    pub method: MethodId,
    pub success: bool,
    pub n_candidates: usize,
    pub n_after_filter: usize,
    pub filter_exhausted: bool,
    pub failure_reasons: Vec<FailureReason>,
    /// Synthetic generation time; not comparable to learned-model inference.
    pub t_gen_synth_ms: f64,
    pub t_coll_ms: f64,
    pub t_sel_ms: f64,
    pub t_total_ms: f64,
}

/// Run one (scenario, method) episode through the full pipeline.
pub fn run_episode(scenario: &Scenario, method: MethodId, config: &BenchConfig) -> EpisodeResult {
    let t_start = Instant::now();
    let object = scenario.object_spec();

    // Generation: cloud and the shared candidate list, both seeded by the
    // scenario so the two methods see identical candidates.
    let t0 = Instant::now();
    let cloud = make_object_cloud_with(&object, &config.synth, scenario.seed);
    let candidates = sample_candidates_with(&cloud, config.num_candidates, scenario.seed, &config.synth);
    let t_gen_synth_ms = ms_since(t0);

    // Selection: normalize, then rank per method.
    let t0 = Instant::now();
    let normalized = normalize_scores(&candidates, config.scoring.epsilon)
        .expect("candidate list is non-empty by construction");
    let mut filter_exhausted = false;
    let (ranked, n_after_filter) = match method {
        MethodId::Vanilla => {
            let ranked = vanilla_rank(&normalized).unwrap();
            let n = ranked.len();
            (ranked, n)
        }
        MethodId::MvbGrasp => {
            let obb = fit_obb(&cloud).expect("synthetic clouds always have enough points");
            let faces = extract_faces(&obb);
            let selected =
                select_faces(&faces, config.scoring.k_faces, &config.face_origin_vec()).unwrap();
            match filter_and_rescore(&normalized, &selected, &config.scoring) {
                Ok(out) => {
                    let n = out.survivors.len();
                    (out.survivors, n)
                }
                Err(ScoringError::FilterExhausted) => {
                    // Logged fallback keeps the method comparison defined.
                    filter_exhausted = true;
                    (vanilla_rank(&normalized).unwrap(), 0)
                }
                Err(e) => panic!("unexpected scoring error: {e}"),
            }
        }
    };
    let t_sel_ms = ms_since(t0);

    // Optional collision gate: walk the ranking, execute the first
    // non-colliding candidate.
    let mut t_coll_ms = 0.0;
    let executed: Option<&GraspCandidate> = if config.collision_enabled {
        let t0 = Instant::now();
        let gripper = GripperModel::default_parallel_jaw();
        let index = build_voxel_index(&cloud, config.collision_tau);
        let pick = ranked
            .iter()
            .find(|c| !check_collision_indexed(&c.pose, &gripper, &index, config.collision_tau));
        t_coll_ms = ms_since(t0);
        pick
    } else {
        ranked.first()
    };

    let (success, failure_reasons) = match executed {
        Some(c) => {
            let report = feasibility_oracle(c, &object, &config.feasibility);
            (report.success, report.failures)
        }
        None => (false, vec![FailureReason::Collision]),
    };

    EpisodeResult {
        scenario: *scenario,
        method,
        success,
        n_candidates: candidates.len(),
        n_after_filter,
        filter_exhausted,
        failure_reasons,
        t_gen_synth_ms,
        t_coll_ms,
        t_sel_ms,
        t_total_ms: ms_since(t_start),
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

fn failed_episode(scenario: &Scenario, method: MethodId) -> EpisodeResult {
    EpisodeResult {
        scenario: *scenario,
        method,
        success: false,
        n_candidates: 0,
        n_after_filter: 0,
        filter_exhausted: false,
        failure_reasons: vec![FailureReason::Internal],
        t_gen_synth_ms: 0.0,
        t_coll_ms: 0.0,
        t_sel_ms: 0.0,
        t_total_ms: 0.0,
    }
}

/// All scenarios of the configured grid, both methods each. Parallelism
/// does not change the output: rows are keyed and sorted afterwards.
pub fn run_benchmark(config: &BenchConfig) -> Vec<EpisodeResult> {
    let grid: Vec<Scenario> = scenario_grid(config.master_seed)
        .into_iter()
        .filter(|s| config.objects.is_empty() || config.objects.contains(&s.object))
        .collect();
    let jobs: Vec<(usize, Scenario, MethodId)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, s)| MethodId::ALL.map(|m| (i, *s, m)))
        .collect();

    let run_one = |&(_, ref scenario, method): &(usize, Scenario, MethodId)| -> EpisodeResult {
        catch_unwind(AssertUnwindSafe(|| run_episode(scenario, method, config)))
            .unwrap_or_else(|_| failed_episode(scenario, method))
    };

    let mut results: Vec<(usize, EpisodeResult)> = if config.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(|| {
            jobs.par_iter()
                .map(|job| (job.0 * 2 + method_ord(job.2), run_one(job)))
                .collect()
        })
    } else {
        jobs.iter()
            .map(|job| (job.0 * 2 + method_ord(job.2), run_one(job)))
            .collect()
    };
    results.sort_by_key(|(k, _)| *k);
    results.into_iter().map(|(_, r)| r).collect()
}

fn method_ord(m: MethodId) -> usize {
    match m {
        MethodId::Vanilla => 0,
        MethodId::MvbGrasp => 1,
    }
}

/// Percentage with one decimal, rounded half up.
pub fn pct(successes: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let raw = successes as f64 / total as f64 * 100.0;
    (raw * 10.0).round() / 10.0
}

/// Aggregated statistics for one group of episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_deg: Option<i32>,
    pub method: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate_pct: f64,
    pub mean_candidates: f64,
    pub mean_after_filter: f64,
    pub mean_t_gen_synth_ms: f64,
    pub mean_t_coll_ms: f64,
    pub mean_t_sel_ms: f64,
    pub mean_t_total_ms: f64,
}

/// Report mirroring the benchmark tables: overall, per object, per
/// object x distance, per object x pitch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub overall: Vec<GroupStats>,
    pub by_object: Vec<GroupStats>,
    pub by_object_distance: Vec<GroupStats>,
    pub by_object_pitch: Vec<GroupStats>,
    /// Fraction of candidates removed by the hard filter, percent, over all
    /// filtered episodes. Reported, not asserted against any target.
    pub filter_removed_pct: f64,
}

fn stats_for(
    episodes: &[&EpisodeResult],
    object: Option<String>,
    distance: Option<String>,
    pitch_deg: Option<i32>,
    method: MethodId,
) -> GroupStats {
    let n = episodes.len();
    let successes = episodes.iter().filter(|e| e.success).count();
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| -> f64 {
        if n == 0 {
            0.0
        } else {
            episodes.iter().map(|e| f(e)).sum::<f64>() / n as f64
        }
    };
    GroupStats {
        object,
        distance,
        pitch_deg,
        method: method.name().to_string(),
        episodes: n,
        successes,
        success_rate_pct: pct(successes, n),
        mean_candidates: mean(&|e| e.n_candidates as f64),
        mean_after_filter: mean(&|e| e.n_after_filter as f64),
        mean_t_gen_synth_ms: mean(&|e| e.t_gen_synth_ms),
        mean_t_coll_ms: mean(&|e| e.t_coll_ms),
        mean_t_sel_ms: mean(&|e| e.t_sel_ms),
        mean_t_total_ms: mean(&|e| e.t_total_ms),
    }
}

pub fn aggregate(results: &[EpisodeResult]) -> AggregateReport {
    let mut overall = Vec::new();
    let mut by_object = Vec::new();
    let mut by_object_distance = Vec::new();
    let mut by_object_pitch = Vec::new();

    for method in MethodId::ALL {
        let of_method: Vec<&EpisodeResult> =
            results.iter().filter(|e| e.method == method).collect();
        if of_method.is_empty() {
            continue;
        }
        overall.push(stats_for(&of_method, None, None, None, method));

        for object in ObjectKind::ALL {
            let group: Vec<&EpisodeResult> = of_method
                .iter()
                .copied()
                .filter(|e| e.scenario.object == object)
                .collect();
            if group.is_empty() {
                continue;
            }
            by_object.push(stats_for(
                &group,
                Some(object.name().to_string()),
                None,
                None,
                method,
            ));
            for distance in crate::synth::DistanceBin::ALL {
                let sub: Vec<&EpisodeResult> = group
                    .iter()
                    .copied()
                    .filter(|e| e.scenario.distance_bin == distance)
                    .collect();
                if !sub.is_empty() {
                    by_object_distance.push(stats_for(
                        &sub,
                        Some(object.name().to_string()),
                        Some(distance.name().to_string()),
                        None,
                        method,
                    ));
                }
            }
            for pitch in crate::synth::PITCHES_DEG {
                let sub: Vec<&EpisodeResult> = group
                    .iter()
                    .copied()
                    .filter(|e| e.scenario.pitch_deg == pitch)
                    .collect();
                if !sub.is_empty() {
                    by_object_pitch.push(stats_for(
                        &sub,
                        Some(object.name().to_string()),
                        None,
                        Some(pitch),
                        method,
                    ));
                }
            }
        }
    }

    // Removed fraction over MVB episodes that actually ran the filter.
    let (mut total_cand, mut total_after) = (0usize, 0usize);
    for e in results {
        if e.method == MethodId::MvbGrasp && !e.filter_exhausted {
            total_cand += e.n_candidates;
            total_after += e.n_after_filter;
        }
    }
    let filter_removed_pct = if total_cand > 0 {
        pct(total_cand - total_after, total_cand)
    } else {
        0.0
    };

    AggregateReport {
        overall,
        by_object,
        by_object_distance,
        by_object_pitch,
        filter_removed_pct,
    }
}

/// Exact column order of `episodes.csv`.
pub const EPISODE_CSV_HEADER: &str = "object,distance,lateral,pitch_deg,method,success,n_candidates,n_after_filter,filter_exhausted,failure_reasons,t_gen_synth_ms,t_coll_ms,t_sel_ms,t_total_ms";

pub fn episode_csv_row(e: &EpisodeResult) -> String {
    let reasons: Vec<&str> = e.failure_reasons.iter().map(|r| r.name()).collect();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
        e.scenario.object.name(),
        e.scenario.distance_bin.name(),
        e.scenario.lateral_bin.name(),
        e.scenario.pitch_deg,
        e.method.name(),
        e.success,
        e.n_candidates,
        e.n_after_filter,
        e.filter_exhausted,
        reasons.join(";"),
        e.t_gen_synth_ms,
        e.t_coll_ms,
        e.t_sel_ms,
        e.t_total_ms,
    )
}

fn write_atomic(path: &Path, contents: &str, force: bool) -> Result<(), HarnessError> {
    if path.exists() && !force {
        return Err(HarnessError::WouldOverwrite(path.to_path_buf()));
    }
    let tmp = path.with_extension("tmp");
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(contents.as_bytes()).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

/// Write `episodes.csv`, `summary.json`, and one success heatmap CSV per
/// (object, method) pair present in the results.
pub fn emit_reports(
    report: &AggregateReport,
    results: &[EpisodeResult],
    out_dir: &Path,
    force: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    let mut csv = String::from(EPISODE_CSV_HEADER);
    csv.push('\n');
    for e in results {
        csv.push_str(&episode_csv_row(e));
        csv.push('\n');
    }
    let episodes_path = out_dir.join("episodes.csv");
    write_atomic(&episodes_path, &csv, force)?;
    written.push(episodes_path);

    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_atomic(&summary_path, &format!("{json}\n"), force)?;
    written.push(summary_path);

    // Success-rate heatmaps: distance rows x lateral columns, one file per
    // (object, method) pair in the results.
    let mut pairs: Vec<(ObjectKind, MethodId)> = Vec::new();
    for object in ObjectKind::ALL {
        for method in MethodId::ALL {
            if results
                .iter()
                .any(|e| e.scenario.object == object && e.method == method)
            {
                pairs.push((object, method));
            }
        }
    }
    for (object, method) in pairs {
        let mut grid: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for e in results {
            if e.scenario.object != object || e.method != method {
                continue;
            }
            let di = crate::synth::DistanceBin::ALL
                .iter()
                .position(|d| *d == e.scenario.distance_bin)
                .unwrap();
            let li = crate::synth::LateralBin::ALL
                .iter()
                .position(|l| *l == e.scenario.lateral_bin)
                .unwrap();
            let cell = grid.entry((di, li)).or_insert((0, 0));
            cell.0 += e.success as usize;
            cell.1 += 1;
        }
        let mut hm = String::from("distance,Left,Center,Right\n");
        for (di, d) in crate::synth::DistanceBin::ALL.iter().enumerate() {
            hm.push_str(d.name());
            for li in 0..3 {
                let (s, n) = grid.get(&(di, li)).copied().unwrap_or((0, 0));
                hm.push_str(&format!(",{:.1}", pct(s, n)));
            }
            hm.push('\n');
        }
        let path = out_dir.join(format!("heatmap_{}_{}.csv", object.name(), method.name()));
        write_atomic(&path, &hm, force)?;
        written.push(path);
    }

    Ok(written)
}
