use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use serde::Serialize;

use mvb_grasp::collision::{check_collision, min_distance, GripperModel};
use mvb_grasp::harness::{aggregate, emit_reports, run_benchmark, BenchConfig};
use mvb_grasp::io;
use mvb_grasp::obb::{extract_faces, fit_obb, select_faces};
use mvb_grasp::pose::Pose;
use mvb_grasp::scoring::{filter_and_rescore, normalize_scores, ScoringConfig, ScoringError};
use mvb_grasp::synth::{make_object_cloud_with, scenario_grid, ObjectKind};

#[derive(Parser)]
#[command(name = "mvbgrasp", about = "OBB-prior grasp filtering and benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an oriented bounding box to a cloud and print it with its faces.
    FitObb {
        /// Input cloud (.ply or .csv).
        cloud: PathBuf,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter and re-rank grasp candidates against the cloud's box faces.
    Filter {
        /// Input cloud (.ply or .csv).
        cloud: PathBuf,
        /// Candidate list: JSON array of {pose: [16 numbers], score}.
        candidates: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        k_faces: usize,
        /// How many ranked survivors to emit.
        #[arg(long, default_value_t = 1)]
        top: usize,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a posed gripper vertex set for penetration of a scene cloud.
    Collide {
        /// Scene cloud (.ply or .csv).
        cloud: PathBuf,
        /// Gripper vertices as PLY; omit for the built-in parallel-jaw set.
        #[arg(long)]
        gripper: Option<PathBuf>,
        /// Gripper pose: JSON array of 16 row-major numbers.
        pose: PathBuf,
        #[arg(long, default_value_t = 0.002)]
        tau: f64,
    },
    /// Run the scenario-grid benchmark for both methods.
    Bench {
        /// JSON config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for episodes.csv, summary.json, and heatmaps.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset: cylinder,box_asym,bottle.
        #[arg(long)]
        objects: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        k_faces: Option<usize>,
        #[arg(long)]
        num_candidates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Enable the collision gate (off by default).
        #[arg(long)]
        collision: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Also write each generated object cloud as PLY.
        #[arg(long)]
        dump_scenes: bool,
        /// Overwrite existing report files.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Serialize)]
struct FilterReport {
    survivors: Vec<mvb_grasp::scoring::GraspCandidate>,
    n_candidates: usize,
    n_survivors: usize,
    filter_exhausted: bool,
    t_fit_ms: f64,
    t_filter_ms: f64,
}

#[derive(Serialize)]
struct CollideReport {
    collision: bool,
    min_distance: Option<f64>,
    tau: f64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::FitObb { cloud, out } => {
            let cloud = io::read_cloud(&cloud)?;
            let obb = fit_obb(&cloud)?;
            let faces = extract_faces(&obb);
            let record = io::ObbRecord::from_obb(&obb, &faces);
            emit_json(&record, out.as_deref())?;
        }
        Command::Filter {
            cloud,
            candidates,
            alpha,
            k_faces,
            top,
            out,
        } => {
            let cloud = io::read_cloud(&cloud)?;
            let candidates = io::read_candidates_json(&candidates)?;
            let cfg = ScoringConfig {
                alpha,
                k_faces,
                ..Default::default()
            };

            let t0 = Instant::now();
            let obb = fit_obb(&cloud)?;
            let faces = extract_faces(&obb);
            let selected = select_faces(&faces, cfg.k_faces, &Vector3::zeros())?;
            let t_fit_ms = t0.elapsed().as_secs_f64() * 1000.0;

            let t0 = Instant::now();
            let normalized = normalize_scores(&candidates, cfg.epsilon)?;
            let (survivors, exhausted) = match filter_and_rescore(&normalized, &selected, &cfg) {
                Ok(output) => (output.survivors, false),
                Err(ScoringError::FilterExhausted) => (Vec::new(), true),
                Err(e) => return Err(e.into()),
            };
            let t_filter_ms = t0.elapsed().as_secs_f64() * 1000.0;

            let report = FilterReport {
                n_candidates: candidates.len(),
                n_survivors: survivors.len(),
                survivors: survivors.into_iter().take(top).collect(),
                filter_exhausted: exhausted,
                t_fit_ms,
                t_filter_ms,
            };
            emit_json(&report, out.as_deref())?;
        }
        Command::Collide {
            cloud,
            gripper,
            pose,
            tau,
        } => {
            let scene = io::read_cloud(&cloud)?;
            let gripper = match gripper {
                Some(path) => GripperModel::new(io::read_ply(&path)?.points),
                None => GripperModel::default_parallel_jaw(),
            };
            let pose: Pose = serde_json::from_str(&std::fs::read_to_string(&pose)?)?;
            let report = CollideReport {
                collision: !scene.is_empty() && check_collision(&pose, &gripper, &scene, tau),
                min_distance: min_distance(&pose, &gripper, &scene),
                tau,
            };
            emit_json(&report, None)?;
        }
        Command::Bench {
            config,
            out,
            objects,
            alpha,
            k_faces,
            num_candidates,
            seed,
            collision,
            workers,
            dump_scenes,
            force,
        } => {
            let mut cfg: BenchConfig = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?)?,
                None => BenchConfig::default(),
            };
            if let Some(list) = objects {
                cfg.objects = list
                    .split(',')
                    .map(|s| {
                        ObjectKind::parse(s.trim())
                            .ok_or_else(|| format!("unknown object kind: {s}"))
                    })
                    .collect::<Result<_, _>>()?;
            }
            if let Some(v) = alpha {
                cfg.scoring.alpha = v;
            }
            if let Some(v) = k_faces {
                cfg.scoring.k_faces = v;
            }
            if let Some(v) = num_candidates {
                cfg.num_candidates = v;
            }
            if let Some(v) = seed {
                cfg.master_seed = v;
            }
            if collision {
                cfg.collision_enabled = true;
            }
            if let Some(v) = workers {
                cfg.workers = v;
            }

            let results = run_benchmark(&cfg);
            let report = aggregate(&results);
            let files = emit_reports(&report, &results, &out, force)?;

            if dump_scenes {
                std::fs::create_dir_all(&out)?;
                for scenario in scenario_grid(cfg.master_seed)
                    .iter()
                    .filter(|s| cfg.objects.is_empty() || cfg.objects.contains(&s.object))
                {
                    let cloud =
                        make_object_cloud_with(&scenario.object_spec(), &cfg.synth, scenario.seed);
                    let name = format!(
                        "scene_{}_{}_{}_{}.ply",
                        scenario.object.name(),
                        scenario.distance_bin.name(),
                        scenario.lateral_bin.name(),
                        scenario.pitch_deg
                    );
                    io::write_ply(&out.join(name), &cloud)?;
                }
            }

            for g in &report.overall {
                println!(
                    "{:<10} success {:>5.1}%  mean candidates {:>6.1}  after filter {:>6.1}  t_sel {:>7.3} ms",
                    g.method, g.success_rate_pct, g.mean_candidates, g.mean_after_filter, g.mean_t_sel_ms
                );
            }
            println!("filter removed {:.1}% of candidates", report.filter_removed_pct);
            println!("wrote {} report files to {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&std::path::Path>) -> Result<(), Box<dyn std::error::Error>> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, format!("{json}\n"))?,
        None => println!("{json}"),
    }
    Ok(())
}
