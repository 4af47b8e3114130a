//! File formats: ASCII PLY and CSV point clouds, CSV depth grids, JSON
//! candidate lists and OBB dumps.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obb::{Face, Obb};
use crate::perception::{DepthImage, PointCloud};
use crate::pose::Pose;
use crate::scoring::GraspCandidate;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported file extension for {0}")]
    UnsupportedExtension(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Read an ASCII PLY with at least x, y, z float properties per vertex.
pub fn read_ply(path: &Path) -> Result<PointCloud, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header.trim() != "ply" {
        return Err(parse_err(n + 1, "missing ply magic"));
    }
    let mut vertex_count: Option<usize> = None;
    let mut property_count = 0usize;
    let mut in_vertex_element = false;
    let mut body_start = 0usize;
    for (n, line) in lines.by_ref() {
        let line = line.trim();
        if line == "end_header" {
            body_start = n + 1;
            break;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("format") => {
                if parts.next() != Some("ascii") {
                    return Err(parse_err(n + 1, "only ascii PLY is supported"));
                }
            }
            Some("element") => {
                let name = parts.next().unwrap_or("");
                in_vertex_element = name == "vertex";
                if in_vertex_element {
                    let count = parts
                        .next()
                        .and_then(|c| c.parse().ok())
                        .ok_or_else(|| parse_err(n + 1, "bad vertex count"))?;
                    vertex_count = Some(count);
                }
            }
            Some("property") if in_vertex_element => property_count += 1,
            _ => {}
        }
    }
    let vertex_count = vertex_count.ok_or_else(|| parse_err(body_start, "no vertex element"))?;
    if property_count < 3 {
        return Err(parse_err(body_start, "vertex element needs x y z properties"));
    }

    let mut points = Vec::with_capacity(vertex_count);
    for (n, line) in text.lines().enumerate().skip(body_start) {
        if points.len() == vertex_count {
            break;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        if vals.len() < 3 {
            return Err(parse_err(n + 1, "vertex line needs at least 3 values"));
        }
        points.push(Vector3::new(vals[0], vals[1], vals[2]));
    }
    if points.len() != vertex_count {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {vertex_count} vertices, got {}", points.len()),
        ));
    }
    Ok(PointCloud::new(points))
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in &cloud.points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a CSV cloud with header `x,y,z` or `x,y,z,u,v`.
pub fn read_cloud_csv(path: &Path) -> Result<PointCloud, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_pixels = match cols.as_slice() {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "u", "v"] => true,
        _ => return Err(parse_err(1, "header must be x,y,z or x,y,z,u,v")),
    };
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        let want = if with_pixels { 5 } else { 3 };
        if vals.len() != want {
            return Err(parse_err(n + 1, format!("expected {want} columns")));
        }
        points.push(Vector3::new(vals[0], vals[1], vals[2]));
        if with_pixels {
            pixels.push((vals[3] as u32, vals[4] as u32));
        }
    }
    Ok(if with_pixels {
        PointCloud::with_pixels(points, pixels)
    } else {
        PointCloud::new(points)
    })
}

pub fn write_cloud_csv(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    let mut out = String::new();
    match &cloud.pixel_coords {
        Some(px) => {
            out.push_str("x,y,z,u,v\n");
            for (p, (u, v)) in cloud.points.iter().zip(px) {
                out.push_str(&format!("{},{},{},{},{}\n", p.x, p.y, p.z, u, v));
            }
        }
        None => {
            out.push_str("x,y,z\n");
            for p in &cloud.points {
                out.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a cloud by file extension: `.ply` or `.csv`.
pub fn read_cloud(path: &Path) -> Result<PointCloud, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => read_ply(path),
        Some("csv") => read_cloud_csv(path),
        _ => Err(IoError::UnsupportedExtension(path.display().to_string())),
    }
}

/// Read a depth image stored as a CSV grid of meters, one row per line.
pub fn read_depth_csv(path: &Path) -> Result<DepthImage, IoError> {
    let text = fs::read_to_string(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0usize;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(n + 1, e.to_string()))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(n + 1, "ragged depth rows"));
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| parse_err(1, "empty depth file"))?;
    Ok(DepthImage::new(width, height, data))
}

/// On-disk candidate entry: 16 row-major pose numbers plus a raw score.
#[derive(Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub pose: Pose,
    pub score: f64,
}

pub fn read_candidates_json(path: &Path) -> Result<Vec<GraspCandidate>, IoError> {
    let text = fs::read_to_string(path)?;
    let records: Vec<CandidateRecord> = serde_json::from_str(&text)?;
    Ok(records
        .into_iter()
        .enumerate()
        .map(|(i, r)| GraspCandidate::new(r.pose, r.score, i))
        .collect())
}

pub fn write_candidates_json(path: &Path, candidates: &[GraspCandidate]) -> Result<(), IoError> {
    let records: Vec<CandidateRecord> = candidates
        .iter()
        .map(|c| CandidateRecord {
            pose: c.pose,
            score: c.raw_score,
        })
        .collect();
    fs::write(path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

/// JSON dump of a fitted box and its faces.
#[derive(Debug, Serialize, Deserialize)]
pub struct ObbRecord {
    /// Rotation matrix, row major.
    pub rotation: [f64; 9],
    pub center: [f64; 3],
    pub extents: [f64; 3],
    pub faces: Vec<FaceRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FaceRecord {
    pub normal: [f64; 3],
    pub center: [f64; 3],
    pub axis: usize,
    pub sign: i8,
}

impl ObbRecord {
    pub fn from_obb(obb: &Obb, faces: &[Face]) -> Self {
        let r = &obb.rotation;
        Self {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            center: obb.center.into(),
            extents: obb.extents.into(),
            faces: faces
                .iter()
                .map(|f| FaceRecord {
                    normal: f.normal.into(),
                    center: f.center.into(),
                    axis: f.axis,
                    sign: f.sign,
                })
                .collect(),
        }
    }
}
