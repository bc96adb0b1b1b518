//! JSON analysis reports and CSV sample dumps.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::arc::{sample_slopes, ArcSpec};
use crate::bilip::{assemble_case_iv, partition_triples, DistortionEstimate, MapBundle, PointMap};
use crate::cone::{check_plane_cone, exceptional_rays, ConeCheck, NashFiberResult};
use crate::holder::{build_holder, HolderComplex};
use crate::metric::{l_regularity_probe, RegularityReport};
use crate::pieces::{
    check_well_separated, decide_verdict, partition_wedge, PlaneVerdict, SeparationVerdict, WedgePartition, WedgeSide,
};
use crate::surface::{Ray, SurfFile};
use crate::{Config, Error, Result};

pub const TOOL_VERSION: &str = concat!("singlip ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceInfo {
    pub name: String,
    pub expression: String,
    pub m: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageError {
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl StageError {
    pub fn new(stage: &str, e: &Error) -> Self {
        StageError { stage: stage.into(), kind: e.kind().into(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionEntry {
    pub partition: WedgePartition,
    pub separation: SeparationVerdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalyzeOptions {
    pub regularity: bool,
    pub holder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub surface: SurfaceInfo,
    pub cone_check: Option<ConeCheck>,
    pub fibers: Vec<NashFiberResult>,
    pub partitions: Vec<PartitionEntry>,
    pub verdict: Option<PlaneVerdict>,
    pub regularity: Option<RegularityReport>,
    pub holder: Option<HolderComplex>,
    /// CSV files written next to the report, relative to the dump directory.
    pub csv_files: Vec<String>,
    pub errors: Vec<StageError>,
    pub config_echo: Config,
    pub tool_version: &'static str,
}

impl AnalysisReport {
    /// 0 when a verdict was reached, 2 when it is `Unknown`, 1 when a stage
    /// error left no verdict.
    pub fn exit_code(&self) -> i32 {
        match &self.verdict {
            Some(PlaneVerdict::Unknown(_)) => 2,
            Some(_) => 0,
            None => 1,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    // Every report type serializes with string keys and no maps keyed by floats.
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

/// Runs cone check, exceptional rays, partitions and verdict, plus the
/// optional regularity and Hölder stages. Stage errors are recorded in the
/// report instead of aborting it.
pub fn analyze(file: &SurfFile, cfg: &Config, opts: AnalyzeOptions) -> AnalysisReport {
    let s = &file.spec;
    let mut report = AnalysisReport {
        surface: SurfaceInfo { name: s.name.clone(), expression: s.f.to_string(), m: s.m, eps: s.eps },
        cone_check: None,
        fibers: Vec::new(),
        partitions: Vec::new(),
        verdict: None,
        regularity: None,
        holder: None,
        csv_files: Vec::new(),
        errors: Vec::new(),
        config_echo: cfg.clone(),
        tool_version: TOOL_VERSION,
    };
    match check_plane_cone(s, cfg.cone.plane_angles, &cfg.schedule, &cfg.fit) {
        Ok(c) => report.cone_check = Some(c),
        Err(e) => report.errors.push(StageError::new("cone", &e)),
    }
    match exceptional_rays(s, cfg) {
        Ok(f) => report.fibers = f,
        Err(e) => report.errors.push(StageError::new("rays", &e)),
    }
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for fib in &report.fibers {
        match partition_wedge(s, fib.ray, WedgeSide::Full, cfg) {
            Ok(p) => {
                let v = check_well_separated(&p, cfg.pieces.sep_tol);
                pairs.push((p, v));
            }
            Err(e) => {
                report.errors.push(StageError::new(&format!("pieces {}", fib.ray), &e));
                failures.push((fib.ray, e.to_string()));
            }
        }
    }
    let rays_ok = !report.errors.iter().any(|e| e.stage == "rays");
    if let (Some(cone), true) = (&report.cone_check, rays_ok) {
        report.verdict = Some(decide_verdict(cone, &report.fibers, &pairs, &failures));
    }
    if opts.regularity {
        let probe = file
            .pair_arcs()
            .and_then(|p| p.ok_or_else(|| Error::InvalidArc("no pair family declared".into())))
            .and_then(|(a, b)| l_regularity_probe(s, (&a, &b), &cfg.schedule, cfg));
        match probe {
            Ok(r) => report.regularity = Some(r),
            Err(e) => report.errors.push(StageError::new("regularity", &e)),
        }
    }
    if opts.holder && rays_ok && failures.is_empty() {
        let parts: Vec<WedgePartition> = pairs.iter().map(|(p, _)| p.clone()).collect();
        match build_holder(s, &parts) {
            Ok(h) => report.holder = Some(h),
            Err(e) => report.errors.push(StageError::new("holder", &e)),
        }
    }
    report.partitions = pairs.into_iter().map(|(partition, separation)| PartitionEntry { partition, separation }).collect();
    report
}

fn ray_tag(r: Ray) -> String {
    match r {
        Ray::PosY => "posy".into(),
        Ray::NegY => "negy".into(),
        Ray::PosX => "posx".into(),
        Ray::NegX => "negx".into(),
        Ray::Angle(t) => format!("ang{:.4}", t),
    }
}

/// Writes every sample series behind the report into `dir` and records the
/// file names in `report.csv_files`.
pub fn emit_csv(report: &mut AnalysisReport, file: &SurfFile, cfg: &Config, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = &file.spec.name;
    let mut written = Vec::new();
    let mut put = |fname: String, body: String| -> Result<()> {
        fs::write(dir.join(&fname), body)?;
        written.push(fname);
        Ok(())
    };
    for fib in &report.fibers {
        let mut body = String::from("y,min,min_u,max,max_u\n");
        for p in &fib.profile {
            body.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", p.y, p.min, p.min_u, p.max, p.max_u));
        }
        put(format!("{name}_fiber_{}.csv", ray_tag(fib.ray)), body)?;
    }
    for entry in &report.partitions {
        let p = &entry.partition;
        let bounds = p.pieces.iter().map(|q| &q.left).chain(p.pieces.last().map(|q| &q.right));
        for (k, b) in bounds.enumerate() {
            let mut body = String::from("y,u\n");
            for (y, u) in &b.track {
                body.push_str(&format!("{y:e},{u:e}\n"));
            }
            put(format!("{name}_boundary_{}_{k}.csv", ray_tag(p.ray)), body)?;
        }
    }
    if let Some(r) = &report.regularity {
        put(format!("{name}_regularity.csv"), r.csv())?;
    }
    let sched = cfg.schedule.clamped(file.spec.eps);
    for (arc_name, arc) in &file.arcs {
        // Arcs through the singular locus have no samples; skip them.
        let Ok((fx, fy)) = sample_slopes(&file.spec.f, arc, &sched) else { continue };
        let mut body = String::from("y,fx,fy\n");
        for ((y, gx), (_, gy)) in fx.iter().zip(&fy) {
            body.push_str(&format!("{y:e},{gx:e},{gy:e}\n"));
        }
        put(format!("{name}_arc_{arc_name}.csv"), body)?;
    }
    report.csv_files = written;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartSummary {
    pub label: String,
    pub left: ArcSpec,
    pub right: ArcSpec,
}

/// Serializable view of a verified `MapBundle`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReport {
    pub surface: String,
    pub wedge: Ray,
    pub c: f64,
    pub arcs: [ArcSpec; 4],
    pub charts: Vec<ChartSummary>,
    pub target_lip: f64,
    pub target_lipschitz: bool,
    /// Largest `|H(p)_z − f(H(p)_xy)| / y` over sampled target points.
    pub graph_error: f64,
    /// Largest `|H⁻¹(H(p)) − p| / y` over the same points.
    pub roundtrip_error: f64,
    pub overlap_disagreement: f64,
    pub distortion: Option<DistortionEstimate>,
    pub tool_version: &'static str,
}

/// Arcs for the map: the file's `map.arcs`, else the first flat/fast/flat
/// triple of the wedge partition.
pub fn map_arcs(file: &SurfFile, wedge: Ray, cfg: &Config) -> Result<[ArcSpec; 4]> {
    if wedge != Ray::PosY {
        return Err(Error::InvalidSurface(format!("map charts are built around +y, not {wedge}")));
    }
    if let Some(names) = &file.map_arcs {
        if names.len() != 4 {
            return Err(Error::InvalidArc(format!("map.arcs needs four arcs, got {}", names.len())));
        }
        return Ok([file.arc(&names[0])?.clone(), file.arc(&names[1])?.clone(), file.arc(&names[2])?.clone(), file.arc(&names[3])?.clone()]);
    }
    let p = partition_wedge(&file.spec, wedge, WedgeSide::Full, cfg)?;
    partition_triples(&p)
        .into_iter()
        .next()
        .ok_or_else(|| Error::HypothesisFailed("wedge has no flat/fast/flat triple".into()))
}

pub fn build_map_report(file: &SurfFile, wedge: Ray, cfg: &Config) -> Result<MapReport> {
    let s = &file.spec;
    let arcs = map_arcs(file, wedge, cfg)?;
    let bundle: MapBundle = assemble_case_iv(s, [&arcs[0], &arcs[1], &arcs[2], &arcs[3]], cfg)?;
    let ys = cfg.schedule.clamped(s.eps).ys();
    let (mut graph_error, mut roundtrip_error) = (0.0f64, 0.0f64);
    for &y in &ys {
        let (lo, hi) = (arcs[0].eval(y), arcs[3].eval(y));
        for k in 0..=100 {
            let x = lo + (hi - lo) * k as f64 / 100.0;
            let p = [x, y, (bundle.target)(x, y)];
            let q = bundle.eval_map(p);
            let fz = s.f.value(q[0], q[1])?;
            graph_error = graph_error.max((q[2] - fz).abs() / y);
            let r = bundle.eval_inverse(q);
            roundtrip_error = roundtrip_error.max(((r[0] - p[0]).abs() + (r[2] - p[2]).abs()) / y);
        }
    }
    Ok(MapReport {
        surface: s.name.clone(),
        wedge,
        c: cfg.map.c,
        charts: bundle
            .charts
            .iter()
            .map(|c| ChartSummary { label: c.label.clone(), left: c.left.clone(), right: c.right.clone() })
            .collect(),
        target_lip: bundle.target_lip,
        target_lipschitz: bundle.target_lipschitz,
        graph_error,
        roundtrip_error,
        overlap_disagreement: bundle.overlap_disagreement(&ys, 40),
        distortion: bundle.distortion,
        arcs,
        tool_version: TOOL_VERSION,
    })
}
