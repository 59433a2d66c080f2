//! Result bundles: CSV tables plus a metadata document, written atomically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nphoton::kernels::SamplingReport;
use nphoton::scenarios::pipeline::{run_pipeline, PipelineScene};
use nphoton::scenarios::{run_example2, Example1Config, Example1Setup, Example2Config};
use nphoton::{TransverseGrid, ValidityReport};
use serde::Serialize;
use serde_json::{json, Value};

use crate::scene::Scene;

pub struct Bundle {
    pub files: Vec<(String, String)>,
    pub metadata: Value,
    /// Validity or sampling warnings, which `--strict` turns into exit 2.
    pub warnings: Vec<String>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn profile_csv(grid: &TransverseGrid, intensity: &[f64], phase: Option<&[f64]>) -> String {
    let mut out = String::from("x_m,intensity,phase_rad\n");
    for (i, x) in grid.samples().enumerate() {
        let p = phase.map_or(f64::NAN, |p| p[i]);
        let _ = writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(intensity[i]), fmt_f64(p));
    }
    out
}

pub fn coincidence_csv(g1: &TransverseGrid, g2: &TransverseGrid, density: &[f64]) -> String {
    let mut out = String::from("x1_m,x2_m,density\n");
    for (i, x1) in g1.samples().enumerate() {
        for (j, x2) in g2.samples().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(x1),
                fmt_f64(x2),
                fmt_f64(density[i * g2.len() + j])
            );
        }
    }
    out
}

#[derive(Serialize)]
struct GridInfo {
    name: String,
    z_m: f64,
    first_m: f64,
    last_m: f64,
    spacing_m: f64,
    count: usize,
}

fn grid_info(name: &str, g: &TransverseGrid) -> GridInfo {
    GridInfo {
        name: name.to_string(),
        z_m: g.z(),
        first_m: g.first(),
        last_m: g.last(),
        spacing_m: g.spacing(),
        count: g.len(),
    }
}

fn sampling_warnings(reports: &[SamplingReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| r.aliased)
        .map(|r| format!("aliased kernel {}: phase step {:.3} rad", r.label, r.max_phase_step_rad))
        .collect()
}

fn warnings(validity: Option<&ValidityReport>, sampling: &[SamplingReport]) -> Vec<String> {
    let mut w: Vec<String> = validity.map(|v| v.warnings.clone()).unwrap_or_default();
    w.extend(sampling_warnings(sampling));
    w
}

fn header(scene: &Scene, source: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert(
        "software".into(),
        json!({"name": "nphoton", "version": env!("CARGO_PKG_VERSION")}),
    );
    m.insert("scene_source".into(), json!(source));
    m.insert("scene".into(), serde_json::to_value(scene).expect("scene serializes"));
    m
}

pub fn run(scene: &Scene, source: &str) -> anyhow::Result<Bundle> {
    let mut meta = header(scene, source);
    let (files, warnings) = match scene {
        Scene::Example1(c) => example1(c, &mut meta)?,
        Scene::Example2(c) => example2(c, &mut meta)?,
        Scene::Pipeline(p) => pipeline(p, &mut meta)?,
    };
    meta.insert("warnings".into(), json!(warnings));
    Ok(Bundle {
        files,
        metadata: Value::Object(meta),
        warnings,
    })
}

type Files = Vec<(String, String)>;

fn example1(c: &Example1Config, meta: &mut serde_json::Map<String, Value>) -> anyhow::Result<(Files, Vec<String>)> {
    let setup = Example1Setup::build(c)?;
    let r = setup.run(c.phase_rad)?;
    let phase: Vec<f64> = r.amplitude.iter().map(|a| a.arg()).collect();
    let mut files = vec![(
        "profile_a.csv".to_string(),
        profile_csv(&r.grid, &r.profile, Some(&phase)),
    )];
    if let Some(o) = &r.oracle_profile {
        files.push(("oracle_a.csv".to_string(), profile_csv(&r.grid, o, None)));
    }
    let grids = vec![
        grid_info("source", &c.source_grid.at(0.0)?),
        grid_info("mask", &c.mask_grid.at(c.s0_m + c.s2_m)?),
        grid_info("detector_a", &r.grid),
        grid_info("detector_b", &c.detector_b_grid.at(c.s0_m + c.s2_m + c.s3_m)?),
    ];
    meta.insert("grids".into(), json!(grids));
    meta.insert("validity".into(), json!(r.validity));
    meta.insert("sampling".into(), json!(r.sampling));
    meta.insert(
        "results".into(),
        json!({
            "phase_rad": r.phase_rad,
            "tau_s": r.tau_s,
            "herald_time_offset_s": r.herald_time_offset_s,
            "envelope_factor": r.envelope_factor,
            "herald_probability_density": r.herald_probability_density,
            "ghost_distance_m": c.ghost_distance(),
            "nominal_period_m": r.nominal_period_m,
            "fringe_period_m": r.fringe_period_m,
            "visibility": r.visibility,
            "oracle_l2": r.oracle_l2,
            "norm_a": nphoton::grid::vector_norm(&r.grid, &r.amplitude),
            "terms": r.terms,
            "branches": r.branches,
            "merged": r.merged,
        }),
    );
    Ok((files, warnings(Some(&r.validity), &r.sampling)))
}

fn example2(c: &Example2Config, meta: &mut serde_json::Map<String, Value>) -> anyhow::Result<(Files, Vec<String>)> {
    let r = run_example2(c)?;
    let n = r.grid.len();
    let t = r.conditional.tensor();
    let density: Vec<f64> = (0..n * n).map(|k| t[[k / n, k % n]].norm_sqr()).collect();
    let files = vec![
        (
            "diagonal.csv".to_string(),
            profile_csv(&r.grid, &r.diagonal_profile, Some(&r.diagonal_phase_rad)),
        ),
        (
            "coincidence_a.csv".to_string(),
            coincidence_csv(&r.grid, &r.grid, &density),
        ),
    ];
    let z_lens = c.s0_m + c.s1_m;
    let mut grids = vec![
        grid_info("source", &c.source_grid.at(0.0)?),
        grid_info("imaging_lens", &c.imaging_lens_grid.at(z_lens)?),
        grid_info("detector_a", &r.grid),
        grid_info("detector_b", &c.detector_b_grid.at(c.s0_m + c.s3_m + c.s4_m)?),
    ];
    if r.f2_m.is_some() {
        grids.push(grid_info("herald_lens", &c.herald_lens_grid.at(c.s0_m + c.s3_m)?));
    }
    meta.insert("grids".into(), json!(grids));
    meta.insert("validity".into(), json!(r.validity));
    meta.insert("sampling".into(), json!(r.sampling));
    meta.insert(
        "results".into(),
        json!({
            "magnification": r.magnification,
            "f1_m": r.f1_m,
            "f2_m": r.f2_m,
            "flatness": r.flatness,
            "diagonal_support": r.diagonal_support,
            "imaged_rms_m": r.imaged_rms_m,
            "expected_rms_m": r.expected_rms_m,
            "phase_curvature_rad_per_m2": r.phase_curvature,
            "exchange_asymmetry": r.exchange_asymmetry,
            "herald_probability_density": r.herald_probability_density,
            "herald_time_offsets_s": r.herald_time_offsets_s,
            "envelope_factor": r.envelope_factor,
            "norm_conditional": r.conditional.norm(),
            "terms": r.terms,
            "branches": r.branches,
        }),
    );
    Ok((files, warnings(Some(&r.validity), &r.sampling)))
}

fn pipeline(p: &PipelineScene, meta: &mut serde_json::Map<String, Value>) -> anyhow::Result<(Files, Vec<String>)> {
    let r = run_pipeline(p)?;
    let mut files = Vec::new();
    let mut grids = Vec::new();
    for (i, g) in p.source.grids()?.iter().enumerate() {
        grids.push(grid_info(&format!("source_{i}"), g));
    }
    for prof in &r.profiles {
        let name = format!("profile_{}.csv", prof.photon);
        files.push((
            name,
            profile_csv(&prof.grid, &prof.intensity, prof.phase_rad.as_deref()),
        ));
        grids.push(grid_info(&format!("output_{}", prof.photon), &prof.grid));
    }
    for c in &r.coincidences {
        let [a, b] = c.photons;
        files.push((
            format!("coincidence_{a}_{b}.csv"),
            coincidence_csv(&c.grids[0], &c.grids[1], &c.density),
        ));
        for (k, g) in c.photons.iter().zip(&c.grids) {
            let name = format!("output_{k}");
            if !grids.iter().any(|gi| gi.name == name) {
                grids.push(grid_info(&name, g));
            }
        }
    }
    meta.insert("grids".into(), json!(grids));
    meta.insert("validity".into(), Value::Null);
    meta.insert("sampling".into(), json!(r.sampling));
    meta.insert(
        "results".into(),
        json!({
            "input_norm": r.input_norm,
            "branches": r.branches,
            "branch_count": r.branches.len(),
            "terms": r.terms,
            "merged": r.merged,
        }),
    );
    Ok((files, warnings(None, &r.sampling)))
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))
}

impl Bundle {
    pub fn metadata_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        s.push('\n');
        s
    }

    /// Every table is complete before anything touches `dir`; each file is
    /// written to a temporary name and renamed into place.
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            write_atomic(dir, name, contents)?;
        }
        write_atomic(dir, "metadata.json", &self.metadata_text())?;
        Ok(())
    }
}
