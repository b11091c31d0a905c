//! Run orchestration: scenario resolution, artifact naming, deterministic
//! manifests, and cleanup of partial output on failure.
//!
//! Artifacts are named `<command>-<wall>-<hash8><suffix>` where `hash8` is a
//! SHA-256 prefix over the canonical scenario JSON, the command name, and the
//! command's effective parameters. Worker count is deliberately excluded: it
//! may change wall time but never bytes. Timings go to stderr only, so every
//! file — including `manifest.json` — is reproducible from (config, seed,
//! version).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use gratewave_core::error::{Error, Result};
use gratewave_core::geom::PathTraceLimits;
use gratewave_core::io;
use gratewave_core::scenario::Scenario;
use gratewave_core::wall::WallModel;

/// The bundled reference configuration: 2.4 GHz, 30λ × 30λ room, 6-element
/// λ/2 arrays 15λ apart, grating wall with p = 2λ.
pub const DEFAULT_SCENARIO: &str = include_str!("default_scenario.json");

/// Soft cap on estimated Green's-function path evaluations per run; beyond
/// it a stderr warning suggests `--scale` or coarser grids.
pub const EVAL_BUDGET: f64 = 1e9;

/// Resolved inputs shared by every subcommand.
pub struct RunContext {
    pub scenario: Scenario,
    pub out_dir: PathBuf,
}

/// Load the configured (or bundled) scenario, then apply the seed override
/// and geometric scale in that order; the hash sees the final state.
pub fn resolve_scenario(
    config: Option<&Path>,
    scale: Option<f64>,
    seed: Option<u64>,
) -> Result<Scenario> {
    let mut scn = match config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::from_json(DEFAULT_SCENARIO, None)?,
    };
    if let Some(s) = seed {
        scn.seed = s;
    }
    match scale {
        Some(f) if f != 1.0 => scn.scaled(f),
        _ => Ok(scn),
    }
}

/// Files produced by one command invocation, tracked so a failure anywhere
/// removes everything written so far.
pub struct ArtifactSet {
    dir: PathBuf,
    stem: String,
    names: Vec<String>,
    written: Vec<PathBuf>,
}

impl ArtifactSet {
    fn new(dir: &Path, command: &str, wall_tag: &str, hash8: &str) -> ArtifactSet {
        ArtifactSet {
            dir: dir.to_path_buf(),
            stem: format!("{command}-{wall_tag}-{hash8}"),
            names: Vec::new(),
            written: Vec::new(),
        }
    }

    /// Produce one artifact `<stem><suffix>` through `f`; the path is
    /// tracked for cleanup before `f` runs so even a partial file is
    /// removed if it fails.
    pub fn produce<T>(&mut self, suffix: &str, f: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
        let name = format!("{}{suffix}", self.stem);
        let path = self.dir.join(&name);
        self.written.push(path.clone());
        let value = f(&path)?;
        self.names.push(name);
        Ok(value)
    }

    fn write_manifest(&mut self, manifest: &serde_json::Value) -> Result<()> {
        let path = self.dir.join("manifest.json");
        self.written.push(path.clone());
        io::write_json(&path, manifest)
    }

    fn cleanup(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

/// First 8 hex digits of SHA-256 over the run's identifying inputs.
fn run_hash(canonical_config: &str, command: &str, params: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    h.update(canonical_config.as_bytes());
    h.update(b"\n");
    h.update(command.as_bytes());
    for (key, value) in params {
        h.update(b"\n");
        h.update(key.as_bytes());
        h.update(b"=");
        h.update(value.as_bytes());
    }
    let digest = h.finalize();
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

/// Run one command's artifact production under the naming, manifest, and
/// cleanup contract: `fill` writes artifacts through the [`ArtifactSet`],
/// and either every file (plus `manifest.json`) lands or none do.
pub fn deliver(
    ctx: &RunContext,
    command: &'static str,
    wall_tag: &str,
    params: &[(String, String)],
    fill: impl FnOnce(&mut ArtifactSet) -> Result<()>,
) -> Result<()> {
    fs::create_dir_all(&ctx.out_dir).map_err(|e| {
        Error::Config(format!("cannot create output directory {}: {e}", ctx.out_dir.display()))
    })?;
    let canonical = ctx.scenario.canonical_json();
    let hash = run_hash(&canonical, command, params);
    let mut art = ArtifactSet::new(&ctx.out_dir, command, wall_tag, &hash);
    let started = Instant::now();
    let outcome = fill(&mut art).and_then(|()| {
        let config: serde_json::Value = serde_json::from_str(&canonical)
            .map_err(|e| Error::Parse(format!("canonical config round-trip: {e}")))?;
        let params_obj: serde_json::Map<String, serde_json::Value> = params
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let manifest = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "wall": wall_tag,
            "hash": hash,
            "params": params_obj,
            "config": config,
            "artifacts": art.names,
        });
        art.write_manifest(&manifest)
    });
    match outcome {
        Ok(()) => {
            eprintln!(
                "{command}: wrote {} artifact(s) + manifest.json to {} in {:.2} s",
                art.names.len(),
                ctx.out_dir.display(),
                started.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Err(e) => {
            art.cleanup();
            Err(e)
        }
    }
}

/// Loose upper estimate of image/beam paths folded into one Green's-function
/// evaluation, used only to warn about desk-scale runtime before starting.
pub fn paths_per_eval(wall: &WallModel, limits: &PathTraceLimits) -> f64 {
    match wall {
        WallModel::FreeSpace => 1.0,
        WallModel::Pec => {
            let n = (2 * limits.max_image_order + 1) as f64;
            n * n
        }
        WallModel::Drywall(_) => {
            let b = (2 * limits.max_bounces + 1) as f64;
            b * b
        }
        WallModel::Grating(g) => {
            1.0 + gratewave_core::greens::grating_branch_bound(limits.max_bounces, g.max_order)
                as f64
        }
    }
}

/// Warn on stderr when the estimated path count exceeds [`EVAL_BUDGET`].
pub fn warn_if_heavy(command: &str, estimated_paths: f64) {
    if estimated_paths > EVAL_BUDGET {
        eprintln!(
            "warning: {command} needs roughly {estimated_paths:.2e} path evaluations \
             (soft budget {EVAL_BUDGET:.0e}); consider --scale, a coarser grid_spacing, \
             or smaller limits"
        );
    }
}
