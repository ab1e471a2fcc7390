//! Out-of-process lesion editors.
//!
//! Each call creates a fresh request directory containing
//!
//! - `volume.nii.gz`: the image (float64),
//! - `mask.nii.gz`: the region to edit (uint8),
//! - `context_exclusion.nii.gz`: voxels not to use as healthy context (uint8),
//! - `request.json`: `{"mode": "inpaint" | "generate", "seed": u64, "blend_margin": 2}`.
//!
//! The handler is run as `program [args...] <request_dir>` and must write
//! `output.nii.gz` with the input geometry. A nonzero exit, a timeout or
//! a missing or mismatched output is an editor failure; the request
//! directory is then kept for inspection. Handler stdout and stderr go to
//! `handler.stdout` and `handler.stderr` in the same directory.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::editor::{EditMode, LesionEditor, BLEND_MARGIN};
use crate::error::EditorFailureKind;
use crate::volume::{load_mask, load_volume, save_mask, save_volume, DataType};
use crate::{BinaryMask, Error, Result, Volume};

/// Environment variable overriding the scratch root.
pub const SCRATCH_ENV: &str = "LESIONFORGE_SCRATCH";

pub const DEFAULT_TIMEOUT_SECS: f64 = 120.0;

const DIAGNOSTIC_BYTES: usize = 4096;

/// Contents of `request.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRequest {
    pub mode: EditMode,
    pub seed: u64,
    pub blend_margin: u8,
}

/// How to launch a request handler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditorDescriptor {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

impl EditorDescriptor {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

/// Editor that delegates to an external handler process.
#[derive(Debug, Clone)]
pub struct ExternalEditor {
    descriptor: EditorDescriptor,
    scratch_root: Option<PathBuf>,
}

/// Builds an [`ExternalEditor`]; the scratch root comes from
/// [`SCRATCH_ENV`] when set, else the system temp directory.
pub fn external_editor(descriptor: EditorDescriptor) -> Result<ExternalEditor> {
    if !(descriptor.timeout_secs.is_finite() && descriptor.timeout_secs > 0.0) {
        return Err(Error::Parameter(format!(
            "editor timeout must be > 0 s, got {}",
            descriptor.timeout_secs
        )));
    }
    let scratch_root = std::env::var_os(SCRATCH_ENV).map(PathBuf::from);
    Ok(ExternalEditor {
        descriptor,
        scratch_root,
    })
}

impl ExternalEditor {
    pub fn with_scratch_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.scratch_root = Some(root.into());
        self
    }

    pub fn descriptor(&self) -> &EditorDescriptor {
        &self.descriptor
    }

    fn failure(kind: EditorFailureKind, diagnostics: String, dir: &Path) -> Error {
        Error::EditorFailure {
            kind,
            diagnostics,
            request_dir: Some(dir.to_path_buf()),
        }
    }

    fn run(&self, dir: &Path, volume: &Volume) -> Result<Volume> {
        let stdout = File::create(dir.join("handler.stdout"))?;
        let stderr = File::create(dir.join("handler.stderr"))?;
        let mut child = Command::new(&self.descriptor.program)
            .args(&self.descriptor.args)
            .arg(dir)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| {
                Self::failure(
                    EditorFailureKind::Spawn,
                    format!("{}: {e}", self.descriptor.program.display()),
                    dir,
                )
            })?;
        let timeout = Duration::from_secs_f64(self.descriptor.timeout_secs);
        let status = match child.wait_timeout(timeout)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Self::failure(
                    EditorFailureKind::Timeout,
                    format!("no result after {:.1} s; {}", self.descriptor.timeout_secs, tail_log(dir)),
                    dir,
                ));
            }
        };
        if !status.success() {
            return Err(Self::failure(EditorFailureKind::Exit(status.code()), tail_log(dir), dir));
        }
        let output = dir.join("output.nii.gz");
        let edited = load_volume(&output).map_err(|e| {
            Self::failure(EditorFailureKind::MissingOutput, format!("{}: {e}", output.display()), dir)
        })?;
        if !edited.geometry().matches(volume.geometry()) {
            return Err(Self::failure(
                EditorFailureKind::GeometryMismatch,
                format!(
                    "expected dims {:?} spacing {:?}, got dims {:?} spacing {:?}",
                    volume.dims(),
                    volume.geometry().spacing(),
                    edited.dims(),
                    edited.geometry().spacing()
                ),
                dir,
            ));
        }
        // Keep the caller's geometry bit-for-bit.
        volume.with_data(edited.into_data())
    }
}

fn tail_log(dir: &Path) -> String {
    let read = |name: &str| {
        let bytes = fs::read(dir.join(name)).unwrap_or_default();
        let start = bytes.len().saturating_sub(DIAGNOSTIC_BYTES);
        String::from_utf8_lossy(&bytes[start..]).trim().to_string()
    };
    format!("stderr: {:?}", read("handler.stderr"))
}

impl LesionEditor for ExternalEditor {
    fn edit(
        &self,
        mode: EditMode,
        volume: &Volume,
        region: &BinaryMask,
        context_exclusion: &BinaryMask,
        seed: u64,
    ) -> Result<Volume> {
        let root = self.scratch_root.clone().unwrap_or_else(std::env::temp_dir);
        fs::create_dir_all(&root)?;
        let dir = tempfile::Builder::new().prefix("lesionforge-edit-").tempdir_in(&root)?;
        write_request(
            dir.path(),
            volume,
            region,
            context_exclusion,
            &EditRequest {
                mode,
                seed,
                blend_margin: BLEND_MARGIN,
            },
        )?;
        match self.run(dir.path(), volume) {
            Ok(v) => Ok(v),
            Err(e) => {
                let kept = dir.keep();
                log::error!("editor request kept at {}", kept.display());
                Err(e)
            }
        }
    }

    fn name(&self) -> String {
        let mut parts = vec![self.descriptor.program.display().to_string()];
        parts.extend(self.descriptor.args.iter().cloned());
        parts.join(" ")
    }
}

/// Writes the request files into `dir`.
pub fn write_request(
    dir: &Path,
    volume: &Volume,
    region: &BinaryMask,
    context_exclusion: &BinaryMask,
    request: &EditRequest,
) -> Result<()> {
    save_volume(volume, dir.join("volume.nii.gz"), DataType::Float64)?;
    save_mask(region, dir.join("mask.nii.gz"))?;
    save_mask(context_exclusion, dir.join("context_exclusion.nii.gz"))?;
    fs::write(dir.join("request.json"), serde_json::to_vec_pretty(request)?)?;
    Ok(())
}

/// Handler side of the protocol: reads a request directory, runs `editor`
/// and writes `output.nii.gz` (float64).
pub fn serve_request(dir: &Path, editor: &dyn LesionEditor) -> Result<()> {
    let request: EditRequest = serde_json::from_slice(&fs::read(dir.join("request.json"))?)?;
    let volume = load_volume(dir.join("volume.nii.gz"))?;
    let region = load_mask(dir.join("mask.nii.gz"))?;
    let exclusion_path = dir.join("context_exclusion.nii.gz");
    let exclusion = if exclusion_path.exists() {
        load_mask(exclusion_path)?
    } else {
        BinaryMask::empty(volume.geometry().clone())
    };
    let edited = editor.edit(request.mode, &volume, &region, &exclusion, request.seed)?;
    save_volume(&edited, dir.join("output.nii.gz"), DataType::Float64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_json_shape() {
        let r = EditRequest {
            mode: EditMode::Generate,
            seed: 42,
            blend_margin: 2,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"mode":"generate","seed":42,"blend_margin":2}"#
        );
    }

    #[test]
    fn descriptor_defaults() {
        let d: EditorDescriptor = serde_json::from_str(r#"{"program": "/bin/true"}"#).unwrap();
        assert_eq!(d.timeout_secs, 120.0);
        assert!(d.args.is_empty());
        let mut bad = d.clone();
        bad.timeout_secs = 0.0;
        assert!(external_editor(bad).is_err());
    }
}
