//! Dataset manifests: JSON, or CSV converted to the same schema.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// One case; every file role is optional and paths are relative to the
/// manifest's base directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flair: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lesion_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atlas: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wm_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
}

/// File roles in schema order.
pub const ROLES: [&str; 8] = [
    "flair",
    "lesion_mask",
    "atlas",
    "wm_mask",
    "t1",
    "t2",
    "prediction",
    "gt",
];

impl Case {
    pub fn role(&self, role: &str) -> Option<&Path> {
        match role {
            "flair" => self.flair.as_deref(),
            "lesion_mask" => self.lesion_mask.as_deref(),
            "atlas" => self.atlas.as_deref(),
            "wm_mask" => self.wm_mask.as_deref(),
            "t1" => self.t1.as_deref(),
            "t2" => self.t2.as_deref(),
            "prediction" => self.prediction.as_deref(),
            "gt" => self.gt.as_deref(),
            _ => None,
        }
    }

    fn role_mut(&mut self, role: &str) -> Option<&mut Option<PathBuf>> {
        Some(match role {
            "flair" => &mut self.flair,
            "lesion_mask" => &mut self.lesion_mask,
            "atlas" => &mut self.atlas,
            "wm_mask" => &mut self.wm_mask,
            "t1" => &mut self.t1,
            "t2" => &mut self.t2,
            "prediction" => &mut self.prediction,
            "gt" => &mut self.gt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Base directory for case paths. Relative values are resolved against
    /// the manifest file's directory; absent means that directory itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_dir: Option<PathBuf>,
    pub cases: Vec<Case>,
}

/// A manifest with its base directory resolved.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub base_dir: PathBuf,
    pub cases: Vec<Case>,
}

impl LoadedManifest {
    /// Absolute-or-cwd-relative path of a role, or an error naming the case.
    pub fn path(&self, case: &Case, role: &str) -> Result<PathBuf, String> {
        case.role(role)
            .map(|p| self.base_dir.join(p))
            .ok_or_else(|| format!("case {:?} has no {role} file", case.id))
    }
}

impl Manifest {
    pub fn validate(&self) -> Result<(), CliError> {
        let mut seen = HashSet::new();
        for case in &self.cases {
            if case.id.is_empty() {
                return Err(CliError::Usage("manifest case with empty id".into()));
            }
            if case.id == "." || case.id == ".." || case.id.contains(['/', '\\']) {
                return Err(CliError::Usage(format!(
                    "case id {:?} must not contain path separators",
                    case.id
                )));
            }
            if !seen.insert(&case.id) {
                return Err(CliError::Usage(format!("duplicate case id {:?}", case.id)));
            }
            for role in ROLES {
                if case.role(role).is_some_and(Path::is_absolute) {
                    return Err(CliError::Usage(format!(
                        "case {:?}: {role} path must be relative to the base directory",
                        case.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses CSV with an `id` column and any of the role columns; empty
    /// cells mean the role is absent.
    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| CliError::Usage(format!("manifest CSV header: {e}")))?
            .clone();
        if !headers.iter().any(|h| h == "id") {
            return Err(CliError::Usage("manifest CSV needs an id column".into()));
        }
        if let Some(h) = headers.iter().find(|h| *h != "id" && !ROLES.contains(h)) {
            return Err(CliError::Usage(format!("unknown manifest CSV column {h:?}")));
        }
        let mut cases = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CliError::Usage(format!("manifest CSV row {}: {e}", row + 2)))?;
            let mut case = Case::default();
            for (h, value) in headers.iter().zip(record.iter()) {
                if h == "id" {
                    case.id = value.to_string();
                } else if !value.is_empty() {
                    *case.role_mut(h).expect("checked header") = Some(PathBuf::from(value));
                }
            }
            cases.push(case);
        }
        Ok(Self { base_dir: None, cases })
    }

    /// Reads JSON, or CSV when the file name ends in `.csv`.
    pub fn load(path: &Path) -> Result<LoadedManifest, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let manifest = if is_csv {
            Self::from_csv(&text)?
        } else {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))?
        };
        manifest.validate()?;
        let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let base_dir = match &manifest.base_dir {
            Some(b) => dir.join(b),
            None => dir,
        };
        Ok(LoadedManifest {
            base_dir,
            cases: manifest.cases,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matches_json() {
        let csv = "id,flair,lesion_mask,atlas\nc1,a/f.nii.gz,a/m.nii.gz,\nc2,b/f.nii.gz,,b/at.nii.gz\n";
        let m = Manifest::from_csv(csv).unwrap();
        let json: Manifest = serde_json::from_str(
            r#"{"cases": [
                {"id": "c1", "flair": "a/f.nii.gz", "lesion_mask": "a/m.nii.gz"},
                {"id": "c2", "flair": "b/f.nii.gz", "atlas": "b/at.nii.gz"}
            ]}"#,
        )
        .unwrap();
        assert_eq!(m, json);
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(Manifest::from_csv("name,flair\nx,y\n").is_err());
        assert!(Manifest::from_csv("id,flair,colour\nx,y,z\n").is_err());
        let dup: Manifest = serde_json::from_str(r#"{"cases": [{"id": "a"}, {"id": "a"}]}"#).unwrap();
        assert!(dup.validate().is_err());
        let abs: Manifest = serde_json::from_str(r#"{"cases": [{"id": "a", "gt": "/x.nii"}]}"#).unwrap();
        assert!(abs.validate().is_err());
        assert!(serde_json::from_str::<Manifest>(r#"{"cases": [{"id": "a", "mask": "x"}]}"#).is_err());
    }
}
